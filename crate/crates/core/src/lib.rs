//! Simulation and Lyapunov analysis for the "damped" predator-prey family.
//!
//! The crate covers four related vector fields: the harmonic oscillator,
//! classical Lotka-Volterra, the damped predator-prey system (with its
//! within-host virus reading) and a three dimensional plant-growth model.
//! Each system comes with closed-form equilibria and an analytic Lyapunov
//! function, which are used to certify convergence, bound outbreak peaks and
//! detect when plant growth has stopped for good.
//!
//! The crate is `no_std` and only needs `alloc`. Enable the `std` feature to
//! link against the standard library and `serde` for (de)serializable
//! parameter and report records.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod math;

pub mod analysis;
pub mod lyapunov;
pub mod models;
pub mod ode;
pub mod plant;
pub mod root;

pub use analysis::{
    classify, convergence_check, equilibria, lv_first_integral, oscillator_energy,
    ConvergenceReport, EquilibriumReport, Regime, RegimeClassification,
};
pub use lyapunov::{
    make_spec, monotonicity_check, oval_y_roots, peak_bound, peak_bound_limit, plant_min_m,
    LyapunovSpec, MonotonicityReport, OvalLevel, PeakBoundReport,
};
pub use models::{
    damped_pp_field, lv_field, oscillator_field, plant_field_l, plant_field_z, threshold_f,
    virus_to_damped, DampedPPParams, LotkaVolterraParams, ModelParams, OscillatorParams,
    PlantParams, ThresholdShape, ThresholdSpec, VirusParams,
};
pub use ode::{
    integrate, Direction, Event, EventSpec, IntegrateError, IntegratorConfig, Sample, Termination,
    Trajectory, VectorField,
};
pub use plant::{
    certificate_holds, detect_stop, simulate_plant, simulate_plant_length_form, CertificateSpec,
    PlantError, PlantReport,
};
pub use root::{solve_newton_bracketed, solve_scalar_bracketed, RootError};

/// A state fell outside the region where a model or function is defined.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("state outside the admissible domain: {reason}")]
pub struct DomainError {
    pub reason: &'static str,
}

impl DomainError {
    pub const fn new(reason: &'static str) -> Self {
        Self { reason }
    }
}

/// Rejected parameter record.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("invalid parameter `{name}`: {reason}")]
pub struct ParamError {
    pub name: &'static str,
    pub reason: &'static str,
}
