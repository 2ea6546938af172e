//! Shoot-growth simulation with threshold events and the growth-stop certificate.
//!
//! The simulation runs in `(x, y, z = 1/L)` coordinates. Growth happens only
//! while the hormone level `y` is above the threshold `y_f`, so spurts are
//! delimited by crossings of `y = y_f`. Growth has stopped for good as soon as
//! `V_m(x, y, z) <= V_m(sigma/gamma, y_f, z)`: the state then sits inside the
//! Lotka-Volterra oval whose top touches the threshold line, `z` is frozen
//! while `y <= y_f`, and `V_m` can only decrease, so the oval is never left.

use alloc::vec::Vec;

use crate::lyapunov::{plant_min_m, plant_spec, LyapunovError, LyapunovSpec};
use crate::models::{plant_field_l, plant_field_z, PlantParams};
use crate::ode::{integrate, Direction, EventSpec, IntegrateError, IntegratorConfig, Trajectory};
use crate::{DomainError, ParamError};

/// Label of the `y = y_f` crossing events recorded by [`simulate_plant`].
pub const THRESHOLD_EVENT: &str = "y=y_f";

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum PlantError {
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
    #[error(transparent)]
    InvalidParams(#[from] ParamError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("growth has not provably stopped by the end of the run")]
    NotStopped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateSpec {
    pub m: f64,
    pub spec: LyapunovSpec,
    pub y_f: f64,
}

impl CertificateSpec {
    /// Certificate with the shift `m` from [`plant_min_m`].
    pub fn new(p: &PlantParams) -> Self {
        let m = plant_min_m(p);
        Self {
            m,
            spec: plant_spec(p, m),
            y_f: p.threshold.y_f,
        }
    }

    /// Whether the threshold lies at or above the hormone equilibrium `v/sigma`.
    pub fn applicable(&self) -> bool {
        match self.spec {
            LyapunovSpec::Plant { sigma, v, .. } => self.y_f >= v / sigma,
            _ => false,
        }
    }

    /// `V_m(s) - V_m(sigma/gamma, y_f, z)`; non-positive iff the certificate holds.
    pub fn margin(&self, s: &[f64; 3]) -> Result<f64, LyapunovError> {
        let LyapunovSpec::Plant { gamma, sigma, .. } = self.spec else {
            return Err(LyapunovError::WrongRegime { expected: "plant" });
        };
        if !(s[0] > 0.0 && s[1] > 0.0 && s[2] > 0.0) {
            return Err(DomainError::new("certificate needs x, y, z > 0").into());
        }
        let top = self.spec.value(&[sigma / gamma, self.y_f, s[2]])?;
        Ok(self.spec.value(s)? - top)
    }
}

/// True once growth can never resume.
///
/// Only meaningful for `y_f >= v/sigma`: otherwise `(sigma/gamma, y_f)` is the
/// bottom of its oval rather than the top, and the test never passes.
pub fn certificate_holds(c: &CertificateSpec, s: &[f64; 3]) -> Result<bool, LyapunovError> {
    let margin = c.margin(s)?;
    Ok(c.applicable() && margin <= 0.0)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlantReport {
    pub stopped: bool,
    /// Last instant of growth; `None` unless `stopped`.
    pub t_star: Option<f64>,
    /// Length at the last sample, the final length when `stopped`.
    #[cfg_attr(feature = "serde", serde(rename = "L_star"))]
    pub l_star: f64,
    /// First sample time at which the certificate held.
    pub t_certificate: Option<f64>,
    /// Intervals with `y > y_f`, i.e. positive growth rate.
    pub growth_spurts: Vec<(f64, f64)>,
}

fn check_init(init: &[f64; 3]) -> Result<(), DomainError> {
    if init.iter().all(|&c| c > 0.0 && c.is_finite()) {
        Ok(())
    } else {
        Err(DomainError::new("plant initial state needs x, y, L > 0"))
    }
}

/// Integrates the plant system from `(x0, y0, L0)` in `(x, y, z)` coordinates.
///
/// The returned trajectory holds `(x, y, z)` samples together with every
/// crossing of `y = y_f`, labelled [`THRESHOLD_EVENT`].
pub fn simulate_plant(
    p: &PlantParams,
    init: [f64; 3],
    horizon: f64,
    config: &IntegratorConfig,
    sample_every: Option<f64>,
) -> Result<(Trajectory<3>, PlantReport), PlantError> {
    p.validate()?;
    check_init(&init)?;
    let y_f = p.threshold.y_f;
    let events = [EventSpec::new(
        THRESHOLD_EVENT,
        Direction::Any,
        false,
        move |s: &[f64; 3]| s[1] - y_f,
    )];
    let start = [init[0], init[1], 1.0 / init[2]];
    let traj = integrate(
        &plant_field_z(*p),
        start,
        (0.0, horizon),
        config,
        &events,
        sample_every,
    )?;

    let cert = CertificateSpec::new(p);
    let mut t_certificate = None;
    for s in &traj.samples {
        if certificate_holds(&cert, &s.state)? {
            t_certificate = Some(s.t);
            break;
        }
    }
    let (stopped, t_star) = match detect_stop(&traj, &cert) {
        Ok((t, _)) => (true, Some(t)),
        Err(PlantError::NotStopped) => (false, None),
        Err(e) => return Err(e),
    };
    let report = PlantReport {
        stopped,
        t_star,
        // z never increases, so this only undoes the rounding of 1/(1/L)
        l_star: f64::max(1.0 / traj.last().state[2], init[2]),
        t_certificate,
        growth_spurts: growth_spurts(&traj, y_f),
    };
    Ok((traj, report))
}

/// Same system in `(x, y, L)` coordinates, without event tracking.
pub fn simulate_plant_length_form(
    p: &PlantParams,
    init: [f64; 3],
    horizon: f64,
    config: &IntegratorConfig,
    sample_every: Option<f64>,
) -> Result<Trajectory<3>, PlantError> {
    p.validate()?;
    check_init(&init)?;
    Ok(integrate(
        &plant_field_l(*p),
        init,
        (0.0, horizon),
        config,
        &[],
        sample_every,
    )?)
}

fn growth_spurts(traj: &Trajectory<3>, y_f: f64) -> Vec<(f64, f64)> {
    let mut spurts = Vec::new();
    let mut open = (traj.first().state[1] > y_f).then_some(traj.first().t);
    for e in traj.events_labeled(THRESHOLD_EVENT) {
        match (e.direction, open) {
            (Direction::Rising, None) => open = Some(e.t),
            (Direction::Falling, Some(start)) => {
                spurts.push((start, e.t));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        spurts.push((start, traj.last().t));
    }
    spurts
}

/// Stopping time and final length of a run produced by [`simulate_plant`].
///
/// `t_star` is the last falling crossing of `y_f` (the start of the run if
/// `y` never rose above it), provided no rising crossing follows and the
/// certificate holds at some sample from `t_star` on.
pub fn detect_stop(traj: &Trajectory<3>, cert: &CertificateSpec) -> Result<(f64, f64), PlantError> {
    let first = traj.first();
    let t_star = match traj.events_labeled(THRESHOLD_EVENT).last() {
        Some(e) if e.direction == Direction::Falling => e.t,
        Some(_) => return Err(PlantError::NotStopped),
        None if first.state[1] <= cert.y_f => first.t,
        None => return Err(PlantError::NotStopped),
    };
    for s in traj.samples.iter().filter(|s| s.t >= t_star) {
        if certificate_holds(cert, &s.state)? {
            return Ok((t_star, 1.0 / traj.last().state[2]));
        }
    }
    Err(PlantError::NotStopped)
}
