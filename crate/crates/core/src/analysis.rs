//! Equilibria, regime classification, first integrals and convergence diagnostics.

use crate::math::{abs, hypot, ln};
use crate::models::{damped_pp_field, DampedPPParams, LotkaVolterraParams, OscillatorParams};
use crate::ode::{Trajectory, VectorField};
use crate::DomainError;

/// Distance from 1 within which the reproductive ratio counts as critical.
pub const CRITICAL_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("degenerate model: {0}")]
    DegenerateModel(&'static str),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquilibriumReport {
    /// prey-only state `(delta/alpha, 0)`
    pub boundary: [f64; 2],
    /// coexistence state `(sigma/gamma, a/beta)`, outside the quadrant when `a < 0`
    pub interior: [f64; 2],
    pub a: f64,
    pub interior_in_quadrant: bool,
    /// largest field magnitude at either point, relative to the parameter scale
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Regime {
    Coexistence,
    Extinction,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegimeClassification {
    #[cfg_attr(feature = "serde", serde(rename = "R"))]
    pub r: f64,
    pub regime: Regime,
    pub attractor: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergenceReport {
    pub target: [f64; 2],
    pub achieved: bool,
    /// Time the trajectory last entered the tolerance ball; `None` if the final sample is outside.
    pub t_enter: Option<f64>,
    /// Largest distance to the target over the tail window.
    pub max_distance_after: f64,
}

fn param_scale(p: &DampedPPParams) -> f64 {
    [p.alpha, p.beta, p.gamma, p.delta, p.sigma]
        .iter()
        .fold(1.0f64, |m, &v| m.max(abs(v)))
}

pub fn equilibria(p: &DampedPPParams) -> Result<EquilibriumReport, AnalysisError> {
    if p.delta <= 0.0 {
        return Err(AnalysisError::DegenerateModel(
            "delta = 0 leaves a line of equilibria instead of a boundary point",
        ));
    }
    let a = p.renewal();
    let boundary = [p.delta / p.alpha, 0.0];
    let interior = [p.sigma / p.gamma, a / p.beta];
    let field = damped_pp_field(*p);
    let extent = (1.0 + hypot(&boundary)).max(1.0 + hypot(&interior));
    let scale = param_scale(p) * extent * extent;
    let residual = hypot(&field.eval(&boundary)).max(hypot(&field.eval(&interior))) / scale;
    Ok(EquilibriumReport {
        boundary,
        interior,
        a,
        interior_in_quadrant: p.gamma * p.delta > p.sigma * p.alpha,
        residual,
    })
}

pub fn classify(p: &DampedPPParams) -> RegimeClassification {
    let r = p.reproductive_ratio();
    let regime = if abs(r - 1.0) <= CRITICAL_BAND {
        Regime::Critical
    } else if r > 1.0 {
        Regime::Coexistence
    } else {
        Regime::Extinction
    };
    let attractor = match regime {
        Regime::Coexistence => [p.sigma / p.gamma, p.renewal() / p.beta],
        Regime::Extinction | Regime::Critical => [p.delta / p.alpha, 0.0],
    };
    RegimeClassification {
        r,
        regime,
        attractor,
    }
}

/// Conserved quantity `gamma x - sigma ln x + beta y - a ln y` of Lotka-Volterra.
pub fn lv_first_integral(p: &LotkaVolterraParams, s: &[f64; 2]) -> Result<f64, DomainError> {
    let [x, y] = *s;
    if !(x > 0.0 && y > 0.0) {
        return Err(DomainError::new("first integral needs x > 0 and y > 0"));
    }
    Ok(p.gamma * x - p.sigma * ln(x) + p.beta * y - p.a * ln(y))
}

pub fn lv_first_integral_gradient(
    p: &LotkaVolterraParams,
    s: &[f64; 2],
) -> Result<[f64; 2], DomainError> {
    let [x, y] = *s;
    if !(x > 0.0 && y > 0.0) {
        return Err(DomainError::new("first integral needs x > 0 and y > 0"));
    }
    Ok([p.gamma - p.sigma / x, p.beta - p.a / y])
}

/// `x^2 + b y^2`, conserved for `a = 0` and decaying at rate `-2 a x^2` otherwise.
pub fn oscillator_energy(p: &OscillatorParams, s: &[f64; 2]) -> f64 {
    s[0] * s[0] + p.b * s[1] * s[1]
}

/// Tail-window convergence test: every sample in the last `tail_fraction` of
/// the trajectory must lie within `tol` (Euclidean) of `target`.
pub fn convergence_check<const N: usize>(
    traj: &Trajectory<N>,
    target: [f64; 2],
    tol: f64,
    tail_fraction: f64,
) -> ConvergenceReport {
    let n = traj.samples.len();
    let dist = |i: usize| {
        let s = &traj.samples[i].state;
        hypot(&[s[0] - target[0], s[1] - target[1]])
    };
    let tail = ((n as f64 * tail_fraction.clamp(0.0, 1.0)) as usize).clamp(1, n.max(1));
    let max_distance_after = (n - tail..n).map(dist).fold(0.0, f64::max);

    let t_enter = match (0..n).rev().find(|&i| !(dist(i) <= tol)) {
        None => Some(traj.samples[0].t),
        Some(i) if i + 1 < n => Some(traj.samples[i + 1].t),
        Some(_) => None,
    };
    ConvergenceReport {
        target,
        achieved: max_distance_after <= tol,
        t_enter,
        max_distance_after,
    }
}
