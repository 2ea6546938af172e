//! Analytic Lyapunov functions for the damped predator-prey family.
//!
//! Three regimes are covered:
//!
//! * **Coexistence** (`gamma delta > alpha sigma`): the Lotka-Volterra first
//!   integral `V = gamma x - sigma ln x + beta y - a ln y` with
//!   `a = gamma delta / sigma - alpha`, whose derivative along the damped flow
//!   is `-(gamma^2 delta / (sigma x)) (x - sigma/gamma)^2`.
//! * **Extinction** (`gamma delta <= alpha sigma`): `V = gamma x - b ln x + beta y`
//!   with `b = gamma delta / alpha`.
//! * **Plant**: `V_m = gamma x - sigma ln x + gamma z y - gamma z (v/sigma) ln y + m gamma z`
//!   on the `(x, y, z)` plant system, non-increasing once `m` lifts
//!   `y - (v/sigma) ln y + m` above zero.
//!
//! Sublevel sets of the coexistence function are closed ovals in the open
//! quadrant. The oval tangent to the line `x = delta/alpha` traps every
//! trajectory entering it, and its top gives the outbreak peak bound.

use crate::math::{abs, ln};
use crate::models::{DampedPPParams, ModelParams, PlantParams, VirusParams};
use crate::ode::{IntegratorConfig, Trajectory};
use crate::root::{solve_newton_bracketed, solve_scalar_bracketed, RootError};
use crate::DomainError;

/// Amount by which [`plant_min_m`] exceeds the analytic infimum.
pub const PLANT_M_MARGIN: f64 = 1e-6;

const ROOT_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum LyapunovError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("operation requires a {expected} function")]
    WrongRegime { expected: &'static str },
    #[error("parameters do not match the Lyapunov coefficients")]
    ParamsMismatch,
    #[error("level {remainder} lies below the oval minimum {minimum} at this abscissa")]
    BelowMinimum { remainder: f64, minimum: f64 },
    #[error("peak bound needs R > 1, got R = {r}")]
    NotCoexistence { r: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Root(#[from] RootError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "regime"))]
pub enum LyapunovSpec {
    Coexistence {
        gamma: f64,
        sigma: f64,
        beta: f64,
        a: f64,
    },
    Extinction {
        gamma: f64,
        beta: f64,
        b: f64,
    },
    Plant {
        gamma: f64,
        sigma: f64,
        v: f64,
        m: f64,
    },
}

/// Picks the coexistence function when `gamma delta > alpha sigma`, the
/// extinction one otherwise.
pub fn make_spec(p: &DampedPPParams) -> LyapunovSpec {
    if p.gamma * p.delta > p.alpha * p.sigma {
        LyapunovSpec::Coexistence {
            gamma: p.gamma,
            sigma: p.sigma,
            beta: p.beta,
            a: p.renewal(),
        }
    } else {
        LyapunovSpec::Extinction {
            gamma: p.gamma,
            beta: p.beta,
            b: p.delta * p.gamma / p.alpha,
        }
    }
}

pub fn plant_spec(p: &PlantParams, m: f64) -> LyapunovSpec {
    LyapunovSpec::Plant {
        gamma: p.gamma,
        sigma: p.sigma,
        v: p.v,
        m,
    }
}

fn close(a: f64, b: f64) -> bool {
    abs(a - b) <= 1e-12 * abs(a).max(abs(b)).max(1.0)
}

impl LyapunovSpec {
    pub fn dimension(&self) -> usize {
        match self {
            LyapunovSpec::Plant { .. } => 3,
            _ => 2,
        }
    }

    fn check(&self, s: &[f64]) -> Result<(), DomainError> {
        if s.len() < self.dimension() {
            return Err(DomainError::new("state has too few coordinates"));
        }
        if !(s[0] > 0.0) {
            return Err(DomainError::new("Lyapunov function needs x > 0"));
        }
        match self {
            LyapunovSpec::Coexistence { .. } if !(s[1] > 0.0) => Err(DomainError::new(
                "coexistence Lyapunov function needs y > 0",
            )),
            LyapunovSpec::Extinction { .. } if !(s[1] >= 0.0) => Err(DomainError::new(
                "extinction Lyapunov function needs y >= 0",
            )),
            LyapunovSpec::Plant { .. } if !(s[1] > 0.0 && s[2] >= 0.0) => Err(DomainError::new(
                "plant Lyapunov function needs y > 0 and z >= 0",
            )),
            _ => Ok(()),
        }
    }

    pub fn value(&self, s: &[f64]) -> Result<f64, LyapunovError> {
        self.check(s)?;
        let (x, y) = (s[0], s[1]);
        Ok(match *self {
            LyapunovSpec::Coexistence {
                gamma,
                sigma,
                beta,
                a,
            } => gamma * x - sigma * ln(x) + beta * y - a * ln(y),
            LyapunovSpec::Extinction { gamma, beta, b } => gamma * x - b * ln(x) + beta * y,
            LyapunovSpec::Plant { gamma, sigma, v, m } => {
                let z = s[2];
                gamma * x - sigma * ln(x) + gamma * z * (y - (v / sigma) * ln(y) + m)
            }
        })
    }

    /// Writes `grad V` into the first `dimension()` entries of `out`.
    pub fn gradient(&self, s: &[f64], out: &mut [f64]) -> Result<(), LyapunovError> {
        self.check(s)?;
        if out.len() < self.dimension() {
            return Err(DomainError::new("gradient buffer too short").into());
        }
        let (x, y) = (s[0], s[1]);
        match *self {
            LyapunovSpec::Coexistence {
                gamma,
                sigma,
                beta,
                a,
            } => {
                out[0] = gamma - sigma / x;
                out[1] = beta - a / y;
            }
            LyapunovSpec::Extinction { gamma, beta, b } => {
                out[0] = gamma - b / x;
                out[1] = beta;
            }
            LyapunovSpec::Plant { gamma, sigma, v, m } => {
                let z = s[2];
                let c = v / sigma;
                out[0] = gamma - sigma / x;
                out[1] = gamma * z * (1.0 - c / y);
                out[2] = gamma * (y - c * ln(y) + m);
            }
        }
        Ok(())
    }

    /// Closed-form derivative of `V` along trajectories of the model `params`.
    pub fn vdot(&self, params: &ModelParams, s: &[f64]) -> Result<f64, LyapunovError> {
        self.check(s)?;
        let (x, y) = (s[0], s[1]);
        match (*self, params) {
            (LyapunovSpec::Plant { gamma, sigma, v, m }, ModelParams::Plant(p)) => {
                if !(close(gamma, p.gamma) && close(sigma, p.sigma) && close(v, p.v)) {
                    return Err(LyapunovError::ParamsMismatch);
                }
                let z = s[2];
                let dx = x - sigma / gamma;
                let shifted = y - (v / sigma) * ln(y) + m;
                Ok(-(gamma * gamma * v * z / (sigma * x)) * dx * dx
                    - gamma * p.threshold.rate(y) * shifted * z * z)
            }
            (LyapunovSpec::Plant { .. }, _) => Err(LyapunovError::ParamsMismatch),
            (spec, other) => {
                let p = other.as_damped().ok_or(LyapunovError::ParamsMismatch)?;
                match spec {
                    LyapunovSpec::Coexistence {
                        gamma,
                        sigma,
                        beta,
                        a,
                    } => {
                        if !(close(gamma, p.gamma)
                            && close(sigma, p.sigma)
                            && close(beta, p.beta)
                            && close(a, p.renewal()))
                        {
                            return Err(LyapunovError::ParamsMismatch);
                        }
                        let dx = x - sigma / gamma;
                        Ok(-(gamma * gamma * p.delta / (sigma * x)) * dx * dx)
                    }
                    LyapunovSpec::Extinction { gamma, beta, b } => {
                        let boundary = p.delta / p.alpha;
                        if !(close(gamma, p.gamma)
                            && close(beta, p.beta)
                            && close(b, boundary * gamma))
                        {
                            return Err(LyapunovError::ParamsMismatch);
                        }
                        let dx = x - boundary;
                        Ok(-(p.alpha * gamma / x) * dx * dx
                            - beta * (p.sigma - boundary * gamma) * y)
                    }
                    LyapunovSpec::Plant { .. } => unreachable!(),
                }
            }
        }
    }
}

pub fn value(spec: &LyapunovSpec, s: &[f64]) -> Result<f64, LyapunovError> {
    spec.value(s)
}

pub fn vdot(spec: &LyapunovSpec, params: &ModelParams, s: &[f64]) -> Result<f64, LyapunovError> {
    spec.vdot(params, s)
}

/// Sublevel set `{V <= level}` of a two dimensional Lyapunov function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvalLevel {
    pub level: f64,
    pub spec: LyapunovSpec,
    pub anchor: [f64; 2],
}

impl OvalLevel {
    pub fn through(spec: LyapunovSpec, anchor: [f64; 2]) -> Result<Self, LyapunovError> {
        if spec.dimension() != 2 {
            return Err(LyapunovError::WrongRegime {
                expected: "two dimensional",
            });
        }
        Ok(Self {
            level: spec.value(&anchor)?,
            spec,
            anchor,
        })
    }

    pub fn contains(&self, s: &[f64; 2], slack: f64) -> Result<bool, LyapunovError> {
        Ok(self.spec.value(s)? <= self.level + slack)
    }
}

/// Default step-pair slack for [`monotonicity_check`]: ten absolute tolerances.
pub fn default_slack(config: &IntegratorConfig) -> f64 {
    10.0 * config.abs_tol
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonotonicityReport {
    pub monotone: bool,
    /// Largest `V(k+1) - V(k)` over the samples, zero if `V` never increases.
    pub worst_violation: f64,
    /// Index `k` of the sample pair with the largest increase.
    pub worst_index: Option<usize>,
}

pub fn monotonicity_check<const N: usize>(
    traj: &Trajectory<N>,
    spec: &LyapunovSpec,
    slack: f64,
) -> Result<MonotonicityReport, LyapunovError> {
    let mut worst = 0.0f64;
    let mut worst_index = None;
    let mut prev: Option<f64> = None;
    for (k, s) in traj.samples.iter().enumerate() {
        let v = spec.value(&s.state)?;
        if let Some(p) = prev {
            let inc = v - p;
            if inc > worst {
                worst = inc;
                worst_index = Some(k - 1);
            }
        }
        prev = Some(v);
    }
    Ok(MonotonicityReport {
        monotone: worst <= slack,
        worst_violation: worst,
        worst_index,
    })
}

/// Both solutions of `beta y - a ln y = r`, the oval's crossings of a vertical line.
fn y_roots(beta: f64, a: f64, r: f64) -> Result<(f64, f64), LyapunovError> {
    let y_min = a / beta;
    let minimum = a * (1.0 - ln(y_min));
    if r <= minimum {
        if minimum - r <= 4.0 * f64::EPSILON * abs(minimum).max(abs(r)).max(1.0) {
            return Ok((y_min, y_min));
        }
        return Err(LyapunovError::BelowMinimum {
            remainder: r,
            minimum,
        });
    }
    let g = |y: f64| beta * y - a * ln(y) - r;
    let dg = |y: f64| beta - a / y;
    let tol = ROOT_TOL * abs(r).max(1.0);

    let mut lo = 0.5 * y_min;
    while g(lo) <= 0.0 {
        lo *= 0.5;
        if lo == 0.0 {
            return Err(LyapunovError::Root(RootError::InvalidBracket {
                lo,
                hi: y_min,
            }));
        }
    }
    let y_low = solve_newton_bracketed(g, dg, (lo, y_min), tol)?;

    let mut hi = 2.0 * y_min;
    while g(hi) <= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(LyapunovError::Root(RootError::InvalidBracket {
                lo: y_min,
                hi,
            }));
        }
    }
    let y_high = solve_newton_bracketed(g, dg, (y_min, hi), tol)?;
    Ok((y_low, y_high))
}

/// Lower and upper `y` where the coexistence oval `V = level` crosses abscissa `x`.
pub fn oval_y_roots(spec: &LyapunovSpec, x: f64, level: f64) -> Result<(f64, f64), LyapunovError> {
    let LyapunovSpec::Coexistence {
        gamma,
        sigma,
        beta,
        a,
    } = *spec
    else {
        return Err(LyapunovError::WrongRegime {
            expected: "coexistence",
        });
    };
    if !(x > 0.0) {
        return Err(DomainError::new("oval abscissa must be positive").into());
    }
    y_roots(beta, a, level - (gamma * x - sigma * ln(x)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PeakBoundReport {
    /// Upper bound on `y(t)` for trajectories trapped by the tangent oval.
    pub y_bar: f64,
    /// Level of the oval tangent to `x = delta/alpha`.
    #[cfg_attr(feature = "serde", serde(rename = "C"))]
    pub level: f64,
    pub tangency_point: [f64; 2],
    /// `|lhs - rhs|` of the reproductive-ratio form of the peak equation at `y_bar`.
    pub equation_residual: f64,
    /// Bound in the limit of arbitrarily large infection rate.
    pub limit_value: f64,
}

/// Sides of the peak equation written in terms of `R`:
/// `y - c ln y = (sigma/beta)(R - 1 - ln R) + c (1 - ln c)` with `c = (alpha/beta)(R - 1)`.
fn ratio_form(p: &DampedPPParams) -> (f64, f64) {
    let r = p.reproductive_ratio();
    let c = p.alpha / p.beta * (r - 1.0);
    let rhs = p.sigma / p.beta * (r - 1.0 - ln(r)) + c * (1.0 - ln(c));
    (c, rhs)
}

fn ratio_form_residual(p: &DampedPPParams, y: f64) -> f64 {
    let (c, rhs) = ratio_form(p);
    abs(y - c * ln(y) - rhs)
}

fn require_coexistence(p: &DampedPPParams) -> Result<(), LyapunovError> {
    p.validate()
        .map_err(|e| LyapunovError::InvalidParams(e.name))?;
    let r = p.reproductive_ratio();
    if !(p.gamma * p.delta > p.alpha * p.sigma) || p.renewal() <= 0.0 {
        return Err(LyapunovError::NotCoexistence { r });
    }
    Ok(())
}

/// Peak bound from the oval tangent to `x = delta/alpha`.
pub fn peak_bound(p: &DampedPPParams) -> Result<PeakBoundReport, LyapunovError> {
    require_coexistence(p)?;
    let spec = make_spec(p);
    let tangency_point = [p.delta / p.alpha, p.renewal() / p.beta];
    let level = spec.value(&tangency_point)?;
    let (_, y_bar) = oval_y_roots(&spec, p.sigma / p.gamma, level)?;
    Ok(PeakBoundReport {
        y_bar,
        level,
        tangency_point,
        equation_residual: ratio_form_residual(p, y_bar),
        limit_value: limit_root(p.delta, p.alpha, p.sigma)?,
    })
}

/// Solves the reproductive-ratio form of the peak equation on its own, by
/// bracketed bisection. Agrees with [`peak_bound`]'s `y_bar`.
pub fn peak_bound_ratio_form(p: &DampedPPParams) -> Result<f64, LyapunovError> {
    require_coexistence(p)?;
    let (c, rhs) = ratio_form(p);
    let g = |y: f64| y - c * ln(y) - rhs;
    let mut hi = 2.0 * c;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    Ok(solve_scalar_bracketed(
        g,
        (c, hi),
        ROOT_TOL * abs(rhs).max(1.0),
    )?)
}

fn limit_root(delta: f64, alpha: f64, sigma: f64) -> Result<f64, LyapunovError> {
    if !(delta > 0.0 && alpha > 0.0 && sigma > 0.0) {
        return Err(LyapunovError::InvalidParams(
            "delta, alpha and sigma must be positive",
        ));
    }
    let c = delta / sigma;
    let rhs = delta / alpha + c * (1.0 - ln(c));
    let g = |y: f64| y - c * ln(y) - rhs;
    let mut hi = 2.0 * c;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    Ok(solve_newton_bracketed(
        g,
        |y| 1.0 - c / y,
        (c, hi),
        ROOT_TOL * rhs.max(1.0),
    )?)
}

/// Large-infection-rate limit of the peak bound, independent of `gamma` and `q`.
pub fn peak_bound_limit(p: &VirusParams) -> Result<f64, LyapunovError> {
    limit_root(p.delta, p.alpha, p.sigma)
}

/// Smallest shift `m` (plus [`PLANT_M_MARGIN`]) making the plant `V_m` non-increasing.
pub fn plant_min_m(p: &PlantParams) -> f64 {
    plant_min_m_with_margin(p, PLANT_M_MARGIN)
}

/// `y - c ln y` with `c = v/sigma` has minimum `c (1 - ln c)`; the shift must
/// cover that minimum when it is negative (`c > e`). For `c <= e` the larger
/// value `c (1 - ln c)` itself is used, which is also safe.
pub fn plant_min_m_with_margin(p: &PlantParams, margin: f64) -> f64 {
    let c = p.v / p.sigma;
    abs(c * (1.0 - ln(c))) + margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{damped_pp_field, ThresholdShape, ThresholdSpec};
    use crate::ode::{integrate, Sample, VectorField};
    use core::f64::consts::E;

    fn reference() -> DampedPPParams {
        DampedPPParams::new(1.0, 2.0, 1.0, 3.0, 1.0).unwrap()
    }

    fn virus_reference() -> DampedPPParams {
        // delta = alpha = sigma = 1, gamma = 2, q = 1
        DampedPPParams::new(1.0, 3.0, 2.0, 1.0, 1.0).unwrap()
    }

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let f_lo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (f_lo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn spec_selection() {
        assert_eq!(
            make_spec(&reference()),
            LyapunovSpec::Coexistence {
                gamma: 1.0,
                sigma: 1.0,
                beta: 2.0,
                a: 2.0
            }
        );
        let ext = DampedPPParams::new(1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(
            make_spec(&ext),
            LyapunovSpec::Extinction {
                gamma: 1.0,
                beta: 1.0,
                b: 1.0
            }
        );
        // critical: the linear-in-y term of the derivative vanishes
        let crit = DampedPPParams::new(2.0, 1.0, 3.0, 4.0, 6.0).unwrap();
        let spec = make_spec(&crit);
        assert_eq!(
            spec,
            LyapunovSpec::Extinction {
                gamma: 3.0,
                beta: 1.0,
                b: 6.0
            }
        );
        let params = ModelParams::DampedPP(crit);
        let on_line = spec.vdot(&params, &[2.0, 5.0]).unwrap();
        assert_eq!(on_line, 0.0);
    }

    #[test]
    fn values() {
        let c = LyapunovSpec::Coexistence {
            gamma: 1.0,
            sigma: 1.0,
            beta: 1.0,
            a: 1.0,
        };
        assert_eq!(c.value(&[1.0, 1.0]).unwrap(), 2.0);
        let e = LyapunovSpec::Extinction {
            gamma: 1.0,
            beta: 1.0,
            b: 1.0,
        };
        assert_eq!(e.value(&[1.0, 1.0]).unwrap(), 2.0);
        let p = LyapunovSpec::Plant {
            gamma: 2.0,
            sigma: 1.0,
            v: 1.0,
            m: 0.0,
        };
        assert_eq!(p.value(&[1.0, 1.0, 0.5]).unwrap(), 3.0);
    }

    #[test]
    fn domain_errors() {
        let c = make_spec(&reference());
        assert!(matches!(
            c.value(&[0.0, 1.0]),
            Err(LyapunovError::Domain(_))
        ));
        assert!(matches!(
            c.value(&[1.0, 0.0]),
            Err(LyapunovError::Domain(_))
        ));
        assert!(matches!(c.value(&[1.0]), Err(LyapunovError::Domain(_))));
        let e = LyapunovSpec::Extinction {
            gamma: 1.0,
            beta: 1.0,
            b: 1.0,
        };
        assert!(e.value(&[1.0, 0.0]).is_ok());
        let p = LyapunovSpec::Plant {
            gamma: 2.0,
            sigma: 1.0,
            v: 1.0,
            m: 0.0,
        };
        assert!(p.value(&[1.0, 1.0]).is_err());
        assert!(p.value(&[1.0, 1.0, -0.1]).is_err());
    }

    #[test]
    fn derivative_examples() {
        let p = reference();
        let spec = make_spec(&p);
        let params = ModelParams::DampedPP(p);
        assert_eq!(spec.vdot(&params, &[1.0, 0.3]).unwrap(), 0.0);
        assert_eq!(spec.vdot(&params, &[2.0, 1.0]).unwrap(), -1.5);

        let ext = DampedPPParams::new(1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        let spec = make_spec(&ext);
        assert_eq!(
            spec.vdot(&ModelParams::DampedPP(ext), &[1.0, 0.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn mismatched_params_rejected() {
        let spec = make_spec(&reference());
        let other = DampedPPParams::new(1.0, 2.0, 1.0, 4.0, 1.0).unwrap();
        assert_eq!(
            spec.vdot(&ModelParams::DampedPP(other), &[1.0, 1.0]),
            Err(LyapunovError::ParamsMismatch)
        );
        let plant = PlantParams::new(
            1.0,
            2.0,
            1.0,
            ThresholdSpec {
                y_f: 2.0,
                k: 1.0,
                shape: ThresholdShape::Ramp,
            },
        )
        .unwrap();
        assert_eq!(
            spec.vdot(&ModelParams::Plant(plant), &[1.0, 1.0]),
            Err(LyapunovError::ParamsMismatch)
        );
    }

    #[test]
    fn virus_params_accepted_for_vdot() {
        let v = VirusParams::new(1.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        let spec = make_spec(&virus_reference());
        assert!(spec.vdot(&ModelParams::Virus(v), &[0.7, 0.2]).unwrap() < 0.0);
    }

    #[test]
    fn oval_roots_exact_and_oracle() {
        let spec = LyapunovSpec::Coexistence {
            gamma: 2.0,
            sigma: 1.0,
            beta: 3.0,
            a: 1.0,
        };
        let level = 3.0 + ln(3.0);
        let (lo, hi) = oval_y_roots(&spec, 0.5, level).unwrap();
        assert!((hi - 2.0 / 3.0).abs() < 1e-12, "{hi}");
        let r = level - (1.0 - ln(0.5));
        let oracle = bisect(|y| 3.0 * y - ln(y) - r, 1e-6, 1.0 / 3.0);
        assert!((lo - oracle).abs() < 1e-10, "{lo} vs {oracle}");
        assert!((lo - 0.135_458_579_986_653_3).abs() < 1e-10);
        assert!(lo <= 1.0 / 3.0 && 1.0 / 3.0 <= hi);
    }

    #[test]
    fn oval_tangency_and_below_minimum() {
        let spec = LyapunovSpec::Coexistence {
            gamma: 2.0,
            sigma: 1.0,
            beta: 3.0,
            a: 1.0,
        };
        let x = 0.5;
        let minimum = 1.0 * (1.0 - ln(1.0 / 3.0));
        let level = minimum + (2.0 * x - ln(x));
        let (lo, hi) = oval_y_roots(&spec, x, level).unwrap();
        assert!((lo - 1.0 / 3.0).abs() < 1e-12 && (hi - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            oval_y_roots(&spec, x, level - 0.01),
            Err(LyapunovError::BelowMinimum { .. })
        ));
        let ext = LyapunovSpec::Extinction {
            gamma: 1.0,
            beta: 1.0,
            b: 1.0,
        };
        assert!(matches!(
            oval_y_roots(&ext, x, 5.0),
            Err(LyapunovError::WrongRegime { .. })
        ));
    }

    #[test]
    fn peak_bound_exact_two_thirds() {
        let r = peak_bound(&virus_reference()).unwrap();
        assert!((r.y_bar - 2.0 / 3.0).abs() < 1e-10);
        assert!((r.level - (3.0 + ln(3.0))).abs() < 1e-14);
        assert_eq!(r.tangency_point, [1.0, 1.0 / 3.0]);
        assert!(r.equation_residual <= 1e-10);
        let ratio = peak_bound_ratio_form(&virus_reference()).unwrap();
        assert!((ratio - r.y_bar).abs() < 1e-10);
    }

    #[test]
    fn peak_bound_reference_params() {
        let p = reference();
        let r = peak_bound(&p).unwrap();
        // level V(3, 1) and root of V(1, y) = level, frozen from an independent high-precision solve
        assert!((r.level - 3.901_387_711_331_89).abs() < 1e-12);
        assert!((r.y_bar - 2.270_846_544_914_095_7).abs() < 1e-10);
        let spec = make_spec(&p);
        let oracle = bisect(|y| spec.value(&[1.0, y]).unwrap() - r.level, 1.0, 10.0);
        assert!((r.y_bar - oracle).abs() < 1e-10);
        assert!(r.y_bar > 1.0);
        assert!(r.equation_residual <= 1e-10);
        assert!((peak_bound_ratio_form(&p).unwrap() - r.y_bar).abs() < 1e-10);
    }

    #[test]
    fn peak_bound_requires_coexistence() {
        let ext = DampedPPParams::new(1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(matches!(
            peak_bound(&ext),
            Err(LyapunovError::NotCoexistence { .. })
        ));
        let crit = DampedPPParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            peak_bound(&crit),
            Err(LyapunovError::NotCoexistence { .. })
        ));
    }

    #[test]
    fn limit_values() {
        let v = VirusParams::new(1.0, 1.0, 2.0, 1.0, 1.0).unwrap();
        let lim = peak_bound_limit(&v).unwrap();
        let oracle = bisect(|y| y - ln(y) - 2.0, 1.0, 10.0);
        assert!((lim - oracle).abs() < 1e-10);
        assert!((lim - 3.146_193_220_620_583).abs() < 1e-10);
        // delta = sigma: the log term in the constant drops out
        let v = VirusParams::new(2.0, 0.5, 1.0, 1.0, 2.0).unwrap();
        let lim = peak_bound_limit(&v).unwrap();
        assert!((lim - ln(lim) - (4.0 + 1.0)).abs() < 1e-12);
        assert!(peak_bound_limit(&VirusParams {
            delta: 0.0,
            alpha: 1.0,
            gamma: 1.0,
            q: 0.0,
            sigma: 1.0
        })
        .is_err());
    }

    #[test]
    fn finite_rate_bounds_approach_limit() {
        let lim = peak_bound_limit(&VirusParams::new(1.0, 1.0, 2.0, 1.0, 1.0).unwrap()).unwrap();
        // frozen from an independent 30-digit solve
        let frozen = [
            3.016_705_634_417_996,
            3.129_783_251_960_979,
            3.144_213_863_035_057,
        ];
        let mut prev = 0.0;
        for (gamma, expected) in [1e2, 1e3, 1e4].into_iter().zip(frozen) {
            let p = DampedPPParams::new(1.0, gamma + 1.0, gamma, 1.0, 1.0).unwrap();
            let r = peak_bound(&p).unwrap();
            assert!((r.y_bar - expected).abs() < 1e-9, "{gamma}: {}", r.y_bar);
            assert!(r.y_bar > prev && r.y_bar < lim);
            assert!(r.equation_residual <= 1e-10);
            prev = r.y_bar;
        }
        assert!((lim - prev).abs() / lim < 0.01);
    }

    #[test]
    fn plant_m_values() {
        let mk = |v: f64, sigma: f64| {
            PlantParams::new(
                v,
                1.0,
                sigma,
                ThresholdSpec {
                    y_f: 1.0,
                    k: 1.0,
                    shape: ThresholdShape::Ramp,
                },
            )
            .unwrap()
        };
        assert!((plant_min_m(&mk(1.0, 1.0)) - (1.0 + PLANT_M_MARGIN)).abs() < 1e-15);
        assert!((plant_min_m(&mk(E, 1.0)) - PLANT_M_MARGIN).abs() < 1e-15);
        let expected = 0.5 * (1.0 + ln(2.0)) + PLANT_M_MARGIN;
        assert!((plant_min_m(&mk(1.0, 2.0)) - expected).abs() < 1e-15);
        // c = e^2: the minimum of y - c ln y is -e^2, which m must cover
        let p = mk(E * E, 1.0);
        let m = plant_min_m(&p);
        let c = E * E;
        assert!((c - c * ln(c) + m) >= PLANT_M_MARGIN * 0.999);
    }

    #[test]
    fn monotone_on_equilibrium_and_reference_run() {
        let p = reference();
        let spec = make_spec(&p);
        let fixed = Trajectory::constant(0.0, [1.0, 1.0]);
        let r = monotonicity_check(&fixed, &spec, 0.0).unwrap();
        assert!(r.monotone);
        assert_eq!(r.worst_violation, 0.0);

        let cfg = IntegratorConfig::default();
        let traj = integrate(
            &damped_pp_field(p),
            [0.5, 0.5],
            (0.0, 50.0),
            &cfg,
            &[],
            None,
        )
        .unwrap();
        let r = monotonicity_check(&traj, &spec, default_slack(&cfg)).unwrap();
        assert!(r.monotone, "{r:?}");

        let mut reversed = traj.clone();
        reversed.samples.reverse();
        for (k, s) in reversed.samples.iter_mut().enumerate() {
            s.t = k as f64;
        }
        let r = monotonicity_check(&reversed, &spec, 1e-9).unwrap();
        assert!(!r.monotone);
        assert!(r.worst_violation > 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let specs = [
            (make_spec(&reference()), alloc::vec![1.7, 0.4]),
            (
                LyapunovSpec::Extinction {
                    gamma: 1.2,
                    beta: 0.7,
                    b: 2.0,
                },
                alloc::vec![0.9, 1.3],
            ),
            (
                LyapunovSpec::Plant {
                    gamma: 2.0,
                    sigma: 1.0,
                    v: 1.0,
                    m: 1.0,
                },
                alloc::vec![0.3, 2.0, 0.7],
            ),
        ];
        for (spec, s) in specs {
            let mut g = [0.0; 3];
            spec.gradient(&s, &mut g).unwrap();
            for i in 0..spec.dimension() {
                let h = 1e-6;
                let mut up = s.clone();
                let mut dn = s.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (spec.value(&up).unwrap() - spec.value(&dn).unwrap()) / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() < 1e-7,
                    "{spec:?} coord {i}: {fd} vs {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn oval_level_contains_anchor_trajectory() {
        let p = reference();
        let spec = make_spec(&p);
        let oval = OvalLevel::through(spec, [0.2, 3.0]).unwrap();
        assert!((spec.value(&oval.anchor).unwrap() - oval.level).abs() <= 1e-12 * oval.level.abs());
        let traj = integrate(
            &damped_pp_field(p),
            [0.2, 3.0],
            (0.0, 30.0),
            &IntegratorConfig::default(),
            &[],
            None,
        )
        .unwrap();
        for Sample { state, .. } in &traj.samples {
            assert!(oval.contains(state, 1e-9).unwrap());
        }
        assert!(!oval.contains(&[10.0, 10.0], 0.0).unwrap());
        let plant = LyapunovSpec::Plant {
            gamma: 1.0,
            sigma: 1.0,
            v: 1.0,
            m: 0.0,
        };
        assert!(OvalLevel::through(plant, [1.0, 1.0]).is_err());
    }

    #[test]
    fn finite_difference_consistency_along_trajectory() {
        let p = reference();
        let spec = make_spec(&p);
        let field = damped_pp_field(p);
        let params = ModelParams::DampedPP(p);
        let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-14);
        let start = [2.5, 0.2];
        let analytic = spec.vdot(&params, &start).unwrap();
        let v0 = spec.value(&start).unwrap();
        let mut errors = alloc::vec::Vec::new();
        for h in [1e-3, 1e-4, 1e-5] {
            let traj = integrate(&field, start, (0.0, h), &cfg, &[], Some(h)).unwrap();
            let fd = (spec.value(&traj.last().state).unwrap() - v0) / h;
            errors.push((fd - analytic).abs());
        }
        // first-order forward difference: error shrinks ~10x per decade
        assert!(
            errors[1] < errors[0] * 0.2 && errors[2] < errors[1] * 0.2,
            "{errors:?}"
        );
        assert!(errors[0] / 1e-3 > 0.0);
        // direct chain rule on the field agrees with the closed form
        let mut g = [0.0; 2];
        spec.gradient(&start, &mut g).unwrap();
        let f = field.eval(&start);
        assert!((g[0] * f[0] + g[1] * f[1] - analytic).abs() <= 1e-10 * analytic.abs());
    }
}
