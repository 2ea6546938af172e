//! Adaptive Dormand-Prince 5(4) integration of autonomous vector fields.
//!
//! Steps are truncated so that every output time on the sampling grid is hit
//! exactly, which removes the need for dense output. Event functions are
//! checked for sign changes at step endpoints and localized by bisection,
//! re-integrating the bracketing step with a shorter step each time.
//!
//! Coordinates that a model declares non-negative (populations,
//! concentrations, inverse lengths) are guarded: the exact flows keep them in
//! the closed first orthant, so a value below `-quadrant_guard_epsilon` means
//! the tolerances are too loose and the run is aborted rather than clamped.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math::{abs, powf};
use crate::DomainError;

/// Autonomous vector field `ds/dt = eval(s)` on an `N`-dimensional state.
pub trait VectorField<const N: usize> {
    fn eval(&self, state: &[f64; N]) -> [f64; N];

    /// Indices of coordinates the exact flow keeps non-negative.
    fn nonnegative_coords(&self) -> &[usize] {
        &[]
    }

    /// Rejects states where the field is undefined.
    fn check_domain(&self, _state: &[f64; N]) -> Result<(), DomainError> {
        Ok(())
    }
}

/// Adapter turning a closure into a [`VectorField`] without positivity guards.
pub struct FnField<F>(pub F);

impl<F, const N: usize> VectorField<N> for FnField<F>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    fn eval(&self, state: &[f64; N]) -> [f64; N] {
        (self.0)(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// First trial step; estimated from the initial derivative when `None`.
    pub initial_step: Option<f64>,
    /// Consecutive rejections tolerated on a single step.
    pub max_rejections: u32,
    pub quadrant_guard_epsilon: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            initial_step: None,
            max_rejections: 50,
            quadrant_guard_epsilon: 1e-12,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        let ok = self.rel_tol > 0.0
            && self.rel_tol.is_finite()
            && self.abs_tol > 0.0
            && self.abs_tol.is_finite()
            && self.max_step > 0.0
            && self.quadrant_guard_epsilon >= 0.0
            && self.initial_step.is_none_or(|h| h > 0.0 && h.is_finite());
        if ok {
            Ok(())
        } else {
            Err(IntegrateError::InvalidConfig)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

impl Direction {
    /// Sign change between consecutive indicator values. A zero counts as
    /// reached on the step that lands on it, not on the one leaving it.
    fn crossed(self, before: f64, after: f64) -> Option<Direction> {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self {
            Direction::Rising if rising => Some(Direction::Rising),
            Direction::Falling if falling => Some(Direction::Falling),
            Direction::Any if rising => Some(Direction::Rising),
            Direction::Any if falling => Some(Direction::Falling),
            _ => None,
        }
    }
}

type Indicator<const N: usize> = Box<dyn Fn(&[f64; N]) -> f64 + Send + Sync>;

/// Zero crossing of a scalar indicator to be located during integration.
pub struct EventSpec<const N: usize> {
    indicator: Indicator<N>,
    pub direction: Direction,
    pub terminal: bool,
    pub label: String,
}

impl<const N: usize> EventSpec<N> {
    pub fn new(
        label: impl Into<String>,
        direction: Direction,
        terminal: bool,
        indicator: impl Fn(&[f64; N]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            indicator: Box::new(indicator),
            direction,
            terminal,
            label: label.into(),
        }
    }

    pub fn indicator(&self, state: &[f64; N]) -> f64 {
        (self.indicator)(state)
    }
}

impl<const N: usize> core::fmt::Debug for EventSpec<N> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("EventSpec")
            .field("label", &self.label)
            .field("direction", &self.direction)
            .field("terminal", &self.terminal)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const N: usize> {
    pub t: f64,
    pub state: [f64; N],
}

/// A located event. `direction` is the sense in which the indicator crossed zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<const N: usize> {
    pub t: f64,
    pub label: String,
    pub direction: Direction,
    pub state: [f64; N],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Termination {
    Horizon,
    TerminalEvent,
    GuardViolation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    pub samples: Vec<Sample<N>>,
    pub events: Vec<Event<N>>,
    pub config: IntegratorConfig,
    pub terminated_by: Termination,
}

impl<const N: usize> Trajectory<N> {
    /// A trajectory holding a single sample.
    pub fn constant(t: f64, state: [f64; N]) -> Self {
        Self {
            samples: alloc::vec![Sample { t, state }],
            events: Vec::new(),
            config: IntegratorConfig::default(),
            terminated_by: Termination::Horizon,
        }
    }

    pub fn first(&self) -> &Sample<N> {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample<N> {
        &self.samples[self.samples.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn events_labeled<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Event<N>> + 'a {
        self.events.iter().filter(move |e| e.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration")]
    InvalidConfig,
    #[error("invalid time span ({t0}, {t1}) or sampling interval {sample_every}")]
    InvalidSpan { t0: f64, t1: f64, sample_every: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("coordinate {coord} fell to {value} at t = {t}, below the positivity guard")]
    GuardViolation { t: f64, coord: usize, value: f64 },
    #[error("step size control failed at t = {t} (step {step})")]
    StepFailure { t: f64, step: f64 },
}

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

struct Step<const N: usize> {
    y: [f64; N],
    /// field at `y`, reused as the first stage of the next step
    f: [f64; N],
    err: [f64; N],
}

fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (w, k) in terms {
            acc += w * k[i];
        }
        *o += h * acc;
    }
    out
}

fn dopri_step<F: VectorField<N> + ?Sized, const N: usize>(
    field: &F,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> Step<N> {
    let k2 = field.eval(&combine(y, h, &[(A21, k1)]));
    let k3 = field.eval(&combine(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = field.eval(&combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = field.eval(&combine(
        y,
        h,
        &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)],
    ));
    let k6 = field.eval(&combine(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
    ));
    let y_new = combine(
        y,
        h,
        &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = field.eval(&y_new);
    let zero = [0.0; N];
    let err = combine(
        &zero,
        h,
        &[
            (E1, k1),
            (E3, &k3),
            (E4, &k4),
            (E5, &k5),
            (E6, &k6),
            (E7, &k7),
        ],
    );
    Step {
        y: y_new,
        f: k7,
        err,
    }
}

fn error_norm<const N: usize>(cfg: &IntegratorConfig, y: &[f64; N], step: &Step<N>) -> f64 {
    let mut worst = 0.0f64;
    for ((y0, y1), e) in y.iter().zip(&step.y).zip(&step.err) {
        let scale = cfg.abs_tol + cfg.rel_tol * abs(*y0).max(abs(*y1));
        worst = worst.max(abs(*e) / scale);
    }
    worst
}

fn initial_step<const N: usize>(
    cfg: &IntegratorConfig,
    y: &[f64; N],
    f: &[f64; N],
    span: f64,
) -> f64 {
    if let Some(h) = cfg.initial_step {
        return h;
    }
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for i in 0..N {
        let scale = cfg.abs_tol + cfg.rel_tol * abs(y[i]);
        d0 = d0.max(abs(y[i]) / scale);
        d1 = d1.max(abs(f[i]) / scale);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(span).min(cfg.max_step)
}

fn guard<F: VectorField<N> + ?Sized, const N: usize>(
    field: &F,
    cfg: &IntegratorConfig,
    t: f64,
    y: &[f64; N],
) -> Result<(), IntegrateError> {
    for &i in field.nonnegative_coords() {
        if !(y[i] >= -cfg.quadrant_guard_epsilon) {
            return Err(IntegrateError::GuardViolation {
                t,
                coord: i,
                value: y[i],
            });
        }
    }
    Ok(())
}

/// Integrates `field` from `init` over `t_span`.
///
/// Samples are emitted at `t0 + k * sample_every` (the final one clamped to
/// `t1`) and additionally at every located event. `sample_every = None`
/// samples the span 1000 times.
pub fn integrate<F: VectorField<N> + ?Sized, const N: usize>(
    field: &F,
    init: [f64; N],
    t_span: (f64, f64),
    config: &IntegratorConfig,
    events: &[EventSpec<N>],
    sample_every: Option<f64>,
) -> Result<Trajectory<N>, IntegrateError> {
    config.validate()?;
    let (t0, t1) = t_span;
    let dt = sample_every.unwrap_or((t1 - t0) / 1000.0);
    if !(t0.is_finite() && t1.is_finite() && t1 > t0 && dt > 0.0 && dt.is_finite()) {
        return Err(IntegrateError::InvalidSpan {
            t0,
            t1,
            sample_every: dt,
        });
    }
    field.check_domain(&init)?;
    for &i in field.nonnegative_coords() {
        if !(init[i] >= 0.0) {
            return Err(DomainError::new("initial state outside the non-negative orthant").into());
        }
    }

    let mut samples = alloc::vec![Sample { t: t0, state: init }];
    let mut found: Vec<Event<N>> = Vec::new();
    let mut t = t0;
    let mut y = init;
    let mut f = field.eval(&y);
    let mut indicators: Vec<f64> = events.iter().map(|e| e.indicator(&y)).collect();
    let mut h = initial_step(config, &y, &f, t1 - t0);
    let mut next_sample = 1u64;

    while t < t1 {
        let mut target = t0 + next_sample as f64 * dt;
        if target > t1 || t1 - target <= 1e-12 * dt {
            target = t1;
        }
        let mut h_try = h.min(config.max_step);
        let mut landing = false;
        if h_try >= target - t {
            h_try = target - t;
            landing = true;
        }

        let mut rejections = 0u32;
        let (step, err) = loop {
            let step = dopri_step(field, &y, &f, h_try);
            let err = error_norm(config, &y, &step);
            if err <= 1.0 {
                break (step, err);
            }
            rejections += 1;
            let shrink = if err.is_finite() {
                (SAFETY * powf(err, -0.2)).max(MIN_FACTOR)
            } else {
                MIN_FACTOR
            };
            h_try *= shrink;
            landing = false;
            if rejections > config.max_rejections || h_try <= 16.0 * f64::EPSILON * abs(t).max(1.0)
            {
                return Err(IntegrateError::StepFailure { t, step: h_try });
            }
        };

        let t_new = if landing { target } else { t + h_try };
        let grow = if err == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * powf(err, -0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        // a step shortened only to land on an output time says nothing about the next one
        h = if landing && h_try < h {
            h.max(h_try * grow)
        } else {
            h_try * grow
        };

        guard(field, config, t_new, &step.y)?;

        // locate events inside (t, t_new]
        let mut in_step: Vec<(f64, f64, usize, Direction, [f64; N])> = Vec::new();
        for (idx, spec) in events.iter().enumerate() {
            let after = spec.indicator(&step.y);
            if let Some(dir) = spec.direction.crossed(indicators[idx], after) {
                let (theta, state) = locate(field, spec, dir, &y, &f, h_try, &step.y, config, t);
                in_step.push((theta, t + theta * h_try, idx, dir, state));
            }
        }

        if let Some(first) = in_step.iter().map(|e| e.0).min_by(f64::total_cmp) {
            // restart from the earliest event so no later step straddles it
            let (theta, t_ev, state) = {
                let e = in_step.iter().find(|e| e.0 == first).unwrap();
                (e.0, if theta_is_end(e.0) { t_new } else { e.1 }, e.4)
            };
            let mut terminal = false;
            for &(_, _, idx, dir, _) in in_step.iter().filter(|e| e.0 == first) {
                let spec = &events[idx];
                found.push(Event {
                    t: t_ev,
                    label: spec.label.clone(),
                    direction: dir,
                    state,
                });
                terminal |= spec.terminal;
            }
            if t_ev > samples[samples.len() - 1].t {
                samples.push(Sample { t: t_ev, state });
            }
            if terminal {
                return Ok(Trajectory {
                    samples,
                    events: found,
                    config: *config,
                    terminated_by: Termination::TerminalEvent,
                });
            }
            t = t_ev;
            y = state;
            f = if theta_is_end(theta) {
                step.f
            } else {
                field.eval(&y)
            };
            for (idx, spec) in events.iter().enumerate() {
                indicators[idx] = spec.indicator(&y);
            }
            if landing && theta_is_end(theta) {
                next_sample += 1;
            }
            continue;
        }

        for (idx, spec) in events.iter().enumerate() {
            indicators[idx] = spec.indicator(&step.y);
        }
        t = t_new;
        y = step.y;
        f = step.f;
        if landing {
            samples.push(Sample { t, state: y });
            next_sample += 1;
        }
    }

    Ok(Trajectory {
        samples,
        events: found,
        config: *config,
        terminated_by: Termination::Horizon,
    })
}

fn theta_is_end(theta: f64) -> bool {
    theta >= 1.0
}

/// Bisection on the fraction `theta` of the bracketing step.
#[allow(clippy::too_many_arguments)]
fn locate<F: VectorField<N> + ?Sized, const N: usize>(
    field: &F,
    spec: &EventSpec<N>,
    dir: Direction,
    y: &[f64; N],
    f: &[f64; N],
    h: f64,
    y_end: &[f64; N],
    cfg: &IntegratorConfig,
    t: f64,
) -> (f64, [f64; N]) {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut hi_state = *y_end;
    let t_tol = 1e-3 * (cfg.rel_tol * abs(t + h) + cfg.abs_tol);
    // the indicator is on the "after" side when it has reached zero in the crossing direction
    let reached = |g: f64| match dir {
        Direction::Falling => g <= 0.0,
        _ => g >= 0.0,
    };
    for _ in 0..200 {
        if (hi - lo) * h <= t_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let state = dopri_step(field, y, f, mid * h).y;
        let g = spec.indicator(&state);
        if reached(g) {
            hi = mid;
            hi_state = state;
            if g == 0.0 {
                break;
            }
        } else {
            lo = mid;
        }
    }
    (hi, hi_state)
}
