//! Parameter records and vector fields for every system in the family.

use crate::ode::VectorField;
use crate::{DomainError, ParamError};

fn positive(name: &'static str, v: f64) -> Result<(), ParamError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ParamError {
            name,
            reason: "must be positive and finite",
        })
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<(), ParamError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ParamError {
            name,
            reason: "must be non-negative and finite",
        })
    }
}

/// Damped harmonic oscillator written as `x' = -a x - b y`, `y' = x`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct OscillatorParams {
    pub a: f64,
    pub b: f64,
}

impl OscillatorParams {
    pub fn new(a: f64, b: f64) -> Result<Self, ParamError> {
        let p = Self { a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        non_negative("a", self.a)?;
        positive("b", self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LotkaVolterraParams {
    /// prey growth rate
    pub a: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma: f64,
}

impl LotkaVolterraParams {
    pub fn new(a: f64, beta: f64, gamma: f64, sigma: f64) -> Result<Self, ParamError> {
        let p = Self {
            a,
            beta,
            gamma,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        positive("a", self.a)?;
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        positive("sigma", self.sigma)
    }
}

/// Lotka-Volterra with a constant prey influx `delta` and natural prey decay `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct DampedPPParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub sigma: f64,
}

impl DampedPPParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        delta: f64,
        sigma: f64,
    ) -> Result<Self, ParamError> {
        let p = Self {
            alpha,
            beta,
            gamma,
            delta,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    /// `delta = 0` is admitted; operations that need an influx reject it themselves.
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        positive("gamma", self.gamma)?;
        non_negative("delta", self.delta)?;
        positive("sigma", self.sigma)
    }

    /// Basic reproductive ratio `gamma delta / (alpha sigma)`.
    pub fn reproductive_ratio(&self) -> f64 {
        self.gamma * self.delta / (self.alpha * self.sigma)
    }

    /// Prey renewal constant `gamma delta / sigma - alpha`; positive iff the
    /// interior equilibrium lies in the open quadrant.
    pub fn renewal(&self) -> f64 {
        self.gamma * self.delta / self.sigma - self.alpha
    }
}

/// Within-host virus dynamics: susceptible cells `x`, virus-producing cells `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct VirusParams {
    pub delta: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// virus-induced killing rate of susceptible cells
    pub q: f64,
    pub sigma: f64,
}

impl VirusParams {
    pub fn new(delta: f64, alpha: f64, gamma: f64, q: f64, sigma: f64) -> Result<Self, ParamError> {
        let p = Self {
            delta,
            alpha,
            gamma,
            q,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        non_negative("delta", self.delta)?;
        positive("alpha", self.alpha)?;
        positive("gamma", self.gamma)?;
        non_negative("q", self.q)?;
        positive("sigma", self.sigma)
    }
}

/// Maps virus parameters onto the damped system with `beta = gamma + q`.
pub fn virus_to_damped(p: &VirusParams) -> DampedPPParams {
    DampedPPParams {
        alpha: p.alpha,
        beta: p.gamma + p.q,
        gamma: p.gamma,
        delta: p.delta,
        sigma: p.sigma,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ThresholdShape {
    #[default]
    Ramp,
    Smooth,
}

/// Growth-rate response to hormone concentration, zero up to `y_f`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ThresholdSpec {
    pub y_f: f64,
    pub k: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub shape: ThresholdShape,
}

impl ThresholdSpec {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("y_f", self.y_f)?;
        positive("k", self.k)
    }

    /// Growth rate `f(y)`. Continuous, monotone, zero for `y <= y_f`.
    pub fn rate(&self, y: f64) -> f64 {
        let excess = y - self.y_f;
        if excess <= 0.0 {
            return 0.0;
        }
        match self.shape {
            ThresholdShape::Ramp => self.k * excess,
            ThresholdShape::Smooth => self.k * excess * excess / (1.0 + excess * excess),
        }
    }
}

pub fn threshold_f(spec: &ThresholdSpec, y: f64) -> f64 {
    spec.rate(y)
}

/// Shoot growth driven by nutrient `x`, hormone `y` and length `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PlantParams {
    /// water flow speed
    pub v: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub threshold: ThresholdSpec,
}

impl PlantParams {
    pub fn new(
        v: f64,
        gamma: f64,
        sigma: f64,
        threshold: ThresholdSpec,
    ) -> Result<Self, ParamError> {
        let p = Self {
            v,
            gamma,
            sigma,
            threshold,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        positive("v", self.v)?;
        positive("gamma", self.gamma)?;
        positive("sigma", self.sigma)?;
        self.threshold.validate()
    }

    /// Hormone level `v / sigma` of the sub-threshold equilibrium.
    pub fn hormone_equilibrium(&self) -> f64 {
        self.v / self.sigma
    }
}

/// Any parameter record of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Oscillator(OscillatorParams),
    LotkaVolterra(LotkaVolterraParams),
    DampedPP(DampedPPParams),
    Virus(VirusParams),
    Plant(PlantParams),
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        match self {
            ModelParams::Oscillator(p) => p.validate(),
            ModelParams::LotkaVolterra(p) => p.validate(),
            ModelParams::DampedPP(p) => p.validate(),
            ModelParams::Virus(p) => p.validate(),
            ModelParams::Plant(p) => p.validate(),
        }
    }

    /// The damped-system view of the record, if it has one.
    pub fn as_damped(&self) -> Option<DampedPPParams> {
        match self {
            ModelParams::DampedPP(p) => Some(*p),
            ModelParams::Virus(p) => Some(virus_to_damped(p)),
            _ => None,
        }
    }
}

const QUADRANT: &[usize] = &[0, 1];
const OCTANT: &[usize] = &[0, 1, 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorField(pub OscillatorParams);

impl VectorField<2> for OscillatorField {
    fn eval(&self, s: &[f64; 2]) -> [f64; 2] {
        let OscillatorParams { a, b } = self.0;
        [-a * s[0] - b * s[1], s[0]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LotkaVolterraField(pub LotkaVolterraParams);

impl VectorField<2> for LotkaVolterraField {
    fn eval(&self, s: &[f64; 2]) -> [f64; 2] {
        let p = &self.0;
        let [x, y] = *s;
        [p.a * x - p.beta * x * y, p.gamma * x * y - p.sigma * y]
    }

    fn nonnegative_coords(&self) -> &[usize] {
        QUADRANT
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedPPField(pub DampedPPParams);

impl VectorField<2> for DampedPPField {
    fn eval(&self, s: &[f64; 2]) -> [f64; 2] {
        let p = &self.0;
        let [x, y] = *s;
        [
            p.delta - p.alpha * x - p.beta * x * y,
            p.gamma * x * y - p.sigma * y,
        ]
    }

    fn nonnegative_coords(&self) -> &[usize] {
        QUADRANT
    }
}

/// Plant system in `(x, y, L)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantFieldL(pub PlantParams);

impl PlantFieldL {
    pub fn try_eval(&self, s: &[f64; 3]) -> Result<[f64; 3], DomainError> {
        self.check_domain(s)?;
        Ok(self.eval(s))
    }
}

impl VectorField<3> for PlantFieldL {
    fn eval(&self, s: &[f64; 3]) -> [f64; 3] {
        let p = &self.0;
        let [x, y, l] = *s;
        let production = p.gamma * x * y;
        [
            (p.v - production) / l,
            production - p.sigma * y,
            p.threshold.rate(y),
        ]
    }

    fn nonnegative_coords(&self) -> &[usize] {
        OCTANT
    }

    fn check_domain(&self, s: &[f64; 3]) -> Result<(), DomainError> {
        if s[2] > 0.0 {
            Ok(())
        } else {
            Err(DomainError::new("shoot length must be positive"))
        }
    }
}

/// Plant system in `(x, y, z = 1/L)` coordinates; unbounded growth becomes `z -> 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantFieldZ(pub PlantParams);

impl PlantFieldZ {
    pub fn try_eval(&self, s: &[f64; 3]) -> Result<[f64; 3], DomainError> {
        self.check_domain(s)?;
        Ok(self.eval(s))
    }
}

impl VectorField<3> for PlantFieldZ {
    fn eval(&self, s: &[f64; 3]) -> [f64; 3] {
        let p = &self.0;
        let [x, y, z] = *s;
        let production = p.gamma * x * y;
        [
            p.v * z - production * z,
            production - p.sigma * y,
            -p.threshold.rate(y) * z * z,
        ]
    }

    fn nonnegative_coords(&self) -> &[usize] {
        OCTANT
    }

    fn check_domain(&self, s: &[f64; 3]) -> Result<(), DomainError> {
        if s[2] > 0.0 {
            Ok(())
        } else {
            Err(DomainError::new("inverse length must be positive"))
        }
    }
}

pub fn oscillator_field(p: OscillatorParams) -> OscillatorField {
    OscillatorField(p)
}

pub fn lv_field(p: LotkaVolterraParams) -> LotkaVolterraField {
    LotkaVolterraField(p)
}

pub fn damped_pp_field(p: DampedPPParams) -> DampedPPField {
    DampedPPField(p)
}

pub fn plant_field_l(p: PlantParams) -> PlantFieldL {
    PlantFieldL(p)
}

pub fn plant_field_z(p: PlantParams) -> PlantFieldZ {
    PlantFieldZ(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> DampedPPParams {
        DampedPPParams::new(1.0, 2.0, 1.0, 3.0, 1.0).unwrap()
    }

    fn plant(y_f: f64) -> PlantParams {
        PlantParams::new(
            1.0,
            2.0,
            1.0,
            ThresholdSpec {
                y_f,
                k: 1.0,
                shape: ThresholdShape::Ramp,
            },
        )
        .unwrap()
    }

    #[test]
    fn oscillator_values() {
        let f = oscillator_field(OscillatorParams::new(0.0, 2.0).unwrap());
        assert_eq!(f.eval(&[1.0, 0.0]), [0.0, 1.0]);
        let f = oscillator_field(OscillatorParams::new(1.0, 1.0).unwrap());
        assert_eq!(f.eval(&[0.0, 0.0]), [0.0, 0.0]);
        let f = oscillator_field(OscillatorParams::new(2.0, 3.0).unwrap());
        assert_eq!(f.eval(&[1.0, 1.0]), [-5.0, 1.0]);
    }

    #[test]
    fn lotka_volterra_values() {
        let f = lv_field(LotkaVolterraParams::new(1.0, 1.0, 1.0, 1.0).unwrap());
        assert_eq!(f.eval(&[1.0, 1.0]), [0.0, 0.0]);
        assert_eq!(f.eval(&[2.0, 1.0]), [0.0, 1.0]);
        assert_eq!(f.eval(&[1.0, 2.0]), [-1.0, 0.0]);
    }

    #[test]
    fn damped_values() {
        let f = damped_pp_field(reference());
        assert_eq!(f.eval(&[1.0, 1.0]), [0.0, 0.0]);
        assert_eq!(f.eval(&[3.0, 0.0]), [0.0, 0.0]);
        let v = f.eval(&[3.0, 0.1]);
        assert!(
            (v[0] + 0.6).abs() < 1e-15 && (v[1] - 0.2).abs() < 1e-15,
            "{v:?}"
        );
    }

    #[test]
    fn virus_mapping() {
        let m = |g, q| virus_to_damped(&VirusParams::new(1.0, 1.0, g, q, 1.0).unwrap()).beta;
        assert_eq!(m(2.0, 1.0), 3.0);
        assert_eq!(m(2.0, 0.0), 2.0);
        assert_eq!(m(0.5, 0.25), 0.75);
    }

    #[test]
    fn basic_virus_model_matches_beta_equal_gamma() {
        let v = VirusParams::new(2.0, 0.5, 1.5, 0.0, 0.7).unwrap();
        let d = DampedPPParams::new(0.5, 1.5, 1.5, 2.0, 0.7).unwrap();
        let (a, b) = (damped_pp_field(virus_to_damped(&v)), damped_pp_field(d));
        for s in [[0.3, 0.4], [2.0, 1.0], [5.0, 0.01]] {
            assert_eq!(a.eval(&s), b.eval(&s));
        }
    }

    #[test]
    fn ramp_threshold() {
        let t = ThresholdSpec {
            y_f: 2.0,
            k: 1.0,
            shape: ThresholdShape::Ramp,
        };
        assert_eq!(threshold_f(&t, 1.5), 0.0);
        assert_eq!(threshold_f(&t, 3.0), 1.0);
        assert_eq!(threshold_f(&t, 2.0), 0.0);
    }

    #[test]
    fn smooth_threshold() {
        let t = ThresholdSpec {
            y_f: 2.0,
            k: 2.0,
            shape: ThresholdShape::Smooth,
        };
        assert_eq!(t.rate(2.0), 0.0);
        assert_eq!(t.rate(1.0), 0.0);
        assert!((t.rate(3.0) - 1.0).abs() < 1e-15);
        assert!(t.rate(100.0) < 2.0);
    }

    #[test]
    fn plant_equilibrium_both_forms() {
        let p = plant(2.0);
        assert_eq!(
            plant_field_l(p).try_eval(&[0.5, 1.0, 1.0]).unwrap(),
            [0.0, 0.0, 0.0]
        );
        assert_eq!(
            plant_field_z(p).try_eval(&[0.5, 1.0, 2.0]).unwrap(),
            [0.0, 0.0, 0.0]
        );
        assert_eq!(
            plant_field_l(p).try_eval(&[1.0, 3.0, 1.0]).unwrap(),
            [-5.0, 3.0, 1.0]
        );
    }

    #[test]
    fn plant_domain_errors() {
        let p = plant(2.0);
        assert!(plant_field_l(p).try_eval(&[1.0, 1.0, 0.0]).is_err());
        assert!(plant_field_l(p).try_eval(&[1.0, 1.0, -1.0]).is_err());
        assert!(plant_field_z(p).try_eval(&[1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(DampedPPParams::new(1.0, 2.0, 1.0, 3.0, -1.0).is_err());
        assert!(DampedPPParams::new(1.0, 2.0, 1.0, 0.0, 1.0).is_ok());
        assert!(DampedPPParams::new(1.0, 2.0, 1.0, -0.1, 1.0).is_err());
        assert!(OscillatorParams::new(-0.1, 1.0).is_err());
        assert!(OscillatorParams::new(0.0, 0.0).is_err());
        assert!(LotkaVolterraParams::new(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(VirusParams::new(1.0, 1.0, 1.0, -1.0, 1.0).is_err());
        let bad = ThresholdSpec {
            y_f: 0.0,
            k: 1.0,
            shape: ThresholdShape::Ramp,
        };
        assert!(PlantParams::new(1.0, 1.0, 1.0, bad).is_err());
    }

    fn damped_params() -> impl Strategy<Value = DampedPPParams> {
        (
            0.05f64..5.0,
            0.05f64..5.0,
            0.05f64..5.0,
            0.01f64..5.0,
            0.05f64..5.0,
        )
            .prop_map(|(alpha, beta, gamma, delta, sigma)| DampedPPParams {
                alpha,
                beta,
                gamma,
                delta,
                sigma,
            })
    }

    proptest! {
        #[test]
        fn x_axis_is_invariant(p in damped_params(), x in 0.0f64..20.0) {
            prop_assert_eq!(damped_pp_field(p).eval(&[x, 0.0])[1], 0.0);
        }

        #[test]
        fn field_points_left_on_half_strip_edge(p in damped_params(), y in 1e-6f64..20.0) {
            let x = p.delta / p.alpha;
            prop_assert!(damped_pp_field(p).eval(&[x, y])[0] < 0.0);
        }

        #[test]
        fn plant_forms_are_conjugate(
            x in 0.01f64..5.0, y in 0.01f64..5.0, l in 0.1f64..20.0,
            v in 0.1f64..3.0, gamma in 0.1f64..3.0, sigma in 0.1f64..3.0,
            y_f in 0.1f64..3.0, k in 0.1f64..3.0, smooth in proptest::bool::ANY,
        ) {
            let shape = if smooth { ThresholdShape::Smooth } else { ThresholdShape::Ramp };
            let p = PlantParams::new(v, gamma, sigma, ThresholdSpec { y_f, k, shape }).unwrap();
            let dl = plant_field_l(p).eval(&[x, y, l]);
            let dz = plant_field_z(p).eval(&[x, y, 1.0 / l]);
            prop_assert!((dl[0] - dz[0]).abs() <= 1e-12 * (1.0 + dl[0].abs()));
            prop_assert_eq!(dl[1], dz[1]);
            prop_assert!((dz[2] + dl[2] / (l * l)).abs() <= 1e-12 * (1.0 + dz[2].abs()));
        }

        #[test]
        fn thresholds_are_monotone(
            y_f in 0.1f64..3.0, k in 0.1f64..3.0, y1 in 0.0f64..10.0, y2 in 0.0f64..10.0,
            smooth in proptest::bool::ANY,
        ) {
            let shape = if smooth { ThresholdShape::Smooth } else { ThresholdShape::Ramp };
            let t = ThresholdSpec { y_f, k, shape };
            let (lo, hi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
            prop_assert!(t.rate(lo) <= t.rate(hi));
            prop_assert!(t.rate(lo) >= 0.0);
            if hi <= y_f {
                prop_assert_eq!(t.rate(hi), 0.0);
            }
        }
    }
}
