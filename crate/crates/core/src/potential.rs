//! Nonnegative potentials `V`, their truncations `min{V, k}` and truncation ladders.

use serde::{Deserialize, Serialize};

use crate::decimal;
use crate::error::{Error, Result};
use crate::geometry::{distance_to_boundary, Domain, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialSpec {
    Zero,
    Constant {
        #[serde(deserialize_with = "decimal::number")]
        c: f64,
    },
    /// `C d(x)^(-alpha)`.
    #[serde(rename = "powerlaw")]
    PowerLaw {
        #[serde(rename = "C", deserialize_with = "decimal::number")]
        coefficient: f64,
        #[serde(deserialize_with = "decimal::number")]
        alpha: f64,
    },
    /// Piecewise-constant samples on uniform cells of `[0, 1]`, in `x` for the
    /// interval and in `r` for the disk.
    Tabulated {
        #[serde(deserialize_with = "decimal::numbers")]
        values: Vec<f64>,
    },
    /// `left` on `x < 1/2` (interval) or `x < 0` (disk), `right` elsewhere.
    Sided {
        left: Box<PotentialSpec>,
        right: Box<PotentialSpec>,
    },
}

impl PotentialSpec {
    pub fn power_law(coefficient: f64, alpha: f64) -> Self {
        PotentialSpec::PowerLaw { coefficient, alpha }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Zero => Ok(()),
            PotentialSpec::Constant { c } => nonneg("constant c", *c),
            PotentialSpec::PowerLaw { coefficient, alpha } => {
                nonneg("power-law C", *coefficient)?;
                nonneg("power-law alpha", *alpha)
            }
            PotentialSpec::Tabulated { values } => {
                if values.is_empty() {
                    return Err(Error::Config("tabulated potential has no samples".into()));
                }
                values.iter().try_for_each(|v| nonneg("tabulated sample", *v))
            }
            PotentialSpec::Sided { left, right } => {
                left.validate()?;
                right.validate()
            }
        }
    }

    /// `V(x)` at an interior point.
    pub fn evaluate(&self, domain: Domain, p: Point) -> Result<f64> {
        let d = distance_to_boundary(domain, p)?;
        match self {
            PotentialSpec::Zero => Ok(0.0),
            PotentialSpec::Constant { c } => Ok(*c),
            PotentialSpec::PowerLaw { coefficient, alpha } => {
                if *alpha == 0.0 {
                    Ok(*coefficient)
                } else if d == 0.0 {
                    if *coefficient == 0.0 {
                        Ok(0.0)
                    } else {
                        Err(Error::SingularEvaluation(format!("({}, {})", p.x, p.y)))
                    }
                } else {
                    Ok(coefficient * d.powf(-alpha))
                }
            }
            PotentialSpec::Tabulated { values } => {
                let s = match domain {
                    Domain::Interval01 => p.x,
                    Domain::UnitDisk => p.norm(),
                };
                let i = ((s * values.len() as f64).floor() as usize).min(values.len() - 1);
                Ok(values[i])
            }
            PotentialSpec::Sided { .. } => self.side(domain, p).0.evaluate(domain, p),
        }
    }

    fn side(&self, domain: Domain, p: Point) -> (&PotentialSpec, bool) {
        match self {
            PotentialSpec::Sided { left, right } => {
                let is_left = match domain {
                    Domain::Interval01 => p.x < 0.5,
                    Domain::UnitDisk => p.x < 0.0,
                };
                if is_left {
                    (left.as_ref(), true)
                } else {
                    (right.as_ref(), false)
                }
            }
            other => (other, true),
        }
    }

    /// The piece of the potential that governs the behaviour near `p`.
    pub fn near(&self, domain: Domain, p: Point) -> &PotentialSpec {
        let (spec, _) = self.side(domain, p);
        match spec {
            PotentialSpec::Sided { .. } => spec.near(domain, p),
            _ => spec,
        }
    }

    /// `min{V, k}`.
    pub fn truncate(&self, k: f64) -> Result<Truncated<'_>> {
        if !(k > 0.0) {
            return Err(Error::Config(format!("cutoff k = {k} must be positive")));
        }
        Ok(Truncated { spec: self, k })
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            PotentialSpec::PowerLaw { coefficient, alpha } => *alpha == 0.0 || *coefficient == 0.0,
            PotentialSpec::Sided { left, right } => left.is_bounded() && right.is_bounded(),
            _ => true,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::Zero => true,
            PotentialSpec::Constant { c } => *c == 0.0,
            PotentialSpec::PowerLaw { coefficient, .. } => *coefficient == 0.0,
            PotentialSpec::Tabulated { values } => values.iter().all(|v| *v == 0.0),
            PotentialSpec::Sided { left, right } => left.is_zero() && right.is_zero(),
        }
    }

    /// Whether `V <= C / d^2` holds by construction.
    pub fn certifies_quadratic_bound(&self) -> bool {
        match self {
            PotentialSpec::PowerLaw { alpha, .. } => *alpha <= 2.0,
            PotentialSpec::Sided { left, right } => {
                left.certifies_quadratic_bound() && right.certifies_quadratic_bound()
            }
            _ => true,
        }
    }

    /// Distance to the boundary below which `V >= k` somewhere; zero when `V` is bounded by `k`.
    pub fn saturation_distance(&self, k: f64) -> f64 {
        match self {
            PotentialSpec::PowerLaw { coefficient, alpha } if *alpha > 0.0 && *coefficient > 0.0 => {
                (coefficient / k).powf(1.0 / alpha)
            }
            PotentialSpec::Sided { left, right } => {
                left.saturation_distance(k).max(right.saturation_distance(k))
            }
            _ => 0.0,
        }
    }

    /// Uniform bound, if any.
    pub fn sup(&self) -> Option<f64> {
        match self {
            PotentialSpec::Zero => Some(0.0),
            PotentialSpec::Constant { c } => Some(*c),
            PotentialSpec::PowerLaw { coefficient, alpha } => {
                (*alpha == 0.0 || *coefficient == 0.0).then_some(*coefficient)
            }
            PotentialSpec::Tabulated { values } => Some(values.iter().cloned().fold(0.0, f64::max)),
            PotentialSpec::Sided { left, right } => Some(left.sup()?.max(right.sup()?)),
        }
    }

    /// Whether the potential depends on `d(x)` (or `|x|`) only.
    pub fn radial(&self) -> bool {
        !matches!(self, PotentialSpec::Sided { .. })
    }
}

fn nonneg(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be finite and >= 0, got {v}")))
    }
}

/// `min{V, k}`; finite on the whole closed domain.
#[derive(Debug, Clone, Copy)]
pub struct Truncated<'a> {
    spec: &'a PotentialSpec,
    k: f64,
}

impl Truncated<'_> {
    pub fn cutoff(&self) -> f64 {
        self.k
    }

    pub fn evaluate(&self, domain: Domain, p: Point) -> Result<f64> {
        match self.spec.evaluate(domain, p) {
            Ok(v) => Ok(v.min(self.k)),
            Err(Error::SingularEvaluation(_)) => Ok(self.k),
            Err(e) => Err(e),
        }
    }
}

/// Strictly increasing cutoffs `k_0 < ... < k_J` with a relative stopping tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationLadder {
    levels: Vec<f64>,
    tau_stop: f64,
}

pub const DEFAULT_TAU_STOP: f64 = 1e-6;

impl TruncationLadder {
    pub fn new(levels: Vec<f64>, tau_stop: f64) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::Config("a truncation ladder needs at least two levels".into()));
        }
        if levels.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
            return Err(Error::Config("ladder cutoffs must be positive and finite".into()));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("ladder cutoffs must be strictly increasing".into()));
        }
        if !(tau_stop > 0.0) {
            return Err(Error::Config("tau_stop must be positive".into()));
        }
        Ok(TruncationLadder { levels, tau_stop })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn tau_stop(&self) -> f64 {
        self.tau_stop
    }

    pub fn last(&self) -> f64 {
        *self.levels.last().expect("non-empty ladder")
    }

    pub fn with_tau_stop(mut self, tau_stop: f64) -> Result<Self> {
        if !(tau_stop > 0.0) {
            return Err(Error::Config("tau_stop must be positive".into()));
        }
        self.tau_stop = tau_stop;
        Ok(self)
    }

    /// Geometric ladder `k_j = k_final ratio^(j - J)` that ends exactly at `k_final`.
    pub fn ending_at(k_final: f64, ratio: f64, steps: usize) -> Result<Self> {
        let k0 = k_final / ratio.powi(steps as i32);
        let mut ladder = default_ladder(k0, ratio, steps)?;
        *ladder.levels.last_mut().expect("non-empty") = k_final;
        Ok(ladder)
    }
}

/// `k_j = k0 ratio^j` for `j = 0..=steps`.
pub fn default_ladder(k0: f64, ratio: f64, steps: usize) -> Result<TruncationLadder> {
    if !(k0 > 0.0) {
        return Err(Error::Config(format!("k0 = {k0} must be positive")));
    }
    if !(ratio > 1.0) {
        return Err(Error::Config(format!("ratio = {ratio} must exceed 1")));
    }
    if steps < 1 {
        return Err(Error::Config("a ladder needs J >= 1".into()));
    }
    let levels = (0..=steps).map(|j| k0 * ratio.powi(j as i32)).collect();
    TruncationLadder::new(levels, DEFAULT_TAU_STOP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn at(d: f64) -> Point {
        Point::on_line(d)
    }

    #[test]
    fn evaluate_examples() {
        let v = PotentialSpec::power_law(1.0, 2.0);
        assert_abs_diff_eq!(v.evaluate(Domain::Interval01, at(0.1)).unwrap(), 100.0, epsilon = 1e-9);
        assert_eq!(PotentialSpec::Zero.evaluate(Domain::Interval01, at(0.7)).unwrap(), 0.0);
        let c = PotentialSpec::Constant { c: 3.0 };
        assert_eq!(c.evaluate(Domain::UnitDisk, Point::new(0.1, 0.2)).unwrap(), 3.0);
        assert!(matches!(
            v.evaluate(Domain::Interval01, at(0.0)),
            Err(Error::SingularEvaluation(_))
        ));
    }

    #[test]
    fn truncate_examples() {
        let v = PotentialSpec::power_law(1.0, 2.0);
        let t = v.truncate(50.0).unwrap();
        assert_abs_diff_eq!(t.evaluate(Domain::Interval01, at(0.1)).unwrap(), 50.0);
        assert_abs_diff_eq!(t.evaluate(Domain::Interval01, at(0.5)).unwrap(), 4.0, epsilon = 1e-12);
        assert_eq!(t.evaluate(Domain::Interval01, at(0.0)).unwrap(), 50.0);
        let z = PotentialSpec::Zero.truncate(7.0).unwrap();
        assert_eq!(z.evaluate(Domain::Interval01, at(0.2)).unwrap(), 0.0);
        assert!(v.truncate(0.0).is_err());
    }

    #[test]
    fn ladder_examples() {
        let l = default_ladder(10.0, 4.0, 5).unwrap();
        assert_eq!(l.levels(), &[10.0, 40.0, 160.0, 640.0, 2560.0, 10240.0]);
        assert_eq!(default_ladder(1.0, 2.0, 1).unwrap().levels(), &[1.0, 2.0]);
        assert!(matches!(default_ladder(10.0, 4.0, 0), Err(Error::Config(_))));
        assert!(default_ladder(10.0, 1.0, 3).is_err());
        let e = TruncationLadder::ending_at(1e5, 2.0, 10).unwrap();
        assert_eq!(e.last(), 1e5);
        assert!(TruncationLadder::new(vec![1.0, 1.0], 1e-6).is_err());
    }

    #[test]
    fn parses_config_forms() {
        let v: PotentialSpec =
            serde_json::from_str(r#"{"kind": "powerlaw", "C": 1.0, "alpha": "2.0"}"#).unwrap();
        assert_eq!(v, PotentialSpec::power_law(1.0, 2.0));
        let s: PotentialSpec = serde_json::from_str(
            r#"{"kind": "sided", "left": {"kind": "powerlaw", "C": 4, "alpha": 2},
                "right": {"kind": "constant", "c": "1"}}"#,
        )
        .unwrap();
        assert!(s.certifies_quadratic_bound());
        assert!(!s.is_bounded());
        assert_eq!(
            s.evaluate(Domain::Interval01, at(0.9)).unwrap(),
            1.0
        );
        assert_abs_diff_eq!(s.evaluate(Domain::Interval01, at(0.1)).unwrap(), 400.0, epsilon = 1e-9);
    }

    #[test]
    fn tabulated_is_piecewise_constant() {
        let v = PotentialSpec::Tabulated { values: vec![1.0, 2.0, 3.0, 4.0] };
        assert_eq!(v.evaluate(Domain::Interval01, at(0.1)).unwrap(), 1.0);
        assert_eq!(v.evaluate(Domain::Interval01, at(0.6)).unwrap(), 3.0);
        assert_eq!(v.truncate(2.5).unwrap().evaluate(Domain::Interval01, at(0.9)).unwrap(), 2.5);
        assert!(PotentialSpec::Tabulated { values: vec![-1.0] }.validate().is_err());
    }

    proptest! {
        #[test]
        fn truncation_is_monotone(x in 1e-6f64..0.999_999, k in 0.1f64..1e4, extra in 0.0f64..1e4,
                                  c in 0.0f64..10.0, alpha in 0.0f64..3.0) {
            let v = PotentialSpec::power_law(c, alpha);
            let p = at(x);
            let full = v.evaluate(Domain::Interval01, p).unwrap();
            let lo = v.truncate(k).unwrap().evaluate(Domain::Interval01, p).unwrap();
            let hi = v.truncate(k + extra).unwrap().evaluate(Domain::Interval01, p).unwrap();
            prop_assert!(lo <= hi && hi <= full);
            prop_assert!(lo >= 0.0);
        }

        #[test]
        fn truncation_converges(x in 1e-3f64..0.999, alpha in 0.0f64..3.0) {
            let v = PotentialSpec::power_law(1.0, alpha);
            let p = at(x);
            let full = v.evaluate(Domain::Interval01, p).unwrap();
            let big = v.truncate(1e12).unwrap().evaluate(Domain::Interval01, p).unwrap();
            prop_assert_eq!(full, big);
        }
    }
}
