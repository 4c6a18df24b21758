//! Right-hand sides `f` and their samples on a grid.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Grid, Point};

/// Named sources, in the first coordinate `x` of the point.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    One,
    X,
    /// `1 + sin(2 pi x) / 2`.
    Sin,
    OneMinusX,
    Indicator { left: f64, right: f64 },
    /// Piecewise-constant samples on uniform cells of `[0, 1]` (in `x`, or `r` on the disk).
    Table(Vec<f64>),
    /// `scale * inner`.
    Scaled(f64, Box<SourceSpec>),
}

impl SourceSpec {
    pub fn evaluate(&self, domain: Domain, p: Point) -> f64 {
        match self {
            SourceSpec::One => 1.0,
            SourceSpec::X => p.x,
            SourceSpec::Sin => 1.0 + 0.5 * (TAU * p.x).sin(),
            SourceSpec::OneMinusX => 1.0 - p.x,
            SourceSpec::Indicator { left, right } => {
                if p.x >= *left && p.x <= *right {
                    1.0
                } else {
                    0.0
                }
            }
            SourceSpec::Table(values) => {
                let s = match domain {
                    Domain::Interval01 => p.x,
                    Domain::UnitDisk => p.norm(),
                };
                let i = ((s * values.len() as f64).floor().max(0.0) as usize).min(values.len() - 1);
                values[i]
            }
            SourceSpec::Scaled(c, inner) => c * inner.evaluate(domain, p),
        }
    }

    pub fn scaled(self, c: f64) -> Self {
        SourceSpec::Scaled(c, Box::new(self))
    }

    pub fn is_radial(&self, domain: Domain) -> bool {
        match self {
            SourceSpec::One | SourceSpec::Table(_) => true,
            SourceSpec::Scaled(_, inner) => inner.is_radial(domain),
            _ => domain == Domain::Interval01,
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::One => write!(f, "one"),
            SourceSpec::X => write!(f, "x"),
            SourceSpec::Sin => write!(f, "sin"),
            SourceSpec::OneMinusX => write!(f, "1-x"),
            SourceSpec::Indicator { left, right } => write!(f, "indicator({left},{right})"),
            SourceSpec::Table(v) => write!(f, "table[{}]", v.len()),
            SourceSpec::Scaled(c, inner) => write!(f, "{c}*{inner}"),
        }
    }
}

impl FromStr for SourceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "one" | "1" => return Ok(SourceSpec::One),
            "x" => return Ok(SourceSpec::X),
            "sin" => return Ok(SourceSpec::Sin),
            "1-x" | "one_minus_x" => return Ok(SourceSpec::OneMinusX),
            _ => {}
        }
        if let Some(args) = s.strip_prefix("indicator(").and_then(|r| r.strip_suffix(')')) {
            let parts: Vec<&str> = args.split(',').collect();
            if parts.len() == 2 {
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad indicator bound {t:?}")))
                };
                let (left, right) = (parse(parts[0])?, parse(parts[1])?);
                if left < right {
                    return Ok(SourceSpec::Indicator { left, right });
                }
            }
            return Err(Error::Config(format!("bad indicator source {s:?}")));
        }
        Err(Error::Config(format!("unknown source {s:?}")))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SourceRepr {
    Name(String),
    Table {
        #[serde(deserialize_with = "crate::decimal::numbers")]
        table: Vec<f64>,
    },
}

impl<'de> Deserialize<'de> for SourceSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match SourceRepr::deserialize(d)? {
            SourceRepr::Name(s) => s.parse().map_err(serde::de::Error::custom),
            SourceRepr::Table { table } if !table.is_empty() => Ok(SourceSpec::Table(table)),
            SourceRepr::Table { .. } => Err(serde::de::Error::custom("empty source table")),
        }
    }
}

impl Serialize for SourceSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Full,
    Positive,
    Negative,
    Abs,
    Zero,
}

/// `f` sampled at the interior nodes, plus its one-sided limits at the
/// boundary ghost nodes.
#[derive(Debug, Clone)]
pub struct SourceField {
    spec: SourceSpec,
    part: Part,
    domain: Domain,
    values: Vec<f64>,
    boundary: Vec<f64>,
    linf: f64,
    l1: f64,
}

impl SourceField {
    pub fn sample(grid: &Grid, spec: SourceSpec) -> Self {
        Self::sample_part(grid, spec, Part::Full)
    }

    fn sample_part(grid: &Grid, spec: SourceSpec, part: Part) -> Self {
        let domain = grid.domain();
        let eval = |p: Point| apply_part(part, spec.evaluate(domain, p));
        let values: Vec<f64> = grid.nodes().iter().map(|p| eval(*p)).collect();
        let boundary: Vec<f64> = grid
            .boundary_points()
            .iter()
            .map(|a| {
                // one-sided limit from inside the domain
                eval(a.step_inward(1e-12))
            })
            .collect();
        let linf = values.iter().chain(&boundary).map(|v| v.abs()).fold(0.0, f64::max);
        let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        let babs: Vec<f64> = boundary.iter().map(|v| v.abs()).collect();
        let l1 = grid.integrate(&abs, Some(&babs));
        SourceField {
            spec,
            part,
            domain,
            values,
            boundary,
            linf,
            l1,
        }
    }

    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary
    }

    pub fn linf(&self) -> f64 {
        self.linf
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().chain(&self.boundary).all(|v| *v >= 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().chain(&self.boundary).all(|v| *v == 0.0)
    }

    /// `f` at an arbitrary point of the closed domain.
    pub fn evaluate(&self, p: Point) -> f64 {
        apply_part(self.part, self.spec.evaluate(self.domain, p))
    }

    /// `(f+, f-)`, both nonnegative.
    pub fn split(&self, grid: &Grid) -> (SourceField, SourceField) {
        match self.part {
            Part::Full => (
                Self::sample_part(grid, self.spec.clone(), Part::Positive),
                Self::sample_part(grid, self.spec.clone(), Part::Negative),
            ),
            _ => (
                self.clone(),
                Self::sample_part(grid, self.spec.clone(), Part::Zero),
            ),
        }
    }

    /// `|f|`.
    pub fn abs(&self, grid: &Grid) -> SourceField {
        match self.part {
            Part::Full => Self::sample_part(grid, self.spec.clone(), Part::Abs),
            _ => self.clone(),
        }
    }
}

fn apply_part(part: Part, v: f64) -> f64 {
    match part {
        Part::Full => v,
        Part::Positive => v.max(0.0),
        Part::Negative => (-v).max(0.0),
        Part::Abs => v.abs(),
        Part::Zero => 0.0,
    }
}
