//! Experiment configuration files.

use std::path::{Path, PathBuf};

use hopflab::decimal;
use hopflab::geometry::Grid;
use hopflab::potential::{default_ladder, DEFAULT_TAU_STOP};
use hopflab::singular::BoundaryMeasure;
use hopflab::{BoundaryPoint, Domain, PotentialSpec, SourceSpec, TruncationLadder};
use serde::de::{self, Deserializer};
use serde::Deserialize;

use crate::error::CliError;

fn count<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
    let v = decimal::number(d)?;
    if v.fract() != 0.0 || !(1.0..=1e9).contains(&v) {
        return Err(de::Error::custom(format!("{v} is not a positive integer")));
    }
    Ok(v as usize)
}

fn optional_count<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
    #[derive(Deserialize)]
    struct Wrap(#[serde(deserialize_with = "count")] usize);
    Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
}

fn seed<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(u64),
        Text(String),
    }
    Option::<Repr>::deserialize(d)?
        .map(|r| match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => s
                .trim()
                .parse()
                .map_err(|_| de::Error::custom(format!("{s:?} is not a seed"))),
        })
        .transpose()
}

/// Truncation ladder: explicit `levels`, a ladder ending at `final`, or
/// `k0 · ratio^j` for `j = 0..=steps`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(default, deserialize_with = "decimal::optional_numbers")]
    pub levels: Option<Vec<f64>>,
    #[serde(default, rename = "final", deserialize_with = "decimal::optional_number")]
    pub last: Option<f64>,
    #[serde(default, deserialize_with = "decimal::optional_number")]
    pub k0: Option<f64>,
    #[serde(default, deserialize_with = "decimal::optional_number")]
    pub ratio: Option<f64>,
    #[serde(default, deserialize_with = "optional_count")]
    pub steps: Option<usize>,
    #[serde(default, deserialize_with = "decimal::optional_number")]
    pub tau_stop: Option<f64>,
}

impl LadderConfig {
    pub fn build(&self) -> hopflab::Result<TruncationLadder> {
        let ratio = self.ratio.unwrap_or(4.0);
        let steps = self.steps.unwrap_or(8);
        let ladder = match (&self.levels, self.last) {
            (Some(levels), _) => TruncationLadder::new(levels.clone(), DEFAULT_TAU_STOP)?,
            (None, Some(last)) => TruncationLadder::ending_at(last, ratio, steps)?,
            (None, None) => default_ladder(self.k0.unwrap_or(10.0), ratio, steps)?,
        };
        match self.tau_stop {
            Some(t) => ladder.with_tau_stop(t),
            None => Ok(ladder),
        }
    }
}

/// Power-law cells of a Hopf scan: every `(alpha, C)` pair.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(deserialize_with = "decimal::numbers")]
    pub alpha: Vec<f64>,
    #[serde(rename = "C", default = "unit", deserialize_with = "decimal::numbers")]
    pub coefficients: Vec<f64>,
    /// Extra `(alpha, C)` cells.
    #[serde(default)]
    pub extra: Vec<ScanCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanCell {
    #[serde(deserialize_with = "decimal::number")]
    pub alpha: f64,
    #[serde(rename = "C", deserialize_with = "decimal::number")]
    pub coefficient: f64,
}

fn unit() -> Vec<f64> {
    vec![1.0]
}

impl ScanConfig {
    /// The cells in canonical order, duplicates removed.
    pub fn cells(&self) -> Vec<ScanCell> {
        let mut cells: Vec<ScanCell> = self
            .alpha
            .iter()
            .flat_map(|&alpha| {
                self.coefficients
                    .iter()
                    .map(move |&coefficient| ScanCell { alpha, coefficient })
            })
            .chain(self.extra.iter().copied())
            .collect();
        cells.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.coefficient.total_cmp(&b.coefficient)));
        cells.dedup();
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: Domain,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub source: Option<SourceSpec>,
    #[serde(deserialize_with = "count")]
    pub resolution: usize,
    /// Angular resolution of the disk grid (default twice `resolution`).
    #[serde(default, deserialize_with = "optional_count")]
    pub angular: Option<usize>,
    #[serde(default)]
    pub ladder: LadderConfig,
    #[serde(default, deserialize_with = "decimal::optional_numbers")]
    pub eps: Option<Vec<f64>>,
    /// Endpoints (interval) or angles (disk).
    #[serde(default, deserialize_with = "decimal::optional_numbers")]
    pub boundary_points: Option<Vec<f64>>,
    #[serde(default, deserialize_with = "decimal::optional_number")]
    pub tol: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default, deserialize_with = "seed")]
    pub seed: Option<u64>,
    /// Number of random nonnegative source perturbations checked by `solve`.
    #[serde(default, deserialize_with = "optional_count")]
    pub perturbations: Option<usize>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    /// Adds oracle columns to a Hopf scan.
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub measure: Option<BoundaryMeasure>,
    /// Probe coordinates for `oracle-compare`: `x`, or `r` along angle 0.
    #[serde(default, deserialize_with = "decimal::optional_numbers")]
    pub probes: Option<Vec<f64>>,
}

/// A parsed configuration with its source text.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub text: String,
}

impl Experiment {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Experiment {
            config,
            text: text.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The configuration as a JSON value, for embedding in JSON outputs.
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.text).unwrap_or(serde_json::Value::Null)
    }
}

impl ExperimentConfig {
    pub fn potential(&self) -> Result<&PotentialSpec, CliError> {
        self.potential
            .as_ref()
            .ok_or_else(|| CliError::Config("missing key \"potential\"".into()))
    }

    pub fn source(&self) -> Result<&SourceSpec, CliError> {
        self.source
            .as_ref()
            .ok_or_else(|| CliError::Config("missing key \"source\"".into()))
    }

    pub fn measure(&self) -> Result<&BoundaryMeasure, CliError> {
        self.measure
            .as_ref()
            .ok_or_else(|| CliError::Config("missing key \"measure\"".into()))
    }

    pub fn scan(&self) -> Result<&ScanConfig, CliError> {
        let scan = self
            .scan
            .as_ref()
            .ok_or_else(|| CliError::Config("missing key \"scan\"".into()))?;
        if scan.alpha.is_empty() {
            return Err(CliError::Config("\"scan.alpha\" is empty".into()));
        }
        if scan.coefficients.is_empty() {
            return Err(CliError::Config("\"scan.C\" is empty".into()));
        }
        Ok(scan)
    }

    pub fn grid(&self) -> hopflab::Result<Grid> {
        match self.domain {
            Domain::Interval01 => Grid::interval(self.resolution),
            Domain::UnitDisk => Grid::disk(self.resolution, self.angular.unwrap_or(2 * self.resolution)),
        }
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(hopflab::solver::DEFAULT_TOL)
    }

    pub fn boundary_points(&self) -> hopflab::Result<Vec<BoundaryPoint>> {
        let coords = match (&self.boundary_points, self.domain) {
            (Some(c), _) => c.clone(),
            (None, Domain::Interval01) => vec![0.0, 1.0],
            (None, Domain::UnitDisk) => vec![0.0],
        };
        let mut points = coords
            .into_iter()
            .map(|c| BoundaryPoint::new(self.domain, c))
            .collect::<hopflab::Result<Vec<_>>>()?;
        points.sort_by(|a, b| a.coord().total_cmp(&b.coord()));
        points.dedup_by(|a, b| a.coord() == b.coord());
        Ok(points)
    }
}
