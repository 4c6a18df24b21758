//! The five subcommands. Each returns its output files; nothing is written here.

use hopflab::boundary::{fmt17, normal_derivative_report, pointwise_normal_derivative, ReportOptions};
use hopflab::extrapolate::LadderLimit;
use hopflab::oracle::{ode_solve, truncation_limit_reference, OracleGeometry, OracleProblem};
use hopflab::singular::{classify_sigma, measure_bvp};
use hopflab::solver::{energy, solve_limit, LimitSolution};
use hopflab::{BoundaryPoint, Domain, Grid, Point, PotentialSpec, SourceField, SourceSpec, TruncationLadder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;
use crate::output::{csv, json, Output};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    HopfScan,
    Sigma,
    MeasureBvp,
    OracleCompare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::HopfScan => "hopf-scan",
            Command::Sigma => "sigma",
            Command::MeasureBvp => "measure-bvp",
            Command::OracleCompare => "oracle-compare",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Overrides the config seed.
    pub seed: Option<u64>,
}

/// Default probe coordinates of `oracle-compare`.
pub const PROBES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Agreement demanded of FD and oracle values.
pub const ORACLE_RTOL: f64 = 1e-3;
pub const ORACLE_ATOL: f64 = 1e-6;

const PERTURBATION_CELLS: usize = 16;

pub fn run(command: Command, exp: &Experiment, options: &RunOptions) -> Result<Vec<Output>, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Numerical(e.to_string()))?;
    pool.install(|| match command {
        Command::Solve => solve(exp, options),
        Command::HopfScan => hopf_scan(exp),
        Command::Sigma => sigma(exp),
        Command::MeasureBvp => measure(exp),
        Command::OracleCompare => oracle_compare(exp),
    })
}

fn node_rows(grid: &Grid, columns: &[&[f64]]) -> (String, Vec<String>) {
    let disk = grid.domain() == Domain::UnitDisk;
    let rows = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = if disk {
                format!("{},{}", fmt17(p.x), fmt17(p.y))
            } else {
                fmt17(p.x)
            };
            for c in columns {
                row.push(',');
                row.push_str(&fmt17(c[i]));
            }
            row
        })
        .collect();
    let head = if disk { "x,y" } else { "x" };
    (head.to_string(), rows)
}

fn center(domain: Domain) -> Point {
    match domain {
        Domain::Interval01 => Point::on_line(0.5),
        Domain::UnitDisk => Point::new(0.0, 0.0),
    }
}

fn solve(exp: &Experiment, options: &RunOptions) -> Result<Vec<Output>, CliError> {
    let c = &exp.config;
    let grid = c.grid()?;
    let v = c.potential()?;
    let f = SourceField::sample(&grid, c.source()?.clone());
    let ladder = c.ladder.build()?;
    let tol = c.tol();
    let u = solve_limit(&grid, v, &ladder, &f, tol)?;
    let field = u.extrapolated();
    let (head, rows) = node_rows(&grid, &[&field, u.u()]);
    let levels: Vec<_> = u
        .levels
        .iter()
        .map(|l| {
            json!({
                "cutoff": l.cutoff,
                "iterations": l.stats.iterations,
                "residual": l.stats.residual,
                "absorption": l.absorption,
                "l1": l.l1,
                "linf": l.linf,
            })
        })
        .collect();
    let fluxes = c
        .boundary_points()?
        .iter()
        .map(|a| {
            let d = pointwise_normal_derivative(&u, a)?;
            Ok(json!({"a": a.coord(), "fluxes": d.fluxes, "limit": d.limit, "warning": d.warning}))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut diagnostics = json!({
        "cutoffs": u.cutoffs(),
        "increments": u.increments,
        "converged": u.converged,
        "converged_at": u.converged_at,
        "levels": levels,
        "absorption": u.last().absorption,
        "source_l1": f.l1(),
        "energy": energy(&grid, v, &field, &f).ok(),
        "u_center": grid.interpolate(&field, None, center(grid.domain()))?,
        "boundary_fluxes": fluxes,
    });
    if let Some(m) = c.perturbations {
        let seed = options.seed.or(c.seed).unwrap_or(0);
        diagnostics["perturbations"] = perturbation_check(&grid, v, &ladder, tol, seed, m)?;
    }
    Ok(vec![
        csv(exp, "solve", "solution.csv", &format!("{head},u,u_last"), &rows),
        json(exp, "solve", "diagnostics.json", diagnostics),
    ])
}

/// Solves with random nonnegative tabulated sources and reports the largest
/// negative nodal value over all levels (zero when the maximum principle holds).
fn perturbation_check(
    grid: &Grid,
    v: &PotentialSpec,
    ladder: &TruncationLadder,
    tol: f64,
    seed: u64,
    count: usize,
) -> Result<serde_json::Value, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..PERTURBATION_CELLS).map(|_| rng.random::<f64>()).collect())
        .collect();
    let violations = tables
        .par_iter()
        .map(|t| {
            let eta = SourceField::sample(grid, SourceSpec::Table(t.clone()));
            let u = solve_limit(grid, v, ladder, &eta, tol)?;
            Ok(u.levels
                .iter()
                .flat_map(|l| l.u.iter())
                .fold(0.0_f64, |m, x| m.max(-x)))
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    Ok(json!({
        "seed": seed,
        "count": count,
        "max_violation": violations.iter().fold(0.0_f64, |m, x| m.max(*x)),
    }))
}

fn oracle_geometry(c: &ExperimentConfig, v: &PotentialSpec, f: &SourceSpec) -> Result<OracleGeometry, CliError> {
    match c.domain {
        Domain::Interval01 => Ok(OracleGeometry::Interval),
        Domain::UnitDisk if v.radial() && f.is_radial(Domain::UnitDisk) => Ok(OracleGeometry::RadialDisk),
        Domain::UnitDisk => Err(CliError::Config(
            "the oracle needs a radial potential and source on the disk".into(),
        )),
    }
}

/// Index of `a` in the oracle's boundary fluxes.
fn oracle_end(a: &BoundaryPoint) -> usize {
    match a.domain() {
        Domain::Interval01 if a.coord() > 0.5 => 1,
        _ => 0,
    }
}

/// The oracle's ladder limit on the levels the FD run actually solved.
fn matched_reference(problem: &OracleProblem, u: &LimitSolution, a: &BoundaryPoint) -> Result<LadderLimit, CliError> {
    let ladder = TruncationLadder::new(u.cutoffs(), u.ladder.tau_stop())?;
    Ok(truncation_limit_reference(problem, &ladder, oracle_end(a))?.limit)
}

fn relative(fd: f64, reference: f64) -> f64 {
    let d = (fd - reference).abs();
    if d == 0.0 {
        0.0
    } else {
        d / reference.abs()
    }
}

fn hopf_scan(exp: &Experiment) -> Result<Vec<Output>, CliError> {
    let c = &exp.config;
    let cells = c.scan()?.cells();
    let grid = c.grid()?;
    let source = c.source.clone().unwrap_or(SourceSpec::One);
    let f = SourceField::sample(&grid, source.clone());
    let ladder = c.ladder.build()?;
    let points = c.boundary_points()?;
    let options = ReportOptions {
        eps: c.eps.clone(),
        tol: c.tol(),
        ..Default::default()
    };
    let geometry = if c.oracle {
        Some(oracle_geometry(c, &PotentialSpec::Zero, &source)?)
    } else {
        None
    };
    let rows = cells
        .par_iter()
        .map(|cell| {
            let v = PotentialSpec::power_law(cell.coefficient, cell.alpha);
            let u = solve_limit(&grid, &v, &ladder, &f, options.tol)?;
            points
                .iter()
                .map(|a| {
                    let r = normal_derivative_report(&u, &f, a, &options)?;
                    let poisson = if r.poisson.diverged {
                        "inf".to_string()
                    } else {
                        fmt17(r.poisson.value)
                    };
                    let mut row = format!(
                        "{},{},{},{},{},{},{},{},{},{},{}",
                        fmt17(cell.alpha),
                        fmt17(cell.coefficient),
                        fmt17(a.coord()),
                        fmt17(r.g()),
                        fmt17(r.pointwise.limit.error),
                        r.pointwise.limit.still_decreasing,
                        fmt17(r.quotient.limit.value),
                        fmt17(r.quotient.limit.error),
                        poisson,
                        r.classical_exists && r.representation_holds,
                        r.hopf_positive
                    );
                    if let Some(geometry) = geometry {
                        let problem = OracleProblem::new(geometry, v.clone(), None, source.clone());
                        let reference = matched_reference(&problem, &u, a)?.value;
                        row.push_str(&format!(",{},{}", fmt17(reference), fmt17(relative(r.g(), reference))));
                    }
                    Ok(row)
                })
                .collect::<Result<Vec<String>, CliError>>()
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut header =
        "alpha,C,a,g,g_err,still_decreasing,quotient_limit,quotient_err,poisson_value,in_N,hopf_positive".to_string();
    if c.oracle {
        header.push_str(",oracle_g,oracle_rel_err");
    }
    let rows: Vec<String> = rows.into_iter().flatten().collect();
    Ok(vec![csv(exp, "hopf-scan", "hopf_scan.csv", &header, &rows)])
}

fn sigma(exp: &Experiment) -> Result<Vec<Output>, CliError> {
    let c = &exp.config;
    let grid = c.grid()?;
    let v = c.potential()?;
    let ladder = c.ladder.build()?;
    let reports = c
        .boundary_points()?
        .par_iter()
        .map(|a| classify_sigma(&grid, v, &ladder, a, c.tol()))
        .collect::<hopflab::Result<Vec<_>>>()?;
    let rows: Vec<String> = reports.iter().map(|r| r.csv_row()).collect();
    let details = serde_json::to_value(&reports).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(vec![
        csv(exp, "sigma", "sigma.csv", hopflab::singular::SigmaReport::CSV_HEADER, &rows),
        json(exp, "sigma", "sigma.json", details),
    ])
}

fn measure(exp: &Experiment) -> Result<Vec<Output>, CliError> {
    let c = &exp.config;
    let grid = c.grid()?;
    let v = c.potential()?;
    let nu = c.measure()?;
    nu.validate(c.domain)?;
    let ladder = c.ladder.build()?;
    let s = measure_bvp(&grid, v, &ladder, nu, c.tol())?;
    let (head, rows) = node_rows(&grid, &[&s.field]);
    let defect = serde_json::to_value(&s).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok(vec![
        csv(exp, "measure-bvp", "solution.csv", &format!("{head},u"), &rows),
        json(exp, "measure-bvp", "defect.json", defect),
    ])
}

fn oracle_compare(exp: &Experiment) -> Result<Vec<Output>, CliError> {
    let c = &exp.config;
    if c.measure.is_some() {
        return Err(CliError::Config("oracle-compare takes a source, not a boundary measure".into()));
    }
    let grid = c.grid()?;
    let v = c.potential()?;
    let source = c.source()?.clone();
    let geometry = oracle_geometry(c, v, &source)?;
    let f = SourceField::sample(&grid, source.clone());
    let ladder = c.ladder.build()?;
    let mut probes = c.probes.clone().unwrap_or_else(|| PROBES.to_vec());
    probes.sort_by(f64::total_cmp);
    let u = solve_limit(&grid, v, &ladder, &f, c.tol())?;
    let last = u.last();
    let problem = OracleProblem::new(geometry, v.clone(), None, source);
    let at_cutoff = OracleProblem {
        cutoff: last.cutoff,
        ..problem.clone()
    };
    let points = c.boundary_points()?;
    let (probe_values, fluxes) = rayon::join(
        || ode_solve(&at_cutoff, &probes),
        || {
            points
                .par_iter()
                .map(|a| {
                    let fd = pointwise_normal_derivative(&u, a)?.limit.value;
                    Ok((a.coord(), fd, matched_reference(&problem, &u, a)?.value))
                })
                .collect::<Result<Vec<_>, CliError>>()
        },
    );
    let mut compared = Vec::new();
    for &(coord, reference) in &probe_values?.probes {
        let p = match c.domain {
            Domain::Interval01 => Point::on_line(coord),
            Domain::UnitDisk => Point::polar(coord, 0.0),
        };
        let fd = grid.interpolate(&last.u, Some(&last.boundary), p)?;
        compared.push(("u", coord, fd, reference));
    }
    compared.extend(fluxes?.into_iter().map(|(a, fd, reference)| ("g", a, fd, reference)));
    let rows: Vec<String> = compared
        .iter()
        .map(|&(quantity, coord, fd, reference)| {
            let abs = (fd - reference).abs();
            format!(
                "{quantity},{},{},{},{},{},{}",
                fmt17(coord),
                fmt17(fd),
                fmt17(reference),
                fmt17(abs),
                fmt17(relative(fd, reference)),
                abs <= (ORACLE_RTOL * reference.abs()).max(ORACLE_ATOL)
            )
        })
        .collect();
    Ok(vec![csv(
        exp,
        "oracle-compare",
        "oracle_compare.csv",
        "quantity,coordinate,fd,oracle,abs_err,rel_err,within_tolerance",
        &rows,
    )])
}
