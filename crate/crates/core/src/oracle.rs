//! Reference solutions by adaptive high-order shooting, independent of the
//! finite-difference solver.
//!
//! On the interval the solution is written as `p + A φ` on `[0, 1/2]` and
//! `q + B ψ` on `[1/2, 1]`, where `φ`, `ψ` are homogeneous solutions vanishing
//! at the respective endpoint and `p`, `q` particular solutions with zero
//! data there; `A` and `B` match value and slope at the midpoint. On the disk
//! the radial equation `-u'' - u'/r + V u = f` is shot from the centre.

use ode_solvers::{Dopri5, OutputType, System, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extrapolate::{ladder_limit, LadderLimit};
use crate::geometry::{Domain, Point};
use crate::potential::{PotentialSpec, TruncationLadder};
use crate::source::SourceSpec;

/// Offset of the singular start for `alpha <= 2`.
const FROBENIUS_OFFSET: f64 = 1e-8;
/// Size of the WKB exponent at the singular start for `alpha > 2`.
const WKB_EXPONENT: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OracleGeometry {
    Interval,
    RadialDisk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleProblem {
    pub geometry: OracleGeometry,
    pub potential: PotentialSpec,
    /// `None` solves with the untruncated potential.
    pub cutoff: Option<f64>,
    pub source: SourceSpec,
    pub rtol: f64,
}

impl OracleProblem {
    pub fn new(geometry: OracleGeometry, potential: PotentialSpec, cutoff: Option<f64>, source: SourceSpec) -> Self {
        OracleProblem {
            geometry,
            potential,
            cutoff,
            source,
            rtol: 1e-12,
        }
    }

    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSolution {
    /// `(coordinate, u)`: `x` on the interval, `r` on the disk.
    pub probes: Vec<(f64, f64)>,
    /// Inward normal derivative: at `x = 0` and `x = 1` on the interval, on
    /// the circle (one entry) for the disk.
    pub flux: Vec<f64>,
}

/// Independent variable of the shooting.
#[derive(Clone, Copy, PartialEq)]
enum Variable {
    /// `s` itself: `u'' = V u - f`.
    Linear,
    /// `t = ln s` on the interval: `u_tt = u_t + e^(2t) (V u - f)`.
    LogInterval,
    /// `t = ln r` for the radial equation: `u_tt = e^(2t) (V u - f)`.
    LogRadial,
}

/// `y = [φ, φ', p, p']` with `φ` homogeneous and `p` particular, derivatives
/// taken in the shooting variable.
struct Shooting<'a> {
    potential: &'a dyn Fn(f64) -> f64,
    source: &'a dyn Fn(f64) -> f64,
    variable: Variable,
}

impl System<f64, Vector4<f64>> for Shooting<'_> {
    fn system(&self, t: f64, y: &Vector4<f64>, dy: &mut Vector4<f64>) {
        let (s, w, damp) = match self.variable {
            Variable::Linear => (t, 1.0, 0.0),
            Variable::LogInterval => (t.exp(), (2.0 * t).exp(), 1.0),
            Variable::LogRadial => (t.exp(), (2.0 * t).exp(), 0.0),
        };
        let v = (self.potential)(s);
        let f = (self.source)(s);
        dy[0] = y[1];
        dy[1] = damp * y[1] + w * v * y[0];
        dy[2] = y[3];
        dy[3] = damp * y[3] + w * (v * y[2] - f);
    }
}

/// Largest growth exponent of the homogeneous solution between two
/// renormalisations.
const GROWTH_PER_STOP: f64 = 8.0;

/// State at a stop of [`march`], after renormalisation. Between stops `φ` is
/// divided by `norm` and the multiple `shift φ` is removed from `p`, which
/// keeps `p` a particular solution with the same boundary data while the two
/// columns stay well separated.
struct Record {
    s: f64,
    /// `[φ, φ', p, p']`, derivatives in the original coordinate.
    y: Vector4<f64>,
    norm: f64,
    shift: f64,
}

/// Integrates from `start` through the increasing `stops`, inserting
/// intermediate stops so that `φ` grows by at most `e^8` between
/// renormalisations.
fn march(system: &Shooting<'_>, start: f64, y0: Vector4<f64>, stops: &[f64], rtol: f64) -> Result<Vec<Record>> {
    let log = system.variable != Variable::Linear;
    let to_var = |s: f64| if log { s.ln() } else { s };
    // d/dt = s d/ds
    let scale = |y: Vector4<f64>, s: f64, inward: bool| -> Vector4<f64> {
        if !log {
            return y;
        }
        let c = if inward { s } else { 1.0 / s };
        Vector4::new(y[0], y[1] * c, y[2], y[3] * c)
    };
    let reach = |s: f64, limit: f64| -> f64 {
        let rate = |x: f64| (system.potential)(x).max(0.0).sqrt();
        let mut step = limit - s;
        while step > 1e-3 * (limit - s) {
            let r = rate(s).max(rate(s + step));
            if r * step <= GROWTH_PER_STOP {
                break;
            }
            step = (GROWTH_PER_STOP / r).min(0.5 * step);
        }
        s + step
    };
    let mut out = Vec::with_capacity(stops.len());
    let mut s = start;
    let mut y = scale(y0, start, true);
    let integrate = |s: f64, next: f64, y: Vector4<f64>| -> Result<Vector4<f64>> {
        let (a, b) = (to_var(s), to_var(next));
        let sys = Shooting {
            potential: system.potential,
            source: system.source,
            variable: system.variable,
        };
        // the stiffness heuristic misfires on the steep starts and is not needed here
        let mut stepper = Dopri5::from_param(
            sys,
            a,
            b,
            b - a,
            y,
            rtol,
            rtol * 1e-12,
            0.9,
            0.04,
            0.2,
            10.0,
            b - a,
            0.0,
            1_000_000,
            u32::MAX,
            OutputType::Sparse,
        );
        stepper
            .integrate()
            .map_err(|e| Error::Oracle(format!("integration failed: {e}")))?;
        let y = *stepper
            .y_out()
            .last()
            .ok_or_else(|| Error::Oracle("integrator produced no output".into()))?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Oracle(format!("non-finite state at {next}")));
        }
        Ok(y)
    };
    for &target in stops {
        if target <= s {
            out.push(Record {
                s: target,
                y: scale(y, target, false),
                norm: 1.0,
                shift: 0.0,
            });
            continue;
        }
        while s < target {
            let next = reach(s, target);
            y = integrate(s, next, y)?;
            s = next;
            let norm = y[0].hypot(y[1]);
            if !(norm > 0.0) {
                return Err(Error::Oracle(format!("homogeneous solution vanishes at {s}")));
            }
            y[0] /= norm;
            y[1] /= norm;
            let shift = y[2] * y[0] + y[3] * y[1];
            y[2] -= shift * y[0];
            y[3] -= shift * y[1];
            out.push(Record {
                s,
                y: scale(y, s, false),
                norm,
                shift,
            });
        }
    }
    Ok(out)
}

/// Coefficients `B_j` with `u = p_j + B_j φ_j` in the representation after
/// each record, given the coefficient `last` for the final one, and the
/// coefficient for the initial representation.
fn coefficients(records: &[Record], last: f64) -> (Vec<f64>, f64) {
    let mut b = vec![0.0; records.len()];
    let mut c = last;
    for (j, r) in records.iter().enumerate().rev() {
        b[j] = c;
        // p_j = p_{j-1} - shift φ_j and φ_j = φ_{j-1} / norm
        c = (c - r.shift) / r.norm;
    }
    (b, c)
}

fn value_at(records: &[Record], coef: &[f64], s: f64) -> f64 {
    let j = records
        .iter()
        .rposition(|r| (r.s - s).abs() <= 1e-15)
        .expect("probe is a stop");
    records[j].y[2] + coef[j] * records[j].y[0]
}

/// Start of the homogeneous solution vanishing at the endpoint and its slope
/// there, for the potential piece `spec` in the distance variable.
struct Start {
    offset: f64,
    state: Vector4<f64>,
    slope_at_boundary: f64,
    particular_slope: f64,
}

/// Start at the boundary itself. The particular solution gets the slope
/// `f / √V` of the bounded solution of `-p'' + V p = f` so that it does not
/// pick up the growing mode where `V` is large.
fn regular_start(v0: f64, f0: f64) -> Start {
    let slope = if v0 > 0.0 { f0 / v0.sqrt() } else { 0.0 };
    Start {
        offset: 0.0,
        state: Vector4::new(0.0, 1.0, 0.0, slope),
        slope_at_boundary: 1.0,
        particular_slope: slope,
    }
}

fn singular_start(spec: &PotentialSpec, f0: f64) -> Start {
    let (c, alpha) = match spec {
        PotentialSpec::PowerLaw { coefficient, alpha } if *coefficient > 0.0 && *alpha > 0.0 => {
            (*coefficient, *alpha)
        }
        _ => return regular_start(0.0, 0.0),
    };
    if alpha < 2.0 {
        // φ = x Σ c_n x^(n s), s = 2 - alpha, c_0 = 1
        let d = FROBENIUS_OFFSET;
        let s = 2.0 - alpha;
        let (mut coef, mut value, mut slope) = (1.0, 1.0, 1.0);
        for n in 1..200 {
            let ns = n as f64 * s;
            coef *= c / ((1.0 + ns) * ns);
            let term = coef * d.powf(ns);
            value += term;
            slope += term * (1.0 + ns);
            if term.abs() < 1e-18 * value {
                break;
            }
        }
        Start {
            offset: d,
            state: Vector4::new(d * value, slope, 0.0, 0.0),
            slope_at_boundary: 1.0,
            particular_slope: 0.0,
        }
    } else if alpha == 2.0 {
        let d = FROBENIUS_OFFSET;
        let beta = 0.5 * (1.0 + (1.0 + 4.0 * c).sqrt());
        Start {
            offset: d,
            state: Vector4::new(1.0, beta / d, 0.0, 0.0),
            slope_at_boundary: 0.0,
            particular_slope: 0.0,
        }
    } else {
        // WKB: φ ≈ V^(-1/4) exp(-(2 √C / (alpha - 2)) x^(-(alpha - 2) / 2))
        let gamma = 0.5 * (alpha - 2.0);
        let d = (WKB_EXPONENT * gamma / c.sqrt()).powf(-1.0 / gamma);
        let slope = c.sqrt() * d.powf(-0.5 * alpha) + 0.25 * alpha / d;
        // the particular solution is quasi-static there: p ≈ f / V
        let p = f0 * d.powf(alpha) / c;
        Start {
            offset: d,
            state: Vector4::new(1.0, slope, p, alpha * p / d),
            slope_at_boundary: 0.0,
            particular_slope: 0.0,
        }
    }
}

fn endpoint_start(spec: &PotentialSpec, truncated: bool, v0: f64, f0: f64) -> Start {
    if truncated || spec.is_bounded() {
        regular_start(v0, f0)
    } else {
        singular_start(spec, f0)
    }
}

/// Integration stops in `(lo, hi]`: probes, discontinuities of tabulated data
/// and kinks of the truncation. `map` takes a coordinate to the integration
/// variable, `from_distance` a distance from the boundary.
fn breakpoints(
    problem: &OracleProblem,
    lo: f64,
    hi: f64,
    extra: &[f64],
    map: impl Fn(f64) -> f64,
    from_distance: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let mut pts: Vec<f64> = extra.to_vec();
    let mut push_edges = |n: usize| pts.extend((1..n).map(|i| i as f64 / n as f64));
    if let PotentialSpec::Tabulated { values } = &problem.potential {
        push_edges(values.len());
    }
    match &problem.source {
        SourceSpec::Table(v) => push_edges(v.len()),
        SourceSpec::Indicator { left, right } => pts.extend([*left, *right]),
        _ => {}
    }
    let mut pts: Vec<f64> = pts.into_iter().map(&map).collect();
    if let Some(k) = problem.cutoff {
        pts.extend(kinks(&problem.potential, k).into_iter().map(&from_distance));
    }
    pts.push(hi);
    pts.retain(|s| *s > lo && *s <= hi);
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    pts.dedup();
    pts
}

/// Distances from the boundary where `min(V, k)` has a kink.
fn kinks(spec: &PotentialSpec, k: f64) -> Vec<f64> {
    match spec {
        PotentialSpec::PowerLaw { .. } => vec![spec.saturation_distance(k)],
        PotentialSpec::Sided { left, right } => {
            let mut v = kinks(left, k);
            v.extend(kinks(right, k));
            v
        }
        _ => Vec::new(),
    }
}

fn validate(problem: &OracleProblem) -> Result<()> {
    if !(problem.rtol >= 1e-12) {
        return Err(Error::Precondition(format!(
            "oracle tolerance {} is below 1e-12",
            problem.rtol
        )));
    }
    problem.potential.validate()?;
    if let Some(k) = problem.cutoff {
        if !(k > 0.0) {
            return Err(Error::Config(format!("cutoff k = {k} must be positive")));
        }
    }
    Ok(())
}

/// Solves the problem and samples `u` at `probes` (coordinates in `[0, 1]`).
pub fn ode_solve(problem: &OracleProblem, probes: &[f64]) -> Result<OracleSolution> {
    validate(problem)?;
    if probes.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain("oracle probes must lie in [0, 1]".into()));
    }
    match problem.geometry {
        OracleGeometry::Interval => solve_interval(problem, probes),
        OracleGeometry::RadialDisk => solve_disk(problem, probes),
    }
}

fn solve_interval(problem: &OracleProblem, probes: &[f64]) -> Result<OracleSolution> {
    let domain = Domain::Interval01;
    let k = problem.cutoff;
    let potential = |x: f64| -> f64 {
        let v = problem
            .potential
            .evaluate(domain, Point::on_line(x))
            .unwrap_or(f64::INFINITY);
        k.map_or(v, |k| v.min(k))
    };
    let source = |x: f64| problem.source.evaluate(domain, Point::on_line(x));
    let mid = 0.5;

    // left half in x, right half in t = 1 - x
    let left_spec = problem.potential.near(domain, Point::on_line(0.25));
    let right_spec = problem.potential.near(domain, Point::on_line(0.75));
    let ls = endpoint_start(left_spec, k.is_some(), potential(0.0), source(0.0));
    let rs = endpoint_start(right_spec, k.is_some(), potential(1.0), source(1.0));

    let left_probes: Vec<f64> = probes.iter().copied().filter(|x| *x <= mid).collect();
    let right_probes: Vec<f64> = probes.iter().copied().filter(|x| *x >= mid).collect();

    let left_stops = breakpoints(problem, ls.offset, mid, &left_probes, |x| x, |d| d);
    let vl = |x: f64| potential(x);
    let fl = |x: f64| source(x);
    let variable = |st: &Start| if st.offset > 0.0 { Variable::LogInterval } else { Variable::Linear };
    let left = march(
        &Shooting {
            potential: &vl,
            source: &fl,
            variable: variable(&ls),
        },
        ls.offset,
        ls.state,
        &left_stops,
        problem.rtol,
    )?;
    let right_stops = breakpoints(problem, rs.offset, mid, &right_probes, |x| 1.0 - x, |d| d);
    let vr = |t: f64| potential(1.0 - t);
    let fr = |t: f64| source(1.0 - t);
    let right = march(
        &Shooting {
            potential: &vr,
            source: &fr,
            variable: variable(&rs),
        },
        rs.offset,
        rs.state,
        &right_stops,
        problem.rtol,
    )?;
    let yl = left.last().expect("midpoint").y;
    let yr = right.last().expect("midpoint").y;
    // A φ(m) - B ψ(m) = q(m) - p(m);  A φ'(m) + B ψ'(m) = -q'(m) - p'(m)
    let det = yl[0] * yr[1] + yr[0] * yl[1];
    if !(det.abs() > 0.0) || !det.is_finite() {
        return Err(Error::Oracle("singular matching system".into()));
    }
    let r1 = yr[2] - yl[2];
    let r2 = -yr[3] - yl[3];
    let a = (r1 * yr[1] + yr[0] * r2) / det;
    let b = (yl[0] * r2 - yl[1] * r1) / det;
    let (ca, a0) = coefficients(&left, a);
    let (cb, b0) = coefficients(&right, b);

    let values = probes
        .iter()
        .map(|&x| {
            let u = if x == 0.0 || x == 1.0 {
                0.0
            } else if x <= mid {
                if x < ls.offset {
                    0.0
                } else {
                    value_at(&left, &ca, x)
                }
            } else if 1.0 - x < rs.offset {
                0.0
            } else {
                value_at(&right, &cb, 1.0 - x)
            };
            (x, u)
        })
        .collect();
    Ok(OracleSolution {
        probes: values,
        flux: vec![
            a0 * ls.slope_at_boundary + ls.particular_slope,
            b0 * rs.slope_at_boundary + rs.particular_slope,
        ],
    })
}

fn solve_disk(problem: &OracleProblem, probes: &[f64]) -> Result<OracleSolution> {
    let domain = Domain::UnitDisk;
    if !problem.potential.radial() {
        return Err(Error::Config("the disk oracle needs a radial potential".into()));
    }
    if !problem.source.is_radial(domain) {
        return Err(Error::Config("the disk oracle needs a radial source".into()));
    }
    if problem.cutoff.is_none() && !problem.potential.is_bounded() {
        return Err(Error::Oracle(
            "the disk oracle needs a truncated or bounded potential".into(),
        ));
    }
    let k = problem.cutoff;
    let potential = |r: f64| -> f64 {
        let v = problem
            .potential
            .evaluate(domain, Point::polar(r.min(1.0), 0.0))
            .unwrap_or(f64::INFINITY);
        k.map_or(v, |k| v.min(k))
    };
    let source = |r: f64| problem.source.evaluate(domain, Point::polar(r, 0.0));
    let r0 = FROBENIUS_OFFSET;
    let v0 = potential(0.0);
    let f0 = source(0.0);
    // regular series at the centre: ψ = 1 + V r²/4, q = -f r²/4
    let y0 = Vector4::new(1.0 + 0.25 * v0 * r0 * r0, 0.5 * v0 * r0, -0.25 * f0 * r0 * r0, -0.5 * f0 * r0);
    let radii = breakpoints(problem, r0, 1.0, probes, |r| r, |d| 1.0 - d);
    let states = march(
        &Shooting {
            potential: &potential,
            source: &source,
            variable: Variable::LogRadial,
        },
        r0,
        y0,
        &radii,
        problem.rtol,
    )?;
    let end = states.last().expect("boundary").y;
    if !(end[0].abs() > 0.0) {
        return Err(Error::Oracle("homogeneous solution vanishes on the circle".into()));
    }
    let a = -end[2] / end[0];
    let (coef, a0) = coefficients(&states, a);
    let values = probes
        .iter()
        .map(|&r| {
            if r <= r0 {
                return (r, y0[2] + a0 * y0[0]);
            }
            (r, value_at(&states, &coef, r))
        })
        .collect();
    Ok(OracleSolution {
        probes: values,
        flux: vec![-(end[3] + a * end[1])],
    })
}

/// Flux sequence of the truncated problems along a ladder and its extrapolated limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleLimit {
    pub cutoffs: Vec<f64>,
    pub fluxes: Vec<f64>,
    pub limit: LadderLimit,
}

/// Extrapolated limit of the truncated fluxes at boundary entry `end` of
/// [`OracleSolution::flux`].
pub fn truncation_limit_reference(problem: &OracleProblem, ladder: &TruncationLadder, end: usize) -> Result<OracleLimit> {
    let mut fluxes = Vec::with_capacity(ladder.levels().len());
    for &k in ladder.levels() {
        let p = OracleProblem {
            cutoff: Some(k),
            ..problem.clone()
        };
        let sol = ode_solve(&p, &[])?;
        let g = *sol
            .flux
            .get(end)
            .ok_or_else(|| Error::Config(format!("no boundary entry {end}")))?;
        fluxes.push(g);
    }
    let monotone = source_nonnegative(&problem.source);
    let limit = ladder_limit(&fluxes, monotone, ladder.tau_stop());
    Ok(OracleLimit {
        cutoffs: ladder.levels().to_vec(),
        fluxes,
        limit,
    })
}

fn source_nonnegative(s: &SourceSpec) -> bool {
    match s {
        SourceSpec::Table(v) => v.iter().all(|x| *x >= 0.0),
        SourceSpec::Scaled(c, inner) => *c >= 0.0 && source_nonnegative(inner),
        _ => true,
    }
}
