//! Normal derivatives at boundary points: the classical quotient
//! `û(a + εn)/ε`, the pointwise limit of the truncated fluxes, and the
//! Poisson-integral value `∫ K(a, y) (f - V û)(y) dy`.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extrapolate::{ladder_limit, step_limit, Extrapolation, LadderLimit};
use crate::geometry::{BoundaryPoint, Domain, Grid, Point};
use crate::potential::{PotentialSpec, TruncationLadder};
use crate::quadrature::{cut_integral, halving};
use crate::solver::{solve_limit, LimitSolution};
use crate::source::{SourceField, SourceSpec};

/// Largest cut-off of the shrinking-region integrals.
pub const RHO_MAX: f64 = 0.25;
/// Partial sums beyond this are reported as divergent.
const BLOWUP: f64 = 1e10;

/// Green function of `-Δ` with zero Dirichlet data.
pub fn green_kernel(domain: Domain, x: Point, y: Point) -> Result<f64> {
    if x == y {
        return Err(Error::CoincidentPoints);
    }
    match domain {
        Domain::Interval01 => {
            for p in [x, y] {
                if !(p.x > 0.0 && p.x < 1.0) {
                    return Err(Error::Domain(format!("{} is not interior", p.x)));
                }
            }
            Ok(x.x.min(y.x) * (1.0 - x.x.max(y.x)))
        }
        Domain::UnitDisk => {
            if x.norm() >= 1.0 || y.norm() >= 1.0 {
                return Err(Error::Domain("kernel points must lie in the open disk".into()));
            }
            let (x, y) = if y.norm() == 0.0 { (y, x) } else { (x, y) };
            let ry = y.norm();
            if ry == 0.0 {
                return Ok(-x.norm().ln() / TAU);
            }
            // |x - y*| |y| = | |y| x - y/|y| |
            let reflected = Point::new(ry * x.x - y.x / ry, ry * x.y - y.y / ry).norm();
            Ok((reflected / x.dist(y)).ln() / TAU)
        }
    }
}

/// Poisson kernel `K(a, y)`, the inward normal derivative of `G(·, y)` at `a`.
pub fn poisson_kernel(a: &BoundaryPoint, y: Point) -> f64 {
    match a.domain() {
        Domain::Interval01 => {
            if a.coord() == 0.0 {
                1.0 - y.x
            } else {
                y.x
            }
        }
        Domain::UnitDisk => {
            let d = y.dist(a.position());
            (1.0 - y.norm().powi(2)) / (TAU * d * d)
        }
    }
}

/// Samples `(ε, û(a + εn)/ε)` and their limit as `ε -> 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quotient {
    pub samples: Vec<(f64, f64)>,
    pub limit: Extrapolation,
}

/// `ε = 16, 8, 4, 2` radial spacings.
pub fn default_eps(grid: &Grid) -> Vec<f64> {
    [16.0, 8.0, 4.0, 2.0].iter().map(|c| c * grid.spacing()).collect()
}

pub fn classical_quotient(u: &LimitSolution, a: &BoundaryPoint, eps: &[f64]) -> Result<Quotient> {
    let grid = u.grid();
    if a.domain() != grid.domain() {
        return Err(Error::Domain("boundary point belongs to another domain".into()));
    }
    if eps.len() < 2 || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("ε list must have two or more decreasing entries".into()));
    }
    let smallest = *eps.last().expect("non-empty");
    if smallest < 2.0 * grid.spacing() * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "ε = {smallest} is below twice the grid spacing {}",
            grid.spacing()
        )));
    }
    if eps[0] >= 0.5 {
        return Err(Error::Precondition("ε must stay below 1/2".into()));
    }
    let field = u.extrapolated();
    let samples = eps
        .iter()
        .map(|&e| Ok((e, grid.interpolate(&field, None, a.step_inward(e))? / e)))
        .collect::<Result<Vec<_>>>()?;
    let (e, q): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
    Ok(Quotient {
        samples,
        limit: step_limit(&e, &q),
    })
}

/// The truncated fluxes `∂u_k/∂n(a)` and their limit `g(a)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseDerivative {
    pub cutoffs: Vec<f64>,
    pub fluxes: Vec<f64>,
    pub limit: LadderLimit,
    pub warning: Option<String>,
}

pub fn pointwise_normal_derivative(u: &LimitSolution, a: &BoundaryPoint) -> Result<PointwiseDerivative> {
    if u.levels.len() < 2 {
        return Err(Error::Precondition("the ladder limit needs at least two levels".into()));
    }
    let slot = u.grid().nearest_boundary_slot(a)?;
    let fluxes = u.fluxes(slot);
    let scale = fluxes.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let rises = fluxes.windows(2).any(|w| w[1] > w[0] + 1e-9 * scale + 1e-14);
    let warning = (u.monotone && rises)
        .then(|| "truncated fluxes increase along the ladder; the grid is probably too coarse".to_string());
    Ok(PointwiseDerivative {
        cutoffs: u.cutoffs(),
        limit: ladder_limit(&fluxes, u.monotone, u.ladder.tau_stop()),
        fluxes,
        warning,
    })
}

/// Smallest cut-off at which the truncated solution at cutoff `k` still
/// represents the untruncated problem near `a`. Only the piece of `V` next to
/// `a` counts: solutions decay into any singular part elsewhere.
pub fn resolved_distance(grid: &Grid, v: &PotentialSpec, a: &BoundaryPoint, k: f64) -> f64 {
    let v = v.near(grid.domain(), a.position());
    let mut rho = 1e-8f64.max(2.0 * v.saturation_distance(k));
    if !v.is_bounded() {
        rho = rho.max(2.0 * grid.boundary_gap());
    }
    rho
}

/// `lim_{ρ -> 0} ∫_{d ≥ ρ} K(a, y) (f - V û)(y) dy`, or a divergence flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonValue {
    pub value: f64,
    pub error: f64,
    pub diverged: bool,
    pub rhos: Vec<f64>,
    pub partial: Vec<f64>,
}

pub fn poisson_integral_value(u: &LimitSolution, f: &SourceField, a: &BoundaryPoint) -> Result<PoissonValue> {
    let grid = u.grid();
    if a.domain() != grid.domain() {
        return Err(Error::Domain("boundary point belongs to another domain".into()));
    }
    let v = &u.last().potential;
    let rho_min = resolved_distance(grid, v, a, u.last().cutoff.unwrap_or(f64::INFINITY));
    if rho_min >= RHO_MAX {
        return Err(Error::Precondition("the grid does not resolve any interior region".into()));
    }
    let rhos = halving(RHO_MAX, rho_min);
    let field = u.extrapolated();
    let domain = grid.domain();
    let c = cut_integral(grid, Some(a), &rhos, BLOWUP, |y| {
        let uh = grid.interpolate(&field, None, y).unwrap_or(0.0);
        let vu = if uh == 0.0 {
            0.0
        } else {
            v.evaluate(domain, y).unwrap_or(f64::INFINITY) * uh
        };
        poisson_kernel(a, y) * (f.evaluate(y) - vu)
    });
    Ok(PoissonValue {
        value: c.limit.value,
        error: c.limit.error,
        diverged: c.limit.diverged,
        rhos: c.rhos,
        partial: c.partial,
    })
}

/// `g` counts as zero when it is below `max(10 tol, 1e-3 ‖f‖∞)` and still
/// decreasing at the last ladder level.
pub fn zero_threshold(tol: f64, f_linf: f64) -> f64 {
    (10.0 * tol).max(1e-3 * f_linf)
}

pub fn is_zero(g: &LadderLimit, tol: f64, f_linf: f64) -> bool {
    g.value < zero_threshold(tol, f_linf) && g.still_decreasing
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalDerivativeReport {
    pub a: f64,
    pub quotient: Quotient,
    pub pointwise: PointwiseDerivative,
    pub poisson: PoissonValue,
    pub classical_exists: bool,
    pub representation_holds: bool,
    pub hopf_positive: bool,
    pub warnings: Vec<String>,
}

impl NormalDerivativeReport {
    pub fn g(&self) -> f64 {
        self.pointwise.limit.value
    }

    pub const CSV_HEADER: &'static str = "a,quotient_limit,quotient_err,g,poisson_value,in_N,hopf_positive";

    pub fn csv_row(&self) -> String {
        let poisson = if self.poisson.diverged {
            "inf".to_string()
        } else {
            fmt17(self.poisson.value)
        };
        format!(
            "{},{},{},{},{},{},{}",
            fmt17(self.a),
            fmt17(self.quotient.limit.value),
            fmt17(self.quotient.limit.error),
            fmt17(self.g()),
            poisson,
            self.classical_exists && self.representation_holds,
            self.hopf_positive
        )
    }
}

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Tolerances of a [`NormalDerivativeReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub eps: Option<Vec<f64>>,
    /// Linear-solver tolerance, entering the zero threshold.
    pub tol: f64,
    /// Agreement required between the quotient and the Poisson value.
    pub agreement: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            eps: None,
            tol: crate::solver::DEFAULT_TOL,
            agreement: 1e-3,
        }
    }
}

pub fn normal_derivative_report(
    u: &LimitSolution,
    f: &SourceField,
    a: &BoundaryPoint,
    options: &ReportOptions,
) -> Result<NormalDerivativeReport> {
    let eps = options.eps.clone().unwrap_or_else(|| default_eps(u.grid()));
    let quotient = classical_quotient(u, a, &eps)?;
    let pointwise = pointwise_normal_derivative(u, a)?;
    let poisson = poisson_integral_value(u, f, a)?;
    let mut warnings: Vec<String> = pointwise.warning.iter().cloned().collect();
    let zero = is_zero(&pointwise.limit, options.tol, f.linf());
    let g = pointwise.limit.value;
    if !zero && g < zero_threshold(options.tol, f.linf()) {
        warnings.push(format!("g = {g:e} is small but no longer decreasing"));
    }
    let classical_exists = quotient.limit.value.is_finite() && quotient.limit.error <= options.agreement;
    let representation_holds = !poisson.diverged
        && poisson.error <= options.agreement
        && (quotient.limit.value - poisson.value).abs() <= options.agreement + quotient.limit.error + poisson.error;
    Ok(NormalDerivativeReport {
        a: a.coord(),
        classical_exists,
        representation_holds,
        hopf_positive: !zero && g > 0.0,
        quotient,
        pointwise,
        poisson,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    InN,
    NotInN,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipEvidence {
    pub verdict: Membership,
    pub quotient: Extrapolation,
    pub poisson: PoissonValue,
    pub gap: f64,
}

/// Decides `a ∈ 𝒩` from the solution with `f ≡ 1`: the quotient limit exists
/// and agrees with the Poisson value within `tol`.
pub fn membership_n(grid: &Grid, v: &PotentialSpec, ladder: &TruncationLadder, a: &BoundaryPoint, tol: f64) -> Result<MembershipEvidence> {
    let one = SourceField::sample(grid, SourceSpec::One);
    let u = solve_limit(grid, v, ladder, &one, crate::solver::DEFAULT_TOL)?;
    let quotient = classical_quotient(&u, a, &default_eps(grid))?.limit;
    let poisson = poisson_integral_value(&u, &one, a)?;
    let gap = (quotient.value - poisson.value).abs();
    let error = quotient.error + poisson.error;
    let verdict = if poisson.diverged || !quotient.value.is_finite() {
        Membership::NotInN
    } else if gap + error <= tol {
        Membership::InN
    } else if gap - error > tol {
        Membership::NotInN
    } else {
        Membership::Uncertain
    };
    Ok(MembershipEvidence {
        verdict,
        quotient,
        poisson,
        gap,
    })
}
