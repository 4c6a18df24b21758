//! Dirac boundary data: duality solutions `P_a`, the defect `α̂` lost in the
//! limit, the exceptional set `Σ`, and boundary problems with measure data.

use serde::{Deserialize, Serialize};

use crate::boundary::{is_zero, resolved_distance, zero_threshold, RHO_MAX};
use crate::decimal;
use crate::error::{Error, Result};
use crate::extrapolate::{cut_limit, ladder_limit, ladder_limit_field, CutLimit, LadderLimit};
use crate::geometry::{distance_to_boundary, BoundaryPoint, Domain, Grid};
use crate::potential::{PotentialSpec, TruncationLadder};
use crate::quadrature::{cut_integral, halving};
use crate::solver::{solve_with_boundary_data, torsion_function, SolveResult};
use crate::source::SourceField;

/// Smallest cut-off of the Ancona integral; partial sums beyond `1/tol` are divergent.
const ANCONA_RHO_MIN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Endpoint (interval) or angle (disk).
    #[serde(deserialize_with = "decimal::number")]
    pub at: f64,
    #[serde(deserialize_with = "decimal::number")]
    pub mass: f64,
}

/// A finite boundary measure: atoms plus a piecewise-constant density in the
/// angle (disk only), on uniform cells of `[0, 2π)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeasure {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default, deserialize_with = "decimal::optional_numbers")]
    pub density: Option<Vec<f64>>,
}

impl BoundaryMeasure {
    pub fn dirac(at: f64, mass: f64) -> Self {
        BoundaryMeasure {
            atoms: vec![Atom { at, mass }],
            density: None,
        }
    }

    pub fn validate(&self, domain: Domain) -> Result<()> {
        for atom in &self.atoms {
            if !(atom.mass >= 0.0) || !atom.mass.is_finite() {
                return Err(Error::Config(format!("atom mass {} must be finite and >= 0", atom.mass)));
            }
            BoundaryPoint::new(domain, atom.at)?;
        }
        if let Some(d) = &self.density {
            if domain == Domain::Interval01 {
                return Err(Error::Config("a boundary density needs the disk".into()));
            }
            if d.is_empty() || d.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Config("density samples must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn density_at(&self, phi: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |d| {
            let s = phi.rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
            d[((s * d.len() as f64) as usize).min(d.len() - 1)]
        })
    }

    /// `‖ν‖ = Σ masses + ∫ density dσ`.
    pub fn total_mass(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let density = self.density.as_ref().map_or(0.0, |d| {
            d.iter().sum::<f64>() * std::f64::consts::TAU / d.len() as f64
        });
        atoms + density
    }
}

/// `-Δv + V_k v = 0` with data `1/w` at the boundary node nearest `a`
/// (weight `w`) and zero elsewhere.
pub fn solve_dirac_bvp_truncated(grid: &Grid, v: &PotentialSpec, k: f64, a: &BoundaryPoint, tol: f64) -> Result<SolveResult> {
    let slot = grid.nearest_boundary_slot(a)?;
    let mut g = vec![0.0; grid.boundary_len()];
    g[slot] = 1.0 / grid.boundary_weights()[slot];
    solve_with_boundary_data(grid, v, k, &g, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaVerdict {
    InSigma,
    NotInSigma,
    Uncertain,
}

impl SigmaVerdict {
    pub fn name(self) -> &'static str {
        match self {
            SigmaVerdict::InSigma => "in_Sigma",
            SigmaVerdict::NotInSigma => "not_in_Sigma",
            SigmaVerdict::Uncertain => "uncertain",
        }
    }
}

/// `P_a` as the monotone limit of the truncated Dirac solutions.
#[derive(Debug, Clone, Serialize)]
pub struct DualitySolution {
    #[serde(skip)]
    pub a: BoundaryPoint,
    pub slot: usize,
    pub cutoffs: Vec<f64>,
    /// `∫ v_k` per level.
    pub masses: Vec<f64>,
    pub mass: LadderLimit,
    #[serde(skip)]
    pub levels: Vec<SolveResult>,
    /// Nodewise limit of the levels.
    #[serde(skip)]
    pub field: Vec<f64>,
    pub verdict: SigmaVerdict,
    pub warnings: Vec<String>,
    #[serde(skip)]
    tau: f64,
}

impl DualitySolution {
    pub fn grid(&self) -> &Grid {
        self.levels[0].grid()
    }

    /// Ladder limit of `∫ v_k f`, with the boundary data paired against the
    /// one-sided limits of `f` so that each level reproduces the discrete flux.
    pub fn pairing(&self, f: &SourceField) -> LadderLimit {
        let grid = self.grid();
        let seq: Vec<f64> = self
            .levels
            .iter()
            .map(|l| {
                let vf: Vec<f64> = l.u.iter().zip(f.values()).map(|(a, b)| a * b).collect();
                let bf: Vec<f64> = l.boundary.iter().zip(f.boundary_values()).map(|(a, b)| a * b).collect();
                grid.integrate(&vf, Some(&bf))
            })
            .collect();
        ladder_limit(&seq, f.is_nonnegative(), self.tau)
    }

    /// Boundary data of the levels.
    pub fn boundary(&self) -> &[f64] {
        &self.levels[0].boundary
    }
}

pub fn duality_solution(grid: &Grid, v: &PotentialSpec, ladder: &TruncationLadder, a: &BoundaryPoint, tol: f64) -> Result<DualitySolution> {
    let slot = grid.nearest_boundary_slot(a)?;
    let tau = ladder.tau_stop();
    let mut levels: Vec<SolveResult> = Vec::new();
    let mut masses = Vec::new();
    let mut small_run = 0;
    for &k in ladder.levels() {
        // min(V, k) no longer changes once k exceeds sup V
        let saturated = |c: Option<f64>| v.sup().zip(c).is_some_and(|(s, c)| s <= c);
        let level = match levels.last() {
            Some(prev) if saturated(prev.cutoff) => prev.relabelled(k),
            _ => solve_dirac_bvp_truncated(grid, v, k, a, tol)?,
        };
        let mass = level.integral();
        if let Some(prev) = masses.last() {
            let inc: f64 = prev - mass;
            let small = inc.abs() <= tau * mass.abs();
            small_run = if small { small_run + 1 } else { 0 };
        }
        masses.push(mass);
        levels.push(level);
        if small_run >= 2 {
            break;
        }
    }
    let fields: Vec<&[f64]> = levels.iter().map(|l| l.u.as_slice()).collect();
    let field = ladder_limit_field(&fields, true, tau);
    let mass = ladder_limit(&masses, true, tau);
    let mut warnings = Vec::new();
    let scale = masses[0].abs();
    if masses.windows(2).any(|w| w[1] > w[0] + 1e-9 * scale) {
        warnings.push("per-level masses increase along the ladder".to_string());
    }
    let verdict = sigma_verdict(&mass, tol, &mut warnings);
    Ok(DualitySolution {
        a: *a,
        slot,
        cutoffs: ladder.levels()[..levels.len()].to_vec(),
        masses,
        mass,
        levels,
        field,
        verdict,
        warnings,
        tau,
    })
}

/// `in_Sigma` needs a mass below the zero threshold that is still
/// decreasing; a small mass that has stopped decreasing is kept out of `Σ`.
fn sigma_verdict(mass: &LadderLimit, tol: f64, warnings: &mut Vec<String>) -> SigmaVerdict {
    let threshold = zero_threshold(tol, 1.0);
    if is_zero(mass, tol, 1.0) {
        SigmaVerdict::InSigma
    } else if mass.value < threshold {
        warnings.push(format!("mass {:e} is small but no longer decreasing", mass.value));
        SigmaVerdict::NotInSigma
    } else if mass.still_decreasing && mass.value - mass.error <= threshold {
        SigmaVerdict::Uncertain
    } else {
        SigmaVerdict::NotInSigma
    }
}

/// `α̂ = 1 - ∫ P_a (1 + V θ) / ∂θ/∂n(a)`, the fraction of the Dirac mass lost
/// in the limit. For each cut-off `ρ` the integral over `{ d ≥ ρ }` is
/// extrapolated along the last three levels, which all see the untruncated
/// `V` there; the result is then extrapolated in `ρ`.
pub fn defect_mass(p: &DualitySolution, theta: &SolveResult, v: &PotentialSpec) -> Result<Defect> {
    let grid = p.grid();
    let theta_n = theta.flux(p.slot);
    if !(theta_n > 0.0) {
        return Err(Error::Internal(format!("torsion flux {theta_n} is not positive")));
    }
    let used = &p.levels[p.levels.len().saturating_sub(3)..];
    let k = used[0].cutoff.unwrap_or(f64::INFINITY);
    let rho_min = resolved_distance(grid, v, &p.a, k).max(2.0 * grid.boundary_gap());
    if rho_min >= RHO_MAX {
        return Err(Error::Precondition("the grid does not resolve any interior region".into()));
    }
    let rhos = halving(RHO_MAX, rho_min);
    let domain = grid.domain();
    let partial: Vec<Vec<f64>> = used
        .iter()
        .map(|level| {
            cut_integral(grid, Some(&p.a), &rhos, f64::INFINITY, |y| {
                let pa = grid.interpolate(&level.u, Some(&level.boundary), y).unwrap_or(0.0);
                if pa == 0.0 {
                    return 0.0;
                }
                let th = grid.interpolate(&theta.u, None, y).unwrap_or(0.0);
                pa * (1.0 + v.evaluate(domain, y).unwrap_or(f64::INFINITY) * th)
            })
            .partial
        })
        .collect();
    let limits: Vec<f64> = (0..rhos.len())
        .map(|i| {
            let seq: Vec<f64> = partial.iter().map(|s| s[i]).collect();
            ladder_limit(&seq, true, p.tau).value
        })
        .collect();
    let mut integral = cut_limit(&limits, 1e10);
    if integral.diverged {
        // bounded by ∂θ/∂n(a) at every level, so growth is unresolved truncation residue
        let n = limits.len();
        integral = CutLimit {
            value: limits[n - 1].clamp(0.0, theta_n),
            error: if n > 1 { (limits[n - 1] - limits[n - 2]).abs() } else { f64::INFINITY },
            diverged: false,
        };
    }
    Ok(Defect {
        alpha: 1.0 - integral.value / theta_n,
        integral,
        theta_flux: theta_n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Defect {
    pub alpha: f64,
    pub integral: CutLimit,
    pub theta_flux: f64,
}

/// `∫ d(y)² |y - a|^(-N) V(y) dy` or a divergence flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnconaValue {
    pub value: f64,
    pub error: f64,
    pub infinite: bool,
}

pub fn ancona_integral(domain: Domain, v: &PotentialSpec, a: &BoundaryPoint, tol: f64) -> Result<AnconaValue> {
    v.validate()?;
    if a.domain() != domain {
        return Err(Error::Domain("boundary point belongs to another domain".into()));
    }
    if v.is_zero() {
        return Ok(AnconaValue {
            value: 0.0,
            error: 0.0,
            infinite: false,
        });
    }
    // the grid only fixes panel breaks
    let layout = match domain {
        Domain::Interval01 => Grid::interval(64)?,
        Domain::UnitDisk => Grid::disk(32, 64)?,
    };
    let n = domain.dimension() as i32;
    let rhos = halving(RHO_MAX, ANCONA_RHO_MIN);
    let pos = a.position();
    let c = cut_integral(&layout, Some(a), &rhos, 1.0 / tol, |y| {
        let d = distance_to_boundary(domain, y).unwrap_or(0.0);
        let r = y.dist(pos);
        d * d / r.powi(n) * v.evaluate(domain, y).unwrap_or(f64::INFINITY)
    });
    Ok(AnconaValue {
        value: c.limit.value,
        error: c.limit.error,
        infinite: c.limit.diverged,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaReport {
    pub a: f64,
    pub ancona: AnconaValue,
    pub masses: Vec<f64>,
    pub mass: LadderLimit,
    pub alpha_hat: f64,
    pub verdict: SigmaVerdict,
    /// The potential certifies `V <= C/d²`, so the Ancona criterion decides `Σ`.
    pub authoritative: bool,
    /// The Ancona finiteness agrees with the mass test.
    pub consistent: bool,
    pub warnings: Vec<String>,
}

impl SigmaReport {
    pub const CSV_HEADER: &'static str = "a,ancona_value_or_inf,pa_mass_final,alpha_hat,verdict,consistent";

    pub fn csv_row(&self) -> String {
        use crate::boundary::fmt17;
        let ancona = if self.ancona.infinite {
            "inf".to_string()
        } else {
            fmt17(self.ancona.value)
        };
        format!(
            "{},{},{},{},{},{}",
            fmt17(self.a),
            ancona,
            fmt17(*self.masses.last().expect("non-empty")),
            fmt17(self.alpha_hat),
            self.verdict.name(),
            self.consistent
        )
    }
}

pub fn classify_sigma(grid: &Grid, v: &PotentialSpec, ladder: &TruncationLadder, a: &BoundaryPoint, tol: f64) -> Result<SigmaReport> {
    let p = duality_solution(grid, v, ladder, a, tol)?;
    let theta = torsion_function(grid, tol)?;
    let defect = defect_mass(&p, &theta, v)?;
    let ancona = ancona_integral(grid.domain(), v, a, tol.max(1e-12))?;
    let in_sigma = p.verdict == SigmaVerdict::InSigma;
    let authoritative = v.certifies_quadratic_bound();
    let consistent = p.verdict != SigmaVerdict::Uncertain && in_sigma == ancona.infinite;
    let mut warnings = p.warnings.clone();
    if !authoritative && !consistent {
        warnings.push("the Ancona criterion is informational for this potential".into());
    }
    Ok(SigmaReport {
        a: a.coord(),
        ancona,
        masses: p.masses.clone(),
        mass: p.mass,
        alpha_hat: defect.alpha,
        verdict: p.verdict,
        authoritative,
        consistent,
        warnings,
    })
}

/// Per-atom data of a measure problem.
#[derive(Debug, Clone, Serialize)]
pub struct AtomReport {
    pub at: f64,
    pub mass: f64,
    pub alpha_hat: f64,
    pub pa_mass: f64,
    pub verdict: SigmaVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureSolution {
    #[serde(skip)]
    pub field: Vec<f64>,
    pub atoms: Vec<AtomReport>,
    /// `λ̂`.
    pub defect: BoundaryMeasure,
    pub defect_mass: f64,
    pub total_mass: f64,
    pub has_solution: bool,
}

/// Whether `V` is bounded or grows like `d^(-alpha)` with `alpha < 2` on every piece.
fn strictly_subquadratic(v: &PotentialSpec) -> bool {
    match v {
        PotentialSpec::PowerLaw { alpha, .. } => *alpha < 2.0 || v.is_bounded(),
        PotentialSpec::Sided { left, right } => strictly_subquadratic(left) && strictly_subquadratic(right),
        _ => true,
    }
}

/// Solves `-Δv + V v = 0`, `v = ν` by linearity over the atoms of `ν`, and
/// collects the defect `λ̂ = Σ mass_i α̂_i δ_{a_i}`.
pub fn measure_bvp(grid: &Grid, v: &PotentialSpec, ladder: &TruncationLadder, nu: &BoundaryMeasure, tol: f64) -> Result<MeasureSolution> {
    let domain = grid.domain();
    nu.validate(domain)?;
    let theta = torsion_function(grid, tol)?;
    let mut field = vec![0.0; grid.len()];
    let mut atoms = Vec::new();
    let mut defect = BoundaryMeasure::default();
    let add_atom = |at: f64, mass: f64, field: &mut [f64]| -> Result<AtomReport> {
        let a = BoundaryPoint::new(domain, at)?;
        let p = duality_solution(grid, v, ladder, &a, tol)?;
        let d = defect_mass(&p, &theta, v)?;
        for (u, pa) in field.iter_mut().zip(&p.field) {
            *u += mass * pa;
        }
        Ok(AtomReport {
            at,
            mass,
            alpha_hat: d.alpha,
            pa_mass: p.mass.value,
            verdict: p.verdict,
        })
    };
    for atom in &nu.atoms {
        if atom.mass == 0.0 {
            continue;
        }
        let r = add_atom(atom.at, atom.mass, &mut field)?;
        defect.atoms.push(Atom {
            at: atom.at,
            mass: atom.mass * r.alpha_hat.max(0.0),
        });
        atoms.push(r);
    }
    if nu.density.is_some() {
        let points = grid.boundary_points();
        let weights = grid.boundary_weights();
        let g: Vec<f64> = points.iter().map(|a| nu.density_at(a.coord())).collect();
        let last = solve_density(grid, v, ladder, &g, tol)?;
        for (u, w) in field.iter_mut().zip(&last) {
            *u += w;
        }
        if !strictly_subquadratic(v) {
            // atomize onto the boundary nodes
            for ((a, w), gi) in points.iter().zip(&weights).zip(&g) {
                if *gi == 0.0 {
                    continue;
                }
                let a = BoundaryPoint::new(domain, a.coord())?;
                let p = duality_solution(grid, v, ladder, &a, tol)?;
                let d = defect_mass(&p, &theta, v)?;
                let lost = gi * w * d.alpha.max(0.0);
                if lost > 0.0 {
                    defect.atoms.push(Atom { at: a.coord(), mass: lost });
                }
            }
        }
    }
    let total_mass = nu.total_mass();
    let defect_mass = defect.total_mass();
    Ok(MeasureSolution {
        field,
        atoms,
        has_solution: defect_mass <= zero_threshold(tol, total_mass),
        defect,
        defect_mass,
        total_mass,
    })
}

fn solve_density(grid: &Grid, v: &PotentialSpec, ladder: &TruncationLadder, g: &[f64], tol: f64) -> Result<Vec<f64>> {
    let levels = ladder
        .levels()
        .iter()
        .map(|&k| solve_with_boundary_data(grid, v, k, g, tol))
        .collect::<Result<Vec<_>>>()?;
    let fields: Vec<&[f64]> = levels.iter().map(|l| l.u.as_slice()).collect();
    Ok(ladder_limit_field(&fields, true, ladder.tau_stop()))
}

/// `max |∫ P_a f - g(a)|` over the suite, with `g(a)` from reports on the
/// same grid and ladder.
pub fn duality_identity_check(p: &DualitySolution, suite: &[SourceField], g: &[f64]) -> Result<f64> {
    if suite.len() != g.len() {
        return Err(Error::Config("one g(a) per source is required".into()));
    }
    Ok(suite
        .iter()
        .zip(g)
        .map(|(f, g)| (p.pairing(f).value - g).abs())
        .fold(0.0, f64::max))
}

/// `∫ |v| + ∫ V_k |v| d` against `C ‖ν‖` with `C = max ∂θ/∂n / min(1, C₁)`
/// and `C₁ = min θ/d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AprioriBound {
    pub lhs: f64,
    pub constant: f64,
    pub data_mass: f64,
}

impl AprioriBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.constant * self.data_mass * (1.0 + 1e-9)
    }
}

pub fn apriori_l1(level: &SolveResult, theta: &SolveResult) -> Result<AprioriBound> {
    let grid = level.grid();
    let domain = grid.domain();
    let d: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|p| distance_to_boundary(domain, *p))
        .collect::<Result<_>>()?;
    let c1 = theta.u.iter().zip(&d).map(|(t, d)| t / d).fold(f64::INFINITY, f64::min);
    let theta_n = (0..grid.boundary_len()).map(|s| theta.flux(s)).fold(0.0, f64::max);
    let abs: Vec<f64> = level.u.iter().map(|v| v.abs()).collect();
    let weighted: Vec<f64> = abs
        .iter()
        .zip(&level.potential_samples)
        .zip(&d)
        .map(|((u, v), d)| u * v * d)
        .collect();
    let data_mass: f64 = level
        .boundary
        .iter()
        .zip(grid.boundary_weights())
        .map(|(g, w)| g.abs() * w)
        .sum();
    Ok(AprioriBound {
        lhs: grid.integrate(&abs, None) + grid.integrate(&weighted, None),
        constant: theta_n / c1.min(1.0),
        data_mass,
    })
}
