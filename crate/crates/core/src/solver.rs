//! Finite-difference solves of `-Δu + V_k u = f` with Dirichlet data, the
//! monotone limit along a truncation ladder, the torsion function, the
//! majorant and the energy functional.
//!
//! On the interval the unknowns are `u(x_i)` and row `i` of the matrix is the
//! three-point stencil `(2 u_i - u_{i-1} - u_{i+1}) / h^2 + V_i u_i`. On the disk
//! the equations are integrated over polar cells, so every row is multiplied
//! by the cell area and the matrix stays symmetric.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extrapolate::ladder_limit_field;
use crate::geometry::{Domain, Grid, Layout, Point};
use crate::linalg::{pcg, CsrMatrix, PolarModes, Preconditioner, SolveStats, Tridiagonal};
use crate::potential::{PotentialSpec, TruncationLadder};
use crate::source::SourceField;

pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_ITER: usize = 2000;

/// The discrete operator `-Δ_h + diag(V)` on a grid.
pub struct Operator {
    matrix: CsrMatrix,
    precond: Box<dyn Preconditioner + Send + Sync>,
    /// Row scaling: 1 on the interval, the cell area on the disk.
    mass: Vec<f64>,
    /// Coupling of the adjacent node to each boundary ghost node.
    boundary_coupling: Vec<(usize, f64)>,
}

impl Operator {
    pub fn assemble(grid: &Grid, potential: &[f64]) -> Self {
        assert_eq!(potential.len(), grid.len());
        match grid.layout() {
            Layout::Uniform { n, h } => {
                let m = n - 1;
                let c = 1.0 / (h * h);
                let rows = (0..m)
                    .map(|i| {
                        let mut row = Vec::with_capacity(3);
                        if i > 0 {
                            row.push((i - 1, -c));
                        }
                        row.push((i, 2.0 * c + potential[i]));
                        if i + 1 < m {
                            row.push((i + 1, -c));
                        }
                        row
                    })
                    .collect();
                let matrix = CsrMatrix::from_rows(rows);
                let precond = Box::new(Tridiagonal::from_csr(&matrix));
                Operator {
                    matrix,
                    precond,
                    mass: vec![1.0; m],
                    boundary_coupling: vec![(0, c), (m - 1, c)],
                }
            }
            Layout::Polar { nr, nphi, dr, dphi } => {
                let radius = |j: usize| (j as f64 + 0.5) * dr;
                // radial[j] couples ring j to ring j+1; the last entry couples to the circle
                let radial: Vec<f64> = (0..nr)
                    .map(|j| if j + 1 < nr { (j + 1) as f64 * dphi } else { 2.0 * dphi / dr })
                    .collect();
                let angular: Vec<f64> = (0..nr).map(|j| dr / (radius(j) * dphi)).collect();
                let area: Vec<f64> = (0..nr).map(|j| radius(j) * dr * dphi).collect();
                let idx = |j: usize, m: usize| j * nphi + m;
                let mut rows = Vec::with_capacity(nr * nphi);
                let mut mass = Vec::with_capacity(nr * nphi);
                for j in 0..nr {
                    for m in 0..nphi {
                        let i = idx(j, m);
                        let inner = if j > 0 { radial[j - 1] } else { 0.0 };
                        let diag = inner + radial[j] + 2.0 * angular[j] + area[j] * potential[i];
                        let mut row = vec![(i, diag)];
                        if j > 0 {
                            row.push((idx(j - 1, m), -radial[j - 1]));
                        }
                        if j + 1 < nr {
                            row.push((idx(j + 1, m), -radial[j]));
                        }
                        row.push((idx(j, (m + 1) % nphi), -angular[j]));
                        row.push((idx(j, (m + nphi - 1) % nphi), -angular[j]));
                        rows.push(row);
                        mass.push(area[j]);
                    }
                }
                let matrix = CsrMatrix::from_rows(rows);
                let mean_mass: Vec<f64> = (0..nr)
                    .map(|j| {
                        area[j] * potential[j * nphi..(j + 1) * nphi].iter().sum::<f64>() / nphi as f64
                    })
                    .collect();
                let precond = Box::new(PolarModes::new(nr, nphi, &radial, &angular, &mean_mass));
                let boundary_coupling = (0..nphi).map(|m| (idx(nr - 1, m), radial[nr - 1])).collect();
                Operator {
                    matrix,
                    precond,
                    mass,
                    boundary_coupling,
                }
            }
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Right-hand side for interior source `f` and boundary data `g`.
    pub fn rhs(&self, f: &[f64], g: Option<&[f64]>) -> Vec<f64> {
        let mut b: Vec<f64> = f.iter().zip(&self.mass).map(|(f, m)| f * m).collect();
        if let Some(g) = g {
            for ((node, c), gv) in self.boundary_coupling.iter().zip(g) {
                b[*node] += c * gv;
            }
        }
        b
    }

    pub fn solve(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        pcg(&self.matrix, b, self.precond.as_ref(), tol, MAX_ITER)
    }
}

/// One discrete solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    grid: Grid,
    pub potential: PotentialSpec,
    /// `None` for an untruncated bounded potential.
    pub cutoff: Option<f64>,
    pub u: Vec<f64>,
    /// Dirichlet data at the boundary ghost nodes.
    pub boundary: Vec<f64>,
    /// `V_k` at the interior nodes.
    pub potential_samples: Vec<f64>,
    source: Vec<f64>,
    source_boundary: Vec<f64>,
    pub stats: SolveStats,
    /// `∫ V_k |u_k|`.
    pub absorption: f64,
    pub l1: f64,
    pub linf: f64,
}

impl SolveResult {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Inward normal derivative at boundary slot `slot`.
    ///
    /// On the disk this is the boundary face flux of the cell scheme. On the
    /// interval the first difference is corrected by the equation at the
    /// endpoint, `-u'' = f`, which makes it second order.
    pub fn flux(&self, slot: usize) -> f64 {
        let (node, s) = self.grid.adjacent_node(slot);
        let q = (self.u[node] - self.boundary[slot]) / s;
        match self.grid.domain() {
            Domain::Interval01 => q + 0.5 * s * self.source_boundary[slot],
            Domain::UnitDisk => q,
        }
    }

    /// Interpolated value, honouring the Dirichlet data on the boundary.
    pub fn value_at(&self, p: Point) -> Result<f64> {
        self.grid.interpolate(&self.u, Some(&self.boundary), p)
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.u, Some(&self.boundary))
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    /// The same solution filed under another cutoff, for levels where `min(V, k)` did not change.
    pub fn relabelled(&self, k: f64) -> SolveResult {
        SolveResult {
            cutoff: Some(k),
            ..self.clone()
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("solver tolerance {tol} must be positive")));
    }
    Ok(())
}

fn check_field(grid: &Grid, f: &SourceField) -> Result<()> {
    if f.values().len() != grid.len() {
        return Err(Error::Config("source was sampled on a different grid".into()));
    }
    Ok(())
}

fn sample_truncated(grid: &Grid, v: &PotentialSpec, k: f64) -> Result<Vec<f64>> {
    let t = v.truncate(k)?;
    grid.nodes().iter().map(|p| t.evaluate(grid.domain(), *p)).collect()
}

fn sample_untruncated(grid: &Grid, v: &PotentialSpec) -> Result<Vec<f64>> {
    grid.nodes().iter().map(|p| v.evaluate(grid.domain(), *p)).collect()
}

#[allow(clippy::too_many_arguments)]
fn solve_sampled(
    grid: &Grid,
    potential: &PotentialSpec,
    cutoff: Option<f64>,
    vk: Vec<f64>,
    f: &[f64],
    f_boundary: &[f64],
    g: Option<&[f64]>,
    tol: f64,
) -> Result<SolveResult> {
    let op = Operator::assemble(grid, &vk);
    let b = op.rhs(f, g);
    let (u, stats) = op.solve(&b, tol)?;
    let abs: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    let weighted: Vec<f64> = abs.iter().zip(&vk).map(|(u, v)| u * v).collect();
    let boundary = g.map_or_else(|| vec![0.0; grid.boundary_len()], <[f64]>::to_vec);
    let babs: Vec<f64> = boundary.iter().map(|v| v.abs()).collect();
    Ok(SolveResult {
        grid: grid.clone(),
        potential: potential.clone(),
        cutoff,
        absorption: grid.integrate(&weighted, None),
        l1: grid.integrate(&abs, Some(&babs)),
        linf: abs.iter().chain(&babs).fold(0.0, |a, b| a.max(*b)),
        u,
        boundary,
        potential_samples: vk,
        source: f.to_vec(),
        source_boundary: f_boundary.to_vec(),
        stats,
    })
}

/// Solves `-Δu + min(V, k) u = f`, `u = 0` on the boundary.
pub fn solve_truncated(grid: &Grid, v: &PotentialSpec, k: f64, f: &SourceField, tol: f64) -> Result<SolveResult> {
    check_tol(tol)?;
    check_field(grid, f)?;
    v.validate()?;
    let vk = sample_truncated(grid, v, k)?;
    solve_sampled(grid, v, Some(k), vk, f.values(), f.boundary_values(), None, tol)
}

/// Solves with the untruncated potential, which must be bounded.
pub fn solve_untruncated(grid: &Grid, v: &PotentialSpec, f: &SourceField, tol: f64) -> Result<SolveResult> {
    check_tol(tol)?;
    check_field(grid, f)?;
    v.validate()?;
    if !v.is_bounded() {
        return Err(Error::Precondition(
            "an unbounded potential must be truncated before solving".into(),
        ));
    }
    let vk = sample_untruncated(grid, v)?;
    solve_sampled(grid, v, None, vk, f.values(), f.boundary_values(), None, tol)
}

/// Solves `-Δv + min(V, k) v = 0` with Dirichlet data `g` at the boundary ghost nodes.
pub fn solve_with_boundary_data(grid: &Grid, v: &PotentialSpec, k: f64, g: &[f64], tol: f64) -> Result<SolveResult> {
    check_tol(tol)?;
    v.validate()?;
    if g.len() != grid.boundary_len() {
        return Err(Error::Config(format!(
            "expected {} boundary values, got {}",
            grid.boundary_len(),
            g.len()
        )));
    }
    let vk = sample_truncated(grid, v, k)?;
    let zero = vec![0.0; grid.len()];
    let zb = vec![0.0; grid.boundary_len()];
    solve_sampled(grid, v, Some(k), vk, &zero, &zb, Some(g), tol)
}

/// `-Δθ = 1`, `θ = 0` on the boundary.
pub fn torsion_function(grid: &Grid, tol: f64) -> Result<SolveResult> {
    let one = SourceField::sample(grid, crate::source::SourceSpec::One);
    solve_untruncated(grid, &PotentialSpec::Zero, &one, tol)
}

/// `-Δw = |f|`, `w = 0` on the boundary.
pub fn majorant(grid: &Grid, f: &SourceField, tol: f64) -> Result<SolveResult> {
    solve_untruncated(grid, &PotentialSpec::Zero, &f.abs(grid), tol)
}

/// `∫ V_k |u_k|`.
pub fn absorption_integral(result: &SolveResult) -> f64 {
    result.absorption
}

/// Discrete `E(z) = 1/2 ∫ (|∇z|² + V z²) - ∫ f z` for `z` vanishing on the
/// boundary, with one-sided differences in the boundary cells.
pub fn energy(grid: &Grid, v: &PotentialSpec, z: &[f64], f: &SourceField) -> Result<f64> {
    check_field(grid, f)?;
    if z.len() != grid.len() {
        return Err(Error::Config("field was sampled on a different grid".into()));
    }
    let vs = sample_untruncated(grid, v)?;
    let op = Operator::assemble(grid, &vs);
    let az = op.matrix().mul(z);
    let b = op.rhs(f.values(), None);
    let quad: f64 = z.iter().zip(&az).map(|(a, b)| a * b).sum();
    let lin: f64 = z.iter().zip(&b).map(|(a, b)| a * b).sum();
    let scale = match grid.layout() {
        Layout::Uniform { h, .. } => h,
        Layout::Polar { .. } => 1.0,
    };
    Ok(scale * (0.5 * quad - lin))
}

/// The monotone limit of truncated solutions along a ladder.
#[derive(Debug, Clone, Serialize)]
pub struct LimitSolution {
    pub ladder: TruncationLadder,
    /// Solutions at the levels actually solved (a prefix of the ladder).
    #[serde(skip)]
    pub levels: Vec<SolveResult>,
    /// `‖u_{k_j} - u_{k_{j+1}}‖₁`.
    pub increments: Vec<f64>,
    pub converged: bool,
    /// First level from which the increment is below the stopping tolerance.
    pub converged_at: Option<usize>,
    /// `f >= 0`, so that the levels are non-increasing.
    pub monotone: bool,
}

impl LimitSolution {
    pub fn grid(&self) -> &Grid {
        self.last().grid()
    }

    pub fn last(&self) -> &SolveResult {
        self.levels.last().expect("at least one level")
    }

    /// The reported limit field: the last level.
    pub fn u(&self) -> &[f64] {
        &self.last().u
    }

    /// Nodewise extrapolation of the last levels (clamped for monotone sequences).
    pub fn extrapolated(&self) -> Vec<f64> {
        let fields: Vec<&[f64]> = self.levels.iter().map(|l| l.u.as_slice()).collect();
        ladder_limit_field(&fields, self.monotone, self.ladder.tau_stop())
    }

    pub fn fluxes(&self, slot: usize) -> Vec<f64> {
        self.levels.iter().map(|l| l.flux(slot)).collect()
    }

    pub fn cutoffs(&self) -> Vec<f64> {
        self.ladder.levels()[..self.levels.len()].to_vec()
    }
}

fn l1_distance(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    grid.integrate(&d, None)
}

/// Solves along the ladder, splitting signed `f` into its positive and
/// negative parts. Stops early once two consecutive relative increments are
/// below the ladder's `tau_stop`.
pub fn solve_limit(grid: &Grid, v: &PotentialSpec, ladder: &TruncationLadder, f: &SourceField, tol: f64) -> Result<LimitSolution> {
    check_tol(tol)?;
    check_field(grid, f)?;
    v.validate()?;
    let monotone = f.is_nonnegative();
    let (fp, fm) = f.split(grid);
    let tau = ladder.tau_stop();
    let mut levels: Vec<SolveResult> = Vec::new();
    let mut increments = Vec::new();
    let mut small_run = 0;
    for &k in ladder.levels() {
        let vk = sample_truncated(grid, v, k)?;
        let reuse = levels.last().filter(|prev| prev.potential_samples == vk);
        let level = match reuse {
            Some(prev) => SolveResult {
                cutoff: Some(k),
                ..prev.clone()
            },
            None => {
                let plus = solve_sampled(grid, v, Some(k), vk.clone(), fp.values(), fp.boundary_values(), None, tol)?;
                if fm.is_zero() {
                    plus
                } else {
                    let minus = solve_sampled(grid, v, Some(k), vk.clone(), fm.values(), fm.boundary_values(), None, tol)?;
                    combine(grid, plus, &minus, f)
                }
            }
        };
        if let Some(prev) = levels.last() {
            let inc = l1_distance(grid, &prev.u, &level.u);
            let small = inc < tau * level.l1.max(f64::MIN_POSITIVE) || inc == 0.0;
            small_run = if small { small_run + 1 } else { 0 };
            increments.push(inc);
        }
        levels.push(level);
        if small_run >= 2 {
            break;
        }
    }
    let rel = |j: usize| increments[j] <= tau * levels[j + 1].l1 || increments[j] == 0.0;
    let converged = increments.last().is_some_and(|_| rel(increments.len() - 1));
    let converged_at = if converged {
        let mut j = increments.len();
        while j > 0 && rel(j - 1) {
            j -= 1;
        }
        Some(j)
    } else {
        None
    };
    Ok(LimitSolution {
        ladder: ladder.clone(),
        levels,
        increments,
        converged,
        converged_at,
        monotone,
    })
}

fn combine(grid: &Grid, plus: SolveResult, minus: &SolveResult, f: &SourceField) -> SolveResult {
    let u: Vec<f64> = plus.u.iter().zip(&minus.u).map(|(a, b)| a - b).collect();
    let abs: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    let weighted: Vec<f64> = abs.iter().zip(&plus.potential_samples).map(|(u, v)| u * v).collect();
    SolveResult {
        absorption: grid.integrate(&weighted, None),
        l1: grid.integrate(&abs, None),
        linf: abs.iter().fold(0.0, |a, b| a.max(*b)),
        u,
        source: f.values().to_vec(),
        source_boundary: f.boundary_values().to_vec(),
        stats: SolveStats {
            iterations: plus.stats.iterations + minus.stats.iterations,
            residual: plus.stats.residual.max(minus.stats.residual),
        },
        ..plus
    }
}
