//! Sparse symmetric matrices and preconditioned conjugate gradients.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|(c, _)| *c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().expect("entry") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).filter(|(c, _)| *c == i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Nonpositive off-diagonal entries and positive diagonal.
    pub fn has_m_matrix_sign_pattern(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(c, v)| if c == i { v > 0.0 } else { v <= 0.0 }))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            self.row(i).all(|(c, v)| {
                let t: f64 = self.row(c).filter(|(cc, _)| *cc == i).map(|(_, w)| w).sum();
                (v - t).abs() <= tol * v.abs().max(1.0)
            })
        })
    }
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Self {
        Jacobi {
            inv_diag: a.diagonal().into_iter().map(|d| 1.0 / d).collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Thomas factorization of a symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e` (`e[i]` couples `i` and `i + 1`).
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    off: Vec<f64>,
    inv_pivot: Vec<f64>,
    ratio: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(diag: &[f64], off: &[f64]) -> Self {
        let n = diag.len();
        debug_assert_eq!(off.len() + 1, n.max(1));
        let mut inv_pivot = vec![0.0; n];
        let mut ratio = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let pivot = diag[i] - if i > 0 { off[i - 1] * prev } else { 0.0 };
            inv_pivot[i] = 1.0 / pivot;
            prev = if i + 1 < n { off[i] * inv_pivot[i] } else { 0.0 };
            ratio[i] = prev;
        }
        Tridiagonal {
            off: off.to_vec(),
            inv_pivot,
            ratio,
        }
    }

    /// From a CSR matrix whose entries all lie on the three central diagonals.
    pub fn from_csr(a: &CsrMatrix) -> Self {
        let n = a.dim();
        let diag = a.diagonal();
        let off: Vec<f64> = (0..n.saturating_sub(1))
            .map(|i| a.row(i).filter(|(c, _)| *c == i + 1).map(|(_, v)| v).sum())
            .collect();
        Self::new(&diag, &off)
    }

    pub fn solve_into<T>(&self, rhs: &[T], x: &mut [T])
    where
        T: Copy
            + std::ops::Sub<Output = T>
            + std::ops::Mul<f64, Output = T>,
    {
        let n = rhs.len();
        if n == 0 {
            return;
        }
        x[0] = rhs[0] * self.inv_pivot[0];
        for i in 1..n {
            x[i] = (rhs[i] - x[i - 1] * self.off[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] = x[i] - x[i + 1] * self.ratio[i];
        }
    }
}

impl Preconditioner for Tridiagonal {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.solve_into(r, z);
    }
}

/// Inverse of the polar five-point operator with the potential replaced by
/// its angular mean, applied mode by mode after an FFT in the angle.
/// Exact when the potential is radial.
pub struct PolarModes {
    nr: usize,
    nphi: usize,
    modes: Vec<Tridiagonal>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl PolarModes {
    /// `radial[j]` couples rings `j` and `j + 1` (the last entry is the
    /// boundary coefficient), `angular[j]` is the coupling between neighbouring
    /// angles on ring `j` and `mass[j]` the angular mean of the diagonal
    /// potential term.
    pub fn new(nr: usize, nphi: usize, radial: &[f64], angular: &[f64], mass: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(nphi);
        let inverse = planner.plan_fft_inverse(nphi);
        let modes = (0..nphi)
            .map(|q| {
                let lambda = 2.0 - 2.0 * (std::f64::consts::TAU * q as f64 / nphi as f64).cos();
                let diag: Vec<f64> = (0..nr)
                    .map(|j| {
                        let inner = if j > 0 { radial[j - 1] } else { 0.0 };
                        inner + radial[j] + angular[j] * lambda + mass[j]
                    })
                    .collect();
                let off: Vec<f64> = (0..nr - 1).map(|j| -radial[j]).collect();
                Tridiagonal::new(&diag, &off)
            })
            .collect();
        PolarModes {
            nr,
            nphi,
            modes,
            forward,
            inverse,
        }
    }
}

impl Preconditioner for PolarModes {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let (nr, nphi) = (self.nr, self.nphi);
        let mut spec: Vec<Complex<f64>> = r.iter().map(|v| Complex::new(*v, 0.0)).collect();
        for ring in spec.chunks_mut(nphi) {
            self.forward.process(ring);
        }
        let mut column = vec![Complex::new(0.0, 0.0); nr];
        let mut solved = vec![Complex::new(0.0, 0.0); nr];
        for (q, mode) in self.modes.iter().enumerate() {
            for j in 0..nr {
                column[j] = spec[j * nphi + q];
            }
            mode.solve_into(&column, &mut solved);
            for j in 0..nr {
                spec[j * nphi + q] = solved[j];
            }
        }
        let scale = 1.0 / nphi as f64;
        for ring in spec.chunks_mut(nphi) {
            self.inverse.process(ring);
        }
        for (zi, s) in z.iter_mut().zip(&spec) {
            *zi = s.re * scale;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Normwise backward error `|b - A x|_inf / (|A|_inf |x|_inf + |b|_inf)`.
    pub residual: f64,
}

pub fn backward_error(a: &CsrMatrix, x: &[f64], b: &[f64], a_norm: f64) -> f64 {
    let ax = a.mul(x);
    let r = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (q - p).abs())
        .fold(0.0, f64::max);
    let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let bn = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let denom = a_norm * xn + bn;
    if denom == 0.0 {
        0.0
    } else {
        r / denom
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients from a zero initial guess, stopped on
/// the normwise backward error.
pub fn pcg<P: Preconditioner + ?Sized>(
    a: &CsrMatrix,
    b: &[f64],
    precond: &P,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.dim();
    let a_norm = a.norm_inf();
    let mut x = vec![0.0; n];
    if b.iter().all(|v| *v == 0.0) {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        a.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Internal("operator is not positive definite".into()));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rn = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let xn = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let bn = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if rn <= tol * (a_norm * xn + bn) {
            residual = backward_error(a, &x, b, a_norm);
            if residual <= tol {
                return Ok((
                    x,
                    SolveStats {
                        iterations: it,
                        residual,
                    },
                ));
            }
            // recursive residual drifted; restart from the true one
            let ax = a.mul(&x);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
            precond.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if residual.is_infinite() {
        residual = backward_error(a, &x, b, a_norm);
    }
    Err(Error::Solver {
        residual,
        iterations: max_iter,
    })
}
