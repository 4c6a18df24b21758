//! Gauss-Legendre panels on graded meshes, and integrals over the shrinking
//! regions `{ d(y) >= rho }`.

use std::f64::consts::{PI, TAU};
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::extrapolate::{cut_limit, CutLimit};
use crate::geometry::{BoundaryPoint, Domain, Grid, Layout, Point};

const PANEL_DEGREE: usize = 8;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let gl = GaussLegendre::new(NonZeroUsize::new(PANEL_DEGREE).expect("nonzero"));
        gl.into_node_weight_pairs().into_vec()
    })
}

/// Gauss-Legendre rule on `[a, b]`.
pub fn panel<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule().iter().map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Breakpoints `a + (b - a) 2^(-j)`, `j = 0..`, down to `(b - a) * smallest`,
/// returned in increasing order and including `a` and `b`.
pub fn graded_breaks(a: f64, b: f64, smallest: f64) -> Vec<f64> {
    let mut out = vec![a];
    let mut s = smallest;
    let mut pts = Vec::new();
    while s < 1.0 {
        pts.push(a + (b - a) * s);
        s *= 2.0;
    }
    out.extend(pts);
    out.push(b);
    out
}

/// `int_a^b f` on panels graded geometrically (ratio 1/2) toward `a` down to
/// `1e-10` of the length.
pub fn graded<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    graded_breaks(a, b, 1e-10)
        .windows(2)
        .map(|w| panel(w[0], w[1], &mut f))
        .sum()
}

/// Partial integrals over `{ d(y) >= rho_j }` for a halving sequence of cut-offs.
#[derive(Debug, Clone)]
pub struct CutIntegral {
    pub rhos: Vec<f64>,
    pub partial: Vec<f64>,
    pub limit: CutLimit,
}

/// Halving cut-offs from `rho_max` down to (at least) `rho_min`.
pub fn halving(rho_max: f64, rho_min: f64) -> Vec<f64> {
    let mut rhos = vec![rho_max];
    while *rhos.last().expect("non-empty") * 0.5 >= rho_min {
        let next = rhos.last().expect("non-empty") * 0.5;
        rhos.push(next);
    }
    rhos
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(1.0));
    v
}

/// Integrates `f` over `{ d(y) >= rho }` for each cut-off in `rhos`
/// (decreasing), with panels aligned to the grid and graded toward `focus`.
pub fn cut_integral<F>(grid: &Grid, focus: Option<&BoundaryPoint>, rhos: &[f64], blowup: f64, f: F) -> CutIntegral
where
    F: Fn(Point) -> f64,
{
    let partial: Vec<f64> = match grid.layout() {
        Layout::Uniform { n, h } => {
            // with a focus only its end is cut; the far end is integrable
            let (left, right) = match focus.filter(|a| a.domain() == Domain::Interval01) {
                Some(a) if a.coord() < 0.5 => (true, false),
                Some(_) => (false, true),
                None => (true, true),
            };
            let lo = |rho: f64| if left { rho } else { 0.0 };
            let hi = |rho: f64| if right { 1.0 - rho } else { 1.0 };
            let mut breaks: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
            // both ends stay graded
            for &r in rhos {
                breaks.push(r);
                breaks.push(1.0 - r);
            }
            let breaks = sorted_unique(breaks);
            // integral of each elementary segment
            let pieces: Vec<(f64, f64, f64)> = breaks
                .windows(2)
                .map(|w| (w[0], w[1], panel(w[0], w[1], |x| f(Point::on_line(x)))))
                .collect();
            rhos.iter()
                .map(|rho| {
                    pieces
                        .iter()
                        .filter(|(a, b, _)| *a >= lo(*rho) - 1e-15 && *b <= hi(*rho) + 1e-15)
                        .map(|(_, _, v)| v)
                        .sum()
                })
                .collect()
        }
        Layout::Polar { nr, nphi, dr, dphi } => {
            let mut rbreaks: Vec<f64> = vec![0.0];
            rbreaks.extend((0..nr).map(|j| (j as f64 + 0.5) * dr));
            rbreaks.extend(rhos.iter().map(|r| 1.0 - r));
            let rbreaks = sorted_unique(rbreaks.into_iter().filter(|r| *r <= 1.0 - rhos.last().copied().unwrap_or(0.0) + 1e-15).collect());
            let mut abreaks: Vec<f64> = (0..=nphi).map(|m| m as f64 * dphi).collect();
            if let Some(a) = focus.filter(|a| a.domain() == Domain::UnitDisk) {
                let phi0 = a.coord();
                for i in 1..=45 {
                    let s = PI * 0.5f64.powi(i);
                    abreaks.push((phi0 + s).rem_euclid(TAU));
                    abreaks.push((phi0 - s).rem_euclid(TAU));
                }
                abreaks.push(phi0);
            }
            let abreaks = sorted_unique(abreaks.into_iter().filter(|p| *p <= TAU).collect());
            // ring integrals: for each radial segment, integrate over the full angle
            let rings: Vec<(f64, f64)> = rbreaks
                .windows(2)
                .map(|w| {
                    let (r0, r1) = (w[0], w[1]);
                    let v = panel(r0, r1, |r| {
                        abreaks
                            .windows(2)
                            .map(|a| panel(a[0], a[1], |phi| f(Point::polar(r, phi))))
                            .sum::<f64>()
                            * r
                    });
                    (r1, v)
                })
                .collect();
            rhos.iter()
                .map(|rho| {
                    rings
                        .iter()
                        .filter(|(r1, _)| *r1 <= 1.0 - rho + 1e-15)
                        .map(|(_, v)| v)
                        .sum()
                })
                .collect()
        }
    };
    let limit = cut_limit(&partial, blowup);
    CutIntegral {
        rhos: rhos.to_vec(),
        partial,
        limit,
    }
}
