//! The two domains, their grids and boundary points.
//!
//! The interval is `(0, 1)` with nodes `x_i = i h`. The disk is the open unit
//! disk with a staggered polar grid: radii `r_j = (j + 1/2) dr` so that no node
//! sits at the origin or on the circle, and angles `phi_m = m dphi`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when deciding whether a point lies on the closure of the domain.
const CLOSURE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    #[serde(rename = "interval")]
    Interval01,
    #[serde(rename = "disk")]
    UnitDisk,
}

impl Domain {
    pub fn dimension(self) -> usize {
        match self {
            Domain::Interval01 => 1,
            Domain::UnitDisk => 2,
        }
    }

    /// Measure of the boundary: two endpoints with unit weight, or the circumference.
    pub fn boundary_measure(self) -> f64 {
        match self {
            Domain::Interval01 => 2.0,
            Domain::UnitDisk => TAU,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Interval01 => "interval",
            Domain::UnitDisk => "disk",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" => Ok(Domain::Interval01),
            "disk" => Ok(Domain::UnitDisk),
            other => Err(Error::Config(format!("unknown domain {other:?}"))),
        }
    }
}

/// A point of the plane. Interval points use `x` only and keep `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub const fn on_line(x: f64) -> Self {
        Point { x, y: 0.0 }
    }

    pub fn polar(r: f64, phi: f64) -> Self {
        Point::new(r * phi.cos(), r * phi.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x).rem_euclid(TAU)
    }
}

/// `d(x)`, the distance from `x` to the boundary.
pub fn distance_to_boundary(domain: Domain, p: Point) -> Result<f64> {
    match domain {
        Domain::Interval01 => {
            if p.y != 0.0 || !(-CLOSURE_SLACK..=1.0 + CLOSURE_SLACK).contains(&p.x) {
                return Err(Error::Domain(format!("x = {} is not in [0, 1]", p.x)));
            }
            Ok(p.x.min(1.0 - p.x).max(0.0))
        }
        Domain::UnitDisk => {
            let r = p.norm();
            if r > 1.0 + CLOSURE_SLACK {
                return Err(Error::Domain(format!("|x| = {r} exceeds 1")));
            }
            Ok((1.0 - r).max(0.0))
        }
    }
}

/// A point of the boundary: an endpoint of the interval or an angle on the circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    domain: Domain,
    coord: f64,
}

impl BoundaryPoint {
    pub fn endpoint(a: f64) -> Result<Self> {
        if a == 0.0 || a == 1.0 {
            Ok(BoundaryPoint {
                domain: Domain::Interval01,
                coord: a,
            })
        } else {
            Err(Error::Domain(format!("{a} is not an endpoint of [0, 1]")))
        }
    }

    pub fn on_circle(phi: f64) -> Self {
        BoundaryPoint {
            domain: Domain::UnitDisk,
            coord: phi.rem_euclid(TAU),
        }
    }

    /// Interprets `coord` as an endpoint for the interval and as an angle for the disk.
    pub fn new(domain: Domain, coord: f64) -> Result<Self> {
        match domain {
            Domain::Interval01 => Self::endpoint(coord),
            Domain::UnitDisk => Ok(Self::on_circle(coord)),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Endpoint value for the interval, angle in `[0, 2 pi)` for the disk.
    pub fn coord(&self) -> f64 {
        self.coord
    }

    pub fn position(&self) -> Point {
        match self.domain {
            Domain::Interval01 => Point::on_line(self.coord),
            Domain::UnitDisk => Point::polar(1.0, self.coord),
        }
    }

    /// `a + eps n(a)`.
    pub fn step_inward(&self, eps: f64) -> Point {
        let p = self.position();
        let n = inward_normal(self);
        Point::new(p.x + eps * n.x, p.y + eps * n.y)
    }
}

/// Inward unit normal at a boundary point.
pub fn inward_normal(a: &BoundaryPoint) -> Point {
    match a.domain {
        Domain::Interval01 => Point::on_line(if a.coord == 0.0 { 1.0 } else { -1.0 }),
        Domain::UnitDisk => Point::new(-a.coord.cos(), -a.coord.sin()),
    }
}

/// Boundary nodes with surface-measure weights.
pub fn boundary_quadrature(domain: Domain, m: usize) -> Result<Vec<(BoundaryPoint, f64)>> {
    match domain {
        Domain::Interval01 => Ok(vec![
            (BoundaryPoint::endpoint(0.0)?, 1.0),
            (BoundaryPoint::endpoint(1.0)?, 1.0),
        ]),
        Domain::UnitDisk => {
            if m == 0 {
                return Err(Error::Config("boundary quadrature needs m >= 1".into()));
            }
            let w = TAU / m as f64;
            Ok((0..m)
                .map(|i| (BoundaryPoint::on_circle(i as f64 * w), w))
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layout {
    /// Interval nodes `i h`, `i = 1..n-1`.
    Uniform { n: usize, h: f64 },
    /// Disk nodes `(r_j, phi_m)` stored at index `j * nphi + m`.
    Polar {
        nr: usize,
        nphi: usize,
        dr: f64,
        dphi: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Grid {
    domain: Domain,
    layout: Layout,
    nodes: Arc<[Point]>,
}

/// Grid with the default angular resolution (twice the radial one for the disk).
pub fn build_grid(domain: Domain, resolution: usize) -> Result<Grid> {
    match domain {
        Domain::Interval01 => Grid::interval(resolution),
        Domain::UnitDisk => Grid::disk(resolution, 2 * resolution),
    }
}

impl Grid {
    pub fn interval(resolution: usize) -> Result<Self> {
        if resolution < 4 {
            return Err(Error::Config(format!(
                "resolution {resolution} is below the minimum of 4"
            )));
        }
        let h = 1.0 / resolution as f64;
        let nodes: Vec<Point> = (1..resolution)
            .map(|i| Point::on_line(i as f64 * h))
            .collect();
        Ok(Grid {
            domain: Domain::Interval01,
            layout: Layout::Uniform { n: resolution, h },
            nodes: nodes.into(),
        })
    }

    pub fn disk(radial: usize, angular: usize) -> Result<Self> {
        if radial < 4 {
            return Err(Error::Config(format!(
                "resolution {radial} is below the minimum of 4"
            )));
        }
        if angular < 4 {
            return Err(Error::Config(format!(
                "{angular} angles are below the minimum of 4"
            )));
        }
        let dr = 1.0 / radial as f64;
        let dphi = TAU / angular as f64;
        let mut nodes = Vec::with_capacity(radial * angular);
        for j in 0..radial {
            let r = (j as f64 + 0.5) * dr;
            for m in 0..angular {
                nodes.push(Point::polar(r, m as f64 * dphi));
            }
        }
        Ok(Grid {
            domain: Domain::UnitDisk,
            layout: Layout::Polar {
                nr: radial,
                nphi: angular,
                dr,
                dphi,
            },
            nodes: nodes.into(),
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smallest distance between a node and the boundary.
    pub fn boundary_gap(&self) -> f64 {
        match self.layout {
            Layout::Uniform { h, .. } => h,
            Layout::Polar { dr, .. } => 0.5 * dr,
        }
    }

    /// Radial (or 1D) mesh width.
    pub fn spacing(&self) -> f64 {
        match self.layout {
            Layout::Uniform { h, .. } => h,
            Layout::Polar { dr, .. } => dr,
        }
    }

    pub fn radius(&self, j: usize) -> f64 {
        match self.layout {
            Layout::Uniform { .. } => panic!("radius() on an interval grid"),
            Layout::Polar { dr, .. } => (j as f64 + 0.5) * dr,
        }
    }

    /// Quadrature weight of each node: `h` on the interval, the cell area on the disk.
    pub fn cell_weights(&self) -> Vec<f64> {
        match self.layout {
            Layout::Uniform { n, h } => vec![h; n - 1],
            Layout::Polar {
                nr, nphi, dr, dphi, ..
            } => (0..nr)
                .flat_map(|j| std::iter::repeat((j as f64 + 0.5) * dr * dr * dphi).take(nphi))
                .collect(),
        }
    }

    /// Number of boundary (ghost) nodes carrying Dirichlet data.
    pub fn boundary_len(&self) -> usize {
        match self.layout {
            Layout::Uniform { .. } => 2,
            Layout::Polar { nphi, .. } => nphi,
        }
    }

    /// Boundary ghost node positions: `[0, 1]` or the circle at the grid angles.
    pub fn boundary_points(&self) -> Vec<BoundaryPoint> {
        match self.layout {
            Layout::Uniform { .. } => vec![
                BoundaryPoint::endpoint(0.0).expect("endpoint"),
                BoundaryPoint::endpoint(1.0).expect("endpoint"),
            ],
            Layout::Polar { nphi, dphi, .. } => (0..nphi)
                .map(|m| BoundaryPoint::on_circle(m as f64 * dphi))
                .collect(),
        }
    }

    /// Surface weight of each boundary ghost node.
    pub fn boundary_weights(&self) -> Vec<f64> {
        match self.layout {
            Layout::Uniform { .. } => vec![1.0, 1.0],
            Layout::Polar { nphi, dphi, .. } => vec![dphi; nphi],
        }
    }

    /// Index of the boundary ghost node nearest to `a`.
    pub fn nearest_boundary_slot(&self, a: &BoundaryPoint) -> Result<usize> {
        if a.domain() != self.domain {
            return Err(Error::Domain("boundary point belongs to another domain".into()));
        }
        Ok(match self.layout {
            Layout::Uniform { .. } => usize::from(a.coord() == 1.0),
            Layout::Polar { nphi, dphi, .. } => ((a.coord() / dphi).round() as usize) % nphi,
        })
    }

    /// The interior node adjacent to a boundary slot and its distance from the boundary.
    pub fn adjacent_node(&self, slot: usize) -> (usize, f64) {
        match self.layout {
            Layout::Uniform { n, h } => (if slot == 0 { 0 } else { n - 2 }, h),
            Layout::Polar { nr, nphi, dr, .. } => ((nr - 1) * nphi + slot, 0.5 * dr),
        }
    }

    /// Quadrature of a nodal field: trapezoid on the interval (boundary values
    /// enter with half weight), midpoint cells on the disk.
    pub fn integrate(&self, values: &[f64], boundary: Option<&[f64]>) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        match self.layout {
            Layout::Uniform { h, .. } => {
                let interior: f64 = values.iter().sum::<f64>() * h;
                let ends = boundary.map_or(0.0, |b| 0.5 * h * (b[0] + b[1]));
                interior + ends
            }
            Layout::Polar { .. } => self
                .cell_weights()
                .iter()
                .zip(values)
                .map(|(w, v)| w * v)
                .sum(),
        }
    }

    /// Piecewise-linear (interval) or bilinear polar (disk) interpolation of a
    /// nodal field, using `boundary` as the values on the boundary ghost nodes
    /// (zero when `None`).
    pub fn interpolate(&self, values: &[f64], boundary: Option<&[f64]>, p: Point) -> Result<f64> {
        let bval = |slot: usize| boundary.map_or(0.0, |b| b[slot]);
        match self.layout {
            Layout::Uniform { n, h } => {
                let x = p.x;
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::Domain(format!("x = {x} is not in [0, 1]")));
                }
                let s = x / h;
                let i = (s.floor() as usize).min(n - 1);
                let t = s - i as f64;
                let at = |k: usize| -> f64 {
                    if k == 0 {
                        bval(0)
                    } else if k == n {
                        bval(1)
                    } else {
                        values[k - 1]
                    }
                };
                Ok((1.0 - t) * at(i) + t * at(i + 1))
            }
            Layout::Polar {
                nr, nphi, dr, dphi, ..
            } => {
                let r = p.norm();
                if r > 1.0 + CLOSURE_SLACK {
                    return Err(Error::Domain(format!("|x| = {r} exceeds 1")));
                }
                let phi = p.angle();
                let sphi = phi / dphi;
                let m0 = (sphi.floor() as usize) % nphi;
                let m1 = (m0 + 1) % nphi;
                let tphi = sphi - sphi.floor();
                let ring = |j: usize| -> f64 {
                    let a = values[j * nphi + m0];
                    let b = values[j * nphi + m1];
                    (1.0 - tphi) * a + tphi * b
                };
                let outer = (1.0 - tphi) * bval(m0) + tphi * bval(m1);
                let r0 = 0.5 * dr;
                if r <= r0 {
                    let center = values[..nphi].iter().sum::<f64>() / nphi as f64;
                    let t = r / r0;
                    return Ok((1.0 - t) * center + t * ring(0));
                }
                let rlast = (nr as f64 - 0.5) * dr;
                if r >= rlast {
                    let t = (r - rlast) / (1.0 - rlast);
                    return Ok((1.0 - t) * ring(nr - 1) + t * outer);
                }
                let s = r / dr - 0.5;
                let j = (s.floor() as usize).min(nr - 2);
                let t = s - j as f64;
                Ok((1.0 - t) * ring(j) + t * ring(j + 1))
            }
        }
    }
}

/// Angular distance on the circle, in `[0, pi]`.
pub fn angular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d).min(PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let d = |dom, p| distance_to_boundary(dom, p).unwrap();
        assert_abs_diff_eq!(d(Domain::Interval01, Point::on_line(0.3)), 0.3);
        assert_abs_diff_eq!(d(Domain::UnitDisk, Point::new(0.25, 0.0)), 0.75);
        assert_eq!(d(Domain::Interval01, Point::on_line(1.0)), 0.0);
        assert!(distance_to_boundary(Domain::Interval01, Point::on_line(1.5)).is_err());
        assert!(distance_to_boundary(Domain::UnitDisk, Point::new(1.0, 0.5)).is_err());
    }

    #[test]
    fn normals() {
        let n0 = inward_normal(&BoundaryPoint::endpoint(0.0).unwrap());
        let n1 = inward_normal(&BoundaryPoint::endpoint(1.0).unwrap());
        assert_eq!(n0.x, 1.0);
        assert_eq!(n1.x, -1.0);
        let nd = inward_normal(&BoundaryPoint::on_circle(0.0));
        assert_abs_diff_eq!(nd.x, -1.0);
        assert_abs_diff_eq!(nd.y, 0.0);
        for k in 0..7 {
            let n = inward_normal(&BoundaryPoint::on_circle(k as f64 * 0.9));
            assert_abs_diff_eq!(n.norm(), 1.0, epsilon = 1e-15);
        }
        assert!(BoundaryPoint::endpoint(0.5).is_err());
    }

    #[test]
    fn grids() {
        let g = build_grid(Domain::Interval01, 4).unwrap();
        let xs: Vec<f64> = g.nodes().iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(build_grid(Domain::Interval01, 10).unwrap().len(), 9);
        let d = Grid::disk(8, 16).unwrap();
        assert_eq!(d.len(), 128);
        assert!(d.nodes().iter().all(|p| p.norm() > 0.0 && p.norm() < 1.0));
        assert!(build_grid(Domain::Interval01, 3).is_err());
        assert_eq!(build_grid(Domain::UnitDisk, 8).unwrap().len(), 8 * 16);
    }

    #[test]
    fn quadrature_weights() {
        let q = boundary_quadrature(Domain::Interval01, 7).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].0.coord(), 0.0);
        assert_eq!((q[0].1, q[1].1), (1.0, 1.0));
        let q4 = boundary_quadrature(Domain::UnitDisk, 4).unwrap();
        assert!(q4.iter().all(|(_, w)| (w - PI / 2.0).abs() < 1e-15));
        for m in [1, 3, 16, 1000] {
            let total: f64 = boundary_quadrature(Domain::UnitDisk, m)
                .unwrap()
                .iter()
                .map(|(_, w)| *w)
                .sum();
            assert_abs_diff_eq!(total, TAU, epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolation_honours_boundary_zero() {
        let g = Grid::interval(10).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|p| p.x * (1.0 - p.x)).collect();
        assert_abs_diff_eq!(g.interpolate(&vals, None, Point::on_line(0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            g.interpolate(&vals, None, Point::on_line(0.05)).unwrap(),
            0.5 * 0.09,
            epsilon = 1e-15
        );
        let d = Grid::disk(10, 16).unwrap();
        let ones = vec![1.0; d.len()];
        assert_abs_diff_eq!(d.interpolate(&ones, None, Point::new(0.0, 0.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(d.interpolate(&ones, None, Point::new(0.0, 1.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(d.interpolate(&ones, None, Point::new(0.3, 0.4)).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn distance_is_one_lipschitz(x1 in -1.0f64..1.0, y1 in -1.0f64..1.0,
                                     x2 in -1.0f64..1.0, y2 in -1.0f64..1.0) {
            let p = Point::new(x1, y1);
            let q = Point::new(x2, y2);
            prop_assume!(p.norm() <= 1.0 && q.norm() <= 1.0);
            let dp = distance_to_boundary(Domain::UnitDisk, p).unwrap();
            let dq = distance_to_boundary(Domain::UnitDisk, q).unwrap();
            prop_assert!((dp - dq).abs() <= p.dist(q) + 1e-15);
            let ip = distance_to_boundary(Domain::Interval01, Point::on_line(x1.abs())).unwrap();
            let iq = distance_to_boundary(Domain::Interval01, Point::on_line(x2.abs())).unwrap();
            prop_assert!((ip - iq).abs() <= (x1.abs() - x2.abs()).abs() + 1e-15);
        }

        #[test]
        fn nodes_keep_half_spacing_from_boundary(res in 4usize..60, ang in 4usize..40) {
            for g in [Grid::interval(res).unwrap(), Grid::disk(res, ang).unwrap()] {
                let gap = g.boundary_gap();
                for p in g.nodes() {
                    let d = distance_to_boundary(g.domain(), *p).unwrap();
                    prop_assert!(d >= 0.5 * g.spacing().min(gap) - 1e-14);
                    prop_assert!(d > 0.0);
                }
            }
        }
    }
}
