//! Numerical integration over SE(2) regions and over the radial frequency axis.
//!
//! SE(2) rules are tensor products: Gauss-Legendre in the two cell
//! coordinates of a parallelogram, and in θ either a uniform periodic rule
//! (full circle) or Gauss-Legendre (proper angular sector). All weights carry
//! the Haar normalisation `1/(4π²)`, so the weights of a region sum to its
//! Haar measure.
//!
//! The radial rule is Gauss-Legendre on `[0, p_max]` with the Plancherel
//! weight `p` folded into the weights.

use std::f64::consts::TAU;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{reduce_angle, GroupElement, HAAR_NORMALIZATION};

/// Default relative tolerance for the spectral tail at `p_max`.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

const GEOMETRY_TOL: f64 = 1e-9;

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    let rule = GaussLegendre::new(n).map_err(|_| Error::InvalidOrders(vec![n]))?;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut pairs: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect();
    pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
    Ok(pairs)
}

/// Uniform periodic rule on `[start, start + 2π)`.
pub fn uniform_circle(n: usize, start: f64) -> Vec<(f64, f64)> {
    let h = TAU / n as f64;
    (0..n).map(|j| (start + j as f64 * h, h)).collect()
}

/// An SE(2) region: a parallelogram `origin + s·e₁ + t·e₂` (`s, t ∈ [0, 1]`)
/// times an angle interval `[theta_start, theta_start + theta_len)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub origin: [f64; 2],
    pub edges: [[f64; 2]; 2],
    pub theta_start: f64,
    pub theta_len: f64,
}

impl Region {
    pub fn parallelogram(
        origin: [f64; 2],
        e1: [f64; 2],
        e2: [f64; 2],
        theta_start: f64,
        theta_len: f64,
    ) -> Result<Self> {
        let region = Region {
            origin,
            edges: [e1, e2],
            theta_start: reduce_angle(theta_start),
            theta_len,
        };
        region.validate()?;
        Ok(region)
    }

    /// Axis-aligned box `[a, b] × [c, d]` times the full circle.
    pub fn boxed(x1: (f64, f64), x2: (f64, f64)) -> Result<Self> {
        Self::boxed_sector(x1, x2, (0.0, TAU))
    }

    pub fn boxed_sector(x1: (f64, f64), x2: (f64, f64), theta: (f64, f64)) -> Result<Self> {
        if !(x1.1 > x1.0) || !(x2.1 > x2.0) || !(theta.1 > theta.0) {
            return Err(Error::InvalidRegion(format!(
                "empty or inverted box x1={x1:?} x2={x2:?} theta={theta:?}"
            )));
        }
        Self::parallelogram(
            [x1.0, x2.0],
            [x1.1 - x1.0, 0.0],
            [0.0, x2.1 - x2.0],
            theta.0,
            theta.1 - theta.0,
        )
    }

    /// Square box centred at `center` with half-width `half`, full circle.
    pub fn centered_square(center: [f64; 2], half: f64) -> Result<Self> {
        Self::boxed(
            (center[0] - half, center[0] + half),
            (center[1] - half, center[1] + half),
        )
    }

    fn validate(&self) -> Result<()> {
        let finite = self.origin.iter().chain(self.edges.iter().flatten()).all(|v| v.is_finite())
            && self.theta_len.is_finite();
        if !finite {
            return Err(Error::InvalidRegion("non-finite geometry".into()));
        }
        if self.area() <= 0.0 {
            return Err(Error::InvalidRegion(format!(
                "degenerate or inverted parallelogram {:?}",
                self.edges
            )));
        }
        if !(self.theta_len > 0.0) || self.theta_len > TAU + GEOMETRY_TOL {
            return Err(Error::InvalidRegion(format!(
                "angle interval length {} outside (0, 2π]",
                self.theta_len
            )));
        }
        Ok(())
    }

    /// Signed determinant of the edge frame; positive for valid regions.
    fn det(&self) -> f64 {
        self.edges[0][0] * self.edges[1][1] - self.edges[1][0] * self.edges[0][1]
    }

    pub fn area(&self) -> f64 {
        self.det()
    }

    pub fn is_full_circle(&self) -> bool {
        (self.theta_len - TAU).abs() <= GEOMETRY_TOL
    }

    /// Haar measure of the region.
    pub fn haar_measure(&self) -> f64 {
        self.area() * self.theta_len * HAAR_NORMALIZATION
    }

    /// Map cell coordinates `(s, t)` to the plane.
    pub fn point(&self, s: f64, t: f64) -> [f64; 2] {
        [
            self.origin[0] + s * self.edges[0][0] + t * self.edges[1][0],
            self.origin[1] + s * self.edges[0][1] + t * self.edges[1][1],
        ]
    }

    /// Cell coordinates of a plane point.
    pub fn coordinates(&self, x: [f64; 2]) -> (f64, f64) {
        let d = self.det();
        let dx = x[0] - self.origin[0];
        let dy = x[1] - self.origin[1];
        let s = (dx * self.edges[1][1] - dy * self.edges[1][0]) / d;
        let t = (self.edges[0][0] * dy - self.edges[0][1] * dx) / d;
        (s, t)
    }

    pub fn contains_point(&self, x: [f64; 2]) -> bool {
        let (s, t) = self.coordinates(x);
        (-GEOMETRY_TOL..=1.0 + GEOMETRY_TOL).contains(&s)
            && (-GEOMETRY_TOL..=1.0 + GEOMETRY_TOL).contains(&t)
    }

    pub fn contains_angle(&self, theta: f64) -> bool {
        if self.is_full_circle() {
            return true;
        }
        let d = reduce_angle(theta - self.theta_start);
        d <= self.theta_len + GEOMETRY_TOL || d >= TAU - GEOMETRY_TOL
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.contains_point(g.translation_part()) && self.contains_angle(g.theta())
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            self.point(0.0, 0.0),
            self.point(1.0, 0.0),
            self.point(1.0, 1.0),
            self.point(0.0, 1.0),
        ]
    }

    /// Whether `other` lies inside this region (parallelograms are convex, so
    /// checking corners suffices).
    pub fn covers(&self, other: &Region) -> bool {
        let spatial = other.corners().iter().all(|&c| self.contains_point(c));
        let angular = if self.is_full_circle() {
            true
        } else if other.is_full_circle() {
            false
        } else {
            let d = reduce_angle(other.theta_start - self.theta_start);
            let d = if d >= TAU - GEOMETRY_TOL { 0.0 } else { d };
            d + other.theta_len <= self.theta_len + GEOMETRY_TOL
        };
        spatial && angular
    }

    /// Euclidean distance from a plane point to the parallelogram (0 inside).
    pub fn distance_to_point(&self, x: [f64; 2]) -> f64 {
        if self.contains_point(x) {
            return 0.0;
        }
        let c = self.corners();
        (0..4)
            .map(|i| segment_distance(x, c[i], c[(i + 1) % 4]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Centre of the parallelogram and its circumradius about that centre.
    pub fn center_and_radius(&self) -> ([f64; 2], f64) {
        let center = self.point(0.5, 0.5);
        let r = self
            .corners()
            .iter()
            .map(|c| (c[0] - center[0]).hypot(c[1] - center[1]))
            .fold(0.0, f64::max);
        (center, r)
    }
}

/// A closed disk in the plane, used as the declared spatial support of a
/// compactly supported function (all rotation angles included).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disk {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() || !center.iter().all(|v| v.is_finite()) {
            return Err(Error::UnboundedSupport(format!(
                "support disk must be finite with positive radius, got centre {center:?} radius {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (x[0] - self.center[0]).hypot(x[1] - self.center[1]) <= self.radius
    }

    /// Smallest axis-aligned square (times the full circle) containing the disk.
    pub fn bounding_region(&self) -> Region {
        Region::centered_square(self.center, self.radius).expect("positive radius")
    }

    /// Largest distance of a point of the disk from the origin.
    pub fn reach(&self) -> f64 {
        self.center[0].hypot(self.center[1]) + self.radius
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0);
    (p[0] - a[0] - t * ab[0]).hypot(p[1] - a[1] - t * ab[1])
}

/// Quadrature orders `(n_x1, n_x2, n_theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Orders {
    pub x1: usize,
    pub x2: usize,
    pub theta: usize,
}

impl Orders {
    pub const fn new(x1: usize, x2: usize, theta: usize) -> Self {
        Self { x1, x2, theta }
    }

    pub fn doubled(&self) -> Self {
        Self::new(2 * self.x1, 2 * self.x2, 2 * self.theta)
    }
}

impl From<(usize, usize, usize)> for Orders {
    fn from(o: (usize, usize, usize)) -> Self {
        Self::new(o.0, o.1, o.2)
    }
}

/// A spatial quadrature node with its weight (area element only, no Haar factor).
#[derive(Clone, Copy, Debug)]
pub struct SpatialNode {
    pub x: [f64; 2],
    pub weight: f64,
}

/// Tensor-product quadrature over an SE(2) [`Region`].
#[derive(Clone, Debug)]
pub struct SE2Quadrature {
    region: Region,
    orders: Orders,
    spatial: Vec<SpatialNode>,
    /// `(θ, w)` with the Haar normalisation folded in.
    angular: Vec<(f64, f64)>,
}

impl SE2Quadrature {
    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn orders(&self) -> Orders {
        self.orders
    }

    pub fn spatial_nodes(&self) -> &[SpatialNode] {
        &self.spatial
    }

    pub fn angular_nodes(&self) -> &[(f64, f64)] {
        &self.angular
    }

    pub fn len(&self) -> usize {
        self.spatial.len() * self.angular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All nodes and weights in a fixed order (spatial-major, angle-minor).
    pub fn nodes(&self) -> impl Iterator<Item = (GroupElement, f64)> + '_ {
        self.spatial.iter().flat_map(move |sn| {
            self.angular
                .iter()
                .map(move |&(th, wt)| (GroupElement::new(sn.x[0], sn.x[1], th), sn.weight * wt))
        })
    }

    pub fn weight_sum(&self) -> f64 {
        let ws: f64 = self.spatial.iter().map(|n| n.weight).sum();
        let wt: f64 = self.angular.iter().map(|n| n.1).sum();
        ws * wt
    }
}

/// Build the tensor rule for `region` with the given orders.
pub fn build_se2_quadrature(region: &Region, orders: Orders) -> Result<SE2Quadrature> {
    if orders.x1 < 2 || orders.x2 < 2 || orders.theta < 2 {
        return Err(Error::InvalidOrders(vec![orders.x1, orders.x2, orders.theta]));
    }
    region.validate()?;
    let rs = gauss_legendre(orders.x1, 0.0, 1.0)?;
    let rt = gauss_legendre(orders.x2, 0.0, 1.0)?;
    let jac = region.area();
    let mut spatial = Vec::with_capacity(rs.len() * rt.len());
    for &(s, ws) in &rs {
        for &(t, wt) in &rt {
            spatial.push(SpatialNode {
                x: region.point(s, t),
                weight: ws * wt * jac,
            });
        }
    }
    let angular: Vec<(f64, f64)> = if region.is_full_circle() {
        uniform_circle(orders.theta, region.theta_start)
    } else {
        gauss_legendre(
            orders.theta,
            region.theta_start,
            region.theta_start + region.theta_len,
        )?
    }
    .into_iter()
    .map(|(th, w)| (th, w * HAAR_NORMALIZATION))
    .collect();
    Ok(SE2Quadrature {
        region: *region,
        orders,
        spatial,
        angular,
    })
}

fn check_finite_at(value: Complex64, node: &GroupElement) -> Result<Complex64> {
    if value.re.is_finite() && value.im.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteAtNode {
            node: *node,
            value: value.to_string(),
        })
    }
}

/// `∫ f dg` over the quadrature's region.
pub fn integrate_se2<F>(f: F, q: &SE2Quadrature) -> Result<Complex64>
where
    F: Fn(&GroupElement) -> Complex64,
{
    let mut acc = Complex64::new(0.0, 0.0);
    for (g, w) in q.nodes() {
        acc += check_finite_at(f(&g), &g)? * w;
    }
    Ok(acc)
}

/// Gauss-Legendre rule on `[0, p_max]` for integrals `∫ F(p) p dp`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialGrid {
    p_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    pub fn new(p_max: f64, n: usize) -> Result<Self> {
        if !(p_max > 0.0) || !p_max.is_finite() {
            return Err(Error::NonPositiveFrequency(p_max));
        }
        let pairs = gauss_legendre(n, 0.0, p_max)?;
        Ok(Self {
            p_max,
            nodes: pairs.iter().map(|&(p, _)| p).collect(),
            weights: pairs.iter().map(|&(p, w)| w * p).collect(),
        })
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights with the factor `p` already applied.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum of precomputed values at the nodes.
    pub fn sum(&self, values: &[Complex64]) -> Complex64 {
        values
            .iter()
            .zip(&self.weights)
            .fold(Complex64::new(0.0, 0.0), |acc, (v, w)| acc + v * w)
    }
}

/// `∫₀^{p_max} F(p) p dp`.
pub fn integrate_radial<F>(f: F, grid: &RadialGrid) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let mut acc = Complex64::new(0.0, 0.0);
    for (&p, &w) in grid.nodes.iter().zip(&grid.weights) {
        let v = f(p);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFiniteAtFrequency {
                p,
                value: v.to_string(),
            });
        }
        acc += v * w;
    }
    Ok(acc)
}

/// Audit of the spectral tail at `p_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub peak: f64,
    pub at_p_max: f64,
    pub tail_tol: f64,
    pub ok: bool,
}

impl TailReport {
    /// Compare the magnitude at `p_max` with the peak over the grid.
    pub fn new(values_at_nodes: &[f64], at_p_max: f64, tail_tol: f64) -> Self {
        let peak = values_at_nodes
            .iter()
            .copied()
            .chain(std::iter::once(at_p_max))
            .fold(0.0, f64::max);
        let ok = at_p_max <= tail_tol * peak || peak == 0.0;
        if !ok {
            log::warn!(
                "spectral tail {at_p_max:e} at p_max exceeds {tail_tol:e} x peak {peak:e}"
            );
        }
        Self {
            peak,
            at_p_max,
            tail_tol,
            ok,
        }
    }

    pub fn warning(&self) -> Option<String> {
        (!self.ok).then(|| {
            format!(
                "spectral tail {:e} at p_max exceeds tail_tol {:e} times peak {:e}",
                self.at_p_max, self.tail_tol, self.peak
            )
        })
    }
}
