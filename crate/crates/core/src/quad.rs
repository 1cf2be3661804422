//! Composite Gauss-Legendre quadrature on intervals and rectangles.
//!
//! Rules live on the reference interval `[-1, 1]` (weights sum to 2) and are
//! applied per cell. Tensor-product integration over a [`Rectangle`] walks
//! the flattened cell/node grid with the deterministic chunked reduction from
//! [`crate::exec`], so parallel and sequential runs agree bitwise.

use thiserror::Error;

use crate::exec;

/// Cap on the dimension of tensor-product integration.
pub const MAX_TENSOR_DIM: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature rule order must be in 1..=64, got {0}")]
    InvalidOrder(usize),
    #[error("interval must satisfy a < b with finite endpoints, got ({0}, {1})")]
    InvalidInterval(f64, f64),
    #[error("cell count must be at least 1")]
    NoCells,
    #[error("rectangle must have at least one interval")]
    EmptyRectangle,
    #[error("tensor integration supports dimension <= {MAX_TENSOR_DIM}, got {0}")]
    DimensionCap(usize),
    #[error("axis partition needs at least two strictly increasing boundaries")]
    InvalidPartition,
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
}

impl QuadratureRule {
    /// Gauss-Legendre rule with `order` nodes, exact for polynomials of
    /// degree `2*order - 1`. Nodes are found by Newton iteration on the
    /// Legendre recurrence.
    pub fn gauss_legendre(order: usize) -> Result<Self, QuadError> {
        if order == 0 || order > 64 {
            return Err(QuadError::InvalidOrder(order));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self {
            nodes,
            weights,
            order,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Axis-aligned box `prod (a_i, b_i)` with finite edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Rectangle {
    intervals: Vec<(f64, f64)>,
}

impl Rectangle {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self, QuadError> {
        if intervals.is_empty() {
            return Err(QuadError::EmptyRectangle);
        }
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(QuadError::InvalidInterval(a, b));
            }
        }
        Ok(Self { intervals })
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(|&(a, b)| b - a).product()
    }

    /// True if `x` lies in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self
                .intervals
                .iter()
                .zip(x)
                .all(|(&(a, b), &xi)| xi >= a && xi <= b)
    }

    /// True if the open interiors of `self` and `other` intersect.
    pub fn intersects(&self, other: &Rectangle) -> bool {
        self.dim() == other.dim()
            && self
                .intervals
                .iter()
                .zip(other.intervals.iter())
                .all(|(&(a, b), &(c, d))| a < d && c < b)
    }
}

/// Strictly increasing cell boundaries along one axis.
#[derive(Debug, Clone)]
pub struct AxisPartition {
    boundaries: Vec<f64>,
}

impl AxisPartition {
    pub fn uniform(a: f64, b: f64, cells: usize) -> Result<Self, QuadError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(QuadError::InvalidInterval(a, b));
        }
        if cells == 0 {
            return Err(QuadError::NoCells);
        }
        let mut boundaries = Vec::with_capacity(cells + 1);
        for j in 0..=cells {
            boundaries.push(a + (b - a) * j as f64 / cells as f64);
        }
        boundaries[0] = a;
        boundaries[cells] = b;
        Ok(Self { boundaries })
    }

    /// Partition `[a, b]` so that each segment delimited by the interior
    /// `breakpoints` (those strictly inside the interval) is split into
    /// `cells_per_segment` uniform cells. Keeps integrand kinks on cell
    /// boundaries.
    pub fn from_breakpoints(
        a: f64,
        b: f64,
        breakpoints: &[f64],
        cells_per_segment: usize,
    ) -> Result<Self, QuadError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(QuadError::InvalidInterval(a, b));
        }
        if cells_per_segment == 0 {
            return Err(QuadError::NoCells);
        }
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|&t| t > a && t < b)
            .collect();
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        cuts.dedup();
        let mut boundaries = Vec::new();
        let mut lo = a;
        for hi in cuts.into_iter().chain(std::iter::once(b)) {
            for j in 0..cells_per_segment {
                boundaries.push(lo + (hi - lo) * j as f64 / cells_per_segment as f64);
            }
            lo = hi;
        }
        boundaries.push(b);
        Ok(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn cells(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Split every cell in two (one refinement step).
    pub fn refined(&self) -> Self {
        let mut boundaries = Vec::with_capacity(2 * self.cells() + 1);
        for w in self.boundaries.windows(2) {
            boundaries.push(w[0]);
            boundaries.push(0.5 * (w[0] + w[1]));
        }
        boundaries.push(*self.boundaries.last().unwrap());
        Self { boundaries }
    }
}

/// Tensor-product node/weight grid over a rectangle, one node list per axis.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    nodes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

impl TensorGrid {
    pub fn new(partitions: &[AxisPartition], rule: &QuadratureRule) -> Result<Self, QuadError> {
        if partitions.is_empty() {
            return Err(QuadError::EmptyRectangle);
        }
        if partitions.len() > MAX_TENSOR_DIM {
            return Err(QuadError::DimensionCap(partitions.len()));
        }
        let mut nodes = Vec::with_capacity(partitions.len());
        let mut weights = Vec::with_capacity(partitions.len());
        for part in partitions {
            if part.boundaries.len() < 2 || part.boundaries.windows(2).any(|w| w[0] >= w[1]) {
                return Err(QuadError::InvalidPartition);
            }
            let mut ax_nodes = Vec::with_capacity(part.cells() * rule.order());
            let mut ax_weights = Vec::with_capacity(part.cells() * rule.order());
            for w in part.boundaries.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                let half = 0.5 * (w[1] - w[0]);
                for (x, wt) in rule.nodes().iter().zip(rule.weights()) {
                    ax_nodes.push(mid + half * x);
                    ax_weights.push(half * wt);
                }
            }
            nodes.push(ax_nodes);
            weights.push(ax_weights);
        }
        Ok(Self { nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn axis_nodes(&self, axis: usize) -> &[f64] {
        &self.nodes[axis]
    }

    pub fn axis_weights(&self, axis: usize) -> &[f64] {
        &self.weights[axis]
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn decode(&self, mut flat: usize, idx: &mut [usize]) {
        for axis in (0..self.dim()).rev() {
            let n = self.nodes[axis].len();
            idx[axis] = flat % n;
            flat /= n;
        }
    }

    /// Integrate `f` given per-axis node indices. `f` receives indices into
    /// [`TensorGrid::axis_nodes`].
    pub fn integrate_indexed<F>(&self, f: F) -> f64
    where
        F: Fn(&[usize]) -> f64 + Sync + Send,
    {
        let dim = self.dim();
        exec::chunked_sum(self.len(), |flat| {
            let mut idx = [0usize; MAX_TENSOR_DIM];
            self.decode(flat, &mut idx[..dim]);
            let mut w = 1.0;
            for axis in 0..dim {
                w *= self.weights[axis][idx[axis]];
            }
            w * f(&idx[..dim])
        })
    }

    /// Sequential reference path for [`TensorGrid::integrate_indexed`];
    /// bit-identical by construction.
    pub fn integrate_indexed_seq<F>(&self, f: F) -> f64
    where
        F: Fn(&[usize]) -> f64,
    {
        let dim = self.dim();
        exec::chunked_sum_seq(self.len(), |flat| {
            let mut idx = [0usize; MAX_TENSOR_DIM];
            self.decode(flat, &mut idx[..dim]);
            let mut w = 1.0;
            for axis in 0..dim {
                w *= self.weights[axis][idx[axis]];
            }
            w * f(&idx[..dim])
        })
    }

    /// Integrate `f` at grid points given by coordinates.
    pub fn integrate_points<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let dim = self.dim();
        self.integrate_indexed(|idx| {
            let mut x = [0.0f64; MAX_TENSOR_DIM];
            for axis in 0..dim {
                x[axis] = self.nodes[axis][idx[axis]];
            }
            f(&x[..dim])
        })
    }

    /// Integrate two functions of the same grid point in one sweep.
    pub fn integrate_points2<F>(&self, f: F) -> (f64, f64)
    where
        F: Fn(&[f64]) -> (f64, f64) + Sync + Send,
    {
        let dim = self.dim();
        exec::chunked_sum2(self.len(), |flat| {
            let mut idx = [0usize; MAX_TENSOR_DIM];
            self.decode(flat, &mut idx[..dim]);
            let mut w = 1.0;
            let mut x = [0.0f64; MAX_TENSOR_DIM];
            for axis in 0..dim {
                w *= self.weights[axis][idx[axis]];
                x[axis] = self.nodes[axis][idx[axis]];
            }
            let (u, v) = f(&x[..dim]);
            (w * u, w * v)
        })
    }
}

/// Composite quadrature of `f` over `(a, b)` with `cells` equal cells.
pub fn integrate_1d<F>(
    f: F,
    a: f64,
    b: f64,
    cells: usize,
    rule: &QuadratureRule,
) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let part = AxisPartition::uniform(a, b, cells)?;
    let grid = TensorGrid::new(std::slice::from_ref(&part), rule)?;
    Ok(grid.integrate_points(|x| f(x[0])))
}

/// Like [`integrate_1d`] but also returns a Richardson-style error estimate
/// from one refinement step: the refined value and `|I_h - I_{h/2}|`.
pub fn integrate_1d_with_error<F>(
    f: F,
    a: f64,
    b: f64,
    cells: usize,
    rule: &QuadratureRule,
) -> Result<(f64, f64), QuadError>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let coarse = integrate_1d(&f, a, b, cells, rule)?;
    let fine = integrate_1d(&f, a, b, 2 * cells, rule)?;
    Ok((fine, (fine - coarse).abs()))
}

/// Tensor-product composite quadrature over a rectangle with
/// `cells_per_axis` equal cells along every axis.
pub fn integrate_tensor<F>(
    f: F,
    rect: &Rectangle,
    cells_per_axis: usize,
    rule: &QuadratureRule,
) -> Result<f64, QuadError>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if rect.dim() > MAX_TENSOR_DIM {
        return Err(QuadError::DimensionCap(rect.dim()));
    }
    let parts: Vec<AxisPartition> = rect
        .intervals()
        .iter()
        .map(|&(a, b)| AxisPartition::uniform(a, b, cells_per_axis))
        .collect::<Result<_, _>>()?;
    let grid = TensorGrid::new(&parts, rule)?;
    Ok(grid.integrate_points(f))
}

/// [`integrate_tensor`] with a one-refinement error estimate.
pub fn integrate_tensor_with_error<F>(
    f: F,
    rect: &Rectangle,
    cells_per_axis: usize,
    rule: &QuadratureRule,
) -> Result<(f64, f64), QuadError>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let coarse = integrate_tensor(&f, rect, cells_per_axis, rule)?;
    let fine = integrate_tensor(&f, rect, 2 * cells_per_axis, rule)?;
    Ok((fine, (fine - coarse).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn gl16() -> QuadratureRule {
        QuadratureRule::gauss_legendre(16).unwrap()
    }

    #[test]
    fn rule_weights_sum_to_two() {
        for order in [1, 2, 3, 5, 8, 16, 32, 64] {
            let rule = QuadratureRule::gauss_legendre(order).unwrap();
            let sum: f64 = rule.weights().iter().sum();
            assert_abs_diff_eq!(sum, 2.0, epsilon = 1e-12);
            assert_eq!(rule.nodes().len(), rule.weights().len());
            assert!(rule.nodes().windows(2).all(|w| w[0] < w[1]));
        }
        assert!(QuadratureRule::gauss_legendre(0).is_err());
        assert!(QuadratureRule::gauss_legendre(65).is_err());
    }

    #[test]
    fn rule_is_exact_for_polynomials() {
        // order n integrates x^(2n-1) exactly on [-1, 1] (odd -> 0) and x^(2n-2).
        let rule = QuadratureRule::gauss_legendre(5).unwrap();
        let moment = |k: u32| -> f64 {
            rule.nodes()
                .iter()
                .zip(rule.weights())
                .map(|(x, w)| w * x.powi(k as i32))
                .sum()
        };
        assert_abs_diff_eq!(moment(8), 2.0 / 9.0, epsilon = 1e-14);
        assert_abs_diff_eq!(moment(9), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn constant_over_interval() {
        let v = integrate_1d(|_| 1.0, 0.0, PI, 4, &gl16()).unwrap();
        assert_abs_diff_eq!(v, PI, epsilon = 1e-13);
    }

    #[test]
    fn sine_squared_over_half_period() {
        let v = integrate_1d(|x| x.sin().powi(2), 0.0, PI, 4, &gl16()).unwrap();
        assert_abs_diff_eq!(v, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_interval_and_cells() {
        assert!(integrate_1d(|_| 1.0, 1.0, 1.0, 4, &gl16()).is_err());
        assert!(integrate_1d(|_| 1.0, 2.0, 1.0, 4, &gl16()).is_err());
        assert!(integrate_1d(|_| 1.0, 0.0, 1.0, 0, &gl16()).is_err());
    }

    #[test]
    fn tensor_constant_and_separable() {
        let rect = Rectangle::new(vec![(0.0, 1.0), (0.0, 2.0)]).unwrap();
        let v = integrate_tensor(|_| 1.0, &rect, 3, &gl16()).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-13);

        // f(x, y) = g(x) h(y) factorizes.
        let g = |x: f64| (x * x + 0.5).ln();
        let h = |y: f64| (1.0 + y).sqrt();
        let prod = integrate_tensor(|x| g(x[0]) * h(x[1]), &rect, 8, &gl16()).unwrap();
        let gx = integrate_1d(g, 0.0, 1.0, 8, &gl16()).unwrap();
        let hy = integrate_1d(h, 0.0, 2.0, 8, &gl16()).unwrap();
        assert_abs_diff_eq!(prod, gx * hy, epsilon = 1e-12);
    }

    #[test]
    fn p_sine_power_over_half_period() {
        // int_0^2 |sin_1.5(pi_1.5 x / 2)|^1.5 dx = (b - a)/p = 4/3.
        let p = crate::ptrig::PExponent::new(1.5).unwrap();
        let omega = p.pi_p() / 2.0;
        let v = integrate_1d(
            |x| p.sin_p(omega * x).abs().powf(1.5),
            0.0,
            2.0,
            64,
            &gl16(),
        )
        .unwrap();
        assert_abs_diff_eq!(v, 4.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn tensor_product_of_sines() {
        let rect = Rectangle::new(vec![(0.0, PI), (0.0, PI)]).unwrap();
        let v = integrate_tensor(|x| (x[0].sin() * x[1].sin()).powi(2), &rect, 6, &gl16()).unwrap();
        assert_abs_diff_eq!(v, PI * PI / 4.0, epsilon = 1e-11);
    }

    #[test]
    fn dimension_cap_enforced() {
        let rect = Rectangle::new(vec![(0.0, 1.0); 5]).unwrap();
        assert_eq!(
            integrate_tensor(|_| 1.0, &rect, 1, &gl16()),
            Err(QuadError::DimensionCap(5))
        );
    }

    #[test]
    fn partition_from_breakpoints_keeps_cuts() {
        let part = AxisPartition::from_breakpoints(0.0, 4.0, &[2.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(part.cells(), 6);
        assert!(part.boundaries().contains(&1.0));
        assert!(part.boundaries().contains(&2.0));
        let refined = part.refined();
        assert_eq!(refined.cells(), 12);
    }

    #[test]
    fn richardson_estimate_bounds_actual_error() {
        let (v, err) = integrate_1d_with_error(|x: f64| x.exp(), 0.0, 1.0, 1, &gl16()).unwrap();
        let exact = 1.0f64.exp() - 1.0;
        assert!((v - exact).abs() <= err.max(1e-14));
    }

    #[test]
    fn indexed_and_point_paths_agree_bitwise() {
        let parts = [
            AxisPartition::uniform(0.0, 1.0, 7).unwrap(),
            AxisPartition::uniform(-1.0, 2.0, 5).unwrap(),
        ];
        let grid = TensorGrid::new(&parts, &gl16()).unwrap();
        let f = |x: &[f64]| (x[0] - x[1]).cos() * x[0].exp();
        let par = grid.integrate_points(f);
        let seq = grid.integrate_indexed_seq(|idx| {
            f(&[grid.axis_nodes(0)[idx[0]], grid.axis_nodes(1)[idx[1]]])
        });
        assert_eq!(par.to_bits(), seq.to_bits());
    }
}
