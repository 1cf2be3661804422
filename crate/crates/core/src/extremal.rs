//! Extremal functions of the embedding and Rayleigh quotients by quadrature.
//!
//! Two families matter here: the rectangle maximizer
//! `u(x) = prod_i sin_p(pi_p (x_i - a_i)/(b_i - a_i))`, which attains the
//! embedding norm on a rectangle and is the first eigenfunction of the
//! pseudo-p-Laplacian, and the strip trial family `u_l` whose free-axis
//! factors `sin_p(pi_p x_j / l)` live on `(-l, l)` (period `2l`, vanishing at
//! `-l`, `0`, `l`), extended by zero. The quotient of `u_l` exceeds the
//! infimum `lambda` by exactly `pi_p^p (p-1) k / l^p`.
//!
//! Quadrature cells are aligned with the quarter-period lattice of every
//! factor so that the mild kinks of `|sin_p|^p` and `|cos_p|^p` sit on cell
//! boundaries.

use thiserror::Error;

use crate::domain::StripDomain;
use crate::ptrig::PExponent;
use crate::quad::{AxisPartition, QuadError, QuadratureRule, Rectangle, TensorGrid};

/// Hard cap on trial-function dimension (matches the tensor quadrature cap).
const MAX_DIM: usize = 8;

/// A value with its one-refinement quadrature error estimate.
pub type Estimated = (f64, f64);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtremalError {
    #[error("strip trial requires at least one free axis")]
    NeedFreeAxis,
    #[error("free-axis half width must be positive and finite, got {0}")]
    InvalidHalfWidth(f64),
    #[error("resolution must be at least 8, got {0}")]
    ResolutionTooSmall(usize),
    #[error("dimension mismatch: function has {function}, box has {box_dim}")]
    DimensionMismatch { function: usize, box_dim: usize },
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// A function on a box that quadrature can evaluate, with a gradient and
/// optional kink locations for cell alignment.
pub trait TrialFunction: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Gradient at `x` into `out`. The default is a central finite
    /// difference with the caller-chosen step; analytic implementations
    /// ignore `fd_step`.
    fn gradient(&self, x: &[f64], fd_step: f64, out: &mut [f64]) {
        let dim = self.dim();
        let mut buf = [0.0f64; MAX_DIM];
        buf[..dim].copy_from_slice(x);
        for i in 0..dim {
            buf[i] = x[i] + fd_step;
            let hi = self.value(&buf[..dim]);
            buf[i] = x[i] - fd_step;
            let lo = self.value(&buf[..dim]);
            buf[i] = x[i];
            out[i] = (hi - lo) / (2.0 * fd_step);
        }
    }

    /// Interior points along `axis` where the integrand is not smooth;
    /// quadrature aligns cell boundaries with them.
    fn axis_breakpoints(&self, _axis: usize) -> Vec<f64> {
        Vec::new()
    }
}

/// One tensor factor `sin_p(omega (x - origin))` supported on `[lo, hi]`
/// (before translation).
#[derive(Debug, Clone)]
struct AxisFactor {
    omega: f64,
    origin: f64,
    lo: f64,
    hi: f64,
}

/// Product of scaled `sin_p` factors on a box, extended by zero; optionally
/// translated per axis and scaled by a positive amplitude.
#[derive(Debug, Clone)]
pub struct ExtremalFunction {
    p: PExponent,
    axes: Vec<AxisFactor>,
    shifts: Vec<f64>,
    amplitude: f64,
}

/// The unique positive maximizer on a rectangle (up to scale):
/// `prod_i sin_p(pi_p (x_i - a_i)/(b_i - a_i))`.
pub fn rectangle_maximizer(p: &PExponent, r: &Rectangle) -> ExtremalFunction {
    let axes = r
        .intervals()
        .iter()
        .map(|&(a, b)| AxisFactor {
            omega: p.pi_p() / (b - a),
            origin: a,
            lo: a,
            hi: b,
        })
        .collect::<Vec<_>>();
    let dim = axes.len();
    ExtremalFunction {
        p: p.clone(),
        axes,
        shifts: vec![0.0; dim],
        amplitude: 1.0,
    }
}

/// The strip trial `u_l` on `D_l = (-l, l)^k x prod (a_i, b_i)`: free-axis
/// factors `sin_p(pi_p x_j / l)` (vanishing at `-l`, `0`, `l`), bounded-axis
/// factors as on the rectangle, zero outside.
pub fn strip_trial(
    p: &PExponent,
    d: &StripDomain,
    l: f64,
) -> Result<ExtremalFunction, ExtremalError> {
    if d.free_axes() == 0 {
        return Err(ExtremalError::NeedFreeAxis);
    }
    if !(l.is_finite() && l > 0.0) {
        return Err(ExtremalError::InvalidHalfWidth(l));
    }
    let mut axes = Vec::with_capacity(d.dim());
    for _ in 0..d.free_axes() {
        axes.push(AxisFactor {
            omega: p.pi_p() / l,
            origin: 0.0,
            lo: -l,
            hi: l,
        });
    }
    for &(a, b) in d.intervals() {
        axes.push(AxisFactor {
            omega: p.pi_p() / (b - a),
            origin: a,
            lo: a,
            hi: b,
        });
    }
    let dim = axes.len();
    Ok(ExtremalFunction {
        p: p.clone(),
        axes,
        shifts: vec![0.0; dim],
        amplitude: 1.0,
    })
}

impl ExtremalFunction {
    pub fn p(&self) -> &PExponent {
        &self.p
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    /// Same function scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.amplitude *= c;
        out
    }

    /// Same function translated by `by` (componentwise).
    pub fn translated(&self, by: &[f64]) -> Self {
        assert_eq!(by.len(), self.dim());
        let mut out = self.clone();
        for (s, b) in out.shifts.iter_mut().zip(by) {
            *s += b;
        }
        out
    }

    /// Support box after translation.
    pub fn support(&self) -> Rectangle {
        Rectangle::new(
            self.axes
                .iter()
                .zip(&self.shifts)
                .map(|(ax, s)| (ax.lo + s, ax.hi + s))
                .collect(),
        )
        .expect("factor intervals are valid")
    }

    /// Quarter-period lattice of the factor on `axis` (interior points of
    /// the support interval): the zeros and extrema of the factor.
    fn quarter_points(&self, axis: usize) -> Vec<f64> {
        let ax = &self.axes[axis];
        let shift = self.shifts[axis];
        let quarter = 0.5 * self.p.pi_p() / ax.omega;
        let mut points = Vec::new();
        let mut t = ax.origin + quarter;
        // Walk the lattice from the factor origin; support is a whole number
        // of quarter periods by construction.
        while t < ax.hi - 0.25 * quarter {
            if t > ax.lo + 0.25 * quarter {
                points.push(t + shift);
            }
            t += quarter;
        }
        points
    }

    fn factor_arg(&self, axis: usize, x: f64) -> f64 {
        let ax = &self.axes[axis];
        ax.omega * (x - self.shifts[axis] - ax.origin)
    }

    fn in_support(&self, x: &[f64]) -> bool {
        self.axes
            .iter()
            .zip(&self.shifts)
            .zip(x)
            .all(|((ax, s), &xi)| xi >= ax.lo + s && xi <= ax.hi + s)
    }

    /// Tabulate factor values and derivatives at the grid's axis nodes.
    /// Entry `a` holds `(sin_p(arg), omega * cos_p(arg))` per node.
    fn tables(&self, grid: &TensorGrid) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..self.dim())
            .map(|a| {
                let omega = self.axes[a].omega;
                let mut s = Vec::with_capacity(grid.axis_nodes(a).len());
                let mut d = Vec::with_capacity(grid.axis_nodes(a).len());
                for &x in grid.axis_nodes(a) {
                    let (sv, cv) = self.p.sin_cos_p(self.factor_arg(a, x));
                    s.push(sv);
                    d.push(omega * cv);
                }
                (s, d)
            })
            .collect()
    }

    fn partitions(&self, cells_per_quarter: usize) -> Result<Vec<AxisPartition>, ExtremalError> {
        (0..self.dim())
            .map(|a| {
                let (lo, hi) = (
                    self.axes[a].lo + self.shifts[a],
                    self.axes[a].hi + self.shifts[a],
                );
                AxisPartition::from_breakpoints(lo, hi, &self.quarter_points(a), cells_per_quarter)
                    .map_err(ExtremalError::from)
            })
            .collect()
    }

    /// Precompute the kink-aligned node grid and per-axis factor tables for
    /// repeated integration over the support. `resolution` is the cell count
    /// per half period of each factor.
    pub fn tabulated(&self, resolution: usize) -> Result<TabulatedExtremal, ExtremalError> {
        self.tabulated_cells(cells_per_quarter(resolution)?)
    }

    fn tabulated_cells(
        &self,
        cells_per_quarter: usize,
    ) -> Result<TabulatedExtremal, ExtremalError> {
        let rule = QuadratureRule::gauss_legendre(16)?;
        let parts = self.partitions(cells_per_quarter)?;
        let grid = TensorGrid::new(&parts, &rule)?;
        let tables = self.tables(&grid);
        Ok(TabulatedExtremal {
            grid,
            tables,
            amplitude: self.amplitude,
            p: self.p.p(),
            dim: self.dim(),
        })
    }

    /// `(int |u|^p, int |grad u|_{l^p}^p)` over the support at the given
    /// quarter-period subdivision.
    fn norms_at(&self, cells_per_quarter: usize) -> Result<(f64, f64), ExtremalError> {
        Ok(self.tabulated_cells(cells_per_quarter)?.norm_parts())
    }

    /// `int |u|^p` with a one-refinement error estimate.
    pub fn lp_norm_p(&self, resolution: usize) -> Result<Estimated, ExtremalError> {
        let cpq = cells_per_quarter(resolution)?;
        let (coarse, _) = self.norms_at(cpq / 2)?;
        let (fine, _) = self.norms_at(cpq)?;
        Ok((fine, (fine - coarse).abs()))
    }

    /// `(int |u|^p, int |grad u|^p)` with error estimates.
    pub fn w1p_norm_parts(
        &self,
        resolution: usize,
    ) -> Result<(Estimated, Estimated), ExtremalError> {
        let cpq = cells_per_quarter(resolution)?;
        let (den_c, num_c) = self.norms_at(cpq / 2)?;
        let (den_f, num_f) = self.norms_at(cpq)?;
        Ok((
            (den_f, (den_f - den_c).abs()),
            (num_f, (num_f - num_c).abs()),
        ))
    }

    /// Rayleigh report via the tabulated product structure (fast path; the
    /// generic [`rayleigh`] agrees with it).
    pub fn rayleigh_report(&self, resolution: usize) -> Result<RayleighReport, ExtremalError> {
        let cpq = cells_per_quarter(resolution)?;
        let (den_c, num_c) = self.norms_at(cpq / 2)?;
        let (den_f, num_f) = self.norms_at(cpq)?;
        let quotient = num_f / den_f;
        let quad_error = (quotient - num_c / den_c).abs();
        Ok(RayleighReport {
            grad_norm_p: num_f,
            func_norm_p: den_f,
            quotient,
            quad_error,
        })
    }
}

fn cells_per_quarter(resolution: usize) -> Result<usize, ExtremalError> {
    if resolution < 8 {
        return Err(ExtremalError::ResolutionTooSmall(resolution));
    }
    Ok((resolution / 2).max(4))
}

fn decode_flat(grid: &TensorGrid, mut flat: usize, idx: &mut [usize]) {
    for axis in (0..idx.len()).rev() {
        let n = grid.axis_nodes(axis).len();
        idx[axis] = flat % n;
        flat /= n;
    }
}

fn grid_weight(grid: &TensorGrid, axis: usize, i: usize) -> f64 {
    grid.axis_weights(axis)[i]
}

/// Reusable quadrature grid over the support of an [`ExtremalFunction`] with
/// the factor values and derivatives tabulated per axis node. Integrals over
/// the same function at the same resolution share this (norms, norming
/// functionals, margins).
pub struct TabulatedExtremal {
    grid: TensorGrid,
    /// Per axis: `(sin_p(arg), omega * cos_p(arg))` at every node.
    tables: Vec<(Vec<f64>, Vec<f64>)>,
    amplitude: f64,
    p: f64,
    dim: usize,
}

impl TabulatedExtremal {
    pub fn node_count(&self) -> usize {
        self.grid.len()
    }

    /// `int f(x, u(x)) dx` over the support.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64], f64) -> f64 + Sync + Send,
    {
        let dim = self.dim;
        crate::exec::chunked_sum(self.grid.len(), |flat| {
            let mut idx = [0usize; 4];
            decode_flat(&self.grid, flat, &mut idx[..dim]);
            let mut w = 1.0;
            let mut x = [0.0f64; 4];
            let mut u = self.amplitude;
            for a in 0..dim {
                w *= grid_weight(&self.grid, a, idx[a]);
                x[a] = self.grid.axis_nodes(a)[idx[a]];
                u *= self.tables[a].0[idx[a]];
            }
            w * f(&x[..dim], u)
        })
    }

    /// `(int |u|^p, int |grad u|_{l^p}^p)` over the support.
    pub fn norm_parts(&self) -> (f64, f64) {
        let dim = self.dim;
        let p = self.p;
        let amp = self.amplitude.abs();
        crate::exec::chunked_sum2(self.grid.len(), |flat| {
            let mut idx = [0usize; 4];
            decode_flat(&self.grid, flat, &mut idx[..dim]);
            let mut s = [0.0f64; 4];
            let mut dv = [0.0f64; 4];
            let mut w = 1.0;
            for a in 0..dim {
                s[a] = self.tables[a].0[idx[a]];
                dv[a] = self.tables[a].1[idx[a]];
                w *= grid_weight(&self.grid, a, idx[a]);
            }
            let mut full = amp;
            for sa in s.iter().take(dim) {
                full *= sa;
            }
            let den_term = full.abs().powf(p);
            let mut num_term = 0.0;
            for a in 0..dim {
                let mut others = amp;
                for b in 0..dim {
                    if b != a {
                        others *= s[b];
                    }
                }
                num_term += (dv[a] * others).abs().powf(p);
            }
            (w * den_term, w * num_term)
        })
    }
}

impl TrialFunction for ExtremalFunction {
    fn dim(&self) -> usize {
        self.axes.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        if !self.in_support(x) {
            return 0.0;
        }
        let mut v = self.amplitude;
        for (a, &xi) in x.iter().enumerate() {
            v *= self.p.sin_p(self.factor_arg(a, xi));
        }
        v
    }

    fn gradient(&self, x: &[f64], _fd_step: f64, out: &mut [f64]) {
        let dim = self.dim();
        if !self.in_support(x) {
            out[..dim].fill(0.0);
            return;
        }
        let mut s = [0.0f64; MAX_DIM];
        let mut d = [0.0f64; MAX_DIM];
        for a in 0..dim {
            let (sv, cv) = self.p.sin_cos_p(self.factor_arg(a, x[a]));
            s[a] = sv;
            d[a] = self.axes[a].omega * cv;
        }
        for a in 0..dim {
            let mut g = self.amplitude * d[a];
            for b in 0..dim {
                if b != a {
                    g *= s[b];
                }
            }
            out[a] = g;
        }
    }

    fn axis_breakpoints(&self, axis: usize) -> Vec<f64> {
        self.quarter_points(axis)
    }
}

/// Numerator, denominator, quotient and quadrature error estimate of the
/// Rayleigh quotient `||grad u||_p^p / ||u||_p^p`.
#[derive(Debug, Clone, Copy)]
pub struct RayleighReport {
    /// `|| |grad u|_{l^p} ||_{L^p}^p`
    pub grad_norm_p: f64,
    /// `|| u ||_{L^p}^p`
    pub func_norm_p: f64,
    pub quotient: f64,
    /// One-refinement estimate of the absolute quadrature error of the
    /// quotient.
    pub quad_error: f64,
}

/// Rayleigh quotient of an arbitrary trial function over `domain_box` by
/// tensor quadrature with kink-aligned cells. Gradients use the trial
/// function's own path (analytic for [`ExtremalFunction`], central finite
/// differences with step `1e-5 * min_side` by default).
pub fn rayleigh<T: TrialFunction + ?Sized>(
    u: &T,
    domain_box: &Rectangle,
    p: &PExponent,
    resolution: usize,
) -> Result<RayleighReport, ExtremalError> {
    if u.dim() != domain_box.dim() {
        return Err(ExtremalError::DimensionMismatch {
            function: u.dim(),
            box_dim: domain_box.dim(),
        });
    }
    let cpq = cells_per_quarter(resolution)?;
    let (den_c, num_c) = rayleigh_pass(u, domain_box, p, cpq / 2)?;
    let (den_f, num_f) = rayleigh_pass(u, domain_box, p, cpq)?;
    let quotient = num_f / den_f;
    Ok(RayleighReport {
        grad_norm_p: num_f,
        func_norm_p: den_f,
        quotient,
        quad_error: (quotient - num_c / den_c).abs(),
    })
}

fn rayleigh_pass<T: TrialFunction + ?Sized>(
    u: &T,
    domain_box: &Rectangle,
    p: &PExponent,
    cells_per_segment: usize,
) -> Result<(f64, f64), ExtremalError> {
    let rule = QuadratureRule::gauss_legendre(16)?;
    let parts: Vec<AxisPartition> = domain_box
        .intervals()
        .iter()
        .enumerate()
        .map(|(axis, &(a, b))| {
            AxisPartition::from_breakpoints(a, b, &u.axis_breakpoints(axis), cells_per_segment)
        })
        .collect::<Result<_, _>>()?;
    let grid = TensorGrid::new(&parts, &rule)?;
    let min_side = domain_box
        .intervals()
        .iter()
        .map(|&(a, b)| b - a)
        .fold(f64::INFINITY, f64::min);
    let fd_step = 1e-5 * min_side;
    let pw = p.p();
    let dim = u.dim();
    let (den, num) = grid.integrate_points2(|x| {
        let v = u.value(x);
        let mut g = [0.0f64; MAX_DIM];
        u.gradient(x, fd_step, &mut g[..dim]);
        let mut num_term = 0.0;
        for gi in g.iter().take(dim) {
            num_term += gi.abs().powf(pw);
        }
        (v.abs().powf(pw), num_term)
    });
    Ok((den, num))
}

/// Closed form `||u_l||_p^p = (2l/p)^k prod (b_i - a_i)/p`.
pub fn ul_lp_norm_closed(p: &PExponent, d: &StripDomain, l: f64) -> f64 {
    let k = d.free_axes() as i32;
    let mut v = (2.0 * l / p.p()).powi(k);
    for &(a, b) in d.intervals() {
        v *= (b - a) / p.p();
    }
    v
}

/// Closed form
/// `|| |grad u_l| ||_p^p = pi_p^p / (p' p^(n-k-1)) (2l/p)^k (prod L_i)
///  (k/l^p + sum L_i^-p)`.
pub fn ul_grad_norm_closed(p: &PExponent, d: &StripDomain, l: f64) -> f64 {
    let k = d.free_axes();
    let pw = p.p();
    let mut prod_l = 1.0;
    let mut sum_inv = 0.0;
    for &(a, b) in d.intervals() {
        prod_l *= b - a;
        sum_inv += (b - a).powf(-pw);
    }
    let lead = p.pi_p().powf(pw) / (p.conjugate() * pw.powi(d.intervals().len() as i32 - 1));
    lead * (2.0 * l / pw).powi(k as i32) * prod_l * (k as f64 / l.powf(pw) + sum_inv)
}

/// Quadrature values of `||u_l||_p^p` and `|| |grad u_l| ||_p^p` next to
/// their closed forms, with absolute differences and quadrature error
/// estimates.
#[derive(Debug, Clone, Copy)]
pub struct UlNormsReport {
    pub func_norm_quad: f64,
    pub grad_norm_quad: f64,
    pub func_norm_closed: f64,
    pub grad_norm_closed: f64,
    pub func_abs_diff: f64,
    pub grad_abs_diff: f64,
    pub func_quad_error: f64,
    pub grad_quad_error: f64,
}

/// Verify the exact norms of the strip trial `u_l` against quadrature.
pub fn verify_ul_norms(
    p: &PExponent,
    d: &StripDomain,
    l: f64,
    resolution: usize,
) -> Result<UlNormsReport, ExtremalError> {
    let u = strip_trial(p, d, l)?;
    let ((func_q, func_err), (grad_q, grad_err)) = u.w1p_norm_parts(resolution)?;
    let func_c = ul_lp_norm_closed(p, d, l);
    let grad_c = ul_grad_norm_closed(p, d, l);
    Ok(UlNormsReport {
        func_norm_quad: func_q,
        grad_norm_quad: grad_q,
        func_norm_closed: func_c,
        grad_norm_closed: grad_c,
        func_abs_diff: (func_q - func_c).abs(),
        grad_abs_diff: (grad_q - grad_c).abs(),
        func_quad_error: func_err,
        grad_quad_error: grad_err,
    })
}

/// Polynomial bump `amp * prod_i phi_i(x_i)^{e_i} (1 + tau_i t_i)` on a box,
/// vanishing on the boundary, zero outside; `phi_i` is the normalized
/// parabola `(x - a)(b - x) / ((b-a)/2)^2` and `t_i = (x_i - mid_i)/(b_i -
/// a_i)`. Gradient is analytic.
#[derive(Debug, Clone)]
pub struct PolyBump {
    bbox: Rectangle,
    amplitude: f64,
    exponents: Vec<u32>,
    tilts: Vec<f64>,
}

impl PolyBump {
    pub fn new(
        bbox: Rectangle,
        amplitude: f64,
        exponents: Vec<u32>,
        tilts: Vec<f64>,
    ) -> Result<Self, ExtremalError> {
        let dim = bbox.dim();
        if exponents.len() != dim || tilts.len() != dim {
            return Err(ExtremalError::DimensionMismatch {
                function: exponents.len().max(tilts.len()),
                box_dim: dim,
            });
        }
        Ok(Self {
            bbox,
            amplitude,
            exponents,
            tilts,
        })
    }

    /// The zero function with a declared bounding box.
    pub fn zero(bbox: Rectangle) -> Self {
        let dim = bbox.dim();
        Self {
            bbox,
            amplitude: 0.0,
            exponents: vec![1; dim],
            tilts: vec![0.0; dim],
        }
    }

    /// Random bump with exponents in `{1, 2}`, tilt in `[-0.9, 0.9]` and
    /// amplitude in `[0.2, 2]`.
    pub fn random<R: rand::Rng>(bbox: Rectangle, rng: &mut R) -> Self {
        let dim = bbox.dim();
        let exponents = (0..dim).map(|_| rng.gen_range(1..=2)).collect();
        let tilts = (0..dim).map(|_| rng.gen_range(-0.9..0.9)).collect();
        let amplitude = rng.gen_range(0.2..2.0);
        Self {
            bbox,
            amplitude,
            exponents,
            tilts,
        }
    }

    pub fn bounding_box(&self) -> &Rectangle {
        &self.bbox
    }

    fn factor(&self, axis: usize, x: f64) -> (f64, f64) {
        // Returns (factor value, factor derivative).
        let (a, b) = self.bbox.intervals()[axis];
        let half = 0.5 * (b - a);
        let scale = half * half;
        let phi = (x - a) * (b - x) / scale;
        let dphi = (a + b - 2.0 * x) / scale;
        let t = (x - 0.5 * (a + b)) / (b - a);
        let tilt = 1.0 + self.tilts[axis] * t;
        let dtilt = self.tilts[axis] / (b - a);
        let e = self.exponents[axis];
        let phe = phi.powi(e as i32);
        let val = phe * tilt;
        let deriv = if e == 1 {
            dphi * tilt + phi * dtilt
        } else {
            e as f64 * phi.powi(e as i32 - 1) * dphi * tilt + phe * dtilt
        };
        (val, deriv)
    }
}

impl TrialFunction for PolyBump {
    fn dim(&self) -> usize {
        self.bbox.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        if !self.bbox.contains(x) {
            return 0.0;
        }
        let mut v = self.amplitude;
        for (a, &xi) in x.iter().enumerate() {
            v *= self.factor(a, xi).0;
        }
        v
    }

    fn gradient(&self, x: &[f64], _fd_step: f64, out: &mut [f64]) {
        let dim = self.dim();
        if !self.bbox.contains(x) {
            out[..dim].fill(0.0);
            return;
        }
        let mut vals = [0.0f64; MAX_DIM];
        let mut ders = [0.0f64; MAX_DIM];
        for a in 0..dim {
            let (v, d) = self.factor(a, x[a]);
            vals[a] = v;
            ders[a] = d;
        }
        for a in 0..dim {
            let mut g = self.amplitude * ders[a];
            for b in 0..dim {
                if b != a {
                    g *= vals[b];
                }
            }
            out[a] = g;
        }
    }
}

/// Pointwise linear combination of trial functions of equal dimension.
pub struct WeightedSum<'a> {
    terms: Vec<(f64, &'a dyn TrialFunction)>,
    dim: usize,
}

impl<'a> WeightedSum<'a> {
    pub fn new(terms: Vec<(f64, &'a dyn TrialFunction)>) -> Self {
        let dim = terms.first().map_or(0, |(_, f)| f.dim());
        assert!(terms.iter().all(|(_, f)| f.dim() == dim));
        Self { terms, dim }
    }
}

impl TrialFunction for WeightedSum<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(x)).sum()
    }

    fn gradient(&self, x: &[f64], fd_step: f64, out: &mut [f64]) {
        let dim = self.dim;
        out[..dim].fill(0.0);
        let mut buf = [0.0f64; MAX_DIM];
        for (c, f) in &self.terms {
            f.gradient(x, fd_step, &mut buf[..dim]);
            for i in 0..dim {
                out[i] += c * buf[i];
            }
        }
    }

    fn axis_breakpoints(&self, axis: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .terms
            .iter()
            .flat_map(|(_, f)| f.axis_breakpoints(axis))
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::lambda_closed_form;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn pe(p: f64) -> PExponent {
        PExponent::new(p).unwrap()
    }

    #[test]
    fn maximizer_points_and_support() {
        let p2 = pe(2.0);
        let r = Rectangle::new(vec![(0.0, PI)]).unwrap();
        let u = rectangle_maximizer(&p2, &r);
        assert_abs_diff_eq!(u.value(&[PI / 2.0]), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.value(&[1.0]), 1.0f64.sin(), epsilon = 1e-11);
        assert_eq!(u.value(&[-0.5]), 0.0);
        assert_eq!(u.value(&[4.0]), 0.0);

        let r2 = Rectangle::new(vec![(0.0, PI), (0.0, PI)]).unwrap();
        let u2 = rectangle_maximizer(&p2, &r2);
        assert_abs_diff_eq!(u2.value(&[PI / 2.0, PI / 2.0]), 1.0, epsilon = 1e-12);

        let p3 = pe(3.0);
        let r3 = Rectangle::new(vec![(0.0, 1.0)]).unwrap();
        let u3 = rectangle_maximizer(&p3, &r3);
        assert_eq!(u3.value(&[0.5]), 1.0); // sin_3(pi_3/2) = 1 exactly
    }

    #[test]
    fn maximizer_positive_inside() {
        let p = pe(1.5);
        let r = Rectangle::new(vec![(0.0, 2.0), (1.0, 3.0)]).unwrap();
        let u = rectangle_maximizer(&p, &r);
        for i in 1..10 {
            for j in 1..10 {
                let x = [2.0 * i as f64 / 10.0, 1.0 + 2.0 * j as f64 / 10.0];
                assert!(u.value(&x) > 0.0, "not positive at {x:?}");
            }
        }
    }

    #[test]
    fn strip_trial_structure() {
        let p = pe(2.0);
        let d = StripDomain::new(1, vec![(0.0, PI)]).unwrap();
        let u = strip_trial(&p, &d, PI).unwrap();
        // u_l(pi/2, pi/2) = sin(pi/2) sin(pi/2) = 1.
        assert_abs_diff_eq!(u.value(&[PI / 2.0, PI / 2.0]), 1.0, epsilon = 1e-12);
        // Vanishes on the boundary of D_l and on the interior hyperplane x = 0.
        for x in [-PI, 0.0, PI] {
            assert!(u.value(&[x, 1.0]).abs() <= 1e-12);
        }
        assert!(u.value(&[1.0, 0.0]).abs() <= 1e-12);
        // Negative on the negative free half-axis.
        assert!(u.value(&[-PI / 2.0, PI / 2.0]) < 0.0);
        // Rejections.
        assert!(strip_trial(&p, &d, 0.0).is_err());
        let rect_only = StripDomain::new(0, vec![(0.0, 1.0)]).unwrap();
        assert!(strip_trial(&p, &rect_only, 1.0).is_err());
    }

    #[test]
    fn ul_closed_norms_match_quadrature() {
        let p = pe(2.0);
        let d = StripDomain::new(1, vec![(0.0, PI)]).unwrap();
        let rep = verify_ul_norms(&p, &d, PI, 32).unwrap();
        // (2l/p)^k prod L/p = pi * pi/2 and grad norm pi^2.
        assert_abs_diff_eq!(rep.func_norm_closed, PI * PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.grad_norm_closed, PI * PI, epsilon = 1e-12);
        assert!(rep.func_abs_diff <= 1e-8, "func diff {}", rep.func_abs_diff);
        assert!(rep.grad_abs_diff <= 1e-7, "grad diff {}", rep.grad_abs_diff);
    }

    #[test]
    fn ul_quadrature_diff_shrinks_under_refinement() {
        let p = pe(1.5);
        let d = StripDomain::new(1, vec![(0.0, PI)]).unwrap();
        let coarse = verify_ul_norms(&p, &d, PI, 16).unwrap();
        let fine = verify_ul_norms(&p, &d, PI, 32).unwrap();
        assert!(
            fine.func_abs_diff < coarse.func_abs_diff,
            "{} !< {}",
            fine.func_abs_diff,
            coarse.func_abs_diff
        );
        assert!(fine.grad_abs_diff < coarse.grad_abs_diff);
    }

    #[test]
    fn rayleigh_of_maximizer_equals_lambda() {
        let p = pe(2.0);
        let r = Rectangle::new(vec![(0.0, PI)]).unwrap();
        let u = rectangle_maximizer(&p, &r);
        let rep = u.rayleigh_report(32).unwrap();
        assert_abs_diff_eq!(rep.quotient, 1.0, epsilon = 1e-8);

        let p3 = pe(3.0);
        let r01 = Rectangle::new(vec![(0.0, 1.0)]).unwrap();
        let u3 = rectangle_maximizer(&p3, &r01);
        let rep3 = u3.rayleigh_report(32).unwrap();
        let d = StripDomain::new(0, vec![(0.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(rep3.quotient, lambda_closed_form(&p3, &d), epsilon = 1e-6);
    }

    #[test]
    fn rayleigh_of_strip_trial() {
        let p = pe(2.0);
        let d = StripDomain::new(1, vec![(0.0, PI)]).unwrap();
        let u = strip_trial(&p, &d, PI).unwrap();
        let rep = u.rayleigh_report(32).unwrap();
        assert_abs_diff_eq!(rep.quotient, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(rep.func_norm_p, PI * PI / 2.0, epsilon = 1e-8);
    }

    #[test]
    fn generic_path_agrees_with_tabulated_path() {
        let p = pe(1.5);
        let d = StripDomain::new(1, vec![(0.0, 2.0)]).unwrap();
        let u = strip_trial(&p, &d, 1.0).unwrap();
        let fast = u.rayleigh_report(16).unwrap();
        let generic = rayleigh(&u, &u.support(), &p, 16).unwrap();
        assert_abs_diff_eq!(fast.quotient, generic.quotient, epsilon = 1e-10);
        assert_abs_diff_eq!(fast.func_norm_p, generic.func_norm_p, epsilon = 1e-10);
        assert_abs_diff_eq!(fast.grad_norm_p, generic.grad_norm_p, epsilon = 1e-10);
    }

    #[test]
    fn quotient_is_scale_invariant() {
        let p = pe(3.0);
        let r = Rectangle::new(vec![(0.0, 1.0)]).unwrap();
        let u = rectangle_maximizer(&p, &r);
        let base = u.rayleigh_report(16).unwrap();
        for c in [0.1, 2.0, 9.7] {
            let scaled = u.scaled(c).rayleigh_report(16).unwrap();
            assert_abs_diff_eq!(scaled.quotient, base.quotient, epsilon = 1e-12);
        }
    }

    #[test]
    fn report_quotient_consistent() {
        let p = pe(2.0);
        let d = StripDomain::new(1, vec![(0.0, PI)]).unwrap();
        let rep = strip_trial(&p, &d, 2.0 * PI)
            .unwrap()
            .rayleigh_report(16)
            .unwrap();
        assert_abs_diff_eq!(
            rep.quotient,
            rep.grad_norm_p / rep.func_norm_p,
            epsilon = 1e-14
        );
        assert!(rep.grad_norm_p > 0.0 && rep.func_norm_p > 0.0);
    }

    #[test]
    fn bump_gradient_matches_finite_difference() {
        let bbox = Rectangle::new(vec![(0.0, 2.0), (-1.0, 1.0)]).unwrap();
        let bump = PolyBump::new(bbox, 1.3, vec![2, 1], vec![0.4, -0.2]).unwrap();
        let x = [0.7, 0.3];
        let mut analytic = [0.0f64; 2];
        bump.gradient(&x, 0.0, &mut analytic);
        let h = 1e-6;
        for i in 0..2 {
            let mut hi = x;
            hi[i] += h;
            let mut lo = x;
            lo[i] -= h;
            let fd = (bump.value(&hi) - bump.value(&lo)) / (2.0 * h);
            assert_abs_diff_eq!(analytic[i], fd, epsilon = 1e-7);
        }
        assert_eq!(bump.value(&[5.0, 0.0]), 0.0);
    }

    #[test]
    fn low_resolution_rejected() {
        let p = pe(2.0);
        let r = Rectangle::new(vec![(0.0, 1.0)]).unwrap();
        let u = rectangle_maximizer(&p, &r);
        assert!(matches!(
            u.rayleigh_report(4),
            Err(ExtremalError::ResolutionTooSmall(4))
        ));
    }
}
