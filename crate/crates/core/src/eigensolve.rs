//! First Dirichlet eigenpair of the pseudo-p-Laplacian on a rectangle by
//! direct minimization of the discrete Rayleigh quotient.
//!
//! The operator `sum_i d/dx_i(|du/dx_i|^(p-2) du/dx_i)` is a sum of
//! one-dimensional pieces, so the discretization uses forward differences
//! per axis with zero (Dirichlet) padding: on interior values `u` the
//! quotient is
//!
//! ```text
//! R(u) = sum_i sum_edges |(u_head - u_tail)/h_i|^p * prod(h)
//!        -----------------------------------------------------
//!                  sum_nodes |u|^p * prod(h)
//! ```
//!
//! Minimization is normalized gradient descent with Armijo backtracking from
//! the all-ones start in the positive cone; the first eigenfunction is the
//! unique positive minimizer, so no globalization is needed.

use thiserror::Error;

use crate::exec;
use crate::extremal::{rectangle_maximizer, TrialFunction};
use crate::ptrig::PExponent;
use crate::quad::Rectangle;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("values length {got} does not match shape product {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("grid shape entries must be at least 7, got {0}")]
    ShapeTooSmall(usize),
    #[error("grid dimension {0} exceeds 4")]
    DimensionCap(usize),
    #[error("function is identically zero")]
    ZeroFunction,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("no convergence after {iterations} iterations; residual {residual:e}")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last: Box<EigenResult>,
    },
}

/// Samples on the interior tensor grid of a rectangle; boundary values are
/// implicitly zero. `spacing[i] = (b_i - a_i) / (shape[i] + 1)`.
#[derive(Debug, Clone)]
pub struct GridFunction {
    rect: Rectangle,
    shape: Vec<usize>,
    values: Vec<f64>,
    spacing: Vec<f64>,
}

impl GridFunction {
    pub fn new(rect: Rectangle, shape: Vec<usize>, values: Vec<f64>) -> Result<Self, EigenError> {
        if shape.len() != rect.dim() || rect.dim() > 4 {
            return Err(EigenError::DimensionCap(shape.len().max(rect.dim())));
        }
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(EigenError::ShapeMismatch {
                expected,
                got: values.len(),
            });
        }
        let spacing = rect
            .intervals()
            .iter()
            .zip(&shape)
            .map(|(&(a, b), &n)| (b - a) / (n + 1) as f64)
            .collect();
        Ok(Self {
            rect,
            shape,
            values,
            spacing,
        })
    }

    pub fn constant(rect: Rectangle, shape: Vec<usize>, c: f64) -> Result<Self, EigenError> {
        let n: usize = shape.iter().product();
        Self::new(rect, shape, vec![c; n])
    }

    /// Sample `f` at the interior nodes.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(
        rect: Rectangle,
        shape: Vec<usize>,
        f: F,
    ) -> Result<Self, EigenError> {
        let n: usize = shape.iter().product();
        let mut g = Self::new(rect, shape, vec![0.0; n])?;
        let mut idx = [0usize; 4];
        let mut x = [0.0f64; 4];
        for flat in 0..n {
            g.decode(flat, &mut idx);
            g.coords(&idx, &mut x);
            g.values[flat] = f(&x[..g.dim()]);
        }
        Ok(g)
    }

    pub fn rect(&self) -> &Rectangle {
        &self.rect
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn decode(&self, mut flat: usize, idx: &mut [usize; 4]) {
        for axis in (0..self.dim()).rev() {
            idx[axis] = flat % self.shape[axis];
            flat /= self.shape[axis];
        }
    }

    fn coords(&self, idx: &[usize; 4], x: &mut [f64; 4]) {
        for axis in 0..self.dim() {
            let (a, _) = self.rect.intervals()[axis];
            x[axis] = a + self.spacing[axis] * (idx[axis] + 1) as f64;
        }
    }

    /// Strides of the row-major layout (last axis contiguous).
    fn strides(&self) -> [usize; 4] {
        let mut s = [0usize; 4];
        let d = self.dim();
        s[d - 1] = 1;
        for axis in (0..d - 1).rev() {
            s[axis] = s[axis + 1] * self.shape[axis + 1];
        }
        s
    }

    /// Discrete `L^p` norm `(sum |u|^p prod h)^(1/p)`.
    pub fn lp_norm(&self, p: &PExponent) -> f64 {
        let cell = self.cell_volume();
        let pw = p.p();
        let sum = exec::chunked_sum(self.len(), |i| self.values[i].abs().powf(pw));
        (sum * cell).powf(1.0 / pw)
    }

    fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }
}

/// Sign-preserving power `|s|^(p-2) s`, with the subgradient choice 0 at 0
/// for p < 2.
#[inline]
fn phi(s: f64, pw: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if pw == 2.0 {
        s
    } else if pw == 3.0 {
        s.abs() * s
    } else if pw == 1.5 {
        s / s.abs().sqrt()
    } else {
        s.abs().powf(pw - 2.0) * s
    }
}

#[inline]
fn abs_pow(s: f64, pw: f64) -> f64 {
    if pw == 2.0 {
        s * s
    } else if pw == 3.0 {
        let a = s.abs();
        a * a * a
    } else if pw == 1.5 {
        let a = s.abs();
        a * a.sqrt()
    } else {
        s.abs().powf(pw)
    }
}

struct Workspace<'a> {
    shape: &'a [usize],
    strides: [usize; 4],
    spacing: &'a [f64],
    cell: f64,
    pw: f64,
}

impl Workspace<'_> {
    fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Numerator and denominator sums of the discrete quotient (without the
    /// common `prod h` factor, which cancels).
    fn parts(&self, v: &[f64]) -> (f64, f64) {
        let dim = self.dim();
        let n = v.len();
        exec::chunked_sum2(n, |flat| {
            let mut idx = [0usize; 4];
            let mut rem = flat;
            for axis in (0..dim).rev() {
                idx[axis] = rem % self.shape[axis];
                rem /= self.shape[axis];
            }
            let u = v[flat];
            let mut num = 0.0;
            for axis in 0..dim {
                let h_inv = 1.0 / self.spacing[axis];
                // Forward edge to the next node (or the zero boundary).
                let fwd = if idx[axis] + 1 < self.shape[axis] {
                    v[flat + self.strides[axis]]
                } else {
                    0.0
                };
                num += abs_pow((fwd - u) * h_inv, self.pw);
                // The leading boundary edge belongs to the first node.
                if idx[axis] == 0 {
                    num += abs_pow(u * h_inv, self.pw);
                }
            }
            (num, abs_pow(u, self.pw))
        })
    }

    fn quotient(&self, v: &[f64]) -> (f64, f64, f64) {
        let (num, den) = self.parts(v);
        (num / den, num, den)
    }

    /// Gradient of the quotient at `v` (quotient value `r`, denominator sum
    /// `den` as returned by [`Workspace::parts`]).
    fn quotient_gradient(&self, v: &[f64], r: f64, den: f64) -> Vec<f64> {
        let dim = self.dim();
        let pw = self.pw;
        exec::map_indexed(v.len(), |flat| {
            let mut idx = [0usize; 4];
            let mut rem = flat;
            for axis in (0..dim).rev() {
                idx[axis] = rem % self.shape[axis];
                rem /= self.shape[axis];
            }
            let u = v[flat];
            let mut dnum = 0.0;
            for axis in 0..dim {
                let h_inv = 1.0 / self.spacing[axis];
                let fwd = if idx[axis] + 1 < self.shape[axis] {
                    v[flat + self.strides[axis]]
                } else {
                    0.0
                };
                let bwd = if idx[axis] > 0 {
                    v[flat - self.strides[axis]]
                } else {
                    0.0
                };
                let hp = h_inv.powf(pw);
                dnum += pw * hp * (phi(u - bwd, pw) - phi(fwd - u, pw));
            }
            let dden = pw * phi(u, pw);
            (dnum - r * dden) / den
        })
    }

    /// Diagonal curvature of the numerator, used to precondition the descent
    /// direction. For p != 2 the edge weights `|d|^(p-2)` vary over orders of
    /// magnitude (degenerating where the minimizer is flat), which stalls the
    /// raw gradient flow; dividing by the local curvature equalizes the
    /// progress. Weights are clamped to keep the direction finite.
    fn curvature_diag(&self, v: &[f64], scale: f64) -> Vec<f64> {
        let dim = self.dim();
        let pw = self.pw;
        // Clamp |d| into [scale*1e-6, inf) before the (p-2) power.
        let floor = scale * 1e-6;
        exec::map_indexed(v.len(), |flat| {
            let mut idx = [0usize; 4];
            let mut rem = flat;
            for axis in (0..dim).rev() {
                idx[axis] = rem % self.shape[axis];
                rem /= self.shape[axis];
            }
            let u = v[flat];
            let mut diag = 0.0;
            for axis in 0..dim {
                let h_inv = 1.0 / self.spacing[axis];
                let fwd = if idx[axis] + 1 < self.shape[axis] {
                    v[flat + self.strides[axis]]
                } else {
                    0.0
                };
                let bwd = if idx[axis] > 0 {
                    v[flat - self.strides[axis]]
                } else {
                    0.0
                };
                let hp = h_inv.powf(pw);
                let wf = (fwd - u).abs().max(floor).powf(pw - 2.0);
                let wb = (u - bwd).abs().max(floor).powf(pw - 2.0);
                diag += pw * (pw - 1.0) * hp * (wf + wb);
            }
            diag
        })
    }
}

/// Discrete Rayleigh quotient of a grid function.
pub fn discrete_rayleigh(u: &GridFunction, p: &PExponent) -> Result<f64, EigenError> {
    if u.values.iter().all(|&v| v == 0.0) {
        return Err(EigenError::ZeroFunction);
    }
    let ws = Workspace {
        shape: &u.shape,
        strides: u.strides(),
        spacing: &u.spacing,
        cell: u.cell_volume(),
        pw: p.p(),
    };
    let (q, _, _) = ws.quotient(&u.values);
    Ok(q)
}

/// Analytic gradient of [`discrete_rayleigh`] with respect to the node
/// values. Exposed for verification against finite differences.
pub fn discrete_rayleigh_gradient(u: &GridFunction, p: &PExponent) -> Result<Vec<f64>, EigenError> {
    if u.values.iter().all(|&v| v == 0.0) {
        return Err(EigenError::ZeroFunction);
    }
    let ws = Workspace {
        shape: &u.shape,
        strides: u.strides(),
        spacing: &u.spacing,
        cell: u.cell_volume(),
        pw: p.p(),
    };
    let (r, _, den) = ws.quotient(&u.values);
    Ok(ws.quotient_gradient(&u.values, r, den))
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Stop when the relative quotient change drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// First eigenvalue/eigenfunction approximation.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub lambda_h: f64,
    /// Normalized (discrete `L^p`), positive at every interior node.
    pub eigenfunction: GridFunction,
    pub iterations: usize,
    /// Last relative quotient change.
    pub residual: f64,
    /// Accepted quotient values per iteration (convergence trace).
    pub history: Vec<f64>,
}

/// Minimize the discrete Rayleigh quotient from the all-ones start by
/// normalized gradient descent with Armijo backtracking (shrink 0.5, slope
/// 1e-4, first trial step 1.0).
pub fn first_eigenpair(
    p: &PExponent,
    rect: &Rectangle,
    shape: &[usize],
    opts: EigenOptions,
) -> Result<EigenResult, EigenError> {
    if !(opts.tol > 0.0) {
        return Err(EigenError::InvalidTolerance(opts.tol));
    }
    if let Some(&bad) = shape.iter().find(|&&n| n < 7) {
        return Err(EigenError::ShapeTooSmall(bad));
    }
    let mut u = GridFunction::constant(rect.clone(), shape.to_vec(), 1.0)?;
    let ws = Workspace {
        shape: &u.shape,
        strides: u.strides(),
        spacing: &u.spacing,
        cell: u.spacing.iter().product(),
        pw: p.p(),
    };
    // Normalize in the discrete L^p once up front.
    let norm0 = (exec::chunked_sum(u.values.len(), |i| abs_pow(u.values[i], ws.pw)) * ws.cell)
        .powf(1.0 / ws.pw);
    for v in &mut u.values {
        *v /= norm0;
    }

    let (mut r, mut _num, mut den) = ws.quotient(&u.values);
    let mut history = Vec::new();
    history.push(r);
    let mut step = 1.0f64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let grad = ws.quotient_gradient(&u.values, r, den);
        // Curvature-preconditioned descent direction.
        let umax = u.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let diag = ws.curvature_diag(&u.values, umax);
        let mut dir = vec![0.0; grad.len()];
        let mut slope = 0.0;
        for i in 0..grad.len() {
            dir[i] = grad[i] / diag[i];
            slope += grad[i] * dir[i];
        }
        if slope == 0.0 {
            residual = 0.0;
            history.push(r);
            break;
        }
        // Armijo backtracking along -dir; the trial step is warm-started
        // from the previous accepted step, doubled, so it can grow to the
        // curvature scale of the slow mode.
        let mut alpha = 2.0 * step;
        let mut accepted = false;
        let mut trial = vec![0.0; u.values.len()];
        let mut r_new = r;
        let mut den_new = den;
        for _ in 0..80 {
            for i in 0..trial.len() {
                trial[i] = u.values[i] - alpha * dir[i];
            }
            let (rt, _numt, dent) = ws.quotient(&trial);
            if rt.is_finite() && rt <= r - 1e-4 * alpha * slope {
                r_new = rt;
                den_new = dent;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Step collapsed to rounding level: the quotient is stationary.
            residual = 0.0;
            history.push(r);
            break;
        }
        step = alpha;
        // Renormalize in the discrete L^p; the quotient is scale invariant.
        let norm = (den_new * ws.cell).powf(1.0 / ws.pw);
        for (v, t) in u.values.iter_mut().zip(&trial) {
            *v = t / norm;
        }
        residual = (r - r_new).abs() / r_new.abs().max(f64::MIN_POSITIVE);
        let converged = residual < opts.tol;
        r = r_new;
        den = den_new / (norm.powf(ws.pw));
        history.push(r);
        if converged {
            let result = EigenResult {
                lambda_h: r,
                eigenfunction: u,
                iterations,
                residual,
                history,
            };
            return Ok(result);
        }
    }

    let result = EigenResult {
        lambda_h: r,
        eigenfunction: u,
        iterations,
        residual,
        history,
    };
    if residual == 0.0 {
        // Stationary to rounding before the tolerance was met formally.
        return Ok(result);
    }
    Err(EigenError::NotConverged {
        iterations,
        residual,
        last: Box::new(result),
    })
}

/// Maximum-norm distance between the computed eigenfunction and the sampled
/// `sin_p` product, after the least-squares optimal positive rescaling.
pub fn eigenfunction_error(res: &EigenResult, p: &PExponent) -> f64 {
    let e = &res.eigenfunction;
    let maximizer = rectangle_maximizer(p, e.rect());
    let mut idx = [0usize; 4];
    let mut x = [0.0f64; 4];
    let mut dot = 0.0;
    let mut mm = 0.0;
    let mut samples = vec![0.0; e.len()];
    for flat in 0..e.len() {
        e.decode(flat, &mut idx);
        e.coords(&idx, &mut x);
        let m = maximizer.value(&x[..e.dim()]);
        samples[flat] = m;
        dot += e.values[flat] * m;
        mm += m * m;
    }
    let scale = dot / mm;
    let mut err: f64 = 0.0;
    for flat in 0..e.len() {
        err = err.max((e.values[flat] - scale * samples[flat]).abs());
    }
    err
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn pe(p: f64) -> PExponent {
        PExponent::new(p).unwrap()
    }

    fn unit_box() -> Rectangle {
        Rectangle::new(vec![(0.0, 1.0)]).unwrap()
    }

    #[test]
    fn single_node_hand_value() {
        // One interior node on (0,1): h = 1/2, edges (1-0)/h and (0-1)/h,
        // numerator (4+4) * 1/2 = 4, denominator 1 * 1/2, quotient 8.
        let u = GridFunction::constant(unit_box(), vec![1], 1.0).unwrap();
        let q = discrete_rayleigh(&u, &pe(2.0)).unwrap();
        assert_abs_diff_eq!(q, 8.0, epsilon = 1e-13);
    }

    #[test]
    fn sine_samples_approach_pi_squared() {
        let n = 999;
        let u = GridFunction::from_fn(unit_box(), vec![n], |x| (PI * x[0]).sin()).unwrap();
        let q = discrete_rayleigh(&u, &pe(2.0)).unwrap();
        // Exact discrete eigenvalue 4/h^2 sin^2(pi h/2).
        let h = 1.0 / (n + 1) as f64;
        let exact = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert_abs_diff_eq!(q, exact, epsilon = 1e-9);
        assert!((q - PI * PI).abs() < 1e-4);
    }

    #[test]
    fn quotient_is_homogeneous() {
        let u = GridFunction::from_fn(unit_box(), vec![31], |x| x[0] * (1.0 - x[0])).unwrap();
        let scaled = GridFunction::new(
            unit_box(),
            vec![31],
            u.values().iter().map(|v| 3.0 * v).collect(),
        )
        .unwrap();
        let p = pe(2.5);
        let a = discrete_rayleigh(&u, &p).unwrap();
        let b = discrete_rayleigh(&scaled, &p).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn zero_function_rejected() {
        let u = GridFunction::constant(unit_box(), vec![9], 0.0).unwrap();
        assert!(matches!(
            discrete_rayleigh(&u, &pe(2.0)),
            Err(EigenError::ZeroFunction)
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for p in [1.5, 2.0, 3.0] {
            let pexp = pe(p);
            let rect = Rectangle::new(vec![(0.0, 1.0), (0.0, 2.0)]).unwrap();
            let shape = vec![9, 11];
            let u = GridFunction::from_fn(rect.clone(), shape.clone(), |x| {
                1.0 + 0.5 * (3.0 * x[0]).sin() * (2.0 * x[1]).cos()
            })
            .unwrap();
            let grad = discrete_rayleigh_gradient(&u, &pexp).unwrap();
            let h = 1e-6;
            for _ in 0..20 {
                let node = rng.gen_range(0..u.len());
                let mut up = u.clone();
                up.values[node] += h;
                let mut dn = u.clone();
                dn.values[node] -= h;
                let fd = (discrete_rayleigh(&up, &pexp).unwrap()
                    - discrete_rayleigh(&dn, &pexp).unwrap())
                    / (2.0 * h);
                let denom = grad[node].abs().max(1e-6);
                assert!(
                    ((grad[node] - fd) / denom).abs() < 1e-6,
                    "p = {p}, node {node}: analytic {} vs fd {fd}",
                    grad[node]
                );
            }
        }
    }

    #[test]
    fn solver_converges_p2_1d() {
        let res = first_eigenpair(&pe(2.0), &unit_box(), &[255], EigenOptions::default()).unwrap();
        assert!(
            (res.lambda_h - PI * PI).abs() < 2e-4,
            "lambda {}",
            res.lambda_h
        );
        // Descent monotonicity.
        assert!(res.history.windows(2).all(|w| w[1] <= w[0] + 1e-13));
        // Positivity of the minimizer.
        assert!(res.eigenfunction.values().iter().all(|&v| v > 0.0));
        // Eigenfunction matches sine samples.
        assert!(eigenfunction_error(&res, &pe(2.0)) <= 1e-3);
    }

    #[test]
    fn solver_rejects_bad_input() {
        assert!(matches!(
            first_eigenpair(&pe(2.0), &unit_box(), &[5], EigenOptions::default()),
            Err(EigenError::ShapeTooSmall(5))
        ));
        assert!(first_eigenpair(
            &pe(2.0),
            &unit_box(),
            &[31],
            EigenOptions {
                tol: 0.0,
                max_iter: 10
            }
        )
        .is_err());
    }

    #[test]
    fn non_convergence_carries_last_iterate() {
        let err = first_eigenpair(
            &pe(2.0),
            &unit_box(),
            &[63],
            EigenOptions {
                tol: 1e-14,
                max_iter: 3,
            },
        )
        .unwrap_err();
        match err {
            EigenError::NotConverged {
                iterations, last, ..
            } => {
                assert_eq!(iterations, 3);
                assert!(last.lambda_h.is_finite());
                assert_eq!(last.history.len(), 4);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn p3_converges_to_closed_form_on_modest_grid() {
        let p = pe(3.0);
        let res = first_eigenpair(&p, &unit_box(), &[127], EigenOptions::default()).unwrap();
        let d = crate::domain::StripDomain::new(0, vec![(0.0, 1.0)]).unwrap();
        let lam = crate::domain::lambda_closed_form(&p, &d);
        assert!(
            (res.lambda_h - lam).abs() / lam < 0.01,
            "lambda_h {} vs {}",
            res.lambda_h,
            lam
        );
    }
}
