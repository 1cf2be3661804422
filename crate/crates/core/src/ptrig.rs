//! Generalized p-trigonometric functions.
//!
//! For `p > 1`, `sin_p` on `[0, pi_p/2]` is the inverse of the arc-length
//! integral `F(t) = int_0^t (1 - s^p)^(-1/p) ds`, extended to the real line by
//! the reflection `sin_p(t) = sin_p(pi_p - t)`, oddness, and `2*pi_p`
//! periodicity; `cos_p` is its derivative. The half-period constant is
//! `pi_p = 2 F(1) = 2*pi / (p sin(pi/p))`.
//!
//! `F` has an integrable singularity at `t = 1`. The reusable evaluation path
//! accumulates per-exponent cumulative tables over a mesh that is uniform on
//! `[0, 1/2]` and dyadic towards 1, with the integrand evaluated in terms of
//! the distance `1 - s` so no precision is lost at the endpoint; the one-shot
//! [`pi_p_quadrature`] uses a tanh-sinh (double exponential) transformation
//! for the same reason.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::quad::QuadratureRule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PtrigError {
    #[error("exponent must be a finite real > 1, got {0}")]
    InvalidExponent(f64),
    #[error("argument {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("singular quadrature did not reach tolerance {tol:e}; last update {achieved:e}")]
    NoConvergence { tol: f64, achieved: f64 },
}

/// Residual tolerance of the `sin_p` inversion, `|F(sin_p(x)) - x|`.
pub const INVERSION_TOL: f64 = 1e-12;

/// Validated exponent `p` with its conjugate `p' = p/(p-1)` and the cached
/// half-period constant `pi_p`.
///
/// Construction rejects `p <= 1` and non-finite values. Values are immutable
/// and cheap to clone; the arc-integral table is built lazily and shared.
#[derive(Debug, Clone)]
pub struct PExponent {
    p: f64,
    p_conj: f64,
    pi_p: f64,
    table: Arc<OnceLock<ArcTable>>,
}

impl PExponent {
    pub fn new(p: f64) -> Result<Self, PtrigError> {
        if !p.is_finite() || p <= 1.0 {
            return Err(PtrigError::InvalidExponent(p));
        }
        let p_conj = p / (p - 1.0);
        let pi_p = pi_p_closed_form(p)?;
        #[cfg(debug_assertions)]
        if p >= 1.05 {
            // Double bookkeeping on the core constant: the closed form must
            // agree with the singular quadrature. Below p = 1.05 the
            // singular mass exceeds the fixed node budget, so the check is
            // skipped there.
            let q = pi_p_quadrature(p).expect("pi_p quadrature convergence");
            debug_assert!(
                (q - pi_p).abs() <= 1e-9 * pi_p,
                "pi_p mismatch at p = {p}: closed {pi_p}, quadrature {q}"
            );
        }
        Ok(Self {
            p,
            p_conj,
            pi_p,
            table: Arc::new(OnceLock::new()),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Conjugate exponent `p' = p/(p-1)`, so `1/p + 1/p' = 1`.
    pub fn conjugate(&self) -> f64 {
        self.p_conj
    }

    /// Half period of `sin_p`.
    pub fn pi_p(&self) -> f64 {
        self.pi_p
    }

    fn table(&self) -> &ArcTable {
        self.table
            .get_or_init(|| ArcTable::build(self.p, self.pi_p))
    }

    /// Arc-length integral `F(t) = int_0^t (1 - s^p)^(-1/p) ds` on `[0, 1]`.
    ///
    /// `F(0) = 0`, `F(1) = pi_p/2`, strictly increasing; absolute error below
    /// `1e-12`.
    pub fn arc_integral(&self, t: f64) -> Result<f64, PtrigError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(PtrigError::OutOfDomain(t));
        }
        Ok(self.table().eval(t))
    }

    /// `sin_p(x)` for any finite `x` (NaN propagates).
    pub fn sin_p(&self, x: f64) -> f64 {
        self.sin_cos_p(x).0
    }

    /// `cos_p(x) = d/dx sin_p(x)`.
    ///
    /// On the first quarter period this is `(1 - sin_p(x)^p)^(1/p)`; signs
    /// follow from the periodic extension. Near `x = pi_p/2` the result is
    /// accurate to about `1e-9` absolutely.
    pub fn cos_p(&self, x: f64) -> f64 {
        self.sin_cos_p(x).1
    }

    /// Both `sin_p(x)` and `cos_p(x)` from one argument reduction.
    pub fn sin_cos_p(&self, x: f64) -> (f64, f64) {
        if x.is_nan() {
            return (f64::NAN, f64::NAN);
        }
        // Canonical reduction order: modulo 2*pi_p first, then oddness, then
        // reflection, so results are reproducible bit for bit.
        let two_pi = 2.0 * self.pi_p;
        let mut y = x.rem_euclid(two_pi);
        if y >= self.pi_p {
            y -= two_pi;
        }
        let mut sign_sin = 1.0;
        if y < 0.0 {
            sign_sin = -1.0;
            y = -y;
        }
        let mut sign_cos = 1.0;
        let half = 0.5 * self.pi_p;
        if y > half {
            sign_cos = -1.0;
            y = self.pi_p - y;
        }
        let s = self.table().invert(y);
        let c = one_minus_pow(s, self.p).powf(1.0 / self.p);
        (sign_sin * s, sign_cos * c)
    }
}

/// `1 - t^p` for `t in [0, 1]`, evaluated without cancellation near `t = 1`.
fn one_minus_pow(t: f64, p: f64) -> f64 {
    if t <= 0.5 {
        1.0 - t.powf(p)
    } else {
        let d = 1.0 - t; // exact for t >= 0.5
        -f64::exp_m1(p * f64::ln_1p(-d))
    }
}

/// Integrand `(1 - s^p)^(-1/p)` given `s` directly (left half of `[0, 1]`).
fn integrand_left(s: f64, p: f64) -> f64 {
    (1.0 - s.powf(p)).powf(-1.0 / p)
}

/// Integrand given the distance `d = 1 - s` (right half; `d` carries the
/// precision near the singular endpoint).
fn integrand_right(d: f64, p: f64) -> f64 {
    (-f64::exp_m1(p * f64::ln_1p(-d))).powf(-1.0 / p)
}

/// Closed form `pi_p = 2*pi / (p sin(pi/p))`.
pub fn pi_p_closed_form(p: f64) -> Result<f64, PtrigError> {
    if !p.is_finite() || p <= 1.0 {
        return Err(PtrigError::InvalidExponent(p));
    }
    // sin(pi/p) = sin(pi/p'); evaluate at the smaller argument, which is
    // accurate when p is close to 1.
    let p_conj = p / (p - 1.0);
    let arg = PI / p.max(p_conj);
    Ok(2.0 * PI / (p * arg.sin()))
}

/// `pi_p = 2 int_0^1 (1 - s^p)^(-1/p) ds` by tanh-sinh quadrature.
///
/// Absolute error at most `1e-10`; errors if `p <= 1` or the node budget is
/// exhausted before the tolerance is met.
pub fn pi_p_quadrature(p: f64) -> Result<f64, PtrigError> {
    if !p.is_finite() || p <= 1.0 {
        return Err(PtrigError::InvalidExponent(p));
    }
    let (half, _err) = tanh_sinh_unit(
        |s, d| {
            if s <= 0.5 {
                integrand_left(s, p)
            } else {
                integrand_right(d, p)
            }
        },
        1e-12,
        12,
    )?;
    Ok(2.0 * half)
}

/// Tanh-sinh quadrature of `f` over `(0, 1)`; `f(s, 1 - s)` receives both the
/// point and its distance to 1, each computed stably. Returns the value and
/// the last level-to-level update as error estimate.
fn tanh_sinh_unit<F>(f: F, tol: f64, max_level: usize) -> Result<(f64, f64), PtrigError>
where
    F: Fn(f64, f64) -> f64,
{
    const T_MAX: f64 = 6.0;
    let mut h = 1.0;
    let mut total = 0.0;
    let mut prev = f64::NAN;
    let mut err = f64::INFINITY;
    for level in 0..=max_level {
        if level > 0 {
            h *= 0.5;
        }
        let mut sum = 0.0;
        let mut j: u64 = if level == 0 { 0 } else { 1 };
        let step: u64 = if level == 0 { 1 } else { 2 };
        loop {
            let t = j as f64 * h;
            if t > T_MAX {
                break;
            }
            let u = 0.5 * PI * t.sinh();
            if u > 350.0 {
                break;
            }
            // sigma = (1 + tanh u)/2 and 1 - sigma, both to full precision.
            let sig = 1.0 / (1.0 + (-2.0 * u).exp());
            let om = 1.0 / (1.0 + (2.0 * u).exp());
            let cu = u.cosh();
            let w = 0.25 * PI * t.cosh() / (cu * cu);
            if om > 0.0 {
                sum += w * f(sig, om);
                if t > 0.0 {
                    sum += w * f(om, sig);
                }
            }
            j += step;
        }
        total = if level == 0 {
            sum * h
        } else {
            0.5 * total + sum * h
        };
        if level >= 2 {
            err = (total - prev).abs();
            if err <= tol * total.abs().max(1.0) {
                return Ok((total, err));
            }
        }
        prev = total;
    }
    Err(PtrigError::NoConvergence { tol, achieved: err })
}

/// Per-exponent cumulative table for the arc-length integral.
///
/// The integrand has the singularity at `s = 1` and, for non-integer `p`, a
/// branch point at `s = 0` (the `s^p` term). The mesh is therefore dyadic
/// towards both endpoints: boundaries `2^-e` descending to `2^-53` on the
/// left and `1 - 2^-m` down to the ulp below 1 on the right. Every cell then
/// keeps the nearest singular point at least one cell length away, so a fixed
/// 16-node Gauss-Legendre rule per cell is accurate to machine precision.
#[derive(Debug)]
struct ArcTable {
    p: f64,
    half_pi_p: f64,
    /// `cum_left[e - 1] = F(2^-e)` for `e = 1..=53`.
    cum_left: Vec<f64>,
    /// `cum_b[i] = F(1 - 2^-(i+1))` for `i = 0..=52`.
    cum_b: Vec<f64>,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

const DYADIC_DEPTH: usize = 53; // 2^-53 is one ulp below 1 in the d variable

impl ArcTable {
    fn build(p: f64, pi_p: f64) -> Self {
        let rule = QuadratureRule::gauss_legendre(16).expect("static rule");
        let gl_nodes = rule.nodes().to_vec();
        let gl_weights = rule.weights().to_vec();
        let mut table = Self {
            p,
            half_pi_p: 0.5 * pi_p,
            cum_left: vec![0.0; DYADIC_DEPTH],
            cum_b: Vec::with_capacity(DYADIC_DEPTH),
            gl_nodes,
            gl_weights,
        };
        // Left zone, ascending from the closing sliver [0, 2^-53].
        let mut acc = table.cell_left(0.0, (2.0f64).powi(-(DYADIC_DEPTH as i32)));
        table.cum_left[DYADIC_DEPTH - 1] = acc;
        for e in (1..DYADIC_DEPTH).rev() {
            let hi = (2.0f64).powi(-(e as i32));
            acc += table.cell_left(0.5 * hi, hi);
            table.cum_left[e - 1] = acc;
        }
        // Right zone, from F(1/2) towards 1 in the distance variable.
        table.cum_b.push(acc); // F(1/2), d = 2^-1
        for m in 1..DYADIC_DEPTH {
            // Cell from d = 2^-m down to d = 2^-(m+1).
            let d_hi = (2.0f64).powi(-(m as i32));
            let d_lo = 0.5 * d_hi;
            acc += table.cell_right(d_lo, d_hi);
            table.cum_b.push(acc);
        }
        table
    }

    /// GL16 over `[a, b]` in the `s` variable (zone A only).
    fn cell_left(&self, a: f64, b: f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = 0.0;
        for (x, w) in self.gl_nodes.iter().zip(&self.gl_weights) {
            sum += w * integrand_left(mid + half * x, self.p);
        }
        sum * half
    }

    /// GL16 over `[d_lo, d_hi]` in the distance variable `d = 1 - s`.
    fn cell_right(&self, d_lo: f64, d_hi: f64) -> f64 {
        let mid = 0.5 * (d_lo + d_hi);
        let half = 0.5 * (d_hi - d_lo);
        let mut sum = 0.0;
        for (x, w) in self.gl_nodes.iter().zip(&self.gl_weights) {
            sum += w * integrand_right(mid + half * x, self.p);
        }
        sum * half
    }

    /// `F(t)` for `t in [0, 1]`.
    fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return self.half_pi_p;
        }
        if t <= 0.5 {
            let lowest = (2.0f64).powi(-(DYADIC_DEPTH as i32));
            if t <= lowest {
                return self.cell_left(0.0, t);
            }
            // t in [2^-(e+1), 2^-e]; integrate up from the stored 2^-(e+1).
            let e = ((-t.log2()).floor() as usize).clamp(1, DYADIC_DEPTH - 1);
            let lo = (2.0f64).powi(-(e as i32 + 1));
            self.cum_left[e] + self.cell_left(lo, t)
        } else {
            let d = 1.0 - t; // exact: t >= 1/2
                             // d in (2^-(m+1), 2^-m]; the table stores F at d = 2^-m.
            let m = ((-d.log2()).floor() as usize).clamp(1, DYADIC_DEPTH - 1);
            let d_hi = (2.0f64).powi(-(m as i32));
            self.cum_b[m - 1] + self.cell_right(d, d_hi)
        }
    }

    /// `F'(t) = (1 - t^p)^(-1/p)`.
    fn derivative_inv(&self, t: f64) -> f64 {
        // Newton step factor 1/F'(t); stays finite as t -> 1.
        one_minus_pow(t, self.p).powf(1.0 / self.p)
    }

    /// Solve `F(t) = x` for `x in [0, pi_p/2]`: bracketed bisection to 1e-3,
    /// then Newton steps `t <- t - (F(t) - x) (1 - t^p)^(1/p)`, falling back
    /// to bisection whenever Newton leaves the bracket.
    fn invert(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.half_pi_p {
            return 1.0;
        }
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut t = 0.5 * (lo + hi);
        let mut best = t;
        let mut best_resid = f64::INFINITY;
        for _ in 0..64 {
            let resid = self.eval(t) - x;
            if resid.abs() < best_resid {
                best_resid = resid.abs();
                best = t;
            }
            if resid.abs() <= INVERSION_TOL {
                return t;
            }
            if resid < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= f64::EPSILON * hi.max(1e-300) {
                // Bracket at floating-point resolution; the flat cap of
                // sin_p near its maximum cannot be resolved further.
                break;
            }
            let step = resid * self.derivative_inv(t);
            let next = t - step;
            t = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
        }
        best
    }
}
