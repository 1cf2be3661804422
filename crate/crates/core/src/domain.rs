//! Strip-like domains `R^k x prod (a_i, b_i)` and the closed-form embedding
//! constants.
//!
//! On such a domain the canonical embedding `W_0^{1,p} -> L^p` has norm
//! `(1 + lambda)^(-1/p)` where `lambda = pi_p^p (p-1) sum (b_i - a_i)^-p` is
//! the infimum of the Rayleigh quotient; the free factor `R^k` does not enter
//! the constant.

use thiserror::Error;

use crate::ptrig::PExponent;
use crate::quad::Rectangle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("strip domain needs at least one bounded interval")]
    NoBoundedInterval,
    #[error("interval must satisfy a < b with finite endpoints, got ({0}, {1})")]
    InvalidInterval(f64, f64),
}

/// Domain `R^k x prod_{i=1}^{n-k} (a_i, b_i)`; `k = 0` is a bounded
/// rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct StripDomain {
    free_axes: usize,
    intervals: Vec<(f64, f64)>,
}

impl StripDomain {
    pub fn new(free_axes: usize, intervals: Vec<(f64, f64)>) -> Result<Self, DomainError> {
        if intervals.is_empty() {
            return Err(DomainError::NoBoundedInterval);
        }
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(DomainError::InvalidInterval(a, b));
            }
        }
        Ok(Self {
            free_axes,
            intervals,
        })
    }

    /// Number of unbounded axes `k`.
    pub fn free_axes(&self) -> usize {
        self.free_axes
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Total dimension `n = k + #intervals`.
    pub fn dim(&self) -> usize {
        self.free_axes + self.intervals.len()
    }

    /// The bounded factor as a rectangle.
    pub fn bounded_box(&self) -> Rectangle {
        Rectangle::new(self.intervals.clone()).expect("validated at construction")
    }
}

/// The infimum `lambda` of the Rayleigh quotient and the embedding norm
/// `(1 + lambda)^(-1/p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConstants {
    pub lambda: f64,
    pub norm: f64,
}

/// `lambda = pi_p^p (p-1) sum_i (b_i - a_i)^-p`; independent of the number of
/// free axes.
pub fn lambda_closed_form(p: &PExponent, d: &StripDomain) -> f64 {
    let sum: f64 = d
        .intervals()
        .iter()
        .map(|&(a, b)| (b - a).powf(-p.p()))
        .sum();
    p.pi_p().powf(p.p()) * (p.p() - 1.0) * sum
}

/// Norm of the canonical embedding together with `lambda`.
pub fn embedding_norm(p: &PExponent, d: &StripDomain) -> EmbeddingConstants {
    let lambda = lambda_closed_form(p, d);
    EmbeddingConstants {
        lambda,
        norm: (1.0 + lambda).powf(-1.0 / p.p()),
    }
}
