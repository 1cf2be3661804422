//! Numerical library for Sobolev embeddings `W_0^{1,p} -> L^p` on strip-like
//! domains `R^k x prod (a_i, b_i)`.
//!
//! The crate evaluates the generalized p-trigonometric functions, the exact
//! first eigenvalue of the pseudo-p-Laplacian on rectangles, the operator norm
//! of the embedding, and two computable noncompactness witnesses: a
//! translation argument refuting candidate entropy nets, and an explicit
//! `A I B = id` factorization that certifies lower bounds on isomorphism
//! numbers.
//!
//! Modules:
//! - [`ptrig`]: `pi_p`, `sin_p`, `cos_p` and the inverse arc-length integral.
//! - [`quad`]: Gauss-Legendre composite and tensor-product quadrature.
//! - [`domain`]: strip domains and closed-form embedding constants.
//! - [`extremal`]: extremal functions and Rayleigh quotients by quadrature.
//! - [`eigensolve`]: discrete Rayleigh minimization on rectangles.
//! - [`noncompact`]: net refutation and operator-factorization certificates.
//!
//! With the default `parallel` feature, data-parallel inner loops run on
//! rayon; reductions are chunked in a fixed order so results are bit-identical
//! to the sequential fallback.

// Negated comparisons (`!(x > y)`) are deliberate NaN-rejecting guards, and
// several hot loops index multiple arrays in lockstep.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod domain;
pub mod eigensolve;
pub mod exec;
pub mod extremal;
pub mod noncompact;
pub mod ptrig;
pub mod quad;

pub use domain::{embedding_norm, lambda_closed_form, EmbeddingConstants, StripDomain};
pub use eigensolve::{
    discrete_rayleigh, discrete_rayleigh_gradient, eigenfunction_error, first_eigenpair,
    EigenOptions, EigenResult, GridFunction,
};
pub use extremal::{
    rayleigh, rectangle_maximizer, strip_trial, verify_ul_norms, ExtremalFunction, RayleighReport,
    TrialFunction, UlNormsReport,
};
pub use noncompact::{
    a_operator, a_operator_combination, b_operator, build_translates, certify_isomorphism_bound,
    refute_net, NetCandidate, OperatorCertificate, Refutation, TranslateSystem,
};
pub use ptrig::{pi_p_closed_form, pi_p_quadrature, PExponent};
pub use quad::{integrate_1d, integrate_tensor, QuadratureRule, Rectangle};
