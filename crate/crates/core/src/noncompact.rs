//! Computable noncompactness witnesses for the embedding on a strip.
//!
//! Two mechanisms, both driven by translates of a normalized strip trial
//! function along the free axes:
//!
//! - [`certify_isomorphism_bound`]: the factorization `A I B = id` on
//!   `l^p(R^m)`, with `B` mapping coefficients to disjointly supported
//!   translates and `A` built from the explicit norming functionals
//!   `v -> int v |u_i|^{p-2} u_i / ||u_i||_p^p`. A verified certificate
//!   witnesses `i_m(I) >= ||base||_{L^p}` for the given `m`, a bound that
//!   approaches `||I||` as the support half-width `l` grows.
//! - [`refute_net`]: given candidate centers with declared bounding boxes and
//!   radius `r < r~ < ||I||`, translate the trial beyond every center; the
//!   translate stays unit in `W^{1,p}` while every distance `||w - g_j||_p`
//!   stays above `r`, refuting the net.

use rand::Rng;
use thiserror::Error;

use crate::domain::StripDomain;
use crate::extremal::{
    strip_trial, ExtremalError, ExtremalFunction, PolyBump, TabulatedExtremal, TrialFunction,
};
use crate::ptrig::PExponent;
use crate::quad::{integrate_tensor, QuadError, QuadratureRule, Rectangle};

/// Default cells per half period for all quadratures in this module.
pub const DEFAULT_RESOLUTION: usize = 32;

/// Largest supported translate count.
pub const MAX_TRANSLATES: usize = 64;

#[derive(Debug, Error)]
pub enum NoncompactError {
    #[error("translate count must be in 1..={MAX_TRANSLATES}, got {0}")]
    InvalidTranslateCount(usize),
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { expected: usize, got: usize },
    #[error("need at least 10 trials, got {0}")]
    TooFewTrials(usize),
    #[error("net radius {radius} must be positive and below rtilde {rtilde}")]
    InvalidRadii { radius: f64, rtilde: f64 },
    #[error(
        "witness L^p norm {witness_norm} does not exceed rtilde {rtilde}; \
         increase l (net not refutable by this witness)"
    )]
    Precondition { witness_norm: f64, rtilde: f64 },
    #[error("margin {margin} for center {index} does not exceed radius {radius}")]
    MarginViolation {
        index: usize,
        margin: f64,
        radius: f64,
    },
    #[error("certification failed: {check} deviation {deviation:e} exceeds tolerance {tol:e}")]
    CertificationFailed {
        check: CertificateCheck,
        deviation: f64,
        tol: f64,
    },
    #[error("net center {index} is nonzero outside its declared bounding box")]
    CenterOutsideBox { index: usize },
    #[error(transparent)]
    Extremal(#[from] ExtremalError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateCheck {
    BIsometry,
    ABound,
    AibIdentity,
}

impl std::fmt::Display for CertificateCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::BIsometry => write!(f, "B-isometry"),
            Self::ABound => write!(f, "A-bound"),
            Self::AibIdentity => write!(f, "AIB-identity"),
        }
    }
}

/// `m` translates of a `W^{1,p}`-normalized strip trial with pairwise
/// disjoint supports `((2i-3) l, (2i-1) l)^k x prod (a_i, b_i)`.
pub struct TranslateSystem {
    p: PExponent,
    domain: StripDomain,
    l: f64,
    translates: Vec<ExtremalFunction>,
    tabulated: Vec<TabulatedExtremal>,
    /// Per-translate `(int |u_i|^p, int |grad u_i|^p)` by quadrature.
    norm_parts: Vec<(f64, f64)>,
    base_lp_norm: f64,
    resolution: usize,
}

/// Build the translate system at the default resolution.
pub fn build_translates(
    p: &PExponent,
    d: &StripDomain,
    l: f64,
    m: usize,
) -> Result<TranslateSystem, NoncompactError> {
    build_translates_with(p, d, l, m, DEFAULT_RESOLUTION)
}

/// Build the translate system with an explicit quadrature resolution (cells
/// per half period).
pub fn build_translates_with(
    p: &PExponent,
    d: &StripDomain,
    l: f64,
    m: usize,
    resolution: usize,
) -> Result<TranslateSystem, NoncompactError> {
    if m == 0 || m > MAX_TRANSLATES {
        return Err(NoncompactError::InvalidTranslateCount(m));
    }
    let raw = strip_trial(p, d, l)?;
    let ((den, _), (num, _)) = raw.w1p_norm_parts(resolution)?;
    let w_norm = (den + num).powf(1.0 / p.p());
    let base = raw.scaled(1.0 / w_norm);
    let base_lp_norm = den.powf(1.0 / p.p()) / w_norm;

    let k = d.free_axes();
    let n = d.dim();
    let mut translates = Vec::with_capacity(m);
    let mut tabulated = Vec::with_capacity(m);
    let mut norm_parts = Vec::with_capacity(m);
    for i in 0..m {
        let mut shift = vec![0.0; n];
        for s in shift.iter_mut().take(k) {
            *s = 2.0 * i as f64 * l;
        }
        let u_i = base.translated(&shift);
        let tab = u_i.tabulated(resolution)?;
        norm_parts.push(tab.norm_parts());
        tabulated.push(tab);
        translates.push(u_i);
    }
    Ok(TranslateSystem {
        p: p.clone(),
        domain: d.clone(),
        l,
        translates,
        tabulated,
        norm_parts,
        base_lp_norm,
        resolution,
    })
}

impl TranslateSystem {
    pub fn p(&self) -> &PExponent {
        &self.p
    }

    pub fn domain(&self) -> &StripDomain {
        &self.domain
    }

    pub fn half_width(&self) -> f64 {
        self.l
    }

    pub fn len(&self) -> usize {
        self.translates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translates.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// `||base||_{L^p}` after `W^{1,p}` normalization: the certified lower
    /// bound for the isomorphism numbers.
    pub fn base_lp_norm(&self) -> f64 {
        self.base_lp_norm
    }

    pub fn translate(&self, i: usize) -> &ExtremalFunction {
        &self.translates[i]
    }

    /// Support box of translate `i`.
    pub fn support(&self, i: usize) -> Rectangle {
        self.translates[i].support()
    }

    /// Quadrature `(int |u_i|^p, int |grad u_i|^p)`.
    pub fn translate_norm_parts(&self, i: usize) -> (f64, f64) {
        self.norm_parts[i]
    }
}

/// The sum `B(alpha) = sum_i alpha_i u_i`, evaluable on the whole strip.
pub struct TranslateCombination<'a> {
    system: &'a TranslateSystem,
    alpha: Vec<f64>,
}

impl TranslateCombination<'_> {
    pub fn coefficients(&self) -> &[f64] {
        &self.alpha
    }

    /// `W^{1,p}` norm of the combination from per-translate quadrature; the
    /// coefficient scaling uses the exact `p`-homogeneity of the integrals.
    pub fn w1p_norm(&self) -> f64 {
        let p = self.system.p.p();
        let mut total = 0.0;
        for (a, &(den, num)) in self.alpha.iter().zip(&self.system.norm_parts) {
            total += a.abs().powf(p) * (den + num);
        }
        total.powf(1.0 / p)
    }
}

impl TrialFunction for TranslateCombination<'_> {
    fn dim(&self) -> usize {
        self.system.domain.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        // Supports are disjoint; evaluating every translate keeps the sum
        // honest (off-support translates contribute an exact 0).
        self.alpha
            .iter()
            .zip(&self.system.translates)
            .map(|(a, u)| a * u.value(x))
            .sum()
    }

    fn gradient(&self, x: &[f64], fd_step: f64, out: &mut [f64]) {
        let dim = self.dim();
        out[..dim].fill(0.0);
        let mut buf = [0.0f64; 8];
        for (a, u) in self.alpha.iter().zip(&self.system.translates) {
            u.gradient(x, fd_step, &mut buf[..dim]);
            for i in 0..dim {
                out[i] += a * buf[i];
            }
        }
    }

    fn axis_breakpoints(&self, axis: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .system
            .translates
            .iter()
            .flat_map(|u| u.axis_breakpoints(axis))
            .collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

/// `B: l^p(R^m) -> W_0^{1,p}(D)`, coefficients to the translate sum.
pub fn b_operator<'a>(
    ts: &'a TranslateSystem,
    alpha: &[f64],
) -> Result<TranslateCombination<'a>, NoncompactError> {
    if alpha.len() != ts.len() {
        return Err(NoncompactError::CoefficientLength {
            expected: ts.len(),
            got: alpha.len(),
        });
    }
    Ok(TranslateCombination {
        system: ts,
        alpha: alpha.to_vec(),
    })
}

/// Sign-preserving power `|u|^(p-2) u`.
#[inline]
fn norming_kernel(u: f64, p: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else if p == 2.0 {
        u
    } else {
        u.abs().powf(p - 1.0) * u.signum()
    }
}

/// `A: L^p(D) -> l^p(R^m)`: component `i` is the norming functional of `u_i`
/// applied to `v` restricted to the support box,
/// `int v |u_i|^{p-2} u_i / ||u_i||_p^p`.
pub fn a_operator<T: TrialFunction + ?Sized>(ts: &TranslateSystem, v: &T) -> Vec<f64> {
    let p = ts.p.p();
    (0..ts.len())
        .map(|i| {
            let den = ts.norm_parts[i].0;
            ts.tabulated[i].integrate(|x, ui| v.value(x) * norming_kernel(ui, p)) / den
        })
        .collect()
}

/// `A(I(B alpha))` using the tabulated owner values on each support box; the
/// other translates enter through their (zero) off-support evaluations.
/// Agrees with `a_operator(ts, b_operator(ts, alpha)?)` while avoiding the
/// pointwise `sin_p` inversions for the owner factor.
pub fn a_operator_combination(ts: &TranslateSystem, combo: &TranslateCombination<'_>) -> Vec<f64> {
    let p = ts.p.p();
    let alpha = combo.coefficients();
    (0..ts.len())
        .map(|i| {
            let den = ts.norm_parts[i].0;
            ts.tabulated[i].integrate(|x, ui| {
                let mut v = alpha[i] * ui;
                for (j, (a, u)) in alpha.iter().zip(&ts.translates).enumerate() {
                    if j != i {
                        v += a * u.value(x);
                    }
                }
                v * norming_kernel(ui, p)
            }) / den
        })
        .collect()
}

/// Numerical evidence that `A I B` is the identity with `||B|| = 1` and
/// `||A|| <= 1/||base||_p`, certifying `i_m(I) >= lower_bound`.
#[derive(Debug, Clone, Copy)]
pub struct OperatorCertificate {
    /// Max over trials of `| ||B alpha||_{W^{1,p}} - ||alpha||_{l^p} |`.
    pub b_isometry_dev: f64,
    /// Max over trials of `||A v|| ||base||_p / ||v||_p - 1`, clipped at 0.
    pub a_bound_dev: f64,
    /// Max over trials of `||A I B alpha - alpha||_{l^p}`.
    pub aib_identity_dev: f64,
    /// Certified isomorphism-number lower bound `||base||_{L^p}`.
    pub lower_bound: f64,
    pub trials: usize,
    pub tol: f64,
}

/// Run `trials` random checks of the three factorization properties; emit a
/// certificate if every deviation stays within `tol`.
pub fn certify_isomorphism_bound<R: Rng>(
    ts: &TranslateSystem,
    trials: usize,
    tol: f64,
    rng: &mut R,
) -> Result<OperatorCertificate, NoncompactError> {
    if trials < 10 {
        return Err(NoncompactError::TooFewTrials(trials));
    }
    let m = ts.len();
    let p = ts.p.p();

    // Bumps for the A-bound live in the central 60% of each support box;
    // exponent 2 keeps |bump|^p smooth at the box edges.
    let mut bump_boxes = Vec::with_capacity(m);
    for i in 0..m {
        let sup = ts.support(i);
        let shrunk: Vec<(f64, f64)> = sup
            .intervals()
            .iter()
            .map(|&(a, b)| {
                let mid = 0.5 * (a + b);
                let half = 0.3 * (b - a);
                (mid - half, mid + half)
            })
            .collect();
        bump_boxes.push(Rectangle::new(shrunk)?);
    }

    let mut b_dev = 0.0f64;
    let mut a_dev = 0.0f64;
    let mut aib_dev = 0.0f64;
    let rule = QuadratureRule::gauss_legendre(16)?;

    for _ in 0..trials {
        // Coefficient vector away from zero.
        let alpha: Vec<f64> = loop {
            let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if a.iter().map(|x| x.abs()).fold(0.0, f64::max) > 0.05 {
                break a;
            }
        };
        let alpha_norm = lp_norm(&alpha, p);
        let combo = b_operator(ts, &alpha)?;

        // B-isometry.
        b_dev = b_dev.max((combo.w1p_norm() - alpha_norm).abs());

        // AIB identity: integrate the combination against each norming
        // functional (tabulated owner, explicit off-support terms).
        let image = a_operator_combination(ts, &combo);
        let diff: Vec<f64> = image.iter().zip(&alpha).map(|(g, a)| g - a).collect();
        aib_dev = aib_dev.max(lp_norm(&diff, p));

        // A-bound with a random disjointly supported test function.
        let coeffs: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bumps: Vec<PolyBump> = bump_boxes
            .iter()
            .map(|b| {
                let dim = b.dim();
                let tilts = (0..dim).map(|_| rng.gen_range(-0.9..0.9)).collect();
                PolyBump::new(b.clone(), rng.gen_range(0.2..2.0), vec![2; dim], tilts)
                    .expect("dimensions match")
            })
            .collect();
        let v = DisjointBumps {
            bumps: &bumps,
            coeffs: &coeffs,
        };
        let av = a_operator(ts, &v);
        let mut v_norm_p = 0.0;
        for (bump, c) in bumps.iter().zip(&coeffs) {
            v_norm_p += integrate_tensor(
                |x| (c * bump.value(x)).abs().powf(p),
                bump.bounding_box(),
                16,
                &rule,
            )?;
        }
        let v_norm = v_norm_p.powf(1.0 / p);
        a_dev = a_dev.max((lp_norm(&av, p) * ts.base_lp_norm / v_norm - 1.0).max(0.0));
    }

    let cert = OperatorCertificate {
        b_isometry_dev: b_dev,
        a_bound_dev: a_dev,
        aib_identity_dev: aib_dev,
        lower_bound: ts.base_lp_norm,
        trials,
        tol,
    };
    for (check, dev) in [
        (CertificateCheck::BIsometry, b_dev),
        (CertificateCheck::ABound, a_dev),
        (CertificateCheck::AibIdentity, aib_dev),
    ] {
        if !(dev <= tol) {
            return Err(NoncompactError::CertificationFailed {
                check,
                deviation: dev,
                tol,
            });
        }
    }
    Ok(cert)
}

fn lp_norm(v: &[f64], p: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

struct DisjointBumps<'a> {
    bumps: &'a [PolyBump],
    coeffs: &'a [f64],
}

impl TrialFunction for DisjointBumps<'_> {
    fn dim(&self) -> usize {
        self.bumps[0].dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.bumps
            .iter()
            .zip(self.coeffs)
            .map(|(b, c)| c * b.value(x))
            .sum()
    }
}

/// Candidate net: evaluable centers with declared bounding boxes and a
/// radius.
pub struct NetCandidate {
    centers: Vec<(Box<dyn TrialFunction + Send>, Rectangle)>,
    radius: f64,
}

impl std::fmt::Debug for NetCandidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NetCandidate")
            .field("centers", &self.centers.len())
            .field("radius", &self.radius)
            .finish()
    }
}

impl NetCandidate {
    /// `centers` pair each function with its bounding box; the function must
    /// vanish outside the box (spot-checked on a deterministic lattice
    /// around the box).
    pub fn new(
        centers: Vec<(Box<dyn TrialFunction + Send>, Rectangle)>,
        radius: f64,
    ) -> Result<Self, NoncompactError> {
        if !(radius > 0.0) {
            return Err(NoncompactError::InvalidRadii {
                radius,
                rtilde: f64::NAN,
            });
        }
        for (index, (f, bbox)) in centers.iter().enumerate() {
            let dim = bbox.dim();
            // Probe a shell around the box: center of each face, pushed out.
            for axis in 0..dim {
                for side in [0usize, 1] {
                    let mut x = vec![0.0; dim];
                    for (a, &(lo, hi)) in bbox.intervals().iter().enumerate() {
                        x[a] = 0.5 * (lo + hi);
                    }
                    let (lo, hi) = bbox.intervals()[axis];
                    x[axis] = if side == 0 {
                        lo - 0.01 * (hi - lo)
                    } else {
                        hi + 0.01 * (hi - lo)
                    };
                    if f.value(&x) != 0.0 {
                        return Err(NoncompactError::CenterOutsideBox { index });
                    }
                }
            }
        }
        Ok(Self { centers, radius })
    }

    /// Net of polynomial bumps (bounding box = bump support).
    pub fn from_bumps(bumps: Vec<PolyBump>, radius: f64) -> Result<Self, NoncompactError> {
        let centers = bumps
            .into_iter()
            .map(|b| {
                let bbox = b.bounding_box().clone();
                (Box::new(b) as Box<dyn TrialFunction + Send>, bbox)
            })
            .collect();
        Self::new(centers, radius)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Successful net refutation: the translated witness, its translation offset
/// along the free axes, and the per-center distances (all above the net
/// radius).
#[derive(Debug)]
pub struct Refutation {
    pub witness: ExtremalFunction,
    pub translation: f64,
    pub witness_lp_norm: f64,
    pub margins: Vec<f64>,
    pub radius: f64,
}

/// Translate a `W^{1,p}`-normalized strip trial beyond every center box and
/// verify `||w - g_j||_{L^p} > radius` for all centers by quadrature.
///
/// Requires `radius < rtilde` and a witness with `||w||_{L^p} > rtilde`
/// (choose `l` large enough); fails with a precondition error otherwise.
pub fn refute_net(
    p: &PExponent,
    d: &StripDomain,
    l: f64,
    net: &NetCandidate,
    rtilde: f64,
    resolution: usize,
) -> Result<Refutation, NoncompactError> {
    if !(net.radius < rtilde) {
        return Err(NoncompactError::InvalidRadii {
            radius: net.radius,
            rtilde,
        });
    }
    let raw = strip_trial(p, d, l)?;
    let ((den, _), (num, _)) = raw.w1p_norm_parts(resolution)?;
    let w_norm = (den + num).powf(1.0 / p.p());
    let witness_lp_norm = den.powf(1.0 / p.p()) / w_norm;
    if !(witness_lp_norm > rtilde) {
        return Err(NoncompactError::Precondition {
            witness_norm: witness_lp_norm,
            rtilde,
        });
    }

    // Shift along all free axes simultaneously until the support clears
    // every center box.
    let k = d.free_axes();
    let mut max_hi = 0.0f64;
    for (_, bbox) in &net.centers {
        for &(_, hi) in bbox.intervals().iter().take(k) {
            max_hi = max_hi.max(hi);
        }
    }
    let translation = max_hi + 2.0 * l;
    let mut shift = vec![0.0; d.dim()];
    for s in shift.iter_mut().take(k) {
        *s = translation;
    }
    let witness = raw.scaled(1.0 / w_norm).translated(&shift);

    let tab = witness.tabulated(resolution)?;
    let rule = QuadratureRule::gauss_legendre(16)?;
    let pw = p.p();
    let mut margins = Vec::with_capacity(net.len());
    for (index, (g, bbox)) in net.centers.iter().enumerate() {
        // |w - g|^p over the witness support plus over the center box; the
        // supports are disjoint by the translation, and both integrands are
        // evaluated honestly.
        let on_support = tab.integrate(|x, wu| (wu - g.value(x)).abs().powf(pw));
        let cells = resolution.max(8);
        let on_center = integrate_tensor(
            |x| (witness.value(x) - g.value(x)).abs().powf(pw),
            bbox,
            cells,
            &rule,
        )?;
        let margin = (on_support + on_center).powf(1.0 / pw);
        if !(margin > net.radius) {
            return Err(NoncompactError::MarginViolation {
                index,
                margin,
                radius: net.radius,
            });
        }
        margins.push(margin);
    }
    Ok(Refutation {
        witness,
        translation,
        witness_lp_norm,
        margins,
        radius: net.radius,
    })
}
