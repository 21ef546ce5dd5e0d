//! Entropy functionals: von Neumann entropy, varentropy (variance of the
//! surprisal), relative entropy with an explicit support check, and the
//! outcome-count caps on entropy change.
//!
//! All entropies are in nats.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{eigh, DensityOperator, SPECTRAL_CUTOFF_REL};

/// Support-check tolerance for relative entropy: an eigenvector of rho must
/// have at least `1 - SUPPORT_TOL` of its weight inside the support of sigma.
/// Chosen to distinguish genuine pointer-basis leakage from eigensolver noise.
pub const SUPPORT_TOL: f64 = 1e-8;

/// A classical probability distribution (the spectrum of a density operator).
#[derive(Clone, Debug)]
pub struct Spectrum {
    probabilities: Vec<f64>,
}

impl Spectrum {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.iter().any(|&p| p < -1e-12 || !p.is_finite()) {
            return Err(Error::InvalidState("spectrum entries must be nonnegative".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("spectrum sums to {total}, expected 1")));
        }
        let probabilities = probabilities.into_iter().map(|p| p.max(0.0)).collect();
        Ok(Self { probabilities })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn entropy(&self) -> f64 {
        scalar_entropy(&self.probabilities)
    }

    pub fn varentropy(&self) -> f64 {
        scalar_varentropy(&self.probabilities)
    }
}

/// `-sum p ln p` with the `0 ln 0 = 0` convention.
pub fn scalar_entropy(probs: &[f64]) -> f64 {
    let s: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
    s.max(0.0)
}

/// `sum p ln^2 p - (sum p ln p)^2`, clipped to nonnegative.
pub fn scalar_varentropy(probs: &[f64]) -> f64 {
    let mut first = 0.0;
    let mut second = 0.0;
    for &p in probs.iter().filter(|&&p| p > 0.0) {
        let l = p.ln();
        first += p * l;
        second += p * l * l;
    }
    (second - first * first).max(0.0)
}

fn significant_spectrum(rho: &DensityOperator) -> Result<Vec<f64>> {
    let vals = rho.eigenvalues()?;
    let max = vals.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = SPECTRAL_CUTOFF_REL * max;
    Ok(vals.iter().cloned().filter(|&v| v > cutoff).collect())
}

/// Von Neumann entropy `-tr(rho ln rho)` in nats.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    let probs = significant_spectrum(rho)?;
    let s = scalar_entropy(&probs);
    let bound = (rho.dim() as f64).ln() + 1e-9;
    if s > bound {
        return Err(Error::InvalidState(format!("entropy {s} exceeds ln(dim) = {bound}")));
    }
    Ok(s)
}

/// Varentropy `tr(rho ln^2 rho) - S^2` in nats^2.
pub fn varentropy(rho: &DensityOperator) -> Result<f64> {
    Ok(entropy_and_varentropy(rho)?.1)
}

/// Entropy and varentropy from one shared eigendecomposition.
pub fn entropy_and_varentropy(rho: &DensityOperator) -> Result<(f64, f64)> {
    let probs = significant_spectrum(rho)?;
    Ok((scalar_entropy(&probs), scalar_varentropy(&probs)))
}

/// Eigendecomposition of a reference state, reused across many relative
/// entropy evaluations against the same sigma.
pub struct ReferenceState {
    support_vecs: Array2<C64>,
    support_logs: Vec<f64>,
    pub entropy: f64,
}

impl ReferenceState {
    pub fn new(sigma: &DensityOperator) -> Result<Self> {
        let (vals, vecs) = eigh(sigma.matrix())?;
        let max = vals.iter().cloned().fold(0.0f64, f64::max);
        let cutoff = SPECTRAL_CUTOFF_REL * max;
        let keep: Vec<usize> =
            (0..vals.len()).filter(|&k| vals[k] > cutoff).collect();
        let d = sigma.dim();
        let mut support_vecs = Array2::zeros((d, keep.len()));
        let mut support_logs = Vec::with_capacity(keep.len());
        for (col, &k) in keep.iter().enumerate() {
            support_vecs.column_mut(col).assign(&vecs.column(k));
            support_logs.push(vals[k].ln());
        }
        let probs: Vec<f64> = keep.iter().map(|&k| vals[k]).collect();
        Ok(Self { support_vecs, support_logs, entropy: scalar_entropy(&probs) })
    }

    pub fn support_rank(&self) -> usize {
        self.support_vecs.ncols()
    }
}

/// Relative entropy plus the weight of rho outside sigma's support and the
/// worst per-eigenvector overlap defect. Used by both the strict and the
/// lenient entry points.
fn relative_entropy_parts(
    rho: &DensityOperator,
    sigma: &ReferenceState,
) -> Result<(f64, f64, f64)> {
    let (rvals, rvecs) = eigh(rho.matrix())?;
    let rmax = rvals.iter().cloned().fold(0.0f64, f64::max);
    let rcutoff = SPECTRAL_CUTOFF_REL * rmax;

    // worst support-overlap defect over significant eigenvectors of rho
    let mut worst_defect = 0.0f64;
    for k in 0..rvals.len() {
        if rvals[k] <= rcutoff {
            continue;
        }
        let v = rvecs.column(k);
        let mut inside = 0.0;
        for col in 0..sigma.support_vecs.ncols() {
            let overlap: C64 = sigma
                .support_vecs
                .column(col)
                .iter()
                .zip(v.iter())
                .map(|(s, r)| s.conj() * r)
                .sum();
            inside += overlap.norm_sqr();
        }
        worst_defect = worst_defect.max(1.0 - inside);
    }

    // tr(rho ln rho) over the significant spectrum
    let tr_rho_ln_rho: f64 =
        rvals.iter().filter(|&&v| v > rcutoff).map(|&v| v * v.ln()).sum();

    // tr(rho ln sigma) restricted to sigma's support
    let mut tr_rho_ln_sigma = 0.0;
    let mut mass_inside = 0.0;
    for col in 0..sigma.support_vecs.ncols() {
        let u = sigma.support_vecs.column(col);
        // <u| rho |u>
        let mut ru = vec![C64::new(0.0, 0.0); u.len()];
        for (i, out) in ru.iter_mut().enumerate() {
            *out = rho
                .matrix()
                .row(i)
                .iter()
                .zip(u.iter())
                .map(|(m, x)| m * x)
                .sum();
        }
        let weight: f64 = u
            .iter()
            .zip(ru.iter())
            .map(|(x, y)| (x.conj() * y).re)
            .sum();
        tr_rho_ln_sigma += weight * sigma.support_logs[col];
        mass_inside += weight;
    }
    let leak = (1.0 - mass_inside).max(0.0);
    Ok((tr_rho_ln_rho - tr_rho_ln_sigma, leak, worst_defect))
}

/// Relative entropy `S(rho || sigma) = tr rho (ln rho - ln sigma)`, with the
/// support condition `supp(rho) <= supp(sigma)` enforced.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    let reference = ReferenceState::new(sigma)?;
    relative_entropy_to(rho, &reference)
}

/// Strict relative entropy against a pre-decomposed reference.
pub fn relative_entropy_to(rho: &DensityOperator, sigma: &ReferenceState) -> Result<f64> {
    let (value, _, defect) = relative_entropy_parts(rho, sigma)?;
    if defect > SUPPORT_TOL {
        return Err(Error::SupportMismatch(format!(
            "eigenvector of rho leaks {defect:.3e} outside the support of sigma \
             (tolerance {SUPPORT_TOL:.1e}); the pointer basis does not commute"
        )));
    }
    debug_assert!(value >= -1e-9, "relative entropy {value} below -1e-9");
    Ok(value)
}

/// Support-restricted relative entropy for states that only approximately
/// respect the reference's support. Returns `(value, leaked mass)`, where the
/// value reduces to the true relative entropy when the leak is zero.
pub fn relative_entropy_lenient(
    rho: &DensityOperator,
    sigma: &ReferenceState,
) -> Result<(f64, f64)> {
    let (value, leak, _) = relative_entropy_parts(rho, sigma)?;
    Ok((value, leak))
}

/// Outcome-count cap on the entropy change:
/// `f_A = sqrt(ln^2(A-1)/4 + 1)`.
pub fn f_a(a: u32) -> Result<f64> {
    if a < 2 {
        return Err(Error::InvalidOutcomeCount(format!(
            "a measurement needs at least 2 outcomes, got {a}"
        )));
    }
    let l = ((a - 1) as f64).ln();
    Ok((0.25 * l * l + 1.0).sqrt())
}

/// Varentropy maximizer over probability distributions with at most `a`
/// nonzero entries.
#[derive(Clone, Copy, Debug)]
pub struct VarentropyMaxResult {
    pub a: u32,
    /// The optimal small weight, in (0, 1/2].
    pub r_a: f64,
    /// Largest attainable varentropy (nats^2).
    pub max_varentropy: f64,
    /// `f_a(a)^2` for comparison (nats^2).
    pub f_a_squared: f64,
    /// Residual of the stationarity condition at `r_a`.
    pub residual: f64,
}

/// Residual of the stationarity condition
/// `2 = (1 - 2r) ln((1 - r)(A - 1)/r)`.
fn stationarity_residual(a: u32, r: f64) -> f64 {
    (1.0 - 2.0 * r) * (((1.0 - r) * (a as f64 - 1.0)) / r).ln() - 2.0
}

/// Varentropy of the two-valued spectrum `(1-r, r/(a-1), ..., r/(a-1))`
/// reduced to its closed form.
fn two_level_varentropy(a: u32, r: f64) -> f64 {
    let l = (((1.0 - r) * (a as f64 - 1.0)) / r).ln();
    r * (1.0 - r) * l * l
}

/// Maximize the varentropy over spectra with at most `a` nonzero entries.
///
/// The optimizer has one large weight `1 - r` and `a - 1` equal small weights;
/// the optimal `r` solves a transcendental stationarity condition, found here
/// by bracketed bisection (the residual is strictly decreasing on (0, 1/2)).
pub fn varentropy_max(a: u32) -> Result<VarentropyMaxResult> {
    if a < 2 {
        return Err(Error::InvalidOutcomeCount(format!(
            "a measurement needs at least 2 outcomes, got {a}"
        )));
    }
    let mut lo = 1e-12;
    let mut hi = 0.5 - 1e-12;
    let flo = stationarity_residual(a, lo);
    let fhi = stationarity_residual(a, hi);
    assert!(
        flo > 0.0 && fhi < 0.0,
        "stationarity bracket failed for A = {a}: f(lo) = {flo}, f(hi) = {fhi}"
    );
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let fm = stationarity_residual(a, mid);
        if fm.abs() <= 1e-13 {
            break;
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let residual = stationarity_residual(a, mid);
    let max_varentropy = two_level_varentropy(a, mid);
    let f = f_a(a)?;
    let result = VarentropyMaxResult {
        a,
        r_a: mid,
        max_varentropy,
        f_a_squared: f * f,
        residual,
    };
    debug_assert!(result.residual.abs() <= 1e-10);
    debug_assert!(result.max_varentropy <= result.f_a_squared + 1e-12);
    Ok(result)
}
