//! Dense Hermitian linear algebra on composite (tensor-product) Hilbert spaces.
//!
//! Operators and states carry a [`SpaceLayout`] naming their tensor factors, so
//! subsystem operators can be embedded by label instead of by index arithmetic.
//! Everything is dense `Complex64`; eigendecompositions go through LAPACK.

use ndarray::prelude::*;
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Relative tolerance for Hermiticity checks.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Absolute tolerance on `tr(rho) - 1`.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues of a density operator in `[-NEG_EIG_TOL, 0)` are clipped to
/// zero; anything more negative is treated as a construction bug.
pub const NEG_EIG_TOL: f64 = 1e-10;
/// Relative eigenvalue cutoff below which a spectral value counts as zero
/// (used by matrix logarithms; below double-precision eigensolver resolution).
pub const SPECTRAL_CUTOFF_REL: f64 = 1e-12;

/// Full eigenvalue validation of density operators is only performed up to
/// this dimension; larger states get the cheap (Hermiticity + trace) checks.
const EIG_VALIDATE_MAX_DIM: usize = 256;

/// Unit tag carried by operators: either a dimensionless observable or an
/// energy expressed as an angular frequency (rad/s, with hbar = 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    Dimensionless,
    AngularFrequency,
}

/// Ordered list of labelled tensor factors making up a composite space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceLayout {
    factors: Vec<(String, usize)>,
}

impl SpaceLayout {
    pub fn new<S: Into<String>>(factors: Vec<(S, usize)>) -> Result<Self> {
        let factors: Vec<(String, usize)> =
            factors.into_iter().map(|(l, d)| (l.into(), d)).collect();
        if factors.is_empty() {
            return Err(Error::LayoutConflict("layout must have at least one factor".into()));
        }
        for (label, dim) in &factors {
            if *dim < 1 {
                return Err(Error::LayoutConflict(format!("factor `{label}` has dimension 0")));
            }
        }
        for i in 0..factors.len() {
            for j in (i + 1)..factors.len() {
                if factors[i].0 == factors[j].0 {
                    return Err(Error::LayoutConflict(format!(
                        "duplicate factor label `{}`",
                        factors[i].0
                    )));
                }
            }
        }
        Ok(Self { factors })
    }

    pub fn single<S: Into<String>>(label: S, dim: usize) -> Result<Self> {
        Self::new(vec![(label, dim)])
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|(_, d)| d).product()
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|(l, _)| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    /// Row-major strides: `strides[i]` is the index weight of factor `i`.
    pub(crate) fn strides(&self) -> Vec<usize> {
        let n = self.factors.len();
        let mut s = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.factors[i + 1].1;
        }
        s
    }

    /// Concatenation of two layouts with disjoint labels.
    fn concat(&self, other: &SpaceLayout) -> Result<SpaceLayout> {
        let mut factors = self.factors.clone();
        for (l, d) in &other.factors {
            if self.contains(l) {
                return Err(Error::LayoutConflict(format!("duplicate factor label `{l}`")));
            }
            factors.push((l.clone(), *d));
        }
        SpaceLayout::new(factors)
    }
}

/// Offsets of every index of the sub-space spanned by `positions` (factor
/// positions within `layout`), measured in flat indices of `layout`.
///
/// `offsets[k]` is the flat-index contribution of the `k`-th configuration of
/// those factors, enumerated in row-major order over `positions`.
fn subspace_offsets(layout: &SpaceLayout, positions: &[usize]) -> Vec<usize> {
    let strides = layout.strides();
    let dims: Vec<usize> = positions.iter().map(|&p| layout.factors()[p].1).collect();
    let total: usize = dims.iter().product();
    let mut offsets = vec![0usize; total];
    for (k, off) in offsets.iter_mut().enumerate() {
        let mut rem = k;
        let mut acc = 0usize;
        for (i, &d) in dims.iter().enumerate().rev() {
            let digit = rem % d;
            rem /= d;
            acc += digit * strides[positions[i]];
        }
        *off = acc;
    }
    offsets
}

fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in i..n {
            defect = defect.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    defect
}

pub(crate) fn check_hermitian(m: &Array2<C64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotHermitian(format!("{what}: matrix is not square")));
    }
    let scale = max_abs(m);
    let defect = hermiticity_defect(m);
    if defect > HERMITICITY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotHermitian(format!(
            "{what}: |M - M^dag| = {defect:.3e} exceeds {:.1e} * max|M| = {:.3e}",
            HERMITICITY_TOL,
            HERMITICITY_TOL * scale
        )));
    }
    Ok(())
}

/// Hermitian eigendecomposition; eigenvalues ascending, eigenvectors in
/// columns, so `m = V diag(vals) V^dag`.
///
/// LAPACK sees the row-major buffer as the transpose, so for complex input
/// the backend hands back eigenvectors of `conj(m)`; conjugating restores
/// the column convention.
pub(crate) fn eigh(m: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (vals, vecs) = m.eigh(UPLO::Lower)?;
    Ok((vals, vecs.mapv(|z| z.conj())))
}

pub(crate) fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let av = a[(i, j)];
            if av.norm_sqr() == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = av * b[(k, l)];
                }
            }
        }
    }
    out
}

/// A Hermitian operator on a labelled composite space.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    layout: SpaceLayout,
    unit: Unit,
    matrix: Array2<C64>,
}

impl HermitianOperator {
    pub fn new(layout: SpaceLayout, unit: Unit, matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::LayoutConflict(format!(
                "matrix is {}x{} but layout dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                layout.dim()
            )));
        }
        check_hermitian(&matrix, "operator")?;
        Ok(Self { layout, unit, matrix })
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let d = layout.dim();
        Self { layout, unit: Unit::Dimensionless, matrix: Array2::eye(d) }
    }

    pub fn zero(layout: SpaceLayout, unit: Unit) -> Self {
        let d = layout.dim();
        Self { layout, unit, matrix: Array2::zeros((d, d)) }
    }

    pub fn from_real_diag(layout: SpaceLayout, unit: Unit, diag: &[f64]) -> Result<Self> {
        if diag.len() != layout.dim() {
            return Err(Error::LayoutConflict(format!(
                "diagonal has {} entries but layout dimension is {}",
                diag.len(),
                layout.dim()
            )));
        }
        let mut m = Array2::zeros((diag.len(), diag.len()));
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Ok(Self { layout, unit, matrix: m })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            layout: self.layout.clone(),
            unit: self.unit,
            matrix: self.matrix.mapv(|z| z * factor),
        }
    }

    /// Reinterpret the numerical entries under a different unit tag.
    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::LayoutConflict("cannot add operators on different layouts".into()));
        }
        if self.unit != other.unit {
            return Err(Error::UnitMismatch("cannot add operators with different unit tags".into()));
        }
        Ok(Self {
            layout: self.layout.clone(),
            unit: self.unit,
            matrix: &self.matrix + &other.matrix,
        })
    }

    /// Largest singular value (max |eigenvalue|).
    pub fn spectral_norm(&self) -> Result<f64> {
        let (vals, _) = eigh(&self.matrix)?;
        Ok(vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
    }

    /// Embed into `target` by label: missing factors are tensored with
    /// identity and factor order follows `target`.
    pub fn embedded(&self, target: &SpaceLayout) -> Result<HermitianOperator> {
        if self.layout == *target {
            return Ok(self.clone());
        }
        let mut sub_positions = Vec::with_capacity(self.layout.factors().len());
        for (label, dim) in self.layout.factors() {
            match target.position(label) {
                Some(p) if target.factors()[p].1 == *dim => sub_positions.push(p),
                Some(p) => {
                    return Err(Error::LayoutConflict(format!(
                        "factor `{label}` has dimension {} here but {} in target",
                        dim,
                        target.factors()[p].1
                    )))
                }
                None => {
                    return Err(Error::LayoutConflict(format!(
                        "factor `{label}` is missing from the target layout"
                    )))
                }
            }
        }
        let rest_positions: Vec<usize> = (0..target.factors().len())
            .filter(|p| !sub_positions.contains(p))
            .collect();
        let sub_offsets = subspace_offsets(target, &sub_positions);
        let rest_offsets = subspace_offsets(target, &rest_positions);
        let dt = target.dim();
        let ds = self.layout.dim();
        let mut out = Array2::zeros((dt, dt));
        for is in 0..ds {
            for js in 0..ds {
                let v = self.matrix[(is, js)];
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let (ro, co) = (sub_offsets[is], sub_offsets[js]);
                for &r in &rest_offsets {
                    out[(ro + r, co + r)] = v;
                }
            }
        }
        Ok(HermitianOperator { layout: target.clone(), unit: self.unit, matrix: out })
    }
}

/// A density operator (unit trace, positive semidefinite) on a labelled space.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    layout: SpaceLayout,
    matrix: Array2<C64>,
}

impl DensityOperator {
    /// Validating constructor. Hermiticity and trace are always checked;
    /// eigenvalues are checked (and tiny negatives clipped, renormalizing)
    /// up to dimension 256, above which positivity is the caller's contract.
    pub fn new(layout: SpaceLayout, matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::LayoutConflict(format!(
                "matrix is {}x{} but layout dimension is {}",
                matrix.nrows(),
                matrix.ncols(),
                layout.dim()
            )));
        }
        check_hermitian(&matrix, "density operator").map_err(|e| match e {
            Error::NotHermitian(m) => Error::InvalidState(m),
            other => other,
        })?;
        let tr = trace(&matrix).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        if layout.dim() <= EIG_VALIDATE_MAX_DIM {
            let (vals, vecs) = eigh(&matrix)?;
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            if min < -NEG_EIG_TOL {
                return Err(Error::InvalidState(format!(
                    "minimum eigenvalue {min:.3e} is below -{NEG_EIG_TOL:.1e}"
                )));
            }
            if min < 0.0 {
                // clip to zero and renormalize
                let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
                let total: f64 = clipped.iter().sum();
                let mut rebuilt = Array2::zeros(matrix.raw_dim());
                for (k, &p) in clipped.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let col = vecs.column(k);
                    let w = p / total;
                    for i in 0..col.len() {
                        for j in 0..col.len() {
                            rebuilt[(i, j)] += col[i] * col[j].conj() * w;
                        }
                    }
                }
                return Ok(Self { layout, matrix: rebuilt });
            }
        }
        Ok(Self { layout, matrix })
    }

    /// Construction for matrices known positive semidefinite (diagonal Gibbs
    /// weights, unitary conjugations of valid states). Trace and Hermiticity
    /// are still enforced.
    pub(crate) fn from_trusted(layout: SpaceLayout, matrix: Array2<C64>) -> Result<Self> {
        check_hermitian(&matrix, "density operator").map_err(|e| match e {
            Error::NotHermitian(m) => Error::InvalidState(m),
            other => other,
        })?;
        let tr = trace(&matrix).re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        Ok(Self { layout, matrix })
    }

    /// Rank-1 projector onto a (normalized) state vector.
    pub fn pure(layout: SpaceLayout, vector: &[C64]) -> Result<Self> {
        if vector.len() != layout.dim() {
            return Err(Error::LayoutConflict(format!(
                "vector has {} entries but layout dimension is {}",
                vector.len(),
                layout.dim()
            )));
        }
        let norm2: f64 = vector.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let scale = 1.0 / norm2;
        let d = vector.len();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = vector[i] * vector[j].conj() * scale;
            }
        }
        Ok(Self { layout, matrix: m })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        let (vals, _) = eigh(&self.matrix)?;
        Ok(vals)
    }
}

pub(crate) fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

/// `tr(a . b)` without forming the product.
pub(crate) fn trace_of_product(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Kronecker product of Hermitian operators with disjoint labels, in order.
pub fn tensor(ops: &[&HermitianOperator]) -> Result<HermitianOperator> {
    if ops.is_empty() {
        return Err(Error::InvalidInput("tensor of zero operators".into()));
    }
    let mut layout = ops[0].layout.clone();
    let mut matrix = ops[0].matrix.clone();
    let mut unit = ops[0].unit;
    for op in &ops[1..] {
        layout = layout.concat(&op.layout)?;
        matrix = kron(&matrix, &op.matrix);
        unit = match (unit, op.unit) {
            (Unit::Dimensionless, u) => u,
            (u, Unit::Dimensionless) => u,
            _ => {
                return Err(Error::UnitMismatch(
                    "tensor product of two angular-frequency operators".into(),
                ))
            }
        };
    }
    Ok(HermitianOperator { layout, unit, matrix })
}

/// Kronecker product of density operators with disjoint labels.
pub fn tensor_density(ops: &[&DensityOperator]) -> Result<DensityOperator> {
    if ops.is_empty() {
        return Err(Error::InvalidInput("tensor of zero states".into()));
    }
    let mut layout = ops[0].layout.clone();
    let mut matrix = ops[0].matrix.clone();
    for op in &ops[1..] {
        layout = layout.concat(&op.layout)?;
        matrix = kron(&matrix, &op.matrix);
    }
    DensityOperator::from_trusted(layout, matrix)
}

/// Trace out every factor not named in `keep`. The kept factors stay in
/// their original relative order.
pub fn partial_trace(rho: &DensityOperator, keep: &[&str]) -> Result<DensityOperator> {
    if keep.is_empty() {
        return Err(Error::InvalidSelection("partial trace must keep at least one factor".into()));
    }
    for label in keep {
        if !rho.layout.contains(label) {
            return Err(Error::InvalidSelection(format!("label `{label}` not in layout")));
        }
    }
    let keep_positions: Vec<usize> = (0..rho.layout.factors().len())
        .filter(|&p| keep.contains(&rho.layout.factors()[p].0.as_str()))
        .collect();
    let traced_positions: Vec<usize> = (0..rho.layout.factors().len())
        .filter(|p| !keep_positions.contains(p))
        .collect();
    let kept_factors: Vec<(String, usize)> =
        keep_positions.iter().map(|&p| rho.layout.factors()[p].clone()).collect();
    let out_layout = SpaceLayout::new(kept_factors)?;
    if traced_positions.is_empty() {
        return Ok(rho.clone());
    }
    let keep_offsets = subspace_offsets(&rho.layout, &keep_positions);
    let traced_offsets = subspace_offsets(&rho.layout, &traced_positions);
    let dk = out_layout.dim();
    let mut out = Array2::zeros((dk, dk));
    let m = &rho.matrix;
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for &e in &traced_offsets {
                acc += m[(keep_offsets[a] + e, keep_offsets[b] + e)];
            }
            out[(a, b)] = acc;
        }
    }
    DensityOperator::from_trusted(out_layout, out)
}

/// Apply a real scalar map to the spectrum: `f` is applied to eigenvalues
/// above the cutoff, eigenvalues with `|lambda| <= zero_cutoff` map to zero
/// on their eigenspace (the `0 ln 0 = 0` convention for logarithms).
pub fn spectral_map<F>(op: &HermitianOperator, f: F, zero_cutoff: f64) -> Result<HermitianOperator>
where
    F: Fn(f64) -> f64,
{
    if zero_cutoff < 0.0 {
        return Err(Error::InvalidInput("zero_cutoff must be nonnegative".into()));
    }
    check_hermitian(&op.matrix, "spectral_map input")?;
    let (vals, vecs) = eigh(&op.matrix)?;
    let mapped: Vec<f64> =
        vals.iter().map(|&v| if v.abs() <= zero_cutoff { 0.0 } else { f(v) }).collect();
    let matrix = reconstruct(&vecs, &mapped);
    Ok(HermitianOperator { layout: op.layout.clone(), unit: op.unit, matrix })
}

/// Apply a complex scalar map to the spectrum, e.g. `exp(-i lambda t)`.
/// The result is generally not Hermitian, so the raw matrix is returned.
pub fn spectral_map_complex<F>(op: &HermitianOperator, f: F) -> Result<Array2<C64>>
where
    F: Fn(f64) -> C64,
{
    check_hermitian(&op.matrix, "spectral_map input")?;
    let (vals, vecs) = eigh(&op.matrix)?;
    let d = vals.len();
    let mut scaled = vecs.clone();
    for k in 0..d {
        let fv = f(vals[k]);
        scaled.column_mut(k).mapv_inplace(|z| z * fv);
    }
    let vdag = conj_transpose(&vecs);
    Ok(scaled.dot(&vdag))
}

pub(crate) fn conj_transpose(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub(crate) fn reconstruct(vecs: &Array2<C64>, vals: &[f64]) -> Array2<C64> {
    let mut scaled = vecs.clone();
    for (k, &v) in vals.iter().enumerate() {
        scaled.column_mut(k).mapv_inplace(|z| z * v);
    }
    scaled.dot(&conj_transpose(vecs))
}

/// Expectation value and (clipped nonnegative) variance of an observable.
/// The observable may live on a sub-layout; it is embedded by label first.
pub fn expectation_and_variance(
    obs: &HermitianOperator,
    rho: &DensityOperator,
) -> Result<(f64, f64)> {
    let embedded;
    let h = if obs.layout == rho.layout {
        obs
    } else {
        embedded = obs.embedded(&rho.layout)?;
        &embedded
    };
    let prod = rho.matrix.dot(&h.matrix);
    let mean = trace(&prod).re;
    let second = trace_of_product(&prod, &h.matrix).re;
    let var = (second - mean * mean).max(0.0);
    Ok((mean, var))
}

/// Unitary propagation `rho(t) = exp(-iHt) rho exp(+iHt)` for each time,
/// from a single eigendecomposition of `H`.
pub fn evolve(
    rho0: &DensityOperator,
    h: &HermitianOperator,
    times: &[f64],
) -> Result<Vec<DensityOperator>> {
    if h.layout.dim() != rho0.layout.dim() || h.layout != rho0.layout {
        return Err(Error::LayoutConflict("Hamiltonian and state layouts differ".into()));
    }
    if h.unit != Unit::AngularFrequency {
        return Err(Error::UnitMismatch("evolve requires an angular-frequency Hamiltonian".into()));
    }
    for w in times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidInput("times must be sorted ascending".into()));
        }
    }
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidInput("times must be nonnegative".into()));
    }
    let (vals, vecs) = eigh(&h.matrix)?;
    let vdag = conj_transpose(&vecs);
    // rotate once into the eigenbasis, phase-rotate per sample, rotate back
    let rho_eig = vdag.dot(&rho0.matrix).dot(&vecs);
    let d = vals.len();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let phases: Vec<C64> =
            vals.iter().map(|&w| C64::from_polar(1.0, -w * t)).collect();
        let mut rotated = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                rotated[(i, j)] = phases[i] * rho_eig[(i, j)] * phases[j].conj();
            }
        }
        let m = vecs.dot(&rotated).dot(&vdag);
        out.push(DensityOperator::from_trusted(rho0.layout.clone(), m)?);
    }
    Ok(out)
}

/// Pauli-Z in the (down, up) ordering used for apparatus spins:
/// `sigma_z = |down><down| - |up><up| = diag(1, -1)`.
pub fn sigma_z(layout: SpaceLayout) -> Result<HermitianOperator> {
    if layout.dim() != 2 {
        return Err(Error::LayoutConflict("sigma_z needs a two-dimensional factor".into()));
    }
    HermitianOperator::from_real_diag(layout, Unit::Dimensionless, &[1.0, -1.0])
}

/// Bosonic annihilation operator on a truncated Fock space:
/// `a |n> = sqrt(n) |n-1>`.
pub fn annihilation_matrix(dim: usize) -> Array2<C64> {
    let mut a = Array2::zeros((dim, dim));
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Position-like quadrature `a + a^dag` on a truncated Fock space.
pub fn ladder_sum(layout: SpaceLayout) -> Result<HermitianOperator> {
    let d = layout.dim();
    let a = annihilation_matrix(d);
    let m = &a + &conj_transpose(&a);
    HermitianOperator::new(layout, Unit::Dimensionless, m)
}

/// Number operator `a^dag a` on a truncated Fock space.
pub fn number_operator(layout: SpaceLayout) -> Result<HermitianOperator> {
    let d = layout.dim();
    let diag: Vec<f64> = (0..d).map(|n| n as f64).collect();
    HermitianOperator::from_real_diag(layout, Unit::Dimensionless, &diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn qubit(label: &str) -> SpaceLayout {
        SpaceLayout::single(label, 2).unwrap()
    }

    /// Random density operator via normalized G G^dag.
    pub(crate) fn random_density(rng: &mut ChaCha8Rng, layout: SpaceLayout) -> DensityOperator {
        let d = layout.dim();
        let mut g = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let gg = g.dot(&conj_transpose(&g));
        let tr = trace(&gg).re;
        DensityOperator::new(layout, gg.mapv(|z| z / tr)).unwrap()
    }

    #[test]
    fn layout_rejects_duplicate_labels() {
        let err = SpaceLayout::new(vec![("Q", 2), ("Q", 3)]).unwrap_err();
        assert!(matches!(err, Error::LayoutConflict(_)));
    }

    #[test]
    fn tensor_of_identities() {
        let i2a = HermitianOperator::identity(qubit("a"));
        let i2b = HermitianOperator::identity(qubit("b"));
        let prod = tensor(&[&i2a, &i2b]).unwrap();
        assert_eq!(prod.dim(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod.matrix()[(i, j)] - c(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn tensor_rejects_duplicate_label() {
        let a = HermitianOperator::identity(qubit("a"));
        let b = HermitianOperator::identity(qubit("a"));
        assert!(matches!(tensor(&[&a, &b]), Err(Error::LayoutConflict(_))));
    }

    #[test]
    fn sigma_z_fixes_down_up_product_state() {
        // sigma_z tensor id applied to |down,up> leaves it unchanged (+1)
        let sz = sigma_z(qubit("s1")).unwrap();
        let id = HermitianOperator::identity(qubit("s2"));
        let op = tensor(&[&sz, &id]).unwrap();
        // |down, up> = e_0 tensor e_1 = basis index 1
        let mut v = vec![c(0.0, 0.0); 4];
        v[1] = c(1.0, 0.0);
        let applied: Vec<C64> =
            (0..4).map(|i| (0..4).map(|j| op.matrix()[(i, j)] * v[j]).sum()).collect();
        for i in 0..4 {
            assert!((applied[i] - v[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn tensor_of_mixed_factors_has_product_trace() {
        // 2x2 and 3x3 normalized thermal-like factors: product trace is 1
        let f1 = DensityOperator::new(
            qubit("a"),
            Array2::from_diag(&arr1(&[c(0.8, 0.0), c(0.2, 0.0)])),
        )
        .unwrap();
        let f2 = DensityOperator::new(
            SpaceLayout::single("b", 3).unwrap(),
            Array2::from_diag(&arr1(&[c(0.7, 0.0), c(0.2, 0.0), c(0.1, 0.0)])),
        )
        .unwrap();
        let prod = tensor_density(&[&f1, &f2]).unwrap();
        assert_eq!(prod.dim(), 6);
        assert!((trace(prod.matrix()).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn partial_trace_of_product_state_recovers_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let d1 = rng.gen_range(2..=3);
            let d2 = rng.gen_range(2..=4);
            let r1 = random_density(&mut rng, SpaceLayout::single("x", d1).unwrap());
            let r2 = random_density(&mut rng, SpaceLayout::single("y", d2).unwrap());
            let joint = tensor_density(&[&r1, &r2]).unwrap();
            let back = partial_trace(&joint, &["x"]).unwrap();
            for i in 0..d1 {
                for j in 0..d1 {
                    assert!((back.matrix()[(i, j)] - r1.matrix()[(i, j)]).norm() < 1e-12);
                }
            }
            // trace preserved
            assert!((trace(back.matrix()).re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let layout = SpaceLayout::new(vec![("q1", 2), ("q2", 2)]).unwrap();
        let inv = 1.0 / 2.0f64.sqrt();
        let bell = vec![c(inv, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(inv, 0.0)];
        let rho = DensityOperator::pure(layout, &bell).unwrap();
        let red = partial_trace(&rho, &["q1"]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 0.5 } else { 0.0 };
                assert!((red.matrix()[(i, j)] - c(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn partial_trace_rejects_empty_keep() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&mut rng, qubit("q"));
        assert!(matches!(partial_trace(&rho, &[]), Err(Error::InvalidSelection(_))));
    }

    #[test]
    fn spectral_map_log_of_maximally_mixed() {
        let d = 4;
        let layout = SpaceLayout::single("q", d).unwrap();
        let rho = HermitianOperator::from_real_diag(
            layout,
            Unit::Dimensionless,
            &vec![1.0 / d as f64; d],
        )
        .unwrap();
        let ln = spectral_map(&rho, f64::ln, 1e-14).unwrap();
        let expect = -(d as f64).ln();
        for i in 0..d {
            assert!((ln.matrix()[(i, i)].re - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn spectral_map_log_zeroes_null_eigenvalues() {
        let layout = SpaceLayout::single("q", 3).unwrap();
        let op = HermitianOperator::from_real_diag(
            layout,
            Unit::Dimensionless,
            &[0.9, 0.1, 0.0],
        )
        .unwrap();
        let ln = spectral_map(&op, f64::ln, 1e-14).unwrap();
        let expected = [0.9f64.ln(), 0.1f64.ln(), 0.0];
        // diagonal input stays diagonal up to eigenvector ordering
        let mut got: Vec<f64> = (0..3).map(|i| ln.matrix()[(i, i)].re).collect();
        let mut want = expected.to_vec();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_map_identity_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let d = rng.gen_range(2..=6);
            let rho = random_density(&mut rng, SpaceLayout::single("q", d).unwrap());
            let op = HermitianOperator::new(
                rho.layout().clone(),
                Unit::Dimensionless,
                rho.matrix().clone(),
            )
            .unwrap();
            let mapped = spectral_map(&op, |x| x, 0.0).unwrap();
            for i in 0..d {
                for j in 0..d {
                    assert!((mapped.matrix()[(i, j)] - op.matrix()[(i, j)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spectral_map_complex_phase_evolution() {
        let omega = 2.0;
        let layout = SpaceLayout::single("q", 2).unwrap();
        let h = HermitianOperator::from_real_diag(layout, Unit::AngularFrequency, &[0.0, omega])
            .unwrap();
        let t = std::f64::consts::PI / omega;
        let u = spectral_map_complex(&h, |w| C64::from_polar(1.0, -w * t)).unwrap();
        assert!((u[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((u[(1, 1)] - c(-1.0, 0.0)).norm() < 1e-12);
        assert!(u[(0, 1)].norm() < 1e-12 && u[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn expectation_in_eigenstate_has_zero_variance() {
        let sz = sigma_z(qubit("q")).unwrap();
        let down = DensityOperator::pure(qubit("q"), &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let (mean, var) = expectation_and_variance(&sz, &down).unwrap();
        assert!((mean - 1.0).abs() < 1e-14);
        assert!(var <= 1e-14);
    }

    #[test]
    fn expectation_in_maximally_mixed_qubit() {
        let sz = sigma_z(qubit("q")).unwrap();
        let mixed = DensityOperator::new(
            qubit("q"),
            Array2::from_diag(&arr1(&[c(0.5, 0.0), c(0.5, 0.0)])),
        )
        .unwrap();
        let (mean, var) = expectation_and_variance(&sz, &mixed).unwrap();
        assert!(mean.abs() < 1e-14);
        assert!((var - 1.0).abs() < 1e-14);
    }

    #[test]
    fn expectation_rejects_foreign_labels() {
        let sz = sigma_z(qubit("other")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_density(&mut rng, qubit("q"));
        assert!(matches!(
            expectation_and_variance(&sz, &rho),
            Err(Error::LayoutConflict(_))
        ));
    }

    #[test]
    fn variance_in_any_eigenstate_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let d = rng.gen_range(2..=5);
            let layout = SpaceLayout::single("q", d).unwrap();
            // random Hermitian
            let mut m = Array2::zeros((d, d));
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                }
            }
            let herm = &m + &conj_transpose(&m);
            let h = HermitianOperator::new(layout.clone(), Unit::Dimensionless, herm).unwrap();
            let (_, vecs) = eigh(h.matrix()).unwrap();
            let k = rng.gen_range(0..d);
            let v: Vec<C64> = vecs.column(k).iter().cloned().collect();
            let rho = DensityOperator::pure(layout, &v).unwrap();
            let (_, var) = expectation_and_variance(&h, &rho).unwrap();
            assert!(var <= 1e-10, "variance {var} in eigenstate");
        }
    }

    #[test]
    fn evolve_at_zero_time_is_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let layout = SpaceLayout::single("q", 4).unwrap();
        let rho = random_density(&mut rng, layout.clone());
        let h = HermitianOperator::from_real_diag(
            layout,
            Unit::AngularFrequency,
            &[0.0, 1.0, 2.5, 3.0],
        )
        .unwrap();
        let out = evolve(&rho, &h, &[0.0]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((out[0].matrix()[(i, j)] - rho.matrix()[(i, j)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn evolve_commuting_state_is_stationary() {
        let layout = SpaceLayout::single("q", 3).unwrap();
        let h = HermitianOperator::from_real_diag(
            layout.clone(),
            Unit::AngularFrequency,
            &[0.0, 1.0, 2.0],
        )
        .unwrap();
        let rho = DensityOperator::new(
            layout,
            Array2::from_diag(&arr1(&[c(0.5, 0.0), c(0.3, 0.0), c(0.2, 0.0)])),
        )
        .unwrap();
        let out = evolve(&rho, &h, &[0.0, 0.7, 2.9]).unwrap();
        for state in &out {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((state.matrix()[(i, j)] - rho.matrix()[(i, j)]).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn evolve_preserves_purity_trace_and_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let layout = SpaceLayout::new(vec![("a", 2), ("b", 3)]).unwrap();
        // pure global state
        let v: Vec<C64> =
            (0..6).map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let rho = DensityOperator::pure(layout.clone(), &v).unwrap();
        let mut m = Array2::zeros((6, 6));
        for i in 0..6 {
            for j in 0..6 {
                m[(i, j)] = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let h = HermitianOperator::new(
            layout,
            Unit::AngularFrequency,
            &m + &conj_transpose(&m),
        )
        .unwrap();
        let spec0 = rho.eigenvalues().unwrap();
        let out = evolve(&rho, &h, &[0.0, 0.3, 1.1, 4.0]).unwrap();
        for state in &out {
            assert!((state.purity() - 1.0).abs() < 1e-10);
            assert!((trace(state.matrix()).re - 1.0).abs() < 1e-10);
            let spec = state.eigenvalues().unwrap();
            for (s0, s) in spec0.iter().zip(spec.iter()) {
                assert!((s0 - s).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn evolve_rejects_mismatched_layouts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_density(&mut rng, qubit("q"));
        let h = HermitianOperator::from_real_diag(
            SpaceLayout::single("r", 3).unwrap(),
            Unit::AngularFrequency,
            &[0.0, 1.0, 2.0],
        )
        .unwrap();
        assert!(matches!(evolve(&rho, &h, &[0.0]), Err(Error::LayoutConflict(_))));
    }

    #[test]
    fn embedding_matches_explicit_kron() {
        // sigma_z on the middle factor of a three-factor space
        let full = SpaceLayout::new(vec![("a", 2), ("b", 2), ("c", 3)]).unwrap();
        let sz = sigma_z(qubit("b")).unwrap();
        let emb = sz.embedded(&full).unwrap();
        let explicit = kron(
            &kron(&Array2::eye(2), sz.matrix()),
            &Array2::eye(3),
        );
        for i in 0..12 {
            for j in 0..12 {
                assert!((emb.matrix()[(i, j)] - explicit[(i, j)]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn embedding_handles_factor_reordering() {
        // operator declared on (c, a) embedded into (a, b, c)
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let oplayout = SpaceLayout::new(vec![("c", 3), ("a", 2)]).unwrap();
        let mut m = Array2::zeros((6, 6));
        for i in 0..6 {
            for j in 0..6 {
                m[(i, j)] = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let herm = &m + &conj_transpose(&m);
        let op = HermitianOperator::new(oplayout, Unit::Dimensionless, herm).unwrap();
        let full = SpaceLayout::new(vec![("a", 2), ("b", 2), ("c", 3)]).unwrap();
        let emb = op.embedded(&full).unwrap();
        // check against manual index arithmetic: full index = (a*2 + b)*3 + c
        for a1 in 0..2 {
            for b1 in 0..2 {
                for c1 in 0..3 {
                    for a2 in 0..2 {
                        for b2 in 0..2 {
                            for c2 in 0..3 {
                                let fi = (a1 * 2 + b1) * 3 + c1;
                                let fj = (a2 * 2 + b2) * 3 + c2;
                                let expect = if b1 == b2 {
                                    op.matrix()[(c1 * 2 + a1, c2 * 2 + a2)]
                                } else {
                                    c(0.0, 0.0)
                                };
                                assert!((emb.matrix()[(fi, fj)] - expect).norm() < 1e-15);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn density_operator_rejects_bad_trace_and_negativity() {
        let layout = qubit("q");
        let bad_trace = Array2::from_diag(&arr1(&[c(0.9, 0.0), c(0.2, 0.0)]));
        assert!(matches!(
            DensityOperator::new(layout.clone(), bad_trace),
            Err(Error::InvalidState(_))
        ));
        let negative = Array2::from_diag(&arr1(&[c(1.1, 0.0), c(-0.1, 0.0)]));
        assert!(matches!(
            DensityOperator::new(layout, negative),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn density_operator_clips_tiny_negative_eigenvalues() {
        let layout = qubit("q");
        let eps = 5e-11;
        let m = Array2::from_diag(&arr1(&[c(1.0 + eps, 0.0), c(-eps, 0.0)]));
        let rho = DensityOperator::new(layout, m).unwrap();
        let vals = rho.eigenvalues().unwrap();
        assert!(vals.iter().all(|&v| v >= -1e-15));
        assert!((trace(rho.matrix()).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_returns_column_eigenvectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let d = rng.gen_range(2..=6);
            let mut m = Array2::zeros((d, d));
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] = c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                }
            }
            let h = &m + &conj_transpose(&m);
            let (vals, vecs) = eigh(&h).unwrap();
            for k in 0..d {
                let col: Vec<C64> = vecs.column(k).iter().cloned().collect();
                for i in 0..d {
                    let hv: C64 = (0..d).map(|j| h[(i, j)] * col[j]).sum();
                    assert!(
                        (hv - col[i] * vals[k]).norm() < 1e-10,
                        "column {k} is not an eigenvector"
                    );
                }
            }
        }
    }

    #[test]
    fn hermiticity_check_rejects_asymmetric_matrix() {
        let layout = qubit("q");
        let mut m = Array2::zeros((2, 2));
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            HermitianOperator::new(layout, Unit::Dimensionless, m),
            Err(Error::NotHermitian(_))
        ));
    }
}
