//! Builders for the two worked measurement models.
//!
//! Spin-boson: each measured qubit correlates with a register of N apparatus
//! spins, and every apparatus spin couples through sigma_z to the position
//! quadrature of each bath mode. Boson-boson: a bosonic apparatus holding a
//! coherent-state pointer pair `{|alpha>, |-alpha>}` exchanges excitations
//! with the bath modes.
//!
//! Factor labels: `Q0..` measured qubits, `A{i}.{j}` apparatus spins (or `A`
//! for the bosonic apparatus), `E0..` environment modes. Q and A factors
//! always precede E factors, so a flat index splits as `qa * dim_E + e`.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::bath::{thermal_state_with_tol, weighted_bath_integral, BathSpec, Temperature};
use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation_matrix, conj_transpose, eigh, kron, tensor_density, DensityOperator,
    HermitianOperator, SpaceLayout, Unit,
};

/// Default cap on the total simulated dimension.
pub const DEFAULT_DIM_CAP: usize = 4096;
/// Hard cap on coherent-state truncation leakage.
const COHERENT_LEAK_TOL: f64 = 1e-10;

/// Normalized superposition weights of a measured qubit.
#[derive(Clone, Copy, Debug)]
pub struct Amplitudes {
    x: C64,
    y: C64,
}

impl Amplitudes {
    pub fn new(x: C64, y: C64) -> Result<Self> {
        let norm = x.norm_sqr() + y.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "|x|^2 + |y|^2 = {norm}, expected 1 within 1e-12"
            )));
        }
        Ok(Self { x, y })
    }

    pub fn balanced() -> Self {
        let inv = C64::new(1.0 / 2.0f64.sqrt(), 0.0);
        Self { x: inv, y: inv }
    }

    pub fn x(&self) -> C64 {
        self.x
    }

    pub fn y(&self) -> C64 {
        self.y
    }
}

/// Spin-boson measurement model: `m` qubits, `N` apparatus spins per qubit.
#[derive(Clone, Debug)]
pub struct SpinBosonModel {
    qubits: usize,
    spins_per_qubit: usize,
    /// Amplitudes over the 2^m qubit basis states.
    register: Vec<C64>,
    bath: BathSpec,
    temp: Temperature,
    dim_cap: usize,
    bath_leak_tol: f64,
}

impl SpinBosonModel {
    pub fn single_qubit(
        amplitudes: Amplitudes,
        spins_per_qubit: usize,
        bath: BathSpec,
        temp: Temperature,
    ) -> Result<Self> {
        Self::multi_qubit(1, spins_per_qubit, vec![amplitudes.x, amplitudes.y], bath, temp)
    }

    pub fn multi_qubit(
        qubits: usize,
        spins_per_qubit: usize,
        register: Vec<C64>,
        bath: BathSpec,
        temp: Temperature,
    ) -> Result<Self> {
        if qubits < 1 {
            return Err(Error::InvalidInput("need at least one measured qubit".into()));
        }
        if spins_per_qubit < 1 {
            return Err(Error::InvalidInput("need at least one apparatus spin per qubit".into()));
        }
        if register.len() != 1usize << qubits {
            return Err(Error::InvalidInput(format!(
                "register has {} amplitudes, expected {}",
                register.len(),
                1usize << qubits
            )));
        }
        let norm: f64 = register.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "register norm^2 = {norm}, expected 1 within 1e-12"
            )));
        }
        bath.validate()?;
        let model = Self {
            qubits,
            spins_per_qubit,
            register,
            bath,
            temp,
            dim_cap: DEFAULT_DIM_CAP,
            bath_leak_tol: crate::bath::DEFAULT_LEAK_TOL,
        };
        model.check_dim_cap()?;
        Ok(model)
    }

    pub fn with_dim_cap(mut self, cap: usize) -> Result<Self> {
        self.dim_cap = cap;
        self.check_dim_cap()?;
        Ok(self)
    }

    pub fn with_bath_leak_tol(mut self, tol: f64) -> Self {
        self.bath_leak_tol = tol;
        self
    }

    fn check_dim_cap(&self) -> Result<()> {
        let dim = self.simulated_dim();
        if dim > self.dim_cap {
            return Err(Error::TooLarge(format!(
                "total dimension {dim} exceeds the cap {}",
                self.dim_cap
            )));
        }
        Ok(())
    }

    fn simulated_dim(&self) -> usize {
        let qa = self.qa_dim();
        match &self.bath {
            BathSpec::Discrete { modes } => {
                modes.iter().fold(qa, |acc, m| acc.saturating_mul(m.trunc))
            }
            BathSpec::Continuum { .. } => qa,
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn spins_per_qubit(&self) -> usize {
        self.spins_per_qubit
    }

    pub fn q_dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn qa_dim(&self) -> usize {
        (1 << self.qubits) * (1 << (self.qubits * self.spins_per_qubit))
    }

    fn q_factors(&self) -> Vec<(String, usize)> {
        (0..self.qubits).map(|i| (format!("Q{i}"), 2)).collect()
    }

    fn a_factors(&self) -> Vec<(String, usize)> {
        let mut f = Vec::new();
        for i in 0..self.qubits {
            for j in 0..self.spins_per_qubit {
                f.push((format!("A{i}.{j}"), 2));
            }
        }
        f
    }

    pub fn qa_layout(&self) -> SpaceLayout {
        let mut f = self.q_factors();
        f.extend(self.a_factors());
        SpaceLayout::new(f).expect("labels are unique by construction")
    }

    pub fn a_layout(&self) -> SpaceLayout {
        SpaceLayout::new(self.a_factors()).expect("labels are unique by construction")
    }

    /// QA basis index of the branch labelled by qubit bitstring `b`
    /// (qubit 0 is the most significant bit).
    fn branch_qa_index(&self, b: usize) -> usize {
        b * (1 << (self.qubits * self.spins_per_qubit)) + self.branch_a_index(b)
    }

    fn branch_a_index(&self, b: usize) -> usize {
        let total_spins = self.qubits * self.spins_per_qubit;
        let mut idx = 0usize;
        for i in 0..self.qubits {
            let bit = (b >> (self.qubits - 1 - i)) & 1;
            for j in 0..self.spins_per_qubit {
                let pos = i * self.spins_per_qubit + j;
                idx += bit << (total_spins - 1 - pos);
            }
        }
        idx
    }

    /// Branch weights `|c_b|^2` over the 2^m outcomes.
    pub fn branch_weights(&self) -> Vec<f64> {
        self.register.iter().map(|c| c.norm_sqr()).collect()
    }

    fn pre_vector(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.qa_dim()];
        for (b, &c) in self.register.iter().enumerate() {
            v[self.branch_qa_index(b)] = c;
        }
        v
    }

    /// Diagonal of `sum_{i,j} sigma_z^(i,j)` over the apparatus basis.
    fn collective_spin_diag(&self) -> Vec<f64> {
        let total_spins = self.qubits * self.spins_per_qubit;
        let da = 1usize << total_spins;
        (0..da)
            .map(|a| {
                let mut acc = 0.0;
                for pos in 0..total_spins {
                    let s = (a >> (total_spins - 1 - pos)) & 1;
                    acc += 1.0 - 2.0 * s as f64;
                }
                acc
            })
            .collect()
    }
}

/// Boson-boson measurement model: coherent pointer states `|+-alpha>`.
#[derive(Clone, Debug)]
pub struct BosonBosonModel {
    alpha: C64,
    amplitudes: Amplitudes,
    apparatus_trunc: usize,
    bath: BathSpec,
    temp: Temperature,
    dim_cap: usize,
    bath_leak_tol: f64,
}

/// Default apparatus truncation: a Poisson tail bound keeping the coherent
/// leakage below 1e-10 for |alpha| <= 4.
pub fn default_apparatus_trunc(alpha: C64) -> usize {
    let a = alpha.norm();
    (a * a + 8.0 * a + 10.0).ceil() as usize
}

/// Fock amplitudes of a truncated coherent state plus the discarded mass.
/// The returned vector is not renormalized.
pub fn coherent_amplitudes(alpha: C64, trunc: usize) -> (Vec<C64>, f64) {
    let mut v = Vec::with_capacity(trunc);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    let mut mass = 0.0;
    for n in 0..trunc {
        if n > 0 {
            c *= alpha / C64::new((n as f64).sqrt(), 0.0);
        }
        mass += c.norm_sqr();
        v.push(c);
    }
    (v, (1.0 - mass).max(0.0))
}

impl BosonBosonModel {
    pub fn new(
        alpha: C64,
        amplitudes: Amplitudes,
        apparatus_trunc: Option<usize>,
        bath: BathSpec,
        temp: Temperature,
    ) -> Result<Self> {
        if alpha.norm() <= 0.0 {
            return Err(Error::InvalidInput("alpha must be nonzero".into()));
        }
        let apparatus_trunc = apparatus_trunc.unwrap_or_else(|| default_apparatus_trunc(alpha));
        let (_, leak) = coherent_amplitudes(alpha, apparatus_trunc);
        if leak > COHERENT_LEAK_TOL {
            return Err(Error::TruncationTooSmall(format!(
                "coherent-state truncation {apparatus_trunc} leaks {leak:.3e} > {COHERENT_LEAK_TOL:.1e}"
            )));
        }
        bath.validate()?;
        let model = Self {
            alpha,
            amplitudes,
            apparatus_trunc,
            bath,
            temp,
            dim_cap: DEFAULT_DIM_CAP,
            bath_leak_tol: crate::bath::DEFAULT_LEAK_TOL,
        };
        model.check_dim_cap()?;
        Ok(model)
    }

    pub fn with_dim_cap(mut self, cap: usize) -> Result<Self> {
        self.dim_cap = cap;
        self.check_dim_cap()?;
        Ok(self)
    }

    pub fn with_bath_leak_tol(mut self, tol: f64) -> Self {
        self.bath_leak_tol = tol;
        self
    }

    fn check_dim_cap(&self) -> Result<()> {
        let dim = self.simulated_dim();
        if dim > self.dim_cap {
            return Err(Error::TooLarge(format!(
                "total dimension {dim} exceeds the cap {}",
                self.dim_cap
            )));
        }
        Ok(())
    }

    fn simulated_dim(&self) -> usize {
        let qa = self.qa_dim();
        match &self.bath {
            BathSpec::Discrete { modes } => {
                modes.iter().fold(qa, |acc, m| acc.saturating_mul(m.trunc))
            }
            BathSpec::Continuum { .. } => qa,
        }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn q_dim(&self) -> usize {
        2
    }

    pub fn qa_dim(&self) -> usize {
        2 * self.apparatus_trunc
    }

    pub fn apparatus_trunc(&self) -> usize {
        self.apparatus_trunc
    }

    pub fn qa_layout(&self) -> SpaceLayout {
        SpaceLayout::new(vec![("Q0".to_string(), 2), ("A".to_string(), self.apparatus_trunc)])
            .expect("labels are unique")
    }

    pub fn a_layout(&self) -> SpaceLayout {
        SpaceLayout::single("A", self.apparatus_trunc).expect("valid layout")
    }

    /// Normalized truncated pointer states `|alpha>` and `|-alpha>`.
    fn pointer_vectors(&self) -> (Vec<C64>, Vec<C64>) {
        let (mut plus, _) = coherent_amplitudes(self.alpha, self.apparatus_trunc);
        let (mut minus, _) = coherent_amplitudes(-self.alpha, self.apparatus_trunc);
        for v in [&mut plus, &mut minus] {
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in v.iter_mut() {
                *z /= norm;
            }
        }
        (plus, minus)
    }

    pub fn branch_weights(&self) -> Vec<f64> {
        vec![self.amplitudes.x.norm_sqr(), self.amplitudes.y.norm_sqr()]
    }

    fn pre_vector(&self) -> Vec<C64> {
        let (plus, minus) = self.pointer_vectors();
        let d = self.apparatus_trunc;
        let mut v = vec![C64::new(0.0, 0.0); 2 * d];
        for n in 0..d {
            v[n] = self.amplitudes.x * plus[n];
            v[d + n] = self.amplitudes.y * minus[n];
        }
        v
    }
}

/// Either worked measurement model, exposing the shared operations.
#[derive(Clone, Debug)]
pub enum MeasurementModel {
    SpinBoson(SpinBosonModel),
    BosonBoson(BosonBosonModel),
}

/// Closed-form interaction-energy scale of a model.
#[derive(Clone, Copy, Debug)]
pub struct InteractionScale {
    /// Variance used in the bound, (rad/s)^2.
    pub variance: f64,
    /// Standard deviation, rad/s.
    pub delta: f64,
    /// Exact variance for the boson-boson model (keeps the `1 + |alpha|^2`
    /// occupation term the large-alpha form drops).
    pub variance_exact: Option<f64>,
    pub delta_exact: Option<f64>,
    /// State correlator prefactor (spin-boson).
    pub chi: Option<f64>,
    /// `sum_k g_k^2 coth(theta_k/2)` or its continuum version, (rad/s)^2.
    pub bath_integral: f64,
}

impl MeasurementModel {
    pub fn bath(&self) -> &BathSpec {
        match self {
            MeasurementModel::SpinBoson(m) => &m.bath,
            MeasurementModel::BosonBoson(m) => &m.bath,
        }
    }

    pub fn temperature(&self) -> Temperature {
        match self {
            MeasurementModel::SpinBoson(m) => m.temp,
            MeasurementModel::BosonBoson(m) => m.temp,
        }
    }

    pub fn bath_leak_tol(&self) -> f64 {
        match self {
            MeasurementModel::SpinBoson(m) => m.bath_leak_tol,
            MeasurementModel::BosonBoson(m) => m.bath_leak_tol,
        }
    }

    pub fn dim_cap(&self) -> usize {
        match self {
            MeasurementModel::SpinBoson(m) => m.dim_cap,
            MeasurementModel::BosonBoson(m) => m.dim_cap,
        }
    }

    /// Number of distinct pointer outcomes the apparatus can record.
    pub fn outcome_count(&self) -> u32 {
        match self {
            MeasurementModel::SpinBoson(m) => 1u32 << m.qubits,
            MeasurementModel::BosonBoson(_) => 2,
        }
    }

    /// Whether the pointer projectors commute with the interaction exactly.
    pub fn exact_pointer_basis(&self) -> bool {
        matches!(self, MeasurementModel::SpinBoson(_))
    }

    pub fn descriptor(&self) -> String {
        match self {
            MeasurementModel::SpinBoson(m) => {
                let modes = match &m.bath {
                    BathSpec::Discrete { modes } => modes.len().to_string(),
                    BathSpec::Continuum { .. } => "continuum".into(),
                };
                format!(
                    "spin_boson(m={} N={} bath={})",
                    m.qubits, m.spins_per_qubit, modes
                )
            }
            MeasurementModel::BosonBoson(m) => {
                let modes = match &m.bath {
                    BathSpec::Discrete { modes } => modes.len().to_string(),
                    BathSpec::Continuum { .. } => "continuum".into(),
                };
                format!(
                    "boson_boson(|alpha|={} trunc={} bath={})",
                    m.alpha.norm(),
                    m.apparatus_trunc,
                    modes
                )
            }
        }
    }

    pub fn qa_layout(&self) -> SpaceLayout {
        match self {
            MeasurementModel::SpinBoson(m) => m.qa_layout(),
            MeasurementModel::BosonBoson(m) => m.qa_layout(),
        }
    }

    pub fn q_dim(&self) -> usize {
        match self {
            MeasurementModel::SpinBoson(m) => m.q_dim(),
            MeasurementModel::BosonBoson(m) => m.q_dim(),
        }
    }

    pub fn qa_dim(&self) -> usize {
        match self {
            MeasurementModel::SpinBoson(m) => m.qa_dim(),
            MeasurementModel::BosonBoson(m) => m.qa_dim(),
        }
    }

    /// Labels of the Q factors (kept by the outcome marginal).
    pub fn q_labels(&self) -> Vec<String> {
        match self {
            MeasurementModel::SpinBoson(m) => {
                (0..m.qubits).map(|i| format!("Q{i}")).collect()
            }
            MeasurementModel::BosonBoson(_) => vec!["Q0".to_string()],
        }
    }

    fn env_factors(&self) -> Result<Vec<(String, usize)>> {
        let modes = self.bath().discrete_modes()?;
        Ok(modes
            .iter()
            .enumerate()
            .map(|(k, m)| (format!("E{k}"), m.trunc))
            .collect())
    }

    pub fn full_layout(&self) -> Result<SpaceLayout> {
        let mut f = self.qa_layout().factors().to_vec();
        f.extend(self.env_factors()?);
        SpaceLayout::new(f)
    }

    pub fn env_layout(&self) -> Result<SpaceLayout> {
        SpaceLayout::new(self.env_factors()?)
    }

    /// State of Q and A right after the pre-measurement stage: a rank-1
    /// projector onto the branch superposition.
    pub fn pre_measurement_state(&self) -> Result<DensityOperator> {
        let (layout, v) = match self {
            MeasurementModel::SpinBoson(m) => (m.qa_layout(), m.pre_vector()),
            MeasurementModel::BosonBoson(m) => (m.qa_layout(), m.pre_vector()),
        };
        DensityOperator::pure(layout, &v)
    }

    /// Statistical mixture of the pointer branches the joint state approaches.
    pub fn post_measurement_state(&self) -> Result<DensityOperator> {
        let layout = self.qa_layout();
        let d = layout.dim();
        let mut matrix = Array2::zeros((d, d));
        for (w, v) in self.branch_projector_parts()? {
            for i in 0..d {
                if v[i].norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..d {
                    matrix[(i, j)] += v[i] * v[j].conj() * w;
                }
            }
        }
        DensityOperator::new(layout, matrix)
    }

    /// Per-branch weights and normalized QA branch vectors.
    fn branch_projector_parts(&self) -> Result<Vec<(f64, Vec<C64>)>> {
        match self {
            MeasurementModel::SpinBoson(m) => {
                let d = m.qa_dim();
                Ok(m.register
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.norm_sqr() > 0.0)
                    .map(|(b, c)| {
                        let mut v = vec![C64::new(0.0, 0.0); d];
                        v[m.branch_qa_index(b)] = C64::new(1.0, 0.0);
                        (c.norm_sqr(), v)
                    })
                    .collect())
            }
            MeasurementModel::BosonBoson(m) => {
                let (plus, minus) = m.pointer_vectors();
                let d = m.apparatus_trunc;
                let mut v0 = vec![C64::new(0.0, 0.0); 2 * d];
                let mut v1 = vec![C64::new(0.0, 0.0); 2 * d];
                v0[..d].copy_from_slice(&plus);
                v1[d..].copy_from_slice(&minus);
                Ok(vec![
                    (m.amplitudes.x.norm_sqr(), v0),
                    (m.amplitudes.y.norm_sqr(), v1),
                ])
            }
        }
    }

    /// Interaction Hamiltonian on the A and E factors (discrete baths only).
    pub fn interaction_hamiltonian_ae(&self) -> Result<HermitianOperator> {
        let modes = self.bath().discrete_modes()?;
        match self {
            MeasurementModel::SpinBoson(m) => {
                let a_layout = m.a_layout();
                let h1 = HermitianOperator::from_real_diag(
                    a_layout,
                    Unit::Dimensionless,
                    &m.collective_spin_diag(),
                )?;
                let env_layout = self.env_layout()?;
                let mut quad = HermitianOperator::zero(env_layout.clone(), Unit::AngularFrequency);
                for (k, mode) in modes.iter().enumerate() {
                    let single = crate::hilbert::ladder_sum(
                        SpaceLayout::single(format!("E{k}"), mode.trunc)?,
                    )?
                    .scaled(mode.coupling)
                    .with_unit(Unit::AngularFrequency);
                    quad = quad.add(&single.embedded(&env_layout)?)?;
                }
                let mut factors = h1.layout().factors().to_vec();
                factors.extend(env_layout.factors().to_vec());
                let layout = SpaceLayout::new(factors)?;
                HermitianOperator::new(
                    layout,
                    Unit::AngularFrequency,
                    kron(h1.matrix(), quad.matrix()),
                )
            }
            MeasurementModel::BosonBoson(m) => {
                let env_layout = self.env_layout()?;
                let mut factors = vec![("A".to_string(), m.apparatus_trunc)];
                factors.extend(env_layout.factors().to_vec());
                let layout = SpaceLayout::new(factors)?;
                let b = annihilation_matrix(m.apparatus_trunc);
                let bdag = conj_transpose(&b);
                let mut total = HermitianOperator::zero(layout.clone(), Unit::AngularFrequency);
                for (k, mode) in modes.iter().enumerate() {
                    let a = annihilation_matrix(mode.trunc);
                    let adag = conj_transpose(&a);
                    let term = kron(&b, &adag) + kron(&bdag, &a);
                    let pair_layout = SpaceLayout::new(vec![
                        ("A".to_string(), m.apparatus_trunc),
                        (format!("E{k}"), mode.trunc),
                    ])?;
                    let op = HermitianOperator::new(
                        pair_layout,
                        Unit::AngularFrequency,
                        term.mapv(|z| z * mode.coupling),
                    )?;
                    total = total.add(&op.embedded(&layout)?)?;
                }
                Ok(total)
            }
        }
    }

    /// Interaction Hamiltonian embedded on the full Q-A-E layout.
    pub fn interaction_hamiltonian(&self) -> Result<HermitianOperator> {
        let full = self.full_layout()?;
        self.interaction_hamiltonian_ae()?.embedded(&full)
    }

    /// Free bath Hamiltonian `sum_k omega_k n_k` on the E factors.
    pub fn bath_hamiltonian(&self) -> Result<HermitianOperator> {
        let modes = self.bath().discrete_modes()?;
        let env_layout = self.env_layout()?;
        let mut total = HermitianOperator::zero(env_layout.clone(), Unit::AngularFrequency);
        for (k, mode) in modes.iter().enumerate() {
            let n = crate::hilbert::number_operator(SpaceLayout::single(
                format!("E{k}"),
                mode.trunc,
            )?)?
            .scaled(mode.omega)
            .with_unit(Unit::AngularFrequency);
            total = total.add(&n.embedded(&env_layout)?)?;
        }
        Ok(total)
    }

    /// Optional apparatus Hamiltonian at a given frequency: a collective
    /// sigma_z splitting for spin registers, `omega_a b^dag b` for the
    /// bosonic apparatus. Both commute with the ideal pointer projectors.
    pub fn apparatus_hamiltonian(&self, omega_a: f64) -> Result<HermitianOperator> {
        match self {
            MeasurementModel::SpinBoson(m) => {
                let diag: Vec<f64> =
                    m.collective_spin_diag().iter().map(|z| 0.5 * omega_a * z).collect();
                HermitianOperator::from_real_diag(m.a_layout(), Unit::AngularFrequency, &diag)
            }
            MeasurementModel::BosonBoson(m) => Ok(crate::hilbert::number_operator(m.a_layout())?
                .scaled(omega_a)
                .with_unit(Unit::AngularFrequency)),
        }
    }

    /// Product of truncated thermal states over the bath modes.
    pub fn environment_state(&self) -> Result<DensityOperator> {
        let modes = self.bath().discrete_modes()?;
        let temp = self.temperature();
        let tol = self.bath_leak_tol();
        let states: Vec<DensityOperator> = modes
            .iter()
            .enumerate()
            .map(|(k, m)| {
                thermal_state_with_tol(m.omega, temp, m.trunc, tol, &format!("E{k}"))
                    .map(|t| t.state)
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&DensityOperator> = states.iter().collect();
        tensor_density(&refs)
    }

    /// Initial global state: pre-measurement projector tensor thermal bath.
    pub fn initial_global_state(&self) -> Result<DensityOperator> {
        let pre = self.pre_measurement_state()?;
        let env = self.environment_state()?;
        tensor_density(&[&pre, &env])
    }

    /// State correlator prefactor `chi = sum_{i1,i2} <h_{i1,1} h_{i2,1}>`
    /// on the pre-measurement state (spin-boson only; 1 for one qubit).
    pub fn chi_prefactor(&self) -> Result<f64> {
        match self {
            MeasurementModel::SpinBoson(m) => {
                let rho = self.pre_measurement_state()?;
                let qa = m.qa_layout();
                let da = 1usize << (m.qubits * m.spins_per_qubit);
                let total_spins = m.qubits * m.spins_per_qubit;
                // diagonal of sigma_z on spin (i, 0) over the QA basis
                let dqa = qa.dim();
                let diag_for = |i: usize| -> Vec<f64> {
                    let pos = i * m.spins_per_qubit;
                    (0..dqa)
                        .map(|idx| {
                            let a = idx % da;
                            let s = (a >> (total_spins - 1 - pos)) & 1;
                            1.0 - 2.0 * s as f64
                        })
                        .collect()
                };
                let diags: Vec<Vec<f64>> = (0..m.qubits).map(diag_for).collect();
                let mut chi = 0.0;
                for d1 in &diags {
                    for d2 in &diags {
                        let mut acc = 0.0;
                        for idx in 0..dqa {
                            acc += d1[idx] * d2[idx] * rho.matrix()[(idx, idx)].re;
                        }
                        chi += acc;
                    }
                }
                Ok(chi)
            }
            MeasurementModel::BosonBoson(_) => Err(Error::InvalidInput(
                "the correlator prefactor is defined for the spin-boson model".into(),
            )),
        }
    }

    /// Closed-form interaction-energy scale.
    pub fn interaction_scale(&self) -> Result<InteractionScale> {
        let temp = self.temperature();
        let integral = crate::bath::bath_integral(self.bath(), temp)?;
        match self {
            MeasurementModel::SpinBoson(m) => {
                let chi = self.chi_prefactor()?;
                let n = m.spins_per_qubit as f64;
                let variance = chi * n * n * integral;
                Ok(InteractionScale {
                    variance,
                    delta: variance.sqrt(),
                    variance_exact: None,
                    delta_exact: None,
                    chi: Some(chi),
                    bath_integral: integral,
                })
            }
            MeasurementModel::BosonBoson(m) => {
                let msq = m.alpha.norm_sqr();
                let variance = msq * integral;
                // exact second moment keeps the vacuum contribution:
                // sum g^2 ((1 + M) n + M (n + 1)) = (1 + 2M) sum g^2 n + M sum g^2
                let i_n = weighted_bath_integral(self.bath(), temp, |_theta, n| n)?;
                let i_1 = weighted_bath_integral(self.bath(), temp, |_theta, _n| 1.0)?;
                let exact = (1.0 + 2.0 * msq) * i_n + msq * i_1;
                Ok(InteractionScale {
                    variance,
                    delta: variance.sqrt(),
                    variance_exact: Some(exact),
                    delta_exact: Some(exact.sqrt()),
                    chi: None,
                    bath_integral: integral,
                })
            }
        }
    }

    /// Pointer projectors on the apparatus factors.
    pub fn pointer_projectors_a(&self) -> Result<Vec<HermitianOperator>> {
        match self {
            MeasurementModel::SpinBoson(m) => {
                let layout = m.a_layout();
                let da = layout.dim();
                (0..m.q_dim())
                    .map(|b| {
                        let mut diag = vec![0.0; da];
                        diag[m.branch_a_index(b)] = 1.0;
                        HermitianOperator::from_real_diag(
                            layout.clone(),
                            Unit::Dimensionless,
                            &diag,
                        )
                    })
                    .collect()
            }
            MeasurementModel::BosonBoson(m) => {
                let layout = m.a_layout();
                let (plus, minus) = m.pointer_vectors();
                [plus, minus]
                    .into_iter()
                    .map(|v| {
                        let d = v.len();
                        let mut p = Array2::zeros((d, d));
                        for i in 0..d {
                            for j in 0..d {
                                p[(i, j)] = v[i] * v[j].conj();
                            }
                        }
                        HermitianOperator::new(layout.clone(), Unit::Dimensionless, p)
                    })
                    .collect()
            }
        }
    }

    /// Worst-case normalized commutation defect between the interaction and
    /// the pointer projectors: `max_j ||[H_int, P_j x 1]||_2 / ||H_int||_2`.
    pub fn pointer_commutation_defect(&self) -> Result<f64> {
        let h = self.interaction_hamiltonian_ae()?;
        let h_norm = h.spectral_norm()?;
        if h_norm == 0.0 {
            return Ok(0.0);
        }
        let layout = h.layout().clone();
        let mut worst = 0.0f64;
        for p in self.pointer_projectors_a()? {
            let emb = p.embedded(&layout)?;
            let hp = h.matrix().dot(emb.matrix());
            let ph = emb.matrix().dot(h.matrix());
            // i [H, P] is Hermitian; its spectral norm is the commutator norm
            let ic = (&hp - &ph).mapv(|z| z * C64::new(0.0, 1.0));
            let (vals, _) = eigh(&ic)?;
            let norm = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            worst = worst.max(norm / h_norm);
        }
        Ok(worst)
    }
}
