//! Exact global unitary propagation of the system-apparatus-environment
//! state for discrete-bath models, recording the entropy flow of the reduced
//! Q-A state and everything needed to verify the entropy speed limit and the
//! relative-entropy rate identity along the way.
//!
//! The engine diagonalizes the full Hamiltonian once and keeps the evolving
//! state in the energy eigenbasis, where time evolution is a phase rotation.
//! Reduced Q-A matrix elements are pulled out either through precomputed
//! extraction matrices (small Q-A dimension) or a per-sample rotation (large
//! Q-A dimension); interaction-energy moments always reduce to inexpensive
//! matrix-vector products against the phase vector.

use ndarray::prelude::*;
use num_complex::Complex64 as C64;

use crate::entropy::{
    entropy_and_varentropy, relative_entropy_lenient, relative_entropy_to, ReferenceState,
};
use crate::error::{Error, Result};
use crate::hilbert::{conj_transpose, eigh, DensityOperator, HermitianOperator, Unit};
use crate::models::MeasurementModel;

/// Memory budget for the precomputed reduced-state extraction matrices.
const EXTRACTION_BUDGET_BYTES: usize = 400 << 20;

/// Sampling and Hamiltonian options for a trajectory run.
#[derive(Clone, Debug)]
pub struct TrajectoryOptions {
    /// Number of uniform samples (including t = 0).
    pub samples: usize,
    /// Final time in seconds; defaults to `5 / delta_H_int`.
    pub t_max: Option<f64>,
    /// Include the free bath Hamiltonian `sum_k omega_k n_k`.
    pub include_bath_hamiltonian: bool,
    /// Include the interaction (disable to freeze the dynamics).
    pub include_interaction: bool,
    /// Optional apparatus self-Hamiltonian frequency (rad/s).
    pub apparatus_frequency: Option<f64>,
    /// Number of samples at which the full global spectrum is re-diagonalized
    /// to certify unitarity.
    pub spectrum_checks: usize,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            samples: 400,
            t_max: None,
            include_bath_hamiltonian: true,
            include_interaction: true,
            apparatus_frequency: None,
            spectrum_checks: 5,
        }
    }
}

/// Uniform sample grid over `[0, t_max]` with `opts.samples` points.
pub fn sample_times(model: &MeasurementModel, opts: &TrajectoryOptions) -> Result<Vec<f64>> {
    if opts.samples < 3 {
        return Err(Error::InsufficientSamples(format!(
            "need at least 3 samples, got {}",
            opts.samples
        )));
    }
    let t_max = match opts.t_max {
        Some(t) if t > 0.0 => t,
        Some(t) => {
            return Err(Error::InvalidInput(format!("t_max must be positive, got {t}")));
        }
        None => {
            let delta = model.interaction_scale()?.delta;
            if delta <= 0.0 {
                return Err(Error::InvalidInput(
                    "cannot choose a default time span for a vanishing interaction".into(),
                ));
            }
            5.0 / delta
        }
    };
    let n = opts.samples;
    Ok((0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect())
}

/// Time series of everything the verifier needs.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Von Neumann entropy of the reduced Q-A state, nats.
    pub entropy: Vec<f64>,
    /// Varentropy of the reduced Q-A state, nats^2.
    pub varentropy: Vec<f64>,
    /// Relative entropy to the post-measurement mixture, nats.
    pub rel_entropy: Vec<f64>,
    /// Variance of the interaction Hamiltonian in the global state, (rad/s)^2.
    pub interaction_variance: Vec<f64>,
    /// Outcome populations (one inner vector per sample).
    pub populations: Vec<Vec<f64>>,
    /// Speed-limit margin `2 sqrt(varentropy * var_H) - |dS/dt|`, nats/s.
    pub speed_margin: Vec<f64>,
    /// |dS/dt| half-step finite-difference discrepancy, nats/s.
    pub rate_sensitivity: f64,
    /// Same for the relative-entropy rate.
    pub rel_rate_sensitivity: f64,
    /// Entropy of the post-measurement mixture, nats.
    pub post_entropy: f64,
    /// Whether the model's pointer basis commutes with the interaction exactly.
    pub exact_pointer: bool,
    /// Worst support leakage seen by the relative entropy (approximate models).
    pub support_leak_max: f64,
    /// Worst deviation of the population sum from 1.
    pub population_sum_defect: f64,
    /// Worst drift of any outcome population from its initial value.
    pub population_drift: f64,
    /// Worst drift of the interaction variance from its initial value,
    /// relative to the initial value.
    pub interaction_variance_drift: f64,
    /// Worst sorted-eigenvalue deviation of the global state across the
    /// re-diagonalized check samples.
    pub spectrum_drift: f64,
    /// Orthonormality defect of the Hamiltonian eigenbasis.
    pub eigenbasis_defect: f64,
    /// Global purity of the initial state (1 for a pure environment).
    pub initial_purity: f64,
}

struct ReducedExtractor {
    /// Precomputed `rho0_eig hadamard G_ab^T` for the upper triangle (a <= b).
    matrices: Option<Vec<Array2<C64>>>,
    dqa: usize,
    de: usize,
}

impl ReducedExtractor {
    fn new(v: &Array2<C64>, rho0_eig: &Array2<C64>, dqa: usize, de: usize) -> Self {
        let n = v.nrows();
        let pairs = dqa * (dqa + 1) / 2;
        let needed = pairs.saturating_mul(n).saturating_mul(n).saturating_mul(16);
        if needed > EXTRACTION_BUDGET_BYTES {
            return Self { matrices: None, dqa, de };
        }
        let mut matrices = Vec::with_capacity(pairs);
        for a in 0..dqa {
            let va = v.slice(s![a * de..(a + 1) * de, ..]);
            for b in a..dqa {
                let vb = v.slice(s![b * de..(b + 1) * de, ..]);
                // g_ab[l, k] = sum_e conj(V[(b,e), l]) V[(a,e), k]
                let g = conj_transpose(&vb.to_owned()).dot(&va);
                // m_ab[k, l] = rho0_eig[k, l] * g_ab[l, k]
                let mut m = Array2::zeros((n, n));
                for k in 0..n {
                    for l in 0..n {
                        m[(k, l)] = rho0_eig[(k, l)] * g[(l, k)];
                    }
                }
                matrices.push(m);
            }
        }
        Self { matrices: Some(matrices), dqa, de }
    }

    /// Reduced Q-A matrix at the sample described by the phase vector.
    fn reduced(
        &self,
        v: &Array2<C64>,
        rho0_eig: &Array2<C64>,
        phases: &Array1<C64>,
        conj_phases: &Array1<C64>,
    ) -> Array2<C64> {
        let dqa = self.dqa;
        let mut out = Array2::zeros((dqa, dqa));
        match &self.matrices {
            Some(ms) => {
                let mut idx = 0;
                for a in 0..dqa {
                    for b in a..dqa {
                        let w = ms[idx].dot(conj_phases);
                        let val: C64 =
                            phases.iter().zip(w.iter()).map(|(p, x)| p * x).sum();
                        out[(a, b)] = val;
                        out[(b, a)] = val.conj();
                        idx += 1;
                    }
                }
            }
            None => {
                // W = V diag(phases); y = W rho0_eig;
                // reduced[a,b] = sum_e <W row (b,e), y row (a,e)>
                let mut w = v.clone();
                for (k, col) in w.columns_mut().into_iter().enumerate() {
                    let p = phases[k];
                    let mut col = col;
                    col.mapv_inplace(|z| z * p);
                }
                let y = w.dot(rho0_eig);
                let de = self.de;
                for a in 0..dqa {
                    let ya = y.slice(s![a * de..(a + 1) * de, ..]);
                    for b in a..dqa {
                        let wb = w.slice(s![b * de..(b + 1) * de, ..]);
                        let val: C64 = ya
                            .iter()
                            .zip(wb.iter())
                            .map(|(yv, wv)| yv * wv.conj())
                            .sum();
                        out[(a, b)] = val;
                        out[(b, a)] = val.conj();
                    }
                }
            }
        }
        out
    }
}

/// Propagate the model and sample the trajectory observables.
///
/// `times` must start at 0 and be strictly increasing.
pub fn run_trajectory(
    model: &MeasurementModel,
    times: &[f64],
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    if times.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "need at least 3 samples, got {}",
            times.len()
        )));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidInput("the sample grid must start at t = 0".into()));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidInput("times must be strictly increasing".into()));
        }
    }
    let full = model.full_layout()?;
    let n = full.dim();
    if n > model.dim_cap() {
        return Err(Error::TooLarge(format!(
            "total dimension {n} exceeds the cap {}",
            model.dim_cap()
        )));
    }
    let dqa = model.qa_dim();
    let de = n / dqa;

    // Hamiltonian pieces
    let h_int = if opts.include_interaction {
        model.interaction_hamiltonian()?
    } else {
        HermitianOperator::zero(full.clone(), Unit::AngularFrequency)
    };
    let mut h_total = h_int.clone();
    if opts.include_bath_hamiltonian {
        h_total = h_total.add(&model.bath_hamiltonian()?.embedded(&full)?)?;
    }
    if let Some(omega_a) = opts.apparatus_frequency {
        h_total = h_total.add(&model.apparatus_hamiltonian(omega_a)?.embedded(&full)?)?;
    }

    // reference states
    let rho_m = model.post_measurement_state()?;
    let post_entropy = crate::entropy::von_neumann_entropy(&rho_m)?;
    let sigma = ReferenceState::new(&rho_m)?;
    let exact_pointer = model.exact_pointer_basis();
    let qa_layout = model.qa_layout();
    let q_labels = model.q_labels();
    let q_label_refs: Vec<&str> = q_labels.iter().map(|s| s.as_str()).collect();

    // initial state and the one eigendecomposition the run reuses
    let rho0 = model.initial_global_state()?;
    let initial_purity = rho0.purity();
    let (evals, vecs) = eigh(h_total.matrix())?;
    let vdag = conj_transpose(&vecs);
    let eigenbasis_defect = {
        let g = vdag.dot(&vecs);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - C64::new(expect, 0.0)).norm());
            }
        }
        worst
    };
    let rho0_eig = vdag.dot(rho0.matrix()).dot(&vecs);
    let k1 = vdag.dot(h_int.matrix()).dot(&vecs);
    let k2 = k1.dot(&k1);
    // moment kernels: tr(rho(t) K) = sum_kl M[k,l] p_k conj(p_l)
    let mut m1 = Array2::zeros((n, n));
    let mut m2 = Array2::zeros((n, n));
    for k in 0..n {
        for l in 0..n {
            m1[(k, l)] = rho0_eig[(k, l)] * k1[(l, k)];
            m2[(k, l)] = rho0_eig[(k, l)] * k2[(l, k)];
        }
    }
    let extractor = ReducedExtractor::new(&vecs, &rho0_eig, dqa, de);

    // reference spectrum for the unitarity checks
    let spectrum0 = {
        let (vals, _) = eigh(&rho0_eig)?;
        vals
    };
    let check_indices: Vec<usize> = if opts.spectrum_checks == 0 {
        Vec::new()
    } else {
        let c = opts.spectrum_checks.min(times.len());
        (0..c).map(|i| i * (times.len() - 1) / (c.max(2) - 1).max(1)).collect()
    };

    let samples = times.len();
    let mut entropy = Vec::with_capacity(samples);
    let mut varentropy_series = Vec::with_capacity(samples);
    let mut rel_entropy = Vec::with_capacity(samples);
    let mut interaction_variance = Vec::with_capacity(samples);
    let mut populations = Vec::with_capacity(samples);
    let mut support_leak_max = 0.0f64;
    let mut spectrum_drift = 0.0f64;

    for (i, &t) in times.iter().enumerate() {
        let phases = Array1::from_iter(evals.iter().map(|&w| C64::from_polar(1.0, -w * t)));
        let conj_phases = phases.mapv(|z| z.conj());

        // interaction-energy moments
        let w1 = m1.dot(&conj_phases);
        let mean: C64 = phases.iter().zip(w1.iter()).map(|(p, x)| p * x).sum();
        let w2 = m2.dot(&conj_phases);
        let second: C64 = phases.iter().zip(w2.iter()).map(|(p, x)| p * x).sum();
        interaction_variance.push((second.re - mean.re * mean.re).max(0.0));

        // reduced Q-A state
        let mut reduced = extractor.reduced(&vecs, &rho0_eig, &phases, &conj_phases);
        // kill the residual anti-Hermitian rounding before validation
        let herm = conj_transpose(&reduced);
        reduced.zip_mut_with(&herm, |a, &b| *a = 0.5 * (*a + b));
        let rho_qa = DensityOperator::new(qa_layout.clone(), reduced)?;

        let (s, v) = entropy_and_varentropy(&rho_qa)?;
        entropy.push(s);
        varentropy_series.push(v);

        let rel = if exact_pointer {
            relative_entropy_to(&rho_qa, &sigma)?
        } else {
            let (value, leak) = relative_entropy_lenient(&rho_qa, &sigma)?;
            support_leak_max = support_leak_max.max(leak);
            value
        };
        rel_entropy.push(rel);

        let q_marginal = crate::hilbert::partial_trace(&rho_qa, &q_label_refs)?;
        let pops: Vec<f64> =
            (0..model.q_dim()).map(|j| q_marginal.matrix()[(j, j)].re.max(0.0)).collect();
        populations.push(pops);

        if check_indices.contains(&i) {
            let mut rho_t = Array2::zeros((n, n));
            for k in 0..n {
                for l in 0..n {
                    rho_t[(k, l)] = phases[k] * rho0_eig[(k, l)] * conj_phases[l];
                }
            }
            let (vals, _) = eigh(&rho_t)?;
            let drift = spectrum0
                .iter()
                .zip(vals.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            spectrum_drift = spectrum_drift.max(drift);
        }
    }

    // finite-difference rates and the derived diagnostics
    let s_rate = rate_estimate(times, &entropy)?;
    let rel_rate = rate_estimate(times, &rel_entropy)?;
    let speed_margin: Vec<f64> = (0..samples)
        .map(|i| {
            2.0 * (varentropy_series[i] * interaction_variance[i]).sqrt() - s_rate.values[i].abs()
        })
        .collect();

    let population_sum_defect = populations
        .iter()
        .map(|p| (p.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0f64, f64::max);
    let population_drift = populations
        .iter()
        .map(|p| {
            p.iter()
                .zip(populations[0].iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        })
        .fold(0.0f64, f64::max);
    let v0 = interaction_variance[0];
    let interaction_variance_drift = interaction_variance
        .iter()
        .map(|&v| (v - v0).abs())
        .fold(0.0f64, f64::max)
        / v0.max(f64::MIN_POSITIVE);

    Ok(Trajectory {
        times: times.to_vec(),
        entropy,
        varentropy: varentropy_series,
        rel_entropy,
        interaction_variance,
        populations,
        speed_margin,
        rate_sensitivity: s_rate.half_step_discrepancy,
        rel_rate_sensitivity: rel_rate.half_step_discrepancy,
        post_entropy,
        exact_pointer,
        support_leak_max,
        population_sum_defect,
        population_drift,
        interaction_variance_drift,
        spectrum_drift,
        eigenbasis_defect,
        initial_purity,
    })
}

/// A finite-difference rate series plus its half-resolution discrepancy.
#[derive(Clone, Debug)]
pub struct RateEstimate {
    pub values: Vec<f64>,
    /// Max deviation against the same stencil on every other sample.
    pub half_step_discrepancy: f64,
}

/// Three-point Lagrange derivative at `x` from `(x0,f0),(x1,f1),(x2,f2)`.
fn lagrange_derivative(x: f64, pts: [(f64, f64); 3]) -> f64 {
    let [(x0, f0), (x1, f1), (x2, f2)] = pts;
    f0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
        + f1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
        + f2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
}

fn raw_rates(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let j = i.clamp(1, n - 2);
        let pts = [
            (times[j - 1], values[j - 1]),
            (times[j], values[j]),
            (times[j + 1], values[j + 1]),
        ];
        out.push(lagrange_derivative(times[i], pts));
    }
    out
}

/// Central finite differences interiorly, one-sided at the endpoints, with
/// the half-sampling discrepancy as the reported step-size sensitivity.
pub fn rate_estimate(times: &[f64], values: &[f64]) -> Result<RateEstimate> {
    if times.len() < 3 {
        return Err(Error::InsufficientSamples(format!(
            "rate estimation needs at least 3 samples, got {}",
            times.len()
        )));
    }
    if times.len() != values.len() {
        return Err(Error::InvalidInput("times and values lengths differ".into()));
    }
    let full = raw_rates(times, values);
    // recompute on every other sample and compare at the shared points
    let coarse_idx: Vec<usize> = (0..times.len()).step_by(2).collect();
    let mut discrepancy = 0.0f64;
    if coarse_idx.len() >= 3 {
        let ct: Vec<f64> = coarse_idx.iter().map(|&i| times[i]).collect();
        let cv: Vec<f64> = coarse_idx.iter().map(|&i| values[i]).collect();
        let coarse = raw_rates(&ct, &cv);
        for (k, &i) in coarse_idx.iter().enumerate() {
            discrepancy = discrepancy.max((coarse[k] - full[i]).abs());
        }
    }
    Ok(RateEstimate { values: full, half_step_discrepancy: discrepancy })
}

/// Entropy rate `dS/dt` along a trajectory.
pub fn entropy_rate(traj: &Trajectory) -> Result<RateEstimate> {
    rate_estimate(&traj.times, &traj.entropy)
}

/// Outcome of checking `|d/dt S(rho || rho_M)| = |dS/dt|` along a trajectory.
#[derive(Clone, Copy, Debug)]
pub struct IdentityCheck {
    /// Max over samples of `||d rel/dt| - |dS/dt||`, nats/s.
    pub max_defect: f64,
    /// Combined finite-difference error estimate the defect is held to.
    pub fd_tolerance: f64,
    /// Whether the bound was enforced (exact pointer basis) or only reported.
    pub enforced: bool,
}

/// Verify the relative-entropy rate identity. For exact-pointer models the
/// defect must stay within the combined finite-difference error estimate;
/// for approximate-pointer models the defect is reported, not asserted.
pub fn verify_relative_entropy_identity(traj: &Trajectory) -> Result<IdentityCheck> {
    let s_rate = rate_estimate(&traj.times, &traj.entropy)?;
    let rel_rate = rate_estimate(&traj.times, &traj.rel_entropy)?;
    let max_defect = s_rate
        .values
        .iter()
        .zip(rel_rate.values.iter())
        .map(|(a, b)| (a.abs() - b.abs()).abs())
        .fold(0.0f64, f64::max);
    let scale = s_rate.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let fd_tolerance =
        3.0 * (s_rate.half_step_discrepancy + rel_rate.half_step_discrepancy) + 1e-12 * scale.max(1.0);
    let enforced = traj.exact_pointer;
    if enforced && max_defect > fd_tolerance {
        return Err(Error::Numerical(format!(
            "relative-entropy rate identity violated: defect {max_defect:.3e} nats/s \
             exceeds the finite-difference tolerance {fd_tolerance:.3e}"
        )));
    }
    Ok(IdentityCheck { max_defect, fd_tolerance, enforced })
}

/// Report of the integral form of the speed limit:
/// `S(t) - S(0) <= 2 f_A t max_{t' <= t} sqrt(var_H(t'))`.
#[derive(Clone, Debug)]
pub struct IntegratedSpeedReport {
    /// Slack of the bound at each sample, nats.
    pub slacks: Vec<f64>,
    /// Minimum slack over all samples (0 at t = 0 by construction).
    pub min_slack: f64,
    /// Time at which the minimum occurs.
    pub argmin_time: f64,
}

pub fn integrated_speed_check(traj: &Trajectory, f_a: f64) -> IntegratedSpeedReport {
    let mut running_max = 0.0f64;
    let mut slacks = Vec::with_capacity(traj.times.len());
    let mut min_slack = f64::INFINITY;
    let mut argmin_time = 0.0;
    for i in 0..traj.times.len() {
        running_max = running_max.max(traj.interaction_variance[i].sqrt());
        let rhs = 2.0 * f_a * traj.times[i] * running_max;
        let slack = rhs - (traj.entropy[i] - traj.entropy[0]);
        if slack < min_slack {
            min_slack = slack;
            argmin_time = traj.times[i];
        }
        slacks.push(slack);
    }
    IntegratedSpeedReport { slacks, min_slack, argmin_time }
}

/// First time the relative entropy to the post-measurement state drops to
/// the threshold, linearly interpolated between samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasurementTime {
    Reached(f64),
    NotReached,
}

pub fn measurement_time_estimate(traj: &Trajectory, epsilon: f64) -> Result<MeasurementTime> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    if traj.rel_entropy[0] <= epsilon {
        return Ok(MeasurementTime::Reached(0.0));
    }
    for i in 1..traj.times.len() {
        let (r0, r1) = (traj.rel_entropy[i - 1], traj.rel_entropy[i]);
        if r1 <= epsilon {
            let frac = (r0 - epsilon) / (r0 - r1);
            let t = traj.times[i - 1] + frac * (traj.times[i] - traj.times[i - 1]);
            return Ok(MeasurementTime::Reached(t));
        }
    }
    Ok(MeasurementTime::NotReached)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{BathSpec, Mode, Temperature};
    use crate::entropy::scalar_entropy;
    use crate::hilbert::{annihilation_matrix, trace_of_product};
    use crate::models::{Amplitudes, MeasurementModel, SpinBosonModel};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn temp_for_theta(omega: f64, theta: f64) -> Temperature {
        Temperature::from_thermal_frequency(omega / theta).unwrap()
    }

    fn single_mode_model(x: f64, y: f64, g_over_omega: f64, theta: f64, trunc: usize) -> MeasurementModel {
        let omega = 1e6;
        MeasurementModel::SpinBoson(
            SpinBosonModel::single_qubit(
                Amplitudes::new(c(x, 0.0), c(y, 0.0)).unwrap(),
                1,
                BathSpec::Discrete {
                    modes: vec![Mode { omega, coupling: g_over_omega * omega, trunc }],
                },
                temp_for_theta(omega, theta),
            )
            .unwrap(),
        )
    }

    #[test]
    fn initial_sample_is_the_pre_measurement_state() {
        let model = single_mode_model(0.6, 0.8, 0.1, 2.0, 13);
        let opts = TrajectoryOptions { samples: 5, ..Default::default() };
        let times = sample_times(&model, &opts).unwrap();
        let traj = run_trajectory(&model, &times, &opts).unwrap();
        // t = 0: pure reduced state, relative entropy equals the mixture entropy
        assert!(traj.entropy[0] < 1e-10);
        assert!(traj.varentropy[0] < 1e-10);
        assert!((traj.rel_entropy[0] - traj.post_entropy).abs() < 1e-8);
        let expect_post = scalar_entropy(&[0.36, 0.64]);
        assert!((traj.post_entropy - expect_post).abs() < 1e-12);
        // populations are the Born weights
        assert!((traj.populations[0][0] - 0.36).abs() < 1e-10);
        assert!((traj.populations[0][1] - 0.64).abs() < 1e-10);
    }

    #[test]
    fn frozen_interaction_keeps_every_field_constant() {
        let model = single_mode_model(0.6, 0.8, 0.1, 2.0, 13);
        let opts = TrajectoryOptions {
            samples: 9,
            t_max: Some(3e-5),
            include_interaction: false,
            ..Default::default()
        };
        let times = sample_times(&model, &opts).unwrap();
        let traj = run_trajectory(&model, &times, &opts).unwrap();
        for i in 0..9 {
            assert!(traj.entropy[i].abs() < 1e-10);
            assert!(traj.interaction_variance[i] == 0.0);
            assert!((traj.rel_entropy[i] - traj.post_entropy).abs() < 1e-8);
        }
        assert!(traj.population_drift < 1e-12);
        // identity defect is eigensolver noise over the step size
        let check = verify_relative_entropy_identity(&traj).unwrap();
        assert!(check.max_defect < 1e-9);
        // the threshold is never reached
        let est = measurement_time_estimate(&traj, 0.05 * traj.post_entropy).unwrap();
        assert_eq!(est, MeasurementTime::NotReached);
        // but a threshold above the starting distance is met at t = 0
        let est = measurement_time_estimate(&traj, traj.post_entropy * 1.01).unwrap();
        assert_eq!(est, MeasurementTime::Reached(0.0));
    }

    #[test]
    fn trajectory_matches_block_propagation_oracle() {
        // independent check of S(t): propagate the two sigma_z branches of a
        // single-mode model directly on the bath space and dephase by hand
        let omega = 1e6f64;
        let g = 0.1 * omega;
        let theta = 2.0;
        let trunc = 13;
        let x = 0.6;
        let y = 0.8;
        let model = single_mode_model(x, y, 0.1, theta, trunc);
        let opts = TrajectoryOptions { samples: 61, t_max: Some(2.0e-5), ..Default::default() };
        let times = sample_times(&model, &opts).unwrap();
        let traj = run_trajectory(&model, &times, &opts).unwrap();

        // oracle: H_down = w n + g(a + a^dag), H_up = w n - g(a + a^dag)
        let a = annihilation_matrix(trunc);
        let adag = crate::hilbert::conj_transpose(&a);
        let quad = &a + &adag;
        let mut n_op = Array2::<C64>::zeros((trunc, trunc));
        for k in 0..trunc {
            n_op[(k, k)] = c(omega * k as f64, 0.0);
        }
        let h_down = &n_op + &quad.mapv(|z| z * g);
        let h_up = &n_op - &quad.mapv(|z| z * g);
        let (ed, vd) = crate::hilbert::eigh(&h_down).unwrap();
        let (eu, vu) = crate::hilbert::eigh(&h_up).unwrap();
        let th = crate::bath::thermal_state_with_tol(omega, temp_for_theta(omega, theta), trunc, 1e-9, "E")
            .unwrap()
            .state;
        for (i, &t) in times.iter().enumerate() {
            let ud = unitary_at(&ed, &vd, t);
            let uu = unitary_at(&eu, &vu, t);
            let left = ud.dot(th.matrix());
            let cfac = trace_of_product(&left, &crate::hilbert::conj_transpose(&uu));
            let coh = x * y * cfac.norm();
            let lam0 = 0.5 * (x * x + y * y)
                + 0.5 * (((x * x - y * y) as f64).powi(2) + 4.0 * coh * coh).sqrt();
            let lam1 = 1.0 - lam0;
            let s_oracle = scalar_entropy(&[lam0, lam1.max(0.0)]);
            assert!(
                (traj.entropy[i] - s_oracle).abs() < 1e-8,
                "t = {t}: engine {} vs oracle {}",
                traj.entropy[i],
                s_oracle
            );
        }
        // populations stay at the Born weights throughout
        assert!(traj.population_drift < 1e-9);
        assert!(traj.population_sum_defect < 1e-9);
        // the global spectrum is time-invariant
        assert!(traj.spectrum_drift < 1e-9);
    }

    fn unitary_at(vals: &Array1<f64>, vecs: &Array2<C64>, t: f64) -> Array2<C64> {
        let mut scaled = vecs.clone();
        for (k, &w) in vals.iter().enumerate() {
            let p = C64::from_polar(1.0, -w * t);
            scaled.column_mut(k).mapv_inplace(|z| z * p);
        }
        scaled.dot(&crate::hilbert::conj_transpose(vecs))
    }

    #[test]
    fn speed_limit_holds_along_single_mode_run() {
        let model = single_mode_model(1.0 / 2.0f64.sqrt(), 1.0 / 2.0f64.sqrt(), 0.1, 2.0, 13);
        let opts = TrajectoryOptions { samples: 201, ..Default::default() };
        let times = sample_times(&model, &opts).unwrap();
        let traj = run_trajectory(&model, &times, &opts).unwrap();
        let tol = 3.0 * traj.rate_sensitivity;
        for (i, &m) in traj.speed_margin.iter().enumerate() {
            assert!(m >= -tol, "margin {m} at sample {i} below -{tol}");
        }
        let check = verify_relative_entropy_identity(&traj).unwrap();
        assert!(check.enforced);
        assert!(check.max_defect <= 1e-6, "identity defect {}", check.max_defect);
        // integral form never goes negative
        let report = integrated_speed_check(&traj, 1.0);
        assert!(report.min_slack >= -1e-9, "min slack {}", report.min_slack);
        assert!(report.slacks[0].abs() < 1e-12);
    }

    #[test]
    fn rates_are_exact_on_linear_data() {
        let times: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|&t| 3.0 * t + 1.0).collect();
        let est = rate_estimate(&times, &values).unwrap();
        for v in &est.values {
            assert!((v - 3.0).abs() < 1e-10);
        }
        assert!(est.half_step_discrepancy < 1e-10);
        // constant data has zero rate
        let zeros = vec![2.0; 11];
        let est = rate_estimate(&times, &zeros).unwrap();
        assert!(est.values.iter().all(|v| v.abs() < 1e-12));
        assert!(matches!(
            rate_estimate(&times[..2], &values[..2]),
            Err(Error::InsufficientSamples(_))
        ));
    }

    #[test]
    fn synthetic_complementary_series_has_zero_identity_defect() {
        // rel = const - S makes the discrete stencils agree exactly
        let times: Vec<f64> = (0..21).map(|i| i as f64 * 0.05).collect();
        let entropy: Vec<f64> = times.iter().map(|&t| (t * 1.3).sin().powi(2)).collect();
        let rel: Vec<f64> = entropy.iter().map(|&s| 0.7 - s).collect();
        let s_rate = rate_estimate(&times, &entropy).unwrap();
        let r_rate = rate_estimate(&times, &rel).unwrap();
        let defect = s_rate
            .values
            .iter()
            .zip(r_rate.values.iter())
            .map(|(a, b)| (a.abs() - b.abs()).abs())
            .fold(0.0f64, f64::max);
        assert!(defect < 1e-12);
    }

    #[test]
    fn measurement_time_interpolates_between_samples() {
        let mut traj = dummy_trajectory();
        traj.rel_entropy = vec![1.0, 0.6, 0.2];
        traj.times = vec![0.0, 1.0, 2.0];
        match measurement_time_estimate(&traj, 0.4).unwrap() {
            MeasurementTime::Reached(t) => assert!((t - 1.5).abs() < 1e-12),
            MeasurementTime::NotReached => panic!("threshold should be reached"),
        }
        assert!(matches!(
            measurement_time_estimate(&traj, 0.0),
            Err(Error::InvalidInput(_))
        ));
    }

    fn dummy_trajectory() -> Trajectory {
        Trajectory {
            times: vec![0.0, 1.0, 2.0],
            entropy: vec![0.0; 3],
            varentropy: vec![0.0; 3],
            rel_entropy: vec![0.0; 3],
            interaction_variance: vec![0.0; 3],
            populations: vec![vec![1.0, 0.0]; 3],
            speed_margin: vec![0.0; 3],
            rate_sensitivity: 0.0,
            rel_rate_sensitivity: 0.0,
            post_entropy: 1.0,
            exact_pointer: true,
            support_leak_max: 0.0,
            population_sum_defect: 0.0,
            population_drift: 0.0,
            interaction_variance_drift: 0.0,
            spectrum_drift: 0.0,
            eigenbasis_defect: 0.0,
            initial_purity: 1.0,
        }
    }

    #[test]
    fn interaction_variance_is_constant_without_free_hamiltonians() {
        let model = single_mode_model(0.6, 0.8, 0.2, 2.0, 13);
        let opts = TrajectoryOptions {
            samples: 41,
            include_bath_hamiltonian: false,
            ..Default::default()
        };
        let times = sample_times(&model, &opts).unwrap();
        let traj = run_trajectory(&model, &times, &opts).unwrap();
        assert!(
            traj.interaction_variance_drift < 1e-9,
            "variance drift {}",
            traj.interaction_variance_drift
        );
    }

    #[test]
    fn purification_symmetry_at_zero_temperature() {
        // pure (vacuum) environment: the global state stays pure and the
        // reduced Q-A entropy equals the reduced E entropy
        let omega = 1e6;
        let model = MeasurementModel::SpinBoson(
            SpinBosonModel::single_qubit(
                Amplitudes::balanced(),
                1,
                BathSpec::Discrete { modes: vec![Mode { omega, coupling: 0.3 * omega, trunc: 10 }] },
                temp_for_theta(omega, 300.0),
            )
            .unwrap(),
        );
        assert!((model.initial_global_state().unwrap().purity() - 1.0).abs() < 1e-12);
        let opts = TrajectoryOptions { samples: 11, ..Default::default() };
        let times = sample_times(&model, &opts).unwrap();
        let traj = run_trajectory(&model, &times, &opts).unwrap();
        assert!((traj.initial_purity - 1.0).abs() < 1e-12);

        // cross-check against direct evolution and both partial traces
        let rho0 = model.initial_global_state().unwrap();
        let full = model.full_layout().unwrap();
        let h = model
            .interaction_hamiltonian()
            .unwrap()
            .add(&model.bath_hamiltonian().unwrap().embedded(&full).unwrap())
            .unwrap();
        let evolved = crate::hilbert::evolve(&rho0, &h, &times).unwrap();
        for (i, state) in evolved.iter().enumerate() {
            let qa = crate::hilbert::partial_trace(state, &["Q0", "A0.0"]).unwrap();
            let env = crate::hilbert::partial_trace(state, &["E0"]).unwrap();
            let s_qa = crate::entropy::von_neumann_entropy(&qa).unwrap();
            let s_env = crate::entropy::von_neumann_entropy(&env).unwrap();
            assert!((s_qa - s_env).abs() < 1e-8);
            assert!((s_qa - traj.entropy[i]).abs() < 1e-8, "engine disagrees at sample {i}");
        }
    }

    #[test]
    fn apparatus_hamiltonian_preserves_the_identity() {
        // a sigma_z-type apparatus splitting commutes with the pointers, so
        // the relative-entropy identity must survive turning it on
        let model = single_mode_model(0.6, 0.8, 0.15, 2.0, 13);
        let opts = TrajectoryOptions {
            samples: 101,
            apparatus_frequency: Some(4e5),
            ..Default::default()
        };
        let times = sample_times(&model, &opts).unwrap();
        let traj = run_trajectory(&model, &times, &opts).unwrap();
        let check = verify_relative_entropy_identity(&traj).unwrap();
        assert!(check.max_defect <= 1e-6);
        assert!(traj.population_drift < 1e-9);
    }
}
