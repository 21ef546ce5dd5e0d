//! Closed-form lower bounds on the measurement timescale and the report
//! structure the CLI serializes.
//!
//! With energies as angular frequencies the bound reads
//! `tau_min = delta_S / (2 * cap * Omega)` seconds, where `delta_S` is the
//! entropy gained by the system-apparatus state, `cap` bounds the varentropy
//! root (`f_A` by default), and `Omega` is the interaction-energy standard
//! deviation in rad/s.

use serde::{Deserialize, Serialize};

use crate::bath::Temperature;
use crate::entropy::{f_a, von_neumann_entropy};
use crate::error::{Error, Result};
use crate::models::MeasurementModel;

/// Choice of the varentropy cap in the denominator of the bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarentropyCap {
    /// `f_A`, the outcome-count bound (the default).
    OutcomeCount,
    /// The square root of an observed maximum varentropy, e.g. from a
    /// trajectory run of the same model.
    ObservedMax(f64),
}

/// Flat record of a bound evaluation; every derived quantity is reproducible
/// from the stored fields.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundReport {
    pub model: String,
    pub temperature_kelvin: f64,
    pub outcome_count: u32,
    /// Entropy change of the measurement, nats.
    pub delta_s_nats: f64,
    pub f_a: f64,
    /// Which cap multiplies the denominator.
    pub cap_kind: String,
    pub cap_value: f64,
    /// Correlator prefactor (spin-boson only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_spins: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_abs: Option<f64>,
    /// `sum_k g_k^2 coth(theta_k/2)` or its continuum version, (rad/s)^2.
    pub bath_integral_rad2_per_s2: f64,
    /// Interaction variance entering the bound, (rad/s)^2.
    pub interaction_variance_rad2_per_s2: f64,
    /// Exact interaction variance (boson-boson; keeps the vacuum term).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interaction_variance_exact_rad2_per_s2: Option<f64>,
    /// Interaction-energy standard deviation, rad/s.
    pub omega_rad_per_s: f64,
    /// The lower bound on the measurement time, seconds.
    pub tau_min_seconds: f64,
    /// Human-readable origin of each derived field.
    pub provenance_delta_s: String,
    pub provenance_cap: String,
    pub provenance_omega: String,
    pub provenance_tau_min: String,
}

impl BoundReport {
    /// Recompute `tau_min` from the stored fields.
    pub fn reproduce_tau_min(&self) -> f64 {
        if self.delta_s_nats == 0.0 {
            0.0
        } else {
            self.delta_s_nats / (2.0 * self.cap_value * self.omega_rad_per_s)
        }
    }
}

/// Entropy gained by the reduced system-apparatus state during the collapse
/// stage: `S(post) - S(pre)`. For qubit models this is the binary entropy of
/// the outcome weights; it is computed from the actual model states so that
/// nonorthogonal pointer supports are handled by the eigensolver.
pub fn delta_s_measurement(model: &MeasurementModel) -> Result<f64> {
    let pre = von_neumann_entropy(&model.pre_measurement_state()?)?;
    let post = von_neumann_entropy(&model.post_measurement_state()?)?;
    Ok((post - pre).max(0.0))
}

/// Evaluate the closed-form lower bound on the measurement time.
pub fn tau_min(model: &MeasurementModel, cap: VarentropyCap) -> Result<BoundReport> {
    let a = model.outcome_count();
    let f = f_a(a)?;
    let delta_s = delta_s_measurement(model)?;
    if delta_s > (a as f64).ln() + 1e-12 {
        return Err(Error::InvalidState(format!(
            "entropy change {delta_s} exceeds ln(outcomes) = {}",
            (a as f64).ln()
        )));
    }
    let scale = model.interaction_scale()?;
    let (cap_kind, cap_value, provenance_cap) = match (model, cap) {
        (MeasurementModel::SpinBoson(_), _) => (
            "outcome_count_cap".to_string(),
            f,
            "sqrt(ln^2(A-1)/4 + 1) for A pointer outcomes".to_string(),
        ),
        (MeasurementModel::BosonBoson(_), VarentropyCap::OutcomeCount) => (
            "outcome_count_cap".to_string(),
            f,
            "sqrt(ln^2(A-1)/4 + 1) for A pointer outcomes".to_string(),
        ),
        (MeasurementModel::BosonBoson(_), VarentropyCap::ObservedMax(v)) => {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "observed varentropy cap must be positive, got {v}"
                )));
            }
            (
                "observed_varentropy_max".to_string(),
                v.sqrt(),
                "square root of the largest varentropy observed along a trajectory".to_string(),
            )
        }
    };
    let omega = scale.delta;
    let tau = if delta_s == 0.0 { 0.0 } else { delta_s / (2.0 * cap_value * omega) };
    let (provenance_delta_s, provenance_omega) = match model {
        MeasurementModel::SpinBoson(_) => (
            "entropy of the pointer mixture minus the pure-state entropy".to_string(),
            "sqrt(chi * N^2 * bath integral)".to_string(),
        ),
        MeasurementModel::BosonBoson(_) => (
            "entropy of the pointer mixture minus the pure-state entropy".to_string(),
            "sqrt(|alpha|^2 * bath integral), large-|alpha| form".to_string(),
        ),
    };
    let (n_spins, alpha_abs) = match model {
        MeasurementModel::SpinBoson(m) => (Some(m.spins_per_qubit() as u32), None),
        MeasurementModel::BosonBoson(m) => (None, Some(m.alpha().norm())),
    };
    Ok(BoundReport {
        model: model.descriptor(),
        temperature_kelvin: model.temperature().kelvin(),
        outcome_count: a,
        delta_s_nats: delta_s,
        f_a: f,
        cap_kind,
        cap_value,
        chi: scale.chi,
        n_spins,
        alpha_abs,
        bath_integral_rad2_per_s2: scale.bath_integral,
        interaction_variance_rad2_per_s2: scale.variance,
        interaction_variance_exact_rad2_per_s2: scale.variance_exact,
        omega_rad_per_s: omega,
        tau_min_seconds: tau,
        provenance_delta_s,
        provenance_cap,
        provenance_omega,
        provenance_tau_min: "delta_S / (2 * cap * Omega)".to_string(),
    })
}

/// One point of the single-mode reference curve.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvePoint {
    pub g_rad_per_s: f64,
    pub tau_min_seconds: f64,
}

/// The single-mode binary-measurement reference curve
/// `tau_min(g) = (ln 2 / (2 g)) * sqrt(tanh(theta/2))` with
/// `theta = hbar omega / (k_B T)`.
pub fn reference_curve(omega: f64, temp: Temperature, g_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    if g_grid.is_empty() {
        return Err(Error::InvalidInput("the coupling grid must not be empty".into()));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidFrequency(format!("omega must be positive, got {omega}")));
    }
    let theta = temp.theta(omega);
    let factor = 0.5 * std::f64::consts::LN_2 * (theta / 2.0).tanh().sqrt();
    g_grid
        .iter()
        .map(|&g| {
            if !(g > 0.0) {
                return Err(Error::InvalidInput(format!("coupling must be positive, got {g}")));
            }
            Ok(CurvePoint { g_rad_per_s: g, tau_min_seconds: factor / g })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{BathSpec, Mode};
    use crate::models::{Amplitudes, BosonBosonModel, SpinBosonModel};
    use num_complex::Complex64 as C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn temp_for_theta(omega: f64, theta: f64) -> Temperature {
        Temperature::from_thermal_frequency(omega / theta).unwrap()
    }

    fn single_mode_model(x: f64, y: f64, n: usize, g: f64, theta: f64) -> MeasurementModel {
        let omega = 1e6;
        MeasurementModel::SpinBoson(
            SpinBosonModel::single_qubit(
                Amplitudes::new(c(x, 0.0), c(y, 0.0)).unwrap(),
                n,
                BathSpec::Discrete { modes: vec![Mode { omega, coupling: g, trunc: 13 }] },
                temp_for_theta(omega, theta),
            )
            .unwrap(),
        )
    }

    #[test]
    fn delta_s_reference_values() {
        let inv = 1.0 / 2.0f64.sqrt();
        let m = single_mode_model(inv, inv, 1, 1e5, 2.0);
        assert!((delta_s_measurement(&m).unwrap() - 2.0f64.ln()).abs() < 1e-12);

        let m = single_mode_model(1.0, 0.0, 1, 1e5, 2.0);
        assert!(delta_s_measurement(&m).unwrap() < 1e-12);

        let m = single_mode_model(0.5, 0.75f64.sqrt(), 1, 1e5, 2.0);
        let expect = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert!((delta_s_measurement(&m).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn single_mode_bound_matches_caption_formula() {
        let omega = 1e6;
        let g = 1e5;
        let theta = 2.0;
        let inv = 1.0 / 2.0f64.sqrt();
        let m = single_mode_model(inv, inv, 1, g, theta);
        let report = tau_min(&m, VarentropyCap::OutcomeCount).unwrap();
        let expect = 2.0f64.ln() / (2.0 * g) * (theta / 2.0).tanh().sqrt();
        assert!(
            (report.tau_min_seconds - expect).abs() <= 1e-12 * expect,
            "bound {:.15e} vs formula {:.15e}",
            report.tau_min_seconds,
            expect
        );
        assert!((report.reproduce_tau_min() - report.tau_min_seconds).abs() == 0.0);
        assert!(report.delta_s_nats <= (report.outcome_count as f64).ln() + 1e-12);
    }

    #[test]
    fn doubling_the_apparatus_halves_the_bound() {
        let inv = 1.0 / 2.0f64.sqrt();
        let t1 = tau_min(&single_mode_model(inv, inv, 1, 1e5, 2.0), VarentropyCap::OutcomeCount)
            .unwrap()
            .tau_min_seconds;
        let t2 = tau_min(&single_mode_model(inv, inv, 2, 1e5, 2.0), VarentropyCap::OutcomeCount)
            .unwrap()
            .tau_min_seconds;
        assert!((t2 - 0.5 * t1).abs() < 1e-15 * t1);
    }

    #[test]
    fn no_entropy_change_means_zero_bound() {
        let m = single_mode_model(1.0, 0.0, 1, 1e5, 2.0);
        let report = tau_min(&m, VarentropyCap::OutcomeCount).unwrap();
        assert_eq!(report.tau_min_seconds, 0.0);
    }

    #[test]
    fn bound_is_monotone_in_couplings_spins_alpha_temperature() {
        let inv = 1.0 / 2.0f64.sqrt();
        // coupling up -> bound down
        let a = tau_min(&single_mode_model(inv, inv, 1, 1e5, 2.0), VarentropyCap::OutcomeCount)
            .unwrap()
            .tau_min_seconds;
        let b = tau_min(&single_mode_model(inv, inv, 1, 1.3e5, 2.0), VarentropyCap::OutcomeCount)
            .unwrap()
            .tau_min_seconds;
        assert!(b < a);
        // temperature up (theta down) -> coth up -> bound down
        let cth = tau_min(&single_mode_model(inv, inv, 1, 1e5, 1.0), VarentropyCap::OutcomeCount)
            .unwrap()
            .tau_min_seconds;
        assert!(cth < a);
        // |alpha| up -> bound down
        let omega = 1e6;
        let bb = |alpha: f64| {
            tau_min(
                &MeasurementModel::BosonBoson(
                    BosonBosonModel::new(
                        c(alpha, 0.0),
                        Amplitudes::balanced(),
                        None,
                        BathSpec::Discrete {
                            modes: vec![Mode { omega, coupling: 4e4, trunc: 13 }],
                        },
                        temp_for_theta(omega, 2.0),
                    )
                    .unwrap(),
                ),
                VarentropyCap::OutcomeCount,
            )
            .unwrap()
            .tau_min_seconds
        };
        assert!(bb(2.0) < bb(1.0));
    }

    #[test]
    fn boson_cap_choice_is_recorded() {
        let omega = 1e6;
        let model = MeasurementModel::BosonBoson(
            BosonBosonModel::new(
                c(2.0, 0.0),
                Amplitudes::balanced(),
                None,
                BathSpec::Discrete { modes: vec![Mode { omega, coupling: 4e4, trunc: 13 }] },
                temp_for_theta(omega, 2.0),
            )
            .unwrap(),
        );
        let default = tau_min(&model, VarentropyCap::OutcomeCount).unwrap();
        assert_eq!(default.cap_kind, "outcome_count_cap");
        assert_eq!(default.cap_value, 1.0);
        let observed = tau_min(&model, VarentropyCap::ObservedMax(0.25)).unwrap();
        assert_eq!(observed.cap_kind, "observed_varentropy_max");
        assert!((observed.cap_value - 0.5).abs() < 1e-15);
        assert!(observed.tau_min_seconds > default.tau_min_seconds);
        assert!(observed.interaction_variance_exact_rad2_per_s2.is_some());
    }

    #[test]
    fn report_roundtrips_byte_identically() {
        let inv = 1.0 / 2.0f64.sqrt();
        let report =
            tau_min(&single_mode_model(inv, inv, 2, 7e4, 1.7), VarentropyCap::OutcomeCount).unwrap();
        let text = serde_json::to_string_pretty(&report).unwrap();
        let parsed: BoundReport = serde_json::from_str(&text).unwrap();
        let text2 = serde_json::to_string_pretty(&parsed).unwrap();
        assert_eq!(text, text2);
        assert_eq!(report, parsed);
    }

    #[test]
    fn reference_curve_scaling_and_limits() {
        let omega = 1e9;
        let temp = Temperature::from_kelvin(0.002).unwrap();
        let grid = vec![1e6, 2e6];
        let curve = reference_curve(omega, temp, &grid).unwrap();
        // doubling g exactly halves tau
        assert_eq!(curve[0].tau_min_seconds, 2.0 * curve[1].tau_min_seconds);

        // theta -> infinity: tanh -> 1
        let cold = Temperature::from_kelvin(1e-12).unwrap();
        let curve = reference_curve(omega, cold, &[2e6]).unwrap();
        let expect = 2.0f64.ln() / (2.0 * 2e6);
        assert!((curve[0].tau_min_seconds - expect).abs() < 1e-15 * expect);

        // theta -> 0: tau ~ (ln 2 / 2g) sqrt(theta/2) -> 0
        let hot = Temperature::from_kelvin(1e3).unwrap();
        let theta = hot.theta(omega);
        let curve = reference_curve(omega, hot, &[2e6]).unwrap();
        let expect = 2.0f64.ln() / (2.0 * 2e6) * (theta / 2.0).sqrt();
        assert!((curve[0].tau_min_seconds - expect).abs() < 1e-6 * expect);

        assert!(reference_curve(omega, temp, &[]).is_err());
    }

    #[test]
    fn reference_curve_agrees_with_model_bound() {
        // the closed-form curve and the assembled bound must coincide
        let omega = 1e9;
        let temp = Temperature::from_kelvin(0.002).unwrap();
        let inv = 1.0 / 2.0f64.sqrt();
        for &g in &[1e5, 1e7, 1e9] {
            let model = MeasurementModel::SpinBoson(
                SpinBosonModel::single_qubit(
                    Amplitudes::new(c(inv, 0.0), c(inv, 0.0)).unwrap(),
                    1,
                    BathSpec::Discrete { modes: vec![Mode { omega, coupling: g, trunc: 8 }] },
                    temp,
                )
                .unwrap(),
            );
            let report = tau_min(&model, VarentropyCap::OutcomeCount).unwrap();
            let curve = reference_curve(omega, temp, &[g]).unwrap();
            let diff = (report.tau_min_seconds - curve[0].tau_min_seconds).abs();
            assert!(
                diff <= 1e-12 * curve[0].tau_min_seconds,
                "g = {g}: bound {:.16e} vs curve {:.16e}",
                report.tau_min_seconds,
                curve[0].tau_min_seconds
            );
        }
    }

    #[test]
    fn worked_reference_point_two_millikelvin() {
        // T = 2 mK, omega = 1e9 rad/s, g = 1e9 rad/s: theta ~ 3.82 and
        // tau_min ~ 3.4e-10 s
        let temp = Temperature::from_kelvin(0.002).unwrap();
        let curve = reference_curve(1e9, temp, &[1e9]).unwrap();
        let tau = curve[0].tau_min_seconds;
        assert!((tau - 3.39e-10).abs() < 0.02e-10, "tau = {tau:.4e}");
    }
}
