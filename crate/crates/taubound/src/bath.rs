//! Thermal bosonic environments: Bose-Einstein occupations, truncated Gibbs
//! states, and the coupling-weighted bath integral
//! `sum_k g_k^2 coth(theta_k / 2)` (discrete) or
//! `int J(w) coth(theta(w)/2) dw` (continuum).
//!
//! Unit convention: hbar = k_B = 1 internally, energies as angular
//! frequencies (rad/s), times in seconds. Temperatures enter only through the
//! dimensionless exponent `theta = hbar w / (k_B T)`, built with CODATA
//! constants.

use crate::error::{Error, Result};
use crate::hilbert::{DensityOperator, SpaceLayout};
use ndarray::prelude::*;
use num_complex::Complex64 as C64;

/// CODATA: reduced Planck constant, J s.
pub const HBAR: f64 = 1.054571817e-34;
/// CODATA: Boltzmann constant, J/K.
pub const KB: f64 = 1.380649e-23;

/// Default tolerance on the probability mass discarded by a Fock truncation.
pub const DEFAULT_LEAK_TOL: f64 = 1e-10;

/// Environment temperature. Stored in kelvin; enters the physics only through
/// the thermal frequency `k_B T / hbar` (rad/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Temperature {
    kelvin: f64,
}

impl Temperature {
    pub fn from_kelvin(kelvin: f64) -> Result<Self> {
        if !(kelvin > 0.0) || !kelvin.is_finite() {
            return Err(Error::InvalidInput(format!(
                "temperature must be positive and finite, got {kelvin} K"
            )));
        }
        Ok(Self { kelvin })
    }

    /// Build from the thermal frequency `k_B T / hbar` in rad/s.
    pub fn from_thermal_frequency(rad_per_s: f64) -> Result<Self> {
        if !(rad_per_s > 0.0) || !rad_per_s.is_finite() {
            return Err(Error::InvalidInput(format!(
                "thermal frequency must be positive, got {rad_per_s} rad/s"
            )));
        }
        Ok(Self { kelvin: rad_per_s * HBAR / KB })
    }

    pub fn kelvin(&self) -> f64 {
        self.kelvin
    }

    /// `k_B T / hbar` in rad/s.
    pub fn thermal_frequency(&self) -> f64 {
        KB * self.kelvin / HBAR
    }

    /// Dimensionless thermal exponent `theta = hbar w / (k_B T)`.
    pub fn theta(&self, omega: f64) -> f64 {
        omega / self.thermal_frequency()
    }
}

/// A single discrete environment mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    /// Mode frequency, rad/s.
    pub omega: f64,
    /// Coupling, rad/s (the coupling energy divided by hbar).
    pub coupling: f64,
    /// Fock-space truncation dimension.
    pub trunc: usize,
}

/// Spectral density of the squared couplings, `J(w)` in rad/s, so that
/// `int J(w) dw` carries rad^2/s^2.
#[derive(Clone, Debug)]
pub enum SpectralDensityModel {
    /// `J(w) = eta * w * exp(-w / omega_c)` with dimensionless `eta`.
    Ohmic { eta: f64, omega_c: f64 },
    /// Piecewise-linear interpolation through `(w, J)` points, zero outside.
    Tabulated { points: Vec<(f64, f64)> },
}

impl SpectralDensityModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralDensityModel::Ohmic { eta, omega_c } => {
                if !(*eta > 0.0) || !(*omega_c > 0.0) {
                    return Err(Error::InvalidInput(
                        "Ohmic spectral density needs eta > 0 and omega_c > 0".into(),
                    ));
                }
            }
            SpectralDensityModel::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidInput(
                        "tabulated spectral density needs at least 2 points".into(),
                    ));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidInput(
                            "tabulated frequencies must be strictly increasing".into(),
                        ));
                    }
                }
                if points.iter().any(|&(w, j)| w <= 0.0 || j < 0.0) {
                    return Err(Error::InvalidInput(
                        "tabulated points need w > 0 and J >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, omega: f64) -> f64 {
        match self {
            SpectralDensityModel::Ohmic { eta, omega_c } => {
                if omega <= 0.0 {
                    0.0
                } else {
                    eta * omega * (-omega / omega_c).exp()
                }
            }
            SpectralDensityModel::Tabulated { points } => {
                if omega <= points[0].0 || omega >= points[points.len() - 1].0 {
                    // boundary values taper to the tabulated endpoints
                    if omega == points[0].0 {
                        return points[0].1;
                    }
                    if omega == points[points.len() - 1].0 {
                        return points[points.len() - 1].1;
                    }
                    return 0.0;
                }
                let k = points.partition_point(|&(w, _)| w <= omega) - 1;
                let (w0, j0) = points[k];
                let (w1, j1) = points[k + 1];
                j0 + (j1 - j0) * (omega - w0) / (w1 - w0)
            }
        }
    }
}

/// Environment description: explicit modes or a spectral density.
#[derive(Clone, Debug)]
pub enum BathSpec {
    Discrete { modes: Vec<Mode> },
    Continuum { j: SpectralDensityModel, omega_max: f64 },
}

impl BathSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            BathSpec::Discrete { modes } => {
                if modes.is_empty() {
                    return Err(Error::InvalidInput("discrete bath needs at least one mode".into()));
                }
                for (k, m) in modes.iter().enumerate() {
                    if !(m.omega > 0.0) {
                        return Err(Error::InvalidFrequency(format!(
                            "mode {k}: omega must be positive, got {}",
                            m.omega
                        )));
                    }
                    if !(m.coupling > 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "mode {k}: coupling must be positive, got {}",
                            m.coupling
                        )));
                    }
                    if m.trunc < 2 {
                        return Err(Error::TruncationTooSmall(format!(
                            "mode {k}: truncation must be at least 2, got {}",
                            m.trunc
                        )));
                    }
                }
            }
            BathSpec::Continuum { j, omega_max } => {
                j.validate()?;
                if !(*omega_max > 0.0) {
                    return Err(Error::InvalidInput("omega_max must be positive".into()));
                }
            }
        }
        Ok(())
    }

    pub fn discrete_modes(&self) -> Result<&[Mode]> {
        match self {
            BathSpec::Discrete { modes } => Ok(modes),
            BathSpec::Continuum { .. } => Err(Error::NotRealizable(
                "continuum baths have no finite-dimensional operator realization".into(),
            )),
        }
    }
}

/// Bose-Einstein occupation `1 / (e^theta - 1)`, numerically stable across
/// the full range of `theta`.
pub fn occupation(omega: f64, temp: Temperature) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidFrequency(format!("omega must be positive, got {omega}")));
    }
    let theta = temp.theta(omega);
    Ok(occupation_from_theta(theta))
}

pub(crate) fn occupation_from_theta(theta: f64) -> f64 {
    if theta > 700.0 {
        0.0
    } else if theta < 1e-6 {
        1.0 / theta - 0.5
    } else {
        1.0 / theta.exp_m1()
    }
}

/// `coth(theta/2) = 1 + 2 n_bar(theta)`.
pub(crate) fn coth_half_theta(theta: f64) -> f64 {
    1.0 + 2.0 * occupation_from_theta(theta)
}

/// A truncated thermal (Gibbs) state together with the probability mass the
/// truncation discarded.
#[derive(Clone, Debug)]
pub struct ThermalState {
    pub state: DensityOperator,
    pub leakage: f64,
}

/// Diagonal Gibbs state `exp(-theta n)/Z` on a truncated Fock basis,
/// renormalized after truncation. Uses the default leakage tolerance.
pub fn thermal_state(omega: f64, temp: Temperature, trunc: usize) -> Result<ThermalState> {
    thermal_state_with_tol(omega, temp, trunc, DEFAULT_LEAK_TOL, "E")
}

pub fn thermal_state_with_tol(
    omega: f64,
    temp: Temperature,
    trunc: usize,
    leak_tol: f64,
    label: &str,
) -> Result<ThermalState> {
    if !(omega > 0.0) {
        return Err(Error::InvalidFrequency(format!("omega must be positive, got {omega}")));
    }
    if trunc < 2 {
        return Err(Error::TruncationTooSmall(format!(
            "thermal state needs at least 2 Fock levels, got {trunc}"
        )));
    }
    let theta = temp.theta(omega);
    // infinite-series tail mass beyond the truncation
    let leakage = if theta * trunc as f64 > 700.0 { 0.0 } else { (-theta * trunc as f64).exp() };
    if leakage > leak_tol {
        return Err(Error::TruncationTooSmall(format!(
            "truncation {trunc} leaks {leakage:.3e} > {leak_tol:.3e} at theta = {theta:.4}"
        )));
    }
    let weights: Vec<f64> = (0..trunc)
        .map(|n| {
            let x = theta * n as f64;
            if x > 700.0 {
                0.0
            } else {
                (-x).exp()
            }
        })
        .collect();
    let z: f64 = weights.iter().sum();
    let diag: Vec<C64> = weights.iter().map(|&w| C64::new(w / z, 0.0)).collect();
    let layout = SpaceLayout::single(label, trunc)?;
    let state = DensityOperator::from_trusted(layout, Array2::from_diag(&arr1(&diag)))?;
    Ok(ThermalState { state, leakage })
}

/// Smallest truncation whose thermal tail mass is at most `tail_tol`,
/// from the geometric series: `d = ceil(ln(tail_tol) / (-theta)) + 1`,
/// floored at 2.
pub fn required_truncation(omega: f64, temp: Temperature, tail_tol: f64) -> Result<usize> {
    if !(omega > 0.0) {
        return Err(Error::InvalidFrequency(format!("omega must be positive, got {omega}")));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::InvalidInput(format!("tail_tol must be in (0, 1), got {tail_tol}")));
    }
    let theta = temp.theta(omega);
    let d = (tail_tol.ln() / (-theta)).ceil() as i64 + 1;
    Ok((d.max(2)) as usize)
}

/// `sum_k g_k^2 coth(theta_k/2)` for discrete baths, or the adaptive
/// quadrature of `J(w) coth(theta(w)/2)` over `(0, omega_max]` for continuum
/// baths. Result in rad^2/s^2.
pub fn bath_integral(bath: &BathSpec, temp: Temperature) -> Result<f64> {
    weighted_bath_integral(bath, temp, |theta, _n| coth_half_theta(theta))
}

/// Bath integral with J(w) weighted by an arbitrary function of the thermal
/// exponent and occupation: `sum_k g_k^2 f(theta_k, n_k)` or
/// `int J(w) f(theta, n) dw`.
pub(crate) fn weighted_bath_integral<F>(bath: &BathSpec, temp: Temperature, f: F) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    bath.validate()?;
    match bath {
        BathSpec::Discrete { modes } => Ok(modes
            .iter()
            .map(|m| {
                let theta = temp.theta(m.omega);
                m.coupling * m.coupling * f(theta, occupation_from_theta(theta))
            })
            .sum()),
        BathSpec::Continuum { j, omega_max } => {
            let integrand = |omega: f64| -> f64 {
                if omega <= 0.0 {
                    // finite limit J(w) * f as w -> 0; for the coth weight this
                    // is J(w) * 2/theta, handled by the stable occupation
                    return 0.0;
                }
                let theta = temp.theta(omega);
                j.evaluate(omega) * f(theta, occupation_from_theta(theta))
            };
            // left endpoint: the limit value of the integrand as w -> 0+
            let probe = omega_max * 1e-9;
            let left = integrand(probe);
            if !left.is_finite() {
                return Err(Error::DivergentBath(
                    "integrand has no finite limit at omega -> 0".into(),
                ));
            }
            // divergence check: the integrand must not keep growing as w -> 0
            let l1 = integrand(omega_max * 1e-6).abs();
            let l2 = integrand(omega_max * 1e-7).abs();
            let l3 = integrand(omega_max * 1e-8).abs();
            if l3 > 5.0 * l2.max(1e-300) && l2 > 5.0 * l1.max(1e-300) {
                return Err(Error::DivergentBath(format!(
                    "integrand grows without bound near omega = 0 \
                     ({l1:.3e} -> {l2:.3e} -> {l3:.3e})"
                )));
            }
            adaptive_simpson(&integrand, 0.0, *omega_max, left, 1e-8)
        }
    }
}

/// Adaptive Simpson quadrature to a relative tolerance, with an explicitly
/// supplied value at the left endpoint.
fn adaptive_simpson<F>(f: &F, a: f64, b: f64, fa: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    // coarse pass to fix the absolute tolerance scale
    let n0 = 64;
    let h = (b - a) / n0 as f64;
    let mut coarse = 0.0;
    let mut prev_x = a;
    let mut prev_f = fa;
    for i in 1..=n0 {
        let x = a + h * i as f64;
        let fx = f(x);
        coarse += 0.5 * (prev_f + fx) * (x - prev_x);
        prev_x = x;
        prev_f = fx;
    }
    let scale = coarse.abs().max(f64::MIN_POSITIVE);
    let tol = rel_tol * scale;

    // recursive adaptive Simpson over the coarse cells
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 {
            return Err(Error::Numerical(
                "adaptive quadrature failed to converge (max depth reached)".into(),
            ));
        }
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }

    let mut total = 0.0;
    for i in 0..n0 {
        let x0 = a + h * i as f64;
        let x1 = x0 + h;
        let f0 = if i == 0 { fa } else { f(x0) };
        let f1 = f(x1);
        let xm = 0.5 * (x0 + x1);
        let fm = f(xm);
        let whole = simpson(f0, fm, f1, h);
        total += recurse(f, x0, x1, f0, fm, f1, whole, tol / n0 as f64, 48)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_for_theta(omega: f64, theta: f64) -> Temperature {
        Temperature::from_thermal_frequency(omega / theta).unwrap()
    }

    #[test]
    fn occupation_limits_and_identity() {
        let omega = 1e6;
        // zero-temperature limit
        let cold = temp_for_theta(omega, 1e4);
        assert_eq!(occupation(omega, cold).unwrap(), 0.0);
        // e^theta - 1 = 1 at theta = ln 2
        let t = temp_for_theta(omega, 2.0f64.ln());
        assert!((occupation(omega, t).unwrap() - 1.0).abs() < 1e-12);
        // coth identity 1 + 2 n = coth(theta/2)
        for theta in [0.01, 1.0, 10.0] {
            let t = temp_for_theta(omega, theta);
            let n = occupation(omega, t).unwrap();
            let coth = 1.0 / (theta / 2.0).tanh();
            assert!(
                ((1.0 + 2.0 * n) - coth).abs() < 1e-12 * coth,
                "theta = {theta}"
            );
        }
        assert!(matches!(
            occupation(-1.0, cold),
            Err(Error::InvalidFrequency(_))
        ));
    }

    #[test]
    fn occupation_small_theta_series() {
        let omega = 1e6;
        let t = temp_for_theta(omega, 1e-8);
        let n = occupation(omega, t).unwrap();
        assert!((n - (1e8 - 0.5)).abs() / n < 1e-9);
    }

    #[test]
    fn thermal_state_cold_limit_is_vacuum() {
        let omega = 1e6;
        let t = temp_for_theta(omega, 200.0);
        let th = thermal_state(omega, t, 4).unwrap();
        assert!((th.state.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(th.leakage < 1e-300);
    }

    #[test]
    fn thermal_state_mean_occupation_matches_geometric_series() {
        let omega = 1e6;
        let t = temp_for_theta(omega, 1.0);
        let th = thermal_state(omega, t, 40).unwrap();
        let mean: f64 =
            (0..40).map(|n| n as f64 * th.state.matrix()[(n, n)].re).sum();
        let expect = 1.0 / (1.0f64.exp() - 1.0);
        assert!((mean - expect).abs() < 1e-10, "mean {mean} vs {expect}");
        assert!(mean >= expect - th.leakage * 40.0 - 1e-12);
    }

    #[test]
    fn thermal_state_ladder_moments_vanish() {
        use crate::hilbert::annihilation_matrix;
        let omega = 1e6;
        let t = temp_for_theta(omega, 0.7);
        let th = thermal_state(omega, t, 35).unwrap();
        let a = annihilation_matrix(35);
        let rho = th.state.matrix();
        let tr_a = crate::hilbert::trace_of_product(&a, rho).norm();
        let aa = a.dot(&a);
        let tr_aa = crate::hilbert::trace_of_product(&aa, rho).norm();
        assert!(tr_a < 1e-12 && tr_aa < 1e-12);
    }

    #[test]
    fn thermal_state_rejects_leaky_truncation() {
        let omega = 1e6;
        let t = temp_for_theta(omega, 0.5);
        assert!(matches!(
            thermal_state(omega, t, 3),
            Err(Error::TruncationTooSmall(_))
        ));
    }

    #[test]
    fn required_truncation_reference_values() {
        let omega = 1e6;
        assert_eq!(required_truncation(omega, temp_for_theta(omega, 10.0), 1e-10).unwrap(), 4);
        assert_eq!(required_truncation(omega, temp_for_theta(omega, 1.0), 1e-10).unwrap(), 25);
        // zero-temperature floor
        assert_eq!(required_truncation(omega, temp_for_theta(omega, 1e6), 1e-10).unwrap(), 2);
        // geometric tail honored: e^(-theta (d - 1)) <= tol at the returned d
        for theta in [0.3, 1.0, 2.5, 7.0] {
            let t = temp_for_theta(omega, theta);
            let d = required_truncation(omega, t, 1e-10).unwrap();
            assert!((-(theta) * (d as f64 - 1.0)).exp() <= 1e-10 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn discrete_bath_integral_single_and_additive() {
        let omega = 2e6;
        let g = 3e4;
        let theta = 1.3;
        let t = temp_for_theta(omega, theta);
        let single = BathSpec::Discrete { modes: vec![Mode { omega, coupling: g, trunc: 10 }] };
        let expect = g * g / (theta / 2.0).tanh();
        let got = bath_integral(&single, t).unwrap();
        assert!((got - expect).abs() < 1e-9 * expect);

        let double = BathSpec::Discrete {
            modes: vec![
                Mode { omega, coupling: g, trunc: 10 },
                Mode { omega, coupling: g, trunc: 10 },
            ],
        };
        let got2 = bath_integral(&double, t).unwrap();
        assert!((got2 - 2.0 * got).abs() < 1e-12 * got2);
    }

    #[test]
    fn ohmic_integral_matches_analytic_low_temperature() {
        // at T -> 0, coth -> 1 and int_0^inf eta w e^(-w/wc) dw = eta wc^2
        let eta = 0.7;
        let omega_c = 1e9;
        let t = Temperature::from_kelvin(1e-6).unwrap();
        assert!(t.theta(omega_c) > 100.0);
        let bath =
            BathSpec::Continuum { j: SpectralDensityModel::Ohmic { eta, omega_c }, omega_max: 50.0 * omega_c };
        let got = bath_integral(&bath, t).unwrap();
        let expect = eta * omega_c * omega_c;
        assert!(
            (got - expect).abs() < 1e-6 * expect,
            "got {got:.6e}, expect {expect:.6e}"
        );
    }

    #[test]
    fn bath_integral_monotone_in_temperature() {
        let omega = 1e6;
        let t1 = temp_for_theta(omega, 2.0);
        let t2 = Temperature::from_kelvin(2.0 * t1.kelvin()).unwrap();
        let discrete = BathSpec::Discrete {
            modes: vec![
                Mode { omega, coupling: 1e4, trunc: 8 },
                Mode { omega: 3.3e6, coupling: 2e4, trunc: 8 },
            ],
        };
        assert!(bath_integral(&discrete, t2).unwrap() >= bath_integral(&discrete, t1).unwrap());

        let cont = BathSpec::Continuum {
            j: SpectralDensityModel::Ohmic { eta: 0.2, omega_c: 1e6 },
            omega_max: 4e7,
        };
        assert!(bath_integral(&cont, t2).unwrap() >= bath_integral(&cont, t1).unwrap());
    }

    #[test]
    fn hat_function_continuum_matches_discrete() {
        // narrow triangles of area g_k^2 around each discrete mode
        let modes =
            vec![Mode { omega: 1e6, coupling: 2e4, trunc: 8 }, Mode { omega: 2.7e6, coupling: 1e4, trunc: 8 }];
        let t = temp_for_theta(1e6, 1.5);
        let discrete = BathSpec::Discrete { modes: modes.clone() };
        let mut points = vec![(1.0, 0.0)];
        for m in &modes {
            let w = 0.005 * m.omega;
            let height = m.coupling * m.coupling / w;
            points.push((m.omega - w, 0.0));
            points.push((m.omega, height));
            points.push((m.omega + w, 0.0));
        }
        points.push((4e6, 0.0));
        let cont = BathSpec::Continuum {
            j: SpectralDensityModel::Tabulated { points },
            omega_max: 4e6,
        };
        let got = bath_integral(&cont, t).unwrap();
        let expect = bath_integral(&discrete, t).unwrap();
        assert!((got - expect).abs() < 0.01 * expect, "got {got:.6e} vs {expect:.6e}");
    }

    #[test]
    fn divergent_tabulated_bath_is_rejected() {
        // J constant down to w = 0 makes J coth ~ 2 J / theta ~ 1/w
        let cont = BathSpec::Continuum {
            j: SpectralDensityModel::Tabulated {
                points: vec![(1e-12, 1.0), (1e6, 1.0)],
            },
            omega_max: 1e6,
        };
        let t = temp_for_theta(1e6, 1.0);
        assert!(matches!(bath_integral(&cont, t), Err(Error::DivergentBath(_))));
    }

    #[test]
    fn temperature_roundtrip() {
        let t = Temperature::from_kelvin(0.002).unwrap();
        let back = Temperature::from_thermal_frequency(t.thermal_frequency()).unwrap();
        assert!((t.kelvin() - back.kelvin()).abs() < 1e-18);
        // the worked reference point: 2 mK at 1e9 rad/s gives theta ~ 3.82
        assert!((t.theta(1e9) - 3.819).abs() < 2e-3);
        assert!(Temperature::from_kelvin(0.0).is_err());
        assert!(Temperature::from_kelvin(-1.0).is_err());
    }
}
