//! Command-line front end: structured configs in, deterministic artifacts out.
//!
//! Exit codes: 0 success, 2 configuration error, 3 resource cap exceeded,
//! 1 anything else.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bounds::{reference_curve, tau_min, BoundReport, VarentropyCap};
use crate::config::{GridConfig, ModelConfig, Quantity, RunConfig};
use crate::dynamics::{
    integrated_speed_check, measurement_time_estimate, run_trajectory, sample_times,
    verify_relative_entropy_identity, MeasurementTime, Trajectory, TrajectoryOptions,
};
use crate::error::{Error, Result};
use crate::models::MeasurementModel;
use crate::output;

#[derive(Parser)]
#[command(name = "taubound", version, about = "Lower bounds on quantum measurement timescales")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form bound and write bound_report.json.
    Bound(CommonArgs),
    /// Propagate the joint state and write trajectory.csv + verification.json.
    Simulate(CommonArgs),
    /// Evaluate the bound over a one- or two-parameter grid.
    Sweep(CommonArgs),
    /// Single-mode reference curve tau_min(g) at fixed omega and T.
    Fig2(Fig2Args),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    shared: SharedArgs,
}

#[derive(Args)]
struct Fig2Args {
    /// Optional config; the built-in preset (omega = 1e9 rad/s, T = 2 mK,
    /// g log-spaced over [1e3, 1e12]) is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    shared: SharedArgs,
}

#[derive(Args, Clone)]
struct SharedArgs {
    /// Output directory (overrides the config's output.directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated formats (csv,json,svg); overrides the config.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads for sweep evaluation.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Reserved; no stochastic code paths exist today.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bound(args) => cmd_bound(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Fig2(args) => cmd_fig2(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::TooLarge(_) => 3,
        _ => 1,
    }
}

struct LoadedConfig {
    config: RunConfig,
    hash: String,
}

fn load_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| Error::Config(format!("{} is not UTF-8: {e}", path.display())))?;
    let config = RunConfig::from_json(&text)?;
    Ok(LoadedConfig { config, hash: output::config_hash(&bytes) })
}

fn resolve_outputs(config: &RunConfig, shared: &SharedArgs) -> Result<(PathBuf, Vec<String>)> {
    let dir = shared
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    let formats = match &shared.format {
        Some(list) => {
            let formats: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
            for f in &formats {
                if !matches!(f.as_str(), "csv" | "json" | "svg") {
                    return Err(Error::Config(format!(
                        "--format: unknown format \"{f}\" (expected csv, json or svg)"
                    )));
                }
            }
            formats
        }
        None => config.output.formats.clone(),
    };
    Ok((dir, formats))
}

fn cmd_bound(args: &CommonArgs) -> Result<()> {
    let loaded = load_config(&args.config)?;
    let (dir, _) = resolve_outputs(&loaded.config, &args.shared)?;
    let model = loaded.config.build_model()?;
    let cap = crate::config::resolve_cap(&loaded.config, &model)?;
    let report = tau_min(&model, cap)?;
    let json = output::stamped_json(&report, &loaded.hash)?;
    output::write_file(&dir, "bound_report.json", &json)?;
    print_bound_summary(&report);
    println!("wrote {}", dir.join("bound_report.json").display());
    Ok(())
}

fn print_bound_summary(report: &BoundReport) {
    println!("model:            {}", report.model);
    println!("outcomes:         {}", report.outcome_count);
    println!("delta_S:          {} nats", output::fmt_f64(report.delta_s_nats));
    println!(
        "cap:              {} = {}",
        report.cap_kind,
        output::fmt_f64(report.cap_value)
    );
    println!("Omega:            {} rad/s", output::fmt_f64(report.omega_rad_per_s));
    println!("tau_min:          {} s", output::fmt_f64(report.tau_min_seconds));
    if report.delta_s_nats == 0.0 {
        println!("warning: no entropy change; the bound is trivially zero");
    }
}

#[derive(Serialize)]
struct VerificationReport {
    model: String,
    approximate_pointer: bool,
    samples: usize,
    t_max_seconds: f64,
    post_entropy_nats: f64,
    measurement_threshold_nats: f64,
    measurement_time_reached: bool,
    measurement_time_estimate_seconds: Option<f64>,
    tau_min_seconds: f64,
    bound_consistent: bool,
    identity_defect_max_nats_per_s: f64,
    identity_fd_tolerance_nats_per_s: f64,
    identity_pass: Option<bool>,
    speed_margin_min_nats_per_s: f64,
    rate_sensitivity_nats_per_s: f64,
    speed_limit_pass: bool,
    integrated_speed_slack_min_nats: f64,
    integrated_speed_pass: bool,
    population_sum_defect: f64,
    population_drift: f64,
    populations_pass: bool,
    spectrum_drift: f64,
    spectrum_pass: bool,
    interaction_variance_drift_rel: f64,
    support_leak_max: f64,
    eigenbasis_defect: f64,
    initial_purity: f64,
    pass: bool,
}

/// Library entry point behind `simulate`; also used by the acceptance suite.
pub fn simulate_and_verify(
    config: &RunConfig,
    model: &MeasurementModel,
    opts: &TrajectoryOptions,
) -> Result<(Trajectory, VerificationSummary)> {
    let times = sample_times(model, opts)?;
    let traj = run_trajectory(model, &times, opts)?;
    let identity = verify_relative_entropy_identity(&traj)?;
    let f_a = crate::entropy::f_a(model.outcome_count())?;
    let integrated = integrated_speed_check(&traj, f_a);
    let epsilon = config.epsilon_nats(traj.post_entropy)?;
    let estimate = measurement_time_estimate(&traj, epsilon)?;

    let cap = match config.varentropy_cap_kind() {
        "observed_max" => {
            let max_v = traj.varentropy.iter().cloned().fold(0.0f64, f64::max);
            VarentropyCap::ObservedMax(max_v.max(f64::MIN_POSITIVE))
        }
        _ => VarentropyCap::OutcomeCount,
    };
    let report = tau_min(model, cap)?;

    let min_margin = traj.speed_margin.iter().cloned().fold(f64::INFINITY, f64::min);
    let speed_limit_pass = min_margin >= -3.0 * traj.rate_sensitivity;
    let integrated_speed_pass = integrated.min_slack >= -1e-9;
    let populations_pass = traj.population_sum_defect <= 1e-9 && traj.population_drift <= 1e-9;
    let spectrum_pass = traj.spectrum_drift <= 1e-9;
    let identity_pass = if traj.exact_pointer {
        Some(identity.max_defect <= identity.fd_tolerance)
    } else {
        None
    };
    let (reached, estimate_seconds) = match estimate {
        MeasurementTime::Reached(t) => (true, Some(t)),
        MeasurementTime::NotReached => (false, None),
    };
    let bound_consistent = match estimate {
        MeasurementTime::Reached(t) => t >= report.tau_min_seconds,
        MeasurementTime::NotReached => true,
    };
    let pass = speed_limit_pass
        && integrated_speed_pass
        && populations_pass
        && spectrum_pass
        && bound_consistent
        && identity_pass.unwrap_or(true);

    let summary = VerificationSummary {
        report: VerificationReport {
            model: model.descriptor(),
            approximate_pointer: !traj.exact_pointer,
            samples: traj.times.len(),
            t_max_seconds: *traj.times.last().unwrap(),
            post_entropy_nats: traj.post_entropy,
            measurement_threshold_nats: epsilon,
            measurement_time_reached: reached,
            measurement_time_estimate_seconds: estimate_seconds,
            tau_min_seconds: report.tau_min_seconds,
            bound_consistent,
            identity_defect_max_nats_per_s: identity.max_defect,
            identity_fd_tolerance_nats_per_s: identity.fd_tolerance,
            identity_pass,
            speed_margin_min_nats_per_s: min_margin,
            rate_sensitivity_nats_per_s: traj.rate_sensitivity,
            speed_limit_pass,
            integrated_speed_pass,
            integrated_speed_slack_min_nats: integrated.min_slack,
            population_sum_defect: traj.population_sum_defect,
            population_drift: traj.population_drift,
            populations_pass,
            spectrum_drift: traj.spectrum_drift,
            spectrum_pass,
            interaction_variance_drift_rel: traj.interaction_variance_drift,
            support_leak_max: traj.support_leak_max,
            eigenbasis_defect: traj.eigenbasis_defect,
            initial_purity: traj.initial_purity,
            pass,
        },
        bound: report,
    };
    Ok((traj, summary))
}

pub struct VerificationSummary {
    report: VerificationReport,
    pub bound: BoundReport,
}

impl VerificationSummary {
    pub fn pass(&self) -> bool {
        self.report.pass
    }

    pub fn bound_consistent(&self) -> bool {
        self.report.bound_consistent
    }

    pub fn speed_limit_pass(&self) -> bool {
        self.report.speed_limit_pass
    }

    pub fn integrated_slack_min(&self) -> f64 {
        self.report.integrated_speed_slack_min_nats
    }

    pub fn identity_defect(&self) -> f64 {
        self.report.identity_defect_max_nats_per_s
    }

    pub fn measurement_time_estimate(&self) -> Option<f64> {
        self.report.measurement_time_estimate_seconds
    }

    pub fn tau_min_seconds(&self) -> f64 {
        self.report.tau_min_seconds
    }

    pub fn to_json(&self, config_hash: &str) -> Result<String> {
        output::stamped_json(&self.report, config_hash)
    }
}

fn cmd_simulate(args: &CommonArgs) -> Result<()> {
    let loaded = load_config(&args.config)?;
    let (dir, _) = resolve_outputs(&loaded.config, &args.shared)?;
    let model = loaded.config.build_model()?;
    let opts = loaded.config.trajectory_options()?;
    let (traj, summary) = simulate_and_verify(&loaded.config, &model, &opts)?;
    output::write_file(&dir, "trajectory.csv", &output::trajectory_csv(&traj, &loaded.hash))?;
    output::write_file(&dir, "verification.json", &summary.to_json(&loaded.hash)?)?;
    println!("model:              {}", model.descriptor());
    println!("samples:            {}", traj.times.len());
    println!("S(rho_M):           {} nats", output::fmt_f64(traj.post_entropy));
    match summary.measurement_time_estimate() {
        Some(t) => println!("measurement time:   {} s", output::fmt_f64(t)),
        None => println!("measurement time:   not reached within the sampled window"),
    }
    println!("tau_min:            {} s", output::fmt_f64(summary.tau_min_seconds()));
    println!("all checks passed:  {}", summary.pass());
    println!("wrote {}", dir.join("trajectory.csv").display());
    println!("wrote {}", dir.join("verification.json").display());
    Ok(())
}

/// Apply a swept parameter value to a model configuration.
fn apply_sweep_value(base: &ModelConfig, name: &str, value: f64) -> Result<ModelConfig> {
    let mut cfg = base.clone();
    match (name, &mut cfg) {
        ("coupling", ModelConfig::SpinBoson { bath, .. })
        | ("coupling", ModelConfig::BosonBoson { bath, .. }) => match bath {
            crate::config::BathConfig::Discrete { modes, .. } if modes.len() == 1 => {
                modes[0].coupling = Quantity::new(value, "rad_per_s");
            }
            _ => {
                return Err(Error::Config(
                    "sweep parameter \"coupling\" needs a discrete bath with exactly one mode"
                        .into(),
                ))
            }
        },
        ("spins_per_qubit", ModelConfig::SpinBoson { spins_per_qubit, .. }) => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!(
                    "sweep parameter \"spins_per_qubit\" needs positive integers, got {value}"
                )));
            }
            *spins_per_qubit = value as usize;
        }
        ("alpha", ModelConfig::BosonBoson { alpha, .. }) => {
            alpha.re = value;
            alpha.im = 0.0;
        }
        ("temperature_kelvin", ModelConfig::SpinBoson { temperature, .. })
        | ("temperature_kelvin", ModelConfig::BosonBoson { temperature, .. }) => {
            *temperature = Quantity::new(value, "K");
        }
        (other, _) => {
            return Err(Error::Config(format!(
                "unknown or inapplicable sweep parameter \"{other}\" \
                 (expected coupling, spins_per_qubit, alpha or temperature_kelvin)"
            )))
        }
    }
    Ok(cfg)
}

fn cmd_sweep(args: &CommonArgs) -> Result<()> {
    let loaded = load_config(&args.config)?;
    let (dir, formats) = resolve_outputs(&loaded.config, &args.shared)?;
    let sweep = loaded
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep: section is required for this command".into()))?;
    if sweep.parameters.is_empty() || sweep.parameters.len() > 2 {
        return Err(Error::Config(format!(
            "sweep.parameters: expected one or two swept parameters, got {}",
            sweep.parameters.len()
        )));
    }
    let grids: Vec<Vec<f64>> = sweep
        .parameters
        .iter()
        .enumerate()
        .map(|(i, p)| p.grid.expand(&format!("sweep.parameters[{i}].grid")))
        .collect::<Result<_>>()?;
    let names: Vec<String> = sweep.parameters.iter().map(|p| p.name.clone()).collect();

    // Cartesian product in row-major grid order.
    let mut points: Vec<Vec<f64>> = Vec::new();
    match grids.len() {
        1 => {
            for &v in &grids[0] {
                points.push(vec![v]);
            }
        }
        _ => {
            for &a in &grids[0] {
                for &b in &grids[1] {
                    points.push(vec![a, b]);
                }
            }
        }
    }

    let rows = evaluate_sweep(
        &loaded.config.model,
        &names,
        &points,
        loaded.config.varentropy_cap_kind(),
        args.shared.threads.max(1),
    )?;

    if formats.iter().any(|f| f == "csv") {
        output::write_file(&dir, "sweep.csv", &output::sweep_csv(&names, &rows, &loaded.hash))?;
        println!("wrote {}", dir.join("sweep.csv").display());
    }
    if formats.iter().any(|f| f == "svg") && names.len() == 1 {
        let pts: Vec<(f64, f64)> =
            rows.iter().map(|(v, r)| (v[0], r.tau_min_seconds)).collect();
        let svg = output::svg_loglog(
            &pts,
            &names[0],
            "tau_min_seconds",
            "measurement-time lower bound",
            &loaded.hash,
        );
        output::write_file(&dir, "sweep.svg", &svg)?;
        println!("wrote {}", dir.join("sweep.svg").display());
    }
    println!("evaluated {} grid points", rows.len());
    Ok(())
}

/// Evaluate the bound over the grid, optionally on several worker threads;
/// results are ordered by grid index regardless of scheduling.
fn evaluate_sweep(
    base: &ModelConfig,
    names: &[String],
    points: &[Vec<f64>],
    cap_kind: &str,
    threads: usize,
) -> Result<Vec<(Vec<f64>, BoundReport)>> {
    if cap_kind != "outcome_count" {
        return Err(Error::Config(
            "sweep supports only bound.varentropy_cap = \"outcome_count\"".into(),
        ));
    }
    let eval_one = |values: &Vec<f64>| -> Result<BoundReport> {
        let mut cfg = base.clone();
        for (name, &v) in names.iter().zip(values.iter()) {
            cfg = apply_sweep_value(&cfg, name, v)?;
        }
        let parsed = RunConfig {
            model: cfg,
            bound: None,
            simulate: None,
            sweep: None,
            output: Default::default(),
        };
        let model = parsed.build_model()?;
        tau_min(&model, VarentropyCap::OutcomeCount)
    };

    let n = points.len();
    let mut results: Vec<Option<Result<BoundReport>>> = Vec::new();
    results.resize_with(n, || None);
    if threads <= 1 {
        for (i, values) in points.iter().enumerate() {
            results[i] = Some(eval_one(values));
        }
    } else {
        let chunk = n.div_ceil(threads);
        let slots: Vec<std::sync::Mutex<Option<Result<BoundReport>>>> =
            (0..n).map(|_| std::sync::Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for worker in 0..threads {
                let lo = worker * chunk;
                let hi = ((worker + 1) * chunk).min(n);
                if lo >= hi {
                    continue;
                }
                let slots = &slots;
                let eval_one = &eval_one;
                scope.spawn(move || {
                    for i in lo..hi {
                        *slots[i].lock().unwrap() = Some(eval_one(&points[i].to_vec()));
                    }
                });
            }
        });
        for (i, slot) in slots.into_iter().enumerate() {
            results[i] = slot.into_inner().unwrap();
        }
    }

    let mut rows = Vec::with_capacity(n);
    for (values, result) in points.iter().zip(results.into_iter()) {
        rows.push((values.clone(), result.expect("all grid points evaluated")?));
    }
    Ok(rows)
}

/// Built-in reference preset: omega = 1e9 rad/s, T = 2 mK, 50 log-spaced
/// couplings over [1e3, 1e12] rad/s.
pub fn fig2_preset() -> (f64, f64, GridConfig) {
    (1e9, 0.002, GridConfig::Log { start: 1e3, stop: 1e12, points: 50 })
}

fn cmd_fig2(args: &Fig2Args) -> Result<()> {
    let (omega, kelvin, grid, dir, formats, hash) = match &args.config {
        Some(path) => {
            let loaded = load_config(path)?;
            let (dir, formats) = resolve_outputs(&loaded.config, &args.shared)?;
            let (omega, kelvin) = match &loaded.config.model {
                ModelConfig::SpinBoson { bath, temperature, spins_per_qubit, qubits, .. } => {
                    if *spins_per_qubit != 1 || *qubits != 1 {
                        return Err(Error::Config(
                            "fig2 needs a single-qubit, single-spin model".into(),
                        ));
                    }
                    match bath {
                        crate::config::BathConfig::Discrete { modes, .. } if modes.len() == 1 => (
                            modes[0].omega.angular_frequency("model.bath.modes[0].omega")?,
                            temperature.kelvin("model.temperature")?,
                        ),
                        _ => {
                            return Err(Error::Config(
                                "fig2 needs a discrete bath with exactly one mode".into(),
                            ))
                        }
                    }
                }
                _ => return Err(Error::Config("fig2 needs a spin_boson model".into())),
            };
            let grid = match &loaded.config.sweep {
                Some(s) if s.parameters.len() == 1 && s.parameters[0].name == "coupling" => {
                    s.parameters[0].grid.clone()
                }
                Some(_) => {
                    return Err(Error::Config(
                        "fig2 sweeps exactly one parameter named \"coupling\"".into(),
                    ))
                }
                None => fig2_preset().2,
            };
            (omega, kelvin, grid, dir, formats, loaded.hash)
        }
        None => {
            let (omega, kelvin, grid) = fig2_preset();
            let dir = args
                .shared
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("out"));
            let formats = match &args.shared.format {
                Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
                None => vec!["csv".to_string(), "svg".to_string()],
            };
            let preset_descr = format!(
                "fig2 preset omega={omega} rad/s T={kelvin} K g in [1e3,1e12] points=50"
            );
            (omega, kelvin, grid, dir, formats, output::config_hash(preset_descr.as_bytes()))
        }
    };

    let temp = crate::bath::Temperature::from_kelvin(kelvin)
        .map_err(|e| Error::Config(format!("model.temperature: {e}")))?;
    let g_grid = grid.expand("sweep.parameters[0].grid")?;
    let curve = reference_curve(omega, temp, &g_grid)?;

    // self-check: the closed-form curve must agree with the assembled bound
    crosscheck_curve(omega, temp, &curve)?;

    if formats.iter().any(|f| f == "csv") {
        output::write_file(&dir, "fig2.csv", &output::curve_csv(&curve, &hash))?;
        println!("wrote {}", dir.join("fig2.csv").display());
    }
    if formats.iter().any(|f| f == "svg") {
        let pts: Vec<(f64, f64)> =
            curve.iter().map(|p| (p.g_rad_per_s, p.tau_min_seconds)).collect();
        let svg = output::svg_loglog(
            &pts,
            "g_rad_per_s",
            "tau_min_seconds",
            "single-mode measurement-time bound",
            &hash,
        );
        output::write_file(&dir, "fig2.svg", &svg)?;
        println!("wrote {}", dir.join("fig2.svg").display());
    }
    println!("evaluated {} couplings at omega = {} rad/s, T = {} K", curve.len(), omega, kelvin);
    Ok(())
}

/// Assert the reference curve against the full bound pipeline on a thinned
/// subgrid (every point for grids up to 50 entries).
fn crosscheck_curve(
    omega: f64,
    temp: crate::bath::Temperature,
    curve: &[crate::bounds::CurvePoint],
) -> Result<()> {
    use crate::bath::{BathSpec, Mode};
    use crate::models::{Amplitudes, SpinBosonModel};
    let trunc = crate::bath::required_truncation(omega, temp, 1e-10)?.max(2);
    for p in curve {
        let model = MeasurementModel::SpinBoson(
            SpinBosonModel::single_qubit(
                Amplitudes::balanced(),
                1,
                BathSpec::Discrete {
                    modes: vec![Mode { omega, coupling: p.g_rad_per_s, trunc }],
                },
                temp,
            )
            .map_err(|e| Error::Config(format!("model: {e}")))?,
        );
        let report = tau_min(&model, VarentropyCap::OutcomeCount)?;
        let diff = (report.tau_min_seconds - p.tau_min_seconds).abs();
        if diff > 1e-12 * p.tau_min_seconds {
            return Err(Error::Numerical(format!(
                "reference curve and bound disagree at g = {}: {} vs {}",
                p.g_rad_per_s, p.tau_min_seconds, report.tau_min_seconds
            )));
        }
    }
    Ok(())
}
