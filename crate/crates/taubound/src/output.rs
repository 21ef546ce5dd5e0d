//! Deterministic CSV / JSON / SVG emission.
//!
//! Floats are written with Rust's shortest round-trip formatting and rows
//! follow a fixed ordering, so identical inputs produce byte-identical
//! files. Every file carries the artifact version and the configuration
//! hash in a header comment (or top-level JSON keys).

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bounds::{BoundReport, CurvePoint};
use crate::dynamics::Trajectory;
use crate::error::Result;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn config_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Shortest round-trip decimal representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn csv_header(config_sha256: &str) -> String {
    format!("# taubound v{ARTIFACT_VERSION}\n# config_sha256: {config_sha256}\n")
}

/// Trajectory CSV with the fixed column set
/// `t_seconds, S_nats, varentropy_nats2, rel_entropy_nats,
///  dHint_var_rad2_per_s2, speed_margin_nats_per_s, pop_0, pop_1, ...`.
pub fn trajectory_csv(traj: &Trajectory, config_sha256: &str) -> String {
    let outcomes = traj.populations.first().map(|p| p.len()).unwrap_or(0);
    let mut s = csv_header(config_sha256);
    s.push_str(
        "t_seconds,S_nats,varentropy_nats2,rel_entropy_nats,dHint_var_rad2_per_s2,speed_margin_nats_per_s",
    );
    for j in 0..outcomes {
        let _ = write!(s, ",pop_{j}");
    }
    s.push('\n');
    for i in 0..traj.times.len() {
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            fmt_f64(traj.times[i]),
            fmt_f64(traj.entropy[i]),
            fmt_f64(traj.varentropy[i]),
            fmt_f64(traj.rel_entropy[i]),
            fmt_f64(traj.interaction_variance[i]),
            fmt_f64(traj.speed_margin[i]),
        );
        for p in &traj.populations[i] {
            let _ = write!(s, ",{}", fmt_f64(*p));
        }
        s.push('\n');
    }
    s
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn opt_u32(v: Option<u32>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const SWEEP_REPORT_COLUMNS: &str = "model,outcome_count,delta_s_nats,f_a,cap_kind,cap_value,\
chi,n_spins,alpha_abs,bath_integral_rad2_per_s2,interaction_variance_rad2_per_s2,\
interaction_variance_exact_rad2_per_s2,omega_rad_per_s,tau_min_seconds,temperature_kelvin";

fn report_row(r: &BoundReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.model,
        r.outcome_count,
        fmt_f64(r.delta_s_nats),
        fmt_f64(r.f_a),
        r.cap_kind,
        fmt_f64(r.cap_value),
        opt_f64(r.chi),
        opt_u32(r.n_spins),
        opt_f64(r.alpha_abs),
        fmt_f64(r.bath_integral_rad2_per_s2),
        fmt_f64(r.interaction_variance_rad2_per_s2),
        opt_f64(r.interaction_variance_exact_rad2_per_s2),
        fmt_f64(r.omega_rad_per_s),
        fmt_f64(r.tau_min_seconds),
        fmt_f64(r.temperature_kelvin),
    )
}

/// Sweep CSV: one row per grid point, ordered by grid index, with the swept
/// parameter values followed by the full bound-report columns.
pub fn sweep_csv(
    param_names: &[String],
    rows: &[(Vec<f64>, BoundReport)],
    config_sha256: &str,
) -> String {
    let mut s = csv_header(config_sha256);
    s.push_str("idx");
    for name in param_names {
        let _ = write!(s, ",{name}");
    }
    let _ = writeln!(s, ",{SWEEP_REPORT_COLUMNS}");
    for (i, (values, report)) in rows.iter().enumerate() {
        let _ = write!(s, "{i}");
        for v in values {
            let _ = write!(s, ",{}", fmt_f64(*v));
        }
        let _ = writeln!(s, ",{}", report_row(report));
    }
    s
}

/// Reference-curve CSV (`g, tau_min`).
pub fn curve_csv(points: &[CurvePoint], config_sha256: &str) -> String {
    let mut s = csv_header(config_sha256);
    s.push_str("g_rad_per_s,tau_min_seconds\n");
    for p in points {
        let _ = writeln!(s, "{},{}", fmt_f64(p.g_rad_per_s), fmt_f64(p.tau_min_seconds));
    }
    s
}

/// Wrap a serializable report with the version and config hash and render
/// deterministic pretty JSON.
pub fn stamped_json<T: Serialize>(value: &T, config_sha256: &str) -> Result<String> {
    #[derive(Serialize)]
    struct Stamped<'a, T> {
        artifact_version: &'a str,
        config_sha256: &'a str,
        #[serde(flatten)]
        body: &'a T,
    }
    let wrapped = Stamped { artifact_version: ARTIFACT_VERSION, config_sha256, body: value };
    let mut text = serde_json::to_string_pretty(&wrapped)
        .map_err(|e| crate::error::Error::Numerical(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Self-contained log-log SVG line plot.
pub fn svg_loglog(
    points: &[(f64, f64)],
    x_label: &str,
    y_label: &str,
    title: &str,
    config_sha256: &str,
) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 55.0;
    let finite: Vec<(f64, f64)> =
        points.iter().cloned().filter(|&(x, y)| x > 0.0 && y > 0.0).collect();
    let (x0, x1, y0, y1) = finite.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| {
            (a.min(x.log10()), b.max(x.log10()), c.min(y.log10()), d.max(y.log10()))
        },
    );
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 0.5, x0 + 0.5) };
    let (y0, y1) = if y1 > y0 { (y0, y1) } else { (y0 - 0.5, y0 + 0.5) };
    let px = |lx: f64| ML + (lx - x0) / (x1 - x0) * (W - ML - MR);
    let py = |ly: f64| H - MB - (ly - y0) / (y1 - y0) * (H - MT - MB);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" font-family=\"monospace\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<!-- taubound v{ARTIFACT_VERSION} config_sha256 {config_sha256} -->");
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{title}</text>",
        (ML + W - MR) / 2.0
    );
    // frame
    let _ = writeln!(
        s,
        "<rect x=\"{ML:.1}\" y=\"{MT:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
        W - ML - MR,
        H - MT - MB
    );
    // decade ticks
    for d in (x0.ceil() as i64)..=(x1.floor() as i64) {
        let x = px(d as f64);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.1}\" x2=\"{x:.2}\" y2=\"{:.1}\" stroke=\"#cccccc\"/>",
            MT,
            H - MB
        );
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{:.1}\" text-anchor=\"middle\">1e{d}</text>",
            H - MB + 16.0
        );
    }
    for d in (y0.ceil() as i64)..=(y1.floor() as i64) {
        let y = py(d as f64);
        let _ = writeln!(
            s,
            "<line x1=\"{ML:.1}\" y1=\"{y:.2}\" x2=\"{:.1}\" y2=\"{y:.2}\" stroke=\"#cccccc\"/>",
            W - MR
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{y:.2}\" text-anchor=\"end\" dominant-baseline=\"middle\">1e{d}</text>",
            ML - 6.0
        );
    }
    // axis labels
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x_label}</text>",
        (ML + W - MR) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{y_label}</text>",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );
    // data
    let mut path = String::new();
    for (x, y) in &finite {
        let _ = write!(path, "{:.2},{:.2} ", px(x.log10()), py(y.log10()));
    }
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>",
        path.trim_end()
    );
    let _ = writeln!(s, "</svg>");
    s
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), content.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            config_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn floats_round_trip_shortest() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(1e-10), "0.0000000001");
        assert_eq!(fmt_f64(3.39e-10).parse::<f64>().unwrap(), 3.39e-10);
    }

    #[test]
    fn curve_csv_is_deterministic() {
        let pts = vec![
            CurvePoint { g_rad_per_s: 1e3, tau_min_seconds: 3.4e-4 },
            CurvePoint { g_rad_per_s: 1e6, tau_min_seconds: 3.4e-7 },
        ];
        let a = curve_csv(&pts, "deadbeef");
        let b = curve_csv(&pts, "deadbeef");
        assert_eq!(a, b);
        assert!(a.starts_with("# taubound v"));
        assert!(a.contains("# config_sha256: deadbeef"));
        assert!(a.contains("g_rad_per_s,tau_min_seconds"));
    }

    #[test]
    fn svg_contains_frame_and_data() {
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let g = 10f64.powi(i);
                (g, 1.0 / g)
            })
            .collect();
        let svg = svg_loglog(&pts, "g", "tau", "test", "cafe");
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("1e3"));
        assert_eq!(svg, svg_loglog(&pts, "g", "tau", "test", "cafe"));
    }
}
