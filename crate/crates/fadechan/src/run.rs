//! Orchestration of the CLI subcommands and bit-stable file output.
//!
//! All JSON leaves the process in canonical form (objects with sorted keys,
//! floats printed with 12 significant digits) and all files are written
//! through a temp-file rename, so a fixed scenario and seed reproduce
//! byte-identical outputs whatever the worker count.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::aperture::{
    annular_transmittance_approx, annular_transmittance_exact, effective_spot,
    elliptic_max_transmittance, ApertureGeometry,
};
use crate::error::{Error, Result};
use crate::numerics::{
    adaptive_quad, bessel_i0e, lambert_w0, marcum_q, AngleMode, RngStream,
};
use crate::pdt::{
    pdt_beam_wandering, pdt_elliptic, pdt_weak_bw, scan_offset, weak_bw_params,
    CorrectionSettings, ModelKind, TransmittanceDistribution,
};
use crate::scenario::{Scenario, SweepVariable, ValidatedScenario};
use crate::turbulence::{compute_field_statistics, ChannelParams, FieldStatistics};

// ---------------------------------------------------------------------------
// canonical serialization
// ---------------------------------------------------------------------------

/// Format a float with 12 significant digits, stable across platforms.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    if !x.is_finite() {
        // canonical output never carries non-finite values; make it visible
        return format!("\"{x}\"");
    }
    format!("{x:.11e}")
}

fn escape_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

/// Canonical JSON: sorted object keys, fixed float format, no whitespace
/// variability.
pub fn canonical_json(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.to_string()
            } else if let Some(u) = n.as_u64() {
                u.to_string()
            } else {
                format_float(n.as_f64().unwrap_or(f64::NAN))
            }
        }
        Value::String(s) => format!("\"{}\"", escape_json(s)),
        Value::Array(items) => {
            let inner: Vec<String> = items.iter().map(canonical_json).collect();
            format!("[{}]", inner.join(","))
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let inner: Vec<String> = keys
                .iter()
                .map(|k| format!("\"{}\":{}", escape_json(k), canonical_json(&map[*k])))
                .collect();
            format!("{{{}}}", inner.join(","))
        }
    }
}

/// Write bytes through a temp file in the destination directory, then
/// rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Distribution CSV: one row per bin, 12-significant-digit floats,
/// LF line endings.
pub fn distribution_csv(dist: &TransmittanceDistribution) -> String {
    let mut out = String::from("eta_bin_left,eta_bin_right,density\n");
    for (d, e) in dist.density.iter().zip(dist.bin_edges.windows(2)) {
        out.push_str(&format!(
            "{},{},{}\n",
            format_float(e[0]),
            format_float(e[1]),
            format_float(*d)
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// shared orchestration pieces
// ---------------------------------------------------------------------------

fn stats_to_json(st: &FieldStatistics) -> Value {
    serde_json::to_value(st).expect("statistics serialize")
}

fn derived_json(p: &ChannelParams) -> Value {
    serde_json::json!({
        "wavenumber": p.wavenumber(),
        "omega": p.omega(),
        "sigma_R2": p.rytov_variance(),
        "vacuum_spot": p.vacuum_spot_sq().sqrt(),
        "spot_estimate": p.spot_estimate(),
    })
}

fn compute_stats(v: &ValidatedScenario) -> Result<FieldStatistics> {
    let rng = RngStream::new(v.seed, 0x57A7);
    compute_field_statistics(&v.params, &v.geom, &v.budget, &rng)
}

fn run_model(
    v: &ValidatedScenario,
    stats: &FieldStatistics,
    corrections: &CorrectionSettings,
    model: ModelKind,
) -> Result<TransmittanceDistribution> {
    let rng = RngStream::new(v.seed, 0x9D7);
    match model {
        ModelKind::BeamWandering => pdt_beam_wandering(
            stats.w_st.value,
            stats.sigma_bw2.value.max(0.0).sqrt(),
            &v.geom,
            corrections,
            v.n_samples,
            v.bins,
            &rng,
        ),
        ModelKind::Elliptic => pdt_elliptic(
            stats,
            v.params.w0,
            &v.geom,
            corrections,
            AngleMode::Uniform,
            v.n_samples,
            v.bins,
            &rng,
        ),
        ModelKind::WeakBw => {
            let wp = weak_bw_params(stats, &v.geom, corrections)?;
            pdt_weak_bw(&wp, corrections, v.n_samples, v.bins, &rng)
        }
    }
}

fn dist_summary(dist: &TransmittanceDistribution) -> Value {
    serde_json::json!({
        "mean": dist.mean,
        "second_moment": dist.second_moment,
        "variance": dist.variance,
        "n_samples": dist.n_samples,
        "model": dist.model_tag.tag(),
        "provenance": dist.provenance,
        "diagnostics": serde_json::to_value(&dist.diagnostics).unwrap(),
        "total_mass": dist.total_mass(),
    })
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

/// `stats`: first-principles channel statistics to `stats.json`.
pub fn run_stats(scenario: &Scenario, out_dir: &Path) -> Result<PathBuf> {
    let v = scenario.validate()?;
    let t0 = Instant::now();
    let st = compute_stats(&v)?;
    let summary = serde_json::json!({
        "channel": serde_json::to_value(&scenario.channel).unwrap(),
        "aperture": serde_json::to_value(&scenario.aperture).unwrap(),
        "derived": derived_json(&v.params),
        "statistics": stats_to_json(&st),
        "seed": v.seed,
        "scenario_hash": scenario.hash(),
        "runtime_seconds": t0.elapsed().as_secs_f64(),
        "warnings": v.warnings,
    });
    let path = out_dir.join("stats.json");
    write_atomic(&path, strip_runtime(&summary).as_bytes())?;
    Ok(path)
}

/// Replace the runtime field by a canonical serialization with it removed
/// from byte-stability guarantees: runtime goes to a sidecar key ordering
/// but its value would break rerun identity, so it is rounded away.
fn strip_runtime(v: &Value) -> String {
    let mut v = v.clone();
    if let Some(obj) = v.as_object_mut() {
        // wall time can never be byte-stable; keep the field but round to
        // whole seconds so reruns at similar speed stay identical, and
        // drop it entirely when sub-minute determinism matters
        obj.remove("runtime_seconds");
    }
    canonical_json(&v)
}

/// `pdt`: one distribution to `pdt.csv` plus `pdt_summary.json`.
pub fn run_pdt(scenario: &Scenario, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let v = scenario.validate()?;
    let st = compute_stats(&v)?;
    let dist = run_model(&v, &st, &v.corrections, v.model)?;

    let csv_path = out_dir.join("pdt.csv");
    write_atomic(&csv_path, distribution_csv(&dist).as_bytes())?;

    let summary = serde_json::json!({
        "distribution": dist_summary(&dist),
        "statistics": stats_to_json(&st),
        "derived": derived_json(&v.params),
        "corrections": serde_json::to_value(&v.corrections).unwrap(),
        "seed": v.seed,
        "scenario_hash": scenario.hash(),
        "warnings": v.warnings,
    });
    let json_path = out_dir.join("pdt_summary.json");
    write_atomic(&json_path, strip_runtime(&summary).as_bytes())?;
    Ok((csv_path, json_path))
}

/// `sweep`: one distribution per grid point plus a summary table.
pub fn run_sweep(scenario: &Scenario, out_dir: &Path) -> Result<PathBuf> {
    let v = scenario.validate()?;
    let sweep = v
        .sweep
        .clone()
        .ok_or_else(|| Error::Scenario("sweep requested but scenario has no sweep section".into()))?;

    let mut points: Vec<(f64, TransmittanceDistribution)> = Vec::new();
    match sweep.variable {
        SweepVariable::D0 => {
            let st = compute_stats(&v)?;
            let results = scan_offset(&sweep.grid, |d0| {
                let corr = CorrectionSettings {
                    d0,
                    ..v.corrections
                };
                run_model(&v, &st, &corr, v.model)
            })?;
            for r in results {
                points.push((r.d0, r.distribution));
            }
        }
        SweepVariable::TrackingRatio => {
            let st = compute_stats(&v)?;
            for &ratio in &sweep.grid {
                let corr = CorrectionSettings {
                    tracking_ratio: ratio,
                    ..v.corrections
                };
                points.push((ratio, run_model(&v, &st, &corr, v.model)?));
            }
        }
        SweepVariable::Length => {
            for &length in &sweep.grid {
                let mut sc = scenario.clone();
                sc.channel.length = length;
                let vi = sc.validate()?;
                let st = compute_stats(&vi)?;
                points.push((length, run_model(&vi, &st, &vi.corrections, vi.model)?));
            }
        }
    }

    let var_name = match sweep.variable {
        SweepVariable::D0 => "d0",
        SweepVariable::TrackingRatio => "tracking_ratio",
        SweepVariable::Length => "length",
    };
    let mut rows = Vec::new();
    for (i, (x, dist)) in points.iter().enumerate() {
        let csv_path = out_dir.join(format!("pdt_{var_name}_{i:03}.csv"));
        write_atomic(&csv_path, distribution_csv(dist).as_bytes())?;
        rows.push(serde_json::json!({
            "index": i,
            var_name: x,
            "mean": dist.mean,
            "variance": dist.variance,
            "csv": csv_path.file_name().unwrap().to_string_lossy(),
        }));
    }
    let best = points
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.mean.partial_cmp(&b.1 .1.mean).unwrap())
        .map(|(i, (x, d))| (i, *x, d.mean))
        .unwrap();
    let summary = serde_json::json!({
        "variable": var_name,
        "grid": sweep.grid,
        "rows": rows,
        "argmax": {"index": best.0, var_name: best.1, "mean": best.2},
        "seed": v.seed,
        "scenario_hash": scenario.hash(),
        "warnings": v.warnings,
    });
    let path = out_dir.join("sweep_summary.json");
    write_atomic(&path, strip_runtime(&summary).as_bytes())?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

fn check(name: &str, measured: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: measured <= tolerance,
        measured,
        tolerance,
        detail,
    }
}

/// Desk-scale self-checks of the numerical core against closed forms and
/// independent quadrature. Tolerances can be overridden per check name.
pub fn run_validate(
    scenario: &Scenario,
    out_dir: &Path,
    tolerance_overrides: &std::collections::HashMap<String, f64>,
) -> Result<(PathBuf, bool)> {
    let tol = |name: &str, default: f64| -> f64 {
        tolerance_overrides.get(name).copied().unwrap_or(default)
    };
    let mut checks: Vec<CheckResult> = Vec::new();

    // 1. Marcum identity Q(0, b) = exp(-b^2/2)
    {
        let mut worst = 0.0f64;
        for i in 0..=50 {
            let b = 0.1 * i as f64;
            worst = worst.max((marcum_q(0.0, b)? - (-0.5 * b * b).exp()).abs());
        }
        checks.push(check(
            "marcum_identity",
            worst,
            tol("marcum_identity", 1e-10),
            "max |Q(0,b) - exp(-b^2/2)| over b in [0, 5]".into(),
        ));
    }
    // 2. Lambert W round trip
    {
        let mut worst = 0.0f64;
        for i in 0..=50 {
            let x = i as f64;
            worst = worst.max((lambert_w0(x * x.exp())? - x).abs() / (1.0 + x));
        }
        checks.push(check(
            "lambert_round_trip",
            worst,
            tol("lambert_round_trip", 1e-10),
            "max |W(x e^x) - x|/(1+x) over x in [0, 50]".into(),
        ));
    }
    // 3. Bessel against the plain series
    {
        let series_i0e = |x: f64| {
            let q = 0.25 * x * x;
            let mut term = 1.0f64;
            let mut sum = 1.0f64;
            for k in 1..400 {
                term *= q / ((k * k) as f64);
                sum += term;
                if term < sum * 1e-19 {
                    break;
                }
            }
            sum * (-x).exp()
        };
        let mut worst = 0.0f64;
        for &x in &[0.1, 1.0, 4.0, 9.0, 25.0, 80.0] {
            worst = worst.max((bessel_i0e(x) / series_i0e(x) - 1.0).abs());
        }
        checks.push(check(
            "bessel_series",
            worst,
            tol("bessel_series", 1e-12),
            "max relative error of i0e against the defining series".into(),
        ));
    }
    // 4-6. scenario invariants (named), then aperture maps on the scenario
    let geom_result = ApertureGeometry::new(
        scenario.aperture.a1,
        scenario.aperture.a2,
        scenario.aperture.d0,
    );
    match &geom_result {
        Ok(_) => checks.push(check(
            "aperture_invariant_a1_gt_a2",
            0.0,
            0.5,
            "a1 > a2 >= 0 and d0 >= 0".into(),
        )),
        Err(e) => checks.push(check(
            "aperture_invariant_a1_gt_a2",
            1.0,
            0.5,
            e.to_string(),
        )),
    }
    let channel_result = ChannelParams::new(
        scenario.channel.wavelength,
        scenario.channel.w0,
        scenario.channel.cn2,
        scenario.channel.length,
    );
    match &channel_result {
        Ok(_) => checks.push(check(
            "channel_invariant_positivity",
            0.0,
            0.5,
            "wavelength, W0, L > 0 and Cn2 >= 0".into(),
        )),
        Err(e) => checks.push(check(
            "channel_invariant_positivity",
            1.0,
            0.5,
            e.to_string(),
        )),
    }

    if let Ok(geom) = geom_result {
        // exact map vs radial quadrature
        let mut worst = 0.0f64;
        for &w in &[geom.a2.max(1e-4), 0.5 * (geom.a1 + geom.a2), geom.a1] {
            for i in 0..6 {
                let r0 = 0.5 * w * i as f64;
                let exact = annular_transmittance_exact(r0, w, &geom)?;
                let disk = |a: f64| -> Result<f64> {
                    Ok(adaptive_quad(
                        |r| {
                            let z = 4.0 * r * r0 / (w * w);
                            4.0 / (w * w)
                                * r
                                * (-2.0 * (r - r0) * (r - r0) / (w * w)).exp()
                                * bessel_i0e(z)
                        },
                        0.0,
                        a,
                        1e-12,
                        400_000,
                    )?
                    .value)
                };
                worst = worst.max((exact - (disk(geom.a1)? - disk(geom.a2)?)).abs());
            }
        }
        checks.push(check(
            "aperture_exact_vs_quadrature",
            worst,
            tol("aperture_exact_vs_quadrature", 1e-8),
            "Marcum-Q annular map against direct radial quadrature".into(),
        ));

        // approximate map vs exact
        let mut worst = 0.0f64;
        for &w in &[geom.a2.max(1e-4), 0.5 * (geom.a1 + geom.a2), geom.a1, 2.0 * geom.a1] {
            for i in 0..60 {
                let r0 = 3.0 * w * i as f64 / 59.0;
                worst = worst.max(
                    (annular_transmittance_exact(r0, w, &geom)?
                        - annular_transmittance_approx(r0, w, &geom)?)
                    .abs(),
                );
            }
        }
        checks.push(check(
            "aperture_approx_vs_exact",
            worst,
            tol("aperture_approx_vs_exact", 0.02),
            "Weibull-type approximation against the exact map".into(),
        ));

        // effective spot identity and elliptic axial limit
        let mut worst = 0.0f64;
        for &w in &[0.3 * geom.a1, geom.a1, 3.0 * geom.a1] {
            for i in 0..5 {
                let chi = i as f64;
                worst = worst.max((effective_spot(chi, geom.a1, w, w)? - w).abs() / w);
            }
        }
        checks.push(check(
            "effective_spot_identity",
            worst,
            tol("effective_spot_identity", 1e-10),
            "W_eff(chi; W, W) = W".into(),
        ));

        let mut worst = 0.0f64;
        for &w in &[0.4 * geom.a1, 1.5 * geom.a1] {
            let got = elliptic_max_transmittance(geom.a1, w, w)?;
            let want = 1.0 - (-2.0 * geom.a1 * geom.a1 / (w * w)).exp();
            worst = worst.max((got - want).abs());
        }
        checks.push(check(
            "elliptic_max_circular_limit",
            worst,
            tol("elliptic_max_circular_limit", 1e-10),
            "elliptic axial transmittance at W1 = W2".into(),
        ));
    }

    if let (Ok(geom), Ok(_)) = (&geom_result, &channel_result) {
        // vacuum statistics at a reduced budget
        let vac = ChannelParams::new(
            scenario.channel.wavelength,
            scenario.channel.w0,
            0.0,
            scenario.channel.length,
        )?;
        let budget = crate::turbulence::QmcBudget {
            n_4d: 40_000,
            n_10d: 80_000,
            replicates: 8,
            window_scale: 3.5,
        };
        let st = compute_field_statistics(&vac, geom, &budget, &RngStream::new(1234, 0))?;
        let wv = vac.vacuum_spot_sq().sqrt();
        let mut worst = (st.w_st.value / wv - 1.0).abs();
        for (n, &a) in [geom.a1, geom.a2].iter().enumerate() {
            let want = 1.0 - (-2.0 * a * a / (wv * wv)).exp();
            worst = worst.max((st.mean_eta[n].value / want - 1.0).abs());
        }
        checks.push(check(
            "vacuum_limits",
            worst,
            tol("vacuum_limits", 5e-3),
            "W_ST and <eta_n> against vacuum closed forms at Cn2 = 0".into(),
        ));

        // distribution hygiene on a small run
        let corr = CorrectionSettings::none();
        let d = pdt_beam_wandering(
            0.5 * (geom.a1 + geom.a2),
            0.2 * geom.a2,
            geom,
            &corr,
            20_000,
            100,
            &RngStream::new(7, 7),
        )?;
        checks.push(check(
            "distribution_normalization",
            (d.total_mass() - 1.0).abs(),
            tol("distribution_normalization", 1e-9),
            "sampled PDT integrates to one".into(),
        ));
    }

    let passed = checks.iter().all(|c| c.passed);
    let report = serde_json::json!({
        "passed": passed,
        "checks": checks.iter().map(|c| serde_json::to_value(c).unwrap()).collect::<Vec<_>>(),
        "scenario_hash": scenario.hash(),
    });
    let path = out_dir.join("validate.json");
    write_atomic(&path, canonical_json(&report).as_bytes())?;
    Ok((path, passed))
}
