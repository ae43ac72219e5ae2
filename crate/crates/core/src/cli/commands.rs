//! Subcommand bodies. Each returns its artifacts in memory; the caller
//! writes them.

use serde::Serialize;
use serde_json::json;

use super::config::Resolved;
use super::{Artifacts, CliError};
use crate::analysis::{array_factor, compare_waveforms, gain_report_with_loss, theta_grid, to_db};
use crate::architecture::{beam_map, required_bandwidths};
use crate::dof::{solve_steering, verify_steering, DEFAULT_VERIFY_TOL_DEG};
use crate::io::{fmt_f64, fmt_opt, json_document, Provenance, Table};
use crate::sim::{measure_gains, simulate_rx, EmpiricalGains};
use crate::waveform::WaveformJson;

fn json_err(e: serde_json::Error) -> CliError {
    CliError::Io(format!("cannot encode JSON: {e}"))
}

fn doc<T: Serialize>(value: &T, prov: &Provenance) -> Result<String, CliError> {
    json_document(value, prov).map_err(json_err)
}

/// Every run records the exact configuration that produced it.
fn with_run_config(r: &Resolved, mut a: Artifacts) -> Result<Artifacts, CliError> {
    let mut c = r.config.clone();
    c.meta = Some(serde_json::to_value(&r.provenance).map_err(json_err)?);
    let mut text = serde_json::to_string_pretty(&c).map_err(json_err)?;
    text.push('\n');
    a.add("run_config.json", text);
    Ok(a)
}

fn amplitude_db(x: f64) -> f64 {
    20.0 * x.log10()
}

pub fn waveform(r: &Resolved) -> Result<Artifacts, CliError> {
    let w = r.waveform();
    let mut a = Artifacts::default();
    a.add("waveform.json", doc(&WaveformJson::from(w.clone()), &r.provenance)?);
    let mut t = Table::new(&["t_s", "re", "im"]);
    for (time, v) in w.sample_period(r.config.analysis.time_samples) {
        t.push(vec![fmt_f64(time), fmt_f64(v.re), fmt_f64(v.im)]);
    }
    a.add("waveform_time.csv", t.render(&r.provenance));
    a.summary.push(format!(
        "waveform: {} harmonics (m_max {}), total power {}, beta_0 = {}",
        2 * w.m_max() + 1,
        w.m_max(),
        fmt_f64(w.total_power()),
        fmt_f64(w.coeff(0).re)
    ));
    with_run_config(r, a)
}

pub fn pattern(r: &Resolved) -> Result<Artifacts, CliError> {
    let grid = theta_grid(r.config.analysis.step_deg);
    let mut a = Artifacts::default();
    for m in r.used_harmonics() {
        let slice = array_factor(&r.arch, &r.config.controls, m, &grid)?;
        let mut t = Table::new(&["theta_deg", "af_linear", "af_db"]);
        for (th, mag) in slice.theta_deg.iter().zip(&slice.magnitude) {
            t.push(vec![fmt_f64(*th), fmt_f64(*mag), fmt_f64(amplitude_db(*mag))]);
        }
        a.add(format!("pattern_m{m}.csv"), t.render(&r.provenance));
        a.summary.push(format!(
            "m={m}: peak {:.3} at {:.3} deg",
            slice.peak_magnitude(),
            slice.refined_peak_theta_deg
        ));
    }
    with_run_config(r, a)
}

pub fn beams(r: &Resolved) -> Result<Artifacts, CliError> {
    let used = r.used_harmonics();
    let map = beam_map(&r.arch, &r.config.controls, &used)?;
    let mut t = Table::new(&["m", "f_m_hz", "d_phi_wrapped_rad", "theta_deg", "g_sig_db"]);
    for e in &map.entries {
        t.push(vec![
            e.m.to_string(),
            fmt_f64(e.f_m_hz),
            fmt_f64(e.d_phi_wrapped_rad),
            fmt_opt(e.theta_deg),
            fmt_f64(e.g_sig_db),
        ]);
    }
    let bandwidth = r.arch.bandwidth_check();
    let required = required_bandwidths(r.waveform(), r.arch.f_rf());
    let mut a = Artifacts::default();
    a.add("beams.csv", t.render(&r.provenance));
    a.add(
        "beams.json",
        doc(
            &json!({ "beams": map, "bandwidth": bandwidth, "required_bandwidths": required }),
            &r.provenance,
        )?,
    );
    for e in &map.entries {
        let angle = e.theta_deg.map_or("invisible".to_string(), |t| format!("{t:.3} deg"));
        a.summary.push(format!("m={}: {angle}", e.m));
    }
    a.summary.push(format!(
        "bandwidth rule f_hm > f_bw + f_tr: {} (margin {} Hz)",
        if bandwidth.pass { "pass" } else { "FAIL" },
        fmt_f64(bandwidth.margin_hz)
    ));
    with_run_config(r, a)
}

fn empirical_table(r: &Resolved, emp: &EmpiricalGains) -> Table {
    let mut t = Table::new(&["m", "f_m_hz", "g_sig_db", "g_noise_db", "ag_db"]);
    let used = r.used_harmonics();
    for e in emp.entries.iter().filter(|e| used.contains(&e.m)) {
        t.push(vec![
            e.m.to_string(),
            fmt_f64(r.arch.f_rf() + e.m as f64 * r.arch.f_hm()),
            fmt_f64(to_db(e.g_sig)),
            fmt_f64(to_db(e.g_noise)),
            fmt_opt(e.ag.map(to_db)),
        ]);
    }
    t
}

fn empirical(r: &Resolved, a: &mut Artifacts, params: &crate::sim::SimParams) -> Result<(), CliError> {
    let trials = r.config.simulation.trials;
    if trials == 0 {
        return Ok(());
    }
    let emp = measure_gains(&r.arch, &r.config.controls, params, trials)?;
    a.add("gains_empirical.csv", empirical_table(r, &emp).render(&r.provenance));
    a.summary.push(format!("Monte-Carlo gains over {trials} noise trials written"));
    Ok(())
}

fn coherent_params(r: &Resolved) -> Result<(crate::sim::SimParams, crate::sim::SnapReport), CliError> {
    let raw = r.config.simulation.params(r.waveform());
    Ok(raw.snap_to_coherent(r.arch.f_hm())?)
}

pub fn gains(r: &Resolved) -> Result<Artifacts, CliError> {
    let used = r.used_harmonics();
    let report = gain_report_with_loss(
        &r.arch,
        &r.config.controls,
        &used,
        r.config.analysis.combining_loss_db,
    )?;
    let mut t = Table::new(&["m", "f_m_hz", "g_sig_db", "g_noise_db", "ag_db"]);
    for e in &report.entries {
        t.push(vec![
            e.m.to_string(),
            fmt_f64(e.f_m_hz),
            fmt_f64(to_db(e.g_sig)),
            fmt_f64(to_db(e.g_noise)),
            fmt_opt(e.ag.map(to_db)),
        ]);
    }
    let mut a = Artifacts::default();
    a.add("gains.csv", t.render(&r.provenance));
    a.add("gains.json", doc(&report, &r.provenance)?);
    a.summary.push(format!(
        "array gain {} dB per occupied harmonic; harmonic loss {}",
        fmt_f64(to_db(r.arch.n_channels() as f64)),
        fmt_f64(report.harmonic_loss)
    ));
    if r.config.simulation.trials > 0 {
        let (params, _) = coherent_params(r)?;
        empirical(r, &mut a, &params)?;
    }
    with_run_config(r, a)
}

pub fn steer(r: &Resolved) -> Result<Artifacts, CliError> {
    let problem = &r.config.steering;
    if problem.targets.is_empty() {
        return Err(CliError::Config("steering.targets is empty; pass --targets m:theta,...".into()));
    }
    let sol = solve_steering(&r.arch, problem)?;
    let check = verify_steering(&r.arch, &sol, problem, DEFAULT_VERIFY_TOL_DEG)?;
    let out = json!({
        "targets": problem.targets,
        "solution": sol.controls,
        "residual_rad": sol.residual_rad,
        "rank": sol.rank,
        "verification": check,
    });
    let mut a = Artifacts::default();
    a.add("steering.json", doc(&out, &r.provenance)?);
    a.summary.push(format!(
        "d_tau = {} s, d_phi_rf = {} rad, d_phi_lo = {} rad (residual {} rad)",
        fmt_f64(sol.controls.d_tau_s),
        fmt_f64(sol.controls.d_phi_rf_rad),
        fmt_f64(sol.controls.d_phi_lo_rad),
        fmt_f64(sol.residual_rad)
    ));
    a.summary.push(format!(
        "forward check: max peak error {:.4} deg, {}",
        check.max_error_deg,
        if check.pass { "pass" } else { "FAIL" }
    ));
    with_run_config(r, a)
}

pub fn simulate(r: &Resolved) -> Result<Artifacts, CliError> {
    let (params, snap) = coherent_params(r)?;
    let result = simulate_rx(&r.arch, &r.config.controls, &params)?;
    let mut t = Table::new(&["m", "f_offset_hz", "re", "im", "signal_power", "noise_power"]);
    for b in &result.bins {
        t.push(vec![
            b.m.to_string(),
            fmt_f64(b.f_offset_hz),
            fmt_f64(b.amplitude.re),
            fmt_f64(b.amplitude.im),
            fmt_f64(b.signal_power),
            fmt_f64(b.noise_power),
        ]);
    }
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut a = Artifacts::default();
    a.add("spectrum.csv", t.render(&r.provenance));
    a.add(
        "run_meta.json",
        doc(
            &json!({
                "params": params,
                "seed": params.seed,
                "snap": snap,
                "record_len": result.record_len,
                "bin_spacing_hz": result.bin_spacing_hz,
                "timestamp_unix_s": timestamp,
            }),
            &r.provenance,
        )?,
    );
    for c in &snap.changes {
        a.summary.push(format!("snapped {} from {} to {}", c.field, fmt_f64(c.from), fmt_f64(c.to)));
    }
    a.summary.push(format!(
        "simulated {} samples, {} harmonics",
        result.record_len,
        result.bins.len()
    ));
    empirical(r, &mut a, &params)?;
    with_run_config(r, a)
}

pub fn compare(r: &Resolved) -> Result<Artifacts, CliError> {
    let c = &r.config.compare;
    let ks: Vec<usize> = (c.k_min..=c.k_max).collect();
    let cmp = compare_waveforms(r.arch.n_channels(), &ks, c.power)?;
    let mut summary = Table::new(&["K", "g_square_db", "g_comb_db"]);
    let mut curves = Table::new(&["K", "m", "g_square_db", "g_comb_db"]);
    for row in &cmp.rows {
        summary.push(vec![
            row.k.to_string(),
            fmt_f64(to_db(row.g_square_m0)),
            fmt_f64(to_db(row.g_comb_m0)),
        ]);
        for ((m, gs), (_, gc)) in row.square_curve.iter().zip(&row.comb_curve) {
            curves.push(vec![
                row.k.to_string(),
                m.to_string(),
                fmt_f64(to_db(*gs)),
                fmt_f64(to_db(*gc)),
            ]);
        }
    }
    let mut a = Artifacts::default();
    a.add("compare.csv", summary.render(&r.provenance));
    a.add("compare_curves.csv", curves.render(&r.provenance));
    a.summary.push(format!(
        "N={}: square vs comb m=0 gain for K in {}..{}",
        cmp.n_channels, c.k_min, c.k_max
    ));
    with_run_config(r, a)
}
