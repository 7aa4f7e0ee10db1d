//! Subcommand implementations: load config, run the library, write outputs.
//!
//! Each command writes its primary CSV to the `--out` path and a JSON
//! summary alongside it at `<out stem>.summary.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use slipsim::simulator::measure_ultimate_bound;
use slipsim::stability::stability_scan;
use slipsim::tuning::{cost_f, grid_search};
use slipsim::{fmt_float, ControllerGains, ControllerMode, TrajectoryLog};

use crate::config::{
    self, check_schema, CompareDoc, SimulateDoc, StabilityDoc, TuneDoc, SCHEMA_VERSION,
};
use crate::{from_core, CliError};

fn create_out(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("cannot write {}: {e}", path.display()))
}

fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn write_summary<T: Serialize>(out: &Path, summary: &T) -> Result<(), CliError> {
    let path = summary_path(out);
    let mut json = serde_json::to_string_pretty(summary)
        .map_err(|e| CliError::Io(format!("cannot encode summary: {e}")))?;
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| io_err(&path)(e))
}

#[derive(Serialize)]
struct SimulateSummary {
    schema_version: u32,
    mode: ControllerMode,
    duration: f64,
    step: f64,
    rows: usize,
    floor_events: usize,
    final_error: [f64; 3],
    final_error_norm: f64,
    final_estimates: [f64; 2],
    tracking_cost: f64,
    transient: f64,
    ultimate_bound: f64,
    t_settle: f64,
}

pub fn simulate(config_path: &Path, out: &Path, step: Option<f64>) -> Result<(), CliError> {
    let doc: SimulateDoc = config::load(config_path)?;
    check_schema(doc.schema_version)?;
    let base = config::base_dir(config_path);
    let mut sim = doc.to_sim_config(&base)?;
    if let Some(h) = step {
        sim.step = h;
    }
    let log = slipsim::simulator::simulate(&sim).map_err(from_core)?;

    let mut w = create_out(out)?;
    log.write_csv(&mut w).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))?;

    let duration = log.duration();
    let transient = doc.transient.unwrap_or((sim.t_final - 10.0).max(0.0));
    if !(transient >= 0.0 && transient < duration) {
        return Err(CliError::Config(format!(
            "transient = {transient} must lie in [0, {duration})"
        )));
    }
    let bound = measure_ultimate_bound(&log, transient).map_err(from_core)?;
    let last = log.rows.last().expect("a finished run always has rows");
    let summary = SimulateSummary {
        schema_version: SCHEMA_VERSION,
        mode: log.mode,
        duration,
        step: log.step,
        rows: log.rows.len(),
        floor_events: log.floor_events,
        final_error: [last.error.e1, last.error.e2, last.error.e3],
        final_error_norm: last.error.norm(),
        final_estimates: [last.a_l_hat, last.a_r_hat],
        tracking_cost: cost_f(&log, &doc.q_weight, &doc.r_weight),
        transient,
        ultimate_bound: bound.u_b,
        t_settle: bound.t_settle,
    };
    write_summary(out, &summary)
}

#[derive(Serialize)]
struct TuneSummary {
    schema_version: u32,
    mode: ControllerMode,
    candidates: usize,
    failures: usize,
    best: ControllerGains,
    best_cost: f64,
}

pub fn tune(config_path: &Path, out: &Path, step: Option<f64>) -> Result<(), CliError> {
    let doc: TuneDoc = config::load(config_path)?;
    check_schema(doc.schema_version)?;
    let base = config::base_dir(config_path);
    let mut spec = doc.to_spec(&base)?;
    if let Some(h) = step {
        spec.scenario.step = h;
    }
    // Validate up front so setup mistakes exit as config errors; whatever
    // grid_search reports afterwards is a numerical failure of the sweep.
    spec.validate().map_err(from_core)?;
    let result = grid_search(&spec).map_err(|e| CliError::Numeric(e.to_string()))?;

    let mut w = create_out(out)?;
    result.write_csv(&mut w).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))?;

    let summary = TuneSummary {
        schema_version: SCHEMA_VERSION,
        mode: spec.mode,
        candidates: result.entries.len(),
        failures: result.failures,
        best: result.best,
        best_cost: result.best_cost,
    };
    write_summary(out, &summary)
}

#[derive(Serialize)]
struct StabilitySummary {
    schema_version: u32,
    samples: usize,
    stable: usize,
    marginal: usize,
    unstable: usize,
    zero_v_ref_samples: usize,
    margin: f64,
    /// Largest entrywise rate of the linearization over the scan; the
    /// frozen-time verdicts only extend to the time-varying system while
    /// this stays small.
    max_linearization_rate: f64,
    worst_eigenvalue_real_part: f64,
    min_condition: f64,
}

pub fn stability(
    config_path: &Path,
    out: &Path,
    margin: Option<f64>,
    step: Option<f64>,
) -> Result<(), CliError> {
    let doc: StabilityDoc = config::load(config_path)?;
    check_schema(doc.schema_version)?;
    let base = config::base_dir(config_path);
    let profile = doc.slip.to_profile(&base)?;
    let margin = margin.unwrap_or(doc.margin);
    let sample_dt = step.unwrap_or(doc.sample_dt);

    let scan = stability_scan(
        doc.t_start,
        doc.t_end,
        sample_dt,
        &profile,
        &doc.gains,
        &doc.geometry,
        margin,
    )
    .map_err(from_core)?;

    let mut w = create_out(out)?;
    scan.write_csv(&mut w).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))?;

    let [stable, marginal, unstable] = scan.verdict_counts();
    let flagged = scan.samples.iter().filter(|s| s.zero_v_ref).count();
    let worst_re = scan
        .samples
        .iter()
        .map(|s| s.max_re)
        .fold(f64::NEG_INFINITY, f64::max);
    // The five certificate conditions per sample, tightest one overall.
    let min_condition = scan
        .samples
        .iter()
        .map(|s| {
            let a = &s.quintic.alphas;
            [a[0], a[2], a[4], s.c2, s.c3]
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min);

    let summary = StabilitySummary {
        schema_version: SCHEMA_VERSION,
        samples: scan.samples.len(),
        stable,
        marginal,
        unstable,
        zero_v_ref_samples: flagged,
        margin,
        max_linearization_rate: scan.max_adot(),
        worst_eigenvalue_real_part: worst_re,
        min_condition,
    };
    write_summary(out, &summary)
}

pub fn reference(out: &Path, t_final: f64, step: f64) -> Result<(), CliError> {
    let traj = slipsim::reference::generate_reference(t_final, step).map_err(from_core)?;
    let mut w = create_out(out)?;
    traj.write_csv(&mut w).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))
}

#[derive(Serialize)]
struct SideSummary {
    rms_position_error: f64,
    final_error_norm: f64,
    floor_events: usize,
    tracking_cost: f64,
    ultimate_bound: f64,
    t_settle: f64,
}

#[derive(Serialize)]
struct CompareSummary {
    schema_version: u32,
    rms_start: f64,
    transient: f64,
    akc: SideSummary,
    nkc: SideSummary,
    /// NKC RMS position error divided by AKC's; absent when AKC's is zero.
    rms_ratio: Option<f64>,
}

fn rms_position_error(log: &TrajectoryLog, from: f64) -> Result<f64, CliError> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for row in log.rows.iter().filter(|r| r.t >= from) {
        sum += row.error.e1 * row.error.e1 + row.error.e2 * row.error.e2;
        n += 1;
    }
    if n == 0 {
        return Err(CliError::Config(format!(
            "rms_start = {from} leaves no samples in a run of duration {}",
            log.duration()
        )));
    }
    Ok((sum / n as f64).sqrt())
}

fn side_summary(log: &TrajectoryLog, doc: &CompareDoc, transient: f64) -> Result<SideSummary, CliError> {
    let bound = measure_ultimate_bound(log, transient).map_err(from_core)?;
    let last = log.rows.last().expect("a finished run always has rows");
    Ok(SideSummary {
        rms_position_error: rms_position_error(log, doc.rms_start)?,
        final_error_norm: last.error.norm(),
        floor_events: log.floor_events,
        tracking_cost: cost_f(log, &doc.q_weight, &doc.r_weight),
        ultimate_bound: bound.u_b,
        t_settle: bound.t_settle,
    })
}

pub fn compare(config_path: &Path, out: &Path, step: Option<f64>) -> Result<(), CliError> {
    let doc: CompareDoc = config::load(config_path)?;
    check_schema(doc.schema_version)?;
    let base = config::base_dir(config_path);
    let mut akc_cfg = doc.to_sim_config(&base, ControllerMode::Akc, doc.akc_gains)?;
    let mut nkc_cfg = doc.to_sim_config(&base, ControllerMode::Nkc, doc.nkc_gains)?;
    if let Some(h) = step {
        akc_cfg.step = h;
        nkc_cfg.step = h;
    }

    let akc = slipsim::simulator::simulate(&akc_cfg).map_err(from_core)?;
    let nkc = slipsim::simulator::simulate(&nkc_cfg).map_err(from_core)?;
    // Identical t_final, step, and slip profile give identical timelines.
    assert_eq!(akc.rows.len(), nkc.rows.len());

    let mut w = create_out(out)?;
    writeln!(
        w,
        "t,akc_e1,akc_e2,akc_e3,akc_pos_err,nkc_e1,nkc_e2,nkc_e3,nkc_pos_err"
    )
    .map_err(io_err(out))?;
    for (a, b) in akc.rows.iter().zip(nkc.rows.iter()) {
        let a_pos = (a.error.e1 * a.error.e1 + a.error.e2 * a.error.e2).sqrt();
        let b_pos = (b.error.e1 * b.error.e1 + b.error.e2 * b.error.e2).sqrt();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt_float(a.t),
            fmt_float(a.error.e1),
            fmt_float(a.error.e2),
            fmt_float(a.error.e3),
            fmt_float(a_pos),
            fmt_float(b.error.e1),
            fmt_float(b.error.e2),
            fmt_float(b.error.e3),
            fmt_float(b_pos),
        )
        .map_err(io_err(out))?;
    }
    w.flush().map_err(io_err(out))?;

    let duration = akc.duration();
    let transient = doc.transient.unwrap_or((doc.t_final - 10.0).max(0.0));
    if !(transient >= 0.0 && transient < duration) {
        return Err(CliError::Config(format!(
            "transient = {transient} must lie in [0, {duration})"
        )));
    }
    let akc_side = side_summary(&akc, &doc, transient)?;
    let nkc_side = side_summary(&nkc, &doc, transient)?;
    let rms_ratio = (akc_side.rms_position_error > 0.0)
        .then(|| nkc_side.rms_position_error / akc_side.rms_position_error);

    let summary = CompareSummary {
        schema_version: SCHEMA_VERSION,
        rms_start: doc.rms_start,
        transient,
        akc: akc_side,
        nkc: nkc_side,
        rms_ratio,
    };
    write_summary(out, &summary)
}
