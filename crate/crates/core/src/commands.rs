//! Experiment commands and their text outputs.
//!
//! Every CSV starts with `# key: value` header lines (units, scenario hash,
//! seed, ...). Outputs contain no timestamps, so the same scenario and seed
//! give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::beamline::DriveEnvelope;
use crate::control::{run_closed_loop, ClosedLoopRun, Plant};
use crate::detection::{fig2_scan, Fig2Point};
use crate::error::Error;
use crate::scenario::{parse_scenario, Scenario, Topology};
use crate::spectra::{before_after_spectra, BeforeAfter, Spectrum};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Scenario { path: PathBuf, source: crate::ConfigError },
    #[error(transparent)]
    Sim(#[from] Error),
}

impl CommandError {
    /// Configuration problems (bad or unreadable scenario) versus everything else.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            CommandError::Read { .. } | CommandError::Scenario { .. } | CommandError::Sim(Error::Config(_))
        )
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CommandError> {
    let text = fs::read_to_string(path).map_err(|source| CommandError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text).map_err(|source| CommandError::Scenario {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CommandError> {
    fs::write(path, contents).map_err(|source| CommandError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// `dir/stem.ext` -> `dir/stem<suffix>`.
pub fn sibling_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn seed_of(scenario: &Scenario) -> String {
    scenario.noise.map_or_else(|| "none".to_string(), |n| n.seed.to_string())
}

fn topology_name(t: Topology) -> &'static str {
    match t {
        Topology::Fig1 => "fig1",
        Topology::Fig3 => "fig3",
    }
}

fn header(out: &mut String, command: &str, scenario: &Scenario) {
    let _ = writeln!(out, "# command: {command}");
    let _ = writeln!(out, "# scenario_hash: {}", scenario.hash());
    let _ = writeln!(out, "# topology: {}", topology_name(scenario.topology));
    let _ = writeln!(out, "# seed: {}", seed_of(scenario));
}

/// Occultation curve on beam 2 with the actuator at zero.
pub fn fig2_points(scenario: &Scenario) -> Result<Vec<Fig2Point>, Error> {
    let plant = Plant::from_scenario(scenario)?;
    let (_, beam2) = plant.beams(DriveEnvelope::UNIT)?;
    fig2_scan(&beam2, scenario.pd2.rho, &scenario.fig2.grid())
}

pub fn fig2_csv(scenario: &Scenario) -> Result<String, Error> {
    let points = fig2_points(scenario)?;
    let mut s = String::new();
    header(&mut s, "fig2", scenario);
    let _ = writeln!(s, "# X_over_w0: screen edge position / waist (dimensionless)");
    let _ = writeln!(s, "# normalized_ifm: |i(f_m)| / (rho P0) (dimensionless)");
    let _ = writeln!(s, "# w0_m: {}", scenario.telescope.output_w0);
    s.push_str("X_over_w0,normalized_ifm\n");
    for p in points {
        let _ = writeln!(s, "{},{}", p.x_over_w0, p.normalized_ifm);
    }
    Ok(s)
}

pub fn cmd_fig2(scenario: &Scenario, out: &Path) -> Result<(), CommandError> {
    write_file(out, &fig2_csv(scenario)?)
}

fn fmt_db(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |d| format!("{d:.3}"))
}

pub fn rejection_report_text(scenario: &Scenario, run: &ClosedLoopRun) -> String {
    let r = &run.report;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}: {v}");
    };
    kv("scenario_hash", scenario.hash());
    kv("topology", topology_name(scenario.topology).into());
    kv("seed", seed_of(scenario));
    kv("steps", r.steps.to_string());
    kv("gain_per_s", scenario.controller.gain.to_string());
    kv("dt_s", scenario.controller.dt.to_string());
    kv("reference_phase_rad", format!("{:.9}", r.reference_phase));
    kv("q_sign", format!("{}", r.q_sign));
    kv("beam1_rejection_db", fmt_db(r.beam1_rejection_db));
    kv("beam2_rejection_db", fmt_db(r.beam2_rejection_db));
    kv("converged", r.converged.to_string());
    kv(
        "settle_time_s",
        r.settle_time_s.map_or_else(|| "none".to_string(), |t| format!("{t:.6}")),
    );
    kv("initial_relative_am", format!("{:.6e}", r.initial_relative_am));
    kv("residual_relative_am", format!("{:.6e}", r.residual_relative_am));
    kv("initial_am_zero", r.initial_am_zero.to_string());
    kv("actuator_clamped", r.clamped.to_string());
    kv("final_m_i", format!("{:.9e}", r.final_m_i));
    kv("final_m_q", format!("{:.9e}", r.final_m_q));
    s
}

pub fn trajectory_csv(scenario: &Scenario, run: &ClosedLoopRun) -> String {
    let mut s = String::new();
    header(&mut s, "rejection", scenario);
    let _ = writeln!(s, "# time_s: s; m_i, m_q: drive depth (dimensionless)");
    let _ = writeln!(s, "# beam1_c1_abs, beam2_c1_abs: |c_1| photocurrent amplitude (A)");
    let _ = writeln!(s, "# beam2_relative_am: 2 |c_1| / c_0 (dimensionless)");
    s.push_str("step,time_s,m_i,m_q,beam1_c1_abs,beam2_c1_abs,beam2_relative_am\n");
    for p in &run.trajectory {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            p.step, p.time_s, p.m_i, p.m_q, p.beam1_c1, p.beam2_c1, p.beam2_relative_am
        );
    }
    s
}

/// Runs the loop; returns (report text, trajectory CSV, run).
pub fn rejection_outputs(scenario: &Scenario) -> Result<(String, String, ClosedLoopRun), Error> {
    let run = run_closed_loop(scenario, scenario.controller.steps)?;
    Ok((rejection_report_text(scenario, &run), trajectory_csv(scenario, &run), run))
}

/// Writes the trajectory to `out` and the report next to it; returns the report.
pub fn cmd_rejection(scenario: &Scenario, out: &Path) -> Result<String, CommandError> {
    let (report, csv, _) = rejection_outputs(scenario)?;
    write_file(out, &csv)?;
    write_file(&sibling_path(out, "_report.txt"), &report)?;
    Ok(report)
}

pub fn spectrum_csv(scenario: &Scenario, spectrum: &Spectrum, state: &str, drive: DriveEnvelope) -> String {
    let mut s = String::new();
    header(&mut s, "spectrum", scenario);
    let sp = &scenario.spectrum;
    let _ = writeln!(s, "# state: {state}");
    let _ = writeln!(s, "# detector: pd2");
    let _ = writeln!(s, "# m_i: {:e}", drive.m_i);
    let _ = writeln!(s, "# m_q: {:e}", drive.m_q);
    let _ = writeln!(s, "# rbw_requested_hz: {}", sp.rbw);
    let _ = writeln!(s, "# rbw_hz: {:.6}", spectrum.rbw_hz);
    let _ = writeln!(s, "# bin_hz: {:.6}", spectrum.bin_hz);
    let _ = writeln!(s, "# window: {}", spectrum.window.name());
    let _ = writeln!(s, "# segments: {}", spectrum.segments);
    let _ = writeln!(s, "# segment_len: {}", spectrum.segment_len);
    let _ = writeln!(s, "# f_s_hz: {}", sp.f_s);
    let _ = writeln!(s, "# duration_s: {}", sp.duration);
    let _ = writeln!(s, "# reference_c0_a: {:e}", spectrum.reference);
    let _ = writeln!(s, "# freq_hz: Hz; dbc: dB relative to a sinusoid of amplitude c0 (per RBW)");
    s.push_str("freq_hz,dbc\n");
    for (f, d) in spectrum.freqs.iter().zip(&spectrum.dbc) {
        let _ = writeln!(s, "{f:.6},{d:.6}");
    }
    s
}

/// Returns (before CSV, after CSV, spectra).
pub fn spectrum_outputs(scenario: &Scenario) -> Result<(String, String, BeforeAfter), Error> {
    let ba = before_after_spectra(scenario, scenario.spectrum.duration)?;
    let before = spectrum_csv(scenario, &ba.before, "before", DriveEnvelope::UNIT);
    let after = spectrum_csv(scenario, &ba.after, "after", ba.run.final_state.drive());
    Ok((before, after, ba))
}

/// Writes `<stem>_before.csv` and `<stem>_after.csv` next to `out`; returns their paths.
pub fn cmd_spectrum(scenario: &Scenario, out: &Path) -> Result<(PathBuf, PathBuf), CommandError> {
    let (before, after, _) = spectrum_outputs(scenario)?;
    let (pb, pa) = (sibling_path(out, "_before.csv"), sibling_path(out, "_after.csv"));
    write_file(&pb, &before)?;
    write_file(&pa, &after)?;
    Ok((pb, pa))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling_path(Path::new("out/run.csv"), "_report.txt"), PathBuf::from("out/run_report.txt"));
        assert_eq!(sibling_path(Path::new("run"), "_before.csv"), PathBuf::from("run_before.csv"));
    }
}
