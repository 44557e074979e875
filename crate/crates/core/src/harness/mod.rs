//! Experiment configuration, presets, CSV/manifest persistence and the
//! reports behind the command-line interface.

mod config;
mod verify;

pub use config::{
    preset, ChannelKind, ExperimentConfig, InitialState, Setup, Sweep, SweepParam, Unraveling, OUTPUT_DIR_ENV, PRESETS,
};
pub use verify::{verify_codes, CheckLine, VerifyOptions, VerifyReport};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::analysis::{classify_regime, Classification, InitialCoeffs};
use crate::channels::Structure;
use crate::error::{QecError, Result};
use crate::trajectories::{ensemble_run, EnsembleResult, TrajectoryRecord};

/// One finished run of an experiment.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub sweep_value: Option<f64>,
    pub csv: PathBuf,
    pub events_csv: Option<PathBuf>,
    pub result: EnsembleResult,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub manifest: PathBuf,
    pub runs: Vec<RunOutput>,
}

#[derive(Serialize)]
struct ManifestRun<'a> {
    sweep_value: Option<f64>,
    csv: String,
    events_csv: Option<String>,
    time_averaged_negativity: f64,
    time_averaged_stderr: f64,
    final_mean_negativity: f64,
    flagged_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep_parameter: Option<&'a str>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    seed: u64,
    code_version: &'a str,
    started_unix_s: u64,
    wall_clock_s: f64,
    config: &'a ExperimentConfig,
    runs: Vec<ManifestRun<'a>>,
}

/// Run every sweep value of `config`, write one CSV per value (plus an events
/// CSV for single-trajectory runs) and a JSON manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let dir = config.output_dir();
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;

    let mut runs = Vec::new();
    for (value, cfg) in config.expand() {
        let stem = match (&config.sweep, value) {
            (Some(s), Some(v)) => format!("{}_{}={}", config.experiment, s.parameter.name(), v),
            _ => config.experiment.clone(),
        };
        log::info!("running {stem} ({} trajectories)", cfg.n_traj);
        let result = ensemble_run(&cfg, cfg.n_traj)?;
        let csv = dir.join(format!("{stem}.csv"));
        write_file(&csv, &ensemble_csv(&result))?;
        let events_csv = match &result.single {
            Some(rec) if !rec.events.is_empty() => {
                let p = dir.join(format!("{stem}_events.csv"));
                write_file(&p, &events_csv(rec))?;
                Some(p)
            }
            _ => None,
        };
        runs.push(RunOutput { sweep_value: value, csv, events_csv, result });
    }

    let name = |p: &Path| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let manifest = Manifest {
        experiment: &config.experiment,
        seed: config.seed,
        code_version: env!("CARGO_PKG_VERSION"),
        started_unix_s,
        wall_clock_s: started.elapsed().as_secs_f64(),
        config,
        runs: runs
            .iter()
            .map(|r| ManifestRun {
                sweep_value: r.sweep_value,
                csv: name(&r.csv),
                events_csv: r.events_csv.as_deref().map(name),
                time_averaged_negativity: r.result.time_averaged_negativity(),
                time_averaged_stderr: r.result.time_averaged_stderr(),
                final_mean_negativity: r.result.mean_negativity.last().copied().unwrap_or(f64::NAN),
                flagged_steps: r.result.summaries.iter().map(|s| s.flagged_steps).sum(),
                sweep_parameter: config.sweep.as_ref().map(|s| s.parameter.name()),
            })
            .collect(),
    };
    let manifest_path = dir.join(format!("{}_manifest.json", config.experiment));
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| QecError::Numerical(e.to_string()))?;
    write_file(&manifest_path, &(text + "\n"))?;
    Ok(ExperimentOutput { manifest: manifest_path, runs })
}

fn io_error(path: &Path, e: std::io::Error) -> QecError {
    QecError::Config(format!("cannot write {}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// `t,mean_negativity,stderr,n_traj`, plus `neg_eig_1..k` for a single
/// trajectory.
pub fn ensemble_csv(result: &EnsembleResult) -> String {
    let eig_cols = result
        .single
        .as_ref()
        .map_or(0, |r| r.samples.iter().map(|s| s.pt_negative_spectrum.len()).max().unwrap_or(0));
    let mut out = String::from("t,mean_negativity,stderr,n_traj");
    for k in 1..=eig_cols {
        let _ = write!(out, ",neg_eig_{k}");
    }
    out.push('\n');
    for (j, t) in result.times.iter().enumerate() {
        let _ = write!(out, "{t},{},{},{}", result.mean_negativity[j], result.stderr[j], result.n_traj);
        if let Some(rec) = &result.single {
            let spec = &rec.samples[j].pt_negative_spectrum;
            for k in 0..eig_cols {
                out.push(',');
                if let Some(v) = spec.get(k) {
                    let _ = write!(out, "{v}");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// `event_time,site,kind,channel,delta,negativity_before,negativity_after`.
pub fn events_csv(rec: &TrajectoryRecord) -> String {
    let mut out = String::from("event_time,site,kind,channel,delta,negativity_before,negativity_after\n");
    for e in &rec.events {
        let kind = match e.kind {
            crate::trajectories::EventKind::Jump => "jump",
            crate::trajectories::EventKind::FeedbackApplied => "feedback_applied",
        };
        let _ = writeln!(
            out,
            "{},{},{kind},{},{},{},{}",
            e.time, e.site, e.channel, e.delta, e.negativity_before, e.negativity_after
        );
    }
    out
}

/// One row of [`classify_map`].
#[derive(Clone, Debug, Serialize)]
pub struct ClassifyRow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub classification: Classification,
    /// `grid` or `reference` (the classic `(0.179, 0.2386, 0.9545)` and its
    /// permutations).
    pub source: &'static str,
}

/// Reference amplitudes used in the classic E/V/Λ examples.
pub const REFERENCE_TRIPLE: (f64, f64, f64) = (0.179, 0.2386, 0.9545);

/// Points `a = sinθ cosφ, b = sinθ sinφ, c = cosθ` with `θ, φ` on a midpoint
/// grid of `resolution` values in `(0, π/2)`.
pub fn coefficient_grid(resolution: usize) -> Vec<InitialCoeffs> {
    let mut out = Vec::with_capacity(resolution * resolution);
    let step = std::f64::consts::FRAC_PI_2 / resolution as f64;
    for i in 0..resolution {
        let theta = (i as f64 + 0.5) * step;
        for j in 0..resolution {
            let phi = (j as f64 + 0.5) * step;
            let (a, b, c) = (theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            out.push(InitialCoeffs::normalized(a, b, c).expect("grid points are nonzero"));
        }
    }
    out
}

/// The reference triple in all six orderings.
pub fn reference_permutations() -> Vec<InitialCoeffs> {
    let (x, y, z) = REFERENCE_TRIPLE;
    [(x, y, z), (x, z, y), (y, x, z), (y, z, x), (z, x, y), (z, y, x)]
        .iter()
        .map(|&(a, b, c)| InitialCoeffs::normalized(a, b, c).expect("nonzero"))
        .collect()
}

/// Regime of every grid point, followed by the reference permutations.
pub fn classify_map(structure: Structure, resolution: usize) -> Result<Vec<ClassifyRow>> {
    if resolution < 5 {
        return Err(QecError::Config(format!("resolution must be at least 5, got {resolution}")));
    }
    let row = |co: InitialCoeffs, source| ClassifyRow {
        a: co.a(),
        b: co.b(),
        c: co.c(),
        classification: classify_regime(structure, &co),
        source,
    };
    let mut rows: Vec<ClassifyRow> = coefficient_grid(resolution).into_iter().map(|co| row(co, "grid")).collect();
    rows.extend(reference_permutations().into_iter().map(|co| row(co, "reference")));
    Ok(rows)
}

/// `a,b,c,sudden_changes,terminal,source`; boundary points have an empty
/// change count and terminal `boundary`.
pub fn classify_csv(rows: &[ClassifyRow]) -> String {
    let mut out = String::from("a,b,c,sudden_changes,terminal,source\n");
    for r in rows {
        let (n, term) = match &r.classification {
            Classification::Regime(l) => (l.sudden_changes.to_string(), l.terminal.name()),
            Classification::Boundary(_) => (String::new(), "boundary"),
        };
        let _ = writeln!(out, "{},{},{},{n},{term},{}", r.a, r.b, r.c, r.source);
    }
    out
}

pub fn write_classify_map(structure: Structure, resolution: usize, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    write_file(path, &classify_csv(&classify_map(structure, resolution)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{RegimeLabel, Terminal};

    #[test]
    fn single_run_writes_csv_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            experiment: "tiny".into(),
            t_max: 0.2,
            n_traj: 3,
            output_path: Some(dir.path().to_path_buf()),
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&cfg).unwrap();
        let text = fs::read_to_string(&out.runs[0].csv).unwrap();
        assert!(text.starts_with("t,mean_negativity,stderr,n_traj\n"));
        assert_eq!(text.lines().count(), 1 + cfg.sim_params().sample_steps().len());
        assert!(!text.contains('\r'));
        let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.manifest).unwrap()).unwrap();
        assert_eq!(manifest["seed"], 0);
        assert_eq!(manifest["runs"][0]["csv"], "tiny.csv");
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            experiment: "rep".into(),
            t_max: 0.5,
            n_traj: 4,
            eta: 0.9,
            tau: 0.1,
            output_path: Some(dir.path().to_path_buf()),
            sweep: Some(Sweep { parameter: SweepParam::DeltaVar, values: vec![0.0, 0.1] }),
            ..ExperimentConfig::default()
        };
        let a = run_experiment(&cfg).unwrap();
        let first: Vec<String> = a.runs.iter().map(|r| fs::read_to_string(&r.csv).unwrap()).collect();
        let b = run_experiment(&cfg).unwrap();
        let second: Vec<String> = b.runs.iter().map(|r| fs::read_to_string(&r.csv).unwrap()).collect();
        assert_eq!(first, second);
        assert!(a.runs[1].csv.ends_with("rep_delta_var=0.1.csv"));
    }

    #[test]
    fn single_trajectory_exports_events_and_spectrum() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            experiment: "one".into(),
            t_max: 3.0,
            n_traj: 1,
            seed: 1,
            output_path: Some(dir.path().to_path_buf()),
            ..ExperimentConfig::default()
        };
        let out = run_experiment(&cfg).unwrap();
        let text = fs::read_to_string(&out.runs[0].csv).unwrap();
        assert!(text.lines().next().unwrap().contains("neg_eig_1"));
        let ev = fs::read_to_string(out.runs[0].events_csv.as_ref().unwrap()).unwrap();
        assert!(ev.lines().nth(1).unwrap().contains("jump"));
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let cfg = ExperimentConfig {
            t_max: 0.01,
            n_traj: 1,
            output_path: Some(file.path().join("sub")),
            ..ExperimentConfig::default()
        };
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn classify_map_rows() {
        let rows = classify_map(Structure::Cascade, 5).unwrap();
        assert_eq!(rows.len(), 25 + 6);
        let reference = rows.iter().find(|r| r.source == "reference").unwrap();
        assert_eq!(
            reference.classification,
            Classification::Regime(RegimeLabel { sudden_changes: 2, terminal: Terminal::SuddenDeath })
        );
        let csv = classify_csv(&rows);
        assert!(csv.lines().any(|l| l.ends_with("2,sudden_death,reference")));
        assert!(classify_map(Structure::Vee, 4).is_err());
    }
}
