use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qutrit_feedback::channels::Structure;
use qutrit_feedback::harness::{
    preset, run_experiment, verify_codes, write_classify_map, ExperimentConfig, SweepParam, VerifyOptions,
    OUTPUT_DIR_ENV,
};
use qutrit_feedback::{QecError, Result};

#[derive(Parser)]
#[command(version, about = "Entanglement protection of qutrit pairs by local feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a TOML-configured experiment and write CSVs plus a manifest.
    Run(RunArgs),
    /// Classify the sudden-change regime over a grid of initial states.
    ClassifyMap {
        /// E, V or Lambda.
        #[arg(long, default_value = "E")]
        structure: Structure,
        #[arg(long, default_value_t = 15)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the algebraic conditions of both codes.
    VerifyCodes {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Check a distinguishable-channel structure (E, V or Lambda) instead.
        #[arg(long)]
        structure: Option<Structure>,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Preset name (see `--list`), or `custom`.
    #[arg(long, conflicts_with = "config")]
    experiment: Option<String>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// List presets and exit.
    #[arg(long)]
    list: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_traj: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta_var: Option<f64>,
    /// Output directory; defaults to $QUTRIT_FEEDBACK_OUT, then ./results.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.experiment) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => return Err(QecError::Config("pass --experiment or --config".into())),
        };
        let overrides = [
            (SweepParam::Tau, self.tau),
            (SweepParam::Eta, self.eta),
            (SweepParam::Alpha, self.alpha),
            (SweepParam::Beta, self.beta),
            (SweepParam::DeltaVar, self.delta_var),
        ];
        for (p, v) in overrides {
            if let Some(v) = v {
                cfg = cfg.with_param(p, v);
                // a fixed value replaces a sweep over the same parameter
                if cfg.sweep.as_ref().is_some_and(|s| s.parameter == p) {
                    cfg.sweep = None;
                }
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.n_traj {
            cfg.n_traj = n;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(t) = self.t_max {
            cfg.t_max = t;
        }
        if let Some(out) = &self.out {
            cfg.output_path = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            if args.list {
                for name in qutrit_feedback::harness::PRESETS {
                    println!("{name}");
                }
                return Ok(true);
            }
            let cfg = args.config()?;
            let out = run_experiment(&cfg)?;
            for r in &out.runs {
                let label = r.sweep_value.map(|v| format!(" [{v}]")).unwrap_or_default();
                println!(
                    "{}{label}: time-averaged negativity {:.6} ± {:.6}",
                    r.csv.display(),
                    r.result.time_averaged_negativity(),
                    r.result.time_averaged_stderr()
                );
            }
            println!("manifest: {}", out.manifest.display());
            Ok(true)
        }
        Command::ClassifyMap { structure, resolution, out } => {
            let path = out.unwrap_or_else(|| {
                let dir = std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from);
                dir.join(format!("classify_{structure}.csv"))
            });
            write_classify_map(structure, resolution, &path)?;
            println!("{}", path.display());
            Ok(true)
        }
        Command::VerifyCodes { gamma, beta, structure } => {
            let report = verify_codes(&VerifyOptions { gamma, beta, structure })?;
            println!("{report}");
            Ok(report.all_pass)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
