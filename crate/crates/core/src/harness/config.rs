use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::InitialCoeffs;
use crate::channels::{ChannelSet, Structure};
use crate::codes::{diffusion_code, jump_code, CodeSpec};
use crate::error::{QecError, Result};
use crate::qcore::{Ket, ONE};
use crate::trajectories::{SimParams, State};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "QUTRIT_FEEDBACK_OUT";
const DEFAULT_OUTPUT_DIR: &str = "results";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unraveling {
    Jump,
    Diffusion,
    /// Deterministic master equation; every "trajectory" is the average.
    None,
}

/// Decay channels on every qutrit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    /// Indistinguishable ladder decay (split into two detectors when `alpha`
    /// is set).
    #[serde(rename = "ladder")]
    Ladder,
    #[serde(rename = "E")]
    Cascade,
    #[serde(rename = "V")]
    Vee,
    #[serde(rename = "Lambda")]
    Lambda,
}

impl ChannelKind {
    pub fn structure(self) -> Option<Structure> {
        match self {
            ChannelKind::Ladder => None,
            ChannelKind::Cascade => Some(Structure::Cascade),
            ChannelKind::Vee => Some(Structure::Vee),
            ChannelKind::Lambda => Some(Structure::Lambda),
        }
    }
}

/// Named initial states; all are normalized on construction.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// `(|12⟩ + |21⟩)/√2`
    Bell12_21,
    /// `(|00⟩ + |22⟩)/√2`, in the diffusion codespace
    Bell00_22,
    /// `(|112⟩ + |121⟩ + |211⟩)/√3`
    W3,
    /// `(|11⟩ + |22⟩)/√2`
    Plus11_22,
    /// `a|00⟩ + b|11⟩ + c|22⟩`, rescaled to unit norm
    Coeffs(f64, f64, f64),
}

impl InitialState {
    pub fn ket(&self) -> Result<Ket> {
        Ok(match self {
            InitialState::Bell12_21 => Ket::qutrit_superposition(&[(ONE, &[1, 2]), (ONE, &[2, 1])]),
            InitialState::Bell00_22 => Ket::qutrit_superposition(&[(ONE, &[0, 0]), (ONE, &[2, 2])]),
            InitialState::W3 => Ket::qutrit_superposition(&[(ONE, &[1, 1, 2]), (ONE, &[1, 2, 1]), (ONE, &[2, 1, 1])]),
            InitialState::Plus11_22 => Ket::qutrit_superposition(&[(ONE, &[1, 1]), (ONE, &[2, 2])]),
            InitialState::Coeffs(a, b, c) => InitialCoeffs::normalized(*a, *b, *c)?.ket(),
        })
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Bell12_21 => f.write_str("bell12_21"),
            InitialState::Bell00_22 => f.write_str("bell00_22"),
            InitialState::W3 => f.write_str("w3"),
            InitialState::Plus11_22 => f.write_str("plus11_22"),
            InitialState::Coeffs(a, b, c) => write!(f, "coeffs({a},{b},{c})"),
        }
    }
}

impl FromStr for InitialState {
    type Err = QecError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "bell12_21" => return Ok(InitialState::Bell12_21),
            "bell00_22" => return Ok(InitialState::Bell00_22),
            "w3" => return Ok(InitialState::W3),
            "plus11_22" => return Ok(InitialState::Plus11_22),
            _ => {}
        }
        let inner = s
            .strip_prefix("coeffs(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| QecError::Config(format!("unknown initial_state {s:?}")))?;
        let nums: Vec<f64> = inner
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| QecError::Config(format!("initial_state {s:?}: {e}")))?;
        match nums[..] {
            [a, b, c] => Ok(InitialState::Coeffs(a, b, c)),
            _ => Err(QecError::Config(format!("initial_state {s:?}: expected three amplitudes"))),
        }
    }
}

impl Serialize for InitialState {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InitialState {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Tau,
    Eta,
    Alpha,
    Beta,
    DeltaVar,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Eta => "eta",
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
            SweepParam::DeltaVar => "delta_var",
        }
    }
}

impl FromStr for SweepParam {
    type Err = QecError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tau" => SweepParam::Tau,
            "eta" => SweepParam::Eta,
            "alpha" => SweepParam::Alpha,
            "beta" => SweepParam::Beta,
            "delta_var" => SweepParam::DeltaVar,
            other => {
                return Err(QecError::Config(format!(
                    "sweep parameter {other:?} must be one of tau, eta, alpha, beta, delta_var"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

/// Everything needed to reproduce one experiment. Physical quantities are
/// in units of `γ = 1` unless `gamma` is changed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub structure: ChannelKind,
    pub gamma: f64,
    pub beta: f64,
    /// Detector distinguishability; `None` keeps a single ladder detector.
    pub alpha: Option<f64>,
    pub unraveling: Unraveling,
    pub feedback: bool,
    pub initial_state: InitialState,
    pub dt: f64,
    pub t_max: f64,
    pub eta: f64,
    pub tau: f64,
    pub delta_var: f64,
    pub seed: u64,
    pub record_stride: usize,
    pub n_traj: usize,
    pub output_path: Option<PathBuf>,
    pub sweep: Option<Sweep>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimParams::default();
        Self {
            experiment: "custom".into(),
            structure: ChannelKind::Ladder,
            gamma: 1.0,
            beta: 1.0,
            alpha: None,
            unraveling: Unraveling::Jump,
            feedback: true,
            initial_state: InitialState::Bell12_21,
            dt: sim.dt,
            t_max: sim.t_max,
            eta: sim.eta,
            tau: sim.tau,
            delta_var: sim.delta_var,
            seed: sim.seed,
            record_stride: sim.record_stride,
            n_traj: 100,
            output_path: None,
            sweep: None,
        }
    }
}

/// Ready-to-run objects built from a config.
#[derive(Clone, Debug)]
pub struct Setup {
    pub channels: ChannelSet,
    pub code: Option<CodeSpec>,
    pub state: State,
    pub params: SimParams,
    pub unraveling: Unraveling,
}

impl ExperimentConfig {
    /// Parse a TOML config; unknown keys are rejected by name.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| QecError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| QecError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            dt: self.dt,
            t_max: self.t_max,
            eta: self.eta,
            tau: self.tau,
            delta_var: self.delta_var,
            seed: self.seed,
            record_stride: self.record_stride,
            record_states: false,
            capture_event_states: false,
        }
    }

    /// Output directory: the configured path, else `$QUTRIT_FEEDBACK_OUT`,
    /// else `./results`.
    pub fn output_dir(&self) -> PathBuf {
        self.output_path
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    /// Copy with one sweepable parameter replaced.
    pub fn with_param(&self, p: SweepParam, value: f64) -> Self {
        let mut c = self.clone();
        match p {
            SweepParam::Tau => c.tau = value,
            SweepParam::Eta => c.eta = value,
            SweepParam::Alpha => c.alpha = Some(value),
            SweepParam::Beta => c.beta = value,
            SweepParam::DeltaVar => c.delta_var = value,
        }
        c
    }

    /// The individual runs of this config: one per sweep value, or just itself.
    pub fn expand(&self) -> Vec<(Option<f64>, ExperimentConfig)> {
        match &self.sweep {
            None => vec![(None, self.clone())],
            Some(s) => s.values.iter().map(|&v| (Some(v), self.with_param(s.parameter, v))).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: String| Err(QecError::Config(format!("{key}: {why}")));
        if self.n_traj == 0 {
            return bad("n_traj", "must be at least 1".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep.values", "must not be empty".into());
            }
        }
        if self.feedback && self.unraveling == Unraveling::None {
            return bad("feedback", "needs a jump or diffusion unraveling".into());
        }
        if self.feedback && self.structure != ChannelKind::Ladder {
            return bad("feedback", "no codespace: channels distinguishable".into());
        }
        if self.alpha.is_some() && self.structure != ChannelKind::Ladder {
            return bad("alpha", "only applies to ladder channels".into());
        }
        for (_, run) in self.expand() {
            run.sim_params().validate().map_err(config_error)?;
            run.setup_unchecked().map_err(config_error)?;
        }
        Ok(())
    }

    /// Build channels, code, initial state and step parameters.
    pub fn setup(&self) -> Result<Setup> {
        self.validate()?;
        self.setup_unchecked()
    }

    fn setup_unchecked(&self) -> Result<Setup> {
        let ket = self.initial_state.ket()?;
        let n_sites = ket.dims().len();
        let single = match self.structure.structure() {
            Some(s) => ChannelSet::structure_ops(s, self.gamma, self.gamma)?,
            None => match self.alpha {
                Some(alpha) => ChannelSet::ladder_combined(self.gamma, alpha, self.beta)?,
                None => ChannelSet::ladder_indistinguishable(self.gamma, self.beta)?,
            },
        };
        let code = match (self.feedback, self.unraveling) {
            (false, _) | (true, Unraveling::None) => None,
            (true, Unraveling::Jump) => Some(jump_code(self.gamma)?),
            (true, Unraveling::Diffusion) => Some(diffusion_code(self.gamma)?),
        };
        Ok(Setup {
            channels: single.on_each_site(n_sites)?,
            code,
            state: ket.into(),
            params: self.sim_params(),
            unraveling: self.unraveling,
        })
    }
}

fn config_error(e: QecError) -> QecError {
    match e {
        QecError::InvalidParameter { name, reason } => QecError::Config(format!("{name}: {reason}")),
        other => other,
    }
}

pub const PRESETS: [&str; 9] = [
    "delay-sweep",
    "single-delay",
    "efficiency-single",
    "efficiency-sweep",
    "alpha-sweep",
    "beta-sweep",
    "disorder-sweep",
    "w3-delay-sweep",
    "diffusion-protection",
];

/// Built-in experiments, named after the effect they show.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = ExperimentConfig { experiment: name.to_string(), t_max: 5.0, ..ExperimentConfig::default() };
    let sweep = |parameter, values: Vec<f64>| Some(Sweep { parameter, values });
    let grid = |n: usize, hi: f64| (0..=n).map(|i| hi * i as f64 / n as f64).collect::<Vec<_>>();
    let cfg = match name {
        "custom" => ExperimentConfig::default(),
        "delay-sweep" => ExperimentConfig { sweep: sweep(SweepParam::Tau, grid(10, 1.0)), ..base },
        "single-delay" => ExperimentConfig { tau: 0.7, n_traj: 1, seed: 7, t_max: 10.0, ..base },
        "efficiency-single" => ExperimentConfig { eta: 0.98, n_traj: 1, seed: 3, t_max: 10.0, ..base },
        "efficiency-sweep" => ExperimentConfig { sweep: sweep(SweepParam::Eta, vec![0.8, 0.85, 0.9, 0.95, 1.0]), ..base },
        "alpha-sweep" => ExperimentConfig { sweep: sweep(SweepParam::Alpha, grid(4, 1.0)), ..base },
        "beta-sweep" => ExperimentConfig { sweep: sweep(SweepParam::Beta, vec![0.5, 1.0, 1.5, 2.0]), ..base },
        "disorder-sweep" => ExperimentConfig { sweep: sweep(SweepParam::DeltaVar, vec![0.0, 0.05, 0.1, 0.2, 0.4]), ..base },
        "w3-delay-sweep" => ExperimentConfig {
            initial_state: InitialState::W3,
            sweep: sweep(SweepParam::Tau, grid(5, 1.0)),
            n_traj: 50,
            ..base
        },
        "diffusion-protection" => ExperimentConfig {
            unraveling: Unraveling::Diffusion,
            initial_state: InitialState::Bell00_22,
            dt: 1e-4,
            t_max: 2.0,
            record_stride: 100,
            n_traj: 50,
            ..base
        },
        other => {
            return Err(QecError::Config(format!("unknown experiment {other:?}; presets: custom, {}", PRESETS.join(", "))))
        }
    };
    Ok(cfg)
}
