//! Time-evolution engines: the averaged master equation, the jump and
//! diffusive unravelings with (delayed, disordered, inefficient) feedback,
//! the no-jump propagator and parallel ensembles.

mod diffusion;
mod ensemble;
mod jump;
mod master;
mod nojump;
pub mod rng;
mod sparse;

pub use diffusion::{diffusion_trajectory, DiffusionEngine};
pub use ensemble::{ensemble_map, ensemble_run, EnsembleResult, TrajectorySummary};
pub use jump::{jump_trajectory, JumpEngine, ScriptedJump};
pub use master::{master_evolve, MasterSeries};
pub use nojump::no_jump_propagate;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QecError, Result};
use crate::qcore::{pt_summary, Cut, DensityMatrix, Ket, Operator, Tensor, C64};

/// Step size, horizon and imperfection knobs shared by all engines. Times are
/// in units of `1/γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub dt: f64,
    pub t_max: f64,
    /// Detection efficiency, applied to every channel.
    pub eta: f64,
    /// Feedback delay; rounded to a whole number of steps.
    pub tau: f64,
    /// Variance of the Gaussian feedback-strength disorder.
    pub delta_var: f64,
    pub seed: u64,
    /// Observables are sampled every `record_stride` steps.
    pub record_stride: usize,
    /// Keep the density matrix at every sample.
    pub record_states: bool,
    /// Keep the state just before and after every event.
    pub capture_event_states: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_max: 10.0,
            eta: 1.0,
            tau: 0.0,
            delta_var: 0.0,
            seed: 0,
            record_stride: 10,
            record_states: false,
            capture_event_states: false,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(QecError::param("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.dt <= self.t_max) {
            return Err(QecError::param("t_max", format!("must be at least dt, got {}", self.t_max)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(QecError::param("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.tau >= 0.0) {
            return Err(QecError::param("tau", format!("must be non-negative, got {}", self.tau)));
        }
        if !(self.delta_var >= 0.0) {
            return Err(QecError::param("delta_var", format!("must be non-negative, got {}", self.delta_var)));
        }
        if self.record_stride == 0 {
            return Err(QecError::param("record_stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    pub fn tau_steps(&self) -> usize {
        (self.tau / self.dt).round() as usize
    }

    /// Times at which observables are sampled.
    pub fn sample_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.record_stride).collect();
        if *steps.last().unwrap() != n {
            steps.push(n);
        }
        steps
    }
}

/// Initial condition for a trajectory.
#[derive(Clone, Debug)]
pub enum State {
    Pure(Ket),
    Mixed(DensityMatrix),
}

impl State {
    pub fn dims(&self) -> &[usize] {
        match self {
            State::Pure(k) => k.dims(),
            State::Mixed(r) => r.dims(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            State::Pure(k) => k.to_density(),
            State::Mixed(r) => r.clone(),
        }
    }
}

impl From<Ket> for State {
    fn from(k: Ket) -> Self {
        State::Pure(k)
    }
}

impl From<DensityMatrix> for State {
    fn from(r: DensityMatrix) -> Self {
        State::Mixed(r)
    }
}

/// Working representation inside an engine.
#[derive(Clone, Debug)]
pub(crate) enum Work {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

impl Work {
    pub(crate) fn density(&self) -> DMatrix<C64> {
        match self {
            Work::Pure(v) => v * v.adjoint(),
            Work::Mixed(m) => m.clone(),
        }
    }

    pub(crate) fn normalize(&mut self) -> f64 {
        match self {
            Work::Pure(v) => {
                let n = v.norm();
                *v /= C64::new(n, 0.0);
                n * n
            }
            Work::Mixed(m) => {
                let tr = m.trace().re;
                *m /= C64::new(tr, 0.0);
                // keep exact Hermiticity against rounding drift
                let h = (&*m + m.adjoint()) * C64::new(0.5, 0.0);
                *m = h;
                tr
            }
        }
    }

    /// `⟨A⟩` for the current (normalized) state.
    pub(crate) fn expect(&self, a: &DMatrix<C64>) -> C64 {
        match self {
            Work::Pure(v) => v.dotc(&(a * v)),
            Work::Mixed(m) => (a * m).trace(),
        }
    }

    pub(crate) fn conjugate(&mut self, u: &DMatrix<C64>) {
        match self {
            Work::Pure(v) => *v = u * &*v,
            Work::Mixed(m) => *m = u * &*m * u.adjoint(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Jump,
    FeedbackApplied,
}

#[derive(Clone, Debug, Serialize)]
pub struct Event {
    pub time: f64,
    pub step: usize,
    pub kind: EventKind,
    /// Channel label for jumps; the triggering channel for feedback.
    pub channel: String,
    pub site: usize,
    /// Disorder sample used by a feedback application.
    pub delta: f64,
    pub negativity_before: f64,
    pub negativity_after: f64,
    #[serde(skip)]
    pub state_before: Option<DensityMatrix>,
    #[serde(skip)]
    pub state_after: Option<DensityMatrix>,
}

/// Observables at one sample time.
#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub negativity: f64,
    pub pt_negative_spectrum: Vec<f64>,
    pub fidelity_to_initial: f64,
    /// `NaN` when no code is attached.
    pub codespace_population: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    /// Per-channel homodyne records `dQ`, one entry per step (diffusion only).
    pub dq_records: Vec<Vec<f64>>,
    /// Steps where the step size looked too coarse (jump probability above
    /// 0.1, or a diffusive norm change above 20%).
    pub flagged_steps: usize,
    #[serde(skip)]
    pub states: Vec<DensityMatrix>,
}

impl TrajectoryRecord {
    pub fn negativities(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.negativity).collect()
    }

    pub fn jumps(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Jump)
    }

    pub fn feedbacks(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::FeedbackApplied)
    }
}

/// Computes the sampled observables for one register.
#[derive(Clone, Debug)]
pub(crate) struct Observer {
    dims: Vec<usize>,
    cut: Option<Cut>,
    initial: DMatrix<C64>,
    codespace: Option<DMatrix<C64>>,
}

impl Observer {
    pub(crate) fn new(state0: &State, codespace: Option<&Operator>) -> Self {
        let dims = state0.dims().to_vec();
        let cut = (dims.len() >= 2).then(|| Cut::last_site(dims.len()));
        let codespace = codespace.map(|p| {
            let mut acc = p.clone();
            for _ in 1..dims.len() {
                acc = acc.tensor(p);
            }
            acc.into_matrix()
        });
        Self { initial: state0.to_density().into_matrix(), dims, cut, codespace }
    }

    pub(crate) fn negativity(&self, rho: &DMatrix<C64>) -> f64 {
        self.spectrum(rho).0
    }

    fn spectrum(&self, rho: &DMatrix<C64>) -> (f64, Vec<f64>) {
        match &self.cut {
            None => (0.0, Vec::new()),
            Some(cut) => {
                let dm = DensityMatrix::new(self.dims.clone(), rho.clone()).expect("engine state has register dims");
                pt_summary(&dm, cut).unwrap_or((f64::NAN, Vec::new()))
            }
        }
    }

    pub(crate) fn sample(&self, rho: &DMatrix<C64>) -> Sample {
        let (negativity, pt_negative_spectrum) = self.spectrum(rho);
        Sample {
            negativity,
            pt_negative_spectrum,
            fidelity_to_initial: (&self.initial * rho).trace().re,
            codespace_population: self.codespace.as_ref().map_or(f64::NAN, |p| (p * rho).trace().re),
        }
    }

    pub(crate) fn wrap(&self, rho: DMatrix<C64>) -> DensityMatrix {
        DensityMatrix::new(self.dims.clone(), rho).expect("engine state has register dims")
    }
}

/// Check a single-site code against a channel set laid out per site.
pub(crate) fn check_code_layout(cs: &crate::channels::ChannelSet, code: &crate::codes::CodeSpec) -> Result<()> {
    if code.channel.dim() != 3 {
        return Err(QecError::Shape("codes act on single qutrits".into()));
    }
    if cs.channels().iter().any(|c| c.site >= cs.n_sites()) {
        return Err(QecError::Shape("channel site outside the register".into()));
    }
    Ok(())
}
