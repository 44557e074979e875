use serde::Serialize;

use super::rng::trajectory_rng;
use super::{master_evolve, DiffusionEngine, JumpEngine, TrajectoryRecord};
use crate::error::{QecError, Result};
use crate::harness::{ExperimentConfig, Setup, Unraveling};
use crate::qcore::{pt_summary, Cut};

/// Evaluate `f(0..n)` and return the results in index order. Runs on the
/// rayon pool when the `parallel` feature is enabled.
pub fn ensemble_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectorySummary {
    pub index: usize,
    pub jumps: usize,
    pub feedbacks: usize,
    pub final_negativity: f64,
    pub time_averaged_negativity: f64,
    pub flagged_steps: usize,
}

impl TrajectorySummary {
    fn new(index: usize, rec: &TrajectoryRecord) -> Self {
        let negs = rec.negativities();
        Self {
            index,
            jumps: rec.jumps().count(),
            feedbacks: rec.feedbacks().count(),
            final_negativity: negs.last().copied().unwrap_or(f64::NAN),
            time_averaged_negativity: time_average(&rec.times, &negs),
            flagged_steps: rec.flagged_steps,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleResult {
    pub n_traj: usize,
    pub times: Vec<f64>,
    pub mean_negativity: Vec<f64>,
    /// Standard error of the mean; zero for a single trajectory.
    pub stderr: Vec<f64>,
    pub summaries: Vec<TrajectorySummary>,
    /// The full record when `n_traj == 1`, for event-annotated exports.
    #[serde(skip)]
    pub single: Option<TrajectoryRecord>,
}

impl EnsembleResult {
    /// Trapezoidal time average of the mean negativity.
    pub fn time_averaged_negativity(&self) -> f64 {
        time_average(&self.times, &self.mean_negativity)
    }

    /// Standard error of [`Self::time_averaged_negativity`], from the spread
    /// of per-trajectory time averages.
    pub fn time_averaged_stderr(&self) -> f64 {
        let xs: Vec<f64> = self.summaries.iter().map(|s| s.time_averaged_negativity).collect();
        mean_and_stderr(&xs).1
    }
}

/// Trapezoidal average of `ys` over `ts`.
pub(crate) fn time_average(ts: &[f64], ys: &[f64]) -> f64 {
    if ts.len() < 2 {
        return ys.first().copied().unwrap_or(f64::NAN);
    }
    let area: f64 = ts.windows(2).zip(ys.windows(2)).map(|(t, y)| 0.5 * (y[0] + y[1]) * (t[1] - t[0])).sum();
    area / (ts[ts.len() - 1] - ts[0])
}

pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Run `n_traj` trajectories of the configured experiment (ignoring any
/// sweep) and reduce them in index order.
pub fn ensemble_run(config: &ExperimentConfig, n_traj: usize) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(QecError::param("n_traj", "must be at least 1"));
    }
    let setup = config.setup()?;
    let records = run_records(&setup, n_traj)?;
    Ok(reduce(records))
}

pub(crate) fn run_records(setup: &Setup, n_traj: usize) -> Result<Vec<TrajectoryRecord>> {
    let params = &setup.params;
    match setup.unraveling {
        Unraveling::Jump => {
            let engine = JumpEngine::new(&setup.channels, setup.code.as_ref(), params)?;
            ensemble_map(n_traj, |i| engine.run(&setup.state, &mut trajectory_rng(params.seed, i as u64)))
                .into_iter()
                .collect()
        }
        Unraveling::Diffusion => {
            let engine = DiffusionEngine::new(&setup.channels, setup.code.as_ref(), params)?;
            ensemble_map(n_traj, |i| engine.run(&setup.state, &mut trajectory_rng(params.seed, i as u64)))
                .into_iter()
                .collect()
        }
        Unraveling::None => {
            let series = master_evolve(&setup.state.to_density(), &setup.channels, None, params)?;
            let cut = Cut::last_site(setup.channels.n_sites());
            let mut rec = TrajectoryRecord { times: series.times, ..TrajectoryRecord::default() };
            for rho in &series.states {
                let (negativity, pt_negative_spectrum) = if setup.channels.n_sites() >= 2 {
                    pt_summary(rho, &cut)?
                } else {
                    (0.0, Vec::new())
                };
                rec.samples.push(super::Sample {
                    negativity,
                    pt_negative_spectrum,
                    fidelity_to_initial: (setup.state.to_density().matrix() * rho.matrix()).trace().re,
                    codespace_population: f64::NAN,
                });
            }
            // deterministic: every "trajectory" is the same
            Ok(vec![rec; n_traj])
        }
    }
}

pub(crate) fn reduce(records: Vec<TrajectoryRecord>) -> EnsembleResult {
    let n_traj = records.len();
    let times = records[0].times.clone();
    let mut mean_negativity = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    let mut column = Vec::with_capacity(n_traj);
    for j in 0..times.len() {
        column.clear();
        column.extend(records.iter().map(|r| r.samples[j].negativity));
        let (m, se) = mean_and_stderr(&column);
        mean_negativity.push(m);
        stderr.push(se);
    }
    let summaries = records.iter().enumerate().map(|(i, r)| TrajectorySummary::new(i, r)).collect();
    let single = (n_traj == 1).then(|| records.into_iter().next().expect("one record"));
    EnsembleResult { n_traj, times, mean_negativity, stderr, summaries, single }
}
