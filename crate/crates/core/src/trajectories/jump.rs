use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::rng::{trajectory_rng, TrajectoryRng};
use super::{check_code_layout, Event, EventKind, Observer, SimParams, State, TrajectoryRecord, Work};
use crate::channels::{embed_operator, ChannelSet};
use crate::codes::{CodeKind, CodeSpec};
use crate::error::{QecError, Result};
use crate::qcore::{matrix_exponential, Operator, C64, I};

/// Jump probabilities above this per step mean `dt` is too coarse.
const MAX_STEP_PROBABILITY: f64 = 0.1;

/// A detection forced at a given step, replacing the random clicks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScriptedJump {
    pub step: usize,
    pub channel: usize,
}

struct PendingFeedback {
    due: usize,
    site: usize,
    channel: usize,
}

/// Per-site feedback machinery embedded in the register.
struct SiteFeedback {
    generator: DMatrix<C64>,
    ideal: DMatrix<C64>,
}

/// Jump unraveling with optional point-like recycling feedback.
///
/// Each step draws at most one click: channel `k` fires with probability
/// `η·dt·⟨Πₖ†Πₖ⟩`. A click applies `Πₖ` and schedules the site's feedback
/// `exp(−i(1 + δ/|λ|)F)` `round(τ/dt)` steps later. Without a click the state
/// follows the no-detection evolution, including the undetected fraction
/// `1 − η` of the emissions. Measurement is applied before feedback due in the
/// same step.
pub struct JumpEngine {
    params: SimParams,
    dims: Vec<usize>,
    labels: Vec<String>,
    sites: Vec<usize>,
    ops: Vec<DMatrix<C64>>,
    kops: Vec<DMatrix<C64>>,
    no_click: DMatrix<C64>,
    feedback: Vec<Option<SiteFeedback>>,
    lambda_mag: f64,
    codespace: Option<Operator>,
}

enum Clicks<'a> {
    Random,
    Scripted(&'a [ScriptedJump]),
}

impl JumpEngine {
    pub fn new(cs: &ChannelSet, code: Option<&CodeSpec>, params: &SimParams) -> Result<Self> {
        params.validate()?;
        if cs.is_empty() {
            return Err(QecError::param("channels", "jump unraveling needs at least one channel"));
        }
        let n_sites = cs.n_sites();
        let mut feedback: Vec<Option<SiteFeedback>> = (0..n_sites).map(|_| None).collect();
        if let Some(code) = code {
            check_code_layout(cs, code)?;
            if code.kind != CodeKind::Jump {
                return Err(QecError::param("code", "jump unraveling needs a jump code"));
            }
            for c in cs.channels() {
                if feedback[c.site].is_none() {
                    let generator = embed_operator(&code.feedback_generator, c.site, n_sites);
                    let ideal = matrix_exponential(&generator.scale(-I)).into_matrix();
                    feedback[c.site] = Some(SiteFeedback { generator: generator.into_matrix(), ideal });
                }
            }
        }
        let heff = cs.effective_hamiltonian();
        let no_click = matrix_exponential(&heff.scale_real(params.dt)).into_matrix();
        Ok(Self {
            params: params.clone(),
            dims: cs.dims(),
            labels: cs.channels().iter().map(|c| c.label.clone()).collect(),
            sites: cs.channels().iter().map(|c| c.site).collect(),
            ops: cs.operators().map(|o| o.matrix().clone()).collect(),
            kops: cs.operators().map(|o| o.matrix().adjoint() * o.matrix()).collect(),
            no_click,
            feedback,
            lambda_mag: code.map_or(0.0, |c| c.lambda_mag),
            codespace: code.map(|c| c.codespace_projector.clone()),
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    /// One stochastic realization.
    pub fn run(&self, state0: &State, rng: &mut TrajectoryRng) -> Result<TrajectoryRecord> {
        self.run_inner(state0, Clicks::Random, rng)
    }

    /// Deterministic realization with clicks exactly at the scripted steps.
    /// Feedback disorder, if any, still draws from the `params.seed` stream.
    pub fn run_scripted(&self, state0: &State, script: &[ScriptedJump]) -> Result<TrajectoryRecord> {
        if let Some(bad) = script.iter().find(|s| s.channel >= self.ops.len()) {
            return Err(QecError::param("script", format!("channel {} does not exist", bad.channel)));
        }
        let mut rng = trajectory_rng(self.params.seed, 0);
        self.run_inner(state0, Clicks::Scripted(script), &mut rng)
    }

    fn run_inner(&self, state0: &State, clicks: Clicks<'_>, rng: &mut TrajectoryRng) -> Result<TrajectoryRecord> {
        if state0.dims() != self.dims.as_slice() {
            return Err(QecError::Shape(format!("state dims {:?} vs channels {:?}", state0.dims(), self.dims)));
        }
        let p = &self.params;
        let dt = p.dt;
        let eta = p.eta;
        let tau_steps = p.tau_steps();
        let observer = Observer::new(state0, self.codespace.as_ref());
        let disorder = if p.delta_var > 0.0 {
            Some(Normal::new(0.0, p.delta_var.sqrt()).map_err(|e| QecError::param("delta_var", e.to_string()))?)
        } else {
            None
        };

        let mut work = match state0 {
            State::Pure(k) if eta == 1.0 => Work::Pure(k.normalized().amplitudes().clone()),
            other => Work::Mixed(other.to_density().normalized().into_matrix()),
        };
        let no_click_adj = self.no_click.adjoint();
        let undetected = C64::new((1.0 - eta) * dt, 0.0);

        let samples = p.sample_steps();
        let mut next_sample = 0;
        let mut record = TrajectoryRecord::default();
        let mut queue: VecDeque<PendingFeedback> = VecDeque::new();
        let mut weights = vec![0.0; self.ops.len()];
        let n_steps = p.n_steps();

        for step in 0..=n_steps {
            if samples.get(next_sample) == Some(&step) {
                next_sample += 1;
                let rho = work.density();
                record.times.push(step as f64 * dt);
                record.samples.push(observer.sample(&rho));
                if p.record_states {
                    record.states.push(observer.wrap(rho));
                }
            }
            if step == n_steps {
                break;
            }
            let time = (step + 1) as f64 * dt;

            let fired = match clicks {
                Clicks::Random => {
                    for (w, k) in weights.iter_mut().zip(&self.kops) {
                        *w = eta * dt * work.expect(k).re.max(0.0);
                    }
                    let total: f64 = weights.iter().sum();
                    if total > MAX_STEP_PROBABILITY {
                        record.flagged_steps += 1;
                        if record.flagged_steps == 1 {
                            log::warn!("jump probability {total:.3} per step at t = {time:.4}; reduce dt");
                        }
                    }
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut hit = None;
                    for (k, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            hit = Some(k);
                            break;
                        }
                    }
                    hit
                }
                Clicks::Scripted(script) => script.iter().find(|s| s.step == step).map(|s| s.channel),
            };

            if let Some(k) = fired {
                let before = work.density();
                let op = &self.ops[k];
                match &mut work {
                    Work::Pure(v) => *v = op * &*v,
                    Work::Mixed(m) => *m = op * &*m * op.adjoint(),
                }
                if work.normalize() <= 0.0 {
                    return Err(QecError::Numerical(format!("click on dark channel {}", self.labels[k])));
                }
                let after = work.density();
                record.events.push(self.event(&observer, time, step, EventKind::Jump, k, 0.0, before, after));
                if self.feedback[self.sites[k]].is_some() {
                    queue.push_back(PendingFeedback { due: step + tau_steps, site: self.sites[k], channel: k });
                }
            } else {
                match &mut work {
                    Work::Pure(v) => *v = &self.no_click * &*v,
                    Work::Mixed(m) => {
                        let mut next = &self.no_click * &*m * &no_click_adj;
                        if eta < 1.0 {
                            for op in &self.ops {
                                next += op * &*m * op.adjoint() * undetected;
                            }
                        }
                        *m = next;
                    }
                }
                if work.normalize() <= 0.0 {
                    return Err(QecError::Numerical("state vanished under no-click evolution".into()));
                }
            }

            while queue.front().is_some_and(|f| f.due == step) {
                let pending = queue.pop_front().expect("checked");
                let fb = self.feedback[pending.site].as_ref().expect("queued only with feedback");
                let delta = disorder.map_or(0.0, |d| d.sample(rng));
                let before = work.density();
                if delta == 0.0 {
                    work.conjugate(&fb.ideal);
                } else {
                    let scale = 1.0 + delta / self.lambda_mag;
                    let u = (&fb.generator * (-I * scale)).exp();
                    work.conjugate(&u);
                }
                work.normalize();
                let after = work.density();
                record.events.push(self.event(
                    &observer,
                    time,
                    step,
                    EventKind::FeedbackApplied,
                    pending.channel,
                    delta,
                    before,
                    after,
                ));
            }
        }
        Ok(record)
    }

    #[allow(clippy::too_many_arguments)]
    fn event(
        &self,
        observer: &Observer,
        time: f64,
        step: usize,
        kind: EventKind,
        channel: usize,
        delta: f64,
        before: DMatrix<C64>,
        after: DMatrix<C64>,
    ) -> Event {
        let capture = self.params.capture_event_states;
        Event {
            time,
            step,
            kind,
            channel: self.labels[channel].clone(),
            site: self.sites[channel],
            delta,
            negativity_before: observer.negativity(&before),
            negativity_after: observer.negativity(&after),
            state_before: capture.then(|| observer.wrap(before)),
            state_after: capture.then(|| observer.wrap(after)),
        }
    }
}

/// Single jump trajectory using stream 0 of `params.seed`.
pub fn jump_trajectory(
    state0: &State,
    cs: &ChannelSet,
    code: Option<&CodeSpec>,
    params: &SimParams,
) -> Result<TrajectoryRecord> {
    let engine = JumpEngine::new(cs, code, params)?;
    engine.run(state0, &mut trajectory_rng(params.seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::jump_code;
    use crate::qcore::{Ket, ONE};

    fn bell() -> State {
        Ket::qutrit_superposition(&[(ONE, &[1, 2]), (ONE, &[2, 1])]).into()
    }

    fn two_site_ladder() -> ChannelSet {
        ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap().on_each_site(2).unwrap()
    }

    #[test]
    fn ideal_feedback_protects_bell_state() {
        let code = jump_code(1.0).unwrap();
        let params = SimParams { dt: 1e-3, t_max: 5.0, seed: 3, ..SimParams::default() };
        let rec = jump_trajectory(&bell(), &two_site_ladder(), Some(&code), &params).unwrap();
        assert!(rec.jumps().count() > 0);
        for s in &rec.samples {
            assert!((s.negativity - 1.0).abs() < 1e-6);
            assert!((s.fidelity_to_initial - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn every_click_is_followed_by_feedback_in_same_step() {
        let code = jump_code(1.0).unwrap();
        let params = SimParams { dt: 1e-3, t_max: 5.0, seed: 11, ..SimParams::default() };
        let rec = jump_trajectory(&bell(), &two_site_ladder(), Some(&code), &params).unwrap();
        let ev = &rec.events;
        assert_eq!(ev.len() % 2, 0);
        for pair in ev.chunks(2) {
            assert_eq!(pair[0].kind, EventKind::Jump);
            assert_eq!(pair[1].kind, EventKind::FeedbackApplied);
            assert_eq!(pair[0].step, pair[1].step);
            assert_eq!(pair[0].site, pair[1].site);
        }
    }

    #[test]
    fn without_feedback_state_decays() {
        let params = SimParams { dt: 1e-3, t_max: 8.0, seed: 5, ..SimParams::default() };
        let rec = jump_trajectory(&bell(), &two_site_ladder(), None, &params).unwrap();
        assert!(rec.feedbacks().count() == 0);
        assert!(rec.samples.last().unwrap().negativity < 1.0);
    }

    #[test]
    fn same_seed_same_record() {
        let code = jump_code(1.0).unwrap();
        let params = SimParams { dt: 1e-3, t_max: 3.0, eta: 0.9, tau: 0.1, delta_var: 0.05, seed: 9, ..SimParams::default() };
        let a = jump_trajectory(&bell(), &two_site_ladder(), Some(&code), &params).unwrap();
        let b = jump_trajectory(&bell(), &two_site_ladder(), Some(&code), &params).unwrap();
        assert_eq!(a.negativities(), b.negativities());
        assert_eq!(a.events.len(), b.events.len());
    }

    #[test]
    fn rejects_diffusion_code() {
        let code = crate::codes::diffusion_code(1.0).unwrap();
        assert!(JumpEngine::new(&two_site_ladder(), Some(&code), &SimParams::default()).is_err());
    }

    #[test]
    fn scripted_channel_must_exist() {
        let engine = JumpEngine::new(&two_site_ladder(), None, &SimParams::default()).unwrap();
        assert!(engine.run_scripted(&bell(), &[ScriptedJump { step: 0, channel: 5 }]).is_err());
    }

    #[test]
    fn coarse_steps_are_flagged() {
        let cs = ChannelSet::ladder_indistinguishable(100.0, 1.0).unwrap().on_each_site(2).unwrap();
        let params = SimParams { dt: 1e-2, t_max: 0.1, ..SimParams::default() };
        let rec = jump_trajectory(&bell(), &cs, None, &params).unwrap();
        assert!(rec.flagged_steps > 0);
    }
}
