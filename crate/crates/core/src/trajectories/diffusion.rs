use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use super::rng::{trajectory_rng, TrajectoryRng};
use super::{check_code_layout, Observer, SimParams, State, TrajectoryRecord, Work};
use crate::channels::{embed_operator, ChannelSet};
use crate::codes::{CodeKind, CodeSpec};
use crate::error::{QecError, Result};
use crate::qcore::{matrix_exponential, Operator, C64, I};

/// Single-step norm changes above this flag the step as too coarse.
const MAX_NORM_CHANGE: f64 = 0.2;

/// Hermitian generator kept in eigenbasis form so `exp(−iθF)` is cheap.
struct SpectralGenerator {
    vecs: DMatrix<C64>,
    vals: Vec<f64>,
}

impl SpectralGenerator {
    fn new(f: &DMatrix<C64>) -> Self {
        let eig = SymmetricEigen::new(f.clone());
        Self { vecs: eig.eigenvectors, vals: eig.eigenvalues.iter().copied().collect() }
    }

    fn unitary(&self, theta: f64) -> DMatrix<C64> {
        let mut scaled = self.vecs.clone();
        for (j, &v) in self.vals.iter().enumerate() {
            let phase = C64::from_polar(1.0, -theta * v);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
        scaled * self.vecs.adjoint()
    }

    /// Apply `exp(−iθF)` without forming it when the state is a ket.
    fn conjugate(&self, work: &mut Work, theta: f64) {
        match work {
            Work::Pure(v) => {
                let mut w = self.vecs.ad_mul(v);
                for (z, &e) in w.iter_mut().zip(&self.vals) {
                    *z *= C64::from_polar(1.0, -theta * e);
                }
                *v = &self.vecs * w;
            }
            Work::Mixed(_) => work.conjugate(&self.unitary(theta)),
        }
    }
}

/// Diffusive (homodyne) unraveling with optional stabilizer feedback.
///
/// Each step, channel `k` records `dQₖ = η⟨Πₖ + Πₖ†⟩dt + √η dWₖ`, the state
/// is updated with `M = I − ½ΣΠ†Π dt + Σ Πₖ dQₖ` as `MρM† + (1−η)ΣΠρΠ† dt`,
/// then conjugated by the drive `exp(−iH dt)` and by the feedback
/// `exp(−iFₖ dQₖ(t−τ)/η)`, and renormalized (Euler–Maruyama, Itô).
pub struct DiffusionEngine {
    params: SimParams,
    dims: Vec<usize>,
    ops: Vec<DMatrix<C64>>,
    quadratures: Vec<DMatrix<C64>>,
    base: DMatrix<C64>,
    drive: Option<DMatrix<C64>>,
    feedback: Vec<Option<SpectralGenerator>>,
    codespace: Option<Operator>,
}

impl DiffusionEngine {
    pub fn new(cs: &ChannelSet, code: Option<&CodeSpec>, params: &SimParams) -> Result<Self> {
        params.validate()?;
        if cs.is_empty() {
            return Err(QecError::param("channels", "diffusive unraveling needs at least one channel"));
        }
        let n_sites = cs.n_sites();
        let dims = cs.dims();
        let dim: usize = dims.iter().product();
        let mut feedback: Vec<Option<SpectralGenerator>> = cs.channels().iter().map(|_| None).collect();
        let mut drive = None;
        if let Some(code) = code {
            check_code_layout(cs, code)?;
            if code.kind != CodeKind::Diffusion {
                return Err(QecError::param("code", "diffusive unraveling needs a diffusion code"));
            }
            for (slot, c) in feedback.iter_mut().zip(cs.channels()) {
                let f = embed_operator(&code.feedback_generator, c.site, n_sites);
                *slot = Some(SpectralGenerator::new(f.matrix()));
            }
            if let Some(h) = &code.drive {
                let mut total = Operator::zeros(&dims);
                let mut sites: Vec<usize> = cs.channels().iter().map(|c| c.site).collect();
                sites.dedup();
                for site in sites {
                    total = total.add(&embed_operator(h, site, n_sites));
                }
                drive = Some(matrix_exponential(&total.scale(-I * params.dt)).into_matrix());
            }
        }
        let base = DMatrix::<C64>::identity(dim, dim) + cs.effective_hamiltonian().matrix() * C64::new(params.dt, 0.0);
        Ok(Self {
            params: params.clone(),
            dims,
            ops: cs.operators().map(|o| o.matrix().clone()).collect(),
            quadratures: cs.operators().map(|o| o.matrix() + o.matrix().adjoint()).collect(),
            base,
            drive,
            feedback,
            codespace: code.map(|c| c.codespace_projector.clone()),
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn run(&self, state0: &State, rng: &mut TrajectoryRng) -> Result<TrajectoryRecord> {
        if state0.dims() != self.dims.as_slice() {
            return Err(QecError::Shape(format!("state dims {:?} vs channels {:?}", state0.dims(), self.dims)));
        }
        let p = &self.params;
        let (dt, eta) = (p.dt, p.eta);
        let sqrt_eta = eta.sqrt();
        let sqrt_dt = dt.sqrt();
        let tau_steps = p.tau_steps();
        let observer = Observer::new(state0, self.codespace.as_ref());
        let undetected = C64::new((1.0 - eta) * dt, 0.0);

        let mut work = match state0 {
            State::Pure(k) if eta == 1.0 => Work::Pure(k.normalized().amplitudes().clone()),
            other => Work::Mixed(other.to_density().normalized().into_matrix()),
        };
        let n_steps = p.n_steps();
        let samples = p.sample_steps();
        let mut next_sample = 0;
        let mut record = TrajectoryRecord {
            dq_records: vec![Vec::with_capacity(n_steps); self.ops.len()],
            ..TrajectoryRecord::default()
        };
        let mut dq = vec![0.0; self.ops.len()];

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

            for (k, q) in dq.iter_mut().enumerate() {
                let mean = work.expect(&self.quadratures[k]).re;
                let dw: f64 = StandardNormal.sample(rng);
                *q = eta * mean * dt + sqrt_eta * sqrt_dt * dw;
                record.dq_records[k].push(*q);
            }

            let mut m = self.base.clone();
            for (op, &q) in self.ops.iter().zip(&dq) {
                m += op * C64::new(q, 0.0);
            }
            match &mut work {
                Work::Pure(v) => *v = &m * &*v,
                Work::Mixed(r) => {
                    let mut next = &m * &*r * m.adjoint();
                    if eta < 1.0 {
                        for op in &self.ops {
                            next += op * &*r * op.adjoint() * undetected;
                        }
                    }
                    *r = next;
                }
            }
            let norm = work.normalize();
            if !(norm > 0.0) {
                return Err(QecError::Numerical("state vanished in diffusive step".into()));
            }
            if (norm - 1.0).abs() > MAX_NORM_CHANGE {
                record.flagged_steps += 1;
                if record.flagged_steps == 1 {
                    log::warn!("norm changed by {:.3} in one step; reduce dt", norm - 1.0);
                }
            }

            if let Some(u) = &self.drive {
                work.conjugate(u);
            }
            if step >= tau_steps {
                for (k, fb) in self.feedback.iter().enumerate() {
                    if let Some(gen) = fb {
                        let q = record.dq_records[k][step - tau_steps];
                        gen.conjugate(&mut work, q / eta);
                    }
                }
            }
            work.normalize();
        }
        Ok(record)
    }
}

/// Single diffusive trajectory using stream 0 of `params.seed`.
pub fn diffusion_trajectory(
    state0: &State,
    cs: &ChannelSet,
    code: Option<&CodeSpec>,
    params: &SimParams,
) -> Result<TrajectoryRecord> {
    let engine = DiffusionEngine::new(cs, code, params)?;
    engine.run(state0, &mut trajectory_rng(params.seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{diffusion_code, jump_code};
    use crate::qcore::{Ket, ONE};

    fn codespace_bell() -> State {
        Ket::qutrit_superposition(&[(ONE, &[0, 0]), (ONE, &[2, 2])]).into()
    }

    fn two_site_ladder() -> ChannelSet {
        ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap().on_each_site(2).unwrap()
    }

    #[test]
    fn spectral_unitary_matches_exponential() {
        let code = diffusion_code(1.0).unwrap();
        let gen = SpectralGenerator::new(code.feedback_generator.matrix());
        let direct = code.feedback_unitary(0.37);
        let diff = &gen.unitary(0.37) - direct.matrix();
        assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn codespace_state_is_nearly_stationary() {
        let code = diffusion_code(1.0).unwrap();
        let params = SimParams { dt: 1e-4, t_max: 0.5, seed: 2, record_stride: 500, ..SimParams::default() };
        let rec = diffusion_trajectory(&codespace_bell(), &two_site_ladder(), Some(&code), &params).unwrap();
        for s in &rec.samples {
            assert!(s.fidelity_to_initial > 1.0 - 1e-3);
        }
    }

    #[test]
    fn ground_state_records_are_pure_noise() {
        let cs = ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap();
        let eta = 0.7;
        let params = SimParams { dt: 1e-3, t_max: 20.0, eta, seed: 4, ..SimParams::default() };
        let rec = diffusion_trajectory(&Ket::qutrit_levels(&[0]).into(), &cs, None, &params).unwrap();
        let q = &rec.dq_records[0];
        let n = q.len() as f64;
        let mean = q.iter().sum::<f64>() / n;
        let var = q.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // standard error of the mean is sqrt(eta dt / n)
        assert!(mean.abs() < 4.0 * (eta * params.dt / n).sqrt());
        assert!((var / (eta * params.dt) - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejects_jump_code() {
        let code = jump_code(1.0).unwrap();
        assert!(DiffusionEngine::new(&two_site_ladder(), Some(&code), &SimParams::default()).is_err());
    }

    #[test]
    fn delayed_feedback_degrades_protection() {
        let code = diffusion_code(1.0).unwrap();
        let params = SimParams { dt: 1e-3, t_max: 2.0, tau: 0.2, seed: 6, ..SimParams::default() };
        let rec = diffusion_trajectory(&codespace_bell(), &two_site_ladder(), Some(&code), &params).unwrap();
        assert!(rec.samples.last().unwrap().fidelity_to_initial < 0.99);
    }
}
