use nalgebra::{DMatrix, DVector};

use super::sparse::SparseMatrix;
use super::SimParams;
use crate::channels::{lindblad_superoperator, ChannelSet};
use crate::error::{QecError, Result};
use crate::qcore::{hermitian_eigenvalues, DensityMatrix, Operator, C64, I};

/// Sampled solution of the master equation.
#[derive(Clone, Debug)]
pub struct MasterSeries {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

/// Generator of `dρ/dt = −i[H, ρ] + Σₖ(ΠₖρΠₖ† − ½{Πₖ†Πₖ, ρ})` on
/// column-stacked `vec(ρ)`.
pub(crate) fn liouvillian(cs: &ChannelSet, h: Option<&Operator>, dim: usize) -> DMatrix<C64> {
    let mut l = if cs.is_empty() { DMatrix::zeros(dim * dim, dim * dim) } else { lindblad_superoperator(cs.operators()) };
    if let Some(h) = h {
        let id = DMatrix::<C64>::identity(dim, dim);
        let hm = h.matrix();
        l += (id.kronecker(hm) - hm.transpose().kronecker(&id)) * (-I);
    }
    l
}

/// Integrate the master equation with fixed-step RK4, sampling every
/// `params.record_stride` steps.
///
/// Fails if a sampled state develops an eigenvalue below −1e-6, which means
/// the step is too large.
pub fn master_evolve(
    rho0: &DensityMatrix,
    cs: &ChannelSet,
    h: Option<&Operator>,
    params: &SimParams,
) -> Result<MasterSeries> {
    params.validate()?;
    let dim = rho0.dim();
    if !cs.is_empty() && cs.dims() != rho0.dims() {
        return Err(QecError::Shape(format!("channels act on {:?}, state on {:?}", cs.dims(), rho0.dims())));
    }
    if let Some(h) = h {
        if h.dim() != dim {
            return Err(QecError::Shape("Hamiltonian does not match the state".into()));
        }
        if !h.is_hermitian(1e-12) {
            return Err(QecError::NotHermitian(h.hermiticity_error()));
        }
    }
    let gen = SparseMatrix::from_dense(&liouvillian(cs, h, dim));
    let dt = params.dt;
    let half = C64::new(dt / 2.0, 0.0);
    let full = C64::new(dt, 0.0);
    let sixth = C64::new(dt / 6.0, 0.0);
    let two = C64::new(2.0, 0.0);

    let mut x = DVector::from_column_slice(rho0.matrix().as_slice());
    let n = gen.dim();
    let (mut k1, mut k2, mut k3, mut k4) =
        (DVector::zeros(n), DVector::zeros(n), DVector::zeros(n), DVector::zeros(n));
    let mut tmp = DVector::zeros(n);

    let samples = params.sample_steps();
    let mut times = Vec::with_capacity(samples.len());
    let mut states = Vec::with_capacity(samples.len());
    let mut next = 0;
    for step in 0..=params.n_steps() {
        if samples.get(next) == Some(&step) {
            next += 1;
            let m = DMatrix::from_column_slice(dim, dim, x.as_slice());
            let min_ev = hermitian_eigenvalues(&m)[0];
            if min_ev < -1e-6 {
                return Err(QecError::Numerical(format!(
                    "positivity lost at t = {:.4} (eigenvalue {min_ev:.3e}); reduce dt",
                    step as f64 * dt
                )));
            }
            times.push(step as f64 * dt);
            states.push(DensityMatrix::new(rho0.dims().to_vec(), m)?);
        }
        if step == params.n_steps() {
            break;
        }
        gen.mul_into(&x, &mut k1);
        tmp.copy_from(&x);
        tmp.axpy(half, &k1, C64::new(1.0, 0.0));
        gen.mul_into(&tmp, &mut k2);
        tmp.copy_from(&x);
        tmp.axpy(half, &k2, C64::new(1.0, 0.0));
        gen.mul_into(&tmp, &mut k3);
        tmp.copy_from(&x);
        tmp.axpy(full, &k3, C64::new(1.0, 0.0));
        gen.mul_into(&tmp, &mut k4);
        k2 *= two;
        k3 *= two;
        k1 += &k2;
        k1 += &k3;
        k1 += &k4;
        x.axpy(sixth, &k1, C64::new(1.0, 0.0));
    }
    Ok(MasterSeries { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::Structure;
    use crate::qcore::{negativity, Cut, Ket, ONE};

    fn params(dt: f64, t_max: f64) -> SimParams {
        SimParams { dt, t_max, record_stride: 100, ..SimParams::default() }
    }

    #[test]
    fn ladder_relaxes_to_ground_state() {
        let cs = ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap();
        let rho0 = Ket::qutrit_levels(&[2]).to_density();
        let out = master_evolve(&rho0, &cs, None, &params(1e-2, 30.0)).unwrap();
        let last = out.states.last().unwrap();
        assert!((last.matrix()[(0, 0)].re - 1.0).abs() < 1e-9);
        for s in &out.states {
            assert!((s.trace() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_exact_two_level_decay() {
        // |1⟩ alone decays to |0⟩ as e^{-γt}
        let cs = ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap();
        let rho0 = Ket::qutrit_levels(&[1]).to_density();
        let out = master_evolve(&rho0, &cs, None, &params(1e-2, 3.0)).unwrap();
        for (t, s) in out.times.iter().zip(&out.states) {
            assert!((s.matrix()[(1, 1)].re - (-t).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn lambda_keeps_asymptotic_entanglement() {
        // c² = 0.15 < 4ab = 1.68
        let (a, b, c) = (0.6, 0.7, 0.15f64.sqrt());
        let psi = Ket::qutrit_superposition(&[
            (C64::new(a, 0.0), &[0, 0]),
            (C64::new(b, 0.0), &[1, 1]),
            (C64::new(c, 0.0), &[2, 2]),
        ]);
        let cs = ChannelSet::structure_ops(Structure::Lambda, 1.0, 1.0).unwrap().on_each_site(2).unwrap();
        let out = master_evolve(&psi.to_density(), &cs, None, &params(1e-2, 15.0)).unwrap();
        let last = out.states.last().unwrap();
        assert!(negativity(last, &Cut::last_site(2)).unwrap() > 1e-3);
    }

    #[test]
    fn free_evolution_is_static() {
        let psi = Ket::qutrit_superposition(&[(ONE, &[1, 2]), (ONE, &[2, 1])]);
        let rho0 = psi.to_density();
        let out = master_evolve(&rho0, &ChannelSet::empty(2), None, &params(1e-2, 1.0)).unwrap();
        for s in &out.states {
            assert_eq!(s, &rho0);
        }
    }

    #[test]
    fn hamiltonian_must_be_hermitian() {
        let rho0 = Ket::qutrit_levels(&[1]).to_density();
        let h = Operator::ketbra(3, 0, 1);
        let cs = ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap();
        assert!(master_evolve(&rho0, &cs, Some(&h), &params(1e-2, 1.0)).is_err());
    }

    #[test]
    fn oversized_step_is_flagged() {
        let rho0 = Ket::qutrit_levels(&[2]).to_density();
        let cs = ChannelSet::ladder_indistinguishable(50.0, 1.0).unwrap();
        let r = master_evolve(&rho0, &cs, None, &SimParams { dt: 0.2, t_max: 2.0, record_stride: 1, ..SimParams::default() });
        assert!(matches!(r, Err(QecError::Numerical(_))));
    }
}
