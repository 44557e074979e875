use qutrit_feedback::channels::ChannelSet;
use qutrit_feedback::codes::jump_code;
use qutrit_feedback::harness::{ExperimentConfig, InitialState, Unraveling};
use qutrit_feedback::qcore::{DensityMatrix, Ket, ONE};
use qutrit_feedback::trajectories::{
    ensemble_map, ensemble_run, master_evolve, rng::trajectory_rng, DiffusionEngine, JumpEngine, SimParams, State,
};

fn ladder2() -> ChannelSet {
    ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap().on_each_site(2).unwrap()
}

#[test]
fn delay_only_degrades_balanced_excited_pair() {
    let params = SimParams { dt: 1e-3, t_max: 6.0, tau: 0.5, record_stride: 5, ..SimParams::default() };
    let code = jump_code(1.0).unwrap();
    let engine = JumpEngine::new(&ladder2(), Some(&code), &params).unwrap();
    let state: State = Ket::qutrit_superposition(&[(ONE, &[1, 1]), (ONE, &[2, 2])]).into();
    let mut jumps = 0;
    for i in 0..40 {
        let rec = engine.run(&state, &mut trajectory_rng(3, i)).unwrap();
        jumps += rec.jumps().count();
        let negs = rec.negativities();
        for w in negs.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "trajectory {i}: {} -> {}", w[0], w[1]);
        }
        for e in &rec.events {
            assert!(e.negativity_after <= e.negativity_before + 1e-9);
        }
    }
    assert!(jumps > 40);
}

#[test]
fn mixed_states_stay_physical() {
    let params =
        SimParams { dt: 1e-3, t_max: 2.0, eta: 0.7, tau: 0.2, delta_var: 0.1, record_stride: 50, record_states: true, ..SimParams::default() };
    let code = jump_code(1.0).unwrap();
    let engine = JumpEngine::new(&ladder2(), Some(&code), &params).unwrap();
    let state: State = Ket::qutrit_superposition(&[(ONE, &[1, 2]), (ONE, &[2, 1])]).into();
    for i in 0..5 {
        let rec = engine.run(&state, &mut trajectory_rng(9, i)).unwrap();
        for rho in &rec.states {
            let m = rho.matrix();
            assert!((rho.trace() - 1.0).abs() < 1e-9);
            assert!((m - m.adjoint()).map(|z| z.norm()).max() < 1e-9);
        }
    }
}

#[test]
fn inefficient_unravelings_average_to_master_equation() {
    let n = 800;
    let params =
        SimParams { dt: 2e-3, t_max: 2.0, eta: 0.6, record_stride: 250, record_states: true, ..SimParams::default() };
    let cs = ladder2();
    let psi = Ket::qutrit_superposition(&[(ONE, &[1, 2]), (ONE, &[2, 1])]);
    let state: State = psi.clone().into();
    let master = master_evolve(&psi.to_density(), &cs, None, &params).unwrap();
    let jump = JumpEngine::new(&cs, None, &params).unwrap();
    let diff = DiffusionEngine::new(&cs, None, &params).unwrap();
    for (name, runs) in [
        ("jump", ensemble_map(n, |i| jump.run(&state, &mut trajectory_rng(1, i as u64)).unwrap().states)),
        ("diffusion", ensemble_map(n, |i| diff.run(&state, &mut trajectory_rng(2, i as u64)).unwrap().states)),
    ] {
        for (j, exact) in master.states.iter().enumerate() {
            let dims = exact.dims().to_vec();
            let mut mean = exact.matrix() * qutrit_feedback::qcore::C64::new(0.0, 0.0);
            for r in &runs {
                mean += r[j].matrix();
            }
            mean /= qutrit_feedback::qcore::C64::new(n as f64, 0.0);
            let avg = DensityMatrix::new(dims, mean).unwrap();
            let err = avg.trace_distance_norm(exact);
            // 1/√n scale with a generous prefactor
            assert!(err < 6.0 / (n as f64).sqrt(), "{name} at t = {}: {err}", master.times[j]);
        }
    }
}

#[test]
fn ensembles_are_reproducible() {
    let cfg = ExperimentConfig { t_max: 1.0, n_traj: 12, eta: 0.9, tau: 0.1, seed: 5, ..ExperimentConfig::default() };
    let a = ensemble_run(&cfg, 12).unwrap();
    let b = ensemble_run(&cfg, 12).unwrap();
    assert_eq!(a.mean_negativity, b.mean_negativity);
    assert_eq!(a.stderr, b.stderr);
    let c = ensemble_run(&ExperimentConfig { seed: 6, ..cfg }, 12).unwrap();
    assert_ne!(a.mean_negativity, c.mean_negativity);
}

#[test]
fn single_trajectory_mean_is_the_trajectory() {
    let cfg = ExperimentConfig { t_max: 2.0, n_traj: 1, seed: 2, ..ExperimentConfig::default() };
    let res = ensemble_run(&cfg, 1).unwrap();
    assert_eq!(res.mean_negativity, res.single.as_ref().unwrap().negativities());
    assert!(res.stderr.iter().all(|&s| s == 0.0));
}

#[test]
fn unconditional_run_replicates_master() {
    let cfg = ExperimentConfig {
        unraveling: Unraveling::None,
        feedback: false,
        initial_state: InitialState::Plus11_22,
        t_max: 1.0,
        n_traj: 3,
        ..ExperimentConfig::default()
    };
    let res = ensemble_run(&cfg, 3).unwrap();
    assert!(res.stderr.iter().all(|&s| s < 1e-12));
    assert!(res.mean_negativity[0] > 0.99);
    assert!(res.mean_negativity.last().unwrap() < &res.mean_negativity[0]);
}

#[test]
fn diffusion_feedback_protects_better_than_none() {
    let base = ExperimentConfig {
        unraveling: Unraveling::Diffusion,
        initial_state: InitialState::Bell00_22,
        dt: 1e-3,
        t_max: 1.0,
        n_traj: 20,
        ..ExperimentConfig::default()
    };
    let on = ensemble_run(&base, 20).unwrap();
    let off = ensemble_run(&ExperimentConfig { feedback: false, ..base }, 20).unwrap();
    assert!(on.mean_negativity.last().unwrap() > &0.98);
    assert!(off.mean_negativity.last().unwrap() < &0.9);
}
