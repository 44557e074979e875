//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string so the page needs no generated
//! TypeScript types. The `*_json` functions hold the logic and are plain
//! Rust, which keeps them testable off the browser.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use qutrit_feedback::analysis::{classify_regime, nojump_negativity, Classification, InitialCoeffs};
use qutrit_feedback::channels::{ChannelSet, Structure};
use qutrit_feedback::harness::{ExperimentConfig, InitialState};
use qutrit_feedback::qcore::{negativity, Cut};
use qutrit_feedback::trajectories::{ensemble_run, no_jump_propagate, EventKind};
use qutrit_feedback::Result;

const MAX_POINTS: usize = 2000;

#[derive(Serialize)]
struct Curve {
    times: Vec<f64>,
    propagated: Vec<f64>,
    closed_form: Vec<f64>,
}

#[derive(Serialize)]
struct Marker {
    time: f64,
    kind: &'static str,
    site: usize,
    before: f64,
    after: f64,
}

#[derive(Serialize)]
struct Trajectory {
    times: Vec<f64>,
    negativity: Vec<f64>,
    events: Vec<Marker>,
    time_averaged: f64,
}

#[derive(Serialize)]
struct Regime {
    sudden_changes: Option<u8>,
    terminal: String,
    a: f64,
    b: f64,
    c: f64,
}

fn parse_structure(name: &str) -> Result<Structure> {
    name.parse()
}

/// Negativity of `a|00⟩ + b|11⟩ + c|22⟩` conditioned on no detector click,
/// from direct propagation and from the closed form.
pub fn nojump_curve_json(structure: &str, a: f64, b: f64, c: f64, t_max: f64, points: usize) -> Result<String> {
    let s = parse_structure(structure)?;
    let coeffs = InitialCoeffs::normalized(a, b, c)?;
    let cs = ChannelSet::structure_ops(s, 1.0, 1.0)?.on_each_site(2)?;
    let psi = coeffs.ket();
    let points = points.clamp(2, MAX_POINTS);
    let mut curve = Curve { times: Vec::new(), propagated: Vec::new(), closed_form: Vec::new() };
    for i in 0..points {
        let t = t_max * i as f64 / (points - 1) as f64;
        let Ok(out) = no_jump_propagate(&psi, &cs, t) else { break };
        curve.times.push(t);
        curve.propagated.push(negativity(&out.to_density(), &Cut::last_site(2))?);
        curve.closed_form.push(nojump_negativity(s, &coeffs, 1.0, t));
    }
    Ok(serde_json::to_string(&curve).expect("plain data"))
}

/// One jump-feedback trajectory of `(|12⟩+|21⟩)/√2` with delay, efficiency
/// and disorder.
pub fn jump_trajectory_json(tau: f64, eta: f64, delta_var: f64, seed: u64, t_max: f64) -> Result<String> {
    let cfg = ExperimentConfig {
        experiment: "web".into(),
        initial_state: InitialState::Bell12_21,
        tau,
        eta,
        delta_var,
        seed,
        t_max,
        dt: 1e-3,
        record_stride: ((t_max / 1e-3).ceil() as usize).div_ceil(MAX_POINTS).max(1),
        n_traj: 1,
        ..ExperimentConfig::default()
    };
    let result = ensemble_run(&cfg, 1)?;
    let rec = result.single.as_ref().expect("single trajectory keeps its record");
    let events = rec
        .events
        .iter()
        .map(|e| Marker {
            time: e.time,
            kind: match e.kind {
                EventKind::Jump => "jump",
                EventKind::FeedbackApplied => "feedback",
            },
            site: e.site,
            before: e.negativity_before,
            after: e.negativity_after,
        })
        .collect();
    let out = Trajectory {
        time_averaged: result.time_averaged_negativity(),
        times: result.times,
        negativity: result.mean_negativity,
        events,
    };
    Ok(serde_json::to_string(&out).expect("plain data"))
}

/// Sudden-change regime of the unconditional dynamics.
pub fn classify_json(structure: &str, a: f64, b: f64, c: f64) -> Result<String> {
    let s = parse_structure(structure)?;
    let coeffs = InitialCoeffs::normalized(a, b, c)?;
    let (sudden_changes, terminal) = match classify_regime(s, &coeffs) {
        Classification::Regime(l) => (Some(l.sudden_changes), l.terminal.name().to_string()),
        Classification::Boundary(why) => (None, format!("boundary ({why})")),
    };
    let r = Regime { sudden_changes, terminal, a: coeffs.a(), b: coeffs.b(), c: coeffs.c() };
    Ok(serde_json::to_string(&r).expect("plain data"))
}

fn to_js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = nojumpCurve)]
pub fn nojump_curve(structure: &str, a: f64, b: f64, c: f64, t_max: f64, points: usize) -> std::result::Result<String, JsError> {
    to_js(nojump_curve_json(structure, a, b, c, t_max, points))
}

#[wasm_bindgen(js_name = jumpTrajectory)]
pub fn jump_trajectory(tau: f64, eta: f64, delta_var: f64, seed: u64, t_max: f64) -> std::result::Result<String, JsError> {
    to_js(jump_trajectory_json(tau, eta, delta_var, seed, t_max))
}

#[wasm_bindgen(js_name = classifyRegime)]
pub fn classify(structure: &str, a: f64, b: f64, c: f64) -> std::result::Result<String, JsError> {
    to_js(classify_json(structure, a, b, c))
}
