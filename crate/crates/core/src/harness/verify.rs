use std::fmt;

use serde::Serialize;

use crate::channels::{ChannelSet, Structure};
use crate::codes::{
    diffusion_code, diffusion_step_operator, jump_code, operator_decompose, qubit_no_go_check, verify_recyclability,
    PROPORTIONALITY_TOL, STRUCTURE_TOL,
};
use crate::error::Result;
use crate::qcore::{Ket, Operator, I};

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub gamma: f64,
    /// Branching ratio of the upper transition in the ladder channel.
    pub beta: f64,
    /// Check a distinguishable-channel structure instead of the ladder.
    pub structure: Option<Structure>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { gamma: 1.0, beta: 1.0, structure: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub value: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckLine>,
    pub all_pass: bool,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {}: {}", if c.pass { "ok" } else { "FAIL" }, c.name, c.value)?;
        }
        write!(f, "{}", if self.all_pass { "all checks passed" } else { "some checks failed" })
    }
}

struct Checks(Vec<CheckLine>);

impl Checks {
    fn push(&mut self, name: &str, value: impl Into<String>, pass: bool) {
        self.0.push(CheckLine { name: name.to_string(), value: value.into(), pass });
    }

    fn residual(&mut self, name: &str, r: f64, tol: f64) {
        self.push(name, format!("{r:.3e} (tol {tol:.0e})"), r < tol);
    }
}

/// Run the algebraic checks of both codes, or explain why a distinguishable
/// structure has no codespace.
pub fn verify_codes(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut out = Checks(Vec::new());
    match opts.structure {
        Some(s) => structure_checks(&mut out, s, opts.gamma)?,
        None => {
            jump_checks(&mut out, opts)?;
            diffusion_checks(&mut out, opts.gamma)?;
            let nogo = qubit_no_go_check(24);
            out.push(
                "qubit no-go",
                format!("{} of {} involutions admissible", nogo.admissible, nogo.candidates_checked),
                nogo.admissible == 0,
            );
        }
    }
    let all_pass = out.0.iter().all(|c| c.pass);
    Ok(VerifyReport { checks: out.0, all_pass })
}

fn jump_checks(out: &mut Checks, opts: &VerifyOptions) -> Result<()> {
    let code = jump_code(opts.gamma)?;
    let r = code.recycler.clone().expect("jump code has a recycler");
    out.push(
        "jump lambda",
        format!("|λ| = 2π/(3√3) = {:.10}, F = iθA", code.lambda_mag),
        true,
    );
    out.residual("exp(-iF) = R", code.feedback_unitary(1.0).max_abs_diff(&r), PROPORTIONALITY_TOL);
    let channel = ChannelSet::ladder_indistinguishable(opts.gamma, opts.beta)?;
    let report = verify_recyclability(&channel.channels()[0].op, &code.codespace_projector, &r);
    out.residual("Π†Π ∝ P_C", report.dissipation_residual, PROPORTIONALITY_TOL);
    out.residual("RΠ ∝ P_C", report.recycling_residual, PROPORTIONALITY_TOL);
    out.residual("R unitary", report.unitarity_error, STRUCTURE_TOL);
    if !report.ok {
        out.push("recyclability", format!("violated for beta = {}", opts.beta), false);
    }
    Ok(())
}

fn diffusion_checks(out: &mut Checks, gamma: f64) -> Result<()> {
    let code = diffusion_code(gamma)?;
    let s = code.stabilizer.as_ref().expect("diffusion code has a stabilizer");
    let x = operator_decompose(&code.channel).x;
    out.residual("SX + XS = 0", s.anticommutator(&x).norm(), STRUCTURE_TOL);
    out.residual("F Hermitian", code.feedback_generator.hermiticity_error(), STRUCTURE_TOL);
    let l = code.channel.sub(&code.feedback_generator.scale(I));
    out.residual("(Π − iF)P_C = 0", l.mul(&code.codespace_projector).norm(), STRUCTURE_TOL);
    let mut worst: f64 = 0.0;
    for q in [-1.0, 0.0, 0.3] {
        let step = diffusion_step_operator(&code, 1e-3, q)?;
        for level in [0, 2] {
            let psi = Ket::qutrit_levels(&[level]);
            worst = worst.max((step.apply(&psi).amplitudes() - psi.amplitudes()).norm());
        }
    }
    out.residual("single step fixes codespace", worst, STRUCTURE_TOL);
    Ok(())
}

fn structure_checks(out: &mut Checks, s: Structure, gamma: f64) -> Result<()> {
    let cs = ChannelSet::structure_ops(s, gamma, gamma)?;
    // Each channel is rank one, so Π†Π can never be proportional to a
    // two-dimensional projector.
    let ranks: Vec<usize> = cs.operators().map(|op| rank(&op.adjoint().mul(op))).collect();
    out.push(
        &format!("{s} channels"),
        format!("Π_k†Π_k ranks {ranks:?}; no codespace: channels distinguishable"),
        false,
    );
    Ok(())
}

fn rank(op: &Operator) -> usize {
    op.hermitian_eigenvalues().map_or(0, |ev| ev.iter().filter(|e| e.abs() > 1e-12).count())
}
