//! The two local error-correction codes: jump-based recycling on the
//! codespace `{|1⟩,|2⟩}` and diffusion-based stabilizer feedback on
//! `{|0⟩,|2⟩}`, with their algebraic verifiers.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{QecError, Result};
use crate::qcore::{matrix_exponential, Operator, C64, I, ONE};

/// Tolerance for the proportionality residuals of the recycling conditions.
pub const PROPORTIONALITY_TOL: f64 = 1e-10;
/// Tolerance for Hermiticity and unitarity checks.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CodeKind {
    Jump,
    Diffusion,
}

/// Codespace plus the feedback machinery protecting it. All operators act on
/// a single qutrit; the trajectory engines embed them per site.
#[derive(Clone, Debug)]
pub struct CodeSpec {
    pub kind: CodeKind,
    pub gamma: f64,
    pub channel: Operator,
    pub codespace_projector: Operator,
    /// Recycling unitary `R` (jump code).
    pub recycler: Option<Operator>,
    /// Hermitian feedback generator `F`.
    pub feedback_generator: Operator,
    /// Constant drive `H = −½(Π†F + FΠ)` (diffusion code).
    pub drive: Option<Operator>,
    /// Stabilizer `S` with the codespace as its +1 eigenspace (diffusion code).
    pub stabilizer: Option<Operator>,
    /// `|λ|` of the jump-code feedback strength; zero for the diffusion code.
    pub lambda_mag: f64,
}

/// Magnitude of the jump-code feedback strength, `2π/(3√3) ≈ 1.2092`.
pub fn jump_lambda_mag() -> f64 {
    2.0 * PI / (3.0 * 3f64.sqrt())
}

impl CodeSpec {
    /// `exp(−i·scale·F)`. With `scale = 1` and the jump code this is `R`.
    pub fn feedback_unitary(&self, scale: f64) -> Operator {
        matrix_exponential(&self.feedback_generator.scale(-I * scale))
    }

    /// Feedback scale for a disorder sample `δ`: the generator becomes
    /// `(1 + δ/|λ|)F`.
    pub fn disorder_scale(&self, delta: f64) -> f64 {
        if self.lambda_mag > 0.0 {
            1.0 + delta / self.lambda_mag
        } else {
            1.0
        }
    }

    /// Check the invariants every code must satisfy.
    pub fn check_invariants(&self) -> Result<()> {
        let p = &self.codespace_projector;
        if p.mul(p).max_abs_diff(p) > STRUCTURE_TOL || !p.is_hermitian(STRUCTURE_TOL) {
            return Err(QecError::Numerical("codespace projector is not an orthogonal projector".into()));
        }
        if !self.feedback_generator.is_hermitian(STRUCTURE_TOL) {
            return Err(QecError::NotHermitian(self.feedback_generator.hermiticity_error()));
        }
        if let Some(r) = &self.recycler {
            if r.unitarity_error() > STRUCTURE_TOL {
                return Err(QecError::Numerical("recycler is not unitary".into()));
            }
        }
        if let Some(s) = &self.stabilizer {
            if s.mul(s).max_abs_diff(&Operator::identity(s.dims())) > STRUCTURE_TOL {
                return Err(QecError::Numerical("stabilizer does not square to identity".into()));
            }
        }
        Ok(())
    }
}

fn ladder(gamma: f64) -> Operator {
    Operator::ketbra(3, 1, 2)
        .add(&Operator::ketbra(3, 0, 1))
        .scale_real(gamma.sqrt())
}

/// Jump-based recycling code for `Π = √γ(|1⟩⟨2| + |0⟩⟨1|)`.
///
/// `F = λA` with `A = (Π† − Π)/√γ + |0⟩⟨2| − |2⟩⟨0|` anti-Hermitian and `λ`
/// purely imaginary. The sign of `λ` is the one for which `exp(−iF) = R`.
pub fn jump_code(gamma: f64) -> Result<CodeSpec> {
    if !(gamma > 0.0) {
        return Err(QecError::param("gamma", format!("must be positive, got {gamma}")));
    }
    let pi = ladder(gamma);
    let sg = gamma.sqrt();
    let p_c = Operator::diag(&[0.0, 1.0, 1.0]);
    let recycler = pi.adjoint().scale_real(1.0 / sg).add(&Operator::ketbra(3, 0, 2));
    let generator = pi
        .adjoint()
        .sub(&pi)
        .scale_real(1.0 / sg)
        .add(&Operator::ketbra(3, 0, 2))
        .sub(&Operator::ketbra(3, 2, 0));
    let mag = jump_lambda_mag();

    let mut chosen = None;
    for sign in [1.0, -1.0] {
        let f = generator.scale(I * (sign * mag));
        let u = matrix_exponential(&f.scale(-I));
        if u.max_abs_diff(&recycler) < PROPORTIONALITY_TOL {
            chosen = Some(f);
            break;
        }
    }
    let feedback_generator = chosen
        .ok_or_else(|| QecError::Numerical("no sign of lambda reproduces the recycler".into()))?;

    let code = CodeSpec {
        kind: CodeKind::Jump,
        gamma,
        channel: pi,
        codespace_projector: p_c,
        recycler: Some(recycler),
        feedback_generator,
        drive: None,
        stabilizer: None,
        lambda_mag: mag,
    };
    code.check_invariants()?;
    Ok(code)
}

#[derive(Clone, Debug, Serialize)]
pub struct RecyclabilityReport {
    pub ok: bool,
    /// Best `c₁` in `Π†Π ≈ c₁ P_C`.
    pub dissipation_constant: C64,
    pub dissipation_residual: f64,
    /// Best `c₂` in `RΠ ≈ c₂ P_C`.
    pub recycling_constant: C64,
    pub recycling_residual: f64,
    pub unitarity_error: f64,
}

/// Least-squares `c` minimizing `‖M − cP‖_F`, and the residual.
fn proportionality(m: &Operator, p: &Operator) -> (C64, f64) {
    let pp: C64 = p.matrix().dotc(p.matrix());
    if pp.norm() == 0.0 {
        return (C64::new(0.0, 0.0), m.norm());
    }
    let c = p.matrix().dotc(m.matrix()) / pp;
    (c, m.sub(&p.scale(c)).norm())
}

/// Deterministic reversibility of a jump: `Π†Π ∝ P_C` and `RΠ ∝ P_C` with
/// `R` unitary.
pub fn verify_recyclability(pi: &Operator, p_c: &Operator, r: &Operator) -> RecyclabilityReport {
    let (c1, res1) = proportionality(&pi.adjoint().mul(pi), p_c);
    let (c2, res2) = proportionality(&r.mul(pi), p_c);
    let unit = r.unitarity_error();
    RecyclabilityReport {
        ok: res1 < PROPORTIONALITY_TOL
            && res2 < PROPORTIONALITY_TOL
            && unit < STRUCTURE_TOL
            && c1.norm() > PROPORTIONALITY_TOL,
        dissipation_constant: c1,
        dissipation_residual: res1,
        recycling_constant: c2,
        recycling_residual: res2,
        unitarity_error: unit,
    }
}

/// `Π = M + X + iY` with `M = tr(Π)/d · I` and `X`, `Y` Hermitian.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub m: Operator,
    pub x: Operator,
    pub y: Operator,
}

impl Decomposition {
    pub fn reconstruct(&self) -> Operator {
        self.m.add(&self.x).add(&self.y.scale(I))
    }
}

pub fn operator_decompose(pi: &Operator) -> Decomposition {
    let d = pi.dim() as f64;
    let m = Operator::identity(pi.dims()).scale(pi.trace() / d);
    let rest = pi.sub(&m);
    let x = rest.add(&rest.adjoint()).scale_real(0.5);
    let y = rest.sub(&rest.adjoint()).scale(C64::new(0.0, -0.5));
    Decomposition { m, x, y }
}

/// Diffusion-based code: stabilizer `S = diag(1, −1, 1)`, feedback
/// `F = Y − iXS` and drive `H = −½(Π†F + FΠ)` on the codespace `{|0⟩,|2⟩}`.
pub fn diffusion_code(gamma: f64) -> Result<CodeSpec> {
    if !(gamma > 0.0) {
        return Err(QecError::param("gamma", format!("must be positive, got {gamma}")));
    }
    let pi = ladder(gamma);
    let Decomposition { x, y, .. } = operator_decompose(&pi);
    let s = Operator::diag(&[1.0, -1.0, 1.0]);
    let f = y.sub(&x.mul(&s).scale(I));
    // F is Hermitian because S anticommutes with X; symmetrize away rounding.
    let f = f.add(&f.adjoint()).scale_real(0.5);
    let h = pi.adjoint().mul(&f).add(&f.mul(&pi)).scale_real(-0.5);
    let h = h.add(&h.adjoint()).scale_real(0.5);
    let code = CodeSpec {
        kind: CodeKind::Diffusion,
        gamma,
        channel: pi,
        codespace_projector: Operator::diag(&[1.0, 0.0, 1.0]),
        recycler: None,
        feedback_generator: f,
        drive: Some(h),
        stabilizer: Some(s),
        lambda_mag: 0.0,
    };
    code.check_invariants()?;
    Ok(code)
}

#[derive(Clone, Debug, Serialize)]
pub struct NoGoReport {
    pub candidates_checked: usize,
    /// Candidates anticommuting with the qubit `X`.
    pub anticommuting: usize,
    /// Candidates that also stabilize a two-dimensional codespace.
    pub admissible: usize,
    pub notes: Vec<String>,
}

/// Scan involutions `S` on a qubit (`±I` and `n̂·σ⃗` over a Bloch-sphere
/// grid) for one that anticommutes with `X = (√γ/2)(|0⟩⟨1| + h.c.)` while
/// fixing a two-dimensional codespace. None exists.
pub fn qubit_no_go_check(grid: usize) -> NoGoReport {
    let x = Operator::ketbra(2, 0, 1).add(&Operator::ketbra(2, 1, 0)).scale_real(0.5);
    let sx = Operator::ketbra(2, 0, 1).add(&Operator::ketbra(2, 1, 0));
    let sy = Operator::ketbra(2, 0, 1).scale(-I).add(&Operator::ketbra(2, 1, 0).scale(I));
    let sz = Operator::diag(&[1.0, -1.0]);
    let id = Operator::identity(&[2]);

    let mut candidates = vec![id.clone(), id.scale_real(-1.0)];
    let grid = grid.max(2);
    for i in 0..=grid {
        let theta = PI * i as f64 / grid as f64;
        for j in 0..(2 * grid) {
            let phi = PI * j as f64 / grid as f64;
            let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            candidates.push(sx.scale_real(n[0]).add(&sy.scale_real(n[1])).add(&sz.scale_real(n[2])));
        }
    }

    let mut anticommuting = 0;
    let mut admissible = 0;
    for s in &candidates {
        let anti = s.anticommutator(&x).norm() < 1e-9;
        if !anti {
            continue;
        }
        anticommuting += 1;
        let ev = s.hermitian_eigenvalues().expect("candidates are Hermitian");
        let plus_dim = ev.iter().filter(|&&e| (e - 1.0).abs() < 1e-9).count();
        if plus_dim >= 2 {
            admissible += 1;
        }
    }
    let notes = vec![
        "S = ±I commutes with X, so SX + XS = ±2X ≠ 0".to_string(),
        format!(
            "{anticommuting} grid directions anticommute with X (n̂ ⊥ x̂), each with a one-dimensional +1 eigenspace"
        ),
        "no qubit involution fixes a two-dimensional codespace while anticommuting with X".to_string(),
    ];
    NoGoReport { candidates_checked: candidates.len(), anticommuting, admissible, notes }
}

/// `[I − (γdt/2 + Xq)(I − S)]`, the single conditional step of the diffusion
/// code with drive and feedback folded in.
pub fn diffusion_step_operator(code: &CodeSpec, dt: f64, q: f64) -> Result<Operator> {
    let s = code
        .stabilizer
        .as_ref()
        .ok_or_else(|| QecError::param("code", "diffusion step needs a stabilizer"))?;
    let x = operator_decompose(&code.channel).x;
    let id = Operator::identity(s.dims());
    let factor = id.scale_real(code.gamma * dt / 2.0).add(&x.scale_real(q));
    Ok(id.sub(&factor.mul(&id.sub(s))))
}

/// Matrix of a single-qutrit real permutation, for tests and reports.
pub fn is_permutation(op: &Operator) -> bool {
    let m: &DMatrix<C64> = op.matrix();
    let d = m.nrows();
    let ones = m.iter().filter(|z| (**z - ONE).norm() < 1e-14).count();
    let zeros = m.iter().filter(|z| z.norm() < 1e-14).count();
    ones == d
        && zeros == d * d - d
        && (0..d).all(|i| (0..d).filter(|&j| (m[(i, j)] - ONE).norm() < 1e-14).count() == 1)
        && (0..d).all(|j| (0..d).filter(|&i| (m[(i, j)] - ONE).norm() < 1e-14).count() == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::ChannelSet;
    use crate::qcore::{Ket, ZERO};
    use proptest::prelude::*;

    #[test]
    fn jump_code_algebra() {
        let code = jump_code(1.0).unwrap();
        let r = code.recycler.as_ref().unwrap();
        let p = &code.codespace_projector;
        assert!(code.channel.adjoint().mul(&code.channel).max_abs_diff(p) < 1e-14);
        assert!(r.mul(&code.channel).max_abs_diff(p) < 1e-14);
        assert!(code.feedback_unitary(1.0).max_abs_diff(r) < 1e-10);
        assert!((code.lambda_mag - 1.2092).abs() < 1e-4);
        assert!(is_permutation(r));
        assert!(r.mul(r).mul(r).max_abs_diff(&Operator::identity(&[3])) < 1e-15);
    }

    #[test]
    fn jump_code_recycles_codespace_for_any_gamma() {
        for gamma in [0.5, 1.0, 3.0] {
            let code = jump_code(gamma).unwrap();
            let u = code.feedback_unitary(1.0);
            for level in [1, 2] {
                let psi = Ket::qutrit_levels(&[level]);
                let out = u.apply(&code.channel.apply(&psi));
                let expect = psi.amplitudes() * C64::new(gamma.sqrt(), 0.0);
                assert!((out.amplitudes() - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn feedback_generator_is_hermitian_with_imaginary_lambda() {
        let code = jump_code(2.0).unwrap();
        assert!(code.feedback_generator.is_hermitian(1e-14));
        // purely imaginary entries: F = iθA with A real
        assert!(code.feedback_generator.matrix().iter().all(|z| z.re.abs() < 1e-15));
    }

    #[test]
    fn recyclability_reports() {
        let code = jump_code(1.0).unwrap();
        let r = code.recycler.clone().unwrap();
        let ok = verify_recyclability(&code.channel, &code.codespace_projector, &r);
        assert!(ok.ok);
        assert!((ok.dissipation_constant - ONE).norm() < 1e-12);
        assert!((ok.recycling_constant - ONE).norm() < 1e-12);

        let unbalanced = ChannelSet::ladder_indistinguishable(1.0, 2.0).unwrap();
        let bad = verify_recyclability(&unbalanced.channels()[0].op, &code.codespace_projector, &r);
        assert!(!bad.ok);
        assert!(bad.dissipation_residual > 0.1);

        let id = Operator::identity(&[3]);
        let bad = verify_recyclability(&code.channel, &code.codespace_projector, &id);
        assert!(!bad.ok);
    }

    #[test]
    fn decomposition_of_emission_operator() {
        let pi = ladder(1.0);
        let d = operator_decompose(&pi);
        assert!(d.m.norm() < 1e-15);
        let x = Operator::ketbra(3, 1, 2)
            .add(&Operator::ketbra(3, 0, 1))
            .add(&Operator::ketbra(3, 2, 1))
            .add(&Operator::ketbra(3, 1, 0))
            .scale_real(0.5);
        let y = Operator::ketbra(3, 1, 2)
            .add(&Operator::ketbra(3, 0, 1))
            .scale(-I)
            .add(&Operator::ketbra(3, 2, 1).add(&Operator::ketbra(3, 1, 0)).scale(I))
            .scale_real(0.5);
        assert!(d.x.max_abs_diff(&x) < 1e-15);
        assert!(d.y.max_abs_diff(&y) < 1e-15);
    }

    #[test]
    fn decomposition_of_identity() {
        let d = operator_decompose(&Operator::identity(&[3]));
        assert!(d.m.max_abs_diff(&Operator::identity(&[3])) < 1e-15);
        assert!(d.x.norm() < 1e-15 && d.y.norm() < 1e-15);
    }

    #[test]
    fn diffusion_code_algebra() {
        let code = diffusion_code(1.0).unwrap();
        let s = code.stabilizer.as_ref().unwrap();
        let d = operator_decompose(&code.channel);
        assert_eq!(s.anticommutator(&d.x).norm(), 0.0);
        assert!(code.feedback_generator.is_hermitian(1e-14));
        let l = code.channel.sub(&code.feedback_generator.scale(I));
        let id = Operator::identity(&[3]);
        assert!(l.max_abs_diff(&d.x.mul(&id.sub(s))) < 1e-15);
        assert!(l.mul(&code.codespace_projector).norm() < 1e-15);
    }

    #[test]
    fn diffusion_generator_collapses_to_stabilizer_form() {
        // ½Π†Π + iH + iFΠ + F²/2 = (γ/2)(I − S)
        let gamma = 1.7;
        let code = diffusion_code(gamma).unwrap();
        let (pi, f, h) = (&code.channel, &code.feedback_generator, code.drive.as_ref().unwrap());
        let lhs = pi
            .adjoint()
            .mul(pi)
            .scale_real(0.5)
            .add(&h.scale(I))
            .add(&f.mul(pi).scale(I))
            .add(&f.mul(f).scale_real(0.5));
        let id = Operator::identity(&[3]);
        let rhs = id.sub(code.stabilizer.as_ref().unwrap()).scale_real(gamma / 2.0);
        assert!(lhs.max_abs_diff(&rhs) < 1e-14);
    }

    #[test]
    fn qubit_no_go() {
        let report = qubit_no_go_check(24);
        assert_eq!(report.admissible, 0);
        assert!(report.anticommuting > 0);

        let x = Operator::ketbra(2, 0, 1).add(&Operator::ketbra(2, 1, 0));
        let id = Operator::identity(&[2]);
        assert!(id.anticommutator(&x).max_abs_diff(&x.scale_real(2.0)) < 1e-15);
        let sz = Operator::diag(&[1.0, -1.0]);
        assert_eq!(sz.anticommutator(&x).norm(), 0.0);
    }

    proptest! {
        #[test]
        fn decomposition_reconstructs(e in prop::collection::vec(-2.0f64..2.0, 18)) {
            let m = DMatrix::from_fn(3, 3, |i, j| C64::new(e[3 * i + j], e[9 + 3 * i + j]));
            let op = Operator::local(m);
            let d = operator_decompose(&op);
            prop_assert!(d.reconstruct().max_abs_diff(&op) < 1e-14);
            prop_assert!(d.x.is_hermitian(1e-15) && d.y.is_hermitian(1e-15));
            let again = operator_decompose(&d.reconstruct());
            prop_assert!(again.x.max_abs_diff(&d.x) < 1e-14 && again.y.max_abs_diff(&d.y) < 1e-14);
        }

        #[test]
        fn diffusion_single_step_fixes_codespace(q in -3.0f64..3.0, dt in 1e-5f64..1e-1, re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let code = diffusion_code(1.0).unwrap();
            let step = diffusion_step_operator(&code, dt, q).unwrap();
            let psi = Ket::qutrit_superposition(&[(ONE, &[0]), (C64::new(re, im), &[2])]);
            let out = step.apply(&psi);
            prop_assert!((out.amplitudes() - psi.amplitudes()).norm() < 1e-14);
            prop_assert_eq!(out.amplitudes()[1], ZERO);
        }
    }
}
