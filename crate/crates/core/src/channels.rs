//! Collapse-operator families: the decay ladder with its imperfection knobs
//! and the E/V/Λ level structures, plus embedding into multi-qutrit registers.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QecError, Result};
use crate::qcore::{Operator, Tensor, C64};

/// One monitored decay channel.
#[derive(Clone, Debug)]
pub struct Channel {
    pub label: String,
    pub op: Operator,
    pub site: usize,
}

/// Labeled collapse operators with rates absorbed, plus the knobs they were
/// built from.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    channels: Vec<Channel>,
    n_sites: usize,
    pub gamma: f64,
    /// Distinguishability of the two ladder transitions; `None` when the
    /// channel set is not a split ladder.
    pub alpha: Option<f64>,
    pub beta: f64,
}

/// Qutrit level structure with two distinguishable decay channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structure {
    /// Cascade `|2⟩ → |1⟩ → |0⟩`.
    #[serde(rename = "E")]
    Cascade,
    /// Both upper levels decay to the ground state.
    #[serde(rename = "V")]
    Vee,
    /// The top level decays to either lower level.
    #[serde(rename = "Lambda")]
    Lambda,
}

impl Structure {
    pub const ALL: [Structure; 3] = [Structure::Cascade, Structure::Vee, Structure::Lambda];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Cascade => "E",
            Structure::Vee => "V",
            Structure::Lambda => "Lambda",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = QecError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "E" | "e" | "cascade" => Ok(Structure::Cascade),
            "V" | "v" | "vee" => Ok(Structure::Vee),
            "Lambda" | "lambda" | "L" | "Λ" => Ok(Structure::Lambda),
            other => Err(QecError::param("structure", format!("unknown structure `{other}`"))),
        }
    }
}

fn check_rate(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(QecError::param(name, format!("must be positive, got {v}")))
    }
}

/// `√γ(√β |1⟩⟨2| + |0⟩⟨1|)` and its split variants are all of this shape.
fn ladder_op(upper: f64, lower: f64) -> Operator {
    Operator::ketbra(3, 1, 2)
        .scale_real(upper)
        .add(&Operator::ketbra(3, 0, 1).scale_real(lower))
}

impl ChannelSet {
    fn single(channels: Vec<(String, Operator)>, gamma: f64, alpha: Option<f64>, beta: f64) -> Self {
        Self {
            channels: channels.into_iter().map(|(label, op)| Channel { label, op, site: 0 }).collect(),
            n_sites: 1,
            gamma,
            alpha,
            beta,
        }
    }

    /// A set with no channels on `n_sites` qutrits.
    pub fn empty(n_sites: usize) -> Self {
        Self { channels: Vec::new(), n_sites, gamma: 1.0, alpha: None, beta: 1.0 }
    }

    /// Indistinguishable ladder `Π = √γ(√β|1⟩⟨2| + |0⟩⟨1|)`.
    pub fn ladder_indistinguishable(gamma: f64, beta: f64) -> Result<Self> {
        check_rate("gamma", gamma)?;
        check_rate("beta", beta)?;
        let op = ladder_op((gamma * beta).sqrt(), gamma.sqrt());
        Ok(Self::single(vec![("Pi".into(), op)], gamma, None, beta))
    }

    /// Ladder split into two detectors with distinguishability `alpha`:
    /// `Π₂ = √γ(√α|1⟩⟨2| + √(1−α)|0⟩⟨1|)`, `Π₁` with `α ↔ 1−α`.
    pub fn ladder_split(gamma: f64, alpha: f64) -> Result<Self> {
        Self::ladder_combined(gamma, alpha, 1.0)
    }

    /// Split ladder with unbalanced upper rate:
    /// `Π₂ = √γ(√(αβ)|1⟩⟨2| + √(1−α)|0⟩⟨1|)`, `Π₁ = √γ(√((1−α)β)|1⟩⟨2| + √α|0⟩⟨1|)`.
    pub fn ladder_combined(gamma: f64, alpha: f64, beta: f64) -> Result<Self> {
        check_rate("gamma", gamma)?;
        check_rate("beta", beta)?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(QecError::param("alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        let g = gamma.sqrt();
        let p1 = ladder_op(g * ((1.0 - alpha) * beta).sqrt(), g * alpha.sqrt());
        let p2 = ladder_op(g * (alpha * beta).sqrt(), g * (1.0 - alpha).sqrt());
        Ok(Self::single(vec![("Pi1".into(), p1), ("Pi2".into(), p2)], gamma, Some(alpha), beta))
    }

    /// The two distinguishable channels of an E, V or Λ qutrit.
    pub fn structure_ops(kind: Structure, gamma1: f64, gamma2: f64) -> Result<Self> {
        check_rate("gamma1", gamma1)?;
        check_rate("gamma2", gamma2)?;
        let (s1, s2) = (gamma1.sqrt(), gamma2.sqrt());
        let (o1, o2, name) = match kind {
            Structure::Cascade => (Operator::ketbra(3, 0, 1), Operator::ketbra(3, 1, 2), "E"),
            Structure::Vee => (Operator::ketbra(3, 0, 1), Operator::ketbra(3, 0, 2), "V"),
            Structure::Lambda => (Operator::ketbra(3, 0, 2), Operator::ketbra(3, 1, 2), "Lambda"),
        };
        Ok(Self::single(
            vec![(format!("{name}1"), o1.scale_real(s1)), (format!("{name}2"), o2.scale_real(s2))],
            gamma1,
            None,
            1.0,
        ))
    }

    /// Copies of a single-site set on every site of an `n_sites` register.
    pub fn on_each_site(&self, n_sites: usize) -> Result<Self> {
        let mut out = Self { channels: Vec::new(), n_sites, ..self.clone() };
        for site in 0..n_sites {
            out.channels.extend(embed(self, site, n_sites)?.channels);
        }
        Ok(out)
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![3; self.n_sites]
    }

    pub fn operators(&self) -> impl Iterator<Item = &Operator> {
        self.channels.iter().map(|c| &c.op)
    }

    /// `Σₖ Πₖ†Πₖ`.
    pub fn total_dissipation(&self) -> Operator {
        let mut acc = Operator::zeros(&self.dims());
        for c in &self.channels {
            acc = acc.add(&c.op.adjoint().mul(&c.op));
        }
        acc
    }

    /// No-detection generator `−½ Σₖ Πₖ†Πₖ`.
    pub fn effective_hamiltonian(&self) -> Operator {
        self.total_dissipation().scale_real(-0.5)
    }
}

/// Place every (single-site) operator of `cs` at `site` in an `n_sites`
/// register: `I ⊗ … ⊗ op ⊗ … ⊗ I`.
pub fn embed(cs: &ChannelSet, site: usize, n_sites: usize) -> Result<ChannelSet> {
    if site >= n_sites {
        return Err(QecError::InvalidSite { site, n_sites });
    }
    if cs.n_sites != 1 {
        return Err(QecError::Shape(format!(
            "embed expects single-site channels, got {} sites",
            cs.n_sites
        )));
    }
    let channels = cs
        .channels
        .iter()
        .map(|c| Channel {
            label: format!("{}@{}", c.label, site),
            op: embed_operator(&c.op, site, n_sites),
            site,
        })
        .collect();
    Ok(ChannelSet { channels, n_sites, ..cs.clone() })
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` at `site`.
pub fn embed_operator(op: &Operator, site: usize, n_sites: usize) -> Operator {
    assert!(site < n_sites, "site out of range");
    let d = op.dim();
    let id = Operator::identity(&[d]);
    let mut acc: Option<Operator> = None;
    for k in 0..n_sites {
        let factor = if k == site { op } else { &id };
        acc = Some(match acc {
            None => factor.clone(),
            Some(a) => a.tensor(factor),
        });
    }
    acc.expect("n_sites > 0")
}

/// Matrix of the dissipator `ρ ↦ Σₖ (ΠₖρΠₖ† − ½{Πₖ†Πₖ, ρ})` acting on
/// column-stacked `vec(ρ)`.
pub fn lindblad_superoperator<'a>(ops: impl IntoIterator<Item = &'a Operator>) -> DMatrix<C64> {
    let mut acc: Option<DMatrix<C64>> = None;
    for op in ops {
        let l = op.matrix();
        let d = l.nrows();
        let id = DMatrix::<C64>::identity(d, d);
        let k = l.adjoint() * l;
        let half = C64::new(0.5, 0.0);
        let term = l.conjugate().kronecker(l) - id.kronecker(&k) * half - k.transpose().kronecker(&id) * half;
        acc = Some(match acc {
            None => term,
            Some(a) => a + term,
        });
    }
    acc.unwrap_or_else(|| DMatrix::zeros(0, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{max_abs, DensityMatrix, Ket, ONE};
    use proptest::prelude::*;

    fn diag(v: &[f64]) -> Operator {
        Operator::diag(v)
    }

    #[test]
    fn ideal_ladder_dissipation_is_codespace_projector() {
        let cs = ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap();
        assert!(cs.total_dissipation().max_abs_diff(&diag(&[0.0, 1.0, 1.0])) < 1e-15);
    }

    #[test]
    fn harmonic_ladder_dissipation() {
        let cs = ChannelSet::ladder_indistinguishable(1.0, 2.0).unwrap();
        assert!(cs.total_dissipation().max_abs_diff(&diag(&[0.0, 1.0, 2.0])) < 1e-15);
    }

    #[test]
    fn ladder_scales_with_sqrt_gamma() {
        let a = ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap();
        let b = ChannelSet::ladder_indistinguishable(4.0, 1.0).unwrap();
        assert!(b.channels()[0].op.max_abs_diff(&a.channels()[0].op.scale_real(2.0)) < 1e-15);
    }

    #[test]
    fn ladder_rejects_bad_parameters() {
        assert!(ChannelSet::ladder_indistinguishable(0.0, 1.0).is_err());
        assert!(ChannelSet::ladder_indistinguishable(1.0, -1.0).is_err());
        assert!(ChannelSet::ladder_split(1.0, 1.5).is_err());
        assert!(ChannelSet::ladder_split(1.0, -0.1).is_err());
    }

    #[test]
    fn split_at_half_reproduces_single_channel_dissipator() {
        let single = ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap();
        let split = ChannelSet::ladder_split(1.0, 0.5).unwrap();
        let l1 = lindblad_superoperator(single.operators());
        let l2 = lindblad_superoperator(split.operators());
        assert!(max_abs(&(l1 - l2)) < 1e-14);
    }

    #[test]
    fn split_at_one_is_perfectly_distinguishable() {
        let cs = ChannelSet::ladder_split(1.0, 1.0).unwrap();
        assert!(cs.channels()[1].op.max_abs_diff(&Operator::ketbra(3, 1, 2)) < 1e-15);
        assert!(cs.channels()[0].op.max_abs_diff(&Operator::ketbra(3, 0, 1)) < 1e-15);
        let swapped = ChannelSet::ladder_split(1.0, 0.0).unwrap();
        assert!(swapped.channels()[0].op.max_abs_diff(&cs.channels()[1].op) < 1e-15);
        assert!(swapped.channels()[1].op.max_abs_diff(&cs.channels()[0].op) < 1e-15);
    }

    #[test]
    fn structure_dissipation() {
        let e = ChannelSet::structure_ops(Structure::Cascade, 1.0, 1.0).unwrap();
        let v = ChannelSet::structure_ops(Structure::Vee, 1.0, 1.0).unwrap();
        let l = ChannelSet::structure_ops(Structure::Lambda, 1.0, 1.0).unwrap();
        assert!(e.total_dissipation().max_abs_diff(&diag(&[0.0, 1.0, 1.0])) < 1e-15);
        assert!(v.total_dissipation().max_abs_diff(&e.total_dissipation()) < 1e-15);
        assert!(l.total_dissipation().max_abs_diff(&diag(&[0.0, 0.0, 2.0])) < 1e-15);
    }

    #[test]
    fn structure_parsing() {
        assert_eq!("E".parse::<Structure>().unwrap(), Structure::Cascade);
        assert_eq!("Λ".parse::<Structure>().unwrap(), Structure::Lambda);
        assert!("X".parse::<Structure>().is_err());
    }

    #[test]
    fn embedding_places_operator_on_site() {
        let cs = ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap();
        let pi = &cs.channels()[0].op;
        let id = Operator::identity(&[3]);
        let e0 = embed(&cs, 0, 2).unwrap();
        let e1 = embed(&cs, 1, 2).unwrap();
        assert_eq!(e0.channels()[0].op, pi.tensor(&id));
        assert_eq!(e1.channels()[0].op, id.tensor(pi));
        assert_eq!(e1.channels()[0].site, 1);
        assert!(embed(&cs, 2, 2).is_err());

        let out = e0.channels()[0].op.apply(&Ket::qutrit_levels(&[2, 2]));
        assert_eq!(out, Ket::qutrit_levels(&[1, 2]));
    }

    #[test]
    fn operators_on_different_sites_commute() {
        let cs = ChannelSet::ladder_split(1.0, 0.3).unwrap().on_each_site(2).unwrap();
        for a in cs.channels().iter().filter(|c| c.site == 0) {
            for b in cs.channels().iter().filter(|c| c.site == 1) {
                assert_eq!(max_abs(a.op.commutator(&b.op).matrix()), 0.0);
                assert_eq!(max_abs(a.op.commutator(&b.op.adjoint()).matrix()), 0.0);
            }
        }
    }

    #[test]
    fn alpha_split_violates_identity_away_from_half() {
        let single = ChannelSet::ladder_indistinguishable(1.0, 1.0).unwrap();
        let split = ChannelSet::ladder_split(1.0, 0.8).unwrap();
        let diff = max_abs(&(lindblad_superoperator(single.operators()) - lindblad_superoperator(split.operators())));
        assert!(diff > 0.1);
    }

    #[test]
    fn superoperator_matches_direct_dissipator() {
        let cs = ChannelSet::ladder_split(1.0, 0.3).unwrap();
        let psi = Ket::qutrit_superposition(&[(ONE, &[0]), (C64::new(0.2, 0.7), &[1]), (ONE, &[2])]);
        let rho: DensityMatrix = psi.to_density();
        let mut direct = DMatrix::<C64>::zeros(3, 3);
        for op in cs.operators() {
            let l = op.matrix();
            let k = l.adjoint() * l;
            direct += l * rho.matrix() * l.adjoint() - (&k * rho.matrix() + rho.matrix() * &k) * C64::new(0.5, 0.0);
        }
        let sup = lindblad_superoperator(cs.operators());
        let v = nalgebra::DVector::from_column_slice(rho.matrix().as_slice());
        let out = sup * v;
        let out = DMatrix::from_column_slice(3, 3, out.as_slice());
        assert!(max_abs(&(out - direct)) < 1e-14);
    }

    proptest! {
        #[test]
        fn total_dissipation_independent_of_alpha(alpha in 0.0f64..=1.0, gamma in 0.1f64..5.0) {
            let cs = ChannelSet::ladder_split(gamma, alpha).unwrap();
            prop_assert!(cs.total_dissipation().max_abs_diff(&diag(&[0.0, gamma, gamma])) < 1e-12);
        }
    }
}
