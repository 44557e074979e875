use crate::channels::ChannelSet;
use crate::error::{QecError, Result};
use crate::qcore::{matrix_exponential, Ket};

/// Norms below this after propagation count as a fully decayed state.
const NORM_FLOOR: f64 = 1e-150;

/// Conditional state when no detector has fired up to time `t`:
/// `exp(H_eff t)ψ₀` renormalized, with `H_eff = −½ΣΠ†Π`.
pub fn no_jump_propagate(psi0: &Ket, cs: &ChannelSet, t: f64) -> Result<Ket> {
    if psi0.dims() != cs.dims().as_slice() {
        return Err(QecError::Shape(format!("state dims {:?} vs channels {:?}", psi0.dims(), cs.dims())));
    }
    if !(t >= 0.0) {
        return Err(QecError::param("t", format!("must be non-negative, got {t}")));
    }
    if !psi0.is_normalized() {
        return Err(QecError::param("psi0", "must be normalized"));
    }
    let g = matrix_exponential(&cs.effective_hamiltonian().scale_real(t));
    let out = Ket::new(psi0.dims().to_vec(), g.matrix() * psi0.amplitudes())?;
    let n = out.norm();
    if !(n > NORM_FLOOR) {
        return Err(QecError::Numerical(format!("no-jump state decayed away by t = {t}")));
    }
    Ok(out.normalized())
}
