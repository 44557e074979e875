//! Dense complex linear algebra for registers of a few qutrits, plus the
//! partial-transpose based entanglement measures.
//!
//! Basis ordering is row-major over sites: for two qutrits `|i⟩⊗|j⟩` sits at
//! index `3i + j`. Every other module relies on this.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{QecError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Eigenvalues of a partial transpose above `-EPS_ZERO` are treated as zero.
pub const EPS_ZERO: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-10;

fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// A linear operator on a register with the given local dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: Vec<usize>,
    mat: DMatrix<C64>,
}

/// A state vector, not necessarily normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    dims: Vec<usize>,
    amps: DVector<C64>,
}

/// A density matrix. Constructors accept unnormalized matrices (the tilde
/// states of conditional evolution); [`DensityMatrix::validate`] checks the
/// physical invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    mat: DMatrix<C64>,
}

impl Operator {
    pub fn new(dims: Vec<usize>, mat: DMatrix<C64>) -> Result<Self> {
        let d = total_dim(&dims);
        if mat.nrows() != d || mat.ncols() != d {
            return Err(QecError::Shape(format!(
                "operator is {}x{}, dims {:?} require {d}x{d}",
                mat.nrows(),
                mat.ncols(),
                dims
            )));
        }
        Ok(Self { dims, mat })
    }

    /// Single-qutrit (or qudit) operator from a dense matrix.
    pub fn local(mat: DMatrix<C64>) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "operator must be square");
        Self { dims: vec![mat.nrows()], mat }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = total_dim(dims);
        Self { dims: dims.to_vec(), mat: DMatrix::identity(d, d) }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let d = total_dim(dims);
        Self { dims: dims.to_vec(), mat: DMatrix::zeros(d, d) }
    }

    /// `|i⟩⟨j|` on a single site of dimension `d`.
    pub fn ketbra(d: usize, i: usize, j: usize) -> Self {
        let mut mat = DMatrix::zeros(d, d);
        mat[(i, j)] = ONE;
        Self { dims: vec![d], mat }
    }

    /// Real diagonal operator on one site.
    pub fn diag(entries: &[f64]) -> Self {
        let d = entries.len();
        let mut mat = DMatrix::zeros(d, d);
        for (k, &v) in entries.iter().enumerate() {
            mat[(k, k)] = C64::new(v, 0.0);
        }
        Self { dims: vec![d], mat }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { dims: self.dims.clone(), mat: self.mat.adjoint() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dims: self.dims.clone(), mat: &self.mat * s }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Operator) -> Self {
        assert_eq!(self.dims, other.dims, "dims mismatch in operator sum");
        Self { dims: self.dims.clone(), mat: &self.mat + &other.mat }
    }

    pub fn sub(&self, other: &Operator) -> Self {
        assert_eq!(self.dims, other.dims, "dims mismatch in operator difference");
        Self { dims: self.dims.clone(), mat: &self.mat - &other.mat }
    }

    pub fn mul(&self, other: &Operator) -> Self {
        assert_eq!(self.dims, other.dims, "dims mismatch in operator product");
        Self { dims: self.dims.clone(), mat: &self.mat * &other.mat }
    }

    pub fn apply(&self, ket: &Ket) -> Ket {
        assert_eq!(self.dims, ket.dims, "dims mismatch applying operator");
        Ket { dims: ket.dims.clone(), amps: &self.mat * &ket.amps }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    /// Largest absolute deviation of `A - A†` from zero.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.mat - self.mat.adjoint()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Largest absolute deviation of `U†U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        max_abs(&(self.mat.adjoint() * &self.mat - DMatrix::<C64>::identity(d, d)))
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        max_abs(&(&self.mat - &other.mat))
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn anticommutator(&self, other: &Operator) -> Self {
        self.mul(other).add(&other.mul(self))
    }

    /// Real eigenvalues of a Hermitian operator, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let err = self.hermiticity_error();
        if err > HERMITIAN_TOL * self.norm().max(1.0) {
            return Err(QecError::NotHermitian(err));
        }
        Ok(hermitian_eigenvalues(&self.mat))
    }
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

impl Ket {
    pub fn new(dims: Vec<usize>, amps: DVector<C64>) -> Result<Self> {
        let d = total_dim(&dims);
        if amps.len() != d {
            return Err(QecError::Shape(format!(
                "ket has {} amplitudes, dims {:?} require {d}",
                amps.len(),
                dims
            )));
        }
        Ok(Self { dims, amps })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), amps: DVector::zeros(total_dim(dims)) }
    }

    /// Product basis state `|l₀ l₁ …⟩` of qutrits.
    pub fn qutrit_levels(levels: &[usize]) -> Self {
        let dims = vec![3; levels.len()];
        let mut ket = Self::zeros(&dims);
        let idx = levels.iter().fold(0, |acc, &l| {
            assert!(l < 3, "qutrit level out of range");
            3 * acc + l
        });
        ket.amps[idx] = ONE;
        ket
    }

    /// Normalized superposition `Σ cₖ |levelsₖ⟩` of qutrit product states.
    pub fn qutrit_superposition(terms: &[(C64, &[usize])]) -> Self {
        assert!(!terms.is_empty());
        let mut ket = Self::zeros(&vec![3; terms[0].1.len()]);
        for (c, levels) in terms {
            let b = Self::qutrit_levels(levels);
            ket.amps += b.amps * *c;
        }
        ket.normalized()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut DVector<C64> {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self { dims: self.dims.clone(), amps: &self.amps / C64::new(n, 0.0) }
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() < 1e-12
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { dims: self.dims.clone(), mat: &self.amps * self.amps.adjoint() }
    }

    /// Distance to `other` after removing the best global phase; both kets are
    /// normalized first.
    pub fn phase_insensitive_distance(&self, other: &Ket) -> f64 {
        let a = self.normalized();
        let b = other.normalized();
        let ov = a.inner(&b);
        let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { ONE };
        (&b.amps - &a.amps * phase).norm()
    }
}

impl DensityMatrix {
    pub fn new(dims: Vec<usize>, mat: DMatrix<C64>) -> Result<Self> {
        Operator::new(dims, mat).map(|op| Self { dims: op.dims, mat: op.mat })
    }

    pub fn from_ket(ket: &Ket) -> Self {
        ket.to_density()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn as_operator(&self) -> Operator {
        Operator { dims: self.dims.clone(), mat: self.mat.clone() }
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn normalized(&self) -> Self {
        let tr = self.trace();
        Self { dims: self.dims.clone(), mat: &self.mat / C64::new(tr, 0.0) }
    }

    /// Hermitian within 1e-10, unit trace within 1e-9, smallest eigenvalue
    /// above -1e-9.
    pub fn validate(&self) -> Result<()> {
        let herm = max_abs(&(&self.mat - self.mat.adjoint()));
        if herm > HERMITIAN_TOL {
            return Err(QecError::NotHermitian(herm));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(QecError::Numerical(format!("trace {tr} differs from 1")));
        }
        let min_ev = hermitian_eigenvalues(&self.mat)[0];
        if min_ev < -1e-9 {
            return Err(QecError::Numerical(format!("negative eigenvalue {min_ev:.3e}")));
        }
        Ok(())
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized ket.
    pub fn fidelity_to_pure(&self, psi: &Ket) -> f64 {
        psi.amps.dotc(&(&self.mat * &psi.amps)).re
    }

    /// `‖self − other‖₁`.
    pub fn trace_distance_norm(&self, other: &DensityMatrix) -> f64 {
        hermitian_eigenvalues(&(&self.mat - &other.mat)).iter().map(|x| x.abs()).sum()
    }

    pub fn conjugate_by(&self, u: &Operator) -> Self {
        Self { dims: self.dims.clone(), mat: &u.mat * &self.mat * u.mat.adjoint() }
    }
}

/// Kronecker product with dims concatenated.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, mat: self.mat.kronecker(&other.mat) }
    }
}

impl Tensor for Ket {
    fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, amps: self.amps.kronecker(&other.amps) }
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, mat: self.mat.kronecker(&other.mat) }
    }
}

pub fn tensor_product<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// Split a flat index into per-site digits (row-major).
fn digits(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
}

fn flat(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

fn check_site(site: usize, n_sites: usize) -> Result<()> {
    if site >= n_sites {
        Err(QecError::InvalidSite { site, n_sites })
    } else {
        Ok(())
    }
}

fn partial_transpose_sites(mat: &DMatrix<C64>, dims: &[usize], sites: &[usize]) -> DMatrix<C64> {
    let d = mat.nrows();
    let n = dims.len();
    let mut out = DMatrix::zeros(d, d);
    let mut ri = vec![0; n];
    let mut ci = vec![0; n];
    for r in 0..d {
        digits(r, dims, &mut ri);
        for c in 0..d {
            digits(c, dims, &mut ci);
            let (mut rr, mut cc) = (ri.clone(), ci.clone());
            for &s in sites {
                std::mem::swap(&mut rr[s], &mut cc[s]);
            }
            out[(flat(&rr, dims), flat(&cc, dims))] = mat[(r, c)];
        }
    }
    out
}

/// Partial transpose of `rho` over one site.
pub fn partial_transpose(rho: &DensityMatrix, site: usize) -> Result<Operator> {
    check_site(site, rho.dims.len())?;
    Ok(Operator {
        dims: rho.dims.clone(),
        mat: partial_transpose_sites(&rho.mat, &rho.dims, &[site]),
    })
}

/// The transposed side of a bipartition: the listed sites are transposed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cut {
    sites: Vec<usize>,
}

impl Cut {
    pub fn new(sites: Vec<usize>) -> Self {
        Self { sites }
    }

    /// Last site against the rest; for two qutrits this is the A|B cut.
    pub fn last_site(n_sites: usize) -> Self {
        Self { sites: vec![n_sites - 1] }
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }
}

fn pt_spectrum(rho: &DensityMatrix, cut: &Cut) -> Result<Vec<f64>> {
    for &s in &cut.sites {
        check_site(s, rho.dims.len())?;
    }
    let herm = max_abs(&(&rho.mat - rho.mat.adjoint()));
    if herm > HERMITIAN_TOL {
        return Err(QecError::NotHermitian(herm));
    }
    Ok(hermitian_eigenvalues(&partial_transpose_sites(&rho.mat, &rho.dims, &cut.sites)))
}

/// Negativity `‖ρ^{T_B}‖₁ − tr ρ`, i.e. twice the summed magnitude of the
/// negative partial-transpose eigenvalues. The maximally entangled qutrit pair
/// scores 2.
pub fn negativity(rho: &DensityMatrix, cut: &Cut) -> Result<f64> {
    Ok(negativity_from_spectrum(&pt_spectrum(rho, cut)?))
}

pub(crate) fn negativity_from_spectrum(spectrum: &[f64]) -> f64 {
    -2.0 * spectrum.iter().filter(|&&x| x < 0.0).sum::<f64>()
}

/// Full partial-transpose spectrum, ascending.
pub fn pt_eigenvalues(rho: &DensityMatrix, cut: &Cut) -> Result<Vec<f64>> {
    pt_spectrum(rho, cut)
}

/// Partial-transpose eigenvalues below `-EPS_ZERO`, ascending.
pub fn pt_negative_spectrum(rho: &DensityMatrix, cut: &Cut) -> Result<Vec<f64>> {
    Ok(pt_spectrum(rho, cut)?.into_iter().filter(|&x| x < -EPS_ZERO).collect())
}

/// Negativity and negative spectrum from a single eigensolve.
pub fn pt_summary(rho: &DensityMatrix, cut: &Cut) -> Result<(f64, Vec<f64>)> {
    let spec = pt_spectrum(rho, cut)?;
    let neg = negativity_from_spectrum(&spec);
    Ok((neg, spec.into_iter().filter(|&x| x < -EPS_ZERO).collect()))
}

/// `exp(A)` by scaling and squaring with a Padé approximant.
pub fn matrix_exponential(a: &Operator) -> Operator {
    if a.mat.iter().all(|z| *z == ZERO) {
        return Operator::identity(&a.dims);
    }
    Operator { dims: a.dims.clone(), mat: a.mat.clone().exp() }
}

/// Reduced state on the `keep` sites (kept in ascending order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let n = rho.dims.len();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    for &s in &keep {
        check_site(s, n)?;
    }
    if keep.is_empty() {
        return Err(QecError::Shape("partial trace must keep at least one site".into()));
    }
    let kept_dims: Vec<usize> = keep.iter().map(|&s| rho.dims[s]).collect();
    let dk = total_dim(&kept_dims);
    let d = rho.dim();
    let mut out = DMatrix::zeros(dk, dk);
    let mut ri = vec![0; n];
    let mut ci = vec![0; n];
    let mut rk = vec![0; keep.len()];
    let mut ck = vec![0; keep.len()];
    for r in 0..d {
        digits(r, &rho.dims, &mut ri);
        for c in 0..d {
            digits(c, &rho.dims, &mut ci);
            let traced_match = (0..n).filter(|s| !keep.contains(s)).all(|s| ri[s] == ci[s]);
            if !traced_match {
                continue;
            }
            for (k, &s) in keep.iter().enumerate() {
                rk[k] = ri[s];
                ck[k] = ci[s];
            }
            out[(flat(&rk, &kept_dims), flat(&ck, &kept_dims))] += rho.mat[(r, c)];
        }
    }
    Ok(DensityMatrix { dims: kept_dims, mat: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bell12() -> Ket {
        Ket::qutrit_superposition(&[(ONE, &[1, 2]), (ONE, &[2, 1])])
    }

    fn ghz3() -> Ket {
        Ket::qutrit_superposition(&[(ONE, &[0, 0]), (ONE, &[1, 1]), (ONE, &[2, 2])])
    }

    #[test]
    fn identity_tensor_identity() {
        let i3 = Operator::identity(&[3]);
        assert_eq!(i3.tensor(&i3), Operator::identity(&[3, 3]));
    }

    #[test]
    fn basis_ordering() {
        let k = Ket::qutrit_levels(&[1]).tensor(&Ket::qutrit_levels(&[2]));
        assert_eq!(k.amplitudes()[5], ONE);
        assert_eq!(k.amplitudes().iter().filter(|z| **z != ZERO).count(), 1);
    }

    #[test]
    fn ketbra_tensor_identity_acts_on_first_site() {
        let op = Operator::ketbra(3, 1, 2).tensor(&Operator::identity(&[3]));
        let out = op.apply(&Ket::qutrit_levels(&[2, 0]));
        assert_eq!(out, Ket::qutrit_levels(&[1, 0]));
    }

    #[test]
    fn pt_of_bell_has_single_negative_half() {
        let rho = bell12().to_density();
        assert_eq!(pt_negative_spectrum(&rho, &Cut::last_site(2)).unwrap().len(), 1);
        assert_abs_diff_eq!(
            pt_negative_spectrum(&rho, &Cut::last_site(2)).unwrap()[0],
            -0.5,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(negativity(&rho, &Cut::last_site(2)).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn maximally_entangled_pair_scores_two() {
        let rho = ghz3().to_density();
        let spec = pt_negative_spectrum(&rho, &Cut::last_site(2)).unwrap();
        assert_eq!(spec.len(), 3);
        for x in spec {
            assert_abs_diff_eq!(x, -1.0 / 3.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(negativity(&rho, &Cut::last_site(2)).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn product_state_has_positive_pt() {
        let a = Ket::qutrit_superposition(&[(ONE, &[0]), (C64::new(0.3, 0.4), &[2])]).to_density();
        let b = Ket::qutrit_superposition(&[(ONE, &[1]), (I, &[2])]).to_density();
        let rho = a.tensor(&b);
        let pt = partial_transpose(&rho, 1).unwrap();
        assert!(pt.hermitian_eigenvalues().unwrap()[0] > -1e-12);
        assert!(pt_negative_spectrum(&rho, &Cut::last_site(2)).unwrap().is_empty());
    }

    #[test]
    fn partial_transpose_rejects_bad_site() {
        let rho = bell12().to_density();
        assert!(matches!(partial_transpose(&rho, 2), Err(QecError::InvalidSite { .. })));
    }

    #[test]
    fn negativity_rejects_non_hermitian() {
        let mut rho = bell12().to_density();
        rho.matrix_mut()[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(negativity(&rho, &Cut::last_site(2)), Err(QecError::NotHermitian(_))));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(matrix_exponential(&Operator::zeros(&[3])), Operator::identity(&[3]));
    }

    #[test]
    fn exp_of_rotation_generator_is_cyclic_permutation() {
        // generator of rotations about (1,1,1); eigenvalues 0, ±i√3
        let mut a = DMatrix::<C64>::zeros(3, 3);
        for (i, j) in [(2, 1), (1, 0), (0, 2)] {
            a[(i, j)] = ONE;
            a[(j, i)] = -ONE;
        }
        let theta = 2.0 * std::f64::consts::PI / (3.0 * 3f64.sqrt());
        let u = matrix_exponential(&Operator::local(a).scale_real(theta));
        let perm = Operator::ketbra(3, 2, 1)
            .add(&Operator::ketbra(3, 1, 0))
            .add(&Operator::ketbra(3, 0, 2));
        assert!(u.max_abs_diff(&perm) < 1e-12);
    }

    #[test]
    fn exp_of_diagonal() {
        let a = Operator::diag(&[0.0, 1.0, 0.0]).scale(I * std::f64::consts::PI);
        assert!(matrix_exponential(&a).max_abs_diff(&Operator::diag(&[1.0, -1.0, 1.0])) < 1e-12);
    }

    #[test]
    fn partial_trace_cases() {
        let a = Ket::qutrit_superposition(&[(ONE, &[0]), (ONE, &[1])]).to_density();
        let b = Ket::qutrit_levels(&[2]).to_density();
        let rho = a.tensor(&b);
        let red = partial_trace(&rho, &[0]).unwrap();
        assert!(max_abs(&(red.matrix() - a.matrix())) < 1e-14);

        let red = partial_trace(&bell12().to_density(), &[0]).unwrap();
        let expect = Operator::diag(&[0.0, 0.5, 0.5]);
        assert!(max_abs(&(red.matrix() - expect.matrix())) < 1e-14);

        let full = partial_trace(&rho, &[0, 1]).unwrap();
        assert_eq!(full, rho);
        assert!(partial_trace(&rho, &[3]).is_err());
    }

    fn random_ket(seed: &[f64]) -> Ket {
        let amps = DVector::from_iterator(3, (0..3).map(|k| C64::new(seed[2 * k], seed[2 * k + 1])));
        Ket::new(vec![3], amps).unwrap().normalized()
    }

    fn random_density(dims: Vec<usize>, entries: &[f64]) -> DensityMatrix {
        let d: usize = dims.iter().product();
        let g = DMatrix::from_fn(d, d, |i, j| C64::new(entries[(i * d + j) % entries.len()], entries[(j * d + i + 7) % entries.len()]));
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityMatrix::new(dims, m / tr).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn product_states_have_zero_negativity(
            x in prop::collection::vec(-1.0f64..1.0, 6),
            y in prop::collection::vec(-1.0f64..1.0, 6),
        ) {
            prop_assume!(x.iter().any(|v| v.abs() > 1e-3) && y.iter().any(|v| v.abs() > 1e-3));
            let rho = random_ket(&x).tensor(&random_ket(&y)).to_density();
            prop_assert!(negativity(&rho, &Cut::last_site(2)).unwrap() < 1e-10);
        }

        #[test]
        fn partial_transpose_is_an_involution(e in prop::collection::vec(-1.0f64..1.0, 40)) {
            let rho = random_density(vec![3, 3], &e);
            let once = partial_transpose(&rho, 1).unwrap();
            let twice = partial_transpose(&DensityMatrix::new(vec![3, 3], once.into_matrix()).unwrap(), 1).unwrap();
            prop_assert_eq!(twice.matrix(), rho.matrix());
        }

        #[test]
        fn negativity_matches_negative_spectrum(e in prop::collection::vec(-1.0f64..1.0, 40)) {
            let rho = random_density(vec![3, 3], &e);
            let cut = Cut::last_site(2);
            let n = negativity(&rho, &cut).unwrap();
            let s: f64 = pt_negative_spectrum(&rho, &cut).unwrap().iter().sum();
            prop_assert!((n + 2.0 * s).abs() < 1e-10);
        }

        #[test]
        fn exp_inverse_pair(e in prop::collection::vec(-1.0f64..1.0, 18), scale in 0.0f64..5.0) {
            let m = DMatrix::from_fn(3, 3, |i, j| C64::new(e[3 * i + j], e[9 + 3 * i + j]));
            let norm = m.norm();
            prop_assume!(norm > 1e-6);
            let a = Operator::local(m * C64::new(scale / norm, 0.0));
            let prod = matrix_exponential(&a).mul(&matrix_exponential(&a.scale_real(-1.0)));
            prop_assert!(prod.max_abs_diff(&Operator::identity(&[3])) < 1e-10);
        }
    }
}
