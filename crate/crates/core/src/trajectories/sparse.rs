use nalgebra::{DMatrix, DVector};

use crate::qcore::C64;

/// Coordinate-form sparse matrix for the structured superoperators of small
/// registers, where most entries vanish.
#[derive(Clone, Debug)]
pub(crate) struct SparseMatrix {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseMatrix {
    pub(crate) fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut entries = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        Self { dim: m.nrows(), entries }
    }

    pub(crate) fn mul_into(&self, x: &DVector<C64>, out: &mut DVector<C64>) {
        out.fill(C64::new(0.0, 0.0));
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }
}
