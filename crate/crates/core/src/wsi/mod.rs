//! Linear word-sense induction: every unit word vector is approximated as a
//! sparse combination of `k` unit atoms, `v_w = sum_i R_{w,i} a_i + eta_w`
//! with at most `s` nonzero coefficients, learned by K-SVD.

mod io;
mod ksvd;
mod omp;

pub use io::{read_model, write_model, ModelFormat};
pub use ksvd::{ksvd_fit, reconstruction_residual};
pub use omp::{omp_encode, refit_support, OmpResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::WordId;

pub const DEFAULT_ATOMS: usize = 2000;
pub const DEFAULT_SPARSITY: usize = 4;
pub const DEFAULT_ITERATIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WsiConfig {
    /// Number of atoms.
    pub k: usize,
    /// Maximum nonzero coefficients per word.
    pub s: usize,
    /// K-SVD sweeps.
    pub iterations: usize,
    pub seed: u64,
    /// Atoms used by fewer words than this after a sweep are reinitialized.
    /// Values above 1 drop live code entries and void the monotone-error
    /// guarantee.
    pub reinit_threshold: usize,
}

impl Default for WsiConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_ATOMS,
            s: DEFAULT_SPARSITY,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            reinit_threshold: 1,
        }
    }
}

impl WsiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        if self.s == 0 || self.s > self.k {
            return Err(Error::InvalidConfig(format!(
                "sparsity s must satisfy 0 < s <= k (s = {}, k = {})",
                self.s, self.k
            )));
        }
        Ok(())
    }
}

/// A sparse code: `(atom index, coefficient)` pairs sorted by atom index.
pub type SparseCode = Vec<(usize, f64)>;

/// Row-major `k x d` matrix of unit atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms {
    dim: usize,
    data: Vec<f64>,
}

impl Atoms {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Invalid(format!(
                "atom buffer of length {} does not split into rows of {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Invalid("atoms have inconsistent dimensions".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WsiModel {
    pub config: WsiConfig,
    pub atoms: Atoms,
    /// One code per vocabulary id.
    pub codes: Vec<SparseCode>,
    /// `||v_w - sum_i R_{w,i} a_i||` per word.
    pub residual_norms: Vec<f64>,
    /// Mean squared residual after initialization and after each sweep.
    pub mse_history: Vec<f64>,
}

impl WsiModel {
    pub fn dim(&self) -> usize {
        self.atoms.dim()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, i: usize) -> Result<&[f64]> {
        if i >= self.atoms.len() {
            return Err(Error::Invalid(format!("atom index {i} out of range ({} atoms)", self.atoms.len())));
        }
        Ok(self.atoms.row(i))
    }

    pub fn code(&self, w: WordId) -> Result<&SparseCode> {
        self.codes.get(w.index()).ok_or(Error::UnknownWordId(w.index()))
    }

    pub fn final_mse(&self) -> f64 {
        self.mse_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Atoms with strictly positive coefficient in a code, by descending
/// coefficient (ties: lower atom index).
pub fn positive_atoms(code: &SparseCode) -> Vec<usize> {
    let mut pos: Vec<(usize, f64)> = code.iter().copied().filter(|&(_, c)| c > 0.0).collect();
    pos.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    pos.into_iter().map(|(i, _)| i).collect()
}

/// The senses of `w`: atoms `a_i` with `R_{w,i} > 0`.
pub fn word_atoms(model: &WsiModel, w: WordId) -> Result<Vec<usize>> {
    Ok(positive_atoms(model.code(w)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positive_filter_and_order() {
        assert_eq!(positive_atoms(&vec![(3, 0.9), (8, -0.2)]), vec![3]);
        assert!(positive_atoms(&vec![]).is_empty());
        assert_eq!(positive_atoms(&vec![(3, 0.9), (5, 0.4), (9, 0.1)]), vec![3, 5, 9]);
        assert_eq!(positive_atoms(&vec![(9, 0.1), (3, 0.4), (5, 0.9)]), vec![5, 3, 9]);
        assert_eq!(positive_atoms(&vec![(7, 0.5), (2, 0.5), (1, 0.0)]), vec![2, 7]);
    }

    #[test]
    fn config_validation() {
        assert!(WsiConfig::default().validate().is_ok());
        assert!(WsiConfig { k: 0, ..Default::default() }.validate().is_err());
        assert!(WsiConfig { k: 3, s: 4, ..Default::default() }.validate().is_err());
        assert!(WsiConfig { k: 3, s: 0, ..Default::default() }.validate().is_err());
    }
}
