use crate::error::{Error, Result};
use crate::linalg;

use super::{Atoms, SparseCode};

/// Residual norm below which pursuit stops early.
const STOP_RESIDUAL: f64 = 1e-6;
/// Correlations this small are treated as orthogonal.
const MIN_CORRELATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    pub code: SparseCode,
    pub residual_norm: f64,
}

/// Least-squares coefficients of `v` on a fixed support. `None` when the
/// support's Gram matrix is singular.
pub fn refit_support(v: &[f64], atoms: &Atoms, support: &[usize]) -> Option<OmpResult> {
    let m = support.len();
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for (i, &a) in support.iter().enumerate() {
        rhs[i] = linalg::dot(atoms.row(a), v);
        for (j, &b) in support.iter().enumerate().take(i + 1) {
            let g = linalg::dot(atoms.row(a), atoms.row(b));
            gram[i * m + j] = g;
            gram[j * m + i] = g;
        }
    }
    let coefs = if m == 0 { Vec::new() } else { linalg::cholesky_solve(&gram, &rhs, m)? };
    let mut code: SparseCode = support.iter().copied().zip(coefs).collect();
    code.sort_by_key(|&(i, _)| i);
    let residual_norm = linalg::norm(&residual(v, atoms, &code));
    Some(OmpResult { code, residual_norm })
}

pub(crate) fn residual(v: &[f64], atoms: &Atoms, code: &SparseCode) -> Vec<f64> {
    let mut r = v.to_vec();
    for &(i, c) in code {
        linalg::axpy(-c, atoms.row(i), &mut r);
    }
    r
}

/// Orthogonal matching pursuit: greedily selects up to `s` atoms by largest
/// absolute correlation with the current residual (ties: lowest index),
/// refitting all coefficients by least squares after each pick.
pub fn omp_encode(v: &[f64], atoms: &Atoms, s: usize) -> Result<OmpResult> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("non-finite input vector".into()));
    }
    if v.len() != atoms.dim() {
        return Err(Error::DimensionMismatch {
            expected: atoms.dim(),
            found: v.len(),
            line: 0,
        });
    }
    let mut current = OmpResult {
        code: Vec::new(),
        residual_norm: linalg::norm(v),
    };
    let mut support: Vec<usize> = Vec::with_capacity(s);
    let mut r = v.to_vec();

    while support.len() < s && current.residual_norm >= STOP_RESIDUAL {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..atoms.len() {
            if support.contains(&i) {
                continue;
            }
            let c = linalg::dot(atoms.row(i), &r).abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        let Some((pick, corr)) = best else { break };
        if corr <= MIN_CORRELATION {
            break;
        }
        support.push(pick);
        match refit_support(v, atoms, &support) {
            Some(next) => {
                r = residual(v, atoms, &next.code);
                current = next;
            }
            None => {
                // the new atom is linearly dependent on the support
                support.pop();
                break;
            }
        }
    }
    Ok(current)
}
