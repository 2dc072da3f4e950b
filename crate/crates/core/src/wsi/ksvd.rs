//! K-SVD dictionary learning.
//!
//! Each sweep updates the atoms one at a time in index order: the residual
//! restricted to an atom's users is re-approximated by its leading singular
//! pair (power iteration started from the current atom), then unused atoms
//! are reset to the worst-reconstructed word vector and every word is
//! re-encoded. A word keeps its previous code when pursuit does not beat it,
//! so the mean squared residual never increases from sweep to sweep.

use log::{debug, warn};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::lexicon::EmbeddingMatrix;
use crate::linalg;

use super::omp::{omp_encode, refit_support, residual};
use super::{Atoms, SparseCode, WsiConfig, WsiModel};

const POWER_ITERATIONS: usize = 100;
const POWER_TOLERANCE: f64 = 1e-13;

/// `v - sum_i c_i a_i` for one word.
pub fn reconstruction_residual(v: &[f64], atoms: &Atoms, code: &SparseCode) -> Vec<f64> {
    residual(v, atoms, code)
}

fn initial_atoms(data: &EmbeddingMatrix, cfg: &WsiConfig, rng: &mut ChaCha8Rng) -> Atoms {
    let n = data.len();
    let d = data.dim();
    let mut buf = Vec::with_capacity(cfg.k * d);
    let picked = sample(rng, n, cfg.k.min(n));
    for i in picked.iter() {
        buf.extend_from_slice(data.row(crate::lexicon::WordId(i)));
    }
    if cfg.k > n {
        warn!("only {n} word vectors for {} atoms; filling the rest with random unit vectors", cfg.k);
        for _ in n..cfg.k {
            let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            if !linalg::normalize(&mut v) {
                v[0] = 1.0;
            }
            buf.extend_from_slice(&v);
        }
    }
    Atoms { dim: d, data: buf }
}

struct Encoded {
    code: SparseCode,
    residual: Vec<f64>,
    sq_err: f64,
}

fn encode_word(v: &[f64], atoms: &Atoms, s: usize, previous: Option<&SparseCode>) -> Result<Encoded> {
    let fresh = omp_encode(v, atoms, s)?;
    let mut best = fresh.code;
    let mut best_res = residual(v, atoms, &best);
    let mut best_err = linalg::dot(&best_res, &best_res);

    if let Some(prev) = previous {
        let support: Vec<usize> = prev.iter().map(|&(i, _)| i).collect();
        let mut alternatives = vec![prev.clone()];
        if let Some(refit) = refit_support(v, atoms, &support) {
            alternatives.push(refit.code);
        }
        for alt in alternatives {
            let r = residual(v, atoms, &alt);
            let e = linalg::dot(&r, &r);
            if e < best_err {
                best = alt;
                best_res = r;
                best_err = e;
            }
        }
    }
    Ok(Encoded {
        code: best,
        residual: best_res,
        sq_err: best_err,
    })
}

fn encode_all(
    data: &EmbeddingMatrix,
    atoms: &Atoms,
    s: usize,
    previous: Option<&[SparseCode]>,
) -> Result<Vec<Encoded>> {
    (0..data.len())
        .into_par_iter()
        .map(|w| {
            let prev = previous.map(|p| &p[w]);
            encode_word(data.row(crate::lexicon::WordId(w)), atoms, s, prev)
        })
        .collect()
}

fn mean_sq(encoded: &[Encoded]) -> f64 {
    if encoded.is_empty() {
        return 0.0;
    }
    encoded.iter().map(|e| e.sq_err).sum::<f64>() / encoded.len() as f64
}

/// Replaces atom `j` by the leading left singular vector of the residual
/// restricted to its users, updating codes and residuals in place.
fn update_atom(j: usize, users: &[usize], atoms: &mut Atoms, codes: &mut [SparseCode], residuals: &mut [Vec<f64>]) {
    let d = atoms.dim();
    let slot = |code: &SparseCode| code.iter().position(|&(i, _)| i == j).expect("user holds atom");

    // E restricted to users: residual + current contribution of atom j
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(users.len());
    for &u in users {
        let c = codes[u][slot(&codes[u])].1;
        let mut e = residuals[u].clone();
        linalg::axpy(c, atoms.row(j), &mut e);
        cols.push(e);
    }

    let mut x = atoms.row(j).to_vec();
    for _ in 0..POWER_ITERATIONS {
        let mut y = vec![0.0; d];
        for e in &cols {
            linalg::axpy(linalg::dot(e, &x), e, &mut y);
        }
        if !linalg::normalize(&mut y) {
            break;
        }
        let delta: f64 = y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        x = y;
        if delta < POWER_TOLERANCE {
            break;
        }
    }

    let mut g: Vec<f64> = cols.iter().map(|e| linalg::dot(e, &x)).collect();
    // orient the atom so its users weigh it positively on balance
    if g.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
        g.iter_mut().for_each(|v| *v = -*v);
    }

    atoms.row_mut(j).copy_from_slice(&x);
    for ((&u, e), gu) in users.iter().zip(cols).zip(g) {
        let k = slot(&codes[u]);
        codes[u][k].1 = gu;
        let mut r = e;
        linalg::axpy(-gu, &x, &mut r);
        residuals[u] = r;
    }
}

/// Learns `cfg.k` unit atoms and `cfg.s`-sparse codes for every row.
pub fn ksvd_fit(data: &EmbeddingMatrix, cfg: &WsiConfig) -> Result<WsiModel> {
    cfg.validate()?;
    let n = data.len();
    if n < cfg.k {
        warn!("vocabulary size {n} is below the atom count {}", cfg.k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut atoms = initial_atoms(data, cfg, &mut rng);

    let encoded = encode_all(data, &atoms, cfg.s, None)?;
    let mut mse_history = vec![mean_sq(&encoded)];
    let (mut codes, mut residuals): (Vec<SparseCode>, Vec<Vec<f64>>) =
        encoded.into_iter().map(|e| (e.code, e.residual)).unzip();

    for it in 0..cfg.iterations {
        let mut users: Vec<Vec<usize>> = vec![Vec::new(); cfg.k];
        for (w, code) in codes.iter().enumerate() {
            for &(i, _) in code {
                users[i].push(w);
            }
        }

        for (j, us) in users.iter().enumerate() {
            if !us.is_empty() {
                update_atom(j, us, &mut atoms, &mut codes, &mut residuals);
            }
        }

        let stale: Vec<usize> = (0..cfg.k).filter(|&j| users[j].len() < cfg.reinit_threshold).collect();
        if !stale.is_empty() && n > 0 {
            for &j in &stale {
                for &u in &users[j] {
                    if let Some(pos) = codes[u].iter().position(|&(i, _)| i == j) {
                        let (_, c) = codes[u].remove(pos);
                        linalg::axpy(c, atoms.row(j), &mut residuals[u]);
                    }
                }
            }
            let mut order: Vec<(usize, f64)> = residuals
                .iter()
                .enumerate()
                .map(|(w, r)| (w, linalg::dot(r, r)))
                .collect();
            order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (&j, &(w, _)) in stale.iter().zip(order.iter().cycle()) {
                atoms
                    .row_mut(j)
                    .copy_from_slice(data.row(crate::lexicon::WordId(w)));
            }
        }

        let encoded = encode_all(data, &atoms, cfg.s, Some(&codes))?;
        let mse = mean_sq(&encoded);
        debug!("k-svd sweep {}: mse {mse:.6e}, {} atoms reset", it + 1, stale.len());
        mse_history.push(mse);
        (codes, residuals) = encoded.into_iter().map(|e| (e.code, e.residual)).unzip();
    }

    let residual_norms = residuals.iter().map(|r| linalg::norm(r)).collect();
    Ok(WsiModel {
        config: *cfg,
        atoms,
        codes,
        residual_norms,
        mse_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{Embeddings, WordId};

    fn random_unit_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                linalg::normalize(&mut v);
                v
            })
            .collect()
    }

    fn embeddings(rows: &[Vec<f64>]) -> Embeddings {
        let pairs: Vec<(String, Vec<f64>)> = rows.iter().enumerate().map(|(i, r)| (format!("w{i}"), r.clone())).collect();
        Embeddings::from_pairs(&pairs).unwrap()
    }

    #[test]
    fn zero_iterations_keeps_initial_atoms() {
        let e = embeddings(&random_unit_rows(40, 6, 1));
        let cfg = WsiConfig { k: 8, s: 2, iterations: 0, seed: 3, reinit_threshold: 1 };
        let m = ksvd_fit(&e.matrix, &cfg).unwrap();
        assert_eq!(m.mse_history.len(), 1);
        for j in 0..8 {
            let atom = m.atoms.row(j);
            assert!((0..40).any(|w| e.vector(WordId(w)) == atom));
        }
        for (w, code) in m.codes.iter().enumerate() {
            let r = reconstruction_residual(e.vector(WordId(w)), &m.atoms, code);
            assert!((linalg::norm(&r) - m.residual_norms[w]).abs() < 1e-6);
        }
    }

    #[test]
    fn invariants_hold_after_training() {
        let e = embeddings(&random_unit_rows(120, 8, 2));
        let cfg = WsiConfig { k: 16, s: 3, iterations: 10, seed: 5, reinit_threshold: 1 };
        let m = ksvd_fit(&e.matrix, &cfg).unwrap();
        for j in 0..16 {
            assert!((linalg::norm(m.atoms.row(j)) - 1.0).abs() < 1e-6);
        }
        for (w, code) in m.codes.iter().enumerate() {
            assert!(code.len() <= 3);
            let r = reconstruction_residual(e.vector(WordId(w)), &m.atoms, code);
            assert!((linalg::norm(&r) - m.residual_norms[w]).abs() < 1e-6);
            assert!(m.residual_norms[w] <= 1.0 + 1e-9);
        }
        for pair in m.mse_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "{:?}", m.mse_history);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let e = embeddings(&random_unit_rows(60, 5, 9));
        let cfg = WsiConfig { k: 10, s: 2, iterations: 5, seed: 11, reinit_threshold: 1 };
        assert_eq!(ksvd_fit(&e.matrix, &cfg).unwrap(), ksvd_fit(&e.matrix, &cfg).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        let e = embeddings(&random_unit_rows(5, 3, 1));
        assert!(ksvd_fit(&e.matrix, &WsiConfig { k: 0, ..Default::default() }).is_err());
        assert!(ksvd_fit(&e.matrix, &WsiConfig { k: 2, s: 3, ..Default::default() }).is_err());
    }

    #[test]
    fn more_atoms_than_words() {
        let e = embeddings(&random_unit_rows(4, 3, 1));
        let cfg = WsiConfig { k: 6, s: 2, iterations: 3, seed: 0, reinit_threshold: 1 };
        let m = ksvd_fit(&e.matrix, &cfg).unwrap();
        assert_eq!(m.atoms.len(), 6);
    }
}
