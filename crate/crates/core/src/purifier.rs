//! Sense purification.
//!
//! For a word `w` and one of its atoms `a`, find a cluster `C` containing `w`
//! that maximizes
//!
//! ```text
//! gamma = min( min_{x in C} Median{ v_x . v_y : y in C, y != x },
//!              Median{ a . v_y : y in C } )
//! ```
//!
//! The cluster is grown greedily from `{w}`, adding the candidate with the
//! highest resulting objective until it reaches `n` words. Candidates must
//! have cosine at least `min_cos` with both `v_w` and `a`. A median over an
//! empty set does not constrain `gamma`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{Embeddings, WordId};
use crate::linalg;
use crate::wsi::Atoms;

pub const DEFAULT_CLUSTER_SIZE: usize = 5;
pub const DEFAULT_MIN_COS: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PurifyConfig {
    pub n: usize,
    pub min_cos: f64,
}

impl Default for PurifyConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_CLUSTER_SIZE,
            min_cos: DEFAULT_MIN_COS,
        }
    }
}

impl PurifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("cluster size n must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.min_cos) {
            return Err(Error::InvalidConfig(format!("min_cos {} outside [-1, 1]", self.min_cos)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurifiedCluster {
    /// Cluster members in insertion order; the seed word comes first.
    pub words: Vec<WordId>,
    pub gamma: f64,
    pub atom_index: usize,
    /// Candidates left after the cosine filter.
    pub search_space_size: usize,
}

/// The purification objective `gamma` of `cluster` for the pair `(w, atom)`.
pub fn objective(emb: &Embeddings, cluster: &[WordId], w: WordId, atom: &[f64]) -> Result<f64> {
    if !cluster.contains(&w) {
        return Err(Error::Invalid(format!("word id {} is not in the cluster", w.index())));
    }
    for &x in cluster {
        emb.matrix.get(x)?;
    }
    Ok(objective_unchecked(emb, cluster, atom))
}

fn objective_unchecked(emb: &Embeddings, cluster: &[WordId], atom: &[f64]) -> f64 {
    let mut gamma = f64::INFINITY;
    let mut buf = Vec::with_capacity(cluster.len());
    for (i, &x) in cluster.iter().enumerate() {
        buf.clear();
        buf.extend(
            cluster
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &y)| linalg::dot(emb.vector(x), emb.vector(y))),
        );
        if let Some(m) = linalg::median(&mut buf) {
            gamma = gamma.min(m);
        }
    }
    buf.clear();
    buf.extend(cluster.iter().map(|&y| linalg::dot(atom, emb.vector(y))));
    if let Some(m) = linalg::median(&mut buf) {
        gamma = gamma.min(m);
    }
    gamma
}

/// Greedy purification of `(w, atoms[atom_index])` over `search_space`.
pub fn purify(
    emb: &Embeddings,
    atoms: &Atoms,
    w: WordId,
    atom_index: usize,
    search_space: &[WordId],
    cfg: &PurifyConfig,
) -> Result<PurifiedCluster> {
    cfg.validate()?;
    if atom_index >= atoms.len() {
        return Err(Error::Invalid(format!("atom index {atom_index} out of range")));
    }
    let vw = emb.matrix.get(w)?;
    let atom = atoms.row(atom_index);
    if atom.len() != emb.dim() {
        return Err(Error::DimensionMismatch { expected: emb.dim(), found: atom.len(), line: 0 });
    }

    let mut pool: Vec<WordId> = Vec::with_capacity(search_space.len());
    for &y in search_space {
        let vy = emb.matrix.get(y)?;
        if y != w && linalg::dot(vw, vy) >= cfg.min_cos && linalg::dot(atom, vy) >= cfg.min_cos {
            pool.push(y);
        }
    }
    pool.sort_by(|a, b| emb.vocab.token(*a).cmp(emb.vocab.token(*b)));
    pool.dedup();
    let search_space_size = pool.len();

    let mut cluster = vec![w];
    let mut trial = Vec::with_capacity(cfg.n);
    while cluster.len() < cfg.n && !pool.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for (idx, &y) in pool.iter().enumerate() {
            trial.clear();
            trial.extend_from_slice(&cluster);
            trial.push(y);
            let g = objective_unchecked(emb, &trial, atom);
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((idx, g));
            }
        }
        let (idx, _) = best.expect("pool is nonempty");
        cluster.push(pool.remove(idx));
    }

    let gamma = objective_unchecked(emb, &cluster, atom);
    Ok(PurifiedCluster {
        words: cluster,
        gamma,
        atom_index,
        search_space_size,
    })
}

/// Purifies `w` on each atom and keeps the cluster with the largest `gamma`
/// (ties: lower atom index).
pub fn best_atom_cluster(
    emb: &Embeddings,
    atoms: &Atoms,
    w: WordId,
    atom_indices: &[usize],
    search_space: &[WordId],
    cfg: &PurifyConfig,
) -> Result<(usize, PurifiedCluster)> {
    if atom_indices.is_empty() {
        return Err(Error::Invalid("no atoms to purify on".into()));
    }
    let mut best: Option<PurifiedCluster> = None;
    for &a in atom_indices {
        let c = purify(emb, atoms, w, a, search_space, cfg)?;
        let better = match &best {
            None => true,
            Some(b) => c.gamma > b.gamma || (c.gamma == b.gamma && a < b.atom_index),
        };
        if better {
            best = Some(c);
        }
    }
    let best = best.expect("atom list is nonempty");
    Ok((best.atom_index, best))
}
