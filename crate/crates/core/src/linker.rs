//! Cluster similarity, synset-atom/synset-cluster assignment and sense
//! clustering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{Embeddings, WordId};
use crate::linalg;
use crate::ontology::Candidate;
use crate::purifier::{best_atom_cluster, PurifiedCluster, PurifyConfig};
use crate::wsi::{word_atoms, WsiModel};

/// `rho(C1, C2)`: median of `v_x . v_y` over all ordered pairs.
pub fn cluster_similarity(emb: &Embeddings, c1: &[WordId], c2: &[WordId]) -> Result<f64> {
    if c1.is_empty() || c2.is_empty() {
        return Err(Error::Invalid("cluster similarity of an empty cluster".into()));
    }
    let mut dots = Vec::with_capacity(c1.len() * c2.len());
    for &x in c1 {
        let vx = emb.matrix.get(x)?;
        for &y in c2 {
            dots.push(linalg::dot(vx, emb.matrix.get(y)?));
        }
    }
    Ok(linalg::median(&mut dots).expect("nonempty"))
}

/// `rho(C1, C2) >= min(rho(C1, C1), rho(C2, C2))`
pub fn is_similar(emb: &Embeddings, c1: &[WordId], c2: &[WordId]) -> Result<bool> {
    let cross = cluster_similarity(emb, c1, c2)?;
    let own = cluster_similarity(emb, c1, c1)?.min(cluster_similarity(emb, c2, c2)?);
    Ok(cross >= own)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LinkConfig {
    pub purify: PurifyConfig,
    /// Search `T_S` as well as `R_S` when purifying for a synset.
    pub include_own_lemmas: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            purify: PurifyConfig::default(),
            include_own_lemmas: true,
        }
    }
}

/// Synset-atom `a_S` and synset-cluster `C_S` of a word-synset pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SynsetAssignment {
    pub synset_id: String,
    /// `None` when the word has no atom with a positive coefficient.
    pub cluster: Option<PurifiedCluster>,
}

impl SynsetAssignment {
    pub fn atom(&self) -> Option<usize> {
        self.cluster.as_ref().map(|c| c.atom_index)
    }

    pub fn has_atom(&self) -> bool {
        self.cluster.is_some()
    }

    /// `f(C_S)`: the purification objective clamped to `[0, 1]`; 0 without an atom.
    pub fn objective(&self) -> f64 {
        self.cluster.as_ref().map_or(0.0, |c| c.gamma.clamp(0.0, 1.0))
    }

    pub fn words(&self) -> &[WordId] {
        self.cluster.as_ref().map_or(&[], |c| c.words.as_slice())
    }
}

/// Search space for purifying on a candidate: `R_S`, plus `T_S` when enabled.
pub fn synset_search_space(cand: &Candidate, include_own_lemmas: bool) -> Vec<WordId> {
    let mut space = cand.related.clone();
    if include_own_lemmas {
        space.extend_from_slice(&cand.translated);
    }
    space.sort();
    space.dedup();
    space
}

pub fn assign_synset(
    emb: &Embeddings,
    model: &WsiModel,
    w: WordId,
    cand: &Candidate,
    cfg: &LinkConfig,
) -> Result<SynsetAssignment> {
    let atoms = word_atoms(model, w)?;
    if atoms.is_empty() {
        return Ok(SynsetAssignment {
            synset_id: cand.synset.clone(),
            cluster: None,
        });
    }
    let space = synset_search_space(cand, cfg.include_own_lemmas);
    let (_, cluster) = best_atom_cluster(emb, &model.atoms, w, &atoms, &space, &cfg.purify)?;
    Ok(SynsetAssignment {
        synset_id: cand.synset.clone(),
        cluster: Some(cluster),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseClustering {
    pub word: String,
    /// Disjoint groups covering the input synsets; each group lists synsets
    /// in input order and groups are ordered by their first member.
    pub groups: Vec<Vec<String>>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            let next = self.0[i];
            self.0[i] = r;
            i = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Merges synsets of one word that share a synset-atom and have similar
/// synset-clusters, closing the merge relation transitively. Synsets without
/// an atom stay singletons.
pub fn sense_cluster(emb: &Embeddings, word: &str, assignments: &[SynsetAssignment]) -> Result<SenseClustering> {
    let n = assignments.len();
    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&assignments[i], &assignments[j]);
            if let (Some(x), Some(y)) = (a.atom(), b.atom()) {
                if x == y && is_similar(emb, a.words(), b.words())? {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, a) in assignments.iter().enumerate() {
        let root = uf.find(i);
        match groups.iter_mut().find(|(r, _)| *r == root) {
            Some((_, g)) => g.push(a.synset_id.clone()),
            None => groups.push((root, vec![a.synset_id.clone()])),
        }
    }
    Ok(SenseClustering {
        word: word.to_string(),
        groups: groups.into_iter().map(|(_, g)| g).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(rows: &[Vec<f64>]) -> Embeddings {
        let pairs: Vec<(String, Vec<f64>)> = rows.iter().enumerate().map(|(i, r)| (format!("w{i}"), r.clone())).collect();
        Embeddings::from_pairs(&pairs).unwrap()
    }

    fn ids(v: &[usize]) -> Vec<WordId> {
        v.iter().map(|&i| WordId(i)).collect()
    }

    #[test]
    fn similarity_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let e = emb(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![h, h], vec![1.0, 0.0]]);
        assert_eq!(cluster_similarity(&e, &ids(&[0, 3]), &ids(&[0, 3])).unwrap(), 1.0);
        assert_eq!(cluster_similarity(&e, &ids(&[0]), &ids(&[1])).unwrap(), 0.0);
        let r = cluster_similarity(&e, &ids(&[0, 1]), &ids(&[2])).unwrap();
        assert!((r - h).abs() < 1e-12);
        assert!(cluster_similarity(&e, &[], &ids(&[1])).is_err());
    }

    #[test]
    fn similarity_condition() {
        let e = emb(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]);
        assert!(is_similar(&e, &ids(&[0, 1]), &ids(&[0, 1])).unwrap());
        assert!(!is_similar(&e, &ids(&[0, 1]), &ids(&[2, 3])).unwrap());
    }

    fn assignment(id: &str, atom: usize, words: &[usize]) -> SynsetAssignment {
        SynsetAssignment {
            synset_id: id.into(),
            cluster: Some(PurifiedCluster { words: ids(words), gamma: 0.5, atom_index: atom, search_space_size: 0 }),
        }
    }

    #[test]
    fn sense_clustering_cases() {
        let e = emb(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let distinct = [assignment("a", 0, &[0]), assignment("b", 1, &[0])];
        assert_eq!(sense_cluster(&e, "w", &distinct).unwrap().groups, vec![vec!["a"], vec!["b"]]);

        let same = [assignment("a", 0, &[0, 1]), assignment("b", 0, &[0, 1])];
        assert_eq!(sense_cluster(&e, "w", &same).unwrap().groups, vec![vec!["a", "b"]]);

        let none = [SynsetAssignment { synset_id: "a".into(), cluster: None }, assignment("b", 0, &[0])];
        assert_eq!(sense_cluster(&e, "w", &none).unwrap().groups.len(), 2);
    }
}
