//! Word-list embeddings and synset representations.
//!
//! Two synset representations are provided: the baseline mean of the
//! translated lemma vectors, and the four-part representation that averages
//! a lemma sum, a related-synset sum, a SIF-weighted definition embedding and
//! the mean of SIF-weighted example-sentence embeddings. Components that
//! cannot be computed (no words survive, or the vectors cancel) are left out
//! of the average.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{Embeddings, FrequencyTable, Vocabulary, WordId};
use crate::linalg;
use crate::ontology::{Candidate, TranslatedGlossTable};

pub const DEFAULT_SIF_A: f64 = 1e-4;

/// How the SIF weight reads `f_w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyMode {
    /// `count / total`
    #[default]
    Relative,
    /// The raw corpus count.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SifConfig {
    pub a: f64,
    #[serde(default)]
    pub frequency_mode: FrequencyMode,
}

impl Default for SifConfig {
    fn default() -> Self {
        Self {
            a: DEFAULT_SIF_A,
            frequency_mode: FrequencyMode::Relative,
        }
    }
}

impl SifConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidConfig(format!("SIF parameter a must be positive, got {}", self.a)));
        }
        Ok(())
    }

    pub fn frequency(&self, freqs: &FrequencyTable, w: WordId) -> f64 {
        match self.frequency_mode {
            FrequencyMode::Relative => freqs.rel_freq(w),
            FrequencyMode::Raw => freqs.count(w) as f64,
        }
    }
}

/// `a / (a + f)`
#[inline]
pub fn sif_weight(a: f64, f: f64) -> f64 {
    a / (a + f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Lemma,
    Related,
    Definition,
    Examples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub sif: SifConfig,
    /// Normalize each component before averaging. When off, the lemma and
    /// related sums enter the average unnormalized.
    pub normalize_components: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            sif: SifConfig::default(),
            normalize_components: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynsetEmbedding {
    #[serde(rename = "synsetId")]
    pub synset_id: String,
    pub vector: Vec<f64>,
    #[serde(rename = "componentsUsed")]
    pub components_used: Vec<Component>,
}

fn finish(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let n = linalg::norm(&v);
    if n.is_nan() || n <= 1e-12 {
        return Err(Error::ZeroSum);
    }
    for x in &mut v {
        *x /= n;
    }
    Ok(v)
}

fn raw_sum(emb: &Embeddings, words: &[WordId]) -> Result<Vec<f64>> {
    if words.is_empty() {
        return Err(Error::EmptyList);
    }
    let mut acc = vec![0.0; emb.dim()];
    for &w in words {
        linalg::axpy(1.0, emb.matrix.get(w)?, &mut acc);
    }
    Ok(acc)
}

/// Unit-normalized element-wise sum of the word vectors. Repeated ids count
/// once per occurrence.
pub fn sum_embed(emb: &Embeddings, words: &[WordId]) -> Result<Vec<f64>> {
    finish(raw_sum(emb, words)?)
}

/// Unit-normalized SIF-weighted sum `sum_w a/(a+f_w) v_w`.
pub fn sif_embed(emb: &Embeddings, words: &[WordId], freqs: &FrequencyTable, cfg: &SifConfig) -> Result<Vec<f64>> {
    if words.is_empty() {
        return Err(Error::EmptyList);
    }
    let mut acc = vec![0.0; emb.dim()];
    for &w in words {
        let v = emb.matrix.get(w)?;
        linalg::axpy(sif_weight(cfg.a, cfg.frequency(freqs, w)), v, &mut acc);
    }
    finish(acc)
}

/// Whitespace split, lowercase, leading/trailing punctuation stripped,
/// out-of-vocabulary tokens dropped.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Vec<WordId> {
    text.split_whitespace()
        .filter_map(|raw| {
            let t = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if t.is_empty() {
                return None;
            }
            vocab.get(t).or_else(|| vocab.get(&t.to_lowercase()))
        })
        .collect()
}

/// Mean of the `T_S` vectors, unit-normalized.
pub fn baseline_synset_embedding(cand: &Candidate, emb: &Embeddings) -> Result<SynsetEmbedding> {
    if cand.translated.is_empty() {
        return Err(Error::Unscorable(cand.synset.clone()));
    }
    let mut mean = raw_sum(emb, &cand.translated)?;
    let k = cand.translated.len() as f64;
    for x in &mut mean {
        *x /= k;
    }
    let vector = finish(mean).map_err(|_| Error::Unscorable(cand.synset.clone()))?;
    Ok(SynsetEmbedding {
        synset_id: cand.synset.clone(),
        vector,
        components_used: vec![Component::Lemma],
    })
}

/// Computes every available component vector of a synset.
pub fn synset_components(
    cand: &Candidate,
    emb: &Embeddings,
    glosses: &TranslatedGlossTable,
    freqs: &FrequencyTable,
    cfg: &EmbedConfig,
) -> Vec<(Component, Vec<f64>)> {
    let mut out = Vec::with_capacity(4);
    let sum_component = |words: &[WordId]| -> Option<Vec<f64>> {
        let raw = raw_sum(emb, words).ok()?;
        let normalized = finish(raw.clone()).ok()?;
        Some(if cfg.normalize_components { normalized } else { raw })
    };
    if let Some(v) = sum_component(&cand.translated) {
        out.push((Component::Lemma, v));
    }
    if let Some(v) = sum_component(&cand.related) {
        out.push((Component::Related, v));
    }
    if let Some(g) = glosses.get(&cand.synset) {
        let words = tokenize(&g.gloss, &emb.vocab);
        if let Ok(v) = sif_embed(emb, &words, freqs, &cfg.sif) {
            out.push((Component::Definition, v));
        }
        let sentences: Vec<Vec<f64>> = g
            .examples
            .iter()
            .filter_map(|e| sif_embed(emb, &tokenize(e, &emb.vocab), freqs, &cfg.sif).ok())
            .collect();
        if !sentences.is_empty() {
            let mut mean = vec![0.0; emb.dim()];
            for s in &sentences {
                linalg::axpy(1.0 / sentences.len() as f64, s, &mut mean);
            }
            let v = if cfg.normalize_components { finish(mean).ok() } else { Some(mean) };
            if let Some(v) = v {
                out.push((Component::Examples, v));
            }
        }
    }
    out
}

/// Averages the given component vectors and normalizes the result.
pub fn combine_components(synset_id: &str, components: &[(Component, Vec<f64>)]) -> Result<SynsetEmbedding> {
    let Some((_, first)) = components.first() else {
        return Err(Error::Unscorable(synset_id.to_string()));
    };
    let mut mean = vec![0.0; first.len()];
    for (_, v) in components {
        linalg::axpy(1.0 / components.len() as f64, v, &mut mean);
    }
    let vector = finish(mean).map_err(|_| Error::Unscorable(synset_id.to_string()))?;
    Ok(SynsetEmbedding {
        synset_id: synset_id.to_string(),
        vector,
        components_used: components.iter().map(|(c, _)| *c).collect(),
    })
}

/// The four-part synset representation.
pub fn full_synset_embedding(
    cand: &Candidate,
    emb: &Embeddings,
    glosses: &TranslatedGlossTable,
    freqs: &FrequencyTable,
    cfg: &EmbedConfig,
) -> Result<SynsetEmbedding> {
    let parts = synset_components(cand, emb, glosses, freqs, cfg);
    combine_components(&cand.synset, &parts)
}

pub fn write_synset_embeddings(path: impl AsRef<Path>, items: &[SynsetEmbedding]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_synset_embeddings(path: impl AsRef<Path>) -> Result<Vec<SynsetEmbedding>> {
    crate::ontology::read_json_lines(path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{Pos, TranslatedGloss};

    fn emb(pairs: &[(&str, Vec<f64>)]) -> Embeddings {
        Embeddings::from_pairs(pairs).unwrap()
    }

    fn cand(translated: Vec<usize>, related: Vec<usize>) -> Candidate {
        Candidate {
            synset: "s.n.01".into(),
            pos: Pos::Noun,
            translated: translated.into_iter().map(WordId).collect(),
            related: related.into_iter().map(WordId).collect(),
        }
    }

    #[test]
    fn sum_embed_examples() {
        let e = emb(&[("x", vec![1.0, 0.0]), ("y", vec![0.0, 1.0]), ("z", vec![-1.0, 0.0])]);
        assert_eq!(sum_embed(&e, &[WordId(0)]).unwrap(), vec![1.0, 0.0]);
        let v = sum_embed(&e, &[WordId(0), WordId(1)]).unwrap();
        assert!((v[0] - 0.5f64.sqrt()).abs() < 1e-6 && (v[1] - 0.5f64.sqrt()).abs() < 1e-6);
        assert!(matches!(sum_embed(&e, &[WordId(0), WordId(2)]), Err(Error::ZeroSum)));
        assert!(matches!(sum_embed(&e, &[]), Err(Error::EmptyList)));
    }

    #[test]
    fn sif_two_word_example() {
        // relFreq(x) = 1e-4, relFreq(y) = 1e-2 over a total of 1e6
        let e = emb(&[("x", vec![1.0, 0.0]), ("y", vec![0.0, 1.0]), ("pad", vec![1.0, 1.0])]);
        let f = FrequencyTable::from_counts(vec![100, 10_000, 989_900], 1).unwrap();
        let v = sif_embed(&e, &[WordId(0), WordId(1)], &f, &SifConfig::default()).unwrap();
        // unnormalized (0.5, 1e-4 / 1.01e-2); normalized by hand
        let (a, b) = (0.5_f64, 1e-4 / (1e-4 + 1e-2));
        let n = (a * a + b * b).sqrt();
        assert!((v[0] - a / n).abs() < 1e-12 && (v[1] - b / n).abs() < 1e-12);
        assert!((v[0] - 0.99980).abs() < 5e-6 && (v[1] - 0.01980).abs() < 5e-6);
    }

    #[test]
    fn sif_weight_ratio() {
        let hi = sif_weight(1e-4, 1e-6);
        let lo = sif_weight(1e-4, 1e-2);
        assert!((hi - 0.990099).abs() < 1e-6);
        assert!((lo - 0.00990099).abs() < 1e-8);
        assert!((hi / lo - 100.0).abs() < 1e-9);
    }

    #[test]
    fn baseline_cases() {
        let e = emb(&[("x", vec![1.0, 0.0]), ("y", vec![0.0, 1.0])]);
        assert_eq!(baseline_synset_embedding(&cand(vec![1], vec![]), &e).unwrap().vector, vec![0.0, 1.0]);
        let u = baseline_synset_embedding(&cand(vec![0, 1], vec![]), &e).unwrap();
        assert!((linalg::dot(&u.vector, e.vector(WordId(0))) - 0.5f64.sqrt()).abs() < 1e-4);
        assert!(matches!(baseline_synset_embedding(&cand(vec![], vec![1]), &e), Err(Error::Unscorable(_))));
    }

    #[test]
    fn full_embedding_degenerate_and_two_part() {
        let e = emb(&[("x", vec![1.0, 0.0]), ("y", vec![0.0, 1.0])]);
        let f = FrequencyTable::uniform(2).unwrap();
        let empty = TranslatedGlossTable::default();
        let c = cand(vec![0, 1], vec![]);
        let full = full_synset_embedding(&c, &e, &empty, &f, &EmbedConfig::default()).unwrap();
        let base = baseline_synset_embedding(&c, &e).unwrap().vector;
        assert!(full.vector.iter().zip(&base).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(full.components_used, vec![Component::Lemma]);

        let db = crate::ontology::OntologyDb::from_records(vec![crate::ontology::SynsetRecord {
            id: "s.n.01".into(),
            pos: Pos::Noun,
            lemmas: vec![],
            gloss: String::new(),
            examples: vec![],
            related: vec![],
            related_typed: None,
        }])
        .unwrap();
        let g = TranslatedGlossTable::from_entries(
            vec![TranslatedGloss { id: "s.n.01".into(), gloss: "Y, unknown!".into(), examples: vec![] }],
            &db,
        )
        .unwrap();
        let full = full_synset_embedding(&cand(vec![0], vec![]), &e, &g, &f, &EmbedConfig::default()).unwrap();
        assert!((full.vector[0] - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((full.vector[1] - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(full.components_used, vec![Component::Lemma, Component::Definition]);

        assert!(full_synset_embedding(&cand(vec![], vec![]), &e, &empty, &f, &EmbedConfig::default()).is_err());
    }

    #[test]
    fn tokenizer_strips_and_lowercases() {
        let v = Vocabulary::from_tokens(["chat", "noir"]).unwrap();
        assert_eq!(tokenize("Le CHAT, noir. (inconnu)", &v), vec![WordId(0), WordId(1)]);
    }
}
