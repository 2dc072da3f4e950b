//! Wordnet construction: score-threshold matching, the word-dependent cutoff
//! `alpha_w` and synset recovery.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedder::{baseline_synset_embedding, full_synset_embedding, EmbedConfig, SynsetEmbedding};
use crate::error::{Error, Result};
use crate::lexicon::{Embeddings, FrequencyTable, WordId};
use crate::linalg;
use crate::linker::{assign_synset, is_similar, LinkConfig, SynsetAssignment};
use crate::ontology::{candidate_synsets, synset_candidate, BilingualDict, OntologyDb, Pos, TranslatedGlossTable};
use crate::wsi::WsiModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "representation")]
    Representation,
    #[serde(rename = "representation+wsi")]
    RepresentationWsi,
}

impl Method {
    pub fn uses_wsi(self) -> bool {
        matches!(self, Method::RepresentationWsi)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "representation" => Ok(Method::Representation),
            "representation+wsi" | "wsi" => Ok(Method::RepresentationWsi),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Baseline => "baseline",
            Method::Representation => "representation",
            Method::RepresentationWsi => "representation+wsi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BuildConfig {
    pub method: Method,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub per_pos: BTreeMap<Pos, Cutoffs>,
    /// Let recovered synsets enable further recovery (experimental).
    #[serde(default)]
    pub fixpoint_recovery: bool,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub embed: EmbedConfig,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            method: Method::RepresentationWsi,
            alpha: 0.4,
            beta: 0.25,
            per_pos: BTreeMap::new(),
            fixpoint_recovery: false,
            link: LinkConfig::default(),
            embed: EmbedConfig::default(),
        }
    }
}

impl BuildConfig {
    /// Cutoffs for a part of speech. Adverbs without their own entry reuse
    /// the adjective cutoffs.
    pub fn cutoffs(&self, pos: Pos) -> Cutoffs {
        self.per_pos
            .get(&pos)
            .or_else(|| if pos == Pos::Adv { self.per_pos.get(&Pos::Adj) } else { None })
            .copied()
            .unwrap_or(Cutoffs { alpha: self.alpha, beta: self.beta })
    }

    pub fn validate(&self) -> Result<()> {
        self.embed.sif.validate()?;
        self.link.purify.validate()?;
        if self.method.uses_wsi() {
            for pos in Pos::ALL {
                let c = self.cutoffs(pos);
                if c.beta > c.alpha {
                    return Err(Error::InvalidConfig(format!(
                        "beta {} exceeds alpha {} for {pos}",
                        c.beta, c.alpha
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "threshold")]
    Threshold,
    #[serde(rename = "argmax-fallback")]
    ArgmaxFallback,
    #[serde(rename = "alpha_w")]
    AlphaW,
    #[serde(rename = "recovery")]
    Recovery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    #[serde(rename = "synsetId")]
    pub synset_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    #[serde(rename = "synsetId")]
    pub synset_id: String,
    pub score: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub word: String,
    /// Sorted by synset id.
    pub matched: Vec<Match>,
    #[serde(rename = "alphaW")]
    pub alpha_w: f64,
}

impl MatchResult {
    pub fn contains(&self, synset: &str) -> bool {
        self.matched.iter().any(|m| m.synset_id == synset)
    }

    pub fn synsets(&self) -> BTreeSet<&str> {
        self.matched.iter().map(|m| m.synset_id.as_str()).collect()
    }
}

/// Accepts every candidate scoring at least `alpha`; when none does, only
/// the highest-scoring one (ties: smallest synset id).
pub fn score_threshold(word: &str, scored: &[ScoredCandidate], alpha: f64) -> MatchResult {
    let mut matched: Vec<Match> = scored
        .iter()
        .filter(|c| c.score >= alpha)
        .map(|c| Match {
            synset_id: c.synset_id.clone(),
            score: c.score,
            provenance: Provenance::Threshold,
        })
        .collect();
    if matched.is_empty() {
        let best = scored.iter().reduce(|best, c| {
            if c.score > best.score || (c.score == best.score && c.synset_id < best.synset_id) {
                c
            } else {
                best
            }
        });
        if let Some(b) = best {
            matched.push(Match {
                synset_id: b.synset_id.clone(),
                score: b.score,
                provenance: Provenance::ArgmaxFallback,
            });
        }
    }
    matched.sort_by(|a, b| a.synset_id.cmp(&b.synset_id));
    MatchResult {
        word: word.to_string(),
        matched,
        alpha_w: alpha,
    }
}

/// `alpha_w = min(alpha, score(S*))` where `S*` maximizes `f(C_S)` (ties:
/// higher score, then smaller synset id). Falls back to `alpha` when no
/// candidate has an atom. `assignments` is aligned with `scored`.
pub fn effective_cutoff(scored: &[ScoredCandidate], assignments: &[SynsetAssignment], alpha: f64) -> f64 {
    let mut best: Option<(&ScoredCandidate, f64)> = None;
    for (c, a) in scored.iter().zip(assignments) {
        if !a.has_atom() {
            continue;
        }
        let f = a.objective();
        let better = match best {
            None => true,
            Some((b, bf)) => {
                f > bf || (f == bf && (c.score > b.score || (c.score == b.score && c.synset_id < b.synset_id)))
            }
        };
        if better {
            best = Some((c, f));
        }
    }
    best.map_or(alpha, |(c, _)| alpha.min(c.score))
}

/// Synset recovery. For each atom, unmatched candidates on it with score in
/// `[beta, alpha_w)` are added when their cluster is similar to the cluster
/// of every matched synset on the same atom; atoms without matched synsets
/// recover nothing. Existing matches are never removed.
#[allow(clippy::too_many_arguments)]
pub fn recover_synsets(
    emb: &Embeddings,
    matches: &MatchResult,
    scored: &[ScoredCandidate],
    assignments: &[SynsetAssignment],
    alpha_w: f64,
    beta: f64,
    fixpoint: bool,
) -> Result<MatchResult> {
    let mut out = matches.clone();
    let by_id: HashMap<&str, &SynsetAssignment> =
        assignments.iter().map(|a| (a.synset_id.as_str(), a)).collect();
    loop {
        let matched_ids = out.synsets().into_iter().map(str::to_string).collect::<BTreeSet<_>>();
        let mut added = Vec::new();
        for (c, a) in scored.iter().zip(assignments) {
            if matched_ids.contains(&c.synset_id) || !(beta <= c.score && c.score < alpha_w) {
                continue;
            }
            let Some(atom) = a.atom() else { continue };
            let peers: Vec<&SynsetAssignment> = matched_ids
                .iter()
                .filter_map(|id| by_id.get(id.as_str()).copied())
                .filter(|p| p.atom() == Some(atom))
                .collect();
            if peers.is_empty() {
                continue;
            }
            let mut all_similar = true;
            for p in peers {
                if !is_similar(emb, a.words(), p.words())? {
                    all_similar = false;
                    break;
                }
            }
            if all_similar {
                added.push(Match {
                    synset_id: c.synset_id.clone(),
                    score: c.score,
                    provenance: Provenance::Recovery,
                });
            }
        }
        let grew = !added.is_empty();
        out.matched.extend(added);
        out.matched.sort_by(|a, b| a.synset_id.cmp(&b.synset_id));
        if !(fixpoint && grew) {
            break;
        }
    }
    Ok(out)
}

/// All ingested resources a build needs besides the sparse-coding model.
#[derive(Debug, Clone)]
pub struct Resources {
    pub emb: Embeddings,
    pub freqs: FrequencyTable,
    pub db: OntologyDb,
    pub dict: BilingualDict,
    pub glosses: TranslatedGlossTable,
}

/// Scores and assignments of one (word, POS) pair; independent of the cutoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedWord {
    pub word: String,
    pub word_id: WordId,
    pub pos: Pos,
    /// Scorable candidates sorted by synset id.
    pub scored: Vec<ScoredCandidate>,
    /// Aligned with `scored`; empty unless the method uses WSI.
    pub assignments: Vec<SynsetAssignment>,
    /// Candidates without a computable synset embedding.
    pub unscorable: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordnetEntry {
    pub word: String,
    pub pos: Pos,
    pub matches: Vec<Match>,
    #[serde(rename = "alphaW")]
    pub alpha_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BuildSummary {
    pub words: usize,
    pub entries: usize,
    pub matched_pairs: usize,
    pub synsets: usize,
    pub unscorable_candidates: usize,
    pub failed_words: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutput {
    pub entries: Vec<WordnetEntry>,
    pub summary: BuildSummary,
    pub diagnostics: Vec<String>,
}

/// Synset embeddings for every synset the method needs, keyed by id.
pub fn synset_embeddings(
    res: &Resources,
    method: Method,
    cfg: &EmbedConfig,
    ids: &BTreeSet<String>,
) -> BTreeMap<String, Result<SynsetEmbedding>> {
    let ids: Vec<&String> = ids.iter().collect();
    ids.par_iter()
        .map(|id| {
            let idx = res.db.index_of(id).ok_or_else(|| Error::UnknownSynset(id.to_string()));
            let emb = idx.and_then(|idx| {
                let cand = synset_candidate(idx, &res.db, &res.dict, &res.emb.vocab);
                match method {
                    Method::Baseline => baseline_synset_embedding(&cand, &res.emb),
                    _ => full_synset_embedding(&cand, &res.emb, &res.glosses, &res.freqs, cfg),
                }
            });
            (id.to_string(), emb)
        })
        .collect()
}

/// Computes scores (and, for the WSI method, synset assignments) for every
/// (word, POS) pair with candidates, in vocabulary then POS order. `only`
/// restricts the words processed.
pub fn prepare(
    res: &Resources,
    model: Option<&WsiModel>,
    cfg: &BuildConfig,
    cache: Option<&BTreeMap<String, SynsetEmbedding>>,
    only: Option<&BTreeSet<String>>,
) -> Result<(Vec<PreparedWord>, Vec<String>)> {
    cfg.validate()?;
    if cfg.method.uses_wsi() {
        let m = model.ok_or_else(|| Error::InvalidConfig("representation+wsi needs a WSI model".into()))?;
        if m.codes.len() != res.emb.len() || m.dim() != res.emb.dim() {
            return Err(Error::Invalid("WSI model does not match the embeddings".into()));
        }
    }

    let vocab = &res.emb.vocab;
    let words: Vec<&String> = vocab.words().iter().filter(|w| only.is_none_or(|o| o.contains(*w))).collect();
    let candidate_sets: Vec<_> = words
        .par_iter()
        .map(|w| candidate_synsets(w, &res.db, &res.dict, vocab))
        .collect::<Result<_>>()?;

    let needed: BTreeSet<String> = candidate_sets
        .iter()
        .flat_map(|c| c.candidates.iter().map(|c| c.synset.clone()))
        .filter(|id| cache.is_none_or(|c| !c.contains_key(id)))
        .collect();
    let mut computed = synset_embeddings(res, cfg.method, &cfg.embed, &needed);
    if let Some(cache) = cache {
        for (id, e) in cache {
            computed.insert(id.clone(), Ok(e.clone()));
        }
    }

    let per_word: Vec<Result<Vec<PreparedWord>>> = candidate_sets
        .par_iter()
        .map(|cs| {
            let word = vocab.token(cs.word).to_string();
            let vw = res.emb.vector(cs.word);
            let mut out = Vec::new();
            for pos in cs.parts_of_speech() {
                let group = cs.with_pos(pos);
                let mut scored = Vec::new();
                let mut scorable = Vec::new();
                let mut unscorable = Vec::new();
                for c in &group.candidates {
                    match computed.get(&c.synset) {
                        Some(Ok(u)) => {
                            scored.push(ScoredCandidate {
                                synset_id: c.synset.clone(),
                                score: linalg::dot(&u.vector, vw),
                            });
                            scorable.push(c);
                        }
                        _ => unscorable.push(c.synset.clone()),
                    }
                }
                let assignments = match (cfg.method.uses_wsi(), model) {
                    (true, Some(m)) => scorable
                        .iter()
                        .map(|c| assign_synset(&res.emb, m, cs.word, c, &cfg.link))
                        .collect::<Result<Vec<_>>>()?,
                    _ => Vec::new(),
                };
                out.push(PreparedWord {
                    word: word.clone(),
                    word_id: cs.word,
                    pos,
                    scored,
                    assignments,
                    unscorable,
                });
            }
            Ok(out)
        })
        .collect();

    let mut prepared = Vec::new();
    let mut diagnostics = Vec::new();
    for (cs, r) in candidate_sets.iter().zip(per_word) {
        match r {
            Ok(p) => {
                for pw in &p {
                    for s in &pw.unscorable {
                        diagnostics.push(format!("{} ({}): synset {s} is unscorable", pw.word, pw.pos));
                    }
                }
                prepared.extend(p);
            }
            Err(e) => {
                let word = vocab.token(cs.word);
                warn!("skipping `{word}`: {e}");
                diagnostics.push(format!("{word}: failed: {e}"));
            }
        }
    }
    Ok((prepared, diagnostics))
}

/// Applies the method's matching rule to a prepared word.
pub fn decide(
    emb: &Embeddings,
    p: &PreparedWord,
    method: Method,
    cutoffs: Cutoffs,
    fixpoint: bool,
) -> Result<WordnetEntry> {
    let result = match method {
        Method::Baseline | Method::Representation => score_threshold(&p.word, &p.scored, cutoffs.alpha),
        Method::RepresentationWsi => {
            let alpha_w = effective_cutoff(&p.scored, &p.assignments, cutoffs.alpha);
            let mut first = score_threshold(&p.word, &p.scored, alpha_w);
            for m in &mut first.matched {
                if m.provenance == Provenance::Threshold && m.score < cutoffs.alpha {
                    m.provenance = Provenance::AlphaW;
                }
            }
            recover_synsets(emb, &first, &p.scored, &p.assignments, alpha_w, cutoffs.beta, fixpoint)?
        }
    };
    Ok(WordnetEntry {
        word: p.word.clone(),
        pos: p.pos,
        matches: result.matched,
        alpha_w: result.alpha_w,
    })
}

/// Applies per-POS cutoffs from `cfg` to every prepared word.
pub fn decide_all(emb: &Embeddings, prepared: &[PreparedWord], cfg: &BuildConfig) -> Result<Vec<WordnetEntry>> {
    prepared
        .par_iter()
        .map(|p| decide(emb, p, cfg.method, cfg.cutoffs(p.pos), cfg.fixpoint_recovery))
        .collect()
}

pub fn summarize(entries: &[WordnetEntry], unscorable: usize, failed: usize) -> BuildSummary {
    let words: BTreeSet<&str> = entries.iter().map(|e| e.word.as_str()).collect();
    let synsets: BTreeSet<&str> = entries
        .iter()
        .flat_map(|e| e.matches.iter().map(|m| m.synset_id.as_str()))
        .collect();
    BuildSummary {
        words: words.len(),
        entries: entries.len(),
        matched_pairs: entries.iter().map(|e| e.matches.len()).sum(),
        synsets: synsets.len(),
        unscorable_candidates: unscorable,
        failed_words: failed,
    }
}

/// The full pipeline: candidates, synset scores, assignments and matching.
pub fn build_wordnet(
    res: &Resources,
    model: Option<&WsiModel>,
    cfg: &BuildConfig,
    cache: Option<&BTreeMap<String, SynsetEmbedding>>,
) -> Result<BuildOutput> {
    let (prepared, diagnostics) = prepare(res, model, cfg, cache, None)?;
    let entries = decide_all(&res.emb, &prepared, cfg)?;
    let unscorable = prepared.iter().map(|p| p.unscorable.len()).sum();
    let failed = diagnostics.iter().filter(|d| d.contains(": failed: ")).count();
    let summary = summarize(&entries, unscorable, failed);
    Ok(BuildOutput {
        entries,
        summary,
        diagnostics,
    })
}

pub fn write_wordnet(path: impl AsRef<Path>, entries: &[WordnetEntry]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_wordnet(path: impl AsRef<Path>) -> Result<Vec<WordnetEntry>> {
    crate::ontology::read_json_lines(path.as_ref())
}
