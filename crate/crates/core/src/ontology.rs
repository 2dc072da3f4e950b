//! English synset database, bilingual dictionary and candidate generation.
//!
//! A target word's candidate synsets are every synset that lists one of the
//! word's English translations as a lemma. For each candidate `S` we also
//! collect `T_S` (in-vocabulary translations of its lemmas) and `R_S` (the
//! union of `T_S'` over synsets related to `S`, relations followed one hop in
//! either direction).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{Vocabulary, WordId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    #[serde(alias = "n")]
    Noun,
    #[serde(alias = "v")]
    Verb,
    #[serde(alias = "a", alias = "s", alias = "adjective")]
    Adj,
    #[serde(alias = "r", alias = "adverb")]
    Adv,
}

impl Pos {
    pub const ALL: [Pos; 4] = [Pos::Noun, Pos::Verb, Pos::Adj, Pos::Adv];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Noun => "noun",
            Pos::Verb => "verb",
            Pos::Adj => "adj",
            Pos::Adv => "adv",
        }
    }

    /// POS encoded in a `lemma.p.NN` style synset id, if any.
    pub fn from_synset_id(id: &str) -> Option<Pos> {
        let mut parts = id.rsplitn(3, '.');
        let sense = parts.next()?;
        let tag = parts.next()?;
        parts.next()?;
        if sense.is_empty() || !sense.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        match tag {
            "n" => Some(Pos::Noun),
            "v" => Some(Pos::Verb),
            "a" | "s" => Some(Pos::Adj),
            "r" => Some(Pos::Adv),
            _ => None,
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Pos {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "noun" | "n" => Ok(Pos::Noun),
            "verb" | "v" => Ok(Pos::Verb),
            "adj" | "adjective" | "a" | "s" => Ok(Pos::Adj),
            "adv" | "adverb" | "r" => Ok(Pos::Adv),
            other => Err(Error::Invalid(format!("unknown part of speech `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynsetRecord {
    pub id: String,
    pub pos: Pos,
    pub lemmas: Vec<String>,
    pub gloss: String,
    pub examples: Vec<String>,
    pub related: Vec<String>,
    /// Typed relation edges kept for provenance; the pipeline reads `related`.
    #[serde(rename = "relatedTyped", default, skip_serializing_if = "Option::is_none")]
    pub related_typed: Option<serde_json::Value>,
}

/// Index of a synset inside an [`OntologyDb`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SynsetIdx(pub usize);

/// Lowercases, trims and joins multiword lemmas with `_`.
pub fn normalize_lemma(lemma: &str) -> String {
    lemma
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .to_lowercase()
}

#[derive(Debug, Clone, Default)]
pub struct OntologyDb {
    synsets: Vec<SynsetRecord>,
    by_id: HashMap<String, SynsetIdx>,
    by_lemma: HashMap<String, Vec<SynsetIdx>>,
    neighbors: Vec<Vec<SynsetIdx>>,
}

impl OntologyDb {
    /// Validates records and builds the lemma and neighbour indexes.
    pub fn from_records(records: Vec<SynsetRecord>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if let Some(p) = Pos::from_synset_id(&r.id) {
                if p != r.pos {
                    return Err(Error::Invalid(format!(
                        "synset `{}` declares pos {} but its id encodes {}",
                        r.id, r.pos, p
                    )));
                }
            }
            if by_id.insert(r.id.clone(), SynsetIdx(i)).is_some() {
                return Err(Error::DuplicateSynset(r.id.clone()));
            }
        }

        let mut neighbors: Vec<BTreeSet<SynsetIdx>> = vec![BTreeSet::new(); records.len()];
        let mut by_lemma: HashMap<String, Vec<SynsetIdx>> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            for rel in &r.related {
                let j = *by_id.get(rel).ok_or_else(|| Error::DanglingRelation {
                    from: r.id.clone(),
                    to: rel.clone(),
                })?;
                if j.0 != i {
                    neighbors[i].insert(j);
                    neighbors[j.0].insert(SynsetIdx(i));
                }
            }
            let lemmas: BTreeSet<String> = r.lemmas.iter().map(|l| normalize_lemma(l)).collect();
            for l in lemmas {
                by_lemma.entry(l).or_default().push(SynsetIdx(i));
            }
        }

        Ok(Self {
            synsets: records,
            by_id,
            by_lemma,
            neighbors: neighbors.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    /// Reads a JSON-lines synset file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let records = read_json_lines::<SynsetRecord>(path)?;
        Self::from_records(records)
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SynsetRecord> {
        self.by_id.get(id).map(|i| &self.synsets[i.0])
    }

    pub fn index_of(&self, id: &str) -> Option<SynsetIdx> {
        self.by_id.get(id).copied()
    }

    pub fn record(&self, idx: SynsetIdx) -> &SynsetRecord {
        &self.synsets[idx.0]
    }

    pub fn records(&self) -> &[SynsetRecord] {
        &self.synsets
    }

    /// Synsets related to `idx` in either direction, excluding itself.
    pub fn neighbors(&self, idx: SynsetIdx) -> &[SynsetIdx] {
        &self.neighbors[idx.0]
    }

    pub fn synsets_with_lemma(&self, lemma: &str) -> &[SynsetIdx] {
        self.by_lemma
            .get(&normalize_lemma(lemma))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// `T_S`: in-vocabulary target translations of the synset's lemmas, sorted by id.
    pub fn translated_lemmas(&self, idx: SynsetIdx, dict: &BilingualDict, vocab: &Vocabulary) -> Vec<WordId> {
        let mut out = BTreeSet::new();
        for lemma in &self.synsets[idx.0].lemmas {
            for t in dict.targets(lemma) {
                if let Some(id) = vocab.get(t) {
                    out.insert(id);
                }
            }
        }
        out.into_iter().collect()
    }

    /// `R_S`: union of `T_S'` over the synset's neighbours, sorted by id.
    pub fn related_lemmas(&self, idx: SynsetIdx, dict: &BilingualDict, vocab: &Vocabulary) -> Vec<WordId> {
        let mut out = BTreeSet::new();
        for &n in self.neighbors(idx) {
            out.extend(self.translated_lemmas(n, dict, vocab));
        }
        out.into_iter().collect()
    }
}

/// Many-to-many English/target dictionary. English keys are normalized with
/// [`normalize_lemma`]; target words are kept verbatim.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BilingualDict {
    en2tgt: BTreeMap<String, BTreeSet<String>>,
    tgt2en: BTreeMap<String, BTreeSet<String>>,
}

static EMPTY: BTreeSet<String> = BTreeSet::new();

impl BilingualDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, english: &str, target: &str) {
        let en = normalize_lemma(english);
        let tgt = target.trim().to_string();
        if en.is_empty() || tgt.is_empty() {
            return;
        }
        self.en2tgt.entry(en.clone()).or_default().insert(tgt.clone());
        self.tgt2en.entry(tgt).or_default().insert(en);
    }

    pub fn from_pairs<'a, I: IntoIterator<Item = (&'a str, &'a str)>>(pairs: I) -> Self {
        let mut d = Self::new();
        for (en, tgt) in pairs {
            d.insert(en, tgt);
        }
        d
    }

    /// Reads `english<TAB>target` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut dict = Self::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (en, tgt) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, lineno + 1, "expected `english<TAB>target`"))?;
            dict.insert(en, tgt);
        }
        Ok(dict)
    }

    pub fn targets(&self, english: &str) -> &BTreeSet<String> {
        self.en2tgt.get(&normalize_lemma(english)).unwrap_or(&EMPTY)
    }

    pub fn translations(&self, target: &str) -> &BTreeSet<String> {
        self.tgt2en.get(target).unwrap_or(&EMPTY)
    }

    pub fn len(&self) -> usize {
        self.en2tgt.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.en2tgt.is_empty()
    }

    /// True when the two directions are exact transposes of each other.
    pub fn is_transpose_consistent(&self) -> bool {
        let forward = self
            .en2tgt
            .iter()
            .flat_map(|(e, ts)| ts.iter().map(move |t| (e.as_str(), t.as_str())));
        let backward: BTreeSet<(&str, &str)> = self
            .tgt2en
            .iter()
            .flat_map(|(t, es)| es.iter().map(move |e| (e.as_str(), t.as_str())))
            .collect();
        let forward: BTreeSet<(&str, &str)> = forward.collect();
        forward == backward
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatedGloss {
    pub id: String,
    pub gloss: String,
    #[serde(default)]
    pub examples: Vec<String>,
}

/// Machine-translated glosses and example sentences keyed by synset id.
#[derive(Debug, Clone, Default)]
pub struct TranslatedGlossTable {
    entries: HashMap<String, TranslatedGloss>,
}

impl TranslatedGlossTable {
    pub fn from_entries(entries: Vec<TranslatedGloss>, db: &OntologyDb) -> Result<Self> {
        let mut map = HashMap::with_capacity(entries.len());
        for e in entries {
            if db.get(&e.id).is_none() {
                return Err(Error::UnknownSynset(e.id));
            }
            if map.contains_key(&e.id) {
                return Err(Error::DuplicateSynset(e.id));
            }
            map.insert(e.id.clone(), e);
        }
        Ok(Self { entries: map })
    }

    pub fn load(path: impl AsRef<Path>, db: &OntologyDb) -> Result<Self> {
        Self::from_entries(read_json_lines(path.as_ref())?, db)
    }

    pub fn get(&self, id: &str) -> Option<&TranslatedGloss> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One candidate synset of a target word with its translated lemma sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub synset: String,
    pub pos: Pos,
    /// `T_S`
    pub translated: Vec<WordId>,
    /// `R_S`
    pub related: Vec<WordId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub word: WordId,
    /// Sorted by synset id.
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn get(&self, synset: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.synset == synset)
    }

    /// Candidates restricted to one part of speech, preserving order.
    pub fn with_pos(&self, pos: Pos) -> CandidateSet {
        CandidateSet {
            word: self.word,
            candidates: self.candidates.iter().filter(|c| c.pos == pos).cloned().collect(),
        }
    }

    pub fn parts_of_speech(&self) -> BTreeSet<Pos> {
        self.candidates.iter().map(|c| c.pos).collect()
    }
}

/// Candidate record of a synset, independent of the target word.
pub fn synset_candidate(idx: SynsetIdx, db: &OntologyDb, dict: &BilingualDict, vocab: &Vocabulary) -> Candidate {
    let rec = db.record(idx);
    Candidate {
        synset: rec.id.clone(),
        pos: rec.pos,
        translated: db.translated_lemmas(idx, dict, vocab),
        related: db.related_lemmas(idx, dict, vocab),
    }
}

/// MT+PWN candidate generation for one target word.
pub fn candidate_synsets(
    word: &str,
    db: &OntologyDb,
    dict: &BilingualDict,
    vocab: &Vocabulary,
) -> Result<CandidateSet> {
    let id = vocab.get(word).ok_or_else(|| Error::UnknownWord(word.to_string()))?;
    let mut found: BTreeMap<&str, SynsetIdx> = BTreeMap::new();
    for en in dict.translations(word) {
        for &s in db.synsets_with_lemma(en) {
            found.insert(db.record(s).id.as_str(), s);
        }
    }
    let candidates = found
        .into_values()
        .map(|s| synset_candidate(s, db, dict, vocab))
        .collect();
    Ok(CandidateSet { word: id, candidates })
}

pub(crate) fn read_json_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}
