//! Precision, recall, F0.5 and coverage against gold word-synset test sets,
//! plus cutoff tuning on a seeded split.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builder::{Cutoffs, WordnetEntry};
use crate::error::{Error, Result};
use crate::ontology::{read_json_lines, Pos};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Good,
    Bad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledCandidate {
    #[serde(rename = "synsetId")]
    pub synset_id: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestEntry {
    pub word: String,
    pub pos: Pos,
    pub candidates: Vec<LabeledCandidate>,
}

impl TestEntry {
    pub fn good(&self) -> BTreeSet<&str> {
        self.candidates
            .iter()
            .filter(|c| c.label == Label::Good)
            .map(|c| c.synset_id.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TestSet {
    pub entries: Vec<TestEntry>,
}

/// Parts of speech a test set may contain, in report order.
pub const TEST_POS: [Pos; 3] = [Pos::Adj, Pos::Noun, Pos::Verb];

impl TestSet {
    pub fn new(entries: Vec<TestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !TEST_POS.contains(&e.pos) {
                return Err(Error::Invalid(format!("test word `{}` has unsupported POS {}", e.word, e.pos)));
            }
            if !seen.insert((e.word.as_str(), e.pos)) {
                return Err(Error::Invalid(format!("duplicate test entry `{}` ({})", e.word, e.pos)));
            }
            let mut ids = HashSet::new();
            for c in &e.candidates {
                if !ids.insert(c.synset_id.as_str()) {
                    return Err(Error::Invalid(format!(
                        "test word `{}` lists candidate {} twice",
                        e.word, c.synset_id
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(read_json_lines(path.as_ref())?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.word.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Predicted synsets outside the entry's candidate list are ignored.
    #[default]
    CandidateRestricted,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Counts pooled over the words of a POS; F0.5 from the pooled P and R.
    #[default]
    Pooled,
    /// Per-word P, R and F0.5 averaged over the words of a POS.
    PerWordMacro,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "candidate-restricted" => Ok(EvalMode::CandidateRestricted),
            "raw" => Ok(EvalMode::Raw),
            other => Err(Error::InvalidConfig(format!("unknown evaluation mode `{other}`"))),
        }
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Aggregation::Pooled),
            "per-word-macro" => Ok(Aggregation::PerWordMacro),
            other => Err(Error::InvalidConfig(format!("unknown aggregation `{other}`"))),
        }
    }
}

/// `1.25 p r / (0.25 p + r)`, with 0 when both are 0.
pub fn f05(p: f64, r: f64) -> f64 {
    let denom = 0.25 * p + r;
    if denom == 0.0 {
        0.0
    } else {
        1.25 * p * r / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f05: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PosRow {
    pub pos: Pos,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Test words of this POS present in the predictions.
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub mode: EvalMode,
    pub aggregation: Aggregation,
    pub per_pos: Vec<PosRow>,
    /// Unweighted mean of the POS rows that have evaluated words.
    pub total: Metrics,
    pub coverage: Option<f64>,
    pub synset_count: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

type PredictionIndex<'a> = HashMap<(&'a str, Pos), BTreeSet<&'a str>>;

fn index_predictions(predictions: &[WordnetEntry]) -> PredictionIndex<'_> {
    let mut index: PredictionIndex<'_> = HashMap::new();
    for e in predictions {
        index
            .entry((e.word.as_str(), e.pos))
            .or_default()
            .extend(e.matches.iter().map(|m| m.synset_id.as_str()));
    }
    index
}

fn count_entry(entry: &TestEntry, predicted: &BTreeSet<&str>, mode: EvalMode) -> Counts {
    let good = entry.good();
    let listed: BTreeSet<&str> = entry.candidates.iter().map(|c| c.synset_id.as_str()).collect();
    let kept = predicted
        .iter()
        .filter(|s| mode == EvalMode::Raw || listed.contains(**s))
        .collect::<Vec<_>>();
    let tp = kept.iter().filter(|s| good.contains(**s)).count();
    Counts {
        tp,
        fp: kept.len() - tp,
        fn_: good.len() - tp,
    }
}

/// Scores predictions against a test set. Test words absent from the
/// predictions are not counted.
pub fn evaluate(
    predictions: &[WordnetEntry],
    test: &TestSet,
    mode: EvalMode,
    aggregation: Aggregation,
) -> EvalReport {
    let index = index_predictions(predictions);
    let mut per_pos = Vec::new();
    for pos in TEST_POS {
        let mut total = Counts::default();
        let mut words = 0;
        let (mut p_sum, mut p_n, mut r_sum, mut r_n, mut f_sum) = (0.0, 0usize, 0.0, 0usize, 0.0);
        for entry in test.entries.iter().filter(|e| e.pos == pos) {
            let Some(predicted) = index.get(&(entry.word.as_str(), pos)) else { continue };
            let c = count_entry(entry, predicted, mode);
            words += 1;
            total.tp += c.tp;
            total.fp += c.fp;
            total.fn_ += c.fn_;
            let (p, r) = (percent(c.tp, c.tp + c.fp), percent(c.tp, c.tp + c.fn_));
            if c.tp + c.fp > 0 {
                p_sum += p;
                p_n += 1;
            }
            if c.tp + c.fn_ > 0 {
                r_sum += r;
                r_n += 1;
            }
            f_sum += f05(p, r);
        }
        let metrics = match aggregation {
            Aggregation::Pooled => {
                let p = percent(total.tp, total.tp + total.fp);
                let r = percent(total.tp, total.tp + total.fn_);
                Metrics { precision: p, recall: r, f05: f05(p, r) }
            }
            Aggregation::PerWordMacro => {
                let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
                Metrics {
                    precision: mean(p_sum, p_n),
                    recall: mean(r_sum, r_n),
                    f05: mean(f_sum, words),
                }
            }
        };
        per_pos.push(PosRow {
            pos,
            metrics,
            true_positives: total.tp,
            false_positives: total.fp,
            false_negatives: total.fn_,
            words,
        });
    }
    let present: Vec<Metrics> = per_pos.iter().filter(|r| r.words > 0).map(|r| r.metrics).collect();
    let total = total_row(&present);
    let synset_count = predictions
        .iter()
        .flat_map(|e| e.matches.iter().map(|m| m.synset_id.as_str()))
        .collect::<BTreeSet<_>>()
        .len();
    EvalReport {
        mode,
        aggregation,
        per_pos,
        total,
        coverage: None,
        synset_count,
    }
}

/// Unweighted mean of the per-POS rows, metric by metric.
pub fn total_row(rows: &[Metrics]) -> Metrics {
    if rows.is_empty() {
        return Metrics { precision: 0.0, recall: 0.0, f05: 0.0 };
    }
    let n = rows.len() as f64;
    Metrics {
        precision: rows.iter().map(|m| m.precision).sum::<f64>() / n,
        recall: rows.iter().map(|m| m.recall).sum::<f64>() / n,
        f05: rows.iter().map(|m| m.f05).sum::<f64>() / n,
    }
}

/// Percent of core synsets matched by at least one prediction.
pub fn coverage(predictions: &[WordnetEntry], core: &[String]) -> Result<f64> {
    let core: BTreeSet<&str> = core.iter().map(String::as_str).collect();
    if core.is_empty() {
        return Err(Error::EmptyList);
    }
    let matched: HashSet<&str> = predictions
        .iter()
        .flat_map(|e| e.matches.iter().map(|m| m.synset_id.as_str()))
        .collect();
    let hit = core.iter().filter(|s| matched.contains(**s)).count();
    Ok(100.0 * hit as f64 / core.len() as f64)
}

/// One synset id per line; blank lines and `#` comments are skipped.
pub fn load_core_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// `(alpha, beta)` pairs on `{0, step, 2 step, ..., 1}` with `beta <= alpha`,
/// ordered by alpha then beta. `step` must divide 1 into whole steps.
pub fn default_grid(step: f64) -> Result<Vec<Cutoffs>> {
    let n = (1.0 / step).round();
    if step.is_nan() || step <= 0.0 || n < 1.0 || ((n * step) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("grid step {step} does not divide [0, 1]")));
    }
    let n = n as usize;
    let mut grid = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        for j in 0..=i {
            grid.push(Cutoffs {
                alpha: i as f64 / n as f64,
                beta: j as f64 / n as f64,
            });
        }
    }
    Ok(grid)
}

/// Seeded 50/50 split stratified by POS: within each POS the entries are
/// shuffled and the first `ceil(n / 2)` go to the tuning half.
pub fn split(test: &TestSet, seed: u64) -> (TestSet, TestSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tuning, mut held_out) = (Vec::new(), Vec::new());
    for pos in TEST_POS {
        let mut group: Vec<&TestEntry> = test.entries.iter().filter(|e| e.pos == pos).collect();
        group.shuffle(&mut rng);
        let half = group.len().div_ceil(2);
        tuning.extend(group[..half].iter().map(|e| (*e).clone()));
        held_out.extend(group[half..].iter().map(|e| (*e).clone()));
    }
    (TestSet { entries: tuning }, TestSet { entries: held_out })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TuneResult {
    pub alpha: f64,
    pub beta: f64,
    /// Total F0.5 on the tuning half at the chosen point.
    pub tuning_f05: f64,
    pub held_out: EvalReport,
    pub tuning_words: usize,
    pub held_out_words: usize,
}

/// Grid search over cutoffs. `build` produces predictions for given cutoffs;
/// the best point maximizes total F0.5 on the tuning half (ties: smaller
/// alpha, then smaller beta) and is reported on the held-out half.
pub fn tune<F>(
    build: F,
    test: &TestSet,
    grid: &[Cutoffs],
    seed: u64,
    mode: EvalMode,
    aggregation: Aggregation,
) -> Result<TuneResult>
where
    F: Fn(Cutoffs) -> Result<Vec<WordnetEntry>> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty tuning grid".into()));
    }
    if let Some(c) = grid.iter().find(|c| c.beta > c.alpha || !c.alpha.is_finite() || !c.beta.is_finite()) {
        return Err(Error::InvalidConfig(format!("grid point alpha {} beta {} is invalid", c.alpha, c.beta)));
    }
    let (tuning, held_out) = split(test, seed);
    let scores: Vec<f64> = grid
        .par_iter()
        .map(|&c| build(c).map(|p| evaluate(&p, &tuning, mode, aggregation).total.f05))
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| {
        grid[a]
            .alpha
            .total_cmp(&grid[b].alpha)
            .then(grid[a].beta.total_cmp(&grid[b].beta))
    });
    let mut best = order[0];
    for &i in &order[1..] {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    let chosen = grid[best];
    let report = evaluate(&build(chosen)?, &held_out, mode, aggregation);
    Ok(TuneResult {
        alpha: chosen.alpha,
        beta: chosen.beta,
        tuning_f05: scores[best],
        held_out: report,
        tuning_words: tuning.len(),
        held_out_words: held_out.len(),
    })
}

/// Plain-text table with one-decimal percentages: POS, F0.5, precision,
/// recall, coverage and synset count.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let coverage = report.coverage.map_or_else(|| "-".to_string(), |c| format!("{c:.1}"));
    let _ = writeln!(out, "{:<6} {:>6} {:>6} {:>6} {:>9} {:>8}", "POS", "F.5", "Prec.", "Rec.", "Coverage", "Synsets");
    for row in &report.per_pos {
        let m = row.metrics;
        let _ = writeln!(
            out,
            "{:<6} {:>6.1} {:>6.1} {:>6.1} {:>9} {:>8}",
            row.pos.to_string(),
            m.f05,
            m.precision,
            m.recall,
            "",
            ""
        );
    }
    let m = report.total;
    let _ = writeln!(
        out,
        "{:<6} {:>6.1} {:>6.1} {:>6.1} {:>9} {:>8}",
        "total", m.f05, m.precision, m.recall, coverage, report.synset_count
    );
    out
}

/// Per-POS row lookup.
pub fn rows_by_pos(report: &EvalReport) -> BTreeMap<Pos, &PosRow> {
    report.per_pos.iter().map(|r| (r.pos, r)).collect()
}
