//! The `autownet` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::builder::{
    build_wordnet, decide, prepare, synset_embeddings, write_wordnet, BuildConfig, Cutoffs, Method, Resources,
};
use crate::embedder::{
    read_synset_embeddings, write_synset_embeddings, EmbedConfig, FrequencyMode, SifConfig, SynsetEmbedding,
    DEFAULT_SIF_A,
};
use crate::error::{Error, Result};
use crate::evaluator::{
    coverage, default_grid, evaluate, load_core_list, render_table, tune, Aggregation, EvalMode, TestSet,
};
use crate::lexicon::{load_frequencies, Embeddings, FrequencyTable, DEFAULT_FREQUENCY_FLOOR};
use crate::linker::{assign_synset, sense_cluster, LinkConfig};
use crate::manifest::{digest_input, manifest_path, timestamp, InputDigest, RunManifest};
use crate::ontology::{candidate_synsets, BilingualDict, OntologyDb, Pos, TranslatedGlossTable};
use crate::purifier::{purify, PurifyConfig, DEFAULT_CLUSTER_SIZE, DEFAULT_MIN_COS};
use crate::wsi::{
    ksvd_fit, read_model, word_atoms, write_model, ModelFormat, WsiConfig, WsiModel, DEFAULT_ATOMS,
    DEFAULT_ITERATIONS, DEFAULT_SPARSITY,
};

/// Environment variable naming a directory for cached synset embeddings.
pub const CACHE_DIR_ENV: &str = "AUTOWNET_CACHE_DIR";

const FORMATS: &str = "\
File formats:
  embeddings   UTF-8 text; each line is a token followed by d whitespace-separated
               floats. An optional first line `count dim` is a header. Rows are
               L2-normalized at load.
  frequencies  UTF-8 TSV `token<TAB>count` with non-negative integer counts. Words
               missing from the file get the floor count.
  synsets      JSON lines with keys id, pos (noun|verb|adj|adv), lemmas, gloss,
               examples, related; relatedTyped is optional and ignored.
  dictionary   UTF-8 TSV `english<TAB>target`, many-to-many.
  glosses      JSON lines {id, gloss, examples} in the target language.
  model        WSI model; JSON, or little-endian binary when the path ends in .bin.
  wordnet      JSON lines {word, pos, matches: [{synsetId, score, provenance}], alphaW}.
  test set     JSON lines {word, pos, candidates: [{synsetId, label: good|bad}]}.
  core list    one synset id per line.
  pos config   JSON object mapping noun|verb|adj|adv to {alpha, beta}; adverbs
               without an entry use the adj entry.

Every output file is accompanied by <output>.manifest.json with the
configuration, input digests, tool version and timestamps.

Environment:
  AUTOWNET_CACHE_DIR  directory for cached synset embeddings (build, tune)
  RUST_LOG            log filter (default: warn)";

#[derive(Debug, Parser)]
#[command(name = "autownet", version, about = "Automated Wordnet construction", after_long_help = FORMATS)]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Log progress (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and check every input; print summary counts as JSON.
    #[command(after_long_help = FORMATS)]
    Validate(ValidateArgs),
    /// Compute synset embeddings for every synset in the database.
    #[command(after_long_help = FORMATS)]
    EmbedSynsets(EmbedSynsetsArgs),
    /// Fit the sparse-coding sense model (K-SVD) on the word vectors.
    #[command(after_long_help = FORMATS)]
    FitWsi(FitWsiArgs),
    /// Export purified sense clusters, one line per (word, positive atom):
    /// {word, atom, cluster, gamma}.
    #[command(after_long_help = FORMATS)]
    Purify(PurifyArgs),
    /// Match target words to synsets and write the Wordnet.
    #[command(after_long_help = FORMATS)]
    Build(BuildArgs),
    /// Group each word's candidate synsets by shared atom and similar clusters:
    /// {word, groups}.
    #[command(after_long_help = FORMATS)]
    ClusterSenses(ClusterArgs),
    /// Grid-search alpha and beta on a seeded half of a test set and report
    /// the other half.
    #[command(after_long_help = FORMATS)]
    Tune(TuneArgs),
    /// Score a Wordnet against a test set.
    #[command(after_long_help = FORMATS)]
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct EmbInput {
    /// Word vectors (text format, see below).
    #[arg(long, value_name = "PATH")]
    emb: PathBuf,

    /// Expected vector dimension; inferred from the file when omitted.
    #[arg(long, value_name = "D")]
    dim: Option<usize>,
}

#[derive(Debug, Args)]
struct LexInput {
    #[command(flatten)]
    emb: EmbInput,

    /// Corpus frequencies (TSV); uniform when omitted.
    #[arg(long, value_name = "PATH")]
    freq: Option<PathBuf>,

    /// Count given to vocabulary words missing from the frequency file.
    #[arg(long, value_name = "COUNT", default_value_t = DEFAULT_FREQUENCY_FLOOR)]
    freq_floor: u64,

    /// English synset database (JSON lines).
    #[arg(long, value_name = "PATH")]
    synsets: PathBuf,

    /// Bilingual dictionary (TSV english<TAB>target).
    #[arg(long, value_name = "PATH")]
    dict: PathBuf,

    /// Translated glosses and examples (JSON lines).
    #[arg(long, value_name = "PATH")]
    glosses: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EmbedOpts {
    /// SIF smoothing parameter a in a / (a + f).
    #[arg(long, value_name = "A", default_value_t = DEFAULT_SIF_A)]
    sif_a: f64,

    /// Use raw counts instead of relative frequencies in the SIF weight.
    #[arg(long)]
    raw_frequency: bool,

    /// Average the synset components without normalizing each first.
    #[arg(long)]
    raw_components: bool,
}

impl EmbedOpts {
    fn config(&self) -> EmbedConfig {
        EmbedConfig {
            sif: SifConfig {
                a: self.sif_a,
                frequency_mode: if self.raw_frequency { FrequencyMode::Raw } else { FrequencyMode::Relative },
            },
            normalize_components: !self.raw_components,
        }
    }
}

#[derive(Debug, Args)]
struct PurifyOpts {
    /// Target cluster size n.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_CLUSTER_SIZE)]
    n: usize,

    /// Cosine floor against both the word and the atom for search-space words.
    #[arg(long, value_name = "COS", default_value_t = DEFAULT_MIN_COS, allow_negative_numbers = true)]
    min_cos: f64,
}

impl PurifyOpts {
    fn config(&self) -> PurifyConfig {
        PurifyConfig { n: self.n, min_cos: self.min_cos }
    }
}

#[derive(Debug, Args)]
struct MatchOpts {
    /// Matching method: baseline, representation or representation+wsi.
    #[arg(long, value_name = "METHOD", default_value = "representation+wsi")]
    method: Method,

    /// WSI model from fit-wsi; required for representation+wsi.
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,

    /// Precomputed synset embeddings from embed-synsets (must use the same method).
    #[arg(long, value_name = "PATH")]
    synset_cache: Option<PathBuf>,

    /// Search only related-synset lemmas, not the synset's own, when purifying.
    #[arg(long)]
    exclude_own_lemmas: bool,

    /// Let recovered synsets enable further recovery (experimental).
    #[arg(long)]
    fixpoint_recovery: bool,

    #[command(flatten)]
    purify: PurifyOpts,

    #[command(flatten)]
    embed: EmbedOpts,
}

impl MatchOpts {
    fn config(&self, alpha: f64, beta: f64, per_pos: BTreeMap<Pos, Cutoffs>) -> BuildConfig {
        BuildConfig {
            method: self.method,
            alpha,
            beta,
            per_pos,
            fixpoint_recovery: self.fixpoint_recovery,
            link: LinkConfig {
                purify: self.purify.config(),
                include_own_lemmas: !self.exclude_own_lemmas,
            },
            embed: self.embed.config(),
        }
    }
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    lex: LexInput,

    /// Test set to check against the other inputs.
    #[arg(long, value_name = "PATH")]
    test: Option<PathBuf>,

    /// Core synset list to check against the database.
    #[arg(long, value_name = "PATH")]
    core: Option<PathBuf>,

    /// Also write the summary JSON here.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EmbedSynsetsArgs {
    #[command(flatten)]
    lex: LexInput,

    /// baseline (mean of translated lemmas) or representation (four-part).
    #[arg(long, value_name = "METHOD", default_value = "representation")]
    method: Method,

    #[command(flatten)]
    embed: EmbedOpts,

    /// Output JSON lines {synsetId, vector, componentsUsed}.
    #[arg(short, long, value_name = "PATH")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct FitWsiArgs {
    #[command(flatten)]
    emb: EmbInput,

    /// Number of atoms k.
    #[arg(long, default_value_t = DEFAULT_ATOMS)]
    k: usize,

    /// Maximum nonzero coefficients per word s.
    #[arg(long, default_value_t = DEFAULT_SPARSITY)]
    s: usize,

    /// K-SVD sweeps.
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,

    /// RNG seed for atom initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Atoms used by fewer words than this are reinitialized after a sweep.
    #[arg(long, default_value_t = 1)]
    reinit_threshold: usize,

    /// Output model; binary when the path ends in .bin, JSON otherwise.
    #[arg(short, long, value_name = "PATH")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct WordSelection {
    /// Word to process (repeatable).
    #[arg(long = "word", value_name = "WORD")]
    words: Vec<String>,

    /// File with one word per line to process.
    #[arg(long = "words", value_name = "PATH")]
    word_file: Option<PathBuf>,
}

impl WordSelection {
    /// `None` selects every word.
    fn resolve(&self) -> Result<Option<BTreeSet<String>>> {
        if self.words.is_empty() && self.word_file.is_none() {
            return Ok(None);
        }
        let mut set: BTreeSet<String> = self.words.iter().cloned().collect();
        if let Some(p) = &self.word_file {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            set.extend(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string));
        }
        Ok(Some(set))
    }

    fn inputs(&self) -> Vec<(&'static str, &Path)> {
        self.word_file.iter().map(|p| ("words", p.as_path())).collect()
    }
}

#[derive(Debug, Args)]
struct PurifyArgs {
    #[command(flatten)]
    emb: EmbInput,

    /// WSI model from fit-wsi.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,

    #[command(flatten)]
    select: WordSelection,

    #[command(flatten)]
    purify: PurifyOpts,

    /// Output JSON lines {word, atom, cluster, gamma}.
    #[arg(short, long, value_name = "PATH")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[command(flatten)]
    lex: LexInput,

    #[command(flatten)]
    matching: MatchOpts,

    /// Score cutoff alpha.
    #[arg(long, default_value_t = 0.4, allow_negative_numbers = true)]
    alpha: f64,

    /// Recovery cutoff beta (<= alpha).
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    beta: f64,

    /// Per-POS cutoffs (JSON), overriding --alpha/--beta.
    #[arg(long, value_name = "PATH")]
    pos_config: Option<PathBuf>,

    /// Output Wordnet (JSON lines).
    #[arg(short, long, value_name = "PATH")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    lex: LexInput,

    /// WSI model from fit-wsi.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,

    #[command(flatten)]
    select: WordSelection,

    /// Search only related-synset lemmas, not the synset's own, when purifying.
    #[arg(long)]
    exclude_own_lemmas: bool,

    #[command(flatten)]
    purify: PurifyOpts,

    /// Output JSON lines {word, groups}.
    #[arg(short, long, value_name = "PATH")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EvalOpts {
    /// candidate-restricted drops predicted synsets outside the test candidates; raw keeps them.
    #[arg(long, value_name = "MODE", default_value = "candidate-restricted")]
    mode: EvalMode,

    /// pooled (micro counts within each POS) or per-word-macro.
    #[arg(long, value_name = "AGG", default_value = "pooled")]
    aggregation: Aggregation,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    lex: LexInput,

    #[command(flatten)]
    matching: MatchOpts,

    /// Gold test set (JSON lines).
    #[arg(long, value_name = "PATH")]
    test: PathBuf,

    /// Seed of the stratified 50/50 split.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Spacing of the default alpha/beta grid on [0, 1].
    #[arg(long, value_name = "STEP", default_value_t = 0.01)]
    grid_step: f64,

    /// Explicit alpha values (comma-separated), replacing the default grid.
    #[arg(long, value_name = "A,..", value_delimiter = ',', allow_negative_numbers = true)]
    alphas: Vec<f64>,

    /// Explicit beta values (comma-separated); defaults to the alpha values.
    #[arg(long, value_name = "B,..", value_delimiter = ',', allow_negative_numbers = true)]
    betas: Vec<f64>,

    #[command(flatten)]
    eval: EvalOpts,

    /// Output JSON {alpha, beta, tuningF05, heldOut, ...}.
    #[arg(short, long, value_name = "PATH")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Wordnet to score (JSON lines from build).
    #[arg(long, value_name = "PATH")]
    predictions: PathBuf,

    /// Gold test set (JSON lines).
    #[arg(long, value_name = "PATH")]
    test: PathBuf,

    /// Core synset list for the coverage column.
    #[arg(long, value_name = "PATH")]
    core: Option<PathBuf>,

    #[command(flatten)]
    eval: EvalOpts,

    /// Machine-readable report with full precision for both aggregations.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on usage or input errors, 2 on internal errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("internal error: cannot start worker threads: {e}");
            return 2;
        }
    };
    let threads = pool.current_num_threads();
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| pool.install(|| execute(cli.command, threads))));
    match outcome {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            1
        }
        Err(_) => {
            eprintln!("internal error: worker panicked");
            2
        }
    }
}

fn execute(command: Command, threads: usize) -> Result<()> {
    match command {
        Command::Validate(a) => cmd_validate(a, threads),
        Command::EmbedSynsets(a) => cmd_embed_synsets(a, threads),
        Command::FitWsi(a) => cmd_fit_wsi(a, threads),
        Command::Purify(a) => cmd_purify(a, threads),
        Command::Build(a) => cmd_build(a, threads),
        Command::ClusterSenses(a) => cmd_cluster(a, threads),
        Command::Tune(a) => cmd_tune(a, threads),
        Command::Eval(a) => cmd_eval(a, threads),
    }
}

struct Run {
    command: &'static str,
    started_at: String,
    inputs: Vec<InputDigest>,
    threads: usize,
}

impl Run {
    fn start(command: &'static str, threads: usize, inputs: &[(&str, &Path)]) -> Result<Self> {
        let inputs = inputs.iter().map(|(role, p)| digest_input(role, p)).collect::<Result<_>>()?;
        Ok(Self {
            command,
            started_at: timestamp(),
            inputs,
            threads,
        })
    }

    fn digest(&self, role: &str) -> Option<&str> {
        self.inputs.iter().find(|d| d.role == role).map(|d| d.sha256.as_str())
    }

    fn finish(self, output: &Path, config: serde_json::Value, summary: Option<serde_json::Value>) -> Result<()> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command.to_string(),
            config,
            inputs: self.inputs,
            outputs: vec![output.to_path_buf()],
            summary,
            threads: self.threads,
            started_at: self.started_at,
            finished_at: timestamp(),
        };
        manifest.write(manifest_path(output))
    }
}

fn lex_inputs(l: &LexInput) -> Vec<(&'static str, &Path)> {
    let mut v: Vec<(&'static str, &Path)> = vec![
        ("embeddings", l.emb.emb.as_path()),
        ("synsets", l.synsets.as_path()),
        ("dictionary", l.dict.as_path()),
    ];
    if let Some(p) = &l.freq {
        v.push(("frequencies", p.as_path()));
    }
    if let Some(p) = &l.glosses {
        v.push(("glosses", p.as_path()));
    }
    v
}

fn load_lex(l: &LexInput) -> Result<Resources> {
    let emb = Embeddings::load(&l.emb.emb, l.emb.dim)?;
    let freqs = match &l.freq {
        Some(p) => load_frequencies(p, &emb.vocab, l.freq_floor)?,
        None => FrequencyTable::uniform(emb.len())?,
    };
    let db = OntologyDb::load(&l.synsets)?;
    let dict = BilingualDict::load(&l.dict)?;
    let glosses = match &l.glosses {
        Some(p) => TranslatedGlossTable::load(p, &db)?,
        None => TranslatedGlossTable::default(),
    };
    info!("loaded {} words (d = {}), {} synsets", emb.len(), emb.dim(), db.len());
    Ok(Resources { emb, freqs, db, dict, glosses })
}

fn load_model(path: &Path, emb: &Embeddings) -> Result<WsiModel> {
    let (model, words) = read_model(path)?;
    if words != emb.vocab.words() {
        return Err(Error::Invalid(format!(
            "model {} was fitted on a different vocabulary",
            path.display()
        )));
    }
    if model.dim() != emb.dim() {
        return Err(Error::DimensionMismatch {
            expected: emb.dim(),
            found: model.dim(),
            line: 0,
        });
    }
    Ok(model)
}

fn write_json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_validate(a: ValidateArgs, threads: usize) -> Result<()> {
    let mut inputs = lex_inputs(&a.lex);
    inputs.extend(a.test.iter().map(|p| ("test", p.as_path())));
    inputs.extend(a.core.iter().map(|p| ("core", p.as_path())));
    let run = Run::start("validate", threads, &inputs)?;
    let res = load_lex(&a.lex)?;

    let mut synsets_by_pos: BTreeMap<Pos, usize> = BTreeMap::new();
    for r in res.db.records() {
        *synsets_by_pos.entry(r.pos).or_default() += 1;
    }
    let sets: Vec<_> = res
        .emb
        .vocab
        .words()
        .par_iter()
        .map(|w| candidate_synsets(w, &res.db, &res.dict, &res.emb.vocab))
        .collect::<Result<_>>()?;
    let mut per_pos: BTreeMap<Pos, (usize, usize)> = BTreeMap::new();
    for cs in &sets {
        for pos in cs.parts_of_speech() {
            let e = per_pos.entry(pos).or_default();
            e.0 += 1;
            e.1 += cs.with_pos(pos).len();
        }
    }
    let candidates: BTreeMap<String, serde_json::Value> = per_pos
        .iter()
        .map(|(pos, (words, cands))| {
            (
                pos.to_string(),
                json!({"words": words, "candidates": cands, "meanCandidates": *cands as f64 / *words as f64}),
            )
        })
        .collect();
    let mut summary = json!({
        "vocabulary": res.emb.len(),
        "dim": res.emb.dim(),
        "maxNormDeviation": res.emb.matrix.max_norm_deviation(),
        "frequencyTotal": res.freqs.total(),
        "synsets": res.db.len(),
        "synsetsByPos": synsets_by_pos.iter().map(|(p, n)| (p.to_string(), *n)).collect::<BTreeMap<_, _>>(),
        "dictionaryEntries": res.dict.len(),
        "dictionaryTransposeConsistent": res.dict.is_transpose_consistent(),
        "glosses": res.glosses.len(),
        "wordsWithCandidates": sets.iter().filter(|c| !c.is_empty()).count(),
        "candidatesByPos": candidates,
    });
    if let Some(p) = &a.test {
        let test = TestSet::load(p)?;
        let oov = test.words().into_iter().filter(|w| res.emb.vocab.get(w).is_none()).count();
        let unknown = test
            .entries
            .iter()
            .flat_map(|e| &e.candidates)
            .filter(|c| res.db.get(&c.synset_id).is_none())
            .count();
        summary["testSet"] = json!({
            "entries": test.len(),
            "pairs": test.entries.iter().map(|e| e.candidates.len()).sum::<usize>(),
            "wordsOutOfVocabulary": oov,
            "unknownSynsets": unknown,
        });
    }
    if let Some(p) = &a.core {
        let core = load_core_list(p)?;
        let unknown = core.iter().filter(|s| res.db.get(s).is_none()).count();
        summary["core"] = json!({"synsets": core.len(), "unknownSynsets": unknown});
    }
    print_json(&summary)?;
    if let Some(out) = &a.output {
        write_json(out, &summary)?;
        run.finish(out, json!({"d": res.emb.dim(), "freqFloor": a.lex.freq_floor}), None)?;
    }
    Ok(())
}

fn cmd_embed_synsets(a: EmbedSynsetsArgs, threads: usize) -> Result<()> {
    if a.method == Method::RepresentationWsi {
        return Err(Error::InvalidConfig(
            "embed-synsets takes --method baseline or representation".into(),
        ));
    }
    let run = Run::start("embed-synsets", threads, &lex_inputs(&a.lex))?;
    let res = load_lex(&a.lex)?;
    let cfg = a.embed.config();
    cfg.sif.validate()?;
    let ids: BTreeSet<String> = res.db.records().iter().map(|r| r.id.clone()).collect();
    let computed = synset_embeddings(&res, a.method, &cfg, &ids);
    let mut items = Vec::with_capacity(computed.len());
    let mut unscorable = 0usize;
    for (id, e) in computed {
        match e {
            Ok(e) => items.push(e),
            Err(err) => {
                unscorable += 1;
                info!("{id}: {err}");
            }
        }
    }
    write_synset_embeddings(&a.output, &items)?;
    let summary = json!({"synsets": ids.len(), "embedded": items.len(), "unscorable": unscorable});
    eprintln!("{summary}");
    run.finish(
        &a.output,
        json!({"d": res.emb.dim(), "method": a.method, "embed": cfg, "freqFloor": a.lex.freq_floor}),
        Some(summary),
    )
}

fn cmd_fit_wsi(a: FitWsiArgs, threads: usize) -> Result<()> {
    let run = Run::start("fit-wsi", threads, &[("embeddings", a.emb.emb.as_path())])?;
    let emb = Embeddings::load(&a.emb.emb, a.emb.dim)?;
    let cfg = WsiConfig {
        k: a.k,
        s: a.s,
        iterations: a.iterations,
        seed: a.seed,
        reinit_threshold: a.reinit_threshold,
    };
    let model = ksvd_fit(&emb.matrix, &cfg)?;
    write_model(&a.output, &model, emb.vocab.words(), ModelFormat::from_path(&a.output))?;
    let summary = json!({"words": emb.len(), "finalMse": model.final_mse(), "mseHistory": model.mse_history});
    info!("final mean squared residual {}", model.final_mse());
    run.finish(&a.output, json!({"d": emb.dim(), "wsi": cfg}), Some(summary))
}

#[derive(Serialize)]
struct ClusterLine<'a> {
    word: &'a str,
    atom: usize,
    cluster: Vec<&'a str>,
    gamma: f64,
}

fn cmd_purify(a: PurifyArgs, threads: usize) -> Result<()> {
    let mut inputs = vec![("embeddings", a.emb.emb.as_path()), ("model", a.model.as_path())];
    inputs.extend(a.select.inputs());
    let run = Run::start("purify", threads, &inputs)?;
    let emb = Embeddings::load(&a.emb.emb, a.emb.dim)?;
    let model = load_model(&a.model, &emb)?;
    let cfg = a.purify.config();
    cfg.validate()?;
    let words = match a.select.resolve()? {
        Some(set) => set
            .iter()
            .map(|w| emb.vocab.get(w).ok_or_else(|| Error::UnknownWord(w.clone())))
            .collect::<Result<Vec<_>>>()?,
        None => emb.vocab.iter().map(|(id, _)| id).collect(),
    };
    let space: Vec<_> = emb.vocab.iter().map(|(id, _)| id).collect();
    let clusters: Vec<Vec<(usize, crate::purifier::PurifiedCluster)>> = words
        .par_iter()
        .map(|&w| {
            word_atoms(&model, w)?
                .into_iter()
                .map(|atom| purify(&emb, &model.atoms, w, atom, &space, &cfg).map(|c| (atom, c)))
                .collect()
        })
        .collect::<Result<_>>()?;
    let vocab = &emb.vocab;
    let lines: Vec<ClusterLine<'_>> = words
        .iter()
        .zip(&clusters)
        .flat_map(|(&w, cs)| {
            cs.iter().map(move |(atom, c)| ClusterLine {
                word: vocab.token(w),
                atom: *atom,
                cluster: c.words.iter().map(|&x| vocab.token(x)).collect(),
                gamma: c.gamma,
            })
        })
        .collect();
    write_json_lines(&a.output, &lines)?;
    run.finish(
        &a.output,
        json!({"d": emb.dim(), "k": model.num_atoms(), "s": model.config.s, "purify": cfg}),
        Some(json!({"words": words.len(), "clusters": lines.len()})),
    )
}

/// Synset embeddings from an explicit cache file, or from the cache
/// directory keyed by input digests and embedding settings.
fn synset_cache(
    res: &Resources,
    run: &Run,
    method: Method,
    cfg: &EmbedConfig,
    freq_floor: u64,
    explicit: Option<&Path>,
) -> Result<Option<BTreeMap<String, SynsetEmbedding>>> {
    if let Some(p) = explicit {
        let items = read_synset_embeddings(p)?;
        return Ok(Some(items.into_iter().map(|e| (e.synset_id.clone(), e)).collect()));
    }
    let Some(dir) = std::env::var_os(CACHE_DIR_ENV) else {
        return Ok(None);
    };
    let dir = PathBuf::from(dir);
    let key_source = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "embeddings": run.digest("embeddings"),
        "synsets": run.digest("synsets"),
        "dictionary": run.digest("dictionary"),
        "frequencies": run.digest("frequencies"),
        "glosses": run.digest("glosses"),
        "freqFloor": freq_floor,
        "method": method,
        "embed": cfg,
    });
    let key = {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(serde_json::to_vec(&key_source)?))
    };
    let path = dir.join(format!("synsets-{}.jsonl", &key[..32]));
    if path.exists() {
        info!("using cached synset embeddings {}", path.display());
        let items = read_synset_embeddings(&path)?;
        return Ok(Some(items.into_iter().map(|e| (e.synset_id.clone(), e)).collect()));
    }
    let ids: BTreeSet<String> = res.db.records().iter().map(|r| r.id.clone()).collect();
    let map: BTreeMap<String, SynsetEmbedding> = synset_embeddings(res, method, cfg, &ids)
        .into_iter()
        .filter_map(|(id, e)| e.ok().map(|e| (id, e)))
        .collect();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let items: Vec<SynsetEmbedding> = map.values().cloned().collect();
    write_synset_embeddings(&path, &items)?;
    Ok(Some(map))
}

fn match_inputs<'a>(lex: &'a LexInput, m: &'a MatchOpts) -> Vec<(&'static str, &'a Path)> {
    let mut inputs = lex_inputs(lex);
    if let Some(p) = &m.model {
        inputs.push(("model", p.as_path()));
    }
    if let Some(p) = &m.synset_cache {
        inputs.push(("synset-cache", p.as_path()));
    }
    inputs
}

fn model_for(m: &MatchOpts, emb: &Embeddings) -> Result<Option<WsiModel>> {
    match (&m.model, m.method.uses_wsi()) {
        (Some(p), true) => Ok(Some(load_model(p, emb)?)),
        (None, true) => Err(Error::InvalidConfig("--method representation+wsi requires --model".into())),
        (Some(_), false) => {
            warn!("--model is ignored by --method {}", m.method);
            Ok(None)
        }
        (None, false) => Ok(None),
    }
}

fn config_snapshot(cfg: &BuildConfig, res: &Resources, model: Option<&WsiModel>, freq_floor: u64) -> serde_json::Value {
    json!({
        "d": res.emb.dim(),
        "k": model.map(|m| m.num_atoms()),
        "s": model.map(|m| m.config.s),
        "seed": model.map(|m| m.config.seed),
        "n": cfg.link.purify.n,
        "a": cfg.embed.sif.a,
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "freqFloor": freq_floor,
        "build": cfg,
    })
}

fn cmd_build(a: BuildArgs, threads: usize) -> Result<()> {
    let mut inputs = match_inputs(&a.lex, &a.matching);
    if let Some(p) = &a.pos_config {
        inputs.push(("pos-config", p.as_path()));
    }
    let run = Run::start("build", threads, &inputs)?;
    let per_pos: BTreeMap<Pos, Cutoffs> = match &a.pos_config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text)?
        }
        None => BTreeMap::new(),
    };
    let cfg = a.matching.config(a.alpha, a.beta, per_pos);
    cfg.validate()?;
    let res = load_lex(&a.lex)?;
    let model = model_for(&a.matching, &res.emb)?;
    let cache = synset_cache(
        &res,
        &run,
        cfg.method,
        &cfg.embed,
        a.lex.freq_floor,
        a.matching.synset_cache.as_deref(),
    )?;
    let out = build_wordnet(&res, model.as_ref(), &cfg, cache.as_ref())?;
    for d in &out.diagnostics {
        info!("{d}");
    }
    write_wordnet(&a.output, &out.entries)?;
    let summary = serde_json::to_value(&out.summary)?;
    eprintln!("{summary}");
    run.finish(
        &a.output,
        config_snapshot(&cfg, &res, model.as_ref(), a.lex.freq_floor),
        Some(summary),
    )
}

fn cmd_cluster(a: ClusterArgs, threads: usize) -> Result<()> {
    let mut inputs = lex_inputs(&a.lex);
    inputs.push(("model", a.model.as_path()));
    inputs.extend(a.select.inputs());
    let run = Run::start("cluster-senses", threads, &inputs)?;
    let res = load_lex(&a.lex)?;
    let model = load_model(&a.model, &res.emb)?;
    let link = LinkConfig {
        purify: a.purify.config(),
        include_own_lemmas: !a.exclude_own_lemmas,
    };
    link.purify.validate()?;
    let selected = a.select.resolve()?;
    let words: Vec<&String> = match &selected {
        Some(set) => {
            if let Some(w) = set.iter().find(|w| res.emb.vocab.get(w).is_none()) {
                return Err(Error::UnknownWord(w.clone()));
            }
            res.emb.vocab.words().iter().filter(|w| set.contains(*w)).collect()
        }
        None => res.emb.vocab.words().iter().collect(),
    };
    let groups: Vec<Option<crate::linker::SenseClustering>> = words
        .par_iter()
        .map(|w| {
            let cs = candidate_synsets(w, &res.db, &res.dict, &res.emb.vocab)?;
            if cs.is_empty() {
                return Ok(None);
            }
            let assignments = cs
                .candidates
                .iter()
                .map(|c| assign_synset(&res.emb, &model, cs.word, c, &link))
                .collect::<Result<Vec<_>>>()?;
            sense_cluster(&res.emb, w, &assignments).map(Some)
        })
        .collect::<Result<_>>()?;
    let groups: Vec<_> = groups.into_iter().flatten().collect();
    write_json_lines(&a.output, &groups)?;
    let merged = groups.iter().filter(|g| g.groups.iter().any(|x| x.len() > 1)).count();
    run.finish(
        &a.output,
        json!({"d": res.emb.dim(), "k": model.num_atoms(), "s": model.config.s, "link": link}),
        Some(json!({"words": groups.len(), "wordsWithMerges": merged})),
    )
}

fn tuning_grid(a: &TuneArgs) -> Result<Vec<Cutoffs>> {
    if a.alphas.is_empty() {
        if !a.betas.is_empty() {
            return Err(Error::InvalidConfig("--betas needs --alphas".into()));
        }
        return default_grid(a.grid_step);
    }
    let betas = if a.betas.is_empty() { &a.alphas } else { &a.betas };
    let mut grid = Vec::new();
    for &alpha in &a.alphas {
        for &beta in betas {
            if beta <= alpha {
                grid.push(Cutoffs { alpha, beta });
            }
        }
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("no grid point satisfies beta <= alpha".into()));
    }
    Ok(grid)
}

fn cmd_tune(a: TuneArgs, threads: usize) -> Result<()> {
    let mut inputs = match_inputs(&a.lex, &a.matching);
    inputs.push(("test", a.test.as_path()));
    let run = Run::start("tune", threads, &inputs)?;
    let grid = tuning_grid(&a)?;
    let test = TestSet::load(&a.test)?;
    let res = load_lex(&a.lex)?;
    let model = model_for(&a.matching, &res.emb)?;
    let base = a.matching.config(1.0, 0.0, BTreeMap::new());
    base.validate()?;
    let cache = synset_cache(
        &res,
        &run,
        base.method,
        &base.embed,
        a.lex.freq_floor,
        a.matching.synset_cache.as_deref(),
    )?;
    let words: BTreeSet<String> = test.words().into_iter().map(str::to_string).collect();
    let (prepared, _) = prepare(&res, model.as_ref(), &base, cache.as_ref(), Some(&words))?;
    let build = |c: Cutoffs| {
        prepared
            .iter()
            .map(|p| decide(&res.emb, p, base.method, c, base.fixpoint_recovery))
            .collect::<Result<Vec<_>>>()
    };
    let result = tune(build, &test, &grid, a.seed, a.eval.mode, a.eval.aggregation)?;
    write_json(&a.output, &result)?;
    println!(
        "alpha {:.2}  beta {:.2}  tuning F.5 {:.1}  ({} grid points)",
        result.alpha,
        result.beta,
        result.tuning_f05,
        grid.len()
    );
    print!("{}", render_table(&result.held_out));
    let mut config = config_snapshot(&base, &res, model.as_ref(), a.lex.freq_floor);
    config["alpha"] = json!(null);
    config["beta"] = json!(null);
    config["tune"] = json!({
        "seed": a.seed,
        "gridPoints": grid.len(),
        "gridStep": if a.alphas.is_empty() { Some(a.grid_step) } else { None },
        "mode": a.eval.mode,
        "aggregation": a.eval.aggregation,
    });
    run.finish(
        &a.output,
        config,
        Some(json!({"alpha": result.alpha, "beta": result.beta, "tuningF05": result.tuning_f05})),
    )
}

fn cmd_eval(a: EvalArgs, threads: usize) -> Result<()> {
    let mut inputs = vec![("predictions", a.predictions.as_path()), ("test", a.test.as_path())];
    inputs.extend(a.core.iter().map(|p| ("core", p.as_path())));
    let run = Run::start("eval", threads, &inputs)?;
    let predictions = crate::builder::read_wordnet(&a.predictions)?;
    let test = TestSet::load(&a.test)?;
    let cov = match &a.core {
        Some(p) => Some(coverage(&predictions, &load_core_list(p)?)?),
        None => None,
    };
    let mut reports = BTreeMap::new();
    for (name, agg) in [("pooled", Aggregation::Pooled), ("perWordMacro", Aggregation::PerWordMacro)] {
        let mut r = evaluate(&predictions, &test, a.eval.mode, agg);
        r.coverage = cov;
        reports.insert(name, r);
    }
    let shown = if a.eval.aggregation == Aggregation::Pooled { "pooled" } else { "perWordMacro" };
    print!("{}", render_table(&reports[shown]));
    if let Some(out) = &a.output {
        write_json(out, &reports)?;
        run.finish(out, json!({"mode": a.eval.mode, "aggregation": a.eval.aggregation}), None)?;
    }
    Ok(())
}
