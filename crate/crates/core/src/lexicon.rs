//! Target-language vocabulary, unit word vectors and corpus frequencies.
//!
//! Embedding files are whitespace-separated text: an optional `count dim`
//! header line, then one `token x_1 ... x_d` line per word. Every vector is
//! scaled to unit length at load time and zero or non-finite vectors are
//! rejected. Frequency files are UTF-8 TSV with `token<TAB>count` lines.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg;

/// Dense index of a vocabulary word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordId(pub usize);

impl WordId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered set of unique tokens; ids follow insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `token`, failing on duplicates.
    pub fn push(&mut self, token: &str) -> Result<WordId> {
        if self.index.contains_key(token) {
            return Err(Error::DuplicateToken(token.to_string()));
        }
        let id = WordId(self.words.len());
        self.words.push(token.to_string());
        self.index.insert(token.to_string(), id);
        Ok(id)
    }

    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Self::new();
        for t in tokens {
            vocab.push(t.as_ref())?;
        }
        Ok(vocab)
    }

    pub fn get(&self, token: &str) -> Option<WordId> {
        self.index.get(token).copied()
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id.0).map(String::as_str)
    }

    /// Token for an id known to be valid.
    pub fn token(&self, id: WordId) -> &str {
        &self.words[id.0]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &str)> {
        self.words
            .iter()
            .enumerate()
            .map(|(i, w)| (WordId(i), w.as_str()))
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Row-major matrix holding one `dim`-vector per vocabulary id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f64>,
    normalized: bool,
}

impl EmbeddingMatrix {
    /// Builds a matrix from raw rows. Rows are not normalized.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                    line: i + 1,
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            dim,
            data,
            normalized: false,
        })
    }

    /// Scales every row to unit norm. Rows already within `1e-12` of unit
    /// length are left bit-for-bit untouched so that a saved matrix reloads
    /// identically.
    pub fn normalize(&mut self, vocab: &Vocabulary) -> Result<()> {
        for (i, row) in self.data.chunks_mut(self.dim).enumerate() {
            let token = || vocab.word(WordId(i)).unwrap_or("?").to_string();
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(token()));
            }
            let n = linalg::norm(row);
            if n == 0.0 {
                return Err(Error::ZeroVector(token()));
            }
            if (n - 1.0).abs() > 1e-12 {
                for x in row.iter_mut() {
                    *x /= n;
                }
            }
        }
        self.normalized = true;
        Ok(())
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

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    #[inline]
    pub fn row(&self, id: WordId) -> &[f64] {
        &self.data[id.0 * self.dim..(id.0 + 1) * self.dim]
    }

    pub fn get(&self, id: WordId) -> Result<&[f64]> {
        if id.0 >= self.len() {
            return Err(Error::UnknownWordId(id.0));
        }
        Ok(self.row(id))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    /// Cosine similarity of two words: the dot product of their unit rows.
    pub fn cosine(&self, a: WordId, b: WordId) -> Result<f64> {
        Ok(linalg::dot(self.get(a)?, self.get(b)?))
    }

    /// Largest deviation of any row norm from 1.
    pub fn max_norm_deviation(&self) -> f64 {
        self.rows()
            .map(|r| (linalg::norm(r) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Vocabulary plus normalized vectors, the unit most stages consume.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub vocab: Vocabulary,
    pub matrix: EmbeddingMatrix,
}

impl Embeddings {
    pub fn new(vocab: Vocabulary, mut matrix: EmbeddingMatrix) -> Result<Self> {
        if vocab.len() != matrix.len() {
            return Err(Error::Invalid(format!(
                "vocabulary has {} words but matrix has {} rows",
                vocab.len(),
                matrix.len()
            )));
        }
        if !matrix.is_normalized() {
            matrix.normalize(&vocab)?;
        }
        Ok(Self { vocab, matrix })
    }

    /// Builds normalized embeddings from `(token, vector)` pairs.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, Vec<f64>)]) -> Result<Self> {
        let dim = pairs
            .first()
            .map(|(_, v)| v.len())
            .ok_or_else(|| Error::Invalid("no vectors given".into()))?;
        let vocab = Vocabulary::from_tokens(pairs.iter().map(|(t, _)| t.as_ref()))?;
        let rows: Vec<Vec<f64>> = pairs.iter().map(|(_, v)| v.clone()).collect();
        Self::new(vocab, EmbeddingMatrix::from_rows(dim, &rows)?)
    }

    pub fn load(path: impl AsRef<Path>, expect_dim: Option<usize>) -> Result<Self> {
        let (vocab, matrix) = load_embeddings(path, expect_dim)?;
        Ok(Self { vocab, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    #[inline]
    pub fn vector(&self, id: WordId) -> &[f64] {
        self.matrix.row(id)
    }

    pub fn cosine(&self, a: WordId, b: WordId) -> Result<f64> {
        self.matrix.cosine(a, b)
    }
}

/// Reads a text embedding file and unit-normalizes every row.
pub fn load_embeddings(
    path: impl AsRef<Path>,
    expect_dim: Option<usize>,
) -> Result<(Vocabulary, EmbeddingMatrix)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), path, expect_dim)
}

/// Parses embeddings from any reader; `origin` is only used in error messages.
pub fn read_embeddings<R: BufRead>(
    reader: R,
    origin: &Path,
    expect_dim: Option<usize>,
) -> Result<(Vocabulary, EmbeddingMatrix)> {
    let mut vocab = Vocabulary::new();
    let mut data = Vec::new();
    let mut dim = expect_dim;
    let mut header_count = None;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let rest: Vec<&str> = fields.collect();

        if lineno == 1 && rest.len() == 1 {
            if let (Ok(count), Ok(d)) = (token.parse::<usize>(), rest[0].parse::<usize>()) {
                if d == 0 {
                    return Err(Error::parse(origin, lineno, "header dimension must be positive"));
                }
                if let Some(expected) = dim {
                    if expected != d {
                        return Err(Error::DimensionMismatch {
                            expected,
                            found: d,
                            line: lineno,
                        });
                    }
                }
                dim = Some(d);
                header_count = Some(count);
                continue;
            }
        }

        let expected = *dim.get_or_insert(rest.len());
        if rest.len() != expected || expected == 0 {
            return Err(Error::DimensionMismatch {
                expected,
                found: rest.len(),
                line: lineno,
            });
        }
        for field in &rest {
            let x: f64 = field.parse().map_err(|_| {
                Error::parse(origin, lineno, format!("cannot parse `{field}` as a number"))
            })?;
            if !x.is_finite() {
                return Err(Error::NonFinite(token.to_string()));
            }
            data.push(x);
        }
        vocab.push(token)?;
    }

    if let Some(count) = header_count {
        if count != vocab.len() {
            return Err(Error::Invalid(format!(
                "header announces {count} words but {} were read",
                vocab.len()
            )));
        }
    }
    let dim = dim.filter(|_| !vocab.is_empty()).ok_or_else(|| {
        Error::Invalid(format!("{}: no embedding vectors found", origin.display()))
    })?;
    let mut matrix = EmbeddingMatrix {
        dim,
        data,
        normalized: false,
    };
    matrix.normalize(&vocab)?;
    Ok((vocab, matrix))
}

/// Writes embeddings with a `count dim` header using shortest round-trip
/// float formatting.
pub fn write_embeddings<W: Write>(mut out: W, vocab: &Vocabulary, matrix: &EmbeddingMatrix) -> std::io::Result<()> {
    writeln!(out, "{} {}", vocab.len(), matrix.dim())?;
    for (id, token) in vocab.iter() {
        write!(out, "{token}")?;
        for x in matrix.row(id) {
            write!(out, " {x:?}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_embeddings(path: impl AsRef<Path>, vocab: &Vocabulary, matrix: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_embeddings(&mut out, vocab, matrix)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Raw corpus counts per vocabulary id.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
    total: u64,
}

pub const DEFAULT_FREQUENCY_FLOOR: u64 = 1;

impl FrequencyTable {
    /// Builds a table from per-id counts, raising every count to at least `floor`.
    pub fn from_counts(mut counts: Vec<u64>, floor: u64) -> Result<Self> {
        for c in counts.iter_mut() {
            *c = (*c).max(floor);
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Invalid(
                "frequency table total is zero; use a positive floor".into(),
            ));
        }
        Ok(Self { counts, total })
    }

    /// Every word gets the same count (`floor`), i.e. a uniform distribution.
    pub fn uniform(vocab_len: usize) -> Result<Self> {
        Self::from_counts(vec![0; vocab_len], 1)
    }

    pub fn count(&self, id: WordId) -> u64 {
        self.counts[id.0]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn rel_freq(&self, id: WordId) -> f64 {
        self.counts[id.0] as f64 / self.total as f64
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Loads `token<TAB>count` lines. Tokens outside the vocabulary are ignored,
/// repeated tokens accumulate, and words missing from the file get `floor`.
pub fn load_frequencies(path: impl AsRef<Path>, vocab: &Vocabulary, floor: u64) -> Result<FrequencyTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_frequencies(BufReader::new(file), path, vocab, floor)
}

pub fn read_frequencies<R: BufRead>(
    reader: R,
    origin: &Path,
    vocab: &Vocabulary,
    floor: u64,
) -> Result<FrequencyTable> {
    let mut counts = vec![0u64; vocab.len()];
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (token, count) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(origin, lineno, "expected `token<TAB>count`"))?;
        let count: i64 = count.trim().parse().map_err(|_| {
            Error::parse(origin, lineno, format!("cannot parse count `{}`", count.trim()))
        })?;
        if count < 0 {
            return Err(Error::parse(origin, lineno, format!("negative count {count}")));
        }
        if let Some(id) = vocab.get(token) {
            counts[id.0] += count as u64;
        }
    }
    FrequencyTable::from_counts(counts, floor)
}
