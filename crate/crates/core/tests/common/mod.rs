//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const MICRO_DIM: usize = 64;
const DOMAINS: usize = 10;
const PER_DOMAIN: usize = 3;
const NOISE: f64 = 0.01;
const BRIDGE: f64 = 0.5;

/// File paths of a generated micro-language.
#[derive(Debug, Clone)]
pub struct MicroLanguage {
    pub emb: PathBuf,
    pub freq: PathBuf,
    pub synsets: PathBuf,
    pub dict: PathBuf,
    pub glosses: PathBuf,
    pub test: PathBuf,
    pub core: PathBuf,
    /// (word, pos) -> (good synsets, bad synsets)
    pub labels: BTreeMap<(String, String), (Vec<String>, Vec<String>)>,
}

fn pos_of(domain: usize) -> (&'static str, char) {
    match domain {
        0..=3 => ("noun", 'n'),
        4..=6 => ("verb", 'v'),
        _ => ("adj", 'a'),
    }
}

fn lemma(g: usize, j: usize) -> String {
    format!("lex{g}{j}")
}

fn synset_id(g: usize, j: usize) -> String {
    format!("{}.{}.01", lemma(g, j), pos_of(g).1)
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Weight of the negative partner-domain axis in a paired synset's meaning.
const CONTRAST: f64 = 0.3;

/// Sense direction of synset (g, j): a domain axis plus half a specific
/// axis. Synsets sharing an ambiguous lemma also point away from each
/// other's domain, so a word scores negatively against its wrong synset.
fn meaning(g: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; MICRO_DIM];
    v[g] = 1.0;
    v[DOMAINS + PER_DOMAIN * g + j] = 0.5;
    for (a, b) in ambiguous_pairs() {
        if a == (g, j) {
            v[b.0] = -CONTRAST;
        } else if b == (g, j) {
            v[a.0] = -CONTRAST;
        }
    }
    unit(v)
}

/// Unit vector with cosine `c` to unit `own`, in the plane of `own` and `other`.
fn lean(own: &[f64], other: &[f64], c: f64) -> Vec<f64> {
    let d: f64 = own.iter().zip(other).map(|(x, y)| x * y).sum();
    let perp = unit(other.iter().zip(own).map(|(o, w)| o - d * w).collect());
    own.iter().zip(&perp).map(|(w, p)| c * w + (1.0 - c * c).sqrt() * p).collect()
}

/// Pairs of synsets in different domains of the same POS sharing an
/// ambiguous English lemma.
fn ambiguous_pairs() -> Vec<((usize, usize), (usize, usize))> {
    vec![
        ((0, 0), (1, 0)),
        ((0, 1), (2, 1)),
        ((1, 2), (3, 2)),
        ((2, 0), (3, 0)),
        ((4, 0), (5, 0)),
        ((4, 2), (6, 1)),
        ((5, 1), (6, 2)),
        ((7, 0), (8, 1)),
        ((7, 2), (9, 0)),
        ((8, 2), (9, 1)),
    ]
}

/// Writes a 100-word, 30-synset language into `dir`. Monosemous words sit
/// on their synset's sense direction; each ambiguous English lemma makes
/// two target words candidates of a wrong synset, whose search space holds
/// two weakly related bridge words.
pub fn micro_language(dir: &Path, seed: u64) -> MicroLanguage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, NOISE).unwrap();
    let noisy = |v: &[f64], rng: &mut ChaCha8Rng| unit(v.iter().map(|x| x + normal.sample(rng)).collect());

    let mut words: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dict: Vec<(String, String)> = Vec::new();
    let mut labels: BTreeMap<(String, String), (Vec<String>, Vec<String>)> = BTreeMap::new();
    let mut synset_words: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    let mut lemmas: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();

    let pairs = ambiguous_pairs();
    let paired: Vec<(usize, usize)> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    for g in 0..DOMAINS {
        for j in 0..PER_DOMAIN {
            lemmas.insert((g, j), vec![lemma(g, j)]);
            let monos = if paired.contains(&(g, j)) { 1 } else { 2 };
            for i in 0..monos {
                let w = format!("mo{g}{j}{i}");
                words.push((w.clone(), noisy(&meaning(g, j), &mut rng)));
                dict.push((lemma(g, j), w.clone()));
                synset_words.entry((g, j)).or_default().push(w.clone());
                labels.insert((w, pos_of(g).0.into()), (vec![synset_id(g, j)], vec![]));
            }
        }
    }
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let amb = format!("amb{k}");
        lemmas.get_mut(&a).unwrap().push(amb.clone());
        lemmas.get_mut(&b).unwrap().push(amb.clone());
        for (own, other, side) in [(a, b, 'a'), (b, a, 'b')] {
            let w = format!("x{k}{side}");
            words.push((w.clone(), noisy(&meaning(own.0, own.1), &mut rng)));
            dict.push((lemma(own.0, own.1), w.clone()));
            dict.push((amb.clone(), w.clone()));
            synset_words.entry(own).or_default().push(w.clone());
            labels.insert(
                (w, pos_of(own.0).0.into()),
                (vec![synset_id(own.0, own.1)], vec![synset_id(other.0, other.1)]),
            );
            // two words of the wrong synset's sense leaning slightly towards `own`
            let lean = lean(&meaning(own.0, own.1), &meaning(other.0, other.1), BRIDGE);
            for i in 0..2 {
                let bridge = format!("br{k}{side}{i}");
                words.push((bridge.clone(), noisy(&lean, &mut rng)));
                dict.push((lemma(other.0, other.1), bridge.clone()));
                synset_words.entry(other).or_default().push(bridge.clone());
                labels.insert((bridge, pos_of(other.0).0.into()), (vec![synset_id(other.0, other.1)], vec![]));
            }
        }
    }
    assert_eq!(words.len(), 100);

    let mut emb = String::new();
    writeln!(emb, "{} {}", words.len(), MICRO_DIM).unwrap();
    for (w, v) in &words {
        write!(emb, "{w}").unwrap();
        for x in v {
            write!(emb, " {x}").unwrap();
        }
        emb.push('\n');
    }

    let mut freq = String::new();
    for (w, _) in &words {
        // ambiguous words are common, which keeps their SIF weight small
        let count = if w.starts_with('x') { 200_000 } else { 2_000 };
        writeln!(freq, "{w}\t{count}").unwrap();
    }
    // function words of the glosses
    freq.push_str("of\t500000\nthe\t900000\n");

    let mut synsets = String::new();
    let mut glosses = String::new();
    let mut core = String::new();
    for g in 0..DOMAINS {
        for j in 0..PER_DOMAIN {
            // every synset of a domain relates to the others
            let related: Vec<String> = (0..PER_DOMAIN).filter(|&i| i != j).map(|i| synset_id(g, i)).collect();
            let rec = serde_json::json!({
                "id": synset_id(g, j),
                "pos": pos_of(g).0,
                "lemmas": lemmas[&(g, j)],
                "gloss": format!("sense {j} of domain {g}"),
                "examples": [],
                "related": related,
            });
            writeln!(synsets, "{rec}").unwrap();
            // bridges lean towards another sense, so glosses avoid them
            let mono: Vec<&String> = synset_words[&(g, j)].iter().filter(|w| !w.starts_with("br")).take(2).collect();
            let gloss = serde_json::json!({
                "id": synset_id(g, j),
                "gloss": format!("{} of the {}.", mono[0], mono[1]),
                "examples": [format!("The {}!", mono[1]), format!("{}, {}", mono[0], mono[1])],
            });
            writeln!(glosses, "{gloss}").unwrap();
            if j == 0 {
                writeln!(core, "{}", synset_id(g, j)).unwrap();
            }
        }
    }

    let mut dict_text = String::new();
    for (en, tgt) in &dict {
        writeln!(dict_text, "{en}\t{tgt}").unwrap();
    }

    let mut test = String::new();
    for ((w, pos), (good, bad)) in &labels {
        let mut cands: Vec<serde_json::Value> = good
            .iter()
            .map(|s| serde_json::json!({"synsetId": s, "label": "good"}))
            .collect();
        cands.extend(bad.iter().map(|s| serde_json::json!({"synsetId": s, "label": "bad"})));
        writeln!(test, "{}", serde_json::json!({"word": w, "pos": pos, "candidates": cands})).unwrap();
    }

    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    MicroLanguage {
        emb: write("vectors.txt", &emb),
        freq: write("freq.tsv", &freq),
        synsets: write("synsets.jsonl", &synsets),
        dict: write("dict.tsv", &dict_text),
        glosses: write("glosses.jsonl", &glosses),
        test: write("test.jsonl", &test),
        core: write("core.txt", &core),
        labels,
    }
}
