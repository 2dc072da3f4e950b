use std::collections::{BTreeMap, BTreeSet};

use approx::assert_abs_diff_eq;
use autownet::builder::{Match, Provenance, WordnetEntry};
use autownet::evaluator::{evaluate, f05, split, Aggregation, EvalMode, Label, LabeledCandidate, TestEntry, TestSet};
use autownet::lexicon::{read_embeddings, write_embeddings};
use autownet::linker::{cluster_similarity, is_similar, sense_cluster, SynsetAssignment};
use autownet::purifier::{objective, purify, PurifiedCluster, PurifyConfig};
use autownet::wsi::{omp_encode, Atoms};
use autownet::{Embeddings, Pos, WordId};
use proptest::prelude::*;

fn unit_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, d).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
}

fn embeddings(n: usize, d: usize) -> impl Strategy<Value = Embeddings> {
    prop::collection::vec(unit_vec(d), n).prop_map(|rows| {
        let pairs: Vec<(String, Vec<f64>)> = rows.into_iter().enumerate().map(|(i, v)| (format!("w{i:02}"), v)).collect();
        Embeddings::from_pairs(&pairs).unwrap()
    })
}

fn atom(d: usize) -> impl Strategy<Value = Atoms> {
    unit_vec(d).prop_map(|v| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Atoms::from_rows(&[v.iter().map(|x| x / n).collect()]).unwrap()
    })
}

fn ids(v: &[usize]) -> Vec<WordId> {
    v.iter().map(|&i| WordId(i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f05_weights_precision(p in 0.01..100.0f64, r in 0.01..100.0f64) {
        let f1 = 2.0 * p * r / (p + r);
        if r > p {
            prop_assert!(f05(p, r) < f1);
        } else if p > r {
            prop_assert!(f05(p, r) > f1);
        }
        prop_assert!(f05(p, r) <= p.max(r) + 1e-12);
    }

    #[test]
    fn purify_invariants(
        emb in embeddings(24, 4),
        atoms in atom(4),
        w in 0usize..24,
        space in prop::collection::vec(0usize..24, 0..24),
        n in 1usize..6,
        min_cos in prop::sample::select(vec![-1.0, 0.0, 0.2]),
        seed in any::<u64>(),
    ) {
        let cfg = PurifyConfig { n, min_cos };
        let c = purify(&emb, &atoms, WordId(w), 0, &ids(&space), &cfg).unwrap();
        prop_assert_eq!(c.words[0], WordId(w));
        prop_assert!(c.words.len() <= n);
        let recomputed = objective(&emb, &c.words, WordId(w), atoms.row(0)).unwrap();
        assert_abs_diff_eq!(c.gamma, recomputed, epsilon = 1e-9);

        // one more step of the greedy path extends the cluster
        let longer = purify(&emb, &atoms, WordId(w), 0, &ids(&space), &PurifyConfig { n: n + 1, min_cos }).unwrap();
        prop_assert_eq!(&longer.words[..c.words.len()], &c.words[..]);

        // input order of the search space does not matter
        let mut shuffled = space.clone();
        let mut state = seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        let again = purify(&emb, &atoms, WordId(w), 0, &ids(&shuffled), &cfg).unwrap();
        prop_assert_eq!(again, c);
    }

    #[test]
    fn similarity_is_symmetric(emb in embeddings(12, 3), a in prop::collection::vec(0usize..12, 1..6), b in prop::collection::vec(0usize..12, 1..6)) {
        let (a, b) = (ids(&a), ids(&b));
        prop_assert_eq!(cluster_similarity(&emb, &a, &b).unwrap(), cluster_similarity(&emb, &b, &a).unwrap());
        prop_assert_eq!(is_similar(&emb, &a, &b).unwrap(), is_similar(&emb, &b, &a).unwrap());
        prop_assert!(is_similar(&emb, &a, &a).unwrap());
    }

    #[test]
    fn sense_clusters_are_the_transitive_closure(
        emb in embeddings(10, 2),
        specs in prop::collection::vec((prop::option::of(0usize..3), prop::collection::vec(0usize..10, 1..4)), 0..8),
    ) {
        let assignments: Vec<SynsetAssignment> = specs
            .iter()
            .enumerate()
            .map(|(i, (atom, words))| SynsetAssignment {
                synset_id: format!("s{i}"),
                cluster: atom.map(|a| PurifiedCluster { words: ids(words), gamma: 0.5, atom_index: a, search_space_size: 0 }),
            })
            .collect();
        let got = sense_cluster(&emb, "w", &assignments).unwrap();

        // components of the merge graph by depth-first search
        let n = assignments.len();
        let edge = |i: usize, j: usize| match (assignments[i].atom(), assignments[j].atom()) {
            (Some(x), Some(y)) if x == y => is_similar(&emb, assignments[i].words(), assignments[j].words()).unwrap(),
            _ => false,
        };
        let mut comp = vec![usize::MAX; n];
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = start;
            while let Some(i) = stack.pop() {
                for (j, c) in comp.iter_mut().enumerate() {
                    if *c == usize::MAX && edge(i.min(j), i.max(j)) {
                        *c = start;
                        stack.push(j);
                    }
                }
            }
        }
        let mut want: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for (i, c) in comp.iter().enumerate() {
            want.entry(*c).or_default().push(format!("s{i}"));
        }
        let want: Vec<Vec<String>> = want.into_values().collect();
        prop_assert_eq!(got.groups, want);
    }

    #[test]
    fn omp_respects_sparsity(v in unit_vec(6), rows in prop::collection::vec(unit_vec(6), 1..10), s in 1usize..5) {
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.into_iter().map(|x| x / n).collect()
        }).collect();
        let atoms = Atoms::from_rows(&rows).unwrap();
        let out = omp_encode(&v, &atoms, s).unwrap();
        prop_assert!(out.code.len() <= s);
        prop_assert!(out.code.windows(2).all(|w| w[0].0 < w[1].0));
        prop_assert!(out.residual_norm <= v.iter().map(|x| x * x).sum::<f64>().sqrt() + 1e-9);
    }

    #[test]
    fn embeddings_round_trip(emb in embeddings(8, 5)) {
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &emb.vocab, &emb.matrix).unwrap();
        let (vocab, matrix) = read_embeddings(std::io::Cursor::new(buf), std::path::Path::new("memory"), Some(5)).unwrap();
        prop_assert_eq!(vocab.words(), emb.vocab.words());
        for (id, _) in emb.vocab.iter() {
            prop_assert_eq!(matrix.row(id), emb.matrix.row(id));
        }
    }
}

fn test_set(entries: &[(&str, Pos, &[&str], &[&str])]) -> TestSet {
    TestSet::new(
        entries
            .iter()
            .map(|(w, pos, good, bad)| TestEntry {
                word: w.to_string(),
                pos: *pos,
                candidates: good
                    .iter()
                    .map(|s| LabeledCandidate { synset_id: s.to_string(), label: Label::Good })
                    .chain(bad.iter().map(|s| LabeledCandidate { synset_id: s.to_string(), label: Label::Bad }))
                    .collect(),
            })
            .collect(),
    )
    .unwrap()
}

fn entry(word: &str, pos: Pos, synsets: &[&str]) -> WordnetEntry {
    WordnetEntry {
        word: word.into(),
        pos,
        matches: synsets
            .iter()
            .map(|s| Match { synset_id: s.to_string(), score: 0.5, provenance: Provenance::Threshold })
            .collect(),
        alpha_w: 0.4,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluation_uses_set_semantics(picks in prop::collection::vec(prop::collection::vec(0usize..5, 0..6), 6), rotate in 0usize..6) {
        let pool = ["a.n.01", "b.n.01", "c.n.01", "d.n.01", "e.n.01"];
        let test = test_set(&[
            ("u", Pos::Noun, &["a.n.01"], &["b.n.01"]),
            ("v", Pos::Noun, &["b.n.01", "c.n.01"], &["a.n.01"]),
            ("x", Pos::Verb, &["c.n.01"], &["d.n.01"]),
            ("y", Pos::Adj, &["a.n.01"], &["e.n.01"]),
            ("z", Pos::Adj, &["d.n.01"], &[]),
            ("q", Pos::Verb, &["e.n.01"], &["a.n.01", "b.n.01"]),
        ]);
        let words = [("u", Pos::Noun), ("v", Pos::Noun), ("x", Pos::Verb), ("y", Pos::Adj), ("z", Pos::Adj), ("q", Pos::Verb)];
        let preds: Vec<WordnetEntry> = words
            .iter()
            .zip(&picks)
            .map(|((w, pos), pick)| entry(w, *pos, &pick.iter().map(|&i| pool[i]).collect::<Vec<_>>()))
            .collect();
        for agg in [Aggregation::Pooled, Aggregation::PerWordMacro] {
            let base = evaluate(&preds, &test, EvalMode::CandidateRestricted, agg);
            let raw = evaluate(&preds, &test, EvalMode::Raw, agg);
            prop_assert!(base.total.precision + 1e-12 >= raw.total.precision);

            let mut shuffled = preds.clone();
            shuffled.rotate_left(rotate);
            for e in &mut shuffled {
                let dup = e.matches.clone();
                e.matches.extend(dup);
                e.matches.reverse();
            }
            let again = evaluate(&shuffled, &test, EvalMode::CandidateRestricted, agg);
            prop_assert_eq!(again.total, base.total);
        }
    }

    #[test]
    fn split_is_seeded_and_stratified(counts in (0usize..9, 0usize..9, 0usize..9), seed in any::<u64>()) {
        let mut entries = Vec::new();
        for (pos, n) in [(Pos::Noun, counts.0), (Pos::Verb, counts.1), (Pos::Adj, counts.2)] {
            for i in 0..n {
                entries.push(TestEntry {
                    word: format!("{pos}{i}"),
                    pos,
                    candidates: vec![LabeledCandidate { synset_id: "s.n.01".into(), label: Label::Good }],
                });
            }
        }
        let test = TestSet::new(entries).unwrap();
        let (a, b) = split(&test, seed);
        prop_assert_eq!(split(&test, seed), (a.clone(), b.clone()));
        for (pos, n) in [(Pos::Noun, counts.0), (Pos::Verb, counts.1), (Pos::Adj, counts.2)] {
            prop_assert_eq!(a.entries.iter().filter(|e| e.pos == pos).count(), n.div_ceil(2));
            prop_assert_eq!(b.entries.iter().filter(|e| e.pos == pos).count(), n / 2);
        }
        let all: BTreeSet<&str> = a.entries.iter().chain(&b.entries).map(|e| e.word.as_str()).collect();
        prop_assert_eq!(all.len(), test.len());
    }
}
