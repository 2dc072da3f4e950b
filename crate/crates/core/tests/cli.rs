mod common;

use std::path::Path;
use std::process::{Command, Output};

use autownet::manifest::{manifest_path, sha256_file, RunManifest};
use serde_json::Value;

fn autownet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autownet")).args(args).env_remove("AUTOWNET_CACHE_DIR").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = autownet(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn lex(m: &common::MicroLanguage) -> Vec<&str> {
    vec!["--emb", p(&m.emb), "--freq", p(&m.freq), "--synsets", p(&m.synsets), "--dict", p(&m.dict), "--glosses", p(&m.glosses)]
}

fn fit(m: &common::MicroLanguage, out: &Path) {
    ok(&["fit-wsi", "--emb", p(&m.emb), "--k", "64", "--s", "2", "--iterations", "20", "--seed", "3", "-o", p(out)]);
}

#[test]
fn exit_codes() {
    assert_eq!(autownet(&["--help"]).status.code(), Some(0));
    assert_eq!(autownet(&["--version"]).status.code(), Some(0));
    assert_eq!(autownet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(autownet(&[]).status.code(), Some(1));
    let missing = autownet(&["fit-wsi", "--emb", "/nonexistent/vectors.txt", "-o", "/tmp/never.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/vectors.txt"));
}

#[test]
fn help_documents_formats_and_environment() {
    let help = ok(&["build", "--help"]);
    for needle in ["embeddings", "frequencies", "manifest.json", "AUTOWNET_CACHE_DIR"] {
        assert!(help.contains(needle), "{needle}");
    }
}

#[test]
fn bad_cutoffs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let m = common::micro_language(dir.path(), 1);
    let model = dir.path().join("model.json");
    fit(&m, &model);
    let out = dir.path().join("wn.jsonl");
    let run = |extra: &[&str]| {
        let mut args = vec!["build"];
        args.extend(lex(&m));
        args.extend(["-o", p(&out)]);
        args.extend(extra);
        autownet(&args).status.code()
    };
    assert_eq!(run(&["--model", p(&model), "--alpha", "0.2", "--beta", "0.5"]), Some(1));
    // representation+wsi without a model
    assert_eq!(run(&[]), Some(1));
    // beta above alpha is harmless without recovery
    assert_eq!(run(&["--method", "representation", "--alpha", "0.2", "--beta", "0.5"]), Some(0));
}

#[test]
fn validate_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let m = common::micro_language(dir.path(), 1);
    let summary = dir.path().join("summary.json");
    let mut args = vec!["validate"];
    args.extend(lex(&m));
    args.extend(["--test", p(&m.test), "--core", p(&m.core), "-o", p(&summary)]);
    ok(&args);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let text = v.to_string();
    assert!(text.contains("100"), "{text}");
    assert!(text.contains("30"), "{text}");
}

#[test]
fn manifest_records_input_digests() {
    let dir = tempfile::tempdir().unwrap();
    let m = common::micro_language(dir.path(), 1);
    let model = dir.path().join("model.bin");
    fit(&m, &model);
    let manifest = RunManifest::read(manifest_path(&model)).unwrap();
    assert_eq!(manifest.command, "fit-wsi");
    assert_eq!(manifest.tool, "autownet");
    assert_eq!(manifest.outputs, vec![model.clone()]);
    let emb = manifest.inputs.iter().find(|d| d.role == "embeddings").unwrap();
    let (digest, bytes) = sha256_file(&m.emb).unwrap();
    assert_eq!(emb.sha256, digest);
    assert_eq!(emb.bytes, bytes);
    assert_eq!(bytes, std::fs::metadata(&m.emb).unwrap().len());
    assert!(manifest.started_at <= manifest.finished_at);
    assert_eq!(manifest.config["wsi"]["k"], 64);
}

#[test]
fn synset_cache_file_and_env_cache_do_not_change_the_build() {
    let dir = tempfile::tempdir().unwrap();
    let m = common::micro_language(dir.path(), 1);
    let model = dir.path().join("model.json");
    fit(&m, &model);
    let build = |extra: &[&str], out: &Path, cache_env: Option<&Path>| {
        let mut args = vec!["build"];
        args.extend(lex(&m));
        args.extend(["--model", p(&model), "--alpha", "0.4", "--beta", "0.1", "-o", p(out)]);
        args.extend(extra);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_autownet"));
        cmd.args(&args).env_remove("AUTOWNET_CACHE_DIR");
        if let Some(c) = cache_env {
            cmd.env("AUTOWNET_CACHE_DIR", c);
        }
        let o = cmd.output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    let plain = build(&[], &dir.path().join("a.jsonl"), None);

    let cache = dir.path().join("synset_vectors.jsonl");
    let mut args = vec!["embed-synsets"];
    args.extend(lex(&m));
    args.extend(["-o", p(&cache)]);
    ok(&args);
    assert_eq!(std::fs::read_to_string(&cache).unwrap().lines().count(), 30);
    let cached = build(&["--synset-cache", p(&cache)], &dir.path().join("b.jsonl"), None);
    assert_eq!(plain, cached);

    let env_dir = dir.path().join("cache");
    let first = build(&[], &dir.path().join("c.jsonl"), Some(&env_dir));
    assert_eq!(std::fs::read_dir(&env_dir).unwrap().count(), 1);
    let second = build(&[], &dir.path().join("d.jsonl"), Some(&env_dir));
    assert_eq!(plain, first);
    assert_eq!(plain, second);
}

#[test]
fn eval_sidecar_has_both_aggregations() {
    let dir = tempfile::tempdir().unwrap();
    let m = common::micro_language(dir.path(), 1);
    let model = dir.path().join("model.json");
    fit(&m, &model);
    let wn = dir.path().join("wn.jsonl");
    let mut args = vec!["build"];
    args.extend(lex(&m));
    args.extend(["--model", p(&model), "--alpha", "0.45", "--beta", "0.3", "-o", p(&wn)]);
    ok(&args);

    let report = dir.path().join("eval.json");
    let table = ok(&["eval", "--predictions", p(&wn), "--test", p(&m.test), "--core", p(&m.core), "-o", p(&report)]);
    assert!(table.contains("100.0"), "{table}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for agg in ["pooled", "perWordMacro"] {
        assert_eq!(v[agg]["total"]["f05"], 100.0, "{agg}");
        assert_eq!(v[agg]["coverage"], 100.0, "{agg}");
        assert_eq!(v[agg]["synsetCount"], 30, "{agg}");
    }

    // raw mode scores the same predictions without the candidate filter
    let raw = ok(&["eval", "--predictions", p(&wn), "--test", p(&m.test), "--mode", "raw"]);
    assert!(raw.contains("F0.5") || raw.contains("F.5"), "{raw}");
}

#[test]
fn tune_with_explicit_grid() {
    let dir = tempfile::tempdir().unwrap();
    let m = common::micro_language(dir.path(), 1);
    let model = dir.path().join("model.json");
    fit(&m, &model);
    let out = dir.path().join("tune.json");
    let mut args = vec!["tune"];
    args.extend(lex(&m));
    args.extend([
        "--model",
        p(&model),
        "--test",
        p(&m.test),
        "--alphas",
        "0.3,0.45,0.6",
        "--betas",
        "0.1,0.2",
        "--aggregation",
        "per-word-macro",
        "-o",
        p(&out),
    ]);
    let stdout = ok(&args);
    assert!(stdout.contains("alpha 0.30"), "{stdout}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["alpha"], 0.3);
    assert_eq!(v["beta"], 0.1);
    assert_eq!(v["tuningWords"].as_u64().unwrap() + v["heldOutWords"].as_u64().unwrap(), 100);
    assert_eq!(v["heldOut"]["aggregation"], "per-word-macro");
}

#[test]
fn purify_and_cluster_senses_select_words() {
    let dir = tempfile::tempdir().unwrap();
    let m = common::micro_language(dir.path(), 1);
    let model = dir.path().join("model.json");
    fit(&m, &model);
    let words = dir.path().join("words.txt");
    std::fs::write(&words, "x0a\nmo020\n").unwrap();

    let out = dir.path().join("clusters.jsonl");
    ok(&["purify", "--emb", p(&m.emb), "--model", p(&model), "--words", p(&words), "--word", "x1b", "-o", p(&out)]);
    let lines: Vec<Value> =
        std::fs::read_to_string(&out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let seen: std::collections::BTreeSet<&str> = lines.iter().map(|l| l["word"].as_str().unwrap()).collect();
    assert_eq!(seen, ["mo020", "x0a", "x1b"].into_iter().collect());
    for l in &lines {
        let cluster = l["cluster"].as_array().unwrap();
        assert_eq!(cluster[0], l["word"]);
        assert!(cluster.len() <= 5);
    }

    let senses = dir.path().join("senses.jsonl");
    let mut args = vec!["cluster-senses"];
    args.extend(lex(&m));
    args.extend(["--model", p(&model), "--word", "x0a", "-o", p(&senses)]);
    ok(&args);
    let v: Value = serde_json::from_str(std::fs::read_to_string(&senses).unwrap().lines().next().unwrap()).unwrap();
    // the two candidates of an ambiguous word are different senses
    assert_eq!(v["groups"].as_array().unwrap().len(), 2);

    let unknown = autownet(&["purify", "--emb", p(&m.emb), "--model", p(&model), "--word", "nope", "-o", p(&out)]);
    assert_eq!(unknown.status.code(), Some(1));
}
