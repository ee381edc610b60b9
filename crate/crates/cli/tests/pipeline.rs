use std::fs;
use std::path::Path;
use std::process::Command;

use anchorkg::graph::Triple;
use anchorkg::synth::compositional_kg;
use anchorkg_cli::args::Cli;
use anchorkg_cli::{run, CliResult};
use clap::Parser;
use serde_json::Value;

fn write_split(path: &Path, triples: &[Triple]) {
    let text: String = triples
        .iter()
        .map(|t| format!("e{}\tr{}\te{}\n", t.head, t.relation, t.tail))
        .collect();
    fs::write(path, text).unwrap();
}

fn cli(dir: &Path, extra: &[&str]) -> CliResult<String> {
    let mut argv = vec!["anchorkg", "--out", dir.to_str().unwrap()];
    argv.extend_from_slice(extra);
    run(Cli::try_parse_from(argv).unwrap())
}

/// Writes a small-model config with `overrides` replacing the defaults.
fn write_config(dir: &Path, overrides: &[(&str, &str)]) -> String {
    let mut keys: Vec<(&str, &str)> = vec![
        ("num_anchors", "3"),
        ("anchors_per_node", "2"),
        ("context_size", "2"),
        ("dim", "8"),
        ("encoder_hidden", "8"),
        ("decoder", "distmult"),
        ("num_negatives", "4"),
        ("batch_size", "8"),
        ("lr", "0.01"),
    ];
    for &(k, v) in overrides {
        match keys.iter_mut().find(|(key, _)| *key == k) {
            Some(slot) => slot.1 = v,
            None => keys.push((k, v)),
        }
    }
    let body: String = keys.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    let p = dir.join("run.conf");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn ingest(dir: &Path, train: &[Triple], valid: &[Triple], test: &[Triple]) {
    let raw = dir.join("raw");
    fs::create_dir_all(&raw).unwrap();
    write_split(&raw.join("train.txt"), train);
    write_split(&raw.join("valid.txt"), valid);
    write_split(&raw.join("test.txt"), test);
    let p = |n: &str| raw.join(n).to_str().unwrap().to_string();
    cli(
        dir,
        &["ingest", "--train", &p("train.txt"), "--valid", &p("valid.txt"), "--test", &p("test.txt")],
    )
    .unwrap();
}

fn metrics(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

#[test]
fn three_cycle_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cycle = [Triple::new(0, 0, 1), Triple::new(1, 0, 2), Triple::new(2, 0, 0)];
    ingest(dir.path(), &cycle, &[], &[]);
    cli(dir.path(), &["stats"]).unwrap();
    let s: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(s["num_components"], 1);
    assert_eq!(s["num_entities"], 3);
    assert_eq!(s["degree_histogram"], serde_json::json!([[2, 3]]));
    assert_eq!(s["anchor_distance_histogram"], Value::Null);
}

#[test]
fn relation_only_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let kg = compositional_kg(3, 1);
    ingest(dir.path(), &kg.train, &kg.valid, &kg.test);
    let conf = write_config(
        dir.path(),
        &[("num_anchors", "0"), ("anchors_per_node", "0"), ("epochs", "2")],
    );
    for cmd in ["select-anchors", "tokenize", "train"] {
        cli(dir.path(), &["--config", &conf, cmd]).unwrap();
    }
    let hashes = fs::read_to_string(dir.path().join("hashes.tsv")).unwrap();
    let mut lines = hashes.lines();
    assert!(lines.next().unwrap().contains("k=0"));
    // entity, anchors, distances, relations
    assert!(lines.all(|l| {
        let f: Vec<&str> = l.split('\t').collect();
        f.len() == 4 && f[1].is_empty() && f[2].is_empty() && !f[3].is_empty()
    }));
    cli(dir.path(), &["--config", &conf, "eval"]).unwrap();
    assert!(metrics(dir.path())["mrr"].as_f64().unwrap() > 0.0);
}

/// `E[1 / rank]` for a rank drawn uniformly from `1..=c`.
fn uniform_mrr(c: usize) -> f64 {
    (1..=c).map(|r| 1.0 / r as f64).sum::<f64>() / c as f64
}

#[test]
fn untrained_checkpoint_matches_random_baseline() {
    // Ten entities, no two test queries share a filtered answer.
    let train: Vec<Triple> = (0..10).map(|i| Triple::new(i, i % 2, (i + 3) % 10)).collect();
    let test: Vec<Triple> = (0..5).map(|i| Triple::new(i, 2, (i + 5) % 10)).collect();
    let dir = tempfile::tempdir().unwrap();
    ingest(dir.path(), &train, &[], &test);
    let conf = write_config(dir.path(), &[("epochs", "0"), ("tie_policy", "stochastic")]);
    let expected = uniform_mrr(10);
    assert!((expected - 0.2929).abs() < 1e-4);

    let seeds = 40;
    let mut total = 0.0;
    for seed in 0..seeds {
        let s = seed.to_string();
        for cmd in ["select-anchors", "tokenize", "train", "eval"] {
            cli(dir.path(), &["--config", &conf, "--seed", &s, cmd]).unwrap();
        }
        total += metrics(dir.path())["mrr"].as_f64().unwrap();
    }
    let mean = total / seeds as f64;
    assert!((mean - expected).abs() < 0.05, "mean untrained MRR {mean}");
}

fn full_pipeline(dir: &Path, threads: &str) -> Vec<u8> {
    let kg = compositional_kg(4, 2);
    ingest(dir, &kg.train, &kg.valid, &kg.test);
    let conf = write_config(dir, &[("epochs", "3"), ("dropout", "0.1"), ("seed", "11")]);
    for cmd in ["select-anchors", "tokenize", "train", "eval"] {
        cli(dir, &["--config", &conf, "--threads", threads, cmd]).unwrap();
    }
    fs::read(dir.join("metrics.json")).unwrap()
}

#[test]
fn pipeline_is_deterministic() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = full_pipeline(a.path(), "1");
    assert_eq!(first, full_pipeline(b.path(), "1"));
    assert_eq!(first, full_pipeline(c.path(), "3"));
    for f in ["anchors.tsv", "hashes.tsv", "checkpoint.bin", "checkpoint.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn relation_and_out_of_sample_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let kg = compositional_kg(4, 3);
    ingest(dir.path(), &kg.train, &kg.valid, &kg.test);
    let conf = write_config(dir.path(), &[("epochs", "1")]);
    for cmd in ["select-anchors", "tokenize", "train"] {
        cli(dir.path(), &["--config", &conf, cmd]).unwrap();
    }
    cli(dir.path(), &["--config", &conf, "eval", "--task", "relation"]).unwrap();
    let m = metrics(dir.path());
    assert_eq!(m["task"], "relation");
    assert_eq!(m["num_queries"], kg.test.len());

    let unseen = dir.path().join("unseen.tsv");
    fs::write(&unseen, "new1\tr0\te1\nnew1\tr1\te2\ne3\tr2\tnew1\nnew2\tr0\te5\n").unwrap();
    cli(
        dir.path(),
        &["--config", &conf, "eval", "--task", "out-of-sample", "--unseen", unseen.to_str().unwrap()],
    )
    .unwrap();
    let m = metrics(dir.path());
    assert_eq!(m["task"], "out-of-sample");
    assert_eq!(m["num_queries"], 4);

    fs::write(&unseen, "e1\tr0\te2\n").unwrap();
    let err = cli(
        dir.path(),
        &["--config", &conf, "eval", "--task", "out-of-sample", "--unseen", unseen.to_str().unwrap()],
    )
    .unwrap_err();
    assert_eq!(err.kind(), "format");

    cli(dir.path(), &["--config", &conf, "export-embeddings"]).unwrap();
    let emb = fs::read_to_string(dir.path().join("embeddings.tsv")).unwrap();
    assert_eq!(emb.lines().count(), kg.num_entities);
    assert!(emb.lines().all(|l| l.split('\t').count() == 9));
}

#[test]
fn config_errors_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let kg = compositional_kg(3, 1);
    ingest(dir.path(), &kg.train, &kg.valid, &kg.test);
    let conf = write_config(dir.path(), &[("width", "9")]);
    let err = cli(dir.path(), &["--config", &conf, "select-anchors"]).unwrap_err();
    assert_eq!(err.kind(), "parse");
    assert!(!dir.path().join("anchors.tsv").exists());

    let err = cli(dir.path(), &["tokenize"]).unwrap_err();
    assert_eq!(err.kind(), "missing_file");
    assert!(!dir.path().join("hashes.tsv").exists());
}

#[test]
fn checkpoint_must_match_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let kg = compositional_kg(3, 1);
    ingest(dir.path(), &kg.train, &kg.valid, &kg.test);
    let conf = write_config(dir.path(), &[("epochs", "0")]);
    for cmd in ["select-anchors", "tokenize", "train"] {
        cli(dir.path(), &["--config", &conf, cmd]).unwrap();
    }
    let other = write_config(dir.path(), &[("anchors_per_node", "1")]);
    cli(dir.path(), &["--config", &other, "tokenize"]).unwrap();
    let err = cli(dir.path(), &["--config", &other, "eval"]).unwrap_err();
    assert_eq!(err.kind(), "shape_mismatch");
}

#[test]
fn binary_reports_one_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_anchorkg"))
        .args(["--out", dir.path().to_str().unwrap(), "train"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error[missing_file]: "), "{stderr}");
}
