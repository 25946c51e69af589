//! End-to-end checks of the `ml4c` binary: every subcommand, exit codes,
//! atomic output behavior, and replay determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ml4c"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn ml4c");
    assert!(
        out.status.success(),
        "expected success for {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str], code: i32) -> Output {
    let out = bin().args(args).output().expect("spawn ml4c");
    assert_eq!(
        out.status.code(),
        Some(code),
        "expected exit {code} for {args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthesizes a tiny corpus and returns (dir, manifest path).
fn small_corpus(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join("corpus");
    run_ok(&[
        "synth",
        "--out",
        path_str(&out),
        "--n-graphs",
        "2",
        "--seed",
        &seed.to_string(),
        "--nodes",
        "6:8",
        "--sparsity",
        "1.2:1.4",
        "--samples",
        "600",
    ]);
    out.join("manifest.json")
}

#[test]
fn synth_replays_identically_and_handles_empty() {
    let dir = TempDir::new().unwrap();
    let a = small_corpus(&dir.path().join("a"), 5);
    let b = small_corpus(&dir.path().join("b"), 5);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let da = std::fs::read(dir.path().join("a/corpus/data/g0000.csv")).unwrap();
    let db = std::fs::read(dir.path().join("b/corpus/data/g0000.csv")).unwrap();
    assert_eq!(da, db);

    let empty = dir.path().join("empty");
    run_ok(&[
        "synth",
        "--out",
        path_str(&empty),
        "--n-graphs",
        "0",
        "--seed",
        "1",
    ]);
    let manifest = std::fs::read_to_string(empty.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"items\": []"));
}

#[test]
fn synth_rejects_invalid_sparsity() {
    let dir = TempDir::new().unwrap();
    run_err(
        &[
            "synth",
            "--out",
            path_str(&dir.path().join("x")),
            "--n-graphs",
            "1",
            "--sparsity=-1:1",
        ],
        1,
    );
}

#[test]
fn oracle_predicate_inference_recovers_cpdag() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path(), 11);
    let dag_path = dir.path().join("corpus/graphs/g0000.json");
    let data_path = dir.path().join("corpus/data/g0000.csv");

    // derive the skeleton file from the dag
    let dag = ml4c::io::read_dag(&dag_path).unwrap();
    let skel_path = dir.path().join("skeleton.json");
    ml4c::io::write_skeleton(&skel_path, &ml4c::graph::skeleton_of(&dag)).unwrap();

    let out_path = dir.path().join("predicted.json");
    let manifest_path = dir.path().join("run.json");
    run_ok(&[
        "infer",
        "--data",
        path_str(&data_path),
        "--skeleton",
        path_str(&skel_path),
        "--predicate",
        "strong-cpc",
        "--oracle-dag",
        path_str(&dag_path),
        "--out",
        path_str(&out_path),
        "--max-sepset",
        "8",
        "--manifest",
        path_str(&manifest_path),
    ]);

    // the written document parses back to exactly the oracle CPDAG
    let predicted = ml4c::io::read_pdag(&out_path).unwrap();
    assert_eq!(predicted, ml4c::graph::cpdag_of(&dag));
    let manifest = std::fs::read_to_string(&manifest_path).unwrap();
    assert!(manifest.contains("strong-cpc"), "{manifest}");

    // eval against the dag file reports a perfect row
    let eval = run_ok(&[
        "eval",
        "--truth",
        path_str(&dag_path),
        "--predicted",
        path_str(&out_path),
    ]);
    let report = String::from_utf8_lossy(&eval.stdout);
    let row = report.lines().nth(1).expect("one report row");
    let cols: Vec<&str> = row.split('\t').collect();
    assert_eq!(cols[1], "0", "SHD column: {report}");
    assert_eq!(cols[3], "1.0000", "UT-F1 column: {report}");
}

#[test]
fn infer_without_classifier_is_usage_error() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path(), 13);
    let dag = ml4c::io::read_dag(&dir.path().join("corpus/graphs/g0000.json")).unwrap();
    let skel_path = dir.path().join("skeleton.json");
    ml4c::io::write_skeleton(&skel_path, &ml4c::graph::skeleton_of(&dag)).unwrap();
    run_err(
        &[
            "infer",
            "--data",
            path_str(&dir.path().join("corpus/data/g0000.csv")),
            "--skeleton",
            path_str(&skel_path),
            "--out",
            path_str(&dir.path().join("out.json")),
        ],
        1,
    );
}

#[test]
fn missing_skeleton_fails_without_partial_output() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path(), 17);
    let out_path = dir.path().join("never.json");
    run_err(
        &[
            "infer",
            "--data",
            path_str(&dir.path().join("corpus/data/g0000.csv")),
            "--skeleton",
            path_str(&dir.path().join("no-such-file.json")),
            "--predicate",
            "strong-cpc",
            "--out",
            path_str(&out_path),
        ],
        2,
    );
    assert!(
        !out_path.exists(),
        "failed run must not leave output behind"
    );
}

#[test]
fn train_is_reproducible_and_model_loads() {
    let dir = TempDir::new().unwrap();
    let manifest = small_corpus(dir.path(), 23);
    let model_a = dir.path().join("a.model.json");
    let model_b = dir.path().join("b.model.json");
    for model in [&model_a, &model_b] {
        run_ok(&[
            "train",
            "--corpus",
            path_str(&manifest),
            "--out",
            path_str(model),
            "--rounds",
            "4",
            "--depth",
            "3",
        ]);
    }
    assert_eq!(
        std::fs::read(&model_a).unwrap(),
        std::fs::read(&model_b).unwrap()
    );
    let model = ml4c::io::read_model(&model_a).unwrap();
    assert_eq!(model.ensemble.trees.len(), 4);
    assert_eq!(model.ensemble.feature_dim, ml4c::featurize::FEATURE_DIM);

    run_err(
        &[
            "train",
            "--corpus",
            path_str(&dir.path().join("missing-manifest.json")),
            "--out",
            path_str(&dir.path().join("c.model.json")),
        ],
        2,
    );
}

#[test]
fn trained_model_infers_on_its_corpus() {
    let dir = TempDir::new().unwrap();
    let manifest = small_corpus(dir.path(), 29);
    let model_path = dir.path().join("model.json");
    run_ok(&[
        "train",
        "--corpus",
        path_str(&manifest),
        "--out",
        path_str(&model_path),
        "--rounds",
        "8",
    ]);
    let dag = ml4c::io::read_dag(&dir.path().join("corpus/graphs/g0001.json")).unwrap();
    let skel_path = dir.path().join("skeleton.json");
    ml4c::io::write_skeleton(&skel_path, &ml4c::graph::skeleton_of(&dag)).unwrap();
    let out_path = dir.path().join("predicted.json");
    run_ok(&[
        "infer",
        "--data",
        path_str(&dir.path().join("corpus/data/g0001.csv")),
        "--skeleton",
        path_str(&skel_path),
        "--model",
        path_str(&model_path),
        "--out",
        path_str(&out_path),
    ]);
    // output parses and preserves the skeleton
    let predicted = ml4c::io::read_pdag(&out_path).unwrap();
    assert_eq!(predicted.skeleton(), ml4c::graph::skeleton_of(&dag));
}

#[test]
fn featurize_and_label_write_tables() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path(), 37);
    let dag_path = dir.path().join("corpus/graphs/g0000.json");
    let dag = ml4c::io::read_dag(&dag_path).unwrap();
    let skel_path = dir.path().join("skeleton.json");
    ml4c::io::write_skeleton(&skel_path, &ml4c::graph::skeleton_of(&dag)).unwrap();

    let features_path = dir.path().join("features.csv");
    run_ok(&[
        "featurize",
        "--data",
        path_str(&dir.path().join("corpus/data/g0000.csv")),
        "--skeleton",
        path_str(&skel_path),
        "--out",
        path_str(&features_path),
        "--basis-seed",
        "3",
    ]);
    let features = std::fs::read_to_string(&features_path).unwrap();
    let header = features.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 3 + ml4c::featurize::FEATURE_DIM);

    let labels_path = dir.path().join("labels.csv");
    run_ok(&[
        "label",
        "--dag",
        path_str(&dag_path),
        "--out",
        path_str(&labels_path),
    ]);
    let labels = std::fs::read_to_string(&labels_path).unwrap();
    assert_eq!(labels.lines().next().unwrap(), "x,t,y,label");
    let uts = ml4c::graph::unshielded_triples(&ml4c::graph::skeleton_of(&dag));
    assert_eq!(labels.lines().count(), 1 + uts.len());
}

#[test]
fn eval_batch_directories() {
    let dir = TempDir::new().unwrap();
    small_corpus(dir.path(), 41);
    let truth_dir = dir.path().join("truth");
    let pred_dir = dir.path().join("pred");
    std::fs::create_dir_all(&truth_dir).unwrap();
    std::fs::create_dir_all(&pred_dir).unwrap();
    for i in 0..2 {
        let dag =
            ml4c::io::read_dag(&dir.path().join(format!("corpus/graphs/g000{i}.json"))).unwrap();
        let cpdag = ml4c::graph::cpdag_of(&dag);
        ml4c::io::write_pdag(&truth_dir.join(format!("g{i}.json")), &cpdag).unwrap();
        ml4c::io::write_pdag(&pred_dir.join(format!("g{i}.json")), &cpdag).unwrap();
    }
    let report_path = dir.path().join("report.tsv");
    run_ok(&[
        "eval",
        "--truth-dir",
        path_str(&truth_dir),
        "--predicted-dir",
        path_str(&pred_dir),
        "--out",
        path_str(&report_path),
    ]);
    let report = std::fs::read_to_string(&report_path).unwrap();
    assert_eq!(report.lines().count(), 3, "header plus two rows: {report}");
    for row in report.lines().skip(1) {
        assert_eq!(row.split('\t').nth(1), Some("0"));
    }
}

#[test]
fn eval_reports_zero_f1_without_identifiable_edges() {
    let dir = TempDir::new().unwrap();
    // a pure chain has a fully undirected CPDAG: no identifiable edges
    let names: Vec<String> = (0..3).map(|i| format!("V{i}")).collect();
    let dag = ml4c::graph::Dag::new(names, [(0, 1), (1, 2)]).unwrap();
    let cpdag = ml4c::graph::cpdag_of(&dag);
    let truth = dir.path().join("truth.json");
    let pred = dir.path().join("pred.json");
    ml4c::io::write_pdag(&truth, &cpdag).unwrap();
    ml4c::io::write_pdag(&pred, &cpdag).unwrap();
    let out = run_ok(&[
        "eval",
        "--truth",
        path_str(&truth),
        "--predicted",
        path_str(&pred),
    ]);
    let report = String::from_utf8_lossy(&out.stdout);
    let cols: Vec<&str> = report.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(cols[1], "0");
    assert_eq!(
        cols[2], "0.0000",
        "no identifiable edges means edge-F1 0: {report}"
    );
}

#[test]
fn help_exits_zero_and_unknown_flag_exits_one() {
    run_ok(&["--help"]);
    run_err(&["synth", "--no-such-flag"], 1);
}
