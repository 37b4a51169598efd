use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use layerwalk::pipeline::{Manifest, Pipeline, PipelineConfig, RunOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_layerwalk"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.json");
    fs::write(
        &path,
        r#"{
  "seed": 5,
  "synth": {"num_nodes": 600, "num_years": 2},
  "walk": {"walk_length": 20, "walks_per_node": 2},
  "train": {"dim": 8, "epochs": 1},
  "align": {"eval_pairs": 2000},
  "partition": {"k": 12},
  "audit": {"sample_size": 100, "permutations": 200, "wiggle": {"sims": 200}},
  "probe": {"max_epochs": 3, "hidden": 8}
}"#,
    )
    .unwrap();
    path
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn single_stage_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = ok(&["synth", "--nodes", "500", "--years", "2", "--seed", "2", "--out", p(d)]);
    assert!(out.contains("nodes"));
    let g0 = d.join("graphs/graph_2009.txt");
    let g1 = d.join("graphs/graph_2010.txt");
    assert!(g0.is_file() && g1.is_file() && d.join("tasks.jsonl").is_file());

    for (g, y) in [(&g0, "2009"), (&g1, "2010")] {
        let corpus = d.join(format!("c{y}.bin"));
        ok(&["walk", "--graph", p(g), "--walk-length", "10", "--walks-per-node", "2", "--out", p(&corpus)]);
        let emb = d.join(format!("e{y}.emb"));
        ok(&["train", "--corpus", p(&corpus), "--dim", "8", "--epochs", "1", "--out", p(&emb), "--text", p(&d.join(format!("e{y}.txt")))]);
    }
    let header = fs::read_to_string(d.join("e2009.txt")).unwrap();
    assert!(header.lines().next().unwrap().ends_with(" 8"));

    ok(&["align", "--source", p(&d.join("e2010.emb")), "--target", p(&d.join("e2009.emb")), "--method", "procrustes", "--out", p(&d.join("a2010.emb")), "--map", p(&d.join("m.aln"))]);
    let eval = ok(&["align-eval", "--first", p(&d.join("a2010.emb")), "--second", p(&d.join("e2009.emb")), "--pairs", "500"]);
    assert!(eval.contains("pearson"));

    ok(&["whiten-fit", "--embedding", p(&d.join("e2009.emb")), "--out", p(&d.join("w.json"))]);
    ok(&["grid", "--k", "10", "--dim", "8", "--out", p(&d.join("g.grid"))]);
    let bal = ok(&["partition", "--embedding", p(&d.join("e2009.emb")), "--grid", p(&d.join("g.grid")), "--whiten", p(&d.join("w.json")), "--out", p(&d.join("p0.part"))]);
    assert!(bal.contains("gini"));
    ok(&["partition", "--embedding", p(&d.join("a2010.emb")), "--grid", p(&d.join("g.grid")), "--whiten", p(&d.join("w.json")), "--out", p(&d.join("p1.part"))]);
    let r: f64 = ok(&["retention", "--base", p(&d.join("p0.part")), "--later", p(&d.join("p1.part"))]).trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&r));
    let same: f64 = ok(&["retention", "--base", p(&d.join("p0.part")), "--later", p(&d.join("p0.part"))]).trim().parse().unwrap();
    assert_eq!(same, 1.0);

    ok(&["audit", "--partition", p(&d.join("p0.part")), "--sample-size", "100", "--permutations", "100", "--out", p(&d.join("audit.json")), "--funnel", p(&d.join("funnel.csv"))]);
    let funnel = fs::read_to_string(d.join("funnel.csv")).unwrap();
    assert_eq!(funnel.lines().next().unwrap(), "cluster,share,deviation,lower,upper,flagged");
    assert_eq!(funnel.lines().count(), 11);

    ok(&["eval", "--tasks", p(&d.join("tasks.jsonl")), "--embedding", p(&d.join("e2009.emb")), "--out", p(&d.join("eval.json"))]);
    assert!(d.join("eval.json").is_file());
}

#[test]
fn pipeline_skips_current_stages_and_reruns_on_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("run");
    let first = run(&["pipeline", "--config", p(&cfg), "--out", p(&out)]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let report = fs::read(out.join("report.json")).unwrap();

    let second = run(&["pipeline", "--config", p(&cfg), "--out", p(&out)]);
    let log = String::from_utf8_lossy(&second.stderr);
    assert!(second.status.success());
    assert!(!log.contains("running"), "{log}");
    assert_eq!(log.matches("up to date, skipped").count(), 13);

    // touching an input invalidates the stages downstream of it only
    let corpus = out.join("corpus/blind_2010.bin");
    let mut bytes = fs::read(&corpus).unwrap();
    bytes.push(0);
    fs::write(&corpus, bytes).unwrap();
    let third = run(&["pipeline", "--config", p(&cfg), "--out", p(&out)]);
    let log = String::from_utf8_lossy(&third.stderr);
    assert!(log.contains("walk-blind: running"), "{log}");
    assert!(log.contains("walk-aware: up to date"), "{log}");

    let forced = run(&["pipeline", "--config", p(&cfg), "--out", p(&out), "--force"]);
    let log = String::from_utf8_lossy(&forced.stderr);
    assert!(forced.status.success());
    assert_eq!(log.matches(": running").count(), 13);
    assert_eq!(fs::read(out.join("report.json")).unwrap(), report);

    let csv = ok(&["report", "--run", p(&out), "--csv"]);
    assert_eq!(csv.as_bytes(), fs::read(out.join("report.csv")).unwrap());
}

#[test]
fn manifests_record_fingerprints() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::from_path(&small_config(tmp.path())).unwrap();
    let mut pipe = Pipeline::new(cfg, tmp.path().join("run"), RunOptions { quiet: true, ..Default::default() }).unwrap();
    pipe.run().unwrap();
    let m: Manifest = layerwalk::io::read_json(&tmp.path().join("run/manifests/train-aware.json")).unwrap();
    assert_eq!(m.stage, "train-aware");
    assert_eq!(m.inputs.len(), 2);
    assert!(m.inputs.iter().all(|r| r.path.starts_with("corpus/aware_") && r.fingerprint.len() == 16));
    assert!(m.outputs.iter().any(|r| r.path == "emb/aware_2009.emb"));
    assert!(pipe.outcomes.iter().all(|o| !o.skipped));
}

#[test]
fn corrupt_artifact_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(&["grid", "--k", "4", "--dim", "3", "--out", p(&d.join("g.grid"))]);
    let bad = d.join("broken.emb");
    fs::write(&bad, b"NOTMAGIC and then some bytes").unwrap();
    let out = run(&["partition", "--embedding", p(&bad), "--grid", p(&d.join("g.grid")), "--out", p(&d.join("x.part"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken.emb"), "{err}");
    assert!(!d.join("x.part").exists());
}

#[test]
fn missing_input_is_reported_before_work() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["walk", "--graph", p(&tmp.path().join("nope.txt")), "--out", p(&tmp.path().join("c.bin"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing input") && err.contains("nope.txt"), "{err}");
}

#[test]
fn invalid_configs_are_rejected_up_front() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"train": {"dimension": 8}}"#, "dimension"),
        (r#"{"partition": {"k": 0}}"#, "partition.k"),
        (r#"{"modes": []}"#, "walk mode"),
        (r#"{"synth": {"num_nodes": 500}, "audit": {"sample_size": 5000}}"#, "sample_size"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = tmp.path().join(format!("c{i}.json"));
        fs::write(&cfg, text).unwrap();
        let run_dir = tmp.path().join(format!("r{i}"));
        let out = run(&["pipeline", "--config", p(&cfg), "--out", p(&run_dir)]);
        assert!(!out.status.success());
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "{text}: {err}");
        assert!(!run_dir.join("graphs").exists());
    }
}

#[test]
fn edge_list_parse_errors_carry_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g.txt");
    fs::write(&g, "# year 2009\n# nodes 3\n0 1 0\n1 x 0\n").unwrap();
    let out = run(&["walk", "--graph", p(&g), "--out", p(&tmp.path().join("c.bin"))]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(!out.status.success());
    assert!(err.contains("g.txt:4"), "{err}");
}
