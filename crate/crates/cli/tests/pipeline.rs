//! End-to-end checks of the installed binary: the full artifact pipeline,
//! cross-process determinism, and the exit-code contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use ugcsim_core::runtime::{write_posts, UgcPost};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ugcsim")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn sample_posts(dir: &Path) -> PathBuf {
    let mut posts = vec![
        UgcPost::new("p1", "weekend hiking photography meetup by the lake"),
        UgcPost::new("p2", "quarterly earnings recap for municipal bonds"),
        UgcPost::new("p3", "jazz cycling gardening baking chess astronomy pottery night"),
        UgcPost::new("p4", "printer driver reinstall instructions"),
        UgcPost::new("p5", "street food tour with karaoke and board games"),
    ];
    posts[0].metadata.insert("Category".into(), serde_json::json!("outdoors"));
    posts[0].label = Some(9.0);
    posts[1].label = Some(3.5);
    posts[2].metadata.insert("Tags".into(), serde_json::json!(["music", "food"]));
    posts[2].label = Some(12.0);
    posts[3].label = Some(1.0);
    posts[4].image_ref = Some("a crowded night market stall".into());
    posts[4].label = Some(6.0);
    let path = dir.join("posts.jsonl");
    write_posts(&path, &posts).unwrap();
    path
}

const SMALL_CFG: &str = "seed = 7\nn_agents = 40\nrounds = 3\n";

#[test]
fn full_pipeline_produces_all_artifacts() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "config.toml", SMALL_CFG);
    let posts = sample_posts(dir);
    let run_dir = dir.join("run");

    let sim = run(&["simulate", "--config", &s(&cfg), "--posts", &s(&posts), "--out", &s(&run_dir)]);
    assert_eq!(code(&sim), 0, "simulate stderr: {}", stderr(&sim));
    for name in ["population.jsonl", "edges.txt", "manifest.jsonl", "usage.json"] {
        assert!(run_dir.join(name).is_file(), "missing {name}");
    }
    for (i, id) in ["p1", "p2", "p3", "p4", "p5"].iter().enumerate() {
        assert!(run_dir.join(format!("trace_{i:04}_{id}.jsonl")).is_file());
    }

    let preds = dir.join("predictions.jsonl");
    let usage = dir.join("predict_usage.json");
    let pred = run(&[
        "predict", "--config", &s(&cfg), "--posts", &s(&posts), "--run", &s(&run_dir),
        "--out", &s(&preds), "--usage", &s(&usage),
    ]);
    assert_eq!(code(&pred), 0, "predict stderr: {}", stderr(&pred));
    assert!(stdout(&pred).contains("scored 5 post(s), 0 failed"));
    let pred_text = std::fs::read_to_string(&preds).unwrap();
    assert!(pred_text.lines().next().unwrap().contains("\"format\":\"ugcsim/predictions\""));
    assert_eq!(pred_text.lines().count(), 6, "header plus one line per post");

    let report = dir.join("eval.json");
    let eval = run(&["eval", "--predictions", &s(&preds), "--out", &s(&report)]);
    assert_eq!(code(&eval), 0, "eval stderr: {}", stderr(&eval));
    let line = stdout(&eval);
    assert!(line.contains("n=5"), "eval stdout: {line}");
    assert!(line.contains("mae=") && line.contains("src=") && line.contains("ce="));
    let (_, parsed) = ugcsim_core::predict::read_eval_report(&report).unwrap();
    assert_eq!(parsed.n, 5);
    assert!(parsed.mae.is_finite() && parsed.mse.is_finite() && parsed.src.is_finite());

    let plots = dir.join("plots");
    let trace = run_dir.join("trace_0000_p1.jsonl");
    let plot = run(&["plotdata", "--trace", &s(&trace), "--out-dir", &s(&plots)]);
    assert_eq!(code(&plot), 0, "plotdata stderr: {}", stderr(&plot));
    let m_num = std::fs::read_to_string(plots.join("m_num.tsv")).unwrap();
    assert_eq!(m_num.lines().count(), 4, "header plus one row per round");
    assert!(m_num.starts_with("# step\tm_num\n1\t"));
    let hist = std::fs::read_to_string(plots.join("opinion_hist.tsv")).unwrap();
    assert_eq!(hist.lines().count(), 21, "header plus 20 bins");
    let total: u64 = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit('\t').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 40, "every agent lands in exactly one bin");

    for target in [s(&run_dir), s(&usage)] {
        let usage_out = run(&["report-usage", "--usage", &target]);
        assert_eq!(code(&usage_out), 0);
        assert!(stdout(&usage_out).contains("total"));
    }
}

#[test]
fn simulate_is_deterministic_across_processes_and_jobs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "config.toml", SMALL_CFG);
    let posts = sample_posts(dir);

    let dirs = [dir.join("a"), dir.join("b"), dir.join("c")];
    for (out_dir, jobs) in dirs.iter().zip(["1", "1", "3"]) {
        let out = run(&[
            "simulate", "--config", &s(&cfg), "--posts", &s(&posts), "--out", &s(out_dir),
            "--jobs", jobs,
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }

    let mut names: Vec<String> = vec!["manifest.jsonl".into(), "population.jsonl".into(), "edges.txt".into()];
    names.extend((0..5).map(|i| format!("trace_{i:04}_p{}.jsonl", i + 1)));
    for name in names {
        let a = std::fs::read(dirs[0].join(&name)).unwrap();
        let b = std::fs::read(dirs[1].join(&name)).unwrap();
        let c = std::fs::read(dirs[2].join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
        assert_eq!(a, c, "{name} differs under --jobs 3");
    }
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let posts = sample_posts(dir);
    let good = write_config(dir, "good.toml", SMALL_CFG);
    let bad = write_config(dir, "bad.toml", "epsilon = -1.0\n");
    let out_dir = dir.join("run");

    let missing_cfg = run(&[
        "simulate", "--config", &s(&dir.join("nope.toml")), "--posts", &s(&posts),
        "--out", &s(&out_dir),
    ]);
    assert_eq!(code(&missing_cfg), 2);
    assert!(stderr(&missing_cfg).contains("missing config file"));

    let invalid_cfg = run(&[
        "simulate", "--config", &s(&bad), "--posts", &s(&posts), "--out", &s(&out_dir),
    ]);
    assert_eq!(code(&invalid_cfg), 2);
    assert!(stderr(&invalid_cfg).contains("epsilon"));

    let missing_posts = run(&[
        "simulate", "--config", &s(&good), "--posts", &s(&dir.join("nope.jsonl")),
        "--out", &s(&out_dir),
    ]);
    assert_eq!(code(&missing_posts), 2);

    let zero_jobs = run(&[
        "simulate", "--config", &s(&good), "--posts", &s(&posts), "--out", &s(&out_dir),
        "--jobs", "0",
    ]);
    assert_eq!(code(&zero_jobs), 2);

    // clap's own usage failures share the code.
    let unknown = run(&["simulate", "--no-such-flag"]);
    assert_eq!(code(&unknown), 2);
}

#[test]
fn backend_transport_failure_exits_3_and_marks_trace_incomplete() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    // Nothing listens on the target port, so every call fails fast.
    let cfg = write_config(
        dir,
        "http.toml",
        "seed = 7\nn_agents = 40\nrounds = 3\nbackend = \"http\"\n\
         base_url = \"http://127.0.0.1:9\"\nmax_retries = 0\ninitial_backoff_ms = 1\n",
    );
    let posts = sample_posts(dir);
    let out_dir = dir.join("run");

    let out = Command::new(bin())
        .args(["simulate", "--config", &s(&cfg), "--posts", &s(&posts), "--out", &s(&out_dir)])
        .env("UGCSIM_API_KEY", "test-key")
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("partial trace written"));

    let trace = std::fs::read_to_string(out_dir.join("trace_0000_p1.jsonl")).unwrap();
    assert!(trace.contains("\"complete\":false"), "partial trace must be marked incomplete");
    assert!(out_dir.join("manifest.jsonl").is_file(), "manifest still written for inspection");
}

#[test]
fn predict_rejects_foreign_run_exit_4() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg_a = write_config(dir, "a.toml", SMALL_CFG);
    let cfg_b = write_config(dir, "b.toml", "seed = 8\nn_agents = 40\nrounds = 3\n");
    let posts = sample_posts(dir);
    let run_dir = dir.join("run");

    let sim = run(&["simulate", "--config", &s(&cfg_a), "--posts", &s(&posts), "--out", &s(&run_dir)]);
    assert_eq!(code(&sim), 0);

    let out = run(&[
        "predict", "--config", &s(&cfg_b), "--posts", &s(&posts), "--run", &s(&run_dir),
        "--out", &s(&dir.join("preds.jsonl")),
    ]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("config digest"));
}

#[test]
fn eval_rejects_mixed_label_ranges_exit_4() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "config.toml", SMALL_CFG);
    let posts = sample_posts(dir);
    let run_dir = dir.join("run");
    let preds = dir.join("preds.jsonl");

    let sim = run(&["simulate", "--config", &s(&cfg), "--posts", &s(&posts), "--out", &s(&run_dir)]);
    assert_eq!(code(&sim), 0);
    let pred = run(&[
        "predict", "--config", &s(&cfg), "--posts", &s(&posts), "--run", &s(&run_dir),
        "--out", &s(&preds),
    ]);
    assert_eq!(code(&pred), 0);

    // Same digest, different label range: only the header differs.
    let original = std::fs::read_to_string(&preds).unwrap();
    let tweaked = original.replacen("\"label_max\":16.0", "\"label_max\":8.0", 1);
    assert_ne!(original, tweaked, "header rewrite must take effect");
    let other = dir.join("other.jsonl");
    std::fs::write(&other, tweaked).unwrap();

    let out = run(&["eval", "--predictions", &s(&preds), "--predictions", &s(&other)]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("label range"));
}
