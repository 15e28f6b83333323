//! The five subcommands. Every artifact embeds the resolved config digest
//! so downstream stages can refuse mismatched inputs.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ugcsim_core::backend::{build_backend, UsageLedger, UsageReport};
use ugcsim_core::config::{SimConfig, SimMode};
use ugcsim_core::population::{save_edges, save_population};
use ugcsim_core::predict::{
    evaluate, extract_usable, predict_post, read_predictions, write_eval_report,
    write_predictions, FieldMap, PredictError, PredictionErrorRecord, PredictionLine,
    RecordHeader, EVAL_FORMAT, PREDICTIONS_FORMAT,
};
use ugcsim_core::prompt::PromptSet;
use ugcsim_core::runtime::{
    build_world, extract_features, read_posts, read_trace, run_simulation, write_trace,
    PropagationTrace, SimError, SimHandles,
};

use crate::CliError;

pub const MANIFEST_FORMAT: &str = "ugcsim/manifest";
pub const USAGE_FORMAT: &str = "ugcsim/usage";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    format: String,
    version: u32,
    config_digest: String,
    seed: u64,
    mode: SimMode,
    n_posts: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    post_id: String,
    seed: u64,
    trace: String,
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::usage(format!("missing {what}: {}", path.display())));
    }
    Ok(())
}

fn io_usage(path: &Path, e: std::io::Error) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

fn io_data(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn load_config(path: &Path) -> Result<SimConfig, CliError> {
    require_file(path, "config file")?;
    Ok(SimConfig::load(path)?)
}

/// Trace filenames carry the post index for uniqueness; the id is reduced
/// to a filesystem-safe suffix for readability only.
fn trace_filename(index: usize, post_id: &str) -> String {
    let safe: String = post_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("trace_{index:04}_{safe}.jsonl")
}

fn write_usage(path: &Path, config_digest: &str, report: &UsageReport) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(|e| io_data(path, e))?;
    let mut w = BufWriter::new(file);
    let header = serde_json::json!({
        "format": USAGE_FORMAT,
        "version": ARTIFACT_VERSION,
        "config_digest": config_digest,
    });
    writeln!(w, "{header}").map_err(|e| io_data(path, e))?;
    writeln!(w, "{}", serde_json::to_string(report).expect("report serializes"))
        .map_err(|e| io_data(path, e))?;
    w.flush().map_err(|e| io_data(path, e))
}

pub fn simulate(
    config_path: &Path,
    posts_path: &Path,
    out_dir: &Path,
    jobs: usize,
) -> Result<(), CliError> {
    let cfg = load_config(config_path)?;
    require_file(posts_path, "posts file")?;
    if jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    let posts = read_posts(posts_path)?;
    let digest = cfg.digest();

    std::fs::create_dir_all(out_dir).map_err(|e| io_data(out_dir, e))?;
    let (population, graph) = build_world(&cfg)?;
    save_population(&out_dir.join("population.jsonl"), &population, &digest)?;
    save_edges(&out_dir.join("edges.txt"), &graph, &digest)?;

    let backend = build_backend(&cfg)?;
    let ledger = UsageLedger::new();
    let prompts = PromptSet::load(&cfg.prompts_dir)?;
    let handles = SimHandles { backend: backend.as_ref(), ledger: &ledger, prompts: &prompts };

    // Per-post worker pool. Slots keep results in post order so the
    // manifest and any failure report are deterministic.
    let slots: Vec<Mutex<Option<Result<PropagationTrace, SimError>>>> =
        posts.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    let workers = jobs.min(posts.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= posts.len() {
                    break;
                }
                let sim_seed = cfg.seed + i as u64;
                let result =
                    run_simulation(&posts[i], &population, &graph, &cfg, sim_seed, &handles);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });

    let mut rows = Vec::with_capacity(posts.len());
    let mut first_failure: Option<(String, SimError)> = None;
    for (i, (post, slot)) in posts.iter().zip(&slots).enumerate() {
        let result = slot.lock().expect("slot lock").take().expect("worker filled slot");
        let name = trace_filename(i, &post.id);
        let trace = match result {
            Ok(trace) => trace,
            Err(SimError::Backend { step, source, partial }) => {
                log::error!("post {}: backend failed at step {step}: {source}", post.id);
                if first_failure.is_none() {
                    first_failure = Some((
                        post.id.clone(),
                        SimError::Backend { step, source, partial: partial.clone() },
                    ));
                }
                *partial
            }
            Err(other) => return Err(CliError::data(other.to_string())),
        };
        write_trace(&out_dir.join(&name), &trace)?;
        rows.push(ManifestRow { post_id: post.id.clone(), seed: cfg.seed + i as u64, trace: name });
    }

    let manifest_path = out_dir.join("manifest.jsonl");
    let file = std::fs::File::create(&manifest_path).map_err(|e| io_data(&manifest_path, e))?;
    let mut w = BufWriter::new(file);
    let header = ManifestHeader {
        format: MANIFEST_FORMAT.to_string(),
        version: ARTIFACT_VERSION,
        config_digest: digest.clone(),
        seed: cfg.seed,
        mode: cfg.mode,
        n_posts: posts.len(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header serializes"))
        .map_err(|e| io_data(&manifest_path, e))?;
    for row in &rows {
        writeln!(w, "{}", serde_json::to_string(row).expect("row serializes"))
            .map_err(|e| io_data(&manifest_path, e))?;
    }
    w.flush().map_err(|e| io_data(&manifest_path, e))?;

    let report = ledger.report();
    write_usage(&out_dir.join("usage.json"), &digest, &report)?;

    if let Some((post_id, err)) = first_failure {
        return Err(CliError::backend(format!(
            "post {post_id}: {err}; partial trace written, marked incomplete"
        )));
    }
    println!(
        "simulated {} post(s) into {} ({} prompt tokens, {} completion tokens)",
        posts.len(),
        out_dir.display(),
        report.total.prompt_tokens,
        report.total.completion_tokens,
    );
    Ok(())
}

fn read_manifest(run_dir: &Path) -> Result<(ManifestHeader, Vec<ManifestRow>), CliError> {
    let path = run_dir.join("manifest.jsonl");
    require_file(&path, "run manifest")?;
    let file = std::fs::File::open(&path).map_err(|e| io_usage(&path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?
        .map_err(|e| io_data(&path, e))?;
    let header: ManifestHeader = serde_json::from_str(&header_line)
        .map_err(|e| CliError::data(format!("{}: bad header: {e}", path.display())))?;
    if header.format != MANIFEST_FORMAT {
        return Err(CliError::data(format!(
            "{}: expected format {MANIFEST_FORMAT}, found {}",
            path.display(),
            header.format
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| io_data(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ManifestRow = serde_json::from_str(&line)
            .map_err(|e| CliError::data(format!("{}: line {}: {e}", path.display(), i + 2)))?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn predict(
    config_path: &Path,
    posts_path: &Path,
    run_dir: &Path,
    out_path: &Path,
    usage_path: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = load_config(config_path)?;
    require_file(posts_path, "posts file")?;
    if !run_dir.is_dir() {
        return Err(CliError::usage(format!("missing run directory: {}", run_dir.display())));
    }
    let posts = read_posts(posts_path)?;
    let digest = cfg.digest();
    let (manifest, rows) = read_manifest(run_dir)?;
    if manifest.config_digest != digest {
        return Err(CliError::data(format!(
            "run {} was produced under config digest {}, current config is {digest}",
            run_dir.display(),
            manifest.config_digest
        )));
    }

    let map = FieldMap::load(&cfg.field_map_path)?;
    let prompts = PromptSet::load(&cfg.prompts_dir)?;
    let backend = build_backend(&cfg)?;
    let ledger = UsageLedger::new();

    let mut lines = Vec::with_capacity(posts.len());
    let mut failed = 0usize;
    for post in &posts {
        let row = rows.iter().find(|r| r.post_id == post.id).ok_or_else(|| {
            CliError::usage(format!("run has no trace for post {}", post.id))
        })?;
        let trace_path = run_dir.join(&row.trace);
        require_file(&trace_path, "trace file")?;
        let trace = read_trace(&trace_path)?;
        if trace.config_digest != digest {
            return Err(CliError::data(format!(
                "trace {} carries config digest {}, current config is {digest}",
                trace_path.display(),
                trace.config_digest
            )));
        }
        let features = extract_features(&trace)?;
        match predict_post(
            backend.as_ref(),
            &ledger,
            &cfg,
            &prompts,
            &map,
            post,
            Some(&features),
        ) {
            Ok(record) => lines.push(PredictionLine::Scored(record)),
            Err(PredictError::Malformed { post_id, reply }) => {
                log::warn!("post {post_id}: unparseable score, recording the failure");
                failed += 1;
                lines.push(PredictionLine::Failed(PredictionErrorRecord {
                    post_id,
                    error: format!("no parseable score after a reprompt; last reply {reply:?}"),
                }));
            }
            Err(other) => return Err(other.into()),
        }
    }

    let header = RecordHeader::new(PREDICTIONS_FORMAT, &cfg, &map.version);
    write_predictions(out_path, &header, &lines).map_err(CliError::from)?;
    if let Some(usage) = usage_path {
        write_usage(usage, &digest, &ledger.report())?;
    }
    println!(
        "scored {} post(s), {} failed; wrote {}",
        lines.len() - failed,
        failed,
        out_path.display()
    );
    Ok(())
}

pub fn eval(prediction_paths: &[PathBuf], out_path: Option<&Path>) -> Result<(), CliError> {
    let mut combined = Vec::new();
    let mut first_header: Option<RecordHeader> = None;
    for path in prediction_paths {
        require_file(path, "predictions file")?;
        let (header, lines) = read_predictions(path)?;
        match &first_header {
            None => first_header = Some(header),
            Some(existing) => {
                if existing.config_digest != header.config_digest {
                    return Err(CliError::data(format!(
                        "{} carries config digest {}, other inputs carry {}",
                        path.display(),
                        header.config_digest,
                        existing.config_digest
                    )));
                }
                if (existing.label_min, existing.label_max)
                    != (header.label_min, header.label_max)
                    || existing.field_map_version != header.field_map_version
                {
                    return Err(CliError::data(format!(
                        "{} disagrees with other inputs on label range or field map",
                        path.display()
                    )));
                }
            }
        }
        combined.extend(lines);
    }
    let header = first_header.expect("at least one predictions file");
    let (records, failures) = extract_usable(&combined);
    for failure in &failures {
        log::warn!("post {} has no score: {}", failure.post_id, failure.error);
    }
    let report = evaluate(&records, Some((header.label_min, header.label_max)))?;
    println!(
        "n={} mae={:.6} mse={:.6} src={:.6} ce={}",
        report.n,
        report.mae,
        report.mse,
        report.src,
        report.ce.map_or("n/a".to_string(), |c| format!("{c:.6}")),
    );
    if let Some(out) = out_path {
        let out_header = RecordHeader {
            format: EVAL_FORMAT.to_string(),
            ..header
        };
        write_eval_report(out, &out_header, &report).map_err(CliError::from)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

pub fn plotdata(trace_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    require_file(trace_path, "trace file")?;
    let trace = read_trace(trace_path)?;
    std::fs::create_dir_all(out_dir).map_err(|e| io_data(out_dir, e))?;

    let m_num_path = out_dir.join("m_num.tsv");
    let mut out = String::from("# step\tm_num\n");
    for step in &trace.steps {
        out.push_str(&format!("{}\t{}\n", step.step, step.m_num));
    }
    std::fs::write(&m_num_path, out).map_err(|e| io_data(&m_num_path, e))?;

    // Final opinions, 20 equal bins over the 0 to 10 scale, top edge closed.
    let hist_path = out_dir.join("opinion_hist.tsv");
    let mut counts = [0u64; 20];
    for &o in &trace.final_opinions {
        let bin = ((o / 0.5) as usize).min(19);
        counts[bin] += 1;
    }
    let mut out = String::from("# bin_lo\tbin_hi\tcount\n");
    for (i, count) in counts.iter().enumerate() {
        out.push_str(&format!("{:.1}\t{:.1}\t{count}\n", i as f64 * 0.5, (i + 1) as f64 * 0.5));
    }
    std::fs::write(&hist_path, out).map_err(|e| io_data(&hist_path, e))?;

    println!(
        "wrote {} ({} rows) and {} (20 bins)",
        m_num_path.display(),
        trace.steps.len(),
        hist_path.display()
    );
    Ok(())
}

pub fn report_usage(usage_path: &Path) -> Result<(), CliError> {
    let path =
        if usage_path.is_dir() { usage_path.join("usage.json") } else { usage_path.to_path_buf() };
    require_file(&path, "usage file")?;
    let content = std::fs::read_to_string(&path).map_err(|e| io_data(&path, e))?;
    let mut lines = content.lines();
    let header: serde_json::Value = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))
        .and_then(|l| {
            serde_json::from_str(l)
                .map_err(|e| CliError::data(format!("{}: bad header: {e}", path.display())))
        })?;
    if header.get("format").and_then(|f| f.as_str()) != Some(USAGE_FORMAT) {
        return Err(CliError::data(format!("{}: not a usage file", path.display())));
    }
    let report: UsageReport = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: missing report line", path.display())))
        .and_then(|l| {
            serde_json::from_str(l)
                .map_err(|e| CliError::data(format!("{}: bad report: {e}", path.display())))
        })?;

    println!(
        "{:<14} {:>8} {:>15} {:>19} {:>10}",
        "site", "calls", "prompt_tokens", "completion_tokens", "wall_ms"
    );
    for (site, usage) in &report.per_site {
        println!(
            "{site:<14} {:>8} {:>15} {:>19} {:>10}",
            usage.calls, usage.prompt_tokens, usage.completion_tokens, usage.wall_ms
        );
    }
    println!(
        "{:<14} {:>8} {:>15} {:>19} {:>10}",
        "total",
        report.total.calls,
        report.total.prompt_tokens,
        report.total.completion_tokens,
        report.total.wall_ms
    );
    Ok(())
}
