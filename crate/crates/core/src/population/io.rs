//! Population persistence: a line-delimited agent file with a versioned
//! header, and a plain-text edge list. Output is byte-deterministic.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{AgentState, ParticipationClass, PersonaProfile, Population, PopulationError, SocialGraph};

pub const POPULATION_FORMAT: &str = "ugcsim/population";
pub const POPULATION_VERSION: u32 = 1;

fn io_err(action: &'static str, path: &Path, e: std::io::Error) -> PopulationError {
    PopulationError::Io { action, path: path.display().to_string(), message: e.to_string() }
}

fn format_err(path: &Path, message: impl Into<String>) -> PopulationError {
    PopulationError::Format { path: path.display().to_string(), message: message.into() }
}

#[derive(Serialize, Deserialize)]
struct AgentRow {
    id: u32,
    class: ParticipationClass,
    #[serde(flatten)]
    persona: PersonaProfile,
}

/// Writes agents as one JSON object per line after a header line carrying
/// the format version and the producing config digest.
pub fn save_population(
    path: &Path,
    population: &Population,
    config_digest: &str,
) -> Result<(), PopulationError> {
    let file = std::fs::File::create(path).map_err(|e| io_err("write", path, e))?;
    let mut w = BufWriter::new(file);
    let header = json!({
        "format": POPULATION_FORMAT,
        "version": POPULATION_VERSION,
        "config_digest": config_digest,
        "n": population.len(),
    });
    let mut write_line = |value: &serde_json::Value| -> Result<(), PopulationError> {
        serde_json::to_writer(&mut w, value).map_err(|e| format_err(path, e.to_string()))?;
        w.write_all(b"\n").map_err(|e| io_err("write", path, e))
    };
    write_line(&header)?;
    for agent in &population.agents {
        let row = AgentRow { id: agent.id, class: agent.class, persona: agent.persona.clone() };
        let value = serde_json::to_value(&row).map_err(|e| format_err(path, e.to_string()))?;
        write_line(&value)?;
    }
    w.flush().map_err(|e| io_err("write", path, e))
}

/// Reads a population file back. `expect_digest` of `Some` enforces that the
/// file was produced under the same resolved config.
pub fn load_population(
    path: &Path,
    expect_digest: Option<&str>,
    initial_weight: f64,
) -> Result<Population, PopulationError> {
    let file = std::fs::File::open(path).map_err(|e| io_err("read", path, e))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?
        .map_err(|e| io_err("read", path, e))?;
    let header: serde_json::Value =
        serde_json::from_str(&header_line).map_err(|e| format_err(path, format!("bad header: {e}")))?;
    if header["format"] != POPULATION_FORMAT {
        return Err(format_err(path, format!("unexpected format {}", header["format"])));
    }
    if header["version"] != POPULATION_VERSION {
        return Err(format_err(path, format!("unsupported version {}", header["version"])));
    }
    if let Some(want) = expect_digest {
        if header["config_digest"] != want {
            return Err(format_err(
                path,
                format!("config digest mismatch: file has {}, expected {want}", header["config_digest"]),
            ));
        }
    }
    let n = header["n"].as_u64().ok_or_else(|| format_err(path, "header missing n"))? as usize;
    let mut agents = Vec::with_capacity(n);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err("read", path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: AgentRow = serde_json::from_str(&line)
            .map_err(|e| format_err(path, format!("line {}: {e}", i + 2)))?;
        if row.id as usize != agents.len() {
            return Err(format_err(path, format!("line {}: ids not contiguous", i + 2)));
        }
        agents.push(AgentState::new(row.id, row.persona, row.class, initial_weight));
    }
    if agents.len() != n {
        return Err(format_err(path, format!("header says {n} agents, file has {}", agents.len())));
    }
    Ok(Population { agents })
}

/// Edge list: a `#` header line, then one `follower followee` pair per line.
pub fn save_edges(path: &Path, graph: &SocialGraph, config_digest: &str) -> Result<(), PopulationError> {
    let file = std::fs::File::create(path).map_err(|e| io_err("write", path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# ugcsim/edges v1 n={} config_digest={}", graph.len(), config_digest)
        .map_err(|e| io_err("write", path, e))?;
    for (src, dst) in graph.edges() {
        writeln!(w, "{src} {dst}").map_err(|e| io_err("write", path, e))?;
    }
    w.flush().map_err(|e| io_err("write", path, e))
}

pub fn load_edges(path: &Path) -> Result<SocialGraph, PopulationError> {
    let raw = std::fs::read_to_string(path).map_err(|e| io_err("read", path, e))?;
    let mut lines = raw.lines();
    let header = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    if !header.starts_with("# ugcsim/edges v1 ") {
        return Err(format_err(path, "missing edge-list header"));
    }
    let n = header
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix("n=").and_then(|v| v.parse::<u32>().ok()))
        .ok_or_else(|| format_err(path, "header missing n="))?;
    let mut edges = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u32, PopulationError> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| format_err(path, format!("line {}: expected `src dst`", i + 2)))
        };
        let src = parse(parts.next())?;
        let dst = parse(parts.next())?;
        edges.push((src, dst));
    }
    SocialGraph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::generate_graph;

    #[test]
    fn population_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agents.jsonl");
        let pop = Population::generate(25, [0.9, 0.09, 0.01], 5, 0.2).unwrap();
        save_population(&path, &pop, "d1").unwrap();
        let back = load_population(&path, Some("d1"), 0.2).unwrap();
        assert_eq!(back, pop);
    }

    #[test]
    fn digest_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agents.jsonl");
        let pop = Population::generate(5, [0.9, 0.09, 0.01], 5, 0.2).unwrap();
        save_population(&path, &pop, "d1").unwrap();
        let err = load_population(&path, Some("other"), 0.2).unwrap_err();
        assert!(err.to_string().contains("digest mismatch"), "{err}");
    }

    #[test]
    fn save_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let pop = Population::generate(12, [0.9, 0.09, 0.01], 2, 0.2).unwrap();
        let (p1, p2) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        save_population(&p1, &pop, "d").unwrap();
        save_population(&p2, &pop, "d").unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn edges_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.txt");
        let g = generate_graph(30, 3, 9).unwrap();
        save_edges(&path, &g, "d").unwrap();
        assert_eq!(load_edges(&path).unwrap(), g);
    }

    #[test]
    fn truncated_population_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agents.jsonl");
        let pop = Population::generate(6, [0.9, 0.09, 0.01], 5, 0.2).unwrap();
        save_population(&path, &pop, "d1").unwrap();
        let raw = std::fs::read_to_string(&path).unwrap();
        let truncated: Vec<&str> = raw.lines().take(4).collect();
        std::fs::write(&path, truncated.join("\n")).unwrap();
        let err = load_population(&path, None, 0.2).unwrap_err();
        assert!(err.to_string().contains("header says"), "{err}");
    }
}
