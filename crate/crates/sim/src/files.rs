//! Text file formats: node profiles, region matrices, topology snapshots and
//! the optional trace and score dumps.
//!
//! Profiles (`# perigee-profiles v1`), comma separated with a header row:
//!
//! ```text
//! id,region,hash_weight,validation_delay_ms,adopter
//! 0,EU,1,50,true
//! ```
//!
//! Ids must be `0..n` in order. Regions are labels of the region matrix in
//! use. Hash weights are raw and renormalized when the network is built.
//!
//! Region matrix (`# perigee-region-matrix v1`): a header row `region` plus
//! the labels, then one row per label with one-way mean latencies in ms.

use std::fs;
use std::io::Write;
use std::path::Path;

use perigee_core::latency::{LatencyModel, RegionMatrix};
use perigee_core::model::{NodeProfile, RegionId};
use perigee_core::propagation::BlockTrace;
use perigee_core::rng::SeededRng;
use perigee_core::scoring::{ScoreRecord, ScoringMethod};
use perigee_core::topology::Topology;
use serde::Deserialize;

use crate::error::{Result, SimError};

pub const PROFILES_HEADER: &str = "# perigee-profiles v1";
pub const MATRIX_HEADER: &str = "# perigee-region-matrix v1";
pub const TOPOLOGY_HEADER: &str = "# perigee-topology v1: src dst latency_ms (directed out-edges)";

/// The bundled 1000-node sample, shipped as a data file.
pub const BUNDLED_PROFILES: &str = include_str!("../data/profiles_1000.csv");

/// Base validation delay of every bundled node.
pub const BASE_VALIDATION_MS: f64 = 50.0;

/// Region shares of the bundled sample, in the order of
/// [`RegionMatrix::default_seven`] labels.
pub const BUNDLED_REGION_SHARES: [(&str, f64); 7] = [
    ("NA", 0.33),
    ("SA", 0.03),
    ("EU", 0.42),
    ("AS", 0.10),
    ("AF", 0.02),
    ("CN", 0.06),
    ("OC", 0.04),
];

/// Seed the bundled sample was drawn with.
pub const BUNDLED_SEED: u64 = 2019;

#[derive(Debug, Deserialize)]
struct ProfileRow {
    id: usize,
    region: String,
    hash_weight: f64,
    validation_delay_ms: f64,
    adopter: bool,
}

fn csv_error(err: &csv::Error) -> SimError {
    let line = err.position().map(|p| p.line() as usize);
    SimError::config_at(line, err.to_string())
}

/// Parse a profile file against the labels of `matrix`.
pub fn parse_profiles(text: &str, matrix: &RegionMatrix) -> Result<Vec<NodeProfile>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.deserialize::<ProfileRow>() {
        let row = row.map_err(|e| csv_error(&e))?;
        let line = line_of_record(text, out.len());
        if row.id != out.len() {
            return Err(SimError::config_at(
                line,
                format!("expected id {}, found {}", out.len(), row.id),
            ));
        }
        let region = matrix.region(&row.region).ok_or_else(|| {
            SimError::config_at(line, format!("unknown region label {:?}", row.region))
        })?;
        let mut p = NodeProfile::new(region, row.hash_weight, row.validation_delay_ms);
        p.adopter = row.adopter;
        if !(p.hash_power >= 0.0 && p.hash_power.is_finite()) {
            return Err(SimError::config_at(line, "hash_weight must be finite and nonnegative"));
        }
        if !(p.validation_delay >= 0.0 && p.validation_delay.is_finite()) {
            return Err(SimError::config_at(
                line,
                "validation_delay_ms must be finite and nonnegative",
            ));
        }
        out.push(p);
    }
    if out.is_empty() {
        return Err(SimError::config("profile file has no records"));
    }
    Ok(out)
}

/// 1-based line of the `k`-th data record (after comments and header).
fn line_of_record(text: &str, k: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .nth(k + 1)
        .map(|(i, _)| i + 1)
}

pub fn read_profiles(path: &Path, matrix: &RegionMatrix) -> Result<Vec<NodeProfile>> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_profiles(&text, matrix).map_err(|e| e.in_file(path))
}

pub fn format_profiles(profiles: &[NodeProfile], matrix: &RegionMatrix) -> String {
    let mut s = String::new();
    s.push_str(PROFILES_HEADER);
    s.push('\n');
    s.push_str("id,region,hash_weight,validation_delay_ms,adopter\n");
    for (i, p) in profiles.iter().enumerate() {
        s.push_str(&format!(
            "{i},{},{},{},{}\n",
            matrix.labels()[p.region.index()],
            p.hash_power,
            p.validation_delay,
            p.adopter
        ));
    }
    s
}

/// Regenerate the bundled sample: regions drawn i.i.d. from
/// [`BUNDLED_REGION_SHARES`], unit hash weight, the base validation delay,
/// and every node an adopter.
pub fn generate_profiles(n: usize, seed: u64) -> Vec<NodeProfile> {
    let mut rng = SeededRng::derive(seed, &[perigee_core::rng::stream::PROFILES]);
    let total: f64 = BUNDLED_REGION_SHARES.iter().map(|(_, w)| w).sum();
    (0..n)
        .map(|_| {
            let mut x = rng.unit() * total;
            let mut region = BUNDLED_REGION_SHARES.len() - 1;
            for (i, (_, w)) in BUNDLED_REGION_SHARES.iter().enumerate() {
                if x < *w {
                    region = i;
                    break;
                }
                x -= w;
            }
            NodeProfile::new(RegionId(region as u16), 1.0, BASE_VALIDATION_MS)
        })
        .collect()
}

/// Parse a region matrix file.
pub fn parse_region_matrix(text: &str) -> Result<RegionMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(&e))?.clone();
    if header.get(0) != Some("region") || header.len() < 2 {
        return Err(SimError::config_at(
            Some(1),
            "header must be `region` followed by region labels",
        ));
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut mean = Vec::with_capacity(labels.len() * labels.len());
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(&e))?;
        let line = rec.position().map(|p| p.line() as usize);
        if r >= labels.len() {
            return Err(SimError::config_at(line, "more rows than labels"));
        }
        if rec.get(0) != Some(labels[r].as_str()) {
            return Err(SimError::config_at(
                line,
                format!("row {} must be labelled {:?}", r + 1, labels[r]),
            ));
        }
        if rec.len() != labels.len() + 1 {
            return Err(SimError::config_at(
                line,
                format!("expected {} entries, found {}", labels.len(), rec.len() - 1),
            ));
        }
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| SimError::config_at(line, format!("not a number: {field:?}")))?;
            mean.push(v);
        }
    }
    RegionMatrix::new(labels, mean).map_err(|e| SimError::config(e.to_string()))
}

pub fn read_region_matrix(path: &Path) -> Result<RegionMatrix> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_region_matrix(&text).map_err(|e| e.in_file(path))
}

pub fn format_region_matrix(matrix: &RegionMatrix) -> String {
    let labels = matrix.labels();
    let mut s = format!("{MATRIX_HEADER}\nregion,{}\n", labels.join(","));
    for (a, la) in labels.iter().enumerate() {
        s.push_str(la);
        for b in 0..labels.len() {
            s.push_str(&format!(",{}", matrix.mean(RegionId(a as u16), RegionId(b as u16))));
        }
        s.push('\n');
    }
    s
}

/// Directed out-edges with their realized latency, one per line.
pub fn format_topology<L: LatencyModel + ?Sized>(topology: &Topology, latency: &L) -> String {
    let mut s = String::with_capacity(topology.edge_count() * 16);
    s.push_str(TOPOLOGY_HEADER);
    s.push('\n');
    for (u, v) in topology.edges() {
        s.push_str(&format!("{u} {v} {:.6}\n", latency.delay(u, v)));
    }
    s
}

pub fn write_traces(path: &Path, traces: &[BlockTrace]) -> Result<()> {
    let mut s = String::from("# perigee-traces v1\nblock_id,node,arrival_ms\n");
    for t in traces {
        for (v, a) in t.arrival.iter().enumerate() {
            s.push_str(&format!("{},{v},{a}\n", t.block_id));
        }
    }
    write_file(path, &s)
}

pub fn append_scores(
    path: &Path,
    round: u64,
    method: &ScoringMethod,
    scores: &[ScoreRecord],
) -> Result<()> {
    let fresh = !path.exists();
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| SimError::io(path, e))?;
    let mut s = String::new();
    if fresh {
        s.push_str("# perigee-scores v1\nround,node,neighbor,method,score\n");
    }
    for r in scores {
        s.push_str(&format!(
            "{round},{},{},{},{}\n",
            r.node,
            r.neighbor,
            method.name(),
            r.score
        ));
    }
    f.write_all(s.as_bytes()).map_err(|e| SimError::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| SimError::io(path, e))
}
