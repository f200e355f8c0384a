//! Summaries across artifact directories: rank-wise mean λ90 of the final
//! evaluation at fixed ranks, with deltas against the random baseline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use perigee_core::metrics::rank_means;
use serde::Deserialize;

use crate::error::{Result, SimError};
use crate::harness::{LAMBDA_COLUMNS, LAMBDA_HEADER};

/// Reported ranks as fractions of the node count (ranks 100, 300, ..., 900
/// of 1000 nodes).
pub const RANK_FRACTIONS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Deserialize)]
struct LambdaRow {
    run_id: String,
    round: u64,
    #[allow(dead_code)]
    node_rank: usize,
    node_id: usize,
    #[allow(dead_code)]
    lambda50_ms: f64,
    lambda90_ms: f64,
    #[allow(dead_code)]
    adopter: bool,
}

/// Final-round λ90 per run, grouped as `scenario:algorithm -> seed -> values`.
pub type FinalLambdas = BTreeMap<String, BTreeMap<u64, Vec<f64>>>;

/// Read a combined `lambda.csv` and keep each run's last evaluation.
pub fn read_final_lambdas(path: &Path) -> Result<FinalLambdas> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_final_lambdas(&text).map_err(|e| e.in_file(path))
}

pub fn parse_final_lambdas(text: &str) -> Result<FinalLambdas> {
    if text.lines().next() != Some(LAMBDA_HEADER) {
        return Err(SimError::config_at(Some(1), format!("expected schema line {LAMBDA_HEADER:?}")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| SimError::config(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != LAMBDA_COLUMNS {
        return Err(SimError::config_at(Some(2), format!("unexpected columns {header:?}")));
    }
    // (label, seed) -> (round, node -> lambda90)
    let mut latest: BTreeMap<(String, u64), (u64, BTreeMap<usize, f64>)> = BTreeMap::new();
    for row in reader.deserialize::<LambdaRow>() {
        let row = row.map_err(|e| {
            SimError::config_at(e.position().map(|p| p.line() as usize), e.to_string())
        })?;
        let mut parts = row.run_id.rsplitn(2, ':');
        let seed: u64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| SimError::config(format!("malformed run_id {:?}", row.run_id)))?;
        let label = parts
            .next()
            .ok_or_else(|| SimError::config(format!("malformed run_id {:?}", row.run_id)))?
            .to_string();
        let entry = latest.entry((label, seed)).or_insert((row.round, BTreeMap::new()));
        if row.round > entry.0 {
            *entry = (row.round, BTreeMap::new());
        }
        if row.round == entry.0 {
            entry.1.insert(row.node_id, row.lambda90_ms);
        }
    }
    let mut out = FinalLambdas::new();
    for ((label, seed), (_, nodes)) in latest {
        out.entry(label)
            .or_default()
            .insert(seed, nodes.into_values().collect());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    /// `scenario:algorithm`.
    pub label: String,
    pub seeds: usize,
    pub ranks: Vec<usize>,
    pub lambda90: Vec<f64>,
    /// Percentage change against the baseline at each rank; `None` without a
    /// baseline.
    pub delta_pct: Option<Vec<f64>>,
}

/// 1-based ranks reported for `n` nodes.
pub fn report_ranks(n: usize) -> Vec<usize> {
    RANK_FRACTIONS
        .iter()
        .map(|f| ((f * n as f64).round() as usize).clamp(1, n))
        .collect()
}

/// Build the summary table. Each group is compared with the `random` group of
/// the same scenario when present, otherwise with the first `random` group.
pub fn summarize(groups: &FinalLambdas) -> Result<Vec<SummaryRow>> {
    let mut n = None;
    let mut means: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (label, seeds) in groups {
        let runs: Vec<Vec<f64>> = seeds.values().cloned().collect();
        for r in &runs {
            match n {
                None => n = Some(r.len()),
                Some(m) if m != r.len() => {
                    return Err(SimError::Runtime(format!(
                        "{label}: {} nodes, but other runs have {m}",
                        r.len()
                    )))
                }
                _ => {}
            }
        }
        means.insert(label, rank_means(&runs).map_err(|e| SimError::Runtime(e.to_string()))?);
    }
    let Some(n) = n else {
        return Ok(Vec::new());
    };
    let ranks = report_ranks(n);
    let pick = |m: &[f64]| ranks.iter().map(|&r| m[r - 1]).collect::<Vec<f64>>();
    let first_random = means
        .iter()
        .find(|(l, _)| l.ends_with(":random"))
        .map(|(_, m)| pick(m));
    let mut rows = Vec::new();
    for (label, m) in &means {
        let scenario = label.rsplit_once(':').map_or("", |(s, _)| s);
        let base = means
            .get(format!("{scenario}:random").as_str())
            .map(|m| pick(m))
            .or_else(|| first_random.clone());
        let values = pick(m);
        let delta_pct = base.map(|b| {
            values
                .iter()
                .zip(&b)
                .map(|(v, b)| 100.0 * (v - b) / b)
                .collect()
        });
        rows.push(SummaryRow {
            label: label.to_string(),
            seeds: groups[*label].len(),
            ranks: ranks.clone(),
            lambda90: values,
            delta_pct,
        });
    }
    Ok(rows)
}

/// Read the combined `lambda.csv` of every directory and summarize them
/// together.
pub fn compare_dirs(dirs: &[&Path]) -> Result<Vec<SummaryRow>> {
    let mut all = FinalLambdas::new();
    for d in dirs {
        for (label, seeds) in read_final_lambdas(&d.join("lambda.csv"))? {
            let slot = all.entry(label.clone()).or_default();
            for (seed, v) in seeds {
                if slot.insert(seed, v).is_some() {
                    return Err(SimError::Runtime(format!(
                        "{label} seed {seed} appears in more than one directory"
                    )));
                }
            }
        }
    }
    summarize(&all)
}

pub fn format_table(rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let Some(first) = rows.first() else {
        return "no runs found\n".into();
    };
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
    let _ = write!(s, "{:<width$} seeds", "run");
    for r in &first.ranks {
        let _ = write!(s, " {:>18}", format!("rank {r} λ90 ms"));
    }
    s.push('\n');
    for row in rows {
        let _ = write!(s, "{:<width$} {:>5}", row.label, row.seeds);
        for (i, v) in row.lambda90.iter().enumerate() {
            let cell = match &row.delta_pct {
                Some(d) => format!("{v:.1} ({:+.1}%)", d[i]),
                None => format!("{v:.1}"),
            };
            let _ = write!(s, " {cell:>18}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_text(rows: &[(&str, u64, usize, f64)]) -> String {
        let mut s = format!("{LAMBDA_HEADER}\n{LAMBDA_COLUMNS}\n");
        for (id, round, node, l) in rows {
            s.push_str(&format!("{id},{round},1,{node},0,{l},true\n"));
        }
        s
    }

    #[test]
    fn keeps_last_round_and_compares_to_random() {
        let text = csv_text(&[
            ("s:random:1", 0, 0, 100.0),
            ("s:random:1", 0, 1, 200.0),
            ("s:perigee-subset:1", 0, 0, 100.0),
            ("s:perigee-subset:1", 0, 1, 200.0),
            ("s:perigee-subset:1", 5, 0, 50.0),
            ("s:perigee-subset:1", 5, 1, 150.0),
        ]);
        let g = parse_final_lambdas(&text).unwrap();
        assert_eq!(g["s:perigee-subset"][&1], vec![50.0, 150.0]);
        let rows = summarize(&g).unwrap();
        let subset = rows.iter().find(|r| r.label == "s:perigee-subset").unwrap();
        assert_eq!(subset.ranks, vec![1, 1, 1, 1, 2]);
        assert_eq!(subset.delta_pct.as_ref().unwrap()[0], -50.0);
        let random = rows.iter().find(|r| r.label == "s:random").unwrap();
        assert!(random.delta_pct.as_ref().unwrap().iter().all(|d| *d == 0.0));
        assert!(format_table(&rows).contains("-50.0%"));
    }

    #[test]
    fn mismatched_node_counts_fail() {
        let text = csv_text(&[
            ("s:random:1", 0, 0, 1.0),
            ("s:random:1", 0, 1, 1.0),
            ("s:full:1", 0, 0, 1.0),
        ]);
        let g = parse_final_lambdas(&text).unwrap();
        assert!(summarize(&g).is_err());
    }

    #[test]
    fn schema_is_checked() {
        assert!(parse_final_lambdas("run_id,round\n").is_err());
        let bad = format!("{LAMBDA_HEADER}\nrun_id,round\n");
        assert!(parse_final_lambdas(&bad).is_err());
    }

    #[test]
    fn report_ranks_for_desk_scale() {
        assert_eq!(report_ranks(1000), vec![100, 300, 500, 700, 900]);
    }
}
