//! Stretch experiment on the hypercube model: a geometric threshold graph
//! against a latency-oblivious random graph of matched mean degree.

use perigee_core::latency::sample_embedding;
use perigee_core::metrics::{stretch_stats, StretchSummary};
use perigee_core::rng::{stream, SeededRng};
use perigee_core::topology::{gen_erdos_renyi, gen_geometric, Topology};

use crate::error::{Result, SimError};

pub const STRETCH_HEADER: &str = "# perigee-stretch v1";
pub const STRETCH_COLUMNS: &str = "topology,seed,median,p90,max";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StretchTopology {
    Random,
    Geometric,
}

impl StretchTopology {
    pub fn name(&self) -> &'static str {
        match self {
            StretchTopology::Random => "random",
            StretchTopology::Geometric => "geometric",
        }
    }
}

#[derive(Clone, Debug)]
pub struct StretchConfig {
    pub n: usize,
    pub dim: usize,
    /// Connection radius is `radius_factor * sqrt(ln n / n)`.
    pub radius_factor: f64,
    /// Far pairs are farther apart than `far_factor * r`.
    pub far_factor: f64,
    pub pairs: usize,
}

impl Default for StretchConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            dim: 2,
            radius_factor: 2.0,
            far_factor: 3.0,
            pairs: 500,
        }
    }
}

impl StretchConfig {
    pub fn radius(&self) -> f64 {
        let n = self.n as f64;
        self.radius_factor * (n.ln() / n).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct StretchRow {
    pub topology: StretchTopology,
    pub seed: u64,
    pub summary: StretchSummary,
    pub mean_degree: f64,
}

fn mean_degree(t: &Topology) -> f64 {
    t.edge_count() as f64 / t.len() as f64
}

/// Stretch of each requested topology for each seed. Both topologies of a
/// seed share one embedding and one set of sampled pairs; the random graph's
/// edge probability matches the geometric graph's mean degree.
pub fn run_stretch(
    config: &StretchConfig,
    topologies: &[StretchTopology],
    seeds: &[u64],
) -> Result<Vec<StretchRow>> {
    let r = config.radius();
    let mut rows = Vec::new();
    for &seed in seeds {
        let model = sample_embedding(
            &mut SeededRng::derive(seed, &[stream::EMBEDDING]),
            config.n,
            config.dim,
        )
        .map_err(|e| SimError::config(e.to_string()))?;
        let geometric = gen_geometric(&model, r).map_err(|e| SimError::config(e.to_string()))?;
        let degree = mean_degree(&geometric);
        for &kind in topologies {
            let t = match kind {
                StretchTopology::Geometric => geometric.clone(),
                StretchTopology::Random => {
                    let p = (degree / (config.n - 1) as f64).min(1.0);
                    gen_erdos_renyi(config.n, p, &mut SeededRng::derive(seed, &[stream::TOPOLOGY]))
                }
            };
            let summary = stretch_stats(
                &t,
                &model,
                config.pairs,
                config.far_factor * r,
                &mut SeededRng::derive(seed, &[stream::STRETCH_PAIRS]),
            );
            rows.push(StretchRow {
                topology: kind,
                seed,
                summary,
                mean_degree: mean_degree(&t),
            });
        }
    }
    Ok(rows)
}

pub fn format_stretch_csv(rows: &[StretchRow]) -> String {
    let mut s = format!("{STRETCH_HEADER}\n{STRETCH_COLUMNS}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.topology.name(),
            r.seed,
            r.summary.median,
            r.summary.p90,
            r.summary.max
        ));
    }
    s
}
