//! Hash-power coverage delay, stretch against an embedding, and edge-latency
//! histograms.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::latency::{HypercubeModel, LatencyModel};
use crate::model::{NetworkSpec, NodeId, NodeProfile, RegionId};
use crate::propagation::{propagate_block, NEVER};
use crate::rng::SeededRng;
use crate::scoring::PercentileSpec;
use crate::topology::{Adjacency, Topology};

/// Lower bound slack for stretch ratios.
pub const STRETCH_EPSILON: f64 = 1e-9;

/// Slack when comparing accumulated hash mass against a coverage target.
const MASS_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("coverage {0} must lie in (0, 1]")]
    Coverage(f64),
    #[error("histogram bin edges must be strictly increasing with at least two edges")]
    Bins,
    #[error("region list has {regions} entries for {nodes} nodes")]
    Regions { regions: usize, nodes: usize },
    #[error("runs disagree on node count ({0} vs {1})")]
    Mismatch(usize, usize),
}

/// Smallest time by which nodes holding at least `q` of the hash power have
/// the block. [`NEVER`] if that mass is unreachable.
pub fn coverage_delay(arrival: &[f64], hash: &[f64], q: f64) -> Result<f64, MetricsError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(MetricsError::Coverage(q));
    }
    let mut order: Vec<usize> = (0..arrival.len()).collect();
    order.sort_by(|&a, &b| arrival[a].total_cmp(&arrival[b]).then(a.cmp(&b)));
    let mut mass = 0.0;
    for i in order {
        if arrival[i] == NEVER {
            break;
        }
        mass += hash[i];
        if mass >= q - MASS_EPSILON {
            return Ok(arrival[i]);
        }
    }
    Ok(NEVER)
}

/// Coverage delay of a block mined by `source`.
pub fn lambda<L: LatencyModel + ?Sized>(
    adj: &Adjacency,
    latency: &L,
    spec: &NetworkSpec,
    source: NodeId,
    q: f64,
) -> Result<f64, MetricsError> {
    let trace = propagate_block(adj, latency, spec.profiles(), source, 0);
    coverage_delay(&trace.arrival, &spec.hash_powers(), q)
}

/// `(lambda at 50%, lambda at 90%)` for one source from a single flood.
pub fn lambda_pair<L: LatencyModel + ?Sized>(
    adj: &Adjacency,
    latency: &L,
    profiles: &[NodeProfile],
    hash: &[f64],
    source: NodeId,
) -> (f64, f64) {
    let trace = propagate_block(adj, latency, profiles, source, 0);
    let l50 = coverage_delay(&trace.arrival, hash, 0.5).expect("valid level");
    let l90 = coverage_delay(&trace.arrival, hash, 0.9).expect("valid level");
    (l50, l90)
}

/// [`lambda_pair`] for every node, sequentially.
pub fn lambda_all<L: LatencyModel + ?Sized>(
    adj: &Adjacency,
    latency: &L,
    spec: &NetworkSpec,
) -> Vec<(f64, f64)> {
    let hash = spec.hash_powers();
    spec.nodes()
        .map(|v| lambda_pair(adj, latency, spec.profiles(), &hash, v))
        .collect()
}

/// Hash-weighted mean of per-source values.
pub fn weighted_mean(values: &[f64], hash: &[f64]) -> f64 {
    values.iter().zip(hash).map(|(v, f)| v * f).sum()
}

/// Average of the `k`-th smallest value across runs, for every rank `k`.
/// Ranks, not identities, are averaged.
pub fn rank_means(runs: &[Vec<f64>]) -> Result<Vec<f64>, MetricsError> {
    let Some(first) = runs.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    let mut acc = vec![0.0; n];
    for run in runs {
        if run.len() != n {
            return Err(MetricsError::Mismatch(n, run.len()));
        }
        let mut sorted = run.clone();
        sorted.sort_by(f64::total_cmp);
        for (a, x) in acc.iter_mut().zip(sorted) {
            *a += x;
        }
    }
    for a in &mut acc {
        *a /= runs.len() as f64;
    }
    Ok(acc)
}

/// Nearest-rank quantile of an ascending slice.
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return NEVER;
    }
    sorted[PercentileSpec { q }.rank(sorted.len()) - 1]
}

#[derive(Clone, Debug, PartialEq)]
pub struct StretchSummary {
    pub median: f64,
    pub p90: f64,
    pub max: f64,
    pub min: f64,
    pub evaluated: usize,
    /// Sampled far pairs in different components.
    pub disconnected: usize,
}

/// Shortest-path latency over Euclidean distance for randomly sampled pairs
/// farther apart than `far_threshold`. Validation delays are ignored.
pub fn stretch_stats(
    topology: &Topology,
    model: &HypercubeModel,
    sample_pairs: usize,
    far_threshold: f64,
    rng: &mut SeededRng,
) -> StretchSummary {
    let n = topology.len();
    let adj = topology.adjacency();
    let zero: Vec<NodeProfile> = (0..n)
        .map(|_| NodeProfile::new(RegionId(0), 1.0, 0.0))
        .collect();
    let mut ratios = Vec::with_capacity(sample_pairs);
    let mut disconnected = 0;
    let max_attempts = sample_pairs.saturating_mul(1000).max(1000);
    let mut attempts = 0;
    while ratios.len() + disconnected < sample_pairs && attempts < max_attempts {
        attempts += 1;
        let a = NodeId::from_index(rng.index(n));
        let b = NodeId::from_index(rng.index(n));
        if a == b {
            continue;
        }
        if model.distance(a, b) <= far_threshold {
            continue;
        }
        let direct = model.delay(a, b);
        let trace = propagate_block(&adj, model, &zero, a, 0);
        let dist = trace.arrival[b.index()];
        if dist == NEVER {
            disconnected += 1;
        } else {
            ratios.push(dist / direct);
        }
    }
    ratios.sort_by(f64::total_cmp);
    StretchSummary {
        median: sorted_quantile(&ratios, 0.5),
        p90: sorted_quantile(&ratios, 0.9),
        max: ratios.last().copied().unwrap_or(NEVER),
        min: ratios.first().copied().unwrap_or(NEVER),
        evaluated: ratios.len(),
        disconnected,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Same-region edges per bin.
    pub intra_counts: Vec<usize>,
    pub below: usize,
    pub above: usize,
    pub total: usize,
    pub intra_total: usize,
}

impl Histogram {
    pub fn intra_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.intra_total as f64 / self.total as f64
        }
    }
}

/// `count` equal-width bins over `[0, max]`.
pub fn uniform_bins(max: f64, count: usize) -> Vec<f64> {
    let top = if max > 0.0 { max } else { 1.0 };
    (0..=count).map(|i| top * i as f64 / count as f64).collect()
}

/// Bin the realized latency of every directed out-edge. Bins are half-open
/// except the last, which includes its upper edge.
pub fn edge_latency_histogram<L: LatencyModel + ?Sized>(
    topology: &Topology,
    latency: &L,
    regions: &[RegionId],
    bins: &[f64],
) -> Result<Histogram, MetricsError> {
    if bins.len() < 2 || bins.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(MetricsError::Bins);
    }
    if regions.len() != topology.len() {
        return Err(MetricsError::Regions {
            regions: regions.len(),
            nodes: topology.len(),
        });
    }
    let nb = bins.len() - 1;
    let mut h = Histogram {
        edges: bins.to_vec(),
        counts: vec![0; nb],
        intra_counts: vec![0; nb],
        below: 0,
        above: 0,
        total: 0,
        intra_total: 0,
    };
    for (u, v) in topology.edges() {
        let d = latency.delay(u, v);
        let intra = regions[u.index()] == regions[v.index()];
        h.total += 1;
        h.intra_total += intra as usize;
        if d < bins[0] {
            h.below += 1;
        } else if d > bins[nb] {
            h.above += 1;
        } else {
            let i = bins.partition_point(|&e| e <= d).saturating_sub(1).min(nb - 1);
            h.counts[i] += 1;
            h.intra_counts[i] += intra as usize;
        }
    }
    Ok(h)
}
