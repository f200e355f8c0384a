//! Neighbor scoring and the per-round neighbor update.
//!
//! Three ways to rank a node's out-neighbors from its observation set:
//!
//! * **vanilla**: each neighbor's score is the percentile of its normalized
//!   delivery times over the current round;
//! * **UCB**: normalized times accumulate across rounds while a neighbor
//!   stays connected, and a neighbor is evicted only when its lower
//!   confidence bound exceeds another neighbor's upper bound;
//! * **subset**: neighbors are picked greedily so that the per-block minimum
//!   over the kept group has the lowest percentile.
//!
//! Lower scores are better everywhere.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::model::{NetworkSpec, NodeId};
use crate::propagation::{ObservationSet, NEVER};
use crate::rng::{stream, SeededRng};
use crate::topology::{RewireReport, Topology, TopologyError};

/// Largest neighbor set [`subset_select_exhaustive`] will enumerate.
pub const EXHAUSTIVE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("percentile of an empty multiset")]
    Empty,
    #[error("percentile level {0} must lie in (0, 1]")]
    Level(f64),
    #[error("cannot keep {k} of {available} neighbors")]
    TooMany { k: usize, available: usize },
    #[error("exhaustive search limited to {EXHAUSTIVE_LIMIT} neighbors, got {0}")]
    Guard(usize),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Nearest-rank percentile level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PercentileSpec {
    pub q: f64,
}

impl Default for PercentileSpec {
    fn default() -> Self {
        Self { q: 0.9 }
    }
}

impl PercentileSpec {
    pub fn new(q: f64) -> Result<Self, ScoringError> {
        if q > 0.0 && q <= 1.0 {
            Ok(Self { q })
        } else {
            Err(ScoringError::Level(q))
        }
    }

    /// 1-indexed rank `ceil(q * n)` into the ascending order, clamped to `1..=n`.
    pub fn rank(&self, n: usize) -> usize {
        let raw = libm::ceil(self.q * n as f64 - 1e-9);
        (raw.max(1.0) as usize).min(n)
    }
}

/// Nearest-rank percentile; infinities sort last.
pub fn percentile(values: &[f64], spec: PercentileSpec) -> Result<f64, ScoringError> {
    if values.is_empty() {
        return Err(ScoringError::Empty);
    }
    let mut buf = values.to_vec();
    Ok(select_rank(&mut buf, spec))
}

/// Percentile of `buf` (reordered in place); [`NEVER`] when empty.
fn select_rank(buf: &mut [f64], spec: PercentileSpec) -> f64 {
    if buf.is_empty() {
        return NEVER;
    }
    let r = spec.rank(buf.len());
    *buf.select_nth_unstable_by(r - 1, f64::total_cmp).1
}

/// A neighbor and its score (ms, lower is better).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub neighbor: NodeId,
    pub value: f64,
}

fn by_score(a: &Score, b: &Score) -> Ordering {
    a.value.total_cmp(&b.value).then(a.neighbor.cmp(&b.neighbor))
}

/// Current-round percentile score of each out-neighbor. A neighbor without
/// records scores [`NEVER`].
pub fn vanilla_scores(
    obs: &ObservationSet,
    out_neighbors: &[NodeId],
    spec: PercentileSpec,
) -> Vec<Score> {
    out_neighbors
        .iter()
        .map(|&u| {
            let mut t = obs.normalized_for(u);
            Score {
                neighbor: u,
                value: select_rank(&mut t, spec),
            }
        })
        .collect()
}

/// The `k` best vanilla scores, ties broken by lower id.
pub fn vanilla_select(
    obs: &ObservationSet,
    out_neighbors: &[NodeId],
    k: usize,
    spec: PercentileSpec,
) -> Vec<NodeId> {
    let mut s = vanilla_scores(obs, out_neighbors, spec);
    s.sort_by(by_score);
    s.into_iter().take(k).map(|s| s.neighbor).collect()
}

/// Normalized delivery columns (one `Vec` per neighbor, one entry per block).
fn columns(obs: &ObservationSet, neighbors: &[NodeId]) -> Vec<Vec<f64>> {
    neighbors.iter().map(|&u| obs.normalized_for(u)).collect()
}

/// Percentile over blocks of the per-block minimum across `cols`.
fn joint_score(cols: &[&[f64]], blocks: usize, spec: PercentileSpec) -> f64 {
    let mut best: Vec<f64> = vec![NEVER; blocks];
    for c in cols {
        for (b, &t) in c.iter().enumerate() {
            if t < best[b] {
                best[b] = t;
            }
        }
    }
    select_rank(&mut best, spec)
}

/// Percentile of the per-block best delivery across `subset`.
pub fn joint_percentile(obs: &ObservationSet, subset: &[NodeId], spec: PercentileSpec) -> f64 {
    let cols = columns(obs, subset);
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    joint_score(&refs, obs.block_count(), spec)
}

/// Greedy group selection. The first pick has the best individual
/// percentile; each later pick minimizes the percentile of
/// `min(own time, best time of the picks so far)` per block. Ties go to the
/// lower individual percentile, then the lower id. Returned in pick order.
pub fn subset_select(
    obs: &ObservationSet,
    out_neighbors: &[NodeId],
    k: usize,
    spec: PercentileSpec,
) -> Result<Vec<NodeId>, ScoringError> {
    if k > out_neighbors.len() {
        return Err(ScoringError::TooMany {
            k,
            available: out_neighbors.len(),
        });
    }
    let blocks = obs.block_count();
    let cols = columns(obs, out_neighbors);
    let raw: Vec<f64> = cols
        .iter()
        .map(|c| select_rank(&mut c.clone(), spec))
        .collect();
    let mut remaining: Vec<usize> = (0..out_neighbors.len()).collect();
    let mut best = vec![NEVER; blocks];
    let mut scratch = vec![0.0; blocks];
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let mut choice: Option<(usize, f64)> = None;
        for (pos, &i) in remaining.iter().enumerate() {
            for (b, s) in scratch.iter_mut().enumerate() {
                *s = cols[i][b].min(best[b]);
            }
            let score = select_rank(&mut scratch, spec);
            let better = match choice {
                None => true,
                Some((cpos, cscore)) => {
                    let c = remaining[cpos];
                    score
                        .total_cmp(&cscore)
                        .then(raw[i].total_cmp(&raw[c]))
                        .then(out_neighbors[i].cmp(&out_neighbors[c]))
                        == Ordering::Less
                }
            };
            if better {
                choice = Some((pos, score));
            }
        }
        let (pos, _) = choice.expect("k <= number of candidates");
        let i = remaining.remove(pos);
        for (b, x) in best.iter_mut().enumerate() {
            *x = x.min(cols[i][b]);
        }
        picked.push(out_neighbors[i]);
    }
    Ok(picked)
}

/// Exact group selection by enumerating every `k`-subset. Ties go to the
/// lexicographically smallest id list. Returned sorted.
pub fn subset_select_exhaustive(
    obs: &ObservationSet,
    out_neighbors: &[NodeId],
    k: usize,
    spec: PercentileSpec,
) -> Result<Vec<NodeId>, ScoringError> {
    let m = out_neighbors.len();
    if m > EXHAUSTIVE_LIMIT {
        return Err(ScoringError::Guard(m));
    }
    if k > m {
        return Err(ScoringError::TooMany { k, available: m });
    }
    let mut ids = out_neighbors.to_vec();
    ids.sort_unstable();
    let cols = columns(obs, &ids);
    let blocks = obs.block_count();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let refs: Vec<&[f64]> = idx.iter().map(|&i| cols[i].as_slice()).collect();
        let score = joint_score(&refs, blocks, spec);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, idx.clone()));
        }
        // Next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                let (_, chosen) = best.expect("at least one subset");
                return Ok(chosen.into_iter().map(|i| ids[i]).collect());
            }
            i -= 1;
            if idx[i] < m - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Accumulated observations for one out-neighbor under UCB scoring.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NeighborHistory {
    /// Finite normalized delivery times since (re)connection, sorted.
    sorted: Vec<f64>,
    pub rounds_connected: u32,
}

impl NeighborHistory {
    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    fn insert(&mut self, t: f64) {
        let pos = self.sorted.partition_point(|&x| x <= t);
        self.sorted.insert(pos, t);
    }
}

/// Confidence bounds around the percentile of a sorted sample:
/// `p ± c * sqrt(ln N / (2N))`. An empty history gives `(-inf, +inf)`.
pub fn ucb_bounds(sorted: &[f64], c: f64, spec: PercentileSpec) -> (f64, f64) {
    let n = sorted.len();
    if n == 0 {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let p = sorted[spec.rank(n) - 1];
    let nf = n as f64;
    let width = c * libm::sqrt(libm::log(nf) / (2.0 * nf));
    (p - width, p + width)
}

/// Per-node UCB bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct UcbState {
    pub c: f64,
    histories: BTreeMap<NodeId, NeighborHistory>,
}

impl UcbState {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            histories: BTreeMap::new(),
        }
    }

    pub fn history(&self, u: NodeId) -> Option<&NeighborHistory> {
        self.histories.get(&u)
    }

    /// Append one round of observations. Histories of peers that are no
    /// longer out-neighbors are dropped; only finite times are kept.
    pub fn record(&mut self, obs: &ObservationSet, out_neighbors: &[NodeId]) {
        self.histories
            .retain(|u, _| out_neighbors.binary_search(u).is_ok());
        for &u in out_neighbors {
            let h = self.histories.entry(u).or_default();
            h.rounds_connected += 1;
            for t in obs.normalized_for(u) {
                if t.is_finite() {
                    h.insert(t);
                }
            }
        }
    }

    pub fn bounds(&self, u: NodeId, spec: PercentileSpec) -> (f64, f64) {
        ucb_bounds(
            self.histories.get(&u).map_or(&[][..], |h| h.samples()),
            self.c,
            spec,
        )
    }

    pub fn forget(&mut self, u: NodeId) {
        self.histories.remove(&u);
    }

    /// Pick at most one neighbor to evict: the largest lower bound, if it
    /// exceeds the smallest upper bound. Ties on the lower bound go to the
    /// longest-connected neighbor, then the lowest id.
    pub fn decide(&self, out_neighbors: &[NodeId], spec: PercentileSpec) -> Option<NodeId> {
        let mut worst: Option<(NodeId, f64, u32)> = None;
        let mut min_ucb = f64::INFINITY;
        for &u in out_neighbors {
            let (lcb, ucb) = self.bounds(u, spec);
            min_ucb = min_ucb.min(ucb);
            let age = self.histories.get(&u).map_or(0, |h| h.rounds_connected);
            let replace = match worst {
                None => true,
                Some((w, wl, wa)) => match lcb.total_cmp(&wl) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => age > wa || (age == wa && u < w),
                },
            };
            if replace {
                worst = Some((u, lcb, age));
            }
        }
        match worst {
            Some((u, lcb, _)) if lcb > min_ucb => Some(u),
            _ => None,
        }
    }
}

/// Record this round and evict at most one neighbor. Returns the evicted
/// neighbor, whose history is discarded.
pub fn ucb_update(
    state: &mut UcbState,
    obs: &ObservationSet,
    out_neighbors: &[NodeId],
    spec: PercentileSpec,
) -> Option<NodeId> {
    state.record(obs, out_neighbors);
    let evicted = state.decide(out_neighbors, spec);
    if let Some(u) = evicted {
        state.forget(u);
    }
    evicted
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScoringMethod {
    Vanilla,
    Ucb { c: f64 },
    Subset,
}

impl ScoringMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ScoringMethod::Vanilla => "vanilla",
            ScoringMethod::Ucb { .. } => "ucb",
            ScoringMethod::Subset => "subset",
        }
    }
}

/// One line of the optional score dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreRecord {
    pub node: NodeId,
    pub neighbor: NodeId,
    pub score: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateReport {
    /// Nodes whose out-edges were rewired this round.
    pub rewired: usize,
    /// UCB evictions per node (0 or 1 each); empty for other methods.
    pub evictions: Vec<u8>,
    pub fallback_fills: usize,
    pub shortfall: usize,
    pub scores: Vec<ScoreRecord>,
}

/// Adaptive neighbor selection for every adopter node.
#[derive(Clone, Debug)]
pub struct Perigee {
    pub method: ScoringMethod,
    pub percentile: PercentileSpec,
    states: Vec<UcbState>,
    pub collect_scores: bool,
}

impl Perigee {
    pub fn new(method: ScoringMethod, percentile: PercentileSpec, n: usize) -> Self {
        let c = match method {
            ScoringMethod::Ucb { c } => c,
            _ => 0.0,
        };
        let states = match method {
            ScoringMethod::Ucb { .. } => vec![UcbState::new(c); n],
            _ => Vec::new(),
        };
        Self {
            method,
            percentile,
            states,
            collect_scores: false,
        }
    }

    pub fn ucb_state(&self, v: NodeId) -> Option<&UcbState> {
        self.states.get(v.index())
    }

    /// Score every adopter from this round's observations, then commit the
    /// rewiring in a seed-derived random node order.
    pub fn update(
        &mut self,
        topology: &mut Topology,
        observations: &[ObservationSet],
        spec: &NetworkSpec,
        seed: u64,
        round: u64,
    ) -> Result<UpdateReport, ScoringError> {
        let n = spec.len();
        let degree = spec.degree();
        let q = self.percentile;
        let mut report = UpdateReport::default();
        if let ScoringMethod::Ucb { .. } = self.method {
            report.evictions = vec![0; n];
        }
        let mut keep: Vec<Option<Vec<NodeId>>> = vec![None; n];
        for v in spec.nodes() {
            if !spec.profile(v).adopter {
                continue;
            }
            let out = topology.out_edges(v);
            let obs = &observations[v.index()];
            if self.collect_scores {
                self.dump_scores(v, obs, out, &mut report.scores);
            }
            keep[v.index()] = match self.method {
                ScoringMethod::Vanilla => {
                    Some(vanilla_select(obs, out, degree.d_retain.min(out.len()), q))
                }
                ScoringMethod::Subset => {
                    Some(subset_select(obs, out, degree.d_retain.min(out.len()), q)?)
                }
                ScoringMethod::Ucb { .. } => {
                    let state = &mut self.states[v.index()];
                    ucb_update(state, obs, out, q).map(|evicted| {
                        report.evictions[v.index()] = 1;
                        out.iter().copied().filter(|&u| u != evicted).collect()
                    })
                }
            };
        }
        let mut order: Vec<NodeId> = spec.nodes().collect();
        SeededRng::derive(seed, &[stream::ORDER, round]).shuffle(&mut order);
        let mut rng = SeededRng::derive(seed, &[stream::REWIRE, round]);
        for v in order {
            if let Some(k) = keep[v.index()].take() {
                let r: RewireReport = topology.rewire(v, &k, degree.d_out, &mut rng)?;
                report.rewired += 1;
                report.fallback_fills += r.fallback_fills;
                report.shortfall += r.shortfall;
            }
        }
        Ok(report)
    }

    fn dump_scores(
        &self,
        v: NodeId,
        obs: &ObservationSet,
        out: &[NodeId],
        sink: &mut Vec<ScoreRecord>,
    ) {
        match self.method {
            ScoringMethod::Ucb { .. } => {
                let state = &self.states[v.index()];
                for &u in out {
                    let score = state
                        .history(u)
                        .filter(|h| !h.samples().is_empty())
                        .map_or(NEVER, |h| h.samples()[self.percentile.rank(h.samples().len()) - 1]);
                    sink.push(ScoreRecord {
                        node: v,
                        neighbor: u,
                        score,
                    });
                }
            }
            _ => {
                for s in vanilla_scores(obs, out, self.percentile) {
                    sink.push(ScoreRecord {
                        node: v,
                        neighbor: s.neighbor,
                        score: s.value,
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_network, DegreeConfig, NodeProfile, RegionId, RoundConfig};

    fn id(i: usize) -> NodeId {
        NodeId::from_index(i)
    }

    const P90: PercentileSpec = PercentileSpec { q: 0.9 };

    /// Observation set whose first arrival is 0 for every block, so absolute
    /// and normalized times coincide.
    fn obs_from_columns(cols: &[&[f64]]) -> ObservationSet {
        let mut obs = ObservationSet::new((0..cols.len()).map(id).collect());
        let blocks = cols[0].len();
        for b in 0..blocks {
            let row: Vec<f64> = cols.iter().map(|c| c[b]).collect();
            obs.push_block(b as u32, &row);
        }
        obs
    }

    #[test]
    fn percentile_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, P90).unwrap(), 9.0);
        assert_eq!(percentile(&[5.0], P90).unwrap(), 5.0);
        assert_eq!(percentile(&[5.0], PercentileSpec { q: 0.01 }).unwrap(), 5.0);
        let w = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, NEVER, NEVER];
        assert_eq!(percentile(&w, P90).unwrap(), NEVER);
        assert_eq!(percentile(&[], P90), Err(ScoringError::Empty));
        assert!(PercentileSpec::new(0.0).is_err());
        assert!(PercentileSpec::new(1.0).is_ok());
    }

    #[test]
    fn vanilla_examples() {
        let a = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 100.0];
        let zero = [0.0; 10];
        let obs = obs_from_columns(&[&zero, &a, &a]);
        let s = vanilla_scores(&obs, &[id(0), id(1), id(2)], P90);
        assert_eq!(s[0].value, 0.0);
        assert_eq!(s[1].value, 4.0);
        assert_eq!(s[1].value, s[2].value);
    }

    #[test]
    fn vanilla_missing_neighbor_scores_never() {
        let obs = obs_from_columns(&[&[1.0, 2.0]]);
        let s = vanilla_scores(&obs, &[id(0), id(7)], P90);
        assert_eq!(s[1].value, NEVER);
    }

    #[test]
    fn vanilla_keeps_best_six_of_eight() {
        // The best score belongs to the highest id.
        let cols: Vec<Vec<f64>> = (1..=8).rev().map(|s| vec![f64::from(s); 5]).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let obs = obs_from_columns(&refs);
        let out: Vec<NodeId> = (0..8).map(id).collect();
        let mut keep = vanilla_select(&obs, &out, 6, P90);
        keep.sort();
        assert_eq!(keep, (2..8).map(id).collect::<Vec<_>>());
    }

    #[test]
    fn subset_hand_trace() {
        let obs = obs_from_columns(&[&[0.0, 0.0, 0.0], &[0.0, 10.0, 10.0], &[10.0, 0.0, 10.0], &[5.0, 5.0, 5.0]]);
        // Neighbor 0 is a placeholder not offered as a candidate.
        let out = [id(1), id(2), id(3)];
        let picks = subset_select(&obs, &out, 2, P90).unwrap();
        assert_eq!(picks, vec![id(3), id(1)]);
        let exact = subset_select_exhaustive(&obs, &out, 2, P90).unwrap();
        assert_eq!(exact, vec![id(1), id(3)]);
        assert_eq!(joint_percentile(&obs, &exact, P90), 5.0);
        assert_eq!(joint_percentile(&obs, &[id(2), id(3)], P90), 5.0);
    }

    #[test]
    fn subset_keep_all_and_dominant() {
        let obs = obs_from_columns(&[&[3.0, 9.0], &[0.0, 0.0], &[7.0, 1.0]]);
        let out = [id(0), id(1), id(2)];
        let mut all = subset_select(&obs, &out, 3, P90).unwrap();
        assert_eq!(all[0], id(1));
        all.sort();
        assert_eq!(all, out.to_vec());
        assert!(subset_select(&obs, &out, 4, P90).is_err());
    }

    #[test]
    fn exhaustive_k1_and_identical() {
        let obs = obs_from_columns(&[&[3.0, 9.0], &[2.0, 4.0], &[7.0, 1.0]]);
        let out = [id(0), id(1), id(2)];
        assert_eq!(
            subset_select_exhaustive(&obs, &out, 1, P90).unwrap(),
            vanilla_select(&obs, &out, 1, P90)
        );
        let same = obs_from_columns(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]);
        assert_eq!(
            subset_select_exhaustive(&same, &out, 2, P90).unwrap(),
            vec![id(0), id(1)]
        );
        let big = ObservationSet::new((0..13).map(id).collect());
        let out13: Vec<NodeId> = (0..13).map(id).collect();
        assert_eq!(
            subset_select_exhaustive(&big, &out13, 2, P90),
            Err(ScoringError::Guard(13))
        );
    }

    #[test]
    fn ucb_bound_formula() {
        // 100 samples whose 90th nearest-rank value is 5.0.
        let mut s: Vec<f64> = vec![1.0; 89];
        s.push(5.0);
        s.extend(vec![9.0; 10]);
        let (lcb, ucb) = ucb_bounds(&s, 1.0, P90);
        assert!((lcb - 4.848_257_287).abs() < 1e-6, "{lcb}");
        assert!((ucb - 5.151_742_713).abs() < 1e-6, "{ucb}");
        assert_eq!(ucb_bounds(&[3.0], 1.0, P90), (3.0, 3.0));
        assert_eq!(ucb_bounds(&s, 0.0, P90), (5.0, 5.0));
        assert_eq!(ucb_bounds(&[], 1.0, P90), (f64::NEG_INFINITY, f64::INFINITY));
    }

    fn ucb_state_with(samples: &[(usize, &[f64], u32)]) -> UcbState {
        let mut st = UcbState::new(1.0);
        for &(u, xs, age) in samples {
            let h = st.histories.entry(id(u)).or_default();
            for &x in xs {
                h.insert(x);
            }
            h.rounds_connected = age;
        }
        st
    }

    #[test]
    fn ucb_evicts_worst_when_separated() {
        // Eight neighbors, tight intervals; neighbor 4 is slow, 3 is fast.
        let many = |x: f64| vec![x; 200];
        let cols: Vec<Vec<f64>> = (0..8)
            .map(|u| match u {
                3 => many(2.0),
                4 => many(9.0),
                _ => many(5.0),
            })
            .collect();
        let st = ucb_state_with(
            &cols
                .iter()
                .enumerate()
                .map(|(u, c)| (u, c.as_slice(), 10))
                .collect::<Vec<_>>(),
        );
        let out: Vec<NodeId> = (0..8).map(id).collect();
        assert_eq!(st.decide(&out, P90), Some(id(4)));
    }

    #[test]
    fn ucb_overlapping_intervals_keep_all() {
        let mut st = ucb_state_with(&[(0, &[5.0, 6.0], 2), (1, &[5.5, 6.0], 2)]);
        st.c = 100.0;
        assert_eq!(st.decide(&[id(0), id(1)], P90), None);
        let fresh = UcbState::new(1.0);
        assert_eq!(fresh.decide(&[id(0), id(1)], P90), None);
    }

    #[test]
    fn ucb_tie_goes_to_longest_connected() {
        let st = ucb_state_with(&[(0, &[9.0], 3), (1, &[9.0], 7), (2, &[1.0], 5)]);
        assert_eq!(st.decide(&[id(0), id(1), id(2)], P90), Some(id(1)));
        let st = ucb_state_with(&[(0, &[9.0], 7), (1, &[9.0], 7), (2, &[1.0], 5)]);
        assert_eq!(st.decide(&[id(0), id(1), id(2)], P90), Some(id(0)));
    }

    #[test]
    fn ucb_update_filters_infinite_and_prunes() {
        let obs = obs_from_columns(&[&[1.0, NEVER], &[2.0, 3.0]]);
        let mut st = UcbState::new(0.0);
        let evicted = ucb_update(&mut st, &obs, &[id(0), id(1)], P90);
        assert_eq!(st.history(id(0)).map(|h| h.samples().len()), Some(1));
        // Neighbor 1 has the larger percentile and gets evicted with c = 0.
        assert_eq!(evicted, Some(id(1)));
        assert!(st.history(id(1)).is_none());
        st.record(&obs, &[id(0)]);
        assert_eq!(st.history(id(0)).unwrap().rounds_connected, 2);
    }

    fn small_spec(n: usize, adopters: usize) -> NetworkSpec {
        let profiles = (0..n)
            .map(|i| {
                let mut p = NodeProfile::new(RegionId(0), 1.0, 10.0);
                p.adopter = i < adopters;
                p
            })
            .collect();
        build_network(profiles, DegreeConfig::default(), RoundConfig::default()).unwrap()
    }

    #[test]
    fn non_adopters_are_untouched() {
        let spec = small_spec(40, 0);
        let mut rng = SeededRng::new(1);
        let mut t = crate::topology::gen_random(&spec, &mut rng).unwrap();
        let before = t.clone();
        let obs = vec![ObservationSet::default(); 40];
        let mut p = Perigee::new(ScoringMethod::Subset, P90, 40);
        let r = p.update(&mut t, &obs, &spec, 1, 0).unwrap();
        assert_eq!(t, before);
        assert_eq!(r.rewired, 0);
    }
}
