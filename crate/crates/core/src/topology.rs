//! The directed overlay: out-edge lists with in-degree accounting, the
//! baseline generators, and the per-node rewiring step used by adaptive
//! rounds.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::latency::HypercubeModel;
use crate::model::{NetworkSpec, NodeId};
use crate::rng::SeededRng;

/// Random draws attempted before falling back to an explicit scan.
pub const MAX_RETRIES: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("need more than d_out = {d_out} nodes, got {n}")]
    TooFewNodes { n: usize, d_out: usize },
    #[error("in-degree caps are infeasible: d_out = {d_out} > d_in_max = {d_in_max}")]
    InfeasibleCaps { d_out: usize, d_in_max: usize },
    #[error("could not place out-edge {slot} of node {node}: every candidate is full")]
    Stuck { node: NodeId, slot: usize },
    #[error("geometric threshold must be positive, got {0}")]
    Threshold(f64),
    #[error("node {0} out of range")]
    OutOfRange(NodeId),
    #[error("keep set of node {node} contains {other}, which is not a current out-neighbor")]
    NotANeighbor { node: NodeId, other: NodeId },
    #[error("keep set of node {node} repeats {other}")]
    DuplicateKeep { node: NodeId, other: NodeId },
    #[error("audit failed: {0}")]
    Audit(AuditFailure),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AuditFailure {
    #[error("self-loop at {0}")]
    SelfLoop(NodeId),
    #[error("duplicate out-edge {0} -> {1}")]
    Duplicate(NodeId, NodeId),
    #[error("in-degree counter of {node} is {counted}, recomputed {actual}")]
    Counter {
        node: NodeId,
        counted: u32,
        actual: u32,
    },
    #[error("in-degree of {node} is {actual}, above cap {cap}")]
    Cap { node: NodeId, actual: u32, cap: usize },
    #[error("out-degree of {node} is {actual}, expected {expected}")]
    OutDegree {
        node: NodeId,
        actual: usize,
        expected: usize,
    },
}

/// Directed out-edges plus static undirected links that are never rewired
/// and never counted against degree caps (e.g. a relay backbone).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    out: Vec<Vec<NodeId>>,
    in_degree: Vec<u32>,
    cap: Option<usize>,
    fixed: Vec<Vec<NodeId>>,
}

/// Outcome of a single [`Topology::rewire`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RewireReport {
    pub dropped: Vec<NodeId>,
    pub added: Vec<NodeId>,
    /// Slots filled only after the random draws ran out.
    pub fallback_fills: usize,
    /// Slots left empty because no candidate had a free in-slot.
    pub shortfall: usize,
}

impl Topology {
    /// Empty topology on `n` nodes. `cap` enables in-degree enforcement.
    pub fn empty(n: usize, cap: Option<usize>) -> Self {
        Self {
            out: vec![Vec::new(); n],
            in_degree: vec![0; n],
            cap,
            fixed: vec![Vec::new(); n],
        }
    }

    /// Build from explicit out-edge lists. Caps are checked via [`Topology::audit`].
    pub fn from_out_edges(out: Vec<Vec<NodeId>>, cap: Option<usize>) -> Self {
        let n = out.len();
        let mut t = Self::empty(n, cap);
        for (v, list) in out.into_iter().enumerate() {
            for u in list {
                t.in_degree[u.index()] += 1;
                t.out[v].push(u);
            }
            t.out[v].sort_unstable();
        }
        t
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    pub fn cap(&self) -> Option<usize> {
        self.cap
    }

    /// Sorted out-neighbors of `v`.
    pub fn out_edges(&self, v: NodeId) -> &[NodeId] {
        &self.out[v.index()]
    }

    pub fn in_degree(&self, v: NodeId) -> u32 {
        self.in_degree[v.index()]
    }

    pub fn fixed_links(&self, v: NodeId) -> &[NodeId] {
        &self.fixed[v.index()]
    }

    pub fn edge_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    /// All directed out-edges in `(src, dst)` order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(v, l)| l.iter().map(move |&u| (NodeId::from_index(v), u)))
    }

    /// Add a static undirected link; duplicates are ignored.
    pub fn add_fixed_link(&mut self, a: NodeId, b: NodeId) {
        if a == b {
            return;
        }
        for (x, y) in [(a, b), (b, a)] {
            let list = &mut self.fixed[x.index()];
            if let Err(pos) = list.binary_search(&y) {
                list.insert(pos, y);
            }
        }
    }

    fn has_slack(&self, w: NodeId) -> bool {
        match self.cap {
            Some(cap) => (self.in_degree[w.index()] as usize) < cap,
            None => true,
        }
    }

    fn connect(&mut self, v: NodeId, u: NodeId) {
        let list = &mut self.out[v.index()];
        let pos = list.binary_search(&u).unwrap_err();
        list.insert(pos, u);
        self.in_degree[u.index()] += 1;
    }

    /// Draw a node uniformly from `pool` (or all nodes) that is not `v`, not
    /// already an out-neighbor of `v`, and has a free in-slot. Random draws
    /// first, then a uniform pick among the eligible; the flag reports
    /// whether the fallback was needed.
    fn draw_candidate(
        &self,
        v: NodeId,
        pool: Option<&[NodeId]>,
        rng: &mut SeededRng,
    ) -> (Option<NodeId>, bool) {
        let ok = |w: NodeId| {
            w != v
                && self.out[v.index()].binary_search(&w).is_err()
                && self.has_slack(w)
        };
        let size = pool.map_or(self.len(), <[NodeId]>::len);
        if size == 0 {
            return (None, false);
        }
        let pick = |i: usize| pool.map_or(NodeId::from_index(i), |p| p[i]);
        for _ in 0..MAX_RETRIES {
            let w = pick(rng.index(size));
            if ok(w) {
                return (Some(w), false);
            }
        }
        let eligible: Vec<NodeId> = (0..size).map(pick).filter(|&w| ok(w)).collect();
        if eligible.is_empty() {
            (None, true)
        } else {
            (Some(eligible[rng.index(eligible.len())]), true)
        }
    }

    /// Replace `v`'s out-edges by `keep` plus fresh random peers until it
    /// has `d_out` out-edges. Dropped peers release their in-slot before
    /// fresh peers are drawn.
    pub fn rewire(
        &mut self,
        v: NodeId,
        keep: &[NodeId],
        d_out: usize,
        rng: &mut SeededRng,
    ) -> Result<RewireReport, TopologyError> {
        if v.index() >= self.len() {
            return Err(TopologyError::OutOfRange(v));
        }
        for (i, &k) in keep.iter().enumerate() {
            if self.out[v.index()].binary_search(&k).is_err() {
                return Err(TopologyError::NotANeighbor { node: v, other: k });
            }
            if keep[..i].contains(&k) {
                return Err(TopologyError::DuplicateKeep { node: v, other: k });
            }
        }
        let old = core::mem::take(&mut self.out[v.index()]);
        let mut report = RewireReport::default();
        for &u in &old {
            if !keep.contains(&u) {
                self.in_degree[u.index()] -= 1;
                report.dropped.push(u);
            }
        }
        let mut kept = keep.to_vec();
        kept.sort_unstable();
        self.out[v.index()] = kept;
        while self.out[v.index()].len() < d_out {
            let (w, fell_back) = self.draw_candidate(v, None, rng);
            match w {
                Some(w) => {
                    self.connect(v, w);
                    report.added.push(w);
                    report.fallback_fills += fell_back as usize;
                }
                None => {
                    report.shortfall = d_out - self.out[v.index()].len();
                    break;
                }
            }
        }
        Ok(report)
    }

    /// Recompute in-degrees from scratch and check every structural invariant.
    /// `expected_out` checks that every node has exactly that many out-edges.
    pub fn audit(&self, expected_out: Option<usize>) -> Result<(), TopologyError> {
        let mut actual = vec![0u32; self.len()];
        for (v, list) in self.out.iter().enumerate() {
            let vid = NodeId::from_index(v);
            for (i, &u) in list.iter().enumerate() {
                if u == vid {
                    return Err(TopologyError::Audit(AuditFailure::SelfLoop(vid)));
                }
                if i > 0 && list[i - 1] >= u {
                    return Err(TopologyError::Audit(AuditFailure::Duplicate(vid, u)));
                }
                actual[u.index()] += 1;
            }
            if let Some(expected) = expected_out {
                if list.len() != expected {
                    return Err(TopologyError::Audit(AuditFailure::OutDegree {
                        node: vid,
                        actual: list.len(),
                        expected,
                    }));
                }
            }
        }
        for (i, (&counted, &actual)) in self.in_degree.iter().zip(&actual).enumerate() {
            let node = NodeId::from_index(i);
            if counted != actual {
                return Err(TopologyError::Audit(AuditFailure::Counter {
                    node,
                    counted,
                    actual,
                }));
            }
            if let Some(cap) = self.cap {
                if actual as usize > cap {
                    return Err(TopologyError::Audit(AuditFailure::Cap { node, actual, cap }));
                }
            }
        }
        Ok(())
    }

    /// Nodes with no neighbors of any kind.
    pub fn isolated_nodes(&self) -> usize {
        let adj = self.adjacency();
        (0..self.len())
            .filter(|&v| adj.neighbors(NodeId::from_index(v)).is_empty())
            .count()
    }

    /// Undirected neighbor lists (out ∪ in ∪ fixed), one entry per peer.
    pub fn adjacency(&self) -> Adjacency {
        let n = self.len();
        let mut lists: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for (v, list) in self.out.iter().enumerate() {
            for &u in list {
                lists[v].push(u);
                lists[u.index()].push(NodeId::from_index(v));
            }
        }
        for (v, list) in self.fixed.iter().enumerate() {
            lists[v].extend_from_slice(list);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            targets.extend_from_slice(&l);
            offsets.push(targets.len());
        }
        Adjacency { offsets, targets }
    }
}

/// Frozen undirected neighbor lists in CSR form. Every TCP connection
/// carries blocks both ways, so this is what flooding traverses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl Adjacency {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sorted neighbors of `v`.
    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.offsets[v.index()]..self.offsets[v.index() + 1]]
    }
}

fn check_degree_feasible(spec: &NetworkSpec) -> Result<(), TopologyError> {
    let d = spec.degree();
    if spec.len() <= d.d_out {
        return Err(TopologyError::TooFewNodes {
            n: spec.len(),
            d_out: d.d_out,
        });
    }
    if d.d_out > d.d_in_max {
        return Err(TopologyError::InfeasibleCaps {
            d_out: d.d_out,
            d_in_max: d.d_in_max,
        });
    }
    Ok(())
}

/// Every node draws `d_out` distinct uniform out-neighbors with free in-slots.
pub fn gen_random(spec: &NetworkSpec, rng: &mut SeededRng) -> Result<Topology, TopologyError> {
    check_degree_feasible(spec)?;
    let d = spec.degree();
    let mut t = Topology::empty(spec.len(), Some(d.d_in_max));
    for v in spec.nodes() {
        for slot in 0..d.d_out {
            match t.draw_candidate(v, None, rng).0 {
                Some(w) => t.connect(v, w),
                None => return Err(TopologyError::Stuck { node: v, slot }),
            }
        }
    }
    Ok(t)
}

/// Number of in-region out-edges requested for `fraction` of `d_out`.
pub fn in_cluster_count(fraction: f64, d_out: usize) -> usize {
    let raw = fraction.clamp(0.0, 1.0) * d_out as f64;
    (libm::ceil(raw - 1e-9) as usize).min(d_out)
}

/// `ceil(fraction * d_out)` out-edges inside the node's own region (or all
/// other region members when the region is smaller), the rest to other
/// regions. `fraction == 0` is exactly [`gen_random`].
pub fn gen_geographic(
    spec: &NetworkSpec,
    rng: &mut SeededRng,
    in_cluster_fraction: f64,
) -> Result<Topology, TopologyError> {
    let want_in = in_cluster_count(in_cluster_fraction, spec.degree().d_out);
    if want_in == 0 {
        return gen_random(spec, rng);
    }
    check_degree_feasible(spec)?;
    let d = spec.degree();
    let regions = spec.profiles().iter().map(|p| p.region.index()).max().unwrap_or(0) + 1;
    let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); regions];
    for v in spec.nodes() {
        members[spec.profile(v).region.index()].push(v);
    }
    let others: Vec<Vec<NodeId>> = (0..regions)
        .map(|r| {
            spec.nodes()
                .filter(|v| spec.profile(*v).region.index() != r)
                .collect()
        })
        .collect();

    let mut t = Topology::empty(spec.len(), Some(d.d_in_max));
    for v in spec.nodes() {
        let r = spec.profile(v).region.index();
        let in_target = want_in.min(members[r].len() - 1);
        for _ in 0..in_target {
            match t.draw_candidate(v, Some(&members[r]), rng).0 {
                Some(w) => t.connect(v, w),
                None => break,
            }
        }
        while t.out[v.index()].len() < d.d_out {
            let slot = t.out[v.index()].len();
            let w = t
                .draw_candidate(v, Some(&others[r]), rng)
                .0
                .or_else(|| t.draw_candidate(v, None, rng).0);
            match w {
                Some(w) => t.connect(v, w),
                None => return Err(TopologyError::Stuck { node: v, slot }),
            }
        }
    }
    Ok(t)
}

/// Undirected threshold graph: `u ~ v` iff `|X_u - X_v| <= r`. Degree caps do
/// not apply; the result is for stretch analysis only.
pub fn gen_geometric(model: &HypercubeModel, r: f64) -> Result<Topology, TopologyError> {
    if !(r > 0.0) {
        return Err(TopologyError::Threshold(r));
    }
    let n = model.len();
    let mut out: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (NodeId::from_index(i), NodeId::from_index(j));
            if model.distance(a, b) <= r {
                out[i].push(b);
                out[j].push(a);
            }
        }
    }
    Ok(Topology::from_out_edges(out, None))
}

/// Erdős–Rényi `G(n, p)` on `n` nodes, realized as out-edges both ways.
/// Used as the latency-oblivious counterpart to [`gen_geometric`].
pub fn gen_erdos_renyi(n: usize, p: f64, rng: &mut SeededRng) -> Topology {
    let mut out: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.unit() < p {
                out[i].push(NodeId::from_index(j));
                out[j].push(NodeId::from_index(i));
            }
        }
    }
    Topology::from_out_edges(out, None)
}

/// 160-bit identifier, most significant word first.
type KadId = [u64; 3];

fn kad_id(rng: &mut SeededRng) -> KadId {
    [rng.next_u64(), rng.next_u64(), rng.next_u64() & 0xffff_ffff_0000_0000]
}

/// Length of the common prefix of two identifiers (160 when equal).
fn shared_prefix(a: &KadId, b: &KadId) -> usize {
    let mut bits = 0;
    for (x, y) in a.iter().zip(b) {
        let z = x ^ y;
        if z != 0 {
            return (bits + z.leading_zeros() as usize).min(160);
        }
        bits += 64;
    }
    160
}

/// Bucket-sampled Kademlia overlay: random 160-bit IDs, then one uniform
/// member per nonempty XOR bucket, farthest bucket (shortest shared prefix)
/// first, cycling until the node has `d_out` out-edges. With fewer slots than
/// buckets the nearest buckets, which hold only a handful of nodes, go empty.
pub fn gen_kademlia(spec: &NetworkSpec, rng: &mut SeededRng) -> Result<Topology, TopologyError> {
    let n = spec.len();
    if n < 2 {
        return Err(TopologyError::TooFewNodes { n, d_out: 1 });
    }
    let d = spec.degree();
    let ids: Vec<KadId> = (0..n).map(|_| kad_id(rng)).collect();
    let mut t = Topology::empty(n, Some(d.d_in_max));
    let target = d.d_out.min(n - 1);
    let mut buckets: Vec<Vec<NodeId>> = vec![Vec::new(); 161];
    for v in spec.nodes() {
        for b in buckets.iter_mut() {
            b.clear();
        }
        for u in spec.nodes() {
            if u != v {
                buckets[shared_prefix(&ids[v.index()], &ids[u.index()])].push(u);
            }
        }
        'fill: loop {
            let mut progressed = false;
            for bucket in buckets.iter().filter(|b| !b.is_empty()) {
                if t.out[v.index()].len() >= target {
                    break 'fill;
                }
                if let Some(w) = t.draw_candidate(v, Some(bucket), rng).0 {
                    t.connect(v, w);
                    progressed = true;
                }
            }
            if !progressed || t.out[v.index()].len() >= target {
                break;
            }
        }
    }
    Ok(t)
}

/// Complete digraph without self-loops; caps are not enforced.
pub fn gen_full(n: usize) -> Result<Topology, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewNodes { n, d_out: n.saturating_sub(1) });
    }
    let out = (0..n)
        .map(|v| {
            (0..n)
                .filter(|&u| u != v)
                .map(NodeId::from_index)
                .collect()
        })
        .collect();
    Ok(Topology::from_out_edges(out, None))
}
