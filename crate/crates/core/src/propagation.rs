//! Block flooding over a frozen topology, and the per-node observation sets
//! that neighbor scoring consumes.
//!
//! A node that first receives a block at time `t` validates it for its
//! `validation_delay` and then relays it to every neighbor; the miner relays
//! immediately. Arrival times are therefore a node-weighted shortest-path
//! solution, computed here by an event queue.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::latency::LatencyModel;
use crate::model::{NetworkSpec, NodeId, NodeProfile};
use crate::rng::{stream, SeededRng};
use crate::topology::Adjacency;

/// Sentinel for "never delivered".
pub const NEVER: f64 = f64::INFINITY;

#[derive(Clone, Debug, PartialEq)]
pub struct BlockTrace {
    pub block_id: u32,
    pub source: NodeId,
    /// First reception time per node (ms); [`NEVER`] if unreachable.
    pub arrival: Vec<f64>,
    /// Time each node starts relaying (arrival plus validation; 0 at source).
    pub relay_ready: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    node: NodeId,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on time, ties by node id.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Flood one block from `source` and record arrival and relay times.
pub fn propagate_block<L: LatencyModel + ?Sized>(
    adj: &Adjacency,
    latency: &L,
    profiles: &[NodeProfile],
    source: NodeId,
    block_id: u32,
) -> BlockTrace {
    let n = adj.len();
    let mut arrival = vec![NEVER; n];
    let mut relay_ready = vec![NEVER; n];
    let mut done = vec![false; n];
    let mut queue = BinaryHeap::with_capacity(n);
    arrival[source.index()] = 0.0;
    queue.push(Event {
        time: 0.0,
        node: source,
    });
    while let Some(Event { time, node }) = queue.pop() {
        let i = node.index();
        if done[i] || time > arrival[i] {
            continue;
        }
        done[i] = true;
        let ready = if node == source {
            0.0
        } else {
            time + profiles[i].validation_delay
        };
        relay_ready[i] = ready;
        for &w in adj.neighbors(node) {
            let j = w.index();
            if done[j] {
                continue;
            }
            let t = ready + latency.delay(node, w);
            if t < arrival[j] {
                arrival[j] = t;
                queue.push(Event { time: t, node: w });
            }
        }
    }
    BlockTrace {
        block_id,
        source,
        arrival,
        relay_ready,
    }
}

/// Time at which each neighbor `u` of `v` would deliver the block, whether
/// or not it was first: `relay_ready(u) + delay(u, v)`.
pub fn neighbor_delivery_times<L: LatencyModel + ?Sized>(
    trace: &BlockTrace,
    v: NodeId,
    adj: &Adjacency,
    latency: &L,
) -> Vec<(NodeId, f64)> {
    adj.neighbors(v)
        .iter()
        .map(|&u| (u, delivery_time(trace, u, v, latency)))
        .collect()
}

#[inline]
fn delivery_time<L: LatencyModel + ?Sized>(
    trace: &BlockTrace,
    u: NodeId,
    v: NodeId,
    latency: &L,
) -> f64 {
    let ready = trace.relay_ready[u.index()];
    if ready.is_finite() {
        ready + latency.delay(u, v)
    } else {
        NEVER
    }
}

/// Per-node record of one round: for every observed block and every
/// neighbor, the absolute delivery time. Blocks the node mined itself are
/// not observed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservationSet {
    /// Neighbors (out, in and fixed), sorted.
    pub neighbors: Vec<NodeId>,
    /// Block ids, in mining order.
    pub blocks: Vec<u32>,
    /// Earliest delivery per observed block.
    pub first_arrival: Vec<f64>,
    /// Row-major `blocks x neighbors` absolute delivery times.
    times: Vec<f64>,
}

impl ObservationSet {
    pub fn new(neighbors: Vec<NodeId>) -> Self {
        Self {
            neighbors,
            ..Self::default()
        }
    }

    /// Append one block's delivery times, given in `neighbors` order.
    pub fn push_block(&mut self, block_id: u32, times: &[f64]) {
        assert_eq!(times.len(), self.neighbors.len());
        let first = times.iter().copied().fold(NEVER, f64::min);
        self.blocks.push(block_id);
        self.first_arrival.push(first);
        self.times.extend_from_slice(times);
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn neighbor_slot(&self, u: NodeId) -> Option<usize> {
        self.neighbors.binary_search(&u).ok()
    }

    /// Absolute delivery time of block row `b` from neighbor slot `k`.
    pub fn absolute(&self, b: usize, k: usize) -> f64 {
        self.times[b * self.neighbors.len() + k]
    }

    /// `t - t_first`, or [`NEVER`] when either is infinite.
    pub fn normalized(&self, b: usize, k: usize) -> f64 {
        let t = self.absolute(b, k);
        let first = self.first_arrival[b];
        if t.is_finite() && first.is_finite() {
            t - first
        } else {
            NEVER
        }
    }

    /// Normalized times of neighbor `u` over all blocks (empty if `u` is not
    /// a neighbor).
    pub fn normalized_for(&self, u: NodeId) -> Vec<f64> {
        match self.neighbor_slot(u) {
            Some(k) => (0..self.block_count()).map(|b| self.normalized(b, k)).collect(),
            None => Vec::new(),
        }
    }

    /// Every record as `(block_id, neighbor, absolute_time)`.
    pub fn records(&self) -> impl Iterator<Item = (u32, NodeId, f64)> + '_ {
        self.blocks.iter().enumerate().flat_map(move |(b, &id)| {
            self.neighbors
                .iter()
                .enumerate()
                .map(move |(k, &u)| (id, u, self.absolute(b, k)))
        })
    }
}

/// Everything produced by one round of mining.
#[derive(Clone, Debug)]
pub struct RoundOutcome {
    pub traces: Vec<BlockTrace>,
    pub observations: Vec<ObservationSet>,
}

/// Sample `k` block sources i.i.d. proportional to hash power.
pub fn sample_sources(hash: &[f64], k: usize, rng: &mut SeededRng) -> Vec<NodeId> {
    let mut cumulative = Vec::with_capacity(hash.len());
    let mut acc = 0.0;
    for &f in hash {
        acc += f;
        cumulative.push(acc);
    }
    (0..k)
        .map(|_| {
            let x = rng.unit() * acc;
            let i = cumulative.partition_point(|&c| c <= x);
            // Skip zero-mass nodes that share a cumulative value.
            let mut i = i.min(hash.len() - 1);
            while hash[i] == 0.0 && i + 1 < hash.len() {
                i += 1;
            }
            NodeId::from_index(i)
        })
        .collect()
}

/// Mine `blocks_per_round` blocks, flood each one, and assemble per-node
/// observation sets. Block ids start at `first_block_id`.
pub fn run_round<L: LatencyModel + ?Sized>(
    adj: &Adjacency,
    spec: &NetworkSpec,
    latency: &L,
    seed: u64,
    round: u64,
    first_block_id: u32,
) -> RoundOutcome {
    let mut rng = SeededRng::derive(seed, &[stream::ROUND, round]);
    let k = spec.rounds().blocks_per_round;
    let sources = sample_sources(&spec.hash_powers(), k, &mut rng);
    let profiles = spec.profiles();
    let traces: Vec<BlockTrace> = sources
        .iter()
        .enumerate()
        .map(|(i, &s)| propagate_block(adj, latency, profiles, s, first_block_id + i as u32))
        .collect();
    let observations = observe(adj, latency, &traces);
    RoundOutcome {
        traces,
        observations,
    }
}

/// Build every node's observation set from a round's traces.
pub fn observe<L: LatencyModel + ?Sized>(
    adj: &Adjacency,
    latency: &L,
    traces: &[BlockTrace],
) -> Vec<ObservationSet> {
    let n = adj.len();
    let mut scratch = Vec::new();
    (0..n)
        .map(|v| {
            let v = NodeId::from_index(v);
            let neighbors = adj.neighbors(v);
            let mut obs = ObservationSet::new(neighbors.to_vec());
            for trace in traces.iter().filter(|t| t.source != v) {
                scratch.clear();
                scratch.extend(neighbors.iter().map(|&u| delivery_time(trace, u, v, latency)));
                obs.push_block(trace.block_id, &scratch);
            }
            obs
        })
        .collect()
}
