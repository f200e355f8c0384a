//! Randomized invariants of the simulation core.

use perigee_core::latency::LinkLatencies;
use perigee_core::model::{build_network, DegreeConfig, NetworkSpec, NodeId, NodeProfile, RegionId, RoundConfig};
use perigee_core::propagation::{propagate_block, run_round, ObservationSet, NEVER};
use perigee_core::rng::SeededRng;
use perigee_core::scoring::{
    joint_percentile, percentile, subset_select, subset_select_exhaustive, vanilla_scores,
    PercentileSpec, Perigee, ScoringMethod,
};
use perigee_core::topology::{gen_erdos_renyi, gen_random, Topology};
use proptest::prelude::*;

fn id(i: usize) -> NodeId {
    NodeId::from_index(i)
}

const P90: PercentileSpec = PercentileSpec { q: 0.9 };

fn random_latencies(n: usize, rng: &mut SeededRng) -> LinkLatencies {
    let mut lat = LinkLatencies::zeros(n);
    for u in 0..n {
        for v in (u + 1)..n {
            lat.set(id(u), id(v), rng.uniform(1.0, 100.0));
        }
    }
    lat
}

fn uniform_spec(n: usize, degree: DegreeConfig, rng: &mut SeededRng) -> NetworkSpec {
    let profiles = (0..n)
        .map(|_| NodeProfile::new(RegionId(0), 1.0, rng.uniform(0.0, 50.0)))
        .collect();
    build_network(profiles, degree, RoundConfig::default()).unwrap()
}

fn observations(cols: &[Vec<f64>]) -> ObservationSet {
    let mut obs = ObservationSet::new((0..cols.len()).map(id).collect());
    for b in 0..cols[0].len() {
        let row: Vec<f64> = cols.iter().map(|c| c[b]).collect();
        obs.push_block(b as u32, &row);
    }
    obs
}

fn finite_or_never() -> impl Strategy<Value = f64> {
    prop_oneof![
        9 => (0u32..500).prop_map(f64::from),
        1 => Just(NEVER),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn percentile_matches_sorting(
        values in prop::collection::vec(finite_or_never(), 1..60),
        q in 0.01f64..=1.0,
    ) {
        let spec = PercentileSpec::new(q).unwrap();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = ((q * values.len() as f64) - 1e-9).ceil().clamp(1.0, values.len() as f64) as usize;
        prop_assert_eq!(percentile(&values, spec).unwrap(), sorted[rank - 1]);
    }

    #[test]
    fn vanilla_scores_ignore_common_shift(
        base in prop::collection::vec(prop::collection::vec(0u32..300, 10), 4),
        shifts in prop::collection::vec(0u32..1000, 10),
    ) {
        // Delaying every neighbor equally within a block leaves scores intact.
        let cols: Vec<Vec<f64>> = base.iter().map(|c| c.iter().map(|&x| f64::from(x)).collect()).collect();
        let shifted: Vec<Vec<f64>> = cols
            .iter()
            .map(|c| c.iter().zip(&shifts).map(|(x, &s)| x + f64::from(s)).collect())
            .collect();
        let out: Vec<NodeId> = (0..4).map(id).collect();
        prop_assert_eq!(
            vanilla_scores(&observations(&cols), &out, P90),
            vanilla_scores(&observations(&shifted), &out, P90)
        );
    }

    #[test]
    fn greedy_never_beats_exhaustive(
        cols in prop::collection::vec(prop::collection::vec(finite_or_never(), 12), 6),
        k in 1usize..=6,
    ) {
        let obs = observations(&cols);
        let out: Vec<NodeId> = (0..6).map(id).collect();
        let greedy = subset_select(&obs, &out, k, P90).unwrap();
        let exact = subset_select_exhaustive(&obs, &out, k, P90).unwrap();
        prop_assert_eq!(greedy.len(), k);
        prop_assert!(joint_percentile(&obs, &greedy, P90) >= joint_percentile(&obs, &exact, P90));
        if k == 1 {
            prop_assert_eq!(greedy, exact);
        }
    }
}

/// Straightforward O(n^2) label-setting search, independent of the heap code.
fn reference_arrivals(
    n: usize,
    edges: &[(usize, usize)],
    lat: &LinkLatencies,
    delay: &[f64],
    source: usize,
) -> Vec<f64> {
    use perigee_core::latency::LatencyModel;
    let mut nbrs = vec![Vec::new(); n];
    for &(a, b) in edges {
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    let mut dist = vec![NEVER; n];
    let mut done = vec![false; n];
    dist[source] = 0.0;
    loop {
        let next = (0..n)
            .filter(|&i| !done[i] && dist[i] < NEVER)
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]));
        let Some(u) = next else { break };
        done[u] = true;
        let ready = if u == source { 0.0 } else { dist[u] + delay[u] };
        for &w in &nbrs[u] {
            let t = ready + lat.delay(id(u), id(w));
            if t < dist[w] {
                dist[w] = t;
            }
        }
    }
    dist
}

#[test]
fn flooding_matches_reference_search() {
    let mut rng = SeededRng::new(99);
    for _ in 0..200 {
        let n = 2 + rng.index(49);
        let p = rng.uniform(0.02, 0.4);
        let t = gen_erdos_renyi(n, p, &mut rng);
        let lat = random_latencies(n, &mut rng);
        let delay: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 50.0)).collect();
        let profiles: Vec<NodeProfile> = delay
            .iter()
            .map(|&d| NodeProfile::new(RegionId(0), 1.0, d))
            .collect();
        let edges: Vec<(usize, usize)> = t.edges().map(|(a, b)| (a.index(), b.index())).collect();
        let s = rng.index(n);
        let trace = propagate_block(&t.adjacency(), &lat, &profiles, id(s), 0);
        assert_eq!(trace.arrival, reference_arrivals(n, &edges, &lat, &delay, s));
    }
}

#[test]
fn adding_links_never_delays_arrival() {
    let mut rng = SeededRng::new(5);
    for _ in 0..50 {
        let n = 30;
        let mut t = gen_erdos_renyi(n, 0.08, &mut rng);
        let lat = random_latencies(n, &mut rng);
        let profiles: Vec<NodeProfile> = (0..n)
            .map(|_| NodeProfile::new(RegionId(0), 1.0, rng.uniform(0.0, 30.0)))
            .collect();
        let before = propagate_block(&t.adjacency(), &lat, &profiles, id(0), 0);
        let (a, b) = (rng.index(n), rng.index(n));
        if a != b {
            t.add_fixed_link(id(a), id(b));
        }
        let after = propagate_block(&t.adjacency(), &lat, &profiles, id(0), 0);
        for (x, y) in after.arrival.iter().zip(&before.arrival) {
            assert!(x <= y);
        }
    }
}

#[test]
fn degrees_hold_across_rounds_for_every_method() {
    let degree = DegreeConfig::default();
    for method in [
        ScoringMethod::Vanilla,
        ScoringMethod::Ucb { c: 1.0 },
        ScoringMethod::Subset,
    ] {
        let mut rng = SeededRng::new(3);
        let spec = uniform_spec(150, degree, &mut rng)
            .with_rounds(RoundConfig {
                blocks_per_round: 20,
                num_rounds: 6,
                percentile: 0.9,
            })
            .unwrap();
        let lat = random_latencies(150, &mut rng);
        let mut t = gen_random(&spec, &mut rng).unwrap();
        let mut perigee = Perigee::new(method, P90, spec.len());
        for round in 0..6 {
            let outcome = run_round(&t.adjacency(), &spec, &lat, 7, round, 0);
            let report = perigee
                .update(&mut t, &outcome.observations, &spec, 7, round)
                .unwrap();
            t.audit(Some(degree.d_out)).unwrap();
            assert!((0..spec.len()).all(|v| t.in_degree(id(v)) as usize <= degree.d_in_max));
            assert!(report.evictions.iter().all(|&e| e <= 1));
        }
    }
}

#[test]
fn random_rewires_preserve_invariants() {
    let mut rng = SeededRng::new(11);
    let spec = uniform_spec(60, DegreeConfig::default(), &mut rng);
    let mut t: Topology = gen_random(&spec, &mut rng).unwrap();
    for _ in 0..2000 {
        let v = id(rng.index(60));
        let out = t.out_edges(v).to_vec();
        let keep_n = rng.index(out.len() + 1);
        let keep: Vec<NodeId> = rng.sample_indices(out.len(), keep_n).into_iter().map(|i| out[i]).collect();
        let r = t.rewire(v, &keep, 8, &mut rng).unwrap();
        assert_eq!(r.shortfall, 0);
        t.audit(Some(8)).unwrap();
    }
}
