//! Experiment orchestration: build each seed's network, run every algorithm
//! on it, evaluate coverage delays, and write the artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{debug, info, warn};
use perigee_core::latency::{LinkLatencies, RegionMatrixModel};
use perigee_core::metrics::{edge_latency_histogram, lambda_pair, uniform_bins, Histogram};
use perigee_core::model::{
    assign_adopters, assign_hash_power, build_network, NetworkSpec, NodeId, NodeProfile, RegionId,
};
use perigee_core::propagation::run_round;
use perigee_core::rng::{stream, SeededRng};
use perigee_core::scoring::{PercentileSpec, Perigee};
use perigee_core::topology::{gen_full, gen_geographic, gen_kademlia, gen_random, Topology};
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::files;
use crate::scenario::{Algorithm, HashSetting, ProfileSource, Scenario};

pub const LAMBDA_HEADER: &str = "# perigee-lambda v1";
pub const LAMBDA_COLUMNS: &str = "run_id,round,node_rank,node_id,lambda50_ms,lambda90_ms,adopter";
pub const HIST_HEADER: &str = "# perigee-hist v1";
pub const HIST_COLUMNS: &str = "bin_lo,bin_hi,count,intra_region_count";
pub const MANIFEST_HEADER: &str = "# perigee-manifest v1";

/// One seed's realized network, shared by every algorithm run on that seed.
#[derive(Clone, Debug)]
pub struct World {
    pub seed: u64,
    pub spec: NetworkSpec,
    pub latency: LinkLatencies,
    /// Static undirected links present in every topology (relay tree).
    pub fixed_links: Vec<(NodeId, NodeId)>,
    /// High-power miners under concentrated hash power.
    pub top_group: Vec<NodeId>,
}

impl World {
    pub fn regions(&self) -> Vec<RegionId> {
        self.spec.profiles().iter().map(|p| p.region).collect()
    }

    pub fn relay_members(&self) -> Vec<NodeId> {
        let mut m: Vec<NodeId> = self.fixed_links.iter().flat_map(|&(a, b)| [a, b]).collect();
        m.sort_unstable();
        m.dedup();
        m
    }
}

/// Profiles the scenario starts from, before per-seed adjustments.
pub fn base_profiles(scenario: &Scenario) -> Result<Vec<NodeProfile>> {
    match &scenario.profiles {
        ProfileSource::Bundled => files::parse_profiles(files::BUNDLED_PROFILES, &scenario.matrix),
        ProfileSource::File(p) => files::read_profiles(p, &scenario.matrix),
    }
}

/// Realize the network of one repetition.
pub fn build_world(scenario: &Scenario, base: &[NodeProfile], seed: u64) -> Result<World> {
    let n = base.len();
    let mut profiles = base.to_vec();
    for p in &mut profiles {
        p.validation_delay *= scenario.validation_scale;
    }
    let top_group = match scenario.hash.model() {
        Some(model) => assign_hash_power(
            &mut profiles,
            &model,
            &mut SeededRng::derive(seed, &[stream::HASH_POWER]),
        )
        .map_err(|e| SimError::config(e.to_string()))?,
        None => Vec::new(),
    };
    if let Some(f) = scenario.adopter_fraction {
        assign_adopters(&mut profiles, f, &mut SeededRng::derive(seed, &[stream::ADOPTERS]));
    }
    let mut fixed_links = Vec::new();
    if let Some(tree) = &scenario.relay_tree {
        if tree.size > n {
            return Err(SimError::config(format!(
                "relay tree of {} nodes exceeds network of {n}",
                tree.size
            )));
        }
        // Random order, then a binary heap shape: parent of i is (i-1)/2.
        let members = SeededRng::derive(seed, &[stream::RELAY_TREE]).sample_indices(n, tree.size);
        for (i, &m) in members.iter().enumerate() {
            profiles[m].validation_delay *= tree.validation_scale;
            if i > 0 {
                let parent = members[(i - 1) / 2];
                fixed_links.push((NodeId::from_index(parent), NodeId::from_index(m)));
            }
        }
    }
    let regions: Vec<RegionId> = profiles.iter().map(|p| p.region).collect();
    let spec = build_network(profiles, scenario.degree, scenario.rounds)
        .map_err(|e| SimError::config(e.to_string()))?;
    let model = RegionMatrixModel::new(scenario.matrix.clone(), scenario.jitter)
        .map_err(|e| SimError::config(e.to_string()))?;
    let mut latency = model
        .realize(&regions, &mut SeededRng::derive(seed, &[stream::LATENCY]))
        .map_err(|e| SimError::config(e.to_string()))?;
    if let HashSetting::Concentrated(c) = &scenario.hash {
        latency.scale_within(&top_group, c.fast_link_scale);
    }
    if let Some(tree) = &scenario.relay_tree {
        for &(a, b) in &fixed_links {
            latency.scale(a, b, tree.link_scale);
        }
    }
    Ok(World {
        seed,
        spec,
        latency,
        fixed_links,
        top_group,
    })
}

/// Per-node coverage delays of one topology snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub round: u64,
    pub lambda50: Vec<f64>,
    pub lambda90: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub evaluations: Vec<Evaluation>,
    pub adopters: Vec<bool>,
    pub histogram: Histogram,
    pub topology: Topology,
    /// Total draws that needed the eligible-set fallback while rewiring.
    pub fallback_fills: usize,
}

impl RunResult {
    pub fn run_id(&self) -> String {
        format!("{}:{}:{}", self.scenario, self.algorithm.name(), self.seed)
    }

    pub fn dir_name(&self) -> String {
        format!("{}-seed{}", self.algorithm.name(), self.seed)
    }

    pub fn final_evaluation(&self) -> &Evaluation {
        self.evaluations.last().expect("every run is evaluated")
    }
}

/// Coverage delays from every node as source, in parallel over sources.
pub fn evaluate(topology: &Topology, world: &World, round: u64) -> Evaluation {
    let adj = topology.adjacency();
    let hash = world.spec.hash_powers();
    let profiles = world.spec.profiles();
    let pairs: Vec<(f64, f64)> = (0..world.spec.len())
        .into_par_iter()
        .map(|v| lambda_pair(&adj, &world.latency, profiles, &hash, NodeId::from_index(v)))
        .collect();
    Evaluation {
        round,
        lambda50: pairs.iter().map(|p| p.0).collect(),
        lambda90: pairs.iter().map(|p| p.1).collect(),
    }
}

fn topology_error(e: impl std::fmt::Display) -> SimError {
    SimError::Runtime(e.to_string())
}

/// Initial topology of `algorithm` on `world`, fixed links included.
pub fn initial_topology(scenario: &Scenario, algorithm: &Algorithm, world: &World) -> Result<Topology> {
    let seed = world.seed;
    let spec = &world.spec;
    let mut t = match algorithm {
        // Perigee starts from the same random graph as the random baseline.
        Algorithm::Random | Algorithm::Perigee(_) => {
            gen_random(spec, &mut SeededRng::derive(seed, &[stream::TOPOLOGY, 0]))
        }
        Algorithm::Geographic => gen_geographic(
            spec,
            &mut SeededRng::derive(seed, &[stream::TOPOLOGY, algorithm.tag()]),
            scenario.geographic_fraction,
        ),
        Algorithm::Kademlia => {
            gen_kademlia(spec, &mut SeededRng::derive(seed, &[stream::TOPOLOGY, algorithm.tag()]))
        }
        Algorithm::Full => gen_full(spec.len()),
    }
    .map_err(topology_error)?;
    for &(a, b) in &world.fixed_links {
        t.add_fixed_link(a, b);
    }
    Ok(t)
}

/// Check the degree invariants that must hold after every round.
fn audit(t: &Topology, algorithm: &Algorithm, world: &World) -> Result<()> {
    let expected = match algorithm {
        Algorithm::Full => None,
        _ => Some(world.spec.degree().d_out),
    };
    t.audit(expected).map_err(|e| {
        SimError::Runtime(format!("{} seed {}: {e}", algorithm.name(), world.seed))
    })
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Directory for per-round trace and score dumps; off when `None`.
    pub dump_dir: Option<PathBuf>,
}

/// Run one algorithm on one seed's world.
pub fn run_one(
    scenario: &Scenario,
    algorithm: &Algorithm,
    world: &World,
    options: &RunOptions,
) -> Result<RunResult> {
    let mut topology = initial_topology(scenario, algorithm, world)?;
    audit(&topology, algorithm, world)?;
    let mut evaluations = vec![evaluate(&topology, world, 0)];
    let mut fallback_fills = 0;
    if let Algorithm::Perigee(method) = algorithm {
        let schedule = scenario.schedule(algorithm);
        let spec = world
            .spec
            .with_rounds(schedule)
            .map_err(|e| SimError::config(e.to_string()))?;
        let period = scenario.eval_period(algorithm);
        let q = PercentileSpec::new(schedule.percentile).map_err(topology_error)?;
        let mut perigee = Perigee::new(*method, q, spec.len());
        perigee.collect_scores = options.dump_dir.is_some();
        let mut block_id = 0u32;
        for round in 0..schedule.num_rounds as u64 {
            let outcome = run_round(
                &topology.adjacency(),
                &spec,
                &world.latency,
                world.seed,
                round,
                block_id,
            );
            block_id += schedule.blocks_per_round as u32;
            let report = perigee
                .update(&mut topology, &outcome.observations, &spec, world.seed, round)
                .map_err(topology_error)?;
            audit(&topology, algorithm, world)?;
            if report.evictions.iter().any(|&e| e > 1) {
                return Err(SimError::Runtime("more than one eviction per node".into()));
            }
            if report.shortfall > 0 {
                warn!(
                    "{} seed {} round {round}: {} out-slots left unfilled",
                    algorithm.name(),
                    world.seed,
                    report.shortfall
                );
            }
            fallback_fills += report.fallback_fills;
            if let Some(dir) = &options.dump_dir {
                files::write_traces(&dir.join(format!("traces-round{round}.csv")), &outcome.traces)?;
                files::append_scores(&dir.join("scores.csv"), round, method, &report.scores)?;
            }
            let done = round + 1;
            if done % period as u64 == 0 || done == schedule.num_rounds as u64 {
                evaluations.push(evaluate(&topology, world, done));
                debug!(
                    "{} seed {} round {done}: mean lambda90 {:.1} ms",
                    algorithm.name(),
                    world.seed,
                    mean(&evaluations.last().unwrap().lambda90)
                );
            }
        }
    }
    let bins = uniform_bins(world.latency.max(), scenario.histogram_bins);
    let histogram = edge_latency_histogram(&topology, &world.latency, &world.regions(), &bins)
        .map_err(topology_error)?;
    Ok(RunResult {
        scenario: scenario.name.clone(),
        algorithm: *algorithm,
        seed: world.seed,
        evaluations,
        adopters: world.spec.profiles().iter().map(|p| p.adopter).collect(),
        histogram,
        topology,
        fallback_fills,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Every run of a scenario, ordered by seed, then algorithm as listed.
#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub worlds: Vec<Arc<World>>,
    pub runs: Vec<RunResult>,
}

impl ScenarioResult {
    pub fn runs_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.runs.iter().filter(move |r| r.algorithm.name() == name)
    }

    pub fn world(&self, seed: u64) -> &World {
        self.worlds.iter().find(|w| w.seed == seed).expect("seed was run")
    }

    /// Final-round λ90 vectors of `name`, one per seed.
    pub fn final_lambda90(&self, name: &str) -> Vec<Vec<f64>> {
        self.runs_of(name)
            .map(|r| r.final_evaluation().lambda90.clone())
            .collect()
    }

    /// Rank-wise mean final λ90 of `name` at 1-based `rank`.
    pub fn rank_mean(&self, name: &str, rank: usize) -> Option<f64> {
        let runs = self.final_lambda90(name);
        if runs.is_empty() {
            return None;
        }
        let means = perigee_core::metrics::rank_means(&runs).ok()?;
        means.get(rank.checked_sub(1)?).copied()
    }
}

/// Run every (seed, algorithm) pair of `scenario` on the current rayon pool.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<ScenarioResult> {
    let base = base_profiles(scenario)?;
    let worlds: Vec<Arc<World>> = scenario
        .seeds
        .par_iter()
        .map(|&s| build_world(scenario, &base, s).map(Arc::new))
        .collect::<Result<_>>()?;
    let jobs: Vec<(Arc<World>, Algorithm)> = worlds
        .iter()
        .flat_map(|w| scenario.algorithms.iter().map(move |a| (Arc::clone(w), *a)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(world, algorithm)| {
            let mut opts = options.clone();
            if let Some(dir) = &options.dump_dir {
                let d = dir
                    .join("runs")
                    .join(format!("{}-seed{}", algorithm.name(), world.seed));
                fs::create_dir_all(&d).map_err(|e| SimError::io(&d, e))?;
                opts.dump_dir = Some(d);
            }
            info!("{}: {} seed {}", scenario.name, algorithm.name(), world.seed);
            run_one(scenario, algorithm, world, &opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioResult {
        scenario: scenario.clone(),
        worlds,
        runs,
    })
}

/// `lambda.csv` rows of one run: nodes ranked by λ90, ties by id.
pub fn lambda_rows(run: &RunResult, out: &mut String) {
    let id = run.run_id();
    for e in &run.evaluations {
        let mut order: Vec<usize> = (0..e.lambda90.len()).collect();
        order.sort_by(|&a, &b| e.lambda90[a].total_cmp(&e.lambda90[b]).then(a.cmp(&b)));
        for (rank, &v) in order.iter().enumerate() {
            out.push_str(&format!(
                "{id},{},{},{v},{},{},{}\n",
                e.round,
                rank + 1,
                e.lambda50[v],
                e.lambda90[v],
                run.adopters[v]
            ));
        }
    }
}

pub fn hist_rows(h: &Histogram, prefix: &str, out: &mut String) {
    for (i, (&c, &ic)) in h.counts.iter().zip(&h.intra_counts).enumerate() {
        out.push_str(&format!("{prefix}{},{},{c},{ic}\n", h.edges[i], h.edges[i + 1]));
    }
}

/// Write all artifacts of `result` under `dir`, returning the relative
/// paths written.
pub fn write_artifacts(result: &ScenarioResult, dir: &Path) -> Result<Vec<String>> {
    let mut artifacts = Vec::new();
    let mut all_lambda = format!("{LAMBDA_HEADER}\n{LAMBDA_COLUMNS}\n");
    let mut all_hist = format!("{HIST_HEADER} (combined)\nrun_id,{HIST_COLUMNS}\n");
    for run in &result.runs {
        let rel = format!("runs/{}", run.dir_name());
        let run_dir = dir.join(&rel);
        fs::create_dir_all(&run_dir).map_err(|e| SimError::io(&run_dir, e))?;
        let mut lambda = format!("{LAMBDA_HEADER}\n{LAMBDA_COLUMNS}\n");
        let start = lambda.len();
        lambda_rows(run, &mut lambda);
        all_lambda.push_str(&lambda[start..]);
        let mut hist = format!("{HIST_HEADER}\n{HIST_COLUMNS}\n");
        hist_rows(&run.histogram, "", &mut hist);
        hist_rows(&run.histogram, &format!("{},", run.run_id()), &mut all_hist);
        let world = result.world(run.seed);
        let topo = files::format_topology(&run.topology, &world.latency);
        for (name, body) in [("lambda.csv", &lambda), ("hist.csv", &hist), ("topology.txt", &topo)] {
            files::write_file(&run_dir.join(name), body)?;
            artifacts.push(format!("{rel}/{name}"));
        }
        if let Ok(entries) = fs::read_dir(&run_dir) {
            let mut dumps: Vec<String> = entries
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.starts_with("traces-round") || n == "scores.csv")
                .collect();
            dumps.sort();
            artifacts.extend(dumps.into_iter().map(|n| format!("{rel}/{n}")));
        }
    }
    files::write_file(&dir.join("lambda.csv"), &all_lambda)?;
    files::write_file(&dir.join("hist.csv"), &all_hist)?;
    artifacts.push("lambda.csv".into());
    artifacts.push("hist.csv".into());
    Ok(artifacts)
}

fn manifest(result: &ScenarioResult, artifacts: &[String]) -> String {
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let s = &result.scenario;
    let mut m = format!("{MANIFEST_HEADER}\nscenario {}\ncreated_unix {created}\n", s.name);
    m.push_str(&format!(
        "seeds {}\n",
        s.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
    ));
    m.push_str(&format!(
        "algorithms {}\n",
        s.algorithms.iter().map(Algorithm::name).collect::<Vec<_>>().join(" ")
    ));
    for a in artifacts {
        m.push_str(&format!("artifact {a}\n"));
    }
    m
}

/// Run `scenario` and write its artifact directory `<out_root>/<name>`.
/// Outputs are staged in a sibling directory and moved into place only on
/// success, so a failed run leaves nothing behind.
pub fn simulate(scenario: &Scenario, out_root: &Path, verbose: bool) -> Result<PathBuf> {
    fs::create_dir_all(out_root).map_err(|e| SimError::io(out_root, e))?;
    let final_dir = out_root.join(&scenario.name);
    let staging = out_root.join(format!(".{}.partial-{}", scenario.name, std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| SimError::io(&staging, e))?;
    }
    fs::create_dir_all(&staging).map_err(|e| SimError::io(&staging, e))?;
    let outcome = (|| {
        let options = RunOptions {
            dump_dir: verbose.then(|| staging.clone()),
        };
        let result = run_scenario(scenario, &options)?;
        let artifacts = write_artifacts(&result, &staging)?;
        files::write_file(&staging.join("manifest.txt"), &manifest(&result, &artifacts))?;
        Ok(())
    })();
    if let Err(e) = outcome {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if final_dir.exists() {
        fs::remove_dir_all(&final_dir).map_err(|e| SimError::io(&final_dir, e))?;
    }
    fs::rename(&staging, &final_dir).map_err(|e| SimError::io(&final_dir, e))?;
    Ok(final_dir)
}
