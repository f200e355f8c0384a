//! Scenario files: one TOML document per experiment.
//!
//! ```toml
//! name = "default"
//! seeds = [1, 2, 3]
//! algorithms = ["random", "perigee-subset"]
//!
//! [network]            # all keys optional
//! profiles = "my.csv"  # default: bundled 1000-node sample
//! region_matrix = "m.csv"
//! jitter = 0.9
//! validation_scale = 1.0
//! adopter_fraction = 1.0
//!
//! [hash]
//! model = "uniform"    # or "exponential", "concentrated"
//!
//! [rounds]
//! num_rounds = 30
//! blocks_per_round = 100
//! ```
//!
//! See the presets under `scenarios/` for every section and key.

use std::path::{Path, PathBuf};

use perigee_core::latency::RegionMatrix;
use perigee_core::model::{DegreeConfig, HashModel, RoundConfig};
use perigee_core::scoring::ScoringMethod;
use serde::Deserialize;

use crate::error::{Result, SimError};

/// Neighbor-selection strategy of one run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algorithm {
    Random,
    Geographic,
    Kademlia,
    Full,
    Perigee(ScoringMethod),
}

impl Algorithm {
    pub const NAMES: [&'static str; 7] = [
        "random",
        "geographic",
        "kademlia",
        "full",
        "perigee-vanilla",
        "perigee-ucb",
        "perigee-subset",
    ];

    pub fn parse(name: &str, ucb_c: f64) -> Option<Self> {
        Some(match name {
            "random" => Algorithm::Random,
            "geographic" => Algorithm::Geographic,
            "kademlia" => Algorithm::Kademlia,
            "full" => Algorithm::Full,
            "perigee-vanilla" => Algorithm::Perigee(ScoringMethod::Vanilla),
            "perigee-ucb" => Algorithm::Perigee(ScoringMethod::Ucb { c: ucb_c }),
            "perigee-subset" => Algorithm::Perigee(ScoringMethod::Subset),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Random => "random",
            Algorithm::Geographic => "geographic",
            Algorithm::Kademlia => "kademlia",
            Algorithm::Full => "full",
            Algorithm::Perigee(ScoringMethod::Vanilla) => "perigee-vanilla",
            Algorithm::Perigee(ScoringMethod::Ucb { .. }) => "perigee-ucb",
            Algorithm::Perigee(ScoringMethod::Subset) => "perigee-subset",
        }
    }

    /// Stable tag used to derive this algorithm's topology stream.
    pub fn tag(&self) -> u64 {
        Self::NAMES.iter().position(|n| *n == self.name()).unwrap() as u64
    }

    pub fn is_perigee(&self) -> bool {
        matches!(self, Algorithm::Perigee(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Concentration {
    pub top_fraction: f64,
    pub mass: f64,
    /// Multiplier on link latencies among the high-power group.
    pub fast_link_scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HashSetting {
    /// Use the profile file's weights.
    Profile,
    Uniform,
    Exponential,
    Concentrated(Concentration),
}

impl HashSetting {
    pub fn model(&self) -> Option<HashModel> {
        match self {
            HashSetting::Profile => None,
            HashSetting::Uniform => Some(HashModel::Uniform),
            HashSetting::Exponential => Some(HashModel::Exponential),
            HashSetting::Concentrated(c) => Some(HashModel::Concentrated {
                top_fraction: c.top_fraction,
                mass: c.mass,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelayTree {
    pub size: usize,
    pub link_scale: f64,
    pub validation_scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProfileSource {
    Bundled,
    File(PathBuf),
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub profiles: ProfileSource,
    pub matrix: RegionMatrix,
    pub jitter: f64,
    pub validation_scale: f64,
    /// `None` keeps the profile file's adopter flags.
    pub adopter_fraction: Option<f64>,
    pub hash: HashSetting,
    pub degree: DegreeConfig,
    pub rounds: RoundConfig,
    /// Blocks per UCB round; UCB runs enough rounds to see the same total
    /// number of blocks as the other Perigee variants.
    pub ucb_blocks_per_round: usize,
    /// Evaluate λ after every `eval_every` rounds (block budget units of
    /// `rounds.blocks_per_round`), and always after the last.
    pub eval_every: usize,
    pub geographic_fraction: f64,
    pub relay_tree: Option<RelayTree>,
    pub histogram_bins: usize,
}

impl Scenario {
    /// Rounds and blocks per round for `algorithm`.
    pub fn schedule(&self, algorithm: &Algorithm) -> RoundConfig {
        match algorithm {
            Algorithm::Perigee(ScoringMethod::Ucb { .. }) => {
                let total = self.rounds.blocks_per_round * self.rounds.num_rounds;
                RoundConfig {
                    blocks_per_round: self.ucb_blocks_per_round,
                    num_rounds: total.div_ceil(self.ucb_blocks_per_round),
                    percentile: self.rounds.percentile,
                }
            }
            _ => self.rounds,
        }
    }

    /// Evaluation period in rounds of `algorithm`'s own schedule.
    pub fn eval_period(&self, algorithm: &Algorithm) -> usize {
        let s = self.schedule(algorithm);
        let blocks = self.eval_every * self.rounds.blocks_per_round;
        (blocks / s.blocks_per_round).max(1)
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    seeds: Vec<u64>,
    algorithms: Vec<String>,
    #[serde(default)]
    network: RawNetwork,
    #[serde(default)]
    hash: RawHash,
    degree: Option<RawDegree>,
    rounds: Option<RawRounds>,
    #[serde(default)]
    ucb: RawUcb,
    #[serde(default)]
    geographic: RawGeographic,
    relay_tree: Option<RawRelayTree>,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    profiles: Option<String>,
    region_matrix: Option<String>,
    jitter: Option<f64>,
    validation_scale: Option<f64>,
    adopter_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHash {
    model: Option<String>,
    top_fraction: Option<f64>,
    mass: Option<f64>,
    fast_link_scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDegree {
    d_out: usize,
    d_in_max: usize,
    d_retain: usize,
    e_explore: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRounds {
    num_rounds: usize,
    blocks_per_round: usize,
    percentile: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUcb {
    c: Option<f64>,
    blocks_per_round: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeographic {
    in_cluster_fraction: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelayTree {
    size: usize,
    link_scale: f64,
    validation_scale: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    eval_every: Option<usize>,
    histogram_bins: Option<usize>,
}

pub const DEFAULT_JITTER: f64 = 0.9;
pub const DEFAULT_UCB_C: f64 = 1.0;
pub const DEFAULT_GEOGRAPHIC_FRACTION: f64 = 0.5;
pub const DEFAULT_HISTOGRAM_BINS: usize = 40;

/// 1-based line of `key = ...` inside `[section]` (top level when empty).
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parse and validate a scenario. Relative file paths resolve against
/// `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        SimError::config_at(line, e.message().to_string())
    })?;
    let err = |section: &str, key: &str, msg: String| {
        SimError::config_at(key_line(text, section, key), msg)
    };

    if raw.name.is_empty()
        || raw.name.starts_with('.')
        || !raw
            .name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
    {
        return Err(err(
            "",
            "name",
            "name must be non-empty, use [A-Za-z0-9_.-], and not start with '.'".into(),
        ));
    }
    if raw.seeds.is_empty() {
        return Err(err("", "seeds", "at least one seed is required".into()));
    }
    let mut seen = raw.seeds.clone();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(err("", "seeds", "seeds must be distinct".into()));
    }

    let ucb_c = raw.ucb.c.unwrap_or(DEFAULT_UCB_C);
    if !(ucb_c >= 0.0 && ucb_c.is_finite()) {
        return Err(err("ucb", "c", format!("c must be finite and nonnegative, got {ucb_c}")));
    }
    if raw.algorithms.is_empty() {
        return Err(err("", "algorithms", "at least one algorithm is required".into()));
    }
    let mut algorithms = Vec::new();
    for name in &raw.algorithms {
        let a = Algorithm::parse(name, ucb_c).ok_or_else(|| {
            err(
                "",
                "algorithms",
                format!("unknown algorithm {name:?}; expected one of {:?}", Algorithm::NAMES),
            )
        })?;
        if algorithms.contains(&a) {
            return Err(err("", "algorithms", format!("duplicate algorithm {name:?}")));
        }
        algorithms.push(a);
    }

    let matrix = match &raw.network.region_matrix {
        Some(p) => crate::files::read_region_matrix(&base_dir.join(p))?,
        None => RegionMatrix::default_seven(),
    };
    let profiles = match &raw.network.profiles {
        Some(p) => ProfileSource::File(base_dir.join(p)),
        None => ProfileSource::Bundled,
    };
    let jitter = raw.network.jitter.unwrap_or(DEFAULT_JITTER);
    if !(0.0..1.0).contains(&jitter) {
        return Err(err("network", "jitter", format!("jitter must lie in [0, 1), got {jitter}")));
    }
    let validation_scale = raw.network.validation_scale.unwrap_or(1.0);
    if !(validation_scale > 0.0 && validation_scale.is_finite()) {
        return Err(err(
            "network",
            "validation_scale",
            format!("validation_scale must be positive, got {validation_scale}"),
        ));
    }
    if let Some(f) = raw.network.adopter_fraction {
        if !(0.0..=1.0).contains(&f) {
            return Err(err(
                "network",
                "adopter_fraction",
                format!("adopter_fraction must lie in [0, 1], got {f}"),
            ));
        }
        if f < 1.0 && !algorithms.iter().any(Algorithm::is_perigee) {
            return Err(err(
                "network",
                "adopter_fraction",
                "adopter_fraction needs at least one perigee algorithm".into(),
            ));
        }
    }

    let h = &raw.hash;
    let model = h.model.as_deref().unwrap_or("uniform");
    let conc_key = [("top_fraction", h.top_fraction), ("mass", h.mass), ("fast_link_scale", h.fast_link_scale)];
    let hash = match model {
        "uniform" | "exponential" | "profile" => {
            if let Some((k, _)) = conc_key.iter().find(|(_, v)| v.is_some()) {
                return Err(err("hash", k, format!("{k} only applies to model = \"concentrated\"")));
            }
            match model {
                "uniform" => HashSetting::Uniform,
                "exponential" => HashSetting::Exponential,
                _ => HashSetting::Profile,
            }
        }
        "concentrated" => {
            let c = Concentration {
                top_fraction: h.top_fraction.unwrap_or(0.1),
                mass: h.mass.unwrap_or(0.9),
                fast_link_scale: h.fast_link_scale.unwrap_or(0.1),
            };
            if !(c.top_fraction > 0.0 && c.top_fraction <= 1.0) {
                return Err(err("hash", "top_fraction", "top_fraction must lie in (0, 1]".into()));
            }
            if !(c.mass > 0.0 && c.mass <= 1.0) {
                return Err(err("hash", "mass", "mass must lie in (0, 1]".into()));
            }
            if !(c.fast_link_scale > 0.0 && c.fast_link_scale.is_finite()) {
                return Err(err("hash", "fast_link_scale", "fast_link_scale must be positive".into()));
            }
            HashSetting::Concentrated(c)
        }
        other => {
            return Err(err(
                "hash",
                "model",
                format!("unknown hash model {other:?}; expected uniform, exponential, concentrated or profile"),
            ))
        }
    };

    let degree = match raw.degree {
        Some(d) => DegreeConfig {
            d_out: d.d_out,
            d_in_max: d.d_in_max,
            d_retain: d.d_retain,
            e_explore: d.e_explore,
        },
        None => DegreeConfig::default(),
    };
    degree
        .validate()
        .map_err(|e| err("degree", "", e.to_string()))?;
    let rounds = match raw.rounds {
        Some(r) => RoundConfig {
            blocks_per_round: r.blocks_per_round,
            num_rounds: r.num_rounds,
            percentile: r.percentile.unwrap_or(0.9),
        },
        None => RoundConfig::default(),
    };
    rounds
        .validate()
        .map_err(|e| err("rounds", "", e.to_string()))?;
    let ucb_blocks_per_round = raw.ucb.blocks_per_round.unwrap_or(1);
    if ucb_blocks_per_round == 0 {
        return Err(err("ucb", "blocks_per_round", "blocks_per_round must be positive".into()));
    }
    let geographic_fraction = raw
        .geographic
        .in_cluster_fraction
        .unwrap_or(DEFAULT_GEOGRAPHIC_FRACTION);
    if !(0.0..=1.0).contains(&geographic_fraction) {
        return Err(err(
            "geographic",
            "in_cluster_fraction",
            "in_cluster_fraction must lie in [0, 1]".into(),
        ));
    }
    let relay_tree = match raw.relay_tree {
        Some(t) => {
            if t.size < 2 {
                return Err(err("relay_tree", "size", "size must be at least 2".into()));
            }
            for (k, v) in [("link_scale", t.link_scale), ("validation_scale", t.validation_scale)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(err("relay_tree", k, format!("{k} must be positive")));
                }
            }
            Some(RelayTree {
                size: t.size,
                link_scale: t.link_scale,
                validation_scale: t.validation_scale,
            })
        }
        None => None,
    };
    let eval_every = raw.output.eval_every.unwrap_or(1);
    if eval_every == 0 {
        return Err(err("output", "eval_every", "eval_every must be positive".into()));
    }
    let histogram_bins = raw.output.histogram_bins.unwrap_or(DEFAULT_HISTOGRAM_BINS);
    if histogram_bins == 0 {
        return Err(err("output", "histogram_bins", "histogram_bins must be positive".into()));
    }

    Ok(Scenario {
        name: raw.name,
        seeds: raw.seeds,
        algorithms,
        profiles,
        matrix,
        jitter,
        validation_scale,
        adopter_fraction: raw.network.adopter_fraction,
        hash,
        degree,
        rounds,
        ucb_blocks_per_round,
        eval_every,
        geographic_fraction,
        relay_tree,
        histogram_bins,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, base).map_err(|e| e.in_file(path))
}

/// Scenario presets shipped with the crate, by file stem.
pub const PRESETS: [(&str, &str); 9] = [
    ("default", include_str!("../scenarios/default.toml")),
    ("exponential", include_str!("../scenarios/exponential.toml")),
    ("validation_0.1x", include_str!("../scenarios/validation_0.1x.toml")),
    ("validation_0.5x", include_str!("../scenarios/validation_0.5x.toml")),
    ("validation_5x", include_str!("../scenarios/validation_5x.toml")),
    ("validation_10x", include_str!("../scenarios/validation_10x.toml")),
    ("concentrated", include_str!("../scenarios/concentrated.toml")),
    ("relay_tree", include_str!("../scenarios/relay_tree.toml")),
    ("partial", include_str!("../scenarios/partial.toml")),
];

/// Parse a bundled preset by name.
pub fn preset(name: &str) -> Result<Scenario> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SimError::config(format!("no preset named {name:?}")))?;
    parse_scenario(text, Path::new("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        parse_scenario(text, Path::new("."))
    }

    const MIN: &str = "name = \"t\"\nseeds = [1]\nalgorithms = [\"random\"]\n";

    #[test]
    fn minimal_defaults() {
        let s = parse(MIN).unwrap();
        assert_eq!(s.rounds, RoundConfig::default());
        assert_eq!(s.degree, DegreeConfig::default());
        assert_eq!(s.hash, HashSetting::Uniform);
        assert_eq!(s.jitter, DEFAULT_JITTER);
        assert_eq!(s.profiles, ProfileSource::Bundled);
    }

    #[test]
    fn every_preset_parses() {
        for (name, _) in PRESETS {
            let s = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.seeds, vec![1, 2, 3], "{name}");
        }
    }

    #[test]
    fn ucb_schedule_keeps_block_budget() {
        let s = parse(&format!("{MIN}[ucb]\nblocks_per_round = 1\n")).unwrap();
        let a = Algorithm::Perigee(ScoringMethod::Ucb { c: 1.0 });
        let r = s.schedule(&a);
        assert_eq!(r.num_rounds * r.blocks_per_round, 3000);
        assert_eq!(s.eval_period(&a), 100);
        assert_eq!(s.eval_period(&Algorithm::Perigee(ScoringMethod::Subset)), 1);
    }

    #[test]
    fn errors_carry_lines() {
        let e = parse("name = \"t\"\nseeds = [1]\nalgorithms = [\"nope\"]\n").unwrap_err();
        assert!(e.to_string().starts_with("line 3:"), "{e}");
        let e = parse(&format!("{MIN}\n[network]\njitter = 1.5\n")).unwrap_err();
        assert!(e.to_string().starts_with("line 6:"), "{e}");
        let e = parse(&format!("{MIN}[hash]\nmodel = \"concentrated\"\nmass = 0\n")).unwrap_err();
        assert!(e.to_string().starts_with("line 6:"), "{e}");
        let e = parse(&format!("{MIN}bogus = 1\n")).unwrap_err();
        assert!(e.to_string().starts_with("line 4:"), "{e}");
        let e = parse("name = \"t\"\nseeds = 1\n").unwrap_err();
        assert!(e.to_string().starts_with("line 2:"), "{e}");
        assert_eq!(e.exit_code(), crate::error::EXIT_CONFIG);
    }

    #[test]
    fn semantic_checks() {
        assert!(parse("name = \"t\"\nseeds = []\nalgorithms = [\"random\"]\n").is_err());
        assert!(parse("name = \"t\"\nseeds = [1, 1]\nalgorithms = [\"random\"]\n").is_err());
        assert!(parse("name = \"a b\"\nseeds = [1]\nalgorithms = [\"random\"]\n").is_err());
        assert!(parse(&format!("{MIN}[network]\nadopter_fraction = 0.1\n")).is_err());
        assert!(parse(&format!("{MIN}[hash]\nmass = 0.5\n")).is_err());
        assert!(parse(&format!("{MIN}[degree]\nd_out = 8\nd_in_max = 20\nd_retain = 9\ne_explore = 2\n")).is_err());
        assert!(parse(&format!("{MIN}[relay_tree]\nsize = 1\nlink_scale = 0.1\nvalidation_scale = 0.1\n")).is_err());
    }
}
