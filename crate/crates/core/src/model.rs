//! Core domain types: node identities, per-node profiles, degree and round
//! configuration, and the validated [`NetworkSpec`].

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::rng::SeededRng;

/// Dense node index in `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into a configured region label list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct RegionId(pub u16);

impl RegionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeProfile {
    /// Fraction of total hash power (raw weight before [`build_network`]).
    pub hash_power: f64,
    /// Block validation delay in milliseconds.
    pub validation_delay: f64,
    pub region: RegionId,
    /// Runs neighbor updates when true; keeps its initial out-edges otherwise.
    pub adopter: bool,
}

impl NodeProfile {
    pub fn new(region: RegionId, hash_power: f64, validation_delay: f64) -> Self {
        Self {
            hash_power,
            validation_delay,
            region,
            adopter: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegreeConfig {
    pub d_out: usize,
    pub d_in_max: usize,
    /// Neighbors kept by score each round.
    pub d_retain: usize,
    /// Neighbors re-drawn at random each round.
    pub e_explore: usize,
}

impl Default for DegreeConfig {
    fn default() -> Self {
        Self {
            d_out: 8,
            d_in_max: 20,
            d_retain: 6,
            e_explore: 2,
        }
    }
}

impl DegreeConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d_out == 0 || self.d_in_max == 0 || self.d_retain == 0 {
            return Err(ModelError::Degree("degree fields must be positive"));
        }
        if self.d_retain + self.e_explore != self.d_out {
            return Err(ModelError::Degree("d_retain + e_explore must equal d_out"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundConfig {
    /// Blocks mined per round (K).
    pub blocks_per_round: usize,
    pub num_rounds: usize,
    /// Percentile used by scoring, in `(0, 1]`.
    pub percentile: f64,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            blocks_per_round: 100,
            num_rounds: 30,
            percentile: 0.9,
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.blocks_per_round == 0 {
            return Err(ModelError::Rounds("blocks_per_round must be at least 1"));
        }
        if self.num_rounds == 0 {
            return Err(ModelError::Rounds("num_rounds must be at least 1"));
        }
        if !(self.percentile > 0.0 && self.percentile <= 1.0) {
            return Err(ModelError::Rounds("percentile must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("profile list is empty")]
    Empty,
    #[error("node {node}: hash power {value} is negative or not finite")]
    HashPower { node: usize, value: f64 },
    #[error("total hash power is zero")]
    ZeroHashPower,
    #[error("node {node}: validation delay {value} ms is negative or not finite")]
    ValidationDelay { node: usize, value: f64 },
    #[error("invalid degree configuration: {0}")]
    Degree(&'static str),
    #[error("invalid round configuration: {0}")]
    Rounds(&'static str),
    #[error("invalid hash model: {0}")]
    HashModel(&'static str),
}

/// Validated, immutable network description. Hash powers sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    profiles: Vec<NodeProfile>,
    degree: DegreeConfig,
    rounds: RoundConfig,
}

/// Validate inputs and normalize hash powers to sum to one.
pub fn build_network(
    mut profiles: Vec<NodeProfile>,
    degree: DegreeConfig,
    rounds: RoundConfig,
) -> Result<NetworkSpec, ModelError> {
    if profiles.is_empty() {
        return Err(ModelError::Empty);
    }
    degree.validate()?;
    rounds.validate()?;
    let mut total = 0.0;
    for (i, p) in profiles.iter().enumerate() {
        if !(p.hash_power >= 0.0 && p.hash_power.is_finite()) {
            return Err(ModelError::HashPower {
                node: i,
                value: p.hash_power,
            });
        }
        if !(p.validation_delay >= 0.0 && p.validation_delay.is_finite()) {
            return Err(ModelError::ValidationDelay {
                node: i,
                value: p.validation_delay,
            });
        }
        total += p.hash_power;
    }
    if total <= 0.0 {
        return Err(ModelError::ZeroHashPower);
    }
    for p in &mut profiles {
        p.hash_power /= total;
    }
    Ok(NetworkSpec {
        profiles,
        degree,
        rounds,
    })
}

impl NetworkSpec {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[NodeProfile] {
        &self.profiles
    }

    pub fn profile(&self, v: NodeId) -> &NodeProfile {
        &self.profiles[v.index()]
    }

    pub fn degree(&self) -> &DegreeConfig {
        &self.degree
    }

    pub fn rounds(&self) -> &RoundConfig {
        &self.rounds
    }

    pub fn hash_powers(&self) -> Vec<f64> {
        self.profiles.iter().map(|p| p.hash_power).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.profiles.len()).map(NodeId::from_index)
    }

    /// Same network with a different round configuration.
    pub fn with_rounds(&self, rounds: RoundConfig) -> Result<Self, ModelError> {
        rounds.validate()?;
        Ok(Self {
            rounds,
            ..self.clone()
        })
    }

    /// Canonical little-endian encoding, used for determinism checks.
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.profiles.len() * 19);
        for x in [
            self.degree.d_out,
            self.degree.d_in_max,
            self.degree.d_retain,
            self.degree.e_explore,
            self.rounds.blocks_per_round,
            self.rounds.num_rounds,
        ] {
            out.extend_from_slice(&(x as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.rounds.percentile.to_bits().to_le_bytes());
        for p in &self.profiles {
            out.extend_from_slice(&p.hash_power.to_bits().to_le_bytes());
            out.extend_from_slice(&p.validation_delay.to_bits().to_le_bytes());
            out.extend_from_slice(&p.region.0.to_le_bytes());
            out.push(p.adopter as u8);
        }
        out
    }
}

/// How hash power is distributed across nodes.
#[derive(Clone, Debug, PartialEq)]
pub enum HashModel {
    Uniform,
    /// i.i.d. Exp(1) weights, normalized at build time.
    Exponential,
    /// A random `top_fraction` of nodes shares `mass` of the hash power.
    Concentrated { top_fraction: f64, mass: f64 },
}

/// Overwrite raw hash weights according to `model`. Returns the indices of
/// the high-power group (empty unless the model is concentrated).
pub fn assign_hash_power(
    profiles: &mut [NodeProfile],
    model: &HashModel,
    rng: &mut SeededRng,
) -> Result<Vec<NodeId>, ModelError> {
    let n = profiles.len();
    if n == 0 {
        return Err(ModelError::Empty);
    }
    match *model {
        HashModel::Uniform => {
            for p in profiles.iter_mut() {
                p.hash_power = 1.0;
            }
            Ok(Vec::new())
        }
        HashModel::Exponential => {
            for p in profiles.iter_mut() {
                p.hash_power = rng.exp1();
            }
            Ok(Vec::new())
        }
        HashModel::Concentrated { top_fraction, mass } => {
            if !(top_fraction > 0.0 && top_fraction <= 1.0) {
                return Err(ModelError::HashModel("top_fraction must lie in (0, 1]"));
            }
            if !(mass > 0.0 && mass <= 1.0) {
                return Err(ModelError::HashModel("mass must lie in (0, 1]"));
            }
            let k = (libm::round(top_fraction * n as f64) as usize).clamp(1, n);
            let mut top: Vec<NodeId> = rng
                .sample_indices(n, k)
                .into_iter()
                .map(NodeId::from_index)
                .collect();
            top.sort_unstable();
            let rest = n - k;
            let (top_w, rest_w) = if rest == 0 {
                (1.0 / k as f64, 0.0)
            } else {
                (mass / k as f64, (1.0 - mass) / rest as f64)
            };
            for p in profiles.iter_mut() {
                p.hash_power = rest_w;
            }
            for v in &top {
                profiles[v.index()].hash_power = top_w;
            }
            Ok(top)
        }
    }
}

/// Mark a random `fraction` of nodes as adopters and the rest as static.
pub fn assign_adopters(profiles: &mut [NodeProfile], fraction: f64, rng: &mut SeededRng) {
    let n = profiles.len();
    let k = (libm::round(fraction.clamp(0.0, 1.0) * n as f64) as usize).min(n);
    for p in profiles.iter_mut() {
        p.adopter = false;
    }
    for i in rng.sample_indices(n, k) {
        profiles[i].adopter = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn profiles(weights: &[f64]) -> Vec<NodeProfile> {
        weights
            .iter()
            .map(|&w| NodeProfile::new(RegionId(0), w, 50.0))
            .collect()
    }

    #[test]
    fn normalizes_raw_weights() {
        let spec = build_network(
            profiles(&[1.0, 1.0, 2.0]),
            DegreeConfig::default(),
            RoundConfig::default(),
        )
        .unwrap();
        assert_eq!(spec.hash_powers(), vec![0.25, 0.25, 0.5]);
    }

    #[test]
    fn uniform_thousand_nodes() {
        let spec = build_network(
            profiles(&[1.0; 1000]),
            DegreeConfig::default(),
            RoundConfig::default(),
        )
        .unwrap();
        let total: f64 = spec.hash_powers().iter().sum();
        assert!((total - 1.0).abs() <= 1e-9);
        for f in spec.hash_powers() {
            assert!((f - 0.001).abs() < 1e-15);
        }
    }

    #[test]
    fn degree_arithmetic_constraint() {
        let ok = DegreeConfig {
            d_out: 8,
            d_in_max: 20,
            d_retain: 6,
            e_explore: 2,
        };
        assert!(ok.validate().is_ok());
        let bad = DegreeConfig { d_retain: 7, ..ok };
        assert!(matches!(
            build_network(profiles(&[1.0, 1.0]), bad, RoundConfig::default()),
            Err(ModelError::Degree(_))
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = DegreeConfig::default();
        let r = RoundConfig::default();
        assert_eq!(build_network(vec![], d, r), Err(ModelError::Empty));
        assert!(matches!(
            build_network(profiles(&[1.0, -1.0]), d, r),
            Err(ModelError::HashPower { node: 1, .. })
        ));
        let mut p = profiles(&[1.0, 1.0]);
        p[0].validation_delay = -3.0;
        assert!(matches!(
            build_network(p, d, r),
            Err(ModelError::ValidationDelay { node: 0, .. })
        ));
        assert_eq!(
            build_network(profiles(&[0.0, 0.0]), d, r),
            Err(ModelError::ZeroHashPower)
        );
        let bad_rounds = RoundConfig {
            blocks_per_round: 0,
            ..r
        };
        assert!(matches!(
            build_network(profiles(&[1.0]), d, bad_rounds),
            Err(ModelError::Rounds(_))
        ));
    }

    #[test]
    fn canonical_bytes_are_deterministic() {
        let mk = || {
            let mut p = profiles(&[0.0; 200]);
            let mut rng = SeededRng::new(11);
            assign_hash_power(&mut p, &HashModel::Exponential, &mut rng).unwrap();
            build_network(p, DegreeConfig::default(), RoundConfig::default()).unwrap()
        };
        assert_eq!(mk().to_canonical_bytes(), mk().to_canonical_bytes());
    }

    #[test]
    fn concentrated_model_assigns_mass() {
        let mut p = profiles(&[0.0; 1000]);
        let mut rng = SeededRng::new(5);
        let top = assign_hash_power(
            &mut p,
            &HashModel::Concentrated {
                top_fraction: 0.1,
                mass: 0.9,
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(top.len(), 100);
        let spec = build_network(p, DegreeConfig::default(), RoundConfig::default()).unwrap();
        let top_mass: f64 = top.iter().map(|v| spec.profile(*v).hash_power).sum();
        assert!((top_mass - 0.9).abs() < 1e-9);
    }

    #[test]
    fn exponential_weights_have_unit_mean() {
        let mut p = profiles(&[0.0; 20_000]);
        let mut rng = SeededRng::new(8);
        assign_hash_power(&mut p, &HashModel::Exponential, &mut rng).unwrap();
        let mean: f64 = p.iter().map(|x| x.hash_power).sum::<f64>() / p.len() as f64;
        assert!((mean - 1.0).abs() < 0.03, "{mean}");
    }

    #[test]
    fn adopters_fraction() {
        let mut p = profiles(&[1.0; 1000]);
        assign_adopters(&mut p, 0.1, &mut SeededRng::new(2));
        assert_eq!(p.iter().filter(|x| x.adopter).count(), 100);
    }
}
