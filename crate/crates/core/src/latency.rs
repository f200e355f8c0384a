//! Pairwise one-way link latency.
//!
//! Two backends share the [`LatencyModel`] trait: [`LinkLatencies`], a dense
//! symmetric matrix realized once per repetition (usually from a
//! [`RegionMatrixModel`]), and [`HypercubeModel`], which embeds nodes in
//! `[0,1]^d` and uses scaled Euclidean distance.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::model::{NodeId, RegionId};
use crate::rng::SeededRng;

/// Maximum absolute asymmetry accepted in a region matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatencyError {
    #[error("no self-links: u = v = {0}")]
    SelfLink(NodeId),
    #[error("node {0} out of range")]
    OutOfRange(NodeId),
    #[error("region matrix must be square with one row per label ({labels} labels, {entries} entries)")]
    Shape { labels: usize, entries: usize },
    #[error("region matrix asymmetric at ({row}, {col}): {a} vs {b}")]
    Asymmetric {
        row: usize,
        col: usize,
        a: f64,
        b: f64,
    },
    #[error("region matrix entry ({row}, {col}) = {value} is negative or not finite")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("duplicate region label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown region id {0}")]
    UnknownRegion(u16),
    #[error("jitter fraction {0} must lie in [0, 1)")]
    Jitter(f64),
    #[error("hypercube dimension {0} must be at least 2")]
    Dimension(usize),
    #[error("embedding needs at least 2 points, got {0}")]
    TooFewPoints(usize),
}

/// Source of one-way link latencies in milliseconds.
pub trait LatencyModel {
    fn node_count(&self) -> usize;

    /// Unchecked lookup for the hot path. `u != v` is assumed.
    fn delay(&self, u: NodeId, v: NodeId) -> f64;
}

/// Checked latency query.
pub fn link_latency<M: LatencyModel + ?Sized>(
    model: &M,
    u: NodeId,
    v: NodeId,
) -> Result<f64, LatencyError> {
    let n = model.node_count();
    if u.index() >= n {
        return Err(LatencyError::OutOfRange(u));
    }
    if v.index() >= n {
        return Err(LatencyError::OutOfRange(v));
    }
    if u == v {
        return Err(LatencyError::SelfLink(u));
    }
    Ok(model.delay(u, v))
}

/// Symmetric matrix of mean one-way latencies between labelled regions.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMatrix {
    labels: Vec<String>,
    mean: Vec<f64>,
}

impl RegionMatrix {
    pub fn new(labels: Vec<String>, mean: Vec<f64>) -> Result<Self, LatencyError> {
        let k = labels.len();
        if k == 0 || mean.len() != k * k {
            return Err(LatencyError::Shape {
                labels: k,
                entries: mean.len(),
            });
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(LatencyError::DuplicateLabel(l.clone()));
            }
        }
        for row in 0..k {
            for col in 0..k {
                let value = mean[row * k + col];
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(LatencyError::BadEntry { row, col, value });
                }
                let other = mean[col * k + row];
                if (value - other).abs() > SYMMETRY_TOLERANCE {
                    return Err(LatencyError::Asymmetric {
                        row,
                        col,
                        a: value,
                        b: other,
                    });
                }
            }
        }
        Ok(Self { labels, mean })
    }

    /// Seven-region default: North America, South America, Europe, Asia,
    /// Africa, China, Oceania. Each entry is the mean one-way delay in ms
    /// between the two regions (half of a typical round-trip time). The
    /// values approximate public wide-area measurements; they are stand-ins,
    /// not a measured dataset.
    pub fn default_seven() -> Self {
        const LABELS: [&str; 7] = ["NA", "SA", "EU", "AS", "AF", "CN", "OC"];
        #[rustfmt::skip]
        const MEAN: [f64; 49] = [
            //  NA     SA     EU     AS     AF     CN     OC
             30.0,  70.0,  50.0,  90.0, 115.0, 100.0,  90.0, // NA
             70.0,  35.0, 100.0, 150.0, 150.0, 160.0, 150.0, // SA
             50.0, 100.0,  17.5, 100.0,  70.0, 115.0, 140.0, // EU
             90.0, 150.0, 100.0,  40.0, 130.0,  40.0,  70.0, // AS
            115.0, 150.0,  70.0, 130.0,  50.0, 150.0, 160.0, // AF
            100.0, 160.0, 115.0,  40.0, 150.0,  25.0, 100.0, // CN
             90.0, 150.0, 140.0,  70.0, 160.0, 100.0,  25.0, // OC
        ];
        Self::new(
            LABELS.iter().map(|s| String::from(*s)).collect(),
            MEAN.to_vec(),
        )
        .expect("bundled matrix is valid")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn region(&self, label: &str) -> Option<RegionId> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| RegionId(i as u16))
    }

    pub fn mean(&self, a: RegionId, b: RegionId) -> f64 {
        self.mean[a.index() * self.labels.len() + b.index()]
    }
}

/// Region-matrix latency with multiplicative per-pair jitter.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMatrixModel {
    pub matrix: RegionMatrix,
    /// Half-width `j` of the uniform factor on `[1 - j, 1 + j]`.
    pub jitter_fraction: f64,
}

impl RegionMatrixModel {
    pub fn new(matrix: RegionMatrix, jitter_fraction: f64) -> Result<Self, LatencyError> {
        if !(0.0..1.0).contains(&jitter_fraction) {
            return Err(LatencyError::Jitter(jitter_fraction));
        }
        Ok(Self {
            matrix,
            jitter_fraction,
        })
    }

    /// Sample every pair's latency once. The result is constant for the
    /// repetition it was drawn for.
    pub fn realize(
        &self,
        regions: &[RegionId],
        rng: &mut SeededRng,
    ) -> Result<LinkLatencies, LatencyError> {
        let k = self.matrix.len();
        if let Some(r) = regions.iter().find(|r| r.index() >= k) {
            return Err(LatencyError::UnknownRegion(r.0));
        }
        let n = regions.len();
        let mut out = LinkLatencies::zeros(n);
        let j = self.jitter_fraction;
        for u in 0..n {
            for v in (u + 1)..n {
                let mean = self.matrix.mean(regions[u], regions[v]);
                let factor = if j > 0.0 {
                    rng.uniform(1.0 - j, 1.0 + j)
                } else {
                    1.0
                };
                out.set(NodeId::from_index(u), NodeId::from_index(v), mean * factor);
            }
        }
        Ok(out)
    }
}

/// Dense symmetric latency table.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkLatencies {
    n: usize,
    values: Vec<f64>,
}

impl LinkLatencies {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * n],
        }
    }

    /// Materialize any model into a dense table.
    pub fn from_model<M: LatencyModel + ?Sized>(model: &M) -> Self {
        let n = model.node_count();
        let mut out = Self::zeros(n);
        for u in 0..n {
            for v in (u + 1)..n {
                let (a, b) = (NodeId::from_index(u), NodeId::from_index(v));
                out.set(a, b, model.delay(a, b));
            }
        }
        out
    }

    pub fn set(&mut self, u: NodeId, v: NodeId, ms: f64) {
        self.values[u.index() * self.n + v.index()] = ms;
        self.values[v.index() * self.n + u.index()] = ms;
    }

    pub fn scale(&mut self, u: NodeId, v: NodeId, factor: f64) {
        let x = self.delay(u, v) * factor;
        self.set(u, v, x);
    }

    /// Scale every pair inside `group` by `factor`.
    pub fn scale_within(&mut self, group: &[NodeId], factor: f64) {
        for (i, &u) in group.iter().enumerate() {
            for &v in &group[i + 1..] {
                if u != v {
                    self.scale(u, v, factor);
                }
            }
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

impl LatencyModel for LinkLatencies {
    fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    fn delay(&self, u: NodeId, v: NodeId) -> f64 {
        self.values[u.index() * self.n + v.index()]
    }
}

/// Nodes embedded uniformly in the unit hypercube.
#[derive(Clone, Debug, PartialEq)]
pub struct HypercubeModel {
    dim: usize,
    points: Vec<f64>,
    /// Milliseconds per unit of Euclidean distance.
    pub scale: f64,
}

impl HypercubeModel {
    pub fn new(dim: usize, points: Vec<f64>, scale: f64) -> Result<Self, LatencyError> {
        if dim < 2 {
            return Err(LatencyError::Dimension(dim));
        }
        if !points.len().is_multiple_of(dim) {
            return Err(LatencyError::Shape {
                labels: dim,
                entries: points.len(),
            });
        }
        if let Some((i, &x)) = points
            .iter()
            .enumerate()
            .find(|(_, x)| !(0.0..=1.0).contains(*x))
        {
            return Err(LatencyError::BadEntry {
                row: i / dim,
                col: i % dim,
                value: x,
            });
        }
        Ok(Self { dim, points, scale })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, v: NodeId) -> &[f64] {
        &self.points[v.index() * self.dim..(v.index() + 1) * self.dim]
    }

    /// Unscaled Euclidean distance.
    pub fn distance(&self, u: NodeId, v: NodeId) -> f64 {
        let a = self.point(u);
        let b = self.point(v);
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        libm::sqrt(s)
    }
}

impl LatencyModel for HypercubeModel {
    fn node_count(&self) -> usize {
        self.len()
    }

    #[inline]
    fn delay(&self, u: NodeId, v: NodeId) -> f64 {
        self.scale * self.distance(u, v)
    }
}

/// `n` i.i.d. uniform points in `[0,1]^d`, unit scale.
pub fn sample_embedding(
    rng: &mut SeededRng,
    n: usize,
    d: usize,
) -> Result<HypercubeModel, LatencyError> {
    if d < 2 {
        return Err(LatencyError::Dimension(d));
    }
    if n < 2 {
        return Err(LatencyError::TooFewPoints(n));
    }
    let points = (0..n * d).map(|_| rng.unit()).collect();
    HypercubeModel::new(d, points, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn id(i: usize) -> NodeId {
        NodeId::from_index(i)
    }

    #[test]
    fn hypercube_diagonal() {
        let m = HypercubeModel::new(2, vec![0.0, 0.0, 1.0, 1.0], 1.0).unwrap();
        let d = link_latency(&m, id(0), id(1)).unwrap();
        assert!((d - core::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn self_link_rejected() {
        let m = HypercubeModel::new(2, vec![0.0, 0.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!(
            link_latency(&m, id(1), id(1)),
            Err(LatencyError::SelfLink(id(1)))
        );
        assert_eq!(
            link_latency(&m, id(0), id(5)),
            Err(LatencyError::OutOfRange(id(5)))
        );
    }

    #[test]
    fn region_lookup_without_jitter() {
        let model = RegionMatrixModel::new(RegionMatrix::default_seven(), 0.0).unwrap();
        let na = model.matrix.region("NA").unwrap();
        let regions = vec![na; 5];
        let lat = model.realize(&regions, &mut SeededRng::new(1)).unwrap();
        for u in 0..5 {
            for v in 0..5 {
                if u != v {
                    assert_eq!(lat.delay(id(u), id(v)), 30.0);
                }
            }
        }
    }

    #[test]
    fn jitter_is_bounded_and_constant() {
        let matrix = RegionMatrix::new(vec!["A".into()], vec![40.0]).unwrap();
        let model = RegionMatrixModel::new(matrix, 0.2).unwrap();
        // 142 nodes -> 10_011 pairs.
        let regions = vec![RegionId(0); 142];
        let lat = model.realize(&regions, &mut SeededRng::new(4)).unwrap();
        let mut pairs = 0;
        for u in 0..142 {
            for v in (u + 1)..142 {
                let x = link_latency(&lat, id(u), id(v)).unwrap();
                assert!((32.0..=48.0).contains(&x), "{x}");
                assert_eq!(x, link_latency(&lat, id(v), id(u)).unwrap());
                assert_eq!(x, link_latency(&lat, id(u), id(v)).unwrap());
                pairs += 1;
            }
        }
        assert!(pairs >= 10_000);
    }

    #[test]
    fn matrix_validation() {
        assert!(matches!(
            RegionMatrix::new(vec!["A".into(), "B".into()], vec![1.0, 2.0, 2.5, 1.0]),
            Err(LatencyError::Asymmetric { .. })
        ));
        assert!(
            RegionMatrix::new(vec!["A".into(), "B".into()], vec![1.0, 2.0, 2.0 + 1e-7, 1.0])
                .is_ok()
        );
        assert!(matches!(
            RegionMatrix::new(vec!["A".into()], vec![1.0, 2.0]),
            Err(LatencyError::Shape { .. })
        ));
        assert!(matches!(
            RegionMatrix::new(vec!["A".into(), "A".into()], vec![1.0; 4]),
            Err(LatencyError::DuplicateLabel(_))
        ));
        assert!(matches!(
            RegionMatrix::new(vec!["A".into()], vec![-1.0]),
            Err(LatencyError::BadEntry { .. })
        ));
    }

    #[test]
    fn default_matrix_diagonal_is_row_minimum() {
        let m = RegionMatrix::default_seven();
        for a in 0..7u16 {
            for b in 0..7u16 {
                assert!(m.mean(RegionId(a), RegionId(a)) <= m.mean(RegionId(a), RegionId(b)));
            }
        }
    }

    #[test]
    fn embedding_determinism_and_range() {
        let a = sample_embedding(&mut SeededRng::new(3), 5, 2).unwrap();
        let b = sample_embedding(&mut SeededRng::new(3), 5, 2).unwrap();
        assert_eq!(a, b);
        let c = sample_embedding(&mut SeededRng::new(3), 2, 3).unwrap();
        assert_eq!(c.len(), 2);
        for v in 0..2 {
            assert!(c.point(id(v)).iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn embedding_axis_means() {
        let m = sample_embedding(&mut SeededRng::new(12), 10_000, 2).unwrap();
        for axis in 0..2 {
            let mean: f64 = (0..10_000).map(|v| m.point(id(v))[axis]).sum::<f64>() / 10_000.0;
            assert!((0.49..=0.51).contains(&mean), "{mean}");
        }
    }

    #[test]
    fn embedding_rejects_low_dimension() {
        assert_eq!(
            sample_embedding(&mut SeededRng::new(1), 10, 1),
            Err(LatencyError::Dimension(1))
        );
        assert_eq!(
            sample_embedding(&mut SeededRng::new(1), 1, 2),
            Err(LatencyError::TooFewPoints(1))
        );
    }

    #[test]
    fn hypercube_triangle_inequality() {
        let m = sample_embedding(&mut SeededRng::new(21), 40, 3).unwrap();
        for a in 0..40 {
            for b in 0..40 {
                for c in 0..40 {
                    if a == b || b == c || a == c {
                        continue;
                    }
                    let (a, b, c) = (id(a), id(b), id(c));
                    assert!(m.delay(a, c) <= m.delay(a, b) + m.delay(b, c) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn scale_within_group() {
        let mut lat = LinkLatencies::zeros(4);
        for u in 0..4 {
            for v in (u + 1)..4 {
                lat.set(id(u), id(v), 100.0);
            }
        }
        lat.scale_within(&[id(0), id(2)], 0.1);
        assert!((lat.delay(id(2), id(0)) - 10.0).abs() < 1e-12);
        assert_eq!(lat.delay(id(0), id(1)), 100.0);
    }
}
