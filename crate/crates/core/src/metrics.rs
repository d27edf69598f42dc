//! Per-key distances into [0, 1] and the weighted similarity used for
//! entity resolution.
//!
//! Each numeric key is bound to a [`DistanceKind`] in a [`MetricRegistry`].
//! Keys without a registered kind (e.g. 2D keypoint sets) never contribute to
//! similarity. Symbolic percepts are ignored entirely.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BeliefObject, Hypothesis, Percept, Pose, POSE_KEY};

/// Translation distance (m) is multiplied by this before saturating at 1.
pub const DEFAULT_POSE_SCALE: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("non-finite input")]
    NonFinite,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("histogram has negative entries")]
    NegativeBin,
    #[error("histogram has no mass")]
    ZeroMass,
    #[error("descriptor has zero norm")]
    ZeroNorm,
    #[error("pose vectors must have 6 entries")]
    PoseArity,
    #[error("no comparable numeric keys")]
    Incomparable,
    #[error("weight for `{0}` must be positive and finite")]
    InvalidWeight(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// `min(1, scale * ||t1 - t2||)` on the translational part.
    Pose,
    /// Half L1 distance between sum-normalized histograms.
    Histogram,
    /// Half Euclidean distance between unit-normalized vectors.
    Descriptor,
}

pub fn dist_pose(a: &Pose, b: &Pose) -> Result<f64> {
    dist_pose_scaled(a, b, DEFAULT_POSE_SCALE)
}

pub fn dist_pose_scaled(a: &Pose, b: &Pose, scale: f64) -> Result<f64> {
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok((scale * translation_distance(a, b)).min(1.0))
}

pub fn translation_distance(a: &Pose, b: &Pose) -> f64 {
    a[..3]
        .iter()
        .zip(&b[..3])
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn dist_histogram(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    if a.iter().chain(b).any(|v| *v < 0.0) {
        return Err(MetricError::NegativeBin);
    }
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    if sa <= 0.0 || sb <= 0.0 {
        return Err(MetricError::ZeroMass);
    }
    let l1: f64 = a.iter().zip(b).map(|(x, y)| (x / sa - y / sb).abs()).sum();
    Ok((0.5 * l1).min(1.0))
}

pub fn dist_descriptor(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::ZeroNorm);
    }
    let sq: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x / na - y / nb;
            d * d
        })
        .sum();
    Ok((0.5 * sq.sqrt()).min(1.0))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

/// Per-key weights; keys without an explicit entry weigh 1.0.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightTable {
    weights: BTreeMap<String, f64>,
}

impl WeightTable {
    pub fn set(&mut self, key: impl Into<String>, weight: f64) -> Result<()> {
        let key = key.into();
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(MetricError::InvalidWeight(key));
        }
        self.weights.insert(key, weight);
        Ok(())
    }

    pub fn weight(&self, key: &str) -> f64 {
        self.weights.get(key).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        match self
            .weights
            .iter()
            .find(|(_, w)| !(**w > 0.0 && w.is_finite()))
        {
            Some((k, _)) => Err(MetricError::InvalidWeight(k.clone())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRegistry {
    pub kinds: BTreeMap<String, DistanceKind>,
    pub weights: WeightTable,
    pub pose_scale: f64,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        let kinds = [
            (POSE_KEY, DistanceKind::Pose),
            ("color_hist", DistanceKind::Histogram),
            ("descriptor", DistanceKind::Descriptor),
            ("vfh", DistanceKind::Descriptor),
        ]
        .into_iter()
        .map(|(k, d)| (k.to_string(), d))
        .collect();
        Self {
            kinds,
            weights: WeightTable::default(),
            pose_scale: DEFAULT_POSE_SCALE,
        }
    }
}

impl MetricRegistry {
    pub fn validate(&self) -> Result<()> {
        if !(self.pose_scale > 0.0 && self.pose_scale.is_finite()) {
            return Err(MetricError::InvalidWeight("pose_scale".into()));
        }
        self.weights.validate()
    }

    /// Distance for `key`, or `None` when the key has no registered metric.
    pub fn distance(&self, key: &str, a: &[f64], b: &[f64]) -> Option<Result<f64>> {
        let kind = self.kinds.get(key)?;
        Some(match kind {
            DistanceKind::Pose => match (<&Pose>::try_from(a), <&Pose>::try_from(b)) {
                (Ok(pa), Ok(pb)) => dist_pose_scaled(pa, pb, self.pose_scale),
                _ => Err(MetricError::PoseArity),
            },
            DistanceKind::Histogram => dist_histogram(a, b),
            DistanceKind::Descriptor => dist_descriptor(a, b),
        })
    }

    /// `1 - sum(w_k * dist_k) / sum(w_k)` over the numeric keys both sides
    /// carry and the registry knows.
    pub fn percept_similarity(&self, a: &[Percept], b: &[Percept]) -> Result<f64> {
        let mut weighted = 0.0;
        let mut total = 0.0;
        for pa in a {
            let Some(va) = pa.as_vector() else { continue };
            let Some(vb) = b
                .iter()
                .find(|pb| pb.key() == pa.key())
                .and_then(Percept::as_vector)
            else {
                continue;
            };
            let Some(d) = self.distance(pa.key(), va, vb) else {
                continue;
            };
            let w = self.weights.weight(pa.key());
            weighted += w * d?;
            total += w;
        }
        if total == 0.0 {
            return Err(MetricError::Incomparable);
        }
        Ok((1.0 - weighted / total).clamp(0.0, 1.0))
    }

    /// Similarity of a scene hypothesis to a belief object, compared through
    /// the object's most recent associated hypothesis.
    pub fn similarity(&self, hyp: &Hypothesis, obj: &BeliefObject) -> Result<f64> {
        self.percept_similarity(hyp.percepts(), obj.appearance())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    macro_rules! assert_close {
        ($a:expr, $b:expr) => {
            assert!(($a - $b).abs() < 1e-12, "{} != {}", $a, $b)
        };
    }

    fn p(x: f64, y: f64, z: f64) -> Pose {
        [x, y, z, 0.3, -0.2, 1.0]
    }

    #[test]
    fn pose_distance_examples() {
        assert_eq!(dist_pose(&p(1.0, 2.0, 3.0), &p(1.0, 2.0, 3.0)).unwrap(), 0.0);
        assert_close!(dist_pose(&p(0.0, 0.0, 0.0), &p(0.1, 0.0, 0.0)).unwrap(), 0.4);
        assert_eq!(dist_pose(&p(0.0, 0.0, 0.0), &p(0.0, 0.5, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn pose_distance_ignores_rotation() {
        let a = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 0.0, 3.0, 1.0, -2.0];
        assert_eq!(dist_pose(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn pose_distance_rejects_non_finite() {
        let mut a = p(0.0, 0.0, 0.0);
        a[1] = f64::INFINITY;
        assert_eq!(dist_pose(&a, &p(0.0, 0.0, 0.0)), Err(MetricError::NonFinite));
    }

    #[test]
    fn histogram_distance_examples() {
        assert_eq!(dist_histogram(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(dist_histogram(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        // 0.5 * (|0.75 - 0.5| + |0.25 - 0.5|)
        assert_close!(dist_histogram(&[3.0, 1.0], &[1.0, 1.0]).unwrap(), 0.25);
    }

    #[test]
    fn histogram_distance_errors() {
        assert_eq!(
            dist_histogram(&[1.0], &[1.0, 2.0]),
            Err(MetricError::LengthMismatch(1, 2))
        );
        assert_eq!(dist_histogram(&[0.0, 0.0], &[1.0, 2.0]), Err(MetricError::ZeroMass));
        assert_eq!(dist_histogram(&[-1.0, 2.0], &[1.0, 2.0]), Err(MetricError::NegativeBin));
    }

    #[test]
    fn descriptor_distance_examples() {
        assert_eq!(dist_descriptor(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(dist_descriptor(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 1.0);
        assert_close!(
            dist_descriptor(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            std::f64::consts::SQRT_2 / 2.0
        );
        assert_eq!(dist_descriptor(&[0.0, 0.0], &[0.0, 1.0]), Err(MetricError::ZeroNorm));
    }

    fn vecp(key: &str, v: &[f64]) -> Percept {
        Percept::vector(key, v.to_vec()).unwrap()
    }

    #[test]
    fn similarity_examples() {
        let reg = MetricRegistry::default();
        let a = vec![vecp("color_hist", &[1.0, 0.0]), vecp("vfh", &[1.0, 0.0])];
        assert_eq!(reg.percept_similarity(&a, &a).unwrap(), 1.0);

        let b = vec![vecp("color_hist", &[0.0, 1.0]), vecp("vfh", &[-1.0, 0.0])];
        assert_eq!(reg.percept_similarity(&a, &b).unwrap(), 0.0);

        // distances 0.2 (histogram) and 0.6 (pose, 0.15 m), weights 1 -> 1 - 0.8 / 2
        let h1 = vecp("color_hist", &[0.7, 0.3]);
        let h2 = vecp("color_hist", &[0.5, 0.5]);
        let q1 = vecp(POSE_KEY, &[0.0; 6]);
        let q2 = vecp(POSE_KEY, &[0.15, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let s = reg
            .percept_similarity(&[h1, q1], &[h2, q2])
            .unwrap();
        assert_close!(s, 0.6);
    }

    #[test]
    fn similarity_skips_symbols_and_unregistered_keys() {
        let reg = MetricRegistry::default();
        let a = vec![
            vecp("keypoints", &[1.0, 2.0]),
            Percept::symbol("color", "red", None).unwrap(),
        ];
        let b = vec![
            vecp("keypoints", &[5.0, 2.0]),
            Percept::symbol("color", "blue", None).unwrap(),
        ];
        assert_eq!(reg.percept_similarity(&a, &b), Err(MetricError::Incomparable));
    }

    #[test]
    fn weights_shift_the_balance() {
        let mut reg = MetricRegistry::default();
        reg.weights.set("color_hist", 3.0).unwrap();
        let a = [vecp("color_hist", &[1.0, 0.0]), vecp("vfh", &[1.0, 0.0])];
        let b = [vecp("color_hist", &[0.0, 1.0]), vecp("vfh", &[1.0, 0.0])];
        assert_close!(reg.percept_similarity(&a, &b).unwrap(), 0.25);
        assert!(reg.weights.set("vfh", 0.0).is_err());
    }
}
