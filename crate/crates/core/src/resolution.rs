//! Entity resolution: a gated fast-match pass, then greedy one-to-one
//! matching of the remaining hypotheses against the belief state.
//!
//! Pairs are accepted in descending similarity order. Ties go to the lower
//! object id, then the lower hypothesis id. Hypotheses left over become new
//! belief objects.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{translation_distance, MetricRegistry};
use crate::model::{AssociationTarget, BeliefObject, Episode, HypId, ModelError, ObjectId, Scene};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("sim_threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
    #[error("{0} gate must be positive, got {1}")]
    Gate(&'static str, f64),
    #[error(transparent)]
    Metric(#[from] crate::metrics::MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolutionConfig {
    pub sim_threshold: f64,
    /// Meters.
    pub fastmatch_pose_gate: f64,
    /// Seconds.
    pub fastmatch_time_gate: f64,
    pub metrics: MetricRegistry,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        Self {
            sim_threshold: 0.7,
            fastmatch_pose_gate: 0.2,
            fastmatch_time_gate: 5.0,
            metrics: MetricRegistry::default(),
        }
    }
}

impl ResolutionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.sim_threshold) {
            return Err(ConfigError::Threshold(self.sim_threshold));
        }
        if !(self.fastmatch_pose_gate > 0.0) {
            return Err(ConfigError::Gate("pose", self.fastmatch_pose_gate));
        }
        if !(self.fastmatch_time_gate > 0.0) {
            return Err(ConfigError::Gate("time", self.fastmatch_time_gate));
        }
        self.metrics.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub hyp: HypId,
    pub oid: ObjectId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FastMatch {
    pub merged: Vec<Match>,
    pub residual_hyps: Vec<HypId>,
    pub residual_objects: Vec<ObjectId>,
}

/// Outcome of resolving one scene.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Resolution {
    pub fast: Vec<Match>,
    pub merged: Vec<Match>,
    pub created: Vec<(HypId, ObjectId)>,
}

impl Resolution {
    pub fn associations(&self) -> usize {
        self.fast.len() + self.merged.len() + self.created.len()
    }
}

/// Pairs recently seen, nearby objects with scene hypotheses. Only
/// `candidates` take part; everything else is left to the global pass.
pub fn fast_match(
    scene: &Scene,
    candidates: &[HypId],
    belief: &[BeliefObject],
    cfg: &ResolutionConfig,
) -> FastMatch {
    let mut pairs = Vec::new();
    for &hid in candidates {
        let Some(hyp) = scene.hypothesis(hid) else { continue };
        let Some(pose) = hyp.pose() else { continue };
        for obj in belief {
            let Some(last_pose) = obj.last_pose() else { continue };
            let age = scene.timestamp - obj.last_seen();
            if !(age > 0.0 && age <= cfg.fastmatch_time_gate) {
                continue;
            }
            if translation_distance(&pose, &last_pose) > cfg.fastmatch_pose_gate {
                continue;
            }
            if let Ok(score) = cfg.metrics.similarity(hyp, obj) {
                if score >= cfg.sim_threshold {
                    pairs.push(Match {
                        hyp: hid,
                        oid: obj.oid(),
                        score,
                    });
                }
            }
        }
    }
    let merged = greedy_one_to_one(pairs, cfg.sim_threshold);
    FastMatch {
        residual_hyps: candidates
            .iter()
            .copied()
            .filter(|h| !merged.iter().any(|m| m.hyp == *h))
            .collect(),
        residual_objects: belief
            .iter()
            .map(BeliefObject::oid)
            .filter(|o| !merged.iter().any(|m| m.oid == *o))
            .collect(),
        merged,
    }
}

fn greedy_one_to_one(mut pairs: Vec<Match>, threshold: f64) -> Vec<Match> {
    pairs.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.oid.cmp(&b.oid))
            .then(a.hyp.cmp(&b.hyp))
    });
    let mut accepted: Vec<Match> = Vec::new();
    for m in pairs {
        if m.score < threshold {
            break;
        }
        if accepted.iter().any(|a| a.hyp == m.hyp || a.oid == m.oid) {
            continue;
        }
        accepted.push(m);
    }
    accepted
}

/// Resolves the admitted hypotheses of scene `scene` against the belief
/// state and applies the resulting associations. Marks the scene resolved.
pub fn resolve_scene(
    episode: &mut Episode,
    scene: usize,
    admitted: &[HypId],
    cfg: &ResolutionConfig,
) -> Result<Resolution, ModelError> {
    let snapshot = episode
        .scene(scene)
        .ok_or_else(|| ModelError::Integrity(format!("scene index {scene} out of range")))?;
    let mut candidates = admitted.to_vec();
    candidates.sort();
    candidates.dedup();

    let fast = fast_match(snapshot, &candidates, episode.belief(), cfg);

    let mut pairs = Vec::new();
    for &hid in &fast.residual_hyps {
        let hyp = snapshot
            .hypothesis(hid)
            .ok_or(ModelError::UnknownHypothesis {
                timestamp: snapshot.timestamp,
                hyp: hid,
            })?;
        for &oid in &fast.residual_objects {
            let obj = episode.object(oid).ok_or(ModelError::UnknownObject(oid))?;
            if obj.last_seen() >= snapshot.timestamp {
                continue;
            }
            let score = cfg.metrics.similarity(hyp, obj).unwrap_or(0.0);
            pairs.push(Match {
                hyp: hid,
                oid,
                score,
            });
        }
    }
    let merged = greedy_one_to_one(pairs, cfg.sim_threshold);
    let unmatched: Vec<HypId> = fast
        .residual_hyps
        .iter()
        .copied()
        .filter(|h| !merged.iter().any(|m| m.hyp == *h))
        .collect();

    for m in fast.merged.iter().chain(&merged) {
        episode.associate_at(AssociationTarget::Existing(m.oid), scene, m.hyp)?;
    }
    let mut created = Vec::with_capacity(unmatched.len());
    for hid in unmatched {
        let oid = episode.associate_at(AssociationTarget::Fresh, scene, hid)?;
        created.push((hid, oid));
    }
    episode.mark_resolved(scene)?;
    Ok(Resolution {
        fast: fast.merged,
        merged,
        created,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::{Hypothesis, Percept, Pose};

    fn feat(hyp_id: u32, pose: Pose, hist: &[f64]) -> Hypothesis {
        hyp(
            hyp_id,
            pose,
            vec![Percept::vector("color_hist", hist.to_vec()).unwrap()],
        )
    }

    fn ids(scene: &Scene) -> Vec<HypId> {
        scene.hypotheses().iter().map(Hypothesis::id).collect()
    }

    fn resolve_next(ep: &mut Episode, s: Scene, cfg: &ResolutionConfig) -> Resolution {
        let admitted = ids(&s);
        let idx = ep.append_scene(s).unwrap();
        resolve_scene(ep, idx, &admitted, cfg).unwrap()
    }

    #[test]
    fn empty_belief_creates_one_object_per_hypothesis() {
        let cfg = ResolutionConfig::default();
        let mut ep = Episode::new();
        let s = scene(
            1.0,
            (0..3)
                .map(|i| feat(i, pose_at(i as f64, 0.0, 0.0), &[1.0, 0.0]))
                .collect(),
        );
        let r = resolve_next(&mut ep, s, &cfg);
        assert_eq!(r.created.len(), 3);
        assert_eq!(ep.belief().len(), 3);
    }

    #[test]
    fn identical_hypothesis_merges_into_existing_object() {
        let cfg = ResolutionConfig::default();
        let mut ep = Episode::new();
        resolve_next(&mut ep, scene(1.0, vec![feat(0, pose_at(0.0, 0.0, 0.0), &[1.0, 2.0])]), &cfg);
        let r = resolve_next(&mut ep, scene(1.5, vec![feat(0, pose_at(0.0, 0.0, 0.0), &[1.0, 2.0])]), &cfg);
        assert_eq!(r.fast.len(), 1);
        assert_eq!(ep.belief().len(), 1);
        assert_eq!(ep.belief()[0].history().len(), 2);
    }

    #[test]
    fn fast_match_gates() {
        let cfg = ResolutionConfig::default();
        let mut ep = Episode::new();
        resolve_next(&mut ep, scene(1.0, vec![feat(0, pose_at(0.0, 0.0, 0.0), &[1.0, 0.0])]), &cfg);
        let near = scene(1.5, vec![feat(0, pose_at(0.0, 0.0, 0.0), &[1.0, 0.0])]);
        assert_eq!(fast_match(&near, &[HypId(0)], ep.belief(), &cfg).merged.len(), 1);

        let stale = scene(601.0, vec![feat(0, pose_at(0.0, 0.0, 0.0), &[1.0, 0.0])]);
        let fm = fast_match(&stale, &[HypId(0)], ep.belief(), &cfg);
        assert!(fm.merged.is_empty());
        assert_eq!(fm.residual_hyps, vec![HypId(0)]);
        assert_eq!(fm.residual_objects, vec![ObjectId(0)]);

        let far = scene(1.5, vec![feat(0, pose_at(2.0, 0.0, 0.0), &[1.0, 0.0])]);
        assert!(fast_match(&far, &[HypId(0)], ep.belief(), &cfg).merged.is_empty());
    }

    #[test]
    fn greedy_assignment_is_one_to_one() {
        // Two hypotheses score 0.9 and 0.8 against the only object; the
        // stronger one merges and the other becomes a new object.
        let cfg = ResolutionConfig {
            fastmatch_time_gate: 1e-6,
            ..ResolutionConfig::default()
        };
        let mut ep = Episode::new();
        resolve_next(&mut ep, scene(1.0, vec![feat(0, pose_at(0.0, 0.0, 0.0), &[1.0, 0.0])]), &cfg);
        // histogram distances 0.2 and 0.4 at zero pose distance -> 0.9 and 0.8
        let h_a = feat(0, pose_at(0.0, 0.0, 0.0), &[0.6, 0.4]);
        let h_b = feat(1, pose_at(0.0, 0.0, 0.0), &[0.8, 0.2]);
        let obj = &ep.belief()[0];
        assert!((cfg.metrics.similarity(&h_a, obj).unwrap() - 0.8).abs() < 1e-12);
        assert!((cfg.metrics.similarity(&h_b, obj).unwrap() - 0.9).abs() < 1e-12);

        let r = resolve_next(&mut ep, scene(10.0, vec![h_a, h_b]), &cfg);
        assert_eq!(r.merged.len(), 1);
        assert_eq!(r.merged[0].hyp, HypId(1));
        assert_eq!(r.created, vec![(HypId(0), ObjectId(1))]);
        assert_eq!(ep.belief().len(), 2);
    }

    #[test]
    fn ties_prefer_lower_object_then_lower_hypothesis() {
        let pairs = vec![
            Match { hyp: HypId(2), oid: ObjectId(1), score: 0.9 },
            Match { hyp: HypId(1), oid: ObjectId(1), score: 0.9 },
            Match { hyp: HypId(2), oid: ObjectId(0), score: 0.9 },
        ];
        let got = greedy_one_to_one(pairs, 0.5);
        assert_eq!(got[0].oid, ObjectId(0));
        assert_eq!(got[0].hyp, HypId(2));
        assert_eq!(got[1].oid, ObjectId(1));
        assert_eq!(got[1].hyp, HypId(1));
    }

    #[test]
    fn incomparable_pairs_never_merge() {
        let cfg = ResolutionConfig::default();
        let mut ep = Episode::new();
        let bare = |id, t| {
            scene(
                t,
                vec![Hypothesis::new(
                    HypId(id),
                    roi(),
                    vec![Percept::symbol("color", "red", None).unwrap()],
                )
                .unwrap()],
            )
        };
        resolve_next(&mut ep, bare(0, 1.0), &cfg);
        resolve_next(&mut ep, bare(0, 2.0), &cfg);
        assert_eq!(ep.belief().len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(ResolutionConfig::default().validate().is_ok());
        let bad = ResolutionConfig { sim_threshold: 1.2, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ResolutionConfig { fastmatch_pose_gate: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
