//! Frame gating before resolution: blur, camera motion, static scenes and
//! task hints, plus the task-region hypothesis filter.
//!
//! Every gate is optional. With all of them off, [`should_process`] always
//! returns [`Decision::Process`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{translation_distance, MetricRegistry};
use crate::model::{GrayGrid, HypId, Scene};

/// Scene annotation consulted for task hints.
pub const TASK_HINT_KEY: &str = "perception";
/// Value of [`TASK_HINT_KEY`] declaring a phase that needs no perception.
pub const NO_PERCEPTION: &str = "off";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("grid is {0}x{1}; the Laplacian needs at least 3x3")]
    TooSmall(usize, usize),
    #[error("{0} must be non-negative")]
    Negative(&'static str),
    #[error("static_skip_sim must lie in [0, 1], got {0}")]
    StaticRange(f64),
    #[error("region box has min > max")]
    InvertedBox,
}

/// Variance of the 4-neighbor Laplacian response over interior pixels.
pub fn blur_score(grid: &GrayGrid) -> Result<f64, FilterError> {
    let (w, h) = (grid.width(), grid.height());
    if w < 3 || h < 3 {
        return Err(FilterError::TooSmall(w, h));
    }
    let data = grid.data();
    let n = ((w - 2) * (h - 2)) as f64;
    let response = |r: usize, c: usize| {
        let i = r * w + c;
        data[i - w] + data[i + w] + data[i - 1] + data[i + 1] - 4.0 * data[i]
    };
    let mut sum = 0.0;
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            sum += response(r, c);
        }
    }
    let mean = sum / n;
    let mut var = 0.0;
    for r in 1..h - 1 {
        for c in 1..w - 1 {
            let d = response(r, c) - mean;
            var += d * d;
        }
    }
    Ok(var / n)
}

/// Axis-aligned box in world coordinates (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Task-relevant regions; empty disables the region filter.
    pub regions: Vec<Aabb>,
    /// Meters of camera translation between consecutive scenes.
    pub motion_gate: Option<f64>,
    pub static_skip_sim: Option<f64>,
    /// Minimum variance of the Laplacian.
    pub blur_threshold: Option<f64>,
    pub task_hints: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            regions: Vec::new(),
            motion_gate: Some(0.05),
            static_skip_sim: Some(0.99),
            blur_threshold: Some(100.0),
            task_hints: true,
        }
    }
}

impl FilterConfig {
    pub fn disabled() -> Self {
        Self {
            regions: Vec::new(),
            motion_gate: None,
            static_skip_sim: None,
            blur_threshold: None,
            task_hints: false,
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.motion_gate.is_some_and(|g| !(g >= 0.0)) {
            return Err(FilterError::Negative("motion_gate"));
        }
        if self.blur_threshold.is_some_and(|b| !(b >= 0.0)) {
            return Err(FilterError::Negative("blur_threshold"));
        }
        if let Some(s) = self.static_skip_sim {
            if !(0.0..=1.0).contains(&s) {
                return Err(FilterError::StaticRange(s));
            }
        }
        if self
            .regions
            .iter()
            .any(|b| (0..3).any(|i| !(b.min[i] <= b.max[i])))
        {
            return Err(FilterError::InvertedBox);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    Blur,
    Motion,
    Static,
    Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "decision", content = "reason")]
pub enum Decision {
    Process,
    Skip(SkipReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskHint {
    Perceive,
    NoPerception,
}

impl TaskHint {
    pub fn from_scene(scene: &Scene) -> Self {
        match scene.annotations.get(TASK_HINT_KEY) {
            Some(v) if v == NO_PERCEPTION => TaskHint::NoPerception,
            _ => TaskHint::Perceive,
        }
    }
}

/// Lowest blur score over the scene's frames, from the stored score or the
/// pixel grid. `None` when no frame carries either.
pub fn scene_blur(scene: &Scene) -> Option<f64> {
    scene
        .frames
        .iter()
        .filter_map(|f| {
            f.blur_score
                .or_else(|| f.pixels.as_ref().and_then(|g| blur_score(g).ok()))
        })
        .reduce(f64::min)
}

/// Mean similarity over greedily matched hypothesis pairs; 0 when the scenes
/// hold different numbers of hypotheses.
pub fn frame_similarity(a: &Scene, b: &Scene, metrics: &MetricRegistry) -> f64 {
    let (ha, hb) = (a.hypotheses(), b.hypotheses());
    if ha.len() != hb.len() {
        return 0.0;
    }
    if ha.is_empty() {
        return 1.0;
    }
    let mut pairs = Vec::with_capacity(ha.len() * hb.len());
    for (i, x) in ha.iter().enumerate() {
        for (j, y) in hb.iter().enumerate() {
            let s = metrics
                .percept_similarity(x.percepts(), y.percepts())
                .unwrap_or(0.0);
            pairs.push((s, i, j));
        }
    }
    pairs.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let (mut used_a, mut used_b) = (vec![false; ha.len()], vec![false; hb.len()]);
    let mut total = 0.0;
    for (s, i, j) in pairs {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        total += s;
    }
    total / ha.len() as f64
}

pub fn should_process(
    scene: &Scene,
    prev: Option<&Scene>,
    cfg: &FilterConfig,
    hint: TaskHint,
    metrics: &MetricRegistry,
) -> Decision {
    if let Some(threshold) = cfg.blur_threshold {
        if scene_blur(scene).is_some_and(|b| b < threshold) {
            return Decision::Skip(SkipReason::Blur);
        }
    }
    if let (Some(gate), Some(prev)) = (cfg.motion_gate, prev) {
        if let (Some(now), Some(before)) = (scene.camera_pose(), prev.camera_pose()) {
            if translation_distance(&now, &before) > gate {
                return Decision::Skip(SkipReason::Motion);
            }
        }
    }
    if let (Some(threshold), Some(prev)) = (cfg.static_skip_sim, prev) {
        if frame_similarity(scene, prev, metrics) > threshold {
            return Decision::Skip(SkipReason::Static);
        }
    }
    if cfg.task_hints && hint == TaskHint::NoPerception {
        return Decision::Skip(SkipReason::Task);
    }
    Decision::Process
}

/// Hypotheses allowed to reach resolution: those inside some region box.
/// Hypotheses without a pose are kept.
pub fn admitted_hypotheses(scene: &Scene, cfg: &FilterConfig) -> Vec<HypId> {
    scene
        .hypotheses()
        .iter()
        .filter(|h| {
            cfg.regions.is_empty()
                || h.pose()
                    .is_none_or(|p| cfg.regions.iter().any(|b| b.contains([p[0], p[1], p[2]])))
        })
        .map(|h| h.id())
        .collect()
}
