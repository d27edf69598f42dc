//! Scene, hypothesis and belief-state data model.
//!
//! An [`Episode`] is a chronological list of [`Scene`]s plus the belief state
//! built over them. Every write to an episode goes through one of its
//! `&mut self` methods (`append_scene`, `associate`, `record_symbol`,
//! `mark_resolved`), which forms the single ordered mutation stream. Readers
//! work on `&Episode` snapshots.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Key of the 6-DoF pose percept: x, y, z in meters, roll, pitch, yaw in radians.
pub const POSE_KEY: &str = "pose";

/// Confidence attached to symbolic percepts that arrive without one.
pub const DEFAULT_SYMBOL_CONFIDENCE: f64 = 1.0;

pub type Pose = [f64; 6];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid percept `{key}`: {reason}")]
    InvalidPercept { key: String, reason: String },

    #[error("invalid region of interest: {0}")]
    InvalidRoi(String),

    #[error("invalid hypothesis {hyp}: {reason}")]
    InvalidHypothesis { hyp: HypId, reason: String },

    #[error("invalid scene at t={timestamp}: {reason}")]
    InvalidScene { timestamp: f64, reason: String },

    #[error("invalid pixel grid: {0}")]
    InvalidGrid(String),

    #[error("scene timestamp {got} does not strictly follow {last}")]
    Ordering { last: f64, got: f64 },

    #[error("no scene with timestamp {0}")]
    UnknownScene(f64),

    #[error("scene t={timestamp} has no hypothesis {hyp}")]
    UnknownHypothesis { timestamp: f64, hyp: HypId },

    #[error("unknown belief object {0}")]
    UnknownObject(ObjectId),

    #[error("integrity violation: {0}")]
    Integrity(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HypId(pub u32);

impl fmt::Display for HypId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

/// The set of valid percept keys, split by value kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeySet {
    pub numeric: BTreeSet<String>,
    pub symbolic: BTreeSet<String>,
}

impl Default for KeySet {
    fn default() -> Self {
        let numeric = [POSE_KEY, "color_hist", "descriptor", "vfh", "keypoints"];
        let symbolic = ["shape", "color", "class", "location"];
        Self {
            numeric: numeric.iter().map(|s| s.to_string()).collect(),
            symbolic: symbolic.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl KeySet {
    pub fn check(&self, percept: &Percept) -> Result<()> {
        let registered = match percept.value() {
            PerceptValue::Vector(_) => self.numeric.contains(percept.key()),
            PerceptValue::Symbol { .. } => self.symbolic.contains(percept.key()),
        };
        if registered {
            Ok(())
        } else {
            Err(ModelError::InvalidPercept {
                key: percept.key().to_string(),
                reason: "key is not registered for this value kind".into(),
            })
        }
    }
}

/// A percept value is a numeric vector or a symbol, never both.
#[derive(Debug, Clone, PartialEq)]
pub enum PerceptValue {
    Vector(Vec<f64>),
    Symbol {
        value: String,
        confidence: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Percept {
    key: String,
    value: PerceptValue,
}

impl Percept {
    pub fn vector(key: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let key = non_empty_key(key.into())?;
        if values.is_empty() {
            return Err(ModelError::InvalidPercept {
                key,
                reason: "numeric vector is empty".into(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidPercept {
                key,
                reason: "numeric vector has non-finite entries".into(),
            });
        }
        Ok(Self {
            key,
            value: PerceptValue::Vector(values),
        })
    }

    pub fn symbol(
        key: impl Into<String>,
        value: impl Into<String>,
        confidence: Option<f64>,
    ) -> Result<Self> {
        let key = non_empty_key(key.into())?;
        let value = value.into();
        if value.is_empty() {
            return Err(ModelError::InvalidPercept {
                key,
                reason: "symbol is empty".into(),
            });
        }
        if let Some(c) = confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(ModelError::InvalidPercept {
                    key,
                    reason: format!("confidence {c} outside [0, 1]"),
                });
            }
        }
        Ok(Self {
            key,
            value: PerceptValue::Symbol { value, confidence },
        })
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn value(&self) -> &PerceptValue {
        &self.value
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match &self.value {
            PerceptValue::Vector(v) => Some(v),
            PerceptValue::Symbol { .. } => None,
        }
    }

    pub fn as_symbol(&self) -> Option<(&str, Option<f64>)> {
        match &self.value {
            PerceptValue::Symbol { value, confidence } => Some((value, *confidence)),
            PerceptValue::Vector(_) => None,
        }
    }
}

fn non_empty_key(key: String) -> Result<String> {
    if key.is_empty() {
        Err(ModelError::InvalidPercept {
            key,
            reason: "key is empty".into(),
        })
    } else {
        Ok(key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: [f64; 3],
    pub extents: [f64; 3],
    /// Quaternion (x, y, z, w).
    pub orientation: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pixels: Vec<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<OrientedBox>,
}

impl RegionOfInterest {
    pub fn new(
        pixels: Vec<[u32; 2]>,
        points: Option<Vec<u32>>,
        bounds: Option<OrientedBox>,
    ) -> Result<Self> {
        let roi = Self {
            pixels,
            points,
            bounds,
        };
        roi.validate()?;
        Ok(roi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixels.is_empty() {
            return Err(ModelError::InvalidRoi("pixel set is empty".into()));
        }
        if let Some(b) = &self.bounds {
            if b.extents.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
                return Err(ModelError::InvalidRoi(
                    "bounding box extents must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn pixels(&self) -> &[[u32; 2]] {
        &self.pixels
    }

    pub fn points(&self) -> Option<&[u32]> {
        self.points.as_deref()
    }

    pub fn bounds(&self) -> Option<&OrientedBox> {
        self.bounds.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    id: HypId,
    roi: RegionOfInterest,
    percepts: Vec<Percept>,
    gt_object: Option<String>,
}

impl Hypothesis {
    pub fn new(id: HypId, roi: RegionOfInterest, percepts: Vec<Percept>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for p in &percepts {
            if !seen.insert(p.key()) {
                return Err(ModelError::InvalidHypothesis {
                    hyp: id,
                    reason: format!("duplicate percept key `{}`", p.key()),
                });
            }
            if p.key() == POSE_KEY && p.as_vector().map(<[f64]>::len) != Some(6) {
                return Err(ModelError::InvalidHypothesis {
                    hyp: id,
                    reason: "pose percept must be a 6-entry vector".into(),
                });
            }
        }
        roi.validate()?;
        Ok(Self {
            id,
            roi,
            percepts,
            gt_object: None,
        })
    }

    /// Attaches the evaluation-only ground-truth object id.
    pub fn with_ground_truth(mut self, object: impl Into<String>) -> Self {
        self.gt_object = Some(object.into());
        self
    }

    pub fn id(&self) -> HypId {
        self.id
    }

    pub fn roi(&self) -> &RegionOfInterest {
        &self.roi
    }

    pub fn percepts(&self) -> &[Percept] {
        &self.percepts
    }

    pub fn percept(&self, key: &str) -> Option<&Percept> {
        self.percepts.iter().find(|p| p.key() == key)
    }

    pub fn pose(&self) -> Option<Pose> {
        let v = self.percept(POSE_KEY)?.as_vector()?;
        v.try_into().ok()
    }

    pub fn numeric_percepts(&self) -> impl Iterator<Item = &Percept> {
        self.percepts.iter().filter(|p| p.as_vector().is_some())
    }

    pub fn symbolic_percepts(&self) -> impl Iterator<Item = &Percept> {
        self.percepts.iter().filter(|p| p.as_symbol().is_some())
    }

    /// Evaluation only. Resolution and annotation never read this.
    pub fn ground_truth(&self) -> Option<&str> {
        self.gt_object.as_deref()
    }
}

/// Row-major grayscale pixel grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let grid = Self {
            width,
            height,
            data,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(ModelError::InvalidGrid("ragged rows".into()));
        }
        Self::new(width, height, rows.concat())
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.width * self.height {
            return Err(ModelError::InvalidGrid(format!(
                "{}x{} grid holds {} values",
                self.width,
                self.height,
                self.data.len()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidGrid("non-finite pixel".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub camera_pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixels: Option<GrayGrid>,
}

impl FrameMeta {
    pub fn new(camera_pose: Pose) -> Self {
        Self {
            camera_pose,
            blur_score: None,
            pixels: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Idle,
    Moving,
    Manipulating,
    Observing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub timestamp: f64,
    pub frames: Vec<FrameMeta>,
    hypotheses: Vec<Hypothesis>,
    pub annotations: BTreeMap<String, String>,
    pub activity: Activity,
}

impl Scene {
    pub fn new(
        timestamp: f64,
        frames: Vec<FrameMeta>,
        hypotheses: Vec<Hypothesis>,
        activity: Activity,
    ) -> Result<Self> {
        if !timestamp.is_finite() {
            return Err(ModelError::InvalidScene {
                timestamp,
                reason: "timestamp is not finite".into(),
            });
        }
        let mut ids = BTreeSet::new();
        for h in &hypotheses {
            if !ids.insert(h.id()) {
                return Err(ModelError::InvalidScene {
                    timestamp,
                    reason: format!("duplicate hypothesis id {}", h.id()),
                });
            }
        }
        Ok(Self {
            timestamp,
            frames,
            hypotheses,
            annotations: BTreeMap::new(),
            activity,
        })
    }

    pub fn with_annotation(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.annotations.insert(key.into(), value.into());
        self
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn hypothesis(&self, id: HypId) -> Option<&Hypothesis> {
        self.hypotheses.iter().find(|h| h.id() == id)
    }

    pub fn camera_pose(&self) -> Option<Pose> {
        self.frames.first().map(|f| f.camera_pose)
    }
}

/// One associated hypothesis in an object's history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    pub timestamp: f64,
    pub scene: usize,
    pub hyp: HypId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub timestamp: f64,
    pub symbol: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefObject {
    oid: ObjectId,
    history: Vec<Occurrence>,
    symbols: BTreeMap<String, Vec<SymbolEntry>>,
    last_pose: Option<Pose>,
    last_seen: f64,
    /// Numeric percepts of the most recent associated hypothesis.
    appearance: Vec<Percept>,
}

impl BeliefObject {
    pub fn oid(&self) -> ObjectId {
        self.oid
    }

    pub fn history(&self) -> &[Occurrence] {
        &self.history
    }

    pub fn symbol_history(&self, key: &str) -> &[SymbolEntry] {
        self.symbols.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn symbol_keys(&self) -> impl Iterator<Item = &str> {
        self.symbols.keys().map(String::as_str)
    }

    pub fn last_pose(&self) -> Option<Pose> {
        self.last_pose
    }

    pub fn last_seen(&self) -> f64 {
        self.last_seen
    }

    pub fn appearance(&self) -> &[Percept] {
        &self.appearance
    }

    /// Occurrences with timestamp at or before `at`.
    pub fn occurrences_until(&self, at: f64) -> &[Occurrence] {
        let end = self.history.partition_point(|o| o.timestamp <= at);
        &self.history[..end]
    }

    fn symbol_at(&self, key: &str, timestamp: f64) -> Option<&SymbolEntry> {
        let entries = self.symbols.get(key)?;
        let i = entries.partition_point(|e| e.timestamp < timestamp);
        entries.get(i).filter(|e| e.timestamp == timestamp)
    }
}

/// Where an association lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssociationTarget {
    Existing(ObjectId),
    Fresh,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Episode {
    keys: KeySet,
    scenes: Vec<Scene>,
    resolved: Vec<bool>,
    belief: Vec<BeliefObject>,
    owners: HashMap<(usize, HypId), ObjectId>,
}

impl Episode {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_keys(keys: KeySet) -> Self {
        Self {
            keys,
            ..Self::default()
        }
    }

    pub fn keys(&self) -> &KeySet {
        &self.keys
    }

    pub fn scenes(&self) -> &[Scene] {
        &self.scenes
    }

    pub fn scene(&self, index: usize) -> Option<&Scene> {
        self.scenes.get(index)
    }

    pub fn belief(&self) -> &[BeliefObject] {
        &self.belief
    }

    pub fn object(&self, oid: ObjectId) -> Option<&BeliefObject> {
        self.belief.get(oid.0 as usize)
    }

    pub fn scene_index(&self, timestamp: f64) -> Option<usize> {
        let i = self.scenes.partition_point(|s| s.timestamp < timestamp);
        (i < self.scenes.len() && self.scenes[i].timestamp == timestamp).then_some(i)
    }

    /// Index of the last scene with timestamp at or before `at`.
    pub fn latest_scene_until(&self, at: f64) -> Option<usize> {
        self.scenes
            .partition_point(|s| s.timestamp <= at)
            .checked_sub(1)
    }

    pub fn owner(&self, scene: usize, hyp: HypId) -> Option<ObjectId> {
        self.owners.get(&(scene, hyp)).copied()
    }

    pub fn associated_count(&self) -> usize {
        self.owners.len()
    }

    pub fn is_resolved(&self, scene: usize) -> bool {
        self.resolved.get(scene).copied().unwrap_or(false)
    }

    /// Most recent scene that went through resolution.
    pub fn current_scene(&self) -> Option<usize> {
        self.resolved.iter().rposition(|r| *r)
    }

    pub fn append_scene(&mut self, scene: Scene) -> Result<usize> {
        if let Some(last) = self.scenes.last() {
            if !(scene.timestamp > last.timestamp) {
                return Err(ModelError::Ordering {
                    last: last.timestamp,
                    got: scene.timestamp,
                });
            }
        }
        for h in scene.hypotheses() {
            for p in h.percepts() {
                self.keys.check(p)?;
            }
        }
        self.scenes.push(scene);
        self.resolved.push(false);
        Ok(self.scenes.len() - 1)
    }

    pub fn mark_resolved(&mut self, scene: usize) -> Result<()> {
        let slot = self
            .resolved
            .get_mut(scene)
            .ok_or_else(|| ModelError::Integrity(format!("scene index {scene} out of range")))?;
        *slot = true;
        Ok(())
    }

    /// Associates hypothesis `hyp` of the scene at `scene_ts` with `target`.
    pub fn associate(
        &mut self,
        target: AssociationTarget,
        scene_ts: f64,
        hyp: HypId,
    ) -> Result<ObjectId> {
        let scene = self
            .scene_index(scene_ts)
            .ok_or(ModelError::UnknownScene(scene_ts))?;
        self.associate_at(target, scene, hyp)
    }

    pub fn associate_at(
        &mut self,
        target: AssociationTarget,
        scene: usize,
        hyp: HypId,
    ) -> Result<ObjectId> {
        let s = self
            .scenes
            .get(scene)
            .ok_or_else(|| ModelError::Integrity(format!("scene index {scene} out of range")))?;
        let timestamp = s.timestamp;
        let h = s
            .hypothesis(hyp)
            .ok_or(ModelError::UnknownHypothesis { timestamp, hyp })?;
        if let Some(owner) = self.owners.get(&(scene, hyp)) {
            return Err(ModelError::Integrity(format!(
                "hypothesis {hyp} at t={timestamp} is already associated to {owner}"
            )));
        }

        let oid = match target {
            AssociationTarget::Existing(oid) => {
                let obj = self
                    .belief
                    .get(oid.0 as usize)
                    .ok_or(ModelError::UnknownObject(oid))?;
                if !(timestamp > obj.last_seen) {
                    return Err(ModelError::Integrity(format!(
                        "{oid} already has an occurrence at or after t={timestamp}"
                    )));
                }
                oid
            }
            AssociationTarget::Fresh => {
                let oid = ObjectId(self.belief.len() as u32);
                self.belief.push(BeliefObject {
                    oid,
                    history: Vec::new(),
                    symbols: BTreeMap::new(),
                    last_pose: None,
                    last_seen: timestamp,
                    appearance: Vec::new(),
                });
                oid
            }
        };

        let obj = &mut self.belief[oid.0 as usize];
        obj.history.push(Occurrence {
            timestamp,
            scene,
            hyp,
        });
        obj.last_seen = timestamp;
        if let Some(pose) = h.pose() {
            obj.last_pose = Some(pose);
        }
        obj.appearance = h.numeric_percepts().cloned().collect();
        for p in h.symbolic_percepts() {
            let (symbol, confidence) = p.as_symbol().expect("filtered to symbols");
            insert_symbol(
                obj.symbols.entry(p.key().to_string()).or_default(),
                SymbolEntry {
                    timestamp,
                    symbol: symbol.to_string(),
                    confidence: confidence.unwrap_or(DEFAULT_SYMBOL_CONFIDENCE),
                },
            );
        }
        self.owners.insert((scene, hyp), oid);
        Ok(oid)
    }

    /// Records a symbolic annotation for `oid` at one of its occurrence
    /// timestamps. Returns `false` when an entry for `key` already exists at
    /// that timestamp.
    pub fn record_symbol(&mut self, oid: ObjectId, key: &str, entry: SymbolEntry) -> Result<bool> {
        if !(0.0..=1.0).contains(&entry.confidence) {
            return Err(ModelError::InvalidPercept {
                key: key.to_string(),
                reason: format!("confidence {} outside [0, 1]", entry.confidence),
            });
        }
        let obj = self
            .belief
            .get_mut(oid.0 as usize)
            .ok_or(ModelError::UnknownObject(oid))?;
        let has_occurrence = obj
            .history
            .binary_search_by(|o| o.timestamp.total_cmp(&entry.timestamp))
            .is_ok();
        if !has_occurrence {
            return Err(ModelError::Integrity(format!(
                "{oid} has no hypothesis at t={}",
                entry.timestamp
            )));
        }
        if obj.symbol_at(key, entry.timestamp).is_some() {
            return Ok(false);
        }
        insert_symbol(obj.symbols.entry(key.to_string()).or_default(), entry);
        Ok(true)
    }

    /// Checks the cross-reference invariants of the belief state.
    pub fn check_integrity(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for obj in &self.belief {
            for w in obj.history.windows(2) {
                if !(w[1].timestamp > w[0].timestamp) {
                    return Err(ModelError::Integrity(format!(
                        "{} history is not strictly increasing",
                        obj.oid
                    )));
                }
            }
            match obj.history.last() {
                Some(last) if last.timestamp == obj.last_seen => {}
                _ => {
                    return Err(ModelError::Integrity(format!(
                        "{} last_seen does not match its history",
                        obj.oid
                    )))
                }
            }
            for occ in &obj.history {
                let scene = self.scenes.get(occ.scene).ok_or_else(|| {
                    ModelError::Integrity(format!("{} references missing scene", obj.oid))
                })?;
                if scene.timestamp != occ.timestamp || scene.hypothesis(occ.hyp).is_none() {
                    return Err(ModelError::Integrity(format!(
                        "{} references missing hypothesis {}",
                        obj.oid, occ.hyp
                    )));
                }
                if !seen.insert((occ.scene, occ.hyp)) {
                    return Err(ModelError::Integrity(format!(
                        "hypothesis {} at t={} has two owners",
                        occ.hyp, occ.timestamp
                    )));
                }
            }
            for (key, entries) in &obj.symbols {
                for e in entries {
                    if obj
                        .history
                        .binary_search_by(|o| o.timestamp.total_cmp(&e.timestamp))
                        .is_err()
                    {
                        return Err(ModelError::Integrity(format!(
                            "{} has a `{key}` symbol without a source hypothesis",
                            obj.oid
                        )));
                    }
                }
            }
        }
        if seen.len() != self.owners.len() {
            return Err(ModelError::Integrity("owner index out of sync".into()));
        }
        Ok(())
    }
}

fn insert_symbol(entries: &mut Vec<SymbolEntry>, entry: SymbolEntry) {
    let i = entries.partition_point(|e| e.timestamp < entry.timestamp);
    if entries.get(i).is_some_and(|e| e.timestamp == entry.timestamp) {
        return;
    }
    entries.insert(i, entry);
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn roi() -> RegionOfInterest {
        RegionOfInterest::new(vec![[0, 0]], None, None).unwrap()
    }

    pub fn pose_at(x: f64, y: f64, z: f64) -> Pose {
        [x, y, z, 0.0, 0.0, 0.0]
    }

    pub fn hyp(id: u32, pose: Pose, extra: Vec<Percept>) -> Hypothesis {
        let mut percepts = vec![Percept::vector(POSE_KEY, pose.to_vec()).unwrap()];
        percepts.extend(extra);
        Hypothesis::new(HypId(id), roi(), percepts).unwrap()
    }

    pub fn scene(t: f64, hyps: Vec<Hypothesis>) -> Scene {
        Scene::new(
            t,
            vec![FrameMeta::new([0.0; 6])],
            hyps,
            Activity::Observing,
        )
        .unwrap()
    }
}
