//! Synthetic episode generator.
//!
//! Objects sit on tables and are seen once per frame. Each hypothesis carries
//! a pose, a color histogram, a class descriptor and a shape descriptor
//! (`vfh`), so a relocated but otherwise unchanged object still scores
//! 0.75 against its belief object under unit weights.
//!
//! Class descriptors are built so the k-NN confidence of every frame is
//! chosen, not observed: a clean frame sits on its class signature
//! (confidence 1), a dropout frame is rotated away from it until the
//! confidence lands below the base gate, and a confused frame is rotated
//! onto another class with moderate confidence.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotators::{
    canonical_bin, BinLayout, LabeledDescriptor, DESCRIPTOR_KEY, HISTOGRAM_KEY, SHAPE_KEY,
};
use crate::evalkit::{GroundTruth, GtLabels};
use crate::filters::{Aabb, NO_PERCEPTION, TASK_HINT_KEY};
use crate::model::{
    Activity, FrameMeta, HypId, Hypothesis, ModelError, OrientedBox, Percept, RegionOfInterest,
    Scene, POSE_KEY,
};

pub const VFH_KEY: &str = "vfh";
pub const LOCATION_KEY: &str = "location";

/// Confidence band of dropout frames; always under the default 0.6 gate.
const DROPOUT_CONFIDENCE: (f64, f64) = (0.3, 0.58);
/// Confidence band of frames labeled as another class.
const CONFUSION_CONFIDENCE: (f64, f64) = (0.65, 0.8);
const SHARP_BLUR: (f64, f64) = (250.0, 500.0);
const BLURRED: (f64, f64) = (5.0, 40.0);
const BLUR_POSE_JITTER: f64 = 0.02;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, SimError> {
    Err(SimError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub name: String,
    pub class: String,
    pub color: String,
    pub shape: String,
    #[serde(default = "default_shape_confidence")]
    pub shape_confidence: f64,
    pub position: [f64; 3],
    /// Overrides the class signature as this object's clean descriptor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<Vec<f64>>,
}

fn default_shape_confidence() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTable {
    pub name: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl SimTable {
    pub fn region(&self) -> Aabb {
        Aabb {
            min: self.min,
            max: self.max,
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimEvent {
    Observe {
        #[serde(default = "one")]
        count: usize,
    },
    /// One transit frame halfway, then the camera rests at `to`.
    MoveCamera { to: [f64; 3] },
    /// Instantaneous relocation; emits no frame.
    PickPlace { object: String, to: [f64; 3] },
    /// Advances time without frames.
    Idle { duration: f64 },
    BlurFrame,
    /// Frames tagged as a no-perception task phase.
    Navigate {
        #[serde(default = "one")]
        count: usize,
    },
}

/// Gaussian sigmas per feature; zero disables.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Noise {
    /// Meters, per translation axis.
    pub pose: f64,
    pub histogram: f64,
    pub descriptor: f64,
    pub vfh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_interval")]
    pub scene_interval: f64,
    /// Minimum angle between class signatures, degrees.
    #[serde(default = "default_separation")]
    pub class_separation_deg: f64,
    #[serde(default = "default_nuisance")]
    pub nuisance_dims: usize,
    #[serde(default = "default_vfh")]
    pub vfh_dims: usize,
    #[serde(default)]
    pub classifier_dropout: f64,
    #[serde(default)]
    pub classifier_confusion: f64,
    #[serde(default)]
    pub camera: [f64; 3],
    #[serde(default)]
    pub layout: BinLayout,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub tables: Vec<SimTable>,
    #[serde(default)]
    pub objects: Vec<SimObject>,
    #[serde(default)]
    pub events: Vec<SimEvent>,
}

fn default_interval() -> f64 {
    1.0
}
fn default_separation() -> f64 {
    90.0
}
fn default_nuisance() -> usize {
    8
}
fn default_vfh() -> usize {
    16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimStats {
    pub scenes: usize,
    pub hypotheses: usize,
    pub observe_frames: usize,
    pub moving_frames: usize,
    pub blur_frames: usize,
    pub navigate_frames: usize,
    pub pick_place: usize,
    pub idle: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub scenes: Vec<Scene>,
    pub ground_truth: GroundTruth,
    /// One training example per class signature.
    pub knn_examples: Vec<LabeledDescriptor>,
    pub stats: SimStats,
}

impl SimSpec {
    pub fn empty(seed: u64) -> Self {
        Self {
            seed,
            scene_interval: default_interval(),
            class_separation_deg: default_separation(),
            nuisance_dims: default_nuisance(),
            vfh_dims: default_vfh(),
            classifier_dropout: 0.0,
            classifier_confusion: 0.0,
            camera: [0.0; 3],
            layout: BinLayout::default(),
            noise: Noise::default(),
            tables: Vec::new(),
            objects: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Three surfaces, nine objects, three pick-and-place relocations, a
    /// static camera and two idle gaps.
    pub fn desk_episode(seed: u64) -> Self {
        let table = |name: &str, min: [f64; 3], max: [f64; 3]| SimTable {
            name: name.into(),
            min,
            max,
        };
        let object = |name: &str, class: &str, color: &str, shape: &str, p: [f64; 3]| SimObject {
            name: name.into(),
            class: class.into(),
            color: color.into(),
            shape: shape.into(),
            shape_confidence: default_shape_confidence(),
            position: p,
            signature: None,
        };
        let observe = |count| SimEvent::Observe { count };
        Self {
            tables: vec![
                table("table_a", [0.0, 0.0, 0.7], [1.2, 0.8, 0.9]),
                table("table_b", [2.0, 0.0, 0.7], [3.2, 0.8, 0.9]),
                table("counter", [0.0, 2.0, 0.85], [1.2, 2.6, 1.0]),
            ],
            objects: vec![
                object("mug", "mug", "red", "cylinder", [0.2, 0.4, 0.75]),
                object("bowl", "bowl", "blue", "sphere", [0.6, 0.4, 0.75]),
                object("cereal", "cereal", "yellow", "box", [1.0, 0.4, 0.75]),
                object("milk", "milk", "white", "box", [2.2, 0.4, 0.75]),
                object("spoon", "spoon", "grey", "flat", [2.6, 0.4, 0.75]),
                object("plate", "plate", "white", "flat", [3.0, 0.4, 0.75]),
                object("bottle", "bottle", "green", "cylinder", [0.2, 2.3, 0.9]),
                object("can", "can", "red", "cylinder", [0.6, 2.3, 0.9]),
                object("sponge", "sponge", "yellow", "box", [1.0, 2.3, 0.9]),
            ],
            events: vec![
                observe(6),
                SimEvent::PickPlace {
                    object: "mug".into(),
                    to: [2.4, 0.7, 0.75],
                },
                observe(6),
                SimEvent::Idle { duration: 30.0 },
                observe(6),
                SimEvent::PickPlace {
                    object: "spoon".into(),
                    to: [0.4, 2.55, 0.9],
                },
                observe(6),
                SimEvent::Idle { duration: 60.0 },
                observe(6),
                SimEvent::PickPlace {
                    object: "can".into(),
                    to: [0.4, 0.7, 0.75],
                },
                observe(6),
            ],
            ..Self::empty(seed)
        }
    }

    pub fn regions(&self) -> Vec<Aabb> {
        self.tables.iter().map(SimTable::region).collect()
    }

    pub fn classes(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.objects.iter().map(|o| o.class.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn descriptor_dim(&self) -> usize {
        self.classes().len() + 1 + self.nuisance_dims
    }

    fn table_at(&self, p: [f64; 3]) -> Option<&SimTable> {
        self.tables.iter().find(|t| t.region().contains(p))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.scene_interval > 0.0 && self.scene_interval.is_finite()) {
            return invalid("scene_interval must be positive");
        }
        if !(self.class_separation_deg > 0.0 && self.class_separation_deg <= 90.0) {
            return invalid("class_separation_deg must lie in (0, 90]");
        }
        if self.nuisance_dims == 0 || self.vfh_dims == 0 {
            return invalid("nuisance_dims and vfh_dims must be positive");
        }
        let p = (self.classifier_dropout, self.classifier_confusion);
        if !(0.0..=1.0).contains(&p.0) || !(0.0..=1.0).contains(&p.1) || p.0 + p.1 > 1.0 {
            return invalid("classifier_dropout and classifier_confusion must be probabilities summing to at most 1");
        }
        let n = self.noise;
        if [n.pose, n.histogram, n.descriptor, n.vfh]
            .iter()
            .any(|s| !(*s >= 0.0 && s.is_finite()))
        {
            return invalid("noise sigmas must be finite and non-negative");
        }
        if self.layout.is_empty() {
            return invalid("histogram layout has no bins");
        }
        let mut names = BTreeSet::new();
        for t in &self.tables {
            if !names.insert(t.name.as_str()) {
                return invalid(format!("duplicate table `{}`", t.name));
            }
            if (0..3).any(|i| !(t.min[i] <= t.max[i])) {
                return invalid(format!("table `{}` has an inverted box", t.name));
            }
        }
        let mut names = BTreeSet::new();
        let dim = self.descriptor_dim();
        for o in &self.objects {
            if !names.insert(o.name.as_str()) {
                return invalid(format!("duplicate object `{}`", o.name));
            }
            if o.class.is_empty() || o.shape.is_empty() {
                return invalid(format!("object `{}` needs a class and a shape", o.name));
            }
            if canonical_bin(&self.layout, &o.color).is_none() {
                return invalid(format!("object `{}` has unknown color `{}`", o.name, o.color));
            }
            if !(0.0..=1.0).contains(&o.shape_confidence) {
                return invalid(format!("object `{}` shape confidence outside [0, 1]", o.name));
            }
            if self.table_at(o.position).is_none() {
                return invalid(format!("object `{}` does not start on a table", o.name));
            }
            if let Some(s) = &o.signature {
                if s.len() != dim || s.iter().any(|v| !v.is_finite()) || norm(s) == 0.0 {
                    return invalid(format!(
                        "object `{}` signature must be a finite non-zero {dim}-vector",
                        o.name
                    ));
                }
            }
        }
        for e in &self.events {
            match e {
                SimEvent::PickPlace { object, to } => {
                    if !names.contains(object.as_str()) {
                        return invalid(format!("pick_place of unknown object `{object}`"));
                    }
                    if self.table_at(*to).is_none() {
                        return invalid(format!("pick_place of `{object}` lands off every table"));
                    }
                }
                SimEvent::Idle { duration } if !(*duration >= 0.0 && duration.is_finite()) => {
                    return invalid("idle duration must be finite and non-negative");
                }
                SimEvent::MoveCamera { to } if to.iter().any(|v| !v.is_finite()) => {
                    return invalid("camera target must be finite");
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Statistics the generated episode must have, counted from the events.
    pub fn expected_stats(&self) -> SimStats {
        let mut s = SimStats::default();
        for e in &self.events {
            match e {
                SimEvent::Observe { count } => s.observe_frames += count,
                SimEvent::MoveCamera { .. } => s.moving_frames += 1,
                SimEvent::BlurFrame => s.blur_frames += 1,
                SimEvent::Navigate { count } => s.navigate_frames += count,
                SimEvent::PickPlace { .. } => s.pick_place += 1,
                SimEvent::Idle { .. } => s.idle += 1,
            }
        }
        s.scenes = s.observe_frames + s.moving_frames + s.blur_frames + s.navigate_frames;
        s.hypotheses = s.scenes * self.objects.len();
        s
    }

    /// Copy of this spec with blur frames spread evenly so they make up
    /// `fraction` of all frames.
    pub fn inject_blur(&self, fraction: f64) -> Result<Self, SimError> {
        if !(0.0..1.0).contains(&fraction) {
            return invalid("blur fraction must lie in [0, 1)");
        }
        let mut unit = Vec::new();
        for e in &self.events {
            match e {
                SimEvent::Observe { count } => {
                    unit.extend((0..*count).map(|_| SimEvent::Observe { count: 1 }))
                }
                SimEvent::Navigate { count } => {
                    unit.extend((0..*count).map(|_| SimEvent::Navigate { count: 1 }))
                }
                other => unit.push(other.clone()),
            }
        }
        let frames = unit.iter().filter(|e| emits_clean_frame(e)).count();
        let blurs = (fraction * frames as f64 / (1.0 - fraction)).round() as usize;
        if blurs == 0 {
            return Ok(self.clone());
        }
        let mut events = Vec::with_capacity(unit.len() + blurs);
        let (mut seen, mut placed) = (0usize, 0usize);
        for e in unit {
            let frame = emits_clean_frame(&e);
            events.push(e);
            if frame {
                seen += 1;
                // Blur j follows clean frame ceil((j + 1) * frames / blurs).
                while placed < blurs && seen * blurs >= (placed + 1) * frames {
                    events.push(SimEvent::BlurFrame);
                    placed += 1;
                }
            }
        }
        Ok(Self {
            events,
            ..self.clone()
        })
    }

    pub fn generate(&self) -> Result<SimOutput, SimError> {
        self.validate()?;
        Generator::new(self).run()
    }
}

fn emits_clean_frame(e: &SimEvent) -> bool {
    matches!(
        e,
        SimEvent::Observe { .. } | SimEvent::MoveCamera { .. } | SimEvent::Navigate { .. }
    )
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine between a unit descriptor and its nearest example such that
/// `1 - dist_descriptor` equals `confidence`.
fn cosine_for(confidence: f64) -> f64 {
    1.0 - 2.0 * (1.0 - confidence).powi(2)
}

#[derive(Clone, Copy)]
enum Quality {
    Clean,
    Blurred,
}

struct Generator<'a> {
    spec: &'a SimSpec,
    rng: ChaCha8Rng,
    classes: Vec<String>,
    signatures: Vec<Vec<f64>>,
    /// Per object: class index, clean descriptor, vfh signature.
    class_of: Vec<usize>,
    base: Vec<Vec<f64>>,
    vfh: Vec<Vec<f64>>,
    positions: Vec<[f64; 3]>,
    camera: [f64; 3],
    t: f64,
    out: SimOutput,
}

impl<'a> Generator<'a> {
    fn new(spec: &'a SimSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let classes = spec.classes();
        let n = classes.len();
        let dim = spec.descriptor_dim();
        // A shared axis sets the pairwise cosine to s^2 = cos(margin).
        let shared = spec.class_separation_deg.to_radians().cos().max(0.0).sqrt();
        let own = (1.0 - shared * shared).sqrt();
        let signatures: Vec<Vec<f64>> = (0..n)
            .map(|c| {
                let mut v = vec![0.0; dim];
                v[c] = own;
                v[n] += shared;
                v
            })
            .collect();
        let class_of: Vec<usize> = spec
            .objects
            .iter()
            .map(|o| classes.iter().position(|c| *c == o.class).unwrap())
            .collect();
        let base = spec
            .objects
            .iter()
            .zip(&class_of)
            .map(|(o, c)| match &o.signature {
                Some(s) => normalize(s.clone()),
                None => signatures[*c].clone(),
            })
            .collect();
        let vfh = (0..spec.objects.len())
            .map(|_| random_unit(&mut rng, spec.vfh_dims))
            .collect();
        let knn_examples = classes
            .iter()
            .zip(&signatures)
            .map(|(label, d)| LabeledDescriptor {
                label: label.clone(),
                descriptor: d.clone(),
            })
            .collect();
        Self {
            spec,
            rng,
            classes,
            signatures,
            class_of,
            base,
            vfh,
            positions: spec.objects.iter().map(|o| o.position).collect(),
            camera: spec.camera,
            t: 0.0,
            out: SimOutput {
                scenes: Vec::new(),
                ground_truth: GroundTruth::default(),
                knn_examples,
                stats: SimStats::default(),
            },
        }
    }

    fn run(mut self) -> Result<SimOutput, SimError> {
        for e in &self.spec.events {
            match e {
                SimEvent::Observe { count } => {
                    for _ in 0..*count {
                        self.frame(Activity::Observing, Quality::Clean, false)?;
                        self.out.stats.observe_frames += 1;
                    }
                }
                SimEvent::MoveCamera { to } => {
                    let from = self.camera;
                    self.camera = std::array::from_fn(|i| (from[i] + to[i]) / 2.0);
                    self.frame(Activity::Moving, Quality::Clean, false)?;
                    self.camera = *to;
                    self.out.stats.moving_frames += 1;
                }
                SimEvent::PickPlace { object, to } => {
                    let i = self.spec.objects.iter().position(|o| o.name == *object).unwrap();
                    self.positions[i] = *to;
                    self.out.stats.pick_place += 1;
                }
                SimEvent::Idle { duration } => {
                    self.t += duration;
                    self.out.stats.idle += 1;
                }
                SimEvent::BlurFrame => {
                    self.frame(Activity::Observing, Quality::Blurred, false)?;
                    self.out.stats.blur_frames += 1;
                }
                SimEvent::Navigate { count } => {
                    for _ in 0..*count {
                        self.frame(Activity::Moving, Quality::Clean, true)?;
                        self.out.stats.navigate_frames += 1;
                    }
                }
            }
        }
        self.out.stats.scenes = self.out.scenes.len();
        Ok(self.out)
    }

    fn gauss(&mut self, sigma: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        z * sigma
    }

    fn uniform(&mut self, (lo, hi): (f64, f64)) -> f64 {
        self.rng.random_range(lo..hi)
    }

    fn frame(&mut self, activity: Activity, quality: Quality, no_perception: bool) -> Result<(), SimError> {
        let t = self.t;
        self.t += self.spec.scene_interval;
        let blur = match quality {
            Quality::Clean => self.uniform(SHARP_BLUR),
            Quality::Blurred => self.uniform(BLURRED),
        };
        let mut hyps = Vec::with_capacity(self.spec.objects.len());
        for i in 0..self.spec.objects.len() {
            let h = self.hypothesis(i, quality)?;
            let o = &self.spec.objects[i];
            self.out.ground_truth.insert(
                t,
                h.id(),
                GtLabels {
                    object: Some(o.name.clone()),
                    shape: o.shape.clone(),
                    color: o.color.clone(),
                    class: o.class.clone(),
                },
            );
            hyps.push(h);
            self.out.stats.hypotheses += 1;
        }
        let c = self.camera;
        let mut frame = FrameMeta::new([c[0], c[1], c[2], 0.0, 0.0, 0.0]);
        frame.blur_score = Some(blur);
        let mut scene = Scene::new(t, vec![frame], hyps, activity)?;
        if no_perception {
            scene = scene.with_annotation(TASK_HINT_KEY, NO_PERCEPTION);
        }
        self.out.scenes.push(scene);
        Ok(())
    }

    fn hypothesis(&mut self, i: usize, quality: Quality) -> Result<Hypothesis, SimError> {
        let spec = self.spec;
        let o = &spec.objects[i];
        let p = self.positions[i];
        let location = spec.table_at(p).map(|t| t.name.clone());

        let jitter = match quality {
            Quality::Clean => spec.noise.pose,
            Quality::Blurred => BLUR_POSE_JITTER,
        };
        let pose = vec![
            p[0] + self.gauss(jitter),
            p[1] + self.gauss(jitter),
            p[2] + self.gauss(jitter),
            0.0,
            0.0,
            0.0,
        ];
        let (hist, descriptor, vfh) = match quality {
            Quality::Clean => (
                self.histogram(&o.color),
                self.descriptor(i),
                self.noisy_unit(self.vfh[i].clone(), spec.noise.vfh),
            ),
            Quality::Blurred => {
                let bins = spec.layout.len();
                let hist = (0..bins).map(|_| self.rng.random::<f64>()).collect();
                let d = random_unit(&mut self.rng, spec.descriptor_dim());
                (hist, d, random_unit(&mut self.rng, spec.vfh_dims))
            }
        };

        let mut percepts = vec![
            Percept::vector(POSE_KEY, pose)?,
            Percept::vector(HISTOGRAM_KEY, hist)?,
            Percept::vector(DESCRIPTOR_KEY, descriptor)?,
            Percept::vector(VFH_KEY, vfh)?,
            Percept::symbol(SHAPE_KEY, o.shape.clone(), Some(o.shape_confidence))?,
        ];
        if let Some(l) = location {
            percepts.push(Percept::symbol(LOCATION_KEY, l, None)?);
        }
        let roi = RegionOfInterest::new(
            vec![[10 * i as u32, 10 * i as u32]],
            None,
            Some(OrientedBox {
                center: p,
                extents: [0.05; 3],
                orientation: [0.0, 0.0, 0.0, 1.0],
            }),
        )?;
        Ok(Hypothesis::new(HypId(i as u32), roi, percepts)?.with_ground_truth(o.name.clone()))
    }

    fn histogram(&mut self, color: &str) -> Vec<f64> {
        let layout = self.spec.layout;
        let sigma = self.spec.noise.histogram;
        let peak = canonical_bin(&layout, color).expect("validated color");
        let mut h: Vec<f64> = (0..layout.len())
            .map(|b| {
                let clean = if b == peak { 1.0 } else { 0.0 };
                (clean + self.gauss(sigma)).max(0.0)
            })
            .collect();
        if h.iter().sum::<f64>() == 0.0 {
            h[peak] = 1.0;
        }
        h
    }

    fn descriptor(&mut self, i: usize) -> Vec<f64> {
        let spec = self.spec;
        let base = self.base[i].clone();
        let u: f64 = self.rng.random();
        let d = if u < spec.classifier_dropout {
            // Rotate into the nuisance subspace, orthogonal to every class.
            let c = cosine_for(self.uniform(DROPOUT_CONFIDENCE));
            let n = self.classes.len() + 1;
            let mut dir = vec![0.0; spec.descriptor_dim()];
            let nuisance = random_unit(&mut self.rng, spec.nuisance_dims);
            dir[n..].copy_from_slice(&nuisance);
            let s = (1.0 - c * c).sqrt();
            base.iter().zip(&dir).map(|(b, d)| c * b + s * d).collect()
        } else if u < spec.classifier_dropout + spec.classifier_confusion && self.classes.len() > 1
        {
            let own = self.class_of[i];
            let pick = self.rng.random_range(0..self.classes.len() - 1);
            let other = if pick >= own { pick + 1 } else { pick };
            let target = self.signatures[other].clone();
            let c = cosine_for(self.uniform(CONFUSION_CONFIDENCE));
            // Unit direction from `target` toward the object's own signature.
            let along = dot(&base, &target);
            let w = normalize(base.iter().zip(&target).map(|(b, t)| b - along * t).collect());
            let s = (1.0 - c * c).sqrt();
            target.iter().zip(&w).map(|(t, w)| c * t + s * w).collect()
        } else {
            base
        };
        self.noisy_unit(d, spec.noise.descriptor)
    }

    fn noisy_unit(&mut self, v: Vec<f64>, sigma: f64) -> Vec<f64> {
        if sigma == 0.0 {
            return v;
        }
        let noisy: Vec<f64> = v.iter().map(|x| x + self.gauss(sigma)).collect();
        if norm(&noisy) == 0.0 {
            v
        } else {
            normalize(noisy)
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if norm(&v) > 1e-9 {
            return normalize(v);
        }
    }
}
