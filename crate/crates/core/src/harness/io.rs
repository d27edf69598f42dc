//! Line-delimited JSON files: scene logs, ground truth, k-NN training
//! tables, plus the plain-text query script.
//!
//! Writers emit a canonical form (fixed field order, shortest round-trip
//! floats), so `write(read(file))` reproduces a canonical file byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::line_col;
use super::{HarnessError, Result};
use crate::annotators::LabeledDescriptor;
use crate::evalkit::{GroundTruth, GtLabels};
use crate::model::{
    Activity, FrameMeta, HypId, Hypothesis, Percept, PerceptValue, RegionOfInterest, Scene,
};
use crate::qlang::{self, Query};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneRecord {
    timestamp: f64,
    activity: Activity,
    frames: Vec<FrameMeta>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    annotations: BTreeMap<String, String>,
    hypotheses: Vec<HypRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HypRecord {
    id: HypId,
    roi: RegionOfInterest,
    percepts: Vec<PerceptRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt: Option<String>,
}

/// Either `{key, len, values}` or `{key, symbol, confidence?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerceptRecord {
    key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    symbol: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
}

impl PerceptRecord {
    fn from_percept(p: &Percept) -> Self {
        let mut r = PerceptRecord {
            key: p.key().to_string(),
            len: None,
            values: None,
            symbol: None,
            confidence: None,
        };
        match p.value() {
            PerceptValue::Vector(v) => {
                r.len = Some(v.len());
                r.values = Some(v.clone());
            }
            PerceptValue::Symbol { value, confidence } => {
                r.symbol = Some(value.clone());
                r.confidence = *confidence;
            }
        }
        r
    }

    fn into_percept(self) -> std::result::Result<Percept, String> {
        match (self.len, self.values, self.symbol) {
            (Some(len), Some(values), None) if self.confidence.is_none() => {
                if len != values.len() {
                    return Err(format!(
                        "percept `{}` declares len {len} but carries {} values",
                        self.key,
                        values.len()
                    ));
                }
                Percept::vector(self.key, values).map_err(|e| e.to_string())
            }
            (None, None, Some(symbol)) => {
                Percept::symbol(self.key, symbol, self.confidence).map_err(|e| e.to_string())
            }
            _ => Err(format!(
                "percept `{}` must carry either len+values or symbol",
                self.key
            )),
        }
    }
}

impl SceneRecord {
    fn from_scene(s: &Scene) -> Self {
        SceneRecord {
            timestamp: s.timestamp,
            activity: s.activity,
            frames: s.frames.clone(),
            annotations: s.annotations.clone(),
            hypotheses: s
                .hypotheses()
                .iter()
                .map(|h| HypRecord {
                    id: h.id(),
                    roi: h.roi().clone(),
                    percepts: h.percepts().iter().map(PerceptRecord::from_percept).collect(),
                    gt: h.ground_truth().map(str::to_string),
                })
                .collect(),
        }
    }

    fn into_scene(self) -> std::result::Result<Scene, String> {
        for f in &self.frames {
            if let Some(g) = &f.pixels {
                g.validate().map_err(|e| e.to_string())?;
            }
        }
        let mut hyps = Vec::with_capacity(self.hypotheses.len());
        for h in self.hypotheses {
            let percepts = h
                .percepts
                .into_iter()
                .map(PerceptRecord::into_percept)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let mut hyp = Hypothesis::new(h.id, h.roi, percepts).map_err(|e| e.to_string())?;
            if let Some(gt) = h.gt {
                hyp = hyp.with_ground_truth(gt);
            }
            hyps.push(hyp);
        }
        let mut scene =
            Scene::new(self.timestamp, self.frames, hyps, self.activity).map_err(|e| e.to_string())?;
        scene.annotations = self.annotations;
        Ok(scene)
    }
}

pub fn scene_to_line(scene: &Scene) -> String {
    serde_json::to_string(&SceneRecord::from_scene(scene)).expect("scene records serialize")
}

pub fn format_scene_log(scenes: &[Scene]) -> String {
    lines(scenes.iter().map(scene_to_line))
}

/// Parses a scene log; blank lines are skipped, timestamps must strictly
/// increase.
pub fn parse_scene_log(text: &str, origin: &str) -> Result<Vec<Scene>> {
    let mut scenes: Vec<Scene> = Vec::new();
    for (n, line) in numbered(text) {
        let record: SceneRecord = json_line(line, origin, n)?;
        let scene = record.into_scene().map_err(|message| HarnessError::Parse {
            path: origin.to_string(),
            line: n,
            column: 1,
            message,
        })?;
        if let Some(last) = scenes.last() {
            if !(scene.timestamp > last.timestamp) {
                return Err(HarnessError::Validation(format!(
                    "{origin}:{n}: timestamp {} does not follow {}",
                    scene.timestamp, last.timestamp
                )));
            }
        }
        scenes.push(scene);
    }
    Ok(scenes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GtRecord {
    timestamp: f64,
    hyp: HypId,
    #[serde(flatten)]
    labels: GtLabels,
}

pub fn format_ground_truth(gt: &GroundTruth) -> String {
    lines(gt.iter().map(|(timestamp, hyp, labels)| {
        serde_json::to_string(&GtRecord {
            timestamp,
            hyp,
            labels: labels.clone(),
        })
        .expect("ground truth serializes")
    }))
}

pub fn parse_ground_truth(text: &str, origin: &str) -> Result<GroundTruth> {
    let mut gt = GroundTruth::default();
    for (n, line) in numbered(text) {
        let r: GtRecord = json_line(line, origin, n)?;
        if gt.get(r.timestamp, r.hyp).is_some() {
            return Err(HarnessError::Validation(format!(
                "{origin}:{n}: duplicate ground truth for {} at t={}",
                r.hyp, r.timestamp
            )));
        }
        gt.insert(r.timestamp, r.hyp, r.labels);
    }
    Ok(gt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnnRecord {
    label: String,
    len: usize,
    values: Vec<f64>,
}

pub fn format_knn(examples: &[LabeledDescriptor]) -> String {
    lines(examples.iter().map(|e| {
        serde_json::to_string(&KnnRecord {
            label: e.label.clone(),
            len: e.descriptor.len(),
            values: e.descriptor.clone(),
        })
        .expect("k-NN records serialize")
    }))
}

pub fn parse_knn(text: &str, origin: &str) -> Result<Vec<LabeledDescriptor>> {
    let mut out = Vec::new();
    for (n, line) in numbered(text) {
        let r: KnnRecord = json_line(line, origin, n)?;
        if r.len != r.values.len() {
            return Err(HarnessError::Parse {
                path: origin.to_string(),
                line: n,
                column: 1,
                message: format!("declared len {} but {} values", r.len, r.values.len()),
            });
        }
        out.push(LabeledDescriptor {
            label: r.label,
            descriptor: r.values,
        });
    }
    Ok(out)
}

/// One query of a script: `<timestamp> <query text>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptEntry {
    pub line: usize,
    pub timestamp: f64,
    pub query: Query,
}

/// Parses a query script. `#` starts a comment line; timestamps must not
/// decrease.
pub fn parse_script(text: &str, origin: &str) -> Result<Vec<ScriptEntry>> {
    let mut out: Vec<ScriptEntry> = Vec::new();
    for (n, raw) in numbered(text) {
        let line = raw.trim_start();
        if line.starts_with('#') {
            continue;
        }
        let indent = raw.len() - line.len();
        let (stamp, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let parse_err = |column: usize, message: String| HarnessError::Parse {
            path: origin.to_string(),
            line: n,
            column,
            message,
        };
        let timestamp: f64 = stamp
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| parse_err(indent + 1, format!("bad timestamp `{stamp}`")))?;
        let offset = indent + stamp.len() + 1;
        let query = qlang::parse(rest).map_err(|e| {
            let (_, col) = line_col(rest, e.offset);
            parse_err(offset + col, e.to_string())
        })?;
        if let Some(prev) = out.last() {
            if timestamp < prev.timestamp {
                return Err(HarnessError::Validation(format!(
                    "{origin}:{n}: query timestamp {timestamp} precedes {}",
                    prev.timestamp
                )));
            }
        }
        out.push(ScriptEntry {
            line: n,
            timestamp,
            query: query.at(timestamp),
        });
    }
    Ok(out)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn read_scene_log(path: &Path) -> Result<Vec<Scene>> {
    parse_scene_log(&read_text(path)?, &path.display().to_string())
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    parse_ground_truth(&read_text(path)?, &path.display().to_string())
}

pub fn read_knn(path: &Path) -> Result<Vec<LabeledDescriptor>> {
    parse_knn(&read_text(path)?, &path.display().to_string())
}

pub fn read_script(path: &Path) -> Result<Vec<ScriptEntry>> {
    parse_script(&read_text(path)?, &path.display().to_string())
}

fn lines(items: impl Iterator<Item = String>) -> String {
    let mut out = String::new();
    for l in items {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Non-blank lines with 1-based line numbers.
fn numbered(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn json_line<T: DeserializeOwned>(line: &str, origin: &str, n: usize) -> Result<T> {
    serde_json::from_str(line).map_err(|e| HarnessError::Parse {
        path: origin.to_string(),
        line: n,
        column: e.column(),
        message: e.to_string(),
    })
}
