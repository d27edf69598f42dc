//! Ground-truth scoring and the (ac, cf) grid search.
//!
//! The scored population is every hypothesis that carries ground truth and
//! was associated to a belief object. A hypothesis without a prediction
//! counts against coverage and is left out of accuracy, precision and
//! recall. Precision and recall are macro-averaged over symbol values.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amortizer::{aggregate_symbol, AmortizationParams};
use crate::annotators::{Annotators, CLASS_KEY, COLOR_KEY, SHAPE_KEY};
use crate::model::{Episode, HypId};

pub const SYMBOL_KEYS: [&str; 3] = [SHAPE_KEY, COLOR_KEY, CLASS_KEY];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("ground truth references unknown hypothesis {hyp} at t={timestamp}")]
    UnknownHypothesis { timestamp: f64, hyp: HypId },
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error(transparent)]
    Params(#[from] crate::amortizer::ParamError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtLabels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    pub shape: String,
    pub color: String,
    pub class: String,
}

impl GtLabels {
    pub fn get(&self, key: &str) -> Option<&str> {
        match key {
            SHAPE_KEY => Some(&self.shape),
            COLOR_KEY => Some(&self.color),
            CLASS_KEY => Some(&self.class),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    labels: BTreeMap<(OrderedFloat<f64>, HypId), GtLabels>,
}

impl GroundTruth {
    pub fn insert(&mut self, timestamp: f64, hyp: HypId, labels: GtLabels) {
        self.labels.insert((OrderedFloat(timestamp), hyp), labels);
    }

    pub fn get(&self, timestamp: f64, hyp: HypId) -> Option<&GtLabels> {
        self.labels.get(&(OrderedFloat(timestamp), hyp))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, HypId, &GtLabels)> {
        self.labels.iter().map(|((t, h), l)| (t.0, *h, l))
    }

    pub fn validate(&self, episode: &Episode) -> Result<(), EvalError> {
        for (t, hyp, _) in self.iter() {
            let known = episode
                .scene_index(t)
                .and_then(|i| episode.scene(i))
                .is_some_and(|s| s.hypothesis(hyp).is_some());
            if !known {
                return Err(EvalError::UnknownHypothesis { timestamp: t, hyp });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    OneShot,
    Amortized,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::OneShot => "one_shot",
            EvalMode::Amortized => "amortized",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SymbolStats {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub coverage: f64,
    /// Hypotheses in the population.
    pub total: usize,
    /// Hypotheses with a prediction.
    pub annotated: usize,
    pub correct: usize,
    /// True when nothing was annotated and A/P/R are reported as 0.
    pub empty_support: bool,
}

impl SymbolStats {
    /// Scores (truth, prediction) pairs. Symbols compare case-insensitively.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Option<&'a str>)>) -> Self {
        let mut total = 0;
        let mut correct = 0;
        // per symbol value: (predicted, actual, hits) among annotated hypotheses
        let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
        for (truth, pred) in pairs {
            total += 1;
            let Some(pred) = pred else { continue };
            let (truth, pred) = (truth.to_ascii_lowercase(), pred.to_ascii_lowercase());
            counts.entry(pred.clone()).or_default().0 += 1;
            let t = counts.entry(truth.clone()).or_default();
            t.1 += 1;
            if pred == truth {
                t.2 += 1;
                correct += 1;
            }
        }
        let annotated: usize = counts.values().map(|c| c.0).sum();
        if annotated == 0 {
            return Self {
                total,
                empty_support: true,
                ..Self::default()
            };
        }
        let mean = |xs: Vec<f64>| {
            if xs.is_empty() {
                0.0
            } else {
                xs.iter().sum::<f64>() / xs.len() as f64
            }
        };
        let precision = mean(
            counts
                .values()
                .filter(|c| c.0 > 0)
                .map(|c| c.2 as f64 / c.0 as f64)
                .collect(),
        );
        let recall = mean(
            counts
                .values()
                .filter(|c| c.1 > 0)
                .map(|c| c.2 as f64 / c.1 as f64)
                .collect(),
        );
        Self {
            accuracy: correct as f64 / annotated as f64,
            precision,
            recall,
            coverage: annotated as f64 / total as f64,
            total,
            annotated,
            correct,
            empty_support: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub params: AmortizationParams,
    pub averaging: String,
    pub shape: SymbolStats,
    pub color: SymbolStats,
    pub class: SymbolStats,
    /// Class-label coverage.
    pub coverage: f64,
}

impl EvalReport {
    pub fn stats(&self, key: &str) -> Option<&SymbolStats> {
        match key {
            SHAPE_KEY => Some(&self.shape),
            COLOR_KEY => Some(&self.color),
            CLASS_KEY => Some(&self.class),
            _ => None,
        }
    }

    /// Same metrics regardless of mode and parameter metadata.
    pub fn same_metrics(&self, other: &Self) -> bool {
        self.shape == other.shape && self.color == other.color && self.class == other.class
    }
}

/// A hypothesis in the scored population.
struct Scored<'a> {
    scene: usize,
    timestamp: f64,
    hyp: HypId,
    labels: &'a GtLabels,
}

fn population<'a>(episode: &Episode, gt: &'a GroundTruth) -> Result<Vec<Scored<'a>>, EvalError> {
    gt.validate(episode)?;
    Ok(gt
        .iter()
        .filter_map(|(t, hyp, labels)| {
            let scene = episode.scene_index(t)?;
            episode.owner(scene, hyp)?;
            Some(Scored {
                scene,
                timestamp: t,
                hyp,
                labels,
            })
        })
        .collect())
}

/// Scores predictions against ground truth.
///
/// One-shot predictions come from running the annotators on the hypothesis
/// alone, kept when their confidence reaches `cf`. Amortized predictions are
/// [`aggregate_symbol`] over the object's stored history.
pub fn score(
    episode: &Episode,
    gt: &GroundTruth,
    annotators: &Annotators,
    params: &AmortizationParams,
    mode: EvalMode,
) -> Result<EvalReport, EvalError> {
    params.validate()?;
    let pop = population(episode, gt)?;
    let predict = |s: &Scored, key: &str| -> Option<String> {
        match mode {
            EvalMode::OneShot => {
                let h = episode.scene(s.scene)?.hypothesis(s.hyp)?;
                annotators
                    .annotate(h, key)
                    .filter(|a| a.confidence >= params.cf)
                    .map(|a| a.symbol)
            }
            EvalMode::Amortized => {
                let oid = episode.owner(s.scene, s.hyp)?;
                let obj = episode.object(oid)?;
                aggregate_symbol(obj, key, s.timestamp, params).map(|a| a.symbol)
            }
        }
    };
    let stats = |key: &str| {
        let preds: Vec<Option<String>> = pop.iter().map(|s| predict(s, key)).collect();
        SymbolStats::from_pairs(
            pop.iter()
                .zip(&preds)
                .map(|(s, p)| (s.labels.get(key).unwrap_or(""), p.as_deref())),
        )
    };
    let class = stats(CLASS_KEY);
    Ok(EvalReport {
        mode,
        params: *params,
        averaging: "macro".into(),
        shape: stats(SHAPE_KEY),
        color: stats(COLOR_KEY),
        coverage: class.coverage,
        class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Maximize `ac + cf` along the crossing line.
    #[default]
    MaxSum,
    /// Maximize the sum of `ac` and `cf` each rescaled to [0, 1] over the grid.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub ac: usize,
    pub cf: f64,
    pub coverage: f64,
    pub accuracy: f64,
}

/// Picks parameters on the line where the coverage and accuracy surfaces
/// cross. For every `cf` the crossing is the `ac` with the smallest
/// `|coverage - accuracy|` (the smaller `ac` on ties); among those points the
/// rule picks the largest `ac + cf`.
pub fn select_params(points: &[LandscapePoint], rule: SelectionRule) -> Option<(usize, f64)> {
    let mut crossing: BTreeMap<OrderedFloat<f64>, LandscapePoint> = BTreeMap::new();
    for p in points {
        let gap = (p.coverage - p.accuracy).abs();
        let slot = crossing.entry(OrderedFloat(p.cf)).or_insert(*p);
        let best = (slot.coverage - slot.accuracy).abs();
        if gap < best || (gap == best && p.ac < slot.ac) {
            *slot = *p;
        }
    }
    let (ac_lo, ac_hi) = points
        .iter()
        .fold((usize::MAX, 0), |(lo, hi), p| (lo.min(p.ac), hi.max(p.ac)));
    let (cf_lo, cf_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.cf), hi.max(p.cf)));
    let unit = |x: f64, lo: f64, hi: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
    let objective = |p: &LandscapePoint| match rule {
        SelectionRule::MaxSum => p.ac as f64 + p.cf,
        SelectionRule::Normalized => {
            unit(p.ac as f64, ac_lo as f64, ac_hi as f64) + unit(p.cf, cf_lo, cf_hi)
        }
    };
    crossing
        .values()
        .max_by(|a, b| {
            objective(a)
                .total_cmp(&objective(b))
                .then(a.cf.total_cmp(&b.cf))
        })
        .map(|p| (p.ac, p.cf))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub ac: usize,
    pub cf: f64,
    pub one_shot: EvalReport,
    pub amortized: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearch {
    pub points: Vec<GridPoint>,
    pub selected: (usize, f64),
    pub rule: SelectionRule,
}

/// Scores every (ac, cf) pair on an already annotated episode; only the
/// aggregation is re-run per point.
pub fn grid_search(
    episode: &Episode,
    gt: &GroundTruth,
    annotators: &Annotators,
    acs: &[usize],
    cfs: &[f64],
    rule: SelectionRule,
) -> Result<GridSearch, EvalError> {
    if acs.is_empty() || cfs.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let grid: Vec<(usize, f64)> = cfs
        .iter()
        .flat_map(|&cf| acs.iter().map(move |&ac| (ac, cf)))
        .collect();
    let points = grid
        .par_iter()
        .map(|&(ac, cf)| {
            let params = AmortizationParams::new(ac, cf)?;
            Ok(GridPoint {
                ac,
                cf,
                one_shot: score(episode, gt, annotators, &params, EvalMode::OneShot)?,
                amortized: score(episode, gt, annotators, &params, EvalMode::Amortized)?,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let landscape: Vec<LandscapePoint> = points
        .iter()
        .map(|p| LandscapePoint {
            ac: p.ac,
            cf: p.cf,
            coverage: p.amortized.coverage,
            accuracy: p.amortized.class.accuracy,
        })
        .collect();
    let selected = select_params(&landscape, rule).ok_or(EvalError::EmptyGrid)?;
    Ok(GridSearch {
        points,
        selected,
        rule,
    })
}

impl GridSearch {
    pub const HEADER: &'static str = "ac,cf,mode,accuracy,precision,recall,coverage";

    /// Delimiter-separated rows, one per grid point and mode.
    pub fn rows(&self) -> Vec<String> {
        let mut out = vec![Self::HEADER.to_string()];
        for p in &self.points {
            for r in [&p.one_shot, &p.amortized] {
                out.push(format!(
                    "{},{},{},{},{},{},{}",
                    p.ac,
                    p.cf,
                    r.mode.as_str(),
                    r.class.accuracy,
                    r.class.precision,
                    r.class.recall,
                    r.coverage
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(truth: &'static str, pred: Option<&'static str>) -> (&'static str, Option<&'static str>) {
        (truth, pred)
    }

    #[test]
    fn perfect_predictions() {
        let pairs: Vec<_> = (0..10)
            .map(|i| if i % 2 == 0 { s("cup", Some("cup")) } else { s("bowl", Some("bowl")) })
            .collect();
        let st = SymbolStats::from_pairs(pairs);
        assert_eq!((st.accuracy, st.precision, st.recall, st.coverage), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn nothing_annotated() {
        let st = SymbolStats::from_pairs(vec![s("cup", None), s("bowl", None)]);
        assert!(st.empty_support);
        assert_eq!((st.accuracy, st.precision, st.recall, st.coverage), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(st.total, 2);
    }

    #[test]
    fn mixed_counts() {
        // 10 hypotheses, 8 annotated, 6 of those correct
        let mut pairs = vec![s("cup", None), s("cup", None)];
        pairs.extend(std::iter::repeat_n(s("cup", Some("cup")), 6));
        pairs.extend(std::iter::repeat_n(s("cup", Some("bowl")), 2));
        let st = SymbolStats::from_pairs(pairs);
        assert_eq!(st.coverage, 0.8);
        assert_eq!(st.accuracy, 0.75);
        // precision: cup 6/6, bowl 0/2 -> 0.5; recall: cup 6/8 -> 0.75 (bowl has no support)
        assert_eq!(st.precision, 0.5);
        assert_eq!(st.recall, 0.75);
    }

    fn point(ac: usize, cf: f64, coverage: f64, accuracy: f64) -> LandscapePoint {
        LandscapePoint { ac, cf, coverage, accuracy }
    }

    #[test]
    fn single_point_is_selected() {
        assert_eq!(
            select_params(&[point(3, 0.7, 0.2, 0.9)], SelectionRule::MaxSum),
            Some((3, 0.7))
        );
        assert_eq!(select_params(&[], SelectionRule::MaxSum), None);
    }

    #[test]
    fn crossing_line_then_max_sum() {
        let pts = vec![
            point(1, 0.6, 0.5, 0.9),
            point(2, 0.6, 0.8, 0.8), // crossing for cf 0.6
            point(3, 0.6, 0.9, 0.7),
            point(1, 0.8, 0.3, 0.95),
            point(2, 0.8, 0.6, 0.9),
            point(3, 0.8, 0.85, 0.86), // crossing for cf 0.8
        ];
        assert_eq!(select_params(&pts, SelectionRule::MaxSum), Some((3, 0.8)));
    }

    #[test]
    fn normalized_rule_can_disagree() {
        // crossings at (10, 0.6) and (2, 0.8): raw sums 10.6 vs 2.8,
        // normalized 1.0 + 0.0 vs 0.0 + 1.0 (tie -> higher cf)
        let pts = vec![
            point(2, 0.6, 0.1, 0.9),
            point(10, 0.6, 0.8, 0.8),
            point(2, 0.8, 0.7, 0.7),
            point(10, 0.8, 0.9, 0.6),
        ];
        assert_eq!(select_params(&pts, SelectionRule::MaxSum), Some((10, 0.6)));
        assert_eq!(select_params(&pts, SelectionRule::Normalized), Some((2, 0.8)));
    }
}
