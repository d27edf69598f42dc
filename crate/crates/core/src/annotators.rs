//! Symbolic annotators: color from an HSV histogram, class label from a
//! confidence-gated k-NN over descriptors, and pass-through for symbols that
//! arrive as percepts (shape, location).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::dist_descriptor;
use crate::model::Hypothesis;

pub const COLOR_KEY: &str = "color";
pub const CLASS_KEY: &str = "class";
pub const SHAPE_KEY: &str = "shape";
pub const HISTOGRAM_KEY: &str = "color_hist";
pub const DESCRIPTOR_KEY: &str = "descriptor";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotatorError {
    #[error("histogram has {got} bins, layout expects {expected}")]
    Layout { expected: usize, got: usize },
    #[error("histogram has no mass or negative bins")]
    BadHistogram,
    #[error("descriptor length {got} does not match model length {expected}")]
    DescriptorLength { expected: usize, got: usize },
    #[error("descriptor has zero norm or non-finite entries")]
    BadDescriptor,
    #[error("invalid k-NN model: {0}")]
    Model(String),
}

/// Symbol plus the confidence the annotator assigns to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub symbol: String,
    pub confidence: f64,
}

/// Layout of a joint HSV histogram, flattened hue-major:
/// `index = (h * saturation + s) * value + v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinLayout {
    pub hue: usize,
    pub saturation: usize,
    pub value: usize,
}

impl Default for BinLayout {
    fn default() -> Self {
        Self {
            hue: 12,
            saturation: 4,
            value: 3,
        }
    }
}

/// Saturation below which a bin counts as achromatic.
const ACHROMATIC_SATURATION: f64 = 0.2;

pub const COLOR_SYMBOLS: [&str; 9] = [
    "red", "yellow", "green", "cyan", "blue", "magenta", "black", "white", "grey",
];

impl BinLayout {
    pub fn len(&self) -> usize {
        self.hue * self.saturation * self.value
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, h: usize, s: usize, v: usize) -> usize {
        (h * self.saturation + s) * self.value + v
    }

    /// Color region a bin falls into, judged at the bin center.
    pub fn region(&self, index: usize) -> &'static str {
        let v = index % self.value;
        let s = (index / self.value) % self.saturation;
        let h = index / (self.value * self.saturation);
        let hue = (h as f64 + 0.5) * 360.0 / self.hue as f64;
        let sat = (s as f64 + 0.5) / self.saturation as f64;
        let val = (v as f64 + 0.5) / self.value as f64;
        if val < 1.0 / 3.0 {
            "black"
        } else if sat < ACHROMATIC_SATURATION {
            if val < 2.0 / 3.0 {
                "grey"
            } else {
                "white"
            }
        } else {
            hue_name(hue)
        }
    }
}

fn hue_name(deg: f64) -> &'static str {
    // 60-degree sectors centered on the primaries and secondaries.
    match ((deg + 30.0).rem_euclid(360.0) / 60.0) as usize {
        0 => "red",
        1 => "yellow",
        2 => "green",
        3 => "cyan",
        4 => "blue",
        _ => "magenta",
    }
}

/// Dominant color region of `hist` and its mass fraction.
pub fn color_symbol(hist: &[f64], layout: &BinLayout) -> Result<Annotation, AnnotatorError> {
    if hist.len() != layout.len() {
        return Err(AnnotatorError::Layout {
            expected: layout.len(),
            got: hist.len(),
        });
    }
    if hist.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(AnnotatorError::BadHistogram);
    }
    let total: f64 = hist.iter().sum();
    if total <= 0.0 {
        return Err(AnnotatorError::BadHistogram);
    }
    let mut mass = [0.0; COLOR_SYMBOLS.len()];
    for (i, m) in hist.iter().enumerate() {
        let region = layout.region(i);
        let slot = COLOR_SYMBOLS.iter().position(|c| *c == region).unwrap();
        mass[slot] += m;
    }
    let (best, m) = mass
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, m)| if *m > acc.1 { (i, *m) } else { acc });
    Ok(Annotation {
        symbol: COLOR_SYMBOLS[best].to_string(),
        confidence: m / total,
    })
}

/// Bin holding the purest instance of `color`: fully saturated and bright
/// at the sector center for hues, minimum saturation for black/grey/white.
pub fn canonical_bin(layout: &BinLayout, color: &str) -> Option<usize> {
    let top_s = layout.saturation - 1;
    let top_v = layout.value - 1;
    let centre = match color {
        "black" => return Some(layout.index(0, 0, 0)),
        "grey" => return Some(layout.index(0, 0, layout.value / 2)),
        "white" => return Some(layout.index(0, 0, top_v)),
        "red" => 0.0,
        "yellow" => 60.0,
        "green" => 120.0,
        "cyan" => 180.0,
        "blue" => 240.0,
        "magenta" => 300.0,
        _ => return None,
    };
    let width = 360.0 / layout.hue as f64;
    let h = ((centre + width / 2.0) / width) as usize % layout.hue;
    Some(layout.index(h, top_s, top_v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDescriptor {
    pub label: String,
    pub descriptor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    examples: Vec<LabeledDescriptor>,
    k: usize,
    base_confidence_threshold: f64,
}

impl KnnModel {
    pub fn new(
        examples: Vec<LabeledDescriptor>,
        k: usize,
        base_confidence_threshold: f64,
    ) -> Result<Self, AnnotatorError> {
        if examples.is_empty() {
            return Err(AnnotatorError::Model("no training examples".into()));
        }
        if k == 0 || k > examples.len() {
            return Err(AnnotatorError::Model(format!(
                "k={k} with {} examples",
                examples.len()
            )));
        }
        if !(0.0..=1.0).contains(&base_confidence_threshold) {
            return Err(AnnotatorError::Model(format!(
                "confidence threshold {base_confidence_threshold} outside [0, 1]"
            )));
        }
        let dim = examples[0].descriptor.len();
        for e in &examples {
            if e.descriptor.len() != dim {
                return Err(AnnotatorError::Model("descriptor lengths differ".into()));
            }
            if e.label.is_empty() {
                return Err(AnnotatorError::Model("empty label".into()));
            }
            if e.descriptor.iter().all(|v| *v == 0.0) || e.descriptor.iter().any(|v| !v.is_finite())
            {
                return Err(AnnotatorError::Model("degenerate training descriptor".into()));
            }
        }
        Ok(Self {
            examples,
            k,
            base_confidence_threshold,
        })
    }

    pub fn dim(&self) -> usize {
        self.examples[0].descriptor.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn base_confidence_threshold(&self) -> f64 {
        self.base_confidence_threshold
    }

    pub fn examples(&self) -> &[LabeledDescriptor] {
        &self.examples
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self, AnnotatorError> {
        self = Self::new(self.examples, self.k, threshold)?;
        Ok(self)
    }

    /// Label among the `k` nearest neighbors (majority, ties to the nearest)
    /// with confidence one minus the nearest neighbor's descriptor distance.
    /// `None` when that confidence falls below the base threshold.
    pub fn classify(&self, descriptor: &[f64]) -> Result<Option<Annotation>, AnnotatorError> {
        if descriptor.len() != self.dim() {
            return Err(AnnotatorError::DescriptorLength {
                expected: self.dim(),
                got: descriptor.len(),
            });
        }
        let mut ranked = Vec::with_capacity(self.examples.len());
        for (i, e) in self.examples.iter().enumerate() {
            let d = dist_descriptor(descriptor, &e.descriptor)
                .map_err(|_| AnnotatorError::BadDescriptor)?;
            ranked.push((d, i));
        }
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let confidence = 1.0 - ranked[0].0;
        if confidence < self.base_confidence_threshold {
            return Ok(None);
        }

        // Vote counts in first-seen order so ties resolve to the nearer label.
        let mut votes: Vec<(&str, usize)> = Vec::new();
        for &(_, i) in &ranked[..self.k] {
            let label = self.examples[i].label.as_str();
            match votes.iter_mut().find(|(l, _)| *l == label) {
                Some((_, n)) => *n += 1,
                None => votes.push((label, 1)),
            }
        }
        let best = votes.iter().map(|(_, n)| *n).max().unwrap_or(0);
        let label = votes.iter().find(|(_, n)| *n == best).unwrap().0;
        Ok(Some(Annotation {
            symbol: label.to_string(),
            confidence,
        }))
    }
}

/// The annotator ensemble queried per symbolic key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Annotators {
    pub layout: BinLayout,
    pub knn: Option<KnnModel>,
}

impl Annotators {
    pub fn new(layout: BinLayout, knn: Option<KnnModel>) -> Self {
        Self { layout, knn }
    }

    /// Runs the annotator responsible for `key` on one hypothesis.
    ///
    /// Malformed inputs yield no annotation rather than an error; a scene
    /// with one broken percept should not stop annotation of the rest.
    pub fn annotate(&self, hyp: &Hypothesis, key: &str) -> Option<Annotation> {
        match key {
            COLOR_KEY => {
                let hist = hyp.percept(HISTOGRAM_KEY)?.as_vector()?;
                color_symbol(hist, &self.layout).ok()
            }
            CLASS_KEY => {
                let knn = self.knn.as_ref()?;
                let d = hyp.percept(DESCRIPTOR_KEY)?.as_vector()?;
                knn.classify(d).ok().flatten()
            }
            _ => {
                let (symbol, confidence) = hyp.percept(key)?.as_symbol()?;
                Some(Annotation {
                    symbol: symbol.to_string(),
                    confidence: confidence.unwrap_or(crate::model::DEFAULT_SYMBOL_CONFIDENCE),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(parts: &[(&str, f64)]) -> Vec<f64> {
        let layout = BinLayout::default();
        let mut h = vec![0.0; layout.len()];
        for (c, m) in parts {
            h[canonical_bin(&layout, c).unwrap()] += m;
        }
        h
    }

    #[test]
    fn every_region_is_reachable() {
        let layout = BinLayout::default();
        for c in COLOR_SYMBOLS {
            let a = color_symbol(&hist(&[(c, 1.0)]), &layout).unwrap();
            assert_eq!(a.symbol, c);
            assert_eq!(a.confidence, 1.0);
        }
    }

    #[test]
    fn color_examples() {
        let layout = BinLayout::default();
        let red = color_symbol(&hist(&[("red", 5.0)]), &layout).unwrap();
        assert_eq!((red.symbol.as_str(), red.confidence), ("red", 1.0));
        let black = color_symbol(&hist(&[("black", 2.0)]), &layout).unwrap();
        assert_eq!((black.symbol.as_str(), black.confidence), ("black", 1.0));
        let split = color_symbol(&hist(&[("red", 60.0), ("blue", 40.0)]), &layout).unwrap();
        assert_eq!(split.symbol, "red");
        assert!((split.confidence - 0.6).abs() < 1e-12);
    }

    #[test]
    fn red_wraps_around_zero_hue() {
        let layout = BinLayout::default();
        let mut h = vec![0.0; layout.len()];
        h[layout.index(layout.hue - 1, 3, 2)] = 1.0;
        assert_eq!(color_symbol(&h, &layout).unwrap().symbol, "red");
    }

    #[test]
    fn color_errors() {
        let layout = BinLayout::default();
        assert!(matches!(
            color_symbol(&vec![0.0; layout.len()], &layout),
            Err(AnnotatorError::BadHistogram)
        ));
        assert!(matches!(
            color_symbol(&[1.0], &layout),
            Err(AnnotatorError::Layout { .. })
        ));
    }

    fn model(examples: &[(&[f64], &str)], k: usize, threshold: f64) -> KnnModel {
        KnnModel::new(
            examples
                .iter()
                .map(|(d, l)| LabeledDescriptor {
                    label: l.to_string(),
                    descriptor: d.to_vec(),
                })
                .collect(),
            k,
            threshold,
        )
        .unwrap()
    }

    #[test]
    fn classify_examples() {
        let m = model(&[(&[1.0, 0.0], "cup"), (&[0.0, 1.0], "bowl")], 1, 0.6);
        let a = m.classify(&[2.0, 0.0]).unwrap().unwrap();
        assert_eq!(a.symbol, "cup");
        assert_eq!(a.confidence, 1.0);

        let single = model(&[(&[1.0, 0.0], "cup")], 1, 0.6);
        assert_eq!(single.classify(&[0.0, 1.0]).unwrap(), None);

        let open = model(&[(&[1.0, 0.0], "cup")], 1, 0.0);
        let a = open.classify(&[0.0, 1.0]).unwrap().unwrap();
        assert!((a.confidence - (1.0 - std::f64::consts::SQRT_2 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn majority_vote_with_nearest_tie_break() {
        let m = model(
            &[
                (&[1.0, 0.1], "a"),
                (&[1.0, 0.3], "b"),
                (&[1.0, 0.35], "b"),
                (&[1.0, 0.2], "a"),
            ],
            3,
            0.0,
        );
        // three nearest to [1, 0]: a (0.1), a (0.2), b (0.3) -> a
        assert_eq!(m.classify(&[1.0, 0.0]).unwrap().unwrap().symbol, "a");
        let tie = model(&[(&[1.0, 0.2], "b"), (&[1.0, 0.1], "a")], 2, 0.0);
        assert_eq!(tie.classify(&[1.0, 0.0]).unwrap().unwrap().symbol, "a");
    }

    #[test]
    fn classify_errors_and_model_validation() {
        let m = model(&[(&[1.0, 0.0], "cup")], 1, 0.6);
        assert!(matches!(
            m.classify(&[1.0, 0.0, 0.0]),
            Err(AnnotatorError::DescriptorLength { .. })
        ));
        assert!(KnnModel::new(vec![], 1, 0.6).is_err());
        let ex = vec![LabeledDescriptor {
            label: "x".into(),
            descriptor: vec![1.0],
        }];
        assert!(KnnModel::new(ex.clone(), 2, 0.6).is_err());
        assert!(KnnModel::new(ex, 1, 1.5).is_err());
    }

    #[test]
    fn raising_threshold_never_adds_annotations() {
        let queries: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let a = i as f64 * 0.06;
                vec![a.cos(), a.sin(), 0.1]
            })
            .collect();
        let mut prev = usize::MAX;
        for t in [0.0, 0.3, 0.6, 0.8, 0.95] {
            let m = model(&[(&[1.0, 0.0, 0.0], "x"), (&[0.0, 0.0, 1.0], "y")], 1, t);
            let n = queries
                .iter()
                .filter(|q| m.classify(q).unwrap().is_some())
                .count();
            assert!(n <= prev);
            prev = n;
        }
    }
}
