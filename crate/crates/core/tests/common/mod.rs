//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use proptest::prelude::*;

use beliefstate::annotators::Annotators;
use beliefstate::evalkit::GroundTruth;
use beliefstate::model::Episode;
use beliefstate::qlang::{default_keys, Designator, Query, Value, Verb};
use beliefstate::simkit::{SimEvent, SimSpec};

/// Desk episode stretched to `frames_per_block` frames between events, with
/// mild pose and descriptor noise so consecutive frames differ.
pub fn long_desk(seed: u64, frames_per_block: usize, dropout: f64) -> SimSpec {
    let mut spec = SimSpec::desk_episode(seed);
    for e in &mut spec.events {
        if let SimEvent::Observe { count } = e {
            *count = frames_per_block;
        }
    }
    spec.noise.pose = 0.003;
    spec.noise.descriptor = 0.02;
    spec.classifier_dropout = dropout;
    spec
}

/// Scored hypothesis: (scene index, timestamp, truth, brute-force prediction).
pub type Prediction = (usize, f64, String, Option<String>);

/// Re-annotates every occurrence in the object's history from the raw
/// hypothesis and votes over the last `ac` of them at or before the scored
/// timestamp. Shares nothing with the library's stored symbol histories.
pub fn brute_force_predictions(
    episode: &Episode,
    gt: &GroundTruth,
    annotators: &Annotators,
    key: &str,
    ac: usize,
    cf: f64,
) -> Vec<Prediction> {
    let mut out = Vec::new();
    for (t, hyp, labels) in gt.iter() {
        let Some(scene) = episode.scenes().iter().position(|s| s.timestamp == t) else {
            continue;
        };
        let Some(oid) = episode.owner(scene, hyp) else { continue };
        let obj = &episode.belief()[oid.0 as usize];
        let past: Vec<_> = obj.history().iter().filter(|o| o.timestamp <= t).collect();
        let window = &past[past.len().saturating_sub(ac)..];
        // (symbol, summed confidence, latest timestamp)
        let mut votes: Vec<(String, f64, f64)> = Vec::new();
        for occ in window {
            let h = episode.scenes()[occ.scene]
                .hypotheses()
                .iter()
                .find(|h| h.id() == occ.hyp)
                .unwrap();
            let Some(a) = annotators.annotate(h, key) else { continue };
            if a.confidence < cf {
                continue;
            }
            match votes.iter_mut().find(|v| v.0 == a.symbol) {
                Some(v) => {
                    v.1 += a.confidence;
                    v.2 = occ.timestamp;
                }
                None => votes.push((a.symbol, a.confidence, occ.timestamp)),
            }
        }
        let mut best: Option<&(String, f64, f64)> = None;
        for v in &votes {
            best = match best {
                None => Some(v),
                Some(b) if v.1 > b.1 || (v.1 == b.1 && v.2 > b.2) => Some(v),
                keep => keep,
            };
        }
        let truth = match key {
            "class" => labels.class.clone(),
            "color" => labels.color.clone(),
            _ => labels.shape.clone(),
        };
        out.push((scene, t, truth, best.map(|b| b.0.clone())));
    }
    out
}

/// (coverage, accuracy) of a prediction list.
pub fn coverage_accuracy(preds: &[Prediction]) -> (f64, f64) {
    let annotated = preds.iter().filter(|p| p.3.is_some()).count();
    let correct = preds
        .iter()
        .filter(|p| p.3.as_deref().is_some_and(|s| s.eq_ignore_ascii_case(&p.2)))
        .count();
    let coverage = annotated as f64 / preds.len() as f64;
    let accuracy = if annotated == 0 {
        0.0
    } else {
        correct as f64 / annotated as f64
    };
    (coverage, accuracy)
}

/// Exhaustive crossing-line search: for each cf, every ac whose gap equals
/// the minimum gap; the smallest of those; then the largest `ac + cf`,
/// higher cf on ties.
pub fn brute_force_selection(points: &[(usize, f64, f64, f64)]) -> (usize, f64) {
    let cfs: BTreeSet<u64> = points.iter().map(|p| p.1.to_bits()).collect();
    let mut crossings = Vec::new();
    for cf in cfs {
        let row: Vec<_> = points.iter().filter(|p| p.1.to_bits() == cf).collect();
        let min_gap = row
            .iter()
            .map(|p| (p.2 - p.3).abs())
            .fold(f64::INFINITY, f64::min);
        let ac = row
            .iter()
            .filter(|p| (p.2 - p.3).abs() == min_gap)
            .map(|p| p.0)
            .min()
            .unwrap();
        crossings.push((ac, f64::from_bits(cf)));
    }
    let mut best = crossings[0];
    for c in &crossings[1..] {
        let (s, b) = (c.0 as f64 + c.1, best.0 as f64 + best.1);
        if s > b || (s == b && c.1 > best.1) {
            best = *c;
        }
    }
    best
}

/// Naive Laplacian variance with an explicit 3x3 kernel and two-pass mean.
pub fn naive_blur(rows: &[Vec<f64>]) -> f64 {
    const K: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];
    let mut responses = Vec::new();
    for r in 1..rows.len() - 1 {
        for c in 1..rows[0].len() - 1 {
            let mut acc = 0.0;
            for (dr, krow) in K.iter().enumerate() {
                for (dc, k) in krow.iter().enumerate() {
                    acc += k * rows[r + dr - 1][c + dc - 1];
                }
            }
            responses.push(acc);
        }
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    responses.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_-]{0,7}"
}

fn key() -> impl Strategy<Value = String> {
    let keys: Vec<String> = default_keys().into_iter().collect();
    proptest::sample::select(keys)
}

pub fn designator(depth: u32) -> BoxedStrategy<Designator> {
    let leaf = (key(), ident()).prop_map(|(k, v)| (k, Value::Symbol(v)));
    let pair = if depth == 0 {
        leaf.boxed()
    } else {
        prop_oneof![
            3 => leaf,
            1 => (key(), designator(depth - 1)).prop_map(|(k, d)| (k, Value::Nested(d))),
        ]
        .boxed()
    };
    let min = if depth == 3 { 1 } else { 0 };
    (ident(), ident(), proptest::collection::vec(pair, min..4))
        .prop_map(|(article, noun, pairs)| Designator {
            article,
            noun,
            pairs,
        })
        .boxed()
}

pub fn query_tree() -> impl Strategy<Value = Query> {
    let range = proptest::option::of(
        (-1.0e6..1.0e6f64, 0.0..1.0e6f64).prop_map(|(from, span)| (from, from + span)),
    );
    (designator(3), range).prop_map(|(designator, range)| Query {
        verb: Verb::Detect,
        designator,
        range,
        received_at: 0.0,
    })
}
