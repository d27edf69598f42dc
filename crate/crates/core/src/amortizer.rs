//! Query buffering, newest-first backfill over logged scenes, and symbol
//! integration across an object's past occurrences.
//!
//! A query is first answered on the current scene only ([`answer_now`]),
//! then buffered. During idle time [`backfill`] takes buffered queries in
//! arrival order and, for each, walks the logged scenes from the newest one
//! backwards, running the annotators the query asks for and writing the
//! results into the owning objects' symbol histories at the historical
//! timestamps. [`aggregate_symbol`] later folds the last `ac` occurrences of
//! an object into one answer, ignoring stored results below `cf`.
//!
//! Annotation work is planned against an immutable `&Episode` and applied
//! afterwards through `Episode::record_symbol`, so readers never observe a
//! half-written scene.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotators::Annotators;
use crate::model::{BeliefObject, Episode, HypId, ModelError, ObjectId, SymbolEntry};
use crate::qlang::{self, Query, SymbolView};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("amortization coefficient must be at least 1")]
    Coefficient,
    #[error("confidence threshold must lie in [0, 1], got {0}")]
    Confidence(f64),
    #[error("budget {0} must be non-negative and finite")]
    Budget(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmortizationParams {
    /// Number of most recent occurrences integrated.
    pub ac: usize,
    /// Minimum stored confidence for a result to take part.
    pub cf: f64,
}

impl AmortizationParams {
    pub fn new(ac: usize, cf: f64) -> Result<Self, ParamError> {
        let p = Self { ac, cf };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.ac < 1 {
            return Err(ParamError::Coefficient);
        }
        if !(0.0..=1.0).contains(&self.cf) {
            return Err(ParamError::Confidence(self.cf));
        }
        Ok(())
    }
}

impl Default for AmortizationParams {
    fn default() -> Self {
        Self { ac: 12, cf: 0.62 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub symbol: String,
    pub confidence: f64,
}

/// Confidence-weighted vote over the `key` entries recorded at the object's
/// last `ac` occurrences at or before `at`. Ties go to the symbol seen most
/// recently. The returned confidence is the winner's mean confidence.
pub fn aggregate_symbol(
    obj: &BeliefObject,
    key: &str,
    at: f64,
    params: &AmortizationParams,
) -> Option<Aggregate> {
    let occurrences = obj.occurrences_until(at);
    let window = &occurrences[occurrences.len().saturating_sub(params.ac)..];
    let first = window.first()?.timestamp;
    let entries = obj.symbol_history(key);
    let start = entries.partition_point(|e| e.timestamp < first);

    // (symbol, weight, count, latest timestamp)
    let mut tally: Vec<(&str, f64, usize, f64)> = Vec::new();
    for e in &entries[start..] {
        if e.timestamp > at {
            break;
        }
        if e.confidence < params.cf {
            continue;
        }
        match tally.iter_mut().find(|t| t.0 == e.symbol) {
            Some(t) => {
                t.1 += e.confidence;
                t.2 += 1;
                t.3 = e.timestamp;
            }
            None => tally.push((&e.symbol, e.confidence, 1, e.timestamp)),
        }
    }
    let best = tally
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then(a.3.total_cmp(&b.3)))?;
    Some(Aggregate {
        symbol: best.0.to_string(),
        confidence: best.1 / best.2 as f64,
    })
}

/// [`SymbolView`] backed by [`aggregate_symbol`].
#[derive(Debug, Clone, Copy)]
pub struct Aggregator(pub AmortizationParams);

impl SymbolView for Aggregator {
    fn symbol(&self, obj: &BeliefObject, key: &str, at: f64) -> Option<String> {
        aggregate_symbol(obj, key, at, &self.0).map(|a| a.symbol)
    }
}

/// Abstract work units: one unit buys one annotator pass over one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkBudget {
    pub cost_per_scene: f64,
    available: f64,
    consumed: f64,
}

impl WorkBudget {
    pub fn new(cost_per_scene: f64) -> Result<Self, ParamError> {
        if !(cost_per_scene >= 0.0 && cost_per_scene.is_finite()) {
            return Err(ParamError::Budget("cost_per_scene"));
        }
        Ok(Self {
            cost_per_scene,
            available: 0.0,
            consumed: 0.0,
        })
    }

    pub fn unlimited() -> Self {
        Self {
            cost_per_scene: 0.0,
            available: f64::INFINITY,
            consumed: 0.0,
        }
    }

    pub fn accrue(&mut self, units: f64) {
        if units > 0.0 {
            self.available += units;
        }
    }

    pub fn available(&self) -> f64 {
        self.available
    }

    pub fn consumed(&self) -> f64 {
        self.consumed
    }

    fn try_consume(&mut self, units: f64) -> bool {
        if units > self.available {
            return false;
        }
        self.available -= units;
        self.consumed += units;
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingQuery {
    pub text: String,
    pub keys: Vec<String>,
    pub enqueued_at: f64,
    /// Next scene index to visit, walking towards older scenes. `None`
    /// until the first backfill pass touches the query.
    pub cursor: Option<usize>,
}

/// FIFO of buffered queries.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryQueue {
    pending: VecDeque<PendingQuery>,
}

impl QueryQueue {
    pub fn enqueue(&mut self, query: &Query) {
        self.pending.push_back(PendingQuery {
            text: qlang::print(query),
            keys: query.keys().iter().map(|k| k.to_string()).collect(),
            enqueued_at: query.received_at,
            cursor: None,
        });
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PendingQuery> {
        self.pending.iter()
    }

    pub fn pop(&mut self) -> Option<PendingQuery> {
        self.pending.pop_front()
    }
}

/// (scene, key) pairs whose annotators already ran.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationLedger {
    done: BTreeSet<(usize, String)>,
}

impl AnnotationLedger {
    pub fn contains(&self, scene: usize, key: &str) -> bool {
        self.done.contains(&(scene, key.to_string()))
    }

    pub fn len(&self) -> usize {
        self.done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.done.is_empty()
    }

    fn insert(&mut self, scene: usize, key: &str) {
        self.done.insert((scene, key.to_string()));
    }
}

/// Symbol writes produced by annotating one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolRecord {
    pub oid: ObjectId,
    pub key: String,
    pub entry: SymbolEntry,
}

/// Runs the `keys` annotators over every associated hypothesis of `scene`.
pub fn plan_annotation(
    episode: &Episode,
    scene: usize,
    keys: &[String],
    annotators: &Annotators,
) -> Vec<SymbolRecord> {
    let Some(s) = episode.scene(scene) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for h in s.hypotheses() {
        let Some(oid) = episode.owner(scene, h.id()) else { continue };
        for key in keys {
            if let Some(a) = annotators.annotate(h, key) {
                out.push(SymbolRecord {
                    oid,
                    key: key.clone(),
                    entry: SymbolEntry {
                        timestamp: s.timestamp,
                        symbol: a.symbol,
                        confidence: a.confidence,
                    },
                });
            }
        }
    }
    out
}

pub fn apply_records(episode: &mut Episode, records: Vec<SymbolRecord>) -> Result<usize, ModelError> {
    let mut written = 0;
    for r in records {
        if episode.record_symbol(r.oid, &r.key, r.entry)? {
            written += 1;
        }
    }
    Ok(written)
}

fn annotate_scene(
    episode: &mut Episode,
    ledger: &mut AnnotationLedger,
    scene: usize,
    keys: &[String],
    annotators: &Annotators,
) -> Result<usize, ModelError> {
    let records = plan_annotation(episode, scene, keys, annotators);
    let written = apply_records(episode, records)?;
    for k in keys {
        ledger.insert(scene, k);
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub oid: ObjectId,
    pub scene: usize,
    pub hyp: HypId,
}

/// Answers `query` from the current scene: annotates its associated
/// hypotheses for the query's keys, then matches the objects present in it
/// against their aggregated symbols. Ranged queries match any occurrence
/// inside the range instead.
pub fn answer_now(
    query: &Query,
    episode: &mut Episode,
    annotators: &Annotators,
    ledger: &mut AnnotationLedger,
    params: &AmortizationParams,
) -> Result<Vec<Answer>, ModelError> {
    let Some(current) = episode.current_scene() else {
        return Ok(Vec::new());
    };
    let keys: Vec<String> = query
        .keys()
        .into_iter()
        .filter(|k| !ledger.contains(current, k))
        .map(str::to_string)
        .collect();
    if !keys.is_empty() {
        annotate_scene(episode, ledger, current, &keys, annotators)?;
    }
    Ok(evaluate(query, episode, current, &Aggregator(*params)))
}

/// Matches `query` without running any annotator.
pub fn evaluate(query: &Query, episode: &Episode, current: usize, view: &dyn SymbolView) -> Vec<Answer> {
    let Some(scene) = episode.scene(current) else {
        return Vec::new();
    };
    let now = scene.timestamp;
    let mut out = Vec::new();
    match query.range {
        None => {
            for h in scene.hypotheses() {
                let Some(oid) = episode.owner(current, h.id()) else { continue };
                let obj = episode.object(oid).expect("owner refers to a belief object");
                if qlang::matches(query, obj, now, view) {
                    out.push(Answer {
                        oid,
                        scene: current,
                        hyp: h.id(),
                    });
                }
            }
        }
        Some((from, to)) => {
            for obj in episode.belief() {
                let hit = obj.occurrences_until(now.min(to)).iter().rev().find(|o| {
                    o.timestamp >= from && qlang::matches(query, obj, o.timestamp, view)
                });
                if let Some(o) = hit {
                    out.push(Answer {
                        oid: obj.oid(),
                        scene: o.scene,
                        hyp: o.hyp,
                    });
                }
            }
        }
    }
    out.sort_by_key(|a| (a.oid, a.scene));
    out
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BackfillReport {
    /// (scene, keys) annotated in visit order.
    pub annotated: Vec<(usize, Vec<String>)>,
    pub consumed: f64,
    pub symbols_written: usize,
    pub queries_completed: usize,
}

/// Spends `budget` on buffered queries, oldest query first, newest scene
/// first. Scenes already annotated for a key, and scenes that never went
/// through resolution, cost nothing. Stops when the next scene is
/// unaffordable; cursors persist across calls.
pub fn backfill(
    queue: &mut QueryQueue,
    episode: &mut Episode,
    budget: &mut WorkBudget,
    annotators: &Annotators,
    ledger: &mut AnnotationLedger,
) -> Result<BackfillReport, ModelError> {
    let mut report = BackfillReport::default();
    let start = budget.consumed();
    while let Some(front) = queue.pending.front_mut() {
        let mut cursor = match front.cursor {
            Some(c) => Some(c),
            None => episode.latest_scene_until(front.enqueued_at),
        };
        let mut stalled = false;
        while let Some(idx) = cursor {
            let keys: Vec<String> = front
                .keys
                .iter()
                .filter(|k| !ledger.contains(idx, k))
                .cloned()
                .collect();
            let has_owned = episode.is_resolved(idx)
                && episode
                    .scene(idx)
                    .is_some_and(|s| s.hypotheses().iter().any(|h| episode.owner(idx, h.id()).is_some()));
            if !keys.is_empty() && has_owned {
                let cost = keys.len() as f64 * budget.cost_per_scene;
                if !budget.try_consume(cost) {
                    stalled = true;
                    break;
                }
                report.symbols_written += annotate_scene(episode, ledger, idx, &keys, annotators)?;
                report.annotated.push((idx, keys));
            }
            cursor = idx.checked_sub(1);
        }
        if stalled {
            front.cursor = cursor;
            break;
        }
        queue.pending.pop_front();
        report.queries_completed += 1;
    }
    report.consumed = budget.consumed() - start;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotators::{KnnModel, LabeledDescriptor};
    use crate::model::fixtures::*;
    use crate::model::{AssociationTarget, Percept};
    use crate::qlang::parse;

    fn entry(t: f64, s: &str, c: f64) -> SymbolEntry {
        SymbolEntry {
            timestamp: t,
            symbol: s.into(),
            confidence: c,
        }
    }

    /// One object seen at t = 1..=n with the given class entries.
    fn tracked(n: usize, classes: &[(f64, &str, f64)]) -> Episode {
        let mut ep = Episode::new();
        for t in 1..=n {
            ep.append_scene(scene(t as f64, vec![hyp(0, pose_at(0.0, 0.0, 0.0), vec![])]))
                .unwrap();
            let target = if t == 1 {
                AssociationTarget::Fresh
            } else {
                AssociationTarget::Existing(ObjectId(0))
            };
            ep.associate(target, t as f64, HypId(0)).unwrap();
        }
        for (t, s, c) in classes {
            ep.record_symbol(ObjectId(0), "class", entry(*t, s, *c)).unwrap();
        }
        ep
    }

    #[test]
    fn aggregate_examples() {
        let p = AmortizationParams::new(12, 0.62).unwrap();
        let ep = tracked(1, &[(1.0, "sigg_bottle", 0.9)]);
        let a = aggregate_symbol(&ep.belief()[0], "class", 1.0, &p).unwrap();
        assert_eq!(a.symbol, "sigg_bottle");

        let weak = tracked(3, &[(1.0, "a", 0.5), (2.0, "a", 0.61)]);
        assert_eq!(aggregate_symbol(&weak.belief()[0], "class", 3.0, &p), None);

        let mixed = tracked(3, &[(1.0, "A", 0.7), (2.0, "B", 0.65), (3.0, "A", 0.8)]);
        let a = aggregate_symbol(&mixed.belief()[0], "class", 3.0, &p).unwrap();
        assert_eq!(a.symbol, "A");
        assert!((a.confidence - 0.75).abs() < 1e-12);
    }

    #[test]
    fn window_counts_occurrences_not_entries() {
        let ep = tracked(5, &[(1.0, "old", 0.9), (5.0, "new", 0.3)]);
        let obj = &ep.belief()[0];
        let short = AmortizationParams::new(4, 0.6).unwrap();
        assert_eq!(aggregate_symbol(obj, "class", 5.0, &short), None);
        let long = AmortizationParams::new(5, 0.6).unwrap();
        assert_eq!(aggregate_symbol(obj, "class", 5.0, &long).unwrap().symbol, "old");
        // entries after `at` are invisible
        assert_eq!(aggregate_symbol(obj, "class", 0.5, &long), None);
    }

    #[test]
    fn ties_go_to_the_most_recent_symbol() {
        let ep = tracked(2, &[(1.0, "a", 0.8), (2.0, "b", 0.8)]);
        let p = AmortizationParams::new(2, 0.0).unwrap();
        assert_eq!(aggregate_symbol(&ep.belief()[0], "class", 2.0, &p).unwrap().symbol, "b");
    }

    #[test]
    fn params_validation() {
        assert!(AmortizationParams::new(0, 0.5).is_err());
        assert!(AmortizationParams::new(1, 1.2).is_err());
        assert!(WorkBudget::new(-1.0).is_err());
    }

    #[test]
    fn queue_is_fifo() {
        let mut q = QueryQueue::default();
        q.enqueue(&parse("(detect (an object (color red)))").unwrap().at(1.0));
        q.enqueue(&parse("(detect (an object (shape flat)))").unwrap().at(2.0));
        assert_eq!(q.len(), 2);
        assert_eq!(q.pop().unwrap().keys, vec!["color"]);
        assert_eq!(q.pop().unwrap().keys, vec!["shape"]);
        assert!(q.is_empty());
    }

    fn knn() -> Annotators {
        let model = KnnModel::new(
            vec![
                LabeledDescriptor { label: "cup".into(), descriptor: vec![1.0, 0.0, 0.0] },
                LabeledDescriptor { label: "bowl".into(), descriptor: vec![0.0, 1.0, 0.0] },
            ],
            1,
            0.6,
        )
        .unwrap();
        Annotators::new(Default::default(), Some(model))
    }

    fn described(t: f64, descriptor: [f64; 3]) -> crate::model::Scene {
        scene(
            t,
            vec![hyp(
                0,
                pose_at(0.0, 0.0, 0.0),
                vec![Percept::vector("descriptor", descriptor.to_vec()).unwrap()],
            )],
        )
    }

    /// `n` resolved scenes of one object, all clearly a cup.
    fn resolved_cups(n: usize) -> Episode {
        let cfg = crate::resolution::ResolutionConfig::default();
        let mut ep = Episode::new();
        for t in 1..=n {
            let idx = ep.append_scene(described(t as f64, [1.0, 0.0, 0.0])).unwrap();
            crate::resolution::resolve_scene(&mut ep, idx, &[HypId(0)], &cfg).unwrap();
        }
        ep
    }

    #[test]
    fn answer_now_examples() {
        let ann = knn();
        let params = AmortizationParams::default();
        let mut ledger = AnnotationLedger::default();
        let q = parse("(detect (an object (class cup)))").unwrap();

        let mut empty = Episode::new();
        assert!(answer_now(&q, &mut empty, &ann, &mut ledger, &params).unwrap().is_empty());

        let mut ep = resolved_cups(2);
        let got = answer_now(&q, &mut ep, &ann, &mut ledger, &params).unwrap();
        assert_eq!(got, vec![Answer { oid: ObjectId(0), scene: 1, hyp: HypId(0) }]);
        // only the current scene was annotated
        assert_eq!(ep.belief()[0].symbol_history("class").len(), 1);

        // orthogonal descriptor: classifier abstains, nothing in the past
        let cfg = crate::resolution::ResolutionConfig::default();
        let mut ep = Episode::new();
        let idx = ep.append_scene(described(1.0, [0.0, 0.0, 1.0])).unwrap();
        crate::resolution::resolve_scene(&mut ep, idx, &[HypId(0)], &cfg).unwrap();
        let mut ledger = AnnotationLedger::default();
        assert!(answer_now(&q, &mut ep, &ann, &mut ledger, &params).unwrap().is_empty());
    }

    #[test]
    fn backfill_spends_budget_newest_first() {
        let ann = knn();
        let mut ep = resolved_cups(10);
        let mut ledger = AnnotationLedger::default();
        let mut queue = QueryQueue::default();
        queue.enqueue(&parse("(detect (an object (class cup)))").unwrap().at(10.0));

        let mut budget = WorkBudget::new(1.0).unwrap();
        let r = backfill(&mut queue, &mut ep, &mut budget, &ann, &mut ledger).unwrap();
        assert!(r.annotated.is_empty());
        assert_eq!(ep.belief()[0].symbol_history("class").len(), 0);

        budget.accrue(3.0);
        let r = backfill(&mut queue, &mut ep, &mut budget, &ann, &mut ledger).unwrap();
        let visited: Vec<usize> = r.annotated.iter().map(|a| a.0).collect();
        assert_eq!(visited, vec![9, 8, 7]);
        assert_eq!(r.consumed, 3.0);
        assert_eq!(budget.available(), 0.0);
        let times: Vec<f64> = ep.belief()[0]
            .symbol_history("class")
            .iter()
            .map(|e| e.timestamp)
            .collect();
        assert_eq!(times, vec![8.0, 9.0, 10.0]);

        // cursor persists: the next pass continues with older scenes
        budget.accrue(2.0);
        let r = backfill(&mut queue, &mut ep, &mut budget, &ann, &mut ledger).unwrap();
        assert_eq!(r.annotated.iter().map(|a| a.0).collect::<Vec<_>>(), vec![6, 5]);
        assert_eq!(queue.len(), 1);
    }

    #[test]
    fn shared_keys_are_not_annotated_twice() {
        let ann = knn();
        let mut ep = resolved_cups(4);
        let mut ledger = AnnotationLedger::default();
        let mut queue = QueryQueue::default();
        queue.enqueue(&parse("(detect (an object (class cup)))").unwrap().at(4.0));
        queue.enqueue(&parse("(detect (an object (class bowl)))").unwrap().at(4.0));
        let mut budget = WorkBudget::new(1.0).unwrap();
        budget.accrue(100.0);
        let r = backfill(&mut queue, &mut ep, &mut budget, &ann, &mut ledger).unwrap();
        assert_eq!(r.annotated.len(), 4);
        assert_eq!(r.consumed, 4.0);
        assert_eq!(r.queries_completed, 2);
        assert_eq!(ep.belief()[0].symbol_history("class").len(), 4);
    }

    #[test]
    fn ranged_queries_look_into_the_past() {
        let ep = tracked(3, &[(1.0, "cup", 0.9)]);
        let p = AmortizationParams::new(1, 0.6).unwrap();
        let q = parse("(detect (an object (class cup)) (between 0 1.5))").unwrap();
        let got = evaluate(&q, &ep, 2, &Aggregator(p));
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].scene, 0);
        let now = parse("(detect (an object (class cup)))").unwrap();
        assert!(evaluate(&now, &ep, 2, &Aggregator(p)).is_empty());
    }
}
