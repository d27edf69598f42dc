//! Replay loop: filters, resolution, budget accrual, query answering and
//! backfill, in log order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::Config;
use super::io::ScriptEntry;
use super::{HarnessError, Result};
use crate::amortizer::{
    aggregate_symbol, answer_now, backfill, evaluate, Aggregate, Aggregator, AmortizationParams,
    AnnotationLedger, Answer, QueryQueue, WorkBudget,
};
use crate::annotators::Annotators;
use crate::filters::{admitted_hypotheses, should_process, Decision, FilterConfig, SkipReason, TaskHint};
use crate::model::{Episode, ObjectId, Pose, Scene};
use crate::qlang::{self, Query};
use crate::resolution::{resolve_scene, ResolutionConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDecision {
    pub scene: usize,
    pub timestamp: f64,
    pub decision: Decision,
    pub admitted: usize,
    pub fast_matched: usize,
    pub merged: usize,
    pub created: usize,
}

/// Budget movement at one point of the replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub timestamp: f64,
    pub accrued: f64,
    pub spent: f64,
    pub available: f64,
    pub scenes_annotated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub line: usize,
    pub timestamp: f64,
    pub query: String,
    pub answers: Vec<Answer>,
    /// What the current scene alone supports.
    pub one_shot: Vec<Answer>,
    pub changed_by_amortization: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub scenes: usize,
    pub processed: usize,
    pub skipped: BTreeMap<SkipReason, usize>,
    pub objects: usize,
    pub associations: usize,
    pub budget_consumed: f64,
    pub queries_pending: usize,
    pub decisions: Vec<SceneDecision>,
    pub budget: Vec<BudgetEntry>,
    pub transcript: Vec<TranscriptEntry>,
}

impl RunReport {
    pub fn skipped(&self, reason: SkipReason) -> usize {
        self.skipped.get(&reason).copied().unwrap_or(0)
    }
}

pub struct Engine {
    resolution: ResolutionConfig,
    gates: FilterConfig,
    params: AmortizationParams,
    rate: f64,
    busy_interval: f64,
    backfill_enabled: bool,
    annotators: Annotators,
    episode: Episode,
    queue: QueryQueue,
    ledger: AnnotationLedger,
    budget: WorkBudget,
    /// Asked at every processed scene, never buffered.
    standing: Option<Query>,
    report: RunReport,
}

impl Engine {
    pub fn new(cfg: &Config, annotators: Annotators) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            resolution: cfg.resolution(),
            gates: cfg.filter_gates(),
            params: cfg.amortization,
            rate: cfg.budget.rate,
            busy_interval: cfg.budget.busy_interval,
            backfill_enabled: cfg.budget.backfill,
            annotators,
            episode: Episode::new(),
            queue: QueryQueue::default(),
            ledger: AnnotationLedger::default(),
            budget: WorkBudget::new(cfg.budget.cost_per_scene).map_err(HarnessError::validation)?,
            standing: None,
            report: RunReport::default(),
        })
    }

    pub fn with_standing_query(mut self, query: Query) -> Self {
        self.standing = Some(query);
        self
    }

    pub fn episode(&self) -> &Episode {
        &self.episode
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    pub fn annotators(&self) -> &Annotators {
        &self.annotators
    }

    /// Replays `scenes`, answering each script query once the log has
    /// reached its timestamp.
    pub fn run(&mut self, scenes: Vec<Scene>, script: &[ScriptEntry]) -> Result<()> {
        let mut pending = script.iter().peekable();
        for scene in scenes {
            while let Some(q) = pending.next_if(|q| q.timestamp < scene.timestamp) {
                self.ask(q)?;
            }
            self.step(scene)?;
        }
        for q in pending {
            self.ask(q)?;
        }
        Ok(())
    }

    pub fn step(&mut self, scene: Scene) -> Result<()> {
        let gap = self
            .episode
            .scenes()
            .last()
            .map_or(0.0, |s| scene.timestamp - s.timestamp);
        let idx = self.episode.append_scene(scene)?;
        let (decision, admitted, timestamp) = {
            let s = &self.episode.scenes()[idx];
            let prev = idx.checked_sub(1).and_then(|i| self.episode.scene(i));
            let d = should_process(
                s,
                prev,
                &self.gates,
                TaskHint::from_scene(s),
                &self.resolution.metrics,
            );
            let admitted = match d {
                Decision::Process => admitted_hypotheses(s, &self.gates),
                Decision::Skip(_) => Vec::new(),
            };
            (d, admitted, s.timestamp)
        };

        let idle = match decision {
            Decision::Process => (gap - self.busy_interval).max(0.0),
            Decision::Skip(_) => gap,
        };
        let accrued = self.rate * idle;
        self.budget.accrue(accrued);

        let mut row = SceneDecision {
            scene: idx,
            timestamp,
            decision,
            admitted: admitted.len(),
            fast_matched: 0,
            merged: 0,
            created: 0,
        };
        match decision {
            Decision::Process => {
                let r = resolve_scene(&mut self.episode, idx, &admitted, &self.resolution)?;
                row.fast_matched = r.fast.len();
                row.merged = r.merged.len();
                row.created = r.created.len();
                self.report.processed += 1;
                self.report.associations += r.associations();
                if let Some(q) = &self.standing {
                    let q = q.clone().at(timestamp);
                    answer_now(&q, &mut self.episode, &self.annotators, &mut self.ledger, &self.params)?;
                }
            }
            Decision::Skip(reason) => *self.report.skipped.entry(reason).or_default() += 1,
        }
        self.report.scenes += 1;
        self.report.decisions.push(row);
        self.spend(timestamp, accrued)
    }

    fn spend(&mut self, timestamp: f64, accrued: f64) -> Result<()> {
        let (spent, annotated) = if self.backfill_enabled {
            let r = backfill(
                &mut self.queue,
                &mut self.episode,
                &mut self.budget,
                &self.annotators,
                &mut self.ledger,
            )?;
            (r.consumed, r.annotated.len())
        } else {
            (0.0, 0)
        };
        self.report.budget_consumed += spent;
        self.report.budget.push(BudgetEntry {
            timestamp,
            accrued,
            spent,
            available: self.budget.available(),
            scenes_annotated: annotated,
        });
        self.sync_counts();
        Ok(())
    }

    /// Answers one script query now and buffers it for backfill.
    pub fn ask(&mut self, entry: &ScriptEntry) -> Result<&TranscriptEntry> {
        let query = entry.query.clone().at(entry.timestamp);
        let answers = answer_now(
            &query,
            &mut self.episode,
            &self.annotators,
            &mut self.ledger,
            &self.params,
        )?;
        let one_shot = match self.episode.current_scene() {
            Some(current) => {
                let single = AmortizationParams {
                    ac: 1,
                    cf: self.params.cf,
                };
                evaluate(&query, &self.episode, current, &Aggregator(single))
            }
            None => Vec::new(),
        };
        self.queue.enqueue(&query);
        self.report.transcript.push(TranscriptEntry {
            line: entry.line,
            timestamp: entry.timestamp,
            query: qlang::print(&query),
            changed_by_amortization: answers != one_shot,
            answers,
            one_shot,
        });
        self.sync_counts();
        Ok(self.report.transcript.last().expect("just pushed"))
    }

    /// Annotates every resolved scene for `keys`, ignoring the budget.
    pub fn annotate_all(&mut self, keys: &[&str]) -> Result<()> {
        let Some(last) = self.episode.scenes().last() else {
            return Ok(());
        };
        let text = format!(
            "(detect (an object {}))",
            keys.iter().map(|k| format!("({k} any)")).collect::<String>()
        );
        let query = qlang::parse(&text)
            .map_err(|e| HarnessError::Validation(format!("annotation keys: {e}")))?
            .at(last.timestamp);
        let mut queue = QueryQueue::default();
        queue.enqueue(&query);
        backfill(
            &mut queue,
            &mut self.episode,
            &mut WorkBudget::unlimited(),
            &self.annotators,
            &mut self.ledger,
        )?;
        Ok(())
    }

    fn sync_counts(&mut self) {
        self.report.objects = self.episode.belief().len();
        self.report.queries_pending = self.queue.len();
    }

    pub fn finish(mut self) -> (Episode, RunReport) {
        self.sync_counts();
        (self.episode, self.report)
    }
}

/// One belief object as shown by `inspect`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub oid: ObjectId,
    pub occurrences: usize,
    pub first_seen: f64,
    pub last_seen: f64,
    pub last_pose: Option<Pose>,
    pub symbols: BTreeMap<String, Aggregate>,
}

pub fn summarize(episode: &Episode, params: &AmortizationParams) -> Vec<ObjectSummary> {
    episode
        .belief()
        .iter()
        .map(|o| {
            let symbols = o
                .symbol_keys()
                .filter_map(|k| {
                    aggregate_symbol(o, k, o.last_seen(), params).map(|a| (k.to_string(), a))
                })
                .collect();
            ObjectSummary {
                oid: o.oid(),
                occurrences: o.history().len(),
                first_seen: o.history().first().map_or(o.last_seen(), |h| h.timestamp),
                last_seen: o.last_seen(),
                last_pose: o.last_pose(),
                symbols,
            }
        })
        .collect()
}
