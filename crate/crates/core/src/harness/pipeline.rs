//! End-to-end runs shared by the CLI and the tests.

use serde::Serialize;

use super::config::Config;
use super::engine::{Engine, RunReport};
use super::io::{self, ScriptEntry};
use super::{HarnessError, Result};
use crate::annotators::{Annotators, LabeledDescriptor};
use crate::evalkit::{grid_search, score, EvalMode, EvalReport, GridSearch, GroundTruth, SYMBOL_KEYS};
use crate::model::{Episode, Scene};
use crate::qlang;
use crate::simkit::SimSpec;

/// How symbol histories are filled before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preparation {
    /// Replay, then annotate every resolved scene without a budget limit.
    FullBackfill,
    /// Ask for every scored key at each processed scene, never backfill.
    AnswerAsYouGo,
}

pub fn replay(
    scenes: Vec<Scene>,
    cfg: &Config,
    annotators: Annotators,
    script: &[ScriptEntry],
) -> Result<(Episode, RunReport)> {
    let mut engine = Engine::new(cfg, annotators)?;
    engine.run(scenes, script)?;
    Ok(engine.finish())
}

/// Replays `scenes` and fills symbol histories for the scored keys.
pub fn prepare(
    scenes: Vec<Scene>,
    cfg: &Config,
    annotators: Annotators,
    how: Preparation,
) -> Result<(Episode, RunReport)> {
    let mut cfg = cfg.clone();
    let mut engine = match how {
        Preparation::FullBackfill => Engine::new(&cfg, annotators)?,
        Preparation::AnswerAsYouGo => {
            cfg.budget.backfill = false;
            let text = format!(
                "(detect (an object {}))",
                SYMBOL_KEYS.iter().map(|k| format!("({k} any)")).collect::<String>()
            );
            let q = qlang::parse(&text).map_err(HarnessError::validation)?;
            Engine::new(&cfg, annotators)?.with_standing_query(q)
        }
    };
    engine.run(scenes, &[])?;
    if how == Preparation::FullBackfill {
        engine.annotate_all(&SYMBOL_KEYS)?;
    }
    Ok(engine.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub one_shot: EvalReport,
    pub amortized: EvalReport,
}

pub fn evaluate(
    episode: &Episode,
    gt: &GroundTruth,
    annotators: &Annotators,
    cfg: &Config,
) -> Result<Evaluation> {
    let p = cfg.amortization;
    let run = |mode| score(episode, gt, annotators, &p, mode).map_err(HarnessError::validation);
    Ok(Evaluation {
        one_shot: run(EvalMode::OneShot)?,
        amortized: run(EvalMode::Amortized)?,
    })
}

pub fn grid(
    episode: &Episode,
    gt: &GroundTruth,
    annotators: &Annotators,
    cfg: &Config,
) -> Result<GridSearch> {
    grid_search(episode, gt, annotators, &cfg.eval.acs, &cfg.eval.cfs, cfg.eval.rule)
        .map_err(HarnessError::validation)
}

/// Every artifact of one simulate → replay → query → eval run, as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutputs {
    pub log: String,
    pub ground_truth: String,
    pub knn: String,
    pub report: String,
    pub transcript: String,
    pub eval: String,
}

pub fn full_pipeline(spec: &SimSpec, cfg: &Config, script: &str) -> Result<PipelineOutputs> {
    let sim = spec.generate().map_err(HarnessError::validation)?;
    let log = io::format_scene_log(&sim.scenes);
    let ground_truth = io::format_ground_truth(&sim.ground_truth);
    let knn = io::format_knn(&sim.knn_examples);

    // Downstream stages read the serialized artifacts, as the CLI would.
    let scenes = io::parse_scene_log(&log, "log")?;
    let gt = io::parse_ground_truth(&ground_truth, "gt")?;
    let examples: Vec<LabeledDescriptor> = io::parse_knn(&knn, "knn")?;
    let script = io::parse_script(script, "script")?;
    let annotators = cfg.annotators(Some(examples))?;

    let (_, report) = replay(scenes.clone(), cfg, annotators.clone(), &script)?;
    let transcript = transcript_lines(&report);
    let (episode, _) = prepare(scenes, cfg, annotators.clone(), Preparation::FullBackfill)?;
    let eval = evaluate(&episode, &gt, &annotators, cfg)?;
    Ok(PipelineOutputs {
        log,
        ground_truth,
        knn,
        report: to_json(&report),
        transcript,
        eval: to_json(&eval),
    })
}

pub fn transcript_lines(report: &RunReport) -> String {
    let mut out = String::new();
    for t in &report.transcript {
        out.push_str(&serde_json::to_string(t).expect("transcript serializes"));
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Fixed-width table of one evaluation.
pub fn eval_table(eval: &Evaluation) -> String {
    let mut out = format!(
        "{:<10} {:<6} {:>8} {:>9} {:>7} {:>8}\n",
        "mode", "key", "accuracy", "precision", "recall", "coverage"
    );
    for report in [&eval.one_shot, &eval.amortized] {
        for key in SYMBOL_KEYS {
            let s = report.stats(key).expect("scored key");
            out.push_str(&format!(
                "{:<10} {:<6} {:>8.4} {:>9.4} {:>7.4} {:>8.4}\n",
                report.mode.as_str(),
                key,
                s.accuracy,
                s.precision,
                s.recall,
                s.coverage
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pipeline_is_deterministic() {
        let mut spec = SimSpec::desk_episode(21);
        spec.noise.pose = 0.005;
        spec.classifier_dropout = 0.2;
        let script = "5.5 (detect (an object (class mug)))\n40 (detect (an object (color red)))\n";
        let a = full_pipeline(&spec, &Config::default(), script).unwrap();
        let b = full_pipeline(&spec, &Config::default(), script).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.transcript.lines().count(), 2);
    }

    #[test]
    fn table_lists_both_modes() {
        let spec = SimSpec::desk_episode(0);
        let sim = spec.generate().unwrap();
        let cfg = Config::default();
        let annotators = cfg.annotators(Some(sim.knn_examples)).unwrap();
        let (ep, _) = prepare(sim.scenes, &cfg, annotators.clone(), Preparation::FullBackfill).unwrap();
        let eval = evaluate(&ep, &sim.ground_truth, &annotators, &cfg).unwrap();
        let table = eval_table(&eval);
        assert_eq!(table.lines().count(), 7);
        assert_eq!(eval.one_shot.coverage, 1.0);
    }
}
