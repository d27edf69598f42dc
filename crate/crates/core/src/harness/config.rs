//! TOML run configuration. Every section is optional; missing keys take
//! their defaults. Use `inf` to switch off a gate that only triggers above
//! a threshold (e.g. `motion_gate = inf`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::amortizer::{AmortizationParams, ParamError, WorkBudget};
use crate::annotators::{Annotators, BinLayout, KnnModel, LabeledDescriptor};
use crate::evalkit::SelectionRule;
use crate::filters::FilterConfig;
use crate::metrics::{MetricRegistry, WeightTable, DEFAULT_POSE_SCALE};
use crate::resolution::ResolutionConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub weights: WeightTable,
    pub resolution: ResolutionSection,
    pub filters: FiltersSection,
    pub amortization: AmortizationParams,
    pub budget: BudgetConfig,
    pub annotators: AnnotatorConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolutionSection {
    pub sim_threshold: f64,
    pub fastmatch_pose_gate: f64,
    pub fastmatch_time_gate: f64,
    /// Translation at which the pose distance saturates is `1 / pose_scale`.
    pub pose_scale: f64,
}

impl Default for ResolutionSection {
    fn default() -> Self {
        let r = ResolutionConfig::default();
        Self {
            sim_threshold: r.sim_threshold,
            fastmatch_pose_gate: r.fastmatch_pose_gate,
            fastmatch_time_gate: r.fastmatch_time_gate,
            pose_scale: DEFAULT_POSE_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiltersSection {
    /// Master switch; `false` processes every scene and admits every
    /// hypothesis.
    pub enabled: bool,
    #[serde(flatten)]
    pub gates: FilterConfig,
}

impl Default for FiltersSection {
    fn default() -> Self {
        Self {
            enabled: true,
            gates: FilterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    /// Work units accrued per second of idle or skipped time.
    pub rate: f64,
    pub cost_per_scene: f64,
    /// Seconds of a processed scene's interval spent on resolution.
    pub busy_interval: f64,
    pub backfill: bool,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            rate: 1.0,
            cost_per_scene: 1.0,
            busy_interval: 0.5,
            backfill: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotatorConfig {
    pub base_threshold: f64,
    pub k: usize,
    pub layout: BinLayout,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        Self {
            base_threshold: 0.6,
            k: 1,
            layout: BinLayout::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub acs: Vec<usize>,
    pub cfs: Vec<f64>,
    pub rule: SelectionRule,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            acs: (1..=20).collect(),
            cfs: vec![0.6, 0.66, 0.72, 0.8],
            rule: SelectionRule::default(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            HarnessError::Parse {
                path: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.resolution().validate().map_err(HarnessError::validation)?;
        self.filters.gates.validate().map_err(HarnessError::validation)?;
        self.amortization.validate().map_err(HarnessError::validation)?;
        let b = &self.budget;
        if !(b.rate >= 0.0 && b.busy_interval >= 0.0) || !b.rate.is_finite() {
            return Err(HarnessError::validation(ParamError::Budget("rate/busy_interval")));
        }
        WorkBudget::new(b.cost_per_scene).map_err(HarnessError::validation)?;
        if self.annotators.layout.is_empty() {
            return Err(HarnessError::validation("histogram layout has no bins"));
        }
        if self.eval.acs.contains(&0) {
            return Err(HarnessError::validation("grid ac values must be positive"));
        }
        if self.eval.cfs.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(HarnessError::validation("grid cf values must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn metrics(&self) -> MetricRegistry {
        MetricRegistry {
            weights: self.weights.clone(),
            pose_scale: self.resolution.pose_scale,
            ..MetricRegistry::default()
        }
    }

    pub fn resolution(&self) -> ResolutionConfig {
        ResolutionConfig {
            sim_threshold: self.resolution.sim_threshold,
            fastmatch_pose_gate: self.resolution.fastmatch_pose_gate,
            fastmatch_time_gate: self.resolution.fastmatch_time_gate,
            metrics: self.metrics(),
        }
    }

    /// Effective filter gates after the master switch.
    pub fn filter_gates(&self) -> FilterConfig {
        if self.filters.enabled {
            self.filters.gates.clone()
        } else {
            FilterConfig::disabled()
        }
    }

    pub fn annotators(&self, knn: Option<Vec<LabeledDescriptor>>) -> Result<Annotators> {
        let knn = knn
            .map(|ex| KnnModel::new(ex, self.annotators.k, self.annotators.base_threshold))
            .transpose()
            .map_err(HarnessError::validation)?;
        Ok(Annotators::new(self.annotators.layout, knn))
    }
}

/// 1-based line and column of a byte offset.
pub(crate) fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(Config::parse("", "t").unwrap(), Config::default());
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = Config::parse(
            r#"
[weights]
pose = 2.0

[resolution]
sim_threshold = 0.8

[filters]
enabled = true
motion_gate = inf
static_skip_sim = 0.97
regions = [{ min = [0.0, 0.0, 0.0], max = [1.0, 1.0, 1.0] }]

[amortization]
ac = 5
cf = 0.7

[budget]
rate = 2.0
"#,
            "t",
        )
        .unwrap();
        assert_eq!(cfg.weights.weight("pose"), 2.0);
        assert_eq!(cfg.weights.weight("vfh"), 1.0);
        assert_eq!(cfg.resolution.sim_threshold, 0.8);
        assert_eq!(cfg.resolution.fastmatch_time_gate, 5.0);
        assert_eq!(cfg.filters.gates.motion_gate, Some(f64::INFINITY));
        assert_eq!(cfg.filters.gates.static_skip_sim, Some(0.97));
        assert_eq!(cfg.filters.gates.blur_threshold, Some(100.0));
        assert_eq!(cfg.filters.gates.regions.len(), 1);
        assert_eq!(cfg.amortization, AmortizationParams::new(5, 0.7).unwrap());
        assert_eq!(cfg.budget.rate, 2.0);
        assert_eq!(cfg.budget.cost_per_scene, 1.0);
    }

    #[test]
    fn master_switch_disables_every_gate() {
        let cfg = Config::parse("[filters]\nenabled = false\n", "t").unwrap();
        assert_eq!(cfg.filter_gates(), FilterConfig::disabled());
    }

    #[test]
    fn parse_errors_carry_a_position() {
        let err = Config::parse("[resolution]\nsim_threshold = \"x\"\n", "cfg.toml").unwrap_err();
        match err {
            HarnessError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let err = Config::parse("[bogus]\n", "cfg.toml").unwrap_err();
        assert_eq!(err.exit_code(), super::super::EXIT_PARSE);
    }

    #[test]
    fn violations_are_validation_errors() {
        let err = Config::parse("[resolution]\nsim_threshold = 1.5\n", "t").unwrap_err();
        assert_eq!(err.exit_code(), super::super::EXIT_VALIDATION);
        let err = Config::parse("[amortization]\nac = 0\n", "t").unwrap_err();
        assert_eq!(err.exit_code(), super::super::EXIT_VALIDATION);
    }

    #[test]
    fn config_round_trips() {
        let cfg = Config::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(Config::parse(&text, "t").unwrap(), cfg);
    }
}
