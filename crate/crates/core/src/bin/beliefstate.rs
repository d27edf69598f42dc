use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beliefstate::evalkit::{GridSearch, SelectionRule};
use beliefstate::harness::engine::summarize;
use beliefstate::harness::io;
use beliefstate::harness::pipeline::{self, Preparation};
use beliefstate::harness::{Config, HarnessError, Result};
use beliefstate::simkit::SimSpec;

#[derive(Parser)]
#[command(name = "beliefstate", version, about = "Belief-state replay with amortized query answering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene log, ground truth and k-NN table from a simulation spec.
    Simulate(SimulateArgs),
    /// Replay a scene log and print the run report.
    Replay(ReplayArgs),
    /// Answer a query script against a scene log.
    Query(QueryArgs),
    /// Compare one-shot and amortized annotation against ground truth.
    Eval(EvalArgs),
    /// Sweep (ac, cf) and emit one row per grid point and mode.
    Gridsearch(GridArgs),
    /// Dump the belief state after replay.
    Inspect(InspectArgs),
}

/// Config file plus per-key overrides; flags win over the file.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ac: Option<usize>,
    #[arg(long)]
    cf: Option<f64>,
    #[arg(long)]
    sim_threshold: Option<f64>,
    /// Process every scene and admit every hypothesis.
    #[arg(long)]
    no_filters: bool,
    #[arg(long)]
    blur_threshold: Option<f64>,
    #[arg(long)]
    static_skip_sim: Option<f64>,
    #[arg(long)]
    motion_gate: Option<f64>,
    #[arg(long)]
    budget_rate: Option<f64>,
    #[arg(long)]
    no_backfill: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(v) = self.ac {
            cfg.amortization.ac = v;
        }
        if let Some(v) = self.cf {
            cfg.amortization.cf = v;
        }
        if let Some(v) = self.sim_threshold {
            cfg.resolution.sim_threshold = v;
        }
        if self.no_filters {
            cfg.filters.enabled = false;
        }
        if let Some(v) = self.blur_threshold {
            cfg.filters.gates.blur_threshold = Some(v);
        }
        if let Some(v) = self.static_skip_sim {
            cfg.filters.gates.static_skip_sim = Some(v);
        }
        if let Some(v) = self.motion_gate {
            cfg.filters.gates.motion_gate = Some(v);
        }
        if let Some(v) = self.budget_rate {
            cfg.budget.rate = v;
        }
        if self.no_backfill {
            cfg.budget.backfill = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML simulation spec; omit to use the built-in desk episode.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fraction of frames to replace with blurred ones.
    #[arg(long)]
    blur: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    knn: PathBuf,
}

#[derive(Args)]
struct LogArgs {
    #[arg(long)]
    log: PathBuf,
    /// k-NN training table; without it no class labels are produced.
    #[arg(long)]
    knn: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    input: LogArgs,
    #[arg(long)]
    script: Option<PathBuf>,
    /// Write the full JSON run report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    input: LogArgs,
    #[arg(long)]
    script: PathBuf,
    /// Write the transcript here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: LogArgs,
    #[arg(long)]
    gt: PathBuf,
    /// Annotate as scenes arrive instead of backfilling the whole log.
    #[arg(long)]
    no_history: bool,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    input: LogArgs,
    #[arg(long)]
    gt: PathBuf,
    /// Coefficients, e.g. `1-20` or `1,4,12`.
    #[arg(long)]
    acs: Option<String>,
    /// Thresholds, e.g. `0.6,0.66,0.72,0.8`.
    #[arg(long)]
    cfs: Option<String>,
    #[arg(long, value_enum)]
    rule: Option<RuleArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum RuleArg {
    MaxSum,
    Normalized,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    input: LogArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Replay(a) => replay(a),
        Command::Query(a) => query(a),
        Command::Eval(a) => eval(a),
        Command::Gridsearch(a) => gridsearch(a),
        Command::Inspect(a) => inspect(a),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = io::read_text(p)?;
            toml::from_str::<SimSpec>(&text).map_err(|e| HarnessError::Parse {
                path: p.display().to_string(),
                line: e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1),
                column: 0,
                message: e.message().to_string(),
            })?
        }
        None => SimSpec::desk_episode(0),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(p) = a.dropout {
        spec.classifier_dropout = p;
    }
    if let Some(f) = a.blur {
        spec = spec.inject_blur(f).map_err(HarnessError::validation)?;
    }
    let out = spec.generate().map_err(HarnessError::validation)?;
    io::write_text(&a.log, &io::format_scene_log(&out.scenes))?;
    io::write_text(&a.gt, &io::format_ground_truth(&out.ground_truth))?;
    io::write_text(&a.knn, &io::format_knn(&out.knn_examples))?;
    println!(
        "{} scenes, {} hypotheses, {} blurred, {} pick-and-place, {} idle",
        out.stats.scenes,
        out.stats.hypotheses,
        out.stats.blur_frames,
        out.stats.pick_place,
        out.stats.idle
    );
    Ok(())
}

struct Loaded {
    cfg: Config,
    scenes: Vec<beliefstate::Scene>,
    annotators: beliefstate::annotators::Annotators,
}

fn load(a: &LogArgs) -> Result<Loaded> {
    let cfg = a.config.load()?;
    let scenes = io::read_scene_log(&a.log)?;
    let knn = a.knn.as_deref().map(io::read_knn).transpose()?;
    let annotators = cfg.annotators(knn)?;
    Ok(Loaded {
        cfg,
        scenes,
        annotators,
    })
}

fn script(path: Option<&Path>) -> Result<Vec<io::ScriptEntry>> {
    path.map_or(Ok(Vec::new()), io::read_script)
}

fn replay(a: ReplayArgs) -> Result<()> {
    let l = load(&a.input)?;
    let script = script(a.script.as_deref())?;
    let (_, report) = pipeline::replay(l.scenes, &l.cfg, l.annotators, &script)?;
    println!(
        "scenes {}  processed {}  objects {}  budget spent {}",
        report.scenes, report.processed, report.objects, report.budget_consumed
    );
    for (reason, n) in &report.skipped {
        println!("skip({}) {n}", serde_json::to_value(reason).unwrap().as_str().unwrap_or("?"));
    }
    if let Some(p) = a.report {
        io::write_text(&p, &pipeline::to_json(&report))?;
    }
    Ok(())
}

fn query(a: QueryArgs) -> Result<()> {
    let l = load(&a.input)?;
    let script = io::read_script(&a.script)?;
    let (_, report) = pipeline::replay(l.scenes, &l.cfg, l.annotators, &script)?;
    let text = pipeline::transcript_lines(&report);
    match a.out {
        Some(p) => io::write_text(&p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let l = load(&a.input)?;
    let gt = io::read_ground_truth(&a.gt)?;
    let how = if a.no_history {
        Preparation::AnswerAsYouGo
    } else {
        Preparation::FullBackfill
    };
    let (episode, _) = pipeline::prepare(l.scenes, &l.cfg, l.annotators.clone(), how)?;
    let ev = pipeline::evaluate(&episode, &gt, &l.annotators, &l.cfg)?;
    print!("{}", pipeline::eval_table(&ev));
    if let Some(p) = a.json {
        io::write_text(&p, &pipeline::to_json(&ev))?;
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| t.trim().parse::<T>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| HarnessError::Validation(format!("bad {what} list `{text}`")))
}

fn parse_acs(text: &str) -> Result<Vec<usize>> {
    if let Some((lo, hi)) = text.split_once('-') {
        let lo: usize = lo.trim().parse().map_err(|_| HarnessError::Validation(format!("bad ac range `{text}`")))?;
        let hi: usize = hi.trim().parse().map_err(|_| HarnessError::Validation(format!("bad ac range `{text}`")))?;
        return Ok((lo..=hi).collect());
    }
    parse_list(text, "ac")
}

fn gridsearch(a: GridArgs) -> Result<()> {
    let mut l = load(&a.input)?;
    if let Some(t) = &a.acs {
        l.cfg.eval.acs = parse_acs(t)?;
    }
    if let Some(t) = &a.cfs {
        l.cfg.eval.cfs = parse_list(t, "cf")?;
    }
    if let Some(r) = a.rule {
        l.cfg.eval.rule = match r {
            RuleArg::MaxSum => SelectionRule::MaxSum,
            RuleArg::Normalized => SelectionRule::Normalized,
        };
    }
    l.cfg.validate()?;
    let gt = io::read_ground_truth(&a.gt)?;
    let (episode, _) =
        pipeline::prepare(l.scenes, &l.cfg, l.annotators.clone(), Preparation::FullBackfill)?;
    let grid: GridSearch = pipeline::grid(&episode, &gt, &l.annotators, &l.cfg)?;
    let mut rows = grid.rows().join("\n");
    rows.push('\n');
    match &a.out {
        Some(p) => io::write_text(p, &rows)?,
        None => print!("{rows}"),
    }
    eprintln!("selected ac={} cf={}", grid.selected.0, grid.selected.1);
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    let l = load(&a.input)?;
    let (episode, _) = pipeline::replay(l.scenes, &l.cfg, l.annotators, &[])?;
    episode.check_integrity()?;
    print!("{}", pipeline::to_json(&summarize(&episode, &l.cfg.amortization)));
    Ok(())
}
