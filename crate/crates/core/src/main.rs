use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vsml::cloning::Stage;
use vsml::harness::{self, ExperimentConfig, Invocation, LearnerKind, Mode, PlotLayout};
use vsml::tasks::{Source, Split, TaskDistribution, TaskSpec};
use vsml::{Result, VsmlError};

#[derive(Parser)]
#[command(name = "vsml", version, about = "Variable-shared meta learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding IDX datasets.
    #[arg(long, env = "DATA_ROOT")]
    data_root: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    learner: Option<LearnerKind>,
    /// Task spec as inline JSON or a path to a JSON file.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CloneMode {
    Shallow,
    Deep,
}

#[derive(Clone, Copy, ValueEnum)]
enum CloneData {
    Random,
    MnistSubset,
}

#[derive(Subcommand)]
enum Command {
    /// Meta-train VSML (or the Meta RNN) with evolution strategies.
    MetaTrain(Common),
    /// Evaluate a learner over independent episodes.
    MetaTest(Common),
    /// Clone online backprop into VSML meta parameters.
    Clone {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<CloneMode>,
        #[arg(long, value_enum)]
        data: Option<CloneData>,
    },
    /// Run a cloned checkpoint as an online learner.
    RunCloned(Common),
    /// Check the grid-as-one-RNN equivalence on random instances.
    VerifyEquivalence {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        max_dim: Option<usize>,
    },
    /// Finite-difference check of every hand-written gradient.
    GradCheck(Common),
    /// Per-step output probabilities of a learner.
    Introspect(Common),
    /// Render a metrics or trace CSV as SVG.
    RenderPlot {
        csv: PathBuf,
        #[arg(long, value_enum, default_value = "learning-curve")]
        layout: PlotLayout,
        #[arg(long)]
        out: PathBuf,
    },
}

fn invocation(mode: Mode, c: &Common) -> Result<Invocation> {
    let out = c.out.clone().unwrap_or_else(|| {
        let name = serde_json::to_value(mode).ok().and_then(|v| v.as_str().map(String::from));
        PathBuf::from("runs").join(name.unwrap_or_default())
    });
    let mut inv = match &c.config {
        Some(p) => Invocation::from_file(p, out)?,
        None => Invocation::new(ExperimentConfig::new(mode), out)?,
    };
    if inv.config.mode != mode {
        return Err(VsmlError::config(format!(
            "config mode {:?} does not match the {mode:?} subcommand",
            inv.config.mode
        )));
    }
    if let Some(s) = c.seed {
        inv.set_seed(s);
    }
    if let Some(l) = c.learner {
        inv.set_learner(l);
    }
    if let Some(t) = &c.task {
        inv.set_task(harness::parse_task(t)?)?;
    }
    inv.data_root = c.data_root.clone();
    inv.workers = c.workers;
    inv.checkpoint = c.checkpoint.clone();
    Ok(inv)
}

fn run(cli: Cli) -> Result<()> {
    let inv = match cli.command {
        Command::RenderPlot { csv, layout, out } => return harness::render_plot_file(&csv, layout, &out),
        Command::MetaTrain(c) => invocation(Mode::MetaTrain, &c)?,
        Command::MetaTest(c) => invocation(Mode::MetaTest, &c)?,
        Command::RunCloned(c) => invocation(Mode::RunCloned, &c)?,
        Command::GradCheck(c) => invocation(Mode::GradCheck, &c)?,
        Command::Introspect(c) => invocation(Mode::Introspect, &c)?,
        Command::VerifyEquivalence { common, trials, max_dim } => {
            let mut inv = invocation(Mode::VerifyEquivalence, &common)?;
            if let Some(t) = trials {
                inv.config.verify.trials = t;
                inv.overrides.insert("trials".into(), t.into());
            }
            if let Some(d) = max_dim {
                inv.config.verify.max_dim = d;
                inv.overrides.insert("max_dim".into(), d.into());
            }
            inv
        }
        Command::Clone { common, mode, data } => {
            let mut inv = invocation(Mode::Clone, &common)?;
            let c = &mut inv.config.cloning;
            if let Some(m) = mode {
                c.stages = match m {
                    CloneMode::Shallow => vec![Stage::Shallow],
                    CloneMode::Deep => vec![Stage::Shallow, Stage::DeepTeacher, Stage::DeepSelf],
                };
                inv.overrides.insert("clone_mode".into(), format!("{:?}", c.stages).into());
            }
            if let Some(CloneData::MnistSubset) = data {
                let mut task = TaskSpec::new(
                    Source::Dataset {
                        name: "mnist".into(),
                        split: Split::Train,
                    },
                    1000,
                );
                task.class_subset = Some(vec![0, 1]);
                task.rescale = Some(14);
                c.shallow_widths = vec![196, 2];
                c.deep_widths = vec![196, 32, 2];
                c.data = Some(TaskDistribution::single(task));
                inv.overrides.insert("clone_data".into(), "mnist-subset".into());
            }
            inv
        }
    };
    let summary = harness::execute(&inv)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
