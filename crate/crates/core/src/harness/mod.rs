//! Experiment orchestration behind the `vsml` command line: configuration,
//! output directories, checkpoints, metric CSVs and plots.
//!
//! Output layout: `config.json` (verbatim), `overrides.json` (command-line
//! overrides, if any), `checkpoints/step_%06d.json`, `metrics.csv`,
//! `traces/`, `plots/`.

pub mod config;
pub mod plot;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

pub use config::{BaselineConfig, ExperimentConfig, LearnerKind, Mode, Protocol, TestConfig, VerifyConfig};
pub use plot::{render_plot, PlotLayout, Table};

use crate::baselines::{MetaRnnLearner, MetaRnnObjective, MetaRnnParams, SgdConfig, SgdLearner};
use crate::checkpoint::{Checkpoint, SeedMeta};
use crate::cloning::{self, run_cloned_learner, run_curriculum, update_fidelity, CloningConfig, Stage};
use crate::equivalence::verify_equivalence;
use crate::error::{Result, VsmlError};
use crate::es::{EsCheckpointState, MetaTrainer, Objective, OuterStepLog, VsmlObjective};
use crate::grad::{run_suite, GRAD_TOLERANCE};
use crate::grid::VsmlRnn;
use crate::learner::{run_episode, VsmlArch};
use crate::params::MetaParams;
use crate::seeds::{self, tag};
use crate::tasks::metrics::mean_std;
use crate::tasks::{DataStore, Episode, MetricTrace, Source, TaskSpec};

/// Deviation allowed between the two equivalence paths.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-8;
/// Relative update error counted as faithful when reporting clone fidelity.
pub const FIDELITY_TOLERANCE: f64 = 0.05;

const TEST_SEED_BASE: u64 = 0x7E57_0000;

/// Seed of the `i`-th evaluation episode under `seed`.
pub fn test_episode_seed(seed: u64, i: usize) -> u64 {
    seeds::derive(seed, TEST_SEED_BASE + i as u64)
}

/// A fully resolved command: what to run and where to write.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: ExperimentConfig,
    /// Copied byte for byte into `config.json`.
    pub config_text: String,
    pub overrides: Map<String, Value>,
    pub out: PathBuf,
    pub data_root: Option<PathBuf>,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    pub checkpoint: Option<PathBuf>,
}

impl Invocation {
    pub fn new(config: ExperimentConfig, out: impl Into<PathBuf>) -> Result<Self> {
        let mut config_text = serde_json::to_string_pretty(&config)?;
        config_text.push('\n');
        Ok(Self::with_text(config, config_text, out))
    }

    pub fn from_file(path: &Path, out: impl Into<PathBuf>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let config = ExperimentConfig::from_json(&text)?;
        Ok(Self::with_text(config, text, out))
    }

    fn with_text(config: ExperimentConfig, config_text: String, out: impl Into<PathBuf>) -> Self {
        Invocation {
            config,
            config_text,
            overrides: Map::new(),
            out: out.into(),
            data_root: None,
            workers: None,
            checkpoint: None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.config.seed = seed;
        self.overrides.insert("seed".into(), json!(seed));
    }

    pub fn set_learner(&mut self, learner: LearnerKind) {
        self.config.learner = learner;
        self.overrides.insert("learner".into(), serde_json::to_value(learner).expect("enum"));
    }

    /// Replaces the evaluation task (and the training distribution for meta-train).
    pub fn set_task(&mut self, task: TaskSpec) -> Result<()> {
        self.overrides.insert("task".into(), serde_json::to_value(&task)?);
        if self.config.mode == Mode::MetaTrain {
            self.config.tasks = Some(crate::tasks::TaskDistribution::single(task));
        } else {
            self.config.test.task = Some(task);
        }
        Ok(())
    }
}

/// Parse a task given inline as JSON or as a path to a JSON file.
pub fn parse_task(arg: &str) -> Result<TaskSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg)?
    };
    Ok(serde_json::from_str(&text)?)
}

fn dataset_sources(cfg: &ExperimentConfig) -> Vec<(String, crate::tasks::Split)> {
    let mut specs: Vec<&TaskSpec> = Vec::new();
    for dist in [&cfg.tasks, &cfg.cloning.data].into_iter().flatten() {
        specs.extend(dist.tasks.iter().map(|t| &t.task));
    }
    specs.extend(cfg.test.task.iter());
    specs
        .into_iter()
        .filter_map(|t| match &t.source {
            Source::Dataset { name, split } => Some((name.clone(), *split)),
            _ => None,
        })
        .collect()
}

/// Load every dataset the configuration mentions.
pub fn load_store(cfg: &ExperimentConfig, data_root: Option<&Path>) -> Result<DataStore> {
    let mut store = DataStore::new();
    for (name, split) in dataset_sources(cfg) {
        store.ensure_loaded(data_root, &name, split)?;
    }
    Ok(store)
}

/// Validate, prepare the output directory and run the configured mode on a
/// worker pool. Returns a JSON summary.
pub fn execute(inv: &Invocation) -> Result<Value> {
    let cfg = inv.config.resolved();
    let store = Arc::new(load_store(&cfg, inv.data_root.as_deref())?);
    cfg.validate(&store)?;
    let needs_checkpoint = match cfg.mode {
        Mode::MetaTest | Mode::Introspect => matches!(cfg.learner, LearnerKind::Vsml | LearnerKind::MetaRnn),
        Mode::RunCloned => true,
        _ => false,
    };
    let checkpoint = inv.checkpoint.as_deref().map(Checkpoint::load).transpose()?;
    if needs_checkpoint && checkpoint.is_none() {
        return Err(VsmlError::config(format!("{:?} needs --checkpoint", cfg.mode)));
    }
    if inv.workers == Some(0) {
        return Err(VsmlError::config("--workers must be positive"));
    }
    fs::create_dir_all(&inv.out)?;
    fs::write(inv.out.join("config.json"), &inv.config_text)?;
    if !inv.overrides.is_empty() {
        let mut s = serde_json::to_string_pretty(&inv.overrides)?;
        s.push('\n');
        fs::write(inv.out.join("overrides.json"), s)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.workers.unwrap_or(0))
        .build()
        .map_err(|e| VsmlError::config(format!("worker pool: {e}")))?;
    let out = inv.out.as_path();
    pool.install(|| match cfg.mode {
        Mode::MetaTrain => meta_train(&cfg, &store, out, checkpoint),
        Mode::MetaTest => meta_test(&cfg, &store, out, checkpoint.as_ref(), false),
        Mode::Introspect => meta_test(&cfg, &store, out, checkpoint.as_ref(), true),
        Mode::RunCloned => meta_test(&cfg, &store, out, checkpoint.as_ref(), false),
        Mode::Clone => clone(&cfg, &store, out, checkpoint),
        Mode::VerifyEquivalence => verify(&cfg, out),
        Mode::GradCheck => grad_check(&cfg, out),
    })
}

fn checkpoint_path(out: &Path, step: usize) -> PathBuf {
    out.join("checkpoints").join(format!("step_{step:06}.json"))
}

/// Append-only CSV that, on resume, keeps the rows of steps before `keep_below`.
fn open_step_csv(path: &Path, header: &str, keep_below: Option<usize>) -> Result<BufWriter<File>> {
    let mut kept = vec![header.to_string()];
    if let (Some(limit), Ok(old)) = (keep_below, fs::read_to_string(path)) {
        kept.extend(
            old.lines()
                .skip(1)
                .filter(|l| l.split(',').next().and_then(|s| s.parse::<usize>().ok()).is_some_and(|s| s < limit))
                .map(str::to_string),
        );
    }
    let mut w = BufWriter::new(File::create(path)?);
    for l in kept {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(w)
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seeds::derive(seed, tag::INIT))
}

fn meta_train(cfg: &ExperimentConfig, store: &Arc<DataStore>, out: &Path, resume: Option<Checkpoint>) -> Result<Value> {
    let tasks = cfg.training_tasks()?.clone();
    let t = cfg.es.episode_length;
    match cfg.learner {
        LearnerKind::Vsml => {
            let arch = cfg.arch.clone();
            let objective = VsmlObjective::new(arch.clone(), tasks.clone(), store.clone(), t)?;
            let spec = arch.layer_spec(tasks.max_input_dim(store)?, tasks.max_classes(store)?)?;
            let theta0 = MetaParams::init(arch.dims, &mut init_rng(cfg.seed)).to_flat();
            es_loop(cfg, objective, theta0, resume, out, |state| {
                let params = MetaParams::from_flat(arch.dims, &state.theta)?;
                Ok(Checkpoint::from_vsml(&params, Some(arch.clone()), SeedMeta { seed: cfg.seed, step: state.step })
                    .with_layer_spec(spec.clone()))
            })
        }
        LearnerKind::MetaRnn => {
            let objective = MetaRnnObjective::new(cfg.baselines.meta_rnn_hidden, tasks, store.clone(), t)?;
            let tpl = objective.template.clone();
            let theta0 = MetaRnnParams::init(tpl.input_dim, tpl.classes, tpl.hidden, &mut init_rng(cfg.seed)).to_flat();
            es_loop(cfg, objective, theta0, resume, out, |state| {
                let mut p = tpl.clone();
                p.assign_flat(&state.theta)?;
                Ok(Checkpoint::from_meta_rnn(&p, SeedMeta { seed: cfg.seed, step: state.step }))
            })
        }
        other => Err(VsmlError::config(format!("learner {other:?} is not meta-trained"))),
    }
}

fn es_loop<O, F>(
    cfg: &ExperimentConfig,
    objective: O,
    theta0: Vec<f64>,
    resume: Option<Checkpoint>,
    out: &Path,
    to_checkpoint: F,
) -> Result<Value>
where
    O: Objective,
    F: Fn(&EsCheckpointState) -> Result<Checkpoint>,
{
    let mut trainer = match resume {
        Some(ck) => {
            let opt = ck
                .optimizer
                .clone()
                .ok_or_else(|| VsmlError::config("checkpoint has no optimizer state to resume from"))?;
            let state = EsCheckpointState {
                step: opt.step,
                theta: ck.flat(),
                adam: opt.adam,
            };
            MetaTrainer::resume(cfg.es.clone(), objective, state)?
        }
        None => MetaTrainer::new(cfg.es.clone(), objective, theta0)?,
    };
    let start = trainer.step_index();
    let keep = (start > 0).then_some(start);
    let mut metrics = open_step_csv(&out.join("metrics.csv"), OuterStepLog::CSV_HEADER, keep)?;
    let mut timing = open_step_csv(&out.join("timing.csv"), "step,wall_time_s", keep)?;
    let every = cfg.checkpoint_every;
    let mut last = None;
    let mut final_acc = f64::NAN;
    trainer.run(|log, state| {
        writeln!(metrics, "{}", log.csv_row())?;
        writeln!(timing, "{},{}", log.step, log.wall_time_s)?;
        metrics.flush()?;
        timing.flush()?;
        final_acc = log.mean_cum_acc;
        if (every > 0 && state.step % every == 0) || state.step == cfg.es.outer_steps {
            let path = checkpoint_path(out, state.step);
            to_checkpoint(state)?.with_optimizer(state).save(&path)?;
            last = Some(path);
        }
        Ok(())
    })?;
    Ok(json!({
        "mode": "meta-train",
        "outer_steps": trainer.step_index(),
        "resumed_from": start,
        "final_mean_cum_acc": final_acc,
        "checkpoint": last,
    }))
}

/// A learner ready to be run on evaluation episodes.
#[derive(Debug, Clone)]
pub enum TestModel {
    Vsml { params: MetaParams, arch: VsmlArch },
    MetaRnn(MetaRnnParams),
    Gradient(SgdConfig),
    Cloned { params: MetaParams, hidden: Vec<usize>, batch: usize },
}

impl TestModel {
    pub fn trace(&self, episode: &Episode, seed: u64) -> Result<MetricTrace> {
        match self {
            TestModel::Vsml { params, arch } => {
                let spec = arch.layer_spec(episode.input_dim, episode.num_classes)?;
                let mut net = VsmlRnn::new(params, spec, seeds::derive(seed, tag::STATES))?.with_clip(arch.clip);
                run_episode(&mut net, episode)
            }
            TestModel::MetaRnn(p) => {
                let mut l = MetaRnnLearner::new(p, episode.input_dim, episode.num_classes).map_err(|e| {
                    VsmlError::config(format!("{e}; a Meta RNN cannot be re-shaped to a new task"))
                })?;
                run_episode(&mut l, episode)
            }
            TestModel::Gradient(c) => {
                let mut l = SgdLearner::new(c.clone(), episode.input_dim, episode.num_classes, seeds::derive(seed, tag::INIT))?;
                run_episode(&mut l, episode)
            }
            TestModel::Cloned { params, hidden, batch } => {
                run_cloned_learner(params, episode, hidden, *batch, seeds::derive(seed, tag::INIT))
            }
        }
    }
}

fn test_model(cfg: &ExperimentConfig, checkpoint: Option<&Checkpoint>) -> Result<TestModel> {
    let need = || checkpoint.ok_or_else(|| VsmlError::config("a checkpoint is required"));
    if cfg.mode == Mode::RunCloned {
        let ck = need()?;
        return Ok(TestModel::Cloned {
            params: ck.vsml_params()?,
            hidden: cfg.test.cloned_hidden.clone(),
            batch: cfg.test.cloned_batch,
        });
    }
    Ok(match cfg.learner {
        LearnerKind::Vsml => {
            let ck = need()?;
            let mut arch = ck.arch.clone().unwrap_or_else(|| cfg.arch.clone());
            arch.dims = ck.dims;
            TestModel::Vsml {
                params: ck.vsml_params()?,
                arch,
            }
        }
        LearnerKind::MetaRnn => TestModel::MetaRnn(need()?.meta_rnn_params()?),
        LearnerKind::Sgd => TestModel::Gradient(cfg.baselines.sgd.clone()),
        LearnerKind::Adam => TestModel::Gradient(cfg.baselines.adam.clone()),
    })
}

/// Evaluation task: the explicit test task, else the first training task.
pub fn test_task(cfg: &ExperimentConfig) -> Result<TaskSpec> {
    let mut task = match (&cfg.test.task, &cfg.tasks) {
        (Some(t), _) => t.clone(),
        (None, Some(d)) if !d.tasks.is_empty() => d.tasks[0].task.clone(),
        _ if cfg.mode == Mode::RunCloned => cloning::toy_task(8, 1),
        _ => return Err(VsmlError::config("no test task: set test.task or pass --task")),
    };
    task.episode_length = cfg.test.episode_length;
    Ok(task)
}

/// Evaluation episode `i` under the configured protocol.
pub fn test_episode(task: &TaskSpec, store: &DataStore, protocol: Protocol, seed: u64) -> Result<Episode> {
    let ep = task.episode(store, seed)?;
    Ok(match protocol {
        Protocol::FullStream => ep,
        Protocol::RepeatedPairs => {
            let distinct = ep.examples.len() / 2;
            ep.repeated_pairs(distinct)
        }
    })
}

/// Run `model` on `episodes` evaluation episodes in parallel; traces come
/// back in episode order.
pub fn evaluate(
    model: &TestModel,
    task: &TaskSpec,
    store: &DataStore,
    protocol: Protocol,
    episodes: usize,
    seed: u64,
) -> Result<Vec<MetricTrace>> {
    (0..episodes)
        .into_par_iter()
        .map(|i| {
            let s = test_episode_seed(seed, i);
            model.trace(&test_episode(task, store, protocol, s)?, s)
        })
        .collect()
}

fn write_trace(path: &Path, trace: &MetricTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    trace.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn meta_test(
    cfg: &ExperimentConfig,
    store: &DataStore,
    out: &Path,
    checkpoint: Option<&Checkpoint>,
    introspect: bool,
) -> Result<Value> {
    let model = test_model(cfg, checkpoint)?;
    let task = test_task(cfg)?;
    let traces = evaluate(&model, &task, store, cfg.test.protocol, cfg.test.episodes, cfg.seed)?;
    fs::create_dir_all(out.join("traces"))?;
    fs::create_dir_all(out.join("plots"))?;
    for (i, t) in traces.iter().enumerate() {
        write_trace(&out.join("traces").join(format!("episode_{i:03}.csv")), t)?;
    }
    let curves: Vec<Vec<f64>> = traces.iter().map(MetricTrace::cumulative_accuracy).collect();
    let (mean, std) = mean_std(&curves);
    let mut csv = String::from("step,cumulative_accuracy,cumulative_accuracy_std\n");
    for (t, (m, s)) in mean.iter().zip(&std).enumerate() {
        csv.push_str(&format!("{},{m},{s}\n", t + 1));
    }
    fs::write(out.join("metrics.csv"), &csv)?;
    let title = format!("{:?} on {:?}", cfg.learner, task.source);
    fs::write(
        out.join("plots").join("learning_curve.svg"),
        render_plot(&csv, PlotLayout::LearningCurve, &title)?,
    )?;
    let mut second = Vec::new();
    if cfg.test.protocol == Protocol::RepeatedPairs {
        second = traces.iter().map(MetricTrace::second_presentation_accuracy).collect();
    }
    if introspect {
        if let Some(t) = traces.first() {
            let mut buf = Vec::new();
            t.write_csv(&mut buf)?;
            let csv = String::from_utf8(buf).expect("utf8");
            fs::write(out.join("traces").join("introspection.csv"), &csv)?;
            fs::write(
                out.join("plots").join("introspection.svg"),
                render_plot(&csv, PlotLayout::Introspection, "output probabilities")?,
            )?;
        }
    }
    let summary = json!({
        "mode": if introspect { "introspect" } else if cfg.mode == Mode::RunCloned { "run-cloned" } else { "meta-test" },
        "episodes": traces.len(),
        "final_cumulative_accuracy": mean.last(),
        "final_std": std.last(),
        "second_presentation_accuracy": (!second.is_empty()).then(|| second.iter().sum::<f64>() / second.len() as f64),
    });
    if let Some((i, t)) = traces.iter().enumerate().find(|(_, t)| t.fault.is_some()) {
        return Err(VsmlError::NonFinite(format!(
            "evaluation episode {i}: {}",
            t.fault.as_deref().unwrap_or_default()
        )));
    }
    Ok(summary)
}

/// Architecture recorded in cloned checkpoints.
pub fn cloned_arch(c: &CloningConfig) -> VsmlArch {
    VsmlArch {
        dims: c.dims,
        hidden: Vec::new(),
        ticks_per_example: cloning::SWEEP_TICKS,
        clip: Some(cloning::CLIP),
    }
}

fn clone(cfg: &ExperimentConfig, store: &DataStore, out: &Path, init: Option<Checkpoint>) -> Result<Value> {
    let c = &cfg.cloning;
    let init = match init {
        Some(ck) => ck.vsml_params()?,
        None => MetaParams::init(c.dims, &mut init_rng(cfg.seed)),
    };
    let mut metrics = open_step_csv(&out.join("metrics.csv"), "step,stage,loss", None)?;
    let mut total = 0usize;
    let mut io: Result<()> = Ok(());
    let report = run_curriculum(c, init, Some(store), |log| {
        if io.is_ok() {
            io = writeln!(metrics, "{},{},{}", total, log.stage as usize, log.loss).map_err(Into::into);
        }
        total += 1;
    })?;
    io?;
    metrics.flush()?;
    let path = checkpoint_path(out, total);
    Checkpoint::from_vsml(&report.params, Some(cloned_arch(c)), SeedMeta { seed: cfg.seed, step: total }).save(&path)?;
    let last_stage = report.stages.last().map_or(Stage::Shallow, |s| s.stage);
    let fidelity = update_fidelity(
        c,
        &report.params,
        last_stage,
        Some(store),
        1000,
        FIDELITY_TOLERANCE,
        seeds::derive(cfg.seed, 0xF1DE),
    )?;
    let summary = json!({
        "mode": "clone",
        "stages": report.stages,
        "skipped": report.skipped,
        "fidelity": fidelity,
        "checkpoint": path,
    });
    let mut s = serde_json::to_string_pretty(&summary)?;
    s.push('\n');
    fs::write(out.join("report.json"), s)?;
    if let Some(failed) = report.stages.iter().find(|s| !s.passed) {
        return Err(VsmlError::CheckFailed(format!(
            "stage {:?} ended at loss {:.3e} above threshold {:.1e} after {} steps",
            failed.stage, failed.final_loss, failed.threshold, failed.steps
        )));
    }
    Ok(summary)
}

fn verify(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    let v = &cfg.verify;
    let results = verify_equivalence(v.trials, v.max_dim, cfg.seed)?;
    let mut csv = String::from("trial,grid,n,max_abs_deviation,nonzero_blocks,expected_nonzero_blocks\n");
    for r in &results {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.trial, r.grid, r.n, r.max_abs_deviation, r.nonzero_blocks, r.expected_nonzero_blocks
        ));
    }
    fs::write(out.join("metrics.csv"), csv)?;
    let worst = results.iter().map(|r| r.max_abs_deviation).fold(0.0, f64::max);
    let blocks_ok = results.iter().all(|r| r.nonzero_blocks == r.expected_nonzero_blocks);
    if !(worst < EQUIVALENCE_TOLERANCE) || !blocks_ok {
        return Err(VsmlError::CheckFailed(format!(
            "max deviation {worst:e} (tolerance {EQUIVALENCE_TOLERANCE:e}), block counts ok: {blocks_ok}"
        )));
    }
    Ok(json!({ "mode": "verify-equivalence", "trials": results.len(), "max_abs_deviation": worst }))
}

fn grad_check(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    let checks = run_suite(cfg.verify.grad_instances, cfg.seed)?;
    let mut csv = String::from("operation,instances,max_deviation,passed\n");
    for c in &checks {
        csv.push_str(&format!("{},{},{},{}\n", c.operation, c.instances, c.max_deviation, c.passed));
    }
    fs::write(out.join("metrics.csv"), csv)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.operation).collect();
    if !failed.is_empty() {
        return Err(VsmlError::CheckFailed(format!(
            "gradient check above {GRAD_TOLERANCE:e}: {}",
            failed.join(", ")
        )));
    }
    Ok(json!({ "mode": "grad-check", "checks": checks }))
}

/// Render a CSV file to an SVG file.
pub fn render_plot_file(csv: &Path, layout: PlotLayout, out: &Path) -> Result<()> {
    let text = fs::read_to_string(csv)?;
    let title = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    let svg = render_plot(&text, layout, title)?;
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, svg)?;
    Ok(())
}
