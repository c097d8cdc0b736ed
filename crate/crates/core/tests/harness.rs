use std::path::Path;
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsml::baselines::MetaRnnParams;
use vsml::checkpoint::{Checkpoint, SeedMeta};
use vsml::es::EsConfig;
use vsml::harness::{self, render_plot, ExperimentConfig, Invocation, LearnerKind, Mode, PlotLayout, Protocol};
use vsml::learner::VsmlArch;
use vsml::tasks::{AugmentSeed, Source, TaskDistribution, TaskSpec};
use vsml::{Dims, MetaParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vsml"))
}

fn small_train_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Mode::MetaTrain);
    cfg.tasks = Some(TaskDistribution::single(
        TaskSpec::new(Source::Clusters { dims: 5, classes: 2, noise: 0.1 }, 12).with_projection(AugmentSeed::EPISODE),
    ));
    cfg.es = EsConfig {
        population_size: 6,
        outer_steps: 4,
        episode_length: 12,
        ..EsConfig::default()
    };
    cfg.checkpoint_every = 2;
    cfg.seed = 3;
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let p = dir.join("cfg.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

#[test]
fn unknown_config_keys_are_rejected() {
    assert!(ExperimentConfig::from_json(r#"{"mode": "grad-check", "colour": 1}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"mode": "grad-check", "verify": {"trials": 1, "x": 2}}"#).is_err());
    let c = ExperimentConfig::from_json(r#"{"mode": "grad-check"}"#).unwrap();
    assert_eq!(c.verify.grad_instances, 20);
}

#[test]
fn validation_happens_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_train_config();
    cfg.es.population_size = 5;
    let inv = Invocation::new(cfg, dir.path().join("run")).unwrap();
    let err = harness::execute(&inv).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(!dir.path().join("run").exists());
}

#[test]
fn checkpoint_roundtrip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let params = MetaParams::init(Dims::scratch(), &mut ChaCha8Rng::seed_from_u64(1));
    let ck = Checkpoint::from_vsml(&params, Some(VsmlArch::scratch()), SeedMeta { seed: 4, step: 9 });
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    ck.save(&a).unwrap();
    let loaded = Checkpoint::load(&a).unwrap();
    loaded.save(&b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(loaded.vsml_params().unwrap(), params);
    assert!(loaded.meta_rnn_params().is_err());

    let rnn = MetaRnnParams::init(6, 3, 4, &mut ChaCha8Rng::seed_from_u64(2));
    let ck = Checkpoint::from_meta_rnn(&rnn, SeedMeta { seed: 0, step: 0 });
    let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
    assert_eq!(back.meta_rnn_params().unwrap(), rnn);
}

#[test]
fn checkpoint_version_is_checked() {
    let params = MetaParams::zeros(Dims::scratch());
    let json = Checkpoint::from_vsml(&params, None, SeedMeta { seed: 0, step: 0 }).to_json().unwrap();
    let bumped = json.replace("\"version\": 1", "\"version\": 2");
    assert!(Checkpoint::from_json(&bumped).is_err());
}

#[test]
fn meta_train_writes_layout_and_resumes_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_train_config();
    let cfg_path = write_config(dir.path(), &cfg);
    let full = dir.path().join("full");
    let inv = Invocation::from_file(&cfg_path, &full).unwrap();
    harness::execute(&inv).unwrap();
    assert_eq!(std::fs::read(&cfg_path).unwrap(), std::fs::read(full.join("config.json")).unwrap());
    for f in ["checkpoints/step_000002.json", "checkpoints/step_000004.json", "metrics.csv", "timing.csv"] {
        assert!(full.join(f).exists(), "{f}");
    }
    let metrics = std::fs::read_to_string(full.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 5);
    assert!(metrics.starts_with("step,mean_loss,best_loss,mean_cum_acc,diverged\n"));

    // Interrupt after step 2, then resume from its checkpoint.
    let part = dir.path().join("part");
    let mut short = cfg.clone();
    short.es.outer_steps = 2;
    harness::execute(&Invocation::new(short, &part).unwrap()).unwrap();
    let mut resume = Invocation::new(cfg, &part).unwrap();
    resume.checkpoint = Some(part.join("checkpoints/step_000002.json"));
    harness::execute(&resume).unwrap();
    assert_eq!(metrics, std::fs::read_to_string(part.join("metrics.csv")).unwrap());
    assert_eq!(
        std::fs::read(full.join("checkpoints/step_000004.json")).unwrap(),
        std::fs::read(part.join("checkpoints/step_000004.json")).unwrap()
    );
}

#[test]
fn zero_params_meta_test_is_at_chance() {
    let dir = tempfile::tempdir().unwrap();
    let ck_path = dir.path().join("zero.json");
    Checkpoint::from_vsml(&MetaParams::zeros(Dims::scratch()), Some(VsmlArch::scratch()), SeedMeta { seed: 0, step: 0 })
        .save(&ck_path)
        .unwrap();
    let mut cfg = ExperimentConfig::new(Mode::MetaTest);
    cfg.test.task = Some(TaskSpec::new(Source::Random { dims: 4, classes: 10, points: 20 }, 1));
    cfg.test.episodes = 8;
    cfg.test.episode_length = 200;
    let mut inv = Invocation::new(cfg, dir.path().join("t")).unwrap();
    inv.checkpoint = Some(ck_path);
    let summary = harness::execute(&inv).unwrap();
    let acc = summary["final_cumulative_accuracy"].as_f64().unwrap();
    assert!((0.05..0.15).contains(&acc), "{acc}");
    let out = dir.path().join("t");
    assert!(out.join("traces/episode_007.csv").exists());
    assert!(out.join("plots/learning_curve.svg").exists());
    let head = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(head.starts_with("step,cumulative_accuracy,cumulative_accuracy_std\n"));
}

#[test]
fn meta_rnn_checkpoint_cannot_be_reshaped() {
    let dir = tempfile::tempdir().unwrap();
    let ck_path = dir.path().join("rnn.json");
    Checkpoint::from_meta_rnn(&MetaRnnParams::zeros(4, 2, 8), SeedMeta { seed: 0, step: 0 })
        .save(&ck_path)
        .unwrap();
    let mut cfg = ExperimentConfig::new(Mode::MetaTest);
    cfg.learner = LearnerKind::MetaRnn;
    cfg.test.task = Some(TaskSpec::new(Source::SumSign { dims: 9 }, 1));
    let mut inv = Invocation::new(cfg, dir.path().join("t")).unwrap();
    inv.checkpoint = Some(ck_path);
    let err = harness::execute(&inv).unwrap_err();
    assert!(err.to_string().contains("cannot be re-shaped"), "{err}");
}

#[test]
fn introspection_trace_rows_are_distributions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(Mode::Introspect);
    cfg.learner = LearnerKind::Adam;
    cfg.test.task = Some(TaskSpec::new(Source::Random { dims: 6, classes: 3, points: 20 }, 1));
    cfg.test.protocol = Protocol::RepeatedPairs;
    cfg.test.episodes = 2;
    cfg.test.episode_length = 40;
    let summary = harness::execute(&Invocation::new(cfg, dir.path()).unwrap()).unwrap();
    assert!(summary["second_presentation_accuracy"].as_f64().is_some());
    let csv = std::fs::read_to_string(dir.path().join("traces/introspection.csv")).unwrap();
    let t = harness::Table::parse(&csv).unwrap();
    assert_eq!(t.rows.len(), 40);
    for row in &t.rows {
        let s: f64 = row[5..].iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
    assert!(dir.path().join("plots/introspection.svg").exists());
}

#[test]
fn plots_are_deterministic_and_schema_checked() {
    let csv = "step,vsml,vsml_std,adam\n1,0.5,0.1,0.5\n2,0.75,0.05,0.5\n3,0.8,0.02,0.6\n";
    let a = render_plot(csv, PlotLayout::LearningCurve, "t").unwrap();
    assert_eq!(a, render_plot(csv, PlotLayout::LearningCurve, "t").unwrap());
    assert_eq!(a.matches("<polyline").count(), 2);
    assert!(a.contains(">vsml<") && a.contains(">adam<"));

    let empty = render_plot("step,acc\n", PlotLayout::LearningCurve, "t").unwrap();
    assert!(empty.contains("<svg") && empty.contains("id=\"axes\""));

    let err = render_plot("step,prob_0\n1,0.5\n", PlotLayout::Introspection, "t").unwrap_err();
    assert!(err.to_string().contains("label, predicted"), "{err}");
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin()
        .args(["verify-equivalence", "--trials", "10", "--out"])
        .arg(dir.path().join("ve"))
        .status()
        .unwrap();
    assert_eq!(ok.code(), Some(0));
    assert!(dir.path().join("ve/overrides.json").exists());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"mode": "grad-check", "unknown": true}"#).unwrap();
    let st = bin().args(["grad-check", "--config"]).arg(&bad).status().unwrap();
    assert_eq!(st.code(), Some(1));

    let st = bin().args(["meta-test", "--out"]).arg(dir.path().join("mt")).status().unwrap();
    assert_eq!(st.code(), Some(1), "meta-test without a checkpoint is a validation error");

    let st = bin().arg("no-such-command").status().unwrap();
    assert_eq!(st.code(), Some(1));
}

#[test]
fn cli_numeric_fault_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut params = MetaParams::zeros(Dims::scratch());
    params.cell.biases.fill(1e308);
    params.cell.recurrent_weights.fill(1e308);
    let ck = dir.path().join("huge.json");
    Checkpoint::from_vsml(&params, Some(VsmlArch::scratch()), SeedMeta { seed: 0, step: 0 }).save(&ck).unwrap();
    let st = bin()
        .args(["meta-test", "--learner", "vsml", "--task"])
        .arg(r#"{"source": {"kind": "sum_sign", "dims": 3}, "episode_length": 5}"#)
        .arg("--checkpoint")
        .arg(&ck)
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn render_plot_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("m.csv");
    std::fs::write(&csv, "step,a\n1,0.1\n2,0.2\n").unwrap();
    let svg = dir.path().join("p/m.svg");
    let st = bin().arg("render-plot").arg(&csv).arg("--out").arg(&svg).status().unwrap();
    assert_eq!(st.code(), Some(0));
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["desk_meta_train.json", "clone_shallow.json"] {
        let cfg = ExperimentConfig::load(&dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate(&vsml::tasks::DataStore::new()).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
