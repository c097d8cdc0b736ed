//! Run the harness in introspection mode with an Adam learner on repeated
//! pairs and render the resulting traces as SVG. Output goes to
//! `runs/example-introspect` unless a directory is given.
use vsml::harness::{self, ExperimentConfig, Invocation, LearnerKind, Mode, Protocol};
use vsml::tasks::{Source, TaskSpec};

fn main() -> vsml::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/example-introspect".into());
    let mut cfg = ExperimentConfig::new(Mode::Introspect);
    cfg.learner = LearnerKind::Adam;
    cfg.test.task = Some(TaskSpec::new(Source::Random { dims: 8, classes: 4, points: 25 }, 1));
    cfg.test.protocol = Protocol::RepeatedPairs;
    cfg.test.episodes = 4;
    cfg.test.episode_length = 100;
    let summary = harness::execute(&Invocation::new(cfg, &out)?)?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    println!("plots in {out}/plots");
    Ok(())
}
