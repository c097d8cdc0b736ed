//! Clone online backprop into the shared LSTM and count how often a single
//! predicted update lands within 5% of the SGD update. The cloned learner
//! then trains on a toy task.
//!
//! `STEPS=2000 cargo run --release --example clone`
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsml::cloning::{run_cloned_learner, run_curriculum, toy_task, update_fidelity, CloningConfig, Stage};
use vsml::tasks::DataStore;
use vsml::MetaParams;

fn main() -> vsml::Result<()> {
    let mut cfg = CloningConfig::default();
    if let Some(steps) = std::env::var("STEPS").ok().and_then(|v| v.parse().ok()) {
        cfg.budgets[0] = steps;
    }
    let init = MetaParams::init(cfg.dims, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let report = run_curriculum(&cfg, init, None, |log| {
        if log.step % 500 == 0 {
            println!("{:?} step {:6} loss {:.3e}", log.stage, log.step, log.loss);
        }
    })?;
    for s in &report.stages {
        println!("{:?}: {} steps, final loss {:.3e}, passed {}", s.stage, s.steps, s.final_loss, s.passed);
    }

    let f = update_fidelity(&cfg, &report.params, Stage::Shallow, None, 1000, 0.05, 99)?;
    println!(
        "{}/{} held-out updates within 5%, median relative error {:.3}",
        f.within, f.samples, f.median_relative_error
    );

    let episode = toy_task(4, 4000).episode(&DataStore::new(), 5)?;
    let trace = run_cloned_learner(&report.params, &episode, &[], 16, 1)?;
    for (i, chunk) in trace.records.chunks(800).enumerate() {
        let loss = chunk.iter().map(|r| r.loss).sum::<f64>() / chunk.len() as f64;
        println!("examples {:5}..: mean loss {loss:.4}", i * 800);
    }
    println!("final cumulative accuracy {:.3}", trace.final_accuracy());
    Ok(())
}
