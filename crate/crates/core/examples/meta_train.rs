//! Meta-train a VSML RNN from scratch with ES on two-cluster tasks seen
//! through a random projection, then check it on a projection it never saw.
//!
//! `cargo run --release --example meta_train -- [steps] [population]`
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsml::es::{EsConfig, MetaTrainer, VsmlObjective};
use vsml::grad::AdamConfig;
use vsml::harness::{self, Protocol, TestModel};
use vsml::learner::VsmlArch;
use vsml::tasks::{AugmentSeed, DataStore, Source, TaskDistribution, TaskSpec};
use vsml::MetaParams;

fn task(projection: u64) -> TaskSpec {
    TaskSpec::new(Source::Clusters { dims: 64, classes: 2, noise: 0.1 }, 100).with_projection(AugmentSeed::Fixed(projection))
}

fn main() -> vsml::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let steps = args.first().copied().unwrap_or(100);
    let pop = args.get(1).copied().unwrap_or(64);

    let mut arch = VsmlArch::scratch();
    arch.ticks_per_example = 1;
    let store = Arc::new(DataStore::new());
    let objective = VsmlObjective::new(arch.clone(), TaskDistribution::single(task(11)), store.clone(), 100)?;
    let cfg = EsConfig {
        population_size: pop,
        outer_steps: steps,
        episode_length: 100,
        adam: AdamConfig::with_lr(0.1),
        seed: 1,
        ..EsConfig::default()
    };
    let theta0 = MetaParams::init(arch.dims, &mut ChaCha8Rng::seed_from_u64(7)).to_flat();
    let mut trainer = MetaTrainer::new(cfg, objective, theta0)?;
    trainer.run(|log, _| {
        println!(
            "step {:4}  loss {:7.3}  best {:7.3}  cum acc {:.3}  ({:.1}s)",
            log.step, log.mean_loss, log.best_loss, log.mean_cum_acc, log.wall_time_s
        );
        Ok(())
    })?;

    let model = TestModel::Vsml {
        params: MetaParams::from_flat(arch.dims, trainer.theta())?,
        arch,
    };
    for (name, seed) in [("training projection", 11), ("unseen projection", 12)] {
        let traces = harness::evaluate(&model, &task(seed), &store, Protocol::FullStream, 16, 5)?;
        let acc = traces.iter().map(|t| t.final_accuracy()).sum::<f64>() / traces.len() as f64;
        println!("{name}: final cumulative accuracy {acc:.3}");
    }
    Ok(())
}
