//! Online SGD and Adam on a single pass over a small random task, shown next
//! to an untrained Meta RNN.
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsml::baselines::{MetaRnnParams, SgdConfig};
use vsml::harness::{self, Protocol, TestModel};
use vsml::tasks::{DataStore, Source, TaskSpec};

fn main() -> vsml::Result<()> {
    let task = TaskSpec::new(Source::SumSign { dims: 16 }, 1000);
    let store = DataStore::new();
    let models = [
        ("sgd", TestModel::Gradient(SgdConfig::sgd(vec![]))),
        ("adam", TestModel::Gradient(SgdConfig::adam(vec![]))),
        ("adam, 160 hidden", TestModel::Gradient(SgdConfig::adam(vec![]).deep())),
        ("meta rnn (untrained)", TestModel::MetaRnn(MetaRnnParams::init(16, 2, 16, &mut ChaCha8Rng::seed_from_u64(3)))),
    ];
    for (name, model) in &models {
        for protocol in [Protocol::FullStream, Protocol::RepeatedPairs] {
            let traces = harness::evaluate(model, &task, &store, protocol, 8, 1)?;
            let n = traces.len() as f64;
            let acc = traces.iter().map(|t| t.final_accuracy()).sum::<f64>() / n;
            let second = traces.iter().map(|t| t.second_presentation_accuracy()).sum::<f64>() / n;
            match protocol {
                Protocol::FullStream => print!("{name:22} cum acc {acc:.3}"),
                Protocol::RepeatedPairs => println!("   second presentation {second:.3}"),
            }
        }
    }
    Ok(())
}
