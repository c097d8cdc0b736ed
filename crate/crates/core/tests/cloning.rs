use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vsml::cloning::{
    clone_step, decode, encode, make_targets, predict, regression_loss, run_cloned_learner, run_curriculum, toy_task,
    update_relative_error, ClonePrediction, CloneTargets, CloningConfig, CloningSampler, CloningSample, LossWeights,
    ShadowLayer, ShadowNet, Stage, StateBuffer,
};
use vsml::grad::{AdamConfig, AdamState};
use vsml::tasks::DataStore;
use vsml::{Dims, MetaParams};

#[test]
fn targets_match_one_layer_backprop() {
    // Loss L = e * y with y = tanh(x) w + b, so dL/dy = e.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alpha = 0.01;
    for _ in 0..10_000 {
        let x: f64 = rng.gen_range(-3.0..3.0);
        let w: f64 = rng.gen_range(-2.0..2.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        let e: f64 = rng.gen_range(-1.0..1.0);
        let act = (x.exp() - (-x).exp()) / (x.exp() + (-x).exp());
        let sech2 = 1.0 / x.cosh().powi(2);
        let t = make_targets(x, w, b, e, alpha);
        assert!((t.y - (act * w + b)).abs() < 1e-12);
        assert!((t.dw + alpha * e * act).abs() < 1e-12);
        assert!((t.db + alpha * e).abs() < 1e-12);
        assert!((t.e_prev - e * w * sech2).abs() < 1e-12);
    }
}

#[test]
fn state_scaling_roundtrip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let v: f64 = rng.gen_range(-10.0..10.0);
        assert_eq!(decode(encode(v)), v);
        assert_eq!(encode(v), v / 4.0);
    }
}

#[test]
fn shadow_layer_averages_and_backward_is_scaled_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let l = ShadowLayer::init(3, 4, &mut rng);
    let x = [0.3, -0.7, 1.2];
    let e = [0.1, -0.4, 0.25, 0.9];
    let y = l.forward(&x);
    for bi in 0..4 {
        let want: f64 = (0..3).map(|a| x[a].tanh() * l.w[a * 4 + bi] + l.bias[a * 4 + bi]).sum::<f64>() / 3.0;
        assert!((y[bi] - want).abs() < 1e-12);
    }
    // backward = (A / B) * d(e . y)/dx
    let down = l.backward(&x, &e);
    let h = 1e-6;
    for a in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[a] += h;
        xm[a] -= h;
        let f = |v: &[f64]| l.forward(v).iter().zip(&e).map(|(y, e)| y * e).sum::<f64>();
        let num = (f(&xp) - f(&xm)) / (2.0 * h);
        assert!((down[a] - num * 3.0 / 4.0).abs() < 1e-8);
    }
}

#[test]
fn shadow_sgd_applies_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = ShadowNet::init(&[2, 3], 0.01, &mut rng);
    let before = net.clone();
    let x = [0.5, -1.0];
    let tape = net.forward(&x).unwrap();
    let errs = net.errors(&tape, &[0.2, -0.1, 0.3]);
    net.sgd(&tape, &errs);
    for a in 0..2 {
        for b in 0..3 {
            let k = a * 3 + b;
            let t = make_targets(x[a], before.layers[0].w[k], before.layers[0].bias[k], errs[0][b], 0.01);
            assert!((net.layers[0].w[k] - before.layers[0].w[k] - t.dw).abs() < 1e-15);
            assert!((net.layers[0].bias[k] - before.layers[0].bias[k] - t.db).abs() < 1e-15);
        }
    }
}

#[test]
fn relative_error_of_update_vector() {
    let t = CloneTargets { y: 0.0, dw: 3e-3, db: 4e-3, e_prev: 0.0 };
    let p = ClonePrediction { y: 9.0, dw: 3e-3, db: 4.5e-3, e_prev: 9.0 };
    assert!((update_relative_error(&p, &t) - 0.1).abs() < 1e-12);
    let zero = CloneTargets { dw: 0.0, db: 0.0, ..t };
    assert_eq!(update_relative_error(&ClonePrediction { dw: 0.0, db: 0.0, ..p }, &zero), 0.0);
}

fn samples(n: usize, seed: u64) -> Vec<CloningSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            CloningSample::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                0.01,
            )
        })
        .collect()
}

#[test]
fn regression_step_reduces_loss() {
    let dims = Dims::new(8, 4, 4);
    let mut params = MetaParams::init(dims, &mut ChaCha8Rng::seed_from_u64(5));
    let batch = samples(32, 6);
    let w = LossWeights::default();
    let start = regression_loss(&params, &batch, &w).unwrap();
    let mut adam = AdamState::new(AdamConfig::with_lr(3e-3), params.len());
    let mut reported = Vec::new();
    for _ in 0..100 {
        reported.push(clone_step(&mut params, &mut adam, &batch, &w).unwrap());
    }
    assert!((reported[0] - start).abs() < 1e-12);
    let end = regression_loss(&params, &batch, &w).unwrap();
    assert!(end < 0.5 * start, "{start} -> {end}");
}

#[test]
fn update_error_is_bounded_by_regression_loss() {
    // The squared update error of any sample is at most 4 x its loss term.
    let dims = Dims::new(8, 4, 4);
    let params = MetaParams::init(dims, &mut ChaCha8Rng::seed_from_u64(7));
    let w = LossWeights::default();
    for s in samples(200, 8) {
        let loss = regression_loss(&params, &[s], &w).unwrap();
        let p = predict(&params, &s).unwrap();
        let sq = (p.dw - s.targets.dw).powi(2) + (p.db - s.targets.db).powi(2);
        assert!(sq <= 4.0 * loss + 1e-15);
    }
}

#[test]
fn state_buffer_keeps_most_recent() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut buf = StateBuffer::new(3);
    for _ in 0..5 {
        buf.push(ShadowNet::init(&[2, 2], 0.01, &mut rng));
    }
    assert_eq!(buf.len(), 3);
    assert_eq!(buf.capacity(), 3);
}

#[test]
fn sampler_draws_cells_from_buffered_states() {
    let cfg = CloningConfig {
        dims: Dims::new(8, 4, 4),
        ..CloningConfig::default()
    };
    let params = MetaParams::init(cfg.dims, &mut ChaCha8Rng::seed_from_u64(10));
    let mut s = CloningSampler::new(&cfg, Stage::Shallow, None, 11).unwrap();
    for _ in 0..10 {
        s.advance().unwrap();
    }
    assert_eq!(s.buffer().len(), 11);
    let batch = s.batch(&params, 20).unwrap();
    for b in &batch {
        let t = make_targets(b.x, b.w, b.b, b.e, cfg.alpha);
        assert_eq!(t, b.targets);
    }
    let mut again = CloningSampler::new(&cfg, Stage::Shallow, None, 11).unwrap();
    for _ in 0..10 {
        again.advance().unwrap();
    }
    assert_eq!(again.batch(&params, 20).unwrap(), batch);
}

#[test]
fn curriculum_stops_at_a_failed_stage() {
    let cfg = CloningConfig {
        dims: Dims::new(8, 4, 4),
        stages: vec![Stage::Shallow, Stage::DeepTeacher],
        thresholds: [1e-12, 1e-12, 1e-12],
        budgets: [5, 5, 5],
        batch_size: 4,
        window: 2,
        ..CloningConfig::default()
    };
    let init = MetaParams::init(cfg.dims, &mut ChaCha8Rng::seed_from_u64(12));
    let mut steps = 0;
    let report = run_curriculum(&cfg, init, None, |_| steps += 1).unwrap();
    assert_eq!(steps, 5);
    assert_eq!(report.stages.len(), 1);
    assert!(!report.completed());
}

#[test]
fn skipped_stages_are_reported() {
    let cfg = CloningConfig {
        stages: vec![Stage::Shallow, Stage::DeepSelf],
        ..CloningConfig::default()
    };
    assert_eq!(cfg.skipped_stages(), vec![Stage::DeepTeacher]);
    assert!(CloningConfig::default().skipped_stages().is_empty());
}

#[test]
fn config_rejects_unknown_keys_and_bad_widths() {
    assert!(serde_json::from_str::<CloningConfig>(r#"{"batch": 3}"#).is_err());
    let bad = CloningConfig {
        shallow_widths: vec![8, 4, 2],
        ..CloningConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn cloned_learner_trace_is_deterministic() {
    let params = MetaParams::init(Dims::new(8, 4, 4), &mut ChaCha8Rng::seed_from_u64(13));
    let ep = toy_task(3, 40).episode(&DataStore::new(), 1).unwrap();
    let a = run_cloned_learner(&params, &ep, &[4], 8, 2).unwrap();
    assert_eq!(a.len(), 40);
    assert_eq!(a, run_cloned_learner(&params, &ep, &[4], 8, 2).unwrap());
    assert!(run_cloned_learner(&params, &ep, &[], 0, 2).is_err());
}
