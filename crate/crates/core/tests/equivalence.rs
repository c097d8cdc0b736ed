use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vsml::equivalence::{
    analytic_nonzero_blocks, block_case, build_w_tilde, step_via_messages, step_via_w_tilde, verify_equivalence,
    BlockCase, VanillaSharedRnn,
};

#[test]
fn scalar_grid_by_hand() {
    let rnn = VanillaSharedRnn::new(1, 1, 1, vec![0.5], vec![0.25]).unwrap();
    let wt = build_w_tilde(&rnn).unwrap();
    assert_eq!(wt.get(0, 0), 0.75);
    assert_eq!(step_via_w_tilde(&[1.0], &wt).unwrap(), vec![0.75f64.tanh()]);
    assert_eq!(step_via_messages(&[1.0], &rnn).unwrap(), vec![0.75f64.tanh()]);
}

#[test]
fn block_cases() {
    assert_eq!(block_case(0, 0, 0, 0), BlockCase::Both);
    assert_eq!(block_case(1, 0, 0, 2), BlockCase::Message);
    assert_eq!(block_case(0, 2, 0, 2), BlockCase::Recurrent);
    assert_eq!(block_case(1, 2, 0, 2), BlockCase::Zero);
}

#[test]
fn nonzero_block_count_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in 1..=6 {
        let wt = build_w_tilde(&VanillaSharedRnn::random(1, m, &mut rng)).unwrap();
        assert_eq!(wt.nonzero_blocks(), analytic_nonzero_blocks(m), "m = {m}");
    }
}

#[test]
fn rectangular_grid_is_rejected() {
    let rnn = VanillaSharedRnn::new(1, 2, 3, vec![0.1], vec![0.2]).unwrap();
    assert!(build_w_tilde(&rnn).is_err());
}

#[test]
fn large_grids_use_the_rule_instead_of_a_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rnn = VanillaSharedRnn::random(5, 4, &mut rng);
    let wt = build_w_tilde(&rnn).unwrap();
    assert!(!wt.is_dense());
    let s: Vec<f64> = (0..rnn.state_len()).map(|i| (i as f64 * 0.37).sin()).collect();
    let a = step_via_w_tilde(&s, &wt).unwrap();
    let b = step_via_messages(&s, &rnn).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn verification_sweep_covers_requested_shapes() {
    let r = verify_equivalence(9, 3, 0).unwrap();
    assert_eq!(r.len(), 9);
    assert!(r.iter().all(|t| t.max_abs_deviation < 1e-12));
    assert!(verify_equivalence(3, 0, 0).is_err());
}

proptest! {
    #[test]
    fn both_paths_agree(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rnn = VanillaSharedRnn::random(n, m, &mut rng);
        let s: Vec<f64> = (0..rnn.state_len()).map(|i| ((seed as f64) + i as f64).cos()).collect();
        let a = step_via_w_tilde(&s, &build_w_tilde(&rnn).unwrap()).unwrap();
        let b = step_via_messages(&s, &rnn).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
