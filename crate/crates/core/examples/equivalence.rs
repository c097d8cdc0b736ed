//! A grid of shared vanilla RNNs is a single RNN with a structured weight
//! matrix. Check that numerically on random instances.
use vsml::equivalence::verify_equivalence;

fn main() -> vsml::Result<()> {
    let trials = verify_equivalence(30, 3, 1)?;
    println!("trial  A=B  N  nonzero blocks  max |dev|");
    for t in &trials {
        println!(
            "{:5}  {:3}  {}  {:6} / {:<6}  {:.2e}",
            t.trial, t.grid, t.n, t.nonzero_blocks, t.expected_nonzero_blocks, t.max_abs_deviation
        );
    }
    let worst = trials.iter().map(|t| t.max_abs_deviation).fold(0.0, f64::max);
    println!("worst deviation {worst:.2e}");
    Ok(())
}
