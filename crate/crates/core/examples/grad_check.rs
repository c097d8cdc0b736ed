//! Finite-difference check of every analytic gradient in the crate.
use vsml::grad::{run_suite, GRAD_TOLERANCE};

fn main() -> vsml::Result<()> {
    for c in run_suite(20, 0)? {
        println!(
            "{:28} {:3} instances  max rel err {:.2e}  {}",
            c.operation,
            c.instances,
            c.max_deviation,
            if c.passed { "ok" } else { "FAIL" }
        );
    }
    println!("tolerance {GRAD_TOLERANCE:e}");
    Ok(())
}
