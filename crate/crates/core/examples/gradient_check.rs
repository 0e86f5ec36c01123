//! Finite-difference check of every layer and loss gradient.
//!
//! `cargo run --release --example gradient_check -- [configs] [seed]`

use beatgen::nn::gradcheck::{run_suite, STEP, TOLERANCE};

fn main() -> beatgen::Result<()> {
    let mut args = std::env::args().skip(1);
    let configs = args.next().and_then(|a| a.parse().ok()).unwrap_or(50);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    println!("h = {STEP:e}, tolerance {TOLERANCE:e}, {configs} random configurations each");
    for c in run_suite(configs, seed)? {
        let verdict = if c.passed() { "ok" } else { "FAIL" };
        println!("{:<16} {:>9.2e}  {:>7} entries  {verdict}", c.name, c.max_rel_error, c.entries);
    }
    Ok(())
}
