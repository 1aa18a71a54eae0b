//! Minimal library usage: generate a random instance, solve it, print the
//! certified ratio.

use atsp_core::gen;
use atsp_core::pipeline::{approx_atsp, SolverConfig};
use atsp_core::ratio::rat_to_string;

fn main() {
    let (g, w) = gen::random_instance(8, 17);
    let report = approx_atsp(&g, &w, &SolverConfig::default()).unwrap();
    println!(
        "hk = {}, tour = {}, ratio = {} (certified bound {})",
        rat_to_string(&report.hk_value),
        rat_to_string(&report.weight),
        rat_to_string(&report.ratio),
        rat_to_string(&report.ratio_bound),
    );
}
