//! Extended randomized shakeout across generators, sizes, and gadget
//! families. Exits nonzero on any failure.

use atsp_core::gen::{self, GenKind};
use atsp_core::pipeline::{approx_atsp, brute_force_atsp, verify_tour, Solver, SolverConfig};

fn main() {
    let cfg = SolverConfig::default();
    let mut runs = 0u64;
    let mut fails = 0u64;
    let mut vertebrate_merges = 0u64;
    let mut deep_alam = 0u64;
    for kind in [GenKind::Random, GenKind::NodeWeighted, GenKind::TwoWeight] {
        for n in 3..=12usize {
            for seed in 0..20u64 {
                let (g, w) = gen::generate(kind, n, seed * 977 + n as u64).unwrap();
                match approx_atsp(&g, &w, &cfg) {
                    Ok(rep) => {
                        verify_tour(&g, &rep.tour.edges).unwrap();
                        if n <= 9 {
                            let (opt, _) = brute_force_atsp(&g, &w).unwrap();
                            assert!(opt >= rep.hk_value && rep.weight >= opt);
                        }
                        assert!(rep.weight <= &rep.ratio_bound * &rep.hk_value);
                        vertebrate_merges += rep.stats.vertebrate_merges;
                        deep_alam += (rep.stats.alam_depth > 0) as u64;
                    }
                    Err(e) => {
                        fails += 1;
                        println!("FAIL {kind:?} n={n} seed={seed}: {e}");
                    }
                }
                runs += 1;
            }
        }
    }
    // The vertebrate gadget family end to end through a_lam.
    for seed in 0..60u64 {
        let (inst, _) = gen::random_vertebrate_gadget(seed).unwrap();
        let mut solver = Solver::new(cfg.clone());
        match solver.a_lam(&inst) {
            Ok(tour) => {
                assert_eq!(tour.vertices(&inst.g).len(), inst.n());
                vertebrate_merges += solver.stats.vertebrate_merges;
            }
            Err(e) => {
                fails += 1;
                println!("FAIL gadget seed={seed}: {e}");
            }
        }
        runs += 1;
    }
    println!(
        "stress: {runs} runs, {fails} failures, vertebrate_merges={vertebrate_merges}, deep_alam={deep_alam}"
    );
    std::process::exit(if fails > 0 { 1 } else { 0 });
}
