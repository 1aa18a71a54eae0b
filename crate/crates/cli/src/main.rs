//! `atsp`: solve, inspect, generate, and benchmark ATSP instances with the
//! constant-factor approximation pipeline.
//!
//! Exit codes: 0 success, 1 solve error, 2 parse error, 3 internal
//! assertion failure (a reproducible dump path is printed to stderr).

use atsp_core::error::AtspError;
use atsp_core::gen::{self, GenKind};
use atsp_core::graph::Digraph;
use atsp_core::heldkarp::{extract_laminar_dual, solve_held_karp};
use atsp_core::instance::build_instance;
use atsp_core::io::{emit_json, emit_tsplib, parse_instance, FileFormat};
use atsp_core::laminar_ops::{contract, is_reducible};
use atsp_core::pipeline::{approx_atsp_traced, brute_force_atsp, SolverConfig, Solver};
use atsp_core::ratio::{rat_from_string, rat_to_f64, rat_to_string, Rat};
use clap::{Parser, Subcommand};
use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "atsp", about = "Constant-factor ATSP approximation solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Laminar-reduction threshold delta as p/q (default 78/100).
    #[arg(long, global = true)]
    delta: Option<String>,
    /// Merge-engine epsilon as p/q (default 1/4).
    #[arg(long, global = true)]
    epsilon: Option<String>,
    /// Append decimal approximations next to exact rationals.
    #[arg(long, global = true)]
    human: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance end to end and print the solve report as JSON.
    Solve {
        /// Instance file (TSPLIB ATSP or native JSON); "-" for stdin.
        file: String,
        /// Write a JSON-lines merge trace to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Cross-check against the exact oracle when n <= 9.
        #[arg(long)]
        oracle_check: bool,
    },
    /// Solve only the Held-Karp relaxation; print value and x.
    Hk { file: String },
    /// Print the uncrossed laminar dual: family, y, alpha.
    Dual { file: String },
    /// Reduce to an irreducible instance and print its quasi-backbone.
    Backbone { file: String },
    /// Compare the solver against the exact oracle over seeded instances.
    OracleCompare {
        #[arg(long, default_value_t = 3)]
        n_min: usize,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value = "random")]
        kind: String,
    },
    /// Timing statistics over seeded instances.
    Bench {
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, default_value = "random")]
        kind: String,
    },
    /// Emit a generated instance to stdout.
    Generate {
        /// random | node-weighted | two-weight | fig2-contraction |
        /// series-scc | single-set-vertebrate
        #[arg(long, default_value = "random")]
        kind: String,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "json")]
        format: String,
    },
}

fn read_input(path: &str) -> Result<String, AtspError> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| AtspError::Parse {
                line: 0,
                msg: format!("stdin: {e}"),
            })?;
        Ok(buf)
    } else {
        fs::read_to_string(path).map_err(|e| AtspError::Parse {
            line: 0,
            msg: format!("{path}: {e}"),
        })
    }
}

fn config_from(cli: &Cli, oracle_check: bool) -> Result<SolverConfig, AtspError> {
    let mut cfg = SolverConfig {
        oracle_check,
        ..SolverConfig::default()
    };
    if let Some(d) = &cli.delta {
        cfg.delta = rat_from_string(d)?;
    }
    if let Some(e) = &cli.epsilon {
        cfg.epsilon = rat_from_string(e)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn rat_json(r: &Rat, human: bool) -> serde_json::Value {
    if human {
        serde_json::json!({ "exact": rat_to_string(r), "approx": rat_to_f64(r) })
    } else {
        serde_json::Value::String(rat_to_string(r))
    }
}

fn run(cli: Cli) -> Result<(), AtspError> {
    let human = cli.human;
    match &cli.command {
        Command::Solve {
            file,
            trace,
            oracle_check,
        } => {
            let text = read_input(file)?;
            let (g, w) = parse_instance(&text)?;
            let cfg = config_from(&cli, *oracle_check)?;
            let mut trace_file = match trace {
                Some(path) => Some(fs::File::create(path).map_err(|e| AtspError::Parse {
                    line: 0,
                    msg: format!("trace file: {e}"),
                })?),
                None => None,
            };
            let rep = approx_atsp_traced(
                &g,
                &w,
                &cfg,
                trace_file.as_mut().map(|f| f as &mut dyn std::io::Write),
            )?;
            let out = serde_json::json!({
                "n": g.n(),
                "hk_value": rat_json(&rep.hk_value, human),
                "weight": rat_json(&rep.weight, human),
                "ratio": rat_json(&rep.ratio, human),
                "ratio_bound": rat_json(&rep.ratio_bound, human),
                "tour_walk": rep.tour.walk,
                "stats": {
                    "lp_pivots": rep.stats.lp_pivots,
                    "merge_rounds": rep.stats.merge_rounds,
                    "merge_reinits": rep.stats.merge_reinits,
                    "oracle_calls": rep.stats.oracle_calls,
                    "alam_depth": rep.stats.alam_depth,
                    "airr_calls": rep.stats.airr_calls,
                },
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
        }
        Command::Hk { file } => {
            let text = read_input(file)?;
            let (g, w) = parse_instance(&text)?;
            let hk = solve_held_karp(&g, &w)?;
            let out = serde_json::json!({
                "value": rat_json(&hk.value, human),
                "x": g.edges().iter().map(|e| serde_json::json!({
                    "tail": e.tail,
                    "head": e.head,
                    "x": rat_json(&hk.x[e.id], human),
                })).collect::<Vec<_>>(),
                "cuts_generated": hk.cuts.len(),
                "lp_pivots": hk.lp_pivots,
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
        }
        Command::Dual { file } => {
            let text = read_input(file)?;
            let (g, w) = parse_instance(&text)?;
            let hk = solve_held_karp(&g, &w)?;
            let dual = extract_laminar_dual(&g, &w, &hk)?;
            let out = serde_json::json!({
                "objective": rat_json(&dual.objective, human),
                "alpha": dual.alpha.iter().map(|a| rat_json(a, human)).collect::<Vec<_>>(),
                "family": dual.family.iter().map(|(s, y)| serde_json::json!({
                    "vertices": s.to_vec(),
                    "y": rat_json(y, human),
                })).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
        }
        Command::Backbone { file } => {
            let text = read_input(file)?;
            let (g, w) = parse_instance(&text)?;
            let cfg = config_from(&cli, false)?;
            let hk = solve_held_karp(&g, &w)?;
            let dual = extract_laminar_dual(&g, &w, &hk)?;
            let mut inst = build_instance(&g, &w, &hk, &dual)?;
            // Contract minimal reducible sets until irreducible, then build
            // the quasi-backbone of the core.
            let mut contractions = Vec::new();
            loop {
                let mut ids: Vec<usize> = (0..inst.laminar.len()).collect();
                ids.sort_by_key(|&id| (inst.laminar.get(id).vset.len(), id));
                let mut found = None;
                for id in ids {
                    if is_reducible(&inst, &inst.laminar.get(id).vset, &cfg.delta)? {
                        found = Some(id);
                        break;
                    }
                }
                match found {
                    Some(id) => {
                        contractions.push(inst.laminar.get(id).vset.to_vec());
                        let (next, _) = contract(&inst, id)?;
                        inst = next;
                    }
                    None => break,
                }
            }
            let mut solver = Solver::new(cfg);
            let b = solver.quasi_backbone(&inst)?;
            let out = serde_json::json!({
                "reduced_sets": contractions,
                "core_n": inst.n(),
                "backbone_walk": b.walk,
                "backbone_cost": rat_json(&inst.cost_subtour(&b), human),
                "core_value": rat_json(&inst.total_value(), human),
            });
            println!("{}", serde_json::to_string_pretty(&out).unwrap());
        }
        Command::OracleCompare {
            n_min,
            n_max,
            seeds,
            kind,
        } => {
            let cfg = config_from(&cli, false)?;
            let kind = GenKind::parse(kind)?;
            let bound = cfg.final_ratio();
            for n in *n_min..=*n_max {
                for seed in 0..*seeds {
                    let (g, w) = gen::generate(kind, n, seed)?;
                    let rep = approx_atsp_traced(&g, &w, &cfg, None)?;
                    let (opt, _) = brute_force_atsp(&g, &w)?;
                    let ok = rep.weight >= opt
                        && opt >= rep.hk_value
                        && rep.weight <= &bound * &rep.hk_value;
                    let row = serde_json::json!({
                        "n": n,
                        "seed": seed,
                        "opt": rat_json(&opt, human),
                        "hk": rat_json(&rep.hk_value, human),
                        "alg": rat_json(&rep.weight, human),
                        "ratio": rat_json(&rep.ratio, human),
                        "ok": ok,
                    });
                    println!("{row}");
                    if !ok {
                        return Err(AtspError::Assertion {
                            stage: "oracle-compare".into(),
                            detail: format!("row n={n} seed={seed} failed"),
                            dump: None,
                        });
                    }
                }
            }
        }
        Command::Bench { n, seeds, kind } => {
            let cfg = config_from(&cli, false)?;
            let kind = GenKind::parse(kind)?;
            let mut times = Vec::new();
            for seed in 0..*seeds {
                let (g, w) = gen::generate(kind, *n, seed)?;
                let t0 = Instant::now();
                let rep = approx_atsp_traced(&g, &w, &cfg, None)?;
                let ms = t0.elapsed().as_millis() as u64;
                times.push(ms);
                let row = serde_json::json!({
                    "n": n,
                    "seed": seed,
                    "wall_ms": ms,
                    "hk": rat_json(&rep.hk_value, human),
                    "alg": rat_json(&rep.weight, human),
                });
                println!("{row}");
            }
            let total: u64 = times.iter().sum();
            let summary = serde_json::json!({
                "runs": times.len(),
                "min_ms": times.iter().min().copied().unwrap_or(0),
                "max_ms": times.iter().max().copied().unwrap_or(0),
                "mean_ms": if times.is_empty() { 0 } else { total / times.len() as u64 },
            });
            println!("{summary}");
        }
        Command::Generate {
            kind,
            n,
            seed,
            format,
        } => {
            let kind = GenKind::parse(kind)?;
            let (g, w): (Digraph, Vec<Rat>) = gen::generate(kind, *n, *seed)?;
            match FileFormat::parse(format)? {
                FileFormat::Json => println!("{}", emit_json(&g, &w)),
                FileFormat::Tsplib => {
                    print!("{}", emit_tsplib(&format!("gen-{n}-{seed}"), &g, &w)?)
                }
            }
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            let code = match &err {
                AtspError::Parse { .. } => 2,
                AtspError::Assertion { dump, stage, .. } => {
                    if let Some(d) = dump {
                        let path = std::env::temp_dir()
                            .join(format!("atsp-dump-{stage}-{}.json", std::process::id()));
                        if fs::write(&path, d).is_ok() {
                            eprintln!("instance dump written to {}", path.display());
                        }
                    }
                    3
                }
                _ => 1,
            };
            eprintln!("error: {err}");
            std::process::exit(code);
        }
    }
}
