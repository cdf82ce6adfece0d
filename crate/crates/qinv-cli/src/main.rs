//! Command line driver for piecewise-linear invariant synthesis.
//!
//! Subcommands: `synthesize` runs the refinement and synthesis loops on
//! a program and property file; `verify` checks a given invariant;
//! `oracle` computes exact reachability values for finite-state loops;
//! `bench` runs a corpus directory cell by cell in child processes.
//!
//! All numeric output is exact (rationals rendered as `p/q`); wall
//! times are the only floating point values that cross the boundary.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qinv_core::cegis::{CegisConfig, CegisError, SynthMode};
use qinv_core::expect::{Piecewise, Val};
use qinv_core::oracle;
use qinv_core::parser::{parse_expectation, parse_program, parse_property, print_expectation};
use qinv_core::refine::{outer_loop, OuterConfig, OuterOutcome, Strategy};
use qinv_core::scalar::{display_rat, parse_rat};
use qinv_core::smt::queries::{state_of_model, violation_query, Condition};
use qinv_core::smt::{SatResult, Session, SolverConfig};
use qinv_core::syntax::{LoopProgram, State};
use qinv_core::wp::char_fun;

/// Exit statuses: 0 success, 1 usage or internal error, 2 no invariant
/// or inadmissible, 3 inconclusive (timeout, solver unknown, budget),
/// 4 strategy inapplicable.
const EXIT_NO_INVARIANT: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const EXIT_INAPPLICABLE: u8 = 4;

#[derive(Parser)]
#[command(name = "qinv", version, about = "Prove upper bounds on probabilistic loops")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize an inductive invariant within the property bound.
    Synthesize(SynthArgs),
    /// Check whether a given invariant is admissible.
    Verify(VerifyArgs),
    /// Compute the exact reachability value of a finite-state loop.
    Oracle(OracleArgs),
    /// Run a corpus directory and emit a CSV results table.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// External SMT solver executable (default: bundled solver; the
    /// QINV_SOLVER environment variable also applies).
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Wall clock limit in seconds; also bounds individual queries.
    #[arg(long)]
    timeout: Option<u64>,
    /// Directory receiving a transcript of every solver command.
    #[arg(long, value_name = "DIR")]
    dump_smt: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let dump = match &self.dump_smt {
            None => None,
            Some(dir) => {
                fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                Some(dir.join("queries.smt2"))
            }
        };
        Ok(SolverConfig {
            path: self.solver.clone(),
            timeout: self.timeout.map(Duration::from_secs),
            dump,
        }
        .resolved())
    }
}

#[derive(Args)]
struct SynthArgs {
    program: PathBuf,
    property: PathBuf,
    /// Template refinement strategy.
    #[arg(long, default_value = "static", value_parser = parse_strategy)]
    strategy: Strategy,
    /// Synthesizer mode: plain, or safe (well-definedness and the
    /// bound certified upfront, only inductivity left to check).
    #[arg(long = "synth", default_value = "plain", value_parser = parse_mode)]
    mode: SynthMode,
    /// Cooperative verifier distance factor, or `off`.
    #[arg(long = "coop-d", default_value = "2")]
    coop_d: String,
    /// Maximum synthesize/verify iterations per template.
    #[arg(long, default_value_t = 5000)]
    budget: usize,
    /// Maximum refinement rounds.
    #[arg(long, default_value_t = 8)]
    rounds: usize,
    /// JSON-lines trace of candidates and counterexamples.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Invariant artifact file (JSON).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct VerifyArgs {
    program: PathBuf,
    property: PathBuf,
    /// Invariant: a JSON artifact from `synthesize`, or a plain text
    /// piecewise expectation.
    invariant: PathBuf,
    /// Skip the exhaustive state audit above this many states.
    #[arg(long, default_value_t = 100_000)]
    oracle_cap: usize,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct OracleArgs {
    program: PathBuf,
    property: PathBuf,
    /// Initial state as comma-separated values in declaration order;
    /// defaults to the declared lower bounds.
    #[arg(long)]
    state: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    oracle_cap: usize,
}

#[derive(Args)]
struct BenchArgs {
    corpus: PathBuf,
    /// Comma-separated strategies to run per cell.
    #[arg(long, default_value = "static,dynamic,inductivity")]
    strategies: String,
    /// Comma-separated synthesizer modes to run per cell.
    #[arg(long, default_value = "plain")]
    modes: String,
    /// Per-cell wall clock limit in seconds.
    #[arg(long, default_value_t = 120)]
    timeout: u64,
    /// Concurrently running cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV output file (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    match s {
        "static" => Ok(Strategy::Static),
        "dynamic" => Ok(Strategy::Dynamic),
        "inductivity" => Ok(Strategy::Inductivity),
        other => Err(format!("unknown strategy '{other}'")),
    }
}

fn parse_mode(s: &str) -> Result<SynthMode, String> {
    match s {
        "plain" => Ok(SynthMode::Plain),
        "safe" => Ok(SynthMode::Safe),
        other => Err(format!("unknown synthesizer mode '{other}'")),
    }
}

fn mode_name(m: SynthMode) -> &'static str {
    match m {
        SynthMode::Plain => "plain",
        SynthMode::Safe => "safe",
    }
}

fn load_program(path: &Path) -> Result<LoopProgram> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_program(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Synthesize(a) => cmd_synthesize(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Oracle(a) => cmd_oracle(a),
        Cmd::Bench(a) => cmd_bench(a),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_synthesize(a: SynthArgs) -> Result<ExitCode> {
    let prog = load_program(&a.program)?;
    let prop_text = fs::read_to_string(&a.property)
        .with_context(|| format!("reading {}", a.property.display()))?;
    let prop = parse_property(&prop_text, &prog.decls)
        .map_err(|e| anyhow!("{}: {e}", a.property.display()))?;
    let coop = match a.coop_d.as_str() {
        "off" => None,
        s => Some(parse_rat(s).map_err(|e| anyhow!("--coop-d: {e}"))?),
    };
    let cfg = OuterConfig {
        strategy: a.strategy,
        round_cap: a.rounds,
        cegis: CegisConfig {
            budget: a.budget,
            coop_factor: coop,
            mode: a.mode,
            deadline: a.solver.timeout.map(|s| Instant::now() + Duration::from_secs(s)),
        },
    };
    let solver = a.solver.config()?;
    let mut trace_file = match &a.trace {
        None => None,
        Some(p) => Some(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        ),
    };
    let start = Instant::now();
    let report = match outer_loop(
        &prog,
        &prop,
        &solver,
        &cfg,
        trace_file.as_mut().map(|f| f as &mut dyn std::io::Write),
    ) {
        Ok(r) => r,
        Err(CegisError::Encoding(msg)) => {
            eprintln!("error: {msg}");
            return Ok(ExitCode::from(EXIT_INAPPLICABLE));
        }
        Err(e) => return Err(e.into()),
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1000.0;

    let mut summary = json!({
        "program": a.program.display().to_string(),
        "property": a.property.display().to_string(),
        "strategy": a.strategy.name(),
        "mode": mode_name(a.mode),
        "counterexamples": report.total_counterexamples,
        "rounds": report.rounds,
        "wall_ms": wall_ms,
    });
    let code = match &report.outcome {
        OuterOutcome::Invariant { valuation, invariant, .. } => {
            let text = print_expectation(invariant, &prog.decls);
            let vals: serde_json::Map<String, serde_json::Value> = valuation
                .0
                .iter()
                .map(|(t, q)| {
                    (qinv_core::expect::tvar_name(*t), json!(display_rat(q)))
                })
                .collect();
            summary["outcome"] = json!("invariant");
            summary["invariant_size"] = json!(invariant.pieces.len());
            summary["invariant"] = json!(text);
            summary["valuation"] = json!(vals);
            if let Some(out) = &a.out {
                fs::write(out, serde_json::to_string_pretty(&summary)?)
                    .with_context(|| format!("writing {}", out.display()))?;
            }
            ExitCode::SUCCESS
        }
        OuterOutcome::Exhausted { reason } => {
            summary["outcome"] = json!("exhausted");
            summary["reason"] = json!(reason);
            // a spent round cap means every tried template was refuted;
            // anything else means the search itself gave up
            if reason == "round cap reached" {
                ExitCode::from(EXIT_NO_INVARIANT)
            } else {
                ExitCode::from(EXIT_INCONCLUSIVE)
            }
        }
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(code)
}

fn load_invariant(path: &Path, prog: &LoopProgram) -> Result<Piecewise> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let source = if path.extension().map(|e| e == "json").unwrap_or(false) {
        let v: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        v.get("invariant")
            .and_then(|i| i.as_str())
            .ok_or_else(|| anyhow!("{}: no \"invariant\" field", path.display()))?
            .to_string()
    } else {
        text
    };
    let inv = parse_expectation(&source, &prog.decls)
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    if !inv.is_concrete() {
        bail!("{}: invariant contains template variables", path.display());
    }
    Ok(inv)
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode> {
    let prog = load_program(&a.program)?;
    let prop_text = fs::read_to_string(&a.property)
        .with_context(|| format!("reading {}", a.property.display()))?;
    let prop = parse_property(&prop_text, &prog.decls)
        .map_err(|e| anyhow!("{}: {e}", a.property.display()))?;
    let inv = load_invariant(&a.invariant, &prog)?;
    let solver = a.solver.config()?;

    let mut sess = Session::new(&solver)?;
    let psi = char_fun(&prog, &prop.post, &inv, &mut sess)?;
    let mut counterexample: Option<(Condition, State)> = None;
    for cond in Condition::ALL {
        let q = violation_query(&inv, &psi, &prop.bound, cond);
        sess.push()?;
        sess.assert_constraint(&q, &prog.decls)?;
        let r = sess.check_sat()?;
        if r == SatResult::Sat {
            let model = sess.get_model()?;
            let s = state_of_model(&model, &prog.decls).map_err(|e| anyhow!(e))?;
            counterexample = Some((cond, s));
        }
        sess.pop()?;
        if counterexample.is_some() {
            break;
        }
    }

    // independent audit by direct evaluation when the state space fits
    let pointwise = match oracle::enumerate_box(&prog.decls, a.oracle_cap) {
        Err(_) => json!({ "status": "skipped" }),
        Ok(states) => {
            let mut bad = 0usize;
            let mut first: Option<serde_json::Value> = None;
            for s in &states {
                let rep = oracle::pointwise_check(&prog, &inv, &prop.post, &prop.bound, s)
                    .map_err(|e| anyhow!(e))?;
                if !(rep.well_defined && rep.inductive && rep.safe) {
                    bad += 1;
                    first.get_or_insert_with(|| {
                        json!({
                            "state": s.0,
                            "well_defined": rep.well_defined,
                            "inductive": rep.inductive,
                            "safe": rep.safe,
                        })
                    });
                }
            }
            json!({
                "status": "checked",
                "states": states.len(),
                "violations": bad,
                "first_violation": first,
            })
        }
    };

    let admissible = counterexample.is_none();
    let out = json!({
        "admissible": admissible,
        "counterexample": counterexample.as_ref().map(|(cond, s)| json!({
            "condition": cond.name(),
            "state": s.0,
        })),
        "pointwise": pointwise,
    });
    println!("{}", serde_json::to_string(&out)?);
    Ok(if admissible { ExitCode::SUCCESS } else { ExitCode::from(EXIT_NO_INVARIANT) })
}

fn cmd_oracle(a: OracleArgs) -> Result<ExitCode> {
    let prog = load_program(&a.program)?;
    let prop_text = fs::read_to_string(&a.property)
        .with_context(|| format!("reading {}", a.property.display()))?;
    let prop = parse_property(&prop_text, &prog.decls)
        .map_err(|e| anyhow!("{}: {e}", a.property.display()))?;
    let chain = oracle::build_chain(&prog, a.oracle_cap).map_err(|e| anyhow!("{e}"))?;
    let lfp = oracle::exact_lfp(&chain, &prop.post).map_err(|e| anyhow!("{e}"))?;
    let s = match &a.state {
        Some(text) => {
            let vals: Result<Vec<u64>, _> =
                text.split(',').map(|p| p.trim().parse::<u64>()).collect();
            State(vals.context("--state must be comma-separated naturals")?)
        }
        None => State(prog.decls.ids().map(|x| prog.decls.bounds(x).0).collect()),
    };
    let idx = *chain
        .index
        .get(&s)
        .ok_or_else(|| anyhow!("state {s} is outside the declared box"))?;
    let value = &lfp[idx];
    let bound = prop.bound.eval(&s);
    let (bound_text, holds) = match &bound {
        Val::Inf => ("INF".to_string(), true),
        Val::Fin(b) => (display_rat(b), value <= b),
    };
    let out = json!({
        "state": s.0,
        "value": display_rat(value),
        "bound": bound_text,
        "bound_holds": holds,
    });
    println!("{}", serde_json::to_string(&out)?);
    Ok(ExitCode::SUCCESS)
}

struct Cell {
    program: PathBuf,
    property: PathBuf,
    strategy: String,
    mode: String,
}

fn cmd_bench(a: BenchArgs) -> Result<ExitCode> {
    let strategies: Vec<String> =
        a.strategies.split(',').map(|s| s.trim().to_string()).collect();
    let modes: Vec<String> = a.modes.split(',').map(|s| s.trim().to_string()).collect();
    let mut programs: Vec<PathBuf> = fs::read_dir(&a.corpus)
        .with_context(|| format!("reading {}", a.corpus.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "pgcl").unwrap_or(false))
        .collect();
    programs.sort();
    let mut cells = Vec::new();
    for prog in &programs {
        let base = prog.file_stem().unwrap().to_str().unwrap().to_string();
        let mut props: Vec<PathBuf> = fs::read_dir(&a.corpus)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().map(|e| e == "prop").unwrap_or(false)
                    && p.file_name()
                        .unwrap()
                        .to_str()
                        .unwrap()
                        .starts_with(&format!("{base}."))
            })
            .collect();
        props.sort();
        for prop in props {
            for st in &strategies {
                for md in &modes {
                    cells.push(Cell {
                        program: prog.clone(),
                        property: prop.clone(),
                        strategy: st.clone(),
                        mode: md.clone(),
                    });
                }
            }
        }
    }

    let exe = std::env::current_exe().context("locating own executable")?;
    let jobs = a.jobs.max(1);
    let mut rows: Vec<String> = Vec::with_capacity(cells.len());
    for chunk in cells.chunks(jobs) {
        let mut running = Vec::new();
        for cell in chunk {
            let child = std::process::Command::new(&exe)
                .arg("synthesize")
                .arg(&cell.program)
                .arg(&cell.property)
                .arg("--strategy")
                .arg(&cell.strategy)
                .arg("--synth")
                .arg(&cell.mode)
                .arg("--timeout")
                .arg(a.timeout.to_string())
                .stdout(std::process::Stdio::piped())
                .stderr(std::process::Stdio::null())
                .spawn()
                .with_context(|| format!("spawning cell for {}", cell.program.display()))?;
            running.push((cell, child, Instant::now()));
        }
        for (cell, mut child, started) in running {
            // the child enforces its own wall clock budget; the grace
            // period only catches a wedged process
            let hard = Duration::from_secs(a.timeout + 30);
            let status = loop {
                match child.try_wait()? {
                    Some(st) => break Some(st),
                    None if started.elapsed() > hard => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break None;
                    }
                    None => std::thread::sleep(Duration::from_millis(50)),
                }
            };
            let mut outcome = "killed".to_string();
            let mut cex = String::new();
            let mut size = String::new();
            let mut wall = String::new();
            let mut code = -1i32;
            if let Some(st) = status {
                code = st.code().unwrap_or(-1);
                let mut stdout = String::new();
                use std::io::Read as _;
                if let Some(mut s) = child.stdout.take() {
                    let _ = s.read_to_string(&mut stdout);
                }
                if let Some(line) = stdout.lines().last() {
                    if let Ok(v) = serde_json::from_str::<serde_json::Value>(line) {
                        outcome = v
                            .get("outcome")
                            .and_then(|o| o.as_str())
                            .unwrap_or("error")
                            .to_string();
                        cex = v
                            .get("counterexamples")
                            .map(|n| n.to_string())
                            .unwrap_or_default();
                        size = v
                            .get("invariant_size")
                            .map(|n| n.to_string())
                            .unwrap_or_default();
                        wall = v
                            .get("wall_ms")
                            .map(|n| n.to_string())
                            .unwrap_or_default();
                    } else {
                        outcome = "error".to_string();
                    }
                } else {
                    outcome = "error".to_string();
                }
            }
            rows.push(format!(
                "{},{},{},{},{},{},{},{},{}",
                cell.program.file_name().unwrap().to_str().unwrap(),
                cell.property.file_name().unwrap().to_str().unwrap(),
                cell.strategy,
                cell.mode,
                outcome,
                cex,
                size,
                wall,
                code,
            ));
        }
    }

    let header =
        "program,property,strategy,mode,outcome,counterexamples,invariant_size,wall_ms,exit_code";
    let table = std::iter::once(header.to_string())
        .chain(rows)
        .collect::<Vec<_>>()
        .join("\n");
    match &a.out {
        None => println!("{table}"),
        Some(p) => {
            let mut f =
                fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            writeln!(f, "{table}")?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
