//! `mpec`: load an instance, run a solver or the oracle, compare methods,
//! check matrix properties.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mpec_core::implicit::{implicit_solve, lower_solve, ImplicitParams};
use mpec_core::linalg::Vector;
use mpec_core::matrix_props::{
    has_w_property, lh_star_is_homeomorphism, lh_star_pair, lower_partition, mixed_p_falsify, mixed_p_necessary,
    reduced_lh_blocks,
};
use mpec_core::model::{default_tolerance, index_sets, Iterate, MpecInstance};
use mpec_core::oracle::enumerate_global;
use mpec_core::pipa::{pipa_solve, PipaParams};
use mpec_core::pipa_lcp::lcp_pipa_solve;
use mpec_core::psqp::{psqp_solve, KktMpecInstance, PsqpParams};
use mpec_core::report::SolveReport;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

/// Solvers for quadratic programs with affine equilibrium constraints.
///
/// Default starts: `pipa` and `pipa-lcp` use the start stored in the instance
/// (which must have y, w > 0) or else x = projection of 0 onto X with
/// y = w = 1; `implicit` uses the stored x or the projected origin; `psqp`
/// starts from that x with (y, w) solving the lower level.
#[derive(Parser, Debug)]
#[command(name = "mpec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one solver; exit 0 when converged, 2 otherwise, 1 on error.
    Solve(SolveArgs),
    /// Run every solver and the oracle; prints a CSV table.
    Compare(CompareArgs),
    /// Validate an instance and report matrix-property verdicts as JSON.
    Check(CheckArgs),
    /// Global minimum by piece enumeration, as JSON.
    Oracle(OracleArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Algo {
    Pipa,
    PipaLcp,
    Implicit,
    Psqp,
    Oracle,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Pipa => "pipa",
            Algo::PipaLcp => "pipa-lcp",
            Algo::Implicit => "implicit",
            Algo::Psqp => "psqp",
            Algo::Oracle => "oracle",
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Overrides {
    /// JSON file with the solver's parameter fields.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Seed for every randomized component.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Main termination tolerance of the solver.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    #[arg(long)]
    instance: PathBuf,
    /// JSON-lines trace output.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// JSON report output; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long, required = true, num_args = 1..)]
    instance: Vec<PathBuf>,
    /// CSV output; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random samples for the mixed-P counterexample search.
    #[arg(long, default_value_t = 2000)]
    samples: usize,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
}

fn load_params<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing parameters in {}", p.display()))
        }
    }
}

fn load_instance(path: &Path) -> Result<MpecInstance> {
    MpecInstance::load(path).with_context(|| format!("loading {}", path.display()))
}

fn interior_start(inst: &MpecInstance) -> Result<Iterate> {
    if let Some(s) = &inst.start {
        if !s.is_interior() {
            bail!("the stored start has y or w not strictly positive; interior methods need y, w > 0");
        }
    }
    Ok(inst.interior_start()?)
}

fn start_x(inst: &MpecInstance) -> Result<Vector> {
    match &inst.start {
        Some(s) => Ok(s.x.clone()),
        None => Ok(inst.projected_origin()?),
    }
}

fn run_solver(algo: Algo, inst: &MpecInstance, o: &Overrides) -> Result<SolveReport> {
    let path = o.params.as_deref();
    let report = match algo {
        Algo::Pipa | Algo::PipaLcp => {
            let mut p: PipaParams = load_params(path)?;
            if let Some(n) = o.max_iters {
                p.max_iters = n;
            }
            if let Some(t) = o.tol {
                p.tol_phi = t;
            }
            let start = interior_start(inst)?;
            if algo == Algo::Pipa {
                pipa_solve(inst, &start, &p)?
            } else {
                lcp_pipa_solve(inst, &start, &p)?
            }
        }
        Algo::Implicit => {
            let mut p: ImplicitParams = load_params(path)?;
            if let Some(n) = o.max_iters {
                p.max_iters = n;
            }
            if let Some(t) = o.tol {
                p.tol_stat = t;
            }
            implicit_solve(inst, &start_x(inst)?, &p)?
        }
        Algo::Psqp => {
            let mut p: PsqpParams = load_params(path)?;
            if let Some(n) = o.max_iters {
                p.max_iters = n;
            }
            if let Some(t) = o.tol {
                p.tol = t;
            }
            let kkt = KktMpecInstance::from_lcp(inst)?;
            let x = start_x(inst)?;
            let sol = lower_solve(inst, &x)?;
            psqp_solve(&kkt, &KktMpecInstance::stack_lcp(&sol.iterate(&x)), &p)?
        }
        Algo::Oracle => unreachable!("the oracle has no iteration report"),
    };
    Ok(report)
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn oracle_json(inst: &MpecInstance) -> Result<serde_json::Value> {
    let g = enumerate_global(inst)?;
    let p = &g.best.point;
    Ok(json!({
        "best_value": g.best.value,
        "best_point": { "x": p.x.as_slice(), "y": p.y.as_slice(), "w": p.w.as_slice(), "z": p.z.as_slice() },
        "pattern": g.best.pattern,
        "approximate_flag": g.approximate(),
    }))
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let inst = load_instance(&args.instance)?;
    if args.algo == Algo::Oracle {
        write_json(&oracle_json(&inst)?, args.report.as_deref())?;
        return Ok(0);
    }
    let report = run_solver(args.algo, &inst, &args.overrides)?;
    if let Some(path) = &args.trace {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        report.write_trace(&mut out)?;
        out.flush()?;
    }
    write_json(&report.summary(), args.report.as_deref())?;
    Ok(if report.status.is_converged() { 0 } else { 2 })
}

fn csv_field(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

fn cmd_compare(args: &CompareArgs) -> Result<u8> {
    let mut rows = vec!["instance,algo,status,iters,final_value,value_gap,phi,wall_ms".to_string()];
    for path in &args.instance {
        let inst = load_instance(path)?;
        let name = path.display().to_string();
        let t = Instant::now();
        let oracle = enumerate_global(&inst);
        let oracle_ms = t.elapsed().as_secs_f64() * 1e3;
        let best = oracle.as_ref().ok().map(|g| g.best.value);
        match &oracle {
            Ok(g) => rows.push(format!("{name},oracle,{},0,{},0,0,{oracle_ms:.3}", if g.approximate() { "approximate" } else { "exact" }, csv_field(Some(g.best.value)))),
            Err(e) => rows.push(format!("{name},oracle,error: {e},,,,,{oracle_ms:.3}")),
        }
        for algo in [Algo::Pipa, Algo::PipaLcp, Algo::Implicit, Algo::Psqp] {
            let t = Instant::now();
            let result = run_solver(algo, &inst, &args.overrides);
            let ms = t.elapsed().as_secs_f64() * 1e3;
            let row = match result {
                Ok(r) => {
                    let status = serde_json::to_value(r.status)?.as_str().unwrap_or_default().to_string();
                    let gap = best.map(|b| r.final_value - b);
                    format!(
                        "{name},{},{status},{},{},{},{},{ms:.3}",
                        algo.name(),
                        r.iterations,
                        csv_field(Some(r.final_value)),
                        csv_field(gap),
                        csv_field(Some(r.final_phi))
                    )
                }
                Err(e) => format!("{name},{},\"error: {}\",,,,,{ms:.3}", algo.name(), format!("{e:#}").replace('"', "'")),
            };
            rows.push(row);
        }
    }
    let text = rows.join("\n") + "\n";
    match &args.report {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_check(args: &CheckArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.instance).with_context(|| format!("reading {}", args.instance.display()))?;
    let inst = MpecInstance::parse_json(&text).with_context(|| format!("parsing {}", args.instance.display()))?;
    let issues = inst.validate();
    let mut out = json!({
        "valid": issues.is_empty(),
        "issues": issues,
        "form": if inst.is_lcp() { "lcp" } else { "affine" },
    });
    // the point the verdicts are taken at: the stored start when it is
    // complementary, else the lower-level solution at the start's x (or the
    // projected origin)
    let complementary = |u: &Iterate| index_sets(&u.y, &u.w, default_tolerance(&u.y, &u.w)).is_ok();
    let point = match &inst.start {
        Some(s) if complementary(s) || !inst.is_lcp() => Some(s.clone()),
        _ if inst.is_lcp() && issues.is_empty() => {
            let x = start_x(&inst)?;
            Some(lower_solve(&inst, &x)?.iterate(&x))
        }
        _ => None,
    };
    if let Some(u) = point {
        let sets = index_sets(&u.y, &u.w, default_tolerance(&u.y, &u.w));
        out["point"] = json!({ "x": u.x.as_slice(), "y": u.y.as_slice(), "w": u.w.as_slice(), "z": u.z.as_slice() });
        match sets {
            Ok(s) => {
                out["index_sets"] = json!({ "alpha": s.alpha, "beta": s.beta, "gamma": s.gamma, "tol": s.tol });
                let blocks = reduced_lh_blocks(&inst, &u)?;
                if let Some((dfy, dfw)) = blocks {
                    out["lh_homeomorphism"] = json!(lh_star_is_homeomorphism(&dfy, &dfw)?);
                    out["w_property"] = json!(has_w_property(&lh_star_pair(&dfy, &dfw)?)?);
                } else {
                    out["lh_homeomorphism"] = serde_json::Value::Null;
                }
                let q = lower_partition(&inst, &u)?;
                out["mixed_p_necessary"] = json!(mixed_p_necessary(&q)?);
                out["mixed_p_counterexample"] = json!(mixed_p_falsify(&q, args.samples, args.seed).is_some());
            }
            Err(e) => out["index_sets_error"] = json!(e.to_string()),
        }
    }
    write_json(&out, None)?;
    Ok(if out["valid"] == json!(true) { 0 } else { 2 })
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Check(a) => cmd_check(a),
        Command::Oracle(a) => {
            let inst = load_instance(&a.instance)?;
            write_json(&oracle_json(&inst)?, None)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
