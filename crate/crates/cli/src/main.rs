mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use comirror::checks::{self, SuiteReport};
use comirror::problem_file::{OracleRegistry, ProblemFile};
use comirror::problems::{self, load_problem, ReferenceValues};
use comirror::report::{self, fmt_float};
use comirror::solver::{self, key_lemma_check, key_lemma_probes, harmonic_sum_sweep, RunResult};
use comirror::{Error, Execution, GeometryKind, ProblemSpec, SolverConfig};
use serde::Serialize;

use config::Overrides;

const USAGE: u8 = 1;
const NUMERICAL: u8 = 2;
const CHECK_ITERATIONS: usize = 200;

#[derive(Debug, Parser)]
#[command(name = "comirror", version, about = "Derivative-free epsilon-CoMirror solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem and write its summary and history
    Run(RunArgs),
    /// Run every test problem under both geometries and write suite.csv
    Suite(SuiteArgs),
    /// Run the numerical self-checks and write check.json
    Check(CheckArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Output directory
    #[arg(long, env = "COMIRROR_OUT", default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Built-in problem name (tp1, tp2, tp3, sim12) or path to a problem JSON file
    #[arg(long)]
    problem: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Seed of the randomized checks
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::PoisednessFailure { .. } | Error::OracleFailure { .. } => NUMERICAL,
            _ => USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

struct Loaded {
    label: String,
    spec: ProblemSpec,
    reference: Option<ReferenceValues>,
}

fn load(problem: &str) -> Result<Loaded, Error> {
    match load_problem(problem) {
        Ok(p) => Ok(Loaded {
            label: p.name,
            spec: p.spec,
            reference: p.reference,
        }),
        Err(Error::UnknownProblem(_)) if Path::new(problem).is_file() => {
            let file = ProblemFile::read(problem)?;
            let label = file.name.clone().unwrap_or_else(|| {
                Path::new(problem)
                    .file_stem()
                    .map_or("problem".into(), |s| s.to_string_lossy().into_owned())
            });
            Ok(Loaded {
                label,
                spec: file.to_spec(&OracleRegistry::new())?,
                reference: None,
            })
        }
        Err(e) => Err(e),
    }
}

fn geometry_name(g: GeometryKind) -> &'static str {
    match g {
        GeometryKind::Euclidean => "euclidean",
        GeometryKind::Entropy => "entropy",
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let resolved = args.overrides.resolve()?;
    let problem = args.problem.or(resolved.problem).ok_or_else(|| Failure {
        code: USAGE,
        message: "no problem given (use --problem)".into(),
    })?;
    let loaded = load(&problem)?;
    let config = resolved.config;
    let result = solver::run(&loaded.spec, &config)?;
    let files = report::write_run_artifacts(
        &args.output.out,
        &loaded.label,
        &problem,
        &config,
        &result,
        loaded.spec.dimension,
    )?;
    match &result.best {
        Some(b) => println!(
            "{}: best f = {} after {} f-evals, {} g-evals ({})",
            loaded.label,
            b.f,
            result.counters.f_evals,
            result.counters.g_evals,
            result.termination.as_str()
        ),
        None => println!("{}: no eps-feasible iterate ({})", loaded.label, result.termination.as_str()),
    }
    println!("wrote {} and {}", files.summary.display(), files.history.display());
    if result.termination.is_failure() {
        return Err(Failure {
            code: NUMERICAL,
            message: result.failure.unwrap_or_else(|| result.termination.as_str().into()),
        });
    }
    Ok(())
}

pub const SUITE_COLUMNS: [&str; 7] = [
    "problem",
    "geometry",
    "final_f",
    "f_evals",
    "g_evals",
    "reference_f",
    "gap_to_optimum",
];

fn cmd_suite(args: SuiteArgs) -> Result<(), Failure> {
    let resolved = args.overrides.resolve()?;
    let geometries = match args.overrides.geometry {
        Some(g) => vec![g.into()],
        None => vec![GeometryKind::Euclidean, GeometryKind::Entropy],
    };
    let mut rows = Vec::new();
    for name in ["tp1", "tp2", "tp3"] {
        for &g in &geometries {
            rows.push((name, g));
        }
    }
    let out = &args.output.out;
    let results = comirror::par::map(Execution::default(), &rows, |&(name, g)| {
        let mut config = resolved.config.clone();
        config.geometry.geometry = g;
        let loaded = load(name)?;
        let result = solver::run(&loaded.spec, &config)?;
        let label = format!("{name}_{}", geometry_name(g));
        report::write_run_artifacts(out, &label, name, &config, &result, loaded.spec.dimension)?;
        Ok::<_, Error>((loaded, result))
    });

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUITE_COLUMNS).map_err(Error::from)?;
    let mut failures = 0;
    for ((name, g), outcome) in rows.iter().zip(&results) {
        let (final_f, f_evals, g_evals, reference, gap) = match outcome {
            Ok((loaded, r)) => {
                if r.termination.is_failure() {
                    failures += 1;
                }
                let f = r.best.as_ref().map(|b| b.f);
                (
                    f.map(fmt_float).unwrap_or_default(),
                    r.counters.f_evals.to_string(),
                    r.counters.g_evals.to_string(),
                    loaded.reference.map(|v| v.cell(*g).f.to_string()).unwrap_or_default(),
                    f.zip(loaded.spec.known_optimum)
                        .map(|(f, opt)| fmt_float(f - opt))
                        .unwrap_or_default(),
                )
            }
            Err(e) => {
                failures += 1;
                eprintln!("{name} ({}): {e}", geometry_name(*g));
                Default::default()
            }
        };
        w.write_record([
            name.to_string(),
            geometry_name(*g).to_string(),
            final_f,
            f_evals,
            g_evals,
            reference,
            gap,
        ])
        .map_err(Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    std::fs::create_dir_all(out).map_err(Error::from)?;
    let path = out.join("suite.csv");
    report::write_atomic(&path, &bytes)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    println!("wrote {}", path.display());
    if failures == rows.len() {
        return Err(Failure {
            code: NUMERICAL,
            message: "every suite row failed".into(),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckEntry {
    name: String,
    passed: bool,
    detail: serde_json::Value,
}

fn suite_entry(r: SuiteReport) -> CheckEntry {
    CheckEntry {
        name: r.name.clone(),
        passed: r.passed(),
        detail: serde_json::to_value(&r).unwrap_or_default(),
    }
}

fn bound_entries(runs: &[(String, ProblemSpec, RunResult)]) -> Vec<CheckEntry> {
    let mut entries = Vec::new();
    for (label, spec, r) in runs {
        let covered = r.diagnostics.as_ref().map_or(0, |d| d.per_n.len());
        let violations = r.diagnostics.as_ref().map_or(0, |d| d.violations());
        entries.push(CheckEntry {
            name: format!("efficiency_estimate/{label}"),
            passed: r.diagnostics.is_some() && violations == 0 && covered == CHECK_ITERATIONS - 3,
            detail: serde_json::json!({
                "iterations": r.history.len(),
                "termination": r.termination,
                "checked_n": covered,
                "violations": violations,
                "C_proof": r.diagnostics.as_ref().map(|d| d.c_proof),
            }),
        });
        let probes = key_lemma_probes(&spec.bounds, 20, 0);
        let k = key_lemma_check(r, &probes, 1e-6);
        entries.push(CheckEntry {
            name: format!("key_lemma/{label}"),
            passed: k.violations == 0,
            detail: serde_json::to_value(&k).unwrap_or_default(),
        });
    }
    entries
}

fn cmd_check(args: CheckArgs) -> Result<(), Failure> {
    let exec = Execution::default();
    let mut entries = Vec::new();

    let sweep = harmonic_sum_sweep(100_000);
    let bad: Vec<usize> = sweep.iter().filter(|r| !r.ok).map(|r| r.n).collect();
    entries.push(CheckEntry {
        name: "harmonic_sum".into(),
        passed: bad.is_empty() && sweep.len() == 100_000 - 3,
        detail: serde_json::json!({"n_min": 4, "n_max": 100_000, "failures": bad}),
    });
    entries.push(suite_entry(checks::strong_convexity_suite(exec, 1000, args.seed, 1e-10)));
    entries.push(suite_entry(checks::mirror_grid_suite(exec, 200, 2001, args.seed)));
    entries.push(suite_entry(checks::interpolation_bound_suite(exec, 1000, args.seed, 1e-9)));

    let cases: Vec<(&str, GeometryKind)> = ["tp1", "tp2", "tp3"]
        .into_iter()
        .flat_map(|p| [(p, GeometryKind::Euclidean), (p, GeometryKind::Entropy)])
        .collect();
    let runs = comirror::par::map(exec, &cases, |&(name, g)| {
        let spec = load_problem(name)?.spec;
        let mut config = SolverConfig {
            max_iterations: CHECK_ITERATIONS,
            f_eval_budget: None,
            ..SolverConfig::default()
        };
        config.geometry.geometry = g;
        let r = solver::run(&spec, &config)?;
        Ok::<_, Error>((format!("{name}_{}", geometry_name(g)), spec, r))
    })
    .into_iter()
    .collect::<Result<Vec<_>, Error>>()?;
    entries.extend(bound_entries(&runs));

    let opt = problems::tp3_optimum();
    entries.push(CheckEntry {
        name: "tp3_optimum".into(),
        passed: opt.kkt_residual <= 1e-6 && problems::tp3_quartic(opt.root).abs() <= 1e-8,
        detail: serde_json::to_value(&opt).unwrap_or_default(),
    });

    let all = entries.iter().all(|e| e.passed);
    for e in &entries {
        println!("{} {}", if e.passed { "PASS" } else { "FAIL" }, e.name);
    }
    let doc = serde_json::json!({"passed": all, "checks": entries});
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(Error::from)?;
    bytes.push(b'\n');
    let out = &args.output.out;
    std::fs::create_dir_all(out).map_err(Error::from)?;
    let path = out.join("check.json");
    report::write_atomic(&path, &bytes)?;
    println!("wrote {}", path.display());
    if !all {
        return Err(Failure {
            code: NUMERICAL,
            message: "some checks failed".into(),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE),
            };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Suite(a) => cmd_suite(a),
        Command::Check(a) => cmd_check(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
