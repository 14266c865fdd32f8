mod args;
mod presets;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use rayon::prelude::*;

use args::{parse_point, parse_seeds, Cli, Command, CompareArgs, ProblemArgs, SolveArgs};
use gradsamp::model::{validate_params, GsParams, SolveReport, SolveStatus};
use gradsamp::problems::{self, Problem, ProblemError};
use gradsamp::sampler::uniform_box;
use gradsamp::solver::{solve, SolveError};
use gradsamp::trace::write_trace;

/// `println!` that ignores a closed stdout.
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

const UNKNOWN: u8 = 2;
const INVALID: u8 = 3;
const SOLVER: u8 = 4;
const IO: u8 = 1;

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(INVALID),
            };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::List => {
            cmd_list();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_problem(a: &ProblemArgs) -> Result<Problem, Failure> {
    let res = match (&a.problem_file, &a.problem) {
        (Some(path), _) => problems::load_finite_max(path),
        (None, Some(name)) => problems::by_name(name, a.dim),
        (None, None) => return Err(fail(INVALID, "a problem name or --problem-file is required")),
    };
    res.map_err(|e| {
        let code = match e {
            ProblemError::Unknown(_) | ProblemError::Io { .. } => UNKNOWN,
            _ => INVALID,
        };
        fail(code, e.to_string())
    })
}

fn start_point(a: &ProblemArgs, prob: &Problem, seed: u64) -> Result<Vec<f64>, Failure> {
    let x0 = match a.x0.trim() {
        "default" => prob.start.clone(),
        "random" => uniform_box(prob.dim, 1.0, seed),
        s => parse_point(s).map_err(|m| fail(INVALID, m))?,
    };
    if x0.len() != prob.dim {
        return Err(fail(
            INVALID,
            format!("--x0 has {} coordinates, {} needs {}", x0.len(), prob.name, prob.dim),
        ));
    }
    Ok(x0)
}

fn config_overrides(a: &ProblemArgs) -> Result<Option<serde_json::Value>, Failure> {
    let Some(path) = &a.config else {
        return Ok(None);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| fail(UNKNOWN, format!("reading {}: {e}", path.display())))?;
    let v = serde_json::from_str(&text)
        .map_err(|e| fail(INVALID, format!("parsing {}: {e}", path.display())))?;
    Ok(Some(v))
}

fn base_params(x0: &[f64], overrides: &Option<serde_json::Value>) -> Result<GsParams, Failure> {
    let p = GsParams::for_start(x0);
    match overrides {
        Some(v) => p
            .merged_with(v)
            .map_err(|e| fail(INVALID, format!("invalid config: {e}"))),
        None => Ok(p),
    }
}

fn checked(p: GsParams, n: usize) -> Result<GsParams, Failure> {
    validate_params(&p, n).map_err(|e| fail(INVALID, e.to_string()))
}

fn solver_failure(e: SolveError) -> Failure {
    let code = match e {
        SolveError::Params(_) | SolveError::Dimension { .. } => INVALID,
        _ => SOLVER,
    };
    fail(code, e.to_string())
}

fn save_trace(path: &Path, report: &SolveReport) -> Result<(), Failure> {
    let io = |e: std::io::Error| fail(IO, format!("writing {}: {e}", path.display()));
    let file = File::create(path).map_err(io)?;
    write_trace(BufWriter::new(file), &report.trace).map_err(io)
}

fn cmd_solve(a: &SolveArgs) -> Result<(), Failure> {
    let prob = load_problem(&a.problem)?;
    let x0 = start_point(&a.problem, &prob, a.seed)?;
    let overrides = config_overrides(&a.problem)?;
    let mut p = base_params(&x0, &overrides)?;
    if let Some(name) = &a.variant {
        p = presets::apply(name, &p).ok_or_else(|| {
            fail(
                UNKNOWN,
                format!("unknown variant {name:?}; available: {}", presets::NAMES.join(", ")),
            )
        })?;
    }
    a.params.apply(&mut p).map_err(|m| fail(INVALID, m))?;
    p.seed = a.seed;
    p.center_only_first_bundle |= a.force_center_only_bundle;
    let p = checked(p, prob.dim)?;

    let report = solve(&prob, &x0, &p).map_err(solver_failure)?;
    if let Some(path) = &a.trace {
        save_trace(path, &report)?;
    }
    out!("problem         {}", prob.name);
    out!("status          {:?}", report.status);
    out!("iterations      {}", report.iterations());
    out!("f_final         {:.6e}", report.f_final);
    out!("g_norm          {:.3e}", report.certificate.g_norm);
    out!("epsilon         {:.3e}", report.certificate.epsilon);
    out!("gradient_evals  {}", report.total_gevals());
    out!("function_evals  {}", report.total_fevals());
    if prob.dim <= 10 {
        out!("x_final         {:?}", report.x_final);
    }
    Ok(())
}

struct Run {
    seed: u64,
    report: SolveReport,
}

struct Summary {
    status: String,
    iterations: f64,
    f_final: f64,
    g_norm: f64,
    epsilon: f64,
    gevals: f64,
    fevals: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn status_of(runs: &[&SolveReport]) -> String {
    let first: SolveStatus = runs[0].status;
    if runs.iter().all(|r| r.status == first) {
        format!("{first:?}")
    } else {
        "mixed".to_string()
    }
}

fn summarize(runs: &[&SolveReport]) -> Summary {
    let col = |f: &dyn Fn(&SolveReport) -> f64| median(runs.iter().map(|r| f(r)).collect());
    Summary {
        status: status_of(runs),
        iterations: col(&|r| r.iterations() as f64),
        f_final: col(&|r| r.f_final),
        g_norm: col(&|r| r.certificate.g_norm),
        epsilon: col(&|r| r.certificate.epsilon),
        gevals: col(&|r| r.total_gevals() as f64),
        fevals: col(&|r| r.total_fevals() as f64),
    }
}

fn count(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as u64)
    } else {
        format!("{v:.1}")
    }
}

fn cmd_compare(a: &CompareArgs) -> Result<(), Failure> {
    let names: Vec<&str> = a
        .variants
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if names.len() < 2 {
        return Err(fail(INVALID, "compare needs at least two variants in --variants"));
    }
    let seeds = parse_seeds(&a.seeds).map_err(|m| fail(INVALID, m))?;
    let prob = load_problem(&a.problem)?;
    let overrides = config_overrides(&a.problem)?;

    // Validate everything before running anything.
    let mut jobs = Vec::new();
    for &name in &names {
        for &seed in &seeds {
            let x0 = start_point(&a.problem, &prob, seed)?;
            let base = base_params(&x0, &overrides)?;
            let mut p = presets::apply(name, &base).ok_or_else(|| {
                fail(
                    UNKNOWN,
                    format!("unknown variant {name:?}; available: {}", presets::NAMES.join(", ")),
                )
            })?;
            a.params.apply(&mut p).map_err(|m| fail(INVALID, m))?;
            if let Some(b) = a.budget {
                p.max_iter = b;
            }
            p.seed = seed;
            jobs.push((name, seed, x0, checked(p, prob.dim)?));
        }
    }

    let results: Vec<Result<Run, Failure>> = jobs
        .par_iter()
        .map(|(name, seed, x0, p)| {
            let report = solve(&prob, x0, p).map_err(|e| {
                let f = solver_failure(e);
                fail(f.code, format!("{name} seed {seed}: {}", f.message))
            })?;
            Ok(Run {
                seed: *seed,
                report,
            })
        })
        .collect();
    let runs: Vec<Run> = results.into_iter().collect::<Result<_, _>>()?;

    if let Some(dir) = &a.trace_dir {
        fs::create_dir_all(dir)
            .map_err(|e| fail(IO, format!("creating {}: {e}", dir.display())))?;
        for (run, (name, ..)) in runs.iter().zip(&jobs) {
            save_trace(&dir.join(format!("{name}_seed{}.jsonl", run.seed)), &run.report)?;
        }
    }

    let per_variant: Vec<(&str, Vec<&Run>)> = names
        .iter()
        .map(|&n| {
            let rs = runs
                .iter()
                .zip(&jobs)
                .filter(|(_, j)| j.0 == n)
                .map(|(r, _)| r)
                .collect();
            (n, rs)
        })
        .collect();
    let summaries: Vec<(&str, Summary)> = per_variant
        .iter()
        .map(|(n, rs)| {
            let reports: Vec<&SolveReport> = rs.iter().map(|r| &r.report).collect();
            (*n, summarize(&reports))
        })
        .collect();

    print_table(&prob.name, seeds.len(), &summaries);
    if let Some(path) = &a.csv {
        write_csv(path, &per_variant, &summaries, a.per_seed)
            .map_err(|e| fail(IO, format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn print_table(problem: &str, n_seeds: usize, rows: &[(&str, Summary)]) {
    let header = [
        "variant", "status", "iters", "f_final", "g_norm", "epsilon", "grad_evals", "func_evals",
    ];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for (name, s) in rows {
        cells.push(vec![
            name.to_string(),
            s.status.clone(),
            count(s.iterations),
            format!("{:.3e}", s.f_final),
            format!("{:.2e}", s.g_norm),
            format!("{:.2e}", s.epsilon),
            count(s.gevals),
            count(s.fevals),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    out!("{problem}: medians over {n_seeds} seeds");
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| {
                if c < 2 {
                    format!("{v:<w$}", w = widths[c])
                } else {
                    format!("{v:>w$}", w = widths[c])
                }
            })
            .collect();
        out!("{}", line.join("  ").trim_end());
    }
}

const CSV_HEADER: [&str; 9] = [
    "variant",
    "seed",
    "status",
    "iterations",
    "f_final",
    "g_norm",
    "epsilon",
    "gradient_evals",
    "function_evals",
];

fn write_csv(
    path: &Path,
    runs: &[(&str, Vec<&Run>)],
    summaries: &[(&str, Summary)],
    per_seed: bool,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    if per_seed {
        for (name, rs) in runs {
            for r in rs {
                let rep = &r.report;
                w.write_record([
                    name.to_string(),
                    r.seed.to_string(),
                    format!("{:?}", rep.status),
                    rep.iterations().to_string(),
                    format!("{:e}", rep.f_final),
                    format!("{:e}", rep.certificate.g_norm),
                    format!("{:e}", rep.certificate.epsilon),
                    rep.total_gevals().to_string(),
                    rep.total_fevals().to_string(),
                ])?;
            }
        }
    } else {
        for (name, s) in summaries {
            w.write_record([
                name.to_string(),
                "median".to_string(),
                s.status.clone(),
                count(s.iterations),
                format!("{:e}", s.f_final),
                format!("{:e}", s.g_norm),
                format!("{:e}", s.epsilon),
                count(s.gevals),
                count(s.fevals),
            ])?;
        }
    }
    w.flush()
}

fn cmd_list() {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "problems:");
    for p in problems::corpus(2) {
        let generic = if matches!(p.name.as_str(), "helou2d" | "dirlip1d" | "sd_stall") {
            format!("n = {}", p.dim)
        } else {
            "any n (--dim)".to_string()
        };
        let fstar = p.f_star.map_or("unknown".to_string(), |f| format!("{f}"));
        let note = if p.experimental { "  (experimental)" } else { "" };
        let _ = writeln!(out, "  {:<12} {:<14} f* = {fstar}{note}", p.name, generic);
    }
    let _ = writeln!(out, "variants:");
    for v in presets::NAMES {
        let _ = writeln!(out, "  {v}");
    }
}
