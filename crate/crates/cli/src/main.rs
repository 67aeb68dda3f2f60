//! `rfde`: batch front end for the delay equation solver.
//!
//! Exit codes: 0 success, 1 usage/config/internal error, 2 escape before the
//! horizon (solve) or a failed probe / comparison.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use rfde::config::{ModelKind, Problem, ProblemConfig};
use rfde::dsl::Env;
use rfde::export::fmt_g17;
use rfde::functional::{estimate_lipschitz, EstimateRequest, LipschitzMode};
use rfde::par::Exec;
use rfde::solver::{continue_maximal, pantograph_series, pantograph_series_deriv, step_method_solve, MaximalSolution};
use rfde::wellposedness::{probe_cocycle, probe_dependence, probe_escape_lsc, probe_semiflow, probe_uniqueness};

#[derive(Parser, Debug)]
#[command(name = "rfde", version, about = "Solve and probe retarded functional differential equations")]
struct Cli {
    /// Worker threads for sampled loops (default: logical cores; 1 runs sequentially).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a config to its horizon and write the trajectory as CSV.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Output points per unit time.
        #[arg(long, default_value_t = 100)]
        dense: u32,
    },
    /// Write an independent reference solution as CSV.
    Oracle {
        config: PathBuf,
        #[arg(long, value_enum)]
        method: OracleMethod,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        dense: u32,
        /// RK4 step of the step method.
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Terms of the pantograph series.
        #[arg(long, default_value_t = 50)]
        terms: usize,
    },
    /// Run a well-posedness probe and write its JSON report.
    Probe {
        config: PathBuf,
        #[arg(long, value_enum)]
        name: ProbeName,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tau1: Option<f64>,
        #[arg(long)]
        tau2: Option<f64>,
        /// Perturbation sizes for `dependence` (decreasing).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Estimate a Lipschitz constant of the model at the initial history.
    Lipschitz {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeName,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Memory window for `memories` (default: half the past interval).
        #[arg(long)]
        reach: Option<f64>,
        /// Lipschitz bound on the histories for `almost-local`.
        #[arg(long, default_value_t = 1.0)]
        bound: f64,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Sup-norm difference of two trajectory CSVs on the finer time grid.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OracleMethod {
    Step,
    Series,
    #[value(name = "ode_closed_form", alias = "ode-closed-form")]
    OdeClosedForm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProbeName {
    Uniqueness,
    Dependence,
    Semiflow,
    Cocycle,
    #[value(name = "escape_lsc", alias = "escape-lsc")]
    EscapeLsc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeName {
    Prolongations,
    C1,
    Memories,
    #[value(name = "almost_local", alias = "almost-local")]
    AlmostLocal,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn exec_for(threads: Option<usize>) -> Result<Exec> {
    match threads {
        Some(0) => bail!("--threads must be positive"),
        Some(1) => Ok(Exec::Sequential),
        Some(n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
            let _ = n;
            Ok(Exec::Parallel)
        }
        None => Ok(Exec::default()),
    }
}

fn load(path: &FsPath, exec: Exec) -> Result<Problem> {
    let config = ProblemConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    let mut problem = config.compile().with_context(|| format!("compiling {}", path.display()))?;
    problem.options.exec = exec;
    Ok(problem)
}

fn run(cli: Cli) -> Result<u8> {
    let exec = exec_for(cli.threads)?;
    match cli.command {
        Command::Solve { config, out, dense } => cmd_solve(&load(&config, exec)?, &out, dense),
        Command::Oracle { config, method, out, dense, h, terms } => {
            cmd_oracle(&load(&config, exec)?, method, &out, dense, h, terms)
        }
        Command::Probe { config, name, out, seed, samples, tau1, tau2, eps } => {
            let problem = load(&config, exec)?;
            cmd_probe(&problem, name, out.as_deref(), seed, samples, tau1, tau2, eps, exec)
        }
        Command::Lipschitz { config, mode, samples, seed, reach, bound, horizon, radius } => {
            let problem = load(&config, exec)?;
            cmd_lipschitz(&problem, mode, samples, seed, reach, bound, horizon, radius, exec)
        }
        Command::Compare { a, b, tol } => cmd_compare(&a, &b, tol),
    }
}

fn create(path: &FsPath) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn escape_path(out: &FsPath) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".escape.json");
    PathBuf::from(s)
}

fn summary(sol: &MaximalSolution) -> serde_json::Value {
    let d = &sol.diagnostics;
    let steps: Vec<f64> = d.iter().map(|s| s.chosen_t).collect();
    json!({
        "steps": d.len(),
        "picard_iterations": d.iter().map(|s| s.picard_iterations).sum::<usize>(),
        "max_contraction_ratio": d.iter().flat_map(|s| s.contraction_ratios.iter().copied()).fold(0.0, f64::max),
        "min_step": steps.iter().copied().fold(f64::INFINITY, f64::min),
        "max_step": steps.iter().copied().fold(0.0, f64::max),
        "refinements": d.iter().map(|s| s.refinements).sum::<usize>(),
        "halvings": d.iter().map(|s| s.halvings).sum::<usize>(),
        "max_defect": d.iter().map(|s| s.defect).fold(0.0, f64::max),
        "max_junction_gap": sol.trajectory.max_junction_gap(),
    })
}

fn cmd_solve(problem: &Problem, out: &FsPath, dense: u32) -> Result<u8> {
    let sol = continue_maximal(&problem.functional, problem.initial.clone(), problem.t0(), problem.horizon(), &problem.options)?;
    let mut w = create(out)?;
    sol.trajectory.write_csv(&mut w, dense as f64)?;
    w.flush()?;
    let report = json!({
        "schema": 1,
        "escape": sol.escape,
        "reached_horizon": sol.reached_horizon(),
        "t_end": sol.trajectory.t_end(),
        "diagnostics": summary(&sol),
    });
    let mut w = create(&escape_path(out))?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    if sol.reached_horizon() {
        Ok(0)
    } else {
        eprintln!("escape at t = {:?}: {:?} {}", sol.escape.t_escape, sol.escape.cause, sol.escape.detail);
        Ok(2)
    }
}

fn output_times(t0: f64, end: f64, dense: u32) -> Vec<f64> {
    let dense = dense.max(1) as f64;
    let mut times: Vec<f64> = (0u64..).map(|k| t0 + k as f64 / dense).take_while(|&t| t < end - 1e-12 * end.abs().max(1.0)).collect();
    times.push(end);
    times
}

fn write_rows(out: &FsPath, n: usize, rows: impl Iterator<Item = Result<(f64, Vec<f64>, Vec<f64>)>>) -> Result<()> {
    let mut w = create(out)?;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..n).map(|i| format!("x{i}")))
        .chain((0..n).map(|i| format!("dx{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let (t, x, dx) = row?;
        let cells: Vec<String> = std::iter::once(t).chain(x).chain(dx).map(fmt_g17).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn inapplicable(method: &str, problem: &Problem) -> anyhow::Error {
    anyhow!("method inapplicable: '{method}' does not apply to model kind {:?}", problem.kind)
}

fn cmd_oracle(problem: &Problem, method: OracleMethod, out: &FsPath, dense: u32, h: f64, terms: usize) -> Result<u8> {
    let (t0, end) = (problem.t0(), problem.horizon());
    match method {
        OracleMethod::Step => {
            let (f, r) = problem.lag_field.as_ref().ok_or_else(|| inapplicable("step", problem))?;
            let traj = step_method_solve(f, *r, problem.initial.clone(), t0, end, h)?;
            let mut w = create(out)?;
            traj.write_csv(&mut w, dense as f64)?;
            w.flush()?;
        }
        OracleMethod::Series => {
            let p = problem.pantograph.ok_or_else(|| inapplicable("series", problem))?;
            if t0 != 0.0 {
                bail!("the pantograph series expands about t = 0, but t0 = {t0}");
            }
            let x0 = problem.initial.value_at_zero()[0];
            let rows = output_times(t0, end, dense).into_iter().map(|t| {
                Ok((
                    t,
                    vec![pantograph_series(p.a, p.b, p.lambda, x0, t, terms)],
                    vec![pantograph_series_deriv(p.a, p.b, p.lambda, x0, t, terms)],
                ))
            });
            write_rows(out, 1, rows)?;
        }
        OracleMethod::OdeClosedForm => {
            if problem.kind != ModelKind::Ode {
                return Err(inapplicable("ode_closed_form", problem));
            }
            let exprs = problem
                .closed_form
                .as_ref()
                .ok_or_else(|| anyhow!("method inapplicable: the config has no model.closed_form"))?;
            let at = |t: f64| -> Result<Vec<f64>> {
                let env = Env { t, theta: 0.0, x: &[], y: &[] };
                exprs.iter().map(|e| e.eval(&env).map_err(|err| anyhow!("closed form at t = {t}: {err}"))).collect()
            };
            let row = |t: f64| -> Result<(f64, Vec<f64>, Vec<f64>)> {
                let x = at(t)?;
                // central difference; the closed form has no symbolic derivative
                let d = 1e-6 * t.abs().max(1.0);
                let (a, b) = (at(t - d)?, at(t + d)?);
                let dx = a.iter().zip(&b).map(|(a, b)| (b - a) / (2.0 * d)).collect();
                Ok((t, x, dx))
            };
            // a closed form that blows up ends the table there, like the solution
            let mut rows = Vec::new();
            for t in output_times(t0, end, dense) {
                match row(t) {
                    Ok(r) => rows.push(r),
                    Err(e) if !rows.is_empty() => {
                        eprintln!("note: table ends before t = {t}: {e}");
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            write_rows(out, problem.dim(), rows.into_iter().map(Ok))?;
        }
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_probe(
    problem: &Problem,
    name: ProbeName,
    out: Option<&FsPath>,
    seed: u64,
    samples: Option<usize>,
    tau1: Option<f64>,
    tau2: Option<f64>,
    eps: Option<Vec<f64>>,
    exec: Exec,
) -> Result<u8> {
    let (f, init, opts) = (&problem.functional, &problem.initial, &problem.options);
    let (t0, window) = (problem.t0(), problem.horizon() - problem.t0());
    let report = match name {
        ProbeName::Uniqueness => probe_uniqueness(f, t0, init, opts, samples.unwrap_or(5), seed),
        ProbeName::Dependence => {
            let eps = eps.unwrap_or_else(|| vec![1e-2, 5e-3, 2.5e-3]);
            probe_dependence(f, t0, init, window, &eps, seed, opts)
        }
        ProbeName::Semiflow => {
            if problem.kind != ModelKind::Trivial {
                bail!("the semiflow probe needs a trivial model, not {:?}", problem.kind);
            }
            probe_semiflow(problem.interval, problem.dim(), 1.0, window, samples.unwrap_or(1000), seed, exec)
        }
        ProbeName::Cocycle => {
            let t1 = tau1.unwrap_or(0.5 * window);
            let t2 = tau2.unwrap_or(window - t1);
            probe_cocycle(f, t0, init, t1, t2, opts)
        }
        ProbeName::EscapeLsc => {
            let eps = eps.and_then(|e| e.first().copied()).unwrap_or(1e-3);
            probe_escape_lsc(f, t0, init, problem.horizon(), eps, samples.unwrap_or(6), seed, opts)
        }
    };
    let text = serde_json::to_string_pretty(&json!({ "schema": 1, "report": report }))?;
    match out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => println!("{text}"),
    }
    eprintln!("{}: {}", report.probe, if report.passed { "passed" } else { "failed" });
    Ok(if report.passed { 0 } else { 2 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_lipschitz(
    problem: &Problem,
    mode: ModeName,
    samples: usize,
    seed: u64,
    reach: Option<f64>,
    bound: f64,
    horizon: Option<f64>,
    radius: Option<f64>,
    exec: Exec,
) -> Result<u8> {
    let mode = match mode {
        ModeName::Prolongations => LipschitzMode::AboutProlongations,
        ModeName::C1 => LipschitzMode::AboutC1Prolongations,
        ModeName::Memories => {
            LipschitzMode::AboutMemories { reach: reach.unwrap_or(0.5 * problem.interval.clip_reach(1.0)) }
        }
        ModeName::AlmostLocal => LipschitzMode::AlmostLocal { bound, schedule: None },
    };
    let horizon = horizon.unwrap_or_else(|| problem.options.t_cap.min(problem.horizon() - problem.t0()));
    let radius = radius.unwrap_or(problem.options.radius);
    let req = EstimateRequest::new(mode, horizon, radius, samples, seed).with_exec(exec);
    let est = estimate_lipschitz(&problem.functional, problem.t0(), &problem.initial, &req)?;
    println!("{}", fmt_g17(est.value));
    println!("{}", serde_json::to_string(&json!({ "schema": 1, "estimate": est }))?);
    Ok(0)
}

struct Series {
    times: Vec<f64>,
    /// `x*` columns only, one vector per row.
    rows: Vec<Vec<f64>>,
}

fn read_series(path: &FsPath) -> Result<Series> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| anyhow!("{} is empty", path.display()))?.split(',').collect();
    if header.first() != Some(&"t") {
        bail!("{}: first column must be t", path.display());
    }
    let cols: Vec<usize> = (0..header.len()).filter(|&i| header[i].starts_with('x')).collect();
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let cells: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("{} line {}", path.display(), k + 2))?;
        if cells.len() != header.len() {
            bail!("{} line {}: expected {} columns", path.display(), k + 2, header.len());
        }
        times.push(cells[0]);
        rows.push(cols.iter().map(|&i| cells[i]).collect());
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        bail!("{}: times must increase", path.display());
    }
    Ok(Series { times, rows })
}

impl Series {
    fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t < first - 1e-12 || t > last + 1e-12 {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len().max(2) - 1);
        if self.times.len() == 1 {
            return Some(self.rows[0].clone());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        Some(self.rows[k - 1].iter().zip(&self.rows[k]).map(|(a, b)| a + w * (b - a)).collect())
    }
}

fn cmd_compare(a: &FsPath, b: &FsPath, tol: f64) -> Result<u8> {
    let (sa, sb) = (read_series(a)?, read_series(b)?);
    if sa.rows.first().map(Vec::len) != sb.rows.first().map(Vec::len) {
        bail!("the two files have different state dimensions");
    }
    let (fine, coarse) = if sa.times.len() >= sb.times.len() { (&sa, &sb) } else { (&sb, &sa) };
    let mut diff = 0.0f64;
    let mut compared = 0;
    for (t, row) in fine.times.iter().zip(&fine.rows) {
        if let Some(other) = coarse.interpolate(*t) {
            compared += 1;
            diff = row.iter().zip(&other).fold(diff, |m, (x, y)| m.max((x - y).abs()));
        }
    }
    if compared == 0 {
        bail!("the two files share no time range");
    }
    println!("{}", fmt_g17(diff));
    Ok(if diff <= tol { 0 } else { 2 })
}
