//! The `teachctl` command line: run a teacher, write the trajectory as CSV and
//! a JSON solve report, classify regimes along a PMP trajectory, and sample
//! one-step reachable sets.
//!
//! Exit codes: 0 on convergence, 2 on non-convergence or I/O failure, 1 on
//! usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::{default_tolerance, run_teacher, TeacherPolicy};
use crate::pmp::{classify_regime, Regime, TOL_ALIGN};
use crate::problem::{reachable_boundary, InputBounds, ProblemSpec, TeachingInput, Trajectory};
use crate::shooting::{find_candidates, ContinuousTrajectory, ShootingSettings};
use crate::teachers_opt::{cnlp_solve, nlp_min_t, nlp_min_t_below, CnlpSettings, CnlpSolution, NlpSettings};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Greedy,
    Straight,
    Nlp,
    Cnlp,
    Shoot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecEcho {
    pub w0: Vec<f64>,
    pub w_star: Vec<f64>,
    pub eta: f64,
    pub rx: f64,
    pub ry: f64,
}

impl From<&ProblemSpec> for SpecEcho {
    fn from(s: &ProblemSpec) -> Self {
        Self {
            w0: s.w0.iter().copied().collect(),
            w_star: s.w_star.iter().copied().collect(),
            eta: s.eta,
            rx: s.rx,
            ry: s.ry,
        }
    }
}

/// Summary of one `teach` run. Every field is always serialized; absent values are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub spec: SpecEcho,
    #[serde(rename = "T")]
    pub steps: Option<usize>,
    pub t_f: Option<f64>,
    pub converged: bool,
    pub terminal_residual: f64,
    pub wall_time_seconds: f64,
    pub candidate_count: Option<usize>,
}

/// One CSV row: learner state at `t`, and the input applied there (absent on the last row
/// of a discrete run).
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub step: usize,
    pub t: f64,
    pub w: Vector,
    pub input: Option<TeachingInput>,
}

/// Plot-ready trajectory with header `step,t,w1..wn,x1..xn,y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub dim: usize,
    pub rows: Vec<TableRow>,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

impl TrajectoryTable {
    pub fn empty(dim: usize) -> Self {
        Self { dim, rows: Vec::new() }
    }

    /// `T + 1` rows; column `t` is `step * eta`.
    pub fn from_discrete(traj: &Trajectory) -> Self {
        let dim = traj.states[0].len();
        let rows = traj
            .states
            .iter()
            .enumerate()
            .map(|(k, w)| TableRow {
                step: k,
                t: k as f64 * traj.eta,
                w: w.clone(),
                input: traj.inputs.get(k).cloned(),
            })
            .collect();
        Self { dim, rows }
    }

    pub fn from_continuous(traj: &ContinuousTrajectory, dim: usize, ry: f64) -> Self {
        let rows = traj
            .times
            .iter()
            .zip(&traj.states)
            .zip(&traj.inputs)
            .enumerate()
            .map(|(k, ((&t, (w, _)), x))| TableRow {
                step: k,
                t,
                w: w.clone(),
                input: Some(TeachingInput::new(x.clone(), ry)),
            })
            .collect();
        Self { dim, rows }
    }

    pub fn from_cnlp(sol: &CnlpSolution, ry: f64) -> Self {
        let dim = sol.states.first().map_or(0, |w| w.len());
        let rows = sol
            .mesh_times
            .iter()
            .zip(&sol.states)
            .zip(&sol.inputs)
            .enumerate()
            .map(|(k, ((&t, w), x))| TableRow {
                step: k,
                t,
                w: w.clone(),
                input: Some(TeachingInput::new(x.clone(), ry)),
            })
            .collect();
        Self { dim, rows }
    }

    pub fn header(dim: usize) -> Vec<String> {
        let mut h = vec!["step".to_string(), "t".to_string()];
        h.extend((1..=dim).map(|i| format!("w{i}")));
        h.extend((1..=dim).map(|i| format!("x{i}")));
        h.push("y".to_string());
        h
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(Self::header(self.dim)).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![row.step.to_string(), fmt(row.t)];
            rec.extend(row.w.iter().map(|&v| fmt(v)));
            match &row.input {
                Some(u) => {
                    rec.extend(u.x.iter().map(|&v| fmt(v)));
                    rec.push(fmt(u.y));
                }
                None => rec.extend(std::iter::repeat_n(String::new(), self.dim + 1)),
            }
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers().map_err(csv_err)?.clone();
        let dim = header.iter().filter(|h| h.starts_with('w')).count();
        let expected = Self::header(dim);
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Io(format!(
                "unexpected trajectory header: {}",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let step = rec[0].parse::<usize>().map_err(|e| Error::Io(e.to_string()))?;
            let nums =
                |range: std::ops::Range<usize>| -> Result<Vec<f64>> { range.map(|i| parse_f64(&rec[i])).collect() };
            let t = parse_f64(&rec[1])?;
            let w = Vector::from_vec(nums(2..2 + dim)?);
            let input = if rec[2 + dim].is_empty() {
                None
            } else {
                let x = Vector::from_vec(nums(2 + dim..2 + 2 * dim)?);
                Some(TeachingInput::new(x, parse_f64(&rec[2 + 2 * dim])?))
            };
            rows.push(TableRow { step, t, w, input });
        }
        Ok(Self { dim, rows })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::read_from(File::open(path)?)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Io(format!("bad number `{s}`: {e}")))
}

/// Co-state samples of a shooting trajectory, header `step,t,p1..pn`.
pub fn write_costate<W: Write>(traj: &ContinuousTrajectory, dim: usize, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut h = vec!["step".to_string(), "t".to_string()];
    h.extend((1..=dim).map(|i| format!("p{i}")));
    wr.write_record(&h).map_err(csv_err)?;
    for (k, (&t, (_, p))) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut rec = vec![k.to_string(), fmt(t)];
        rec.extend(p.iter().map(|&v| fmt(v)));
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_costate<R: Read>(input: R) -> Result<Vec<(f64, Vector)>> {
    let mut rd = csv::Reader::from_reader(input);
    let dim = rd
        .headers()
        .map_err(csv_err)?
        .iter()
        .filter(|h| h.starts_with('p'))
        .count();
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let p = (2..2 + dim).map(|i| parse_f64(&rec[i])).collect::<Result<Vec<_>>>()?;
        out.push((parse_f64(&rec[1])?, Vector::from_vec(p)));
    }
    Ok(out)
}

/// Comma-separated reals taken as one flag value.
type Reals = Vec<f64>;

fn parse_vector(s: &str) -> std::result::Result<Reals, String> {
    let v = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty vector".into());
    }
    Ok(v)
}

#[derive(Debug, Parser)]
#[command(
    name = "teachctl",
    version,
    about = "Teaching sequences for a gradient-descent least-squares learner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a teacher and emit its trajectory and a solve report.
    Teach(TeachArgs),
    /// Classify the regime at every sample of a PMP trajectory.
    Regimes(RegimesArgs),
    /// Sample the boundary of the one-step reachable set (2D).
    Reachable(ReachableArgs),
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    rx: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    ry: f64,
}

#[derive(Debug, Args)]
struct TeachArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Initial learner weights, comma-separated.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    w0: Reals,
    /// Target weights, comma-separated.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    wstar: Reals,
    #[arg(long, default_value_t = 0.01, allow_hyphen_values = true)]
    eta: f64,
    #[command(flatten)]
    bounds: BoundsArgs,
    /// Trajectory CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report JSON path; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Step cap for greedy/straight.
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: usize,
    /// Stopping tolerance: distance to target (greedy/straight), terminal residual (nlp),
    /// constraint tolerance (cnlp), hit tolerance (shoot).
    #[arg(long)]
    tol: Option<f64>,
    /// Explicit upper bound on T for nlp.
    #[arg(long)]
    t_hi: Option<usize>,
    /// Collocation intervals for cnlp.
    #[arg(long, default_value_t = 100)]
    mesh: usize,
    /// Integration step for shoot.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Integration horizon for shoot.
    #[arg(long)]
    t_max: Option<f64>,
    /// Initial co-state angles swept by shoot.
    #[arg(long, default_value_t = 360)]
    angles: usize,
    /// Seed for nlp multi-start perturbations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Co-state CSV path (shoot only).
    #[arg(long)]
    costate: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RegimesArgs {
    /// Trajectory CSV written by `teach --method shoot --out`.
    #[arg(long)]
    trajectory: PathBuf,
    /// Co-state CSV written by `teach --method shoot --costate`.
    #[arg(long)]
    costate: PathBuf,
    #[command(flatten)]
    bounds: BoundsArgs,
    /// Output CSV (`step,t,regime`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReachableArgs {
    /// State to expand from, comma-separated (2D).
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    w: Reals,
    #[arg(long, default_value_t = 0.01, allow_hyphen_values = true)]
    eta: f64,
    #[command(flatten)]
    bounds: BoundsArgs,
    #[arg(long, default_value_t = 360)]
    samples: usize,
    /// Output CSV (`k,theta,w1,w2`); stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            other => Failure::Run(other),
        }
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

/// Parse `args` (including the program name) and execute; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Teach(a) => teach(a),
        Command::Regimes(a) => regimes(a),
        Command::Reachable(a) => reachable(a),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn teach(a: TeachArgs) -> std::result::Result<i32, Failure> {
    let spec = ProblemSpec::from_slices(&a.w0, &a.wstar, a.eta, a.bounds.rx, a.bounds.ry)?;
    if let Some(tol) = a.tol {
        if !(tol > 0.0) {
            return Err(Failure::Usage(format!("--tol must be positive, got {tol}")));
        }
    }
    if a.costate.is_some() && a.method != Method::Shoot {
        return Err(Failure::Usage("--costate is only produced by --method shoot".into()));
    }
    let dim = spec.dim();
    let start = Instant::now();
    let mut report = SolveReport {
        method: a.method,
        spec: SpecEcho::from(&spec),
        steps: None,
        t_f: None,
        converged: false,
        terminal_residual: (&spec.w0 - &spec.w_star).norm(),
        wall_time_seconds: 0.0,
        candidate_count: None,
    };
    let table = match a.method {
        Method::Greedy | Method::Straight => {
            let policy = if a.method == Method::Greedy {
                TeacherPolicy::greedy()
            } else {
                TeacherPolicy::straight()
            };
            let tol = a.tol.unwrap_or_else(|| default_tolerance(&spec));
            let res = run_teacher(&policy, &spec, a.max_steps, tol)?;
            report.steps = Some(res.steps);
            report.converged = res.converged;
            report.terminal_residual = res.trajectory.terminal_residual;
            TrajectoryTable::from_discrete(&res.trajectory)
        }
        Method::Nlp => {
            let mut settings = NlpSettings::for_problem(&spec);
            settings.seed = a.seed;
            if let Some(tol) = a.tol {
                settings.residual_tol = tol;
            }
            let (t, traj) = match a.t_hi {
                Some(hi) => nlp_min_t_below(&spec, &settings, hi)?,
                None => nlp_min_t(&spec, &settings)?,
            };
            report.steps = Some(t);
            report.converged = traj.terminal_residual <= settings.residual_tol;
            report.terminal_residual = traj.terminal_residual;
            TrajectoryTable::from_discrete(&traj)
        }
        Method::Cnlp => {
            let mut settings = CnlpSettings {
                mesh: a.mesh,
                ..CnlpSettings::default()
            };
            if let Some(tol) = a.tol {
                settings.solver.constraint_tol = tol;
            }
            let sol = cnlp_solve(&spec, &settings)?;
            report.t_f = Some(sol.t_f);
            report.converged = sol.converged;
            report.terminal_residual = sol.defect_norm;
            TrajectoryTable::from_cnlp(&sol, spec.ry)
        }
        Method::Shoot => {
            let defaults = ShootingSettings::default();
            let settings = ShootingSettings {
                angle_samples: a.angles,
                dt: a.dt,
                t_max: a.t_max,
                hit_tol: a.tol.unwrap_or(defaults.hit_tol),
                ..defaults
            };
            let cands = find_candidates(&spec, &settings)?;
            report.candidate_count = Some(cands.len());
            match cands.first() {
                Some(best) => {
                    report.t_f = Some(best.t_hit);
                    report.converged = true;
                    report.terminal_residual = best.miss_distance;
                    if let Some(path) = &a.costate {
                        write_costate(&best.trajectory, dim, File::create(path).map_err(Error::from)?)?;
                    }
                    TrajectoryTable::from_continuous(&best.trajectory, dim, spec.ry)
                }
                None => {
                    if let Some(path) = &a.costate {
                        write_costate(
                            &ContinuousTrajectory::default(),
                            dim,
                            File::create(path).map_err(Error::from)?,
                        )?;
                    }
                    TrajectoryTable::empty(dim)
                }
            }
        }
    };
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    if let Some(path) = &a.out {
        table.write_path(path)?;
    }
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    let mut out = sink(&a.report)?;
    writeln!(out, "{json}").map_err(Error::from)?;
    Ok(if report.converged { 0 } else { 2 })
}

fn regimes(a: RegimesArgs) -> std::result::Result<i32, Failure> {
    let bounds = InputBounds::new(a.bounds.rx, a.bounds.ry)?;
    let table = TrajectoryTable::read_path(&a.trajectory)?;
    let costate = read_costate(File::open(&a.costate).map_err(Error::from)?)?;
    if costate.len() != table.rows.len() {
        return Err(Failure::Run(Error::Io(format!(
            "trajectory has {} rows but co-state has {}",
            table.rows.len(),
            costate.len()
        ))));
    }
    let mut seq: Vec<Regime> = Vec::with_capacity(costate.len());
    let mut wr = csv::Writer::from_writer(sink(&a.out)?);
    wr.write_record(["step", "t", "regime"]).map_err(csv_err)?;
    for (row, (_, p)) in table.rows.iter().zip(&costate) {
        let r = classify_regime(&row.w, p, bounds, TOL_ALIGN)?;
        wr.write_record([row.step.to_string(), fmt(row.t), r.label().to_string()])
            .map_err(csv_err)?;
        seq.push(r);
    }
    wr.flush().map_err(Error::from)?;
    let mut phases: Vec<Regime> = Vec::new();
    for r in &seq {
        if phases.last() != Some(r) {
            phases.push(*r);
        }
    }
    let legal = phases.windows(2).all(|w| w[0].can_transition_to(w[1]));
    let labels: Vec<&str> = phases.iter().map(|r| r.label()).collect();
    eprintln!("regime sequence: {} (transitions legal: {legal})", labels.join(" -> "));
    Ok(0)
}

fn reachable(a: ReachableArgs) -> std::result::Result<i32, Failure> {
    let w = Vector::from_vec(a.w);
    let spec = ProblemSpec::new(w.clone(), w.clone(), a.eta, a.bounds.rx, a.bounds.ry)?;
    let pts = reachable_boundary(&w, &spec, a.samples)?;
    let mut wr = csv::Writer::from_writer(sink(&a.out)?);
    wr.write_record(["k", "theta", "w1", "w2"]).map_err(csv_err)?;
    for (k, q) in pts.iter().enumerate() {
        let theta = std::f64::consts::TAU * k as f64 / a.samples as f64;
        wr.write_record([k.to_string(), fmt(theta), fmt(q[0]), fmt(q[1])])
            .map_err(csv_err)?;
    }
    wr.flush().map_err(Error::from)?;
    Ok(0)
}
