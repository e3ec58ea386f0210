//! Command-line front end: `run`, `net`, `width-demo` and `verify`.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on any error.
//! Scenario format: see [`scenario`].

pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{
    perturb_background, perturb_diffeomorphism, solve_divergence, solve_jacobian, AssemblyError, DivergenceProblem, JacobianProblem,
    MapSolution, MassLedger, Solution,
};
use crate::catalog;
use crate::fields::FieldError;
use crate::geometry::{build_direction_net, Cone, Direction, GeometryError};
use crate::linalg::det;
use crate::measures::{cone_null_certificate, sample_atoms, MeasureError};
use crate::report::Report;
use crate::scheme::StageLog;
use crate::verify::{verify_divergence, verify_jacobian};
use crate::width::{verify_width, width_function, WidthError};

use output::{columns, g17, to_json, write_json, Table};
use scenario::Task;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
    #[error("{field}: {error} in \"{text}\"")]
    Expression { field: String, text: String, error: FieldError },
    #[error("solution file: {0}")]
    SolutionFile(String),
    #[error(transparent)]
    Solve(#[from] AssemblyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Width(#[from] WidthError),
}

#[derive(Debug, Parser)]
#[command(name = "lusin", version, about = "Prescribed divergence and Jacobian on singular model measures")]
pub struct Args {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Grid points per axis for dumps and grid checks.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Seed for the sampling checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a scenario, verify it and write the report, grid and atom dumps.
    Run,
    /// Print the direction net for dimension `d` and half-angle `alpha` as a JSON list.
    Net { d: usize, alpha: f64 },
    /// Build one width function and dump `phi` and its axial derivative on a grid.
    WidthDemo {
        carrier: DemoCarrier,
        /// Cone axis, numbered from 1; defaults to the axis the carrier is certified for.
        #[arg(long)]
        axis: Option<usize>,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        zeta: f64,
    },
    /// Re-verify a solution file written by `run`.
    Verify { solution: PathBuf },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DemoCarrier {
    Segment,
    Sine,
    Cantor,
}

/// Everything needed to re-run verification.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum SolutionFile {
    Divergence {
        grid: usize,
        seed: u64,
        problem: DivergenceProblem<f64>,
        solution: Solution<f64>,
    },
    Jacobian {
        grid: usize,
        seed: u64,
        problem: JacobianProblem<f64>,
        solution: MapSolution<f64>,
    },
}

impl SolutionFile {
    pub fn verify(&self) -> Report {
        match self {
            SolutionFile::Divergence {
                grid,
                seed,
                problem,
                solution,
            } => verify_divergence(solution, problem, *grid, *seed),
            SolutionFile::Jacobian {
                grid,
                seed,
                problem,
                solution,
            } => verify_jacobian(solution, problem, *grid, *seed),
        }
    }

    fn with_settings(mut self, g: Option<usize>, s: Option<u64>) -> Self {
        match &mut self {
            SolutionFile::Divergence { grid, seed, .. } | SolutionFile::Jacobian { grid, seed, .. } => {
                if let Some(g) = g {
                    *grid = g;
                }
                if let Some(s) = s {
                    *seed = s;
                }
            }
        }
        self
    }
}

#[derive(Serialize)]
struct GroupReport<'a> {
    net_index: usize,
    direction: &'a [f64],
    atoms: usize,
    stages_run: usize,
    t: f64,
    tau: f64,
    m: f64,
    residual_bound: f64,
    certified_grad_bound: f64,
    certified_sup_bound: f64,
    truncated: bool,
    stages: &'a [StageLog],
}

#[derive(Serialize)]
struct MapSummary {
    l: f64,
    diffeo: bool,
    inverse_lip_bound: Option<f64>,
    certified_lip: f64,
    certified_sup: f64,
    max_det_error: f64,
}

#[derive(Serialize)]
struct RunReport<'a> {
    name: &'a str,
    kind: &'a str,
    pass: bool,
    grid: usize,
    seed: u64,
    eps: f64,
    delta: f64,
    m: f64,
    alpha: f64,
    delta_tilde: f64,
    residual_tol: f64,
    atoms: usize,
    kept: usize,
    certified_lip: f64,
    certified_sup: f64,
    max_residual: f64,
    map: Option<MapSummary>,
    ledger: &'a MassLedger,
    groups: Vec<GroupReport<'a>>,
    verification: &'a Report,
}

pub fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => e.exit(),
    };
    match dispatch(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(args: &Args) -> Result<bool, CliError> {
    match &args.command {
        None | Some(Command::Run) => run(args),
        Some(Command::Net { d, alpha }) => net(args, *d, *alpha),
        Some(Command::WidthDemo {
            carrier,
            axis,
            alpha,
            zeta,
        }) => width_demo(args, *carrier, *axis, *alpha, *zeta),
        Some(Command::Verify { solution }) => verify(args, solution),
    }
}

fn say(args: &Args, line: impl AsRef<str>) {
    if !args.quiet {
        println!("{}", line.as_ref());
    }
}

fn out_dir(args: &Args, fallback: Option<&str>) -> Result<PathBuf, CliError> {
    let dir = args
        .out
        .clone()
        .or_else(|| fallback.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn summarize(args: &Args, label: &str, r: &Report) {
    say(
        args,
        format!("{label}: {} ({} checks)", if r.pass { "PASS" } else { "FAIL" }, r.checks.len()),
    );
    for c in r.failures() {
        say(args, format!("  failed {}: worst {} limit {}", c.name, g17(c.worst), g17(c.limit)));
    }
}

fn run(args: &Args) -> Result<bool, CliError> {
    let path = args
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Usage("run needs --scenario <path>".into()))?;
    let sc = scenario::load(path)?;
    let grid = args.grid.unwrap_or(sc.grid);
    let seed = args.seed.unwrap_or(sc.seed);
    if grid < 2 {
        return Err(CliError::Schema {
            field: "grid".into(),
            message: "must be at least 2".into(),
        });
    }
    let file = match sc.task()? {
        Task::Divergence(p) => {
            let s = solve_divergence(&p)?;
            SolutionFile::Divergence {
                grid,
                seed,
                problem: p,
                solution: s,
            }
        }
        Task::Background(p, w) => {
            let s = perturb_background(&w, &p)?;
            SolutionFile::Divergence {
                grid,
                seed,
                problem: p,
                solution: s,
            }
        }
        Task::Jacobian(p) => {
            let s = solve_jacobian(&p)?;
            SolutionFile::Jacobian {
                grid,
                seed,
                problem: p,
                solution: s,
            }
        }
        Task::Perturb(p, f) => {
            let s = perturb_diffeomorphism(&f, &p)?;
            SolutionFile::Jacobian {
                grid,
                seed,
                problem: p,
                solution: s,
            }
        }
    };
    let report = file.verify();
    let dir = out_dir(args, sc.out.as_deref())?;
    let name = if sc.name.is_empty() {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    } else {
        sc.name.clone()
    };
    write_json(&dir.join("report.json"), &run_report(&name, &file, &report))?;
    grid_dump(&file, grid).write(&dir.join("grid.csv"))?;
    atom_dump(&file).write(&dir.join("atoms.csv"))?;
    write_json(&dir.join("solution.json"), &file)?;
    summarize(args, &name, &report);
    say(args, format!("wrote {}", dir.display()));
    Ok(report.pass)
}

fn inner(file: &SolutionFile) -> &Solution<f64> {
    match file {
        SolutionFile::Divergence { solution, .. } => solution,
        SolutionFile::Jacobian { solution, .. } => &solution.inner,
    }
}

fn run_report<'a>(name: &'a str, file: &'a SolutionFile, report: &'a Report) -> RunReport<'a> {
    let s = inner(file);
    let (kind, grid, seed, eps, delta, lip, sup, map) = match file {
        SolutionFile::Divergence {
            grid,
            seed,
            problem,
            solution,
        } => {
            let kind = if solution.background.is_some() {
                "perturb-div"
            } else {
                "divergence"
            };
            (
                kind,
                *grid,
                *seed,
                problem.eps,
                problem.delta,
                solution.certified_lip,
                solution.certified_sup,
                None,
            )
        }
        SolutionFile::Jacobian {
            grid,
            seed,
            problem,
            solution,
        } => {
            let kind = if solution.push.is_some() { "perturb-jac" } else { "jacobian" };
            let err = solution
                .k
                .points
                .iter()
                .zip(&solution.det_direct)
                .map(|(x, dt)| (dt - problem.datum.value(x)).abs())
                .fold(0.0, f64::max);
            let m = MapSummary {
                l: solution.l,
                diffeo: solution.diffeo,
                inverse_lip_bound: solution.inverse_lip_bound,
                certified_lip: solution.certified_lip,
                certified_sup: solution.certified_sup,
                max_det_error: err,
            };
            (
                kind,
                *grid,
                *seed,
                problem.eps,
                problem.delta,
                solution.certified_lip,
                solution.certified_sup,
                Some(m),
            )
        }
    };
    RunReport {
        name,
        kind,
        pass: report.pass,
        grid,
        seed,
        eps,
        delta,
        m: s.m,
        alpha: s.alpha,
        delta_tilde: s.delta_tilde,
        residual_tol: s.residual_tol,
        atoms: s.atoms.len(),
        kept: s.k.len(),
        certified_lip: lip,
        certified_sup: sup,
        max_residual: s.residuals.iter().fold(0.0, |a, r| a.max(r.abs())),
        map,
        ledger: &s.ledger,
        groups: s
            .groups
            .iter()
            .map(|g| GroupReport {
                net_index: g.net_index,
                direction: &g.direction,
                atoms: g.atoms.len(),
                stages_run: g.stages_run,
                t: g.t,
                tau: g.tau,
                m: g.m,
                residual_bound: g.residual_bound,
                certified_grad_bound: g.certified_grad_bound,
                certified_sup_bound: g.certified_sup_bound,
                truncated: g.truncated,
                stages: &g.stages,
            })
            .collect(),
        verification: report,
    }
}

fn grid_dump(file: &SolutionFile, n: usize) -> Table {
    match file {
        SolutionFile::Divergence { problem, solution, .. } => {
            let d = problem.measure.dim();
            let v = solution.total();
            let mut head = columns("x", d);
            head.extend(columns("V", d));
            head.push("divV".into());
            let mut t = Table::new(&head);
            for x in solution.omega.grid(n, false) {
                let mut row = x.clone();
                row.extend(v.eval(&x));
                row.push(v.divergence(&x));
                t.row(&row);
            }
            t
        }
        SolutionFile::Jacobian { problem, solution, .. } => {
            let d = problem.measure.dim();
            let mut head = columns("x", d);
            head.extend(columns("Phi", d));
            head.push("detDPhi".into());
            let mut t = Table::new(&head);
            for x in problem.measure.omega.grid(n, false) {
                let mut row = x.clone();
                row.extend(solution.map.eval(&x));
                row.push(det(solution.map.jacobian(&x)));
                t.row(&row);
            }
            t
        }
    }
}

fn atom_dump(file: &SolutionFile) -> Table {
    let s = inner(file);
    let group_of = |i: usize| s.groups.get(s.k_group[i]).map_or(f64::NAN, |g| g.net_index as f64);
    match file {
        SolutionFile::Divergence { problem, solution, .. } => {
            let d = problem.measure.dim();
            let v = solution.total();
            let mut head = vec!["id".to_string()];
            head.extend(columns("x", d));
            head.extend(["weight", "group", "residual", "f", "divV"].map(String::from));
            let mut t = Table::new(&head);
            let k = &solution.k;
            for i in 0..k.len() {
                let x = &k.points[i];
                let mut row = vec![k.id[i] as f64];
                row.extend(x);
                row.extend([
                    k.weights[i],
                    group_of(i),
                    solution.residuals[i],
                    problem.datum.value(x),
                    v.divergence(x),
                ]);
                t.row(&row);
            }
            t
        }
        SolutionFile::Jacobian { problem, solution, .. } => {
            let d = problem.measure.dim();
            let mut head = vec!["id".to_string()];
            head.extend(columns("x", d));
            head.extend(["weight", "group", "residual", "g", "det_direct", "det_rank_one"].map(String::from));
            let mut t = Table::new(&head);
            let k = &solution.k;
            for i in 0..k.len() {
                let x = &k.points[i];
                let mut row = vec![k.id[i] as f64];
                row.extend(x);
                row.extend([
                    k.weights[i],
                    group_of(i),
                    s.residuals[i],
                    problem.datum.value(x),
                    solution.det_direct[i],
                    solution.det_rank_one[i],
                ]);
                t.row(&row);
            }
            t
        }
    }
}

fn net(args: &Args, d: usize, alpha: f64) -> Result<bool, CliError> {
    let net = build_direction_net(d, alpha)?;
    let dirs: Vec<&[f64]> = net.directions.iter().map(Direction::as_slice).collect();
    let text = to_json(&dirs);
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        output::write_file(&dir.join("net.json"), &text)?;
    }
    if !args.quiet {
        print!("{text}");
    }
    Ok(true)
}

fn width_demo(args: &Args, carrier: DemoCarrier, axis: Option<usize>, alpha: f64, zeta: f64) -> Result<bool, CliError> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(CliError::Usage(format!("zeta must be positive, got {zeta}")));
    }
    let m = match carrier {
        DemoCarrier::Segment => catalog::segment_measure::<f64>(),
        DemoCarrier::Sine => catalog::sine_measure(),
        DemoCarrier::Cantor => catalog::cantor_measure(8),
    };
    let default_axis = match carrier {
        DemoCarrier::Cantor => 1,
        _ => 2,
    };
    let axis = axis.unwrap_or(default_axis);
    if !(1..=2).contains(&axis) {
        return Err(CliError::Usage(format!("axis must be 1 or 2, got {axis}")));
    }
    let cone = Cone::new(Direction::axis(2, axis - 1, 1.0), alpha)?;
    let cert = cone_null_certificate(&m.pieces[0].carrier, &cone)?;
    let atoms = sample_atoms(&m, 1000)?;
    let w = width_function(&cert, &atoms, &cone, zeta)?;
    let n = args.grid.unwrap_or(200);
    let report = verify_width(&w, &m.omega, n);
    let e = cone.axis.as_slice();
    let sample = |x: &[f64]| {
        let (v, g) = w.phi.value_grad(x);
        let de: f64 = g.iter().zip(e).map(|(a, b)| a * b).sum();
        [x[0], x[1], v, de]
    };
    let head = ["x1", "x2", "phi", "dphi_e"].map(String::from);
    let mut grid = Table::new(&head);
    for x in m.omega.grid(n, false) {
        grid.row(&sample(&x));
    }
    let mut at = Table::new(&head);
    for x in &w.target {
        at.row(&sample(x));
    }
    let dir = out_dir(args, None)?;
    grid.write(&dir.join("width_grid.csv"))?;
    at.write(&dir.join("width_atoms.csv"))?;
    write_json(&dir.join("width_report.json"), &report)?;
    summarize(args, "width", &report);
    Ok(report.pass)
}

fn verify(args: &Args, path: &Path) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let file: SolutionFile =
        serde_path_to_error::deserialize(de).map_err(|e| CliError::SolutionFile(format!("{}: {}", e.path(), e.inner())))?;
    let file = file.with_settings(args.grid, args.seed);
    let report = file.verify();
    let text = to_json(&report);
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        output::write_file(&dir.join("verification.json"), &text)?;
    }
    if !args.quiet {
        print!("{text}");
    }
    Ok(report.pass)
}
