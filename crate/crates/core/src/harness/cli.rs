//! `simready` command line.
//!
//! Exit codes: 0 success, 1 a validation check failed (certificate, bound),
//! 2 usage or input error. `--config FILE` reads flat `key=value` lines that
//! mirror the long flags of the chosen subcommand; flags given on the
//! command line win.

use super::*;
use crate::projection::{default_success_radius, success_map_with, ClosestPointMap, NewtonOptions, ProjectionMap};
use crate::regularity::{certify_with, Thresholds};
use crate::solver::{BoundaryData, DEFAULT_GAMMA};
use crate::train::{save_weights, train};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "simready", version, about = "Certify implicit geometry and run unfitted Poisson experiments")]
struct Cli {
    /// Run sequentially instead of on the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regularity certificate of a field on a tube around the unit circle.
    Certify(CertifyArgs),
    /// Newton projection success mask and error grid.
    ProjectMap(ProjectMapArgs),
    /// Hausdorff distance against the unit circle and the error bound.
    Hausdorff(HausdorffArgs),
    /// Fit a network to the unit-circle SDF.
    Train(TrainArgs),
    /// One shifted-boundary Poisson solve.
    Solve(SolveArgs),
    /// Error against perturbation size at a fixed level.
    SweepPerturbation(SweepPerturbationArgs),
    /// Error against level at a fixed perturbation.
    SweepRefinement(SweepRefinementArgs),
    /// Train at several budgets and check the Hausdorff bound for each.
    ValidateBound(ValidateBoundArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long, default_value = "circle")]
    field: String,
    #[arg(long, default_value_t = 0.1)]
    h_tube: f64,
    #[arg(long, default_value_t = 512)]
    res: usize,
    #[arg(long, default_value_t = Thresholds::default().c0_min)]
    c0_min: f64,
    #[arg(long, default_value_t = Thresholds::default().cpsi_max)]
    cpsi_max: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ProjectMapArgs {
    #[arg(long, default_value = "circle")]
    field: String,
    #[arg(long, default_value_t = 256)]
    res: usize,
    #[arg(long, default_value_t = 2.0)]
    half_width: f64,
    #[arg(long, default_value_t = NewtonOptions::default().tol)]
    tol: f64,
    #[arg(long)]
    success_radius: Option<f64>,
    /// Mask grid destination (`--out`) ; error grid goes here.
    #[arg(long)]
    error_out: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct HausdorffArgs {
    #[arg(long, default_value = "offset:0.01")]
    field: String,
    #[arg(long, default_value_t = 0.1)]
    h_tube: f64,
    #[arg(long, default_value_t = 512)]
    tube_res: usize,
    /// Extraction lattice; chosen from the field's error level when absent.
    #[arg(long)]
    res: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug, Clone)]
struct TrainFlags {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().width as u64, value_parser = clap::value_parser!(u64).range(16..=128))]
    width: u64,
    #[arg(long, default_value_t = TrainConfig::default().omega0)]
    omega0: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    /// Learning-rate half-life in steps; 0 keeps the rate constant.
    #[arg(long, default_value_t = TrainConfig::default().lr_half_life.unwrap_or(0.0))]
    lr_half_life: f64,
    #[arg(long, default_value_t = TrainConfig::default().eikonal_weight)]
    eikonal_weight: f64,
    #[arg(long, default_value_t = TrainConfig::default().band_halfwidth)]
    band_halfwidth: f64,
    #[arg(long, default_value_t = TrainConfig::default().log_every)]
    log_every: usize,
}

impl TrainFlags {
    fn config(&self, budget: usize) -> TrainConfig {
        TrainConfig {
            width: self.width as usize,
            omega0: self.omega0,
            budget_steps: budget,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            lr_half_life: (self.lr_half_life > 0.0).then_some(self.lr_half_life),
            eikonal_weight: self.eikonal_weight,
            band_halfwidth: self.band_halfwidth,
            seed: self.seed,
            log_every: self.log_every,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, default_value_t = 1000)]
    budget: usize,
    #[command(flatten)]
    flags: TrainFlags,
    /// Weight file destination.
    #[arg(long)]
    out: PathBuf,
    /// History CSV destination; standard output when absent.
    #[arg(long)]
    history_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Translate,
    Offset,
}

impl From<FamilyArg> for PerturbationFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Translate => PerturbationFamily::Translate,
            FamilyArg::Offset => PerturbationFamily::Offset,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BoundaryArg {
    /// Data read on the perturbed interface.
    Traced,
    /// Data read at the unit circle's closest point.
    Transferred,
}

#[derive(Args, Debug)]
struct SolverFlags {
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Transferred)]
    boundary: BoundaryArg,
    #[arg(long, value_enum, default_value_t = FamilyArg::Translate)]
    family: FamilyArg,
    /// Extraction lattice for the Hausdorff column.
    #[arg(long, default_value_t = 1024)]
    hausdorff_res: usize,
}

impl SolverFlags {
    fn options(&self) -> SolveOptions {
        let boundary = match self.boundary {
            BoundaryArg::Traced => BoundaryData::Traced,
            BoundaryArg::Transferred => BoundaryData::Transferred(ClosestPointMap::UNIT_CIRCLE),
        };
        SolveOptions {
            gamma: self.gamma,
            kappa: self.kappa,
            boundary,
            hausdorff_res: Some(self.hausdorff_res),
            ..SolveOptions::default()
        }
    }
}

fn level_parser() -> clap::builder::RangedI64ValueParser<u32> {
    clap::value_parser!(u32).range(MIN_LEVEL as i64..=MAX_LEVEL as i64)
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, default_value_t = 6, value_parser = level_parser())]
    level: u32,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Field selector or weight file; the perturbation family at `--alpha`
    /// when absent.
    #[arg(long)]
    field: Option<String>,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SweepPerturbationArgs {
    #[arg(long, value_delimiter = ',', default_value = "2e-4,4e-4,8e-4,1.6e-3")]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 8, value_parser = level_parser())]
    level: u32,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SweepRefinementArgs {
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    #[arg(long, value_delimiter = ',', default_value = "4,5,6,7,8", value_parser = level_parser())]
    levels: Vec<u32>,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct ValidateBoundArgs {
    #[arg(long, value_delimiter = ',', default_value = "1000,3000,10000,15000")]
    budgets: Vec<usize>,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long, default_value_t = ValidationOptions::default().tube_h)]
    h_tube: f64,
    #[arg(long, default_value_t = ValidationOptions::default().tube_res)]
    tube_res: usize,
    #[arg(long, default_value_t = ValidationOptions::default().extraction_res)]
    res: usize,
    #[command(flatten)]
    output: Output,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Validation(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::Weights(_) | Error::Io(_) => Failure::Usage(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

/// Inserts `--key value` pairs from a `key=value` file right after the
/// subcommand, so explicit flags (parsed later) override them.
fn expand_config(argv: Vec<OsString>) -> std::result::Result<Vec<OsString>, String> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        match a.to_str() {
            Some("--config") => config = Some(it.next().ok_or("--config needs a file")?),
            Some(s) if s.starts_with("--config=") => config = Some(OsString::from(&s["--config=".len()..])),
            _ => rest.push(a),
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let explicit: Vec<String> = rest
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or_default().to_string())
        .collect();
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path:?}: {e}"))?;
    let mut extra = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key=value", n + 1))?;
        let (k, v) = (k.trim().replace('_', "-"), v.trim());
        if explicit.contains(&k) {
            continue;
        }
        match v {
            "true" => extra.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => extra.push(OsString::from(format!("--{k}={v}"))),
        }
    }
    // Position after the first non-flag argument (the subcommand).
    let at = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 2);
    match at {
        Some(at) => {
            let tail = rest.split_off(at);
            rest.extend(extra);
            rest.extend(tail);
            Ok(rest)
        }
        None => Err("--config needs a subcommand".into()),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> std::result::Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).and_then(|_| so.flush()).map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn grid_csv(map: &ProjectionMap, values: impl Fn(usize) -> String) -> String {
    let g = map.grid;
    let mut s = format!(
        "xmin,ymin,xmax,ymax,res,success_fraction\n{},{},{},{},{},{:e}\n",
        g.bbox.min.x,
        g.bbox.min.y,
        g.bbox.max.x,
        g.bbox.max.y,
        g.res,
        map.success_fraction()
    );
    for j in 0..g.res {
        let row: Vec<String> = (0..g.res).map(|i| values(j * g.res + i)).collect();
        s += &row.join(",");
        s.push('\n');
    }
    s
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    match cli.command {
        Command::Certify(a) => {
            let field = parse_field(&a.field)?;
            let tube = sample_tube_in(&reference_sdf(), a.h_tube, SampleGrid::new(DEFAULT_BOX, a.res), exec)?;
            let th = Thresholds { c0_min: a.c0_min, cpsi_max: a.cpsi_max };
            let c = certify_with(&field, &tube, th, exec)?;
            let text = format!(
                "{}\n{},{},{},{},{:e},{:e},{:e},{:e},{}\n",
                headers::CERTIFY,
                field,
                a.h_tube,
                a.res,
                tube.points.len(),
                c.c0_hat,
                c.cpsi_hat,
                c.lip_grad_hat,
                c.h_crit_est,
                c.passed
            );
            emit(&a.output.out, &text)?;
            if !c.passed {
                return Err(Failure::Validation("certificate thresholds not met".into()));
            }
        }
        Command::ProjectMap(a) => {
            let field = parse_field(&a.field)?;
            if !(a.half_width > 0.0) || a.res == 0 {
                return Err(Failure::Usage("half-width and res must be positive".into()));
            }
            let bbox = BBox::centered(a.half_width);
            let radius = a.success_radius.unwrap_or_else(|| default_success_radius(&bbox));
            let opts = NewtonOptions { tol: a.tol, ..NewtonOptions::default() };
            let map = success_map_with(&field, ClosestPointMap::UNIT_CIRCLE, SampleGrid::new(bbox, a.res), opts, radius, exec)?;
            let mask = grid_csv(&map, |k| u8::from(map.success_mask[k]).to_string());
            let err = grid_csv(&map, |k| nan_blank(map.error_field[k]));
            match (&a.output.out, &a.error_out) {
                (None, None) => emit(&None, &format!("{mask}\n{err}"))?,
                (m, e) => {
                    emit(m, &mask)?;
                    if e.is_some() {
                        emit(e, &err)?;
                    }
                }
            }
        }
        Command::Hausdorff(a) => {
            let psi = parse_field(&a.field)?;
            let phi = reference_sdf();
            let tube = sample_tube_in(&phi, a.h_tube, SampleGrid::new(DEFAULT_BOX, a.tube_res), exec)?;
            let res = match a.res {
                Some(r) => r,
                None => {
                    let eps = crate::geometry::tube_stats_with(&phi, &psi, &tube, exec)?.eps_inf_hat;
                    crate::geometry::extraction_res_for(&DEFAULT_BOX, eps.max(1e-12))
                }
            };
            let r = bound_report_with(&phi, &psi, &tube, DEFAULT_BOX, res, exec)?;
            emit(&a.output.out, &hausdorff_csv(&psi, &r))?;
            if !r.bound_satisfied {
                return Err(Failure::Validation(format!("d_H {} exceeds bound {} + slack {}", r.d_h, r.bound, r.slack)));
            }
        }
        Command::Train(a) => {
            let (w, history) = train(&a.flags.config(a.budget))?;
            save_weights(&w, &a.out)?;
            emit(&a.history_out, &history.to_csv())?;
        }
        Command::Solve(a) => {
            let field = match &a.field {
                Some(f) => parse_field(f)?,
                None => PerturbationFamily::from(a.solver.family).field(a.alpha),
            };
            let opts = SolveOptions { level: a.level, ..a.solver.options() };
            let r = solve_poisson_with(&field, a.alpha, &opts, exec)?;
            emit(&a.output.out, &format!("{}\n{}\n", headers::SOLVE, solve_row(&r)))?;
        }
        Command::SweepPerturbation(a) => {
            let s = sweep_perturbation(&a.alphas, a.level, a.solver.family.into(), &a.solver.options(), exec)?;
            emit(&a.output.out, &perturbation_csv(&s))?;
        }
        Command::SweepRefinement(a) => {
            let s = sweep_refinement(a.alpha, &a.levels, a.solver.family.into(), &a.solver.options(), exec)?;
            emit(&a.output.out, &refinement_csv(&s))?;
        }
        Command::ValidateBound(a) => {
            let cfg = a.flags.config(*a.budgets.iter().max().unwrap_or(&1));
            let opts = ValidationOptions { tube_h: a.h_tube, tube_res: a.tube_res, extraction_res: a.res, bbox: DEFAULT_BOX };
            let rows = hausdorff_validation(&a.budgets, &cfg, &opts, exec)?;
            emit(&a.output.out, &bound_csv(&rows))?;
            let eps: Vec<f64> = rows.iter().map(|r| r.report.eps_inf_hat).collect();
            if !strictly_decreasing(&eps) {
                eprintln!("note: eps_inf_hat is not strictly decreasing across budgets: {eps:?}");
            }
            if let Some(r) = rows.iter().find(|r| !r.report.bound_satisfied) {
                return Err(Failure::Validation(format!("bound violated at budget {}", r.budget)));
            }
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv = match expand_config(argv.into_iter().map(Into::into).collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(Failure::Validation(m)) => {
            eprintln!("validation failed: {m}");
            1
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
    }
}
