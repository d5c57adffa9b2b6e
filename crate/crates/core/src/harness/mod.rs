//! Experiment sweeps, CSV records and the command line front-end.

pub mod cli;

use crate::field::{make_banded, BBox, ImplicitField, MlpWeights, Point2, DEFAULT_BOX};
use crate::geometry::{bound_report_with, HausdorffReport};
use crate::regularity::{sample_tube_in, SampleGrid};
use crate::solver::{solve_poisson_with, SolveOptions, SolveReport, MAX_LEVEL, MIN_LEVEL};
use crate::train::{reference_sdf, train_snapshots, TrainConfig};
use crate::{Error, Exec, Result};
use std::fmt::Write as _;
use std::path::Path;

/// How a perturbation size `alpha` becomes a perturbed unit circle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PerturbationFamily {
    /// Unit circle translated by `(alpha, alpha)`; `d_H = alpha * sqrt(2)`.
    #[default]
    Translate,
    /// Disk of radius `1 - alpha`; `d_H = alpha`.
    Offset,
}

impl PerturbationFamily {
    pub fn field(self, alpha: f64) -> ImplicitField {
        let circle = ImplicitField::circle(1.0);
        match self {
            PerturbationFamily::Translate => ImplicitField::shifted(circle, Point2::new(alpha, alpha)),
            PerturbationFamily::Offset => ImplicitField::offset(circle, -alpha),
        }
    }

    /// Analytic Hausdorff distance to the unit circle.
    pub fn exact_hausdorff(self, alpha: f64) -> f64 {
        match self {
            PerturbationFamily::Translate => alpha.abs() * std::f64::consts::SQRT_2,
            PerturbationFamily::Offset => alpha.abs(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "translate" => Ok(PerturbationFamily::Translate),
            "offset" => Ok(PerturbationFamily::Offset),
            _ => Err(Error::InvalidParameter(format!("unknown perturbation family '{s}' (translate|offset)"))),
        }
    }
}

/// Parses a field selector:
/// `circle[:R]`, `quadratic[:R]`, `banded[:R:band:far_slope]`,
/// `offset:a` (unit circle SDF minus `a`), `shift:a` (unit circle moved by
/// `(a, a)`), or a path to a weight file.
pub fn parse_field(selector: &str) -> Result<ImplicitField> {
    let mut parts = selector.split(':');
    let kind = parts.next().unwrap_or_default();
    let nums: Vec<f64> = parts
        .map(|p| p.parse::<f64>().map_err(|_| Error::InvalidParameter(format!("bad number '{p}' in field '{selector}'"))))
        .collect::<Result<_>>()?;
    let arg = |k: usize, default: f64| nums.get(k).copied().unwrap_or(default);
    let arity = |max: usize| {
        if nums.len() > max {
            Err(Error::InvalidParameter(format!("too many parameters in field '{selector}'")))
        } else {
            Ok(())
        }
    };
    match kind {
        "circle" => {
            arity(1)?;
            positive_radius(arg(0, 1.0)).map(ImplicitField::circle)
        }
        "quadratic" => {
            arity(1)?;
            positive_radius(arg(0, 1.0)).map(ImplicitField::quadratic)
        }
        "banded" => {
            arity(3)?;
            make_banded(arg(0, 1.0), arg(1, 0.2), arg(2, 0.1))
        }
        "offset" | "shift" if nums.len() == 1 => {
            let family = if kind == "offset" { PerturbationFamily::Offset } else { PerturbationFamily::Translate };
            Ok(family.field(nums[0]))
        }
        "offset" | "shift" => Err(Error::InvalidParameter(format!("field '{selector}' needs exactly one parameter"))),
        _ if Path::new(selector).is_file() => Ok(ImplicitField::neural(MlpWeights::load(Path::new(selector))?)),
        _ => Err(Error::InvalidParameter(format!("unknown field '{selector}'"))),
    }
}

fn positive_radius(r: f64) -> Result<f64> {
    if r > 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err(Error::InvalidParameter(format!("radius must be positive, got {r}")))
    }
}

/// Least-squares slope of `log y` against `log x`. `None` for fewer than two
/// distinct abscissae.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<Option<f64>> {
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidParameter(format!("log-log fit needs positive data, got ({x}, {y})")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok((points.len() >= 2 && sxx > 0.0).then(|| sxy / sxx))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSweep {
    pub family: PerturbationFamily,
    pub level: u32,
    pub records: Vec<SolveReport>,
    /// Slope of `L2_error` against measured `d_H`; `None` for a single alpha.
    pub slope: Option<f64>,
}

fn check_level(level: u32) -> Result<()> {
    if (MIN_LEVEL..=MAX_LEVEL).contains(&level) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("level must lie in {MIN_LEVEL}..={MAX_LEVEL}, got {level}")))
    }
}

/// Solves at a fixed level for each perturbation size and fits the log-log
/// slope of the error against the measured Hausdorff distance.
pub fn sweep_perturbation(
    alphas: &[f64],
    level: u32,
    family: PerturbationFamily,
    base: &SolveOptions,
    exec: Exec,
) -> Result<PerturbationSweep> {
    if alphas.is_empty() {
        return Err(Error::InvalidParameter("no perturbation sizes given".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter(format!("perturbation sizes must be positive, got {a}")));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("perturbation sizes must be strictly increasing".into()));
    }
    check_level(level)?;
    let opts = SolveOptions { level, hausdorff_res: base.hausdorff_res.or(Some(1024)), ..*base };
    let records = alphas
        .iter()
        .map(|&a| solve_poisson_with(&family.field(a), a, &opts, exec))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.d_h, r.l2_error)).collect();
    let slope = fit_loglog_slope(&pts)?;
    Ok(PerturbationSweep { family, level, records, slope })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementSweep {
    pub family: PerturbationFamily,
    pub alpha: f64,
    pub records: Vec<SolveReport>,
    /// `(e_prev - e) / e_prev` per record; NaN on the first.
    pub improvement: Vec<f64>,
    /// First level whose error improves by less than [`PLATEAU_IMPROVEMENT`].
    pub plateau_level: Option<u32>,
}

pub const PLATEAU_IMPROVEMENT: f64 = 0.10;

impl RefinementSweep {
    pub fn non_increasing(&self) -> bool {
        self.records.windows(2).all(|w| w[1].l2_error <= w[0].l2_error)
    }
}

/// One solve per level at a fixed perturbation; `alpha = 0` is the
/// unperturbed reference.
pub fn sweep_refinement(
    alpha: f64,
    levels: &[u32],
    family: PerturbationFamily,
    base: &SolveOptions,
    exec: Exec,
) -> Result<RefinementSweep> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("levels must be nonempty and strictly increasing".into()));
    }
    levels.iter().try_for_each(|&l| check_level(l))?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be non-negative, got {alpha}")));
    }
    let field = family.field(alpha);
    let mut records: Vec<SolveReport> = Vec::with_capacity(levels.len());
    for &level in levels {
        // d_H does not depend on the level; measure it once.
        let hausdorff_res = if records.is_empty() { base.hausdorff_res } else { None };
        let opts = SolveOptions { level, hausdorff_res, ..*base };
        let mut r = solve_poisson_with(&field, alpha, &opts, exec)?;
        if let Some(first) = records.first() {
            r.d_h = first.d_h;
        }
        records.push(r);
    }
    let improvement: Vec<f64> = std::iter::once(f64::NAN)
        .chain(records.windows(2).map(|w| (w[0].l2_error - w[1].l2_error) / w[0].l2_error))
        .collect();
    let plateau_level = improvement
        .iter()
        .zip(&records)
        .skip(1)
        .find(|(imp, _)| **imp < PLATEAU_IMPROVEMENT)
        .map(|(_, r)| r.level);
    Ok(RefinementSweep { family, alpha, records, improvement, plateau_level })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRecord {
    pub budget: usize,
    pub seed: u64,
    pub report: HausdorffReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationOptions {
    pub tube_h: f64,
    pub tube_res: usize,
    pub extraction_res: usize,
    pub bbox: BBox,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { tube_h: 0.1, tube_res: 512, extraction_res: 1024, bbox: DEFAULT_BOX }
    }
}

/// Trains once up to the largest budget, snapshots every budget and checks
/// the Hausdorff bound for each snapshot.
pub fn hausdorff_validation(
    budgets: &[usize],
    train: &TrainConfig,
    opts: &ValidationOptions,
    exec: Exec,
) -> Result<Vec<BoundRecord>> {
    if budgets.is_empty() || budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("budgets must be nonempty and strictly ascending".into()));
    }
    let (snaps, _) = train_snapshots(train, budgets)?;
    let phi = reference_sdf();
    let tube = sample_tube_in(&phi, opts.tube_h, SampleGrid::new(opts.bbox, opts.tube_res), exec)?;
    snaps
        .into_iter()
        .zip(budgets)
        .map(|(w, &budget)| {
            let psi = ImplicitField::neural(w);
            let report = bound_report_with(&phi, &psi, &tube, opts.bbox, opts.extraction_res, exec)?;
            Ok(BoundRecord { budget, seed: train.seed, report })
        })
        .collect()
}

pub fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

pub fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

/// Column headers; the first five solve columns match the published table.
pub mod headers {
    pub const SOLVE: &str = "alpha,level,h,L2_error,Hausdorff,active_cells,surrogate_faces,iterations,residual,solver";
    pub const PERTURBATION: &str = "record,family,alpha,level,h,L2_error,Hausdorff,slope";
    pub const REFINEMENT: &str = "record,family,alpha,level,h,L2_error,Hausdorff,improvement,plateau_level";
    pub const BOUND: &str =
        "budget,seed,eps_inf_hat,c0_tilde_hat,bound,slack,Hausdorff,d_forward,d_backward,bound_satisfied,extraction_res";
    pub const HAUSDORFF: &str =
        "field,eps_inf_hat,c0_tilde_hat,bound,slack,Hausdorff,d_forward,d_backward,bound_satisfied,extraction_res";
    pub const CERTIFY: &str = "field,h_tube,grid_res,tube_points,c0_hat,cpsi_hat,lip_grad_hat,h_crit_est,passed";
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn nan_blank(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:e}")
    }
}

pub fn solve_row(r: &SolveReport) -> String {
    format!(
        "{},{},{},{:e},{},{},{},{},{:e},{:?}",
        r.alpha,
        r.level,
        r.h,
        r.l2_error,
        nan_blank(r.d_h),
        r.active_cells,
        r.surrogate_faces,
        r.solver_iterations,
        r.residual,
        r.solver
    )
}

fn family_id(f: PerturbationFamily) -> &'static str {
    match f {
        PerturbationFamily::Translate => "translate",
        PerturbationFamily::Offset => "offset",
    }
}

pub fn perturbation_csv(s: &PerturbationSweep) -> String {
    let fam = family_id(s.family);
    let mut out = format!("{}\n", headers::PERTURBATION);
    for r in &s.records {
        let _ = writeln!(out, "point,{fam},{},{},{},{:e},{},", r.alpha, r.level, r.h, r.l2_error, nan_blank(r.d_h));
    }
    let _ = writeln!(out, "summary,{fam},,{},,,,{}", s.level, opt(s.slope));
    out
}

pub fn refinement_csv(s: &RefinementSweep) -> String {
    let fam = family_id(s.family);
    let mut out = format!("{}\n", headers::REFINEMENT);
    for (r, imp) in s.records.iter().zip(&s.improvement) {
        let _ = writeln!(
            out,
            "point,{fam},{},{},{},{:e},{},{},",
            r.alpha,
            r.level,
            r.h,
            r.l2_error,
            nan_blank(r.d_h),
            nan_blank(*imp)
        );
    }
    let plateau = s.plateau_level.map(|l| l.to_string()).unwrap_or_default();
    let _ = writeln!(out, "summary,{fam},{},,,,,,{plateau}", s.alpha);
    out
}

fn report_cols(r: &HausdorffReport) -> String {
    format!(
        "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
        r.eps_inf_hat,
        r.c0_tilde_hat,
        r.bound,
        r.slack,
        r.d_h,
        r.d_forward,
        r.d_backward,
        r.bound_satisfied,
        r.extraction_res
    )
}

pub fn bound_csv(rows: &[BoundRecord]) -> String {
    let mut out = format!("{}\n", headers::BOUND);
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.budget, r.seed, report_cols(&r.report));
    }
    out
}

pub fn hausdorff_csv(field: &ImplicitField, r: &HausdorffReport) -> String {
    format!("{}\n{},{}\n", headers::HAUSDORFF, field, report_cols(r))
}

/// Published Fig. 5a points `(d_H, L2 error)`, used to self-test the fit.
pub const PUBLISHED_SLOPE_POINTS: [(f64, f64); 5] = [
    (1.10485e-04, 1.38921e-04),
    (2.76213e-04, 2.88161e-04),
    (3.86698e-04, 3.95160e-04),
    (5.52426e-04, 5.59827e-04),
    (1.10485e-03, 1.10331e-03),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_on_published_points() {
        // Independent closed form for the same least-squares problem.
        let n = PUBLISHED_SLOPE_POINTS.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (x, y) in PUBLISHED_SLOPE_POINTS {
            let (lx, ly) = (x.ln(), y.ln());
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        let expected = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let s = fit_loglog_slope(&PUBLISHED_SLOPE_POINTS).unwrap().unwrap();
        assert!((s - expected).abs() < 1e-12);
        // The published points bend away from slope 1 at the small end.
        assert!((s - 0.901).abs() < 0.001, "{s}");
    }

    #[test]
    fn slope_fit_edge_cases() {
        assert_eq!(fit_loglog_slope(&[(1e-3, 2e-3)]).unwrap(), None);
        assert!(fit_loglog_slope(&[(0.0, 1.0), (1.0, 1.0)]).is_err());
        let s = fit_loglog_slope(&[(1.0, 3.0), (2.0, 12.0), (4.0, 48.0)]).unwrap().unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_rejects_bad_alphas() {
        let o = SolveOptions::default();
        let ex = Exec::default();
        assert!(sweep_perturbation(&[0.0, 1e-3], 4, PerturbationFamily::Translate, &o, ex).is_err());
        assert!(sweep_perturbation(&[2e-3, 1e-3], 4, PerturbationFamily::Translate, &o, ex).is_err());
        assert!(sweep_perturbation(&[1e-3], 11, PerturbationFamily::Translate, &o, ex).is_err());
        assert!(sweep_refinement(1e-3, &[5, 4], PerturbationFamily::Translate, &o, ex).is_err());
    }

    #[test]
    fn single_alpha_has_no_slope() {
        let o = SolveOptions { hausdorff_res: Some(256), ..SolveOptions::default() };
        let s = sweep_perturbation(&[1e-2], 4, PerturbationFamily::Translate, &o, Exec::default()).unwrap();
        assert_eq!(s.slope, None);
        assert!(perturbation_csv(&s).ends_with("summary,translate,,4,,,,\n"));
    }

    #[test]
    fn families_have_their_hausdorff_distance() {
        let o = SolveOptions { hausdorff_res: Some(1024), ..SolveOptions::default() };
        for fam in [PerturbationFamily::Translate, PerturbationFamily::Offset] {
            let s = sweep_perturbation(&[0.01], 4, fam, &o, Exec::default()).unwrap();
            let d = s.records[0].d_h;
            assert!((d - fam.exact_hausdorff(0.01)).abs() < 1e-4, "{fam:?}: {d}");
        }
    }

    #[test]
    fn refinement_detects_plateau_and_is_deterministic() {
        let o = SolveOptions { hausdorff_res: Some(256), ..SolveOptions::default() };
        let run = || sweep_refinement(0.05, &[4, 5, 6], PerturbationFamily::Translate, &o, Exec::default()).unwrap();
        let s = run();
        assert_eq!(s.records.len(), 3);
        assert!(s.improvement[0].is_nan());
        assert!(s.plateau_level.is_some(), "{:?}", s.improvement);
        assert_eq!(refinement_csv(&s), refinement_csv(&run()));
        assert!(s.records.iter().all(|r| r.d_h == s.records[0].d_h));
    }

    #[test]
    fn field_selectors() {
        assert_eq!(parse_field("circle").unwrap().to_string(), ImplicitField::circle(1.0).to_string());
        assert_eq!(parse_field("quadratic:2").unwrap().to_string(), ImplicitField::quadratic(2.0).to_string());
        assert!(matches!(parse_field("banded").unwrap(), ImplicitField::Banded(_)));
        assert_eq!(parse_field("shift:0.01").unwrap().to_string(), PerturbationFamily::Translate.field(0.01).to_string());
        assert_eq!(parse_field("offset:0.01").unwrap().to_string(), PerturbationFamily::Offset.field(0.01).to_string());
        for bad in ["circle:-1", "circle:1:2", "offset", "banded:1:2:0.1", "nonsense", "circle:x"] {
            assert!(parse_field(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn csv_headers_are_stable() {
        assert!(headers::SOLVE.starts_with("alpha,level,h,L2_error,Hausdorff"));
        let line = solve_row(&SolveReport {
            level: 4,
            h: 0.125,
            alpha: 0.001,
            d_h: f64::NAN,
            l2_error: 0.5,
            active_cells: 3,
            surrogate_faces: 2,
            solver_iterations: 1,
            residual: 1e-12,
            solver: crate::solver::SolverKind::BiCgStab,
        });
        assert_eq!(line.split(',').count(), headers::SOLVE.split(',').count());
        assert!(line.starts_with("0.001,4,0.125,5e-1,,"));
    }

    #[test]
    fn monotonicity_helpers() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
        assert!(non_decreasing(&[1.0, 1.0, 2.0]));
        assert!(!non_decreasing(&[2.0, 1.0]));
    }
}
