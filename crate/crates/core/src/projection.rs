//! Closest-point projection onto the zero level set.
//!
//! [`newton_project`] runs `x <- x - psi(x) grad psi(x) / |grad psi(x)|^2`.
//! [`flow_project`] integrates the normalized gradient flow, along which
//! `psi` decreases at unit rate, and serves as an independent oracle.

use crate::field::{BBox, ImplicitField, Point2};
use crate::regularity::SampleGrid;
use crate::{Error, Exec, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// `|grad psi|` fell below the floor.
    GradientFloor,
    /// Field evaluation failed (singular point) or produced a non-finite
    /// iterate.
    Singular,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max-iterations",
            Termination::GradientFloor => "gradient-floor",
            Termination::Singular => "singular",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionResult {
    pub converged: bool,
    pub reason: Termination,
    pub final_point: Point2,
    /// `d` in `x0 = x* + d n(x*)`; signed like `psi(x0)`.
    pub signed_distance: f64,
    pub iterations: usize,
    /// `|psi(final_point)|`.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub grad_floor: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 50, grad_floor: 1e-6 }
    }
}

fn finish(x0: Point2, psi0: f64, x: Point2, residual: f64, iterations: usize, reason: Termination) -> ProjectionResult {
    let converged = reason == Termination::Converged;
    let d = x0.dist(x);
    ProjectionResult {
        converged,
        reason,
        final_point: x,
        signed_distance: if psi0 < 0.0 { -d } else { d },
        iterations,
        residual,
    }
}

pub fn newton_project(field: &ImplicitField, x0: Point2, opts: NewtonOptions) -> Result<ProjectionResult> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidParameter("newton needs tol > 0 and max_iter >= 1".into()));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidParameter("non-finite start point".into()));
    }
    let psi0 = field.value(x0);
    let mut x = x0;
    let mut k = 0;
    loop {
        let (v, g) = match field.value_grad(x) {
            Ok(vg) => vg,
            Err(_) => return Ok(finish(x0, psi0, x, field.value(x).abs(), k, Termination::Singular)),
        };
        if !v.is_finite() {
            return Ok(finish(x0, psi0, x, f64::INFINITY, k, Termination::Singular));
        }
        if v.abs() <= opts.tol {
            return Ok(finish(x0, psi0, x, v.abs(), k, Termination::Converged));
        }
        if k == opts.max_iter {
            return Ok(finish(x0, psi0, x, v.abs(), k, Termination::MaxIterations));
        }
        let g2 = g[0] * g[0] + g[1] * g[1];
        if g2.sqrt() < opts.grad_floor {
            return Ok(finish(x0, psi0, x, v.abs(), k, Termination::GradientFloor));
        }
        x = Point2::new(x.x - v * g[0] / g2, x.y - v * g[1] / g2);
        k += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowOptions {
    pub dt: f64,
    pub tol: f64,
    pub max_steps: usize,
    pub grad_floor: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { dt: 1e-2, tol: 1e-10, max_steps: 100_000, grad_floor: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowProjection {
    pub result: ProjectionResult,
    /// `psi` at every accepted step, starting with `psi(x0)`.
    pub psi_history: Vec<f64>,
    /// Time step used for each history entry after the first.
    pub step_sizes: Vec<f64>,
}

impl FlowProjection {
    /// `|psi|` must drop by the step size at every step, up to `10 dt^2`.
    pub fn is_consistent(&self) -> bool {
        self.psi_history.windows(2).zip(&self.step_sizes).all(|(w, &dt)| {
            let drop = w[0].abs() - w[1].abs();
            (drop - dt).abs() <= 10.0 * dt * dt
        })
    }
}

/// Integrates `gamma' = -sign(psi0) grad psi / |grad psi|^2` with classical
/// RK4. The last steps are shortened to the remaining `|psi|` so the
/// trajectory stops on the level set.
pub fn flow_project(field: &ImplicitField, x0: Point2, opts: FlowOptions) -> Result<FlowProjection> {
    if !(opts.dt > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("flow needs dt > 0 and tol > 0".into()));
    }
    let psi0 = field.value(x0);
    let sign = if psi0 < 0.0 { -1.0 } else { 1.0 };
    let velocity = |p: Point2| -> std::result::Result<Point2, Termination> {
        let (_, g) = field.value_grad(p).map_err(|_| Termination::Singular)?;
        let g2 = g[0] * g[0] + g[1] * g[1];
        if g2.sqrt() < opts.grad_floor {
            return Err(Termination::GradientFloor);
        }
        Ok(Point2::new(-sign * g[0] / g2, -sign * g[1] / g2))
    };

    let mut x = x0;
    let mut psi = psi0;
    let mut history = vec![psi0];
    let mut steps = Vec::new();
    for k in 0..=opts.max_steps {
        if psi.abs() <= opts.tol {
            let result = finish(x0, psi0, x, psi.abs(), k, Termination::Converged);
            return Ok(FlowProjection { result, psi_history: history, step_sizes: steps });
        }
        if k == opts.max_steps {
            break;
        }
        let dt = opts.dt.min(psi.abs());
        let stage = || -> std::result::Result<Point2, Termination> {
            let k1 = velocity(x)?;
            let k2 = velocity(x + (0.5 * dt) * k1)?;
            let k3 = velocity(x + (0.5 * dt) * k2)?;
            let k4 = velocity(x + dt * k3)?;
            Ok(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        };
        match stage() {
            Ok(next) => {
                x = next;
                psi = field.value(x);
                history.push(psi);
                steps.push(dt);
            }
            Err(reason) => {
                let result = finish(x0, psi0, x, psi.abs(), k, reason);
                return Ok(FlowProjection { result, psi_history: history, step_sizes: steps });
            }
        }
    }
    let result = finish(x0, psi0, x, psi.abs(), opts.max_steps, Termination::MaxIterations);
    Ok(FlowProjection { result, psi_history: history, step_sizes: steps })
}

/// Analytic closest-point map of the reference interface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClosestPointMap {
    Circle { center: Point2, radius: f64 },
}

impl ClosestPointMap {
    pub const UNIT_CIRCLE: ClosestPointMap =
        ClosestPointMap::Circle { center: Point2::ORIGIN, radius: 1.0 };

    /// `None` where the map is undefined (the circle center).
    pub fn project(&self, p: Point2) -> Option<Point2> {
        match *self {
            ClosestPointMap::Circle { center, radius } => {
                let v = p - center;
                let r = v.norm();
                (r > 0.0).then(|| center + (radius / r) * v)
            }
        }
    }

    pub fn id(&self) -> String {
        match self {
            ClosestPointMap::Circle { center, radius } => {
                format!("circle({},{};{})", center.x, center.y, radius)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProjectionMap {
    pub grid: SampleGrid,
    pub success_mask: Vec<bool>,
    /// Distance to the true closest point; NaN where `success_mask` is false.
    pub error_field: Vec<f64>,
    pub reference_closest_point: ClosestPointMap,
    pub results: Vec<ProjectionResult>,
}

impl ProjectionMap {
    pub fn success_fraction(&self) -> f64 {
        self.success_mask.iter().filter(|&&s| s).count() as f64 / self.success_mask.len() as f64
    }

    /// Success fraction among grid points selected by `pred`.
    pub fn success_fraction_where(&self, pred: impl Fn(Point2) -> bool) -> Option<f64> {
        let mut total = 0usize;
        let mut ok = 0usize;
        for (k, &s) in self.success_mask.iter().enumerate() {
            let (i, j) = self.grid.ij(k);
            if pred(self.grid.point(i, j)) {
                total += 1;
                ok += usize::from(s);
            }
        }
        (total > 0).then(|| ok as f64 / total as f64)
    }

    /// Area of the successful set.
    pub fn success_area(&self) -> f64 {
        let (dx, dy) = self.grid.spacing();
        self.success_mask.iter().filter(|&&s| s).count() as f64 * dx * dy
    }
}

pub fn default_success_radius(bbox: &BBox) -> f64 {
    1e-4 * bbox.width().max(bbox.height())
}

#[allow(clippy::too_many_arguments)]
pub fn success_map(
    field: &ImplicitField,
    truth: ClosestPointMap,
    bbox: BBox,
    res: usize,
    tol: f64,
    success_radius: f64,
) -> Result<ProjectionMap> {
    let opts = NewtonOptions { tol, ..NewtonOptions::default() };
    success_map_with(field, truth, SampleGrid::new(bbox, res), opts, success_radius, Exec::default())
}

/// Newton projection from every lattice point; success requires
/// convergence to within `success_radius` of the true closest point.
pub fn success_map_with(
    field: &ImplicitField,
    truth: ClosestPointMap,
    grid: SampleGrid,
    opts: NewtonOptions,
    success_radius: f64,
    exec: Exec,
) -> Result<ProjectionMap> {
    if grid.res == 0 {
        return Err(Error::InvalidParameter("success map needs res >= 1".into()));
    }
    let outcomes = exec.map(grid.len(), |k| -> Result<_> {
        let (i, j) = grid.ij(k);
        let x0 = grid.point(i, j);
        let res = newton_project(field, x0, opts)?;
        let err = truth.project(x0).map_or(f64::NAN, |t| res.final_point.dist(t));
        let ok = res.converged && err <= success_radius;
        Ok((res, ok, if ok { err } else { f64::NAN }))
    });
    let mut results = Vec::with_capacity(outcomes.len());
    let mut success_mask = Vec::with_capacity(outcomes.len());
    let mut error_field = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let (r, ok, e) = o?;
        results.push(r);
        success_mask.push(ok);
        error_field.push(e);
    }
    Ok(ProjectionMap { grid, success_mask, error_field, reference_closest_point: truth, results })
}
