//! Interface extraction, Hausdorff distances and the bound relating the
//! uniform function mismatch to the geometric mismatch.

mod hausdorff;
mod marching;

pub use hausdorff::{
    brute_force_distance, directed, hausdorff, hausdorff_with, point_segment_distance, HausdorffDistances,
    SegmentIndex,
};
pub use marching::{extract_zero_set, extract_zero_set_with, LevelSetPolyline, MIN_EXTRACTION_RES};
pub(crate) use marching::extract_fn as marching_extract_fn;

use crate::field::{BBox, ImplicitField};
use crate::regularity::TubeSampling;
use crate::{Error, Exec, Result};

pub const DEFAULT_EXTRACTION_RES: usize = 1024;
/// Ceiling for [`extraction_res_for`]; a 16384^2 lattice is the largest that
/// fits comfortably in memory.
pub const MAX_EXTRACTION_RES: usize = 16384;

/// Resolution that keeps the extraction cell well below a target mismatch:
/// `max(1024, ceil(40 * box / alpha))`, capped at [`MAX_EXTRACTION_RES`].
pub fn extraction_res_for(bbox: &BBox, alpha_target: f64) -> usize {
    let size = bbox.width().max(bbox.height());
    let want = (40.0 * size / alpha_target).ceil();
    if !want.is_finite() {
        return MAX_EXTRACTION_RES;
    }
    (want as usize).clamp(DEFAULT_EXTRACTION_RES, MAX_EXTRACTION_RES)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TubeStats {
    /// `max_{T_h} |psi - phi|`.
    pub eps_inf_hat: f64,
    /// `min_{T_h} |grad psi|`.
    pub c0_tilde_hat: f64,
}

pub fn tube_stats(phi: &ImplicitField, psi: &ImplicitField, tube: &TubeSampling) -> Result<TubeStats> {
    tube_stats_with(phi, psi, tube, Exec::default())
}

pub fn tube_stats_with(phi: &ImplicitField, psi: &ImplicitField, tube: &TubeSampling, exec: Exec) -> Result<TubeStats> {
    if tube.is_empty() {
        return Err(Error::EmptyTube { h_tube: tube.h_tube, grid_res: tube.grid.res });
    }
    let per_point = exec.map_slice(&tube.points, |&p| -> Result<(f64, f64)> {
        let (v, g) = psi.value_grad(p)?;
        Ok(((v - phi.value(p)).abs(), g[0].hypot(g[1])))
    });
    let mut eps = 0.0f64;
    let mut c0 = f64::INFINITY;
    for r in per_point {
        let (e, g) = r?;
        eps = eps.max(e);
        c0 = c0.min(g);
    }
    Ok(TubeStats { eps_inf_hat: eps, c0_tilde_hat: c0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HausdorffReport {
    pub d_forward: f64,
    pub d_backward: f64,
    pub d_h: f64,
    pub eps_inf_hat: f64,
    pub c0_tilde_hat: f64,
    /// `eps_inf_hat / min(1, c0_tilde_hat)`.
    pub bound: f64,
    /// Allowance for polyline discretization: two extraction cells.
    pub slack: f64,
    /// `d_h <= bound + slack`.
    pub bound_satisfied: bool,
    pub extraction_res: usize,
}

/// The reference `phi` must be an exact SDF on the tube, so its gradient
/// bound is 1 and the bound only involves `psi`.
pub fn bound_report(
    phi: &ImplicitField,
    psi: &ImplicitField,
    tube: &TubeSampling,
    bbox: BBox,
    res: usize,
) -> Result<HausdorffReport> {
    bound_report_with(phi, psi, tube, bbox, res, Exec::default())
}

pub fn bound_report_with(
    phi: &ImplicitField,
    psi: &ImplicitField,
    tube: &TubeSampling,
    bbox: BBox,
    res: usize,
    exec: Exec,
) -> Result<HausdorffReport> {
    let gamma = extract_zero_set_with(phi, bbox, res, exec)?;
    let gamma_p = extract_zero_set_with(psi, bbox, res, exec)?;
    let d = hausdorff_with(&gamma, &gamma_p, true, exec)?;
    let stats = tube_stats_with(phi, psi, tube, exec)?;
    let bound = stats.eps_inf_hat / stats.c0_tilde_hat.min(1.0);
    let slack = 2.0 * gamma.cell_size();
    Ok(HausdorffReport {
        d_forward: d.d_forward,
        d_backward: d.d_backward,
        d_h: d.d_h,
        eps_inf_hat: stats.eps_inf_hat,
        c0_tilde_hat: stats.c0_tilde_hat,
        bound,
        slack,
        bound_satisfied: d.d_h <= bound + slack,
        extraction_res: res,
    })
}
