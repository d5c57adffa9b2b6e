//! Sampled certification of gradient non-degeneracy and bounded curvature on
//! a tubular neighborhood `T_h = {|phi| < h}` of the reference interface.

use crate::field::{BBox, ImplicitField, Point2, DEFAULT_BOX};
use crate::{Error, Exec, Result};
use std::collections::HashMap;

/// Cell-centered sampling lattice: `res x res` points over `bbox`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleGrid {
    pub bbox: BBox,
    pub res: usize,
}

impl SampleGrid {
    pub fn new(bbox: BBox, res: usize) -> Self {
        SampleGrid { bbox, res }
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.bbox.width() / self.res as f64, self.bbox.height() / self.res as f64)
    }

    pub fn point(&self, i: usize, j: usize) -> Point2 {
        let (dx, dy) = self.spacing();
        Point2::new(
            self.bbox.min.x + (i as f64 + 0.5) * dx,
            self.bbox.min.y + (j as f64 + 0.5) * dy,
        )
    }

    pub fn len(&self) -> usize {
        self.res * self.res
    }

    pub fn is_empty(&self) -> bool {
        self.res == 0
    }

    /// Row-major (`j` outer) flat index to `(i, j)`.
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.res, k / self.res)
    }
}

#[derive(Clone, Debug)]
pub struct TubeSampling {
    pub reference_field: ImplicitField,
    pub h_tube: f64,
    pub grid: SampleGrid,
    pub points: Vec<Point2>,
    /// Lattice indices of `points`, used for neighbor pairs.
    pub indices: Vec<(usize, usize)>,
}

impl TubeSampling {
    pub fn grid_res(&self) -> usize {
        self.grid.res
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index pairs of retained points that are lattice neighbors along +x or
    /// +y.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let lookup: HashMap<(usize, usize), usize> =
            self.indices.iter().enumerate().map(|(k, &ij)| (ij, k)).collect();
        let mut pairs = Vec::new();
        for (k, &(i, j)) in self.indices.iter().enumerate() {
            if let Some(&r) = lookup.get(&(i + 1, j)) {
                pairs.push((k, r));
            }
            if let Some(&u) = lookup.get(&(i, j + 1)) {
                pairs.push((k, u));
            }
        }
        pairs
    }
}

pub const MIN_TUBE_RES: usize = 32;

pub fn sample_tube(reference: &ImplicitField, h_tube: f64, grid_res: usize) -> Result<TubeSampling> {
    sample_tube_in(reference, h_tube, SampleGrid::new(DEFAULT_BOX, grid_res), Exec::default())
}

/// Retains the lattice points of `grid` with `|phi(p)| < h_tube`.
pub fn sample_tube_in(
    reference: &ImplicitField,
    h_tube: f64,
    grid: SampleGrid,
    exec: Exec,
) -> Result<TubeSampling> {
    if !(h_tube > 0.0) {
        return Err(Error::InvalidParameter(format!("h_tube must be positive, got {h_tube}")));
    }
    if grid.res < MIN_TUBE_RES {
        return Err(Error::InvalidParameter(format!(
            "grid_res must be at least {MIN_TUBE_RES}, got {}",
            grid.res
        )));
    }
    let keep = exec.map(grid.len(), |k| {
        let (i, j) = grid.ij(k);
        reference.value(grid.point(i, j)).abs() < h_tube
    });
    let mut points = Vec::new();
    let mut indices = Vec::new();
    for (k, _) in keep.iter().enumerate().filter(|(_, &b)| b) {
        let (i, j) = grid.ij(k);
        points.push(grid.point(i, j));
        indices.push((i, j));
    }
    if points.is_empty() {
        return Err(Error::EmptyTube { h_tube, grid_res: grid.res });
    }
    Ok(TubeSampling { reference_field: reference.clone(), h_tube, grid, points, indices })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub c0_min: f64,
    pub cpsi_max: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { c0_min: 0.1, cpsi_max: 100.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularityCertificate {
    /// `min ||grad psi||` over the tube.
    pub c0_hat: f64,
    /// `max ||hess psi||_op` over the tube.
    pub cpsi_hat: f64,
    /// Largest gradient difference quotient over neighboring lattice pairs.
    pub lip_grad_hat: f64,
    /// Estimate `c0^2 / (2 C_psi)` from the local reach heuristic; not the
    /// true critical tube width, which depends on the global reach.
    pub h_crit_est: f64,
    pub passed: bool,
}

pub fn certify(
    field: &ImplicitField,
    tube: &TubeSampling,
    thresholds: Thresholds,
) -> Result<RegularityCertificate> {
    certify_with(field, tube, thresholds, Exec::default())
}

pub fn certify_with(
    field: &ImplicitField,
    tube: &TubeSampling,
    thresholds: Thresholds,
    exec: Exec,
) -> Result<RegularityCertificate> {
    if tube.is_empty() {
        return Err(Error::EmptyTube { h_tube: tube.h_tube, grid_res: tube.grid.res });
    }
    let jets = exec.map_slice(&tube.points, |&p| field.eval_jet(p));
    let jets = jets.into_iter().collect::<Result<Vec<_>>>()?;

    let c0_hat = jets.iter().map(|j| j.grad_norm()).fold(f64::INFINITY, f64::min);
    let cpsi_hat = jets.iter().map(|j| j.hess.op_norm()).fold(0.0, f64::max);
    let lip_grad_hat = tube
        .neighbor_pairs()
        .into_iter()
        .map(|(a, b)| {
            let (ga, gb) = (jets[a].grad, jets[b].grad);
            (ga[0] - gb[0]).hypot(ga[1] - gb[1]) / tube.points[a].dist(tube.points[b])
        })
        .fold(0.0, f64::max);
    let h_crit_est = if cpsi_hat > 0.0 { c0_hat * c0_hat / (2.0 * cpsi_hat) } else { f64::INFINITY };
    let passed = c0_hat >= thresholds.c0_min && cpsi_hat <= thresholds.cpsi_max;
    Ok(RegularityCertificate { c0_hat, cpsi_hat, lip_grad_hat, h_crit_est, passed })
}

/// Smallness conditions under which the Hausdorff bound applies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundValidity {
    pub eps_inf: f64,
    /// `eps_inf <= c0^2 / (2 C_psi)`.
    pub cond_disc: bool,
    /// `eps_inf <= (c0 / 2) h_tube`.
    pub cond_tube: bool,
}

impl BoundValidity {
    pub fn holds(&self) -> bool {
        self.cond_disc && self.cond_tube
    }
}

pub fn check_bound_validity(cert: &RegularityCertificate, eps_inf: f64, h_tube: f64) -> Result<BoundValidity> {
    if !(eps_inf >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps_inf must be non-negative, got {eps_inf}")));
    }
    let disc_limit = if cert.cpsi_hat > 0.0 {
        cert.c0_hat * cert.c0_hat / (2.0 * cert.cpsi_hat)
    } else {
        f64::INFINITY
    };
    Ok(BoundValidity {
        eps_inf,
        cond_disc: eps_inf <= disc_limit,
        cond_tube: eps_inf <= 0.5 * cert.c0_hat * h_tube,
    })
}

/// Cone-condition parameters of the domain; only used to report the
/// smallness threshold on the perturbation size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityParameters {
    pub rho: f64,
    pub theta: f64,
}

impl StabilityParameters {
    pub fn new(rho: f64, theta: f64) -> Result<Self> {
        if !(rho > 0.0) || !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!(
                "need rho > 0 and 0 < theta < pi/2, got rho={rho}, theta={theta}"
            )));
        }
        Ok(StabilityParameters { rho, theta })
    }

    /// `rho sin(theta) / 2`.
    pub fn perturbation_limit(&self) -> f64 {
        0.5 * self.rho * self.theta.sin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_banded;

    #[test]
    fn circle_tube_is_an_annulus() {
        let tube = sample_tube(&ImplicitField::circle(1.0), 0.1, 512).unwrap();
        assert!(tube.points.iter().all(|p| p.norm() > 0.9 && p.norm() < 1.1));
        let frac = tube.len() as f64 / (512.0 * 512.0);
        let exact = std::f64::consts::PI * (1.1f64.powi(2) - 0.9f64.powi(2)) / 16.0;
        assert!((frac / exact - 1.0).abs() < 0.1, "fraction {frac} vs {exact}");
    }

    #[test]
    fn tiny_tube_is_empty() {
        let err = sample_tube(&ImplicitField::circle(1.0), 1e-9, 64).unwrap_err();
        assert!(matches!(err, Error::EmptyTube { .. }));
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(sample_tube(&ImplicitField::circle(1.0), 0.1, 16).is_err());
    }

    #[test]
    fn circle_certificate() {
        let phi = ImplicitField::circle(1.0);
        let tube = sample_tube(&phi, 0.1, 512).unwrap();
        let cert = certify(&phi, &tube, Thresholds::default()).unwrap();
        assert!((cert.c0_hat - 1.0).abs() < 1e-9);
        assert!((cert.cpsi_hat * 0.9 - 1.0).abs() < 0.02, "{cert:?}");
        assert!(cert.passed);
        assert!((cert.h_crit_est - 1.0 / (2.0 * cert.cpsi_hat)).abs() < 1e-15);
    }

    #[test]
    fn quadratic_certificate() {
        let phi = ImplicitField::quadratic(1.0);
        let tube = sample_tube(&phi, 0.1, 512).unwrap();
        let cert = certify(&phi, &tube, Thresholds::default()).unwrap();
        assert!((cert.cpsi_hat - 2.0).abs() < 1e-9);
        let expect = 2.0 * 0.9f64.sqrt();
        assert!((cert.c0_hat / expect - 1.0).abs() < 0.01, "{cert:?}");
        // Gradient 2x is linear, so difference quotients are exactly 2.
        assert!((cert.lip_grad_hat - 2.0).abs() < 1e-9);
    }

    #[test]
    fn banded_certificate_passes_only_inside_band() {
        let f = make_banded(1.0, 0.2, 0.02).unwrap();
        let th = Thresholds { c0_min: 0.5, ..Thresholds::default() };
        let phi = ImplicitField::circle(1.0);
        let inside = sample_tube(&phi, 0.15, 256).unwrap();
        let cert = certify(&f, &inside, th).unwrap();
        assert!((cert.c0_hat - 1.0).abs() < 1e-6);
        assert!(cert.passed);
        let wide = sample_tube(&phi, 0.9, 256).unwrap();
        let cert = certify(&f, &wide, th).unwrap();
        assert!(cert.c0_hat <= 0.02 + 1e-12);
        assert!(!cert.passed);
    }

    #[test]
    fn shrinking_the_tube_is_monotone() {
        let psi = ImplicitField::quadratic(1.0);
        let phi = ImplicitField::circle(1.0);
        let mut last: Option<RegularityCertificate> = None;
        for h in [0.5, 0.3, 0.2, 0.1, 0.05] {
            let cert = certify(&psi, &sample_tube(&phi, h, 128).unwrap(), Thresholds::default()).unwrap();
            if let Some(prev) = last {
                assert!(cert.c0_hat >= prev.c0_hat);
                assert!(cert.cpsi_hat <= prev.cpsi_hat);
            }
            last = Some(cert);
        }
    }

    #[test]
    fn bound_validity_examples() {
        let cert = |c0, cpsi| RegularityCertificate {
            c0_hat: c0,
            cpsi_hat: cpsi,
            lip_grad_hat: 0.0,
            h_crit_est: 0.0,
            passed: true,
        };
        let v = check_bound_validity(&cert(1.0, 1.11), 0.1, 0.3).unwrap();
        assert!(v.cond_disc && v.cond_tube);
        let v = check_bound_validity(&cert(1.0, 1.11), 0.0, 0.3).unwrap();
        assert!(v.holds());
        let v = check_bound_validity(&cert(0.01, 10.0), 0.01, 0.3).unwrap();
        assert!(!v.cond_disc);
        assert!(check_bound_validity(&cert(1.0, 1.0), -1.0, 0.1).is_err());
    }

    #[test]
    fn stability_parameters() {
        let s = StabilityParameters::new(0.5, std::f64::consts::FRAC_PI_6).unwrap();
        assert!((s.perturbation_limit() - 0.125).abs() < 1e-15);
        assert!(StabilityParameters::new(0.5, 2.0).is_err());
    }
}
