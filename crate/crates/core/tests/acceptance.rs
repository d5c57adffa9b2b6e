//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion (with the measured numbers) and exits nonzero if any fails.
//! Positional arguments filter criteria by name substring.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simready::field::{finite_diff_check, make_banded, ImplicitField, Point2, DEFAULT_BOX};
use simready::geometry::{bound_report, extract_zero_set, extraction_res_for, hausdorff_with};
use simready::harness::{
    fit_loglog_slope, hausdorff_validation, non_decreasing, strictly_decreasing, sweep_perturbation, sweep_refinement,
    PerturbationFamily, ValidationOptions,
};
use simready::projection::{flow_project, newton_project, success_map, ClosestPointMap, FlowOptions, NewtonOptions};
use simready::regularity::{certify, sample_tube, Thresholds};
use simready::solver::{
    assemble, bicgstab, classify, dense_lu, manufactured_f, manufactured_u, patch_test, BackgroundGrid, BoundaryData,
    SbmParams, SolveOptions, DEFAULT_GAMMA,
};
use simready::train::{init_weights, loss_and_grad, Sample, TrainConfig};
use simready::Exec;
use std::time::Instant;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(cond: bool, label: &str, failures: &mut Vec<String>) {
    if !cond {
        failures.push(label.to_string());
    }
}

fn outcome(failures: Vec<String>, detail: String) -> Outcome {
    let pass = failures.is_empty();
    let detail = if pass { detail } else { format!("{detail}; failed: {}", failures.join(", ")) };
    Outcome { pass, detail }
}

fn criterion_1_slope() -> Outcome {
    let opts = SolveOptions::default();
    let s = sweep_perturbation(&[2e-4, 4e-4, 8e-4, 1.6e-3], 8, PerturbationFamily::Translate, &opts, Exec::default())
        .expect("sweep");
    let slope = s.slope.unwrap_or(f64::NAN);
    let pts: Vec<String> = s.records.iter().map(|r| format!("({:.3e}, {:.3e})", r.d_h, r.l2_error)).collect();
    let mut f = Vec::new();
    check((0.85..=1.15).contains(&slope), "slope in [0.85, 1.15]", &mut f);
    outcome(f, format!("slope {slope:.4} over (d_H, L2) {}", pts.join(" ")))
}

fn criterion_2_plateau() -> Outcome {
    let mut f = Vec::new();
    let mut detail = Vec::new();
    for alpha in [0.001, 0.001953125, 0.0025] {
        let s = sweep_refinement(alpha, &[4, 5, 6, 7, 8], PerturbationFamily::Translate, &SolveOptions::default(), Exec::default())
            .expect("sweep");
        let errs: Vec<f64> = s.records.iter().map(|r| r.l2_error).collect();
        let d_h = s.records[0].d_h;
        let e8 = errs[4];
        let ratio = e8 / d_h;
        let gain = (errs[3] - errs[4]) / errs[3];
        check(s.non_increasing(), &format!("non-increasing (d_H {d_h:.3e})"), &mut f);
        check((0.5..=2.0).contains(&ratio), &format!("level-8 within factor 2 (d_H {d_h:.3e})"), &mut f);
        check(gain < 0.15, &format!("7->8 improvement < 15% (d_H {d_h:.3e})"), &mut f);
        let es: Vec<String> = errs.iter().map(|e| format!("{e:.5e}")).collect();
        detail.push(format!("d_H {d_h:.4e}: [{}] e8/d_H {ratio:.3} 7->8 {:+.2}%", es.join(", "), -100.0 * gain));
    }
    outcome(f, detail.join("; "))
}

fn criterion_3_convergence() -> Outcome {
    let s = sweep_refinement(0.0, &[4, 5, 6, 7], PerturbationFamily::Translate, &SolveOptions::default(), Exec::default())
        .expect("sweep");
    let pts: Vec<(f64, f64)> = s.records.iter().map(|r| (r.h, r.l2_error)).collect();
    let order = fit_loglog_slope(&pts).unwrap().unwrap_or(f64::NAN);
    let es: Vec<String> = pts.iter().map(|p| format!("{:.4e}", p.1)).collect();
    let mut f = Vec::new();
    check(order >= 1.8, "order >= 1.8", &mut f);
    outcome(f, format!("order {order:.3}, errors [{}]", es.join(", ")))
}

fn criterion_4_patch() -> Outcome {
    let mut f = Vec::new();
    let mut d = Vec::new();
    for level in 4..=6 {
        let e = patch_test(&ImplicitField::circle(1.0), level, DEFAULT_GAMMA, Exec::default()).expect("patch");
        check(e <= 1e-10, &format!("level {level}"), &mut f);
        d.push(format!("level {level}: {e:.2e}"));
    }
    outcome(f, format!("max nodal error {}", d.join(", ")))
}

fn criterion_5_bound() -> Outcome {
    let mut f = Vec::new();
    let mut d = Vec::new();
    let phi = ImplicitField::circle(1.0);
    let tube = sample_tube(&phi, 0.1, 512).expect("tube");
    for alpha in [1e-3, 1e-2, 5e-2] {
        let psi = ImplicitField::offset(phi.clone(), alpha);
        let res = extraction_res_for(&DEFAULT_BOX, alpha);
        let r = bound_report(&phi, &psi, &tube, DEFAULT_BOX, res).expect("report");
        check(r.bound_satisfied, &format!("offset {alpha}"), &mut f);
        d.push(format!("offset {alpha}: d_H {:.4e} <= {:.4e} + {:.1e}", r.d_h, r.bound, r.slack));
    }
    let t = Instant::now();
    let rows = hausdorff_validation(&[1000, 3000, 10000, 15000], &TrainConfig::default(), &ValidationOptions::default(), Exec::default())
        .expect("validation");
    for r in &rows {
        check(r.report.bound_satisfied, &format!("budget {}", r.budget), &mut f);
        d.push(format!(
            "{} steps: d_H {:.4e} <= {:.4e} + {:.1e} (eps {:.4e}, c0 {:.4})",
            r.budget, r.report.d_h, r.report.bound, r.report.slack, r.report.eps_inf_hat, r.report.c0_tilde_hat
        ));
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.report.eps_inf_hat).collect();
    let c0: Vec<f64> = rows.iter().map(|r| r.report.c0_tilde_hat).collect();
    check(strictly_decreasing(&eps), "eps strictly decreasing", &mut f);
    check(non_decreasing(&c0), "c0 non-decreasing", &mut f);
    d.push(format!("training {:.0?}", t.elapsed()));
    outcome(f, d.join("; "))
}

fn tube_points(n: usize, h: f64, seed: u64) -> Vec<Point2> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rad: f64 = r.gen_range(1.0 - h..1.0 + h);
            let t: f64 = r.gen_range(0.0..std::f64::consts::TAU);
            Point2::new(rad * t.cos(), rad * t.sin())
        })
        .collect()
}

fn criterion_6_projection() -> Outcome {
    let mut f = Vec::new();
    let pts = tube_points(10_000, 0.1, 6);
    let stats = |field: &ImplicitField| {
        let (mut it, mut err, mut ok) = (0usize, 0.0f64, true);
        for &p in &pts {
            let r = newton_project(field, p, NewtonOptions::default()).expect("newton");
            ok &= r.converged;
            it = it.max(r.iterations);
            err = err.max(r.final_point.dist(ClosestPointMap::UNIT_CIRCLE.project(p).unwrap()));
        }
        (ok, it, err)
    };
    let (ok_c, it_c, err_c) = stats(&ImplicitField::circle(1.0));
    let (ok_q, it_q, err_q) = stats(&ImplicitField::quadratic(1.0));
    check(ok_c && it_c <= 2 && err_c <= 1e-10, "circle", &mut f);
    check(ok_q && it_q <= 10 && err_q <= 1e-8, "quadratic", &mut f);

    let banded = make_banded(1.0, 0.2, 0.02).unwrap();
    let ImplicitField::Banded(profile) = banded.clone() else { unreachable!() };
    let map = success_map(&banded, ClosestPointMap::UNIT_CIRCLE, DEFAULT_BOX, 256, 1e-10, 4e-4).expect("map");
    let inside = map.success_fraction_where(|p| profile.in_band(p)).unwrap();
    let outside = map.success_fraction_where(|p| profile.in_far_region(p)).unwrap();
    check(outside < 0.05, "banded outside < 5%", &mut f);
    check(inside > 0.99, "banded inside > 99%", &mut f);
    outcome(
        f,
        format!(
            "circle: {it_c} it, err {err_c:.1e}; quadratic: {it_q} it, err {err_q:.1e}; banded success inside {:.2}%, outside {:.2}%",
            100.0 * inside,
            100.0 * outside
        ),
    )
}

fn criterion_7_oracles() -> Outcome {
    let mut f = Vec::new();
    let mut worst = 0.0f64;
    let fields = [ImplicitField::circle(1.0), ImplicitField::quadratic(1.0), make_banded(1.0, 0.2, 0.02).unwrap()];
    for field in &fields {
        for p in tube_points(200, 0.15, 7) {
            let n = newton_project(field, p, NewtonOptions::default()).expect("newton");
            let fl = flow_project(field, p, FlowOptions::default()).expect("flow");
            if !(n.converged && fl.result.converged) {
                f.push(format!("{field} did not converge from {p:?}"));
                continue;
            }
            worst = worst.max(n.final_point.dist(fl.result.final_point));
        }
    }
    check(worst <= 1e-6, "flow vs newton", &mut f);

    let a = extract_zero_set(&ImplicitField::circle(1.0), DEFAULT_BOX, 1024).unwrap();
    let mut same = true;
    for other in [
        ImplicitField::offset(ImplicitField::circle(1.0), 0.01),
        ImplicitField::quadratic(1.1),
        ImplicitField::neural(init_weights(&[2, 64, 64, 1], 30.0, 0).unwrap()),
    ] {
        let Ok(b) = extract_zero_set(&other, DEFAULT_BOX, 512) else { continue };
        let fast = hausdorff_with(&a, &b, true, Exec::default()).unwrap();
        let slow = hausdorff_with(&a, &b, false, Exec::Sequential).unwrap();
        same &= fast == slow;
    }
    check(same, "accelerated Hausdorff == brute force", &mut f);

    let grid = BackgroundGrid::new(4).unwrap();
    let cls = classify(&grid, &ImplicitField::circle(1.0)).unwrap();
    let params = SbmParams {
        kappa: 1.0,
        gamma: DEFAULT_GAMMA,
        source: &manufactured_f,
        dirichlet: &manufactured_u,
        boundary: BoundaryData::Transferred(ClosestPointMap::UNIT_CIRCLE),
    };
    let sys = assemble(&grid, &cls, &params);
    let it = bicgstab(&sys.matrix, &sys.rhs, 1e-13, 10_000).unwrap();
    let lu = dense_lu(&sys.matrix, &sys.rhs).unwrap();
    let diff = it.x.iter().zip(&lu.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(diff <= 1e-8, "LU vs BiCGStab", &mut f);
    outcome(f, format!("flow/newton max gap {worst:.2e}; Hausdorff exact match {same}; LU vs BiCGStab {diff:.2e}"))
}

fn criterion_8_derivatives() -> Outcome {
    let mut f = Vec::new();
    let fields = [
        ImplicitField::circle(1.0),
        ImplicitField::quadratic(1.0),
        make_banded(1.0, 0.2, 0.1).unwrap(),
        ImplicitField::offset(ImplicitField::circle(1.0), 0.05),
        ImplicitField::shifted(ImplicitField::quadratic(0.8), Point2::new(0.1, -0.2)),
        ImplicitField::neural(init_weights(&[2, 64, 64, 1], 30.0, 0).unwrap()),
        ImplicitField::neural(init_weights(&[2, 16, 16, 1], 30.0, 1).unwrap()),
    ];
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_g, mut worst_h, mut pairs) = (0.0f64, 0.0f64, 0);
    while pairs < 1000 {
        let field = &fields[r.gen_range(0..fields.len())];
        let p = Point2::new(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        if p.norm() < 0.1 || p.dist(Point2::new(0.1, -0.2)) < 0.1 {
            continue;
        }
        let rep = finite_diff_check(field, p, 1e-5).expect("jet");
        worst_g = worst_g.max(rep.grad_rel_err);
        worst_h = worst_h.max(rep.hess_rel_err);
        pairs += 1;
    }
    check(worst_g <= 1e-6 && worst_h <= 1e-6, "jet vs central differences", &mut f);

    let w = init_weights(&[2, 64, 64, 1], 30.0, 0).unwrap();
    let batch: Vec<Sample> = tube_points(512, 0.3, 9)
        .into_iter()
        .map(|p| {
            let sdf = p.norm() - 1.0;
            Sample { point: p, sdf, in_band: sdf.abs() < 0.2 }
        })
        .collect();
    let (_, grad) = loss_and_grad(&w, &batch, 0.1).unwrap();
    let params = w.params();
    let mut worst_p = 0.0f64;
    for _ in 0..20 {
        let k = r.gen_range(0..params.len());
        let eval = |d: f64| {
            let mut p = params.clone();
            p[k] += d;
            let mut w2 = w.clone();
            w2.set_params(&p);
            loss_and_grad(&w2, &batch, 0.1).unwrap().0.total
        };
        let h = 1e-6;
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        worst_p = worst_p.max((fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6));
    }
    check(worst_p <= 1e-4, "parameter gradients", &mut f);
    outcome(f, format!("{pairs} pairs: grad {worst_g:.2e}, hessian {worst_h:.2e}; parameter gradient {worst_p:.2e}"))
}

fn criterion_9_certificates() -> Outcome {
    let mut f = Vec::new();
    let tube = sample_tube(&ImplicitField::circle(1.0), 0.1, 512).unwrap();
    let c = certify(&ImplicitField::circle(1.0), &tube, Thresholds::default()).unwrap();
    let q = certify(&ImplicitField::quadratic(1.0), &tube, Thresholds::default()).unwrap();
    check((c.c0_hat - 1.0).abs() <= 1e-9, "circle c0", &mut f);
    check((c.cpsi_hat * 0.9 - 1.0).abs() <= 0.02, "circle cpsi", &mut f);
    check((q.cpsi_hat - 2.0).abs() <= 1e-9, "quadratic cpsi", &mut f);
    outcome(f, format!("circle c0 {:.12}, cpsi {:.5} (1/0.9 = 1.11111); quadratic cpsi {:.12}", c.c0_hat, c.cpsi_hat, q.cpsi_hat))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("criterion_1_slope_one_propagation", criterion_1_slope),
        ("criterion_2_refinement_plateau", criterion_2_plateau),
        ("criterion_3_unperturbed_convergence", criterion_3_convergence),
        ("criterion_4_linear_patch", criterion_4_patch),
        ("criterion_5_hausdorff_bound", criterion_5_bound),
        ("criterion_6_projection", criterion_6_projection),
        ("criterion_7_oracle_equivalence", criterion_7_oracles),
        ("criterion_8_differentiation", criterion_8_derivatives),
        ("criterion_9_certificates", criterion_9_certificates),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        for (name, _) in criteria {
            println!("{name}: test");
        }
        return;
    }
    let mut failed = 0;
    let mut ran = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{status} {name} [{:.1?}]: {}", t.elapsed(), o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
