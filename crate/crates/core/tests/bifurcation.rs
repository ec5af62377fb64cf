use std::f64::consts::PI;

use sel_core::bifurcation::*;
use sel_core::radial::integrated_residual;
use sel_core::ScalarFn;

fn sf(s: &str) -> ScalarFn {
    ScalarFn::parse(s).unwrap()
}

fn singular_interval() -> LefProblem {
    let mut p = LefProblem::new(1, DomainMode::Interval);
    p.f = Some(sf("t"));
    p.g = Some(sf("t^(-1/2)"));
    p
}

#[test]
fn eigenvalues() {
    let pi2 = PI * PI;
    assert!((lambda1_ball(1, 1.0).unwrap().lambda1 - pi2 / 4.0).abs() < 1e-8);
    assert!((lambda1_interval(1.0).unwrap().lambda1 - pi2).abs() < 1e-8);
    let e = lambda1_ball(3, 1.0).unwrap();
    assert!((e.lambda1 - pi2).abs() < 1e-8);
    assert!(e.residual < 1e-8 && e.scaling_defect < 1e-8);
    assert!((lambda1_ball(2, 1.0).unwrap().lambda1 - 5.7831859629).abs() < 1e-6);
    assert!((lambda1_ball(3, 0.5).unwrap().lambda1 - 4.0 * pi2).abs() < 1e-7);
    assert!(lambda1_interval(1.0).unwrap().to_csv().contains("\nr,phi\n"));
}

#[test]
fn vanishing_region_eigenvalue() {
    assert_eq!(lambda_inf_1(3, 0.0).unwrap(), f64::INFINITY);
    assert!((lambda_inf_1(3, 0.5).unwrap() / (4.0 * PI * PI) - 1.0).abs() < 1e-9);
    assert!(lambda_inf_1(3, -1.0).is_err());
}

#[test]
fn torsion_problem() {
    let mut p = LefProblem::new(1, DomainMode::Interval);
    p.mu = 1.0;
    let out = solve_lef(&p, &LefOptions::default()).unwrap();
    assert_eq!(out.status, LefStatus::Solved);
    // −u'' = 1 on (0, 1): u = x(1−x)/2.
    assert!((out.center.unwrap() - 0.125).abs() < 1e-9);
    let sol = out.solution.unwrap();
    for (x, u) in sol.r.iter().zip(&sol.u) {
        assert!((u - x * (1.0 - x) / 2.0).abs() < 1e-9);
    }
}

#[test]
fn singular_problem_has_linear_boundary_behaviour() {
    let mut p = singular_interval();
    p.f = None;
    let out = solve_lef(&p, &LefOptions::default()).unwrap();
    assert_eq!(out.status, LefStatus::Solved);
    let (c1, c2) = (out.c1.unwrap(), out.c2.unwrap());
    assert!(c1 > 0.0 && c2 < f64::INFINITY && c1 <= c2);
    let sol = out.solution.unwrap();
    for (x, u) in sol.r.iter().zip(&sol.u) {
        let d = x.min(1.0 - x);
        if d > 0.0 && d < 0.2 {
            assert!(c1 * d <= u * (1.0 + 1e-12) && *u <= c2 * d * (1.0 + 1e-12));
        }
    }
    // Regularized centres decrease as the boundary value 1/k does.
    assert!(out.regularized.windows(2).all(|w| w[1].1 < w[0].1));
}

#[test]
fn past_the_threshold_there_is_no_solution() {
    let mut p = singular_interval();
    p.lambda = 1.1 * PI * PI;
    let out = solve_lef(&p, &LefOptions::default()).unwrap();
    assert_eq!(out.status, LefStatus::NoSolution);
    assert!(out.solution.is_none());
}

#[test]
fn sweep_brackets_the_threshold() {
    let pi2 = PI * PI;
    let grid: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 1.05, 1.2].iter().map(|x| x * pi2).collect();
    let d = sweep(&singular_interval(), &grid, &LefOptions::default()).unwrap();
    let (lo, hi) = d.lambda_star_bracket;
    assert!((lo.unwrap() / pi2 - 0.95).abs() < 1e-12);
    assert!((hi.unwrap() / pi2 - 1.05).abs() < 1e-12);
    assert!(d.monotone);
    assert!((d.lambda_star_theory.unwrap() / pi2 - 1.0).abs() < 1e-8);
    assert!(d.points[7].status == SweepStatus::NoSolution);
    assert!(d.to_csv().starts_with("lambda,status,sup_norm,center_value\n"));
    assert!(sweep(&singular_interval(), &[2.0, 1.0], &LefOptions::default()).is_err());
}

#[test]
fn gelfand_substitution_round_trip_and_residual() {
    let g = sf("exp(-t)");
    let opts = LefOptions { grid: 1000, ..LefOptions::default() };
    let rhs = |_r: f64, v: f64, _dv: f64| gelfand_reduced(&g, 0.5, 1.0, v);
    let out = solve_dirichlet_radial(&rhs, 1, DomainMode::Interval, 1.0, &opts).unwrap();
    let v = out.solution.unwrap();
    let u = gelfand_transform(&v, 0.5, GelfandDirection::Back).unwrap();
    // −u'' = e^{−u} + ½u'² + 1, written as u'' = G.
    let orig = |_r: f64, u: f64, du: f64| Ok(-((-u).exp() + 0.5 * du * du + 1.0));
    assert!(integrated_residual(&u, &orig).unwrap() < 1e-8);
    let back = gelfand_transform(&gelfand_transform(&u, 0.5, GelfandDirection::Forward).unwrap(), 0.5, GelfandDirection::Back)
        .unwrap();
    let err = back.u.iter().zip(&u.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-14);
    assert!(gelfand_transform(&u, 0.0, GelfandDirection::Forward).is_err());
}

#[test]
fn gelfand_criterion_small_grid() {
    let lams = [0.5, 2.0];
    let mus = [2.0, 10.0];
    let pts = gelfand_scan(&sf("exp(-t)"), 0.0, &lams, &mus, 1, DomainMode::Interval, 1.0, &LefOptions::default()).unwrap();
    assert_eq!(pts.len(), 4);
    for p in pts {
        assert_eq!(p.predicted, p.lambda * p.mu < PI * PI);
        if p.margin.abs() > 0.05 {
            assert_eq!(p.predicted, p.solved, "{p:?}");
        }
    }
    assert!(gelfand_solvable(1.0, 1.0, 0.0, 2.0));
    assert!(!gelfand_solvable(1.0, 2.0, 0.0, 2.0));
}

#[test]
fn young_constant_checks() {
    let y = young_constant(0.0, 1.5, PI * PI).unwrap();
    assert_eq!(y.c, 1.0);
    assert!(y.inq_holds && y.inq_swapped_excess <= 0.0);
    let y = young_constant(3.0, 1.5, 2.0).unwrap();
    assert!(y.lhs < 1.0 && y.c < 1.0);
    assert!(y.inq_swapped_excess <= 0.0);
    assert!(young_constant(0.0, 2.5, 1.0).is_err());
    assert!(young_constant(0.0, 1.5, -1.0).is_err());
}

#[test]
fn invalid_problems_are_rejected() {
    let mut p = singular_interval();
    p.dim = 3;
    assert!(solve_lef(&p, &LefOptions::default()).is_err());
    let mut p = singular_interval();
    p.grad_p = 3.0;
    p.grad_coef = 1.0;
    assert!(solve_lef(&p, &LefOptions::default()).is_err());
}
