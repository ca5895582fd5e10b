//! Acceptance suite: every exit criterion of the library, one test per
//! criterion, each printing a `[PASS]` line with the measured quantities.
//! Tolerances are pinned here, not tuned at runtime.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use irgn_halley::banach::{
    bregman_shifted, coercivity_margin, duality_map, lp_norm, lp_pow, ExponentConfig,
    GridFunction, Space,
};
use irgn_halley::certificates::{
    c_sigma, mu_recursion, recursion_certificate, recursion_thresholds, RecursionParams,
};
use irgn_halley::elliptic::{
    coscos_coefficient, derivative_map, second_directional_map, EllipticModel, Observation,
    PdeProblem, PotentialLaw,
};
use irgn_halley::iteration::{
    run, stopping_index_req1, ForwardModel, Method, RunConfig, Schedule, StageTwoReference,
};
use irgn_halley::linop::{compose_halley_operator, dot_product_test, LinearMap};
use irgn_halley::noise::{NoiseKind, NoiseSpec};
use irgn_halley::rates::{
    build_source_exact_benchmark, compare_misfit_norms, delta_sweep, empirical_order,
    ComparisonSetup, RunTemplate, ScalarQuadraticBenchmark,
};
use irgn_halley::subproblem::{
    solve, solve_oracle_quadratic, SolverOptions, SubproblemSpec,
};

fn pde_problem(n: usize) -> PdeProblem {
    PdeProblem::new(n, 4000.0, 10.0, PotentialLaw::new(5.0).unwrap(), Observation::FullInterior)
        .unwrap()
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

// Criterion 1: fitted log-log slope of final error vs noise level on the
// source-exact diagonal benchmark, p = r = 2, within [0.4, 0.6]; runtime
// under one minute at 32 nodes.
#[test]
fn criterion_1_rate_reproduction_diagonal_linear() {
    let started = Instant::now();
    let bench = build_source_exact_benchmark(32, 2.0, 0.7, 0.1).unwrap();
    let template = RunTemplate {
        method: Method::Halley,
        exponents: ExponentConfig::theorem(2.0, 2.0).unwrap(),
        schedule: Schedule::geometric(1.0, 2.0, 1.0).unwrap(),
        tau: 1.5,
        x0: bench.x0().clone(),
        max_iters: 60,
        solver: SolverOptions::default(),
        stage_two_reference: StageTwoReference::InitialGuess,
    };
    let deltas = [1e-2, 1e-3, 1e-4, 1e-5];
    let study = delta_sweep(
        &bench,
        bench.truth(),
        &bench.exact_data(),
        &template,
        &deltas,
        2024,
        4,
    )
    .unwrap();
    let elapsed = started.elapsed();
    assert!(
        (0.4..=0.6).contains(&study.fit.slope),
        "criterion 1: slope {} outside [0.4, 0.6]",
        study.fit.slope
    );
    assert!(elapsed.as_secs_f64() < 60.0, "criterion 1: took {elapsed:?}");
    println!(
        "[PASS] criterion 1: rate slope {:.4} in [0.4, 0.6] (expected {}), {:.2}s",
        study.fit.slope,
        study.expected_slope,
        elapsed.as_secs_f64()
    );
}

// Criterion 2: Taylor remainder slopes 2 +- 0.2 and 3 +- 0.3 at n = 31 and
// adjoint dot-product discrepancy <= 1e-10 for the derivative and the
// corrected second-stage operator.
#[test]
fn criterion_2_derivative_correctness() {
    let n = 31;
    let problem = pde_problem(n);
    let c = coscos_coefficient(n, 0.1);
    let state = problem.assemble_and_factor(&c).unwrap();
    let space = problem.domain_space();
    let dir = GridFunction::from_fn(space, |x, y| {
        (2.0 * std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin() + 0.3
    });
    let v1 = state.solve_first(&dir);
    let v2 = state.solve_second(&dir, &dir, &v1, &v1);

    let ts = [1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3];
    let mut first_pts = Vec::new();
    let mut second_pts = Vec::new();
    for &t in &ts {
        let shifted = problem.assemble_and_factor(&c.axpy(t, &dir)).unwrap();
        let rem1 = shifted.state().sub(state.state()).axpy(-t, &v1);
        first_pts.push((t.ln(), lp_norm(&rem1, 2.0).ln()));
        if t >= 1e-2 {
            let rem2 = rem1.axpy(-0.5 * t * t, &v2);
            second_pts.push((t.ln(), lp_norm(&rem2, 2.0).ln()));
        }
    }
    let s1 = fit_slope(&first_pts);
    let s2 = fit_slope(&second_pts);
    assert!((s1 - 2.0).abs() <= 0.2, "criterion 2: first-order slope {s1}");
    assert!((s2 - 3.0).abs() <= 0.3, "criterion 2: second-order slope {s2}");

    let t_map = derivative_map(&state, problem.observation());
    let worst_t = dot_product_test(&t_map, 100, 11);
    let b_map = second_directional_map(&state, &dir, problem.observation());
    let s_map = compose_halley_operator(&t_map, &b_map);
    let worst_s = dot_product_test(&s_map, 100, 13);
    assert!(worst_t <= 1e-10, "criterion 2: derivative adjoint discrepancy {worst_t}");
    assert!(worst_s <= 1e-10, "criterion 2: corrected-operator adjoint discrepancy {worst_s}");
    println!(
        "[PASS] criterion 2: Taylor slopes {s1:.3}/{s2:.3}, adjoint discrepancies \
         {worst_t:.2e}/{worst_s:.2e}"
    );
}

// Criterion 3: iterative subproblem solve matches the normal-equations
// oracle to relative 1e-8 on 20 random instances up to 32 nodes.
#[test]
fn criterion_3_subproblem_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(314159);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let n = rng.gen_range(2..=32usize);
        let space = Space::flat(n, 1.0);
        let diag = GridFunction::new(space, (0..n).map(|_| rng.gen_range(0.1..2.0)).collect());
        let op = LinearMap::diagonal(diag);
        let draw =
            |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let xk = GridFunction::new(space, draw(&mut rng));
        let rk = GridFunction::new(space, draw(&mut rng));
        let xref = GridFunction::new(space, draw(&mut rng));
        let kappa = rng.gen_range(0.01..1.0);
        let spec = SubproblemSpec {
            operator: &op,
            linearization_point: &xk,
            residual: &rk,
            reference: &xref,
            kappa,
            exponents: ExponentConfig::theorem(2.0, 2.0).unwrap(),
        };
        let opts = SolverOptions {
            grad_tol: Some(1e-12 * (lp_norm(&rk, 2.0) + kappa)),
            ..Default::default()
        };
        let (x, _) = solve(&spec, &opts, None).unwrap();
        let oracle = solve_oracle_quadratic(&spec).unwrap();
        let rel = lp_norm(&x.sub(&oracle), 2.0) / lp_norm(&oracle, 2.0).max(1e-300);
        worst = worst.max(rel);
        assert!(rel <= 1e-8, "criterion 3: trial {trial} relative gap {rel}");
    }
    println!("[PASS] criterion 3: 20 oracle comparisons, worst relative gap {worst:.2e}");
}

// Criterion 4: recursion certificate with zero failures over 1000 seeded
// admissible parameter sets, the series spot value, and the worked instance.
#[test]
fn criterion_4_recursion_certificate() {
    let c3 = c_sigma(3.0, 1e-10).unwrap().value;
    assert!((c3 - 1.253_906_26).abs() <= 1e-6, "criterion 4: C(3) = {c3}");

    let worked = RecursionParams {
        c_hat: 1.0,
        sigma: 3.0,
        p: 1.0,
        delta: 0.0,
        mu0: 0.5 / 2f64.sqrt(),
        mu_bar: 1.0,
    };
    let mu = mu_recursion(&worked, 3).unwrap();
    assert!((mu[1] - 0.0442).abs() <= 5e-5 && mu[1] <= 0.125, "criterion 4: mu1 = {}", mu[1]);
    assert!((mu[2] - 8.63e-5).abs() <= 5e-8 && mu[2] <= 1.95e-3, "criterion 4: mu2 = {}", mu[2]);
    assert!(recursion_certificate(&worked, 6).unwrap().pass);

    let mut rng = ChaCha8Rng::seed_from_u64(777);
    let mut failures = 0usize;
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let sigma = rng.gen_range(1.0001..=4.0);
        let p = rng.gen_range(1.0..2.0);
        let c_hat = rng.gen_range(0.5..=10.0);
        let mu_bar = rng.gen_range(0.05..=1.0);
        let th = recursion_thresholds(c_hat, sigma, p, mu_bar);
        let params = RecursionParams {
            c_hat,
            sigma,
            p,
            delta: rng.gen_range(0.0..=th.delta_max),
            mu0: rng.gen_range(0.0..=th.mu0_max),
            mu_bar,
        };
        let cert = recursion_certificate(&params, 10).unwrap();
        worst = worst.min(cert.worst_margin);
        if !cert.pass {
            failures += 1;
        }
    }
    assert_eq!(failures, 0, "criterion 4: {failures} certificate failures");
    println!(
        "[PASS] criterion 4: C(3) = {c3:.8}, worked instance mu1 = {:.4e}, mu2 = {:.4e}, \
         1000 admissible samples with zero failures (worst margin {worst:.2e})",
        mu[1], mu[2]
    );
}

// Criterion 5: two-stage stopping index never exceeds the first-order one
// across the (p, delta) grid; exact values at p = 1, delta = 2^-27.
#[test]
fn criterion_5_stopping_index_inequality() {
    for &p in &[1.0, 1.25, 1.5, 1.75] {
        for k in 3..=30 {
            let delta = 2f64.powi(-k);
            let h = stopping_index_req1(p, delta, Method::Halley).unwrap();
            let g = stopping_index_req1(p, delta, Method::Irgnm).unwrap();
            assert!(h <= g, "criterion 5: p = {p}, delta = 2^-{k}: {h} > {g}");
        }
    }
    let delta = 2f64.powi(-27);
    let h = stopping_index_req1(1.0, delta, Method::Halley).unwrap();
    let g = stopping_index_req1(1.0, delta, Method::Irgnm).unwrap();
    assert_eq!((h, g), (3, 5), "criterion 5: exact indices ({h}, {g})");
    println!(
        "[PASS] criterion 5: two-stage index <= first-order index on the full grid; \
         p = 1, delta = 2^-27 gives ({h}, {g})"
    );
}

// Criterion 6: recursion orders match sigma within 2% after 4 steps for
// sigma = 2 and 3; on the scalar quadratic model with exact data the
// two-stage empirical order exceeds the first-order one.
#[test]
fn criterion_6_empirical_orders() {
    for &sigma in &[2.0, 3.0] {
        let mu = mu_recursion(
            &RecursionParams {
                c_hat: 1.0,
                sigma,
                p: 1.0,
                delta: 0.0,
                mu0: 0.35,
                mu_bar: 1.0,
            },
            4,
        )
        .unwrap();
        let order = empirical_order(&mu).unwrap();
        assert!(
            (order - sigma).abs() <= 0.02 * sigma,
            "criterion 6: recursion order {order} vs sigma {sigma}"
        );
    }

    let bench = ScalarQuadraticBenchmark::new(1.0);
    let order_of = |method: Method| -> f64 {
        let cfg = RunConfig {
            method,
            exponents: ExponentConfig::theorem(1.0, 1.0).unwrap(),
            schedule: Schedule::constant(0.05, 0.05).unwrap(),
            tau: 1.5,
            x0: GridFunction::toy(&[0.35]),
            truth: Some(bench.truth().clone()),
            delta: 0.0,
            max_iters: 6,
            stage_two_reference: StageTwoReference::InitialGuess,
            solver: SolverOptions {
                continuation_steps: 6,
                max_inner_iters: 400,
                ..Default::default()
            },
            exact_data: Some(bench.exact_data()),
        };
        let out = run(&bench, &bench.exact_data(), &cfg).unwrap();
        // Solver tolerances floor the errors near 1e-10; the order estimate
        // uses the decade-spanning terms above that floor.
        let errors: Vec<f64> = out
            .records
            .iter()
            .filter_map(|r| r.error_x)
            .filter(|&e| e >= 1e-9)
            .collect();
        empirical_order(&errors).expect("order estimate")
    };
    let halley = order_of(Method::Halley);
    let irgnm = order_of(Method::Irgnm);
    assert!(
        halley > irgnm,
        "criterion 6: two-stage order {halley} not above first-order {irgnm}"
    );
    println!(
        "[PASS] criterion 6: recursion orders within 2%; scalar model orders \
         {halley:.2} (two-stage) > {irgnm:.2} (first-order)"
    );
}

// Criterion 7: with 5% impulsive noise on the bump problem at n = 31 the
// L^1.1 misfit reconstructs strictly better in L^2 than the L^2 misfit.
#[test]
fn criterion_7_impulsive_noise_comparison() {
    let setup = ComparisonSetup {
        n: 31,
        xi: 0.1,
        c_bar: 5.0,
        f_const: 4000.0,
        g_const: 10.0,
        misfit_exponents: vec![1.1, 2.0],
        schedule: Schedule::geometric(1000.0, 2.0, 1.0).unwrap(),
        tau: 1.5,
        max_iters: 25,
        solver: SolverOptions::default(),
    };
    let noise = NoiseSpec { kind: NoiseKind::Impulsive { fraction: 0.05 }, seed: 42 };
    let report = compare_misfit_norms(&setup, &noise).unwrap();
    assert!(!report.flagged, "criterion 7: a comparison arm diverged");
    let e11 = report.arms[0].final_error_l2.unwrap();
    let e2 = report.arms[1].final_error_l2.unwrap();
    assert!(
        e11 < e2,
        "criterion 7: error(L^1.1) = {e11} not below error(L^2) = {e2}"
    );
    println!(
        "[PASS] criterion 7: impulsive noise, error(r=1.1) = {e11:.4e} < error(r=2) = {e2:.4e} \
         (ratio {:.3}, stops {:?}/{:?})",
        e11 / e2,
        report.arms[0].k_star,
        report.arms[1].k_star
    );
}

// Criterion 8: manufactured-solution max-norm slope 2 +- 0.1 over
// n in {15, 31, 63}, and one factorization per visited iterate in an
// inversion run.
#[test]
fn criterion_8_discretization_and_factorization_reuse() {
    let mut pts = Vec::new();
    for &n in &[15usize, 31, 63] {
        let space = Space::grid(n);
        let f = GridFunction::from_fn(space, |x, y| {
            2.0 * std::f64::consts::PI.powi(2)
                * (std::f64::consts::PI * x).sin()
                * (std::f64::consts::PI * y).sin()
        });
        let problem = PdeProblem::with_source(
            n,
            f,
            0.0,
            PotentialLaw::new(5.0).unwrap(),
            Observation::FullInterior,
        )
        .unwrap();
        let state = problem.assemble_and_factor(&GridFunction::zeros(space)).unwrap();
        let exact = GridFunction::from_fn(space, |x, y| {
            (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
        });
        pts.push((space.mesh_width().ln(), state.state().sub(&exact).max_abs().ln()));
    }
    let slope = fit_slope(&pts);
    assert!((slope - 2.0).abs() <= 0.1, "criterion 8: max-norm slope {slope}");

    // Factorization-reuse invariant on a short noisy inversion.
    let n = 15;
    let problem = pde_problem(n);
    let model = EllipticModel::new(problem);
    let truth = coscos_coefficient(n, 0.1);
    let exact = model.observe(&truth).unwrap();
    let perturbed = irgn_halley::noise::perturb(
        &exact,
        &NoiseSpec { kind: NoiseKind::Impulsive { fraction: 0.05 }, seed: 9 },
        &[2.0],
    )
    .unwrap();
    let cfg = RunConfig {
        method: Method::Halley,
        exponents: ExponentConfig::theorem(2.0, 2.0).unwrap(),
        schedule: Schedule::geometric(1000.0, 2.0, 1.0).unwrap(),
        tau: 1.5,
        x0: GridFunction::constant(model.domain(), 1.0),
        truth: Some(truth.clone()),
        delta: perturbed.delta_by_norm[0].1,
        max_iters: 25,
        stage_two_reference: StageTwoReference::InitialGuess,
        solver: SolverOptions::default(),
        exact_data: Some(exact.clone()),
    };
    let out = run(&model, &perturbed.y_delta, &cfg).unwrap();
    assert_eq!(
        out.assemblies,
        Some(out.records.len()),
        "criterion 8: assemblies vs visited iterates"
    );
    println!(
        "[PASS] criterion 8: max-norm slope {slope:.3}; {} assemblies for {} iterates",
        out.assemblies.unwrap(),
        out.records.len()
    );
}

// Criterion 9: duality pairing identity, Bregman nonnegativity and the
// exact p = 2 coercivity constant.
#[test]
fn criterion_9_banach_primitives() {
    let mut rng = ChaCha8Rng::seed_from_u64(271828);
    let mut worst_pairing = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=64usize);
        let weight = rng.gen_range(0.01..4.0);
        let space = Space::flat(n, weight);
        let v = GridFunction::new(space, (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect());
        let p = rng.gen_range(1.0..=2.0);
        let lhs = duality_map(&v, p).pairing(&v);
        let rhs = lp_pow(&v, p);
        let rel = (lhs - rhs).abs() / rhs.max(1e-300);
        worst_pairing = worst_pairing.max(rel);
        assert!(rel <= 1e-12, "criterion 9: pairing identity off by {rel}");
    }

    let mut min_margin = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=32usize);
        let space = Space::flat(n, 1.0);
        let draw = |rng: &mut ChaCha8Rng| -> GridFunction {
            GridFunction::new(space, (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
        };
        let (xt, x, x0) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let p = rng.gen_range(1.0..=2.0);
        assert!(bregman_shifted(&xt, &x, &x0, p) >= 0.0, "criterion 9: negative Bregman value");
        let margin = coercivity_margin(&xt, &x, &x0, 2.0);
        if margin.is_finite() {
            min_margin = min_margin.min(margin);
            assert!(
                (margin - 0.5).abs() <= 1e-12,
                "criterion 9: p = 2 coercivity margin {margin}"
            );
        }
    }
    println!(
        "[PASS] criterion 9: pairing identity worst {worst_pairing:.2e}, Bregman nonnegative, \
         p = 2 margin {min_margin:.15}"
    );
}
