use irgn_halley::banach::*;
use irgn_halley::iteration::*;
use irgn_halley::rates::*;
use irgn_halley::subproblem::SolverOptions;

fn main() {
    let bench = ScalarQuadraticBenchmark::new(1.0);
    for method in [Method::Halley, Method::Irgnm] {
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
            solver: SolverOptions { continuation_steps: 6, max_inner_iters: 400, ..Default::default() },
            exact_data: Some(bench.exact_data()),
        };
        let out = run(&bench, &bench.exact_data(), &cfg).unwrap();
        let errs: Vec<f64> = out.records.iter().filter_map(|r| r.error_x).collect();
        println!("{method:?}: errors {errs:?}");
        let filtered: Vec<f64> = errs.iter().cloned().filter(|&e| e >= 1e-11).collect();
        println!("  order = {:?}", empirical_order(&filtered));
    }
}
