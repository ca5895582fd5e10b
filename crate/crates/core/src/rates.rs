//! Rate-study harness: benchmark problems with exactly verifiable source
//! smoothness, noise-level sweeps with log-log slope fits against the
//! predicted `O(delta^{1/p})`, empirical convergence orders for exact data,
//! and the impulsive-noise misfit-norm comparison on the PDE testbed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::banach::{duality_map, duality_map_inverse, lp_norm, ExponentConfig, GridFunction, Space};
use crate::elliptic::{coscos_coefficient, EllipticModel, Observation, PdeProblem, PotentialLaw};
use crate::iteration::{
    run, ForwardModel, IterationRecord, Linearization, Method, RunConfig, RunError, Schedule,
    StageTwoReference,
};
use crate::linop::LinearMap;
use crate::noise::{perturb, NoiseSpec};
use crate::subproblem::{cg_weighted, SolverOptions};
use crate::{Error, Result};

/// Diagonal linear operator with geometrically decaying spectrum and a truth
/// constructed so the source smoothness assumption holds exactly:
/// `x_truth - x0 = J_p^{-1}(T* v)` for a stored `v` of prescribed norm.
pub struct DiagonalLinearBenchmark {
    space: Space,
    spectrum: GridFunction,
    source_element: GridFunction,
    x0: GridFunction,
    truth: GridFunction,
    p: f64,
}

impl DiagonalLinearBenchmark {
    pub fn truth(&self) -> &GridFunction {
        &self.truth
    }

    pub fn x0(&self) -> &GridFunction {
        &self.x0
    }

    pub fn source_element(&self) -> &GridFunction {
        &self.source_element
    }

    pub fn operator(&self) -> LinearMap {
        LinearMap::diagonal(self.spectrum.clone())
    }

    /// Exact data `y = T x_truth`.
    pub fn exact_data(&self) -> GridFunction {
        self.spectrum.hadamard(&self.truth)
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl ForwardModel for DiagonalLinearBenchmark {
    fn domain(&self) -> Space {
        self.space
    }

    fn range(&self) -> Space {
        self.space
    }

    fn linearize(&self, x: &GridFunction) -> Result<Linearization> {
        Ok(Linearization {
            value: self.spectrum.hadamard(x),
            derivative: LinearMap::diagonal(self.spectrum.clone()),
            second: None,
        })
    }
}

/// Build the diagonal benchmark: spectrum `t_i = decay^i`, source element
/// with all modes active and `||v||_2 = v_norm`, and the truth recovered by
/// inverting the duality map (hence `p > 1`).
pub fn build_source_exact_benchmark(
    n: usize,
    p: f64,
    spectrum_decay: f64,
    v_norm: f64,
) -> Result<DiagonalLinearBenchmark> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "the benchmark needs p in (1, 2] (the duality map inverts pointwise), got {p}"
        )));
    }
    if !(0.0 < spectrum_decay && spectrum_decay < 1.0) || !(v_norm > 0.0) || n == 0 {
        return Err(Error::InvalidArgument(
            "need n >= 1, decay in (0, 1) and a positive source norm".into(),
        ));
    }
    let space = Space::flat(n, 1.0);
    let spectrum =
        GridFunction::new(space, (0..n).map(|i| spectrum_decay.powi(i as i32)).collect());
    let v = GridFunction::constant(space, v_norm / (n as f64).sqrt());
    let x0 = GridFunction::zeros(space);
    // T* v = T v for the self-adjoint diagonal map.
    let shift = duality_map_inverse(&spectrum.hadamard(&v), p)?;
    let truth = x0.add(&shift);
    Ok(DiagonalLinearBenchmark { space, spectrum, source_element: v, x0, truth, p })
}

/// One-node quadratic model `F(x) = x + (curvature/2) x^2` with root truth;
/// the minimal nonlinear problem with a nonvanishing second derivative.
pub struct ScalarQuadraticBenchmark {
    space: Space,
    curvature: f64,
    truth: GridFunction,
}

impl ScalarQuadraticBenchmark {
    pub fn new(curvature: f64) -> ScalarQuadraticBenchmark {
        let space = Space::flat(1, 1.0);
        ScalarQuadraticBenchmark { space, curvature, truth: GridFunction::zeros(space) }
    }

    pub fn truth(&self) -> &GridFunction {
        &self.truth
    }

    /// `y = F(truth) = 0`.
    pub fn exact_data(&self) -> GridFunction {
        GridFunction::zeros(self.space)
    }
}

impl ForwardModel for ScalarQuadraticBenchmark {
    fn domain(&self) -> Space {
        self.space
    }

    fn range(&self) -> Space {
        self.space
    }

    fn linearize(&self, x: &GridFunction) -> Result<Linearization> {
        let a = self.curvature;
        let value = x.map(|t| t + 0.5 * a * t * t);
        let derivative = LinearMap::diagonal(x.map(|t| 1.0 + a * t));
        let second = Box::new(move |fixed: &GridFunction| {
            LinearMap::diagonal(fixed.scale(a))
        });
        Ok(Linearization { value, derivative, second: Some(second) })
    }
}

/// Ordinary least squares of `log error` against `log delta`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// Points dropped because their error vanished (exact recovery).
    pub excluded: usize,
}

pub fn fit_rate(deltas: &[f64], errors: &[f64]) -> Result<RateFit> {
    assert_eq!(deltas.len(), errors.len());
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&d, &e)| (d.ln(), e.ln()))
        .collect();
    let excluded = deltas.len() - pts.len();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(
            "a rate fit needs at least two positive-error points".into(),
        ));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residual = (pts
        .iter()
        .map(|&(x, y)| {
            let d = y - (slope * x + intercept);
            d * d
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit { slope, intercept, residual, excluded })
}

/// Q-order estimate of a superlinearly convergent error sequence: the median
/// of `log e_{k+1} / log e_k` over the longest strictly decreasing suffix of
/// values in `(0, 1)`. Returns `None` (no order) when fewer than three such
/// terms exist.
pub fn empirical_order(errors: &[f64]) -> Option<f64> {
    let mut tail: Vec<f64> = Vec::new();
    for &e in errors {
        if !(e > 0.0 && e < 1.0) {
            tail.clear();
            continue;
        }
        if let Some(&last) = tail.last() {
            if e >= last {
                tail.clear();
            }
        }
        tail.push(e);
    }
    if tail.len() < 3 {
        return None;
    }
    let mut ratios: Vec<f64> =
        tail.windows(2).map(|w| w[1].ln() / w[0].ln()).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = ratios.len();
    Some(if m % 2 == 1 { ratios[m / 2] } else { 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]) })
}

/// Run template a sweep instantiates per noise level.
pub struct RunTemplate {
    pub method: Method,
    pub exponents: ExponentConfig,
    pub schedule: Schedule,
    pub tau: f64,
    pub x0: GridFunction,
    pub max_iters: usize,
    pub solver: SolverOptions,
    pub stage_two_reference: StageTwoReference,
}

impl RunTemplate {
    pub fn instantiate(
        &self,
        truth: Option<GridFunction>,
        delta: f64,
        exact_data: Option<GridFunction>,
    ) -> RunConfig {
        RunConfig {
            method: self.method,
            exponents: self.exponents,
            schedule: self.schedule.clone(),
            tau: self.tau,
            x0: self.x0.clone(),
            truth,
            delta,
            max_iters: self.max_iters,
            stage_two_reference: self.stage_two_reference,
            solver: self.solver.clone(),
            exact_data,
        }
    }
}

/// One noise level of a sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatePoint {
    pub delta: f64,
    pub k_star: Option<usize>,
    pub error: f64,
}

/// A completed delta sweep with its log-log fit.
#[derive(Clone, Debug, Serialize)]
pub struct RateStudy {
    pub points: Vec<RatePoint>,
    pub expected_slope: f64,
    pub fit: RateFit,
}

/// Sweep strictly decreasing noise levels on a benchmark with known truth
/// and exact data. Each level perturbs the data along a seeded random
/// direction normalized in the run's misfit norm, runs the iteration to its
/// a-priori stop, and records the final solution-space error; levels execute
/// concurrently up to `workers`.
pub fn delta_sweep<M: ForwardModel + Sync>(
    model: &M,
    truth: &GridFunction,
    exact_data: &GridFunction,
    template: &RunTemplate,
    deltas: &[f64],
    seed: u64,
    workers: usize,
) -> Result<RateStudy> {
    if deltas.len() < 4 {
        return Err(Error::InvalidArgument("a sweep needs at least four noise levels".into()));
    }
    if !deltas.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("noise levels must be strictly decreasing".into()));
    }
    let (p, r) = (template.exponents.p(), template.exponents.r());
    let results = run_concurrently(deltas.len(), workers.max(1), |i| {
        let delta = deltas[i];
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let direction = GridFunction::new(
            exact_data.space(),
            (0..exact_data.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let unit = direction.scale(1.0 / lp_norm(&direction, r));
        let data = exact_data.axpy(delta, &unit);
        let measured = lp_norm(&data.sub(exact_data), r);
        let cfg =
            template.instantiate(Some(truth.clone()), measured, Some(exact_data.clone()));
        match run(model, &data, &cfg) {
            Ok(out) => {
                let err = lp_norm(&out.final_iterate.sub(truth), p);
                Ok(RatePoint { delta: measured, k_star: out.k_star, error: err })
            }
            Err(e) => Err(Error::Numerical(format!("sweep level {delta:.3e} failed: {e}"))),
        }
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    let fit = fit_rate(
        &points.iter().map(|p| p.delta).collect::<Vec<_>>(),
        &points.iter().map(|p| p.error).collect::<Vec<_>>(),
    )?;
    Ok(RateStudy { points, expected_slope: 1.0 / p, fit })
}

/// Run `count` independent jobs on up to `workers` threads, preserving
/// output order.
pub(crate) fn run_concurrently<T: Send>(
    count: usize,
    workers: usize,
    job: impl Fn(usize) -> T + Sync,
) -> Vec<T> {
    use std::sync::Mutex;
    let mut out: Vec<Option<T>> = (0..count).map(|_| None).collect();
    if count == 0 {
        return Vec::new();
    }
    let next = Mutex::new(0usize);
    let slots = Mutex::new(&mut out);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(count) {
            scope.spawn(|| loop {
                let i = {
                    let mut guard = next.lock().unwrap();
                    if *guard >= count {
                        break;
                    }
                    let i = *guard;
                    *guard += 1;
                    i
                };
                let value = job(i);
                slots.lock().unwrap()[i] = Some(value);
            });
        }
    });
    out.into_iter().map(|v| v.expect("job completed")).collect()
}

/// Residual diagnostic of the source smoothness assumption: least-squares
/// solve of `T* v ≈ J_p(x_truth - x0)`, returning the minimizer and the
/// relative residual. A residual of order one simply reports that the
/// assumption fails for the given setup.
pub fn source_condition_residual(
    operator: &LinearMap,
    x_truth: &GridFunction,
    x0: &GridFunction,
    p: f64,
) -> (GridFunction, f64) {
    let xi = duality_map(&x_truth.sub(x0), p);
    let xi_norm = lp_norm(&xi, 2.0);
    if xi_norm == 0.0 {
        return (GridFunction::zeros(operator.range()), 0.0);
    }
    // Normal equations of min_v ||T* v - xi||: T T* v = T xi.
    let rhs = operator.apply(&xi);
    let apply = |v: &GridFunction| operator.apply(&operator.adjoint_apply(v));
    let cap = 20 * operator.range_dim() + 100;
    let (v_hat, _, _) = cg_weighted(apply, &rhs, 1e-14 * lp_norm(&rhs, 2.0), cap);
    let residual = lp_norm(&operator.adjoint_apply(&v_hat).sub(&xi), 2.0) / xi_norm;
    (v_hat, residual)
}

/// One arm of the misfit-norm comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonArm {
    pub r: f64,
    pub delta: f64,
    pub k_star: Option<usize>,
    /// `||c - c_truth||_2` at the stop, when the run completed.
    pub final_error_l2: Option<f64>,
    pub diverged: bool,
    #[serde(skip)]
    pub records: Vec<IterationRecord>,
}

/// Paired-run report of the impulsive-noise comparison.
#[derive(Clone, Debug, Serialize)]
pub struct MisfitComparison {
    pub arms: Vec<ComparisonArm>,
    /// `error(r = first) / error(r = second)` when both completed.
    pub ratio: Option<f64>,
    /// Set when either arm tripped the divergence guard.
    pub flagged: bool,
}

/// Configuration of the misfit-norm comparison experiment.
pub struct ComparisonSetup {
    pub n: usize,
    pub xi: f64,
    pub c_bar: f64,
    pub f_const: f64,
    pub g_const: f64,
    pub misfit_exponents: Vec<f64>,
    pub schedule: Schedule,
    pub tau: f64,
    pub max_iters: usize,
    pub solver: SolverOptions,
}

/// Identify the bump coefficient from impulsively perturbed observations
/// once per misfit exponent (matched schedules, shared data realization) and
/// compare the final L^2 reconstruction errors.
pub fn compare_misfit_norms(
    setup: &ComparisonSetup,
    noise: &NoiseSpec,
) -> Result<MisfitComparison> {
    let law = PotentialLaw::new(setup.c_bar)?;
    let problem =
        PdeProblem::new(setup.n, setup.f_const, setup.g_const, law, Observation::FullInterior)?;
    let model = EllipticModel::new(problem);
    let truth = coscos_coefficient(setup.n, setup.xi);
    let exact = model.observe(&truth)?;
    let perturbed = perturb(&exact, noise, &setup.misfit_exponents)?;
    let x0 = GridFunction::constant(model.domain(), 1.0);

    let mut arms = Vec::new();
    let mut flagged = false;
    for &(r, delta) in &perturbed.delta_by_norm {
        let template = RunTemplate {
            method: Method::Halley,
            exponents: ExponentConfig::theorem(2.0, r)?,
            schedule: setup.schedule.clone(),
            tau: setup.tau,
            x0: x0.clone(),
            max_iters: setup.max_iters,
            solver: setup.solver.clone(),
            stage_two_reference: StageTwoReference::InitialGuess,
        };
        let cfg = template.instantiate(Some(truth.clone()), delta, Some(exact.clone()));
        match run(&model, &perturbed.y_delta, &cfg) {
            Ok(out) => arms.push(ComparisonArm {
                r,
                delta,
                k_star: out.k_star,
                final_error_l2: Some(lp_norm(&out.final_iterate.sub(&truth), 2.0)),
                diverged: false,
                records: out.records,
            }),
            Err(RunError::Diverged { output, .. }) => {
                flagged = true;
                arms.push(ComparisonArm {
                    r,
                    delta,
                    k_star: None,
                    final_error_l2: None,
                    diverged: true,
                    records: output.records,
                });
            }
            Err(e) => return Err(Error::Numerical(format!("comparison run r = {r} failed: {e}"))),
        }
    }
    let ratio = match (&arms[..], arms.iter().all(|a| a.final_error_l2.is_some())) {
        ([first, second, ..], true) => {
            Some(first.final_error_l2.unwrap() / second.final_error_l2.unwrap())
        }
        _ => None,
    };
    Ok(MisfitComparison { arms, ratio, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn benchmark_satisfies_source_identity() {
        for &p in &[2.0, 1.5, 1.2] {
            let b = build_source_exact_benchmark(24, p, 0.8, 0.1).unwrap();
            let t = b.operator();
            let xi = duality_map(&b.truth().sub(b.x0()), p);
            let gap = lp_norm(&t.adjoint_apply(b.source_element()).sub(&xi), 2.0);
            assert!(gap <= 1e-14, "p = {p}: source identity gap {gap}");
        }
        assert!(build_source_exact_benchmark(8, 1.0, 0.8, 0.1).is_err());
    }

    #[test]
    fn hilbert_case_truth_is_spectrum_weighted_source() {
        // p = 2: x_truth - x0 = T* v exactly; scalar check T = 2, v = 0.1.
        let space = Space::flat(1, 1.0);
        let t = LinearMap::diagonal(GridFunction::new(space, vec![2.0]));
        let v = GridFunction::new(space, vec![0.1]);
        let shift = duality_map_inverse(&t.adjoint_apply(&v), 2.0).unwrap();
        assert_relative_eq!(shift.values()[0], 0.2);
    }

    #[test]
    fn rate_fit_recovers_exact_power_laws() {
        let deltas: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
        let sqrt_law: Vec<f64> = deltas.iter().map(|d| d.powf(0.5)).collect();
        let fit = fit_rate(&deltas, &sqrt_law).unwrap();
        assert_relative_eq!(fit.slope, 0.5, max_relative = 1e-12);
        assert!(fit.residual <= 1e-12);

        let flat = [2.0, 2.0, 2.0, 2.0];
        let fit = fit_rate(&deltas, &flat).unwrap();
        assert!(fit.slope.abs() <= 1e-12);

        let linear: Vec<f64> = deltas.iter().map(|d| 3.0 * d).collect();
        let fit = fit_rate(&deltas, &linear).unwrap();
        assert_relative_eq!(fit.slope, 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 3f64.ln(), max_relative = 1e-10);
    }

    #[test]
    fn rate_fit_excludes_exact_recoveries() {
        let fit = fit_rate(&[1e-1, 1e-2, 1e-3], &[1e-2, 1e-4, 0.0]).unwrap();
        assert_eq!(fit.excluded, 1);
        assert_relative_eq!(fit.slope, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn empirical_order_exact_sequences() {
        let cubic: Vec<f64> = (0..5).map(|k| 2f64.powf(-(3f64.powi(k)))).collect();
        assert_relative_eq!(empirical_order(&cubic).unwrap(), 3.0, max_relative = 1e-12);
        let quadratic: Vec<f64> = (0..6).map(|k| 2f64.powf(-(2f64.powi(k)))).collect();
        assert_relative_eq!(empirical_order(&quadratic).unwrap(), 2.0, max_relative = 1e-12);
        assert!(empirical_order(&[0.5, 0.6, 0.7]).is_none());
        assert!(empirical_order(&[0.5, 0.25]).is_none());
    }

    #[test]
    fn empirical_order_of_the_recursion_matches_sigma() {
        use crate::certificates::{mu_recursion, RecursionParams};
        let mu = mu_recursion(
            &RecursionParams { c_hat: 1.0, sigma: 3.0, p: 1.0, delta: 0.0, mu0: 0.35, mu_bar: 1.0 },
            4,
        )
        .unwrap();
        let order = empirical_order(&mu).unwrap();
        assert!((order - 3.0).abs() <= 0.05, "estimated order {order}");
    }

    #[test]
    fn source_residual_vanishes_on_the_benchmark() {
        let b = build_source_exact_benchmark(16, 2.0, 0.75, 0.1).unwrap();
        let (v_hat, residual) = source_condition_residual(&b.operator(), b.truth(), b.x0(), 2.0);
        assert!(residual <= 1e-10, "residual {residual}");
        assert_relative_eq!(lp_norm(&v_hat, 2.0), 0.1, max_relative = 1e-8);
    }

    #[test]
    fn source_residual_degenerate_and_rough_cases() {
        let b = build_source_exact_benchmark(12, 2.0, 0.5, 0.1).unwrap();
        let (v_hat, residual) = source_condition_residual(&b.operator(), b.x0(), b.x0(), 2.0);
        assert_eq!(residual, 0.0);
        assert_eq!(lp_norm(&v_hat, 2.0), 0.0);

        // A rough truth against a rank-deficient smoothing operator:
        // order-one residual, no error.
        let space = Space::flat(12, 1.0);
        let smoothing = LinearMap::diagonal(GridFunction::new(
            space,
            (0..12).map(|i| if i < 4 { 0.5f64.powi(i as i32) } else { 0.0 }).collect(),
        ));
        let rough = GridFunction::new(space, (0..12).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect());
        let (_, residual) =
            source_condition_residual(&smoothing, &rough, &GridFunction::zeros(space), 2.0);
        assert!(residual > 0.1, "expected an order-one residual, got {residual}");
    }

    #[test]
    fn concurrent_map_preserves_order() {
        let out = run_concurrently(17, 4, |i| i * i);
        assert_eq!(out, (0..17).map(|i| i * i).collect::<Vec<_>>());
    }
}
