//! Convex Tikhonov subproblems
//!
//! ```text
//! min_x  (1/r) ||K (x - x_k) + r_k||_r^r  +  (kappa/p) ||x - x_ref||_p^p
//! ```
//!
//! for exponents `p, r` in `[1, 2]`. Exponents below 2 make the objective
//! nonsmooth, so the solver minimizes a smoothed surrogate in which `|t|^q`
//! is replaced by `(t^2 + eps^2)^{q/2}`, and drives `eps` to zero
//! geometrically (continuation). The inner method is a damped Newton-CG
//! descent with Armijo backtracking; the convergence contract is stated via
//! the first-order optimality residual
//!
//! ```text
//! || K* J_r^eps(K(x - x_k) + r_k) + kappa J_p^eps(x - x_ref) ||_2 <= grad_tol
//! ```
//!
//! at the final smoothing level, where `J_q^eps(t) = t (t^2 + eps^2)^{(q-2)/2}`
//! is the smoothed duality map (the exact gradient of the surrogate, and
//! sign-consistent with `J_q` as `eps -> 0`). The method behind the contract
//! is deliberately unexposed.

use serde::Serialize;

use crate::banach::{lp_norm, lp_pow, ExponentConfig, GridFunction};
use crate::linop::LinearMap;

/// One Tikhonov step instance: operator, linearization point, residual,
/// penalty reference and weight.
pub struct SubproblemSpec<'a> {
    pub operator: &'a LinearMap,
    /// `x_k`, the linearization point the operator acts around.
    pub linearization_point: &'a GridFunction,
    /// `r_k = F(x_k) - y^delta`.
    pub residual: &'a GridFunction,
    /// Penalty reference `x_ref`.
    pub reference: &'a GridFunction,
    /// Regularization weight (`alpha_k` or `beta_k`); must be positive.
    pub kappa: f64,
    pub exponents: ExponentConfig,
}

impl SubproblemSpec<'_> {
    fn validate(&self) {
        assert!(self.kappa > 0.0, "regularization weight must be positive");
        assert_eq!(
            self.residual.space(),
            self.operator.range(),
            "residual must live on the operator range"
        );
        assert_eq!(
            self.linearization_point.space(),
            self.operator.domain(),
            "linearization point must live on the operator domain"
        );
        assert_eq!(
            self.reference.space(),
            self.operator.domain(),
            "penalty reference must live on the operator domain"
        );
    }

    /// True (unsmoothed) objective value at `x`.
    pub fn objective(&self, x: &GridFunction) -> f64 {
        let (p, r) = (self.exponents.p(), self.exponents.r());
        let misfit = self
            .operator
            .apply(&x.sub(self.linearization_point))
            .add(self.residual);
        lp_pow(&misfit, r) / r + self.kappa / p * lp_pow(&x.sub(self.reference), p)
    }
}

/// Inner-solver knobs. `smoothing_eps` is relative: the per-term smoothing
/// scale is `smoothing_eps` times the magnitude of that term's argument.
#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub smoothing_eps: f64,
    /// Absolute tolerance on the optimality residual; `None` selects
    /// `1e-8 * (||r_k||_r^{r-1} + kappa)`.
    pub grad_tol: Option<f64>,
    /// Newton iteration budget per continuation stage.
    pub max_inner_iters: usize,
    /// Number of geometric eps reductions (factor 0.1) after the first stage.
    pub continuation_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            smoothing_eps: 1e-2,
            grad_tol: None,
            max_inner_iters: 200,
            continuation_steps: 3,
        }
    }
}

/// Per-solve record serialized into run outputs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveDiagnostics {
    pub inner_iters: usize,
    /// Optimality residual at the returned point (final smoothing level).
    pub residual: f64,
    /// Final absolute smoothing scale of the misfit term.
    pub epsilon_final: f64,
    /// True (unsmoothed) objective at the returned point.
    pub objective: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SubproblemError {
    #[error("subproblem solver stalled: optimality residual {residual:.3e} > tol {tol:.3e}")]
    NonConvergence {
        /// Best iterate found, with its diagnostics.
        best: Box<(GridFunction, SolveDiagnostics)>,
        residual: f64,
        tol: f64,
    },
    #[error("quadratic oracle needs p = r = 2, got (p, r) = ({p}, {r})")]
    OracleExponents { p: f64, r: f64 },
    #[error("normal-equation solve stalled at relative residual {rel:.3e}")]
    OracleBreakdown { rel: f64 },
}

fn default_grad_tol(spec: &SubproblemSpec) -> f64 {
    let r = spec.exponents.r();
    1e-8 * (lp_norm(spec.residual, r).powf(r - 1.0) + spec.kappa)
}

/// Smoothed pointwise power `q`: value, first and second derivative of
/// `(1/q)(t^2 + eps^2)^{q/2}` scaled by `q` where noted.
#[derive(Clone, Copy)]
struct SmoothPower {
    q: f64,
    eps2: f64,
}

impl SmoothPower {
    fn new(q: f64, eps: f64) -> SmoothPower {
        SmoothPower { q, eps2: eps * eps }
    }

    /// `(t^2 + eps^2)^{q/2}` (the smoothed `|t|^q`).
    fn value(&self, t: f64) -> f64 {
        (t * t + self.eps2).powf(self.q / 2.0)
    }

    /// `J_q^eps(t) = t (t^2 + eps^2)^{(q-2)/2}`.
    fn slope(&self, t: f64) -> f64 {
        if self.q == 2.0 {
            return t;
        }
        t * (t * t + self.eps2).powf((self.q - 2.0) / 2.0)
    }

    /// Reweighting factor `w(t) = (t^2 + eps^2)^{(q-2)/2} = J_q^eps(t)/t`.
    ///
    /// `w(t)` dominates the second derivative of the smoothed power for
    /// `q <= 2`, so the reweighted quadratic model majorizes the objective:
    /// its minimizer is always a safe descent step, and at `q = 2` the model
    /// is the exact Hessian.
    fn irls_weight(&self, t: f64) -> f64 {
        if self.q == 2.0 {
            return 1.0;
        }
        (t * t + self.eps2).powf((self.q - 2.0) / 2.0)
    }
}

struct Stage<'a> {
    spec: &'a SubproblemSpec<'a>,
    misfit: SmoothPower,
    penalty: SmoothPower,
}

impl Stage<'_> {
    fn smoothed_objective(&self, x: &GridFunction) -> f64 {
        let (p, r) = (self.spec.exponents.p(), self.spec.exponents.r());
        let res = self
            .spec
            .operator
            .apply(&x.sub(self.spec.linearization_point))
            .add(self.spec.residual);
        let m: f64 = res.values().iter().map(|&t| self.misfit.value(t)).sum();
        let dx = x.sub(self.spec.reference);
        let pen: f64 = dx.values().iter().map(|&t| self.penalty.value(t)).sum();
        res.weight() * m / r + self.spec.kappa * dx.weight() * pen / p
    }

    /// Gradient with respect to the weighted pairing; equals the optimality
    /// residual expression of the solve contract.
    fn gradient(&self, x: &GridFunction) -> GridFunction {
        let res = self
            .spec
            .operator
            .apply(&x.sub(self.spec.linearization_point))
            .add(self.spec.residual);
        let jr = res.map(|t| self.misfit.slope(t));
        let jp = x.sub(self.spec.reference).map(|t| self.penalty.slope(t));
        self.spec.operator.adjoint_apply(&jr).axpy(self.spec.kappa, &jp)
    }

    /// Action of the reweighted model matrix
    /// `K* W_r K + kappa W_p` at the current point (weights frozen at `x`).
    fn model_apply(
        &self,
        weights_r: &GridFunction,
        weights_p: &GridFunction,
        v: &GridFunction,
    ) -> GridFunction {
        let kv = self.spec.operator.apply(v);
        let first = self.spec.operator.adjoint_apply(&weights_r.hadamard(&kv));
        first.axpy(self.spec.kappa, &weights_p.hadamard(v))
    }

    fn weights_at(&self, x: &GridFunction) -> (GridFunction, GridFunction) {
        let res = self
            .spec
            .operator
            .apply(&x.sub(self.spec.linearization_point))
            .add(self.spec.residual);
        (
            res.map(|t| self.misfit.irls_weight(t)),
            x.sub(self.spec.reference).map(|t| self.penalty.irls_weight(t)),
        )
    }
}

/// Conjugate gradients for a self-adjoint positive definite operator in the
/// weighted inner product. Returns the iterate, its residual norm and the
/// iteration count.
pub(crate) fn cg_weighted(
    apply: impl Fn(&GridFunction) -> GridFunction,
    b: &GridFunction,
    tol: f64,
    max_iters: usize,
) -> (GridFunction, f64, usize) {
    let mut x = GridFunction::zeros(b.space());
    let mut r = b.clone();
    let mut rho = r.pairing(&r);
    if rho.sqrt() <= tol {
        return (x, rho.sqrt(), 0);
    }
    let mut p = r.clone();
    for iter in 1..=max_iters {
        let ap = apply(&p);
        let denom = p.pairing(&ap);
        if denom <= 0.0 || !denom.is_finite() {
            return (x, rho.sqrt(), iter - 1);
        }
        let alpha = rho / denom;
        x = x.axpy(alpha, &p);
        r = r.axpy(-alpha, &ap);
        let rho_next = r.pairing(&r);
        if rho_next.sqrt() <= tol {
            return (x, rho_next.sqrt(), iter);
        }
        p = r.axpy(rho_next / rho, &p);
        rho = rho_next;
    }
    (x, rho.sqrt(), max_iters)
}

/// Solve the subproblem; deterministic, warm-startable, reentrant.
///
/// Returns the minimizer and diagnostics, or a [`SubproblemError::NonConvergence`]
/// carrying the best iterate if the optimality residual cannot be pushed
/// below `grad_tol` within the iteration budget at the final smoothing level.
pub fn solve(
    spec: &SubproblemSpec,
    opts: &SolverOptions,
    warm_start: Option<&GridFunction>,
) -> Result<(GridFunction, SolveDiagnostics), SubproblemError> {
    spec.validate();
    if let Some(w) = warm_start {
        assert_eq!(w.space(), spec.operator.domain(), "warm start off the domain grid");
    }
    let (p, r) = (spec.exponents.p(), spec.exponents.r());
    let grad_tol = opts.grad_tol.unwrap_or_else(|| default_grad_tol(spec));
    let mut x = warm_start.unwrap_or(spec.linearization_point).clone();

    // Smoothing scales per term, from the magnitudes the arguments sweep.
    let res_warm = spec.operator.apply(&x.sub(spec.linearization_point)).add(spec.residual);
    let res_ref =
        spec.operator.apply(&spec.reference.sub(spec.linearization_point)).add(spec.residual);
    let scale_r = spec
        .residual
        .max_abs()
        .max(res_warm.max_abs())
        .max(res_ref.max_abs())
        .max(1e-30);
    // The penalty argument may start at exactly zero (cold start at the
    // reference); its smoothing scale needs a floor that keeps first steps
    // representable relative to the iterate magnitudes.
    let scale_p = x
        .sub(spec.reference)
        .max_abs()
        .max(spec.linearization_point.sub(spec.reference).max_abs())
        .max(1e-8 * (1.0 + spec.reference.max_abs() + spec.linearization_point.max_abs()));

    // Exponent 2 terms are exact for any eps; skip continuation when both are.
    let stages: Vec<f64> = if p == 2.0 && r == 2.0 {
        vec![0.0]
    } else {
        (0..=opts.continuation_steps)
            .map(|j| opts.smoothing_eps * 0.1f64.powi(j as i32))
            .collect()
    };

    let mut total_iters = 0usize;
    let mut eps_r_final = 0.0;
    for (j, rel) in stages.iter().enumerate() {
        let stage = Stage {
            spec,
            misfit: SmoothPower::new(r, rel * scale_r),
            penalty: SmoothPower::new(p, rel * scale_p),
        };
        eps_r_final = rel * scale_r;
        let last = j + 1 == stages.len();
        let stage_tol = if last {
            grad_tol
        } else {
            // Intermediate stages only need to hand over a decent start.
            (grad_tol * 100.0).max(1e-4 * lp_norm(&stage.gradient(&x), 2.0))
        };
        let (next, iters) = newton_descent(&stage, x, stage_tol, opts.max_inner_iters);
        x = next;
        total_iters += iters;
    }

    let final_stage = Stage {
        spec,
        misfit: SmoothPower::new(r, *stages.last().unwrap() * scale_r),
        penalty: SmoothPower::new(p, *stages.last().unwrap() * scale_p),
    };
    let residual = lp_norm(&final_stage.gradient(&x), 2.0);
    let diagnostics = SolveDiagnostics {
        inner_iters: total_iters,
        residual,
        epsilon_final: eps_r_final,
        objective: spec.objective(&x),
    };
    if residual <= grad_tol {
        Ok((x, diagnostics))
    } else {
        Err(SubproblemError::NonConvergence {
            best: Box::new((x, diagnostics)),
            residual,
            tol: grad_tol,
        })
    }
}

fn newton_descent(
    stage: &Stage,
    mut x: GridFunction,
    tol: f64,
    max_iters: usize,
) -> (GridFunction, usize) {
    let mut obj = stage.smoothed_objective(&x);
    for iter in 0..max_iters {
        let g = stage.gradient(&x);
        let gnorm = lp_norm(&g, 2.0);
        if gnorm <= tol {
            return (x, iter);
        }
        let (wr, wp) = stage.weights_at(&x);
        let cg_cap = 4 * x.len() + 20;
        let cg_tol = (0.1 * gnorm).max(0.05 * tol);
        let (mut dir, _, _) =
            cg_weighted(|v| stage.model_apply(&wr, &wp, v), &g.scale(-1.0), cg_tol, cg_cap);
        let mut slope = g.pairing(&dir);
        if !(slope < 0.0) || !slope.is_finite() {
            dir = g.scale(-1.0);
            slope = g.pairing(&dir);
        }
        // Once the predicted decrease falls below objective roundoff, exact
        // Armijo comparisons are bit noise; the reweighted model majorizes
        // the objective, so the full step is accepted within that noise.
        let floor = 1e-12 * (1.0 + obj.abs());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = x.axpy(t, &dir);
            let cand_obj = stage.smoothed_objective(&cand);
            if cand_obj <= obj + 1e-4 * t * slope
                || (slope.abs() <= floor && cand_obj <= obj + floor)
            {
                x = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            if slope.abs() <= floor {
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Step size underflow: no further progress possible at this eps.
            return (x, iter + 1);
        }
    }
    (x, max_iters)
}

/// Closed-form route for `p = r = 2`: solve the normal equations
///
/// ```text
/// (K*K + kappa I) x = K*(K x_k - r_k) + kappa x_ref
/// ```
///
/// by conjugate gradients to relative residual 1e-12. Serves as the
/// independent oracle the iterative path is checked against.
pub fn solve_oracle_quadratic(spec: &SubproblemSpec) -> Result<GridFunction, SubproblemError> {
    spec.validate();
    let (p, r) = (spec.exponents.p(), spec.exponents.r());
    if p != 2.0 || r != 2.0 {
        return Err(SubproblemError::OracleExponents { p, r });
    }
    let k = spec.operator;
    let rhs = k
        .adjoint_apply(&k.apply(spec.linearization_point).sub(spec.residual))
        .axpy(spec.kappa, spec.reference);
    let rhs_norm = lp_norm(&rhs, 2.0).max(1e-300);
    let apply = |v: &GridFunction| k.adjoint_apply(&k.apply(v)).axpy(spec.kappa, v);
    let cap = 40 * spec.operator.domain_dim() + 200;
    let (x, _, _) = cg_weighted(apply, &rhs, 1e-13 * rhs_norm, cap);
    let rel = lp_norm(&rhs.sub(&apply(&x)), 2.0) / rhs_norm;
    if rel > 1e-12 {
        return Err(SubproblemError::OracleBreakdown { rel });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banach::Space;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn exponents(p: f64, r: f64) -> ExponentConfig {
        ExponentConfig::general(p, r).unwrap()
    }

    #[test]
    fn exact_fixed_point_is_returned_unchanged() {
        // r_k = 0 and x_k = x_ref: both terms vanish at x_ref.
        let space = Space::flat(3, 1.0);
        let op = LinearMap::diagonal(GridFunction::new(space, vec![2.0, -1.0, 0.5]));
        let xk = GridFunction::new(space, vec![0.3, -0.2, 1.0]);
        let rk = GridFunction::zeros(space);
        let spec = SubproblemSpec {
            operator: &op,
            linearization_point: &xk,
            residual: &rk,
            reference: &xk,
            kappa: 0.7,
            exponents: exponents(1.5, 1.2),
        };
        let (x, diag) = solve(&spec, &SolverOptions::default(), None).unwrap();
        for (a, b) in x.values().iter().zip(xk.values()) {
            assert!((a - b).abs() <= 1e-10);
        }
        assert!(diag.objective.abs() <= 1e-20);
    }

    #[test]
    fn scalar_normal_equation_instance() {
        // p = r = 2, K = 1 on one node, x_k = x_ref = 0, r_k = -2, kappa = 1:
        // (1 + kappa) x = 2  =>  x = 1.
        let space = Space::flat(1, 1.0);
        let op = LinearMap::identity(space);
        let zero = GridFunction::zeros(space);
        let rk = GridFunction::new(space, vec![-2.0]);
        let spec = SubproblemSpec {
            operator: &op,
            linearization_point: &zero,
            residual: &rk,
            reference: &zero,
            kappa: 1.0,
            exponents: exponents(2.0, 2.0),
        };
        let (x, _) = solve(&spec, &SolverOptions::default(), None).unwrap();
        assert_relative_eq!(x.values()[0], 1.0, max_relative = 1e-9);
        let oracle = solve_oracle_quadratic(&spec).unwrap();
        assert_relative_eq!(oracle.values()[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn one_homogeneous_misfit_scalar_case_split() {
        // min |x - 2| + (kappa/2) x^2: subdifferential oracle gives x = 2 for
        // kappa = 0.2 (|kappa t| <= 1) and x = 1/2 for kappa = 2.
        let space = Space::flat(1, 1.0);
        let op = LinearMap::identity(space);
        let zero = GridFunction::zeros(space);
        let rk = GridFunction::new(space, vec![-2.0]);
        let opts = SolverOptions { continuation_steps: 5, ..Default::default() };
        for (kappa, expected, tol) in [(0.2, 2.0, 1e-4), (2.0, 0.5, 1e-6)] {
            let spec = SubproblemSpec {
                operator: &op,
                linearization_point: &zero,
                residual: &rk,
                reference: &zero,
                kappa,
                exponents: exponents(2.0, 1.0),
            };
            let (x, _) = solve(&spec, &opts, None).unwrap();
            assert!(
                (x.values()[0] - expected).abs() <= tol,
                "kappa = {kappa}: got {} want {expected}",
                x.values()[0]
            );
        }
    }

    #[test]
    fn penalty_dominated_limit_pins_solution_to_reference() {
        let space = Space::flat(4, 1.0);
        let op = LinearMap::diagonal(GridFunction::new(space, vec![1.0, 2.0, 0.5, 1.5]));
        let xk = GridFunction::zeros(space);
        let rk = GridFunction::new(space, vec![1.0, -1.0, 2.0, 0.25]);
        let xref = GridFunction::new(space, vec![0.1, 0.2, -0.1, 0.3]);
        let spec = SubproblemSpec {
            operator: &op,
            linearization_point: &xk,
            residual: &rk,
            reference: &xref,
            kappa: 1e8,
            exponents: exponents(2.0, 2.0),
        };
        let x = solve_oracle_quadratic(&spec).unwrap();
        let drift = lp_norm(&x.sub(&xref), 2.0);
        let scale = lp_norm(&op.adjoint_apply(&rk), 2.0);
        assert!(drift <= 1e-6 * scale, "drift {drift} vs scale {scale}");
    }

    fn random_instance(
        rng: &mut ChaCha8Rng,
        n: usize,
    ) -> (LinearMap, GridFunction, GridFunction, GridFunction, f64) {
        let space = Space::flat(n, 1.0);
        let diag =
            GridFunction::new(space, (0..n).map(|_| rng.gen_range(0.2..2.0)).collect());
        let op = LinearMap::diagonal(diag);
        let xk = GridFunction::new(space, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let rk = GridFunction::new(space, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let xref =
            GridFunction::new(space, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let kappa = rng.gen_range(0.01..1.0);
        (op, xk, rk, xref, kappa)
    }

    #[test]
    fn iterative_solve_matches_quadratic_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let n = rng.gen_range(2..=16);
            let (op, xk, rk, xref, kappa) = random_instance(&mut rng, n);
            let spec = SubproblemSpec {
                operator: &op,
                linearization_point: &xk,
                residual: &rk,
                reference: &xref,
                kappa,
                exponents: exponents(2.0, 2.0),
            };
            // The oracle comparison needs the iterative path pushed well
            // below the 1e-8 agreement target.
            let opts = SolverOptions {
                grad_tol: Some(1e-12 * (lp_norm(&rk, 2.0) + kappa)),
                ..Default::default()
            };
            let (x, _) = solve(&spec, &opts, None).unwrap();
            let oracle = solve_oracle_quadratic(&spec).unwrap();
            let diff = lp_norm(&x.sub(&oracle), 2.0);
            let scale = lp_norm(&oracle, 2.0).max(1e-12);
            assert!(diff / scale <= 1e-8, "relative gap {}", diff / scale);
        }
    }

    #[test]
    fn objective_never_exceeds_warm_start_or_linearization_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(p, r) in &[(2.0, 2.0), (2.0, 1.1), (1.5, 1.2), (1.3, 1.0)] {
            let (op, xk, rk, xref, kappa) = random_instance(&mut rng, 8);
            let warm =
                GridFunction::new(xk.space(), (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let spec = SubproblemSpec {
                operator: &op,
                linearization_point: &xk,
                residual: &rk,
                reference: &xref,
                kappa,
                exponents: exponents(p, r),
            };
            let (x, diag) = solve(&spec, &SolverOptions::default(), Some(&warm)).unwrap();
            let slack = 1e-10 * (1.0 + spec.objective(&xk).abs());
            assert!(diag.objective <= spec.objective(&xk) + slack);
            assert!(diag.objective <= spec.objective(&warm) + slack);
            // Minimality against random test points, up to grad_tol slack.
            let grad_tol = super::default_grad_tol(&spec);
            for _ in 0..5 {
                let z = GridFunction::new(
                    xk.space(),
                    (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                );
                let gap = spec.objective(&x) - spec.objective(&z);
                let allowance = grad_tol * lp_norm(&z.sub(&x), 2.0) + 1e-9;
                assert!(gap <= allowance, "(p,r)=({p},{r}): gap {gap} > {allowance}");
            }
        }
    }

    #[test]
    fn solution_invariant_under_warm_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (op, xk, rk, xref, kappa) = random_instance(&mut rng, 6);
        for &(p, r) in &[(2.0, 2.0), (1.5, 1.1)] {
            let spec = SubproblemSpec {
                operator: &op,
                linearization_point: &xk,
                residual: &rk,
                reference: &xref,
                kappa,
                exponents: exponents(p, r),
            };
            let (a, _) = solve(&spec, &SolverOptions::default(), None).unwrap();
            let warm =
                GridFunction::new(xk.space(), (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect());
            let (b, _) = solve(&spec, &SolverOptions::default(), Some(&warm)).unwrap();
            let gap = lp_norm(&a.sub(&b), 2.0);
            assert!(gap <= 1e-5, "(p,r)=({p},{r}): warm-start gap {gap}");
        }
    }

    #[test]
    fn oracle_rejects_non_quadratic_exponents() {
        let space = Space::flat(1, 1.0);
        let op = LinearMap::identity(space);
        let zero = GridFunction::zeros(space);
        let spec = SubproblemSpec {
            operator: &op,
            linearization_point: &zero,
            residual: &zero,
            reference: &zero,
            kappa: 1.0,
            exponents: exponents(1.5, 1.5),
        };
        assert!(matches!(
            solve_oracle_quadratic(&spec),
            Err(SubproblemError::OracleExponents { .. })
        ));
    }
}
