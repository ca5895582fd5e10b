//! The outer two-stage iteration, its first-order (IRGNM) degenerate mode,
//! regularization schedules and a-priori stopping rules.
//!
//! One step from the iterate `x_k` builds a single linearization (one
//! assembly/factorization of the forward model) and solves two Tikhonov
//! subproblems:
//!
//! ```text
//! x_mid  = argmin (1/r)||T_k(x - x_k) + r_k||_r^r + (beta_k/p)||x - x_0||_p^p
//! S_k    = T_k + (1/2) F''(x_k)(x_mid - x_k, .)
//! x_next = argmin (1/r)||S_k(x - x_k) + r_k||_r^r + (alpha_k/p)||x - x_ref||_p^p
//! ```
//!
//! with `x_ref = x_0` by default (a switch selects the current iterate
//! instead). The IRGNM mode stops after the first stage and takes
//! `x_next = x_mid`.

use serde::Serialize;

use crate::banach::{lp_norm, ExponentConfig, GridFunction, Regime, Space};
use crate::certificates::sigma_formula;
use crate::linop::{compose_halley_operator, LinearMap};
use crate::noise::measure_delta;
use crate::subproblem::{solve, SolveDiagnostics, SolverOptions, SubproblemError, SubproblemSpec};
use crate::{Error, Result};

/// Outer method selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    Halley,
    Irgnm,
}

/// Reference point of the second-stage penalty.
///
/// The proof machinery and the Hilbert-space formulation penalize distance
/// to the initial guess in both stages, which is the default here; the
/// variant penalizing distance to the current iterate is kept behind this
/// switch for comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StageTwoReference {
    InitialGuess,
    CurrentIterate,
}

/// Factory producing the curried second-derivative map
/// `h -> F''(x_k)(fixed, h)` for a given fixed direction.
pub type SecondDirectionalFactory = Box<dyn Fn(&GridFunction) -> LinearMap + Send + Sync>;

/// Everything the step needs at one linearization point; built once per
/// outer iterate.
pub struct Linearization {
    /// `F(x_k)`.
    pub value: GridFunction,
    /// `T_k = F'(x_k)`.
    pub derivative: LinearMap,
    /// Second-derivative factory; `None` means `F'' = 0` and the Halley
    /// correction degenerates to the derivative.
    pub second: Option<SecondDirectionalFactory>,
}

/// A forward operator `F` with first and second derivatives.
pub trait ForwardModel {
    fn domain(&self) -> Space;
    fn range(&self) -> Space;
    /// Build `F(x)`, `F'(x)` and the curried `F''(x)` at one point. For PDE
    /// models this is the one assembly/factorization of the step.
    fn linearize(&self, x: &GridFunction) -> Result<Linearization>;
    /// Assemblies performed so far, when the model counts them.
    fn assembly_count(&self) -> Option<usize> {
        None
    }
}

/// Regularization weight sequences `alpha_k`, `beta_k`.
#[derive(Clone, Debug, Serialize)]
pub enum Schedule {
    /// `alpha_k = alpha0 q^{-k}`, `beta_k = s alpha_k`; the decay ratio
    /// `alpha_k / alpha_{k+1} = q` is constant and at least 1.
    GeometricDecay { alpha0: f64, q: f64, s: f64 },
    /// Constant parameters for the one-homogeneous misfit regime.
    Constant { alpha_floor: f64, beta_floor: f64 },
}

impl Schedule {
    pub fn geometric(alpha0: f64, q: f64, s: f64) -> Result<Schedule> {
        if !(alpha0 > 0.0) || !(q > 1.0) || !(s > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "geometric schedule needs alpha0 > 0, q > 1, s > 0; got ({alpha0}, {q}, {s})"
            )));
        }
        Ok(Schedule::GeometricDecay { alpha0, q, s })
    }

    pub fn constant(alpha_floor: f64, beta_floor: f64) -> Result<Schedule> {
        if !(alpha_floor > 0.0) || !(beta_floor > 0.0) {
            return Err(Error::InvalidArgument(
                "constant schedule needs positive floors".into(),
            ));
        }
        Ok(Schedule::Constant { alpha_floor, beta_floor })
    }

    pub fn alpha(&self, k: usize) -> f64 {
        match self {
            Schedule::GeometricDecay { alpha0, q, .. } => alpha0 * q.powi(-(k as i32)),
            Schedule::Constant { alpha_floor, .. } => *alpha_floor,
        }
    }

    pub fn beta(&self, k: usize) -> f64 {
        match self {
            Schedule::GeometricDecay { s, .. } => s * self.alpha(k),
            Schedule::Constant { beta_floor, .. } => *beta_floor,
        }
    }

    /// Default guard constants `(m, M) = (s alpha0^{1 - 2/p}, s alpha0^{1 - 1/(p-1)})`
    /// anchoring the admissibility window at `k = 0`.
    pub fn default_window_guards(&self, p: f64) -> Result<(f64, f64)> {
        let Schedule::GeometricDecay { alpha0, s, .. } = self else {
            return Err(Error::InvalidArgument(
                "window guards apply to the geometric schedule".into(),
            ));
        };
        if p <= 1.0 {
            return Err(Error::InvalidArgument("window guards need p > 1".into()));
        }
        Ok((s * alpha0.powf(1.0 - 2.0 / p), s * alpha0.powf(1.0 - 1.0 / (p - 1.0))))
    }
}

/// One row of the schedule admissibility report:
/// `m alpha_k^{2/p} <= beta_k <= M alpha_k^{1/(p-1)}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WindowCheck {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
    pub inside: bool,
}

/// Check window membership of `beta_k` over `0..horizon` for given guards;
/// reported, never enforced.
pub fn admissibility_window(
    schedule: &Schedule,
    p: f64,
    m: f64,
    cap_m: f64,
    horizon: usize,
) -> Vec<WindowCheck> {
    assert!(p > 1.0, "window exponents need p > 1");
    (0..horizon)
        .map(|k| {
            let alpha = schedule.alpha(k);
            let beta = schedule.beta(k);
            let lower = m * alpha.powf(2.0 / p);
            let upper = cap_m * alpha.powf(1.0 / (p - 1.0));
            WindowCheck { k, alpha, beta, lower, upper, inside: lower <= beta && beta <= upper }
        })
        .collect()
}

/// Per-iterate trace row. Row `k` describes the iterate `x_k`: the schedule
/// values at `k`, the data residual at `x_k`, errors against the truth when
/// known, the normalized errors `gamma_k = ||x_k - x†|| / alpha_k^{1/(p(r-1))}`
/// and `Gamma_k = ||x_{(k-1)+} - x†|| / beta_{k-1}^{1/(p(r-1))}` (zero at
/// `k = 0` by convention, undefined for r = 1), and the subproblem
/// diagnostics of the step that produced `x_k`.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub residual: f64,
    pub error_x: Option<f64>,
    pub error_mid: Option<f64>,
    pub gamma: Option<f64>,
    pub cap_gamma: Option<f64>,
    pub stage1: Option<SolveDiagnostics>,
    pub stage2: Option<SolveDiagnostics>,
}

/// Full configuration of one inversion run.
pub struct RunConfig {
    pub method: Method,
    pub exponents: ExponentConfig,
    pub schedule: Schedule,
    /// Stopping constant; must exceed 1.
    pub tau: f64,
    pub x0: GridFunction,
    /// Exact solution, when known; enables error columns and the divergence
    /// guard.
    pub truth: Option<GridFunction>,
    /// Noise level consistent with the data; 0 selects the iteration cap.
    pub delta: f64,
    /// Iteration cap for exact-data runs (and a safety bound otherwise).
    pub max_iters: usize,
    pub stage_two_reference: StageTwoReference,
    pub solver: SolverOptions,
    /// Exact data, when available: used only to verify `||y - y^delta|| <= delta`.
    pub exact_data: Option<GridFunction>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) {
            return Err(Error::InvalidArgument(format!("tau must exceed 1, got {}", self.tau)));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidArgument("delta must be nonnegative".into()));
        }
        let regime = self.exponents.regime().ok_or_else(|| {
            Error::InvalidExponents("runs need exponents inside a theorem regime".into())
        })?;
        match (regime, &self.schedule) {
            (Regime::RateRgt1, Schedule::GeometricDecay { .. }) => Ok(()),
            (Regime::ExactPenalty, Schedule::Constant { .. }) => Ok(()),
            (Regime::RateRgt1, _) => Err(Error::InvalidArgument(
                "the r > 1 regime pairs with the geometric schedule".into(),
            )),
            (Regime::ExactPenalty, _) => Err(Error::InvalidArgument(
                "the r = 1 regime pairs with the constant schedule".into(),
            )),
        }
    }
}

/// A-priori stopping data for the `r > 1` regime: the first `k` with
/// `alpha_k^{1/(r-1)} <= tau delta`, plus the equivalent form phrased in
/// `beta_k` with `tau_bar = s^{1/(r-1)} tau`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StoppingIndex {
    pub k_star: usize,
    pub beta_form_k_star: usize,
    pub tau_bar: f64,
}

/// Stopping index for `r > 1`; `Ok(None)` for exact data, where no finite
/// index exists and the iteration cap applies.
pub fn stopping_index_rgt1(
    schedule: &Schedule,
    r: f64,
    tau: f64,
    delta: f64,
) -> Result<Option<StoppingIndex>> {
    if r <= 1.0 {
        return Err(Error::InvalidArgument(format!("this stopping rule needs r > 1, got {r}")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let Schedule::GeometricDecay { s, .. } = schedule else {
        return Err(Error::InvalidArgument(
            "the r > 1 stopping rule needs the geometric schedule".into(),
        ));
    };
    if delta == 0.0 {
        return Ok(None);
    }
    let threshold = (tau * delta).powf(r - 1.0);
    let tau_bar = s.powf(1.0 / (r - 1.0)) * tau;
    let threshold_beta = (tau_bar * delta).powf(r - 1.0);
    let mut k_star = None;
    let mut beta_star = None;
    for k in 0..1_000_000usize {
        if k_star.is_none() && schedule.alpha(k) <= threshold {
            k_star = Some(k);
        }
        if beta_star.is_none() && schedule.beta(k) <= threshold_beta {
            beta_star = Some(k);
        }
        if let (Some(a), Some(b)) = (k_star, beta_star) {
            return Ok(Some(StoppingIndex { k_star: a, beta_form_k_star: b, tau_bar }));
        }
    }
    Err(Error::Numerical("stopping index exceeds 1e6; delta is too small".into()))
}

/// Ceiling that forgives double-rounding within 1e-9 of an integer.
fn ceil_tol(x: f64) -> f64 {
    if (x - x.round()).abs() < 1e-9 {
        x.round()
    } else {
        x.ceil()
    }
}

/// Stopping index for the exact-penalization regime `r = 1`:
/// `k* = ceil( log_sigma( log_2( delta^{-1/p} )))`, clamped to at least 1,
/// with the method's own convergence order `sigma`.
pub fn stopping_index_req1(p: f64, delta: f64, method: Method) -> Result<usize> {
    if !(0.0..1.0).contains(&delta) || delta <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "the r = 1 stopping rule needs 0 < delta < 1, got {delta}"
        )));
    }
    let sigma = sigma_formula(p, method)?;
    let inner = -delta.log2() / p;
    let k = ceil_tol(inner.ln() / sigma.ln());
    Ok((k.max(1.0)) as usize)
}

/// Outcome of one two-stage step.
pub struct HalleyStep {
    pub x_mid: GridFunction,
    pub x_next: GridFunction,
    pub stage1: SolveDiagnostics,
    pub stage2: Option<SolveDiagnostics>,
}

#[derive(Debug, thiserror::Error)]
pub enum StepError {
    #[error("stage {stage} subproblem failed at step {k}: {source}")]
    Subproblem {
        k: usize,
        stage: u8,
        #[source]
        source: SubproblemError,
    },
}

impl StepError {
    /// Best-effort iterate carried by the failed subproblem.
    pub fn best_iterate(&self) -> &GridFunction {
        match self {
            StepError::Subproblem {
                source: SubproblemError::NonConvergence { best, .. }, ..
            } => &best.0,
            _ => panic!("no iterate attached"),
        }
    }
}

/// One full step from `x_k` given the linearization built there. Consumes
/// exactly the one factorization owned by `lin`.
pub fn halley_step(
    lin: &Linearization,
    x_k: &GridFunction,
    data: &GridFunction,
    cfg: &RunConfig,
    k: usize,
) -> std::result::Result<HalleyStep, StepError> {
    step_impl(lin, x_k, data, cfg, k, Method::Halley)
}

/// First stage only; the returned iterate is the stage-one minimizer,
/// bit-for-bit the `x_mid` of the two-stage step under identical tolerances.
pub fn irgnm_step(
    lin: &Linearization,
    x_k: &GridFunction,
    data: &GridFunction,
    cfg: &RunConfig,
    k: usize,
) -> std::result::Result<HalleyStep, StepError> {
    step_impl(lin, x_k, data, cfg, k, Method::Irgnm)
}

fn step_impl(
    lin: &Linearization,
    x_k: &GridFunction,
    data: &GridFunction,
    cfg: &RunConfig,
    k: usize,
    method: Method,
) -> std::result::Result<HalleyStep, StepError> {
    let residual = lin.value.sub(data);
    let beta = cfg.schedule.beta(k);
    let alpha = cfg.schedule.alpha(k);

    let stage1_spec = SubproblemSpec {
        operator: &lin.derivative,
        linearization_point: x_k,
        residual: &residual,
        reference: &cfg.x0,
        kappa: beta,
        exponents: cfg.exponents,
    };
    let (x_mid, diag1) = solve(&stage1_spec, &cfg.solver, Some(x_k))
        .map_err(|source| StepError::Subproblem { k, stage: 1, source })?;

    if method == Method::Irgnm {
        return Ok(HalleyStep { x_next: x_mid.clone(), x_mid, stage1: diag1, stage2: None });
    }

    let correction = x_mid.sub(x_k);
    let operator = match &lin.second {
        Some(factory) => compose_halley_operator(&lin.derivative, &factory(&correction)),
        None => lin.derivative.clone(),
    };
    let reference = match cfg.stage_two_reference {
        StageTwoReference::InitialGuess => &cfg.x0,
        StageTwoReference::CurrentIterate => x_k,
    };
    let stage2_spec = SubproblemSpec {
        operator: &operator,
        linearization_point: x_k,
        residual: &residual,
        reference,
        kappa: alpha,
        exponents: cfg.exponents,
    };
    let (x_next, diag2) = solve(&stage2_spec, &cfg.solver, Some(&x_mid))
        .map_err(|source| StepError::Subproblem { k, stage: 2, source })?;
    Ok(HalleyStep { x_mid, x_next, stage1: diag1, stage2: Some(diag2) })
}

/// Completed run: records for every visited iterate plus the final one.
pub struct RunOutput {
    pub records: Vec<IterationRecord>,
    pub final_iterate: GridFunction,
    /// Stopping index actually used (`None` for cap-terminated runs).
    pub k_star: Option<usize>,
    /// Assemblies performed during the run, for models that count.
    pub assemblies: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("iteration diverged at step {step}: error {error:.3e} > 10 x initial {initial:.3e}")]
    Diverged { step: usize, error: f64, initial: f64, output: RunOutput },
    #[error(transparent)]
    Step {
        #[from]
        source: StepError,
    },
    #[error(transparent)]
    Other(#[from] Error),
}

impl std::fmt::Debug for RunOutput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunOutput")
            .field("records", &self.records.len())
            .field("k_star", &self.k_star)
            .field("assemblies", &self.assemblies)
            .finish_non_exhaustive()
    }
}

/// Execute the outer iteration until the a-priori stopping index (noisy
/// data) or the iteration cap (exact data). Deterministic given the config.
pub fn run(
    model: &dyn ForwardModel,
    data: &GridFunction,
    cfg: &RunConfig,
) -> std::result::Result<RunOutput, RunError> {
    cfg.validate()?;
    assert_eq!(cfg.x0.space(), model.domain(), "initial guess off the model domain");
    assert_eq!(data.space(), model.range(), "data off the model range");
    let (p, r) = (cfg.exponents.p(), cfg.exponents.r());
    if let Some(exact) = &cfg.exact_data {
        let measured = measure_delta(exact, data, r);
        if measured > cfg.delta * (1.0 + 1e-10) + 1e-300 {
            return Err(RunError::Other(Error::InvalidArgument(format!(
                "data violates the stated noise level: ||y - y_delta|| = {measured:.6e} > delta = {:.6e}",
                cfg.delta
            ))));
        }
    }

    let k_star = if cfg.delta > 0.0 {
        match cfg.exponents.regime() {
            Some(Regime::RateRgt1) => stopping_index_rgt1(&cfg.schedule, r, cfg.tau, cfg.delta)?
                .map(|s| s.k_star)
                .unwrap_or(cfg.max_iters),
            Some(Regime::ExactPenalty) => stopping_index_req1(p, cfg.delta, cfg.method)?,
            None => unreachable!("validated above"),
        }
        .min(cfg.max_iters)
    } else {
        cfg.max_iters
    };

    let assemblies_before = model.assembly_count();
    let rate_exp = if r > 1.0 { Some(1.0 / (p * (r - 1.0))) } else { None };
    let mut records = Vec::with_capacity(k_star + 1);
    let mut x = cfg.x0.clone();
    let mut initial_error = None;
    let mut carried_mid: Option<GridFunction> = None;
    let mut carried_diag: Option<(SolveDiagnostics, Option<SolveDiagnostics>)> = None;

    let mut k = 0usize;
    loop {
        let lin = model.linearize(&x).map_err(RunError::Other)?;
        let residual_norm = lp_norm(&lin.value.sub(data), r);
        let error_x = cfg.truth.as_ref().map(|t| lp_norm(&x.sub(t), p));
        let error_mid =
            cfg.truth.as_ref().zip(carried_mid.as_ref()).map(|(t, m)| lp_norm(&m.sub(t), p));
        let gamma = rate_exp.zip(error_x).map(|(e, err)| err / cfg.schedule.alpha(k).powf(e));
        let cap_gamma = match (rate_exp, k) {
            (Some(_), 0) => Some(0.0),
            (Some(e), _) => error_mid.map(|err| err / cfg.schedule.beta(k - 1).powf(e)),
            (None, _) => None,
        };
        let (stage1, stage2) = match carried_diag.take() {
            Some((d1, d2)) => (Some(d1), d2),
            None => (None, None),
        };
        records.push(IterationRecord {
            k,
            alpha: cfg.schedule.alpha(k),
            beta: cfg.schedule.beta(k),
            residual: residual_norm,
            error_x,
            error_mid,
            gamma,
            cap_gamma,
            stage1,
            stage2,
        });

        if let Some(err) = error_x {
            let init = *initial_error.get_or_insert(err.max(1e-300));
            if err > 10.0 * init {
                let assemblies =
                    model.assembly_count().map(|a| a - assemblies_before.unwrap_or(0));
                return Err(RunError::Diverged {
                    step: k,
                    error: err,
                    initial: init,
                    output: RunOutput { records, final_iterate: x, k_star: None, assemblies },
                });
            }
        }

        if k == k_star {
            break;
        }

        let step = match cfg.method {
            Method::Halley => halley_step(&lin, &x, data, cfg, k)?,
            Method::Irgnm => irgnm_step(&lin, &x, data, cfg, k)?,
        };
        carried_mid = Some(step.x_mid);
        carried_diag = Some((step.stage1, step.stage2));
        x = step.x_next;
        k += 1;
    }

    let assemblies = model.assembly_count().map(|a| a - assemblies_before.unwrap_or(0));
    Ok(RunOutput {
        records,
        final_iterate: x,
        k_star: (cfg.delta > 0.0).then_some(k_star),
        assemblies,
    })
}
