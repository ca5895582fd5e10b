//! Executable numerical certificates for the convergence analysis: the
//! superlinear error recursion and its doubly-exponential envelope, the
//! bounding implication for normalized error pairs, and the convergence
//! order formulas.

use serde::Serialize;

use crate::iteration::Method;
use crate::{Error, Result};

/// Parameters of the error majorant recursion
/// `mu_{k+1} = C_hat (mu_k^sigma + delta^{1/p})`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RecursionParams {
    pub c_hat: f64,
    pub sigma: f64,
    pub p: f64,
    pub delta: f64,
    pub mu0: f64,
    /// Ceiling the certified sequence must stay under; in `(0, 1]`.
    pub mu_bar: f64,
}

impl RecursionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_hat > 0.0) {
            return Err(Error::InvalidArgument("C_hat must be positive".into()));
        }
        if !(self.sigma > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must exceed 1, got {}",
                self.sigma
            )));
        }
        if !(1.0..2.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!("p must lie in [1, 2), got {}", self.p)));
        }
        if !(self.delta >= 0.0) || !(self.mu0 >= 0.0) {
            return Err(Error::InvalidArgument("delta and mu0 must be nonnegative".into()));
        }
        if !(self.mu_bar > 0.0 && self.mu_bar <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mu_bar must lie in (0, 1], got {}",
                self.mu_bar
            )));
        }
        Ok(())
    }
}

/// Truncated evaluation of `C(sigma) = sum_{m>=0} 2^{-sigma^m + 1}` with a
/// certified tail bound below `tol`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CSigma {
    pub value: f64,
    /// Number of series terms summed.
    pub terms: usize,
    pub tail_bound: f64,
}

/// Sum the series until the remaining tail provably drops below `tol`.
///
/// Successive terms satisfy `t_{m+1}/t_m = 2^{-sigma^m (sigma - 1)}`, which
/// is decreasing, so past index `m` the tail is dominated by the geometric
/// series with that ratio.
pub fn c_sigma(sigma: f64, tol: f64) -> Result<CSigma> {
    if !(sigma > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "the series diverges for sigma <= 1, got {sigma}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let mut value = 0.0;
    let mut sigma_pow = 1.0f64; // sigma^m
    for m in 0..10_000usize {
        let term = 2f64.powf(-sigma_pow + 1.0);
        value += term;
        let ratio = 2f64.powf(-sigma_pow * (sigma - 1.0));
        let tail = term * ratio / (1.0 - ratio);
        if tail < tol {
            return Ok(CSigma { value, terms: m + 1, tail_bound: tail });
        }
        sigma_pow *= sigma;
    }
    Err(Error::Numerical(format!("series for sigma = {sigma} did not settle below {tol}")))
}

/// Run the recursion for `k_max` steps, returning `mu_0 ..= mu_{k_max}`.
pub fn mu_recursion(params: &RecursionParams, k_max: usize) -> Result<Vec<f64>> {
    params.validate()?;
    let noise = params.delta.powf(1.0 / params.p);
    let mut mu = Vec::with_capacity(k_max + 1);
    mu.push(params.mu0);
    for k in 0..k_max {
        let next = params.c_hat * (mu[k].powf(params.sigma) + noise);
        if !next.is_finite() {
            return Err(Error::Numerical(format!("recursion overflowed at index {}", k + 1)));
        }
        mu.push(next);
    }
    Ok(mu)
}

/// Admissibility thresholds for the recursion certificate.
///
/// Inputs obeying `mu0 <= mu0_max` and `delta <= delta_max` provably keep
/// the recursion under the certified envelope; violating them is a rejected
/// input, not a certificate failure.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RecursionThresholds {
    pub mu0_max: f64,
    pub delta_max: f64,
}

pub fn recursion_thresholds(c_hat: f64, sigma: f64, p: f64, mu_bar: f64) -> RecursionThresholds {
    let mu0_max = 0.5 * mu_bar * (2.0 * c_hat).powf(-1.0 / (sigma - 1.0));
    let c1 = c_hat.max(1.0);
    let cs = c_sigma(sigma, 1e-12).expect("sigma > 1").value;
    // Both components bound delta^{1/p}; raise to p for the delta threshold.
    let from_ceiling = mu_bar * (1.0 - 2f64.powf(-sigma)) / (c1 * cs);
    let from_contraction = 0.5 * (2.0 * c_hat).powf(-sigma / (sigma - 1.0));
    RecursionThresholds { mu0_max, delta_max: from_ceiling.min(from_contraction).powf(p) }
}

/// Outcome of the recursion certificate.
#[derive(Clone, Debug, Serialize)]
pub struct RecursionCertificate {
    pub params: RecursionParams,
    pub pass: bool,
    /// Smallest slack `bound_k - mu_k` over the checked range; nonnegative
    /// iff the certificate passes.
    pub worst_margin: f64,
    pub worst_index: usize,
    pub mu: Vec<f64>,
    pub envelope: Vec<f64>,
}

/// Certify that every recursion value `mu_{k+1}`, `k < k_max`, stays under
///
/// ```text
/// 2^{-sigma^{k+1}}  +  max(C_hat, 1) C(sigma) delta^{1/p}
/// ```
///
/// and under `mu_bar`, given admissible `(mu0, delta)`.
///
/// The envelope scales the series constant by `max(C_hat, 1)`: the recursion
/// contributes `C_hat delta^{1/p}` per step, so no envelope with an
/// unscaled constant can hold once `C_hat` exceeds `C(sigma)`, while the
/// scaled form is provable for every admissible parameter set (and
/// coincides with the unscaled one for `C_hat <= 1`).
pub fn recursion_certificate(
    params: &RecursionParams,
    k_max: usize,
) -> Result<RecursionCertificate> {
    params.validate()?;
    if params.c_hat < 2f64.powf(-params.sigma) {
        return Err(Error::InvalidArgument(format!(
            "certificate needs C_hat >= 2^-sigma = {:.3e}, got {}",
            2f64.powf(-params.sigma),
            params.c_hat
        )));
    }
    let thresholds = recursion_thresholds(params.c_hat, params.sigma, params.p, params.mu_bar);
    if params.mu0 > thresholds.mu0_max * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "mu0 = {} exceeds the admissible {:.6e}",
            params.mu0, thresholds.mu0_max
        )));
    }
    if params.delta > thresholds.delta_max * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "delta = {} exceeds the admissible {:.6e}",
            params.delta, thresholds.delta_max
        )));
    }

    let mu = mu_recursion(params, k_max)?;
    let cs = c_sigma(params.sigma, 1e-12)?.value;
    let noise_term = params.c_hat.max(1.0) * cs * params.delta.powf(1.0 / params.p);
    let mut envelope = vec![f64::NAN; k_max + 1];
    let mut worst: (f64, usize) = (f64::INFINITY, 0);
    for k in 1..=k_max {
        let bound = 2f64.powf(-params.sigma.powi(k as i32)) + noise_term;
        envelope[k] = bound;
        let margin = (bound - mu[k]).min(params.mu_bar - mu[k]);
        if margin < worst.0 {
            worst = (margin, k);
        }
    }
    Ok(RecursionCertificate {
        params: *params,
        pass: worst.0 >= 0.0,
        worst_margin: worst.0,
        worst_index: worst.1,
        mu,
        envelope,
    })
}

/// Nonnegative coefficients of the two bounding functionals
///
/// ```text
/// phi(g, G)    = a + b g^{2r} + c g^r G^r
/// PHI(g, x, G) = d + e g^{3r} + f g^r G^r + (h g^{2r} + i g^r + j G^r) x^r
/// ```
///
/// for exponents `r <= p <= 2r`.
#[derive(Clone, Copy, Debug, Serialize)]
#[allow(clippy::too_many_arguments)]
pub struct ImplicationCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
    pub h: f64,
    pub i: f64,
    pub j: f64,
    pub p: f64,
    pub r: f64,
}

impl ImplicationCoefficients {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.d, self.e, self.f, self.h, self.i, self.j];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("coefficients must be nonnegative".into()));
        }
        if !(self.r <= self.p && self.p <= 2.0 * self.r && self.r >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "exponents must satisfy 1 <= r <= p <= 2r, got (p, r) = ({}, {})",
                self.p, self.r
            )));
        }
        Ok(())
    }

    fn phi(&self, gamma_bar: f64, cap: f64) -> f64 {
        let r = self.r;
        self.a + self.b * gamma_bar.powf(2.0 * r) + self.c * gamma_bar.powf(r) * cap.powf(r)
    }

    fn phi_cap(&self, gamma_bar: f64, gamma: f64, cap: f64) -> f64 {
        let r = self.r;
        self.d
            + self.e * gamma_bar.powf(3.0 * r)
            + self.f * gamma_bar.powf(r) * cap.powf(r)
            + (self.h * gamma_bar.powf(2.0 * r)
                + self.i * gamma_bar.powf(r)
                + self.j * cap.powf(r))
                * gamma.powf(r)
    }
}

/// Outcome of the implication certificate; `witness` is the first grid pair
/// violating the implication, if any.
#[derive(Clone, Debug, Serialize)]
pub struct ImplicationCertificate {
    pub pass: bool,
    pub witness: Option<(f64, f64)>,
    pub qualifying: usize,
    pub checked: usize,
}

/// Check over a logarithmic grid of pairs `(gamma, Gamma)` in
/// `(0, 10 max(gamma_bar, Gamma_bar)]^2` that the self-bounding system
///
/// ```text
/// Gamma^p <= phi(gamma_bar, Gamma)   and   gamma^p <= PHI(gamma_bar, gamma, Gamma)
/// ```
///
/// only admits pairs with `Gamma <= Gamma_bar` and `gamma <= gamma_bar`.
/// Failure is a legitimate outcome for inadmissible coefficients.
pub fn implication_certificate(
    coef: &ImplicationCoefficients,
    gamma_bar: f64,
    cap_gamma_bar: f64,
    grid_points: usize,
) -> Result<ImplicationCertificate> {
    coef.validate()?;
    if !(gamma_bar > 0.0 && cap_gamma_bar > 0.0) {
        return Err(Error::InvalidArgument("bounds must be positive".into()));
    }
    if grid_points < 100 {
        return Err(Error::InvalidArgument("need at least 100 grid points".into()));
    }
    let hi = 10.0 * gamma_bar.max(cap_gamma_bar);
    let lo = 1e-8 * hi;
    let ratio = (hi / lo).powf(1.0 / (grid_points as f64 - 1.0));
    let axis: Vec<f64> = (0..grid_points).map(|i| lo * ratio.powi(i as i32)).collect();

    let mut qualifying = 0usize;
    let mut checked = 0usize;
    for &cap in &axis {
        for &gamma in &axis {
            checked += 1;
            let bounded_cap = cap.powf(coef.p) <= coef.phi(gamma_bar, cap);
            let bounded_gamma = gamma.powf(coef.p) <= coef.phi_cap(gamma_bar, gamma, cap);
            if bounded_cap && bounded_gamma {
                qualifying += 1;
                if cap > cap_gamma_bar || gamma > gamma_bar {
                    return Ok(ImplicationCertificate {
                        pass: false,
                        witness: Some((gamma, cap)),
                        qualifying,
                        checked,
                    });
                }
            }
        }
    }
    Ok(ImplicationCertificate { pass: true, witness: None, qualifying, checked })
}

/// Convergence order of the exact-data iteration in the one-homogeneous
/// misfit regime: `(p + 2)/p^2` for the two-stage method, `2/p` for the
/// first-order method; both exceed 1 exactly for `p < 2`.
///
/// The two-stage value is also evaluated through its equivalent
/// min-expression over the conjugate exponent (for `p > 1`) and the two
/// routes are required to agree.
pub fn sigma_formula(p: f64, method: Method) -> Result<f64> {
    if !(1.0..2.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "convergence orders require p in [1, 2), got {p}"
        )));
    }
    match method {
        Method::Irgnm => Ok(2.0 / p),
        Method::Halley => {
            let closed = (p + 2.0) / (p * p);
            if p > 1.0 {
                let pc = p / (p - 1.0);
                let candidates =
                    [2.0 * pc, pc, pc * pc, 3.0, 1.0 + pc / p, 1.0 + 2.0 / p];
                let min_expr = candidates.iter().cloned().fold(f64::INFINITY, f64::min) / p;
                assert!(
                    (min_expr - closed).abs() <= 1e-12 * closed,
                    "order routes disagree at p = {p}: {min_expr} vs {closed}"
                );
            }
            Ok(closed)
        }
    }
}
