//! Discrete L^p primitives: weighted grid functions, norms, duality
//! mappings, shifted Bregman distances and the coercivity margin.
//!
//! A [`GridFunction`] stores real values on the interior nodes of a uniform
//! grid over the unit square (mesh width `h = 1/(n+1)`, quadrature weight
//! `h^2` per node), or on a flat index set for toy and masked-data vectors.
//! All norms and pairings are weighted:
//!
//! ```text
//! ||v||_p = (sum_i w |v_i|^p)^(1/p),      <a, b> = sum_i w a_i b_i .
//! ```

use serde::Serialize;

use crate::{Error, Result};

/// Shape and quadrature weight of the index set a [`GridFunction`] lives on.
///
/// `side > 0` marks values laid out row-major over the `side x side` interior
/// nodes of a uniform grid; `side == 0` marks a flat vector (scalar toys,
/// masked observations).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Space {
    side: usize,
    len: usize,
    weight: f64,
}

impl Space {
    /// Interior of the uniform grid on the unit square with `n` nodes per
    /// axis; the quadrature weight is `h^2` for `h = 1/(n+1)`.
    pub fn grid(n: usize) -> Space {
        assert!(n >= 1, "grid needs at least one interior node per axis");
        let h = 1.0 / (n as f64 + 1.0);
        Space { side: n, len: n * n, weight: h * h }
    }

    /// Flat index set with an explicit per-node weight.
    pub fn flat(len: usize, weight: f64) -> Space {
        assert!(weight > 0.0, "quadrature weight must be positive");
        Space { side: 0, len, weight }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Nodes per axis for grid spaces, 0 for flat vectors.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Mesh width `1/(n+1)` of a grid space.
    pub fn mesh_width(&self) -> f64 {
        assert!(self.side > 0, "mesh width is defined for grid spaces only");
        1.0 / (self.side as f64 + 1.0)
    }

    /// Coordinates of the interior node with row-major index `idx`.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let h = self.mesh_width();
        let iy = idx / self.side;
        let ix = idx % self.side;
        ((ix as f64 + 1.0) * h, (iy as f64 + 1.0) * h)
    }
}

/// Real values on a weighted index set; the discrete stand-in for elements
/// of the solution space X and the data space Y.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    space: Space,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(space: Space, values: Vec<f64>) -> GridFunction {
        assert_eq!(values.len(), space.len(), "value count must match the space");
        assert!(values.iter().all(|v| v.is_finite()), "grid function values must be finite");
        GridFunction { space, values }
    }

    /// Flat vector with weight 1 per node; the usual carrier for scalar
    /// and small hand-computed instances.
    pub fn toy(values: &[f64]) -> GridFunction {
        GridFunction::new(Space::flat(values.len(), 1.0), values.to_vec())
    }

    pub fn zeros(space: Space) -> GridFunction {
        GridFunction { space, values: vec![0.0; space.len()] }
    }

    pub fn constant(space: Space, value: f64) -> GridFunction {
        assert!(value.is_finite());
        GridFunction { space, values: vec![value; space.len()] }
    }

    /// Evaluate `f(x, y)` at every interior node of a grid space.
    pub fn from_fn(space: Space, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let values = (0..space.len())
            .map(|i| {
                let (x, y) = space.coords(i);
                f(x, y)
            })
            .collect();
        GridFunction::new(space, values)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weight(&self) -> f64 {
        self.space.weight
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn assert_compatible(&self, other: &GridFunction) {
        assert_eq!(self.space, other.space, "grid functions live on different spaces");
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        self.assert_compatible(other);
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.assert_compatible(other);
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, t: f64) -> GridFunction {
        self.map(|v| t * v)
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &GridFunction) -> GridFunction {
        self.assert_compatible(other);
        self.zip(other, |a, b| a + t * b)
    }

    /// Pointwise (Hadamard) product.
    pub fn hadamard(&self, other: &GridFunction) -> GridFunction {
        self.assert_compatible(other);
        self.zip(other, |a, b| a * b)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction { space: self.space, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    fn zip(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let values =
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        GridFunction { space: self.space, values }
    }

    /// Weighted pairing `sum_i w a_i b_i`.
    pub fn pairing(&self, other: &GridFunction) -> f64 {
        self.assert_compatible(other);
        self.space.weight
            * self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Weighted L^p norm `(sum_i w |v_i|^p)^(1/p)`.
///
/// Panics for `p < 1` (not a norm).
pub fn lp_norm(v: &GridFunction, p: f64) -> f64 {
    lp_pow(v, p).powf(1.0 / p)
}

/// The p-th power sum `sum_i w |v_i|^p = ||v||_p^p`.
pub fn lp_pow(v: &GridFunction, p: f64) -> f64 {
    assert!(p >= 1.0, "L^p quantities require p >= 1, got {p}");
    let s: f64 = if p == 2.0 {
        v.values().iter().map(|&x| x * x).sum()
    } else if p == 1.0 {
        v.values().iter().map(|&x| x.abs()).sum()
    } else {
        v.values().iter().map(|&x| x.abs().powf(p)).sum()
    };
    v.weight() * s
}

/// Duality mapping `J_p(v)_i = |v_i|^{p-1} sign(v_i)` with `sign(0) = 0`.
///
/// This is the gradient of `(1/p) ||.||_p^p` with respect to the weighted
/// pairing, so `<J_p(v), v> = ||v||_p^p`. For `p = 1` the pointwise sign is a
/// single-valued selection from the subdifferential. Panics for `p < 1`.
pub fn duality_map(v: &GridFunction, p: f64) -> GridFunction {
    assert!(p >= 1.0, "duality map requires p >= 1, got {p}");
    if p == 2.0 {
        return v.clone();
    }
    v.map(|x| {
        if x == 0.0 {
            0.0
        } else if p == 1.0 {
            x.signum()
        } else {
            x.abs().powf(p - 1.0) * x.signum()
        }
    })
}

/// Pointwise inverse of the duality mapping, `|t|^{1/(p-1)} sign(t)`.
///
/// Undefined for `p = 1` where `J_1` is not injective.
pub fn duality_map_inverse(v: &GridFunction, p: f64) -> Result<GridFunction> {
    if p <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "inverse duality map needs p > 1, got {p}"
        )));
    }
    if p == 2.0 {
        return Ok(v.clone());
    }
    let e = 1.0 / (p - 1.0);
    Ok(v.map(|x| if x == 0.0 { 0.0 } else { x.abs().powf(e) * x.signum() }))
}

/// Shifted Bregman distance of the penalty `(1/p) ||. - x0||_p^p` between
/// `x_tilde` and `x`, with the subgradient taken at `x_tilde`:
///
/// ```text
/// D(x_tilde, x) = (1/p)||x - x0||_p^p - (1/p)||x_tilde - x0||_p^p
///                 - <J_p(x_tilde - x0), x - x_tilde> .
/// ```
///
/// Nonnegative by convexity; roundoff-level negatives are clamped to zero.
pub fn bregman_shifted(
    x_tilde: &GridFunction,
    x: &GridFunction,
    x0: &GridFunction,
    p: f64,
) -> f64 {
    let xi = duality_map(&x_tilde.sub(x0), p);
    let d = lp_pow(&x.sub(x0), p) / p - lp_pow(&x_tilde.sub(x0), p) / p
        - xi.pairing(&x.sub(x_tilde));
    d.max(0.0)
}

/// Empirical coercivity sample `D(x_tilde, x) / ||x_tilde - x||_p^p`, with a
/// `+inf` sentinel when `x_tilde = x`.
///
/// For `p = 2` this equals 1/2 identically; for `p` in `(1, 2)` the minimum
/// over random ensembles estimates the constant bounding the Bregman
/// distance from below by the p-th power of the norm.
pub fn coercivity_margin(
    x_tilde: &GridFunction,
    x: &GridFunction,
    x0: &GridFunction,
    p: f64,
) -> f64 {
    let denom = lp_pow(&x_tilde.sub(x), p);
    if denom == 0.0 {
        return f64::INFINITY;
    }
    bregman_shifted(x_tilde, x, x0, p) / denom
}

/// Theorem-regime classification of an exponent pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `1 < r <= p < 2r`, `1 <= p <= 2`: geometric parameter decay with the
    /// a-priori stop on `alpha_k^{1/(r-1)}`.
    RateRgt1,
    /// `r = 1`, `1 <= p < 2`: one-homogeneous misfit (exact penalization),
    /// constant regularization parameters.
    ExactPenalty,
}

/// Misfit/penalty exponent pair `(p, r)` with conjugates and regime tag.
///
/// Conjugate exponents of 1 are stored as `f64::INFINITY`; every formula with
/// an `r = 1` or `p = 1` branch is implemented by a case split and never
/// feeds the sentinel into arithmetic.
#[derive(Clone, Copy, Debug)]
pub struct ExponentConfig {
    p: f64,
    r: f64,
    p_conj: f64,
    r_conj: f64,
    regime: Option<Regime>,
}

fn conjugate(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else {
        q / (q - 1.0)
    }
}

impl ExponentConfig {
    /// Exponent pair restricted to the regimes covered by the convergence
    /// theory; pairs in neither regime are rejected.
    pub fn theorem(p: f64, r: f64) -> Result<ExponentConfig> {
        let cfg = ExponentConfig::general(p, r)?;
        if cfg.regime.is_none() {
            return Err(Error::InvalidExponents(format!(
                "(p, r) = ({p}, {r}) lies in neither rate regime: \
                 need 1 < r <= p < 2r with p <= 2, or r = 1 with 1 <= p < 2"
            )));
        }
        Ok(cfg)
    }

    /// Any convex pair with `1 <= r <= p <= 2`; the regime tag is `None`
    /// outside theorem coverage. Subproblems remain well defined for all
    /// such pairs.
    pub fn general(p: f64, r: f64) -> Result<ExponentConfig> {
        if !(1.0..=2.0).contains(&p) || !p.is_finite() {
            return Err(Error::InvalidExponents(format!("p must lie in [1, 2], got {p}")));
        }
        if !(1.0..=p).contains(&r) || !r.is_finite() {
            return Err(Error::InvalidExponents(format!(
                "r must lie in [1, p] = [1, {p}], got {r}"
            )));
        }
        Ok(ExponentConfig {
            p,
            r,
            p_conj: conjugate(p),
            r_conj: conjugate(r),
            regime: Self::classify(p, r),
        })
    }

    fn classify(p: f64, r: f64) -> Option<Regime> {
        if r > 1.0 && r <= p && p < 2.0 * r && (1.0..=2.0).contains(&p) {
            Some(Regime::RateRgt1)
        } else if r == 1.0 && (1.0..2.0).contains(&p) {
            Some(Regime::ExactPenalty)
        } else {
            None
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn p_conj(&self) -> f64 {
        self.p_conj
    }

    pub fn r_conj(&self) -> f64 {
        self.r_conj
    }

    pub fn regime(&self) -> Option<Regime> {
        self.regime
    }
}
