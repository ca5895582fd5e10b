//! Coefficient-identification testbed: recover `c` in
//!
//! ```text
//! -Δu + Υ(c) u = f   in (0,1)^2,      u = g   on the boundary,
//! ```
//!
//! from observations `y = C u`. The clipped-quadratic potential law
//!
//! ```text
//! Υ(λ) = λ²/2              for |λ| <= c_bar,
//!        c_bar(2|λ| - c_bar)/2   otherwise,
//! ```
//!
//! is C^1 with bounded, piecewise-constant second derivative, and keeps the
//! reaction term Υ(c) nonnegative for every coefficient, so the 5-point
//! system matrix `A(c) = -Δ_h + diag(Υ(c))` is always symmetric positive
//! definite. One banded Cholesky factorization of `A(c)` per coefficient
//! serves the state solve and every first- and second-derivative solve at
//! that coefficient; the derivative problems differ only in their right-hand
//! sides.

mod band;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use band::{BandCholesky, BandMatrix};

use crate::banach::{lp_norm, GridFunction, Space};
use crate::iteration::{ForwardModel, Linearization};
use crate::linop::LinearMap;
use crate::{Error, Result};

/// The clipped-quadratic potential law with threshold `c_bar`.
#[derive(Clone, Copy, Debug)]
pub struct PotentialLaw {
    c_bar: f64,
}

impl PotentialLaw {
    pub fn new(c_bar: f64) -> Result<PotentialLaw> {
        if !(c_bar > 0.0) || !c_bar.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "clipping threshold must be positive, got {c_bar}"
            )));
        }
        Ok(PotentialLaw { c_bar })
    }

    pub fn c_bar(&self) -> f64 {
        self.c_bar
    }

    /// `Υ(λ) >= 0`: quadratic inside `[-c_bar, c_bar]`, affine outside,
    /// joined C^1.
    pub fn upsilon(&self, lambda: f64) -> f64 {
        if lambda.abs() <= self.c_bar {
            0.5 * lambda * lambda
        } else {
            0.5 * self.c_bar * (2.0 * lambda.abs() - self.c_bar)
        }
    }

    /// `Υ'(λ) = clamp(λ, -c_bar, c_bar)`.
    pub fn upsilon_prime(&self, lambda: f64) -> f64 {
        lambda.clamp(-self.c_bar, self.c_bar)
    }

    /// `Υ''(λ)`: 1 strictly inside the clip interval, 0 outside and at the
    /// junction.
    pub fn upsilon_double_prime(&self, lambda: f64) -> f64 {
        if lambda.abs() < self.c_bar {
            1.0
        } else {
            0.0
        }
    }
}

/// Observation operator `C`: everything, or a fixed subset of interior nodes.
#[derive(Clone, Debug)]
pub enum Observation {
    FullInterior,
    /// Strictly increasing interior node indices.
    Mask(Vec<usize>),
}

impl Observation {
    fn range_space(&self, domain: Space) -> Space {
        match self {
            Observation::FullInterior => domain,
            Observation::Mask(idx) => Space::flat(idx.len(), domain.weight()),
        }
    }

    fn validate(&self, domain: Space) -> Result<()> {
        if let Observation::Mask(idx) = self {
            if idx.is_empty() {
                return Err(Error::InvalidArgument("observation mask is empty".into()));
            }
            if !idx.windows(2).all(|w| w[0] < w[1]) || *idx.last().unwrap() >= domain.len() {
                return Err(Error::InvalidArgument(
                    "observation mask must be strictly increasing and in range".into(),
                ));
            }
        }
        Ok(())
    }

    fn apply(&self, u: &GridFunction, range: Space) -> GridFunction {
        match self {
            Observation::FullInterior => u.clone(),
            Observation::Mask(idx) => {
                GridFunction::new(range, idx.iter().map(|&i| u.values()[i]).collect())
            }
        }
    }

    fn adjoint(&self, w: &GridFunction, domain: Space) -> GridFunction {
        match self {
            Observation::FullInterior => w.clone(),
            Observation::Mask(idx) => {
                let mut out = vec![0.0; domain.len()];
                for (slot, &i) in idx.iter().enumerate() {
                    out[i] = w.values()[slot];
                }
                GridFunction::new(domain, out)
            }
        }
    }

    /// `C` as a [`LinearMap`] (restriction / zero-fill extension pair).
    pub fn as_linear_map(&self, domain: Space) -> LinearMap {
        let range = self.range_space(domain);
        let fwd = self.clone();
        let adj = self.clone();
        LinearMap::new(
            domain,
            range,
            move |u| fwd.apply(u, range),
            move |w| adj.adjoint(w, domain),
        )
    }
}

/// Problem data: grid size, source, boundary value, potential law and
/// observation pattern. Counts every assembly/factorization it performs.
#[derive(Debug)]
pub struct PdeProblem {
    n: usize,
    f: GridFunction,
    g: f64,
    law: PotentialLaw,
    observation: Observation,
    assemblies: AtomicUsize,
}

impl PdeProblem {
    pub fn new(
        n: usize,
        f_const: f64,
        g_const: f64,
        law: PotentialLaw,
        observation: Observation,
    ) -> Result<PdeProblem> {
        let space = Space::grid(n);
        Self::with_source(n, GridFunction::constant(space, f_const), g_const, law, observation)
    }

    pub fn with_source(
        n: usize,
        f: GridFunction,
        g: f64,
        law: PotentialLaw,
        observation: Observation,
    ) -> Result<PdeProblem> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("need n >= 3 interior nodes, got {n}")));
        }
        if f.space() != Space::grid(n) {
            return Err(Error::InvalidArgument("source term lives off the interior grid".into()));
        }
        if !g.is_finite() {
            return Err(Error::InvalidArgument("boundary value must be finite".into()));
        }
        observation.validate(Space::grid(n))?;
        Ok(PdeProblem { n, f, g, law, observation, assemblies: AtomicUsize::new(0) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn law(&self) -> PotentialLaw {
        self.law
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    pub fn domain_space(&self) -> Space {
        Space::grid(self.n)
    }

    pub fn observation_space(&self) -> Space {
        self.observation.range_space(self.domain_space())
    }

    /// Number of assemble-and-factor calls performed so far.
    pub fn assembly_count(&self) -> usize {
        self.assemblies.load(Ordering::Relaxed)
    }

    /// Assemble `A(c) = -Δ_h + diag(Υ(c))`, factor it, and solve for the
    /// state `u` with the Dirichlet value folded into the right-hand side.
    pub fn assemble_and_factor(&self, c: &GridFunction) -> Result<Arc<FactorizedState>> {
        assert_eq!(c.space(), self.domain_space(), "coefficient lives off the interior grid");
        self.assemblies.fetch_add(1, Ordering::Relaxed);
        let n = self.n;
        let dim = n * n;
        let h = self.domain_space().mesh_width();
        let ih2 = 1.0 / (h * h);

        let mut a = BandMatrix::zeros(dim, n);
        let mut rhs = self.f.values().to_vec();
        for iy in 0..n {
            for ix in 0..n {
                let idx = iy * n + ix;
                let ups = self.law.upsilon(c.values()[idx]);
                debug_assert!(ups >= 0.0);
                a.set(idx, idx, 4.0 * ih2 + ups);
                if ix > 0 {
                    a.set(idx, idx - 1, -ih2);
                } else {
                    rhs[idx] += self.g * ih2;
                }
                if ix + 1 == n {
                    rhs[idx] += self.g * ih2;
                }
                if iy > 0 {
                    a.set(idx, idx - n, -ih2);
                } else {
                    rhs[idx] += self.g * ih2;
                }
                if iy + 1 == n {
                    rhs[idx] += self.g * ih2;
                }
            }
        }

        let factor = a
            .cholesky()
            .map_err(|e| Error::Numerical(format!("factorization of A(c) broke down: {e}")))?;
        let u_values = factor.solve(&rhs);
        let space = self.domain_space();
        let u = GridFunction::new(space, u_values);
        let rhs_gf = GridFunction::new(space, rhs);

        // The factored solve must reproduce the assembled system.
        let residual = GridFunction::new(space, a.matvec(u.values())).sub(&rhs_gf);
        let scale = lp_norm(&rhs_gf, 2.0).max(1e-300);
        let rel = lp_norm(&residual, 2.0) / scale;
        if rel > 1e-10 {
            return Err(Error::Numerical(format!(
                "state solve residual {rel:.3e} exceeds 1e-10 of the data scale"
            )));
        }

        let ups_prime = c.map(|v| self.law.upsilon_prime(v));
        let ups_double = c.map(|v| self.law.upsilon_double_prime(v));
        Ok(Arc::new(FactorizedState {
            c: c.clone(),
            u,
            ups_prime,
            ups_double,
            matrix: a,
            factor,
            residual: rel,
        }))
    }
}

/// Coefficient, cached state, potential derivatives and the reusable
/// factorization of `A(c)`. Immutable after construction; solves are
/// read-only and safe to share across threads.
pub struct FactorizedState {
    c: GridFunction,
    u: GridFunction,
    ups_prime: GridFunction,
    ups_double: GridFunction,
    matrix: BandMatrix,
    factor: BandCholesky,
    residual: f64,
}

impl FactorizedState {
    pub fn coefficient(&self) -> &GridFunction {
        &self.c
    }

    /// Relative residual of the cached state solve.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// The cached state `u = G(c)`.
    pub fn state(&self) -> &GridFunction {
        &self.u
    }

    /// `A(c)^{-1} rhs` with homogeneous Dirichlet data; `A(c)` is symmetric,
    /// so this doubles as the transpose solve.
    pub fn solve(&self, rhs: &GridFunction) -> GridFunction {
        assert_eq!(rhs.space(), self.c.space());
        GridFunction::new(rhs.space(), self.factor.solve(rhs.values()))
    }

    /// Apply `A(c)` (for residual checks).
    pub fn apply_matrix(&self, v: &GridFunction) -> GridFunction {
        GridFunction::new(v.space(), self.matrix.matvec(v.values()))
    }

    /// Directional derivative of the parameter-to-state map:
    /// `v1 = A(c)^{-1}( -Υ'(c) · direction · u )`, reusing the factorization.
    pub fn solve_first(&self, direction: &GridFunction) -> GridFunction {
        let rhs = self.ups_prime.hadamard(direction).hadamard(&self.u).scale(-1.0);
        self.solve(&rhs)
    }

    /// Second directional derivative
    /// `v2 = A(c)^{-1}( -Υ'(c) h v1_l - Υ'(c) l v1_h - Υ''(c) h l u )`,
    /// symmetric in the two directions.
    pub fn solve_second(
        &self,
        dir_h: &GridFunction,
        dir_l: &GridFunction,
        v1_h: &GridFunction,
        v1_l: &GridFunction,
    ) -> GridFunction {
        let rhs = self
            .ups_prime
            .hadamard(&dir_h.hadamard(v1_l).add(&dir_l.hadamard(v1_h)))
            .add(&self.ups_double.hadamard(&dir_h.hadamard(dir_l)).hadamard(&self.u))
            .scale(-1.0);
        self.solve(&rhs)
    }
}

/// `T = C G'(c)` as a matrix-free operator; the adjoint uses the symmetry
/// of `A(c)`:
///
/// ```text
/// T h  = C A^{-1} ( m · h ),        T* w = m · A^{-1} (C* w),
/// ```
///
/// with multiplier `m = -Υ'(c) u`.
pub fn derivative_map(state: &Arc<FactorizedState>, observation: &Observation) -> LinearMap {
    let domain = state.c.space();
    let range = observation.range_space(domain);
    let mult = state.ups_prime.hadamard(&state.u).scale(-1.0);
    let st_f = Arc::clone(state);
    let st_a = Arc::clone(state);
    let obs_f = observation.clone();
    let obs_a = observation.clone();
    let mult_a = mult.clone();
    LinearMap::new(
        domain,
        range,
        move |h| obs_f.apply(&st_f.solve(&mult.hadamard(h)), range),
        move |w| mult_a.hadamard(&st_a.solve(&obs_a.adjoint(w, domain))),
    )
}

/// The second-derivative map `h -> C G''(c)(d, h)` curried with a fixed
/// first direction `d`; every application reuses the factorization of
/// `A(c)` (two solves per apply).
pub fn second_directional_map(
    state: &Arc<FactorizedState>,
    fixed: &GridFunction,
    observation: &Observation,
) -> LinearMap {
    let domain = state.c.space();
    let range = observation.range_space(domain);
    let v1_fixed = state.solve_first(fixed);
    // B_d h = diag_a h + diag_b A^{-1} (diag_m h) with the diagonals below;
    // the adjoint swaps diag_b and diag_m around the symmetric solve.
    let diag_a = state
        .ups_prime
        .hadamard(&v1_fixed)
        .add(&state.ups_double.hadamard(fixed).hadamard(&state.u))
        .scale(-1.0);
    let diag_b = state.ups_prime.hadamard(fixed).scale(-1.0);
    let diag_m = state.ups_prime.hadamard(&state.u).scale(-1.0);
    let st_f = Arc::clone(state);
    let st_a = Arc::clone(state);
    let obs_f = observation.clone();
    let obs_a = observation.clone();
    let (a_f, b_f, m_f) = (diag_a.clone(), diag_b.clone(), diag_m.clone());
    LinearMap::new(
        domain,
        range,
        move |h| {
            let inner = st_f.solve(&m_f.hadamard(h));
            let rhs = a_f.hadamard(h).add(&b_f.hadamard(&inner));
            obs_f.apply(&st_f.solve(&rhs), range)
        },
        move |w| {
            let z = st_a.solve(&obs_a.adjoint(w, domain));
            let inner = st_a.solve(&diag_b.hadamard(&z));
            diag_a.hadamard(&z).add(&diag_m.hadamard(&inner))
        },
    )
}

/// The benchmark coefficient: a cosine bump of amplitude `10 xi` supported
/// on the open lower-left quadrant, on top of the constant background 1.
pub fn coscos_coefficient(n: usize, xi: f64) -> GridFunction {
    let space = Space::grid(n);
    GridFunction::from_fn(space, |x1, x2| {
        if x1 < 0.5 && x2 < 0.5 {
            1.0 + 2.5
                * xi
                * (1.0 - (4.0 * std::f64::consts::PI * x1).cos())
                * (1.0 - (4.0 * std::f64::consts::PI * x2).cos())
        } else {
            1.0
        }
    })
}

/// The testbed as a forward model for the outer iteration: `F = C ∘ G`.
pub struct EllipticModel {
    problem: PdeProblem,
}

impl EllipticModel {
    pub fn new(problem: PdeProblem) -> EllipticModel {
        EllipticModel { problem }
    }

    pub fn problem(&self) -> &PdeProblem {
        &self.problem
    }

    /// Exact observation data for a given coefficient (one assembly).
    pub fn observe(&self, c: &GridFunction) -> Result<GridFunction> {
        let state = self.problem.assemble_and_factor(c)?;
        let obs = self.problem.observation();
        Ok(obs.apply(state.state(), self.problem.observation_space()))
    }
}

impl ForwardModel for EllipticModel {
    fn domain(&self) -> Space {
        self.problem.domain_space()
    }

    fn range(&self) -> Space {
        self.problem.observation_space()
    }

    fn linearize(&self, x: &GridFunction) -> Result<Linearization> {
        let state = self.problem.assemble_and_factor(x)?;
        let obs = self.problem.observation();
        let value = obs.apply(state.state(), self.problem.observation_space());
        let derivative = derivative_map(&state, obs);
        let obs2 = obs.clone();
        let second = Box::new(move |fixed: &GridFunction| {
            second_directional_map(&state, fixed, &obs2)
        });
        Ok(Linearization { value, derivative, second: Some(second) })
    }

    fn assembly_count(&self) -> Option<usize> {
        Some(self.problem.assembly_count())
    }
}
