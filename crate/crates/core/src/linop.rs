//! Matrix-free linear operators with explicit adjoints.
//!
//! Operators are closures over whatever factorized state they need, never
//! dense matrices: one PDE factorization built at an outer iterate serves
//! every application of the derivative, its adjoint, and the
//! second-derivative correction within that iterate. Adjoints are taken with
//! respect to the weighted pairings of the domain and range spaces, and every
//! operator handed to the solvers is expected to pass [`dot_product_test`].

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::banach::{lp_norm, GridFunction, Space};

type ApplyFn = dyn Fn(&GridFunction) -> GridFunction + Send + Sync;

/// A linear operator between two weighted spaces, given by its action and
/// the action of its adjoint.
#[derive(Clone)]
pub struct LinearMap {
    domain: Space,
    range: Space,
    forward: Arc<ApplyFn>,
    adjoint: Arc<ApplyFn>,
}

impl LinearMap {
    pub fn new(
        domain: Space,
        range: Space,
        forward: impl Fn(&GridFunction) -> GridFunction + Send + Sync + 'static,
        adjoint: impl Fn(&GridFunction) -> GridFunction + Send + Sync + 'static,
    ) -> LinearMap {
        LinearMap { domain, range, forward: Arc::new(forward), adjoint: Arc::new(adjoint) }
    }

    pub fn identity(space: Space) -> LinearMap {
        LinearMap::new(space, space, GridFunction::clone, GridFunction::clone)
    }

    /// Pointwise multiplication by `diag`; self-adjoint since domain and
    /// range share the weight.
    pub fn diagonal(diag: GridFunction) -> LinearMap {
        let space = diag.space();
        let d2 = diag.clone();
        LinearMap::new(space, space, move |v| v.hadamard(&diag), move |v| v.hadamard(&d2))
    }

    pub fn domain(&self) -> Space {
        self.domain
    }

    pub fn range(&self) -> Space {
        self.range
    }

    pub fn domain_dim(&self) -> usize {
        self.domain.len()
    }

    pub fn range_dim(&self) -> usize {
        self.range.len()
    }

    pub fn apply(&self, v: &GridFunction) -> GridFunction {
        assert_eq!(v.space(), self.domain, "operator applied off its domain");
        let out = (self.forward)(v);
        assert_eq!(out.space(), self.range, "operator produced values off its range");
        out
    }

    pub fn adjoint_apply(&self, w: &GridFunction) -> GridFunction {
        assert_eq!(w.space(), self.range, "adjoint applied off the range");
        let out = (self.adjoint)(w);
        assert_eq!(out.space(), self.domain, "adjoint produced values off the domain");
        out
    }
}

/// Second-stage operator `S = T + (1/2) B` from the derivative `T` and the
/// second-derivative map `B` already curried with the fixed first direction.
///
/// `second_directional` must map a domain increment `h` to
/// `F''(x_k)(x_mid - x_k, h)` in the range space; its adjoint is combined
/// accordingly.
pub fn compose_halley_operator(
    derivative: &LinearMap,
    second_directional: &LinearMap,
) -> LinearMap {
    assert_eq!(derivative.domain(), second_directional.domain(), "domain mismatch");
    assert_eq!(derivative.range(), second_directional.range(), "range mismatch");
    let t = derivative.clone();
    let t_adj = derivative.clone();
    let b = second_directional.clone();
    let b_adj = second_directional.clone();
    LinearMap::new(
        derivative.domain(),
        derivative.range(),
        move |h| t.apply(h).axpy(0.5, &b.apply(h)),
        move |w| t_adj.adjoint_apply(w).axpy(0.5, &b_adj.adjoint_apply(w)),
    )
}

/// Randomized adjoint consistency check: the maximum over seeded probe pairs
/// `(u, w)` of
///
/// ```text
/// |<M u, w> - <u, M* w>| / (||M u||_2 ||w||_2 + eps_machine) .
/// ```
pub fn dot_product_test(map: &LinearMap, trials: usize, seed: u64) -> f64 {
    assert!(trials >= 1, "at least one probe pair is required");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let u = random_probe(map.domain(), &mut rng);
        let w = random_probe(map.range(), &mut rng);
        let mu = map.apply(&u);
        let lhs = mu.pairing(&w);
        let rhs = u.pairing(&map.adjoint_apply(&w));
        let scale = lp_norm(&mu, 2.0) * lp_norm(&w, 2.0) + f64::EPSILON;
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    worst
}

fn random_probe(space: Space, rng: &mut ChaCha8Rng) -> GridFunction {
    GridFunction::new(space, (0..space.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_passes_dot_product_test_exactly() {
        let map = LinearMap::identity(Space::grid(4));
        assert_eq!(dot_product_test(&map, 25, 0), 0.0);
    }

    #[test]
    fn diagonal_map_is_self_adjoint() {
        let diag = GridFunction::toy(&[1.0, -2.0, 0.5, 3.0]);
        let map = LinearMap::diagonal(diag);
        assert!(dot_product_test(&map, 100, 1) <= 1e-12);
    }

    #[test]
    fn wrong_adjoint_is_detected() {
        // A shift map used as its own adjoint: genuinely non-symmetric.
        let space = Space::flat(4, 1.0);
        let shift = |v: &GridFunction| {
            let mut out = vec![0.0; 4];
            for i in 1..4 {
                out[i] = v.values()[i - 1];
            }
            GridFunction::new(v.space(), out)
        };
        let map = LinearMap::new(space, space, shift, shift);
        assert!(dot_product_test(&map, 100, 2) > 1e-3);
    }

    #[test]
    fn linearity_on_random_probes() {
        let diag = GridFunction::toy(&[0.3, -1.7, 2.4]);
        let map = LinearMap::diagonal(diag);
        let u = GridFunction::toy(&[1.0, 2.0, -0.5]);
        let v = GridFunction::toy(&[-0.25, 0.75, 4.0]);
        let lhs = map.apply(&u.scale(2.0).axpy(-3.0, &v));
        let rhs = map.apply(&u).scale(2.0).axpy(-3.0, &map.apply(&v));
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
    }

    #[test]
    fn vanishing_second_derivative_reduces_to_the_derivative() {
        let t = LinearMap::diagonal(GridFunction::toy(&[2.0, -1.0, 0.5]));
        let zero = LinearMap::diagonal(GridFunction::toy(&[0.0, 0.0, 0.0]));
        let s = compose_halley_operator(&t, &zero);
        let probe = GridFunction::toy(&[1.0, -2.0, 3.0]);
        let a = s.apply(&probe);
        let b = t.apply(&probe);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn scalar_composition_arithmetic() {
        // T = 2, curried second derivative = 3  =>  S h = (2 + 3/2) h.
        let t = LinearMap::diagonal(GridFunction::toy(&[2.0]));
        let b = LinearMap::diagonal(GridFunction::toy(&[3.0]));
        let s = compose_halley_operator(&t, &b);
        assert_relative_eq!(s.apply(&GridFunction::toy(&[1.0])).values()[0], 3.5);
    }

    #[test]
    fn composed_adjoint_passes_probe_test() {
        let t = LinearMap::diagonal(GridFunction::toy(&[2.0, -0.5, 1.25, 0.0]));
        let b = LinearMap::diagonal(GridFunction::toy(&[0.1, 3.0, -1.0, 2.0]));
        let s = compose_halley_operator(&t, &b);
        assert!(dot_product_test(&s, 100, 3) <= 1e-12);
    }

    #[test]
    fn composition_is_linear_in_the_curried_slot() {
        // Doubling the curried direction doubles S - T on probes.
        let t = LinearMap::diagonal(GridFunction::toy(&[1.0, 2.0]));
        let b1 = LinearMap::diagonal(GridFunction::toy(&[0.4, -0.8]));
        let b2 = LinearMap::diagonal(GridFunction::toy(&[0.8, -1.6]));
        let s1 = compose_halley_operator(&t, &b1);
        let s2 = compose_halley_operator(&t, &b2);
        let probe = GridFunction::toy(&[1.5, -0.5]);
        let d1 = s1.apply(&probe).sub(&t.apply(&probe));
        let d2 = s2.apply(&probe).sub(&t.apply(&probe));
        for (a, b) in d1.values().iter().zip(d2.values()) {
            assert_relative_eq!(2.0 * a, b, max_relative = 1e-12);
        }
    }
}
