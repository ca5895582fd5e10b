//! Synthetic data perturbations and noise-level measurement.
//!
//! The impulsive model picks a fraction of measurement nodes uniformly
//! without replacement and shifts each by ten percent of the maximal
//! measurement value, with a fair seeded coin per node deciding the sign.
//! Identical seeds replay bitwise-identical perturbations.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::banach::{lp_norm, GridFunction};

/// Perturbation model with its seed.
#[derive(Clone, Debug, Serialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub enum NoiseKind {
    /// Additive `±0.1 max|y|` outliers on `round(fraction * nodes)` nodes.
    Impulsive { fraction: f64 },
    /// Additive iid centered Gaussian.
    Gaussian { sigma: f64 },
    /// Additive iid uniform on `[-amplitude, amplitude]`.
    Uniform { amplitude: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> crate::Result<()> {
        match self.kind {
            NoiseKind::Impulsive { fraction } => {
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(crate::Error::InvalidArgument(format!(
                        "impulsive fraction must lie in [0, 1], got {fraction}"
                    )));
                }
            }
            NoiseKind::Gaussian { sigma } => {
                if !(sigma >= 0.0) {
                    return Err(crate::Error::InvalidArgument(
                        "gaussian sigma must be nonnegative".into(),
                    ));
                }
            }
            NoiseKind::Uniform { amplitude } => {
                if !(amplitude >= 0.0) {
                    return Err(crate::Error::InvalidArgument(
                        "uniform amplitude must be nonnegative".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Perturbed data together with its measured noise level in each requested
/// exponent.
pub struct Perturbed {
    pub y_delta: GridFunction,
    /// `(r, ||y - y_delta||_r)` per requested exponent, in input order.
    pub delta_by_norm: Vec<(f64, f64)>,
}

/// Apply the perturbation and measure `||y - y_delta||_r` for every
/// requested exponent.
pub fn perturb(y: &GridFunction, spec: &NoiseSpec, norms: &[f64]) -> crate::Result<Perturbed> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = y.values().to_vec();
    match spec.kind {
        NoiseKind::Impulsive { fraction } => {
            let count = (fraction * y.len() as f64).round() as usize;
            let mut indices: Vec<usize> = (0..y.len()).collect();
            let (chosen, _) = indices.partial_shuffle(&mut rng, count);
            let amplitude = 0.1 * y.max_abs();
            for &i in chosen.iter() {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                values[i] += sign * amplitude;
            }
        }
        NoiseKind::Gaussian { sigma } => {
            for v in values.iter_mut() {
                // Box-Muller keeps the dependency surface flat.
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                *v += sigma
                    * (-2.0 * u1.ln()).sqrt()
                    * (2.0 * std::f64::consts::PI * u2).cos();
            }
        }
        NoiseKind::Uniform { amplitude } => {
            if amplitude > 0.0 {
                for v in values.iter_mut() {
                    *v += rng.gen_range(-amplitude..amplitude);
                }
            }
        }
    }
    let y_delta = GridFunction::new(y.space(), values);
    let delta_by_norm = norms.iter().map(|&r| (r, measure_delta(y, &y_delta, r))).collect();
    Ok(Perturbed { y_delta, delta_by_norm })
}

/// `||y - y_delta||_r` in the weighted norm of the data grid.
pub fn measure_delta(y: &GridFunction, y_delta: &GridFunction, r: f64) -> f64 {
    lp_norm(&y.sub(y_delta), r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::banach::Space;
    use approx::assert_relative_eq;

    fn impulsive(fraction: f64, seed: u64) -> NoiseSpec {
        NoiseSpec { kind: NoiseKind::Impulsive { fraction }, seed }
    }

    #[test]
    fn zero_fraction_is_a_noop() {
        let y = GridFunction::from_fn(Space::grid(5), |x, _| 3.0 + x);
        let out = perturb(&y, &impulsive(0.0, 9), &[1.0, 2.0]).unwrap();
        assert_eq!(out.y_delta, y);
        assert!(out.delta_by_norm.iter().all(|&(_, d)| d == 0.0));
    }

    #[test]
    fn impulsive_counts_and_norms() {
        // y = 10 on 100 nodes with weight w, fraction 0.05: exactly 5 nodes
        // move by +-1, so ||y - y_delta||_1 = 5 w and the L^2 level is
        // sqrt(5 w).
        let w = 0.25;
        let y = GridFunction::constant(Space::flat(100, w), 10.0);
        let out = perturb(&y, &impulsive(0.05, 3), &[1.0, 2.0]).unwrap();
        let touched = out
            .y_delta
            .values()
            .iter()
            .zip(y.values())
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(touched, 5);
        for (a, b) in out.y_delta.values().iter().zip(y.values()) {
            assert!(a == b || ((a - b).abs() - 1.0).abs() < 1e-14);
        }
        assert_relative_eq!(out.delta_by_norm[0].1, 5.0 * w, max_relative = 1e-13);
        assert_relative_eq!(out.delta_by_norm[1].1, (5.0 * w).sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn touched_count_rounds() {
        let y = GridFunction::constant(Space::flat(10, 1.0), 1.0);
        for (fraction, expect) in [(0.04, 0usize), (0.05, 1), (0.26, 3)] {
            let out = perturb(&y, &impulsive(fraction, 1), &[1.0]).unwrap();
            let touched =
                out.y_delta.values().iter().zip(y.values()).filter(|(a, b)| a != b).count();
            assert_eq!(touched, expect, "fraction {fraction}");
        }
    }

    #[test]
    fn replay_is_bitwise_deterministic() {
        let y = GridFunction::from_fn(Space::grid(7), |x, y| 10.0 * (x + y));
        let a = perturb(&y, &impulsive(0.3, 123), &[1.1]).unwrap();
        let b = perturb(&y, &impulsive(0.3, 123), &[1.1]).unwrap();
        assert_eq!(a.y_delta, b.y_delta);
        let c = perturb(&y, &impulsive(0.3, 124), &[1.1]).unwrap();
        assert_ne!(a.y_delta, c.y_delta);
    }

    #[test]
    fn measured_delta_matches_reported() {
        let y = GridFunction::from_fn(Space::grid(6), |x, y| 5.0 * x * y + 1.0);
        let out = perturb(&y, &impulsive(0.2, 77), &[1.0, 1.1, 2.0]).unwrap();
        for &(r, d) in &out.delta_by_norm {
            assert_eq!(measure_delta(&y, &out.y_delta, r), d);
        }
    }

    #[test]
    fn single_node_bump_norm() {
        let w = 0.5;
        let mut y = GridFunction::constant(Space::flat(12, w), 2.0);
        let y0 = y.clone();
        y.values_mut()[4] += 1.0;
        for &r in &[1.0, 1.5, 2.0] {
            assert_relative_eq!(measure_delta(&y0, &y, r), w.powf(1.0 / r), max_relative = 1e-14);
        }
    }

    #[test]
    fn triangle_inequality_spot_check() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let space = Space::flat(20, 0.3);
        for _ in 0..25 {
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                GridFunction::new(space, (0..20).map(|_| rng.gen_range(-4.0..4.0)).collect())
            };
            let (a, b, c) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
            for &r in &[1.0, 1.3, 2.0] {
                let direct = measure_delta(&a, &c, r);
                let via = measure_delta(&a, &b, r) + measure_delta(&b, &c, r);
                assert!(direct <= via * (1.0 + 1e-12));
            }
        }
    }
}
