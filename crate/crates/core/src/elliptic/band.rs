//! Symmetric banded storage and Cholesky factorization for the 5-point
//! stencil systems. The half-bandwidth equals the grid side, so factor cost
//! is O(N b^2) and each extra right-hand side costs O(N b).

/// Symmetric matrix stored by its lower band: `data[i * (bw + 1) + d]`
/// holds `A[i][i - d]` for `0 <= d <= min(i, bw)`.
#[derive(Clone)]
pub(crate) struct BandMatrix {
    dim: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(dim: usize, bw: usize) -> BandMatrix {
        BandMatrix { dim, bw, data: vec![0.0; dim * (bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.idx(i.max(j), i.min(j));
        self.data[k] = value;
    }

    /// `y = A x` using the symmetric band.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            let lo = i.saturating_sub(self.bw);
            let mut s = 0.0;
            for j in lo..i {
                let a = self.data[self.idx(i, j)];
                s += a * x[j];
                y[j] += a * x[i];
            }
            s += self.data[self.idx(i, i)] * x[i];
            y[i] += s;
        }
        y
    }

    /// Banded Cholesky `A = L L^T`; fails on non-positive pivots.
    pub fn cholesky(&self) -> Result<BandCholesky, String> {
        let bw = self.bw;
        let mut l = self.data.clone();
        let at = |buf: &Vec<f64>, i: usize, j: usize| buf[i * (bw + 1) + (i - j)];
        for i in 0..self.dim {
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                let mut s = at(&l, i, j);
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= at(&l, i, k) * at(&l, j, k);
                }
                l[i * (bw + 1) + (i - j)] = s / at(&l, j, j);
            }
            let mut s = at(&l, i, i);
            for k in lo..i {
                let v = at(&l, i, k);
                s -= v * v;
            }
            if s <= 0.0 || !s.is_finite() {
                return Err(format!("non-positive pivot {s:.3e} at row {i}"));
            }
            l[i * (bw + 1)] = s.sqrt();
        }
        Ok(BandCholesky { dim: self.dim, bw, data: l })
    }
}

/// Lower-band Cholesky factor; solves are read-only and may run concurrently.
pub(crate) struct BandCholesky {
    dim: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    /// Solve `A x = b` by forward/backward substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim);
        let bw = self.bw;
        let at = |i: usize, j: usize| self.data[i * (bw + 1) + (i - j)];
        let mut y = b.to_vec();
        for i in 0..self.dim {
            let lo = i.saturating_sub(bw);
            let mut s = y[i];
            for j in lo..i {
                s -= at(i, j) * y[j];
            }
            y[i] = s / at(i, i);
        }
        for i in (0..self.dim).rev() {
            let hi = (i + bw).min(self.dim - 1);
            let mut s = y[i];
            for j in (i + 1)..=hi {
                s -= at(j, i) * y[j];
            }
            y[i] = s / at(i, i);
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve_small_spd_system() {
        // Tridiagonal [2, -1] system, dim 5.
        let mut a = BandMatrix::zeros(5, 1);
        for i in 0..5 {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
        }
        let chol = a.cholesky().unwrap();
        let b = vec![1.0, 0.0, 0.0, 0.0, 1.0];
        let x = chol.solve(&b);
        let r: f64 = a
            .matvec(&x)
            .iter()
            .zip(&b)
            .map(|(ax, bi)| (ax - bi) * (ax - bi))
            .sum::<f64>()
            .sqrt();
        assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut a = BandMatrix::zeros(2, 1);
        a.set(0, 0, 1.0);
        a.set(1, 0, 3.0);
        a.set(1, 1, 1.0);
        assert!(a.cholesky().is_err());
    }
}
