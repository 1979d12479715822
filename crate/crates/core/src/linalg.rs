//! Dense complex LU factorization with partial pivoting.
//!
//! The network matrices are small (a few hundred nodes at most), so a plain
//! right-looking LU is enough. Besides `solve`, the factorization supports
//! solves with the adjoint, which the Hager–Higham condition estimator needs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Reciprocal-condition threshold below which a matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct ComplexLu {
    /// Packed factors: strict lower part is L (unit diagonal), upper part is U.
    lu: DMatrix<Complex64>,
    /// `perm[k]` is the original row stored at position k.
    perm: Vec<usize>,
    /// 1-norm of the original matrix.
    norm1: f64,
    singular: bool,
}

/// Induced 1-norm (maximum absolute column sum).
pub fn norm1(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_norm(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl ComplexLu {
    pub fn new(a: &DMatrix<Complex64>) -> Self {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;

        let data = lu.as_mut_slice();
        let zero = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let mut piv = k;
            let mut best = data[k + k * n].norm();
            for i in (k + 1)..n {
                let v = data[i + k * n].norm();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if piv != k {
                for j in 0..n {
                    data.swap(k + j * n, piv + j * n);
                }
                perm.swap(k, piv);
            }
            let inv = data[k + k * n].inv();
            for i in (k + 1)..n {
                data[i + k * n] *= inv;
            }
            // Column-major rank-1 update of the trailing block.
            let (head, tail) = data.split_at_mut((k + 1) * n);
            let lcol = &head[k * n + k + 1..k * n + n];
            for j in 0..(n - k - 1) {
                let col = &mut tail[j * n..(j + 1) * n];
                let u = col[k];
                if u == zero {
                    continue;
                }
                for (dst, &l) in col[k + 1..].iter_mut().zip(lcol) {
                    *dst -= l * u;
                }
            }
        }

        Self {
            lu,
            perm,
            norm1: norm1(a),
            singular,
        }
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// True when elimination met an exactly zero pivot column.
    pub fn is_exactly_singular(&self) -> bool {
        self.singular
    }

    /// Solves `A x = b`. Returns `None` for an exactly singular matrix.
    pub fn solve(&self, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
        if self.singular {
            return None;
        }
        let n = self.dim();
        let mut x = DVector::from_fn(n, |k, _| b[self.perm[k]]);
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Some(x)
    }

    /// Solves `A^H x = b`.
    pub fn solve_adjoint(&self, b: &DVector<Complex64>) -> Option<DVector<Complex64>> {
        if self.singular {
            return None;
        }
        let n = self.dim();
        // A = P^T L U, so A^H = U^H L^H P.
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[(j, i)].conj() * y[j];
            }
            y[i] = s / self.lu[(i, i)].conj();
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in (i + 1)..n {
                s -= self.lu[(j, i)].conj() * y[j];
            }
            y[i] = s;
        }
        let mut x = DVector::zeros(n);
        for k in 0..n {
            x[self.perm[k]] = y[k];
        }
        Some(x)
    }

    /// Estimate of `||A^{-1}||_1` (Hager's method, Higham's refinements).
    pub fn inverse_norm1_estimate(&self) -> f64 {
        if self.singular {
            return f64::INFINITY;
        }
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        let one = Complex64::new(1.0, 0.0);
        let mut x = DVector::from_element(n, one / n as f64);
        let mut est = 0.0;
        let mut last_j = usize::MAX;

        for _ in 0..5 {
            let y = match self.solve(&x) {
                Some(y) => y,
                None => return f64::INFINITY,
            };
            let y_norm: f64 = y.iter().map(|z| z.norm()).sum();
            if y_norm <= est {
                break;
            }
            est = y_norm;
            let xi = y.map(|z| {
                let r = z.norm();
                if r == 0.0 {
                    one
                } else {
                    z / r
                }
            });
            let z = match self.solve_adjoint(&xi) {
                Some(z) => z,
                None => return f64::INFINITY,
            };
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(k, v)| (k, v.re))
                .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            let ztx: f64 = z.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = DVector::zeros(n);
            x[j] = one;
        }

        // Higham's alternating-sign test vector guards against underestimates.
        let alt = DVector::from_fn(n, |i, _| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
            Complex64::new(sign * (1.0 + i as f64 / denom), 0.0)
        });
        if let Some(y) = self.solve(&alt) {
            let alt_est = 2.0 * y.iter().map(|z| z.norm()).sum::<f64>() / (3.0 * n as f64);
            est = est.max(alt_est);
        }
        est
    }

    /// 1-norm condition estimate `||A||_1 * est(||A^{-1}||_1)`.
    pub fn condition_estimate(&self) -> f64 {
        self.norm1 * self.inverse_norm1_estimate()
    }
}
