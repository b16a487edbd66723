use crate::error::{Error, Result};
use crate::linalg::{KernelTolerances, Matrix};
use crate::scalar::Scalar;

/// Cholesky factorization of `m + εI` with `ε = ridge_rel · trace(m) / dim`.
///
/// Built once and reused for every right-hand side with the same `m`.
#[derive(Clone, Debug)]
pub struct SpdFactor<T> {
    /// The ridged matrix, kept for one step of iterative refinement.
    shifted: Matrix<T>,
    /// Lower-triangular factor, row-major.
    lower: Matrix<T>,
    ridge: T,
}

impl<T: Scalar> SpdFactor<T> {
    pub fn new(m: &Matrix<T>) -> Result<Self> {
        Self::with_tolerances(m, &KernelTolerances::default())
    }

    pub fn with_tolerances(m: &Matrix<T>, tol: &KernelTolerances) -> Result<Self> {
        let n = m.rows();
        if n != m.cols() {
            return Err(Error::invalid(format!("spd_solve needs a square matrix, got {}x{}", n, m.cols())));
        }
        if !m.is_finite() {
            return Err(Error::invalid("spd_solve matrix has non-finite entries"));
        }
        let ridge = if n == 0 { T::zero() } else { T::lit(tol.ridge_rel) * m.trace() / T::from_count(n) };
        let half = T::lit(0.5);
        let shifted = Matrix::from_fn(n, n, |i, j| {
            let sym = half * (m[(i, j)] + m[(j, i)]);
            if i == j {
                sym + ridge
            } else {
                sym
            }
        });

        let mut lower = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = shifted[(j, j)];
            for k in 0..j {
                diag -= lower[(j, k)] * lower[(j, k)];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::SingularSystem { dim: n });
            }
            let ljj = diag.sqrt();
            lower[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = shifted[(i, j)];
                let (ri, rj) = (lower.row(i), lower.row(j));
                for k in 0..j {
                    s -= ri[k] * rj[k];
                }
                lower[(i, j)] = s / ljj;
            }
        }
        Ok(SpdFactor { shifted, lower, ridge })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    /// The ridged system matrix `m + εI`.
    pub fn system(&self) -> &Matrix<T> {
        &self.shifted
    }

    /// Solves `(m + εI) x = rhs` for every column of `rhs`, with one step of
    /// iterative refinement.
    pub fn solve(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        if rhs.rows() != self.dim() {
            return Err(Error::invalid(format!(
                "rhs has {} rows, system has dimension {}",
                rhs.rows(),
                self.dim()
            )));
        }
        let mut x = self.substitute(rhs);
        let residual = rhs.sub(&self.shifted.matmul(&x));
        let correction = self.substitute(&residual);
        x.add_scaled(T::one(), &correction);
        Ok(x)
    }

    fn substitute(&self, rhs: &Matrix<T>) -> Matrix<T> {
        let n = self.dim();
        let k = rhs.cols();
        let mut y = rhs.clone();
        // L y = rhs
        for i in 0..n {
            for j in 0..i {
                let l = self.lower[(i, j)];
                if l == T::zero() {
                    continue;
                }
                let (head, tail) = y.as_mut_slice().split_at_mut(i * k);
                let yi = &mut tail[..k];
                let yj = &head[j * k..(j + 1) * k];
                for (a, &b) in yi.iter_mut().zip(yj) {
                    *a -= l * b;
                }
            }
            let d = self.lower[(i, i)];
            y.row_mut(i).iter_mut().for_each(|v| *v /= d);
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let d = self.lower[(i, i)];
            y.row_mut(i).iter_mut().for_each(|v| *v /= d);
            for j in 0..i {
                let l = self.lower[(i, j)];
                if l == T::zero() {
                    continue;
                }
                let (head, tail) = y.as_mut_slice().split_at_mut(i * k);
                let xi = &tail[..k];
                let yj = &mut head[j * k..(j + 1) * k];
                for (a, &b) in yj.iter_mut().zip(xi) {
                    *a -= l * b;
                }
            }
        }
        y
    }
}

/// One-shot convenience around [`SpdFactor`].
pub fn spd_solve<T: Scalar>(m: &Matrix<T>, rhs: &Matrix<T>) -> Result<Matrix<T>> {
    SpdFactor::new(m)?.solve(rhs)
}
