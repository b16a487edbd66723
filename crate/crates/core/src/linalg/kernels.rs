//! Trace-norm kernels computed through the eigendecomposition of the smaller
//! Gram product, so that the cost is `O(n c² + c³)` for an `n x c` input.
//!
//! For `A = U Σ Vᵀ` with `n ≥ c`, `AᵀA = V Σ² Vᵀ`, hence
//!
//! * `‖A‖* = Σ √sᵢ`,
//! * `U Vᵀ = A V S^{-1/2} Vᵀ`,
//! * `U diag((σᵢ - τ)₊) Vᵀ = A V diag((1 - τ/σᵢ)₊) Vᵀ`.
//!
//! When `n < c` the same identities are applied to `AAᵀ = U Σ² Uᵀ` with the
//! spectral factor on the left.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eig, Matrix};
use crate::scalar::Scalar;

/// Advanced tolerance block for the kernels. The defaults are the pinned
/// values; nothing here is read from the environment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTolerances {
    /// Gram eigenvalues below `pinv_rel * max(λ_max, 1)` are treated as zero
    /// in the subgradient's `S^{-1/2}`.
    pub pinv_rel: f64,
    /// Ridge added by `spd_solve`, relative to `trace(m) / dim`.
    pub ridge_rel: f64,
}

impl Default for KernelTolerances {
    fn default() -> Self {
        KernelTolerances { pinv_rel: 1e-10, ridge_rel: 1e-8 }
    }
}

/// Spectrum of the smaller Gram product of `a`.
struct GramSpectrum<T> {
    /// `true` when the Gram product was `aᵀa` (cols x cols).
    tall: bool,
    values: Vec<T>,
    vectors: Matrix<T>,
    /// Eigenvalues at or below this level are round-off of the Gram product.
    noise_floor: T,
}

impl<T: Scalar> GramSpectrum<T> {
    fn of(a: &Matrix<T>) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let tall = a.rows() >= a.cols();
        let b = if tall { a.gram() } else { a.outer_gram() };
        let ep = symmetric_eig(&b)?;
        let top = ep.values.first().copied().unwrap_or_else(T::zero).max(T::zero());
        let noise_floor = T::lit(4.0) * T::from_count(a.rows() + a.cols()) * T::epsilon() * top;
        Ok(GramSpectrum { tall, values: ep.values, vectors: ep.vectors, noise_floor })
    }

    fn top(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero).max(T::zero())
    }

    /// Applies `f(eigenvalue)` as a spectral filter: returns `A V diag(f) Vᵀ`
    /// (tall) or `U diag(f) Uᵀ A` (wide). `f` returning zero drops a direction.
    fn filter(&self, a: &Matrix<T>, f: impl Fn(T) -> T) -> Matrix<T> {
        let m = self.vectors.rows();
        let weights: Vec<T> = self.values.iter().map(|&s| f(s)).collect();
        let mut core = Matrix::zeros(m, m);
        for (j, &w) in weights.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            for p in 0..m {
                let vp = self.vectors[(p, j)] * w;
                if vp == T::zero() {
                    continue;
                }
                for q in 0..m {
                    core[(p, q)] += vp * self.vectors[(q, j)];
                }
            }
        }
        if self.tall {
            a.matmul(&core)
        } else {
            core.matmul(a)
        }
    }
}

/// Sum of singular values.
pub fn nuclear_norm<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(T::zero());
    }
    let spec = GramSpectrum::of(a)?;
    Ok(spec
        .values
        .iter()
        .filter(|&&s| s > spec.noise_floor)
        .map(|&s| s.sqrt())
        .sum())
}

/// Singular values (descending), clamped at zero, via the Gram route.
pub fn singular_values<T: Scalar>(a: &Matrix<T>) -> Result<Vec<T>> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(Vec::new());
    }
    let spec = GramSpectrum::of(a)?;
    Ok(spec
        .values
        .iter()
        .map(|&s| if s > spec.noise_floor { s.sqrt() } else { T::zero() })
        .collect())
}

/// The `Q = 0` member of the trace-norm subdifferential, `U Vᵀ`.
pub fn trace_norm_subgradient<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    trace_norm_subgradient_with(a, &KernelTolerances::default())
}

/// [`trace_norm_subgradient`] with explicit tolerances. Directions whose Gram
/// eigenvalue falls below the pseudo-inverse cut-off are excluded.
pub fn trace_norm_subgradient_with<T: Scalar>(a: &Matrix<T>, tol: &KernelTolerances) -> Result<Matrix<T>> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(Matrix::zeros(a.rows(), a.cols()));
    }
    let spec = GramSpectrum::of(a)?;
    let cutoff = (T::lit(tol.pinv_rel) * spec.top().max(T::one())).max(spec.noise_floor);
    Ok(spec.filter(a, |s| if s > cutoff { s.sqrt().recip() } else { T::zero() }))
}

/// [`nuclear_norm`] and [`trace_norm_subgradient_with`] from one
/// eigendecomposition.
pub fn nuclear_norm_and_subgradient<T: Scalar>(a: &Matrix<T>, tol: &KernelTolerances) -> Result<(T, Matrix<T>)> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok((T::zero(), Matrix::zeros(a.rows(), a.cols())));
    }
    let spec = GramSpectrum::of(a)?;
    let norm = spec.values.iter().filter(|&&s| s > spec.noise_floor).map(|&s| s.sqrt()).sum();
    let cutoff = (T::lit(tol.pinv_rel) * spec.top().max(T::one())).max(spec.noise_floor);
    Ok((norm, spec.filter(a, |s| if s > cutoff { s.sqrt().recip() } else { T::zero() })))
}

/// Singular value thresholding: the minimizer of `τ‖Z‖* + ½‖Z − A‖²_F`.
pub fn svt<T: Scalar>(a: &Matrix<T>, tau: T) -> Result<Matrix<T>> {
    if !(tau >= T::zero()) {
        return Err(Error::invalid(format!("svt threshold must be non-negative, got {tau}")));
    }
    if !a.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if tau == T::zero() || a.rows() == 0 || a.cols() == 0 {
        return Ok(a.clone());
    }
    let spec = GramSpectrum::of(a)?;
    Ok(spec.filter(a, |s| {
        if s <= spec.noise_floor {
            return T::zero();
        }
        let sigma = s.sqrt();
        if sigma > tau {
            T::one() - tau / sigma
        } else {
            T::zero()
        }
    }))
}
