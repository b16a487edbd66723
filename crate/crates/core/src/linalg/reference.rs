//! Straightforward SVD routines used as independent oracles for the Gram-route
//! kernels and as the baseline in the subgradient benchmark. They favour
//! accuracy over speed: one-sided Jacobi works on the matrix itself, never on
//! a Gram product.

use crate::linalg::matrix::{axpy, dot};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Thin SVD `a = u · diag(singular_values) · vᵀ` with `k = min(rows, cols)`
/// columns in `u` and `v`, singular values descending.
#[derive(Clone, Debug)]
pub struct ThinSvd<T> {
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

/// Full SVD with square orthogonal `u` (rows x rows) and `v` (cols x cols).
#[derive(Clone, Debug)]
pub struct FullSvd<T> {
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    pub v: Matrix<T>,
}

pub fn thin_svd<T: Scalar>(a: &Matrix<T>) -> ThinSvd<T> {
    if a.rows() >= a.cols() {
        jacobi_tall(a)
    } else {
        let t = jacobi_tall(&a.transpose());
        ThinSvd { u: t.v, singular_values: t.singular_values, v: t.u }
    }
}

pub fn full_svd<T: Scalar>(a: &Matrix<T>) -> FullSvd<T> {
    let thin = thin_svd(a);
    if a.rows() >= a.cols() {
        FullSvd { u: complete_orthonormal(&thin.u), singular_values: thin.singular_values, v: thin.v }
    } else {
        FullSvd { u: thin.u, singular_values: thin.singular_values, v: complete_orthonormal(&thin.v) }
    }
}

/// Peak bytes held by [`thin_svd`] on a `rows x cols` input: the transposed
/// copy, the rotated columns, `u` and two `k x k` factors.
pub fn thin_svd_bytes<T>(rows: usize, cols: usize) -> u128 {
    let m = rows.max(cols) as u128;
    let k = rows.min(cols) as u128;
    (3 * m * k + 2 * k * k) * std::mem::size_of::<T>() as u128
}

/// `U Vᵀ` over the singular directions above `rel_tol · σ_max`.
pub fn polar_from_svd<T: Scalar>(u: &Matrix<T>, s: &[T], v: &Matrix<T>, rel_tol: T) -> Matrix<T> {
    let top = s.first().copied().unwrap_or_else(T::zero);
    let mut g = Matrix::zeros(u.rows(), v.rows());
    for (j, &sj) in s.iter().enumerate() {
        if sj <= rel_tol * top || sj == T::zero() {
            continue;
        }
        for i in 0..u.rows() {
            let ui = u[(i, j)];
            if ui == T::zero() {
                continue;
            }
            for q in 0..v.rows() {
                g[(i, q)] += ui * v[(q, j)];
            }
        }
    }
    g
}

fn jacobi_tall<T: Scalar>(a: &Matrix<T>) -> ThinSvd<T> {
    let (n, c) = a.shape();
    let at = a.transpose();
    let mut ucols: Vec<Vec<T>> = (0..c).map(|j| at.row(j).to_vec()).collect();
    let mut vcols: Vec<Vec<T>> = (0..c).map(|j| (0..c).map(|i| if i == j { T::one() } else { T::zero() }).collect()).collect();
    let eps = T::epsilon();

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..c {
            for q in (p + 1)..c {
                let alpha = dot(&ucols[p], &ucols[p]);
                let beta = dot(&ucols[q], &ucols[q]);
                let gamma = dot(&ucols[p], &ucols[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let cs = (T::one() + t * t).sqrt().recip();
                let sn = cs * t;
                rotate(&mut ucols, p, q, cs, sn);
                rotate(&mut vcols, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<(T, usize)> = ucols.iter().enumerate().map(|(j, col)| (dot(col, col).sqrt(), j)).collect();
    sv.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = Matrix::zeros(n, c);
    let mut v = Matrix::zeros(c, c);
    for (k, &(s, j)) in sv.iter().enumerate() {
        for i in 0..n {
            u[(i, k)] = if s > T::zero() { ucols[j][i] / s } else { T::zero() };
        }
        for i in 0..c {
            v[(i, k)] = vcols[j][i];
        }
    }
    ThinSvd { u, singular_values: sv.into_iter().map(|(s, _)| s).collect(), v }
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, cs: T, sn: T) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = cs * xp - sn * xq;
        *y = sn * xp + cs * xq;
    }
}

/// Extends an `m x k` matrix with orthonormal columns to an `m x m`
/// orthogonal matrix. The complement comes from the Householder QR of the
/// input.
pub fn complete_orthonormal<T: Scalar>(q: &Matrix<T>) -> Matrix<T> {
    let (m, k) = q.shape();
    let qt = q.transpose();
    let mut cols: Vec<Vec<T>> = (0..k).map(|j| qt.row(j).to_vec()).collect();
    let mut reflectors: Vec<(Vec<T>, T)> = Vec::with_capacity(k);

    for j in 0..k {
        let x = &cols[j][j..];
        let norm = dot(x, x).sqrt();
        let mut v = x.to_vec();
        if norm == T::zero() {
            reflectors.push((v, T::zero()));
            continue;
        }
        let alpha = if v[0] > T::zero() { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        let tau = if vnorm2 == T::zero() { T::zero() } else { T::lit(2.0) / vnorm2 };
        for col in cols.iter_mut().skip(j + 1) {
            let seg = &mut col[j..];
            let w = dot(&v, seg) * tau;
            axpy(seg, -w, &v);
        }
        reflectors.push((v, tau));
    }

    let mut full = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..k {
            full[(i, j)] = q[(i, j)];
        }
        if i >= k {
            full[(i, i)] = T::one();
        }
    }
    // Complement columns k..m: H_0 H_1 ... H_{k-1} applied to e_k..e_{m-1}.
    let width = m - k;
    let mut w = vec![T::zero(); width];
    for (j, (v, tau)) in reflectors.iter().enumerate().rev() {
        if *tau == T::zero() {
            continue;
        }
        w.iter_mut().for_each(|x| *x = T::zero());
        for (off, &vi) in v.iter().enumerate() {
            if vi != T::zero() {
                axpy(&mut w, vi, &full.row(j + off)[k..]);
            }
        }
        for (off, &vi) in v.iter().enumerate() {
            if vi != T::zero() {
                axpy(&mut full.row_mut(j + off)[k..], -*tau * vi, &w);
            }
        }
    }
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn thin_svd_reconstructs_hand_matrix() {
        let a = Matrix::from_rows(&[vec![3.0, 0.0], vec![4.0, 5.0]]).unwrap();
        let svd = thin_svd(&a);
        // singular values of [[3,0],[4,5]] are 3√5 and √5
        assert!((svd.singular_values[0] - 45f64.sqrt()).abs() < 1e-13);
        assert!((svd.singular_values[1] - 5f64.sqrt()).abs() < 1e-13);
        let rec = svd.u.matmul(&Matrix::from_diag(&svd.singular_values)).matmul(&svd.v.transpose());
        assert!(rec.max_abs_diff(&a) < 1e-13);
    }

    #[test]
    fn full_svd_factors_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (r, c) in [(9, 3), (3, 9), (4, 4)] {
            let a = Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
            let f = full_svd(&a);
            assert_eq!(f.u.shape(), (r, r));
            assert_eq!(f.v.shape(), (c, c));
            assert!(f.u.gram().max_abs_diff(&Matrix::identity(r)) < 1e-12);
            assert!(f.v.gram().max_abs_diff(&Matrix::identity(c)) < 1e-12);
            let k = r.min(c);
            let mut sigma = Matrix::zeros(r, c);
            for i in 0..k {
                sigma[(i, i)] = f.singular_values[i];
            }
            let rec = f.u.matmul(&sigma).matmul(&f.v.transpose());
            assert!(rec.max_abs_diff(&a) < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_input() {
        let a = Matrix::from_fn(6, 3, |i, j| (i + 1) as f64 * (j + 1) as f64);
        let svd = thin_svd(&a);
        assert!(svd.singular_values[1] < 1e-12 * svd.singular_values[0]);
        let g = polar_from_svd(&svd.u, &svd.singular_values, &svd.v, 1e-10);
        assert!((a.frobenius_dot(&g) - svd.singular_values[0]).abs() < 1e-10);
    }
}
