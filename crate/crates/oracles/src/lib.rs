//! Reference implementations for tests.
//!
//! Everything here is written from definitions, favours clarity over speed
//! and shares no code with `mvml-core`. Matrices are `nalgebra::DMatrix<f64>`.

use nalgebra::DMatrix;

pub type Dense = DMatrix<f64>;

/// Dense matrix from row-major entries.
pub fn dense(rows: usize, cols: usize, row_major: &[f64]) -> Dense {
    DMatrix::from_row_slice(rows, cols, row_major)
}

/// Full SVD through nalgebra: `(u, singular values descending, v)` with thin
/// factors.
///
/// nalgebra's bidiagonal iteration occasionally stops on a wrong
/// decomposition for nearly rank-deficient input, so every result is checked
/// by recomposition and retried on the transpose or with a looser
/// convergence threshold.
pub fn svd(a: &Dense) -> (Dense, Vec<f64>, Dense) {
    if a.nrows() == 0 || a.ncols() == 0 {
        let k = 0;
        return (Dense::zeros(a.nrows(), k), Vec::new(), Dense::zeros(a.ncols(), k));
    }
    let scale = a.norm();
    let attempts = [(false, f64::EPSILON), (true, f64::EPSILON), (false, 1e-14), (true, 1e-14), (false, 1e-13)];
    let (u, s, vt) = attempts
        .iter()
        .find_map(|&(transpose, eps)| {
            let input = if transpose { a.transpose() } else { a.clone() };
            let svd = nalgebra::linalg::SVD::try_new(input, true, true, eps, 0)?;
            let (u, vt) = (svd.u?, svd.v_t?);
            let (u, vt) = if transpose { (vt.transpose(), u.transpose()) } else { (u, vt) };
            let s: Vec<f64> = svd.singular_values.iter().copied().collect();
            let recomposed = &u * Dense::from_diagonal(&nalgebra::DVector::from_column_slice(&s)) * &vt;
            ((recomposed - a).norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE)).then_some((u, s, vt))
        })
        .unwrap_or_else(|| hestenes(a));
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap());
    let u = Dense::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = Dense::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    (u, order.iter().map(|&i| s[i]).collect(), v)
}

/// One-sided Jacobi on the columns of `a` (or of `aᵀ` when wide), returning
/// `(u, s, vᵀ)` in nalgebra's layout, unsorted.
fn hestenes(a: &Dense) -> (Dense, Vec<f64>, Dense) {
    if a.nrows() < a.ncols() {
        let (u, s, vt) = hestenes(&a.transpose());
        return (vt.transpose(), s, u.transpose());
    }
    let mut w = a.clone();
    let n = w.ncols();
    let mut v = Dense::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = (1.0 + t * t).sqrt().recip();
                let s = c * t;
                for m in [&mut w, &mut v] {
                    for r in 0..m.nrows() {
                        let (x, y) = (m[(r, p)], m[(r, q)]);
                        m[(r, p)] = c * x - s * y;
                        m[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let u = Dense::from_fn(w.nrows(), n, |r, j| if s[j] > 0.0 { w[(r, j)] / s[j] } else { 0.0 });
    (u, s, v.transpose())
}

pub fn nuclear(a: &Dense) -> f64 {
    svd(a).1.iter().sum()
}

/// `U Vᵀ` restricted to singular values above `rel · σ_max`.
pub fn polar(a: &Dense, rel: f64) -> Dense {
    let (u, s, v) = svd(a);
    let top = s.first().copied().unwrap_or(0.0);
    let mut g = Dense::zeros(a.nrows(), a.ncols());
    for (i, &si) in s.iter().enumerate() {
        if si > rel * top && si > 0.0 {
            g += u.column(i) * v.column(i).transpose();
        }
    }
    g
}

/// `U diag((σ − τ)₊) Vᵀ`.
pub fn shrink(a: &Dense, tau: f64) -> Dense {
    let (u, s, v) = svd(a);
    let mut z = Dense::zeros(a.nrows(), a.ncols());
    for (i, &si) in s.iter().enumerate() {
        if si > tau {
            z += (si - tau) * u.column(i) * v.column(i).transpose();
        }
    }
    z
}

/// `τ‖z‖* + ½‖z − a‖²_F`.
pub fn prox_objective(z: &Dense, a: &Dense, tau: f64) -> f64 {
    tau * nuclear(z) + 0.5 * (z - a).norm_squared()
}

pub fn spectral_norm(a: &Dense) -> f64 {
    svd(a).1.first().copied().unwrap_or(0.0)
}

/// Numeric rank from the SVD.
pub fn rank(a: &Dense, rel: f64) -> usize {
    let s = svd(a).1;
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > rel * top && x > 0.0).count()
}

/// Multi-label metrics by brute force over pairs and ranks. `scores` and
/// `truth` are `n` rows of `c` entries; truth entries are `±1`.
pub mod metrics {
    pub fn hamming(scores: &[Vec<f64>], truth: &[Vec<f64>]) -> f64 {
        let mut wrong = 0usize;
        let mut total = 0usize;
        for (s, y) in scores.iter().zip(truth) {
            for (&v, &t) in s.iter().zip(y) {
                let predicted = if v < 0.0 { -1.0 } else { 1.0 };
                if predicted != t {
                    wrong += 1;
                }
                total += 1;
            }
        }
        wrong as f64 / total as f64
    }

    pub fn ranking_loss(scores: &[Vec<f64>], truth: &[Vec<f64>]) -> Option<f64> {
        let mut sum = 0.0;
        let mut samples = 0usize;
        for (s, y) in scores.iter().zip(truth) {
            let mut pairs = 0usize;
            let mut bad = 0usize;
            for r in 0..s.len() {
                for q in 0..s.len() {
                    if y[r] > 0.0 && y[q] < 0.0 {
                        pairs += 1;
                        if s[r] <= s[q] {
                            bad += 1;
                        }
                    }
                }
            }
            if pairs > 0 {
                sum += bad as f64 / pairs as f64;
                samples += 1;
            }
        }
        (samples > 0).then(|| sum / samples as f64)
    }

    /// Position of label `l` when sorting by descending score, ties by
    /// ascending index; 1-based.
    fn rank_of(s: &[f64], l: usize) -> usize {
        1 + (0..s.len()).filter(|&m| s[m] > s[l] || (s[m] == s[l] && m < l)).count()
    }

    pub fn average_precision(scores: &[Vec<f64>], truth: &[Vec<f64>]) -> Option<f64> {
        let mut sum = 0.0;
        let mut samples = 0usize;
        for (s, y) in scores.iter().zip(truth) {
            let relevant: Vec<usize> = (0..s.len()).filter(|&l| y[l] > 0.0).collect();
            if relevant.is_empty() {
                continue;
            }
            let mut per = 0.0;
            for &l in &relevant {
                let r = rank_of(s, l);
                let above = relevant.iter().filter(|&&m| rank_of(s, m) <= r).count();
                per += above as f64 / r as f64;
            }
            sum += per / relevant.len() as f64;
            samples += 1;
        }
        (samples > 0).then(|| sum / samples as f64)
    }

    pub fn auc(scores: &[Vec<f64>], truth: &[Vec<f64>]) -> Option<f64> {
        let c = truth.first().map_or(0, Vec::len);
        let mut sum = 0.0;
        let mut labels = 0usize;
        for k in 0..c {
            let mut pairs = 0usize;
            let mut credit = 0.0;
            for p in 0..truth.len() {
                for q in 0..truth.len() {
                    if truth[p][k] > 0.0 && truth[q][k] < 0.0 {
                        pairs += 1;
                        if scores[p][k] > scores[q][k] {
                            credit += 1.0;
                        } else if scores[p][k] == scores[q][k] {
                            credit += 0.5;
                        }
                    }
                }
            }
            if pairs > 0 {
                sum += credit / pairs as f64;
                labels += 1;
            }
        }
        (labels > 0).then(|| sum / labels as f64)
    }
}

/// The weight step of the linearized ADMM sweep, assembled as one dense
/// system over the stacked coefficient vector `vec(W)` and solved by LU.
///
/// `views[i] = (x, y, missing)` with `x` of shape `n x dᵢ`, `y` of shape
/// `n x c`. `z` and `mult` hold one block per label with at least one positive
/// present row, rows ordered by view and then by row index. `grad` is the
/// subgradient over all present rows in the same order. `ridge_rel` is the
/// per-view ridge relative to the trace of that view's block.
#[allow(clippy::too_many_arguments)]
pub fn dense_weight_step(
    views: &[(Dense, Dense, Vec<bool>)],
    w_prev: &[Dense],
    z: &[Dense],
    mult: &[Dense],
    grad: &Dense,
    lambda: f64,
    mu: f64,
    ridge_rel: f64,
) -> Vec<Dense> {
    let c = views[0].1.ncols();
    let dims: Vec<usize> = views.iter().map(|v| v.0.ncols()).collect();
    let total: usize = dims.iter().sum();
    let offsets: Vec<usize> = dims.iter().scan(0, |acc, &d| {
        let o = *acc;
        *acc += d;
        Some(o)
    }).collect();

    // Block-diagonal design over all views, one row per (view, sample).
    let n = views[0].0.nrows();
    let big_x = Dense::from_fn(views.len() * n, total, |r, col| {
        let (i, j) = (r / n, r % n);
        if col >= offsets[i] && col < offsets[i] + dims[i] {
            views[i].0[(j, col - offsets[i])]
        } else {
            0.0
        }
    });
    let stacked_w = Dense::from_fn(total, c, |r, k| {
        let i = offsets.iter().rposition(|&o| o <= r).unwrap();
        w_prev[i][(r - offsets[i], k)]
    });

    // Sub-label selection matrices S_k with X_k = S_k X.
    let mut selections = Vec::new();
    for k in 0..c {
        let mut rows = Vec::new();
        for (i, (_, y, missing)) in views.iter().enumerate() {
            for j in 0..n {
                if !missing[j] && y[(j, k)] == 1.0 {
                    rows.push(i * n + j);
                }
            }
        }
        if !rows.is_empty() {
            selections.push(rows);
        }
    }
    let select = |rows: &[usize]| Dense::from_fn(rows.len(), views.len() * n, |r, col| f64::from(rows[r] == col));

    let mut system = Dense::zeros(total, total);
    let mut rhs = Dense::zeros(total, c);
    for (a, rows) in selections.iter().enumerate() {
        let xk = select(rows) * &big_x;
        system += mu * xk.transpose() * &xk;
        rhs += xk.transpose() * (mu * &z[a] - &mult[a]);
    }
    for (i, &o) in offsets.iter().enumerate() {
        let block = system.view((o, o), (dims[i], dims[i])).trace();
        let eps = ridge_rel * block / dims[i] as f64;
        for r in 0..dims[i] {
            system[(o + r, o + r)] += eps;
        }
    }

    let present: Vec<usize> = (0..views.len() * n).filter(|&r| !views[r / n].2[r % n]).collect();
    let scatter = select(&present).transpose();
    rhs += lambda * big_x.transpose() * (scatter * grad);

    let p = Dense::from_fn(views.len() * n, c, |r, k| {
        let (i, j) = (r / n, r % n);
        f64::from(!views[i].2[j] && views[i].1[(j, k)] != 0.0)
    });
    let y = Dense::from_fn(views.len() * n, c, |r, k| views[r / n].1[(r % n, k)]);
    let residual = (&big_x * &stacked_w - y).component_mul(&p);
    rhs -= big_x.transpose() * residual;

    let solved = system.lu().solve(&rhs).expect("dense oracle system is singular");
    offsets
        .iter()
        .zip(&dims)
        .map(|(&o, &d)| solved.rows(o, d).into_owned())
        .collect()
}
