//! Multi-label evaluation metrics, rank diagnostics of predicted label
//! matrices and the Nemenyi critical distance.
//!
//! Tie rules: Hamming loss thresholds at zero with `sign(0) = +1`; ranking
//! loss counts a tied (relevant, irrelevant) pair as misordered; average
//! precision breaks ties by ascending label index; AUC counts ties as one
//! half. AUC is macro-averaged over labels with both classes present.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, singular_values, Matrix};
use crate::scalar::Scalar;

fn check<T: Scalar>(scores: &Matrix<T>, truth: &Matrix<T>) -> Result<()> {
    if scores.shape() != truth.shape() {
        return Err(Error::invalid(format!(
            "scores are {:?} but truth is {:?}",
            scores.shape(),
            truth.shape()
        )));
    }
    if !scores.is_finite() {
        return Err(Error::invalid("scores contain non-finite entries"));
    }
    if let Some(p) = truth.as_slice().iter().position(|&y| y != T::one() && y != -T::one()) {
        let c = truth.cols();
        return Err(Error::invalid(format!("truth ({}, {}) is not ±1", p / c, p % c)));
    }
    Ok(())
}

/// Fraction of entries whose score sign disagrees with the truth.
pub fn hamming_loss<T: Scalar>(scores: &Matrix<T>, truth: &Matrix<T>) -> Result<f64> {
    check(scores, truth)?;
    if truth.as_slice().is_empty() {
        return Err(Error::UndefinedMetric("hamming loss of an empty matrix"));
    }
    let wrong = scores
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .filter(|(&s, &y)| (s >= T::zero()) != (y > T::zero()))
        .count();
    Ok(wrong as f64 / truth.as_slice().len() as f64)
}

/// Mean over samples with both classes of the fraction of (relevant,
/// irrelevant) pairs where the relevant label does not score strictly higher.
pub fn ranking_loss<T: Scalar>(scores: &Matrix<T>, truth: &Matrix<T>) -> Result<f64> {
    check(scores, truth)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut irrelevant = Vec::new();
    for j in 0..scores.rows() {
        let (s, y) = (scores.row(j), truth.row(j));
        irrelevant.clear();
        irrelevant.extend(s.iter().zip(y).filter(|(_, &t)| t < T::zero()).map(|(&v, _)| v));
        let relevant = y.len() - irrelevant.len();
        if relevant == 0 || irrelevant.is_empty() {
            continue;
        }
        irrelevant.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        let mut bad = 0usize;
        for (&v, _) in s.iter().zip(y).filter(|(_, &t)| t > T::zero()) {
            bad += irrelevant.len() - irrelevant.partition_point(|&q| q < v);
        }
        total += bad as f64 / (relevant * irrelevant.len()) as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric("ranking loss needs a sample with both classes"));
    }
    Ok(total / counted as f64)
}

/// Mean over samples with a relevant label of the average, over relevant
/// labels, of the precision at that label's rank.
pub fn average_precision<T: Scalar>(scores: &Matrix<T>, truth: &Matrix<T>) -> Result<f64> {
    check(scores, truth)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut order: Vec<usize> = Vec::with_capacity(scores.cols());
    for j in 0..scores.rows() {
        let (s, y) = (scores.row(j), truth.row(j));
        let relevant = y.iter().filter(|&&t| t > T::zero()).count();
        if relevant == 0 {
            continue;
        }
        order.clear();
        order.extend(0..s.len());
        order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).expect("finite scores").then(a.cmp(&b)));
        let mut hits = 0usize;
        let mut sum = 0.0;
        for (rank, &l) in order.iter().enumerate() {
            if y[l] > T::zero() {
                hits += 1;
                sum += hits as f64 / (rank + 1) as f64;
            }
        }
        total += sum / relevant as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric("average precision needs a relevant label"));
    }
    Ok(total / counted as f64)
}

/// Macro average over labels with both classes of the pairwise AUC.
pub fn adapted_auc<T: Scalar>(scores: &Matrix<T>, truth: &Matrix<T>) -> Result<f64> {
    check(scores, truth)?;
    let mut total = 0.0;
    let mut counted = 0usize;
    let (n, c) = scores.shape();
    let mut neg = Vec::with_capacity(n);
    for k in 0..c {
        neg.clear();
        neg.extend((0..n).filter(|&j| truth[(j, k)] < T::zero()).map(|j| scores[(j, k)]));
        let pos = n - neg.len();
        if pos == 0 || neg.is_empty() {
            continue;
        }
        neg.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
        // twice the (wins + ties / 2) count
        let mut doubled = 0u64;
        for j in (0..n).filter(|&j| truth[(j, k)] > T::zero()) {
            let v = scores[(j, k)];
            let below = neg.partition_point(|&q| q < v);
            let tied = neg.partition_point(|&q| q <= v) - below;
            doubled += 2 * below as u64 + tied as u64;
        }
        total += doubled as f64 / (2 * pos * neg.len()) as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric("AUC needs a label with both classes"));
    }
    Ok(total / counted as f64)
}

/// The four metrics in the higher-is-better orientation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub one_minus_hl: f64,
    pub one_minus_rl: f64,
    pub ap: f64,
    pub auc: f64,
    pub n_test: usize,
    pub c: usize,
}

impl MetricsReport {
    pub fn evaluate<T: Scalar>(scores: &Matrix<T>, truth: &Matrix<T>) -> Result<Self> {
        Ok(MetricsReport {
            one_minus_hl: 1.0 - hamming_loss(scores, truth)?,
            one_minus_rl: 1.0 - ranking_loss(scores, truth)?,
            ap: average_precision(scores, truth)?,
            auc: adapted_auc(scores, truth)?,
            n_test: scores.rows(),
            c: scores.cols(),
        })
    }

    /// `(name, value)` pairs in a fixed order.
    pub fn values(&self) -> [(&'static str, f64); 4] {
        [("one_minus_hl", self.one_minus_hl), ("one_minus_rl", self.one_minus_rl), ("ap", self.ap), ("auc", self.auc)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostics {
    pub entire_rank: usize,
    pub entire_nuclear: f64,
    /// One entry per sub-matrix, in input order.
    pub sub_ranks: Vec<usize>,
    pub sub_nuclear_mean: f64,
    pub sub_nuclear_median: f64,
}

impl RankDiagnostics {
    pub fn mean_sub_rank(&self) -> f64 {
        if self.sub_ranks.is_empty() {
            return 0.0;
        }
        self.sub_ranks.iter().sum::<usize>() as f64 / self.sub_ranks.len() as f64
    }
}

/// Numeric rank: singular values above `tol`, where `None` means
/// `1e-8 · σ_max`. Singular values come from the Gram route, which cannot
/// resolve values below about `√(4(rows + cols)ε) · σ_max`; those count as
/// zero whatever `tol` is.
pub fn numeric_rank<T: Scalar>(a: &Matrix<T>, tol: Option<f64>) -> Result<usize> {
    let s = singular_values(a)?;
    let top = s.first().map_or(0.0, |v| v.as_f64());
    let tol = tol.unwrap_or(1e-8 * top);
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!("rank tolerance must be non-negative, got {tol}")));
    }
    Ok(s.iter().filter(|v| v.as_f64() > tol && v.as_f64() > 0.0).count())
}

/// Ranks and trace norms of a predicted label matrix and of its row subsets
/// `sublabel_rows[k]`. Empty subsets get rank zero and norm zero.
pub fn rank_diagnostics<T: Scalar>(pred: &Matrix<T>, sublabel_rows: &[Vec<usize>], tol: Option<f64>) -> Result<RankDiagnostics> {
    if let Some(&j) = sublabel_rows.iter().flatten().find(|&&j| j >= pred.rows()) {
        return Err(Error::invalid(format!("sub-label row {j} out of range for {} rows", pred.rows())));
    }
    let entire_rank = numeric_rank(pred, tol)?;
    let entire_nuclear = nuclear_norm(pred)?.as_f64();
    let mut sub_ranks = Vec::with_capacity(sublabel_rows.len());
    let mut norms = Vec::with_capacity(sublabel_rows.len());
    for rows in sublabel_rows {
        let sub = pred.select_rows(rows);
        sub_ranks.push(numeric_rank(&sub, tol)?);
        norms.push(nuclear_norm(&sub)?.as_f64());
    }
    let (mean, median) = mean_median(&mut norms);
    Ok(RankDiagnostics { entire_rank, entire_nuclear, sub_ranks, sub_nuclear_mean: mean, sub_nuclear_median: median })
}

/// Diagnostics over a list of sub-matrices given directly.
pub fn rank_diagnostics_of_blocks<T: Scalar>(entire: &Matrix<T>, blocks: &[Matrix<T>], tol: Option<f64>) -> Result<RankDiagnostics> {
    let entire_rank = numeric_rank(entire, tol)?;
    let entire_nuclear = nuclear_norm(entire)?.as_f64();
    let sub_ranks = blocks.iter().map(|b| numeric_rank(b, tol)).collect::<Result<Vec<_>>>()?;
    let mut norms = blocks.iter().map(|b| nuclear_norm(b).map(Scalar::as_f64)).collect::<Result<Vec<_>>>()?;
    let (mean, median) = mean_median(&mut norms);
    Ok(RankDiagnostics { entire_rank, entire_nuclear, sub_ranks, sub_nuclear_mean: mean, sub_nuclear_median: median })
}

fn mean_median(values: &mut [f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite norms"));
    let mid = values.len() / 2;
    let median = if values.len() % 2 == 1 { values[mid] } else { 0.5 * (values[mid - 1] + values[mid]) };
    (mean, median)
}

/// Nemenyi critical distance for `k` methods over `n_results` results.
///
/// By default computes `q · √(k(k+1)/N)`, which omits the factor 6 of the
/// usual Nemenyi denominator; `conventional = true` gives
/// `q · √(k(k+1)/(6N))`.
pub fn nemenyi_cd(k: usize, n_results: usize, q_alpha: f64, conventional: bool) -> Result<f64> {
    if k < 2 || n_results < 1 {
        return Err(Error::invalid(format!("need k >= 2 methods and N >= 1 results, got k={k}, N={n_results}")));
    }
    if !(q_alpha > 0.0) || !q_alpha.is_finite() {
        return Err(Error::invalid(format!("q_alpha must be positive, got {q_alpha}")));
    }
    let denom = if conventional { 6.0 * n_results as f64 } else { n_results as f64 };
    Ok(q_alpha * ((k * (k + 1)) as f64 / denom).sqrt())
}
