//! Multi-view multi-label containers.
//!
//! Missing samples stay in place as zero rows plus a mask, so every view keeps
//! `n` rows and the block structure of the stacked problem is literal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// One view: features, `{-1, 0, +1}` labels and the missing-sample mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewData<T> {
    features: Matrix<T>,
    labels: Matrix<T>,
    missing: Vec<bool>,
}

impl<T: Scalar> ViewData<T> {
    pub fn new(features: Matrix<T>, labels: Matrix<T>, missing: Vec<bool>) -> Result<Self> {
        let n = features.rows();
        if labels.rows() != n || missing.len() != n {
            return Err(Error::invalid(format!(
                "view row counts disagree: features {}, labels {}, mask {}",
                n,
                labels.rows(),
                missing.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::invalid("view features contain non-finite entries"));
        }
        for j in 0..n {
            for (k, &y) in labels.row(j).iter().enumerate() {
                if y != T::zero() && y != T::one() && y != -T::one() {
                    return Err(Error::invalid(format!("label ({j}, {k}) = {y} is not in {{-1, 0, 1}}")));
                }
            }
            if missing[j] {
                if let Some(k) = features.row(j).iter().position(|&v| v != T::zero()) {
                    return Err(Error::invalid(format!("missing row {j} has non-zero feature at column {k}")));
                }
                if let Some(k) = labels.row(j).iter().position(|&v| v != T::zero()) {
                    return Err(Error::invalid(format!("missing row {j} has non-zero label at column {k}")));
                }
            }
        }
        Ok(ViewData { features, labels, missing })
    }

    /// A view with every sample present.
    pub fn complete(features: Matrix<T>, labels: Matrix<T>) -> Result<Self> {
        let n = features.rows();
        Self::new(features, labels, vec![false; n])
    }

    pub fn features(&self) -> &Matrix<T> {
        &self.features
    }

    pub fn labels(&self) -> &Matrix<T> {
        &self.labels
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn c(&self) -> usize {
        self.labels.cols()
    }

    pub fn is_missing(&self, j: usize) -> bool {
        self.missing[j]
    }

    pub fn present_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&j| !self.missing[j]).collect()
    }

    pub fn indicator(&self) -> IndicatorMatrix<T> {
        indicator_from(self)
    }

    /// Number of positively observed labels in each row (zero for missing rows).
    pub fn positive_counts(&self) -> Vec<usize> {
        (0..self.n())
            .map(|j| {
                if self.missing[j] {
                    0
                } else {
                    self.labels.row(j).iter().filter(|&&y| y == T::one()).count()
                }
            })
            .collect()
    }

    pub(crate) fn into_parts(self) -> (Matrix<T>, Matrix<T>, Vec<bool>) {
        (self.features, self.labels, self.missing)
    }
}

/// The `{0, 1}` mask of observed label entries.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorMatrix<T>(Matrix<T>);

impl<T: Scalar> IndicatorMatrix<T> {
    pub fn as_matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn observed_count(&self) -> usize {
        self.0.as_slice().iter().filter(|&&p| p != T::zero()).count()
    }
}

/// `P_jk = 1` iff the label is observed (`y_jk ≠ 0`) and row `j` is present.
pub fn indicator_from<T: Scalar>(view: &ViewData<T>) -> IndicatorMatrix<T> {
    let labels = view.labels();
    IndicatorMatrix(Matrix::from_fn(view.n(), view.c(), |j, k| {
        if !view.is_missing(j) && labels[(j, k)] != T::zero() {
            T::one()
        } else {
            T::zero()
        }
    }))
}

/// Rows of `view` that are present and carry a positive label `k`, ascending.
pub fn sublabel_rows<T: Scalar>(view: &ViewData<T>, k: usize) -> Result<Vec<usize>> {
    if k >= view.c() {
        return Err(Error::invalid(format!("label index {k} out of range for {} labels", view.c())));
    }
    Ok((0..view.n())
        .filter(|&j| !view.is_missing(j) && view.labels()[(j, k)] == T::one())
        .collect())
}

/// A collection of views over the same `n` slots and `c` labels.
///
/// When `aligned` is true, row `j` of every view describes the same sample
/// and each sample must be present in at least one view. Non-aligned data
/// carries no cross-view meaning in its row order.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiViewDataset<T> {
    views: Vec<ViewData<T>>,
    aligned: bool,
}

impl<T: Scalar> MultiViewDataset<T> {
    pub fn new(views: Vec<ViewData<T>>, aligned: bool) -> Result<Self> {
        let first = views.first().ok_or_else(|| Error::invalid("dataset needs at least one view"))?;
        let (n, c) = (first.n(), first.c());
        if c == 0 {
            return Err(Error::invalid("dataset needs at least one label"));
        }
        for (i, v) in views.iter().enumerate() {
            if v.n() != n || v.c() != c {
                return Err(Error::invalid(format!(
                    "view {i} has shape n={}, c={}; expected n={n}, c={c}",
                    v.n(),
                    v.c()
                )));
            }
        }
        if aligned {
            if let Some(j) = (0..n).find(|&j| views.iter().all(|v| v.is_missing(j))) {
                return Err(Error::invalid(format!("sample {j} is missing from every view")));
            }
        }
        Ok(MultiViewDataset { views, aligned })
    }

    pub fn views(&self) -> &[ViewData<T>] {
        &self.views
    }

    pub fn view(&self, i: usize) -> &ViewData<T> {
        &self.views[i]
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn n(&self) -> usize {
        self.views[0].n()
    }

    pub fn c(&self) -> usize {
        self.views[0].c()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(ViewData::dim).collect()
    }

    pub fn aligned(&self) -> bool {
        self.aligned
    }

    pub fn is_complete(&self) -> bool {
        self.views.iter().all(|v| v.missing().iter().all(|&m| !m))
    }

    /// Restricts an aligned dataset to the given samples, in the given order.
    pub fn select_samples(&self, idx: &[usize]) -> Result<Self> {
        if !self.aligned {
            return Err(Error::invalid("sample selection needs an aligned dataset"));
        }
        if let Some(&j) = idx.iter().find(|&&j| j >= self.n()) {
            return Err(Error::invalid(format!("sample index {j} out of range")));
        }
        let views = self
            .views
            .iter()
            .map(|v| {
                ViewData::new(
                    v.features.select_rows(idx),
                    v.labels.select_rows(idx),
                    idx.iter().map(|&j| v.missing[j]).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(views, true)
    }

    /// Per-sample label rows of an aligned dataset, read from the first view
    /// in which each sample is present.
    pub fn sample_labels(&self) -> Result<Matrix<T>> {
        if !self.aligned {
            return Err(Error::invalid("sample labels are only defined for aligned data"));
        }
        let mut out = Matrix::zeros(self.n(), self.c());
        for j in 0..self.n() {
            let view = self.views.iter().find(|v| !v.is_missing(j)).ok_or(Error::AllViewsMissing(j))?;
            out.row_mut(j).copy_from_slice(view.labels().row(j));
        }
        Ok(out)
    }

    /// `groups[k][i]` = sub-label rows of label `k` in view `i`.
    pub fn sublabel_groups(&self) -> Vec<Vec<Vec<usize>>> {
        (0..self.c())
            .map(|k| {
                self.views
                    .iter()
                    .map(|v| sublabel_rows(v, k).expect("k < c"))
                    .collect()
            })
            .collect()
    }

    /// Present rows of every view.
    pub fn present_rows(&self) -> Vec<Vec<usize>> {
        self.views.iter().map(ViewData::present_rows).collect()
    }
}

/// The learned per-view coefficient matrices `W⁽ⁱ⁾ ∈ ℝ^{dᵢ x c}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Matrix<T>>", into = "Vec<Matrix<T>>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct WeightStack<T> {
    weights: Vec<Matrix<T>>,
}

impl<T: Scalar> TryFrom<Vec<Matrix<T>>> for WeightStack<T> {
    type Error = Error;

    fn try_from(weights: Vec<Matrix<T>>) -> Result<Self> {
        WeightStack::new(weights)
    }
}

impl<T> From<WeightStack<T>> for Vec<Matrix<T>> {
    fn from(w: WeightStack<T>) -> Self {
        w.weights
    }
}

impl<T: Scalar> WeightStack<T> {
    pub fn new(weights: Vec<Matrix<T>>) -> Result<Self> {
        let c = weights.first().ok_or_else(|| Error::invalid("weight stack is empty"))?.cols();
        if weights.iter().any(|w| w.cols() != c) {
            return Err(Error::invalid("weight matrices disagree on label count"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weight matrices contain non-finite entries"));
        }
        Ok(WeightStack { weights })
    }

    pub fn zeros(dims: &[usize], c: usize) -> Self {
        WeightStack { weights: dims.iter().map(|&d| Matrix::zeros(d, c)).collect() }
    }

    pub fn weights(&self) -> &[Matrix<T>] {
        &self.weights
    }

    pub fn view(&self, i: usize) -> &Matrix<T> {
        &self.weights[i]
    }

    pub fn num_views(&self) -> usize {
        self.weights.len()
    }

    pub fn c(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.weights.iter().map(Matrix::rows).collect()
    }

    /// Checks that the stack can be applied to `ds`.
    pub fn check_compatible(&self, ds: &MultiViewDataset<T>) -> Result<()> {
        if self.num_views() != ds.num_views() {
            return Err(Error::invalid(format!(
                "weight stack has {} views, dataset has {}",
                self.num_views(),
                ds.num_views()
            )));
        }
        if self.c() != ds.c() {
            return Err(Error::invalid(format!("weight stack has {} labels, dataset has {}", self.c(), ds.c())));
        }
        for (i, (w, v)) in self.weights.iter().zip(ds.views()).enumerate() {
            if w.rows() != v.dim() {
                return Err(Error::invalid(format!(
                    "view {i}: weights have {} rows, features have {} columns",
                    w.rows(),
                    v.dim()
                )));
            }
        }
        Ok(())
    }
}

/// `[X_sel⁽¹⁾W⁽¹⁾; …; X_sel⁽ⱽ⁾W⁽ⱽ⁾]` where `rows[i]` selects rows of view `i`.
pub fn stack_predictions<T: Scalar>(
    ds: &MultiViewDataset<T>,
    w: &WeightStack<T>,
    rows: &[Vec<usize>],
) -> Result<Matrix<T>> {
    w.check_compatible(ds)?;
    if rows.len() != ds.num_views() {
        return Err(Error::invalid(format!("{} row lists for {} views", rows.len(), ds.num_views())));
    }
    let mut blocks = Vec::with_capacity(rows.len());
    for (i, sel) in rows.iter().enumerate() {
        if let Some(&j) = sel.iter().find(|&&j| j >= ds.n()) {
            return Err(Error::invalid(format!("row {j} out of range in view {i}")));
        }
        blocks.push(ds.view(i).features().select_rows(sel).matmul(w.view(i)));
    }
    Ok(Matrix::vstack(&blocks.iter().collect::<Vec<_>>()))
}
