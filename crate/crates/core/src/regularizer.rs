//! The masked squared loss, the local-minus-global trace-norm regularizer and
//! the objective they form.
//!
//! With per-view predictions `Fᵢ = XᵢWᵢ`, the local term sums, over labels
//! `k`, the trace norm of the stack of rows of every `Fᵢ` whose sample is
//! present and positively labelled with `k`. The global term is the trace norm
//! of the stack of all present rows. The local term never falls below the
//! global one when every present row carries some positive label, so the
//! objective is bounded below by zero.

use serde::{Deserialize, Serialize};

use crate::data::{MultiViewDataset, WeightStack};
use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, Matrix};
use crate::scalar::Scalar;

/// The parts of the objective at one weight stack.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue<T> {
    pub loss: T,
    pub local_term: T,
    pub global_term: T,
    pub lambda: T,
}

impl<T: Scalar> ObjectiveValue<T> {
    /// `local_term - global_term`.
    pub fn regularizer(&self) -> T {
        self.local_term - self.global_term
    }

    /// `loss + lambda * (local_term - global_term)`.
    pub fn total(&self) -> T {
        self.loss + self.lambda * self.regularizer()
    }
}

/// `½ Σᵢ ‖Pᵢ ⊙ (XᵢWᵢ − Yᵢ)‖²_F`.
pub fn masked_loss<T: Scalar>(ds: &MultiViewDataset<T>, w: &WeightStack<T>) -> Result<T> {
    Ok(loss_of(ds, &view_predictions(ds, w)?))
}

/// `(Σₖ ‖stack of label-k rows‖*, ‖stack of all present rows‖*)`.
/// Labels without positive rows contribute zero.
pub fn regularizer_value<T: Scalar>(ds: &MultiViewDataset<T>, w: &WeightStack<T>) -> Result<(T, T)> {
    let preds = view_predictions(ds, w)?;
    Ok((local_of(&ds.sublabel_groups(), &preds)?, global_of(&ds.present_rows(), &preds)?))
}

pub fn objective<T: Scalar>(ds: &MultiViewDataset<T>, w: &WeightStack<T>, lambda: T) -> Result<ObjectiveValue<T>> {
    if !(lambda >= T::zero()) {
        return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    let preds = view_predictions(ds, w)?;
    Ok(ObjectiveValue {
        loss: loss_of(ds, &preds),
        local_term: local_of(&ds.sublabel_groups(), &preds)?,
        global_term: global_of(&ds.present_rows(), &preds)?,
        lambda,
    })
}

/// `XᵢWᵢ` for every view.
pub(crate) fn view_predictions<T: Scalar>(ds: &MultiViewDataset<T>, w: &WeightStack<T>) -> Result<Vec<Matrix<T>>> {
    w.check_compatible(ds)?;
    Ok(ds.views().iter().zip(w.weights()).map(|(v, wi)| v.features().matmul(wi)).collect())
}

pub(crate) fn loss_of<T: Scalar>(ds: &MultiViewDataset<T>, preds: &[Matrix<T>]) -> T {
    let half = T::lit(0.5);
    let mut total = T::zero();
    for (view, f) in ds.views().iter().zip(preds) {
        let y = view.labels();
        for j in view.present_rows() {
            for (&p, &t) in f.row(j).iter().zip(y.row(j)) {
                if t != T::zero() {
                    total += half * (p - t) * (p - t);
                }
            }
        }
    }
    total
}

/// Vertical stack of `preds[i]` rows `rows[i]`, views in order.
pub(crate) fn stack_rows<T: Scalar>(preds: &[Matrix<T>], rows: &[Vec<usize>]) -> Matrix<T> {
    let blocks: Vec<Matrix<T>> = preds.iter().zip(rows).map(|(f, r)| f.select_rows(r)).collect();
    Matrix::vstack(&blocks.iter().collect::<Vec<_>>())
}

pub(crate) fn local_of<T: Scalar>(groups: &[Vec<Vec<usize>>], preds: &[Matrix<T>]) -> Result<T> {
    let mut total = T::zero();
    for rows in groups {
        if rows.iter().all(Vec::is_empty) {
            continue;
        }
        total += nuclear_norm(&stack_rows(preds, rows))?;
    }
    Ok(total)
}

pub(crate) fn global_of<T: Scalar>(present: &[Vec<usize>], preds: &[Matrix<T>]) -> Result<T> {
    nuclear_norm(&stack_rows(preds, present))
}
