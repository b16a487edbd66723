//! The concave-convex procedure with ADMM inner steps, flattened into a single
//! loop.
//!
//! Each iteration linearizes the concave global term at the previous weights,
//! then performs one ADMM sweep on the split `Z_k = X_k W`:
//!
//! 1. `W ← (μ Σₖ XₖᵀXₖ)⁻¹ { λXᵀG + Σₖ Xₖᵀ(μZₖ − Λₖ) − Xᵀ[P ⊙ (XW_prev − Y)] }`,
//!    where `G` is the trace-norm subgradient of the stacked predictions at
//!    the previous weights,
//! 2. `Zₖ ← svt(XₖW + Λₖ/μ, λ/μ)`,
//! 3. `Λₖ ← Λₖ + μ(XₖW − Zₖ)`.
//!
//! `X` is block diagonal over views, so step 1 splits into one `dᵢ x dᵢ`
//! solve per view whose factorization is computed once per fit.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{MultiViewDataset, WeightStack};
use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm_and_subgradient, svt, KernelTolerances, Matrix, SpdFactor};
use crate::masking::stream_rng;
use crate::regularizer::{local_of, loss_of, stack_rows, view_predictions};
use crate::scalar::Scalar;

/// Which parts of the objective are optimized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Loss plus local minus global trace norms.
    #[default]
    Full,
    /// Masked least squares only.
    LossOnly,
    /// Loss plus the local trace norms; the global term is dropped.
    LossPlusLocal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda: f64,
    /// ADMM penalty. Changes the path, not the fixed point.
    pub mu: f64,
    pub max_iters: usize,
    /// Stop once `|f_t − f_{t−1}| ≤ rel_tol · |f_{t−1}|`.
    pub rel_tol: f64,
    pub variant: Variant,
    pub init_seed: u64,
    pub tolerances: KernelTolerances,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.5,
            mu: 5.0,
            max_iters: 200,
            rel_tol: 1e-6,
            variant: Variant::Full,
            init_seed: 0,
            tolerances: KernelTolerances::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be finite and non-negative, got {}", self.lambda)));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid(format!("mu must be finite and positive, got {}", self.mu)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::invalid(format!("rel_tol must be non-negative, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

/// Iterate of the solver.
///
/// `labels[a]` is the label index of the `a`-th split block; labels with no
/// positive present row in any view have no block.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<T> {
    pub w: WeightStack<T>,
    pub z: Vec<Matrix<T>>,
    pub lambda_mult: Vec<Matrix<T>>,
    pub labels: Vec<usize>,
    pub iteration: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// The objective at the new weights.
    pub objective: f64,
    /// The convex surrogate: the objective with the global term replaced by
    /// its linearization at the previous weights.
    pub surrogate: f64,
    /// `max_k ‖XₖW − Zₖ‖_F` after the multiplier step.
    pub primal_residual: f64,
    /// `max_i ‖system·Wᵢ − rhsᵢ‖_F / ‖rhsᵢ‖_F` of the weight solves.
    pub solve_residual: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    /// The objective at the initial weights.
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(self.initial_objective, |r| r.objective)
    }
}

/// Random `W₀` with i.i.d. `N(0, 1/dᵢ)` entries, zero split variables and
/// multipliers.
pub fn init_state<T: Scalar>(ds: &MultiViewDataset<T>, config: &SolverConfig) -> Result<SolverState<T>> {
    config.validate()?;
    let weights = ds
        .dims()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut rng = stream_rng(config.init_seed, i as u64);
            let scale = (d.max(1) as f64).sqrt().recip();
            Matrix::from_fn(d, ds.c(), |_, _| T::lit(scale * rng.sample::<f64, _>(StandardNormal)))
        })
        .collect();
    let layout = Layout::new(ds);
    let z: Vec<Matrix<T>> = layout.groups.iter().map(|g| Matrix::zeros(block_rows(g), ds.c())).collect();
    Ok(SolverState {
        w: WeightStack::new(weights)?,
        lambda_mult: z.clone(),
        z,
        labels: layout.labels,
        iteration: 0,
    })
}

/// One weight step. `grad_prev` is the trace-norm subgradient of the stack
/// of all present rows' predictions at `state.w`.
pub fn update_w<T: Scalar>(
    state: &SolverState<T>,
    ds: &MultiViewDataset<T>,
    config: &SolverConfig,
    grad_prev: &Matrix<T>,
) -> Result<WeightStack<T>> {
    config.validate()?;
    let work = Workspace::new(ds, config)?;
    let preds = view_predictions(ds, &state.w)?;
    let expect = (work.layout.present.iter().map(Vec::len).sum::<usize>(), ds.c());
    if grad_prev.shape() != expect {
        return Err(Error::invalid(format!("grad_prev has shape {:?}, expected {:?}", grad_prev.shape(), expect)));
    }
    check_blocks(state, &work.layout)?;
    Ok(work.weight_step(ds, state, &preds, grad_prev)?.0)
}

/// `Zₖ = svt(XₖW + Λₖ/μ, λ/μ)` for every block.
pub fn update_z<T: Scalar>(state: &SolverState<T>, ds: &MultiViewDataset<T>, config: &SolverConfig) -> Result<Vec<Matrix<T>>> {
    config.validate()?;
    let layout = Layout::new(ds);
    check_blocks(state, &layout)?;
    let preds = view_predictions(ds, &state.w)?;
    let (mu, tau) = (T::lit(config.mu), T::lit(config.lambda / config.mu));
    layout
        .groups
        .iter()
        .zip(&state.lambda_mult)
        .map(|(rows, mult)| {
            let mut arg = stack_rows(&preds, rows);
            arg.add_scaled(mu.recip(), mult);
            svt(&arg, tau)
        })
        .collect()
}

/// `Λₖ + μ(XₖW − Zₖ)` for every block.
pub fn update_multipliers<T: Scalar>(
    state: &SolverState<T>,
    ds: &MultiViewDataset<T>,
    config: &SolverConfig,
) -> Result<Vec<Matrix<T>>> {
    config.validate()?;
    let layout = Layout::new(ds);
    check_blocks(state, &layout)?;
    let preds = view_predictions(ds, &state.w)?;
    let mu = T::lit(config.mu);
    Ok(layout
        .groups
        .iter()
        .zip(state.z.iter().zip(&state.lambda_mult))
        .map(|(rows, (z, mult))| {
            let mut next = mult.clone();
            next.add_scaled(mu, &stack_rows(&preds, rows).sub(z));
            next
        })
        .collect())
}

pub fn fit<T: Scalar>(ds: &MultiViewDataset<T>, config: &SolverConfig) -> Result<(WeightStack<T>, SolverTrace)> {
    let (state, trace) = fit_state(ds, config)?;
    Ok((state.w, trace))
}

/// [`fit`], returning the final iterate including the split variables.
pub fn fit_state<T: Scalar>(ds: &MultiViewDataset<T>, config: &SolverConfig) -> Result<(SolverState<T>, SolverTrace)> {
    let mut state = init_state(ds, config)?;
    if config.variant == Variant::LossOnly {
        let trace = least_squares(ds, config, &mut state)?;
        return Ok((state, trace));
    }
    let work = Workspace::new(ds, config)?;
    let (lambda, mu) = (T::lit(config.lambda), T::lit(config.mu));
    let tau = T::lit(config.lambda / config.mu);
    let full = config.variant == Variant::Full;

    let mut preds = view_predictions(ds, &state.w)?;
    let mut stacked = stack_rows(&preds, &work.layout.present);
    let (mut global, mut grad) = if full {
        nuclear_norm_and_subgradient(&stacked, &config.tolerances)?
    } else {
        (T::zero(), Matrix::zeros(stacked.rows(), stacked.cols()))
    };
    let initial = work.objective(ds, &preds, global)?;
    let mut trace = SolverTrace { initial_objective: initial.as_f64(), records: Vec::new(), converged: false };
    let mut previous = initial;

    for t in 1..=config.max_iters {
        let started = Instant::now();
        let (w, solve_residual) = work.weight_step(ds, &state, &preds, &grad)?;
        state.w = w;
        preds = view_predictions(ds, &state.w)?;

        let mut primal = T::zero();
        for (a, rows) in work.layout.groups.iter().enumerate() {
            let block = stack_rows(&preds, rows);
            let mut arg = block.clone();
            arg.add_scaled(mu.recip(), &state.lambda_mult[a]);
            let z = svt(&arg, tau)?;
            let gap = block.sub(&z);
            primal = primal.max(gap.frobenius_norm());
            state.lambda_mult[a].add_scaled(mu, &gap);
            state.z[a] = z;
        }
        state.iteration = t;

        let loss = loss_of(ds, &preds);
        let local = local_of(&work.layout.groups, &preds)?;
        let next = stack_rows(&preds, &work.layout.present);
        let linearized = if full { next.frobenius_dot(&grad) } else { T::zero() };
        let surrogate = loss + lambda * local - lambda * linearized;
        stacked = next;
        if full {
            (global, grad) = nuclear_norm_and_subgradient(&stacked, &config.tolerances)?;
        }
        let f = loss + lambda * (local - global);
        if !f.is_finite() || !surrogate.is_finite() {
            return Err(Error::NonFiniteObjective { iteration: t });
        }
        trace.records.push(IterationRecord {
            iteration: t,
            objective: f.as_f64(),
            surrogate: surrogate.as_f64(),
            primal_residual: primal.as_f64(),
            solve_residual,
            seconds: started.elapsed().as_secs_f64(),
        });
        let change = (f - previous).abs();
        previous = f;
        if change <= T::lit(config.rel_tol) * previous.abs().max(T::min_positive_value()) {
            trace.converged = true;
            break;
        }
    }
    Ok((state, trace))
}

/// Scores for every sample of an aligned dataset: the mean of `XᵢWᵢ` over
/// the views in which the sample is present.
pub fn predict<T: Scalar>(w: &WeightStack<T>, test: &MultiViewDataset<T>) -> Result<Matrix<T>> {
    if !test.aligned() && test.num_views() > 1 {
        return Err(Error::invalid("prediction needs aligned test views"));
    }
    let preds = view_predictions(test, w)?;
    let mut scores = Matrix::zeros(test.n(), test.c());
    for j in 0..test.n() {
        let present: Vec<usize> = (0..test.num_views()).filter(|&i| !test.view(i).is_missing(j)).collect();
        if present.is_empty() {
            return Err(Error::AllViewsMissing(j));
        }
        let share = T::from_count(present.len()).recip();
        let row = scores.row_mut(j);
        for &i in &present {
            for (s, &p) in row.iter_mut().zip(preds[i].row(j)) {
                *s += p;
            }
        }
        if present.len() > 1 {
            row.iter_mut().for_each(|s| *s *= share);
        }
    }
    Ok(scores)
}

struct Layout {
    present: Vec<Vec<usize>>,
    /// `groups[a][i]`: rows of view `i` in block `a`.
    groups: Vec<Vec<Vec<usize>>>,
    labels: Vec<usize>,
}

impl Layout {
    fn new<T: Scalar>(ds: &MultiViewDataset<T>) -> Self {
        let mut groups = Vec::new();
        let mut labels = Vec::new();
        for (k, rows) in ds.sublabel_groups().into_iter().enumerate() {
            if rows.iter().any(|r| !r.is_empty()) {
                groups.push(rows);
                labels.push(k);
            }
        }
        Layout { present: ds.present_rows(), groups, labels }
    }
}

fn block_rows(rows: &[Vec<usize>]) -> usize {
    rows.iter().map(Vec::len).sum()
}

fn check_blocks<T: Scalar>(state: &SolverState<T>, layout: &Layout) -> Result<()> {
    if state.labels != layout.labels || state.z.len() != layout.groups.len() || state.lambda_mult.len() != state.z.len() {
        return Err(Error::invalid("solver state does not match the dataset's label blocks"));
    }
    for (a, rows) in layout.groups.iter().enumerate() {
        let shape = (block_rows(rows), state.w.c());
        if state.z[a].shape() != shape || state.lambda_mult[a].shape() != shape {
            return Err(Error::invalid(format!("block for label {} has the wrong shape", layout.labels[a])));
        }
    }
    Ok(())
}

struct Workspace<T> {
    layout: Layout,
    factors: Vec<SpdFactor<T>>,
    lambda: T,
    mu: T,
    full: bool,
}

impl<T: Scalar> Workspace<T> {
    fn new(ds: &MultiViewDataset<T>, config: &SolverConfig) -> Result<Self> {
        let mu = T::lit(config.mu);
        // Σₖ XₖᵀXₖ for view i weights each present row by its positive count.
        let factors = ds
            .views()
            .iter()
            .map(|v| {
                let counts: Vec<T> = v.positive_counts().into_iter().map(|m| mu * T::from_count(m)).collect();
                SpdFactor::with_tolerances(&v.features().weighted_gram(&counts), &config.tolerances)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Workspace {
            layout: Layout::new(ds),
            factors,
            lambda: T::lit(config.lambda),
            mu,
            full: config.variant == Variant::Full,
        })
    }

    fn objective(&self, ds: &MultiViewDataset<T>, preds: &[Matrix<T>], global: T) -> Result<T> {
        let local = local_of(&self.layout.groups, preds)?;
        Ok(loss_of(ds, preds) + self.lambda * (local - global))
    }

    /// Returns the new weights and the largest relative solve residual.
    fn weight_step(
        &self,
        ds: &MultiViewDataset<T>,
        state: &SolverState<T>,
        preds: &[Matrix<T>],
        grad: &Matrix<T>,
    ) -> Result<(WeightStack<T>, f64)> {
        let c = ds.c();
        let mut inner: Vec<Matrix<T>> = ds.views().iter().map(|v| Matrix::zeros(v.n(), c)).collect();

        if self.full && self.lambda != T::zero() {
            let mut offset = 0;
            for (i, rows) in self.layout.present.iter().enumerate() {
                for (r, &j) in rows.iter().enumerate() {
                    for (acc, &g) in inner[i].row_mut(j).iter_mut().zip(grad.row(offset + r)) {
                        *acc += self.lambda * g;
                    }
                }
                offset += rows.len();
            }
        }
        for (a, rows) in self.layout.groups.iter().enumerate() {
            let (z, mult) = (&state.z[a], &state.lambda_mult[a]);
            let mut offset = 0;
            for (i, view_rows) in rows.iter().enumerate() {
                for (r, &j) in view_rows.iter().enumerate() {
                    let (zr, lr) = (z.row(offset + r), mult.row(offset + r));
                    for ((acc, &zv), &lv) in inner[i].row_mut(j).iter_mut().zip(zr).zip(lr) {
                        *acc += self.mu * zv - lv;
                    }
                }
                offset += view_rows.len();
            }
        }
        for (i, view) in ds.views().iter().enumerate() {
            let y = view.labels();
            for j in view.present_rows() {
                let f = preds[i].row(j);
                for (k, acc) in inner[i].row_mut(j).iter_mut().enumerate() {
                    if y[(j, k)] != T::zero() {
                        *acc -= f[k] - y[(j, k)];
                    }
                }
            }
        }

        let mut weights = Vec::with_capacity(ds.num_views());
        let mut worst = 0.0f64;
        for ((view, rhs_rows), factor) in ds.views().iter().zip(&inner).zip(&self.factors) {
            let rhs = view.features().t_matmul(rhs_rows);
            let w = factor.solve(&rhs)?;
            let scale = rhs.frobenius_norm();
            if scale > T::zero() {
                let residual = factor.system().matmul(&w).sub(&rhs).frobenius_norm() / scale;
                worst = worst.max(residual.as_f64());
            }
            weights.push(w);
        }
        Ok((WeightStack::new(weights)?, worst))
    }
}

// Column-wise masked least squares: for each view and label, solve
// `(Σ_{j observed} x_j x_jᵀ) w = Σ_{j observed} y_j x_j`.
fn least_squares<T: Scalar>(ds: &MultiViewDataset<T>, config: &SolverConfig, state: &mut SolverState<T>) -> Result<SolverTrace> {
    let started = Instant::now();
    let initial = loss_of(ds, &view_predictions(ds, &state.w)?);
    let c = ds.c();
    let mut weights = Vec::with_capacity(ds.num_views());
    let mut worst = 0.0f64;
    for view in ds.views() {
        let (x, y) = (view.features(), view.labels());
        let mut w = Matrix::zeros(view.dim(), c);
        for k in 0..c {
            let mask: Vec<T> = (0..view.n())
                .map(|j| if !view.is_missing(j) && y[(j, k)] != T::zero() { T::one() } else { T::zero() })
                .collect();
            if mask.iter().all(|&m| m == T::zero()) {
                continue;
            }
            let target = Matrix::from_fn(view.n(), 1, |j, _| mask[j] * y[(j, k)]);
            let rhs = x.t_matmul(&target);
            let factor = SpdFactor::with_tolerances(&x.weighted_gram(&mask), &config.tolerances)?;
            let col = factor.solve(&rhs)?;
            let scale = rhs.frobenius_norm();
            if scale > T::zero() {
                let residual = factor.system().matmul(&col).sub(&rhs).frobenius_norm() / scale;
                worst = worst.max(residual.as_f64());
            }
            for r in 0..view.dim() {
                w[(r, k)] = col[(r, 0)];
            }
        }
        weights.push(w);
    }
    state.w = WeightStack::new(weights)?;
    state.iteration = 1;
    let loss = loss_of(ds, &view_predictions(ds, &state.w)?);
    if !loss.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 1 });
    }
    Ok(SolverTrace {
        initial_objective: initial.as_f64(),
        records: vec![IterationRecord {
            iteration: 1,
            objective: loss.as_f64(),
            surrogate: loss.as_f64(),
            primal_residual: 0.0,
            solve_residual: worst,
            seconds: started.elapsed().as_secs_f64(),
        }],
        converged: true,
    })
}
