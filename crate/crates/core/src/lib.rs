//! Multi-view multi-label learning on non-aligned, incomplete views with
//! missing labels.
//!
//! A per-view linear predictor stack is trained under a masked least-squares
//! loss plus a regularizer that rewards low-rank predictions within each
//! label's sample group and high-rank predictions over all samples. The
//! difference-of-convex objective is minimized by a concave-convex procedure
//! whose convex step is solved with ADMM in closed form.

pub mod data;
pub mod error;
pub mod linalg;
pub mod masking;
pub mod metrics;
pub mod regularizer;
pub mod scalar;
pub mod solver;

pub use data::{IndicatorMatrix, MultiViewDataset, ViewData, WeightStack};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Dataset64 = MultiViewDataset<f64>;
pub type Dataset32 = MultiViewDataset<f32>;
pub type Weights64 = WeightStack<f64>;
pub type Weights32 = WeightStack<f32>;
