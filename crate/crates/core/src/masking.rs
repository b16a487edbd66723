//! Seeded corruption of clean multi-view data and a synthetic generator with
//! planted label structure.
//!
//! All randomness comes from `ChaCha8Rng` seeded with `seed_from_u64` and
//! split into independent streams with `set_stream`, so outputs are
//! bit-identical across platforms. Index draws use `u64` ranges to keep the
//! sequence independent of the pointer width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{MultiViewDataset, ViewData};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, Matrix};
use crate::scalar::Scalar;

const STREAM_INCOMPLETE: u64 = 1 << 32;
const STREAM_LABELS: u64 = 2 << 32;
const STREAM_DEALIGN: u64 = 3 << 32;
const STREAM_CLUSTERS: u64 = 4 << 32;
const STREAM_SAMPLES: u64 = 5 << 32;
const STREAM_VIEWS: u64 = 6 << 32;

const GENERATION_ATTEMPTS: usize = 10;

/// A generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<R: Rng + ?Sized, X>(items: &mut [X], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}

/// A uniformly random permutation of `0..n`.
pub fn permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    shuffle(&mut p, rng);
    p
}

/// Incomplete views, missing labels and de-alignment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    /// Fraction of samples removed from each view, in `[0, 1)`.
    pub alpha: f64,
    /// Fraction of positive and of negative tags removed per label and view.
    pub beta: f64,
    #[serde(default)]
    pub dealign: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        CorruptionSpec { alpha: 0.0, beta: 0.0, dealign: false, seed: 0 }
    }
}

impl CorruptionSpec {
    pub fn new(alpha: f64, beta: f64, dealign: bool, seed: u64) -> Self {
        CorruptionSpec { alpha, beta, dealign, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::invalid(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }
}

/// Applies `spec` to an aligned, complete dataset.
///
/// Each view loses `⌊α·n⌋` samples, drawn so that every sample survives in
/// at least one view. Label removal then runs per view and per
/// label over present rows, and de-alignment permutes each view's rows
/// independently.
pub fn corrupt<T: Scalar>(ds: &MultiViewDataset<T>, spec: &CorruptionSpec) -> Result<MultiViewDataset<T>> {
    spec.validate()?;
    if !ds.aligned() || !ds.is_complete() {
        return Err(Error::invalid("corruption needs an aligned, complete dataset"));
    }
    let (n, v) = (ds.n(), ds.num_views());
    let removed = (spec.alpha * n as f64).floor() as usize;
    if v * removed > (v - 1) * n {
        return Err(Error::invalid(format!(
            "alpha = {} removes {removed} of {n} samples from each of {v} views; \
             some sample would be missing from every view",
            spec.alpha
        )));
    }

    let masks = incomplete_masks(n, v, removed, spec.seed)?;
    let mut views = Vec::with_capacity(v);
    for (i, (view, missing)) in ds.views().iter().zip(masks).enumerate() {
        let mut features = view.features().clone();
        let mut labels = view.labels().clone();
        for j in (0..n).filter(|&j| missing[j]) {
            features.row_mut(j).iter_mut().for_each(|x| *x = T::zero());
            labels.row_mut(j).iter_mut().for_each(|y| *y = T::zero());
        }
        remove_tags(&mut labels, &missing, spec.beta, &mut stream_rng(spec.seed, STREAM_LABELS + i as u64));
        views.push(ViewData::new(features, labels, missing)?);
    }

    if !spec.dealign {
        return MultiViewDataset::new(views, ds.aligned());
    }
    let shuffled = views
        .into_iter()
        .enumerate()
        .map(|(i, view)| {
            let perm = permutation(n, &mut stream_rng(spec.seed, STREAM_DEALIGN + i as u64));
            let (features, labels, missing) = view.into_parts();
            let missing = perm.iter().map(|&j| missing[j]).collect();
            ViewData::new(features.select_rows(&perm), labels.select_rows(&perm), missing)
        })
        .collect::<Result<Vec<_>>>()?;
    MultiViewDataset::new(shuffled, false)
}

// Views are drawn in order from a uniform permutation. A row may be removed
// from view i only while the rows missing from every view so far still fit
// into the present slots of the remaining views, `(V-1-i)(n-m)`. Under the
// caller's feasibility check this always yields `m` removals per view.
fn incomplete_masks(n: usize, v: usize, removed: usize, seed: u64) -> Result<Vec<Vec<bool>>> {
    if removed == 0 {
        return Ok(vec![vec![false; n]; v]);
    }
    let mut rng = stream_rng(seed, STREAM_INCOMPLETE);
    let mut masks: Vec<Vec<bool>> = Vec::with_capacity(v);
    let mut everywhere = vec![true; n];
    for i in 0..v {
        let cap = (v - 1 - i) * (n - removed);
        let mut critical = 0;
        let mut mask = vec![false; n];
        let mut taken = 0;
        for j in permutation(n, &mut rng) {
            if taken == removed {
                break;
            }
            if everywhere[j] {
                if critical == cap {
                    continue;
                }
                critical += 1;
            }
            mask[j] = true;
            taken += 1;
        }
        if taken < removed {
            return Err(Error::invalid(format!("could not place {removed} missing samples in view {i}")));
        }
        everywhere.iter_mut().zip(&mask).for_each(|(e, &m)| *e &= m);
        masks.push(mask);
    }
    Ok(masks)
}

// Every present (label, row) list is shuffled in full before the prefix is
// removed, so a larger beta removes a superset of the tags of a smaller one.
fn remove_tags<T: Scalar>(labels: &mut Matrix<T>, missing: &[bool], beta: f64, rng: &mut ChaCha8Rng) {
    let (n, c) = labels.shape();
    for k in 0..c {
        let present = (0..n).filter(|&j| !missing[j]);
        let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = present.partition(|&j| labels[(j, k)] == T::one());
        for rows in [&mut pos, &mut neg] {
            shuffle(rows, rng);
            let count = (beta * rows.len() as f64).floor() as usize;
            for &j in &rows[..count] {
                labels[(j, k)] = T::zero();
            }
        }
    }
}

/// Clean synthetic data with cluster-shared label sets.
///
/// Samples belong to one of `clusters` latent clusters. Each cluster carries a
/// fixed label subset, so samples sharing a label come from few clusters and
/// their label rows span a low-dimensional space, while the full label matrix
/// has full column rank. View `i` observes a random linear embedding of the
/// latent point, shifted by a fixed per-view offset so that a linear model
/// can express an intercept, plus Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub c: usize,
    pub dims: Vec<usize>,
    /// Mean size of a cluster's label set. The fractional part is the
    /// probability of one extra label.
    pub positives_per_sample: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Number of latent clusters; defaults to `2c`.
    #[serde(default)]
    pub clusters: Option<usize>,
    /// Dimension of the latent space; defaults to half the smallest view
    /// dimension, at least 2.
    #[serde(default)]
    pub latent_dim: Option<usize>,
    /// Standard deviation of samples around their cluster centre.
    #[serde(default = "default_spread")]
    pub cluster_spread: f64,
}

fn default_spread() -> f64 {
    0.5
}

impl SyntheticSpec {
    /// The desk-scale configuration: 2000 samples, 30 labels, views of
    /// dimension 40, 60 and 80.
    pub fn desk(seed: u64) -> Self {
        SyntheticSpec {
            n: 2000,
            c: 30,
            dims: vec![40, 60, 80],
            positives_per_sample: 3.0,
            noise_sigma: 0.1,
            seed,
            clusters: None,
            latent_dim: None,
            cluster_spread: default_spread(),
        }
    }

    pub fn num_views(&self) -> usize {
        self.dims.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.unwrap_or(2 * self.c)
    }

    pub fn latent(&self) -> usize {
        self.latent_dim
            .unwrap_or_else(|| (self.dims.iter().copied().min().unwrap_or(0) / 2).max(2))
    }

    pub fn validate(&self) -> Result<()> {
        if self.c < 1 || self.n < self.c {
            return Err(Error::invalid(format!("need n >= c >= 1, got n={}, c={}", self.n, self.c)));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::invalid("need at least one view, each of positive dimension"));
        }
        if !(self.positives_per_sample >= 1.0) || self.positives_per_sample > self.c as f64 {
            return Err(Error::invalid(format!(
                "positives_per_sample must lie in [1, c], got {}",
                self.positives_per_sample
            )));
        }
        if !(self.noise_sigma >= 0.0) || !(self.cluster_spread >= 0.0) {
            return Err(Error::invalid("noise_sigma and cluster_spread must be non-negative"));
        }
        if self.cluster_count() == 0 || self.latent() == 0 {
            return Err(Error::invalid("clusters and latent_dim must be positive"));
        }
        Ok(())
    }
}

/// Generates an aligned, complete dataset whose label matrix has rank `c`.
///
/// A draw that misses full column rank is retried with a perturbed seed, up
/// to ten attempts.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<MultiViewDataset<T>> {
    spec.validate()?;
    for attempt in 0..GENERATION_ATTEMPTS as u64 {
        let seed = spec.seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let labels = draw_labels(spec, seed);
        if label_rank(&labels) < spec.c {
            continue;
        }
        return build_views(spec, seed, labels);
    }
    Err(Error::GenerationFailure { attempts: GENERATION_ATTEMPTS })
}

struct PlantedLabels {
    assignment: Vec<usize>,
    matrix: Matrix<f64>,
}

fn draw_labels(spec: &SyntheticSpec, seed: u64) -> PlantedLabels {
    let (n, c, k) = (spec.n, spec.c, spec.cluster_count());
    let mut rng = stream_rng(seed, STREAM_CLUSTERS);
    let whole = spec.positives_per_sample.floor();
    let frac = spec.positives_per_sample - whole;
    let sets: Vec<Vec<bool>> = (0..k)
        .map(|g| {
            let extra = usize::from(frac > 0.0 && rng.random::<f64>() < frac);
            let size = (whole as usize + extra).clamp(1, c);
            let mut set = vec![false; c];
            set[g % c] = true;
            let mut others: Vec<usize> = (0..c).filter(|&l| l != g % c).collect();
            shuffle(&mut others, &mut rng);
            others[..size - 1].iter().for_each(|&l| set[l] = true);
            set
        })
        .collect();

    let mut rng = stream_rng(seed, STREAM_SAMPLES);
    let assignment: Vec<usize> = (0..n).map(|_| rng.random_range(0..k as u64) as usize).collect();
    let matrix = Matrix::from_fn(n, c, |j, l| if sets[assignment[j]][l] { 1.0 } else { -1.0 });
    PlantedLabels { assignment, matrix }
}

fn label_rank(labels: &PlantedLabels) -> usize {
    let s = singular_values(&labels.matrix).expect("finite labels");
    let top = s.first().copied().unwrap_or(0.0);
    let tol = labels.matrix.rows().max(labels.matrix.cols()) as f64 * f64::EPSILON * top;
    s.iter().filter(|&&x| x > tol).count()
}

fn build_views<T: Scalar>(spec: &SyntheticSpec, seed: u64, labels: PlantedLabels) -> Result<MultiViewDataset<T>> {
    let (n, latent, k) = (spec.n, spec.latent(), spec.cluster_count());
    let mut rng = stream_rng(seed, STREAM_SAMPLES + 1);
    let centres = Matrix::from_fn(k, latent, |_, _| rng.sample::<f64, _>(StandardNormal));
    let points = Matrix::from_fn(n, latent, |j, l| {
        centres[(labels.assignment[j], l)] + spec.cluster_spread * rng.sample::<f64, _>(StandardNormal)
    });

    let y: Matrix<T> = labels.matrix.cast();
    let scale = (latent as f64).sqrt().recip();
    let views = spec
        .dims
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut rng = stream_rng(seed, STREAM_VIEWS + i as u64);
            let embed = Matrix::from_fn(latent, d, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
            let offset: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let mut x = points.matmul(&embed);
            for j in 0..n {
                for (v, &o) in x.row_mut(j).iter_mut().zip(&offset) {
                    *v += o + spec.noise_sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
            ViewData::complete(x.cast(), y.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    MultiViewDataset::new(views, true)
}
