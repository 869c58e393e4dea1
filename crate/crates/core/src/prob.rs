//! Random variables as Monte Carlo ensembles over a shared probability
//! space, the empirical Ky Fan quasi-norm, and the related diagnostics.
//!
//! An [`Ensemble`] models an element of L0: one real value per simulated
//! outcome. All ensembles on one [`ProbSpace`] are aligned sample-by-sample,
//! so per-outcome arithmetic (sums, products, scalings) is meaningful and
//! every identity can be checked pathwise.
//!
//! The quasi-norm `‖η‖ = inf { δ : P(|η| > δ) ≤ δ }` is evaluated *exactly*
//! on the empirical distribution by a scan over order statistics, which
//! removes any tolerance ambiguity from the core metric.

use crate::error::{CoreError, Result};
use crate::rng::{mix, stream, Purpose};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Identifies the probability space an ensemble lives on.
///
/// Derived deterministically from `(master_seed, path_count)`: two spaces
/// built from the same configuration are the same space, and their
/// ensembles may be combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpaceId(u64);

/// A finite simulated probability space: `path_count` outcomes, each with
/// its own deterministic random stream.
#[derive(Debug, Clone)]
pub struct ProbSpace {
    path_count: usize,
    master_seed: u64,
    id: SpaceId,
}

impl ProbSpace {
    /// At least two paths are required for any empirical statement.
    pub fn new(path_count: usize, master_seed: u64) -> Result<Self> {
        if path_count < 2 {
            return Err(CoreError::InvalidParameter(format!(
                "path_count must be >= 2, got {path_count}"
            )));
        }
        let id = SpaceId(mix(&[0x5350_4143, master_seed, path_count as u64]));
        Ok(Self {
            path_count,
            master_seed,
            id,
        })
    }

    pub fn paths(&self) -> usize {
        self.path_count
    }

    pub fn seed(&self) -> u64 {
        self.master_seed
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    /// The resolution of the empirical Ky Fan metric at this path count,
    /// `2/sqrt(M)`. Residual tolerances below this floor are not
    /// statistically meaningful.
    pub fn statistical_floor(&self) -> f64 {
        2.0 / (self.path_count as f64).sqrt()
    }

    /// Per-path generator for the given purpose.
    pub(crate) fn rng(&self, path: usize, purpose: Purpose) -> ChaCha8Rng {
        stream(self.master_seed, path as u64, purpose)
    }

    /// Constant random variable.
    pub fn constant(&self, value: f64) -> Ensemble {
        Ensemble {
            space: self.id,
            samples: vec![value; self.path_count],
        }
    }

    /// Build an ensemble by evaluating `f` on every path index.
    pub fn from_fn(&self, f: impl Fn(usize) -> f64 + Send + Sync) -> Ensemble {
        let samples: Vec<f64> = (0..self.path_count).into_par_iter().map(f).collect();
        Ensemble {
            space: self.id,
            samples,
        }
    }

    /// Build an ensemble by drawing from a per-path stream. Generation is
    /// parallel across paths and independent of the worker count.
    pub fn sample(&self, tag: u64, draw: impl Fn(&mut ChaCha8Rng) -> f64 + Send + Sync) -> Ensemble {
        self.from_fn(|p| draw(&mut self.rng(p, Purpose::Adhoc(tag))))
    }

    /// Standard normal ensemble drawn from the per-path streams.
    pub fn sample_standard_normal(&self, tag: u64) -> Ensemble {
        self.sample(tag, |rng| {
            rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
        })
    }

    /// Uniform `[0, 1)` ensemble.
    pub fn sample_uniform(&self, tag: u64) -> Ensemble {
        self.sample(tag, rand::Rng::random)
    }

    /// Indicator ensemble with success probability `p`.
    pub fn sample_bernoulli(&self, tag: u64, p: f64) -> Ensemble {
        self.sample(tag, move |rng| {
            if rand::Rng::random::<f64>(rng) < p {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Heavy-tailed standard Cauchy ensemble.
    pub fn sample_cauchy(&self, tag: u64) -> Ensemble {
        self.sample(tag, |rng| {
            rand_distr::Distribution::sample(&rand_distr::Cauchy::new(0.0, 1.0).unwrap(), rng)
        })
    }

    /// Wrap raw samples; the length must match the path count.
    pub fn ensemble_from_samples(&self, samples: Vec<f64>) -> Result<Ensemble> {
        if samples.len() != self.path_count {
            return Err(CoreError::InvalidParameter(format!(
                "expected {} samples, got {}",
                self.path_count,
                samples.len()
            )));
        }
        Ok(Ensemble {
            space: self.id,
            samples,
        })
    }
}

/// A real random variable realized as aligned Monte Carlo samples.
/// Immutable after construction; all arithmetic allocates a new ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    space: SpaceId,
    samples: Vec<f64>,
}

impl Ensemble {
    pub(crate) fn from_raw(space: SpaceId, samples: Vec<f64>) -> Self {
        Self { space, samples }
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// True when any sample is NaN or infinite.
    pub fn is_degenerate(&self) -> bool {
        self.samples.iter().any(|x| !x.is_finite())
    }

    fn check_aligned(&self, other: &Ensemble) -> Result<()> {
        if self.space != other.space {
            return Err(CoreError::SpaceMismatch(format!(
                "{:?} vs {:?}",
                self.space, other.space
            )));
        }
        if self.samples.len() != other.samples.len() {
            return Err(CoreError::SpaceMismatch(format!(
                "sample counts {} vs {}",
                self.samples.len(),
                other.samples.len()
            )));
        }
        Ok(())
    }

    /// Per-outcome combination of two aligned ensembles.
    pub fn zip_with(&self, other: &Ensemble, f: impl Fn(f64, f64) -> f64) -> Result<Ensemble> {
        self.check_aligned(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Ensemble {
            space: self.space,
            samples,
        })
    }

    pub fn add(&self, other: &Ensemble) -> Result<Ensemble> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Ensemble) -> Result<Ensemble> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise (per-outcome) product.
    pub fn mul(&self, other: &Ensemble) -> Result<Ensemble> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Ensemble {
        Ensemble {
            space: self.space,
            samples: self.samples.iter().map(|x| factor * x).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Ensemble {
        Ensemble {
            space: self.space,
            samples: self.samples.iter().copied().map(f).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let ss: f64 = self.samples.iter().map(|x| (x - m) * (x - m)).sum();
        ss / (self.samples.len() - 1) as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    /// Empirical tail probability `P(|X| > c)`.
    pub fn tail_probability(&self, c: f64) -> f64 {
        let count = self.samples.iter().filter(|x| x.abs() > c).count();
        count as f64 / self.samples.len() as f64
    }
}

/// Value of the empirical Ky Fan quasi-norm. Always in `[0, 1]`:
/// `δ = 1` satisfies `P(|η| > 1) ≤ 1`, so the defining infimum never
/// exceeds one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct KyFanValue(f64);

impl KyFanValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for KyFanValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Exact empirical Ky Fan quasi-norm `inf { δ : #{k : |x_k| > δ}/M ≤ δ }`.
///
/// The empirical tail is a step function with jumps at the order statistics
/// of `|x|`, so the infimum is attained at `max(lower endpoint, tail level)`
/// of the first interval between order statistics that admits a feasible δ.
pub fn ky_fan(e: &Ensemble) -> Result<KyFanValue> {
    if e.is_degenerate() {
        return Err(CoreError::DegenerateInput(
            "ky_fan requires finite samples".into(),
        ));
    }
    let m = e.len();
    let mut sorted: Vec<f64> = e.samples.iter().map(|x| x.abs()).collect();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());

    // With j samples <= δ the tail is (m - j)/m, constant for δ in
    // [sorted[j-1], sorted[j]). Scan the intervals in order; feasibility is
    // monotone, so the first feasible interval yields the infimum.
    let mut best = f64::INFINITY;
    for j in 0..=m {
        let lo = if j == 0 { 0.0 } else { sorted[j - 1] };
        let hi = if j == m { f64::INFINITY } else { sorted[j] };
        let tail = (m - j) as f64 / m as f64;
        let candidate = lo.max(tail);
        if candidate < hi {
            best = candidate;
            break;
        }
    }
    debug_assert!(best <= 1.0 + 1e-15);
    Ok(KyFanValue(best.min(1.0)))
}

/// Ky Fan distance `‖a − b‖`, the metric of convergence in probability.
pub fn ky_fan_distance(a: &Ensemble, b: &Ensemble) -> Result<KyFanValue> {
    let diff = a.sub(b)?;
    ky_fan(&diff)
}

/// One row of a boundedness report: the worst tail over the family at one
/// threshold.
#[derive(Debug, Clone, Copy)]
pub struct TailRow {
    pub threshold: f64,
    pub sup_tail: f64,
}

/// Boundedness-in-probability diagnostic: for each threshold `c`, the
/// supremum over the family of `P(|ξ| > c)`. The caller judges whether the
/// tails decay to zero.
pub fn check_boundedness(family: &[Ensemble], thresholds: &[f64]) -> Result<Vec<TailRow>> {
    if family.is_empty() {
        return Err(CoreError::Domain("empty ensemble family".into()));
    }
    if thresholds.is_empty() {
        return Err(CoreError::Domain("no thresholds supplied".into()));
    }
    let space = family[0].space();
    for e in family {
        if e.space() != space {
            return Err(CoreError::SpaceMismatch(
                "boundedness family spans several spaces".into(),
            ));
        }
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CoreError::InvalidParameter(
            "thresholds must be strictly increasing".into(),
        ));
    }
    Ok(thresholds
        .iter()
        .map(|&c| TailRow {
            threshold: c,
            sup_tail: family
                .iter()
                .map(|e| e.tail_probability(c))
                .fold(0.0, f64::max),
        })
        .collect())
}

/// Result of the subset-maximum inequality check
/// `‖Σ c_k ξ_k‖ ≤ 16 · max_V ‖Σ_{k∈V} ξ_k‖`.
#[derive(Debug, Clone, Copy)]
pub struct SubsetInequalityReport {
    /// `‖Σ c_k ξ_k‖`.
    pub lhs: KyFanValue,
    /// `16 · max_V ‖Σ_{k∈V} ξ_k‖` over all subsets `V`.
    pub rhs: f64,
    /// `lhs / rhs` (zero when both sides vanish).
    pub ratio: f64,
    pub holds: bool,
}

/// Largest family size for which the `2^l` subset enumeration is allowed.
pub const SUBSET_ENUMERATION_LIMIT: usize = 20;

/// Checks the coefficient inequality against the exhaustive subset maximum.
///
/// Requires `|c_k| ≤ 1` and at most [`SUBSET_ENUMERATION_LIMIT`] ensembles;
/// the subset maximum is computed by exhaustive Gray-code enumeration, so
/// the right-hand side is exact for the empirical measure.
pub fn check_subset_inequality(
    xs: &[Ensemble],
    coeffs: &[f64],
) -> Result<SubsetInequalityReport> {
    let l = xs.len();
    if l == 0 || l != coeffs.len() {
        return Err(CoreError::InvalidParameter(format!(
            "need matching nonempty ensembles/coefficients, got {l}/{}",
            coeffs.len()
        )));
    }
    if l > SUBSET_ENUMERATION_LIMIT {
        return Err(CoreError::Budget(format!(
            "subset enumeration limited to {SUBSET_ENUMERATION_LIMIT} ensembles, got {l}"
        )));
    }
    if let Some(c) = coeffs.iter().find(|c| c.abs() > 1.0) {
        return Err(CoreError::Precondition(format!(
            "coefficients must satisfy |c| <= 1, got {c}"
        )));
    }
    let space = xs[0].space();
    let m = xs[0].len();
    for e in xs {
        if e.space() != space || e.len() != m {
            return Err(CoreError::SpaceMismatch(
                "subset inequality family spans several spaces".into(),
            ));
        }
    }

    let mut weighted = vec![0.0f64; m];
    for (e, &c) in xs.iter().zip(coeffs) {
        for (acc, &x) in weighted.iter_mut().zip(e.samples()) {
            *acc += c * x;
        }
    }
    let lhs = ky_fan(&Ensemble::from_raw(space, weighted))?;

    // Gray-code walk over all subsets: each step toggles one ensemble in
    // the running per-path sum.
    let mut acc = vec![0.0f64; m];
    let mut max_norm = 0.0f64;
    let mut gray_prev = 0u32;
    for i in 1u32..(1u32 << l) {
        let gray = i ^ (i >> 1);
        let flipped = (gray ^ gray_prev).trailing_zeros() as usize;
        let sign = if gray & (1 << flipped) != 0 { 1.0 } else { -1.0 };
        for (a, &x) in acc.iter_mut().zip(xs[flipped].samples()) {
            *a += sign * x;
        }
        gray_prev = gray;
        let norm = ky_fan(&Ensemble::from_raw(space, acc.clone()))?;
        max_norm = max_norm.max(norm.value());
    }

    let rhs = 16.0 * max_norm;
    let ratio = if rhs == 0.0 { 0.0 } else { lhs.value() / rhs };
    Ok(SubsetInequalityReport {
        lhs,
        rhs,
        ratio,
        // theorem-level statement; the epsilon only absorbs fp rounding in
        // the per-path sums
        holds: lhs.value() <= rhs + 1e-12,
    })
}
