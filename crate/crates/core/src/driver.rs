//! Simulated stochastic measures on the Borel subsets of `[0, T]`.
//!
//! A [`Driver`] realizes a measure path-by-path as increments over a dyadic
//! grid of `n = 2^k` cells. Values on finite interval unions are sums of
//! cell increments, so finite additivity holds per path by construction.
//! Cell sums are stored as a dyadic block tree: evaluating a union reads
//! the canonical block decomposition, which makes bisection splits exactly
//! additive in floating point as well.

use crate::error::{CoreError, Result};
use crate::prob::{Ensemble, ProbSpace, SpaceId};
use crate::rng::Purpose;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use std::sync::Arc;

/// Hard cap on the dyadic resolution; fractional noise synthesis is
/// O(n^2) per path and is meant for desk scale.
pub const MAX_GRID_LOG2: u32 = 14;

/// The supported driving noises.
#[derive(Clone)]
pub enum DriverKind {
    /// Standard Brownian increments, `Var μ([a,b]) = b - a`.
    Wiener,
    /// Fractional Brownian motion with Hurst index in `(1/2, 1)`.
    Fbm { hurst: f64 },
    /// Centered Poisson counting noise with intensity `rate > 0`.
    CompensatedPoisson { rate: f64 },
    /// Deterministic absolutely continuous measure `μ(A) = ∫_A rate dt`,
    /// identical on every path.
    Deterministic { rate: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl DriverKind {
    /// Lebesgue measure `dt` on `[0, T]`.
    pub fn lebesgue() -> Self {
        DriverKind::Deterministic {
            rate: Arc::new(|_| 1.0),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            DriverKind::Wiener => "wiener",
            DriverKind::Fbm { .. } => "fbm",
            DriverKind::CompensatedPoisson { .. } => "compensated_poisson",
            DriverKind::Deterministic { .. } => "deterministic",
        }
    }
}

impl std::fmt::Debug for DriverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DriverKind::Fbm { hurst } => write!(f, "fbm(H={hurst})"),
            DriverKind::CompensatedPoisson { rate } => {
                write!(f, "compensated_poisson(lambda={rate})")
            }
            other => write!(f, "{}", other.name()),
        }
    }
}

/// Dyadic block-sum tree over one path's increments: `levels[0]` holds the
/// `n` cell increments, `levels[k]` holds sums of blocks of `2^k` cells.
type BlockTree = Vec<Vec<f64>>;

/// Per-path trees; deterministic drivers store a single shared tree.
#[derive(Debug, Clone)]
enum Rows {
    PerPath(Vec<BlockTree>),
    Shared(BlockTree),
}

/// A stochastic measure sampled on a dyadic grid over `[0, horizon]`.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct Driver {
    kind: DriverKind,
    horizon: f64,
    grid_log2: u32,
    paths: usize,
    space: SpaceId,
    /// one block tree per path (levels outer, cells inner)
    trees: Rows,
}

fn build_tree(increments: Vec<f64>) -> BlockTree {
    let mut levels = vec![increments];
    while levels.last().unwrap().len() > 1 {
        let prev = levels.last().unwrap();
        let next: Vec<f64> = prev.chunks_exact(2).map(|c| c[0] + c[1]).collect();
        levels.push(next);
    }
    levels
}

/// Canonical dyadic block decomposition sum of cells `[lo, hi)`.
fn block_range_sum(levels: &[Vec<f64>], mut lo: usize, mut hi: usize) -> f64 {
    let mut acc_left = 0.0;
    let mut acc_right = 0.0;
    let mut level = 0;
    while lo < hi {
        if lo & 1 == 1 {
            acc_left += levels[level][lo];
            lo += 1;
        }
        if hi & 1 == 1 {
            hi -= 1;
            acc_right += levels[level][hi];
        }
        lo >>= 1;
        hi >>= 1;
        level += 1;
    }
    acc_left + acc_right
}

/// Unit-variance fractional Gaussian noise autocovariance at lag `k`.
fn fgn_autocov(hurst: f64, k: usize) -> f64 {
    let k = k as f64;
    0.5 * ((k + 1.0).powf(2.0 * hurst) - 2.0 * k.powf(2.0 * hurst)
        + (k - 1.0).abs().powf(2.0 * hurst))
}

/// Exact-covariance synthesis of fractional Gaussian noise from i.i.d.
/// standard normals via the Durbin-Levinson recursion. Linear in `z`.
fn fgn_from_normals(hurst: f64, z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let cov: Vec<f64> = (0..n).map(|k| fgn_autocov(hurst, k)).collect();
    let mut out = vec![0.0; n];
    let mut phi = vec![0.0; n];
    let mut psi = vec![0.0; n];
    out[0] = z[0];
    let mut v = 1.0;
    for i in 1..n {
        phi[i - 1] = cov[i];
        psi[..i - 1].copy_from_slice(&phi[..i - 1]);
        for j in 0..i - 1 {
            phi[i - 1] -= psi[j] * cov[i - j - 1];
        }
        phi[i - 1] /= v;
        for j in 0..i - 1 {
            phi[j] = psi[j] - phi[i - 1] * psi[i - j - 2];
        }
        v *= 1.0 - phi[i - 1] * phi[i - 1];
        let mut pred = 0.0;
        for j in 0..i {
            pred += phi[j] * out[i - j - 1];
        }
        out[i] = pred + v.sqrt() * z[i];
    }
    out
}

// 4-point Gauss-Legendre rule on [-1, 1], used for cell integrals of
// deterministic rates.
const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_86,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_86,
];

impl Driver {
    /// Realizes the measure on `n = 2^grid_log2` dyadic cells of
    /// `[0, horizon]`. `stream` distinguishes independent drivers living on
    /// the same probability space.
    pub fn new(
        ps: &ProbSpace,
        kind: DriverKind,
        horizon: f64,
        grid_log2: u32,
        stream: u64,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if grid_log2 == 0 || grid_log2 > MAX_GRID_LOG2 {
            return Err(CoreError::Grid(format!(
                "grid_log2 must be in 1..={MAX_GRID_LOG2}, got {grid_log2}"
            )));
        }
        match kind {
            DriverKind::Fbm { hurst } if !(hurst > 0.5 && hurst < 1.0) => {
                return Err(CoreError::InvalidParameter(format!(
                    "H out of (1/2,1): {hurst}"
                )));
            }
            DriverKind::CompensatedPoisson { rate } if !(rate > 0.0 && rate.is_finite()) => {
                return Err(CoreError::InvalidParameter(format!(
                    "poisson intensity must be positive, got {rate}"
                )));
            }
            _ => {}
        }

        let n = 1usize << grid_log2;
        let dt = horizon / n as f64;
        let trees = match &kind {
            DriverKind::Deterministic { rate } => {
                let mut cells = Vec::with_capacity(n);
                for i in 0..n {
                    let a = i as f64 * dt;
                    let mut acc = 0.0;
                    for (x, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
                        acc += w * rate(a + 0.5 * dt * (x + 1.0));
                    }
                    cells.push(acc * 0.5 * dt);
                }
                Rows::Shared(build_tree(cells))
            }
            _ => {
                let rows: Vec<BlockTree> = (0..ps.paths())
                    .into_par_iter()
                    .map(|p| {
                        let mut rng = ps.rng(p, Purpose::Driver(stream));
                        let cells = match &kind {
                            DriverKind::Wiener => {
                                let s = dt.sqrt();
                                (0..n)
                                    .map(|_| {
                                        let z: f64 = StandardNormal.sample(&mut rng);
                                        s * z
                                    })
                                    .collect()
                            }
                            DriverKind::Fbm { hurst } => {
                                let z: Vec<f64> =
                                    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                                let scale = dt.powf(*hurst);
                                fgn_from_normals(*hurst, &z)
                                    .into_iter()
                                    .map(|x| scale * x)
                                    .collect()
                            }
                            DriverKind::CompensatedPoisson { rate } => {
                                let mean = rate * dt;
                                let pois = Poisson::new(mean).expect("validated rate");
                                (0..n).map(|_| pois.sample(&mut rng) - mean).collect()
                            }
                            DriverKind::Deterministic { .. } => unreachable!(),
                        };
                        build_tree(cells)
                    })
                    .collect();
                Rows::PerPath(rows)
            }
        };

        Ok(Self {
            kind,
            horizon,
            grid_log2,
            paths: ps.paths(),
            space: ps.id(),
            trees,
        })
    }

    pub fn kind(&self) -> &DriverKind {
        &self.kind
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn grid_log2(&self) -> u32 {
        self.grid_log2
    }

    pub fn cells(&self) -> usize {
        1 << self.grid_log2
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.cells() as f64
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    fn tree(&self, path: usize) -> &[Vec<f64>] {
        match &self.trees {
            Rows::PerPath(rows) => &rows[path],
            Rows::Shared(row) => row,
        }
    }

    /// μ(A) for a grid-aligned finite interval union, summed per path over
    /// the canonical dyadic block decomposition.
    pub fn measure(&self, a: &IntervalUnion) -> Result<Ensemble> {
        if a.cells != self.cells() || (a.horizon - self.horizon).abs() > 1e-12 {
            return Err(CoreError::Grid(format!(
                "interval union aligned to ({}, {} cells), driver has ({}, {})",
                a.horizon,
                a.cells,
                self.horizon,
                self.cells()
            )));
        }
        let samples: Vec<f64> = (0..self.paths)
            .into_par_iter()
            .map(|p| {
                let tree = self.tree(p);
                a.cell_ranges
                    .iter()
                    .map(|&(lo, hi)| block_range_sum(tree, lo, hi))
                    .sum()
            })
            .collect();
        Ok(Ensemble::from_raw(self.space, samples))
    }

    /// Cell increments aggregated to `2^level` cells. `level` must not
    /// exceed the driver resolution.
    pub fn increments_at_level(&self, level: u32) -> Result<AggregatedIncrements<'_>> {
        if level > self.grid_log2 {
            return Err(CoreError::Grid(format!(
                "aggregation level {level} exceeds driver resolution {}",
                self.grid_log2
            )));
        }
        Ok(AggregatedIncrements {
            driver: self,
            tree_level: (self.grid_log2 - level) as usize,
            cells: 1usize << level,
        })
    }

    /// Left-point Riemann-Stieltjes integral `∫ g dμ` of a deterministic
    /// integrand, with increments aggregated to the requested level.
    /// `g` must evaluate finite on the grid (bounded integrands only).
    pub fn integrate_det(&self, g: impl Fn(f64) -> f64, level: u32) -> Result<Ensemble> {
        let agg = self.increments_at_level(level)?;
        let width = self.horizon / agg.cells as f64;
        let mut weights = Vec::with_capacity(agg.cells);
        for k in 0..agg.cells {
            let v = g(k as f64 * width);
            if !v.is_finite() {
                return Err(CoreError::Precondition(format!(
                    "integrand is not finite at s = {}",
                    k as f64 * width
                )));
            }
            weights.push(v);
        }
        let samples: Vec<f64> = (0..self.paths)
            .into_par_iter()
            .map(|p| {
                let row = agg.row(p);
                weights.iter().zip(row).map(|(w, dmu)| w * dmu).sum()
            })
            .collect();
        Ok(Ensemble::from_raw(self.space, samples))
    }

    /// The cumulative process `t ↦ μ([0, t])` with linear interpolation
    /// between grid points, for use as a random-function integrand.
    pub fn path_process(&self) -> PathProcess {
        let n = self.cells();
        let prefixes: Vec<Vec<f64>> = (0..self.paths)
            .map(|p| {
                let incs = &self.tree(p)[0];
                let mut pre = Vec::with_capacity(n + 1);
                let mut acc = 0.0;
                pre.push(0.0);
                for &x in incs {
                    acc += x;
                    pre.push(acc);
                }
                pre
            })
            .collect();
        PathProcess {
            prefixes: Arc::new(prefixes),
            horizon: self.horizon,
            space: self.space,
        }
    }
}

/// View of driver increments aggregated to a coarser dyadic level.
pub struct AggregatedIncrements<'a> {
    driver: &'a Driver,
    tree_level: usize,
    cells: usize,
}

impl AggregatedIncrements<'_> {
    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn row(&self, path: usize) -> &[f64] {
        &self.driver.tree(path)[self.tree_level]
    }
}

/// Cumulative driver values, evaluable at any time in `[0, horizon]`.
#[derive(Clone)]
pub struct PathProcess {
    prefixes: Arc<Vec<Vec<f64>>>,
    horizon: f64,
    space: SpaceId,
}

impl PathProcess {
    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn paths(&self) -> usize {
        self.prefixes.len()
    }

    /// `μ([0, t])` for one path, linearly interpolated between grid nodes.
    pub fn eval(&self, path: usize, t: f64) -> f64 {
        let pre = &self.prefixes[path];
        let n = pre.len() - 1;
        let x = (t / self.horizon * n as f64).clamp(0.0, n as f64);
        let i = (x.floor() as usize).min(n - 1);
        let frac = x - i as f64;
        pre[i] + frac * (pre[i + 1] - pre[i])
    }
}

/// A finite union of disjoint closed intervals inside `[0, horizon]`,
/// endpoints snapped to the dyadic grid with `cells` cells.
#[derive(Debug, Clone)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
    cell_ranges: Vec<(usize, usize)>,
    horizon: f64,
    cells: usize,
}

impl IntervalUnion {
    /// Snap raw intervals to the grid. Fails if an endpoint lies outside
    /// `[0, horizon]`, if snapping would move it by more than one cell, or
    /// if the snapped intervals overlap.
    pub fn snap(intervals: &[(f64, f64)], horizon: f64, cells: usize) -> Result<Self> {
        if !(horizon > 0.0) || cells == 0 || !cells.is_power_of_two() {
            return Err(CoreError::Grid(format!(
                "need positive horizon and power-of-two cells, got ({horizon}, {cells})"
            )));
        }
        let dt = horizon / cells as f64;
        let mut snapped = Vec::with_capacity(intervals.len());
        for &(a, b) in intervals {
            if !(0.0..=horizon + 1e-12).contains(&a) || !(0.0..=horizon + 1e-12).contains(&b) {
                return Err(CoreError::Domain(format!(
                    "interval [{a}, {b}] outside [0, {horizon}]"
                )));
            }
            if a > b {
                return Err(CoreError::Domain(format!("inverted interval [{a}, {b}]")));
            }
            let ia = (a / dt).round() as usize;
            let ib = (b / dt).round() as usize;
            if (ia as f64 * dt - a).abs() > dt || (ib as f64 * dt - b).abs() > dt {
                return Err(CoreError::Grid(format!(
                    "snapping [{a}, {b}] moves an endpoint by more than one cell"
                )));
            }
            snapped.push((ia.min(cells), ib.min(cells)));
        }
        snapped.sort_unstable();
        for w in snapped.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(CoreError::Domain(
                    "snapped intervals overlap".to_string(),
                ));
            }
        }
        Ok(Self {
            intervals: snapped
                .iter()
                .map(|&(i, j)| (i as f64 * dt, j as f64 * dt))
                .collect(),
            cell_ranges: snapped.into_iter().filter(|(i, j)| i < j).collect(),
            horizon,
            cells,
        })
    }

    pub fn empty(horizon: f64, cells: usize) -> Result<Self> {
        Self::snap(&[], horizon, cells)
    }

    /// Snapped closed intervals.
    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Total length of the union.
    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::ky_fan_distance;
    use approx::assert_relative_eq;

    fn ps(paths: usize, seed: u64) -> ProbSpace {
        ProbSpace::new(paths, seed).unwrap()
    }

    #[test]
    fn deterministic_unit_rate_cells() {
        let ps = ps(4, 0);
        let d = Driver::new(&ps, DriverKind::lebesgue(), 1.0, 3, 0).unwrap();
        let agg = d.increments_at_level(3).unwrap();
        for p in 0..4 {
            for &c in agg.row(p) {
                assert_relative_eq!(c, 0.125, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn deterministic_interval_mass() {
        let ps = ps(8, 0);
        let d = Driver::new(&ps, DriverKind::lebesgue(), 1.0, 10, 0).unwrap();
        let a = IntervalUnion::snap(&[(0.25, 0.5)], 1.0, d.cells()).unwrap();
        let e = d.measure(&a).unwrap();
        for &x in e.samples() {
            assert_relative_eq!(x, 0.25, epsilon = 1e-12);
        }
        // non-dyadic endpoints snap within one cell of the request
        let b = IntervalUnion::snap(&[(0.2, 0.5)], 1.0, d.cells()).unwrap();
        let m = d.measure(&b).unwrap().samples()[0];
        assert_relative_eq!(m, b.length(), epsilon = 1e-12);
        assert!((m - 0.3).abs() <= 1.0 / d.cells() as f64);
    }

    #[test]
    fn empty_union_zero() {
        let ps = ps(16, 2);
        let d = Driver::new(&ps, DriverKind::Wiener, 1.0, 6, 0).unwrap();
        let e = d.measure(&IntervalUnion::empty(1.0, 64).unwrap()).unwrap();
        assert!(e.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bisection_additivity_bit_exact() {
        let ps = ps(64, 3);
        let d = Driver::new(&ps, DriverKind::Wiener, 1.0, 8, 0).unwrap();
        let whole = d
            .measure(&IntervalUnion::snap(&[(0.0, 1.0)], 1.0, 256).unwrap())
            .unwrap();
        let left = d
            .measure(&IntervalUnion::snap(&[(0.0, 0.5)], 1.0, 256).unwrap())
            .unwrap();
        let right = d
            .measure(&IntervalUnion::snap(&[(0.5, 1.0)], 1.0, 256).unwrap())
            .unwrap();
        let sum = left.add(&right).unwrap();
        assert_eq!(whole, sum); // bitwise: canonical block decomposition
    }

    #[test]
    fn general_aligned_additivity() {
        let ps = ps(32, 4);
        let d = Driver::new(&ps, DriverKind::Wiener, 2.0, 7, 0).unwrap();
        let u = IntervalUnion::snap(&[(0.0, 0.375), (0.375, 1.25)], 2.0, 128).unwrap();
        let v = IntervalUnion::snap(&[(0.0, 1.25)], 2.0, 128).unwrap();
        let a = d.measure(&u).unwrap();
        let b = d.measure(&v).unwrap();
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn snap_guards() {
        assert!(IntervalUnion::snap(&[(0.0, 1.5)], 1.0, 8).is_err()); // outside horizon
        assert!(IntervalUnion::snap(&[(0.5, 0.2)], 1.0, 8).is_err()); // inverted
        assert!(IntervalUnion::snap(&[(0.0, 0.5), (0.25, 0.75)], 1.0, 8).is_err());
        // round-to-nearest moves endpoints by at most half a cell
        let u = IntervalUnion::snap(&[(0.21, 0.79)], 1.0, 16).unwrap();
        let (a, b) = u.intervals()[0];
        assert!((a - 0.21).abs() <= 0.5 / 16.0 && (b - 0.79).abs() <= 0.5 / 16.0);
    }

    #[test]
    fn parameter_guards() {
        let ps = ps(4, 0);
        assert!(Driver::new(&ps, DriverKind::Fbm { hurst: 0.4 }, 1.0, 4, 0).is_err());
        assert!(Driver::new(&ps, DriverKind::Fbm { hurst: 1.0 }, 1.0, 4, 0).is_err());
        assert!(
            Driver::new(&ps, DriverKind::CompensatedPoisson { rate: 0.0 }, 1.0, 4, 0).is_err()
        );
        assert!(Driver::new(&ps, DriverKind::Wiener, 1.0, 15, 0).is_err());
        assert!(Driver::new(&ps, DriverKind::Wiener, -1.0, 4, 0).is_err());
    }

    #[test]
    fn wiener_increment_variance() {
        let ps = ps(4000, 5);
        let d = Driver::new(&ps, DriverKind::Wiener, 1.0, 8, 0).unwrap();
        let a = IntervalUnion::snap(&[(0.125, 0.5)], 1.0, 256).unwrap();
        let e = d.measure(&a).unwrap();
        let var = e.variance();
        let se = 0.375 * (2.0 / (ps.paths() as f64 - 1.0)).sqrt();
        assert!((var - 0.375).abs() < 3.0 * se, "var {var}");
        assert!(e.mean().abs() < 3.0 * (0.375f64 / ps.paths() as f64).sqrt());
    }

    #[test]
    fn fbm_variance_power_law() {
        let ps = ps(4000, 6);
        let hurst = 0.7;
        let d = Driver::new(&ps, DriverKind::Fbm { hurst }, 1.0, 8, 0).unwrap();
        for t in [0.25, 0.5, 1.0] {
            let a = IntervalUnion::snap(&[(0.0, t)], 1.0, 256).unwrap();
            let var = d.measure(&a).unwrap().variance();
            let expect = t.powf(2.0 * hurst);
            let se = expect * (2.0 / (ps.paths() as f64 - 1.0)).sqrt();
            assert!(
                (var - expect).abs() < 3.0 * se,
                "t={t}: var {var} vs {expect}"
            );
        }
    }

    /// The synthesis is linear in the normal draws, so feeding unit
    /// vectors extracts its matrix L; L Lᵀ must reproduce the fGn
    /// covariance exactly.
    #[test]
    fn fbm_synthesis_covariance_structure() {
        let hurst = 0.75;
        let n = 8;
        let mut l = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut z = vec![0.0; n];
            z[j] = 1.0;
            let col = fgn_from_normals(hurst, &z);
            for i in 0..n {
                l[i][j] = col[i];
            }
        }
        for i in 0..n {
            for j in 0..n {
                let cov: f64 = (0..n).map(|k| l[i][k] * l[j][k]).sum();
                let expect = fgn_autocov(hurst, i.abs_diff(j));
                assert_relative_eq!(cov, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn compensated_poisson_moments() {
        let ps = ps(4000, 7);
        let rate = 2.0;
        let d = Driver::new(&ps, DriverKind::CompensatedPoisson { rate }, 1.0, 8, 0).unwrap();
        let a = IntervalUnion::snap(&[(0.0, 0.5)], 1.0, 256).unwrap();
        let e = d.measure(&a).unwrap();
        let lam_t = rate * 0.5;
        assert!(e.mean().abs() < 3.0 * (lam_t / ps.paths() as f64).sqrt());
        let se = lam_t * (2.0 / (ps.paths() as f64 - 1.0)).sqrt() * 1.5;
        assert!((e.variance() - lam_t).abs() < 3.0 * se);
    }

    #[test]
    fn integrate_indicator_equals_measure() {
        let ps = ps(200, 8);
        let d = Driver::new(&ps, DriverKind::Wiener, 1.0, 8, 0).unwrap();
        let a = IntervalUnion::snap(&[(0.25, 0.75)], 1.0, 256).unwrap();
        let by_measure = d.measure(&a).unwrap();
        let by_integral = d
            .integrate_det(|s| if (0.25..0.75).contains(&s) { 1.0 } else { 0.0 }, 8)
            .unwrap();
        for (x, y) in by_measure.samples().iter().zip(by_integral.samples()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn ito_isometry_linear_integrand() {
        let ps = ps(4000, 9);
        let d = Driver::new(&ps, DriverKind::Wiener, 1.0, 8, 0).unwrap();
        let e = d.integrate_det(|s| s, 8).unwrap();
        // discrete isometry: sum of s_k^2 dt, close to 1/3
        let var = e.variance();
        let se = (1.0 / 3.0) * (2.0 / (ps.paths() as f64 - 1.0)).sqrt();
        assert!((var - 1.0 / 3.0).abs() < 3.0 * se + 3e-3, "var {var}");
    }

    #[test]
    fn deterministic_linear_integrand() {
        let ps = ps(4, 0);
        let d = Driver::new(&ps, DriverKind::lebesgue(), 1.0, 10, 0).unwrap();
        for level in [6u32, 8, 10] {
            let e = d.integrate_det(|s| s, level).unwrap();
            let width = 1.0 / (1 << level) as f64;
            // left-point rule for linear integrand: 0.5 - width/2
            assert_relative_eq!(e.samples()[0], 0.5 - 0.5 * width, epsilon = 1e-12);
        }
    }

    #[test]
    fn integrate_rejects_unbounded() {
        let ps = ps(4, 0);
        let d = Driver::new(&ps, DriverKind::lebesgue(), 1.0, 4, 0).unwrap();
        assert!(matches!(
            d.integrate_det(|s| 1.0 / s, 4),
            Err(CoreError::Precondition(_))
        ));
        assert!(d.integrate_det(|s| s, 5).is_err()); // level above resolution
    }

    #[test]
    fn integrate_linearity_per_path() {
        let ps = ps(100, 10);
        let d = Driver::new(&ps, DriverKind::Wiener, 1.0, 7, 0).unwrap();
        let g1 = |s: f64| s * s;
        let g2 = |s: f64| (2.0 * s).cos();
        let combo = d.integrate_det(|s| 2.0 * g1(s) - 0.5 * g2(s), 7).unwrap();
        let split = d
            .integrate_det(g1, 7)
            .unwrap()
            .scale(2.0)
            .sub(&d.integrate_det(g2, 7).unwrap().scale(0.5))
            .unwrap();
        for (x, y) in combo.samples().iter().zip(split.samples()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn refinement_stability() {
        let ps = ps(1000, 11);
        let d = Driver::new(&ps, DriverKind::Wiener, 1.0, 10, 0).unwrap();
        let g = |s: f64| (1.0 + s).sqrt();
        let dists: Vec<f64> = (4..9)
            .map(|level| {
                let coarse = d.integrate_det(g, level).unwrap();
                let fine = d.integrate_det(g, level + 1).unwrap();
                ky_fan_distance(&coarse, &fine).unwrap().value()
            })
            .collect();
        assert!(dists.last().unwrap() < &0.01, "{dists:?}");
        assert!(dists.last().unwrap() <= &(dists[0] + 2.0 / (1000f64).sqrt()));
    }

    #[test]
    fn reproducible_across_construction() {
        let ps = ps(50, 12);
        let a = Driver::new(&ps, DriverKind::Wiener, 1.0, 6, 0).unwrap();
        let b = Driver::new(&ps, DriverKind::Wiener, 1.0, 6, 0).unwrap();
        let u = IntervalUnion::snap(&[(0.0, 1.0)], 1.0, 64).unwrap();
        assert_eq!(a.measure(&u).unwrap(), b.measure(&u).unwrap());
        let c = Driver::new(&ps, DriverKind::Wiener, 1.0, 6, 1).unwrap();
        assert_ne!(a.measure(&u).unwrap(), c.measure(&u).unwrap());
    }

    #[test]
    fn path_process_interpolates() {
        let ps = ps(10, 13);
        let d = Driver::new(&ps, DriverKind::Wiener, 1.0, 4, 0).unwrap();
        let w = d.path_process();
        let u = IntervalUnion::snap(&[(0.0, 0.5)], 1.0, 16).unwrap();
        let half = d.measure(&u).unwrap();
        for p in 0..10 {
            assert_relative_eq!(w.eval(p, 0.5), half.samples()[p], epsilon = 1e-12);
            assert_eq!(w.eval(p, 0.0), 0.0);
            let a = w.eval(p, 0.25);
            let b = w.eval(p, 0.3125);
            let mid = w.eval(p, 0.28125);
            assert_relative_eq!(mid, 0.5 * (a + b), epsilon = 1e-12);
        }
    }
}
