//! Riemann integration of random functions as limits in probability.
//!
//! The integral of a random function over a box is the tagged-partition sum
//! `Σ ξ(x_k) m(B_k)` carried to a fine dyadic level. Existence of the limit
//! in probability is operationalized by a finite surrogate: the Ky Fan
//! distance between consecutive refinements must fall below tolerance at
//! two successive levels, and two independent tag rules must agree at the
//! finest level. Improper integrals run the same machinery over a growing
//! exhaustion of boxes.
//!
//! Cell sums are accumulated by a fixed pairwise halving tree, so results
//! are bit-identical for any worker count and telescoping of constant
//! fields is exact in floating point.

use crate::error::{CoreError, Result};
use crate::prob::{ky_fan_distance, Ensemble, ProbSpace, SpaceId};
use crate::rng::{tag_stream, Purpose};
use rand::Rng;
use std::sync::Arc;

/// Total cell budget for one partition sum.
pub const CELL_BUDGET_LOG2: u32 = 20;
/// Maximum refinement level per axis.
pub const MAX_LEVEL: u32 = 12;
/// Truncation depth of the non-integrable example field.
pub const PATHOLOGY_DEPTH: usize = 20;

const PAR_THRESHOLD: usize = 64;

/// An axis-aligned closed box in `R^d`; its Jordan content is the product
/// of the side lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    intervals: Vec<(f64, f64)>,
}

impl BoxDomain {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(CoreError::Domain("box needs at least one axis".into()));
        }
        for &(a, b) in &intervals {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                return Err(CoreError::Domain(format!("bad axis interval [{a}, {b}]")));
            }
        }
        Ok(Self { intervals })
    }

    /// One-dimensional box `[a, b]`.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    /// `[-half_width, half_width]^d`.
    pub fn centered(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![(-half_width, half_width); dim])
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Jordan content.
    pub fn content(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).product()
    }

    pub fn diameter(&self) -> f64 {
        self.intervals
            .iter()
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    /// Cartesian product with another box.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut intervals = self.intervals.clone();
        intervals.extend_from_slice(&other.intervals);
        BoxDomain { intervals }
    }

    /// Split in two halves along the given axis.
    pub fn bisect(&self, axis: usize) -> (BoxDomain, BoxDomain) {
        let (a, b) = self.intervals[axis];
        let mid = 0.5 * (a + b);
        let mut left = self.clone();
        let mut right = self.clone();
        left.intervals[axis] = (a, mid);
        right.intervals[axis] = (mid, b);
        (left, right)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self
                .intervals
                .iter()
                .zip(x)
                .all(|(&(a, b), &xi)| (a..=b).contains(&xi))
    }

    pub fn contains_box(&self, other: &BoxDomain) -> bool {
        other.dim() == self.dim()
            && self
                .intervals
                .iter()
                .zip(&other.intervals)
                .all(|(&(a, b), &(c, d))| a <= c + 1e-12 && d <= b + 1e-12)
    }
}

/// How the evaluation point of each partition cell is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TagRule {
    /// Cell midpoint (the default rule).
    Center,
    /// Lower corner of the cell.
    LowerCorner,
    /// Deterministic pseudo-random point inside the cell, keyed by
    /// `(seed, cell index)` and shared by all paths.
    Random { seed: u64 },
}

/// Per-path evaluation closure of a random field.
type FieldEval = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A random function: a map from points to ensembles over one probability
/// space. Evaluation must be pure, so fields can be integrated in parallel.
#[derive(Clone)]
pub struct RandomField {
    space: SpaceId,
    paths: usize,
    dim: usize,
    domain: Option<BoxDomain>,
    eval: FieldEval,
}

impl RandomField {
    /// Wrap a raw evaluation closure returning one sample per path.
    pub fn new(
        ps: &ProbSpace,
        dim: usize,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::with_space(ps.id(), ps.paths(), dim, eval)
    }

    /// As [`RandomField::new`], but keyed by raw space parts (useful when
    /// the field is derived from an existing driver or ensemble).
    pub fn with_space(
        space: SpaceId,
        paths: usize,
        dim: usize,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            space,
            paths,
            dim,
            domain: None,
            eval: Arc::new(eval),
        }
    }

    /// The cumulative process of a driver, `t ↦ μ([0, t])`, as a random
    /// function on `[0, horizon]`.
    pub fn from_cumulative(w: crate::driver::PathProcess) -> Self {
        let paths = w.paths();
        let domain = BoxDomain::interval(0.0, w.horizon()).expect("positive horizon");
        Self::with_space(w.space(), paths, 1, move |x| {
            (0..paths).map(|p| w.eval(p, x[0])).collect()
        })
        .with_domain(domain)
    }

    /// Field built from a per-`(path, point)` scalar rule.
    pub fn from_path_fn(
        ps: &ProbSpace,
        dim: usize,
        f: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let paths = ps.paths();
        Self::new(ps, dim, move |x| (0..paths).map(|p| f(p, x)).collect())
    }

    /// Deterministic field: the same value on every path.
    pub fn deterministic(
        ps: &ProbSpace,
        dim: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let paths = ps.paths();
        Self::new(ps, dim, move |x| vec![f(x); paths])
    }

    /// Field constant in `x`, equal to one fixed random variable.
    pub fn constant_ensemble(ps: &ProbSpace, dim: usize, e: Ensemble) -> Result<Self> {
        if e.space() != ps.id() {
            return Err(CoreError::SpaceMismatch(
                "ensemble belongs to another space".into(),
            ));
        }
        let samples = e.into_samples();
        Ok(Self::new(ps, dim, move |_| samples.clone()))
    }

    /// Restrict the declared domain; integration outside it is rejected.
    pub fn with_domain(mut self, domain: BoxDomain) -> Self {
        self.domain = Some(domain);
        self
    }

    /// The weighted field `x ↦ w(x)·ξ(x)`.
    pub fn weighted(&self, w: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        let inner = Arc::clone(&self.eval);
        Self {
            space: self.space,
            paths: self.paths,
            dim: self.dim,
            domain: self.domain.clone(),
            eval: Arc::new(move |x| {
                let c = w(x);
                let mut v = inner(x);
                for s in &mut v {
                    *s *= c;
                }
                v
            }),
        }
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Option<&BoxDomain> {
        self.domain.as_ref()
    }

    pub fn eval(&self, x: &[f64]) -> Ensemble {
        Ensemble::from_raw(self.space, self.eval_raw(x))
    }

    fn eval_raw(&self, x: &[f64]) -> Vec<f64> {
        let v = (self.eval)(x);
        debug_assert_eq!(v.len(), self.paths);
        v
    }
}

struct PartitionSpec<'a> {
    boxref: &'a BoxDomain,
    level: u32,
    per_axis: usize,
    volume: f64,
}

impl PartitionSpec<'_> {
    fn tag(&self, cell: usize, rule: &TagRule) -> Vec<f64> {
        let d = self.boxref.dim();
        let mut coords = Vec::with_capacity(d);
        let mut idx = cell;
        let mut rng = match rule {
            TagRule::Random { seed } => Some(tag_stream(*seed ^ (self.level as u64) << 32, cell as u64)),
            _ => None,
        };
        for axis in 0..d {
            let k = idx % self.per_axis;
            idx /= self.per_axis;
            let (a, b) = self.boxref.intervals()[axis];
            let w = (b - a) / self.per_axis as f64;
            let t = match rule {
                TagRule::Center => a + (k as f64 + 0.5) * w,
                TagRule::LowerCorner => a + k as f64 * w,
                TagRule::Random { .. } => {
                    let u: f64 = rng.as_mut().unwrap().random();
                    a + (k as f64 + u) * w
                }
            };
            coords.push(t);
        }
        coords
    }
}

fn sum_cells(f: &RandomField, spec: &PartitionSpec<'_>, rule: &TagRule, lo: usize, hi: usize) -> Vec<f64> {
    if hi - lo == 1 {
        let tag = spec.tag(lo, rule);
        let mut v = f.eval_raw(&tag);
        for s in &mut v {
            *s *= spec.volume;
        }
        v
    } else {
        let mid = lo + (hi - lo) / 2;
        let (mut a, b) = if hi - lo >= PAR_THRESHOLD {
            rayon::join(
                || sum_cells(f, spec, rule, lo, mid),
                || sum_cells(f, spec, rule, mid, hi),
            )
        } else {
            (
                sum_cells(f, spec, rule, lo, mid),
                sum_cells(f, spec, rule, mid, hi),
            )
        };
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    }
}

fn check_budget(dim: usize, level: u32) -> Result<usize> {
    if level > MAX_LEVEL {
        return Err(CoreError::Budget(format!(
            "level {level} exceeds the per-axis maximum {MAX_LEVEL}"
        )));
    }
    let bits = dim as u32 * level;
    if bits > CELL_BUDGET_LOG2 {
        return Err(CoreError::Budget(format!(
            "2^{bits} cells exceed the 2^{CELL_BUDGET_LOG2} budget"
        )));
    }
    Ok(1usize << bits)
}

/// One tagged-partition sum `Σ ξ(x_k) m(B_k)` on the dyadic partition of
/// `b` at `level` (each axis split into `2^level` segments).
pub fn riemann_sum(
    f: &RandomField,
    b: &BoxDomain,
    level: u32,
    rule: TagRule,
) -> Result<Ensemble> {
    if f.dim() != b.dim() {
        return Err(CoreError::Domain(format!(
            "field dimension {} vs box dimension {}",
            f.dim(),
            b.dim()
        )));
    }
    if let Some(domain) = f.domain() {
        if !domain.contains_box(b) {
            return Err(CoreError::Domain(
                "box extends outside the field's declared domain".into(),
            ));
        }
    }
    let cells = check_budget(b.dim(), level)?;
    let spec = PartitionSpec {
        boxref: b,
        level,
        per_axis: 1usize << level,
        volume: b.content() / cells as f64,
    };
    Ok(Ensemble::from_raw(
        f.space(),
        sum_cells(f, &spec, &rule, 0, cells),
    ))
}

/// Deterministic midpoint rule for a scalar function on a box, with the
/// same pairwise accumulation as the random sums.
pub fn midpoint_integral(f: impl Fn(&[f64]) -> f64, b: &BoxDomain, level: u32) -> f64 {
    let per_axis = 1usize << level;
    let cells = per_axis.pow(b.dim() as u32);
    let volume = b.content() / cells as f64;
    fn rec(
        f: &impl Fn(&[f64]) -> f64,
        b: &BoxDomain,
        per_axis: usize,
        volume: f64,
        lo: usize,
        hi: usize,
    ) -> f64 {
        if hi - lo == 1 {
            let mut idx = lo;
            let mut x = Vec::with_capacity(b.dim());
            for axis in 0..b.dim() {
                let k = idx % per_axis;
                idx /= per_axis;
                let (a, bb) = b.intervals()[axis];
                let w = (bb - a) / per_axis as f64;
                x.push(a + (k as f64 + 0.5) * w);
            }
            f(&x) * volume
        } else {
            let mid = lo + (hi - lo) / 2;
            rec(f, b, per_axis, volume, lo, mid) + rec(f, b, per_axis, volume, mid, hi)
        }
    }
    rec(&f, b, per_axis, volume, 0, cells)
}

/// Verdict of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected,
}

/// Refinement diagnostics for an integral: Ky Fan distances between
/// consecutive levels, the tag-rule cross-check at the finest level, and
/// the resulting verdict. Accepted only when the last two consecutive
/// distances and the cross-check distance are all within tolerance.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub levels: Vec<u32>,
    pub distances: Vec<f64>,
    pub cross_check: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl ConvergenceReport {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accepted
    }

    fn judge(levels: Vec<u32>, distances: Vec<f64>, cross_check: f64, tol: f64) -> Self {
        let n = distances.len();
        let verdict = if n >= 2
            && distances[n - 1] <= tol
            && distances[n - 2] <= tol
            && cross_check <= tol
        {
            Verdict::Accepted
        } else {
            Verdict::Rejected
        };
        Self {
            levels,
            distances,
            cross_check,
            tolerance: tol,
            verdict,
        }
    }
}

/// Riemann integral of a random function over a box, with the convergence
/// report for the refinement study ending at `max_level`.
///
/// Non-convergence is not an error: the report carries a rejected verdict
/// and the finest-level sum is still returned.
pub fn riemann_integral(
    f: &RandomField,
    b: &BoxDomain,
    max_level: u32,
    tol: f64,
) -> Result<(Ensemble, ConvergenceReport)> {
    check_budget(b.dim(), max_level)?;
    if max_level < 2 {
        return Err(CoreError::InvalidParameter(
            "refinement study needs max_level >= 2".into(),
        ));
    }
    let start = max_level.saturating_sub(3);
    let levels: Vec<u32> = (start..=max_level).collect();
    let sums: Vec<Ensemble> = levels
        .iter()
        .map(|&l| riemann_sum(f, b, l, TagRule::Center))
        .collect::<Result<_>>()?;
    let mut distances = Vec::with_capacity(sums.len() - 1);
    for w in sums.windows(2) {
        distances.push(ky_fan_distance(&w[0], &w[1])?.value());
    }
    let finest = sums.last().unwrap().clone();
    let lower = riemann_sum(f, b, max_level, TagRule::LowerCorner)?;
    let random = riemann_sum(
        f,
        b,
        max_level,
        TagRule::Random {
            seed: 0x7461_6773,
        },
    )?;
    let cross = ky_fan_distance(&finest, &lower)?
        .value()
        .max(ky_fan_distance(&finest, &random)?.value());
    let report = ConvergenceReport::judge(levels, distances, cross, tol);
    Ok((finest, report))
}

/// A growing sequence of centered boxes `[-L_j, L_j]^d`, `L_j = L_0 2^j`,
/// exhausting `R^d`.
#[derive(Debug, Clone)]
pub struct Exhaustion {
    dim: usize,
    initial_half_width: f64,
    levels: usize,
}

impl Exhaustion {
    pub fn new(dim: usize, initial_half_width: f64, levels: usize) -> Result<Self> {
        if !(initial_half_width > 0.0) || dim == 0 || levels < 2 {
            return Err(CoreError::InvalidParameter(
                "exhaustion needs positive initial width, dim >= 1, >= 2 levels".into(),
            ));
        }
        Ok(Self {
            dim,
            initial_half_width,
            levels,
        })
    }

    pub fn len(&self) -> usize {
        self.levels
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self, j: usize) -> f64 {
        self.initial_half_width * (1u64 << j) as f64
    }

    pub fn level_box(&self, j: usize) -> BoxDomain {
        BoxDomain::centered(self.dim, self.half_width(j)).expect("validated widths")
    }
}

/// Improper Riemann integral over an unbounded domain via exhaustive boxes.
/// Each box is integrated at `inner_level`; acceptance requires the last
/// two consecutive exhaustion distances within tolerance plus an accepted
/// refinement report on the final box.
pub fn improper_integral(
    f: &RandomField,
    exhaustion: &Exhaustion,
    inner_level: u32,
    tol: f64,
) -> Result<(Ensemble, ConvergenceReport)> {
    if exhaustion.dim() != f.dim() {
        return Err(CoreError::Domain(format!(
            "field dimension {} vs exhaustion dimension {}",
            f.dim(),
            exhaustion.dim()
        )));
    }
    let mut sums = Vec::with_capacity(exhaustion.len());
    for j in 0..exhaustion.len() {
        sums.push(riemann_sum(
            f,
            &exhaustion.level_box(j),
            inner_level,
            TagRule::Center,
        )?);
    }
    let mut distances = Vec::with_capacity(sums.len() - 1);
    for w in sums.windows(2) {
        distances.push(ky_fan_distance(&w[0], &w[1])?.value());
    }
    let (finest, inner_report) =
        riemann_integral(f, &exhaustion.level_box(exhaustion.len() - 1), inner_level, tol)?;
    let levels: Vec<u32> = (0..exhaustion.len() as u32).collect();
    let mut report =
        ConvergenceReport::judge(levels, distances, inner_report.cross_check, tol);
    if !inner_report.accepted() {
        report.verdict = Verdict::Rejected;
    }
    Ok((finest, report))
}

/// Riemann integral over a product domain `B × S`, computed as a single
/// partition sum in `dim(B) + dim(S)` variables.
pub fn product_integral(
    f: &RandomField,
    b: &BoxDomain,
    s: &BoxDomain,
    max_level: u32,
    tol: f64,
) -> Result<(Ensemble, ConvergenceReport)> {
    riemann_integral(f, &b.product(s), max_level, tol)
}

/// The non-integrable example field on `[0, 1]`: levels `ξ_k = base^k 1_{F_k}`
/// with independent events of probability `1/k`, constant on
/// `[2^{-2k-1}, 2^{-2k}]` and linearly interpolated between levels, zero at
/// the origin and truncated below depth [`PATHOLOGY_DEPTH`].
pub fn pathological_field_with_base(ps: &ProbSpace, base: f64) -> RandomField {
    // per path: level values base^k * 1{F_k}, k = 1..=DEPTH, plus the
    // truncation level 0 at index DEPTH
    let levels: Vec<Vec<f64>> = (0..ps.paths())
        .map(|p| {
            let mut rng = ps.rng(p, Purpose::Pathology);
            let mut vals = Vec::with_capacity(PATHOLOGY_DEPTH + 1);
            for k in 1..=PATHOLOGY_DEPTH {
                let fires = rng.random::<f64>() < 1.0 / k as f64;
                vals.push(if fires { base.powi(k as i32) } else { 0.0 });
            }
            vals.push(0.0);
            vals
        })
        .collect();
    let levels = Arc::new(levels);
    let paths = ps.paths();
    let eval = move |x: &[f64]| -> Vec<f64> {
        let x = x[0];
        if x <= 0.0 {
            return vec![0.0; paths];
        }
        // piece index: plateau [2^{-2k-1}, 2^{-2k}] or ramp below it
        for k in 1..=PATHOLOGY_DEPTH {
            let hi = 0.25f64.powi(k as i32); // 2^{-2k}
            let mid = 0.5 * hi; // 2^{-2k-1}
            let lo = 0.25 * hi; // 2^{-2k-2}
            if x > hi {
                // only reachable for k == 1: extend the first level up to 1
                return levels.iter().map(|v| v[0]).collect();
            }
            if x >= mid {
                return levels.iter().map(|v| v[k - 1]).collect();
            }
            if x >= lo {
                let slope = 1.0 / (mid - lo);
                let w_next = (mid - x) * slope;
                let w_this = (x - lo) * slope;
                return levels
                    .iter()
                    .map(|v| w_next * v[k] + w_this * v[k - 1])
                    .collect();
            }
        }
        vec![0.0; paths]
    };
    RandomField::new(ps, 1, eval).with_domain(BoxDomain::interval(0.0, 1.0).unwrap())
}

/// The example field with its canonical level amplitude 5.
pub fn build_pathological_field(ps: &ProbSpace) -> RandomField {
    pathological_field_with_base(ps, 5.0)
}

/// One row of the non-integrability demonstration.
#[derive(Debug, Clone, Copy)]
pub struct PathologyRow {
    pub n: usize,
    /// `‖(1/n) ∫_{A_n} ξ dx‖` where `A_n` joins the first `n` plateaus.
    pub scaled_norm: f64,
}

/// Quasi-norms of the scaled integrals over growing plateau unions. For an
/// integrable field these would vanish; here they stay above a positive
/// floor, demonstrating that stochastic continuity does not imply
/// integrability.
pub fn pathological_demo(ps: &ProbSpace, n_max: usize) -> Result<Vec<PathologyRow>> {
    if n_max == 0 || n_max > 12 {
        return Err(CoreError::InvalidParameter(format!(
            "n_max must be in 1..=12, got {n_max}"
        )));
    }
    let field = build_pathological_field(ps);
    let mut rows = Vec::with_capacity(n_max);
    let mut partial: Option<Ensemble> = None;
    for n in 1..=n_max {
        let hi = 0.25f64.powi(n as i32);
        let plateau = BoxDomain::interval(0.5 * hi, hi)?;
        // the field is constant on each plateau, so a shallow sum is exact
        let piece = riemann_sum(&field, &plateau, 2, TagRule::Center)?;
        partial = Some(match partial {
            None => piece,
            Some(acc) => acc.add(&piece)?,
        });
        let scaled = partial.as_ref().unwrap().scale(1.0 / n as f64);
        rows.push(PathologyRow {
            n,
            scaled_norm: crate::prob::ky_fan(&scaled)?.value(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{check_boundedness, ky_fan, ProbSpace};
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn ps(paths: usize, seed: u64) -> ProbSpace {
        ProbSpace::new(paths, seed).unwrap()
    }

    /// Pairwise halving sum, matching the accumulation order of the cell
    /// tree; exact when all addends are equal and the length is a power
    /// of two.
    fn pairwise_sum(xs: &[f64]) -> f64 {
        match xs.len() {
            0 => 0.0,
            1 => xs[0],
            2 => xs[0] + xs[1],
            n => {
                let (a, b) = xs.split_at(n / 2);
                pairwise_sum(a) + pairwise_sum(b)
            }
        }
    }

    #[test]
    fn box_content_and_product() {
        let b = BoxDomain::new(vec![(0.0, 2.0), (1.0, 1.5)]).unwrap();
        assert_relative_eq!(b.content(), 1.0);
        let s = BoxDomain::interval(0.0, 3.0).unwrap();
        let p = b.product(&s);
        assert_eq!(p.dim(), 3);
        assert_relative_eq!(p.content(), 3.0);
        assert!(BoxDomain::interval(1.0, 0.0).is_err());
    }

    #[test]
    fn partition_volumes_telescope_exactly() {
        let b = BoxDomain::new(vec![(0.1, 0.9), (-1.0, 2.0)]).unwrap();
        for level in [1u32, 3, 5] {
            let cells = 1usize << (2 * level);
            let v = b.content() / cells as f64;
            let total = pairwise_sum(&vec![v; cells]);
            assert_eq!(total, b.content());
        }
    }

    #[test]
    fn deterministic_linear_field() {
        let ps = ps(4, 0);
        let f = RandomField::deterministic(&ps, 1, |x| x[0]);
        let b = BoxDomain::interval(0.0, 1.0).unwrap();
        for level in [2u32, 4, 8] {
            let s = riemann_sum(&f, &b, level, TagRule::Center).unwrap();
            // midpoint rule is exact for linear integrands
            assert_relative_eq!(s.samples()[0], 0.5, epsilon = 1e-13);
            let left = riemann_sum(&f, &b, level, TagRule::LowerCorner).unwrap();
            assert!((left.samples()[0] - 0.5).abs() <= 0.5f64.powi(level as i32));
        }
    }

    #[test]
    fn constant_random_field_exact_telescoping() {
        let ps = ps(64, 1);
        let eta = ps.sample(0, |rng| StandardNormal.sample(rng));
        let b = BoxDomain::new(vec![(0.25, 1.75), (-0.5, 0.5)]).unwrap();
        let f = RandomField::constant_ensemble(&ps, 2, eta.clone()).unwrap();
        for level in [1u32, 3, 5] {
            let s = riemann_sum(&f, &b, level, TagRule::Center).unwrap();
            let expect = eta.scale(b.content());
            assert_eq!(s, expect, "level {level} must telescope bitwise");
        }
    }

    #[test]
    fn integral_report_accepts_smooth_field() {
        let ps = ps(200, 2);
        let amp = ps.sample(1, |rng| StandardNormal.sample(rng));
        let amp_samples = amp.samples().to_vec();
        let f = RandomField::new(&ps, 1, move |x| {
            amp_samples.iter().map(|a| a * (2.0 * x[0]).sin() + x[0]).collect()
        });
        let b = BoxDomain::interval(0.0, 1.0).unwrap();
        let (int, report) = riemann_integral(&f, &b, 8, 0.02).unwrap();
        assert!(report.accepted(), "{report:?}");
        // E[sin component] cancels per path against the analytic value
        let expect = amp.scale(0.5 * (1.0 - 2.0f64.cos())).map(|v| v + 0.5);
        let d = ky_fan_distance(&int, &expect).unwrap().value();
        assert!(d < 0.02, "distance {d}");
    }

    #[test]
    fn integral_report_rejects_rough_field() {
        let ps = ps(100, 3);
        // white-noise style field: fresh draw for every evaluation point,
        // no refinement limit exists at these scales
        let f = RandomField::from_path_fn(&ps, 1, |p, x| {
            let cell = (x[0] * 1e9) as u64;
            let mut rng = crate::rng::tag_stream(p as u64, cell);
            let z: f64 = StandardNormal.sample(&mut rng);
            30.0 * z
        });
        let b = BoxDomain::interval(0.0, 1.0).unwrap();
        let (_, report) = riemann_integral(&f, &b, 6, 0.02).unwrap();
        assert!(!report.accepted());
    }

    #[test]
    fn additivity_over_bisection() {
        let ps = ps(300, 4);
        let w = {
            let d = crate::driver::Driver::new(
                &ps,
                crate::driver::DriverKind::Wiener,
                1.0,
                10,
                0,
            )
            .unwrap();
            d.path_process()
        };
        let f = RandomField::new(&ps, 1, move |x| {
            (0..300).map(|p| w.eval(p, x[0])).collect()
        });
        let b = BoxDomain::interval(0.0, 1.0).unwrap();
        let (left, right) = b.bisect(0);
        let whole = riemann_sum(&f, &b, 8, TagRule::Center).unwrap();
        let parts = riemann_sum(&f, &left, 7, TagRule::Center)
            .unwrap()
            .add(&riemann_sum(&f, &right, 7, TagRule::Center).unwrap())
            .unwrap();
        // the level-7 halves tag exactly the level-8 cells of the whole box
        let d = ky_fan_distance(&whole, &parts).unwrap().value();
        assert!(d < 1e-12, "split additivity distance {d}");
    }

    #[test]
    fn sub_integrals_bounded_in_probability() {
        let ps = ps(400, 5);
        let amp = ps.sample(2, |rng| StandardNormal.sample(rng));
        let f = RandomField::constant_ensemble(&ps, 1, amp).unwrap();
        let mut family = Vec::new();
        for i in 0..8 {
            for j in (i + 1)..=8 {
                let b = BoxDomain::interval(i as f64 / 8.0, j as f64 / 8.0).unwrap();
                family.push(riemann_sum(&f, &b, 4, TagRule::Center).unwrap());
            }
        }
        let rows = check_boundedness(&family, &[1.0, 4.0, 16.0, 64.0]).unwrap();
        assert!(rows.last().unwrap().sup_tail < 1e-3);
        assert!(rows.windows(2).all(|w| w[1].sup_tail <= w[0].sup_tail));
    }

    #[test]
    fn weighted_field_stays_integrable_and_bounded() {
        let ps = ps(300, 6);
        let amp = ps.sample(3, |rng| StandardNormal.sample(rng));
        let xi = RandomField::constant_ensemble(&ps, 1, amp).unwrap();
        let weight = |x: &[f64]| (3.0 * x[0]).cos();
        let fxi = xi.weighted(weight);
        let b = BoxDomain::interval(0.0, 1.0).unwrap();
        let (int_fxi, report) = riemann_integral(&fxi, &b, 8, 0.02).unwrap();
        assert!(report.accepted());

        // Lemma-style weighted bound with constant 16 over a dyadic lattice
        let c = 1.0; // sup |cos|
        let mut sup = 0.0f64;
        for i in 0..8 {
            for j in (i + 1)..=8 {
                let sub = BoxDomain::interval(i as f64 / 8.0, j as f64 / 8.0).unwrap();
                let v = riemann_sum(&xi, &sub, 5, TagRule::Center).unwrap().scale(c);
                sup = sup.max(ky_fan(&v).unwrap().value());
            }
        }
        assert!(ky_fan(&int_fxi).unwrap().value() <= 16.0 * sup + 1e-9);
    }

    #[test]
    fn uniformly_vanishing_weights_kill_the_integral() {
        let ps = ps(300, 7);
        let amp = ps.sample(4, |rng| StandardNormal.sample(rng));
        let xi = RandomField::constant_ensemble(&ps, 1, amp).unwrap();
        let b = BoxDomain::interval(0.0, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for n in [1.0f64, 4.0, 16.0, 64.0] {
            let fn_xi = xi.weighted(move |x| (x[0] * 7.0).sin() / n);
            let v = riemann_sum(&fn_xi, &b, 7, TagRule::Center).unwrap();
            let norm = ky_fan(&v).unwrap().value();
            assert!(norm <= last + 1e-12);
            last = norm;
        }
        assert!(last < 0.02);
    }

    #[test]
    fn improper_vanishing_weights_kill_the_integral() {
        // uniformly bounded weights that vanish on every bounded set
        let ps = ps(300, 15);
        let amp = ps.sample(7, |rng| StandardNormal.sample(rng));
        let xi = RandomField::constant_ensemble(&ps, 1, amp).unwrap();
        let decaying = xi.weighted(|x| (-x[0].abs()).exp());
        let exh = Exhaustion::new(1, 2.0, 5).unwrap();
        let mut last = f64::INFINITY;
        for n in [1.0f64, 8.0, 64.0, 512.0] {
            let fn_field = decaying.weighted(move |x| (x[0].abs() / n).tanh());
            let (int, _) = improper_integral(&fn_field, &exh, 9, 0.05).unwrap();
            let norm = ky_fan(&int).unwrap().value();
            assert!(norm <= last + 1e-12, "n={n}");
            last = norm;
        }
        // the scale shrinks like 2/n; the quasi-norm follows its quantile
        assert!(last < 0.02, "final norm {last}");
    }

    #[test]
    fn pathological_family_tails_do_not_decay() {
        let ps = ps(4000, 16);
        let field = build_pathological_field(&ps);
        let mut family = Vec::new();
        let mut partial: Option<Ensemble> = None;
        for n in 1..=8usize {
            let hi = 0.25f64.powi(n as i32);
            let plateau = BoxDomain::interval(0.5 * hi, hi).unwrap();
            let piece = riemann_sum(&field, &plateau, 2, TagRule::Center).unwrap();
            partial = Some(match partial.take() {
                None => piece,
                Some(acc) => acc.add(&piece).unwrap(),
            });
            family.push(partial.as_ref().unwrap().scale(1.0 / n as f64));
        }
        // thresholds stay inside the range reachable at truncation depth
        // n <= 8; measured sup tails are 1.0, 1.0, ~0.16
        let rows = check_boundedness(&family, &[0.25, 0.5, 0.75]).unwrap();
        for row in &rows {
            assert!(
                row.sup_tail >= 0.05,
                "tail at c={} collapsed to {}",
                row.threshold,
                row.sup_tail
            );
        }
    }

    #[test]
    fn improper_gaussian_integral() {
        let ps = ps(4, 8);
        let f = RandomField::deterministic(&ps, 1, |x| (-x[0] * x[0]).exp());
        let exh = Exhaustion::new(1, 1.0, 4).unwrap();
        let (int, report) = improper_integral(&f, &exh, 10, 0.02).unwrap();
        assert!(report.accepted(), "{report:?}");
        assert_relative_eq!(
            int.samples()[0],
            std::f64::consts::PI.sqrt(),
            epsilon = 1e-6
        );
    }

    #[test]
    fn improper_factorized_exponential() {
        let ps = ps(200, 9);
        let amp = ps.sample(5, |rng| StandardNormal.sample(rng));
        let xi = RandomField::constant_ensemble(&ps, 1, amp.clone()).unwrap();
        let f = xi.weighted(|x| (-x[0].abs()).exp());
        let exh = Exhaustion::new(1, 2.0, 5).unwrap();
        let (int, report) = improper_integral(&f, &exh, 10, 0.02).unwrap();
        assert!(report.accepted());
        let d = ky_fan_distance(&int, &amp.scale(2.0)).unwrap().value();
        assert!(d < 0.02, "distance {d}");
    }

    #[test]
    fn product_integral_polynomial() {
        let ps = ps(4, 10);
        let f = RandomField::deterministic(&ps, 2, |x| x[0] * x[1]);
        let b = BoxDomain::interval(0.0, 1.0).unwrap();
        let s = BoxDomain::interval(0.0, 1.0).unwrap();
        let (int, report) = product_integral(&f, &b, &s, 6, 0.02).unwrap();
        assert!(report.accepted());
        assert_relative_eq!(int.samples()[0], 0.25, epsilon = 1e-10);
    }

    #[test]
    fn product_integral_constant_ensemble() {
        let ps = ps(50, 11);
        let eta = ps.sample(6, |rng| StandardNormal.sample(rng));
        let f = RandomField::constant_ensemble(&ps, 2, eta.clone()).unwrap();
        let b = BoxDomain::interval(0.0, 1.0).unwrap();
        let s = BoxDomain::interval(0.0, 1.0).unwrap();
        let (int, _) = product_integral(&f, &b, &s, 5, 0.02).unwrap();
        assert_eq!(int, eta);
    }

    #[test]
    fn budget_guards() {
        let ps = ps(4, 0);
        let f = RandomField::deterministic(&ps, 2, |_| 1.0);
        let b = BoxDomain::centered(2, 1.0).unwrap();
        assert!(matches!(
            riemann_sum(&f, &b, 11, TagRule::Center),
            Err(CoreError::Budget(_))
        ));
        let f1 = RandomField::deterministic(&ps, 1, |_| 1.0);
        assert!(riemann_sum(&f1, &BoxDomain::interval(0.0, 1.0).unwrap(), 13, TagRule::Center)
            .is_err());
    }

    #[test]
    fn domain_guard() {
        let ps = ps(4, 0);
        let f = RandomField::deterministic(&ps, 1, |_| 1.0)
            .with_domain(BoxDomain::interval(0.0, 1.0).unwrap());
        let outside = BoxDomain::interval(0.5, 2.0).unwrap();
        assert!(matches!(
            riemann_sum(&f, &outside, 3, TagRule::Center),
            Err(CoreError::Domain(_))
        ));
    }

    #[test]
    fn pathological_field_shape() {
        let ps = ps(2000, 12);
        let field = build_pathological_field(ps_ref(&ps));
        // P(F_1) = 1 so the first plateau must be 5 on (almost) every path
        let at_one = field.eval(&[1.0]);
        let frac_five = at_one
            .samples()
            .iter()
            .filter(|&&v| (v - 5.0).abs() < 1e-12)
            .count() as f64
            / at_one.len() as f64;
        assert!(frac_five > 0.999, "got {frac_five}");

        // midpoint of the first ramp is the average of the two levels
        let mid = 0.5 * (0.0625 + 0.125);
        let ramp_mid = field.eval(&[mid]);
        let lv1 = field.eval(&[0.2]);
        let lv2 = field.eval(&[0.05]);
        let avg = lv1.add(&lv2).unwrap().scale(0.5);
        for (a, b) in ramp_mid.samples().iter().zip(avg.samples()) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }

        // stochastic continuity at fixed probe points
        for x in [0.9, 0.5, 0.2, 0.1, 0.05] {
            let d = ky_fan_distance(&field.eval(&[x]), &field.eval(&[x + 1e-4]))
                .unwrap()
                .value();
            assert!(d <= 0.05, "x={x}: {d}");
        }
    }

    fn ps_ref(ps: &ProbSpace) -> &ProbSpace {
        ps
    }

    #[test]
    fn pathological_demo_floor_and_oracle() {
        let ps = ps(10_000, 13);
        let rows = pathological_demo(&ps, 8).unwrap();
        for row in &rows {
            assert!(
                row.scaled_norm >= 0.05,
                "n={} norm {}",
                row.n,
                row.scaled_norm
            );
        }

        // closed-form plateau sums reproduce the n = 1 row exactly:
        // the first plateau is [1/8, 1/4] with constant value 5·1_{F_1}
        let field = build_pathological_field(&ps);
        let lv1 = field.eval(&[0.2]);
        let oracle = ky_fan(&lv1.scale(0.25 - 0.125)).unwrap().value();
        assert_relative_eq!(rows[0].scaled_norm, oracle, epsilon = 1e-12);

        // zero base kills every row
        let zero = pathological_field_with_base(&ps, 0.0);
        let z = zero.eval(&[0.2]);
        assert!(z.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pathological_scaled_family_not_vanishing_but_each_plateau_bounded() {
        let ps = ps(4000, 14);
        let rows = pathological_demo(&ps, 8).unwrap();
        let min = rows
            .iter()
            .map(|r| r.scaled_norm)
            .fold(f64::INFINITY, f64::min);
        assert!(min >= 0.05, "floor {min}");
    }

    #[test]
    fn midpoint_matches_analytic() {
        let b = BoxDomain::interval(0.0, 2.0).unwrap();
        let v = midpoint_integral(|x| x[0] * x[0], &b, 10);
        assert_relative_eq!(v, 8.0 / 3.0, epsilon = 1e-5);
    }
}
