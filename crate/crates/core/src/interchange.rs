//! Residual checks for the interchange-of-integration and
//! integration-by-parts identities.
//!
//! Every identity is evaluated as two (or three) independent numerical
//! pipelines sharing one driver realization per path, so the reported
//! Ky Fan residual measures discretization error rather than Monte Carlo
//! mismatch. Residuals are traced across refinement levels; a pipeline
//! whose own convergence report rejects makes the identity inconclusive.

use crate::driver::Driver;
use crate::error::{CoreError, Result};
use crate::prob::{ky_fan_distance, Ensemble, KyFanValue};
use crate::riemann::{
    improper_integral, midpoint_integral, riemann_integral, riemann_sum, BoxDomain, Exhaustion,
    RandomField, TagRule,
};
use std::sync::Arc;

/// Shared deterministic integrand on space x time.
type SpaceTimeFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Residual of one identity at one refinement level.
#[derive(Debug, Clone, Copy)]
pub struct LevelResidual {
    pub level: u32,
    pub residual: f64,
}

/// Both sides of an identity at the finest level, their Ky Fan residual,
/// and the residual trace across refinement levels.
#[derive(Debug, Clone)]
pub struct IdentityResidual {
    pub lhs: Ensemble,
    pub rhs: Ensemble,
    pub residual: KyFanValue,
    pub trace: Vec<LevelResidual>,
}

impl IdentityResidual {
    fn from_sides(sides: Vec<(u32, Ensemble, Ensemble)>) -> Result<Self> {
        let mut trace = Vec::with_capacity(sides.len());
        for (level, lhs, rhs) in &sides {
            trace.push(LevelResidual {
                level: *level,
                residual: ky_fan_distance(lhs, rhs)?.value(),
            });
        }
        let (_, lhs, rhs) = sides.into_iter().last().expect("at least one level");
        let residual = ky_fan_distance(&lhs, &rhs)?;
        Ok(Self {
            lhs,
            rhs,
            residual,
            trace,
        })
    }
}

/// A continuously differentiable deterministic function together with its
/// derivative; constructing one requires supplying both, which is the
/// precondition of the integration-by-parts identity.
#[derive(Clone)]
pub struct C1Fn {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl C1Fn {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            df: Arc::new(df),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, |_| 0.0)
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        (self.df)(u)
    }
}

fn trace_levels(level: u32) -> std::ops::RangeInclusive<u32> {
    level.saturating_sub(2)..=level
}

/// The random function `x ↦ ∫ h(x, s) dμ(s)` at a fixed time level.
fn inner_dmu_field(
    driver: &Arc<Driver>,
    h: &SpaceTimeFn,
    dim: usize,
    time_level: u32,
) -> RandomField {
    let driver = Arc::clone(driver);
    let h = Arc::clone(h);
    RandomField::with_space(driver.space(), driver.paths(), dim, move |x| {
        driver
            .integrate_det(|s| h(x, s), time_level)
            .expect("level validated by caller")
            .into_samples()
    })
}

/// The finest midpoint level affordable for classical integrals over a
/// box of this dimension, at least three levels above `level`.
fn reference_level(level: u32, dim: usize) -> u32 {
    let cap = (crate::riemann::CELL_BUDGET_LOG2 / dim as u32).min(crate::riemann::MAX_LEVEL);
    (level + 3).min(cap)
}

/// Interchange of a Riemann integral over a bounded box with a stochastic
/// integral: compares `∫_B dx ∫ h dμ` against `∫ dμ(s) ∫_B h(·,s) dx`.
///
/// The two sides deliberately use decoupled discretizations — the left
/// side tags `B` at the trace level while the right side integrates
/// `h(·, s)` on a much finer reference partition — so the residual
/// measures the real approximation error of the interchange, not a
/// reordering of one shared sum. The stochastic integrals on both sides
/// run on the driver's finest grid with one realization per path.
///
/// `h` must be dominated by a dμ-integrable bound in `s`; this hypothesis
/// is asserted by the caller, not verified here.
pub fn fubini_residual(
    driver: &Arc<Driver>,
    h: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    b: &BoxDomain,
    level: u32,
    tol: f64,
) -> Result<IdentityResidual> {
    if level > driver.grid_log2() {
        return Err(CoreError::Grid(format!(
            "level {level} exceeds driver resolution {}",
            driver.grid_log2()
        )));
    }
    let h: SpaceTimeFn = Arc::new(h);
    let time_level = driver.grid_log2();
    let field = inner_dmu_field(driver, &h, b.dim(), time_level);

    let rhs = {
        let h = Arc::clone(&h);
        let b = b.clone();
        let fine = reference_level(level, b.dim());
        driver.integrate_det(
            move |s| midpoint_integral(|x| h(x, s), &b, fine),
            time_level,
        )?
    };

    let mut sides = Vec::new();
    for l in trace_levels(level) {
        let lhs = riemann_sum(&field, b, l, TagRule::Center)?;
        sides.push((l, lhs, rhs.clone()));
    }

    let (_, report) = riemann_integral(&field, b, level, tol)?;
    if !report.accepted() {
        return Err(CoreError::Inconclusive(format!(
            "left side rejected its convergence report: {report:?}"
        )));
    }
    IdentityResidual::from_sides(sides)
}

/// Improper variant of [`fubini_residual`]: the spatial integral runs over
/// an exhaustion of an unbounded domain. The caller asserts that both
/// `|h(x, s)| ≤ g(s)` and `∫ |h(x, s)| dx = g₁(s)` are dμ-integrable.
pub fn fubini_improper_residual(
    driver: &Arc<Driver>,
    h: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    exhaustion: &Exhaustion,
    inner_level: u32,
    tol: f64,
) -> Result<IdentityResidual> {
    if inner_level > driver.grid_log2() {
        return Err(CoreError::Grid(format!(
            "level {inner_level} exceeds driver resolution {}",
            driver.grid_log2()
        )));
    }
    let h: SpaceTimeFn = Arc::new(h);
    let time_level = driver.grid_log2();
    let field = inner_dmu_field(driver, &h, exhaustion.dim(), time_level);
    let fine = reference_level(inner_level, exhaustion.dim());

    let mut sides = Vec::new();
    for j in 0..exhaustion.len() {
        let b = exhaustion.level_box(j);
        let lhs = riemann_sum(&field, &b, inner_level, TagRule::Center)?;
        let h_inner = Arc::clone(&h);
        let rhs = driver.integrate_det(
            move |s| midpoint_integral(|x| h_inner(x, s), &b, fine),
            time_level,
        )?;
        sides.push((j as u32, lhs, rhs));
    }

    let (_, report) = improper_integral(&field, exhaustion, inner_level, tol)?;
    if !report.accepted() {
        return Err(CoreError::Inconclusive(format!(
            "improper left side rejected its convergence report: {report:?}"
        )));
    }
    IdentityResidual::from_sides(sides)
}

/// Restriction of a product-domain field to a slice at fixed leading (or
/// trailing) coordinates.
fn slice_field(f: &RandomField, fixed: Vec<f64>, fixed_first: bool, free_dim: usize) -> RandomField {
    let inner = f.clone();
    RandomField::with_space(f.space(), f.paths(), free_dim, move |free| {
        let mut point = Vec::with_capacity(fixed.len() + free.len());
        if fixed_first {
            point.extend_from_slice(&fixed);
            point.extend_from_slice(free);
        } else {
            point.extend_from_slice(free);
            point.extend_from_slice(&fixed);
        }
        inner.eval(&point).into_samples()
    })
}

/// Compares the single integral over `B × S` with both iterated orders.
/// Returns `(product vs ∫_B dx ∫_S ds, product vs ∫_S ds ∫_B dx)`.
pub fn iterated_product_residual(
    f: &RandomField,
    b: &BoxDomain,
    s: &BoxDomain,
    level: u32,
    tol: f64,
) -> Result<(IdentityResidual, IdentityResidual)> {
    if f.dim() != b.dim() + s.dim() {
        return Err(CoreError::Domain(format!(
            "field dimension {} does not match product dimension {}",
            f.dim(),
            b.dim() + s.dim()
        )));
    }
    let product_box = b.product(s);
    let (_, report) = riemann_integral(f, &product_box, level, tol)?;
    if !report.accepted() {
        return Err(CoreError::Inconclusive(
            "product integral rejected its convergence report".into(),
        ));
    }
    // probe slice integrability at the domain centers
    let center = |bx: &BoxDomain| -> Vec<f64> {
        bx.intervals().iter().map(|(a, b)| 0.5 * (a + b)).collect()
    };
    let s_slice = slice_field(f, center(b), true, s.dim());
    let (_, s_report) = riemann_integral(&s_slice, s, level.min(8), tol)?;
    let b_slice = slice_field(f, center(s), false, b.dim());
    let (_, b_report) = riemann_integral(&b_slice, b, level.min(8), tol)?;
    if !s_report.accepted() || !b_report.accepted() {
        return Err(CoreError::Inconclusive(
            "a probe slice rejected its convergence report".into(),
        ));
    }

    // the iterated pipelines resolve their inner slices on a finer
    // reference partition, decoupling them from the product sum
    let mut sides_bs = Vec::new();
    let mut sides_sb = Vec::new();
    for l in trace_levels(level) {
        let product = riemann_sum(f, &product_box, l, TagRule::Center)?;
        let inner_s = reference_level(l, s.dim());
        let f_bs = {
            let inner = f.clone();
            let s = s.clone();
            let s_dim = s.dim();
            RandomField::with_space(f.space(), f.paths(), b.dim(), move |x| {
                let slice = slice_field(&inner, x.to_vec(), true, s_dim);
                riemann_sum(&slice, &s, inner_s, TagRule::Center)
                    .expect("validated dims")
                    .into_samples()
            })
        };
        let iter_bs = riemann_sum(&f_bs, b, l, TagRule::Center)?;
        let inner_b = reference_level(l, b.dim());
        let f_sb = {
            let inner = f.clone();
            let b = b.clone();
            let b_dim = b.dim();
            RandomField::with_space(f.space(), f.paths(), s.dim(), move |sv| {
                let slice = slice_field(&inner, sv.to_vec(), false, b_dim);
                riemann_sum(&slice, &b, inner_b, TagRule::Center)
                    .expect("validated dims")
                    .into_samples()
            })
        };
        let iter_sb = riemann_sum(&f_sb, s, l, TagRule::Center)?;
        sides_bs.push((l, product.clone(), iter_bs));
        sides_sb.push((l, product, iter_sb));
    }
    Ok((
        IdentityResidual::from_sides(sides_bs)?,
        IdentityResidual::from_sides(sides_sb)?,
    ))
}

/// Exhaustion variant of the iterated-product identity for an unbounded
/// first factor: compares `∫_{B̃×S} f` against both iterated orders, with
/// `B̃` exhausted by growing boxes. The trace runs over exhaustion levels
/// at a fixed inner resolution.
pub fn iterated_product_improper_residual(
    f: &RandomField,
    exhaustion: &Exhaustion,
    s: &BoxDomain,
    inner_level: u32,
    tol: f64,
) -> Result<(IdentityResidual, IdentityResidual)> {
    if f.dim() != exhaustion.dim() + s.dim() {
        return Err(CoreError::Domain(format!(
            "field dimension {} does not match product dimension {}",
            f.dim(),
            exhaustion.dim() + s.dim()
        )));
    }
    let final_box = exhaustion.level_box(exhaustion.len() - 1);
    let (_, report) = riemann_integral(f, &final_box.product(s), inner_level, tol)?;
    if !report.accepted() {
        return Err(CoreError::Inconclusive(
            "product integral over the final exhaustion box rejected its report".into(),
        ));
    }

    let inner_s = reference_level(inner_level, s.dim());
    let mut sides_bs = Vec::new();
    let mut sides_sb = Vec::new();
    for j in 0..exhaustion.len() {
        let b = exhaustion.level_box(j);
        let product = riemann_sum(f, &b.product(s), inner_level, TagRule::Center)?;
        let f_bs = {
            let inner = f.clone();
            let s = s.clone();
            let s_dim = s.dim();
            RandomField::with_space(f.space(), f.paths(), b.dim(), move |x| {
                let slice = slice_field(&inner, x.to_vec(), true, s_dim);
                riemann_sum(&slice, &s, inner_s, TagRule::Center)
                    .expect("validated dims")
                    .into_samples()
            })
        };
        let iter_bs = riemann_sum(&f_bs, &b, inner_level, TagRule::Center)?;
        let inner_b = reference_level(inner_level, b.dim());
        let f_sb = {
            let inner = f.clone();
            let b = b.clone();
            let b_dim = b.dim();
            RandomField::with_space(f.space(), f.paths(), s.dim(), move |sv| {
                let slice = slice_field(&inner, sv.to_vec(), false, b_dim);
                riemann_sum(&slice, &b, inner_b, TagRule::Center)
                    .expect("validated dims")
                    .into_samples()
            })
        };
        let iter_sb = riemann_sum(&f_sb, s, inner_level, TagRule::Center)?;
        sides_bs.push((j as u32, product.clone(), iter_bs));
        sides_sb.push((j as u32, product, iter_sb));
    }
    Ok((
        IdentityResidual::from_sides(sides_bs)?,
        IdentityResidual::from_sides(sides_sb)?,
    ))
}

/// Nested-integral identity on `[0, s]`:
/// `∫₀ˢ du ∫₀ᵘ ξ(v) dv  =  ∫₀ˢ (s − v) ξ(v) dv`.
pub fn triangle_identity_residual(
    f: &RandomField,
    s: f64,
    level: u32,
    tol: f64,
) -> Result<IdentityResidual> {
    if !(s > 0.0) || f.dim() != 1 {
        return Err(CoreError::Domain(
            "triangle identity needs a one-dimensional field and s > 0".into(),
        ));
    }
    let outer = BoxDomain::interval(0.0, s)?;
    let (_, report) = riemann_integral(f, &outer, level, tol)?;
    if !report.accepted() {
        return Err(CoreError::Inconclusive(
            "integrand rejected its convergence report".into(),
        ));
    }
    let mut sides = Vec::new();
    for l in trace_levels(level) {
        let nested = {
            let inner = f.clone();
            RandomField::with_space(f.space(), f.paths(), 1, move |u| {
                let upto = BoxDomain::interval(0.0, u[0]).expect("u >= 0");
                riemann_sum(&inner, &upto, l, TagRule::Center)
                    .expect("validated")
                    .into_samples()
            })
        };
        let lhs = riemann_sum(&nested, &outer, l, TagRule::Center)?;
        let rhs = riemann_sum(&f.weighted(move |v| s - v[0]), &outer, l, TagRule::Center)?;
        sides.push((l, lhs, rhs));
    }
    IdentityResidual::from_sides(sides)
}

/// Integration by parts on `[0, s]`:
/// `g(s) ∫₀ˢ ξ  =  ∫₀ˢ g ξ + ∫₀ˢ g′(u) du ∫₀ᵘ ξ(v) dv`.
pub fn parts_identity_residual(
    f: &RandomField,
    g: &C1Fn,
    s: f64,
    level: u32,
    tol: f64,
) -> Result<IdentityResidual> {
    if !(s > 0.0) || f.dim() != 1 {
        return Err(CoreError::Domain(
            "parts identity needs a one-dimensional field and s > 0".into(),
        ));
    }
    let outer = BoxDomain::interval(0.0, s)?;
    let (_, report) = riemann_integral(f, &outer, level, tol)?;
    if !report.accepted() {
        return Err(CoreError::Inconclusive(
            "integrand rejected its convergence report".into(),
        ));
    }
    let mut sides = Vec::new();
    for l in trace_levels(level) {
        let lhs = riemann_sum(f, &outer, l, TagRule::Center)?.scale(g.eval(s));
        let gf = {
            let g = g.clone();
            f.weighted(move |u| g.eval(u[0]))
        };
        let term1 = riemann_sum(&gf, &outer, l, TagRule::Center)?;
        let nested = {
            let inner = f.clone();
            let g = g.clone();
            RandomField::with_space(f.space(), f.paths(), 1, move |u| {
                let upto = BoxDomain::interval(0.0, u[0]).expect("u >= 0");
                let mut v = riemann_sum(&inner, &upto, l, TagRule::Center)
                    .expect("validated")
                    .into_samples();
                let du = g.derivative(u[0]);
                for x in &mut v {
                    *x *= du;
                }
                v
            })
        };
        let term2 = riemann_sum(&nested, &outer, l, TagRule::Center)?;
        let rhs = term1.add(&term2)?;
        sides.push((l, lhs, rhs));
    }
    IdentityResidual::from_sides(sides)
}
