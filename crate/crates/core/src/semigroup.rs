//! The solution semigroup `S(t)g = ∫ p(·, y, t) g(y) dy` by quadrature.
//!
//! Constant coefficients on a uniform grid make the kernel weights a pure
//! offset stencil, so one stencil serves every output node. Inputs are
//! zero-extended beyond the grid; callers evaluate results on an interior
//! window when that matters (the kernel decay makes the clipped mass
//! negligible whenever the integrand decays).

use crate::error::{CoreError, Result};
use crate::grid::{GridFunction, SpatialGrid};
use crate::parabolic::{EllipticOperator, TestFunction};
use rayon::prelude::*;

/// Precomputed quadrature weights for one `(operator, grid, t)` triple.
#[derive(Debug, Clone)]
pub struct SemigroupOp {
    grid: SpatialGrid,
    t: f64,
    /// per-axis inclusive offset ranges of the stencil
    offset_lo: [isize; 2],
    offset_hi: [isize; 2],
    stencil: Vec<f64>,
}

impl SemigroupOp {
    /// Builds the stencil for time `t > 0`. Fails when the grid spacing is
    /// too coarse to resolve the kernel width `sqrt(2 λ_min t)`.
    pub fn new(op: &EllipticOperator, grid: &SpatialGrid, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CoreError::Domain(format!(
                "semigroup stencil requires t > 0, got {t}"
            )));
        }
        if op.dim() != grid.dim() {
            return Err(CoreError::Grid(
                "operator and grid dimensions differ".into(),
            ));
        }
        let h = grid.spacing();
        let sigma = (2.0 * op.lambda_min() * t).sqrt();
        if h > sigma {
            return Err(CoreError::Grid(format!(
                "grid spacing {h} too coarse for kernel width {sigma:.3e} at t = {t}"
            )));
        }
        let d = op.dim();
        let radius = op.truncation_radius(t);
        let mut offset_lo = [0isize; 2];
        let mut offset_hi = [0isize; 2];
        for i in 0..d {
            // stencil covers y = x + b t ± radius
            let center = op.b()[i] * t;
            offset_lo[i] = ((center - radius) / h).floor() as isize;
            offset_hi[i] = ((center + radius) / h).ceil() as isize;
        }
        let width0 = (offset_hi[0] - offset_lo[0] + 1) as usize;
        let width1 = if d == 2 {
            (offset_hi[1] - offset_lo[1] + 1) as usize
        } else {
            1
        };
        if width0.saturating_mul(width1) > 8_000_000 {
            return Err(CoreError::Budget(
                "semigroup stencil exceeds the desk-scale budget".into(),
            ));
        }
        let hd = h.powi(d as i32);
        let mut stencil = Vec::with_capacity(width0 * width1);
        let x0 = vec![0.0; d];
        for m1 in 0..width1 {
            for m0 in 0..width0 {
                let mut y = vec![(offset_lo[0] + m0 as isize) as f64 * h];
                if d == 2 {
                    y.push((offset_lo[1] + m1 as isize) as f64 * h);
                }
                stencil.push(op.kernel_unchecked(&x0, &y, t) * hd);
            }
        }
        Ok(Self {
            grid: grid.clone(),
            t,
            offset_lo,
            offset_hi,
            stencil,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Quadrature mass `Σ w` of the stencil; equals `e^{ct}` up to
    /// truncation and aliasing error.
    pub fn mass(&self) -> f64 {
        self.stencil.iter().sum()
    }

    /// Apply to raw node values (zero-extended beyond the grid).
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.grid.len());
        let d = self.grid.dim();
        let n0 = self.grid.counts()[0] as isize;
        let n1 = if d == 2 {
            self.grid.counts()[1] as isize
        } else {
            1
        };
        let w0 = (self.offset_hi[0] - self.offset_lo[0] + 1) as usize;
        let out: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|flat| {
                let i0 = (flat as isize) % n0;
                let i1 = (flat as isize) / n0;
                let mut acc = 0.0;
                let lo1 = if d == 2 { self.offset_lo[1] } else { 0 };
                let hi1 = if d == 2 { self.offset_hi[1] } else { 0 };
                for m1 in lo1..=hi1 {
                    let j1 = i1 + m1;
                    if d == 2 && (j1 < 0 || j1 >= n1) {
                        continue;
                    }
                    let row = ((m1 - lo1) as usize) * w0;
                    let base = j1 * n0;
                    let j0_lo = (i0 + self.offset_lo[0]).max(0);
                    let j0_hi = (i0 + self.offset_hi[0]).min(n0 - 1);
                    let mut j0 = j0_lo;
                    while j0 <= j0_hi {
                        let m0 = (j0 - i0 - self.offset_lo[0]) as usize;
                        acc += self.stencil[row + m0] * values[(base + j0) as usize];
                        j0 += 1;
                    }
                }
                acc
            })
            .collect();
        out
    }

    pub fn apply_grid(&self, g: &GridFunction) -> Result<GridFunction> {
        if g.grid() != &self.grid {
            return Err(CoreError::Grid("grid mismatch in semigroup apply".into()));
        }
        GridFunction::new(self.grid.clone(), self.apply(g.values()))
    }
}

/// `S(t)g` for a grid function; `S(0)` is the identity.
pub fn apply_semigroup(
    op: &EllipticOperator,
    g: &GridFunction,
    t: f64,
) -> Result<GridFunction> {
    if t == 0.0 {
        return Ok(g.clone());
    }
    SemigroupOp::new(op, g.grid(), t)?.apply_grid(g)
}

/// `S(t)g` for an analytic function sampled on the given grid.
pub fn apply_semigroup_fn(
    op: &EllipticOperator,
    g: impl Fn(&[f64]) -> f64,
    grid: &SpatialGrid,
    t: f64,
) -> Result<GridFunction> {
    apply_semigroup(op, &grid.sample(g), t)
}

/// Second-order central-difference application of `A` to a grid function
/// at one interior node.
pub(crate) fn fd_apply_at(op: &EllipticOperator, g: &GridFunction, flat: usize) -> f64 {
    let grid = g.grid();
    let d = grid.dim();
    let h = grid.spacing();
    let v = g.values();
    let multi = grid.multi_index(flat);
    let at = |di: isize, dj: isize| -> f64 {
        let mut m = multi;
        m[0] = (m[0] as isize + di) as usize;
        if d == 2 {
            m[1] = (m[1] as isize + dj) as usize;
        }
        v[grid.flat_index(m)]
    };
    let center = v[flat];
    let mut acc = op.c() * center;
    for i in 0..d {
        let (p, m) = if i == 0 {
            (at(1, 0), at(-1, 0))
        } else {
            (at(0, 1), at(0, -1))
        };
        acc += op.a()[i * d + i] * (p - 2.0 * center + m) / (h * h);
        acc += op.b()[i] * (p - m) / (2.0 * h);
    }
    if d == 2 {
        // mixed term: 2 a01 ∂²/∂x∂y by the four-point cross stencil
        let cross = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h * h);
        acc += 2.0 * op.a()[1] * cross;
    }
    acc
}

/// Sup-norm residual of the semigroup integral identity
/// `S(t)g = g + A ∫₀ᵗ S(s)g ds` over the interior evaluation window.
///
/// The time integral uses composite Simpson quadrature with at least 64
/// panels; `A` is applied by central differences on the integrated grid
/// function.
pub fn semigroup_identity_residual(
    op: &EllipticOperator,
    g: impl Fn(&[f64]) -> f64,
    grid: &SpatialGrid,
    t: f64,
    panels: usize,
    eval_margin: f64,
) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    if !(t > 0.0) {
        return Err(CoreError::Domain("identity requires t >= 0".into()));
    }
    let panels = panels.max(64);
    let g0 = grid.sample(&g);
    let st_g = apply_semigroup(op, &g0, t)?;

    // Simpson over s in [0, t]; S(0)g = g exactly
    let hs = t / panels as f64;
    let mut integral = vec![0.0; grid.len()];
    for j in 0..=panels {
        let weight = if j == 0 || j == panels {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        } * hs
            / 3.0;
        let s = j as f64 * hs;
        let sg = if j == 0 {
            g0.clone()
        } else {
            apply_semigroup(op, &g0, s)?
        };
        for (acc, v) in integral.iter_mut().zip(sg.values()) {
            *acc += weight * v;
        }
    }
    let integral = GridFunction::new(grid.clone(), integral)?;

    let margin = eval_margin.max(grid.spacing());
    let nodes = grid.interior_nodes(margin);
    if nodes.is_empty() {
        return Err(CoreError::Coverage(
            "no interior nodes left at the evaluation margin".into(),
        ));
    }
    let mut worst = 0.0f64;
    for flat in nodes {
        let lhs = st_g.values()[flat];
        let rhs = g0.values()[flat] + fd_apply_at(op, &integral, flat);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Grid realization of `ψ_{t,s} = S(t − s)φ` together with its
/// s-derivative `∂ψ/∂s = −Aψ` (central differences on the grid).
#[derive(Debug, Clone)]
pub struct EvolvedTestFunction {
    pub psi: GridFunction,
    pub s_derivative: GridFunction,
}

pub fn evolved_test_function(
    op: &EllipticOperator,
    phi: &TestFunction,
    grid: &SpatialGrid,
    t: f64,
    s: f64,
) -> Result<EvolvedTestFunction> {
    if !(s < t) {
        return Err(CoreError::Domain(format!(
            "evolved test function requires s < t, got s = {s}, t = {t}"
        )));
    }
    let psi = apply_semigroup_fn(op, |x| phi.value(x), grid, t - s)?;
    let mut ds = vec![0.0; grid.len()];
    for flat in grid.interior_nodes(grid.spacing()) {
        ds[flat] = -fd_apply_at(op, &psi, flat);
    }
    Ok(EvolvedTestFunction {
        psi,
        s_derivative: GridFunction::new(grid.clone(), ds)?,
    })
}
