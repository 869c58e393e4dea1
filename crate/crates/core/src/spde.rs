//! Mild solution of `dX = AX dt + f dμ` and its verification probes.
//!
//! The stochastic convolution is a left-point sum over the dyadic time
//! grid: `Σ_k [S(t − s_k) f(·, s_k)](x) Δμ_k`. The integrand is
//! deterministic, so every evolved forcing profile is computed once and
//! shared across paths; per-path work is a weighted sum of precomputed
//! grid vectors, which keeps solutions bit-identical for any worker count.

use crate::driver::{Driver, DriverKind};
use crate::error::{CoreError, Result};
use crate::fd::{crank_nicolson_1d, ValidatedOperator};
use crate::grid::{GridFunction, SpatialGrid};
use crate::parabolic::{EllipticOperator, TestFunction};
use crate::prob::{ky_fan, Ensemble, KyFanValue, SpaceId};
use crate::semigroup::SemigroupOp;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::sync::Arc;

/// Relative envelope threshold below which test-function tails are
/// truncated in spatial integrals.
pub const SUPPORT_TRUNCATION: f64 = 1e-10;

/// Shared deterministic profile on space.
pub type SpatialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Shared deterministic forcing on space x time.
pub type SpaceTimeFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Initial random field. The random variant is a deterministic profile
/// scaled by one amplitude per path, which satisfies the per-path
/// continuity and boundedness assumptions by construction.
#[derive(Clone)]
pub enum InitialCondition {
    Zero,
    Deterministic(SpatialFn),
    RandomScaled {
        profile: SpatialFn,
        amplitude: Ensemble,
    },
}

impl InitialCondition {
    pub fn deterministic(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        InitialCondition::Deterministic(Arc::new(f))
    }

    pub fn random_scaled(
        profile: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        amplitude: Ensemble,
    ) -> Self {
        InitialCondition::RandomScaled {
            profile: Arc::new(profile),
            amplitude,
        }
    }
}

impl std::fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialCondition::Zero => write!(f, "zero"),
            InitialCondition::Deterministic(_) => write!(f, "deterministic"),
            InitialCondition::RandomScaled { .. } => write!(f, "random_scaled"),
        }
    }
}

/// One driving measure together with its deterministic forcing
/// coefficient `f(x, s)`.
#[derive(Clone)]
pub struct ForcingTerm {
    pub driver: Arc<Driver>,
    pub forcing: SpaceTimeFn,
}

impl ForcingTerm {
    pub fn new(
        driver: Arc<Driver>,
        forcing: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            driver,
            forcing: Arc::new(forcing),
        }
    }
}

/// Initial data plus the list of driving terms.
#[derive(Clone)]
pub struct ProblemData {
    pub initial: InitialCondition,
    pub terms: Vec<ForcingTerm>,
}

/// The solution field `X(x, t)` on a grid, one ensemble per node and time,
/// together with the running time integrals `∫₀ᵗ X(x, s) ds` needed by the
/// weak form. Layout: `[time][path][node]`, so per-(time, path) node
/// slices are contiguous.
pub struct FieldSolution {
    operator: EllipticOperator,
    data: ProblemData,
    grid: SpatialGrid,
    times: Vec<f64>,
    level: u32,
    horizon: f64,
    space: SpaceId,
    paths: usize,
    values: Vec<f64>,
    time_integrals: Vec<f64>,
}

impl FieldSolution {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn operator(&self) -> &EllipticOperator {
        &self.operator
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    fn time_index(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&v| (v - t).abs() < 1e-12)
            .ok_or_else(|| {
                CoreError::Domain(format!("time {t} is not stored in this solution"))
            })
    }

    /// Node values for one path at one stored time.
    pub fn path_slice(&self, t_idx: usize, path: usize) -> &[f64] {
        let nodes = self.grid.len();
        let base = (t_idx * self.paths + path) * nodes;
        &self.values[base..base + nodes]
    }

    fn integral_slice(&self, t_idx: usize, path: usize) -> &[f64] {
        let nodes = self.grid.len();
        let base = (t_idx * self.paths + path) * nodes;
        &self.time_integrals[base..base + nodes]
    }

    /// The ensemble of `X(x_node, t)`.
    pub fn ensemble_at(&self, t: f64, node: usize) -> Result<Ensemble> {
        let t_idx = self.time_index(t)?;
        let samples = (0..self.paths)
            .map(|p| self.path_slice(t_idx, p)[node])
            .collect();
        Ok(Ensemble::from_raw(self.space, samples))
    }

    /// Per-path initial values on the grid.
    pub fn initial_values(&self, path: usize) -> Vec<f64> {
        initial_profile(&self.data.initial, &self.grid)
            .into_iter()
            .map(|v| v * initial_amplitude(&self.data.initial, path))
            .collect()
    }
}

fn initial_profile(init: &InitialCondition, grid: &SpatialGrid) -> Vec<f64> {
    match init {
        InitialCondition::Zero => vec![0.0; grid.len()],
        InitialCondition::Deterministic(f) => (0..grid.len()).map(|i| f(&grid.node(i))).collect(),
        InitialCondition::RandomScaled { profile, .. } => {
            (0..grid.len()).map(|i| profile(&grid.node(i))).collect()
        }
    }
}

fn initial_amplitude(init: &InitialCondition, path: usize) -> f64 {
    match init {
        InitialCondition::RandomScaled { amplitude, .. } => amplitude.samples()[path],
        _ => 1.0,
    }
}

/// Solution of the multi-measure equation
/// `dX = AX dt + Σ_i f_i dμ_i`, `X(·, 0) = ξ₀`:
/// `X(t) = S(t)ξ₀ + Σ_i Σ_k [S(t − s_k) f_i(·, s_k)] μ_i(cell_k)`.
///
/// `times` must be multiples of `horizon / 2^level`. The kernel validation
/// gate is a precondition, enforced by taking a [`ValidatedOperator`].
pub fn multi_measure_solution(
    vop: &ValidatedOperator,
    data: &ProblemData,
    grid: &SpatialGrid,
    times: &[f64],
    level: u32,
) -> Result<FieldSolution> {
    let op = vop.operator();
    if data.terms.is_empty() {
        return Err(CoreError::InvalidParameter(
            "at least one forcing term is required".into(),
        ));
    }
    let space = data.terms[0].driver.space();
    let paths = data.terms[0].driver.paths();
    let horizon = data.terms[0].driver.horizon();
    for term in &data.terms {
        if term.driver.space() != space {
            return Err(CoreError::SpaceMismatch(
                "drivers live on different probability spaces".into(),
            ));
        }
        if (term.driver.horizon() - horizon).abs() > 1e-12 {
            return Err(CoreError::InvalidParameter(
                "drivers must share one horizon".into(),
            ));
        }
        if level > term.driver.grid_log2() {
            return Err(CoreError::Grid(format!(
                "level {level} exceeds driver resolution {}",
                term.driver.grid_log2()
            )));
        }
    }
    if let InitialCondition::RandomScaled { amplitude, .. } = &data.initial {
        if amplitude.space() != space || amplitude.len() != paths {
            return Err(CoreError::SpaceMismatch(
                "initial amplitude is not aligned with the drivers".into(),
            ));
        }
    }
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidParameter(
            "requested times must be nonempty and strictly increasing".into(),
        ));
    }
    let steps = 1usize << level;
    let delta = horizon / steps as f64;
    let mut req_idx = Vec::with_capacity(times.len());
    for &t in times {
        let j = (t / delta).round();
        if (j * delta - t).abs() > 1e-9 || t < 0.0 || t > horizon + 1e-12 {
            return Err(CoreError::Grid(format!(
                "time {t} is not on the dyadic level-{level} grid"
            )));
        }
        req_idx.push(j as usize);
    }
    let t_max = *times.last().unwrap();
    if grid.interior_nodes(op.truncation_radius(t_max)).is_empty() {
        return Err(CoreError::Coverage(format!(
            "grid does not cover the support radius {:.2} at t = {t_max}",
            op.truncation_radius(t_max)
        )));
    }
    let j_max = *req_idx.last().unwrap();
    let nodes = grid.len();
    let n_req = req_idx.len();

    let w = SemigroupOp::new(op, grid, delta)?;

    // deterministic initial-profile evolution with snapshots
    let mut base = vec![vec![0.0; nodes]; n_req];
    let mut base_integral = vec![vec![0.0; nodes]; n_req];
    {
        let mut profile = initial_profile(&data.initial, grid);
        let mut running = vec![0.0; nodes];
        for j in 0..=j_max {
            for (r, &jr) in req_idx.iter().enumerate() {
                if jr == j {
                    base[r].copy_from_slice(&profile);
                    base_integral[r].copy_from_slice(&running);
                }
            }
            if j == j_max {
                break;
            }
            for (acc, v) in running.iter_mut().zip(&profile) {
                *acc += delta * v;
            }
            profile = w.apply(&profile);
        }
    }

    // evolved forcing profiles, shared across paths:
    //   conv[r][k] = S((j_r - k)Δ) f(·, s_k)
    //   integ[r][k] = Δ Σ_{m=1}^{j_r-1-k} S(mΔ) f(·, s_k)
    struct TermTables {
        conv: Vec<Vec<f64>>,
        integ: Vec<Vec<f64>>,
    }
    let mut tables = Vec::with_capacity(data.terms.len());
    for term in &data.terms {
        let f = &term.forcing;
        type KTables = (Vec<Vec<f64>>, Vec<Vec<f64>>);
        let per_k: Vec<KTables> = (0..j_max)
            .into_par_iter()
            .map(|k| {
                let s_k = k as f64 * delta;
                let mut q: Vec<f64> = (0..nodes).map(|i| f(&grid.node(i), s_k)).collect();
                let mut acc = vec![0.0; nodes];
                let mut conv_k = vec![Vec::new(); n_req];
                let mut integ_k = vec![Vec::new(); n_req];
                for m in 1..=(j_max - k) {
                    q = w.apply(&q);
                    let j = k + m;
                    for (r, &jr) in req_idx.iter().enumerate() {
                        if jr == j {
                            conv_k[r] = q.clone();
                        }
                    }
                    for (a, v) in acc.iter_mut().zip(&q) {
                        *a += delta * v;
                    }
                    for (r, &jr) in req_idx.iter().enumerate() {
                        if jr == j + 1 {
                            integ_k[r] = acc.clone();
                        }
                    }
                }
                (conv_k, integ_k)
            })
            .collect();
        // reshape to [req][k]
        let mut conv = vec![vec![0.0; j_max * nodes]; n_req];
        let mut integ = vec![vec![0.0; j_max * nodes]; n_req];
        for (k, (conv_k, integ_k)) in per_k.into_iter().enumerate() {
            for r in 0..n_req {
                if !conv_k[r].is_empty() {
                    conv[r][k * nodes..(k + 1) * nodes].copy_from_slice(&conv_k[r]);
                }
                if !integ_k[r].is_empty() {
                    integ[r][k * nodes..(k + 1) * nodes].copy_from_slice(&integ_k[r]);
                }
            }
        }
        tables.push(TermTables { conv, integ });
    }

    // per-path weighted assembly
    let aggs: Vec<_> = data
        .terms
        .iter()
        .map(|t| t.driver.increments_at_level(level))
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![0.0; n_req * paths * nodes];
    let mut time_integrals = vec![0.0; n_req * paths * nodes];
    let chunks: Vec<(usize, &mut [f64], &mut [f64])> = {
        let mut v_rest: &mut [f64] = &mut values;
        let mut y_rest: &mut [f64] = &mut time_integrals;
        let mut out = Vec::with_capacity(n_req * paths);
        for r in 0..n_req {
            for p in 0..paths {
                let (v_head, v_tail) = v_rest.split_at_mut(nodes);
                let (y_head, y_tail) = y_rest.split_at_mut(nodes);
                v_rest = v_tail;
                y_rest = y_tail;
                out.push((r * paths + p, v_head, y_head));
            }
        }
        out
    };
    chunks.into_par_iter().for_each(|(slot, v_out, y_out)| {
        let r = slot / paths;
        let p = slot % paths;
        let jr = req_idx[r];
        let amp = initial_amplitude(&data.initial, p);
        for n in 0..nodes {
            v_out[n] = amp * base[r][n];
            y_out[n] = amp * base_integral[r][n];
        }
        for (table, agg) in tables.iter().zip(&aggs) {
            let row = agg.row(p);
            let conv = &table.conv[r];
            let integ = &table.integ[r];
            for (k, &dmu) in row.iter().enumerate().take(jr) {
                if dmu == 0.0 {
                    continue;
                }
                let base_k = k * nodes;
                for n in 0..nodes {
                    v_out[n] += conv[base_k + n] * dmu;
                    y_out[n] += integ[base_k + n] * dmu;
                }
            }
        }
    });

    Ok(FieldSolution {
        operator: op.clone(),
        data: data.clone(),
        grid: grid.clone(),
        times: times.to_vec(),
        level,
        horizon,
        space,
        paths,
        values,
        time_integrals,
    })
}

/// Single-measure convenience wrapper around [`multi_measure_solution`].
pub fn mild_solution(
    vop: &ValidatedOperator,
    data: &ProblemData,
    grid: &SpatialGrid,
    times: &[f64],
    level: u32,
) -> Result<FieldSolution> {
    if data.terms.len() != 1 {
        return Err(CoreError::InvalidParameter(format!(
            "mild_solution expects exactly one forcing term, got {}",
            data.terms.len()
        )));
    }
    multi_measure_solution(vop, data, grid, times, level)
}

/// Nodes within the truncated support of a test function, paired with the
/// quadrature weight.
fn support_nodes(grid: &SpatialGrid, phi: &TestFunction) -> Result<Vec<usize>> {
    let radius = phi.support_radius(SUPPORT_TRUNCATION);
    for axis in 0..grid.dim() {
        let c = phi.center()[axis];
        if c - radius < grid.axis_min(axis) - 1e-9 || c + radius > grid.axis_max(axis) + 1e-9 {
            return Err(CoreError::Coverage(format!(
                "grid does not cover the test-function support radius {radius:.2}"
            )));
        }
    }
    Ok((0..grid.len())
        .filter(|&i| {
            let x = grid.node(i);
            x.iter()
                .zip(phi.center())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                <= radius
        })
        .collect())
}

/// Weak-form residual report.
#[derive(Debug, Clone, Copy)]
pub struct WeakResidual {
    /// `‖∫Xφ − ∫ξφ − ∫A*φ ∫₀ᵗX − Σ_i ∫dμ_i ∫f_iφ‖`
    pub residual: KyFanValue,
    /// grid-halving consistency of the spatial quadratures
    pub consistency: f64,
}

/// Evaluates all four terms of the weak formulation independently and
/// returns the Ky Fan norm of their mismatch.
///
/// Spatial integrals are truncated where the test-function envelope drops
/// below [`SUPPORT_TRUNCATION`]; a grid-halving consistency check guards
/// the quadrature and makes the result inconclusive when it fails.
pub fn weak_residual(
    sol: &FieldSolution,
    phi: &TestFunction,
    t: f64,
    tol: f64,
) -> Result<WeakResidual> {
    if phi.dim() != sol.grid.dim() {
        return Err(CoreError::Domain(
            "test function dimension mismatch".into(),
        ));
    }
    let t_idx = sol.time_index(t)?;
    let j_t = (t / (sol.horizon / (1usize << sol.level) as f64)).round() as usize;
    let grid = &sol.grid;
    let nodes = support_nodes(grid, phi)?;
    let hd = grid.spacing().powi(grid.dim() as i32);

    let phi_values: Vec<(usize, f64, f64)> = nodes
        .iter()
        .map(|&i| {
            let x = grid.node(i);
            let (v, g, h) = phi.derivatives(&x);
            (
                i,
                v,
                sol.operator.apply_adjoint_derivatives(v, &g, &h),
            )
        })
        .collect();

    // deterministic inner integrals of the last term, one per time cell
    let delta = sol.horizon / (1usize << sol.level) as f64;
    let forcing_inner: Vec<Vec<f64>> = sol
        .data
        .terms
        .iter()
        .map(|term| {
            (0..j_t)
                .map(|k| {
                    let s_k = k as f64 * delta;
                    phi_values
                        .iter()
                        .map(|&(i, v, _)| (term.forcing)(&grid.node(i), s_k) * v * hd)
                        .sum()
                })
                .collect()
        })
        .collect();

    let init_profile = initial_profile(&sol.data.initial, grid);
    let aggs: Vec<_> = sol
        .data
        .terms
        .iter()
        .map(|t| t.driver.increments_at_level(sol.level))
        .collect::<Result<Vec<_>>>()?;

    // even-index sub-lattice for the consistency check
    let coarse = |i: usize| -> bool {
        let m = grid.multi_index(i);
        (0..grid.dim()).all(|a| m[a].is_multiple_of(2))
    };
    let coarse_factor = (1usize << grid.dim()) as f64;

    let mut residual = Vec::with_capacity(sol.paths);
    let mut t1_fine = Vec::with_capacity(sol.paths);
    let mut t1_coarse = Vec::with_capacity(sol.paths);
    for p in 0..sol.paths {
        let x_slice = sol.path_slice(t_idx, p);
        let y_slice = sol.integral_slice(t_idx, p);
        let amp = initial_amplitude(&sol.data.initial, p);
        let mut t1 = 0.0;
        let mut t2 = 0.0;
        let mut t3 = 0.0;
        let mut t1c = 0.0;
        for &(i, v, adj) in &phi_values {
            t1 += x_slice[i] * v * hd;
            t2 += amp * init_profile[i] * v * hd;
            t3 += adj * y_slice[i] * hd;
            if coarse(i) {
                t1c += x_slice[i] * v * hd * coarse_factor;
            }
        }
        let mut t4 = 0.0;
        for (inner, agg) in forcing_inner.iter().zip(&aggs) {
            let row = agg.row(p);
            for (w, dmu) in inner.iter().zip(row) {
                t4 += w * dmu;
            }
        }
        residual.push(t1 - t2 - t3 - t4);
        t1_fine.push(t1);
        t1_coarse.push(t1c);
    }

    let fine = Ensemble::from_raw(sol.space, t1_fine);
    let coarse_e = Ensemble::from_raw(sol.space, t1_coarse);
    let consistency = crate::prob::ky_fan_distance(&fine, &coarse_e)?.value();
    let floor = 2.0 / (sol.paths as f64).sqrt();
    if consistency > tol.max(floor) {
        return Err(CoreError::Inconclusive(format!(
            "spatial quadrature failed its grid-halving check: {consistency}"
        )));
    }
    Ok(WeakResidual {
        residual: ky_fan(&Ensemble::from_raw(sol.space, residual))?,
        consistency,
    })
}

/// Relative sup-norm disagreement between the mild solution driven by a
/// deterministic measure and an independent Crank-Nicolson solve.
#[derive(Debug, Clone)]
pub struct CrosscheckReport {
    pub rows: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Cross-checks the deterministic-driver mild solution against the
/// finite-difference oracle for `∂u/∂t = Au + f ρ`.
#[allow(clippy::too_many_arguments)]
pub fn deterministic_crosscheck(
    vop: &ValidatedOperator,
    data: &ProblemData,
    grid: &SpatialGrid,
    times: &[f64],
    level: u32,
    dt: f64,
    eval_margin: f64,
    tol: f64,
) -> Result<CrosscheckReport> {
    if data.terms.len() != 1 {
        return Err(CoreError::InvalidParameter(
            "crosscheck expects a single forcing term".into(),
        ));
    }
    let rate = match data.terms[0].driver.kind() {
        DriverKind::Deterministic { rate } => Arc::clone(rate),
        other => {
            return Err(CoreError::Precondition(format!(
                "crosscheck requires the deterministic driver, got {other:?}"
            )))
        }
    };
    if matches!(data.initial, InitialCondition::RandomScaled { .. }) {
        return Err(CoreError::Precondition(
            "crosscheck requires deterministic initial data".into(),
        ));
    }
    let sol = multi_measure_solution(vop, data, grid, times, level)?;

    let u0 = GridFunction::new(grid.clone(), initial_profile(&data.initial, grid))?;
    let forcing = &data.terms[0].forcing;
    let force = |x: f64, t: f64| forcing(&[x], t) * rate(t);
    let oracle = crank_nicolson_1d(vop.operator(), grid, &u0, Some(&force), dt, times)?;

    let mut rows = Vec::with_capacity(times.len());
    let mut pass = true;
    for (idx, (&t, fd)) in times.iter().zip(&oracle).enumerate() {
        let mild = GridFunction::new(grid.clone(), sol.path_slice(idx, 0).to_vec())?;
        let err = mild.sup_diff_interior(fd, eval_margin)?;
        let rel = err / fd.max_abs().max(f64::MIN_POSITIVE);
        if rel > tol {
            pass = false;
        }
        rows.push((t, rel));
    }
    Ok(CrosscheckReport { rows, pass })
}

/// Ky Fan norm of `∫ (X_A − X_B)(x, t) φ(x) dx`: the projection the
/// uniqueness argument controls. Requires a self-adjoint operator and two
/// solutions on one space and grid.
pub fn uniqueness_probe(
    sol_a: &FieldSolution,
    sol_b: &FieldSolution,
    phi: &TestFunction,
    t: f64,
) -> Result<KyFanValue> {
    if !sol_a.operator.is_self_adjoint() {
        return Err(CoreError::Precondition(
            "uniqueness probe requires a self-adjoint operator (b = 0)".into(),
        ));
    }
    if sol_a.space != sol_b.space || sol_a.paths != sol_b.paths {
        return Err(CoreError::SpaceMismatch(
            "solutions live on different probability spaces".into(),
        ));
    }
    if sol_a.grid != sol_b.grid {
        return Err(CoreError::Grid("solutions use different grids".into()));
    }
    let ia = sol_a.time_index(t)?;
    let ib = sol_b.time_index(t)?;
    let nodes = support_nodes(&sol_a.grid, phi)?;
    let hd = sol_a.grid.spacing().powi(sol_a.grid.dim() as i32);
    let phi_vals: Vec<(usize, f64)> = nodes
        .iter()
        .map(|&i| (i, phi.value(&sol_a.grid.node(i))))
        .collect();
    let samples: Vec<f64> = (0..sol_a.paths)
        .map(|p| {
            let xa = sol_a.path_slice(ia, p);
            let xb = sol_b.path_slice(ib, p);
            phi_vals
                .iter()
                .map(|&(i, v)| (xa[i] - xb[i]) * v * hd)
                .sum()
        })
        .collect();
    ky_fan(&Ensemble::from_raw(sol_a.space, samples))
}

/// Writes per-(node, time) path statistics as CSV. When a reference
/// solution is supplied the last column is the Ky Fan distance to it,
/// otherwise the Ky Fan norm of the value itself.
pub fn export_csv<W: Write>(
    sol: &FieldSolution,
    reference: Option<&FieldSolution>,
    out: &mut W,
) -> Result<()> {
    let io_err = |e: std::io::Error| CoreError::InvalidParameter(format!("csv write: {e}"));
    writeln!(out, "x_index,t,mean,variance,ky_fan").map_err(io_err)?;
    for (t_idx, &t) in sol.times.iter().enumerate() {
        for node in 0..sol.grid.len() {
            let e = sol.ensemble_at(t, node)?;
            let kf = match reference {
                Some(r) => {
                    let re = r.ensemble_at(t, node)?;
                    crate::prob::ky_fan_distance(&e, &re)?.value()
                }
                None => ky_fan(&e)?.value(),
            };
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e}",
                node,
                t,
                e.mean(),
                e.variance(),
                kf
            )
            .map_err(io_err)?;
            let _ = t_idx;
        }
    }
    Ok(())
}

const BINARY_MAGIC: &[u8; 8] = b"SMCFLD01";

/// Raw ensemble dump: magic, dimension, per-axis node counts, axis
/// minima, spacing, stored times, path count, then the solution values as
/// row-major `[time][path][node]` little-endian f64.
pub fn write_binary<W: Write>(sol: &FieldSolution, out: &mut W) -> Result<()> {
    let io_err = |e: std::io::Error| CoreError::InvalidParameter(format!("binary write: {e}"));
    out.write_all(BINARY_MAGIC).map_err(io_err)?;
    let dim = sol.grid.dim() as u64;
    out.write_all(&dim.to_le_bytes()).map_err(io_err)?;
    for axis in 0..sol.grid.dim() {
        out.write_all(&(sol.grid.counts()[axis] as u64).to_le_bytes())
            .map_err(io_err)?;
    }
    for axis in 0..sol.grid.dim() {
        out.write_all(&sol.grid.axis_min(axis).to_le_bytes())
            .map_err(io_err)?;
    }
    out.write_all(&sol.grid.spacing().to_le_bytes())
        .map_err(io_err)?;
    out.write_all(&(sol.times.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    for &t in &sol.times {
        out.write_all(&t.to_le_bytes()).map_err(io_err)?;
    }
    out.write_all(&(sol.paths as u64).to_le_bytes())
        .map_err(io_err)?;
    for v in &sol.values {
        out.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

/// Contents of a raw binary dump.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionDump {
    pub grid: SpatialGrid,
    pub times: Vec<f64>,
    pub paths: usize,
    /// row-major `[time][path][node]`
    pub values: Vec<f64>,
}

pub fn read_binary<R: Read>(input: &mut R) -> Result<SolutionDump> {
    let io_err = |e: std::io::Error| CoreError::InvalidParameter(format!("binary read: {e}"));
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(io_err)?;
    if &magic != BINARY_MAGIC {
        return Err(CoreError::InvalidParameter(
            "not a solution dump (bad magic)".into(),
        ));
    }
    let mut u64buf = [0u8; 8];
    let mut read_u64 = |input: &mut R| -> Result<u64> {
        input.read_exact(&mut u64buf).map_err(io_err)?;
        Ok(u64::from_le_bytes(u64buf))
    };
    let dim = read_u64(input)? as usize;
    if dim == 0 || dim > 2 {
        return Err(CoreError::InvalidParameter(format!("bad dimension {dim}")));
    }
    let mut counts = Vec::with_capacity(dim);
    for _ in 0..dim {
        counts.push(read_u64(input)? as usize);
    }
    let mut f64buf = [0u8; 8];
    let mut read_f64 = |input: &mut R| -> Result<f64> {
        input.read_exact(&mut f64buf).map_err(io_err)?;
        Ok(f64::from_le_bytes(f64buf))
    };
    let mut mins = Vec::with_capacity(dim);
    for _ in 0..dim {
        mins.push(read_f64(input)?);
    }
    let spacing = read_f64(input)?;
    let grid = SpatialGrid::new(mins, spacing, counts)?;
    let mut u64buf2 = [0u8; 8];
    let mut read_u64b = |input: &mut R| -> Result<u64> {
        input.read_exact(&mut u64buf2).map_err(io_err)?;
        Ok(u64::from_le_bytes(u64buf2))
    };
    let n_times = read_u64b(input)? as usize;
    let mut times = Vec::with_capacity(n_times);
    let mut f64buf2 = [0u8; 8];
    for _ in 0..n_times {
        input.read_exact(&mut f64buf2).map_err(io_err)?;
        times.push(f64::from_le_bytes(f64buf2));
    }
    let paths = read_u64b(input)? as usize;
    let expect = n_times * paths * grid.len();
    let mut values = Vec::with_capacity(expect);
    for _ in 0..expect {
        input.read_exact(&mut f64buf2).map_err(io_err)?;
        values.push(f64::from_le_bytes(f64buf2));
    }
    Ok(SolutionDump {
        grid,
        times,
        paths,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::{kernel_validation_gate, GateConfig};
    use crate::prob::ProbSpace;
    use approx::assert_relative_eq;

    fn validated_heat() -> ValidatedOperator {
        kernel_validation_gate(&EllipticOperator::heat_1d(), &GateConfig::default()).unwrap()
    }

    fn unit_wiener(ps: &ProbSpace, stream: u64) -> Arc<Driver> {
        Arc::new(Driver::new(ps, DriverKind::Wiener, 1.0, 10, stream).unwrap())
    }

    fn lebesgue(ps: &ProbSpace) -> Arc<Driver> {
        Arc::new(Driver::new(ps, DriverKind::lebesgue(), 1.0, 10, 0).unwrap())
    }

    fn grid() -> SpatialGrid {
        SpatialGrid::symmetric(1, 10.0, 0.05).unwrap()
    }

    // wide enough to clear the truncation radius at t = 1
    fn wide_grid() -> SpatialGrid {
        SpatialGrid::symmetric(1, 14.0, 0.05).unwrap()
    }

    #[test]
    fn zero_data_zero_solution() {
        let ps = ProbSpace::new(20, 1).unwrap();
        let vop = validated_heat();
        let data = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(unit_wiener(&ps, 0), |_, _| 0.0)],
        };
        let sol = mild_solution(&vop, &data, &grid(), &[0.0, 0.5], 6).unwrap();
        assert!(sol.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_initial_condition_spreads_like_gaussian() {
        let ps = ProbSpace::new(10, 2).unwrap();
        let vop = validated_heat();
        let s2 = 0.5;
        let data = ProblemData {
            initial: InitialCondition::deterministic(move |x| (-x[0] * x[0] / (2.0 * s2)).exp()),
            terms: vec![ForcingTerm::new(unit_wiener(&ps, 0), |_, _| 0.0)],
        };
        let t = 0.5;
        let sol = mild_solution(&vop, &data, &grid(), &[t], 8).unwrap();
        let grown = s2 + 2.0 * t;
        let expect: Vec<f64> = (0..sol.grid().len())
            .map(|i| {
                let x = sol.grid().node(i)[0];
                (s2 / grown).sqrt() * (-x * x / (2.0 * grown)).exp()
            })
            .collect();
        let got = sol.path_slice(0, 3);
        let err = got
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-8, "gaussian spread error {err}");
    }

    #[test]
    fn unit_forcing_recovers_driver_paths() {
        let ps = ProbSpace::new(200, 3).unwrap();
        let vop = validated_heat();
        let d = unit_wiener(&ps, 0);
        let data = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(Arc::clone(&d), |_, _| 1.0)],
        };
        let times = [0.25, 0.5, 1.0];
        let sol = mild_solution(&vop, &data, &wide_grid(), &times, 8).unwrap();
        // constants are preserved by the semigroup, so X(x, t) = μ([0, t])
        let node = sol.grid().len() / 2;
        for &t in &times {
            let x = sol.ensemble_at(t, node).unwrap();
            let mu = d
                .measure(&crate::driver::IntervalUnion::snap(&[(0.0, t)], 1.0, d.cells()).unwrap())
                .unwrap();
            let worst = x
                .samples()
                .iter()
                .zip(mu.samples())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-8, "t={t}: deviation {worst}");
        }
        // variance of the solution equals t within Monte Carlo error
        let x = sol.ensemble_at(0.5, node).unwrap();
        let se = 0.5 * (2.0 / (ps.paths() as f64 - 1.0)).sqrt();
        assert!((x.variance() - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn deterministic_unit_everything_gives_time() {
        let ps = ProbSpace::new(8, 4).unwrap();
        let vop = validated_heat();
        let data = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(lebesgue(&ps), |_, _| 1.0)],
        };
        let sol = mild_solution(&vop, &data, &wide_grid(), &[0.5, 1.0], 8).unwrap();
        let node = sol.grid().len() / 2;
        for (idx, t) in [0.5, 1.0].into_iter().enumerate() {
            // left-point rule: Σ_{k<j} Δ = t - Δ... the increments integrate
            // the rate over each cell, so the sum is exactly t here
            let v = sol.path_slice(idx, 0)[node];
            assert_relative_eq!(v, t, epsilon = 1e-8);
        }
    }

    #[test]
    fn linear_in_initial_and_forcing() {
        let ps = ProbSpace::new(60, 5).unwrap();
        let vop = validated_heat();
        let d = unit_wiener(&ps, 0);
        let g = grid();
        let both = ProblemData {
            initial: InitialCondition::deterministic(|x| (-x[0] * x[0]).exp()),
            terms: vec![ForcingTerm::new(Arc::clone(&d), |x: &[f64], _| {
                (-x[0] * x[0]).exp()
            })],
        };
        let only_init = ProblemData {
            initial: InitialCondition::deterministic(|x| (-x[0] * x[0]).exp()),
            terms: vec![ForcingTerm::new(Arc::clone(&d), |_, _| 0.0)],
        };
        let only_force = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(Arc::clone(&d), |x: &[f64], _| {
                (-x[0] * x[0]).exp()
            })],
        };
        let t = [0.5];
        let full = mild_solution(&vop, &both, &g, &t, 7).unwrap();
        let a = mild_solution(&vop, &only_init, &g, &t, 7).unwrap();
        let b = mild_solution(&vop, &only_force, &g, &t, 7).unwrap();
        for p in [0usize, 17, 59] {
            let f = full.path_slice(0, p);
            let pa = a.path_slice(0, p);
            let pb = b.path_slice(0, p);
            for i in 0..f.len() {
                assert_relative_eq!(f[i], pa[i] + pb[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn weak_residual_zero_for_zero_data() {
        let ps = ProbSpace::new(50, 6).unwrap();
        let vop = validated_heat();
        let data = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(unit_wiener(&ps, 0), |_, _| 0.0)],
        };
        let sol = mild_solution(&vop, &data, &grid(), &[0.5], 6).unwrap();
        let phi = TestFunction::gaussian(vec![0.0], 1.0).unwrap();
        let w = weak_residual(&sol, &phi, 0.5, 0.05).unwrap();
        assert_eq!(w.residual.value(), 0.0);
    }

    #[test]
    fn weak_residual_baseline_small_and_shrinking() {
        let ps = ProbSpace::new(400, 7).unwrap();
        let vop = validated_heat();
        let d = unit_wiener(&ps, 0);
        let phi = TestFunction::gaussian(vec![0.0], 1.0).unwrap();
        let mut last = f64::INFINITY;
        for level in [6u32, 7, 8] {
            let data = ProblemData {
                initial: InitialCondition::deterministic(|x| (-x[0] * x[0] / 2.0).exp()),
                terms: vec![ForcingTerm::new(Arc::clone(&d), |x: &[f64], _| {
                    (-x[0] * x[0]).exp()
                })],
            };
            let sol = mild_solution(&vop, &data, &grid(), &[0.5], level).unwrap();
            let w = weak_residual(&sol, &phi, 0.5, 0.05).unwrap();
            assert!(
                w.residual.value() <= last + ps.statistical_floor(),
                "level {level}"
            );
            last = w.residual.value();
        }
        assert!(last <= 0.05, "finest weak residual {last}");
    }

    #[test]
    fn weak_residual_detects_constant_shift() {
        let ps = ProbSpace::new(300, 8).unwrap();
        let vop = validated_heat();
        let d = unit_wiener(&ps, 0);
        let data = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(Arc::clone(&d), |_, _| 0.0)],
        };
        let g = grid();
        let mut sol = mild_solution(&vop, &data, &g, &[0.5], 6).unwrap();
        // perturb X by +0.1: residual must become ky_fan(0.1 ∫φ) since
        // ∫A*φ dx = 0 for c = 0
        for v in sol.values.iter_mut() {
            *v += 0.1;
        }
        let phi = TestFunction::gaussian(vec![0.0], 1.0).unwrap();
        let w = weak_residual(&sol, &phi, 0.5, 0.05).unwrap();
        let phi_mass = (std::f64::consts::PI / 1.0).sqrt();
        assert_relative_eq!(w.residual.value(), (0.1 * phi_mass).min(1.0), epsilon = 2e-3);
    }

    #[test]
    fn multi_measure_splits_and_reduces() {
        let ps = ProbSpace::new(150, 9).unwrap();
        let vop = validated_heat();
        let g = grid();
        let w1 = unit_wiener(&ps, 0);
        let det = lebesgue(&ps);
        let forcing = |x: &[f64], _: f64| (-x[0] * x[0]).exp();
        let combined = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![
                ForcingTerm::new(Arc::clone(&det), forcing),
                ForcingTerm::new(Arc::clone(&w1), forcing),
            ],
        };
        let alone_det = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(Arc::clone(&det), forcing)],
        };
        let alone_w = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(Arc::clone(&w1), forcing)],
        };
        let t = [0.5];
        let full = multi_measure_solution(&vop, &combined, &g, &t, 7).unwrap();
        let da = multi_measure_solution(&vop, &alone_det, &g, &t, 7).unwrap();
        let wa = multi_measure_solution(&vop, &alone_w, &g, &t, 7).unwrap();
        for p in [0usize, 149] {
            let f = full.path_slice(0, p);
            let a = da.path_slice(0, p);
            let b = wa.path_slice(0, p);
            for i in 0..f.len() {
                assert_relative_eq!(f[i], a[i] + b[i], epsilon = 1e-12);
            }
        }

        // a term with zero forcing reduces to the single-measure solution
        let with_null = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![
                ForcingTerm::new(Arc::clone(&w1), forcing),
                ForcingTerm::new(Arc::clone(&det), |_, _| 0.0),
            ],
        };
        let reduced = multi_measure_solution(&vop, &with_null, &g, &t, 7).unwrap();
        assert_eq!(reduced.path_slice(0, 3), wa.path_slice(0, 3));
    }

    #[test]
    fn two_independent_wieners_double_the_variance() {
        let ps = ProbSpace::new(2000, 10).unwrap();
        let vop = validated_heat();
        let g = grid();
        let w1 = unit_wiener(&ps, 1);
        let w2 = unit_wiener(&ps, 2);
        let one = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(Arc::clone(&w1), |_, _| 1.0)],
        };
        let two = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![
                ForcingTerm::new(Arc::clone(&w1), |_, _| 1.0),
                ForcingTerm::new(Arc::clone(&w2), |_, _| 1.0),
            ],
        };
        let t = [0.5];
        let node = g.len() / 2;
        let sol1 = multi_measure_solution(&vop, &one, &g, &t, 7).unwrap();
        let sol2 = multi_measure_solution(&vop, &two, &g, &t, 7).unwrap();
        let v1 = sol1.ensemble_at(0.5, node).unwrap().variance();
        let v2 = sol2.ensemble_at(0.5, node).unwrap().variance();
        let se = 1.0 * (2.0 / (ps.paths() as f64 - 1.0)).sqrt();
        assert!((v2 - 2.0 * v1).abs() < 3.0 * se, "v1={v1} v2={v2}");
    }

    #[test]
    fn mixed_spaces_rejected() {
        let ps_a = ProbSpace::new(50, 11).unwrap();
        let ps_b = ProbSpace::new(50, 12).unwrap();
        let vop = validated_heat();
        let data = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![
                ForcingTerm::new(unit_wiener(&ps_a, 0), |_, _| 1.0),
                ForcingTerm::new(unit_wiener(&ps_b, 0), |_, _| 1.0),
            ],
        };
        assert!(matches!(
            multi_measure_solution(&vop, &data, &grid(), &[0.5], 6),
            Err(CoreError::SpaceMismatch(_))
        ));
    }

    #[test]
    fn coverage_and_time_grid_guards() {
        let ps = ProbSpace::new(20, 13).unwrap();
        let vop = validated_heat();
        let data = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(unit_wiener(&ps, 0), |_, _| 1.0)],
        };
        let small = SpatialGrid::symmetric(1, 2.0, 0.05).unwrap();
        assert!(matches!(
            mild_solution(&vop, &data, &small, &[1.0], 6),
            Err(CoreError::Coverage(_))
        ));
        assert!(matches!(
            mild_solution(&vop, &data, &grid(), &[0.3], 2),
            Err(CoreError::Grid(_))
        ));
    }

    #[test]
    fn crosscheck_against_oracle() {
        let ps = ProbSpace::new(4, 14).unwrap();
        let vop = validated_heat();
        let g = wide_grid();
        let data = ProblemData {
            initial: InitialCondition::deterministic(|x| (-x[0] * x[0]).exp()),
            terms: vec![ForcingTerm::new(lebesgue(&ps), |x: &[f64], _| {
                (-x[0] * x[0]).exp()
            })],
        };
        let report = deterministic_crosscheck(
            &vop,
            &data,
            &g,
            &[0.25, 0.5, 1.0],
            8,
            1e-3,
            3.0,
            1e-2,
        )
        .unwrap();
        assert!(report.pass, "{:?}", report.rows);
    }

    #[test]
    fn crosscheck_requires_deterministic_driver() {
        let ps = ProbSpace::new(10, 15).unwrap();
        let vop = validated_heat();
        let data = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(unit_wiener(&ps, 0), |_, _| 1.0)],
        };
        assert!(matches!(
            deterministic_crosscheck(&vop, &data, &grid(), &[0.5], 6, 1e-3, 2.0, 1e-2),
            Err(CoreError::Precondition(_))
        ));
    }

    #[test]
    fn uniqueness_probe_levels_and_shift() {
        let ps = ProbSpace::new(300, 16).unwrap();
        let vop = validated_heat();
        let g = grid();
        let d = unit_wiener(&ps, 0);
        let data = ProblemData {
            initial: InitialCondition::deterministic(|x| (-x[0] * x[0]).exp()),
            terms: vec![ForcingTerm::new(Arc::clone(&d), |x: &[f64], _| {
                (-x[0] * x[0]).exp()
            })],
        };
        let phi = TestFunction::gaussian(vec![0.0], 1.0).unwrap();
        let a = mild_solution(&vop, &data, &g, &[0.5], 8).unwrap();
        let same = uniqueness_probe(&a, &a, &phi, 0.5).unwrap();
        assert_eq!(same.value(), 0.0);

        let b = mild_solution(&vop, &data, &g, &[0.5], 7).unwrap();
        let across = uniqueness_probe(&a, &b, &phi, 0.5).unwrap();
        assert!(across.value() < 0.02, "cross-level probe {across}");

        let mut shifted = mild_solution(&vop, &data, &g, &[0.5], 7).unwrap();
        for v in shifted.values.iter_mut() {
            *v += 0.1;
        }
        let probe = uniqueness_probe(&a, &shifted, &phi, 0.5).unwrap();
        let phi_mass = std::f64::consts::PI.sqrt();
        assert_relative_eq!(probe.value(), (0.1 * phi_mass).min(1.0), epsilon = 5e-3);
    }

    #[test]
    fn reproducible_across_reconstruction() {
        let ps = ProbSpace::new(40, 17).unwrap();
        let vop = validated_heat();
        let data = ProblemData {
            initial: InitialCondition::Zero,
            terms: vec![ForcingTerm::new(unit_wiener(&ps, 0), |x: &[f64], s| {
                (-x[0] * x[0]).exp() * (1.0 + s)
            })],
        };
        let a = mild_solution(&vop, &data, &grid(), &[0.25, 0.5], 6).unwrap();
        let b = mild_solution(&vop, &data, &grid(), &[0.25, 0.5], 6).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.time_integrals, b.time_integrals);
    }

    #[test]
    fn binary_roundtrip_and_csv_header() {
        let ps = ProbSpace::new(10, 18).unwrap();
        let vop = validated_heat();
        let data = ProblemData {
            initial: InitialCondition::deterministic(|x| (-x[0] * x[0]).exp()),
            terms: vec![ForcingTerm::new(unit_wiener(&ps, 0), |_, _| 1.0)],
        };
        let g = SpatialGrid::symmetric(1, 10.0, 0.25).unwrap();
        let sol = mild_solution(&vop, &data, &g, &[0.5], 4).unwrap();

        let mut buf = Vec::new();
        write_binary(&sol, &mut buf).unwrap();
        let dump = read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(dump.grid, sol.grid);
        assert_eq!(dump.paths, sol.paths);
        assert_eq!(dump.times, sol.times);
        assert_eq!(dump.values, sol.values);

        let mut csv = Vec::new();
        export_csv(&sol, None, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("x_index,t,mean,variance,ky_fan\n"));
        assert_eq!(text.lines().count(), 1 + sol.grid.len());
    }

    #[test]
    fn semigroup_family_tails_dominated_by_amplitude() {
        // |S(t)(A·profile)(x)| <= |A| when sup|profile| <= 1 and c = 0,
        // so every node/time tail is bounded by the amplitude tail
        let ps = ProbSpace::new(400, 20).unwrap();
        let vop = validated_heat();
        let amp = ps.sample_cauchy(9);
        let data = ProblemData {
            initial: InitialCondition::random_scaled(|x| (-x[0] * x[0]).exp(), amp.clone()),
            terms: vec![ForcingTerm::new(unit_wiener(&ps, 0), |_, _| 0.0)],
        };
        let sol = mild_solution(&vop, &data, &grid(), &[0.25, 0.5], 6).unwrap();
        let mut family = Vec::new();
        for &t in sol.times() {
            for node in (0..sol.grid().len()).step_by(40) {
                family.push(sol.ensemble_at(t, node).unwrap());
            }
        }
        let thresholds = [0.5, 1.0, 2.0, 4.0];
        let rows = crate::prob::check_boundedness(&family, &thresholds).unwrap();
        for row in &rows {
            let amp_tail = amp.tail_probability(row.threshold);
            assert!(
                row.sup_tail <= amp_tail + 1e-12,
                "c={}: family tail {} exceeds amplitude tail {amp_tail}",
                row.threshold,
                row.sup_tail
            );
        }
    }

    #[test]
    fn random_scaled_initial_condition() {
        let ps = ProbSpace::new(100, 19).unwrap();
        let vop = validated_heat();
        let amp = ps.sample(3, |rng| {
            use rand_distr::Distribution;
            let z: f64 = rand_distr::StandardNormal.sample(rng);
            1.0 + 0.1 * z
        });
        let data = ProblemData {
            initial: InitialCondition::random_scaled(|x| (-x[0] * x[0]).exp(), amp.clone()),
            terms: vec![ForcingTerm::new(unit_wiener(&ps, 0), |_, _| 0.0)],
        };
        let sol = mild_solution(&vop, &data, &grid(), &[0.0, 0.25], 6).unwrap();
        // X(·, 0) = ξ₀ exactly per path
        for p in [0usize, 57] {
            let x0 = sol.path_slice(0, p);
            let expect = sol.initial_values(p);
            assert_eq!(x0, &expect[..]);
        }
        // per-path scaling carries through the semigroup
        let node = sol.grid().len() / 2;
        let at_t = sol.ensemble_at(0.25, node).unwrap();
        let base = at_t.samples()[0] / amp.samples()[0];
        for (v, a) in at_t.samples().iter().zip(amp.samples()) {
            assert_relative_eq!(v / a, base, epsilon = 1e-12);
        }
    }
}
