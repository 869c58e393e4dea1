//! Crank-Nicolson finite differences: the independent oracle for the
//! closed-form kernel, and the validation gate required before any
//! parabolic solve.

use crate::error::{CoreError, Result};
use crate::grid::{GridFunction, SpatialGrid};
use crate::parabolic::EllipticOperator;
use crate::semigroup::{apply_semigroup, SemigroupOp};

/// Tridiagonal solve (Thomas algorithm). `diag` is modified in place.
fn thomas(sub: &[f64], mut diag: Vec<f64>, sup: &[f64], mut rhs: Vec<f64>) -> Vec<f64> {
    let n = diag.len();
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    }
    x
}

/// Crank-Nicolson solution of `∂u/∂t = A u + F(x, t)` on a 1-d grid with
/// homogeneous Dirichlet boundaries, sampled at the requested times.
/// Every requested time must be an integer multiple of `dt`.
pub fn crank_nicolson_1d(
    op: &EllipticOperator,
    grid: &SpatialGrid,
    u0: &GridFunction,
    forcing: Option<&(dyn Fn(f64, f64) -> f64 + Sync)>,
    dt: f64,
    times: &[f64],
) -> Result<Vec<GridFunction>> {
    if op.dim() != 1 || grid.dim() != 1 {
        return Err(CoreError::InvalidParameter(
            "the finite-difference oracle is one-dimensional".into(),
        ));
    }
    if u0.grid() != grid {
        return Err(CoreError::Grid("initial data on a different grid".into()));
    }
    if !(dt > 0.0) {
        return Err(CoreError::InvalidParameter("dt must be positive".into()));
    }
    let mut steps_at = Vec::with_capacity(times.len());
    for &t in times {
        let k = (t / dt).round();
        if (k * dt - t).abs() > 1e-9 || t < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "time {t} is not a multiple of dt = {dt}"
            )));
        }
        steps_at.push(k as usize);
    }
    if steps_at.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidParameter(
            "requested times must be strictly increasing".into(),
        ));
    }

    let n = grid.len();
    let h = grid.spacing();
    let (a, b, c) = (op.a()[0], op.b()[0], op.c());
    // interior operator stencil
    let sub_l = a / (h * h) - b / (2.0 * h);
    let diag_l = -2.0 * a / (h * h) + c;
    let sup_l = a / (h * h) + b / (2.0 * h);

    let m = n - 2; // interior unknowns
    let sub: Vec<f64> = (0..m).map(|_| -0.5 * dt * sub_l).collect();
    let diag: Vec<f64> = (0..m).map(|_| 1.0 - 0.5 * dt * diag_l).collect();
    let sup: Vec<f64> = (0..m).map(|_| -0.5 * dt * sup_l).collect();

    let mut u = u0.values().to_vec();
    u[0] = 0.0;
    u[n - 1] = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut next_snapshot = 0;
    if steps_at.first() == Some(&0) {
        out.push(GridFunction::new(grid.clone(), u.clone())?);
        next_snapshot += 1;
    }
    let last_step = *steps_at.last().unwrap_or(&0);
    for step in 0..last_step {
        let t_mid = (step as f64 + 0.5) * dt;
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            let explicit = u[i + 1]
                + 0.5 * dt * (sub_l * u[i] + diag_l * u[i + 1] + sup_l * u[i + 2]);
            let force = forcing
                .map(|f| dt * f(grid.coord(0, i + 1), t_mid))
                .unwrap_or(0.0);
            rhs[i] = explicit + force;
        }
        let interior = thomas(&sub, diag.clone(), &sup, rhs);
        u[1..n - 1].copy_from_slice(&interior);
        if next_snapshot < steps_at.len() && step + 1 == steps_at[next_snapshot] {
            out.push(GridFunction::new(grid.clone(), u.clone())?);
            next_snapshot += 1;
        }
    }
    Ok(out)
}

/// Configuration of the kernel validation gate.
#[derive(Debug, Clone)]
pub struct GateConfig {
    /// grid spacing of the comparison grid
    pub spacing: f64,
    /// half-width of the comparison grid
    pub half_width: f64,
    /// times at which the oracle is compared
    pub times: Vec<f64>,
    /// Crank-Nicolson step
    pub dt: f64,
    /// standard deviation of the Gaussian probe initial condition
    pub sigma0: f64,
    /// half-width of the evaluation window for the relative sup norm
    pub eval_half_width: f64,
    /// acceptance threshold on the relative sup norm
    pub tol: f64,
    /// times at which the quadrature mass identity is checked
    pub mass_times: Vec<f64>,
    pub mass_tol: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            spacing: 0.05,
            half_width: 6.0,
            times: vec![0.1, 0.5],
            dt: 1e-3,
            sigma0: 0.5,
            eval_half_width: 3.0,
            tol: 5e-3,
            mass_times: vec![0.1, 0.5, 1.0],
            mass_tol: 1e-8,
        }
    }
}

/// Outcome of the validation gate.
#[derive(Debug, Clone)]
pub struct GateReport {
    /// per-time relative sup-norm disagreement with the oracle (dim 1)
    pub oracle_rows: Vec<(f64, f64)>,
    /// per-time quadrature-mass residual `|Σw − e^{ct}|`
    pub mass_rows: Vec<(f64, f64)>,
    pub pass: bool,
}

/// An operator whose closed-form kernel has passed the validation gate;
/// parabolic solves require one.
#[derive(Debug, Clone)]
pub struct ValidatedOperator {
    op: EllipticOperator,
    report: GateReport,
}

impl ValidatedOperator {
    pub fn operator(&self) -> &EllipticOperator {
        &self.op
    }

    pub fn report(&self) -> &GateReport {
        &self.report
    }
}

impl std::ops::Deref for ValidatedOperator {
    type Target = EllipticOperator;

    fn deref(&self) -> &EllipticOperator {
        &self.op
    }
}

/// Validates the closed-form kernel before use.
///
/// In one dimension a Gaussian probe is evolved independently by
/// Crank-Nicolson and by kernel quadrature and compared in relative sup
/// norm; in two dimensions (where no finite-difference oracle is built)
/// the quadrature mass identity and the Chapman-Kolmogorov composition
/// stand in. Mass residuals are checked in every dimension.
pub fn kernel_validation_gate(
    op: &EllipticOperator,
    cfg: &GateConfig,
) -> Result<ValidatedOperator> {
    let mut pass = true;

    let mut mass_rows = Vec::new();
    {
        let grid = SpatialGrid::symmetric(op.dim(), cfg.half_width, cfg.spacing)?;
        for &t in &cfg.mass_times {
            let sg = SemigroupOp::new(op, &grid, t)?;
            let residual = (sg.mass() - (op.c() * t).exp()).abs();
            if residual > cfg.mass_tol {
                pass = false;
            }
            mass_rows.push((t, residual));
        }
    }

    let mut oracle_rows = Vec::new();
    if op.dim() == 1 {
        let grid = SpatialGrid::symmetric(1, cfg.half_width, cfg.spacing)?;
        let s2 = cfg.sigma0 * cfg.sigma0;
        let u0 = grid.sample(|x| (-x[0] * x[0] / (2.0 * s2)).exp());
        let oracle = crank_nicolson_1d(op, &grid, &u0, None, cfg.dt, &cfg.times)?;
        for (&t, fd) in cfg.times.iter().zip(&oracle) {
            let closed = apply_semigroup(op, &u0, t)?;
            let err = closed.sup_diff_interior(fd, cfg.half_width - cfg.eval_half_width)?;
            let rel = err / fd.max_abs();
            if rel > cfg.tol {
                pass = false;
            }
            oracle_rows.push((t, rel));
        }
    } else {
        let grid = SpatialGrid::symmetric(2, cfg.half_width.min(4.0), cfg.spacing.max(0.08))?;
        let u0 = grid.sample(|x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        // the probe decays fast, so a small comparison window suffices
        let margin = cfg.half_width.min(4.0) - cfg.eval_half_width.min(2.0);
        for &t in &cfg.times {
            let one = apply_semigroup(op, &u0, t)?;
            let two =
                apply_semigroup(op, &apply_semigroup(op, &u0, 0.5 * t)?, 0.5 * t)?;
            let err = one.sup_diff_interior(&two, margin)?;
            let rel = err / one.max_abs().max(f64::MIN_POSITIVE);
            if rel > cfg.tol {
                pass = false;
            }
            oracle_rows.push((t, rel));
        }
    }

    let report = GateReport {
        oracle_rows,
        mass_rows,
        pass,
    };
    if !pass {
        return Err(CoreError::Precondition(format!(
            "kernel validation gate failed: {report:?}"
        )));
    }
    Ok(ValidatedOperator {
        op: op.clone(),
        report,
    })
}
