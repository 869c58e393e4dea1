//! Constant-coefficient strongly elliptic operators, their closed-form
//! Gaussian fundamental solutions, and Schwartz-type test functions with
//! analytic adjoint action.

use crate::error::{CoreError, Result};

/// Ellipticity floor for the leading coefficient matrix.
pub const ELLIPTICITY_FLOOR: f64 = 1e-10;

/// `A g = Σ a_ij ∂²g/∂x_i∂x_j + Σ b_i ∂g/∂x_i + c g` with constant
/// coefficients in one or two dimensions, `a` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticOperator {
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
    a_inv: Vec<f64>,
    det_a: f64,
    lambda_min: f64,
    lambda_max: f64,
}

impl EllipticOperator {
    /// `a` is row-major `dim × dim`.
    pub fn new(dim: usize, a: Vec<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(CoreError::InvalidParameter(format!(
                "operator dimension must be 1 or 2, got {dim}"
            )));
        }
        if a.len() != dim * dim || b.len() != dim {
            return Err(CoreError::InvalidParameter(
                "coefficient shapes do not match the dimension".into(),
            ));
        }
        if dim == 2 && (a[1] - a[2]).abs() > 1e-12 {
            return Err(CoreError::InvalidParameter(
                "leading coefficients must be symmetric".into(),
            ));
        }
        let (det_a, lambda_min, lambda_max, a_inv) = match dim {
            1 => (a[0], a[0], a[0], vec![1.0 / a[0]]),
            _ => {
                let (a00, a01, a11) = (a[0], a[1], a[3]);
                let det = a00 * a11 - a01 * a01;
                let tr = a00 + a11;
                let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
                let lmin = 0.5 * (tr - disc);
                let lmax = 0.5 * (tr + disc);
                let inv = vec![a11 / det, -a01 / det, -a01 / det, a00 / det];
                (det, lmin, lmax, inv)
            }
        };
        if !(lambda_min >= ELLIPTICITY_FLOOR) {
            return Err(CoreError::InvalidParameter(format!(
                "leading matrix is not strongly elliptic (lambda_min = {lambda_min})"
            )));
        }
        Ok(Self {
            dim,
            a,
            b,
            c,
            a_inv,
            det_a,
            lambda_min,
            lambda_max,
        })
    }

    /// The one-dimensional heat operator `g ↦ g''`.
    pub fn heat_1d() -> Self {
        Self::new(1, vec![1.0], vec![0.0], 0.0).expect("static coefficients")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.b.iter().all(|&bi| bi == 0.0)
    }

    fn quad_form_inv(&self, v: &[f64]) -> f64 {
        match self.dim {
            1 => self.a_inv[0] * v[0] * v[0],
            _ => {
                self.a_inv[0] * v[0] * v[0]
                    + 2.0 * self.a_inv[1] * v[0] * v[1]
                    + self.a_inv[3] * v[1] * v[1]
            }
        }
    }

    pub(crate) fn kernel_unchecked(&self, x: &[f64], y: &[f64], t: f64) -> f64 {
        let mut shifted = [0.0f64; 2];
        for i in 0..self.dim {
            shifted[i] = x[i] + self.b[i] * t - y[i];
        }
        let q = self.quad_form_inv(&shifted[..self.dim]);
        let norm = (4.0 * std::f64::consts::PI * t).powf(-(self.dim as f64) / 2.0)
            / self.det_a.sqrt();
        (self.c * t).exp() * norm * (-q / (4.0 * t)).exp()
    }

    /// Fundamental solution `p(x, y, t)` of `∂u/∂t = A u`:
    /// `e^{ct} (4πt)^{-d/2} (det a)^{-1/2} exp(-⟨a⁻¹(x + bt - y), x + bt - y⟩ / 4t)`.
    pub fn kernel(&self, x: &[f64], y: &[f64], t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(CoreError::Domain(format!(
                "kernel requires t > 0, got {t}"
            )));
        }
        if x.len() != self.dim || y.len() != self.dim {
            return Err(CoreError::Domain("point dimension mismatch".into()));
        }
        Ok(self.kernel_unchecked(x, y, t))
    }

    /// Operational support radius of the kernel: the Gaussian tail beyond
    /// `8 sqrt(2 λ_max t)` holds less than 1e-14 of the mass, plus the
    /// drift displacement.
    pub fn truncation_radius(&self, t: f64) -> f64 {
        let b_norm = self.b.iter().map(|v| v * v).sum::<f64>().sqrt();
        8.0 * (2.0 * self.lambda_max * t).sqrt() + b_norm * t
    }

    /// Forward action on analytic derivatives:
    /// `Σ a_ij H_ij + Σ b_i g_i + c g`.
    pub fn apply_derivatives(&self, value: f64, grad: &[f64], hess: &[f64]) -> f64 {
        let mut acc = self.c * value;
        for i in 0..self.dim {
            acc += self.b[i] * grad[i];
            for j in 0..self.dim {
                acc += self.a[i * self.dim + j] * hess[i * self.dim + j];
            }
        }
        acc
    }

    /// Adjoint action on analytic derivatives (constant coefficients):
    /// `A*φ = Σ a_ij ∂²φ − Σ b_i ∂φ + c φ`.
    pub fn apply_adjoint_derivatives(&self, value: f64, grad: &[f64], hess: &[f64]) -> f64 {
        let mut acc = self.c * value;
        for i in 0..self.dim {
            acc -= self.b[i] * grad[i];
            for j in 0..self.dim {
                acc += self.a[i * self.dim + j] * hess[i * self.dim + j];
            }
        }
        acc
    }
}

/// A rapidly decreasing test function `φ(x) = q(x − x₀) e^{-α|x − x₀|²}`
/// with a polynomial factor of degree at most two. Value, gradient and
/// Hessian are available in closed form.
#[derive(Debug, Clone)]
pub struct TestFunction {
    dim: usize,
    center: Vec<f64>,
    alpha: f64,
    /// constant, linear (len d) and symmetric quadratic (row-major d×d)
    /// coefficients of q
    c0: f64,
    lin: Vec<f64>,
    quad: Vec<f64>,
}

impl TestFunction {
    pub fn new(
        center: Vec<f64>,
        alpha: f64,
        c0: f64,
        lin: Vec<f64>,
        quad: Vec<f64>,
    ) -> Result<Self> {
        let dim = center.len();
        if dim == 0 || dim > 2 {
            return Err(CoreError::InvalidParameter(
                "test functions support 1 or 2 dimensions".into(),
            ));
        }
        if !(alpha > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "scale must be positive, got {alpha}"
            )));
        }
        if lin.len() != dim || quad.len() != dim * dim {
            return Err(CoreError::InvalidParameter(
                "polynomial coefficient shapes do not match".into(),
            ));
        }
        if dim == 2 && (quad[1] - quad[2]).abs() > 1e-12 {
            return Err(CoreError::InvalidParameter(
                "quadratic factor must be symmetric".into(),
            ));
        }
        Ok(Self {
            dim,
            center,
            alpha,
            c0,
            lin,
            quad,
        })
    }

    /// Plain Gaussian bump `e^{-α|x - x₀|²}`.
    pub fn gaussian(center: Vec<f64>, alpha: f64) -> Result<Self> {
        let dim = center.len();
        Self::new(center, alpha, 1.0, vec![0.0; dim], vec![0.0; dim * dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn poly(&self, z: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut q = self.c0;
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        for i in 0..d {
            q += self.lin[i] * z[i];
            grad[i] = self.lin[i];
            for j in 0..d {
                q += self.quad[i * d + j] * z[i] * z[j];
                grad[i] += 2.0 * self.quad[i * d + j] * z[j];
                hess[i * d + j] = 2.0 * self.quad[i * d + j];
            }
        }
        (q, grad, hess)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let (q, _, _) = self.poly(&z);
        let r2: f64 = z.iter().map(|v| v * v).sum();
        q * (-self.alpha * r2).exp()
    }

    /// Value, gradient and Hessian at once.
    pub fn derivatives(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let z: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let (q, qg, qh) = self.poly(&z);
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let env = (-self.alpha * r2).exp();
        let a = self.alpha;
        let value = q * env;
        let mut grad = vec![0.0; d];
        for i in 0..d {
            grad[i] = (qg[i] - 2.0 * a * z[i] * q) * env;
        }
        let mut hess = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                hess[i * d + j] = (qh[i * d + j]
                    - 2.0 * a * (delta * q + z[i] * qg[j] + z[j] * qg[i])
                    + 4.0 * a * a * z[i] * z[j] * q)
                    * env;
            }
        }
        (value, grad, hess)
    }

    /// Radius beyond which `|φ|` falls under `rel_tol` times its scale.
    pub fn support_radius(&self, rel_tol: f64) -> f64 {
        let scale = self.c0.abs().max(1.0);
        let poly_bound = |r: f64| {
            self.c0.abs()
                + self.lin.iter().map(|v| v.abs()).sum::<f64>() * r
                + self.quad.iter().map(|v| v.abs()).sum::<f64>() * r * r
        };
        let mut r = 1.0;
        while poly_bound(r) * (-self.alpha * r * r).exp() > rel_tol * scale {
            r *= 1.25;
            if r > 1e6 {
                break;
            }
        }
        r
    }
}

/// Closed-form evaluation of `A*φ` at a point from the test function's
/// analytic partials.
pub fn adjoint_apply(op: &EllipticOperator, phi: &TestFunction, x: &[f64]) -> f64 {
    let (v, g, h) = phi.derivatives(x);
    op.apply_adjoint_derivatives(v, &g, &h)
}

/// Fitted constants for the kernel bound
/// `|p(x, y, t)| ≤ C₁ t^{-d/2} exp(-C₂ |x - y|² / t)`.
#[derive(Debug, Clone, Copy)]
pub struct KernelBoundFit {
    pub c1: f64,
    pub c2: f64,
    /// Whether the fitted pair bounds the kernel on the held-out sample.
    pub holds: bool,
}

/// Fits the smallest `C₁` and the largest workable `C₂` over a lattice of
/// `(r, t)` samples, then verifies the bound on a held-out lattice with a
/// wider radius range.
pub fn kernel_bound_check(
    op: &EllipticOperator,
    t_range: (f64, f64),
    r_max: f64,
    samples: usize,
) -> Result<KernelBoundFit> {
    if !(t_range.0 > 0.0 && t_range.1 > t_range.0) || !(r_max > 0.0) || samples < 4 {
        return Err(CoreError::InvalidParameter(
            "need 0 < t_lo < t_hi, r_max > 0 and at least 4 samples per axis".into(),
        ));
    }
    let d = op.dim();
    let point = |r: f64| -> (Vec<f64>, Vec<f64>) {
        // displace along the first axis
        let x = vec![0.0; d];
        let mut y = vec![0.0; d];
        y[0] = r;
        (x, y)
    };
    let collect = |r_lo: f64, r_hi: f64, n: usize| -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for i in 0..n {
            let t = t_range.0 + (t_range.1 - t_range.0) * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let r = r_lo + (r_hi - r_lo) * j as f64 / (n - 1) as f64;
                let (x, y) = point(r);
                let p = op.kernel_unchecked(&x, &y, t).abs();
                if p > 0.0 {
                    // u = r²/t, v = ln(p t^{d/2})
                    pts.push((r * r / t, p.ln() + 0.5 * d as f64 * t.ln()));
                }
            }
        }
        pts
    };
    let fit = collect(0.0, 0.8 * r_max, samples);
    let held = collect(0.0, r_max, samples + 3);

    // least squares for the envelope slope
    let n = fit.len() as f64;
    let su: f64 = fit.iter().map(|p| p.0).sum();
    let sv: f64 = fit.iter().map(|p| p.1).sum();
    let suu: f64 = fit.iter().map(|p| p.0 * p.0).sum();
    let suv: f64 = fit.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * suv - su * sv) / (n * suu - su * su);
    let mut c2 = (-slope).max(1e-12);

    let log_c1 = |c2: f64, pts: &[(f64, f64)]| -> f64 {
        pts.iter()
            .map(|&(u, v)| v + c2 * u)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let bound_holds = |c2: f64| -> bool { log_c1(c2, &held) <= log_c1(c2, &fit) + 1e-9 };

    if !bound_holds(c2) {
        // shrink C₂ until the held-out sample is covered
        let mut found = false;
        for k in 1..=400 {
            let trial = c2 * (1.0 - k as f64 / 400.0);
            if trial <= 0.0 {
                break;
            }
            if bound_holds(trial) {
                c2 = trial;
                found = true;
                break;
            }
        }
        if !found {
            return Ok(KernelBoundFit {
                c1: log_c1(c2, &held).exp(),
                c2,
                holds: false,
            });
        }
    }
    Ok(KernelBoundFit {
        c1: log_c1(c2, &fit).exp(),
        c2,
        holds: true,
    })
}
