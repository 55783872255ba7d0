//! Fixed-step classical 4th-order integration of the continuous dynamics:
//! gradient flow and the momentum ODE system
//!
//! ```text
//! x' = eta_t (z - x) - gamma grad f(x)
//! z' = eta'_t (x - z) - gamma'_t grad f(x)
//! ```
//!
//! with every parameter regime used by the theorems, plus the second-order
//! residual diagnostic and the exact-rate identity check for gradient flow.

use std::io::Write;
use std::sync::Arc;

use crate::linalg;
use crate::objective::{hessian_vec_fd_unchecked, Objective};

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("integration failed: {0}")]
    IntegrationError(String),
    #[error("invalid input: {0}")]
    InvalidInputError(String),
    #[error("invalid parameter: {0}")]
    InvalidParamError(String),
}

/// Shared state-dependent coefficient function.
pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A coefficient that is either constant or a function of the current
/// x-state (the pointwise parameter regimes).
#[derive(Clone)]
pub enum Coef {
    Const(f64),
    StateFn(StateFn),
}

impl Coef {
    fn at(&self, x: &[f64]) -> f64 {
        match self {
            Coef::Const(c) => *c,
            Coef::StateFn(f) => f(x),
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            Coef::Const(c) => Some(*c),
            Coef::StateFn(_) => None,
        }
    }
}

impl std::fmt::Debug for Coef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coef::Const(c) => write!(f, "Const({c})"),
            Coef::StateFn(_) => write!(f, "StateFn"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NmoMode {
    Constant,
    /// Constant parameters from the continuous acceleration theorem.
    Theorem3i,
    /// Same shape with the averaged aiming constant in place of `a`.
    Avg4ii,
    /// Constant parameters under the constraint `gamma = (eta + eta') / mu`.
    PlProp,
    /// State-dependent parameters evaluated along the trajectory.
    PointwiseExact,
}

/// Parameter bundle for the momentum ODE.
#[derive(Clone, Debug)]
pub struct NmoParams {
    pub eta: Coef,
    pub eta_prime: Coef,
    pub gamma: f64,
    pub gamma_prime: Coef,
    pub mode: NmoMode,
}

impl NmoParams {
    pub fn constant(eta: f64, eta_prime: f64, gamma: f64, gamma_prime: f64) -> Result<Self, FlowError> {
        if eta + eta_prime <= 0.0 {
            return Err(FlowError::InvalidParamError("need eta + eta' > 0".into()));
        }
        if gamma < 0.0 {
            return Err(FlowError::InvalidParamError("need gamma >= 0".into()));
        }
        Ok(NmoParams {
            eta: Coef::Const(eta),
            eta_prime: Coef::Const(eta_prime),
            gamma,
            gamma_prime: Coef::Const(gamma_prime),
            mode: NmoMode::Constant,
        })
    }

    pub fn is_constant(&self) -> bool {
        self.eta.constant().is_some()
            && self.eta_prime.constant().is_some()
            && self.gamma_prime.constant().is_some()
    }
}

/// Trajectory of an integrated flow. `z_points` is empty for gradient flow.
#[derive(Clone, Debug)]
pub struct FlowRecord {
    pub times: Vec<f64>,
    pub x_points: Vec<Vec<f64>>,
    pub z_points: Vec<Vec<f64>>,
    pub f_gaps: Vec<f64>,
    pub step: f64,
    /// True when a pointwise mode stopped at the singularity guard before
    /// `t_end`.
    pub truncated: bool,
}

impl FlowRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with columns `t,x...,z...,f_gap` (z columns only when present).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.x_points.first().map_or(0, |x| x.len());
        let has_z = !self.z_points.is_empty();
        write!(w, "t")?;
        for i in 0..dim {
            write!(w, ",x{i}")?;
        }
        if has_z {
            for i in 0..dim {
                write!(w, ",z{i}")?;
            }
        }
        writeln!(w, ",f_gap")?;
        for k in 0..self.len() {
            write!(w, "{}", self.times[k])?;
            for v in &self.x_points[k] {
                write!(w, ",{v}")?;
            }
            if has_z {
                for v in &self.z_points[k] {
                    write!(w, ",{v}")?;
                }
            }
            writeln!(w, ",{}", self.f_gaps[k])?;
        }
        Ok(())
    }
}

fn require_minimum(obj: &Objective) -> Result<f64, FlowError> {
    obj.f_star().ok_or_else(|| {
        FlowError::InvalidInputError("objective must carry f_star for flow records".into())
    })
}

/// Classical RK4 integration of the gradient flow `x' = -grad f(x)`.
/// Global error is O(step^4) on C^5 objectives.
pub fn integrate_gf(
    obj: &Objective,
    x0: &[f64],
    step: f64,
    t_end: f64,
) -> Result<FlowRecord, FlowError> {
    if step <= 0.0 || t_end < step {
        return Err(FlowError::InvalidParamError(
            "need step > 0 and t_end >= step".into(),
        ));
    }
    let f_star = require_minimum(obj)?;
    let n_steps = (t_end / step).round() as usize;
    let dim = obj.dim();
    let mut record = FlowRecord {
        times: Vec::with_capacity(n_steps + 1),
        x_points: Vec::with_capacity(n_steps + 1),
        z_points: Vec::new(),
        f_gaps: Vec::with_capacity(n_steps + 1),
        step,
        truncated: false,
    };
    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    for k in 0..=n_steps {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::IntegrationError(format!(
                "non-finite state at t = {}",
                k as f64 * step
            )));
        }
        record.times.push(k as f64 * step);
        record.x_points.push(x.clone());
        record.f_gaps.push(obj.value(&x) - f_star);
        if k == n_steps {
            break;
        }
        obj.gradient_into(&x, &mut k1);
        k1.iter_mut().for_each(|v| *v = -*v);
        linalg::add_scaled(&x, 0.5 * step, &k1, &mut stage);
        obj.gradient_into(&stage, &mut k2);
        k2.iter_mut().for_each(|v| *v = -*v);
        linalg::add_scaled(&x, 0.5 * step, &k2, &mut stage);
        obj.gradient_into(&stage, &mut k3);
        k3.iter_mut().for_each(|v| *v = -*v);
        linalg::add_scaled(&x, step, &k3, &mut stage);
        obj.gradient_into(&stage, &mut k4);
        k4.iter_mut().for_each(|v| *v = -*v);
        for i in 0..dim {
            x[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(record)
}

/// One evaluation of the coupled right-hand side.
fn nmo_rhs(obj: &Objective, params: &NmoParams, x: &[f64], z: &[f64], dx: &mut [f64], dz: &mut [f64]) {
    let g = obj.gradient(x);
    let eta = params.eta.at(x);
    let etap = params.eta_prime.at(x);
    let gp = params.gamma_prime.at(x);
    for i in 0..x.len() {
        dx[i] = eta * (z[i] - x[i]) - params.gamma * g[i];
        dz[i] = etap * (x[i] - z[i]) - gp * g[i];
    }
}

/// Classical RK4 integration of the momentum ODE with `z_0 = x_0`.
/// Pointwise (state-function) modes stop cleanly once the state comes within
/// `1e-9 * diameter` of the minimizer, truncating the record.
pub fn integrate_nmo(
    obj: &Objective,
    params: &NmoParams,
    x0: &[f64],
    step: f64,
    t_end: f64,
) -> Result<FlowRecord, FlowError> {
    if step <= 0.0 || t_end < step {
        return Err(FlowError::InvalidParamError(
            "need step > 0 and t_end >= step".into(),
        ));
    }
    let f_star = require_minimum(obj)?;
    let n_steps = (t_end / step).round() as usize;
    let dim = obj.dim();
    let pointwise = !params.is_constant();
    let stop_radius = 1e-9 * obj.domain().diameter();
    let x_star = obj.x_star().map(|p| p.as_slice().to_vec());

    let mut record = FlowRecord {
        times: Vec::with_capacity(n_steps + 1),
        x_points: Vec::with_capacity(n_steps + 1),
        z_points: Vec::with_capacity(n_steps + 1),
        f_gaps: Vec::with_capacity(n_steps + 1),
        step,
        truncated: false,
    };
    let mut x = x0.to_vec();
    let mut z = x0.to_vec();
    let (mut dx1, mut dz1) = (vec![0.0; dim], vec![0.0; dim]);
    let (mut dx2, mut dz2) = (vec![0.0; dim], vec![0.0; dim]);
    let (mut dx3, mut dz3) = (vec![0.0; dim], vec![0.0; dim]);
    let (mut dx4, mut dz4) = (vec![0.0; dim], vec![0.0; dim]);
    let (mut sx, mut sz) = (vec![0.0; dim], vec![0.0; dim]);
    for k in 0..=n_steps {
        if x.iter().chain(z.iter()).any(|v| !v.is_finite()) {
            return Err(FlowError::IntegrationError(format!(
                "non-finite state at t = {}",
                k as f64 * step
            )));
        }
        if pointwise {
            if let Some(xs) = &x_star {
                if linalg::dist(&x, xs) < stop_radius {
                    record.truncated = true;
                    break;
                }
            }
        }
        record.times.push(k as f64 * step);
        record.x_points.push(x.clone());
        record.z_points.push(z.clone());
        record.f_gaps.push(obj.value(&x) - f_star);
        if k == n_steps {
            break;
        }
        nmo_rhs(obj, params, &x, &z, &mut dx1, &mut dz1);
        linalg::add_scaled(&x, 0.5 * step, &dx1, &mut sx);
        linalg::add_scaled(&z, 0.5 * step, &dz1, &mut sz);
        nmo_rhs(obj, params, &sx, &sz, &mut dx2, &mut dz2);
        linalg::add_scaled(&x, 0.5 * step, &dx2, &mut sx);
        linalg::add_scaled(&z, 0.5 * step, &dz2, &mut sz);
        nmo_rhs(obj, params, &sx, &sz, &mut dx3, &mut dz3);
        linalg::add_scaled(&x, step, &dx3, &mut sx);
        linalg::add_scaled(&z, step, &dz3, &mut sz);
        nmo_rhs(obj, params, &sx, &sz, &mut dx4, &mut dz4);
        for i in 0..dim {
            x[i] += step / 6.0 * (dx1[i] + 2.0 * dx2[i] + 2.0 * dx3[i] + dx4[i]);
            z[i] += step / 6.0 * (dz1[i] + 2.0 * dz2[i] + 2.0 * dz3[i] + dz4[i]);
        }
    }
    Ok(record)
}

/// Constant parameters of the continuous acceleration theorem:
/// `gamma' = (mu0 L0)^{-1/4}`, `eta = (mu0 L0)^{1/4}`,
/// `eta' = a (mu0/L0)^{1/4} sqrt(mu)`, free `gamma >= 0`.
pub fn nmo_params_theorem3i(
    mu: f64,
    mu0: f64,
    l0: f64,
    a: f64,
    gamma: f64,
) -> Result<NmoParams, FlowError> {
    if !(0.0 < mu && mu <= mu0 && mu0 <= l0) {
        return Err(FlowError::InvalidParamError(format!(
            "need 0 < mu <= mu0 <= L0, got ({mu}, {mu0}, {l0})"
        )));
    }
    if !(0.0 < a && a <= 1.0) || gamma < 0.0 {
        return Err(FlowError::InvalidParamError(
            "need 0 < a <= 1 and gamma >= 0".into(),
        ));
    }
    let quarter = (mu0 * l0).powf(0.25);
    let mut p = NmoParams::constant(
        quarter,
        a * (mu0 / l0).powf(0.25) * mu.sqrt(),
        gamma,
        1.0 / quarter,
    )?;
    p.mode = NmoMode::Theorem3i;
    Ok(p)
}

/// Same parameter shape driven by an averaged aiming constant.
pub fn nmo_params_avg(
    mu: f64,
    mu0: f64,
    l0: f64,
    a_avg: f64,
    gamma: f64,
) -> Result<NmoParams, FlowError> {
    let mut p = nmo_params_theorem3i(mu, mu0, l0, a_avg.min(1.0), gamma)?;
    p.mode = NmoMode::Avg4ii;
    Ok(p)
}

/// Constant parameters under the constraint `gamma = (eta + eta') / mu`,
/// the regime in which the momentum ODE contracts PL objectives at rate
/// `2 mu gamma`. `gamma'` is set to `2 gamma` (any value above `gamma`
/// keeps the underlying energy argument valid).
pub fn nmo_params_pl_prop(eta: f64, eta_prime: f64, mu: f64) -> Result<NmoParams, FlowError> {
    if eta + eta_prime <= 0.0 || mu <= 0.0 {
        return Err(FlowError::InvalidParamError(
            "need eta + eta' > 0 and mu > 0".into(),
        ));
    }
    let gamma = (eta + eta_prime) / mu;
    let mut p = NmoParams::constant(eta, eta_prime, gamma, 2.0 * gamma)?;
    p.mode = NmoMode::PlProp;
    Ok(p)
}

/// State-dependent parameters of the exact-rate regime:
/// `eta'_t = a(x) sqrt(mu(x))`, `eta_t = L0 / sqrt(mu0(x))`,
/// `gamma'_t = 1 / sqrt(mu0(x))`, `gamma = 0`, where `mu(x)` and `mu0(x)` are
/// the standardized pointwise PL and quadratic-growth values and
/// `l0_cap >= sup mu0(x)` is supplied from a geometry estimate.
pub fn nmo_params_pointwise(obj: &Objective, l0_cap: f64) -> Result<NmoParams, FlowError> {
    if l0_cap <= 0.0 {
        return Err(FlowError::InvalidParamError("need l0_cap > 0".into()));
    }
    let f_star = require_minimum(obj)?;
    let x_star = obj
        .x_star()
        .ok_or_else(|| FlowError::InvalidInputError("objective must carry x_star".into()))?
        .as_slice()
        .to_vec();
    let o1 = obj.clone();
    let o2 = obj.clone();
    let xs1 = x_star.clone();
    let xs2 = x_star;
    let mu0_of = move |obj: &Objective, x: &[f64], xs: &[f64]| -> f64 {
        let d2 = linalg::dist(x, xs).powi(2);
        (2.0 * (obj.value(x) - f_star) / d2).max(1e-300)
    };
    let mu0_eta = mu0_of;
    Ok(NmoParams {
        eta: Coef::StateFn(Arc::new(move |x| l0_cap / mu0_eta(&o1, x, &xs1).sqrt())),
        eta_prime: Coef::StateFn(Arc::new(move |x| {
            let gap = o2.value(x) - f_star;
            if gap <= 0.0 {
                return 0.0;
            }
            let g = o2.gradient(x);
            let gn = linalg::norm(&g);
            let diff: Vec<f64> = x.iter().zip(&xs2).map(|(a, b)| a - b).collect();
            let dist = linalg::norm(&diff);
            if gn == 0.0 || dist == 0.0 {
                return 0.0;
            }
            let a = (linalg::dot(&g, &diff) / (gn * dist)).clamp(-1.0, 1.0);
            let mu = gn * gn / (2.0 * gap);
            a * mu.sqrt()
        })),
        gamma: 0.0,
        gamma_prime: {
            let o3 = obj.clone();
            let xs3 = obj.x_star().unwrap().as_slice().to_vec();
            Coef::StateFn(Arc::new(move |x| 1.0 / mu0_of(&o3, x, &xs3).sqrt()))
        },
        mode: NmoMode::PointwiseExact,
    })
}

/// Residual of the second-order form of the momentum ODE with constant
/// parameters,
///
/// ```text
/// x'' + (eta + eta') x' + gamma H(x) x' + (eta' gamma + eta gamma') grad f(x),
/// ```
///
/// approximated by central differences along the record. Expected O(step^2)
/// plus the Hessian-product differencing error.
pub fn hb_residual(
    obj: &Objective,
    record: &FlowRecord,
    params: &NmoParams,
) -> Result<f64, FlowError> {
    if !params.is_constant() {
        return Err(FlowError::InvalidInputError(
            "residual requires constant parameters".into(),
        ));
    }
    if record.len() < 3 {
        return Err(FlowError::InvalidInputError(
            "record too short for interior differences".into(),
        ));
    }
    let eta = params.eta.constant().unwrap();
    let etap = params.eta_prime.constant().unwrap();
    let gp = params.gamma_prime.constant().unwrap();
    let h = record.step;
    let dim = obj.dim();
    let mut worst = 0.0f64;
    for k in 1..record.len() - 1 {
        let xm = &record.x_points[k - 1];
        let x = &record.x_points[k];
        let xp = &record.x_points[k + 1];
        let mut xdot = vec![0.0; dim];
        let mut xddot = vec![0.0; dim];
        for i in 0..dim {
            xdot[i] = (xp[i] - xm[i]) / (2.0 * h);
            xddot[i] = (xp[i] - 2.0 * x[i] + xm[i]) / (h * h);
        }
        let g = obj.gradient(x);
        let hx = if params.gamma > 0.0 {
            hessian_vec_fd_unchecked(obj, x, &xdot, 1e-4 * (1.0 + linalg::norm(x)))
        } else {
            vec![0.0; dim]
        };
        let mut norm2 = 0.0;
        for i in 0..dim {
            let r = xddot[i]
                + (eta + etap) * xdot[i]
                + params.gamma * hx[i]
                + (etap * params.gamma + eta * gp) * g[i];
            norm2 += r * r;
        }
        worst = worst.max(norm2.sqrt());
    }
    Ok(worst)
}

/// Maximum deviation of `log f_gap(t) - log f_gap(0) + 2 int_0^t mu(x_s) ds`
/// along a gradient-flow record, with the integral by the trapezoid rule on
/// the record's own grid. The identity is exact in the continuum, so only
/// O(step^2) discretization error should remain. The comparison window
/// truncates at the first non-positive or subnormal gap.
pub fn exact_gf_check(obj: &Objective, record: &FlowRecord) -> Result<f64, FlowError> {
    let f_star = require_minimum(obj)?;
    if record.is_empty() || record.f_gaps[0] <= 0.0 {
        return Err(FlowError::InvalidInputError(
            "record must start with a positive gap".into(),
        ));
    }
    let log_gap0 = record.f_gaps[0].ln();
    let mut integral = 0.0;
    let mut prev_mu = pointwise_mu(obj, &record.x_points[0], f_star)
        .ok_or_else(|| FlowError::InvalidInputError("gap vanishes at the start".into()))?;
    let mut worst = 0.0f64;
    for k in 1..record.len() {
        let gap = record.f_gaps[k];
        if gap <= 0.0 || !gap.is_normal() {
            break;
        }
        let mu = match pointwise_mu(obj, &record.x_points[k], f_star) {
            Some(m) => m,
            None => break,
        };
        integral += 0.5 * (prev_mu + mu) * record.step;
        prev_mu = mu;
        let deviation = (gap.ln() - log_gap0 + 2.0 * integral).abs();
        worst = worst.max(deviation);
    }
    Ok(worst)
}

fn pointwise_mu(obj: &Objective, x: &[f64], f_star: f64) -> Option<f64> {
    let gap = obj.value(x) - f_star;
    if gap <= 0.0 {
        return None;
    }
    let g = obj.gradient(x);
    Some(linalg::dot(&g, &g) / (2.0 * gap))
}
