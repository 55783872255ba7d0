//! Discrete-time algorithms: gradient descent, Heavy Ball, the two-sequence
//! Nesterov variant, and the stochastic continuized three-sequence Nesterov,
//! plus the strong-growth noise oracle and the theorem parameter constructor.
//!
//! A single run is sequential; independent runs derive their RNG streams from
//! `(seed, run index)` and may be executed in parallel.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::linalg;
use crate::objective::Objective;

#[derive(Debug, thiserror::Error)]
pub enum OptimError {
    #[error("invalid parameter: {0}")]
    InvalidParamError(String),
    #[error("invalid input: {0}")]
    InvalidInputError(String),
}

/// Divergence guard thresholds. Runs are truncated with a flag rather than
/// erroring, so momentum overshoot stays observable.
const GAP_GUARD: f64 = 1e12;
const NORM_GUARD: f64 = 1e6;

#[derive(Clone, Copy, Debug)]
pub struct GdConfig {
    pub gamma: f64,
    pub iters: usize,
    pub seed: Option<u64>,
}

impl GdConfig {
    pub fn new(gamma: f64, iters: usize) -> Result<Self, OptimError> {
        if gamma <= 0.0 {
            return Err(OptimError::InvalidParamError("gamma must be > 0".into()));
        }
        Ok(GdConfig {
            gamma,
            iters,
            seed: None,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct HbConfig {
    pub alpha: f64,
    pub eta: f64,
    pub iters: usize,
}

impl HbConfig {
    pub fn new(alpha: f64, eta: f64, iters: usize) -> Result<Self, OptimError> {
        if !(0.0..1.0).contains(&alpha) || eta <= 0.0 {
            return Err(OptimError::InvalidParamError(
                "need 0 <= alpha < 1 and eta > 0".into(),
            ));
        }
        Ok(HbConfig { alpha, eta, iters })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NmPrimeConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub iters: usize,
}

impl NmPrimeConfig {
    pub fn new(alpha: f64, gamma: f64, iters: usize) -> Result<Self, OptimError> {
        if !(0.0..1.0).contains(&alpha) || gamma <= 0.0 {
            return Err(OptimError::InvalidParamError(
                "need 0 <= alpha < 1 and gamma > 0".into(),
            ));
        }
        Ok(NmPrimeConfig {
            alpha,
            gamma,
            iters,
        })
    }
}

/// Parameters of the continuized three-sequence Nesterov recursion. The
/// per-step coefficients are functions of i.i.d. exponential inter-event
/// times:
///
/// ```text
/// alpha_k = eta / (eta + eta') (1 - e^{-(eta + eta') g_k})
/// beta_k  = eta' (1 - e^{-(eta + eta') g_k}) / (eta' + eta e^{-(eta + eta') g_k})
/// ```
#[derive(Clone, Copy, Debug)]
pub struct NmContinuizedConfig {
    pub eta: f64,
    pub eta_prime: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub iters: usize,
    pub seed: u64,
}

impl NmContinuizedConfig {
    pub fn new(
        eta: f64,
        eta_prime: f64,
        gamma: f64,
        gamma_prime: f64,
    ) -> Result<Self, OptimError> {
        if eta + eta_prime <= 0.0 {
            return Err(OptimError::InvalidParamError(
                "need eta + eta' > 0".into(),
            ));
        }
        if gamma < 0.0 || gamma_prime < 0.0 {
            return Err(OptimError::InvalidParamError(
                "need gamma, gamma' >= 0".into(),
            ));
        }
        Ok(NmContinuizedConfig {
            eta,
            eta_prime,
            gamma,
            gamma_prime,
            iters: 0,
            seed: 0,
        })
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.iters = iters;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Momentum coefficients for one inter-event gap.
    pub fn coefficients(&self, gap: f64) -> (f64, f64) {
        let s = self.eta + self.eta_prime;
        let e = (-s * gap).exp();
        let alpha = self.eta / s * (1.0 - e);
        let denom = self.eta_prime + self.eta * e;
        let beta = if denom == 0.0 {
            0.0
        } else {
            self.eta_prime * (1.0 - e) / denom
        };
        (alpha, beta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    TwoPointMultiplicative,
}

/// Strong-growth noise model: the oracle returns `s * grad f(x)` with
/// `E[s] = 1` and `E[s^2] = rho` exactly.
#[derive(Clone, Copy, Debug)]
pub struct NoiseModel {
    pub rho: f64,
    pub kind: NoiseKind,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            rho: 1.0,
            kind: NoiseKind::None,
        }
    }

    pub fn two_point(rho: f64) -> Result<Self, OptimError> {
        if rho < 1.0 {
            return Err(OptimError::InvalidParamError("need rho >= 1".into()));
        }
        Ok(NoiseModel {
            rho,
            kind: NoiseKind::TwoPointMultiplicative,
        })
    }

    /// The two equiprobable multipliers `1 -/+ sqrt(rho - 1)`.
    pub fn outcomes(&self) -> (f64, f64) {
        let delta = (self.rho - 1.0).sqrt();
        (1.0 - delta, 1.0 + delta)
    }
}

/// Draws one stochastic gradient: the analytic gradient scaled by a
/// two-point multiplicative factor (or returned as-is for the noiseless
/// model). Unbiased with second moment exactly `rho ||grad f||^2`.
pub fn sgc_oracle(
    obj: &Objective,
    x: &[f64],
    noise: &NoiseModel,
    rng: &mut ChaCha20Rng,
) -> Vec<f64> {
    let mut g = obj.gradient(x);
    if noise.kind == NoiseKind::TwoPointMultiplicative {
        let (lo, hi) = noise.outcomes();
        let s = if rng.random::<bool>() { hi } else { lo };
        for gi in g.iter_mut() {
            *gi *= s;
        }
    }
    g
}

/// Iterate/time/value/gradient trace of one run, annotated with pointwise
/// diagnostics. Diagnostics (gradient norm, aiming, pointwise PL) are
/// computed at `diag_points`: the momentum look-ahead points for the
/// Nesterov variants, the iterates themselves otherwise. Entries that would
/// be degenerate (at the minimizer, zero gradient) hold NaN.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub iterates: Vec<Vec<f64>>,
    pub f_gaps: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub times: Vec<f64>,
    pub aiming_values: Vec<f64>,
    pub pl_values: Vec<f64>,
    pub diag_points: Vec<Vec<f64>>,
    pub diag_dists: Vec<f64>,
    pub diverged: bool,
}

impl RunRecord {
    fn with_capacity(n: usize) -> Self {
        RunRecord {
            iterates: Vec::with_capacity(n),
            f_gaps: Vec::with_capacity(n),
            grad_norms: Vec::with_capacity(n),
            times: Vec::with_capacity(n),
            aiming_values: Vec::with_capacity(n),
            pl_values: Vec::with_capacity(n),
            diag_points: Vec::with_capacity(n),
            diag_dists: Vec::with_capacity(n),
            diverged: false,
        }
    }

    pub fn len(&self) -> usize {
        self.f_gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_gaps.is_empty()
    }

    /// CSV with columns `k,time,f_gap,grad_norm,aiming,pl_pointwise`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,time,f_gap,grad_norm,aiming,pl_pointwise")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                k,
                self.times[k],
                self.f_gaps[k],
                self.grad_norms[k],
                self.aiming_values[k],
                self.pl_values[k]
            )?;
        }
        Ok(())
    }

    fn push(&mut self, obj: &Objective, x: &[f64], diag: &[f64], time: f64, f_star: f64) {
        let gap = obj.value(x) - f_star;
        let g = obj.gradient(diag);
        let gn = linalg::norm(&g);
        let (aim, dist) = match obj.x_star() {
            Some(xs) => {
                let diff: Vec<f64> = diag.iter().zip(xs.iter()).map(|(a, b)| a - b).collect();
                let dist = linalg::norm(&diff);
                let aim = if dist > 0.0 && gn > 0.0 {
                    (linalg::dot(&g, &diff) / (gn * dist)).clamp(-1.0, 1.0)
                } else {
                    f64::NAN
                };
                (aim, dist)
            }
            None => (f64::NAN, f64::NAN),
        };
        let diag_gap = obj.value(diag) - f_star;
        let pl = if diag_gap > 1e-14 {
            gn * gn / (2.0 * diag_gap)
        } else {
            f64::NAN
        };
        self.iterates.push(x.to_vec());
        self.f_gaps.push(gap);
        self.grad_norms.push(gn);
        self.times.push(time);
        self.aiming_values.push(aim);
        self.pl_values.push(pl);
        self.diag_points.push(diag.to_vec());
        self.diag_dists.push(dist);
    }

    fn guard_tripped(&mut self, x: &[f64]) -> bool {
        let gap = self.f_gaps.last().copied().unwrap_or(0.0);
        if !gap.is_finite() || gap > GAP_GUARD || linalg::norm(x) > NORM_GUARD {
            self.diverged = true;
            true
        } else {
            false
        }
    }
}

fn require_minimum(obj: &Objective) -> Result<f64, OptimError> {
    obj.f_star().ok_or_else(|| {
        OptimError::InvalidInputError("objective must carry f_star for run records".into())
    })
}

/// Gradient descent `x_{k+1} = x_k - gamma * oracle(x_k)`. Diagnostics are
/// computed at the iterates.
pub fn run_gd(
    obj: &Objective,
    cfg: &GdConfig,
    x0: &[f64],
    noise: &NoiseModel,
) -> Result<RunRecord, OptimError> {
    let f_star = require_minimum(obj)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed.unwrap_or(0));
    let mut record = RunRecord::with_capacity(cfg.iters + 1);
    let mut x = x0.to_vec();
    for k in 0..=cfg.iters {
        record.push(obj, &x, &x, k as f64, f_star);
        if record.guard_tripped(&x) || k == cfg.iters {
            break;
        }
        let g = sgc_oracle(obj, &x, noise, &mut rng);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= cfg.gamma * gi;
        }
    }
    Ok(record)
}

/// Heavy Ball `x_{k+1} = x_k + alpha (x_k - x_{k-1}) - eta grad f(x_k)`,
/// started with zero velocity (`x_{-1} = x_0`).
pub fn run_hb(obj: &Objective, cfg: &HbConfig, x0: &[f64]) -> Result<RunRecord, OptimError> {
    let f_star = require_minimum(obj)?;
    let mut record = RunRecord::with_capacity(cfg.iters + 1);
    let mut x = x0.to_vec();
    let mut x_prev = x0.to_vec();
    for k in 0..=cfg.iters {
        record.push(obj, &x, &x, k as f64, f_star);
        if record.guard_tripped(&x) || k == cfg.iters {
            break;
        }
        let g = obj.gradient(&x);
        let next: Vec<f64> = x
            .iter()
            .zip(&x_prev)
            .zip(&g)
            .map(|((&xi, &xp), &gi)| xi + cfg.alpha * (xi - xp) - cfg.eta * gi)
            .collect();
        x_prev = std::mem::replace(&mut x, next);
    }
    Ok(record)
}

/// Two-sequence Nesterov:
/// `y_k = x_k + alpha (x_k - x_{k-1})`, `x_{k+1} = y_k - gamma grad f(y_k)`,
/// with `x_{-1} = x_0`. Diagnostics are computed at the look-ahead `y_k`.
pub fn run_nm_prime(
    obj: &Objective,
    cfg: &NmPrimeConfig,
    x0: &[f64],
) -> Result<RunRecord, OptimError> {
    let f_star = require_minimum(obj)?;
    let mut record = RunRecord::with_capacity(cfg.iters + 1);
    let mut x = x0.to_vec();
    let mut x_prev = x0.to_vec();
    for k in 0..=cfg.iters {
        let y: Vec<f64> = x
            .iter()
            .zip(&x_prev)
            .map(|(&xi, &xp)| xi + cfg.alpha * (xi - xp))
            .collect();
        record.push(obj, &x, &y, k as f64, f_star);
        if record.guard_tripped(&x) || k == cfg.iters {
            break;
        }
        let g = obj.gradient(&y);
        let next: Vec<f64> = y
            .iter()
            .zip(&g)
            .map(|(&yi, &gi)| yi - cfg.gamma * gi)
            .collect();
        x_prev = std::mem::replace(&mut x, next);
    }
    Ok(record)
}

/// Continuized Nesterov: inter-event gaps are i.i.d. Exp(1) draws from the
/// seed, the momentum coefficients follow the closed-form expressions, and
/// both sequences share one oracle draw per step. `times` holds the event
/// times `T_k`; diagnostics are computed at the look-ahead `y_k`.
pub fn run_nm_continuized(
    obj: &Objective,
    cfg: &NmContinuizedConfig,
    x0: &[f64],
    noise: &NoiseModel,
) -> Result<RunRecord, OptimError> {
    let f_star = require_minimum(obj)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut record = RunRecord::with_capacity(cfg.iters + 1);
    let mut x = x0.to_vec();
    let mut z = x0.to_vec();
    let mut t = 0.0;
    for k in 0..=cfg.iters {
        let gap = exp1(&mut rng);
        let (alpha, beta) = cfg.coefficients(gap);
        let y: Vec<f64> = x
            .iter()
            .zip(&z)
            .map(|(&xi, &zi)| xi + alpha * (zi - xi))
            .collect();
        record.push(obj, &x, &y, t, f_star);
        if record.guard_tripped(&x) || k == cfg.iters {
            break;
        }
        let g = sgc_oracle(obj, &y, noise, &mut rng);
        for i in 0..x.len() {
            x[i] = y[i] - cfg.gamma * g[i];
            z[i] = z[i] + beta * (y[i] - z[i]) - cfg.gamma_prime * g[i];
        }
        t += gap;
    }
    Ok(record)
}

/// Unit-rate exponential variate.
fn exp1(rng: &mut ChaCha20Rng) -> f64 {
    // 1 - u in (0, 1], so the log is finite
    -(1.0 - rng.random::<f64>()).ln()
}

/// The continuized parameter bundle prescribed by the acceleration theorem
/// under PL + aiming + smoothness, with strong-growth factor `rho`:
///
/// ```text
/// eta    = (mu0 L0)^{1/4} / (rho sqrt(L))
/// eta'   = a (mu0/L0)^{1/4} sqrt(mu/L) / rho
/// gamma  = 1 / (rho L)
/// gamma' = 1 / (rho (mu0 L0)^{1/4} sqrt(L))
/// ```
pub fn theorem_params_nm(
    mu: f64,
    mu0: f64,
    l0: f64,
    l: f64,
    a: f64,
    rho: f64,
) -> Result<NmContinuizedConfig, OptimError> {
    if !(0.0 < mu && mu <= mu0 && mu0 <= l0 && l0 <= l) {
        return Err(OptimError::InvalidParamError(format!(
            "need 0 < mu <= mu0 <= L0 <= L, got ({mu}, {mu0}, {l0}, {l})"
        )));
    }
    if !(0.0 < a && a <= 1.0) || rho < 1.0 {
        return Err(OptimError::InvalidParamError(
            "need 0 < a <= 1 and rho >= 1".into(),
        ));
    }
    let quarter = (mu0 * l0).powf(0.25);
    NmContinuizedConfig::new(
        quarter / (rho * l.sqrt()),
        a / rho * (mu0 / l0).powf(0.25) * (mu / l).sqrt(),
        1.0 / (rho * l),
        1.0 / (rho * quarter * l.sqrt()),
    )
}
