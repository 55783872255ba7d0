//! The benchmark functions, each shipped with a known minimizer and, where
//! available, analytic constants.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg;
use crate::objective::{BoxDomain, Objective, ObjectiveError, Point};

#[derive(Debug, thiserror::Error)]
pub enum TestbedError {
    #[error("invalid parameter: {0}")]
    InvalidParamError(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// A benchmark objective plus whatever constants are known in closed form
/// (keyed by name, e.g. `pl_mu_bound`).
#[derive(Clone, Debug)]
pub struct BenchmarkSpec {
    pub objective: Objective,
    pub analytic: BTreeMap<String, f64>,
    pub notes: String,
}

impl BenchmarkSpec {
    fn new(objective: Objective, notes: &str) -> Self {
        BenchmarkSpec {
            objective,
            analytic: BTreeMap::new(),
            notes: notes.to_string(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.analytic.insert(key.to_string(), value);
        self
    }
}

/// `f(u) = A (u + b sin(c u))^2` on `[-half, half]`, unique minimizer at 0
/// provided `|b c| < 1`.
pub fn sine_quadratic_1d_on(
    a: f64,
    b: f64,
    c: f64,
    half: f64,
) -> Result<BenchmarkSpec, TestbedError> {
    if a <= 0.0 || c <= 0.0 {
        return Err(TestbedError::InvalidParamError(
            "need A > 0 and c > 0".into(),
        ));
    }
    if (b * c).abs() >= 1.0 {
        return Err(TestbedError::InvalidParamError(format!(
            "|b c| = {} >= 1: minimizer is no longer unique",
            (b * c).abs()
        )));
    }
    let obj = Objective::new(
        format!("sine-quadratic:{a},{b},{c}"),
        BoxDomain::centered(half, 1)?,
        move |x| {
            let u = x[0] + b * (c * x[0]).sin();
            a * u * u
        },
        move |x, g| {
            let u = x[0] + b * (c * x[0]).sin();
            g[0] = 2.0 * a * u * (1.0 + b * c * (c * x[0]).cos());
        },
    )
    .with_minimizer(Point::new(vec![0.0])?, 0.0)?;
    // min over u of the pointwise PL value 2A(1 + bc cos(cu))^2, attained
    // whenever cos(cu) = -sign(bc) inside the domain (true for all shipped
    // parameter sets).
    let spec = BenchmarkSpec::new(obj, "one-dimensional sine-perturbed quadratic")
        .with("pl_mu", 2.0 * a * (1.0 - (b * c).abs()).powi(2));
    Ok(spec)
}

/// `f(u) = A (u + b sin(c u))^2` on the default window `[-2, 2]`.
pub fn sine_quadratic_1d(a: f64, b: f64, c: f64) -> Result<BenchmarkSpec, TestbedError> {
    sine_quadratic_1d_on(a, b, c, 2.0)
}

/// `f(x, y) = 0.5 (0.5 x^2 - y)^2 + 0.05 x^2` on `[-1.2638, 1.2638]^2`.
pub fn valley_2d() -> BenchmarkSpec {
    let half = 1.2638;
    let obj = Objective::new(
        "valley-2d",
        BoxDomain::centered(half, 2).expect("static bounds"),
        |x| {
            let r = 0.5 * x[0] * x[0] - x[1];
            0.5 * r * r + 0.05 * x[0] * x[0]
        },
        |x, g| {
            let r = 0.5 * x[0] * x[0] - x[1];
            g[0] = r * x[0] + 0.1 * x[0];
            g[1] = -r;
        },
    )
    .with_minimizer(Point::new(vec![0.0, 0.0]).expect("static"), 0.0)
    .expect("f(0,0) = 0");
    BenchmarkSpec::new(obj, "two-dimensional curved valley")
}

/// `F_eps(x, y) = 0.5 (y - sin x)^2 + 0.5 eps x^2` on
/// `[-2 pi, 2 pi] x [-3, 3]`. Carries the closed-form upper bound on its PL
/// constant under `pl_mu_bound`.
pub fn sine_valley(eps: f64) -> Result<BenchmarkSpec, TestbedError> {
    if eps <= 0.0 {
        return Err(TestbedError::InvalidParamError(
            "eps must be > 0 (minimizer uniqueness is lost at eps = 0)".into(),
        ));
    }
    let pi2 = 2.0 * std::f64::consts::PI;
    let obj = Objective::new(
        format!("sine-valley:{eps}"),
        BoxDomain::new(vec![-pi2, -3.0], vec![pi2, 3.0])?,
        move |x| {
            let r = x[1] - x[0].sin();
            0.5 * r * r + 0.5 * eps * x[0] * x[0]
        },
        move |x, g| {
            let r = x[1] - x[0].sin();
            g[0] = -r * x[0].cos() + eps * x[0];
            g[1] = r;
        },
    )
    .with_minimizer(Point::new(vec![0.0, 0.0])?, 0.0)?;
    let bound = (2.0 + eps - (eps * eps + 4.0).sqrt()) / 2.0;
    Ok(BenchmarkSpec::new(obj, "sine valley with weak x-anchoring").with("pl_mu_bound", bound))
}

/// Synthetic radial function `h(x) = ||x||^2 g(x / ||x||)` on `[-1, 1]^2`,
/// with `g(u) = 1 + (1/4N) sum_i a_i sin(b_i u_1)^2 + c_i cos(d_i u_2)^2`,
/// coefficients drawn uniformly from the given seed. `h(0) = 0` and
/// `grad h(0) = 0` by continuity.
pub fn radial_sqc(n: usize, seed: u64) -> Result<BenchmarkSpec, TestbedError> {
    if n < 1 {
        return Err(TestbedError::InvalidParamError("need N >= 1".into()));
    }
    let (a, b, c, d) = radial_sqc_coefficients(n, seed);
    let (a2, b2, c2, d2) = (a.clone(), b.clone(), c.clone(), d.clone());
    let nn = n as f64;
    let g_of = move |u1: f64, u2: f64, a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += a[i] * (b[i] * u1).sin().powi(2) + c[i] * (d[i] * u2).cos().powi(2);
        }
        s / (4.0 * nn) + 1.0
    };
    let g_eval = g_of;
    let obj = Objective::new(
        format!("radial-sqc:N={n},seed={seed}"),
        BoxDomain::centered(1.0, 2)?,
        move |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 == 0.0 {
                return 0.0;
            }
            let r = r2.sqrt();
            r2 * g_eval(x[0] / r, x[1] / r, &a, &b, &c, &d)
        },
        move |x, g| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 == 0.0 {
                g[0] = 0.0;
                g[1] = 0.0;
                return;
            }
            let r = r2.sqrt();
            let (u1, u2) = (x[0] / r, x[1] / r);
            let gv = g_of(u1, u2, &a2, &b2, &c2, &d2);
            // dg/du, then project through the Jacobian of u = x/||x||:
            // grad h = 2 g(u) x + r (I - u u^T) grad g(u).
            let mut dg1 = 0.0;
            let mut dg2 = 0.0;
            for i in 0..a2.len() {
                dg1 += a2[i] * b2[i] * (2.0 * b2[i] * u1).sin();
                dg2 -= c2[i] * d2[i] * (2.0 * d2[i] * u2).sin();
            }
            dg1 /= 4.0 * nn;
            dg2 /= 4.0 * nn;
            let udot = u1 * dg1 + u2 * dg2;
            g[0] = 2.0 * gv * x[0] + r * (dg1 - u1 * udot);
            g[1] = 2.0 * gv * x[1] + r * (dg2 - u2 * udot);
        },
    )
    .with_minimizer(Point::new(vec![0.0, 0.0])?, 0.0)?
    .with_kink_distance(linalg::norm);
    // g >= 1 gives h >= ||x||^2, i.e. quadratic growth with mu0 >= 2
    Ok(BenchmarkSpec::new(obj, "randomized radial profile times squared norm")
        .with("mu0_qg_lower_bound", 2.0))
}

/// The coefficient streams behind [`radial_sqc`], exposed so tests can
/// re-derive values independently.
pub fn radial_sqc_coefficients(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for _ in 0..n {
        a.push(20.0 * rng.random::<f64>());
        b.push(-25.0 + 50.0 * rng.random::<f64>());
        c.push(20.0 * rng.random::<f64>());
        d.push(-25.0 + 50.0 * rng.random::<f64>());
    }
    (a, b, c, d)
}

/// `f(x) = 0.5 sum_i lambda_i x_i^2` on `[-1, 1]^d`. The oracle benchmark:
/// every constant is known analytically.
pub fn quadratic_diag(lambdas: &[f64]) -> Result<BenchmarkSpec, TestbedError> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| l <= 0.0) {
        return Err(TestbedError::InvalidParamError(
            "need a nonempty list of positive eigenvalues".into(),
        ));
    }
    let d = lambdas.len();
    let ls = lambdas.to_vec();
    let ls2 = ls.clone();
    let name = format!(
        "quadratic-diag:{}",
        ls.iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    let obj = Objective::new(
        name,
        BoxDomain::centered(1.0, d)?,
        move |x| 0.5 * x.iter().zip(&ls).map(|(v, l)| l * v * v).sum::<f64>(),
        move |x, g| {
            for ((gi, v), l) in g.iter_mut().zip(x).zip(&ls2) {
                *gi = l * v;
            }
        },
    )
    .with_minimizer(Point::new(vec![0.0; d])?, 0.0)?;
    let mu = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let l = lambdas.iter().cloned().fold(0.0, f64::max);
    let mut spec = BenchmarkSpec::new(obj, "diagonal quadratic oracle")
        .with("mu_pl", mu)
        .with("l_smooth", l)
        .with("mu0_qg", mu)
        .with("l0_qg", l);
    // Worst-case gradient alignment of a quadratic: 2 sqrt(mu L) / (mu + L).
    spec = spec.with("a_aim", 2.0 * (mu * l).sqrt() / (mu + l));
    Ok(spec)
}

/// Configuration of the chained hard instance. The dimension is
/// `block_len * blocks`; `y` holds the per-coordinate bump positions.
#[derive(Clone, Debug)]
pub struct HardInstanceConfig {
    /// T: coordinates per block.
    pub block_len: usize,
    /// t: number of blocks.
    pub blocks: usize,
    /// Bump positions, one per coordinate; all positive.
    pub y: Vec<f64>,
    /// Value substituted for the out-of-range coordinate x_0.
    pub anchor: f64,
    /// Output multiplier.
    pub scale: f64,
    pub target_mu: f64,
    pub target_l: f64,
}

impl HardInstanceConfig {
    /// Plain configuration: `y_i = 1`, anchor 1, unit scale.
    pub fn new(block_len: usize, blocks: usize) -> Result<Self, TestbedError> {
        if block_len == 0 || blocks == 0 {
            return Err(TestbedError::InvalidParamError(
                "need block_len >= 1 and blocks >= 1".into(),
            ));
        }
        let d = block_len * blocks;
        if d > 2000 {
            return Err(TestbedError::InvalidParamError(format!(
                "dimension {d} too large for the dense minimizer solve"
            )));
        }
        Ok(HardInstanceConfig {
            block_len,
            blocks,
            y: vec![1.0; d],
            anchor: 1.0,
            scale: 1.0,
            target_mu: 1e-4,
            target_l: 1e3,
        })
    }

    /// Desk-scale configuration used by the hard-instance experiment: bump
    /// positions laid on a ladder proportional to the unconstrained chain
    /// equilibrium (factor `beta`), so every coordinate crosses its bump en
    /// route from the all-zeros start, and the output rescaled so the sampled
    /// smoothness estimate matches `target_l`.
    pub fn desk_scale(
        block_len: usize,
        blocks: usize,
        beta: f64,
        target_l: f64,
    ) -> Result<Self, TestbedError> {
        if !(0.0 < beta && beta < 32.0 / 33.0) {
            return Err(TestbedError::InvalidParamError(
                "ladder factor must lie in (0, 32/33) so the equilibrium clears the bumps".into(),
            ));
        }
        let mut cfg = Self::new(block_len, blocks)?;
        cfg.target_l = target_l;
        let xq = chain_equilibrium(&cfg)?;
        cfg.y = xq.iter().map(|v| (beta * v.abs()).max(1e-12)).collect();
        // One scalar cannot hit both targets; match L and record mu as
        // aspirational (the ratio is what the experiment reports).
        let raw = hard_pl_instance(&cfg)?;
        let l_raw = crate::geometry::estimate_l_sampled(&raw.objective, 1000, 50, 0);
        cfg.scale = target_l / l_raw;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.block_len * self.blocks
    }

    fn validate(&self) -> Result<(), TestbedError> {
        if self.block_len == 0 || self.blocks == 0 {
            return Err(TestbedError::InvalidParamError(
                "need block_len >= 1 and blocks >= 1".into(),
            ));
        }
        if self.y.len() != self.dim() {
            return Err(TestbedError::InvalidParamError(format!(
                "y has length {}, expected {}",
                self.y.len(),
                self.dim()
            )));
        }
        if self.y.iter().any(|&v| v <= 0.0) {
            return Err(TestbedError::InvalidParamError(
                "all y_i must be > 0".into(),
            ));
        }
        if self.scale <= 0.0 {
            return Err(TestbedError::InvalidParamError("scale must be > 0".into()));
        }
        Ok(())
    }
}

/// One-dimensional bump component of the hard instance, C^1 by construction:
///
/// ```text
/// v_y(u) = u^2/2                                   u <= 31y/32
///        = u^2/2 - 16 (u - 31y/32)^2       31y/32 < u <= y
///        = u^2/2 - y^2/32 + 16 (u - 33y/32)^2   y < u <= 33y/32
///        = u^2/2 - y^2/32                        u > 33y/32
/// ```
///
/// Unique minimizer at 0; the derivative vanishes at `u = y` (the flat spot
/// that drags the PL constant down), and the second derivative jumps between
/// 1, -31 and 33 across the breakpoints.
pub fn hard_bump(u: f64, y: f64) -> (f64, f64) {
    let b1 = 31.0 * y / 32.0;
    let b3 = 33.0 * y / 32.0;
    if u <= b1 {
        (0.5 * u * u, u)
    } else if u <= y {
        let w = u - b1;
        (0.5 * u * u - 16.0 * w * w, u - 32.0 * w)
    } else if u <= b3 {
        let w = u - b3;
        (0.5 * u * u - y * y / 32.0 + 16.0 * w * w, u + 32.0 * w)
    } else {
        (0.5 * u * u - y * y / 32.0, u)
    }
}

/// Sparse description of the chained quadratic: each squared term is
/// `(sum_j coeff_j x_{idx_j} + constant)^2 / 2` with 1-based indices.
#[derive(Clone)]
struct ChainTerm {
    entries: Vec<(usize, f64)>,
    constant: f64,
}

fn chain_value(terms: &[ChainTerm], x: &[f64]) -> f64 {
    let mut v = 0.0;
    for term in terms {
        let mut s = term.constant;
        for &(k, c) in &term.entries {
            s += c * x[k - 1];
        }
        v += 0.5 * s * s;
    }
    v
}

fn chain_terms(cfg: &HardInstanceConfig) -> Vec<ChainTerm> {
    let (t_len, blocks, anchor) = (cfg.block_len, cfg.blocks, cfg.anchor);
    let mut terms = Vec::new();
    for i in 0..blocks {
        let lead = i * t_len;
        // (7/8 x_{iT} - x_{iT+1})^2 with x_0 replaced by the anchor.
        let mut entries = Vec::new();
        let mut constant = 0.0;
        if lead == 0 {
            constant = 7.0 / 8.0 * anchor;
        } else {
            entries.push((lead, 7.0 / 8.0));
        }
        entries.push((lead + 1, -1.0));
        terms.push(ChainTerm { entries, constant });
        for j in 1..t_len {
            terms.push(ChainTerm {
                entries: vec![(lead + j + 1, 1.0), (lead + j, -1.0)],
                constant: 0.0,
            });
        }
    }
    terms
}

fn chain_value_grad(terms: &[ChainTerm], x: &[f64], grad: &mut [f64]) -> f64 {
    let mut v = 0.0;
    for term in terms {
        let mut s = term.constant;
        for &(k, c) in &term.entries {
            s += c * x[k - 1];
        }
        v += 0.5 * s * s;
        for &(k, c) in &term.entries {
            grad[k - 1] += s * c;
        }
    }
    v
}

/// Stationary point of `q + sum_i u^2/2` (the regime where every bump
/// contributes its plain quadratic branch): solves `(H_q + I) x = -grad q(0)`.
fn chain_equilibrium(cfg: &HardInstanceConfig) -> Result<Vec<f64>, TestbedError> {
    let d = cfg.dim();
    let terms = chain_terms(cfg);
    let mut h = vec![0.0; d * d];
    for term in &terms {
        for &(k1, c1) in &term.entries {
            for &(k2, c2) in &term.entries {
                h[(k1 - 1) * d + (k2 - 1)] += c1 * c2;
            }
        }
    }
    for i in 0..d {
        h[i * d + i] += 1.0;
    }
    let mut rhs = vec![0.0; d];
    for term in &terms {
        if term.constant != 0.0 {
            for &(k, c) in &term.entries {
                rhs[k - 1] -= term.constant * c;
            }
        }
    }
    linalg::spd_solve(&h, &rhs, d).ok_or_else(|| {
        TestbedError::InvalidParamError("chain system is not positive definite".into())
    })
}

/// The chained hard instance `scale * (q(x) + sum_i v_{y_i}(x_i))`, shifted
/// so the minimum value is exactly zero.
///
/// The minimizer is the chain equilibrium (each coordinate on a plain
/// quadratic branch of its bump); construction fails if any coordinate of the
/// equilibrium lands inside a bump window, or if the gradient there is not
/// numerically zero.
pub fn hard_pl_instance(cfg: &HardInstanceConfig) -> Result<BenchmarkSpec, TestbedError> {
    cfg.validate()?;
    let d = cfg.dim();
    let xhat = chain_equilibrium(cfg)?;
    for (i, (&xi, &yi)) in xhat.iter().zip(&cfg.y).enumerate() {
        let (b1, b3) = (31.0 * yi / 32.0, 33.0 * yi / 32.0);
        if xi > b1 && xi < b3 {
            return Err(TestbedError::InvalidParamError(format!(
                "equilibrium coordinate {i} = {xi} falls inside the bump window ({b1}, {b3})"
            )));
        }
    }

    let terms = chain_terms(cfg);
    let y = cfg.y.clone();
    let scale = cfg.scale;

    let mut gbuf = vec![0.0; d];
    let mut raw_min = chain_value_grad(&terms, &xhat, &mut gbuf);
    for i in 0..d {
        let (vi, gi) = hard_bump(xhat[i], y[i]);
        raw_min += vi;
        gbuf[i] += gi;
    }
    let grad_norm = linalg::norm(&gbuf);
    if grad_norm > 1e-10 * (1.0 + linalg::norm(&xhat)) {
        return Err(TestbedError::InvalidParamError(format!(
            "gradient at computed minimizer has norm {grad_norm}"
        )));
    }

    let half = 2.0 * xhat
        .iter()
        .map(|v| v.abs())
        .fold(cfg.anchor.abs(), f64::max);
    let (terms_eval, y_eval) = (terms.clone(), y.clone());
    let (terms_grad, y_grad) = (terms, y);
    let y2 = cfg.y.clone();
    let obj = Objective::new(
        format!("hard-pl:T={},t={}", cfg.block_len, cfg.blocks),
        BoxDomain::centered(half.max(1.0), d)?,
        move |x| {
            let mut v = chain_value(&terms_eval, x);
            for i in 0..x.len() {
                v += hard_bump(x[i], y_eval[i]).0;
            }
            scale * (v - raw_min)
        },
        move |x, g| {
            g.fill(0.0);
            chain_value_grad(&terms_grad, x, g);
            for i in 0..x.len() {
                g[i] += hard_bump(x[i], y_grad[i]).1;
            }
            for gi in g.iter_mut() {
                *gi *= scale;
            }
        },
    )
    .with_minimizer(Point::new(xhat.clone())?, 0.0)?
    .with_kink_distance(move |x| {
        x.iter()
            .zip(&y2)
            .map(|(&u, &yi)| {
                let b = [31.0 * yi / 32.0, yi, 33.0 * yi / 32.0];
                b.iter().map(|bp| (u - bp).abs()).fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    });

    let mut gq = vec![0.0; d];
    let q_at_origin = {
        let terms = chain_terms(cfg);
        chain_value_grad(&terms, &vec![0.0; d], &mut gq)
    };
    Ok(BenchmarkSpec::new(obj, "chained lower-bound instance")
        .with("q_at_origin_raw", q_at_origin)
        .with("target_mu", cfg.target_mu)
        .with("target_l", cfg.target_l)
        .with("scale", cfg.scale))
}

/// Resolves a benchmark by registry name, e.g. `sine-quadratic:5,0.19,5`,
/// `sine-valley:1e-3`, `valley-2d`, `quadratic-diag:1,4`,
/// `radial-sqc:N=10,seed=42`, `hard-pl:T=10,t=5`.
pub fn benchmark_by_name(name: &str) -> Result<BenchmarkSpec, TestbedError> {
    let (head, args) = match name.split_once(':') {
        Some((h, a)) => (h, a),
        None => (name, ""),
    };
    let parse_f64 = |s: &str| -> Result<f64, TestbedError> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| TestbedError::InvalidParamError(format!("bad number `{s}` in `{name}`")))
    };
    match head {
        "sine-quadratic" => {
            let parts: Vec<&str> = args.split(',').collect();
            match parts.as_slice() {
                [a, b, c] => sine_quadratic_1d(parse_f64(a)?, parse_f64(b)?, parse_f64(c)?),
                [a, b, c, half] => {
                    sine_quadratic_1d_on(parse_f64(a)?, parse_f64(b)?, parse_f64(c)?, parse_f64(half)?)
                }
                _ => Err(TestbedError::InvalidParamError(format!(
                    "expected sine-quadratic:A,b,c[,half], got `{name}`"
                ))),
            }
        }
        "valley-2d" => Ok(valley_2d()),
        "sine-valley" => sine_valley(parse_f64(args)?),
        "quadratic-diag" => {
            let ls: Result<Vec<f64>, _> = args.split(',').map(parse_f64).collect();
            quadratic_diag(&ls?)
        }
        "radial-sqc" => {
            let mut n = 10usize;
            let mut seed = 42u64;
            for kv in args.split(',').filter(|s| !s.is_empty()) {
                match kv.split_once('=') {
                    Some(("N", v)) | Some(("n", v)) => {
                        n = v.parse().map_err(|_| {
                            TestbedError::InvalidParamError(format!("bad N in `{name}`"))
                        })?
                    }
                    Some(("seed", v)) => {
                        seed = v.parse().map_err(|_| {
                            TestbedError::InvalidParamError(format!("bad seed in `{name}`"))
                        })?
                    }
                    _ => {
                        return Err(TestbedError::InvalidParamError(format!(
                            "unknown radial-sqc argument `{kv}`"
                        )))
                    }
                }
            }
            radial_sqc(n, seed)
        }
        "hard-pl" => {
            let mut t_len = 10usize;
            let mut blocks = 5usize;
            for kv in args.split(',').filter(|s| !s.is_empty()) {
                match kv.split_once('=') {
                    Some(("T", v)) => {
                        t_len = v.parse().map_err(|_| {
                            TestbedError::InvalidParamError(format!("bad T in `{name}`"))
                        })?
                    }
                    Some(("t", v)) => {
                        blocks = v.parse().map_err(|_| {
                            TestbedError::InvalidParamError(format!("bad t in `{name}`"))
                        })?
                    }
                    _ => {
                        return Err(TestbedError::InvalidParamError(format!(
                            "unknown hard-pl argument `{kv}`"
                        )))
                    }
                }
            }
            hard_pl_instance(&HardInstanceConfig::new(t_len, blocks)?)
        }
        _ => Err(TestbedError::InvalidParamError(format!(
            "unknown benchmark `{name}`"
        ))),
    }
}

/// Names of the benchmarks exercised by the cross-cutting property suites.
pub fn shipped_benchmarks() -> Vec<BenchmarkSpec> {
    vec![
        sine_quadratic_1d(5.0, 0.19, 5.0).expect("static params"),
        sine_quadratic_1d_on(2.5, 0.07, 13.0, 10.0).expect("static params"),
        valley_2d(),
        sine_valley(1e-3).expect("static params"),
        radial_sqc(10, 42).expect("static params"),
        quadratic_diag(&[1.0, 4.0]).expect("static params"),
        hard_pl_instance(&HardInstanceConfig::new(2, 2).expect("static params"))
            .expect("static params"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_quadratic_examples() {
        let spec = sine_quadratic_1d(5.0, 0.19, 5.0).unwrap();
        assert_eq!(spec.objective.value(&[0.0]), 0.0);
        // hand arithmetic of the closed formula at u = 0.5
        let u = 0.5f64 + 0.19 * (2.5f64).sin();
        let expected = 5.0 * u * u;
        assert!((expected - 1.8832).abs() < 5e-4);
        assert!((spec.objective.value(&[0.5]) - expected).abs() < 1e-15);
        // Fig-5-style parameters admit construction and keep x* = 0
        let fig5 = sine_quadratic_1d_on(2.5, 0.07, 13.0, 10.0).unwrap();
        assert_eq!(fig5.objective.value(&[0.0]), 0.0);
        assert_eq!(fig5.objective.x_star().unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn sine_quadratic_rejects_degenerate_params() {
        assert!(sine_quadratic_1d(5.0, 0.5, 5.0).is_err()); // |bc| = 2.5
        assert!(sine_quadratic_1d(-1.0, 0.1, 5.0).is_err());
    }

    #[test]
    fn valley_values() {
        let spec = valley_2d();
        assert_eq!(spec.objective.value(&[0.0, 0.0]), 0.0);
        assert!((spec.objective.value(&[1.0, 0.5]) - 0.05).abs() < 1e-15);
        assert!((spec.objective.value(&[1.0, 0.0]) - 0.175).abs() < 1e-15);
    }

    #[test]
    fn sine_valley_values_and_bound() {
        let spec = sine_valley(1e-3).unwrap();
        assert!((spec.objective.value(&[0.0, 3.0]) - 4.5).abs() < 1e-12);
        assert_eq!(spec.objective.value(&[0.0, 0.0]), 0.0);
        let bound = spec.analytic["pl_mu_bound"];
        let oracle = (2.0 + 1e-3 - (1e-6f64 + 4.0).sqrt()) / 2.0;
        assert_eq!(bound, oracle);
        assert!((bound - 4.99875e-4).abs() < 1e-8);
        assert!(sine_valley(0.0).is_err());
    }

    #[test]
    fn radial_sqc_origin_and_lower_bound() {
        let spec = radial_sqc(10, 42).unwrap();
        assert_eq!(spec.objective.value(&[0.0, 0.0]), 0.0);
        assert_eq!(spec.objective.gradient(&[0.0, 0.0]), vec![0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let x = spec.objective.domain().sample_uniform(&mut rng);
            let r2 = x[0] * x[0] + x[1] * x[1];
            assert!(spec.objective.value(&x) >= r2 - 1e-12);
        }
    }

    #[test]
    fn radial_sqc_matches_independent_reevaluation() {
        // same RNG stream, formula re-evaluated from scratch
        let spec = radial_sqc(10, 42).unwrap();
        let (a, b, c, d) = radial_sqc_coefficients(10, 42);
        let mut g = 0.0;
        for i in 0..10 {
            g += a[i] * (b[i] * 1.0f64).sin().powi(2) + c[i] * (d[i] * 0.0f64).cos().powi(2);
        }
        g = g / 40.0 + 1.0;
        let expected = 1.0 * g; // f(1) * g(1, 0)
        assert!((spec.objective.value(&[1.0, 0.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn quadratic_diag_constants() {
        let spec = quadratic_diag(&[1.0, 4.0]).unwrap();
        assert_eq!(spec.analytic["mu_pl"], 1.0);
        assert_eq!(spec.analytic["l_smooth"], 4.0);
        assert_eq!(spec.analytic["a_aim"], 0.8);
        let one = quadratic_diag(&[3.0]).unwrap();
        assert!((one.objective.value(&[0.5]) - 0.375).abs() < 1e-15);
        assert!(quadratic_diag(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn quadratic_alignment_matches_angular_brute_force() {
        // independent oracle: minimize cos(angle(Ax, x)) over an angular grid
        let (mu, l) = (1.0, 4.0);
        let mut worst = f64::INFINITY;
        for k in 0..100_000 {
            let th = std::f64::consts::PI * (k as f64) / 100_000.0;
            let (x1, x2) = (th.cos(), th.sin());
            let (g1, g2) = (mu * x1, l * x2);
            let cosang =
                (g1 * x1 + g2 * x2) / ((g1 * g1 + g2 * g2).sqrt() * (x1 * x1 + x2 * x2).sqrt());
            worst = worst.min(cosang);
        }
        assert!((worst - 0.8).abs() < 1e-6, "brute force gave {worst}");
    }

    #[test]
    fn hard_bump_is_c1_and_matches_printed_pieces() {
        // evaluate the adjacent closed-form pieces exactly at each breakpoint
        for &y in &[0.5f64, 1.0, 2.0] {
            let (b1, b3) = (31.0 * y / 32.0, 33.0 * y / 32.0);
            let tol = 1e-12 * (1.0 + y * y);
            // at b1: u^2/2 meets u^2/2 - 16 (u - b1)^2
            assert!((0.5 * b1 * b1 - (0.5 * b1 * b1 - 16.0 * 0.0)).abs() <= tol);
            assert!((b1 - (b1 - 32.0 * 0.0)).abs() <= tol);
            // at y: piece 2 meets piece 3
            let w2 = y - b1;
            let v2 = 0.5 * y * y - 16.0 * w2 * w2;
            let d2 = y - 32.0 * w2;
            let w3 = y - b3;
            let v3 = 0.5 * y * y - y * y / 32.0 + 16.0 * w3 * w3;
            let d3 = y + 32.0 * w3;
            assert!((v2 - v3).abs() <= tol, "value mismatch at y = {y}: {v2} vs {v3}");
            assert!((d2 - d3).abs() <= tol, "slope mismatch at y = {y}: {d2} vs {d3}");
            // at b3: piece 3 meets u^2/2 - y^2/32
            let v3b = 0.5 * b3 * b3 - y * y / 32.0 + 16.0 * 0.0;
            let v4b = 0.5 * b3 * b3 - y * y / 32.0;
            assert!((v3b - v4b).abs() <= tol);
            assert!(((b3 + 32.0 * 0.0) - b3).abs() <= tol);
            // and the implementation agrees with the piece formulas
            assert_eq!(hard_bump(b1, y).0, 0.5 * b1 * b1);
            assert!((hard_bump(y, y).0 - v2).abs() <= tol);
            assert!((hard_bump(b3, y).0 - v4b).abs() <= tol);
        }
        // v_1(31/32) = (31/32)^2 / 2 with one-sided slopes 31/32
        let b1 = 31.0 / 32.0;
        let (v, s) = hard_bump(b1, 1.0);
        assert!((v - 0.5 * b1 * b1).abs() < 1e-15);
        assert!((v - 0.46924).abs() < 5e-6);
        assert!((s - b1).abs() < 1e-15);
        // outer branch: u^2/2 - y^2/32
        let (vo, _) = hard_bump(2.0, 1.0);
        assert_eq!(vo, 0.5 * 4.0 - 1.0 / 32.0);
        // derivative vanishes exactly at u = y
        assert_eq!(hard_bump(1.0, 1.0).1, 0.0);
    }

    #[test]
    fn hard_instance_q_at_origin() {
        // T=2, t=1: q(0) = (7/8)^2 / 2 with anchor 1
        let cfg = HardInstanceConfig::new(2, 1).unwrap();
        let spec = hard_pl_instance(&cfg).unwrap();
        assert!((spec.analytic["q_at_origin_raw"] - 0.3828125).abs() < 1e-15);
    }

    #[test]
    fn hard_instance_minimizer_is_stationary() {
        let cfg = HardInstanceConfig::new(10, 5).unwrap();
        let spec = hard_pl_instance(&cfg).unwrap();
        let xs = spec.objective.x_star().unwrap();
        assert_eq!(spec.objective.value(xs), 0.0);
        let g = spec.objective.gradient(xs);
        assert!(linalg::norm(&g) < 1e-10);
        // gradient at the all-zeros start points along the chain seed
        let g0 = spec.objective.gradient(&vec![0.0; 50]);
        assert!(g0[0] < 0.0);
        assert!(g0.iter().skip(1).all(|&v| v == 0.0));
    }

    #[test]
    fn hard_instance_rejects_bad_y() {
        let mut cfg = HardInstanceConfig::new(2, 1).unwrap();
        cfg.y = vec![1.0];
        assert!(matches!(
            hard_pl_instance(&cfg),
            Err(TestbedError::InvalidParamError(_))
        ));
    }

    #[test]
    fn registry_resolves_and_rejects() {
        assert!(benchmark_by_name("sine-quadratic:5,0.19,5").is_ok());
        assert!(benchmark_by_name("sine-valley:1e-3").is_ok());
        assert!(benchmark_by_name("valley-2d").is_ok());
        assert!(benchmark_by_name("quadratic-diag:1,4").is_ok());
        assert!(benchmark_by_name("radial-sqc:N=10,seed=42").is_ok());
        assert!(benchmark_by_name("hard-pl:T=2,t=2").is_ok());
        assert!(benchmark_by_name("nope").is_err());
        assert!(benchmark_by_name("sine-quadratic:5,0.19").is_err());
    }

    #[test]
    fn benchmarks_vanish_at_their_minimizers() {
        for spec in shipped_benchmarks() {
            let xs = spec.objective.x_star().expect("shipped minimizer");
            let fs = spec.objective.f_star().unwrap();
            assert_eq!(spec.objective.value(xs), fs, "{}", spec.objective.name());
            let g = spec.objective.gradient(xs);
            assert!(
                linalg::norm(&g) <= 1e-10,
                "{}: grad norm {}",
                spec.objective.name(),
                linalg::norm(&g)
            );
        }
    }
}
