//! The differentiable-objective abstraction consumed by every other module,
//! plus finite-difference verification utilities.
//!
//! Objectives are immutable after construction and safe to evaluate from any
//! number of threads; every operation here is a pure function of its inputs
//! plus an explicit seed.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg;

#[derive(Debug, thiserror::Error)]
pub enum ObjectiveError {
    #[error("domain violation: {0}")]
    DomainError(String),
    #[error("invalid objective definition: {0}")]
    InvalidDefinition(String),
}

/// A point of the search space. Coordinates are finite and the dimension is
/// at least one.
#[derive(Clone, PartialEq, serde::Serialize)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self, ObjectiveError> {
        if coords.is_empty() {
            return Err(ObjectiveError::InvalidDefinition(
                "point must have dimension >= 1".into(),
            ));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(ObjectiveError::InvalidDefinition(
                "point has non-finite coordinate".into(),
            ));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point({:?})", self.0)
    }
}

/// Axis-aligned box. All estimation and sampling happens inside one;
/// constants are only meaningful "on the displayed domain".
#[derive(Clone, Debug, serde::Serialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ObjectiveError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(ObjectiveError::InvalidDefinition(
                "box bounds must be nonempty and of equal length".into(),
            ));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !l.is_finite() || !u.is_finite() || l >= u {
                return Err(ObjectiveError::InvalidDefinition(format!(
                    "invalid box interval [{l}, {u}]"
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// Symmetric cube `[-half, half]^dim`.
    pub fn centered(half: f64, dim: usize) -> Result<Self, ObjectiveError> {
        Self::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u)
    }

    /// Euclidean length of the box diagonal.
    pub fn diameter(&self) -> f64 {
        linalg::dist(&self.upper, &self.lower)
    }

    /// Projects `x` into the box (componentwise clamp), shrunk by `margin`.
    pub fn clamp_inward(&self, x: &mut [f64], margin: f64) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            let (lo, hi) = (l + margin, u - margin);
            if lo < hi {
                *v = v.clamp(lo, hi);
            } else {
                *v = 0.5 * (l + u);
            }
        }
    }

    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect()
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type KinkFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// An evaluable, differentiable scalar function on a box domain with an
/// optional known minimizer. Gradients are hand-coded analytically per
/// benchmark; [`check_gradient_fd`] is the safety net.
#[derive(Clone)]
pub struct Objective {
    name: String,
    dim: usize,
    domain: BoxDomain,
    f_star: Option<f64>,
    x_star: Option<Point>,
    eval: Arc<EvalFn>,
    grad: Arc<GradFn>,
    /// Distance to the nearest non-smooth locus, for piecewise objectives.
    /// Finite-difference checks skip points closer than their own stencil.
    kink_distance: Option<Arc<KinkFn>>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("f_star", &self.f_star)
            .finish()
    }
}

impl Objective {
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Objective {
            name: name.into(),
            dim: domain.dim(),
            domain,
            f_star: None,
            x_star: None,
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            kink_distance: None,
        }
    }

    /// Attaches the known minimizer. Fails if `eval(x_star)` disagrees with
    /// `f_star` beyond `1e-12 * (1 + |f_star|)`.
    pub fn with_minimizer(mut self, x_star: Point, f_star: f64) -> Result<Self, ObjectiveError> {
        if x_star.dim() != self.dim {
            return Err(ObjectiveError::InvalidDefinition(
                "minimizer dimension mismatch".into(),
            ));
        }
        let at_star = (self.eval)(&x_star);
        if (at_star - f_star).abs() > 1e-12 * (1.0 + f_star.abs()) {
            return Err(ObjectiveError::InvalidDefinition(format!(
                "eval(x_star) = {at_star} but f_star = {f_star}"
            )));
        }
        self.x_star = Some(x_star);
        self.f_star = Some(f_star);
        Ok(self)
    }

    pub fn with_kink_distance(
        mut self,
        kink: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.kink_distance = Some(Arc::new(kink));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }

    pub fn x_star(&self) -> Option<&Point> {
        self.x_star.as_ref()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out);
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        (self.grad)(x, &mut g);
        g
    }

    /// `f(x) - f_star`, for objectives with a known minimum.
    pub fn gap(&self, x: &[f64]) -> Option<f64> {
        self.f_star.map(|fs| self.value(x) - fs)
    }

    pub fn kink_distance_at(&self, x: &[f64]) -> Option<f64> {
        self.kink_distance.as_ref().map(|k| k(x))
    }
}

/// Result of a randomized finite-difference gradient check.
#[derive(Clone, Debug, serde::Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_point: Point,
    pub step_used: f64,
    pub samples_used: usize,
}

/// Hessian-vector product by central differences on the analytic gradient:
/// `(grad(x + h v) - grad(x - h v)) / (2 h)`. Error is O(h^2) on C^3
/// objectives.
pub fn hessian_vec_fd(
    obj: &Objective,
    x: &[f64],
    v: &[f64],
    h: f64,
) -> Result<Vec<f64>, ObjectiveError> {
    if h <= 0.0 {
        return Err(ObjectiveError::InvalidDefinition("h must be > 0".into()));
    }
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    linalg::add_scaled(x, h, v, &mut plus);
    linalg::add_scaled(x, -h, v, &mut minus);
    if !obj.domain().contains(x) || !obj.domain().contains(&plus) || !obj.domain().contains(&minus)
    {
        return Err(ObjectiveError::DomainError(format!(
            "stencil around {x:?} leaves the domain"
        )));
    }
    let gp = obj.gradient(&plus);
    let gm = obj.gradient(&minus);
    Ok(gp
        .iter()
        .zip(&gm)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect())
}

/// Internal variant without the domain check, for estimator stencils that may
/// poke just past the box edge (all shipped formulas are defined on all of
/// R^d; the box is an estimation window).
pub(crate) fn hessian_vec_fd_unchecked(obj: &Objective, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    linalg::add_scaled(x, h, v, &mut plus);
    linalg::add_scaled(x, -h, v, &mut minus);
    let gp = obj.gradient(&plus);
    let gm = obj.gradient(&minus);
    gp.iter()
        .zip(&gm)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect()
}

/// Compares the analytic gradient against central differences at `samples`
/// uniform points of the domain and reports the worst relative error.
///
/// The step is `1e-6 * (1 + ||x||)`. Points whose distance to a non-smooth
/// locus is below eight steps are re-drawn, so piecewise objectives are
/// checked away from their breakpoints.
pub fn check_gradient_fd(obj: &Objective, samples: usize, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut worst_point = vec![0.0; obj.dim()];
    let mut worst_h = 0.0;
    let mut used = 0;
    let mut attempts = 0usize;
    while used < samples && attempts < samples * 20 {
        attempts += 1;
        let mut x = obj.domain().sample_uniform(&mut rng);
        let h = 1e-6 * (1.0 + linalg::norm(&x));
        obj.domain().clamp_inward(&mut x, h);
        if let Some(d) = obj.kink_distance_at(&x) {
            if d < 8.0 * h {
                continue;
            }
        }
        let ga = obj.gradient(&x);
        let mut gfd = vec![0.0; obj.dim()];
        let mut xp = x.clone();
        for i in 0..obj.dim() {
            xp[i] = x[i] + h;
            let fp = obj.value(&xp);
            xp[i] = x[i] - h;
            let fm = obj.value(&xp);
            xp[i] = x[i];
            gfd[i] = (fp - fm) / (2.0 * h);
        }
        let rel = linalg::dist(&ga, &gfd) / (1.0 + linalg::norm(&ga));
        if rel > worst {
            worst = rel;
            worst_point.copy_from_slice(&x);
            worst_h = h;
        }
        used += 1;
    }
    GradCheckReport {
        max_rel_error: worst,
        worst_point: Point::new(worst_point).expect("domain samples are finite"),
        step_used: worst_h,
        samples_used: used,
    }
}
