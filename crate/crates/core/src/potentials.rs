//! The potential family driving the phase transition: the logarithmic barrier
//! F1_log, its scaled members gamma * F1_log, the double obstacle indicator
//! with its subdifferential conditions, and the smooth concave part F2.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use std::sync::Arc;

/// Default absolute tolerance for detecting contact with the obstacle.
pub const DEFAULT_CONTACT_TOL: f64 = 1e-9;

/// F1_log(r) = (1+r) ln(1+r) + (1-r) ln(1-r), continuously extended with
/// 0 * ln 0 = 0 so the endpoints evaluate to 2 ln 2 exactly.
pub fn f1log_value(r: f64) -> Result<f64> {
    if !(r >= -1.0 && r <= 1.0) {
        return Err(Error::Domain(format!(
            "logarithmic potential is only defined on [-1, 1], got r = {r}"
        )));
    }
    let term = |s: f64| if s == 0.0 { 0.0 } else { s * s.ln() };
    Ok(term(1.0 + r) + term(1.0 - r))
}

/// Value, first, and second derivative of gamma * F1_log at a strictly
/// interior point. First derivative: gamma ln((1+r)/(1-r)); second:
/// 2 gamma / (1 - r^2) > 0.
pub fn f1gamma_derivs(r: f64, gamma: f64) -> Result<(f64, f64, f64)> {
    if !(r > -1.0 && r < 1.0) {
        return Err(Error::Domain(format!(
            "barrier derivatives need |r| < 1 strictly, got r = {r}"
        )));
    }
    let value = gamma * f1log_value(r)?;
    let first = gamma * ((1.0 + r) / (1.0 - r)).ln();
    let second = 2.0 * gamma / (1.0 - r * r);
    Ok((value, first, second))
}

/// Projection onto [-1, 1], the domain of the obstacle indicator.
pub fn obstacle_project(r: f64) -> f64 {
    r.clamp(-1.0, 1.0)
}

/// Maximum pointwise violation of xi in the subdifferential of the obstacle
/// indicator at phi: interior nodes need xi = 0, upper contact needs xi >= 0,
/// lower contact needs xi <= 0. Contact is detected within `contact_tol`.
pub fn subdiff_residual(phi: &ScalarField, xi: &ScalarField, contact_tol: f64) -> Result<f64> {
    if phi.len() != xi.len() {
        return Err(Error::GridMismatch {
            context: "subdiff_residual",
            expected: phi.len(),
            got: xi.len(),
        });
    }
    let mut worst = 0.0f64;
    for (&p, &x) in phi.values.iter().zip(&xi.values) {
        let v = if p >= 1.0 - contact_tol {
            (-x).max(0.0)
        } else if p <= -1.0 + contact_tol {
            x.max(0.0)
        } else {
            x.abs()
        };
        worst = worst.max(v);
        // excursions outside [-1, 1] count as violations too
        worst = worst.max((p.abs() - 1.0).max(0.0));
    }
    Ok(worst)
}

/// User-supplied smooth part with explicit derivatives.
pub trait SmoothPotential: Send + Sync {
    fn value(&self, r: f64) -> f64;
    fn first(&self, r: f64) -> f64;
    fn second(&self, r: f64) -> f64;
    /// Lipschitz bound for the first derivative on [-1, 1]; must be finite.
    fn lipschitz_first(&self) -> f64;
}

/// The smooth concave part F2. Ships as k (1 - r^2); custom variants carry
/// their own derivative triple and a Lipschitz bound for F2'.
#[derive(Clone)]
pub enum F2Spec {
    Quadratic { k: f64 },
    Custom(Arc<dyn SmoothPotential>),
}

impl std::fmt::Debug for F2Spec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            F2Spec::Quadratic { k } => write!(f, "F2Spec::Quadratic {{ k: {k} }}"),
            F2Spec::Custom(_) => write!(f, "F2Spec::Custom(..)"),
        }
    }
}

impl F2Spec {
    pub fn quadratic(k: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::Config(format!(
                "F2 coefficient must be nonnegative and finite, got {k}"
            )));
        }
        Ok(F2Spec::Quadratic { k })
    }

    pub fn custom(p: Arc<dyn SmoothPotential>) -> Result<Self> {
        if !p.lipschitz_first().is_finite() {
            return Err(Error::Config(
                "custom F2 must report a finite Lipschitz bound for F2' on [-1, 1]".into(),
            ));
        }
        Ok(F2Spec::Custom(p))
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            F2Spec::Quadratic { k } => k * (1.0 - r * r),
            F2Spec::Custom(p) => p.value(r),
        }
    }

    pub fn first(&self, r: f64) -> f64 {
        match self {
            F2Spec::Quadratic { k } => -2.0 * k * r,
            F2Spec::Custom(p) => p.first(r),
        }
    }

    pub fn second(&self, r: f64) -> f64 {
        match self {
            F2Spec::Quadratic { k } => -2.0 * k,
            F2Spec::Custom(p) => p.second(r),
        }
    }

    /// Lipschitz bound for F2' on [-1, 1].
    pub fn lipschitz_first(&self) -> f64 {
        match self {
            F2Spec::Quadratic { k } => 2.0 * k,
            F2Spec::Custom(p) => p.lipschitz_first(),
        }
    }
}

/// Value and first two derivatives of F2 at r.
pub fn f2_derivs(r: f64, f2: &F2Spec) -> (f64, f64, f64) {
    (f2.value(r), f2.first(r), f2.second(r))
}

/// Which member of the potential family drives the phase equation.
#[derive(Debug, Clone)]
pub enum PotentialKind {
    Logarithmic { gamma: f64 },
    Obstacle,
}

/// Potential selection plus the smooth part.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub f2: F2Spec,
}

impl PotentialSpec {
    pub fn logarithmic(gamma: f64, f2: F2Spec) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie in (0, 1], got {gamma}"
            )));
        }
        Ok(PotentialSpec {
            kind: PotentialKind::Logarithmic { gamma },
            f2,
        })
    }

    pub fn obstacle(f2: F2Spec) -> Self {
        PotentialSpec {
            kind: PotentialKind::Obstacle,
            f2,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::Logarithmic { gamma } => Some(gamma),
            PotentialKind::Obstacle => None,
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::logarithmic(gamma, self.f2.clone())
    }

    pub fn as_obstacle(&self) -> Self {
        PotentialSpec::obstacle(self.f2.clone())
    }
}
