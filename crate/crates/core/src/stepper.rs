//! Phase-step strategies behind a common trait.
//!
//! Each implicit Euler step decouples into a nonlinear phase solve followed by
//! a linear thermal solve. The phase solve comes in two interchangeable
//! variants selected by name at runtime: a damped Newton iteration for the
//! logarithmic barrier family, and a primal-dual active set iteration for the
//! double obstacle inclusion.

use crate::banded::SymBanded;
use crate::error::{Error, Result};
use crate::grid::{laplacian_neumann, GridSpec, ScalarField};
use crate::potentials::{f1gamma_derivs, F2Spec, PotentialKind, PotentialSpec};
use crate::state::{ModelParams, SolverOptions};

/// Everything a phase step needs from the surrounding sweep. The velocity is
/// lagged: the step into level `k` sees v at level `k - 1`.
pub struct PhaseContext<'a> {
    pub phi_prev: &'a ScalarField,
    pub v_lag: &'a ScalarField,
    /// Multiplier from the previous level; warm-starts the active sets.
    pub xi_prev: &'a ScalarField,
    pub mp: &'a ModelParams,
    pub grid: &'a GridSpec,
    pub dt: f64,
    pub level: usize,
    pub opts: &'a SolverOptions,
}

pub struct PhaseStep {
    pub phi: ScalarField,
    pub xi: ScalarField,
}

/// A phase-step algorithm. Implementations must be pure: the same context
/// yields the same step.
pub trait PhaseStepper: Send + Sync {
    fn name(&self) -> &'static str;
    fn step(&self, ctx: &PhaseContext) -> Result<PhaseStep>;
    /// Barrier parameter when this strategy is a member of the logarithmic
    /// family; None for the obstacle strategy.
    fn gamma(&self) -> Option<f64>;
}

/// Names accepted by [`build`], in registration order.
pub fn strategy_names() -> &'static [&'static str] {
    &["logarithmic", "obstacle"]
}

/// Look up a strategy by name and instantiate it for the given potential.
pub fn build(name: &str, spec: &PotentialSpec) -> Result<Box<dyn PhaseStepper>> {
    match name {
        "logarithmic" => {
            let gamma = spec.gamma().ok_or_else(|| {
                Error::Config("the logarithmic strategy needs a gamma in the potential spec".into())
            })?;
            Ok(Box::new(LogBarrierNewton {
                gamma,
                f2: spec.f2.clone(),
            }))
        }
        "obstacle" => Ok(Box::new(ObstaclePdas {
            f2: spec.f2.clone(),
        })),
        other => Err(Error::Config(format!(
            "unknown phase-step strategy '{other}'; available: {}",
            strategy_names().join(", ")
        ))),
    }
}

/// The strategy the potential spec itself selects.
pub fn for_spec(spec: &PotentialSpec) -> Box<dyn PhaseStepper> {
    match spec.kind {
        PotentialKind::Logarithmic { gamma } => Box::new(LogBarrierNewton {
            gamma,
            f2: spec.f2.clone(),
        }),
        PotentialKind::Obstacle => Box::new(ObstaclePdas {
            f2: spec.f2.clone(),
        }),
    }
}

/// Residual of the implicit phase equation without any F1 contribution:
/// (phi - phi_prev)/dt - Lap phi + (2/theta_c) F2'(phi) - v/theta_c^2 F2'(phi).
fn base_residual(
    phi: &ScalarField,
    ctx: &PhaseContext,
    f2: &F2Spec,
) -> Result<ScalarField> {
    let lap = laplacian_neumann(phi, ctx.grid)?;
    let th = ctx.mp.theta_c;
    let mut out = Vec::with_capacity(phi.len());
    for i in 0..phi.len() {
        let r = phi.values[i];
        let fp = f2.first(r);
        out.push(
            (r - ctx.phi_prev.values[i]) / ctx.dt - lap.values[i]
                + (2.0 / th) * fp
                - ctx.v_lag.values[i] / (th * th) * fp,
        );
    }
    Ok(ScalarField::from_values(out))
}

/// Diagonal of the linearization of `base_residual` minus the 1/dt part:
/// [(2/theta_c) - v/theta_c^2] F2''(phi).
fn base_diag(phi: &ScalarField, ctx: &PhaseContext, f2: &F2Spec) -> Vec<f64> {
    let th = ctx.mp.theta_c;
    (0..phi.len())
        .map(|i| (2.0 / th - ctx.v_lag.values[i] / (th * th)) * f2.second(phi.values[i]))
        .collect()
}

fn weighted_norm(r: &ScalarField, grid: &GridSpec) -> f64 {
    let mut acc = 0.0;
    for i in 0..r.len() {
        acc += grid.weight(i) * r.values[i] * r.values[i];
    }
    acc.sqrt()
}

/// Damped Newton iteration on the barrier residual. The step length is halved
/// until the iterate stays inside (-1 + margin, 1 - margin); the barrier term
/// then keeps Newton in the interior where the continuous solution lives.
pub struct LogBarrierNewton {
    pub gamma: f64,
    pub f2: F2Spec,
}

impl PhaseStepper for LogBarrierNewton {
    fn name(&self) -> &'static str {
        "logarithmic"
    }

    fn gamma(&self) -> Option<f64> {
        Some(self.gamma)
    }

    fn step(&self, ctx: &PhaseContext) -> Result<PhaseStep> {
        let opts = ctx.opts;
        let margin = opts.interior_margin;
        let bound = 1.0 - margin;
        let mut phi = ctx.phi_prev.clone();
        // the previous level must be strictly interior; nudge inward if it sits
        // on the margin so the barrier stays evaluable
        for v in phi.values.iter_mut() {
            if !(*v > -1.0 && *v < 1.0) {
                return Err(Error::Domain(format!(
                    "phase iterate left [-1, 1] before level {}: {v}",
                    ctx.level
                )));
            }
            *v = v.clamp(-bound, bound);
        }

        // largest residual change one ulp of phi can cause, per node; near
        // contact the barrier curvature makes an absolute tolerance below
        // this granularity unreachable
        let stencil_scale: f64 = (0..ctx.grid.dimension())
            .map(|a| 4.0 / (ctx.grid.spacing(a) * ctx.grid.spacing(a)))
            .sum::<f64>()
            + 1.0 / ctx.dt;

        let mut residual = f64::INFINITY;
        for _iter in 0..opts.newton_max_iter {
            let mut res = base_residual(&phi, ctx, &self.f2)?;
            let mut diag = base_diag(&phi, ctx, &self.f2);
            let mut floor_sq = 0.0f64;
            for i in 0..phi.len() {
                let (_, d1, d2) = f1gamma_derivs(phi.values[i], self.gamma)?;
                res.values[i] += d1;
                diag[i] += d2;
                let node_noise = f64::EPSILON * (stencil_scale + diag[i].abs());
                floor_sq += ctx.grid.weight(i) * node_noise * node_noise;
            }
            residual = weighted_norm(&res, ctx.grid);
            if residual <= opts.newton_tol.max(4.0 * floor_sq.sqrt()) {
                let xi = ScalarField::from_values(
                    phi.values
                        .iter()
                        .map(|&r| self.gamma * ((1.0 + r) / (1.0 - r)).ln())
                        .collect(),
                );
                return Ok(PhaseStep { phi, xi });
            }

            let m = SymBanded::assemble(ctx.grid, 1.0 / ctx.dt, 1.0, Some(&diag))?;
            let rhs: Vec<f64> = res
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| -ctx.grid.weight(i) * v)
                .collect();
            let dir = m.factor()?.solve(&rhs);

            // bisect the step length until the iterate stays interior
            let mut lambda = 1.0f64;
            let mut halvings = 0;
            loop {
                let ok = phi
                    .values
                    .iter()
                    .zip(&dir)
                    .all(|(p, d)| (p + lambda * d).abs() < bound + margin * 0.5);
                if ok {
                    break;
                }
                lambda *= 0.5;
                halvings += 1;
                if halvings > opts.max_halvings {
                    lambda = 0.0;
                    break;
                }
            }
            if lambda == 0.0 {
                break;
            }
            for (p, d) in phi.values.iter_mut().zip(&dir) {
                *p = (*p + lambda * d).clamp(-bound, bound);
            }
        }
        Err(Error::NewtonDiverged {
            level: ctx.level,
            residual,
            iterations: ctx.opts.newton_max_iter,
        })
    }
}

/// Primal-dual active set iteration for the obstacle inclusion. Nodes whose
/// predicted multiplier pushes past an obstacle are pinned to it, the reduced
/// problem is solved on the inactive nodes, and the multiplier is recovered
/// from the equation residual; the loop ends when the sets stop changing.
pub struct ObstaclePdas {
    pub f2: F2Spec,
}

impl PhaseStepper for ObstaclePdas {
    fn name(&self) -> &'static str {
        "obstacle"
    }

    fn gamma(&self) -> Option<f64> {
        None
    }

    fn step(&self, ctx: &PhaseContext) -> Result<PhaseStep> {
        let opts = ctx.opts;
        let n = ctx.grid.node_count();
        let c = opts.pdas_penalty;
        let mut phi = ctx.phi_prev.clone();
        let mut xi = ctx.xi_prev.clone();
        let mut upper: Vec<bool> = (0..n)
            .map(|i| xi.values[i] + c * (phi.values[i] - 1.0) > 0.0)
            .collect();
        let mut lower: Vec<bool> = (0..n)
            .map(|i| !upper[i] && xi.values[i] + c * (phi.values[i] + 1.0) < 0.0)
            .collect();

        for _sweep in 0..opts.pdas_max_iter {
            // solve the pinned nonlinear problem; one Newton pass is exact for
            // the quadratic F2, custom smooth parts may need a few
            for i in 0..n {
                if upper[i] {
                    phi.values[i] = 1.0;
                } else if lower[i] {
                    phi.values[i] = -1.0;
                }
            }
            let mut inner_ok = false;
            for _newton in 0..opts.newton_max_iter {
                let res = base_residual(&phi, ctx, &self.f2)?;
                let mut inactive_norm = 0.0f64;
                for i in 0..n {
                    if !upper[i] && !lower[i] {
                        inactive_norm += ctx.grid.weight(i) * res.values[i] * res.values[i];
                    }
                }
                if inactive_norm.sqrt() <= opts.newton_tol {
                    inner_ok = true;
                    break;
                }
                let diag = base_diag(&phi, ctx, &self.f2);
                let mut m = SymBanded::assemble(ctx.grid, 1.0 / ctx.dt, 1.0, Some(&diag))?;
                let mut rhs: Vec<f64> = res
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| -ctx.grid.weight(i) * v)
                    .collect();
                let pins: Vec<(usize, f64)> = (0..n)
                    .filter(|&i| upper[i] || lower[i])
                    .map(|i| (i, 0.0))
                    .collect();
                m.apply_pins(&mut rhs, &pins);
                let dir = m.factor()?.solve(&rhs);
                for i in 0..n {
                    phi.values[i] += dir[i];
                }
            }
            if !inner_ok {
                return Err(Error::NewtonDiverged {
                    level: ctx.level,
                    residual: f64::NAN,
                    iterations: opts.newton_max_iter,
                });
            }

            // recover the multiplier from the residual: xi = -R0(phi) on active
            let res = base_residual(&phi, ctx, &self.f2)?;
            for i in 0..n {
                xi.values[i] = if upper[i] || lower[i] { -res.values[i] } else { 0.0 };
            }

            let new_upper: Vec<bool> = (0..n)
                .map(|i| xi.values[i] + c * (phi.values[i] - 1.0) > 0.0)
                .collect();
            let new_lower: Vec<bool> = (0..n)
                .map(|i| !new_upper[i] && xi.values[i] + c * (phi.values[i] + 1.0) < 0.0)
                .collect();
            if new_upper == upper && new_lower == lower {
                return Ok(PhaseStep { phi, xi });
            }
            upper = new_upper;
            lower = new_lower;
        }
        Err(Error::ActiveSetCycling {
            level: ctx.level,
            iterations: opts.pdas_max_iter,
        })
    }
}
