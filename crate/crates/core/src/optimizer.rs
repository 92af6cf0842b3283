//! Projected gradient descent with Armijo backtracking over the admissible box.

use crate::error::{Error, Result};
use crate::grid::FieldSeries;
use crate::objective::{dist_q, norm_q, ControlField};
use crate::problem::{AdaptedReduced, CostModel, Problem};

/// Clamp a raw space-time field into the box carried by `bounds`.
pub fn project_admissible(raw: &FieldSeries, bounds: &ControlField) -> ControlField {
    bounds.projected(raw)
}

/// Stationarity measure || u - P(u - s g) ||_{L2(Q)}: zero exactly when the
/// discrete variational inequality holds at u.
pub fn vi_residual(u: &ControlField, g: &FieldSeries, s: f64, problem: &Problem) -> Result<f64> {
    let trial: FieldSeries = u
        .values
        .iter()
        .zip(g)
        .map(|(uf, gf)| uf.axpy(-s, gf))
        .collect();
    let projected = u.projected(&trial);
    dist_q(&u.values, &projected.values, &problem.grid, &problem.tg)
}

#[derive(Debug, Clone, Copy)]
pub struct PgOptions {
    pub s0: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Steps below this abort backtracking and flag a stall.
    pub min_step: f64,
}

impl Default for PgOptions {
    fn default() -> Self {
        PgOptions {
            s0: 1.0,
            armijo_c: 1e-4,
            shrink: 0.5,
            tol: 1e-6,
            max_iter: 200,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub step: f64,
    pub vi_residual: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct History {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub stalled: bool,
}

impl History {
    pub fn final_cost(&self) -> f64 {
        self.records.last().map(|r| r.cost).unwrap_or(f64::NAN)
    }
    pub fn final_vi_residual(&self) -> f64 {
        self.records.last().map(|r| r.vi_residual).unwrap_or(f64::NAN)
    }
}

/// Projected gradient descent. Each accepted step satisfies the Armijo
/// decrease J(u+) <= J(u) - c/s * ||u+ - u||^2; termination on the
/// variational-inequality residual measured at unit step length.
pub fn projected_gradient(
    u0: &ControlField,
    model: &dyn CostModel,
    opts: &PgOptions,
) -> Result<(ControlField, History)> {
    let problem = model.problem();
    let mut u = u0.projected(&u0.values);
    let mut records = Vec::new();
    let mut stalled = false;
    let mut converged = false;
    let mut step = opts.s0;

    let (mut cost, mut grad) = model.cost_and_grad(&u)?;
    for iteration in 0..opts.max_iter {
        let residual = vi_residual(&u, &grad, 1.0, problem)?;
        records.push(IterationRecord {
            iteration,
            cost,
            step,
            vi_residual: residual,
        });
        if residual <= opts.tol {
            converged = true;
            break;
        }

        // Armijo backtracking on the projected arc, restarting from a mildly
        // grown step so accepted lengths can recover after a shrink
        let mut s = (step / opts.shrink).min(opts.s0.max(step));
        let mut accepted = false;
        while s >= opts.min_step {
            let trial_raw: FieldSeries = u
                .values
                .iter()
                .zip(&grad)
                .map(|(uf, gf)| uf.axpy(-s, gf))
                .collect();
            let trial = u.projected(&trial_raw);
            let displacement = dist_q(&trial.values, &u.values, &problem.grid, &problem.tg)?;
            if displacement == 0.0 {
                // projected step cannot move: stationary within rounding
                converged = true;
                accepted = false;
                break;
            }
            let trial_cost = model.cost(&trial)?;
            if trial_cost <= cost - opts.armijo_c / s * displacement * displacement {
                u = trial;
                cost = trial_cost;
                step = s;
                accepted = true;
                break;
            }
            s *= opts.shrink;
        }
        if converged {
            break;
        }
        if !accepted {
            stalled = true;
            break;
        }
        let refreshed = model.cost_and_grad(&u)?;
        cost = refreshed.0;
        grad = refreshed.1;
    }

    if !converged && !stalled && records.len() == opts.max_iter {
        // record the final residual for the caller
        let residual = vi_residual(&u, &grad, 1.0, problem)?;
        if residual <= opts.tol {
            converged = true;
        }
        records.push(IterationRecord {
            iteration: opts.max_iter,
            cost,
            step,
            vi_residual: residual,
        });
    }

    Ok((
        u,
        History {
            records,
            converged,
            stalled,
        },
    ))
}

/// Minimize the adapted cost anchored at `u_bar` for a fixed gamma.
pub fn solve_adapted_problem(
    gamma: f64,
    u_bar: &ControlField,
    u_start: &ControlField,
    problem: &Problem,
    opts: &PgOptions,
) -> Result<(ControlField, History)> {
    let stage = problem.with_gamma(gamma)?;
    let model = AdaptedReduced {
        problem: &stage,
        anchor: u_bar,
    };
    projected_gradient(u_start, &model, opts).map_err(|e| Error::QuenchStage {
        gamma,
        source: Box::new(e),
    })
}

/// || u - clamp(-q / ell) ||_{L2(Q)}: the closed-form projection residual at a
/// stationary point, meaningful for ell > 0.
pub fn projection_formula_residual(
    u: &ControlField,
    q: &FieldSeries,
    ell: f64,
    problem: &Problem,
) -> Result<f64> {
    if ell <= 0.0 {
        return Err(Error::Config(
            "the projection formula needs a positive control weight ell".into(),
        ));
    }
    let raw: FieldSeries = q.iter().map(|f| f.scale(-1.0 / ell)).collect();
    let projected = u.projected(&raw);
    dist_q(&u.values, &projected.values, &problem.grid, &problem.tg)
}

/// Fraction of space-time nodes (positively weighted ones) sitting on a bound;
/// reported for ell = 0 where the projection formula does not apply.
pub fn bang_bang_fraction(u: &ControlField, tol: f64) -> f64 {
    let mut on_bound = 0usize;
    let mut total = 0usize;
    for k in 1..u.values.len() {
        for i in 0..u.values[k].len() {
            total += 1;
            let v = u.values[k].values[i];
            if (v - u.lower[k].values[i]).abs() <= tol || (u.upper[k].values[i] - v).abs() <= tol {
                on_bound += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        on_bound as f64 / total as f64
    }
}

