//! The assembled problem bundle and the reduced cost models the optimizer and
//! the verification oracles drive.

use crate::adjoint::solve_adjoint;
use crate::error::{Error, Result};
use crate::grid::{FieldSeries, GridSpec, TimeGrid};
use crate::objective::{
    evaluate_adapted_cost, evaluate_cost, reduced_gradient, ControlField, ObjectiveSpec,
};
use crate::potentials::PotentialSpec;
use crate::state::{
    solve_state, solve_state_obstacle, InitialData, ModelParams, SolverOptions, StateTrajectory,
};

/// Everything a run needs: discretization, model, potential, objective,
/// initial data, and the admissible box (carried by `control_template`).
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: GridSpec,
    pub tg: TimeGrid,
    pub mp: ModelParams,
    pub potential: PotentialSpec,
    pub objective: ObjectiveSpec,
    pub init: InitialData,
    /// Holds the initial control values together with the box bounds.
    pub control_template: ControlField,
    pub opts: SolverOptions,
}

impl Problem {
    pub fn with_gamma(&self, gamma: f64) -> Result<Problem> {
        let mut p = self.clone();
        p.potential = self.potential.with_gamma(gamma)?;
        Ok(p)
    }

    pub fn solve_state(&self, u: &ControlField) -> Result<StateTrajectory> {
        solve_state(
            u,
            &self.init,
            &self.potential,
            &self.mp,
            &self.tg,
            &self.grid,
            &self.opts,
        )
    }

    pub fn solve_state_obstacle(&self, u: &ControlField) -> Result<StateTrajectory> {
        solve_state_obstacle(
            u,
            &self.init,
            &self.potential.f2,
            &self.mp,
            &self.tg,
            &self.grid,
            &self.opts,
        )
    }
}

/// A reduced cost over the control: enough surface for projected gradient
/// descent and for the finite-difference oracles (which only call `cost`).
pub trait CostModel {
    fn cost(&self, u: &ControlField) -> Result<f64>;
    fn cost_and_grad(&self, u: &ControlField) -> Result<(f64, FieldSeries)>;
    fn problem(&self) -> &Problem;
}

/// Reduced cost of the logarithmic-potential problem; the gradient comes from
/// the exact backward sweep.
pub struct LogReduced<'a> {
    pub problem: &'a Problem,
}

impl CostModel for LogReduced<'_> {
    fn cost(&self, u: &ControlField) -> Result<f64> {
        let traj = self.problem.solve_state(u)?;
        evaluate_cost(&traj, u, &self.problem.objective, &self.problem.grid, &self.problem.tg)
    }

    fn cost_and_grad(&self, u: &ControlField) -> Result<(f64, FieldSeries)> {
        let p = self.problem;
        let traj = p.solve_state(u)?;
        let j = evaluate_cost(&traj, u, &p.objective, &p.grid, &p.tg)?;
        let adj = solve_adjoint(&traj, &p.potential, &p.objective, &p.mp, &p.tg, &p.grid, &p.opts)?;
        let g = reduced_gradient(&adj, u, &p.objective, None)?;
        Ok((j, g))
    }

    fn problem(&self) -> &Problem {
        self.problem
    }
}

/// Adapted reduced cost: the log reduced cost plus the squared-distance anchor.
pub struct AdaptedReduced<'a> {
    pub problem: &'a Problem,
    pub anchor: &'a ControlField,
}

impl CostModel for AdaptedReduced<'_> {
    fn cost(&self, u: &ControlField) -> Result<f64> {
        let p = self.problem;
        let traj = p.solve_state(u)?;
        evaluate_adapted_cost(&traj, u, &p.objective, self.anchor, &p.grid, &p.tg)
    }

    fn cost_and_grad(&self, u: &ControlField) -> Result<(f64, FieldSeries)> {
        let p = self.problem;
        let traj = p.solve_state(u)?;
        let j = evaluate_adapted_cost(&traj, u, &p.objective, self.anchor, &p.grid, &p.tg)?;
        let adj = solve_adjoint(&traj, &p.potential, &p.objective, &p.mp, &p.tg, &p.grid, &p.opts)?;
        let g = reduced_gradient(&adj, u, &p.objective, Some(self.anchor))?;
        Ok((j, g))
    }

    fn problem(&self) -> &Problem {
        self.problem
    }
}

/// Reduced cost of the obstacle problem. The cost is evaluated on the
/// primal-dual active set state; the gradient surrogate is the adjoint of the
/// smallest-gamma barrier state at the same control, since the obstacle limit
/// itself carries no usable curvature.
pub struct ObstacleSurrogate<'a> {
    pub problem: &'a Problem,
    pub gamma_surrogate: f64,
}

impl CostModel for ObstacleSurrogate<'_> {
    fn cost(&self, u: &ControlField) -> Result<f64> {
        let p = self.problem;
        let traj = p.solve_state_obstacle(u)?;
        evaluate_cost(&traj, u, &p.objective, &p.grid, &p.tg)
    }

    fn cost_and_grad(&self, u: &ControlField) -> Result<(f64, FieldSeries)> {
        let p = self.problem;
        let traj = p.solve_state_obstacle(u)?;
        let j = evaluate_cost(&traj, u, &p.objective, &p.grid, &p.tg)?;
        let surrogate = p.with_gamma(self.gamma_surrogate)?;
        let straj = surrogate.solve_state(u)?;
        let adj = solve_adjoint(
            &straj,
            &surrogate.potential,
            &p.objective,
            &p.mp,
            &p.tg,
            &p.grid,
            &p.opts,
        )?;
        let g = reduced_gradient(&adj, u, &p.objective, None)?;
        Ok((j, g))
    }

    fn problem(&self) -> &Problem {
        self.problem
    }
}

impl Problem {
    /// Validate that a potential is logarithmic before adjoint work.
    pub fn require_logarithmic(&self) -> Result<f64> {
        self.potential.gamma().ok_or_else(|| {
            Error::Config(
                "this operation needs a logarithmic potential; the obstacle limit is approached through gamma sweeps".into(),
            )
        })
    }
}
