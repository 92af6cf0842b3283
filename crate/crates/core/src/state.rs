//! Forward-in-time solution of the coupled phase/thermal system.
//!
//! One implicit Euler step, in order: the phase equation is solved with the
//! velocity lagged at the previous level (a strategy from [`crate::stepper`]),
//! then the thermal pair (w, v) is advanced by a single symmetric positive
//! definite solve whose matrix is constant in time and factored once.
//! The control slice at level k acts on the step arriving at level k; the
//! level-0 slice never enters the dynamics.

use crate::banded::{BandedLdl, SymBanded};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField, TimeGrid};
use crate::objective::ControlField;
use crate::potentials::{F2Spec, PotentialSpec};
use crate::stepper::{self, PhaseContext, PhaseStepper};

/// Physical constants of the model; all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub theta_c: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, theta_c: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("theta_c", theta_c)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "model parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(ModelParams { alpha, beta, theta_c })
    }
}

/// Initial phase, thermal displacement, and temperature fields. The phase must
/// start strictly inside (-1, 1).
#[derive(Debug, Clone)]
pub struct InitialData {
    pub phi0: ScalarField,
    pub w0: ScalarField,
    pub v0: ScalarField,
}

impl InitialData {
    pub fn new(phi0: ScalarField, w0: ScalarField, v0: ScalarField) -> Result<Self> {
        if phi0.len() != w0.len() || phi0.len() != v0.len() {
            return Err(Error::GridMismatch {
                context: "InitialData",
                expected: phi0.len(),
                got: w0.len().max(v0.len()),
            });
        }
        for f in [&phi0, &w0, &v0] {
            if !f.all_finite() {
                return Err(Error::Config("initial data contains non-finite values".into()));
            }
        }
        let (lo, hi) = (phi0.min(), phi0.max());
        if !(lo > -1.0 && hi < 1.0) {
            return Err(Error::Config(format!(
                "initial phase must satisfy -1 < phi0 < 1 at every node; observed range [{lo}, {hi}]"
            )));
        }
        Ok(InitialData { phi0, w0, v0 })
    }

    /// Observed interior bounds of the initial phase.
    pub fn phase_range(&self) -> (f64, f64) {
        (self.phi0.min(), self.phi0.max())
    }
}

/// Full time history of the state: phase, thermal displacement, temperature
/// v = dw/dt, and the multiplier sample xi at every level.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    pub phi: Vec<ScalarField>,
    pub w: Vec<ScalarField>,
    pub v: Vec<ScalarField>,
    pub xi: Vec<ScalarField>,
}

impl StateTrajectory {
    pub fn levels(&self) -> usize {
        self.phi.len()
    }

    pub fn max_abs_phi(&self) -> f64 {
        self.phi.iter().fold(0.0, |m, f| m.max(f.max_abs()))
    }

    pub fn max_abs_v(&self) -> f64 {
        self.v.iter().fold(0.0, |m, f| m.max(f.max_abs()))
    }
}

/// Tolerances and iteration caps shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual tolerance (lumped L2 norm) for the phase Newton iteration.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Cap on step-length halvings in the barrier damping.
    pub max_halvings: usize,
    /// Iterates stay within (-1 + margin, 1 - margin).
    pub interior_margin: f64,
    /// Penalty parameter of the primal-dual active set update.
    pub pdas_penalty: f64,
    pub pdas_max_iter: usize,
    /// Relative residual guard on direct linear solves.
    pub linear_residual_tol: f64,
    /// Absolute tolerance for contact detection in the subdifferential check.
    pub contact_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-10,
            newton_max_iter: 50,
            max_halvings: 60,
            interior_margin: 1e-14,
            pdas_penalty: 1.0,
            pdas_max_iter: 50,
            linear_residual_tol: 1e-10,
            contact_tol: 1e-9,
        }
    }
}

/// One implicit phase step under the logarithmic barrier. `v_new` is whatever
/// velocity sample the caller couples with; the sweep passes the lagged one.
pub fn step_phase(
    phi_prev: &ScalarField,
    v_new: &ScalarField,
    spec: &PotentialSpec,
    mp: &ModelParams,
    dt: f64,
    grid: &GridSpec,
    opts: &SolverOptions,
) -> Result<(ScalarField, ScalarField)> {
    let stepper = stepper::build("logarithmic", spec)?;
    let xi_prev = ScalarField::zeros(grid);
    let ctx = PhaseContext {
        phi_prev,
        v_lag: v_new,
        xi_prev: &xi_prev,
        mp,
        grid,
        dt,
        level: 0,
        opts,
    };
    let s = stepper.step(&ctx)?;
    Ok((s.phi, s.xi))
}

/// Prefactored thermal solve: (I - dt alpha Lap - dt^2 beta Lap) v = rhs,
/// then w = w_prev + dt v.
pub struct ThermalSolver {
    matrix: SymBanded,
    factor: BandedLdl,
    dt: f64,
    residual_tol: f64,
}

impl ThermalSolver {
    pub fn new(grid: &GridSpec, mp: &ModelParams, dt: f64, residual_tol: f64) -> Result<Self> {
        let a = dt * mp.alpha + dt * dt * mp.beta;
        let matrix = SymBanded::assemble(grid, 1.0, a, None)?;
        let factor = matrix.factor()?;
        Ok(ThermalSolver {
            matrix,
            factor,
            dt,
            residual_tol,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        w_prev: &ScalarField,
        v_prev: &ScalarField,
        phi_new: &ScalarField,
        phi_prev: &ScalarField,
        u_slice: &ScalarField,
        f2: &F2Spec,
        mp: &ModelParams,
        grid: &GridSpec,
    ) -> Result<(ScalarField, ScalarField)> {
        let dt = self.dt;
        let lap_w = crate::grid::laplacian_neumann(w_prev, grid)?;
        let n = grid.node_count();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let transfer = f2.first(phi_new.values[i]) * (phi_new.values[i] - phi_prev.values[i]);
            rhs[i] = grid.weight(i)
                * (v_prev.values[i] + dt * mp.beta * lap_w.values[i] - transfer
                    + dt * u_slice.values[i]);
        }
        let v_new = self.factor.solve(&rhs);
        // direct solve residual guard
        let back = self.matrix.apply(&v_new);
        let mut err = 0.0;
        let mut scale = 0.0;
        for i in 0..n {
            err += (back[i] - rhs[i]).powi(2);
            scale += rhs[i].powi(2);
        }
        if scale > 0.0 && (err / scale).sqrt() > self.residual_tol {
            return Err(Error::LinearSolve(format!(
                "thermal solve residual {:.3e} above tolerance",
                (err / scale).sqrt()
            )));
        }
        let v_new = ScalarField::from_values(v_new);
        let w_new = w_prev.axpy(dt, &v_new);
        Ok((w_new, v_new))
    }
}

/// One thermal step with a freshly assembled matrix.
#[allow(clippy::too_many_arguments)]
pub fn step_thermal(
    w_prev: &ScalarField,
    v_prev: &ScalarField,
    phi_new: &ScalarField,
    phi_prev: &ScalarField,
    u_slice: &ScalarField,
    mp: &ModelParams,
    dt: f64,
    grid: &GridSpec,
    f2: &F2Spec,
) -> Result<(ScalarField, ScalarField)> {
    let solver = ThermalSolver::new(grid, mp, dt, SolverOptions::default().linear_residual_tol)?;
    solver.step(w_prev, v_prev, phi_new, phi_prev, u_slice, f2, mp, grid)
}

fn check_control(u: &ControlField, grid: &GridSpec, tg: &TimeGrid) -> Result<()> {
    if u.values.len() != tg.levels() {
        return Err(Error::GridMismatch {
            context: "control levels",
            expected: tg.levels(),
            got: u.values.len(),
        });
    }
    for f in &u.values {
        if f.len() != grid.node_count() {
            return Err(Error::GridMismatch {
                context: "control field",
                expected: grid.node_count(),
                got: f.len(),
            });
        }
    }
    Ok(())
}

/// Run the full sweep with an explicit phase-step strategy.
#[allow(clippy::too_many_arguments)]
pub fn solve_with_stepper(
    stepper: &dyn PhaseStepper,
    u: &ControlField,
    init: &InitialData,
    f2: &F2Spec,
    mp: &ModelParams,
    tg: &TimeGrid,
    grid: &GridSpec,
    opts: &SolverOptions,
) -> Result<StateTrajectory> {
    check_control(u, grid, tg)?;
    if init.phi0.len() != grid.node_count() {
        return Err(Error::GridMismatch {
            context: "initial data",
            expected: grid.node_count(),
            got: init.phi0.len(),
        });
    }
    let dt = tg.dt();
    let thermal = ThermalSolver::new(grid, mp, dt, opts.linear_residual_tol)?;

    let levels = tg.levels();
    let mut phi = Vec::with_capacity(levels);
    let mut w = Vec::with_capacity(levels);
    let mut v = Vec::with_capacity(levels);
    let mut xi = Vec::with_capacity(levels);

    phi.push(init.phi0.clone());
    w.push(init.w0.clone());
    v.push(init.v0.clone());
    xi.push(match stepper.gamma() {
        Some(gamma) => ScalarField::from_values(
            init.phi0
                .values
                .iter()
                .map(|&r| gamma * ((1.0 + r) / (1.0 - r)).ln())
                .collect(),
        ),
        None => ScalarField::zeros(grid),
    });

    for k in 1..levels {
        let ctx = PhaseContext {
            phi_prev: &phi[k - 1],
            v_lag: &v[k - 1],
            xi_prev: &xi[k - 1],
            mp,
            grid,
            dt,
            level: k,
            opts,
        };
        let step = stepper.step(&ctx)?;
        let (w_new, v_new) = thermal.step(
            &w[k - 1],
            &v[k - 1],
            &step.phi,
            &phi[k - 1],
            &u.values[k],
            f2,
            mp,
            grid,
        )?;
        for (name, f) in [("phi", &step.phi), ("w", &w_new), ("v", &v_new)] {
            if !f.all_finite() {
                return Err(Error::NonFinite(format!("{name} at time level {k}")));
            }
        }
        phi.push(step.phi);
        xi.push(step.xi);
        w.push(w_new);
        v.push(v_new);
    }

    Ok(StateTrajectory { phi, w, v, xi })
}

/// Forward solve with the strategy selected by the potential spec.
pub fn solve_state(
    u: &ControlField,
    init: &InitialData,
    spec: &PotentialSpec,
    mp: &ModelParams,
    tg: &TimeGrid,
    grid: &GridSpec,
    opts: &SolverOptions,
) -> Result<StateTrajectory> {
    let stepper = stepper::for_spec(spec);
    solve_with_stepper(stepper.as_ref(), u, init, &spec.f2, mp, tg, grid, opts)
}

/// Forward solve of the obstacle inclusion by primal-dual active sets.
pub fn solve_state_obstacle(
    u: &ControlField,
    init: &InitialData,
    f2: &F2Spec,
    mp: &ModelParams,
    tg: &TimeGrid,
    grid: &GridSpec,
    opts: &SolverOptions,
) -> Result<StateTrajectory> {
    let spec = PotentialSpec::obstacle(f2.clone());
    let stepper = stepper::build("obstacle", &spec)?;
    solve_with_stepper(stepper.as_ref(), u, init, f2, mp, tg, grid, opts)
}

/// Discrete norms recorded for the uniform-bound monitors: the energy-type
/// quantities that the a priori estimates keep bounded uniformly in gamma.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct StateNorms {
    pub phi_linf_l2: f64,
    pub phi_l2_h1: f64,
    pub phi_h1_l2: f64,
    pub w_linf_h1: f64,
    pub w_h1_l2: f64,
    pub v_linf_l2: f64,
}

pub fn state_norms(traj: &StateTrajectory, grid: &GridSpec, tg: &TimeGrid) -> Result<StateNorms> {
    use crate::grid::{norm_h1, norm_l2};
    let dt = tg.dt();
    let mut phi_linf_l2 = 0.0f64;
    let mut phi_l2_h1 = 0.0f64;
    let mut phi_h1_l2 = 0.0f64;
    let mut w_linf_h1 = 0.0f64;
    let mut w_h1_l2 = 0.0f64;
    let mut v_linf_l2 = 0.0f64;
    for k in 0..traj.levels() {
        phi_linf_l2 = phi_linf_l2.max(norm_l2(&traj.phi[k], grid)?);
        w_linf_h1 = w_linf_h1.max(norm_h1(&traj.w[k], grid)?);
        v_linf_l2 = v_linf_l2.max(norm_l2(&traj.v[k], grid)?);
        if k > 0 {
            let h1 = norm_h1(&traj.phi[k], grid)?;
            phi_l2_h1 += dt * h1 * h1;
            let dphi = traj.phi[k].sub(&traj.phi[k - 1]).scale(1.0 / dt);
            let nd = norm_l2(&dphi, grid)?;
            phi_h1_l2 += dt * nd * nd;
            let dw = traj.w[k].sub(&traj.w[k - 1]).scale(1.0 / dt);
            let nw = norm_l2(&dw, grid)?;
            w_h1_l2 += dt * nw * nw;
        }
    }
    Ok(StateNorms {
        phi_linf_l2,
        phi_l2_h1: phi_l2_h1.sqrt(),
        phi_h1_l2: phi_h1_l2.sqrt(),
        w_linf_h1,
        w_h1_l2: w_h1_l2.sqrt(),
        v_linf_l2,
    })
}
