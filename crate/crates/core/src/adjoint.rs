//! Backward-in-time adjoint sweep.
//!
//! The sweep is the exact transpose of the linearized forward scheme, so the
//! assembled reduced gradient is the machine-precision gradient of the
//! discrete cost. Within each backward step the q-equation is solved first
//! (its matrix is the same symmetric positive definite operator as the
//! forward thermal solve), the running accumulator that realizes the
//! beta Lap (1 (*) q) memory term is updated, and the p-equation follows with
//! the freshly available backward difference of q. Terminal values at level N
//! come out of the same recursion seeded with zeros; they equal the classical
//! terminal conditions up to O(dt).

use crate::banded::SymBanded;
use crate::error::{Error, Result};
use crate::grid::{
    convolve_backward, laplacian_neumann, norm_h1, norm_l2, FieldSeries, GridSpec, ScalarField,
    TimeGrid,
};
use crate::objective::ObjectiveSpec;
use crate::potentials::{f1gamma_derivs, PotentialSpec};
use crate::state::{ModelParams, StateTrajectory};

/// Adjoint pair (p, q) with the accumulated tail integral of q.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    pub p: Vec<ScalarField>,
    pub q: Vec<ScalarField>,
    /// `tail[k] = (1 (*) q)(t_k)`: `tail[N] = 0` and `tail[k] = tail[k+1] + dt q[k]`.
    pub tail: Vec<ScalarField>,
}

impl AdjointTrajectory {
    pub fn levels(&self) -> usize {
        self.p.len()
    }
}

/// The source term of the q-equation in its classical form:
/// k3 (1 (*) (w - w_Q)) + k5 (v - w'_Q) + k4 (w(T) - w_Omega).
/// The k4 contribution is constant in time.
pub fn assemble_source(
    traj: &StateTrajectory,
    spec: &ObjectiveSpec,
    tg: &TimeGrid,
    grid: &GridSpec,
) -> Result<FieldSeries> {
    let levels = tg.levels();
    if traj.levels() != levels {
        return Err(Error::GridMismatch {
            context: "assemble_source",
            expected: levels,
            got: traj.levels(),
        });
    }
    let n = grid.node_count();
    let wdiff: FieldSeries = (0..levels)
        .map(|k| traj.w[k].sub(&spec.w_q[k]))
        .collect();
    let wtail = convolve_backward(&wdiff, tg)?;
    let last = levels - 1;
    let mut out = Vec::with_capacity(levels);
    for k in 0..levels {
        let mut f = Vec::with_capacity(n);
        for i in 0..n {
            f.push(
                spec.k3 * wtail[k].values[i]
                    + spec.k5 * (traj.v[k].values[i] - spec.wp_q[k].values[i])
                    + spec.k4 * (traj.w[last].values[i] - spec.w_omega.values[i]),
            );
        }
        out.push(ScalarField::from_values(f));
    }
    Ok(out)
}

/// Rolling data of the backward recursion between levels.
#[derive(Debug, Clone)]
pub struct BackwardState {
    pub p_next: ScalarField,
    pub q_next: ScalarField,
    /// Accumulator for the thermal-memory and w-tracking tails:
    /// s_k = s_{k+1} + dt beta Lap q_k + dt k3 (w_k - w_Q_k) [+ k4 terminal].
    pub s_next: ScalarField,
}

/// State slices the backward step at level k reads.
pub struct AdjointSlices<'a> {
    /// phi at level k-1; at the exported level 0 pass `phi[0]` shifted forward.
    pub phi_prev: &'a ScalarField,
    pub phi_k: &'a ScalarField,
    /// phi at level k+1 when it exists (unused at the terminal level).
    pub phi_next: Option<&'a ScalarField>,
    /// Lagged velocity v_{k-1}, matching the forward coupling.
    pub v_lag: &'a ScalarField,
    pub w_k: &'a ScalarField,
    pub v_k: &'a ScalarField,
}

/// The q-equation operator (I - dt alpha Lap - dt^2 beta Lap): identical to
/// the forward thermal matrix, factored once per sweep.
pub struct QOperator {
    matrix: SymBanded,
    factor: crate::banded::BandedLdl,
}

impl QOperator {
    pub fn new(grid: &GridSpec, mp: &ModelParams, dt: f64) -> Result<Self> {
        let matrix = SymBanded::assemble(grid, 1.0, dt * mp.alpha + dt * dt * mp.beta, None)?;
        let factor = matrix.factor()?;
        Ok(QOperator { matrix, factor })
    }
}

/// One backward step: solves the q- then the p-equation at level k and
/// returns the advanced recursion state. `terminal` injects the final-time
/// cost derivatives.
#[allow(clippy::too_many_arguments)]
pub fn step_adjoint_backward(
    state: &BackwardState,
    slices: &AdjointSlices,
    spec: &ObjectiveSpec,
    potential: &PotentialSpec,
    mp: &ModelParams,
    dt: f64,
    grid: &GridSpec,
    targets_k: (&ScalarField, &ScalarField, &ScalarField),
    terminal: bool,
    q_op: &QOperator,
    residual_tol: f64,
) -> Result<BackwardState> {
    let gamma = potential.gamma().ok_or_else(|| {
        Error::Config("the adjoint sweep needs a logarithmic potential (finite barrier curvature)".into())
    })?;
    let f2 = &potential.f2;
    let n = grid.node_count();
    let th = mp.theta_c;
    let (phi_q_k, w_q_k, wp_q_k) = targets_k;

    // ---- q-equation --------------------------------------------------------
    let mut rhs_q = vec![0.0; n];
    for i in 0..n {
        let mut r = state.q_next.values[i]
            + dt * state.s_next.values[i]
            + dt * dt * spec.k3 * (slices.w_k.values[i] - w_q_k.values[i])
            + dt * spec.k5 * (slices.v_k.values[i] - wp_q_k.values[i]);
        if terminal {
            r += dt * spec.k4 * (slices.w_k.values[i] - spec.w_omega.values[i])
                + spec.k6 * (slices.v_k.values[i] - spec.wp_omega.values[i]);
        }
        if let Some(phi_next) = slices.phi_next {
            r += dt / (th * th) * f2.first(phi_next.values[i]) * state.p_next.values[i];
        }
        rhs_q[i] = grid.weight(i) * r;
    }
    let q_k = ScalarField::from_values(q_op.factor.solve(&rhs_q));
    if !q_k.all_finite() {
        return Err(Error::NonFinite("adjoint q".into()));
    }
    // guard the direct solve
    {
        let back = q_op.matrix.apply(&q_k.values);
        let mut err = 0.0;
        let mut scale = 0.0;
        for i in 0..n {
            err += (back[i] - rhs_q[i]).powi(2);
            scale += rhs_q[i].powi(2);
        }
        if scale > 0.0 && (err / scale).sqrt() > residual_tol {
            return Err(Error::LinearSolve(format!(
                "adjoint q solve residual {:.3e}",
                (err / scale).sqrt()
            )));
        }
    }

    // ---- accumulator -------------------------------------------------------
    let lap_q = laplacian_neumann(&q_k, grid)?;
    let mut s_k = ScalarField::zeros(grid);
    for i in 0..n {
        let mut s = state.s_next.values[i]
            + dt * mp.beta * lap_q.values[i]
            + dt * spec.k3 * (slices.w_k.values[i] - w_q_k.values[i]);
        if terminal {
            s += spec.k4 * (slices.w_k.values[i] - spec.w_omega.values[i]);
        }
        s_k.values[i] = s;
    }

    // ---- p-equation --------------------------------------------------------
    let mut diag = vec![0.0; n];
    let mut rhs_p = vec![0.0; n];
    for i in 0..n {
        let phi = slices.phi_k.values[i];
        let (_, _, barrier) = f1gamma_derivs(phi, gamma)?;
        let curv = f2.second(phi);
        diag[i] = barrier + (2.0 / th - slices.v_lag.values[i] / (th * th)) * curv;

        let mut r = state.p_next.values[i] + dt * spec.k1 * (phi - phi_q_k.values[i]);
        if terminal {
            r += spec.k2 * (phi - spec.phi_omega.values[i]);
        }
        if let Some(phi_next) = slices.phi_next {
            r += f2.first(phi_next.values[i]) * state.q_next.values[i];
        }
        r -= f2.first(phi) * q_k.values[i];
        r -= curv * (phi - slices.phi_prev.values[i]) * q_k.values[i];
        rhs_p[i] = grid.weight(i) * r;
    }
    let mp_mat = SymBanded::assemble(grid, 1.0, dt, Some(&diag.iter().map(|d| dt * d).collect::<Vec<_>>()))?;
    let p_k = ScalarField::from_values(mp_mat.factor()?.solve(&rhs_p));
    if !p_k.all_finite() {
        return Err(Error::NonFinite("adjoint p".into()));
    }

    Ok(BackwardState {
        p_next: p_k,
        q_next: q_k,
        s_next: s_k,
    })
}

/// Full backward sweep over a logarithmic-potential trajectory.
pub fn solve_adjoint(
    traj: &StateTrajectory,
    potential: &PotentialSpec,
    spec: &ObjectiveSpec,
    mp: &ModelParams,
    tg: &TimeGrid,
    grid: &GridSpec,
    opts: &crate::state::SolverOptions,
) -> Result<AdjointTrajectory> {
    let levels = tg.levels();
    if traj.levels() != levels {
        return Err(Error::GridMismatch {
            context: "solve_adjoint",
            expected: levels,
            got: traj.levels(),
        });
    }
    let dt = tg.dt();

    // positivity guard for the p-equation matrix: the negative curvature of F2
    // must not overpower the 1/dt shift
    let lips = potential.f2.lipschitz_first();
    if lips > 0.0 {
        let vmax = traj.max_abs_v();
        let bound = mp.theta_c * mp.theta_c / (2.0 * lips * (1.0 + vmax));
        if dt > bound {
            return Err(Error::TimestepBound { dt, bound });
        }
    }

    let q_op = QOperator::new(grid, mp, dt)?;

    let mut p = vec![ScalarField::zeros(grid); levels];
    let mut q = vec![ScalarField::zeros(grid); levels];
    let mut state = BackwardState {
        p_next: ScalarField::zeros(grid),
        q_next: ScalarField::zeros(grid),
        s_next: ScalarField::zeros(grid),
    };

    for k in (0..levels).rev() {
        let terminal = k == levels - 1;
        // at the exported level 0 the time-difference stencils fall back to
        // their forward-shifted counterparts
        let phi_prev = if k >= 1 { &traj.phi[k - 1] } else { &traj.phi[0] };
        let v_lag = if k >= 1 { &traj.v[k - 1] } else { &traj.v[0] };
        let slices = AdjointSlices {
            phi_prev: if k >= 1 { phi_prev } else { &traj.phi[0] },
            phi_k: &traj.phi[k],
            phi_next: if terminal { None } else { Some(&traj.phi[k + 1]) },
            v_lag,
            w_k: &traj.w[k],
            v_k: &traj.v[k],
        };
        let targets_k = (&spec.phi_q[k], &spec.w_q[k], &spec.wp_q[k]);
        state = step_adjoint_backward(
            &state,
            &slices,
            spec,
            potential,
            mp,
            dt,
            grid,
            targets_k,
            terminal,
            &q_op,
            opts.linear_residual_tol,
        )?;
        p[k] = state.p_next.clone();
        q[k] = state.q_next.clone();
    }

    // exported tail: backward accumulation of q matching convolve_backward
    let tail = convolve_backward(&q, tg)?;
    Ok(AdjointTrajectory { p, q, tail })
}

/// The multiplier pairing <Lambda_gamma, test> = integral of
/// F1_gamma''(phi) p test over space-time.
pub fn lambda_pairing(
    traj: &StateTrajectory,
    adj: &AdjointTrajectory,
    test: &FieldSeries,
    gamma: f64,
    grid: &GridSpec,
    tg: &TimeGrid,
) -> Result<f64> {
    if test.len() != tg.levels() || adj.levels() != tg.levels() {
        return Err(Error::GridMismatch {
            context: "lambda_pairing",
            expected: tg.levels(),
            got: test.len().min(adj.levels()),
        });
    }
    let dt = tg.dt();
    let mut acc = 0.0;
    for k in 1..tg.levels() {
        let mut level = 0.0;
        for i in 0..grid.node_count() {
            let (_, _, curv) = f1gamma_derivs(traj.phi[k].values[i], gamma)?;
            level += grid.weight(i) * curv * adj.p[k].values[i] * test[k].values[i];
        }
        acc += dt * level;
    }
    Ok(acc)
}

/// Discrete norms of the adjoint pair used by the uniform-bound monitors.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct AdjointNorms {
    pub p_linf_l2: f64,
    pub p_l2_h1: f64,
    pub q_h1_l2: f64,
    pub q_linf_h1: f64,
}

pub fn adjoint_norms(adj: &AdjointTrajectory, grid: &GridSpec, tg: &TimeGrid) -> Result<AdjointNorms> {
    let dt = tg.dt();
    let mut p_linf_l2 = 0.0f64;
    let mut p_l2_h1 = 0.0f64;
    let mut q_l2_l2 = 0.0f64;
    let mut dq_l2_l2 = 0.0f64;
    let mut q_linf_h1 = 0.0f64;
    for k in 0..adj.levels() {
        p_linf_l2 = p_linf_l2.max(norm_l2(&adj.p[k], grid)?);
        q_linf_h1 = q_linf_h1.max(norm_h1(&adj.q[k], grid)?);
        if k > 0 {
            let h1 = norm_h1(&adj.p[k], grid)?;
            p_l2_h1 += dt * h1 * h1;
            let nq = norm_l2(&adj.q[k], grid)?;
            q_l2_l2 += dt * nq * nq;
            let dq = adj.q[k].sub(&adj.q[k - 1]).scale(1.0 / dt);
            let ndq = norm_l2(&dq, grid)?;
            dq_l2_l2 += dt * ndq * ndq;
        }
    }
    Ok(AdjointNorms {
        p_linf_l2,
        p_l2_h1: p_l2_h1.sqrt(),
        q_h1_l2: (q_l2_l2 + dq_l2_l2).sqrt(),
        q_linf_h1,
    })
}
