//! Gamma-continuation: state-level convergence studies against the obstacle
//! solver, pairwise comparisons between barrier members, and the adapted
//! optimal-control approximation driven toward the obstacle problem.

use crate::error::{Error, Result};
use crate::grid::{convolve_forward, norm_h1, norm_l2, GridSpec, TimeGrid};
use crate::objective::{dist_q, evaluate_cost, norm_q, ControlField};
use crate::optimizer::{projected_gradient, solve_adapted_problem, PgOptions};
use crate::oracle::log_log_slope;
use crate::problem::{ObstacleSurrogate, Problem};
use crate::state::StateTrajectory;

/// Strictly decreasing barrier parameters in (0, 1].
#[derive(Debug, Clone)]
pub struct QuenchSchedule {
    pub gammas: Vec<f64>,
    pub warm_start: bool,
}

impl QuenchSchedule {
    pub fn new(gammas: Vec<f64>, warm_start: bool) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::Config("quench schedule must not be empty".into()));
        }
        for w in gammas.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Config(format!(
                    "quench schedule must be strictly decreasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for &g in &gammas {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::Config(format!(
                    "quench schedule entries must lie in (0, 1], got {g}"
                )));
            }
        }
        Ok(QuenchSchedule { gammas, warm_start })
    }

    /// Half-decade spacing from 1e-1 down to 1e-3.
    pub fn default_schedule() -> Self {
        QuenchSchedule {
            gammas: vec![1e-1, 3.16e-2, 1e-2, 3.16e-3, 1e-3],
            warm_start: true,
        }
    }

    pub fn smallest(&self) -> f64 {
        *self.gammas.last().unwrap()
    }
}

/// Norms of the difference between two trajectories, matching the left-hand
/// side of the continuous-dependence estimate.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TrajectoryGap {
    pub phi_linf_l2: f64,
    pub phi_l2_h1: f64,
    pub w_h1_l2: f64,
    pub w_linf_h1: f64,
}

impl TrajectoryGap {
    pub fn total(&self) -> f64 {
        self.phi_linf_l2 + self.phi_l2_h1 + self.w_h1_l2 + self.w_linf_h1
    }
}

pub fn trajectory_gap(
    a: &StateTrajectory,
    b: &StateTrajectory,
    grid: &GridSpec,
    tg: &TimeGrid,
) -> Result<TrajectoryGap> {
    if a.levels() != b.levels() {
        return Err(Error::GridMismatch {
            context: "trajectory_gap",
            expected: a.levels(),
            got: b.levels(),
        });
    }
    let dt = tg.dt();
    let mut phi_linf_l2 = 0.0f64;
    let mut phi_l2_h1 = 0.0f64;
    let mut w_l2_l2 = 0.0f64;
    let mut dw_l2_l2 = 0.0f64;
    let mut w_linf_h1 = 0.0f64;
    for k in 0..a.levels() {
        let dphi = a.phi[k].sub(&b.phi[k]);
        let dw = a.w[k].sub(&b.w[k]);
        phi_linf_l2 = phi_linf_l2.max(norm_l2(&dphi, grid)?);
        w_linf_h1 = w_linf_h1.max(norm_h1(&dw, grid)?);
        if k > 0 {
            let h1 = norm_h1(&dphi, grid)?;
            phi_l2_h1 += dt * h1 * h1;
            let nw = norm_l2(&dw, grid)?;
            w_l2_l2 += dt * nw * nw;
            let dwdt = a.w[k]
                .sub(&b.w[k])
                .sub(&a.w[k - 1].sub(&b.w[k - 1]))
                .scale(1.0 / dt);
            let ndw = norm_l2(&dwdt, grid)?;
            dw_l2_l2 += dt * ndw * ndw;
        }
    }
    Ok(TrajectoryGap {
        phi_linf_l2,
        phi_l2_h1: phi_l2_h1.sqrt(),
        w_h1_l2: (w_l2_l2 + dw_l2_l2).sqrt(),
        w_linf_h1,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct QuenchRow {
    pub gamma: f64,
    pub phi_err_linf_l2: f64,
    pub w_err_h1_l2: f64,
    pub w_err_linf_h1: f64,
    pub max_abs_phi: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct QuenchReport {
    pub rows: Vec<QuenchRow>,
    /// Least-squares slope of log phi-error against log gamma.
    pub slope: f64,
    /// Errors nonincreasing along the decreasing schedule.
    pub monotone: bool,
    /// Bound diagnostics of the obstacle reference solution.
    pub reference_max_abs_phi: f64,
    pub reference_subdiff: f64,
}

/// Fixed-control sweep: barrier solutions against the independent obstacle
/// solution, with a log-log rate fit.
pub fn state_quench_sweep(
    u: &ControlField,
    problem: &Problem,
    schedule: &QuenchSchedule,
) -> Result<QuenchReport> {
    state_quench_sweep_threads(u, problem, schedule, 1)
}

/// Sweep with up to `threads` schedule entries solved concurrently. Entries
/// are independent solves; results are assembled in schedule order, so the
/// report does not depend on the thread count.
pub fn state_quench_sweep_threads(
    u: &ControlField,
    problem: &Problem,
    schedule: &QuenchSchedule,
    threads: usize,
) -> Result<QuenchReport> {
    let reference = problem.solve_state_obstacle(u)?;
    let mut reference_subdiff = 0.0f64;
    for k in 0..reference.levels() {
        reference_subdiff = reference_subdiff.max(crate::potentials::subdiff_residual(
            &reference.phi[k],
            &reference.xi[k],
            problem.opts.contact_tol,
        )?);
    }
    let reference_max_abs_phi = reference.max_abs_phi();
    let solve_one = |gamma: f64| -> Result<QuenchRow> {
        let stage = problem.with_gamma(gamma)?;
        let traj = stage.solve_state(u).map_err(|e| Error::QuenchStage {
            gamma,
            source: Box::new(e),
        })?;
        let gap = trajectory_gap(&traj, &reference, &problem.grid, &problem.tg)?;
        Ok(QuenchRow {
            gamma,
            phi_err_linf_l2: gap.phi_linf_l2,
            w_err_h1_l2: gap.w_h1_l2,
            w_err_linf_h1: gap.w_linf_h1,
            max_abs_phi: traj.max_abs_phi(),
        })
    };

    let mut rows = Vec::with_capacity(schedule.gammas.len());
    if threads <= 1 {
        for &gamma in &schedule.gammas {
            rows.push(solve_one(gamma)?);
        }
    } else {
        let mut results: Vec<Option<Result<QuenchRow>>> =
            (0..schedule.gammas.len()).map(|_| None).collect();
        let solve_ref = &solve_one;
        for chunk in (0..schedule.gammas.len()).collect::<Vec<_>>().chunks(threads) {
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for &idx in chunk {
                    let gamma = schedule.gammas[idx];
                    handles.push((idx, scope.spawn(move || solve_ref(gamma))));
                }
                for (idx, h) in handles {
                    results[idx] = Some(h.join().expect("sweep worker panicked"));
                }
            });
        }
        for r in results {
            rows.push(r.expect("all entries solved")?);
        }
    }

    let gammas: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.phi_err_linf_l2).collect();
    let slope = log_log_slope(&gammas, &errs);
    let monotone = rows.windows(2).all(|w| w[1].phi_err_linf_l2 <= w[0].phi_err_linf_l2 * (1.0 + 1e-12));
    Ok(QuenchReport {
        rows,
        slope,
        monotone,
        reference_max_abs_phi,
        reference_subdiff,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PairwiseReport {
    pub gamma1: f64,
    pub gamma2: f64,
    /// Left side: combined trajectory gap.
    pub lhs: f64,
    pub phi_gap: f64,
    /// sqrt(gamma2 - gamma1).
    pub sqrt_dgamma: f64,
    /// ||1 * (u1 - u2)||_{L2(Q)}.
    pub control_convolution: f64,
    /// lhs / (sqrt_dgamma + control_convolution); the empirical constant.
    pub ratio: f64,
}

/// Both sides of the continuous-dependence estimate for two barrier members.
pub fn pairwise_gamma_estimate(
    u1: &ControlField,
    u2: &ControlField,
    gamma1: f64,
    gamma2: f64,
    problem: &Problem,
) -> Result<PairwiseReport> {
    if !(gamma1 <= gamma2) {
        return Err(Error::Config(format!(
            "pairwise estimate expects gamma1 <= gamma2, got {gamma1} > {gamma2}"
        )));
    }
    let t1 = problem.with_gamma(gamma1)?.solve_state(u1)?;
    let t2 = problem.with_gamma(gamma2)?.solve_state(u2)?;
    let gap = trajectory_gap(&t1, &t2, &problem.grid, &problem.tg)?;
    let du: Vec<_> = u1
        .values
        .iter()
        .zip(&u2.values)
        .map(|(a, b)| a.sub(b))
        .collect();
    let conv = convolve_forward(&du, &problem.tg)?;
    let control_convolution = norm_q(&conv, &problem.grid, &problem.tg)?;
    let sqrt_dgamma = (gamma2 - gamma1).sqrt();
    let denom = sqrt_dgamma + control_convolution;
    let lhs = gap.total();
    Ok(PairwiseReport {
        gamma1,
        gamma2,
        lhs,
        phi_gap: gap.phi_linf_l2,
        sqrt_dgamma,
        control_convolution,
        ratio: if denom > 0.0 { lhs / denom } else { 0.0 },
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ApproxStage {
    pub gamma: f64,
    pub distance_to_anchor: f64,
    pub adapted_cost: f64,
    pub vi_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ApproxControlReport {
    pub stages: Vec<ApproxStage>,
    /// Cost of the obstacle problem at the anchor control.
    pub anchor_cost: f64,
    pub anchor_vi_residual: f64,
    /// Distances nonincreasing after the first stage.
    pub distances_nonincreasing: bool,
    /// Adapted costs nonincreasing after the first stage.
    pub costs_nonincreasing: bool,
    /// |J_adapted(last) - J(anchor)| / max(J(anchor), 1e-12).
    pub final_cost_gap: f64,
    pub final_distance: f64,
}

pub struct ApproxControlOutput {
    pub report: ApproxControlReport,
    pub anchor: ControlField,
    pub controls: Vec<ControlField>,
}

/// Approximate the obstacle problem's optimal control along the schedule.
/// The anchor is the obstacle-problem stationary point found with the
/// smallest-gamma adjoint as gradient surrogate; each schedule entry then
/// minimizes the adapted cost anchored there.
pub fn approximate_optimal_control(
    u_bar_guess: &ControlField,
    schedule: &QuenchSchedule,
    problem: &Problem,
    pg_opts: &PgOptions,
) -> Result<ApproxControlOutput> {
    let surrogate = ObstacleSurrogate {
        problem,
        gamma_surrogate: schedule.smallest(),
    };
    let (anchor, anchor_hist) = projected_gradient(u_bar_guess, &surrogate, pg_opts)?;
    let anchor_traj = problem.solve_state_obstacle(&anchor)?;
    let anchor_cost = evaluate_cost(
        &anchor_traj,
        &anchor,
        &problem.objective,
        &problem.grid,
        &problem.tg,
    )?;

    let mut stages = Vec::with_capacity(schedule.gammas.len());
    let mut controls = Vec::with_capacity(schedule.gammas.len());
    let mut start = if schedule.warm_start {
        anchor.clone()
    } else {
        u_bar_guess.clone()
    };
    for &gamma in &schedule.gammas {
        let (u_gamma, hist) = solve_adapted_problem(gamma, &anchor, &start, problem, pg_opts)?;
        if hist.stalled {
            return Err(Error::QuenchStage {
                gamma,
                source: Box::new(Error::Config(format!(
                    "adapted optimizer stalled at vi residual {:.3e}",
                    hist.final_vi_residual()
                ))),
            });
        }
        let d = dist_q(&u_gamma.values, &anchor.values, &problem.grid, &problem.tg)?;
        stages.push(ApproxStage {
            gamma,
            distance_to_anchor: d,
            adapted_cost: hist.final_cost(),
            vi_residual: hist.final_vi_residual(),
            iterations: hist.records.len(),
            converged: hist.converged,
        });
        if schedule.warm_start {
            start = u_gamma.clone();
        }
        controls.push(u_gamma);
    }

    let tol_slack = 1e-12;
    let distances_nonincreasing = stages
        .windows(2)
        .all(|w| w[1].distance_to_anchor <= w[0].distance_to_anchor + tol_slack);
    let costs_nonincreasing = stages
        .windows(2)
        .all(|w| w[1].adapted_cost <= w[0].adapted_cost + tol_slack);
    let last = stages.last().unwrap();
    let final_cost_gap = (last.adapted_cost - anchor_cost).abs() / anchor_cost.max(1e-12);
    let final_distance = last.distance_to_anchor;

    Ok(ApproxControlOutput {
        report: ApproxControlReport {
            stages,
            anchor_cost,
            anchor_vi_residual: anchor_hist.final_vi_residual(),
            distances_nonincreasing,
            costs_nonincreasing,
            final_cost_gap,
            final_distance,
        },
        anchor,
        controls,
    })
}
