//! The seven subcommands.

use crate::output::RunDir;
use crate::CliArgs;
use caginalp_core::adjoint::{adjoint_norms, lambda_pairing, solve_adjoint};
use caginalp_core::config::{load_config, LoadedRun};
use caginalp_core::error::Result;
use caginalp_core::grid::{inner_product_l2, ScalarField};
use caginalp_core::io::{write_series, write_table_csv, write_timeseries_csv, write_trajectory};
use caginalp_core::objective::evaluate_cost;
use caginalp_core::optimizer::{
    bang_bang_fraction, projected_gradient, projection_formula_residual,
};
use caginalp_core::oracle::{random_direction, taylor_negative_control, taylor_order};
use caginalp_core::potentials::subdiff_residual;
use caginalp_core::problem::LogReduced;
use caginalp_core::quench::{approximate_optimal_control, state_quench_sweep_threads};
use caginalp_core::state::{state_norms, StateTrajectory};
use caginalp_core::Problem;

pub fn dispatch(args: &CliArgs) -> Result<bool> {
    let run = load_config(&args.config)?;
    println!(
        "{}: {} ({} nodes, {} steps)",
        args.command,
        args.config.display(),
        run.problem.grid.node_count(),
        run.problem.tg.steps()
    );
    let mut out = RunDir::create(&args.command, &args.out, &run, args.threads)?;
    match args.command.as_str() {
        "simulate" => simulate(&run, &mut out, false)?,
        "simulate-obstacle" => simulate(&run, &mut out, true)?,
        "adjoint" => adjoint(&run, &mut out)?,
        "gradient-check" => gradient_check(&run, &mut out, args.threads)?,
        "optimize" => optimize(&run, &mut out)?,
        "quench-sweep" => quench_sweep(&run, &mut out, args.threads)?,
        "approx-control" => approx_control(&run, &mut out)?,
        other => unreachable!("unhandled command {other}"),
    }
    out.finish(&args.command)
}

fn export_diagnostics(problem: &Problem, traj: &StateTrajectory, out: &RunDir) -> Result<()> {
    let grid = &problem.grid;
    let tg = &problem.tg;
    let ones = ScalarField::constant(grid, 1.0);
    let volume = grid.volume();
    let mut max_abs_phi = Vec::with_capacity(tg.levels());
    let mut min_phi = Vec::with_capacity(tg.levels());
    let mut max_phi = Vec::with_capacity(tg.levels());
    let mut mean_v = Vec::with_capacity(tg.levels());
    let mut mean_w = Vec::with_capacity(tg.levels());
    for k in 0..tg.levels() {
        max_abs_phi.push(traj.phi[k].max_abs());
        min_phi.push(traj.phi[k].min());
        max_phi.push(traj.phi[k].max());
        mean_v.push(inner_product_l2(&traj.v[k], &ones, grid)? / volume);
        mean_w.push(inner_product_l2(&traj.w[k], &ones, grid)? / volume);
    }
    write_timeseries_csv(
        &out.dir.join("diagnostics.csv"),
        tg,
        &["max_abs_phi", "min_phi", "max_phi", "mean_v", "mean_w"],
        &[max_abs_phi, min_phi, max_phi, mean_v, mean_w],
    )
}

fn simulate(run: &LoadedRun, out: &mut RunDir, force_obstacle: bool) -> Result<()> {
    let problem = &run.problem;
    let u = problem.control_template.clone();
    // the strategy comes from the registry: the config names it, the
    // obstacle subcommand overrides it
    let strategy_name = if force_obstacle {
        "obstacle"
    } else {
        run.config.potential.kind.as_str()
    };
    let stepper = caginalp_core::stepper::build(strategy_name, &problem.potential)?;
    let obstacle = stepper.gamma().is_none();
    println!("  phase-step strategy: {}", stepper.name());
    let traj = caginalp_core::state::solve_with_stepper(
        stepper.as_ref(),
        &u,
        &problem.init,
        &problem.potential.f2,
        &problem.mp,
        &problem.tg,
        &problem.grid,
        &problem.opts,
    )?;
    write_trajectory(&out.dir, &problem.grid, &traj)?;
    write_series(&out.dir, "u", &problem.grid, &u.values)?;
    export_diagnostics(problem, &traj, out)?;

    let norms = state_norms(&traj, &problem.grid, &problem.tg)?;
    out.scalar("max_abs_phi", traj.max_abs_phi());
    out.scalar("phi_linf_l2", norms.phi_linf_l2);
    out.scalar("w_linf_h1", norms.w_linf_h1);
    if run.config.objective.is_some() {
        let cost = evaluate_cost(&traj, &u, &problem.objective, &problem.grid, &problem.tg)?;
        out.scalar("cost", cost);
    }

    if obstacle {
        let mut worst = 0.0f64;
        for k in 0..traj.levels() {
            worst = worst.max(subdiff_residual(
                &traj.phi[k],
                &traj.xi[k],
                problem.opts.contact_tol,
            )?);
        }
        out.check("phase_within_obstacles", traj.max_abs_phi() <= 1.0, traj.max_abs_phi(), 1.0);
        out.check("subdifferential_residual", worst <= 1e-8, worst, 1e-8);
    } else {
        out.check(
            "phase_strictly_separated",
            traj.max_abs_phi() < 1.0,
            traj.max_abs_phi(),
            1.0,
        );
    }
    Ok(())
}

fn adjoint(run: &LoadedRun, out: &mut RunDir) -> Result<()> {
    let problem = &run.problem;
    let gamma = problem.require_logarithmic()?;
    let u = problem.control_template.clone();
    let traj = problem.solve_state(&u)?;
    let adj = solve_adjoint(
        &traj,
        &problem.potential,
        &problem.objective,
        &problem.mp,
        &problem.tg,
        &problem.grid,
        &problem.opts,
    )?;
    write_trajectory(&out.dir, &problem.grid, &traj)?;
    write_series(&out.dir, "p", &problem.grid, &adj.p)?;
    write_series(&out.dir, "q", &problem.grid, &adj.q)?;
    write_series(&out.dir, "tail", &problem.grid, &adj.tail)?;

    let lambda = lambda_pairing(&traj, &adj, &adj.p, gamma, &problem.grid, &problem.tg)?;
    let norms = adjoint_norms(&adj, &problem.grid, &problem.tg)?;
    out.scalar("lambda_complementarity", lambda);
    out.scalar("p_linf_l2", norms.p_linf_l2);
    out.scalar("p_l2_h1", norms.p_l2_h1);
    out.scalar("q_h1_l2", norms.q_h1_l2);
    out.scalar("q_linf_h1", norms.q_linf_h1);

    // tail must accumulate q backward, level by level
    let dt = problem.tg.dt();
    let mut tail_defect = 0.0f64;
    for k in 0..adj.levels() - 1 {
        for i in 0..problem.grid.node_count() {
            let d = adj.tail[k].values[i] - adj.tail[k + 1].values[i] - dt * adj.q[k].values[i];
            tail_defect = tail_defect.max(d.abs());
        }
    }
    out.check("lambda_nonnegative", lambda >= -1e-12, lambda, -1e-12);
    out.check("tail_accumulation", tail_defect <= 1e-14, tail_defect, 1e-14);
    out.check(
        "phase_strictly_separated",
        traj.max_abs_phi() < 1.0,
        traj.max_abs_phi(),
        1.0,
    );
    Ok(())
}

fn gradient_check(run: &LoadedRun, out: &mut RunDir, threads: usize) -> Result<()> {
    let problem = &run.problem;
    problem.require_logarithmic()?;
    let gc = &run.gradcheck;
    let model = LogReduced { problem };
    let u = problem.control_template.clone();

    let probe = |idx: usize| -> Result<(f64, Vec<f64>)> {
        let dir = random_direction(&problem.grid, &problem.tg, gc.seed.wrapping_add(idx as u64))?;
        let report = taylor_order(&model, &u, &dir, &gc.h_values)?;
        Ok((report.order, report.remainders))
    };

    let mut results: Vec<Option<Result<(f64, Vec<f64>)>>> =
        (0..gc.directions).map(|_| None).collect();
    if threads <= 1 {
        for (i, slot) in results.iter_mut().enumerate() {
            *slot = Some(probe(i));
        }
    } else {
        let probe_ref = &probe;
        for chunk in (0..gc.directions).collect::<Vec<_>>().chunks(threads) {
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for &i in chunk {
                    handles.push((i, scope.spawn(move || probe_ref(i))));
                }
                for (i, h) in handles {
                    results[i] = Some(h.join().expect("probe worker panicked"));
                }
            });
        }
    }

    let mut orders = Vec::new();
    let mut rows = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (order, remainders) = r.expect("probe ran")?;
        let mut row = vec![i as f64, order];
        row.extend(remainders);
        rows.push(row);
        orders.push(order);
    }
    let mut header: Vec<String> = vec!["direction".into(), "order".into()];
    for h in &gc.h_values {
        header.push(format!("remainder_h_{h:e}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    write_table_csv(&out.dir.join("taylor.csv"), &header_refs, &rows)?;

    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let neg_dir = random_direction(&problem.grid, &problem.tg, gc.seed)?;
    let neg = taylor_negative_control(&model, &u, &neg_dir, &gc.h_values)?;

    out.scalar("taylor_orders", serde_json::json!(orders));
    out.scalar("taylor_order", min_order);
    out.scalar("negative_control_order", neg.order);
    out.check("taylor_order_min", min_order >= gc.min_order, min_order, gc.min_order);
    out.check(
        "negative_control_detected",
        neg.order < gc.negative_control_max_order,
        neg.order,
        gc.negative_control_max_order,
    );
    Ok(())
}

fn optimize(run: &LoadedRun, out: &mut RunDir) -> Result<()> {
    let problem = &run.problem;
    problem.require_logarithmic()?;
    let model = LogReduced { problem };
    let (u_opt, hist) = projected_gradient(&problem.control_template, &model, &run.pg_opts)?;

    let rows: Vec<Vec<f64>> = hist
        .records
        .iter()
        .map(|r| vec![r.iteration as f64, r.cost, r.step, r.vi_residual])
        .collect();
    write_table_csv(
        &out.dir.join("history.csv"),
        &["iteration", "cost", "step", "vi_residual"],
        &rows,
    )?;
    write_series(&out.dir, "u", &problem.grid, &u_opt.values)?;

    out.scalar("final_cost", hist.final_cost());
    out.scalar("final_vi_residual", hist.final_vi_residual());
    out.scalar("iterations", hist.records.len());
    out.scalar("converged", hist.converged);
    out.scalar("stalled", hist.stalled);
    out.check(
        "vi_residual_below_tol",
        hist.converged && !hist.stalled,
        hist.final_vi_residual(),
        run.pg_opts.tol,
    );

    let traj = problem.solve_state(&u_opt)?;
    write_trajectory(&out.dir, &problem.grid, &traj)?;
    out.check(
        "phase_strictly_separated",
        traj.max_abs_phi() < 1.0,
        traj.max_abs_phi(),
        1.0,
    );
    let ell = problem.objective.ell;
    if ell > 0.0 {
        let adj = solve_adjoint(
            &traj,
            &problem.potential,
            &problem.objective,
            &problem.mp,
            &problem.tg,
            &problem.grid,
            &problem.opts,
        )?;
        let res = projection_formula_residual(&u_opt, &adj.q, ell, problem)?;
        out.scalar("projection_formula_residual", res);
        out.check(
            "projection_formula",
            res <= 10.0 * run.pg_opts.tol,
            res,
            10.0 * run.pg_opts.tol,
        );
    } else {
        // the closed-form projection needs ell > 0; report the bang-bang
        // structure instead
        let frac = bang_bang_fraction(&u_opt, 1e-9);
        out.scalar("bang_bang_fraction", frac);
    }
    Ok(())
}

fn quench_sweep(run: &LoadedRun, out: &mut RunDir, threads: usize) -> Result<()> {
    let problem = &run.problem;
    let u = problem.control_template.clone();
    let report = state_quench_sweep_threads(&u, problem, &run.schedule, threads)?;

    let rows: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.gamma,
                r.phi_err_linf_l2,
                r.w_err_h1_l2,
                r.w_err_linf_h1,
                r.max_abs_phi,
            ]
        })
        .collect();
    write_table_csv(
        &out.dir.join("rates.csv"),
        &["gamma", "phi_err_linf_l2", "w_err_h1_l2", "w_err_linf_h1", "max_abs_phi"],
        &rows,
    )?;

    out.scalar("slope", report.slope);
    out.scalar("monotone", report.monotone);
    out.scalar("reference_max_abs_phi", report.reference_max_abs_phi);
    out.scalar("reference_subdiff", report.reference_subdiff);
    out.check(
        "rate_in_window",
        (0.45..=1.1).contains(&report.slope),
        report.slope,
        0.45,
    );
    out.check("errors_monotone", report.monotone, report.slope, 0.0);
    let worst_member = report
        .rows
        .iter()
        .map(|r| r.max_abs_phi)
        .fold(0.0f64, f64::max);
    out.check("barrier_members_separated", worst_member < 1.0, worst_member, 1.0);
    out.check(
        "obstacle_reference_within_bounds",
        report.reference_max_abs_phi <= 1.0,
        report.reference_max_abs_phi,
        1.0,
    );
    out.check(
        "obstacle_reference_subdiff",
        report.reference_subdiff <= 1e-8,
        report.reference_subdiff,
        1e-8,
    );
    Ok(())
}

fn approx_control(run: &LoadedRun, out: &mut RunDir) -> Result<()> {
    let problem = &run.problem;
    let result = approximate_optimal_control(
        &problem.control_template,
        &run.schedule,
        problem,
        &run.pg_opts,
    )?;
    let r = &result.report;

    let rows: Vec<Vec<f64>> = r
        .stages
        .iter()
        .map(|s| {
            vec![
                s.gamma,
                s.distance_to_anchor,
                s.adapted_cost,
                s.vi_residual,
                s.iterations as f64,
            ]
        })
        .collect();
    write_table_csv(
        &out.dir.join("stages.csv"),
        &["gamma", "distance_to_anchor", "adapted_cost", "vi_residual", "iterations"],
        &rows,
    )?;
    write_series(&out.dir, "u_anchor", &problem.grid, &result.anchor.values)?;
    if let Some(last) = result.controls.last() {
        write_series(&out.dir, "u_final", &problem.grid, &last.values)?;
    }

    out.scalar("anchor_cost", r.anchor_cost);
    out.scalar("anchor_vi_residual", r.anchor_vi_residual);
    out.scalar("final_distance", r.final_distance);
    out.scalar("final_cost_gap", r.final_cost_gap);
    out.check("distances_nonincreasing", r.distances_nonincreasing, r.final_distance, 0.0);
    out.check("costs_nonincreasing", r.costs_nonincreasing, r.final_cost_gap, 0.0);
    out.check("cost_gap_within_1pct", r.final_cost_gap <= 0.01, r.final_cost_gap, 0.01);
    Ok(())
}
