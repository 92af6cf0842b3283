//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Run with `cargo test -p caginalp-cli --test acceptance -- --nocapture`.

use caginalp_core::adjoint::{adjoint_norms, lambda_pairing, solve_adjoint};
use caginalp_core::config::load_config;
use caginalp_core::grid::{GridSpec, ScalarField, TimeGrid};
use caginalp_core::objective::ControlField;
use caginalp_core::optimizer::{projected_gradient, projection_formula_residual};
use caginalp_core::oracle::{
    random_direction, scalar_ode_reference, taylor_negative_control, taylor_order,
};
use caginalp_core::potentials::{subdiff_residual, F2Spec, PotentialSpec};
use caginalp_core::problem::LogReduced;
use caginalp_core::quench::{
    approximate_optimal_control, pairwise_gamma_estimate, state_quench_sweep_threads,
};
use caginalp_core::state::{
    solve_state, state_norms, InitialData, ModelParams, SolverOptions,
};
use std::path::{Path, PathBuf};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> caginalp_core::config::LoadedRun {
    load_config(&configs().join(name)).expect("shipped config loads")
}

fn report(number: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number:02} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number:02} {name} failed: {detail}");
}

#[test]
fn criterion_01_gradient_correctness() {
    let run = load("tracking_1d.json");
    let problem = &run.problem;
    let model = LogReduced { problem };
    let u = problem.control_template.clone();
    let h = &run.gradcheck.h_values;

    let mut orders = Vec::new();
    for i in 0..5u64 {
        let dir = random_direction(&problem.grid, &problem.tg, run.gradcheck.seed + i).unwrap();
        orders.push(taylor_order(&model, &u, &dir, h).unwrap().order);
    }
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    let dir = random_direction(&problem.grid, &problem.tg, run.gradcheck.seed).unwrap();
    let negative = taylor_negative_control(&model, &u, &dir, h).unwrap().order;
    let pass = min_order >= 1.9 && negative < 1.2;
    report(
        1,
        "gradient correctness (taylor with negative control)",
        pass,
        &format!("orders {orders:.3?}, min {min_order:.3} >= 1.9; perturbed {negative:.3} < 1.2"),
    );
}

#[test]
fn criterion_02_deep_quench_state_rate() {
    let run = load("quench_interior.json");
    let rep = state_quench_sweep_threads(
        &run.problem.control_template,
        &run.problem,
        &run.schedule,
        2,
    )
    .unwrap();
    let pass = (0.45..=1.1).contains(&rep.slope) && rep.monotone;
    let errs: Vec<f64> = rep.rows.iter().map(|r| r.phi_err_linf_l2).collect();
    report(
        2,
        "deep-quench state rate against the obstacle solver",
        pass,
        &format!(
            "slope {:.3} in [0.45, 1.1], errors {:?} monotone {}",
            rep.slope, errs, rep.monotone
        ),
    );
}

#[test]
fn criterion_03_pairwise_gamma_estimate() {
    let run = load("quench_interior.json");
    let u = &run.problem.control_template;
    let mut ratios = Vec::new();
    for (g1, g2) in [(1e-2, 1e-1), (1e-2, 3.16e-2), (3.16e-2, 1e-1)] {
        let rep = pairwise_gamma_estimate(u, u, g1, g2, &run.problem).unwrap();
        assert!(rep.lhs <= rep.ratio * rep.sqrt_dgamma * (1.0 + 1e-12));
        ratios.push(rep.ratio);
    }
    let spread = ratios.iter().cloned().fold(0.0f64, f64::max)
        / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = spread <= 3.0;
    report(
        3,
        "pairwise gamma estimate with stable constant",
        pass,
        &format!("constants {ratios:.4?}, spread {spread:.3} <= 3"),
    );
}

#[test]
fn criterion_04_bounds_and_separation() {
    // logarithmic trajectories: strict separation
    let mut log_max: f64 = 0.0;
    let tracking = load("tracking_1d.json");
    let traj = tracking
        .problem
        .solve_state(&tracking.problem.control_template)
        .unwrap();
    log_max = log_max.max(traj.max_abs_phi());

    let contact = load("quench_contact.json");
    for &gamma in &contact.schedule.gammas {
        let stage = contact.problem.with_gamma(gamma).unwrap();
        let t = stage.solve_state(&contact.problem.control_template).unwrap();
        log_max = log_max.max(t.max_abs_phi());
    }

    let smoke = load("smoke_2d.json");
    let t2d = smoke
        .problem
        .solve_state(&smoke.problem.control_template)
        .unwrap();
    log_max = log_max.max(t2d.max_abs_phi());

    // obstacle trajectories: exact bounds and subdifferential consistency
    let mut obs_max: f64 = 0.0;
    let mut worst_subdiff: f64 = 0.0;
    for run in [&contact, &tracking] {
        let t = run
            .problem
            .solve_state_obstacle(&run.problem.control_template)
            .unwrap();
        obs_max = obs_max.max(t.max_abs_phi());
        for k in 0..t.levels() {
            worst_subdiff = worst_subdiff.max(
                subdiff_residual(&t.phi[k], &t.xi[k], run.problem.opts.contact_tol).unwrap(),
            );
        }
    }

    let pass = log_max < 1.0 && obs_max <= 1.0 && worst_subdiff <= 1e-8;
    report(
        4,
        "bound preservation and separation",
        pass,
        &format!(
            "log max |phi| {log_max:.12} < 1 strictly; obstacle max |phi| {obs_max} <= 1; subdiff {worst_subdiff:.2e} <= 1e-8"
        ),
    );
}

#[test]
fn criterion_05_projection_formula() {
    let run = load("tracking_1d.json");
    let problem = &run.problem;
    let model = LogReduced { problem };
    let (u_opt, hist) = projected_gradient(&problem.control_template, &model, &run.pg_opts).unwrap();
    assert!(hist.converged && !hist.stalled, "optimizer must converge");
    let traj = problem.solve_state(&u_opt).unwrap();
    let adj = solve_adjoint(
        &traj,
        &problem.potential,
        &problem.objective,
        &problem.mp,
        &problem.tg,
        &problem.grid,
        &problem.opts,
    )
    .unwrap();
    let res = projection_formula_residual(&u_opt, &adj.q, problem.objective.ell, problem).unwrap();
    let bound = 10.0 * run.pg_opts.tol;
    let pass = res <= bound;
    report(
        5,
        "closed-form projection at convergence",
        pass,
        &format!(
            "|| u - clamp(-q/ell) || = {res:.3e} <= {bound:.1e} (vi residual {:.3e})",
            hist.final_vi_residual()
        ),
    );
}

#[test]
fn criterion_06_complementarity_quantity() {
    let run = load("tracking_1d.json");
    let problem = &run.problem;
    let u = problem.control_template.clone();
    let mut values = Vec::new();
    for gamma in [1.0, 0.1, 0.01, 0.001] {
        let stage = problem.with_gamma(gamma).unwrap();
        let traj = stage.solve_state(&u).unwrap();
        let adj = solve_adjoint(
            &traj,
            &stage.potential,
            &stage.objective,
            &stage.mp,
            &stage.tg,
            &stage.grid,
            &stage.opts,
        )
        .unwrap();
        let lam = lambda_pairing(&traj, &adj, &adj.p, gamma, &stage.grid, &stage.tg).unwrap();
        values.push(lam);
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = min >= -1e-12;
    report(
        6,
        "complementarity quantity nonnegative across gamma",
        pass,
        &format!("Lambda_gamma(p_gamma) = {values:?}, min {min:.3e} >= -1e-12"),
    );
}

#[test]
fn criterion_07_adapted_control_convergence() {
    let run = load("approx_control.json");
    let out = approximate_optimal_control(
        &run.problem.control_template,
        &run.schedule,
        &run.problem,
        &run.pg_opts,
    )
    .unwrap();
    let r = &out.report;
    let dists: Vec<f64> = r.stages.iter().map(|s| s.distance_to_anchor).collect();
    let pass = r.distances_nonincreasing && r.final_cost_gap <= 0.01;
    report(
        7,
        "adapted-control convergence toward the obstacle problem",
        pass,
        &format!(
            "distances {dists:?} nonincreasing {}; |J_adapted - J(anchor)|/J(anchor) = {:.3e} <= 0.01",
            r.distances_nonincreasing, r.final_cost_gap
        ),
    );
}

#[test]
fn criterion_08_scalar_ode_equivalence() {
    let grid = GridSpec::line(1.0, 9).unwrap();
    let mp = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let gamma = 0.1;
    let spec = PotentialSpec::logarithmic(gamma, F2Spec::quadratic(0.0).unwrap()).unwrap();
    let mut errors = Vec::new();
    for steps in [100usize, 200, 400] {
        let tg = TimeGrid::new(0.5, steps).unwrap();
        let init = InitialData::new(
            ScalarField::constant(&grid, 0.5),
            ScalarField::zeros(&grid),
            ScalarField::zeros(&grid),
        )
        .unwrap();
        let series = |c: f64| -> Vec<ScalarField> {
            (0..tg.levels()).map(|_| ScalarField::constant(&grid, c)).collect()
        };
        let u = ControlField::new(series(0.0), series(-1.0), series(1.0)).unwrap();
        let traj =
            solve_state(&u, &init, &spec, &mp, &tg, &grid, &SolverOptions::default()).unwrap();
        let reference = scalar_ode_reference(0.5, gamma, &tg).unwrap();
        let mut err = 0.0f64;
        for k in 0..tg.levels() {
            err = err.max((traj.phi[k].values[0] - reference[k]).abs());
        }
        errors.push(err);
    }
    let s1 = (errors[0] / errors[1]).log2();
    let s2 = (errors[1] / errors[2]).log2();
    let pass = (0.9..=1.1).contains(&s1) && (0.9..=1.1).contains(&s2);
    report(
        8,
        "scalar-ode equivalence at first order in dt",
        pass,
        &format!("richardson slopes {s1:.3}, {s2:.3} in [0.9, 1.1] (errors {errors:?})"),
    );
}

#[test]
fn criterion_09_uniform_bound_shadow() {
    let run = load("tracking_1d.json");
    let problem = &run.problem;
    let u = problem.control_template.clone();

    let solve_norms = |gamma: f64| {
        let stage = problem.with_gamma(gamma).unwrap();
        let traj = stage.solve_state(&u).unwrap();
        let sn = state_norms(&traj, &stage.grid, &stage.tg).unwrap();
        let adj = solve_adjoint(
            &traj,
            &stage.potential,
            &stage.objective,
            &stage.mp,
            &stage.tg,
            &stage.grid,
            &stage.opts,
        )
        .unwrap();
        let an = adjoint_norms(&adj, &stage.grid, &stage.tg).unwrap();
        vec![
            sn.phi_linf_l2,
            sn.phi_l2_h1,
            sn.phi_h1_l2,
            sn.w_linf_h1,
            sn.w_h1_l2,
            an.p_linf_l2,
            an.p_l2_h1,
            an.q_h1_l2,
            an.q_linf_h1,
        ]
    };

    let base = solve_norms(1.0);
    let mut worst_ratio = 0.0f64;
    for gamma in [0.1, 0.01, 0.001] {
        let n = solve_norms(gamma);
        for (a, b) in n.iter().zip(&base) {
            if *b > 1e-14 {
                worst_ratio = worst_ratio.max(a / b);
            }
        }
    }
    let pass = worst_ratio <= 3.0;
    report(
        9,
        "uniform-bound shadow of state and adjoint norms",
        pass,
        &format!("worst norm ratio against gamma = 1 values: {worst_ratio:.3} <= 3"),
    );
}

#[test]
fn criterion_10_reproducibility() {
    let bin = env!("CARGO_BIN_EXE_caginalp");
    let base = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-repro");
    let _ = std::fs::remove_dir_all(&base);
    let mut identical = true;
    let mut detail = String::new();
    for (cmd, cfg) in [
        ("simulate", "tracking_1d.json"),
        ("gradient-check", "tracking_1d.json"),
    ] {
        let mut dirs = Vec::new();
        for tag in ["a", "b"] {
            let out = base.join(format!("{cmd}-{tag}"));
            let status = std::process::Command::new(bin)
                .arg(cmd)
                .arg(configs().join(cfg))
                .arg("--out")
                .arg(&out)
                .args(["--threads", "1"])
                .status()
                .unwrap();
            assert!(status.success(), "{cmd} run failed");
            dirs.push(out);
        }
        let mut names: Vec<String> = std::fs::read_dir(&dirs[0])
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
            .filter(|n| n.ends_with(".csv"))
            .collect();
        names.sort();
        assert!(!names.is_empty());
        for name in &names {
            let a = std::fs::read(dirs[0].join(name)).unwrap();
            let b = std::fs::read(dirs[1].join(name)).unwrap();
            if a != b {
                identical = false;
                detail = format!("{cmd}/{name} differs between runs");
            }
        }
        if detail.is_empty() {
            detail = format!("all CSV files bitwise identical (last: {cmd}, {} files)", names.len());
        }
    }
    report(10, "bitwise reproducibility at --threads 1", identical, &detail);
}
