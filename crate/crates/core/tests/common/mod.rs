//! Shared desk-scale fixtures for the integration tests.

use caginalp_core::grid::{FieldSeries, GridSpec, ScalarField, TimeGrid};
use caginalp_core::objective::{ControlField, ObjectiveSpec};
use caginalp_core::potentials::{F2Spec, PotentialSpec};
use caginalp_core::problem::Problem;
use caginalp_core::state::{InitialData, ModelParams, SolverOptions};

pub fn constant_series(grid: &GridSpec, tg: &TimeGrid, c: f64) -> FieldSeries {
    (0..tg.levels()).map(|_| ScalarField::constant(grid, c)).collect()
}

pub fn spatial_series(grid: &GridSpec, tg: &TimeGrid, f: impl Fn(f64, f64) -> f64) -> FieldSeries {
    let field = ScalarField::from_fn(grid, f);
    (0..tg.levels()).map(|_| field.clone()).collect()
}

pub fn box_control(grid: &GridSpec, tg: &TimeGrid, value: f64, lo: f64, hi: f64) -> ControlField {
    ControlField::new(
        constant_series(grid, tg, value),
        constant_series(grid, tg, lo),
        constant_series(grid, tg, hi),
    )
    .unwrap()
}

pub struct FixtureOpts {
    pub cells: usize,
    pub steps: usize,
    pub horizon: f64,
    pub gamma: f64,
    pub k_f2: f64,
    pub weights: [f64; 6],
    pub ell: f64,
    pub phi0_amp: f64,
}

impl Default for FixtureOpts {
    fn default() -> Self {
        FixtureOpts {
            cells: 33,
            steps: 100,
            horizon: 0.25,
            gamma: 0.1,
            k_f2: 0.25,
            weights: [1.0, 0.8, 0.6, 0.5, 0.4, 0.3],
            ell: 0.5,
            phi0_amp: 0.4,
        }
    }
}

/// A mildly coupled 1D tracking problem whose phase stays well inside (-1, 1).
pub fn tracking_problem(o: &FixtureOpts) -> Problem {
    let grid = GridSpec::line(1.0, o.cells).unwrap();
    let tg = TimeGrid::new(o.horizon, o.steps).unwrap();
    let mp = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let f2 = F2Spec::quadratic(o.k_f2).unwrap();
    let potential = PotentialSpec::logarithmic(o.gamma, f2).unwrap();
    let pi = std::f64::consts::PI;

    let phi0 = ScalarField::from_fn(&grid, |x, _| o.phi0_amp * (pi * x).cos());
    let w0 = ScalarField::from_fn(&grid, |x, _| 0.1 * (pi * x).cos());
    let v0 = ScalarField::from_fn(&grid, |x, _| 0.2 * (2.0 * pi * x).cos());
    let init = InitialData::new(phi0, w0, v0).unwrap();

    let objective = ObjectiveSpec::new(
        o.weights,
        o.ell,
        spatial_series(&grid, &tg, |x, _| 0.2 * (pi * x).cos() - 0.1),
        spatial_series(&grid, &tg, |x, _| 0.3 * x),
        spatial_series(&grid, &tg, |x, _| 0.1 - 0.2 * x),
        ScalarField::from_fn(&grid, |x, _| 0.15 * (pi * x).cos()),
        ScalarField::from_fn(&grid, |x, _| 0.2 * x * x),
        ScalarField::from_fn(&grid, |x, _| 0.05 * (pi * x).cos()),
    )
    .unwrap();

    let control_template = box_control(&grid, &tg, 0.0, -1.0, 1.0);

    // interior-regime fixtures drive the Newton residual to near machine
    // precision so gradient checks isolate adjoint errors
    let opts = SolverOptions {
        newton_tol: 1e-12,
        ..SolverOptions::default()
    };

    Problem {
        grid,
        tg,
        mp,
        potential,
        objective,
        init,
        control_template,
        opts,
    }
}

/// A reaction-dominated instance on a long domain: a flat phase plateau near
/// the upper obstacle with a concave drift strong enough to reach contact,
/// descending through a wide transition to interior values. The obstacle
/// solution develops a genuine contact set with multiplier up to about 0.6,
/// which keeps the barrier members solvable for gamma >= 3e-2.
#[allow(dead_code)]
pub fn plateau_problem() -> Problem {
    let grid = GridSpec::line(10.0, 64).unwrap();
    let tg = TimeGrid::new(0.3, 120).unwrap();
    let mp = ModelParams::new(1.0, 1.0, 1.0).unwrap();
    let f2 = F2Spec::quadratic(0.15).unwrap();
    let potential = PotentialSpec::logarithmic(0.1, f2).unwrap();
    let phi0 = ScalarField::from_fn(&grid, |x, _| {
        let s = ((x - 5.0) / 2.0).tanh();
        0.97 - 0.635 * (1.0 + s)
    });
    let init = InitialData::new(phi0, ScalarField::zeros(&grid), ScalarField::zeros(&grid)).unwrap();
    let objective = ObjectiveSpec::new(
        [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        0.5,
        constant_series(&grid, &tg, 0.0),
        constant_series(&grid, &tg, 0.0),
        constant_series(&grid, &tg, 0.0),
        ScalarField::zeros(&grid),
        ScalarField::zeros(&grid),
        ScalarField::zeros(&grid),
    )
    .unwrap();
    let control_template = box_control(&grid, &tg, 0.0, -1.0, 1.0);
    Problem {
        grid,
        tg,
        mp,
        potential,
        objective,
        init,
        control_template,
        opts: SolverOptions::default(),
    }
}

/// An admissible, spatially and temporally varying control for gradient work.
pub fn wavy_control(problem: &Problem, amplitude: f64) -> ControlField {
    let grid = &problem.grid;
    let tg = &problem.tg;
    let pi = std::f64::consts::PI;
    let values: FieldSeries = (0..tg.levels())
        .map(|k| {
            let t = tg.node_time(k);
            ScalarField::from_fn(grid, |x, _| {
                amplitude * ((pi * x).cos() * (2.0 * t).sin() + 0.3 * (2.0 * pi * x).cos())
            })
        })
        .collect();
    problem.control_template.projected(&values)
}
