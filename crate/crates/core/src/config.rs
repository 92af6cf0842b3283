//! JSON run configuration: schema, validation, and assembly into a problem
//! bundle. Field-valued entries are closed-form expressions over (x[, y])
//! evaluated on the grid at load time, so configs stay self-contained.

use crate::error::{Error, Result};
use crate::expr::FieldExpr;
use crate::grid::{norm_h1, FieldSeries, GridSpec, ScalarField, TimeGrid};
use crate::objective::{ControlField, ObjectiveSpec};
use crate::optimizer::PgOptions;
use crate::potentials::{F2Spec, PotentialSpec};
use crate::problem::Problem;
use crate::quench::QuenchSchedule;
use crate::state::{InitialData, ModelParams, SolverOptions};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dimension: usize,
    pub extents: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha: f64,
    pub beta: f64,
    pub theta_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// "logarithmic" or "obstacle".
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub f2_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub phi0: String,
    pub w0: String,
    pub v0: String,
}

fn default_zero_expr() -> String {
    "0".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    #[serde(default = "default_zero_expr")]
    pub initial: String,
    pub lower: String,
    pub upper: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsConfig {
    pub phi_q: String,
    pub w_q: String,
    pub wp_q: String,
    pub phi_omega: String,
    pub w_omega: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wp_omega: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub ell: f64,
    pub targets: TargetsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub max_halvings: usize,
    pub pdas_penalty: f64,
    pub pdas_max_iter: usize,
    pub linear_residual_tol: f64,
    pub contact_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            newton_tol: o.newton_tol,
            newton_max_iter: o.newton_max_iter,
            max_halvings: o.max_halvings,
            pdas_penalty: o.pdas_penalty,
            pdas_max_iter: o.pdas_max_iter,
            linear_residual_tol: o.linear_residual_tol,
            contact_tol: o.contact_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub s0: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        let o = PgOptions::default();
        OptimizeConfig {
            s0: o.s0,
            armijo_c: o.armijo_c,
            shrink: o.shrink,
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchConfig {
    pub gammas: Vec<f64>,
    #[serde(default = "default_true")]
    pub warm_start: bool,
}

fn default_true() -> bool {
    true
}

impl Default for QuenchConfig {
    fn default() -> Self {
        let s = QuenchSchedule::default_schedule();
        QuenchConfig {
            gammas: s.gammas,
            warm_start: s.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradientCheckConfig {
    pub directions: usize,
    pub h_values: Vec<f64>,
    pub seed: u64,
    pub min_order: f64,
    pub negative_control_max_order: f64,
}

impl Default for GradientCheckConfig {
    fn default() -> Self {
        GradientCheckConfig {
            directions: 5,
            h_values: vec![1e-2, 1e-3, 1e-4, 1e-5],
            seed: 20260808,
            min_order: 1.9,
            negative_control_max_order: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub model: ModelConfig,
    pub potential: PotentialConfig,
    pub initial: InitialConfig,
    pub control: ControlConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub optimize: OptimizeConfig,
    #[serde(default)]
    pub quench: QuenchConfig,
    #[serde(default)]
    pub gradient_check: GradientCheckConfig,
}

/// A fully validated run: the raw config (for manifests) plus the assembled
/// problem bundle and per-command options.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub config: RunConfig,
    pub problem: Problem,
    pub schedule: QuenchSchedule,
    pub pg_opts: PgOptions,
    pub gradcheck: GradientCheckConfig,
}

fn eval_spatial(expr_src: &str, grid: &GridSpec, what: &str) -> Result<ScalarField> {
    let expr = FieldExpr::parse(expr_src)
        .map_err(|e| Error::Config(format!("in field '{what}': {e}")))?;
    if grid.dimension() == 1 && expr.uses_y() {
        return Err(Error::Config(format!(
            "field '{what}' uses the coordinate y on a 1D grid"
        )));
    }
    let f = ScalarField::from_fn(grid, |x, y| expr.eval(x, y));
    if !f.all_finite() {
        return Err(Error::Config(format!(
            "field '{what}' evaluates to non-finite values on the grid"
        )));
    }
    Ok(f)
}

fn replicate(f: &ScalarField, tg: &TimeGrid) -> FieldSeries {
    (0..tg.levels()).map(|_| f.clone()).collect()
}

pub fn build_objective(
    cfg: &ObjectiveConfig,
    grid: &GridSpec,
    tg: &TimeGrid,
) -> Result<ObjectiveSpec> {
    let phi_q = eval_spatial(&cfg.targets.phi_q, grid, "targets.phi_q")?;
    let w_q = eval_spatial(&cfg.targets.w_q, grid, "targets.w_q")?;
    let wp_q = eval_spatial(&cfg.targets.wp_q, grid, "targets.wp_q")?;
    let phi_omega = eval_spatial(&cfg.targets.phi_omega, grid, "targets.phi_omega")?;
    let w_omega = eval_spatial(&cfg.targets.w_omega, grid, "targets.w_omega")?;
    let wp_omega = match (&cfg.targets.wp_omega, cfg.k6 > 0.0) {
        (Some(src), _) => {
            let f = eval_spatial(src, grid, "targets.wp_omega")?;
            if cfg.k6 > 0.0 {
                let h1 = norm_h1(&f, grid)?;
                if !h1.is_finite() {
                    return Err(Error::Config(
                        "targets.wp_omega must have a finite H1 norm when k6 > 0".into(),
                    ));
                }
            }
            f
        }
        (None, false) => ScalarField::zeros(grid),
        (None, true) => {
            return Err(Error::Config(
                "k6 > 0 requires the terminal temperature target targets.wp_omega".into(),
            ))
        }
    };
    ObjectiveSpec::new(
        [cfg.k1, cfg.k2, cfg.k3, cfg.k4, cfg.k5, cfg.k6],
        cfg.ell,
        replicate(&phi_q, tg),
        replicate(&w_q, tg),
        replicate(&wp_q, tg),
        phi_omega,
        w_omega,
        wp_omega,
    )
}

/// A neutral objective for commands that only need the forward dynamics.
fn placeholder_objective(grid: &GridSpec, tg: &TimeGrid) -> ObjectiveSpec {
    ObjectiveSpec::new(
        [0.0; 6],
        1.0,
        replicate(&ScalarField::zeros(grid), tg),
        replicate(&ScalarField::zeros(grid), tg),
        replicate(&ScalarField::zeros(grid), tg),
        ScalarField::zeros(grid),
        ScalarField::zeros(grid),
        ScalarField::zeros(grid),
    )
    .expect("placeholder objective is valid")
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)?;
    Ok(cfg)
}

pub fn assemble(config: RunConfig) -> Result<LoadedRun> {
    if config.grid.dimension != config.grid.extents.len()
        || config.grid.dimension != config.grid.cells.len()
    {
        return Err(Error::Config(format!(
            "grid.dimension = {} does not match extents ({}) and cells ({})",
            config.grid.dimension,
            config.grid.extents.len(),
            config.grid.cells.len()
        )));
    }
    let grid = GridSpec::new(config.grid.extents.clone(), config.grid.cells.clone())?;
    let tg = TimeGrid::new(config.time.horizon, config.time.steps)?;
    let mp = ModelParams::new(config.model.alpha, config.model.beta, config.model.theta_c)?;

    let f2 = F2Spec::quadratic(config.potential.f2_coefficient)?;
    let potential = match config.potential.kind.as_str() {
        "logarithmic" => {
            let gamma = config.potential.gamma.ok_or_else(|| {
                Error::Config("potential.kind = \"logarithmic\" requires potential.gamma".into())
            })?;
            PotentialSpec::logarithmic(gamma, f2)?
        }
        "obstacle" => PotentialSpec::obstacle(f2),
        other => {
            return Err(Error::Config(format!(
                "potential.kind must be \"logarithmic\" or \"obstacle\", got \"{other}\""
            )))
        }
    };

    let phi0 = eval_spatial(&config.initial.phi0, &grid, "initial.phi0")?;
    let w0 = eval_spatial(&config.initial.w0, &grid, "initial.w0")?;
    let v0 = eval_spatial(&config.initial.v0, &grid, "initial.v0")?;
    let init = InitialData::new(phi0, w0, v0)?;

    let lower = eval_spatial(&config.control.lower, &grid, "control.lower")?;
    let upper = eval_spatial(&config.control.upper, &grid, "control.upper")?;
    let u0 = eval_spatial(&config.control.initial, &grid, "control.initial")?;
    let control_template = ControlField::new(
        replicate(&u0, &tg),
        replicate(&lower, &tg),
        replicate(&upper, &tg),
    )?;

    let objective = match &config.objective {
        Some(cfg) => build_objective(cfg, &grid, &tg)?,
        None => placeholder_objective(&grid, &tg),
    };

    let opts = SolverOptions {
        newton_tol: config.solver.newton_tol,
        newton_max_iter: config.solver.newton_max_iter,
        max_halvings: config.solver.max_halvings,
        interior_margin: SolverOptions::default().interior_margin,
        pdas_penalty: config.solver.pdas_penalty,
        pdas_max_iter: config.solver.pdas_max_iter,
        linear_residual_tol: config.solver.linear_residual_tol,
        contact_tol: config.solver.contact_tol,
    };

    let schedule = QuenchSchedule::new(config.quench.gammas.clone(), config.quench.warm_start)?;
    let pg_opts = PgOptions {
        s0: config.optimize.s0,
        armijo_c: config.optimize.armijo_c,
        shrink: config.optimize.shrink,
        tol: config.optimize.tol,
        max_iter: config.optimize.max_iter,
        min_step: PgOptions::default().min_step,
    };
    if config.gradient_check.directions == 0 || config.gradient_check.h_values.is_empty() {
        return Err(Error::Config(
            "gradient_check needs at least one direction and one h value".into(),
        ));
    }

    let problem = Problem {
        grid,
        tg,
        mp,
        potential,
        objective,
        init,
        control_template,
        opts,
    };

    Ok(LoadedRun {
        gradcheck: config.gradient_check.clone(),
        schedule,
        pg_opts,
        problem,
        config,
    })
}

/// Read, parse, validate, and assemble a run configuration.
pub fn load_config(path: &Path) -> Result<LoadedRun> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    let cfg = parse_config(&text)?;
    assemble(cfg)
}
