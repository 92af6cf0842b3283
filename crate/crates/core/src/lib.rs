//! Numerical toolkit for the optimal control of a nonconserved phase-field
//! system of Caginalp type with thermal memory.
//!
//! The state couples an Allen-Cahn phase equation, driven by either a
//! logarithmic barrier potential or the double obstacle potential, to a
//! hyperbolic internal-energy balance whose heat flux carries a thermal
//! memory term. The crate provides:
//!
//! - forward simulation with interchangeable phase-step strategies
//!   ([`stepper`]): a damped-Newton barrier solver and a primal-dual active
//!   set solver for the obstacle inclusion, selected by name at runtime;
//! - a backward adjoint sweep that is the exact transpose of the linearized
//!   forward scheme ([`adjoint`]), so reduced gradients pass Taylor tests at
//!   second order;
//! - projected gradient descent over box controls ([`optimizer`]);
//! - deep-quench continuation in the barrier parameter ([`quench`]);
//! - independent verification oracles ([`oracle`]) and a JSON/CSV run surface
//!   ([`config`], [`io`]).
//!
//! ```
//! use caginalp_core::adjoint::solve_adjoint;
//! use caginalp_core::grid::{GridSpec, ScalarField, TimeGrid};
//! use caginalp_core::objective::{reduced_gradient, ControlField, ObjectiveSpec};
//! use caginalp_core::potentials::{F2Spec, PotentialSpec};
//! use caginalp_core::state::{solve_state, InitialData, ModelParams, SolverOptions};
//!
//! let grid = GridSpec::line(1.0, 17)?;
//! let tg = TimeGrid::new(0.1, 20)?;
//! let mp = ModelParams::new(1.0, 1.0, 1.0)?;
//! let potential = PotentialSpec::logarithmic(0.1, F2Spec::quadratic(0.25)?)?;
//!
//! let init = InitialData::new(
//!     ScalarField::from_fn(&grid, |x, _| 0.3 * (std::f64::consts::PI * x).cos()),
//!     ScalarField::zeros(&grid),
//!     ScalarField::zeros(&grid),
//! )?;
//! let series = |c: f64| vec![ScalarField::constant(&grid, c); tg.levels()];
//! let u = ControlField::new(series(0.2), series(-1.0), series(1.0))?;
//! let objective = ObjectiveSpec::new(
//!     [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
//!     0.5,
//!     series(0.0), series(0.0), series(0.0),
//!     ScalarField::zeros(&grid), ScalarField::zeros(&grid), ScalarField::zeros(&grid),
//! )?;
//!
//! let opts = SolverOptions::default();
//! let traj = solve_state(&u, &init, &potential, &mp, &tg, &grid, &opts)?;
//! assert!(traj.max_abs_phi() < 1.0);
//!
//! let adj = solve_adjoint(&traj, &potential, &objective, &mp, &tg, &grid, &opts)?;
//! let gradient = reduced_gradient(&adj, &u, &objective, None)?;
//! assert_eq!(gradient.len(), tg.levels());
//! # Ok::<(), caginalp_core::Error>(())
//! ```

pub mod adjoint;
pub mod banded;
pub mod config;
pub mod error;
pub mod expr;
pub mod grid;
pub mod io;
pub mod objective;
pub mod optimizer;
pub mod oracle;
pub mod potentials;
pub mod problem;
pub mod quench;
pub mod state;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{FieldSeries, GridSpec, ScalarField, TimeGrid};
pub use objective::{ControlField, ObjectiveSpec};
pub use potentials::{F2Spec, PotentialKind, PotentialSpec};
pub use problem::Problem;
pub use state::{InitialData, ModelParams, SolverOptions, StateTrajectory};
