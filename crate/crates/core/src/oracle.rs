//! Independent correctness oracles: finite-difference directional derivatives,
//! Taylor-order fits, and an adaptive scalar ODE reference. These touch only
//! cost evaluations and never the adjoint path they are meant to check.

use crate::error::{Error, Result};
use crate::grid::{FieldSeries, GridSpec, ScalarField, TimeGrid};
use crate::objective::{inner_q, norm_q, ControlField};
use crate::problem::CostModel;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Central difference (J(u + h d) - J(u - h d)) / 2h of the reduced cost,
/// evaluated through two full state solves.
pub fn fd_directional_derivative(
    model: &dyn CostModel,
    u: &ControlField,
    direction: &FieldSeries,
    h: f64,
) -> Result<f64> {
    let shift = |sign: f64| -> Result<f64> {
        let vals: FieldSeries = u
            .values
            .iter()
            .zip(direction)
            .map(|(uf, df)| uf.axpy(sign * h, df))
            .collect();
        let trial = u.with_values_unchecked(vals);
        model.cost(&trial)
    };
    Ok((shift(1.0)? - shift(-1.0)?) / (2.0 * h))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TaylorReport {
    pub h_values: Vec<f64>,
    pub remainders: Vec<f64>,
    /// Least-squares slope of log remainder against log h.
    pub order: f64,
    pub gradient_pairing: f64,
}

/// First-order Taylor remainder |J(u + h d) - J(u) - h <g, d>| over a range of
/// h, with the gradient from the model under test. The observed order is the
/// least-squares slope in log-log coordinates.
pub fn taylor_order(
    model: &dyn CostModel,
    u: &ControlField,
    direction: &FieldSeries,
    h_values: &[f64],
) -> Result<TaylorReport> {
    let problem = model.problem();
    let dnorm = norm_q(direction, &problem.grid, &problem.tg)?;
    if dnorm == 0.0 {
        return Err(Error::Config(
            "taylor test direction must be nonzero".into(),
        ));
    }
    let (j0, grad) = model.cost_and_grad(u)?;
    let pairing = inner_q(&grad, direction, &problem.grid, &problem.tg)?;
    taylor_order_with_pairing(model, u, direction, h_values, j0, pairing)
}

/// Same fit with an externally supplied gradient pairing; lets negative
/// controls perturb the gradient without touching the model.
pub fn taylor_order_with_pairing(
    model: &dyn CostModel,
    u: &ControlField,
    direction: &FieldSeries,
    h_values: &[f64],
    j0: f64,
    pairing: f64,
) -> Result<TaylorReport> {
    let mut remainders = Vec::with_capacity(h_values.len());
    for &h in h_values {
        let vals: FieldSeries = u
            .values
            .iter()
            .zip(direction)
            .map(|(uf, df)| uf.axpy(h, df))
            .collect();
        let trial = u.with_values_unchecked(vals);
        let j = model.cost(&trial)?;
        remainders.push((j - j0 - h * pairing).abs());
    }
    let order = log_log_slope(h_values, &remainders);
    Ok(TaylorReport {
        h_values: h_values.to_vec(),
        remainders,
        order,
        gradient_pairing: pairing,
    })
}

/// Negative control for the Taylor test: the gradient is corrupted by one
/// percent of its norm along the probe direction, which any sound
/// second-order fit must detect as a first-order remainder.
pub fn taylor_negative_control(
    model: &dyn CostModel,
    u: &ControlField,
    direction: &FieldSeries,
    h_values: &[f64],
) -> Result<TaylorReport> {
    let problem = model.problem();
    let (j0, grad) = model.cost_and_grad(u)?;
    let gnorm = norm_q(&grad, &problem.grid, &problem.tg)?;
    let dnorm = norm_q(direction, &problem.grid, &problem.tg)?;
    let pairing = inner_q(&grad, direction, &problem.grid, &problem.tg)?
        + 0.01 * gnorm * dnorm;
    taylor_order_with_pairing(model, u, direction, h_values, j0, pairing)
}

/// Least-squares slope of log y against log x, ignoring zero entries.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(&a, &b)| a > 0.0 && b > 0.0)
        .map(|(&a, &b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// A reproducible random direction of unit space-time norm. Level 0 is zeroed:
/// it carries no quadrature weight, so mass there would be invisible to the
/// cost and pollute the pairing.
pub fn random_direction(grid: &GridSpec, tg: &TimeGrid, seed: u64) -> Result<FieldSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series: FieldSeries = (0..tg.levels())
        .map(|k| {
            if k == 0 {
                ScalarField::zeros(grid)
            } else {
                ScalarField::from_values(
                    (0..grid.node_count())
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect(),
                )
            }
        })
        .collect();
    let nrm = norm_q(&series, grid, tg)?;
    for f in series.iter_mut() {
        for v in f.values.iter_mut() {
            *v /= nrm;
        }
    }
    Ok(series)
}

/// Adaptive Cash-Karp integration of the spatially constant barrier ODE
/// phi' = -gamma ln((1+phi)/(1-phi)), sampled at the node times of `tg`.
pub fn scalar_ode_reference(phi0: f64, gamma: f64, tg: &TimeGrid) -> Result<Vec<f64>> {
    if !(phi0 > -1.0 && phi0 < 1.0) {
        return Err(Error::Domain(format!(
            "scalar reference needs |phi0| < 1, got {phi0}"
        )));
    }
    let rhs = |phi: f64| -> f64 { -gamma * ((1.0 + phi) / (1.0 - phi)).ln() };
    let local_tol = 1e-12;

    let mut out = Vec::with_capacity(tg.levels());
    out.push(phi0);
    let mut t = 0.0;
    let mut y = phi0;
    let mut h = tg.dt().min(1e-3);
    for k in 1..tg.levels() {
        let target = tg.node_time(k);
        while t < target {
            let mut step = h.min(target - t);
            loop {
                let (y5, err) = cash_karp_step(&rhs, y, step);
                let tol = local_tol * (1.0 + y.abs());
                if err <= tol || step < 1e-15 {
                    t += step;
                    y = y5.clamp(-1.0 + 1e-16, 1.0 - 1e-16);
                    let grow = if err > 0.0 {
                        0.9 * (tol / err).powf(0.2)
                    } else {
                        2.0
                    };
                    h = (step * grow.clamp(0.2, 2.0)).min(tg.dt());
                    break;
                }
                step *= 0.5 * (tol / err).powf(0.25).clamp(0.1, 0.7);
            }
        }
        out.push(y);
    }
    Ok(out)
}

fn cash_karp_step(rhs: &dyn Fn(f64) -> f64, y: f64, h: f64) -> (f64, f64) {
    let k1 = rhs(y);
    let k2 = rhs(y + h * (0.2 * k1));
    let k3 = rhs(y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
    let k4 = rhs(y + h * (0.3 * k1 - 0.9 * k2 + 1.2 * k3));
    let k5 = rhs(y + h * (-11.0 / 54.0 * k1 + 2.5 * k2 - 70.0 / 27.0 * k3 + 35.0 / 27.0 * k4));
    let k6 = rhs(y
        + h * (1631.0 / 55296.0 * k1
            + 175.0 / 512.0 * k2
            + 575.0 / 13824.0 * k3
            + 44275.0 / 110592.0 * k4
            + 253.0 / 4096.0 * k5));
    let y5 = y
        + h * (37.0 / 378.0 * k1 + 250.0 / 621.0 * k3 + 125.0 / 594.0 * k4
            + 512.0 / 1771.0 * k6);
    let y4 = y
        + h * (2825.0 / 27648.0 * k1
            + 18575.0 / 48384.0 * k3
            + 13525.0 / 55296.0 * k4
            + 277.0 / 14336.0 * k5
            + 0.25 * k6);
    (y5, (y5 - y4).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit_recovers_powers() {
        let h = [1e-2, 1e-3, 1e-4];
        let y2: Vec<f64> = h.iter().map(|v| 3.0 * v * v).collect();
        assert!((log_log_slope(&h, &y2) - 2.0).abs() < 1e-12);
        let y1: Vec<f64> = h.iter().map(|v| 0.5 * v).collect();
        assert!((log_log_slope(&h, &y1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_reference_basics() {
        let tg = TimeGrid::new(1.0, 10).unwrap();
        let zeros = scalar_ode_reference(0.0, 0.1, &tg).unwrap();
        assert!(zeros.iter().all(|&v| v == 0.0));

        let up = scalar_ode_reference(0.5, 0.1, &tg).unwrap();
        let down = scalar_ode_reference(-0.5, 0.1, &tg).unwrap();
        for k in 0..tg.levels() {
            assert!((up[k] + down[k]).abs() < 1e-10, "odd symmetry at level {k}");
        }
        // strictly decreasing toward zero from a positive start
        for k in 1..tg.levels() {
            assert!(up[k] < up[k - 1]);
            assert!(up[k] > 0.0);
        }
        assert!(scalar_ode_reference(1.0, 0.1, &tg).is_err());
    }

    #[test]
    fn scalar_reference_self_convergence() {
        // halving the sampling grid must not change values beyond the local tol
        let tg_a = TimeGrid::new(0.5, 8).unwrap();
        let tg_b = TimeGrid::new(0.5, 16).unwrap();
        let a = scalar_ode_reference(0.7, 0.3, &tg_a).unwrap();
        let b = scalar_ode_reference(0.7, 0.3, &tg_b).unwrap();
        for k in 0..tg_a.levels() {
            assert!((a[k] - b[2 * k]).abs() < 1e-9);
        }
    }
}
