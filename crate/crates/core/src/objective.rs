//! The tracking cost, its adapted variant, the admissible control set, and the
//! reduced gradient assembled from the adjoint.
//!
//! Space-time integrals use the lumped spatial quadrature and the
//! right-rectangle rule in time: levels 1..=N carry weight dt, level 0 carries
//! none. This is the convention under which the backward sweep is the exact
//! transpose of the forward linearization, so the reduced gradient of the
//! discrete cost is the nodewise field q + ell * u (plus the anchor term for
//! the adapted cost).

use crate::adjoint::AdjointTrajectory;
use crate::error::{Error, Result};
use crate::grid::{FieldSeries, GridSpec, ScalarField, TimeGrid};
use crate::state::StateTrajectory;

/// Space-time control with box bounds.
#[derive(Debug, Clone)]
pub struct ControlField {
    pub values: FieldSeries,
    pub lower: FieldSeries,
    pub upper: FieldSeries,
}

impl ControlField {
    /// Validates the box and membership; use [`ControlField::projected`] to
    /// force an arbitrary field into the box instead.
    pub fn new(values: FieldSeries, lower: FieldSeries, upper: FieldSeries) -> Result<Self> {
        if values.len() != lower.len() || values.len() != upper.len() {
            return Err(Error::GridMismatch {
                context: "ControlField bounds",
                expected: values.len(),
                got: lower.len().min(upper.len()),
            });
        }
        for k in 0..values.len() {
            for i in 0..values[k].len() {
                let (lo, hi) = (lower[k].values[i], upper[k].values[i]);
                if lo > hi {
                    return Err(Error::Config(format!(
                        "control bounds must satisfy lower <= upper everywhere; violated at level {k}, node {i}: {lo} > {hi}"
                    )));
                }
                let u = values[k].values[i];
                if u < lo || u > hi {
                    return Err(Error::Config(format!(
                        "control leaves its box at level {k}, node {i}: {u} not in [{lo}, {hi}]"
                    )));
                }
            }
        }
        Ok(ControlField { values, lower, upper })
    }

    /// Clamp `raw` into the box carried by `self`.
    pub fn projected(&self, raw: &FieldSeries) -> ControlField {
        let values = raw
            .iter()
            .enumerate()
            .map(|(k, f)| {
                ScalarField::from_values(
                    f.values
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| v.clamp(self.lower[k].values[i], self.upper[k].values[i]))
                        .collect(),
                )
            })
            .collect();
        ControlField {
            values,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }

    pub fn with_values(&self, values: FieldSeries) -> Result<ControlField> {
        ControlField::new(values, self.lower.clone(), self.upper.clone())
    }

    /// Shape-preserving variant without the box check, for finite-difference
    /// probes: the cost is defined off the admissible set, and a probe around
    /// a control sitting on a bound must be allowed to step outside.
    pub fn with_values_unchecked(&self, values: FieldSeries) -> ControlField {
        ControlField {
            values,
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }
}

/// Cost weights and tracking targets. The six k-weights and ell are
/// nonnegative and not all zero; targets live on the same grids as the state.
#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub k5: f64,
    pub k6: f64,
    pub ell: f64,
    pub phi_q: FieldSeries,
    pub w_q: FieldSeries,
    pub wp_q: FieldSeries,
    pub phi_omega: ScalarField,
    pub w_omega: ScalarField,
    pub wp_omega: ScalarField,
}

impl ObjectiveSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        weights: [f64; 6],
        ell: f64,
        phi_q: FieldSeries,
        w_q: FieldSeries,
        wp_q: FieldSeries,
        phi_omega: ScalarField,
        w_omega: ScalarField,
        wp_omega: ScalarField,
    ) -> Result<Self> {
        for (i, &k) in weights.iter().enumerate() {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(Error::Config(format!(
                    "cost weight k{} must be nonnegative and finite, got {k}",
                    i + 1
                )));
            }
        }
        if !(ell >= 0.0) || !ell.is_finite() {
            return Err(Error::Config(format!(
                "control weight ell must be nonnegative and finite, got {ell}"
            )));
        }
        if weights.iter().all(|&k| k == 0.0) && ell == 0.0 {
            return Err(Error::Config(
                "cost weights k1..k6 and ell must not all be zero".into(),
            ));
        }
        Ok(ObjectiveSpec {
            k1: weights[0],
            k2: weights[1],
            k3: weights[2],
            k4: weights[3],
            k5: weights[4],
            k6: weights[5],
            ell,
            phi_q,
            w_q,
            wp_q,
            phi_omega,
            w_omega,
            wp_omega,
        })
    }

    pub fn weights(&self) -> [f64; 6] {
        [self.k1, self.k2, self.k3, self.k4, self.k5, self.k6]
    }
}

/// Discrete L2(Q) inner product: right-rectangle in time, lumped in space.
pub fn inner_q(a: &FieldSeries, b: &FieldSeries, grid: &GridSpec, tg: &TimeGrid) -> Result<f64> {
    if a.len() != tg.levels() || b.len() != tg.levels() {
        return Err(Error::GridMismatch {
            context: "inner_q",
            expected: tg.levels(),
            got: a.len().min(b.len()),
        });
    }
    let dt = tg.dt();
    let mut acc = 0.0;
    for k in 1..a.len() {
        let mut level = 0.0;
        for i in 0..a[k].len() {
            level += grid.weight(i) * a[k].values[i] * b[k].values[i];
        }
        acc += dt * level;
    }
    Ok(acc)
}

pub fn norm_q(a: &FieldSeries, grid: &GridSpec, tg: &TimeGrid) -> Result<f64> {
    Ok(inner_q(a, a, grid, tg)?.sqrt())
}

pub fn dist_q(a: &FieldSeries, b: &FieldSeries, grid: &GridSpec, tg: &TimeGrid) -> Result<f64> {
    let diff: FieldSeries = a.iter().zip(b).map(|(x, y)| x.sub(y)).collect();
    norm_q(&diff, grid, tg)
}

fn l2_sq(a: &ScalarField, b: &ScalarField, grid: &GridSpec) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a.values[i] - b.values[i];
        acc += grid.weight(i) * d * d;
    }
    acc
}

/// The tracking cost: space-time terms weighted k1/2, k3/2, k5/2 and ell/2,
/// terminal terms weighted k2/2, k4/2, k6/2.
pub fn evaluate_cost(
    traj: &StateTrajectory,
    u: &ControlField,
    spec: &ObjectiveSpec,
    grid: &GridSpec,
    tg: &TimeGrid,
) -> Result<f64> {
    let levels = tg.levels();
    if traj.levels() != levels || u.values.len() != levels {
        return Err(Error::GridMismatch {
            context: "evaluate_cost",
            expected: levels,
            got: traj.levels().min(u.values.len()),
        });
    }
    let dt = tg.dt();
    let mut acc = 0.0;
    let zero = ScalarField::zeros(grid);
    for k in 1..levels {
        let mut level = 0.0;
        level += 0.5 * spec.k1 * l2_sq(&traj.phi[k], &spec.phi_q[k], grid);
        level += 0.5 * spec.k3 * l2_sq(&traj.w[k], &spec.w_q[k], grid);
        level += 0.5 * spec.k5 * l2_sq(&traj.v[k], &spec.wp_q[k], grid);
        level += 0.5 * spec.ell * l2_sq(&u.values[k], &zero, grid);
        acc += dt * level;
    }
    let last = levels - 1;
    acc += 0.5 * spec.k2 * l2_sq(&traj.phi[last], &spec.phi_omega, grid);
    acc += 0.5 * spec.k4 * l2_sq(&traj.w[last], &spec.w_omega, grid);
    acc += 0.5 * spec.k6 * l2_sq(&traj.v[last], &spec.wp_omega, grid);
    Ok(acc)
}

/// The adapted cost: the tracking cost plus half the squared L2(Q) distance to
/// the anchor control.
pub fn evaluate_adapted_cost(
    traj: &StateTrajectory,
    u: &ControlField,
    spec: &ObjectiveSpec,
    u_bar: &ControlField,
    grid: &GridSpec,
    tg: &TimeGrid,
) -> Result<f64> {
    let base = evaluate_cost(traj, u, spec, grid, tg)?;
    let d = dist_q(&u.values, &u_bar.values, grid, tg)?;
    Ok(base + 0.5 * d * d)
}

/// Nodewise reduced gradient of the (adapted) cost: q + ell u (+ (u - u_bar)).
/// The level-0 slice carries no quadrature weight; it is reported for
/// completeness but never influences any norm or update.
pub fn reduced_gradient(
    adj: &AdjointTrajectory,
    u: &ControlField,
    spec: &ObjectiveSpec,
    adapted_to: Option<&ControlField>,
) -> Result<FieldSeries> {
    if adj.q.len() != u.values.len() {
        return Err(Error::GridMismatch {
            context: "reduced_gradient",
            expected: u.values.len(),
            got: adj.q.len(),
        });
    }
    let mut out = Vec::with_capacity(u.values.len());
    for k in 0..u.values.len() {
        let mut g = Vec::with_capacity(u.values[k].len());
        for i in 0..u.values[k].len() {
            let mut v = adj.q[k].values[i] + spec.ell * u.values[k].values[i];
            if let Some(anchor) = adapted_to {
                v += u.values[k].values[i] - anchor.values[k].values[i];
            }
            g.push(v);
        }
        out.push(ScalarField::from_values(g));
    }
    Ok(out)
}
