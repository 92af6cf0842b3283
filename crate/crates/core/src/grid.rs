//! Tensor grids on an interval or rectangle, homogeneous-Neumann Laplacian,
//! trapezoid-weighted inner products, and the two time-convolution operators.
//!
//! All spatial operators use mirror ghost nodes at the boundary so that the
//! Laplacian annihilates constants and is self-adjoint with respect to the
//! lumped (trapezoid) inner product. Both convolution products use the
//! left-rectangle rule aligned with the implicit Euler stepping.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Spatial grid: vertex-centered nodes on `[0, L]` (1D) or `[0, Lx] x [0, Ly]` (2D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    extents: Vec<f64>,
    cells: Vec<usize>,
}

impl GridSpec {
    /// A 1D grid with `cells` nodes on `[0, extent]`.
    pub fn line(extent: f64, cells: usize) -> Result<Self> {
        Self::new(vec![extent], vec![cells])
    }

    /// A 2D tensor grid with `cells[i]` nodes per axis.
    pub fn rectangle(extents: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        Self::new(extents.to_vec(), cells.to_vec())
    }

    pub fn new(extents: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if extents.len() != cells.len() || extents.is_empty() || extents.len() > 2 {
            return Err(Error::Config(format!(
                "grid dimension must be 1 or 2, got {} extents and {} cell counts",
                extents.len(),
                cells.len()
            )));
        }
        for (axis, (&length, &n)) in extents.iter().zip(&cells).enumerate() {
            if !(length > 0.0) || !length.is_finite() {
                return Err(Error::Config(format!(
                    "grid extent along axis {axis} must be positive and finite, got {length}"
                )));
            }
            if n < 3 {
                return Err(Error::Config(format!(
                    "grid needs at least 3 nodes per axis, got {n} along axis {axis}"
                )));
            }
        }
        Ok(GridSpec { extents, cells })
    }

    pub fn dimension(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Node spacing along `axis`: extent / (cells - 1), exactly.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / (self.cells[axis] - 1) as f64
    }

    /// Total number of nodes.
    pub fn node_count(&self) -> usize {
        self.cells.iter().product()
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Row-major node coordinates (x fastest). The second coordinate is 0 in 1D.
    pub fn node_coords(&self, index: usize) -> (f64, f64) {
        match self.dimension() {
            1 => (index as f64 * self.spacing(0), 0.0),
            _ => {
                let nx = self.cells[0];
                let ix = index % nx;
                let iy = index / nx;
                (ix as f64 * self.spacing(0), iy as f64 * self.spacing(1))
            }
        }
    }

    /// Lumped trapezoid quadrature weight of node `index`
    /// (half weight per boundary face the node touches).
    pub fn weight(&self, index: usize) -> f64 {
        match self.dimension() {
            1 => {
                let n = self.cells[0];
                let h = self.spacing(0);
                if index == 0 || index == n - 1 {
                    0.5 * h
                } else {
                    h
                }
            }
            _ => {
                let (nx, ny) = (self.cells[0], self.cells[1]);
                let (hx, hy) = (self.spacing(0), self.spacing(1));
                let ix = index % nx;
                let iy = index / nx;
                let wx = if ix == 0 || ix == nx - 1 { 0.5 * hx } else { hx };
                let wy = if iy == 0 || iy == ny - 1 { 0.5 * hy } else { hy };
                wx * wy
            }
        }
    }

    /// All quadrature weights in node order.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.node_count()).map(|i| self.weight(i)).collect()
    }
}

/// Uniform time grid with node times `t_k = k * dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!(
                "time horizon must be positive and finite, got {horizon}"
            )));
        }
        if steps < 1 {
            return Err(Error::Config("time grid needs at least 1 step".into()));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of time levels, `steps + 1`.
    pub fn levels(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node_time(&self, level: usize) -> f64 {
        level as f64 * self.dt()
    }
}

/// One scalar value per grid node, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        ScalarField {
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn constant(grid: &GridSpec, value: f64) -> Self {
        ScalarField {
            values: vec![value; grid.node_count()],
        }
    }

    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|i| {
                let (x, y) = grid.node_coords(i);
                f(x, y)
            })
            .collect();
        ScalarField { values }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// self + c * other, elementwise.
    pub fn axpy(&self, c: f64, other: &ScalarField) -> ScalarField {
        ScalarField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|a| c * a).collect(),
        }
    }
}

/// Time-indexed sequence of fields, one per time level.
pub type FieldSeries = Vec<ScalarField>;

fn check_len(field: &ScalarField, grid: &GridSpec, context: &'static str) -> Result<()> {
    if field.len() != grid.node_count() {
        return Err(Error::GridMismatch {
            context,
            expected: grid.node_count(),
            got: field.len(),
        });
    }
    Ok(())
}

/// Second-difference Laplacian with homogeneous-Neumann boundary realized by
/// mirror ghost nodes. Annihilates constants exactly and is self-adjoint with
/// respect to the lumped inner product.
pub fn laplacian_neumann(field: &ScalarField, grid: &GridSpec) -> Result<ScalarField> {
    check_len(field, grid, "laplacian_neumann")?;
    let mut out = vec![0.0; field.len()];
    match grid.dimension() {
        1 => {
            let n = grid.cells()[0];
            let inv_h2 = 1.0 / (grid.spacing(0) * grid.spacing(0));
            let v = &field.values;
            for i in 0..n {
                let left = if i == 0 { v[1] } else { v[i - 1] };
                let right = if i == n - 1 { v[n - 2] } else { v[i + 1] };
                out[i] = (left - 2.0 * v[i] + right) * inv_h2;
            }
        }
        _ => {
            let (nx, ny) = (grid.cells()[0], grid.cells()[1]);
            let inv_hx2 = 1.0 / (grid.spacing(0) * grid.spacing(0));
            let inv_hy2 = 1.0 / (grid.spacing(1) * grid.spacing(1));
            let v = &field.values;
            for iy in 0..ny {
                for ix in 0..nx {
                    let i = iy * nx + ix;
                    let left = if ix == 0 { v[i + 1] } else { v[i - 1] };
                    let right = if ix == nx - 1 { v[i - 1] } else { v[i + 1] };
                    let down = if iy == 0 { v[i + nx] } else { v[i - nx] };
                    let up = if iy == ny - 1 { v[i - nx] } else { v[i + nx] };
                    out[i] = (left - 2.0 * v[i] + right) * inv_hx2
                        + (down - 2.0 * v[i] + up) * inv_hy2;
                }
            }
        }
    }
    Ok(ScalarField::from_values(out))
}

/// Trapezoid-weighted L2 inner product.
pub fn inner_product_l2(a: &ScalarField, b: &ScalarField, grid: &GridSpec) -> Result<f64> {
    check_len(a, grid, "inner_product_l2")?;
    check_len(b, grid, "inner_product_l2")?;
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += grid.weight(i) * a.values[i] * b.values[i];
    }
    Ok(acc)
}

/// L2 norm under the lumped quadrature.
pub fn norm_l2(a: &ScalarField, grid: &GridSpec) -> Result<f64> {
    Ok(inner_product_l2(a, a, grid)?.sqrt())
}

/// Per-axis first derivative: central differences inside, one-sided at the boundary.
pub fn gradient_axis(a: &ScalarField, grid: &GridSpec, axis: usize) -> Result<ScalarField> {
    check_len(a, grid, "gradient_axis")?;
    let mut out = vec![0.0; a.len()];
    let v = &a.values;
    match grid.dimension() {
        1 => {
            let n = grid.cells()[0];
            let h = grid.spacing(0);
            out[0] = (v[1] - v[0]) / h;
            out[n - 1] = (v[n - 1] - v[n - 2]) / h;
            for i in 1..n - 1 {
                out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
            }
        }
        _ => {
            let (nx, ny) = (grid.cells()[0], grid.cells()[1]);
            let h = grid.spacing(axis);
            let stride = if axis == 0 { 1 } else { nx };
            let count = if axis == 0 { nx } else { ny };
            for iy in 0..ny {
                for ix in 0..nx {
                    let i = iy * nx + ix;
                    let pos = if axis == 0 { ix } else { iy };
                    out[i] = if pos == 0 {
                        (v[i + stride] - v[i]) / h
                    } else if pos == count - 1 {
                        (v[i] - v[i - stride]) / h
                    } else {
                        (v[i + stride] - v[i - stride]) / (2.0 * h)
                    };
                }
            }
        }
    }
    Ok(ScalarField::from_values(out))
}

/// Discrete H1 norm: sqrt(||a||^2 + ||grad a||^2).
pub fn norm_h1(a: &ScalarField, grid: &GridSpec) -> Result<f64> {
    let mut acc = inner_product_l2(a, a, grid)?;
    for axis in 0..grid.dimension() {
        let g = gradient_axis(a, grid, axis)?;
        acc += inner_product_l2(&g, &g, grid)?;
    }
    Ok(acc.sqrt())
}

fn check_series(series: &[ScalarField], tg: &TimeGrid, context: &'static str) -> Result<()> {
    if series.len() != tg.levels() {
        return Err(Error::GridMismatch {
            context,
            expected: tg.levels(),
            got: series.len(),
        });
    }
    Ok(())
}

/// Running integral from 0: cumulative left-rectangle quadrature, level 0 is zero.
pub fn convolve_forward(series: &[ScalarField], tg: &TimeGrid) -> Result<FieldSeries> {
    check_series(series, tg, "convolve_forward")?;
    let dt = tg.dt();
    let n = series[0].len();
    let mut out = Vec::with_capacity(series.len());
    let mut acc = vec![0.0; n];
    out.push(ScalarField::from_values(acc.clone()));
    for level in 1..series.len() {
        for (a, v) in acc.iter_mut().zip(&series[level - 1].values) {
            *a += dt * v;
        }
        out.push(ScalarField::from_values(acc.clone()));
    }
    Ok(out)
}

/// Tail integral to T: left-rectangle accumulation, level N is zero.
/// Matches `convolve_forward` so that (1*v)(t_k) + tail(t_k) = (1*v)(T) exactly.
pub fn convolve_backward(series: &[ScalarField], tg: &TimeGrid) -> Result<FieldSeries> {
    check_series(series, tg, "convolve_backward")?;
    let dt = tg.dt();
    let n = series[0].len();
    let levels = series.len();
    let mut out = vec![ScalarField::from_values(vec![0.0; n]); levels];
    let mut acc = vec![0.0; n];
    for level in (0..levels - 1).rev() {
        for (a, v) in acc.iter_mut().zip(&series[level].values) {
            *a += dt * v;
        }
        out[level] = ScalarField::from_values(acc.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid1() -> GridSpec {
        GridSpec::line(1.0, 65).unwrap()
    }

    fn random_field(grid: &GridSpec, rng: &mut ChaCha8Rng) -> ScalarField {
        ScalarField::from_values((0..grid.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        for grid in [grid1(), GridSpec::rectangle([1.0, 2.0], [9, 7]).unwrap()] {
            let f = ScalarField::constant(&grid, 3.7);
            let lap = laplacian_neumann(&f, &grid).unwrap();
            assert!(lap.max_abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_of_quadratic_is_exact_inside() {
        let grid = grid1();
        let f = ScalarField::from_fn(&grid, |x, _| x * x);
        let lap = laplacian_neumann(&f, &grid).unwrap();
        for i in 1..grid.node_count() - 1 {
            assert!((lap.values[i] - 2.0).abs() < 1e-9, "node {i}: {}", lap.values[i]);
        }
    }

    #[test]
    fn laplacian_2d_of_paraboloid() {
        let grid = GridSpec::rectangle([1.0, 1.0], [17, 17]).unwrap();
        let f = ScalarField::from_fn(&grid, |x, y| x * x + y * y);
        let lap = laplacian_neumann(&f, &grid).unwrap();
        let (nx, ny) = (grid.cells()[0], grid.cells()[1]);
        for iy in 1..ny - 1 {
            for ix in 1..nx - 1 {
                assert!((lap.values[iy * nx + ix] - 4.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn laplacian_is_self_adjoint_in_lumped_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for grid in [grid1(), GridSpec::rectangle([1.0, 1.5], [12, 9]).unwrap()] {
            for _ in 0..20 {
                let f = random_field(&grid, &mut rng);
                let g = random_field(&grid, &mut rng);
                let lf = laplacian_neumann(&f, &grid).unwrap();
                let lg = laplacian_neumann(&g, &grid).unwrap();
                let a = inner_product_l2(&lf, &g, &grid).unwrap();
                let b = inner_product_l2(&f, &lg, &grid).unwrap();
                let scale = a.abs().max(b.abs()).max(1e-30);
                assert!((a - b).abs() / scale < 1e-12, "green identity violated: {a} vs {b}");
            }
        }
    }

    #[test]
    fn inner_product_exactness() {
        let grid = GridSpec::line(1.0, 101).unwrap();
        let one = ScalarField::constant(&grid, 1.0);
        let x = ScalarField::from_fn(&grid, |x, _| x);
        assert!((inner_product_l2(&one, &one, &grid).unwrap() - 1.0).abs() < 1e-14);
        assert!((inner_product_l2(&one, &x, &grid).unwrap() - 0.5).abs() < 1e-14);
        assert!((inner_product_l2(&x, &x, &grid).unwrap() - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn quadrature_second_order_in_h() {
        // || exp(x) ||^2 = (e^2 - 1)/2 on [0,1]; trapezoid error O(h^2).
        let exact = (std::f64::consts::E * std::f64::consts::E - 1.0) / 2.0;
        let mut errors = Vec::new();
        for cells in [17usize, 33, 65] {
            let grid = GridSpec::line(1.0, cells).unwrap();
            let f = ScalarField::from_fn(&grid, |x, _| x.exp());
            let val = inner_product_l2(&f, &f, &grid).unwrap();
            errors.push((val - exact).abs());
        }
        let order1 = (errors[0] / errors[1]).log2();
        let order2 = (errors[1] / errors[2]).log2();
        assert!(order1 > 1.9 && order2 > 1.9, "orders {order1} {order2}");
    }

    #[test]
    fn h1_norm_values() {
        let grid = GridSpec::line(1.0, 257).unwrap();
        let one = ScalarField::constant(&grid, 1.0);
        assert!((norm_h1(&one, &grid).unwrap() - 1.0).abs() < 1e-12);
        let x = ScalarField::from_fn(&grid, |x, _| x);
        let expected = (1.0f64 / 3.0 + 1.0).sqrt();
        assert!((norm_h1(&x, &grid).unwrap() - expected).abs() < 1e-3);
        let zero = ScalarField::zeros(&grid);
        assert_eq!(norm_h1(&zero, &grid).unwrap(), 0.0);
    }

    #[test]
    fn convolution_forward_basics() {
        let grid = GridSpec::line(1.0, 5).unwrap();
        let tg = TimeGrid::new(1.0, 1000).unwrap();
        let ones: FieldSeries = (0..tg.levels()).map(|_| ScalarField::constant(&grid, 1.0)).collect();
        let cum = convolve_forward(&ones, &tg).unwrap();
        for k in 0..tg.levels() {
            assert!((cum[k].values[0] - tg.node_time(k)).abs() < 1e-12);
        }
        let ramp: FieldSeries = (0..tg.levels())
            .map(|k| ScalarField::constant(&grid, tg.node_time(k)))
            .collect();
        let cum = convolve_forward(&ramp, &tg).unwrap();
        assert!((cum[tg.steps()].values[0] - 0.5).abs() < 1e-3);
        let zeros: FieldSeries = (0..tg.levels()).map(|_| ScalarField::zeros(&grid)).collect();
        let cum = convolve_forward(&zeros, &tg).unwrap();
        assert!(cum.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn convolution_backward_and_telescoping() {
        let grid = GridSpec::line(1.0, 4).unwrap();
        let tg = TimeGrid::new(2.0, 400).unwrap();
        let ones: FieldSeries = (0..tg.levels()).map(|_| ScalarField::constant(&grid, 1.0)).collect();
        let tail = convolve_backward(&ones, &tg).unwrap();
        for k in 0..tg.levels() {
            assert!((tail[k].values[0] - (tg.horizon() - tg.node_time(k))).abs() < 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let series: FieldSeries = (0..tg.levels()).map(|_| random_field(&grid, &mut rng)).collect();
        let fwd = convolve_forward(&series, &tg).unwrap();
        let bwd = convolve_backward(&series, &tg).unwrap();
        let total = &fwd[tg.steps()];
        for k in 0..tg.levels() {
            for i in 0..grid.node_count() {
                let sum = fwd[k].values[i] + bwd[k].values[i];
                assert!((sum - total.values[i]).abs() < 1e-12);
            }
        }

        let ramp: FieldSeries = (0..tg.levels())
            .map(|k| ScalarField::constant(&grid, tg.node_time(k) / 2.0))
            .collect();
        let tg1 = TimeGrid::new(1.0, 1000).unwrap();
        let ramp1: FieldSeries = (0..tg1.levels())
            .map(|k| ScalarField::constant(&grid, tg1.node_time(k)))
            .collect();
        let tail1 = convolve_backward(&ramp1, &tg1).unwrap();
        assert!((tail1[0].values[0] - 0.5).abs() < 1e-3);
        drop(ramp);
    }

    #[test]
    fn forward_difference_quotient_recovers_input() {
        let grid = GridSpec::line(1.0, 8).unwrap();
        let tg = TimeGrid::new(1.0, 50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let series: FieldSeries = (0..tg.levels()).map(|_| random_field(&grid, &mut rng)).collect();
        let cum = convolve_forward(&series, &tg).unwrap();
        for k in 0..tg.steps() {
            for i in 0..grid.node_count() {
                let dq = (cum[k + 1].values[i] - cum[k].values[i]) / tg.dt();
                assert!((dq - series[k].values[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let grid = grid1();
        let short = ScalarField::from_values(vec![0.0; 4]);
        assert!(matches!(
            laplacian_neumann(&short, &grid),
            Err(Error::GridMismatch { .. })
        ));
        let ok = ScalarField::zeros(&grid);
        assert!(inner_product_l2(&ok, &short, &grid).is_err());
    }

    #[test]
    fn grid_invariants_enforced() {
        assert!(GridSpec::line(1.0, 2).is_err());
        assert!(GridSpec::line(-1.0, 9).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        let g = GridSpec::line(2.0, 5).unwrap();
        assert_eq!(g.spacing(0), 0.5);
        assert_eq!(g.node_count(), 5);
    }
}
