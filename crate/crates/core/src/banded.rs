//! Symmetric banded linear algebra for the implicit solves.
//!
//! Every system this crate solves has the form `(c I - a Lap + diag(d)) x = b`
//! with `a >= 0`. Multiplying the rows by the lumped quadrature weights makes
//! the matrix symmetric positive definite, so a banded LDL^T factorization
//! without pivoting is exact up to rounding.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};

/// Symmetric banded matrix stored by lower diagonals:
/// `bands[d][i] = M[i + d][i]` for offsets `d = 0..=bandwidth`.
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bandwidth: usize,
    bands: Vec<Vec<f64>>,
}

impl SymBanded {
    fn zeros(n: usize, bandwidth: usize) -> Self {
        let bands = (0..=bandwidth).map(|d| vec![0.0; n - d]).collect();
        SymBanded { n, bandwidth, bands }
    }

    /// Assemble `W (c I - a Lap + diag(d))` on the given grid, where `Lap` is the
    /// mirror-ghost Neumann Laplacian and `W` the diagonal of quadrature weights.
    pub fn assemble(grid: &GridSpec, c: f64, a: f64, extra_diag: Option<&[f64]>) -> Result<Self> {
        let n = grid.node_count();
        if let Some(d) = extra_diag {
            if d.len() != n {
                return Err(Error::GridMismatch {
                    context: "SymBanded::assemble",
                    expected: n,
                    got: d.len(),
                });
            }
        }
        let bandwidth = match grid.dimension() {
            1 => 1,
            _ => grid.cells()[0],
        };
        let mut m = SymBanded::zeros(n, bandwidth);

        // W * (-Lap) contribution: for each axis, mirrored second differences.
        // In the weighted form the off-diagonal coupling between neighbors i, i+s
        // along an axis with spacing h is -(w_perp / h), where w_perp is the
        // product of the transverse weights; mirror ghosts double the interior
        // coupling seen from a boundary node, which the weighting symmetrizes.
        match grid.dimension() {
            1 => {
                let h = grid.spacing(0);
                for i in 0..n - 1 {
                    // coupling between i and i+1 in W*(-Lap) is -1/h for all edges
                    m.bands[1][i] += -a / h;
                    m.bands[0][i] += a / h;
                    m.bands[0][i + 1] += a / h;
                }
            }
            _ => {
                let (nx, ny) = (grid.cells()[0], grid.cells()[1]);
                let (hx, hy) = (grid.spacing(0), grid.spacing(1));
                // x-edges: transverse weight along y
                for iy in 0..ny {
                    let wy = if iy == 0 || iy == ny - 1 { 0.5 * hy } else { hy };
                    for ix in 0..nx - 1 {
                        let i = iy * nx + ix;
                        let coef = a * wy / hx;
                        m.bands[1][i] += -coef;
                        m.bands[0][i] += coef;
                        m.bands[0][i + 1] += coef;
                    }
                }
                // y-edges: transverse weight along x
                for iy in 0..ny - 1 {
                    for ix in 0..nx {
                        let wx = if ix == 0 || ix == nx - 1 { 0.5 * hx } else { hx };
                        let i = iy * nx + ix;
                        let coef = a * wx / hy;
                        m.bands[nx][i] += -coef;
                        m.bands[0][i] += coef;
                        m.bands[0][i + nx] += coef;
                    }
                }
            }
        }

        for i in 0..n {
            let w = grid.weight(i);
            let mut diag = c;
            if let Some(d) = extra_diag {
                diag += d[i];
            }
            m.bands[0][i] += w * diag;
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// y = M x.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for d in 0..=self.bandwidth {
            let band = &self.bands[d];
            if d == 0 {
                for i in 0..self.n {
                    y[i] += band[i] * x[i];
                }
            } else {
                for i in 0..self.n - d {
                    y[i + d] += band[i] * x[i];
                    y[i] += band[i] * x[i + d];
                }
            }
        }
        y
    }

    /// Banded LDL^T factorization. Fails if a pivot is not strictly positive.
    pub fn factor(&self) -> Result<BandedLdl> {
        let n = self.n;
        let bw = self.bandwidth;
        // l[d][i] stores L[i+d][i] for d = 1..=bw; diag d_j separately.
        let mut l: Vec<Vec<f64>> = (0..=bw).map(|d| vec![0.0; n.saturating_sub(d)]).collect();
        for d in 0..=bw {
            l[d].copy_from_slice(&self.bands[d]);
        }
        let mut diag = vec![0.0; n];
        for j in 0..n {
            let start = j.saturating_sub(bw);
            let mut dj = l[0][j];
            for k in start..j {
                let ljk = l[j - k][k];
                dj -= ljk * ljk * diag[k];
            }
            if !(dj > 0.0) || !dj.is_finite() {
                return Err(Error::LinearSolve(format!(
                    "non-positive pivot {dj:.3e} at row {j}; system matrix is not positive definite"
                )));
            }
            diag[j] = dj;
            let imax = (j + bw).min(n - 1);
            for i in j + 1..=imax {
                let mut lij = l[i - j][j];
                let kstart = i.saturating_sub(bw).max(start);
                for k in kstart..j {
                    lij -= l[i - k][k] * l[j - k][k] * diag[k];
                }
                l[i - j][j] = lij / dj;
            }
        }
        Ok(BandedLdl {
            n,
            bandwidth: bw,
            lower: l,
            diag,
        })
    }

    /// Zero out row/column `i` (keeping symmetry) and pin `x_i = value` by
    /// setting the diagonal to 1. The right-hand side must be adjusted by the
    /// caller via `constrain_rhs` before calling this.
    pub fn pin_node(&mut self, i: usize) {
        for d in 1..=self.bandwidth {
            if i >= d {
                self.bands[d][i - d] = 0.0;
            }
            if i + d < self.n {
                self.bands[d][i] = 0.0;
            }
        }
        self.bands[0][i] = 1.0;
    }

    /// Subtract column `i` times `value` from `rhs` (for nodes about to be pinned).
    fn constrain_rhs(&self, rhs: &mut [f64], i: usize, value: f64) {
        for d in 1..=self.bandwidth {
            if i >= d {
                rhs[i - d] -= self.bands[d][i - d] * value;
            }
            if i + d < self.n {
                rhs[i + d] -= self.bands[d][i] * value;
            }
        }
    }

    /// Impose `x_i = value` for every `(i, value)` in `pins`, adjusting the
    /// right-hand side and keeping the matrix symmetric. Safe for adjacent pins.
    pub fn apply_pins(&mut self, rhs: &mut [f64], pins: &[(usize, f64)]) {
        for &(i, v) in pins {
            self.constrain_rhs(rhs, i, v);
        }
        for &(i, v) in pins {
            rhs[i] = v;
        }
        for &(i, _) in pins {
            self.pin_node(i);
        }
    }
}

/// Factorized form; solves are destructive-free and reusable.
#[derive(Debug, Clone)]
pub struct BandedLdl {
    n: usize,
    bandwidth: usize,
    lower: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

impl BandedLdl {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let bw = self.bandwidth;
        let mut x = b.to_vec();
        // forward: L z = b
        for j in 0..n {
            let xj = x[j];
            let imax = (j + bw).min(n - 1);
            for i in j + 1..=imax {
                x[i] -= self.lower[i - j][j] * xj;
            }
        }
        // diagonal
        for j in 0..n {
            x[j] /= self.diag[j];
        }
        // backward: L^T x = z
        for j in (0..n).rev() {
            let imax = (j + bw).min(n - 1);
            let mut acc = x[j];
            for i in j + 1..=imax {
                acc -= self.lower[i - j][j] * x[i];
            }
            x[j] = acc;
        }
        x
    }
}

/// Solve `(c I - a Lap + diag(d)) x = rhs` in the weighted formulation and
/// verify the relative residual. `rhs` is the unweighted right-hand side.
pub fn solve_elliptic(
    grid: &GridSpec,
    c: f64,
    a: f64,
    extra_diag: Option<&[f64]>,
    rhs: &ScalarField,
    residual_tol: f64,
) -> Result<ScalarField> {
    let m = SymBanded::assemble(grid, c, a, extra_diag)?;
    let weighted: Vec<f64> = rhs
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| grid.weight(i) * v)
        .collect();
    let f = m.factor()?;
    let x = f.solve(&weighted);
    let back = m.apply(&x);
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..x.len() {
        err += (back[i] - weighted[i]).powi(2);
        scale += weighted[i].powi(2);
    }
    let rel = (err / scale.max(1e-300)).sqrt();
    if rel > residual_tol && scale > 0.0 {
        return Err(Error::LinearSolve(format!(
            "banded solve residual {rel:.3e} above tolerance {residual_tol:.1e}"
        )));
    }
    Ok(ScalarField::from_values(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_product_l2, laplacian_neumann};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn assembled_matrix_matches_stencil() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for grid in [
            GridSpec::line(1.3, 17).unwrap(),
            GridSpec::rectangle([1.0, 0.7], [9, 6]).unwrap(),
        ] {
            let n = grid.node_count();
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
            let m = SymBanded::assemble(&grid, 3.0, 0.5, Some(&d)).unwrap();
            let x = ScalarField::from_values((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
            let lap = laplacian_neumann(&x, &grid).unwrap();
            let y = m.apply(&x.values);
            for i in 0..n {
                let expected =
                    grid.weight(i) * (3.0 * x.values[i] - 0.5 * lap.values[i] + d[i] * x.values[i]);
                assert!(
                    (y[i] - expected).abs() < 1e-11,
                    "row {i}: {} vs {}",
                    y[i],
                    expected
                );
            }
        }
    }

    #[test]
    fn factor_solves_to_machine_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = GridSpec::rectangle([1.0, 1.0], [12, 12]).unwrap();
        let n = grid.node_count();
        let m = SymBanded::assemble(&grid, 1.0, 0.25, None).unwrap();
        let f = m.factor().unwrap();
        for _ in 0..5 {
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = f.solve(&b);
            let back = m.apply(&x);
            let err: f64 = back
                .iter()
                .zip(&b)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-11, "residual {err}");
        }
    }

    #[test]
    fn eigenmode_symbol_check() {
        // On a uniform 1D grid the mirrored Laplacian has cosine eigenvectors
        // cos(pi j x) with eigenvalue -(2 - 2 cos(pi j h)) / h^2. A large-alpha
        // implicit solve must damp them by exactly 1/(1 + dt a lambda_j).
        let grid = GridSpec::line(1.0, 33).unwrap();
        let h = grid.spacing(0);
        let dt = 0.1;
        let a = 50.0;
        for j in [1usize, 3, 7] {
            let mode = ScalarField::from_fn(&grid, |x, _| (std::f64::consts::PI * j as f64 * x).cos());
            let lam = (2.0 - 2.0 * (std::f64::consts::PI * j as f64 * h).cos()) / (h * h);
            let sol = solve_elliptic(&grid, 1.0, dt * a, None, &mode, 1e-10).unwrap();
            let factor = 1.0 / (1.0 + dt * a * lam);
            for i in 0..grid.node_count() {
                assert!(
                    (sol.values[i] - factor * mode.values[i]).abs() < 1e-10,
                    "mode {j} node {i}"
                );
            }
            let ip = inner_product_l2(&sol, &mode, &grid).unwrap();
            assert!(ip > 0.0);
        }
    }

    #[test]
    fn pinning_keeps_solution_exact() {
        let grid = GridSpec::line(1.0, 21).unwrap();
        let n = grid.node_count();
        let mut m = SymBanded::assemble(&grid, 2.0, 1.0, None).unwrap();
        // pin two adjacent nodes and one boundary node
        let mut rhs: Vec<f64> = (0..n).map(|i| grid.weight(i) * (i as f64).sin()).collect();
        let pins = [(0usize, 1.0), (7usize, -0.5), (8usize, 0.25)];
        m.apply_pins(&mut rhs, &pins);
        let f = m.factor().unwrap();
        let x = f.solve(&rhs);
        for &(i, v) in &pins {
            assert!((x[i] - v).abs() < 1e-13, "pin {i}: {} vs {v}", x[i]);
        }
    }
}
