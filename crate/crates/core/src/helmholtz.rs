//! `(I - Delta)^{-1}` with homogeneous Dirichlet data.
//!
//! The tensor basis diagonalizes `I - Delta`, so the inverse is a pointwise
//! division of the coefficients by `1 + lambda`.
use nalgebra::DMatrix;
use ndarray::{Array2, Zip};

use crate::error::Result;
use crate::grid::{Field, GridSpec, SpectralCoeffs};

#[derive(Clone, Debug)]
pub struct HelmholtzSolver {
    grid: GridSpec,
    /// `1 / (1 + lambda)`, every entry in `(0, 1]`.
    inv_symbol: Array2<f64>,
}

impl HelmholtzSolver {
    pub fn new(grid: &GridSpec) -> Self {
        let inv_symbol = grid.symbol().mapv(|l| 1.0 / (1.0 + l));
        Self {
            grid: grid.clone(),
            inv_symbol,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn inv_symbol(&self) -> &Array2<f64> {
        &self.inv_symbol
    }

    /// Solves `(I - Delta) u = f`, `u = 0` on both walls.
    pub fn solve(&self, f: &Field) -> Result<Field> {
        let mut c = self.grid.forward(f)?;
        self.solve_coeffs_in_place(&mut c);
        self.grid.inverse(&c)
    }

    pub fn solve_coeffs_in_place(&self, c: &mut SpectralCoeffs) {
        Zip::from(&mut c.coeffs)
            .and(&self.inv_symbol)
            .for_each(|c, &s| *c *= s);
    }

    /// Applies the forward operator `I - Delta` spectrally.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        let mut c = self.grid.forward(u)?;
        Zip::from(&mut c.coeffs)
            .and(self.grid.symbol())
            .for_each(|c, &l| *c *= 1.0 + l);
        self.grid.inverse(&c)
    }

    /// Returns `(||solve(f)||_{H^2}, ||f||_{L^2})`. Mode by mode
    /// `(1 + lambda)^2 / (1 + lambda)^2 = 1`, so `lhs <= rhs` up to roundoff.
    pub fn h2_bound_check(&self, f: &Field) -> Result<(f64, f64)> {
        let c = self.grid.forward(f)?;
        let rhs = self.grid.sobolev_norm_coeffs(&c, 0.0)?;
        let mut u = c;
        self.solve_coeffs_in_place(&mut u);
        let lhs = self.grid.sobolev_norm_coeffs(&u, 2.0)?;
        Ok((lhs, rhs))
    }
}

/// Dense matrix of `I - Delta` on the interior nodes (row-major node order,
/// `x1` outer), assembled from closed-form differentiation matrices without
/// any transform: the periodic trigonometric second-derivative matrix in
/// `x1` (Nyquist mode kept) and the sine-series one in `x2`.
pub fn dense_operator(grid: &GridSpec) -> DMatrix<f64> {
    let (n1, n2) = (grid.n1(), grid.n2());
    let m = n2 - 1;
    let (l1, l2) = (grid.l1(), grid.l2());
    let tau = 2.0 * std::f64::consts::PI;
    let pi = std::f64::consts::PI;
    let half = n1 as i64 / 2;
    let d1 = DMatrix::from_fn(n1, n1, |a, b| {
        let dx = (a as f64 - b as f64) * l1 / n1 as f64;
        ((-half + 1)..=half)
            .map(|q| {
                let k = tau * q as f64 / l1;
                -k * k * (k * dx).cos()
            })
            .sum::<f64>()
            / n1 as f64
    });
    let d2 = DMatrix::<f64>::from_fn(m, m, |k, l| {
        (1..n2)
            .map(|j| {
                let kj = pi * j as f64 / l2;
                let sk = (pi * (j * (k + 1)) as f64 / n2 as f64).sin();
                let sl = (pi * (j * (l + 1)) as f64 / n2 as f64).sin();
                -kj * kj * 2.0 / n2 as f64 * sk * sl
            })
            .sum::<f64>()
    });
    let n = n1 * m;
    DMatrix::from_fn(n, n, |r, c| {
        let (a, k) = (r / m, r % m);
        let (b, l) = (c / m, c % m);
        let mut v = 0.0;
        if r == c {
            v += 1.0;
        }
        if k == l {
            v -= d1[(a, b)];
        }
        if a == b {
            v -= d2[(k, l)];
        }
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use std::f64::consts::PI;

    #[test]
    fn reciprocal_symbol_in_unit_interval() {
        let g = GridSpec::new(5.0, 2.0, 8, 8).unwrap();
        let s = HelmholtzSolver::new(&g);
        assert!(s.inv_symbol().iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn zero_rhs() {
        let g = GridSpec::new(5.0, 2.0, 8, 8).unwrap();
        let s = HelmholtzSolver::new(&g);
        assert_eq!(s.solve(&g.zeros()).unwrap().max_abs(), 0.0);
        assert_eq!(s.h2_bound_check(&g.zeros()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn eigenfunction() {
        let g = GridSpec::new(6.0, 4.0, 16, 12).unwrap();
        let (l1, l2) = (g.l1(), g.l2());
        let lam = (2.0 * PI / l1).powi(2) + (PI / l2).powi(2);
        let mode = g.sample(|x1, x2| (2.0 * PI * x1 / l1).cos() * (PI * x2 / l2).sin());
        let f = mode.scaled(1.0 + lam);
        let s = HelmholtzSolver::new(&g);
        let u = s.solve(&f).unwrap();
        assert!(u.sub(&mode).max_abs() < 1e-12);
        let (lhs, rhs) = s.h2_bound_check(&mode).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }

    #[test]
    fn dense_operator_agrees_on_a_mode() {
        let g = GridSpec::new(6.0, 4.0, 8, 8).unwrap();
        let mode = g.sample(|x1, x2| (2.0 * PI * 4.0 * x1 / 6.0).cos() * (3.0 * PI * x2 / 4.0).sin());
        let a = dense_operator(&g);
        let x = nalgebra::DVector::from_iterator(mode.values.len(), mode.values.iter().copied());
        let y = &a * &x;
        let expected = HelmholtzSolver::new(&g).apply(&mode).unwrap();
        for (p, q) in y.iter().zip(expected.values.iter()) {
            assert!((p - q).abs() < 1e-10, "{p} {q}");
        }
    }

    #[test]
    fn grid_mismatch() {
        let g = GridSpec::new(5.0, 2.0, 8, 8).unwrap();
        let other = GridSpec::new(5.0, 2.0, 8, 10).unwrap();
        let s = HelmholtzSolver::new(&g);
        assert!(matches!(s.solve(&other.zeros()), Err(Error::DimensionMismatch { .. })));
    }
}
