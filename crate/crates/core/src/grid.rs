//! Truncated half-plane discretization.
//!
//! The domain `[0, L1) x [0, L2]` is periodic in `x1` and carries homogeneous
//! Dirichlet data at `x2 = 0` and `x2 = L2`. Fields live on the interior nodes
//!
//! ```text
//! x1_a = a * L1 / N1,   a = 0..N1
//! x2_k = k * L2 / N2,   k = 1..N2-1
//! ```
//!
//! and are expanded in the orthonormal tensor basis
//!
//! ```text
//! e_{m,j}(x) = sqrt(2 / (L1 L2)) * exp(2 pi i m x1 / L1) * sin(pi j x2 / L2)
//! ```
//!
//! with `m` in FFT order and `j = 1..N2-1`. With this normalization the grid
//! quadrature `sum f^2 dx1 dx2` equals `sum |c|^2` exactly, so every discrete
//! Sobolev norm below is a weighted coefficient sum.
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Grid geometry, spectral symbol table and cached FFT plans.
///
/// Immutable after construction; cloning shares the plans.
#[derive(Clone)]
pub struct GridSpec {
    l1: f64,
    l2: f64,
    n1: usize,
    n2: usize,
    /// `(2 pi m / L1)^2 + (pi j / L2)^2`, shape `N1 x (N2-1)`.
    symbol: Arc<Array2<f64>>,
    /// First-derivative wavenumbers in `x1` (Nyquist zeroed).
    k1: Arc<Vec<f64>>,
    /// Second-derivative wavenumbers squared in `x1` (Nyquist kept).
    k1_sq: Arc<Vec<f64>>,
    /// `pi j / L2` for `j = 1..N2-1`.
    k2: Arc<Vec<f64>>,
    fft1_fwd: Arc<dyn Fft<f64>>,
    fft1_inv: Arc<dyn Fft<f64>>,
    /// Length-`2 N2` transform used for DST-I and cosine-series evaluation.
    fft2_ext: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpec")
            .field("l1", &self.l1)
            .field("l2", &self.l2)
            .field("n1", &self.n1)
            .field("n2", &self.n2)
            .finish()
    }
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.l1 == other.l1 && self.l2 == other.l2 && self.n1 == other.n1 && self.n2 == other.n2
    }
}

/// Real scalar field on the interior nodes, shape `N1 x (N2-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub values: Array2<f64>,
}

/// Coefficients in the `DFT(x1) (x) DST-I(x2)` basis, shape `N1 x (N2-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    pub coeffs: Array2<Complex64>,
}

impl Field {
    pub fn new(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `self + alpha * other`, shapes assumed equal.
    pub fn axpy(&self, alpha: f64, other: &Field) -> Field {
        let mut out = self.values.clone();
        out.scaled_add(alpha, &other.values);
        Field::new(out)
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        Field::new(&self.values * alpha)
    }

    pub fn sub(&self, other: &Field) -> Field {
        Field::new(&self.values - &other.values)
    }
}

impl SpectralCoeffs {
    pub fn shape(&self) -> (usize, usize) {
        self.coeffs.dim()
    }
}

impl GridSpec {
    pub fn new(l1: f64, l2: f64, n1: usize, n2: usize) -> Result<Self> {
        if !(l1.is_finite() && l1 > 0.0) {
            return Err(Error::invalid("L1", format!("must be positive, got {l1}")));
        }
        if !(l2.is_finite() && l2 > 0.0) {
            return Err(Error::invalid("L2", format!("must be positive, got {l2}")));
        }
        if n1 < 8 || !n1.is_multiple_of(2) {
            return Err(Error::invalid("N1", format!("must be even and >= 8, got {n1}")));
        }
        if n2 < 8 {
            return Err(Error::invalid("N2", format!("must be >= 8, got {n2}")));
        }

        let k1: Vec<f64> = (0..n1)
            .map(|a| {
                if a == n1 / 2 {
                    0.0
                } else {
                    2.0 * PI * signed_index(a, n1) as f64 / l1
                }
            })
            .collect();
        let k1_sq: Vec<f64> = (0..n1)
            .map(|a| (2.0 * PI * signed_index(a, n1) as f64 / l1).powi(2))
            .collect();
        let k2: Vec<f64> = (1..n2).map(|j| PI * j as f64 / l2).collect();
        let symbol = Array2::from_shape_fn((n1, n2 - 1), |(a, j)| k1_sq[a] + k2[j] * k2[j]);

        let mut planner = FftPlanner::new();
        let fft1_fwd = planner.plan_fft_forward(n1);
        let fft1_inv = planner.plan_fft_inverse(n1);
        let fft2_ext = planner.plan_fft_forward(2 * n2);

        Ok(Self {
            l1,
            l2,
            n1,
            n2,
            symbol: Arc::new(symbol),
            k1: Arc::new(k1),
            k1_sq: Arc::new(k1_sq),
            k2: Arc::new(k2),
            fft1_fwd,
            fft1_inv,
            fft2_ext,
        })
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Number of `x2` intervals; the interior holds `n2 - 1` nodes.
    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Shape of a field on this grid.
    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2 - 1)
    }

    pub fn dx1(&self) -> f64 {
        self.l1 / self.n1 as f64
    }

    pub fn dx2(&self) -> f64 {
        self.l2 / self.n2 as f64
    }

    /// Area element of the grid quadrature.
    pub fn cell_area(&self) -> f64 {
        self.dx1() * self.dx2()
    }

    pub fn x1(&self, a: usize) -> f64 {
        a as f64 * self.dx1()
    }

    /// `x2` coordinate of interior row `k` (0-based, so `k = 0` is `x2 = dx2`).
    pub fn x2(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.dx2()
    }

    pub fn x1_nodes(&self) -> Vec<f64> {
        (0..self.n1).map(|a| self.x1(a)).collect()
    }

    pub fn x2_nodes(&self) -> Vec<f64> {
        (0..self.n2 - 1).map(|k| self.x2(k)).collect()
    }

    /// `lambda(m, j)` indexed in FFT order for `m` and `j - 1` for `j`.
    pub fn symbol(&self) -> &Array2<f64> {
        &self.symbol
    }

    /// First-derivative wavenumbers in `x1`, Nyquist entry zero.
    pub fn wavenumbers1(&self) -> &[f64] {
        &self.k1
    }

    /// `pi j / L2` for `j = 1..N2-1`.
    pub fn wavenumbers2(&self) -> &[f64] {
        &self.k2
    }

    /// Signed `x1` mode number of FFT index `a`.
    pub fn mode1(&self, a: usize) -> i64 {
        signed_index(a, self.n1)
    }

    fn basis_scale(&self) -> f64 {
        (2.0 / (self.l1 * self.l2)).sqrt()
    }

    pub fn zeros(&self) -> Field {
        Field::new(Array2::zeros(self.shape()))
    }

    pub fn zero_coeffs(&self) -> SpectralCoeffs {
        SpectralCoeffs {
            coeffs: Array2::zeros(self.shape()),
        }
    }

    /// Samples `f(x1, x2)` on the interior nodes.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field {
        let x1 = self.x1_nodes();
        let x2 = self.x2_nodes();
        Field::new(Array2::from_shape_fn(self.shape(), |(a, k)| f(x1[a], x2[k])))
    }

    pub fn check(&self, field: &Field) -> Result<()> {
        self.check_shape(field.shape())
    }

    pub fn check_coeffs(&self, coeffs: &SpectralCoeffs) -> Result<()> {
        self.check_shape(coeffs.shape())
    }

    fn check_shape(&self, got: (usize, usize)) -> Result<()> {
        if got != self.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.shape(),
                got,
            });
        }
        Ok(())
    }

    /// Physical values to basis coefficients.
    pub fn forward(&self, field: &Field) -> Result<SpectralCoeffs> {
        self.check(field)?;
        let mut work = field.values.mapv(|v| Complex64::new(v, 0.0));
        self.fft_x1(&mut work, &self.fft1_fwd);
        self.dst_x2(&mut work);
        let scale = 2.0 / (self.basis_scale() * self.n1 as f64 * self.n2 as f64);
        work.mapv_inplace(|c| c * scale);
        Ok(SpectralCoeffs { coeffs: work })
    }

    /// Basis coefficients to physical values; the imaginary residue of
    /// non-Hermitian input is discarded.
    pub fn inverse(&self, coeffs: &SpectralCoeffs) -> Result<Field> {
        self.check_coeffs(coeffs)?;
        let mut work = coeffs.coeffs.clone();
        self.dst_x2(&mut work);
        self.fft_x1(&mut work, &self.fft1_inv);
        let scale = self.basis_scale();
        Ok(Field::new(work.mapv(|c| c.re * scale)))
    }

    /// Coefficients of the separable field `line(x1) * col(x2)` without
    /// forming it on the grid.
    pub fn forward_separable(&self, line: &[f64], col: &[f64]) -> SpectralCoeffs {
        assert_eq!(line.len(), self.n1);
        assert_eq!(col.len(), self.n2 - 1);
        let mut a: Vec<Complex64> = line.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft1_fwd.process(&mut a);
        let mut b = Array2::from_shape_fn((1, self.n2 - 1), |(_, k)| Complex64::new(col[k], 0.0));
        self.dst_x2(&mut b);
        let scale = 2.0 / (self.basis_scale() * self.n1 as f64 * self.n2 as f64);
        SpectralCoeffs {
            coeffs: Array2::from_shape_fn(self.shape(), |(m, j)| a[m] * b[[0, j]] * scale),
        }
    }

    /// Evaluates the sine series of `coeffs` on the row `x2` (any value in
    /// `[0, L2]`), returning one value per `x1` node.
    pub fn eval_row(&self, coeffs: &SpectralCoeffs, x2: f64) -> Vec<f64> {
        let sines: Vec<f64> = self.k2.iter().map(|k| (k * x2).sin()).collect();
        let mut line: Vec<Complex64> = coeffs
            .coeffs
            .outer_iter()
            .map(|row| row.iter().zip(&sines).map(|(c, s)| c * s).sum())
            .collect();
        self.fft1_inv.process(&mut line);
        let scale = self.basis_scale();
        line.into_iter().map(|c| c.re * scale).collect()
    }

    /// Spectral `d/dx1`.
    pub fn ddx1(&self, field: &Field) -> Result<Field> {
        self.check(field)?;
        let mut work = field.values.mapv(|v| Complex64::new(v, 0.0));
        self.fft_x1(&mut work, &self.fft1_fwd);
        let norm = 1.0 / self.n1 as f64;
        for (a, mut row) in work.outer_iter_mut().enumerate() {
            let factor = Complex64::new(0.0, self.k1[a] * norm);
            row.mapv_inplace(|c| c * factor);
        }
        self.fft_x1(&mut work, &self.fft1_inv);
        Ok(Field::new(work.mapv(|c| c.re)))
    }

    /// Spectral `d/dx2` of a Dirichlet field, evaluated on the interior nodes.
    pub fn ddx2_dirichlet(&self, field: &Field) -> Result<Field> {
        let full = self.ddx2_with_walls(field)?;
        let n = self.n2;
        Ok(Field::new(full.slice(ndarray::s![.., 1..n]).to_owned()))
    }

    /// Same as [`ddx2_dirichlet`](Self::ddx2_dirichlet) but including the
    /// wall rows `x2 = 0` and `x2 = L2`; shape `N1 x (N2+1)`.
    pub fn ddx2_with_walls(&self, field: &Field) -> Result<Array2<f64>> {
        let coeffs = self.forward(field)?;
        Ok(self.ddx2_from_coeffs(&coeffs))
    }

    pub(crate) fn ddx2_from_coeffs(&self, coeffs: &SpectralCoeffs) -> Array2<f64> {
        let mut b = coeffs.coeffs.clone();
        for mut row in b.outer_iter_mut() {
            for (c, k) in row.iter_mut().zip(self.k2.iter()) {
                *c *= *k;
            }
        }
        let mut out = self.cosine_eval_x2(&b);
        self.fft_x1(&mut out, &self.fft1_inv);
        let scale = self.basis_scale();
        out.mapv(|c| c.re * scale)
    }

    /// Spectral Laplacian (`-lambda` in coefficient space).
    pub fn laplacian(&self, field: &Field) -> Result<Field> {
        let mut c = self.forward(field)?;
        Zip::from(&mut c.coeffs)
            .and(&*self.symbol)
            .for_each(|c, &l| *c *= -l);
        self.inverse(&c)
    }

    /// `( sum (1 + lambda)^s |c|^2 )^(1/2)`.
    pub fn sobolev_norm(&self, field: &Field, s: f64) -> Result<f64> {
        let c = self.forward(field)?;
        self.sobolev_norm_coeffs(&c, s)
    }

    pub fn sobolev_norm_coeffs(&self, coeffs: &SpectralCoeffs, s: f64) -> Result<f64> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::invalid("s", format!("Sobolev index must be >= 0, got {s}")));
        }
        self.check_coeffs(coeffs)?;
        let integer = s.fract() == 0.0 && s <= 8.0;
        let mut acc = 0.0;
        for (c, &l) in coeffs.coeffs.iter().zip(self.symbol.iter()) {
            let w = if integer {
                (1.0 + l).powi(s as i32)
            } else {
                (1.0 + l).powf(s)
            };
            acc += w * c.norm_sqr();
        }
        Ok(acc.sqrt())
    }

    /// Weighted coefficient sum `sum w(lambda) |c|^2`.
    pub fn weighted_energy(&self, coeffs: &SpectralCoeffs, weight: impl Fn(f64) -> f64) -> f64 {
        coeffs
            .coeffs
            .iter()
            .zip(self.symbol.iter())
            .map(|(c, &l)| weight(l) * c.norm_sqr())
            .sum()
    }

    /// Grid L2 norm `( sum f^2 dx1 dx2 )^(1/2)`.
    pub fn l2_norm(&self, field: &Field) -> f64 {
        (field.values.iter().map(|v| v * v).sum::<f64>() * self.cell_area()).sqrt()
    }

    /// Grid inner product `sum f g dx1 dx2`.
    pub fn inner(&self, f: &Field, g: &Field) -> f64 {
        Zip::from(&f.values)
            .and(&g.values)
            .fold(0.0, |acc, a, b| acc + a * b)
            * self.cell_area()
    }

    /// Trapezoid-in-`x2` integral of an array that includes the wall rows,
    /// shape `N1 x (N2+1)`.
    pub fn integrate_with_walls(&self, values: &Array2<f64>) -> f64 {
        let n = self.n2;
        let mut acc = 0.0;
        for row in values.outer_iter() {
            acc += 0.5 * (row[0] + row[n]);
            acc += row.slice(ndarray::s![1..n]).sum();
        }
        acc * self.cell_area()
    }

    /// Composite Simpson integral in `x2` of an array that includes the wall
    /// rows (shape `N1 x (N2+1)`); for odd `N2` the last three intervals use
    /// the 3/8 rule.
    pub fn integrate_simpson_with_walls(&self, values: &Array2<f64>) -> f64 {
        let n = self.n2;
        let h = self.dx2();
        let simpson_end = if n.is_multiple_of(2) { n } else { n - 3 };
        let mut total = 0.0;
        for row in values.outer_iter() {
            let mut acc = 0.0;
            let mut i = 0;
            while i < simpson_end {
                acc += row[i] + 4.0 * row[i + 1] + row[i + 2];
                i += 2;
            }
            acc *= h / 3.0;
            if n % 2 == 1 {
                let i = simpson_end;
                acc += 3.0 * h / 8.0 * (row[i] + 3.0 * row[i + 1] + 3.0 * row[i + 2] + row[i + 3]);
            }
            total += acc;
        }
        total * self.dx1()
    }

    /// Zeroes coefficients outside the 2/3 band.
    pub fn dealias(&self, coeffs: &mut SpectralCoeffs) {
        let m_cut = self.n1 as i64 / 3;
        let j_cut = 2 * self.n2 / 3;
        for (a, mut row) in coeffs.coeffs.outer_iter_mut().enumerate() {
            let drop_row = self.mode1(a).abs() > m_cut;
            for (jj, c) in row.iter_mut().enumerate() {
                if drop_row || jj + 1 > j_cut {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Spectral `d^2/dx1^2` of a periodic line sampled on the `x1` nodes,
    /// with the Nyquist mode dropped (two applications of `ddx1`).
    pub fn d2dx1_line(&self, samples: &[f64]) -> Vec<f64> {
        self.line_multiplier(samples, |a| {
            let k = self.k1[a];
            Complex64::new(-k * k, 0.0)
        })
    }

    pub fn ddx1_line(&self, samples: &[f64]) -> Vec<f64> {
        self.line_multiplier(samples, |a| Complex64::new(0.0, self.k1[a]))
    }

    /// Discrete `H^s(R)` norm of a periodic line sampled on the `x1` nodes:
    /// `( sum (1 + k^2)^s |h_m|^2 L1 )^(1/2)` with `h_m` the normalized DFT.
    pub fn line_sobolev_norm(&self, samples: &[f64], s: f64) -> f64 {
        assert_eq!(samples.len(), self.n1);
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft1_fwd.process(&mut buf);
        let n = self.n1 as f64;
        let acc: f64 = buf
            .iter()
            .enumerate()
            .map(|(a, c)| (1.0 + self.k1_sq[a]).powf(s) * (c / n).norm_sqr())
            .sum();
        (acc * self.l1).sqrt()
    }

    fn line_multiplier(&self, samples: &[f64], mult: impl Fn(usize) -> Complex64) -> Vec<f64> {
        assert_eq!(samples.len(), self.n1);
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft1_fwd.process(&mut buf);
        let n = self.n1 as f64;
        for (a, c) in buf.iter_mut().enumerate() {
            *c *= mult(a) / n;
        }
        self.fft1_inv.process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// In-place unnormalized FFT along axis 0 of every column.
    fn fft_x1(&self, work: &mut Array2<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let (n1, cols) = work.dim();
        let mut buf = vec![Complex64::new(0.0, 0.0); n1];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for k in 0..cols {
            for a in 0..n1 {
                buf[a] = work[[a, k]];
            }
            plan.process_with_scratch(&mut buf, &mut scratch);
            for a in 0..n1 {
                work[[a, k]] = buf[a];
            }
        }
    }

    /// In-place DST-I along axis 1: `X_j = sum_k x_k sin(pi j k / N2)`.
    fn dst_x2(&self, work: &mut Array2<Complex64>) {
        let n = self.n2;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft2_ext.get_inplace_scratch_len()];
        let half_i = Complex64::new(0.0, 0.5);
        for mut row in work.outer_iter_mut() {
            buf[0] = Complex64::new(0.0, 0.0);
            buf[n] = Complex64::new(0.0, 0.0);
            for k in 1..n {
                buf[k] = row[k - 1];
                buf[2 * n - k] = -row[k - 1];
            }
            self.fft2_ext.process_with_scratch(&mut buf, &mut scratch);
            for j in 1..n {
                row[j - 1] = buf[j] * half_i;
            }
        }
    }

    /// Evaluates `sum_j b_j cos(pi j k / N2)` for `k = 0..=N2`.
    fn cosine_eval_x2(&self, b: &Array2<Complex64>) -> Array2<Complex64> {
        let n = self.n2;
        let (n1, _) = b.dim();
        let mut out = Array2::zeros((n1, n + 1));
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft2_ext.get_inplace_scratch_len()];
        for (a, row) in b.outer_iter().enumerate() {
            buf[0] = Complex64::new(0.0, 0.0);
            buf[n] = Complex64::new(0.0, 0.0);
            for j in 1..n {
                buf[j] = row[j - 1];
                buf[2 * n - j] = row[j - 1];
            }
            self.fft2_ext.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..=n {
                out[[a, k]] = buf[k] * 0.5;
            }
        }
        out
    }
}

fn signed_index(a: usize, n: usize) -> i64 {
    if a <= n / 2 {
        a as i64
    } else {
        a as i64 - n as i64
    }
}
