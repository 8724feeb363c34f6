//! Problem assembly: flux functions, the wavemaker signal, initial data, the
//! lifting `v = u - h e^{-x2}` and the vector fields driving `v`.
//!
//! With `E(x2) = e^{-x2}` and `nu2 = 1` the lifted unknown satisfies
//!
//! ```text
//! (I - Delta) v_t - nu1 Delta v + div phi(v + h E) = [h_x1x1t + nu1 (h_x1x1 + h)] E
//! ```
//!
//! with `v = 0` on both walls, so `v_t = (I - Delta)^{-1}{ nu1 Delta v + h~ E - div phi }`.
use std::f64::consts::SQRT_2;

use ndarray::{s, Array2, Zip};

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, SpectralCoeffs};
use crate::helmholtz::HelmholtzSolver;

/// Built-in flux families. Every member satisfies `phi(0) = 0` and has a
/// bounded second derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FluxFamily {
    /// `(u + u^2/2, 0)`
    Bbm,
    /// `(u + u^2/2, u^2/2)`
    Oblique,
    /// `(u + u^3/(1+u^2), 0)`
    Saturating,
    /// `(a u, b u)`
    Linear { a: f64, b: f64 },
    /// `(u^2/2, 0)`
    Quadratic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxSpec {
    family: FluxFamily,
    d2phi_bound: f64,
}

impl FluxSpec {
    pub fn new(family: FluxFamily) -> Self {
        let d2phi_bound = match family {
            FluxFamily::Bbm | FluxFamily::Quadratic => 1.0,
            FluxFamily::Oblique => SQRT_2,
            FluxFamily::Linear { .. } => 0.0,
            // |phi1''| peaks where u^4 - 6u^2 + 1 = 0, i.e. u = sqrt(2) - 1
            FluxFamily::Saturating => saturating_d2(SQRT_2 - 1.0).abs(),
        };
        Self {
            family,
            d2phi_bound,
        }
    }

    pub fn bbm() -> Self {
        Self::new(FluxFamily::Bbm)
    }

    pub fn linear(a: f64, b: f64) -> Self {
        Self::new(FluxFamily::Linear { a, b })
    }

    pub fn quadratic() -> Self {
        Self::new(FluxFamily::Quadratic)
    }

    /// Looks a family up by its config name.
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let no_params = |family| {
            if params.is_empty() {
                Ok(Self::new(family))
            } else {
                Err(Error::invalid("flux_params", format!("flux `{name}` takes no parameters")))
            }
        };
        match name {
            "bbm" => no_params(FluxFamily::Bbm),
            "oblique" => no_params(FluxFamily::Oblique),
            "saturating" => no_params(FluxFamily::Saturating),
            "quadratic" => no_params(FluxFamily::Quadratic),
            "linear" => match params {
                [a, b] if a.is_finite() && b.is_finite() => Ok(Self::linear(*a, *b)),
                _ => Err(Error::invalid("flux_params", "flux `linear` takes two finite parameters a, b")),
            },
            other => Err(Error::invalid("flux", format!("unknown flux family `{other}`"))),
        }
    }

    pub fn family(&self) -> FluxFamily {
        self.family
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            FluxFamily::Bbm => "bbm",
            FluxFamily::Oblique => "oblique",
            FluxFamily::Saturating => "saturating",
            FluxFamily::Linear { .. } => "linear",
            FluxFamily::Quadratic => "quadratic",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self.family {
            FluxFamily::Linear { a, b } => vec![a, b],
            _ => Vec::new(),
        }
    }

    /// `sup |phi''|` (Euclidean norm of the vector).
    pub fn d2phi_bound(&self) -> f64 {
        self.d2phi_bound
    }

    pub fn phi(&self, u: f64) -> [f64; 2] {
        match self.family {
            FluxFamily::Bbm => [u + 0.5 * u * u, 0.0],
            FluxFamily::Oblique => [u + 0.5 * u * u, 0.5 * u * u],
            FluxFamily::Saturating => [u + u * u * u / (1.0 + u * u), 0.0],
            FluxFamily::Linear { a, b } => [a * u, b * u],
            FluxFamily::Quadratic => [0.5 * u * u, 0.0],
        }
    }

    pub fn dphi(&self, u: f64) -> [f64; 2] {
        match self.family {
            FluxFamily::Bbm => [1.0 + u, 0.0],
            FluxFamily::Oblique => [1.0 + u, u],
            FluxFamily::Saturating => {
                let q = 1.0 + u * u;
                [1.0 + (3.0 * u * u + u.powi(4)) / (q * q), 0.0]
            }
            FluxFamily::Linear { a, b } => [a, b],
            FluxFamily::Quadratic => [u, 0.0],
        }
    }

    pub fn d2phi(&self, u: f64) -> [f64; 2] {
        match self.family {
            FluxFamily::Bbm => [1.0, 0.0],
            FluxFamily::Oblique => [1.0, 1.0],
            FluxFamily::Saturating => [saturating_d2(u), 0.0],
            FluxFamily::Linear { .. } => [0.0, 0.0],
            FluxFamily::Quadratic => [1.0, 0.0],
        }
    }

    /// Closed-form `Phi` with `Phi' = phi` and `Phi(0) = 0`.
    pub fn antiderivative(&self, u: f64) -> [f64; 2] {
        let u2 = u * u;
        match self.family {
            FluxFamily::Bbm => [0.5 * u2 + u2 * u / 6.0, 0.0],
            FluxFamily::Oblique => [0.5 * u2 + u2 * u / 6.0, u2 * u / 6.0],
            FluxFamily::Saturating => [u2 - 0.5 * u2.ln_1p(), 0.0],
            FluxFamily::Linear { a, b } => [0.5 * a * u2, 0.5 * b * u2],
            FluxFamily::Quadratic => [u2 * u / 6.0, 0.0],
        }
    }
}

fn saturating_d2(u: f64) -> f64 {
    let q = 1.0 + u * u;
    (6.0 * u - 2.0 * u * u * u) / (q * q * q)
}

/// One wavemaker pulse `a exp(-(x1 - c)^2 / w^2) sin(omega t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pulse {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Pulse {
    fn envelope(&self, x1: f64) -> f64 {
        let z = (x1 - self.center) / self.width;
        self.amplitude * (-z * z).exp()
    }

    fn envelope_xx(&self, x1: f64) -> f64 {
        let w2 = self.width * self.width;
        let d = x1 - self.center;
        self.envelope(x1) * (4.0 * d * d / (w2 * w2) - 2.0 / w2)
    }
}

/// Boundary datum `h(x1, t)`: a finite sum of pulses (empty sum is `h = 0`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundarySignal {
    pub pulses: Vec<Pulse>,
}

impl BoundarySignal {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn pulse(amplitude: f64, center: f64, width: f64, omega: f64, phase: f64) -> Self {
        Self {
            pulses: vec![Pulse {
                amplitude,
                center,
                width,
                omega,
                phase,
            }],
        }
    }

    /// Builds a signal from rows `[amplitude, center, width, omega, phase]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let mut pulses = Vec::with_capacity(rows.len());
        for row in rows {
            match row.as_slice() {
                &[amplitude, center, width, omega, phase] => {
                    if row.iter().any(|v| !v.is_finite()) || width <= 0.0 {
                        return Err(Error::invalid("signal", "pulse parameters must be finite with width > 0"));
                    }
                    pulses.push(Pulse {
                        amplitude,
                        center,
                        width,
                        omega,
                        phase,
                    });
                }
                _ => {
                    return Err(Error::invalid(
                        "signal",
                        "each pulse needs 5 values: amplitude, center, width, omega, phase",
                    ))
                }
            }
        }
        Ok(Self { pulses })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.pulses
            .iter()
            .map(|p| vec![p.amplitude, p.center, p.width, p.omega, p.phase])
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.pulses.iter().all(|p| p.amplitude == 0.0)
    }

    pub fn scaled(&self, eps: f64) -> Self {
        Self {
            pulses: self
                .pulses
                .iter()
                .map(|p| Pulse {
                    amplitude: p.amplitude * eps,
                    ..*p
                })
                .collect(),
        }
    }

    pub fn plus(&self, other: &BoundarySignal) -> Self {
        let mut pulses = self.pulses.clone();
        pulses.extend(other.pulses.iter().copied());
        Self { pulses }
    }

    pub fn h(&self, x1: f64, t: f64) -> f64 {
        self.pulses
            .iter()
            .map(|p| p.envelope(x1) * (p.omega * t + p.phase).sin())
            .sum()
    }

    pub fn ht(&self, x1: f64, t: f64) -> f64 {
        self.pulses
            .iter()
            .map(|p| p.envelope(x1) * p.omega * (p.omega * t + p.phase).cos())
            .sum()
    }

    /// Closed-form `h_x1x1`.
    pub fn hxx(&self, x1: f64, t: f64) -> f64 {
        self.pulses
            .iter()
            .map(|p| p.envelope_xx(x1) * (p.omega * t + p.phase).sin())
            .sum()
    }

    /// Samples `h(., t)` on the `x1` nodes.
    pub fn sample(&self, grid: &GridSpec, t: f64) -> Vec<f64> {
        grid.x1_nodes().into_iter().map(|x| self.h(x, t)).collect()
    }

    pub fn sample_t(&self, grid: &GridSpec, t: f64) -> Vec<f64> {
        grid.x1_nodes().into_iter().map(|x| self.ht(x, t)).collect()
    }

    /// Ratio of the pulse envelope at the `x1` seam to its maximum over the
    /// window; the signal is treated as periodic only when this is tiny.
    pub fn seam_ratio(&self, l1: f64) -> f64 {
        let env = |x: f64| -> f64 { self.pulses.iter().map(|p| p.envelope(x).abs()).sum() };
        let n = 4096;
        let peak = (0..=n)
            .map(|i| env(l1 * i as f64 / n as f64))
            .chain(self.pulses.iter().map(|p| env(p.center)))
            .fold(0.0_f64, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        env(0.0).max(env(l1)) / peak
    }

    /// `max_t ( ||h(t)||_{H^2(R)} + ||h_t(t)||_{H^2(R)} )` over `n` uniform
    /// samples of `[t0, t1]`, using the spectral line norm of the grid.
    pub fn c1h2_norm(&self, grid: &GridSpec, t0: f64, t1: f64, n: usize) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
                grid.line_sobolev_norm(&self.sample(grid, t), 2.0)
                    + grid.line_sobolev_norm(&self.sample_t(grid, t), 2.0)
            })
            .fold(0.0, f64::max)
    }

    /// `max_t ||h(t)||_{H^2(R)}` over `n` uniform samples of `[t0, t1]`.
    pub fn ch2_norm(&self, grid: &GridSpec, t0: f64, t1: f64, n: usize) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
                grid.line_sobolev_norm(&self.sample(grid, t), 2.0)
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialTerm {
    /// `a exp(-((x1-c1)^2 + (x2-c2)^2) / w^2)`
    Gaussian { amplitude: f64, c1: f64, c2: f64, width: f64 },
    /// `a cos(2 pi m x1 / L1) sin(pi j x2 / L2)`
    Mode { amplitude: f64, m: u32, j: u32 },
}

/// Initial datum `g` as a finite sum of closed-form terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InitialData {
    pub terms: Vec<InitialTerm>,
}

impl InitialData {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn gaussian(amplitude: f64, c1: f64, c2: f64, width: f64) -> Self {
        Self {
            terms: vec![InitialTerm::Gaussian {
                amplitude,
                c1,
                c2,
                width,
            }],
        }
    }

    pub fn mode(amplitude: f64, m: u32, j: u32) -> Self {
        Self {
            terms: vec![InitialTerm::Mode { amplitude, m, j }],
        }
    }

    pub fn from_name(kind: &str, rows: &[Vec<f64>]) -> Result<Self> {
        let mut terms = Vec::new();
        match kind {
            "zero" => {}
            "gaussian" => {
                for row in rows {
                    match row.as_slice() {
                        &[amplitude, c1, c2, width] if width > 0.0 && row.iter().all(|v| v.is_finite()) => {
                            terms.push(InitialTerm::Gaussian {
                                amplitude,
                                c1,
                                c2,
                                width,
                            })
                        }
                        _ => {
                            return Err(Error::invalid(
                                "initial",
                                "gaussian needs amplitude, c1, c2, width (width > 0)",
                            ))
                        }
                    }
                }
            }
            "mode" => {
                for row in rows {
                    match row.as_slice() {
                        &[amplitude, m, j]
                            if amplitude.is_finite()
                                && m >= 0.0
                                && j >= 1.0
                                && m.fract() == 0.0
                                && j.fract() == 0.0 =>
                        {
                            terms.push(InitialTerm::Mode {
                                amplitude,
                                m: m as u32,
                                j: j as u32,
                            })
                        }
                        _ => {
                            return Err(Error::invalid(
                                "initial",
                                "mode needs amplitude, m >= 0, j >= 1 (integers)",
                            ))
                        }
                    }
                }
            }
            other => return Err(Error::invalid("initial", format!("unknown initial family `{other}`"))),
        }
        Ok(Self { terms })
    }

    /// Family name and parameter rows; mixed families are not representable
    /// in the config file and report the first term's kind.
    pub fn describe(&self) -> (&'static str, Vec<Vec<f64>>) {
        let kind = match self.terms.first() {
            None => "zero",
            Some(InitialTerm::Gaussian { .. }) => "gaussian",
            Some(InitialTerm::Mode { .. }) => "mode",
        };
        let rows = self
            .terms
            .iter()
            .map(|t| match *t {
                InitialTerm::Gaussian {
                    amplitude,
                    c1,
                    c2,
                    width,
                } => vec![amplitude, c1, c2, width],
                InitialTerm::Mode { amplitude, m, j } => vec![amplitude, m as f64, j as f64],
            })
            .collect();
        (kind, rows)
    }

    pub fn scaled(&self, eps: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| match *t {
                    InitialTerm::Gaussian {
                        amplitude,
                        c1,
                        c2,
                        width,
                    } => InitialTerm::Gaussian {
                        amplitude: amplitude * eps,
                        c1,
                        c2,
                        width,
                    },
                    InitialTerm::Mode { amplitude, m, j } => InitialTerm::Mode {
                        amplitude: amplitude * eps,
                        m,
                        j,
                    },
                })
                .collect(),
        }
    }

    pub fn plus(&self, other: &InitialData) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().copied());
        Self { terms }
    }

    pub fn eval(&self, l1: f64, l2: f64, x1: f64, x2: f64) -> f64 {
        use std::f64::consts::PI;
        self.terms
            .iter()
            .map(|t| match *t {
                InitialTerm::Gaussian {
                    amplitude,
                    c1,
                    c2,
                    width,
                } => {
                    let r2 = ((x1 - c1).powi(2) + (x2 - c2).powi(2)) / (width * width);
                    amplitude * (-r2).exp()
                }
                InitialTerm::Mode { amplitude, m, j } => {
                    amplitude
                        * (2.0 * PI * m as f64 * x1 / l1).cos()
                        * (PI * j as f64 * x2 / l2).sin()
                }
            })
            .sum()
    }
}

/// Lifting profile and boundary-signal products at one instant.
#[derive(Clone, Debug)]
pub struct LiftingFields {
    pub t: f64,
    /// `e^{-x2}` on the interior rows.
    pub e: Vec<f64>,
    /// `h(., t)` and its derivatives on the `x1` nodes; `x1` derivatives are spectral.
    pub h: Vec<f64>,
    pub h_x: Vec<f64>,
    pub h_xx: Vec<f64>,
    pub h_t: Vec<f64>,
    pub h_xxt: Vec<f64>,
}

impl LiftingFields {
    pub fn new(grid: &GridSpec, signal: &BoundarySignal, t: f64) -> Self {
        let e: Vec<f64> = grid.x2_nodes().into_iter().map(|x| (-x).exp()).collect();
        let h = signal.sample(grid, t);
        let h_t = signal.sample_t(grid, t);
        let (h_x, h_xx, h_xxt) = if signal.is_zero() {
            let z = vec![0.0; grid.n1()];
            (z.clone(), z.clone(), z)
        } else {
            (grid.ddx1_line(&h), grid.d2dx1_line(&h), grid.d2dx1_line(&h_t))
        };
        Self {
            t,
            e,
            h,
            h_x,
            h_xx,
            h_t,
            h_xxt,
        }
    }

    /// Outer product `line(x1) * e^{-x2}` as a field.
    pub fn times_e(&self, line: &[f64]) -> Field {
        Field::new(Array2::from_shape_fn((line.len(), self.e.len()), |(a, k)| {
            line[a] * self.e[k]
        }))
    }

    pub fn h_e(&self) -> Field {
        self.times_e(&self.h)
    }

    pub fn hxx_e(&self) -> Field {
        self.times_e(&self.h_xx)
    }

    pub fn ht_e(&self) -> Field {
        self.times_e(&self.h_t)
    }

    pub fn hxxt_e(&self) -> Field {
        self.times_e(&self.h_xxt)
    }

    /// `h~ = h_x1x1t + nu1 (h_x1x1 + h)` on the `x1` nodes.
    pub fn forcing_line(&self, nu1: f64) -> Vec<f64> {
        (0..self.h.len())
            .map(|a| self.h_xxt[a] + nu1 * (self.h_xx[a] + self.h[a]))
            .collect()
    }
}

/// Lifted initial datum and the diagnostics gathered while building it.
#[derive(Clone, Debug)]
pub struct GTilde {
    pub field: Field,
    /// `max |g(x1, 0) - h(x1, 0)|`: corner compatibility, reported only.
    pub corner_mismatch: f64,
    /// `max |g~(x1, L2)|`: the value dropped by the far-wall clamp.
    pub far_wall_clamp: f64,
    /// `max |g~(x1, 0)|`: the value dropped at the near wall.
    pub near_wall_clamp: f64,
}

/// Relative size of the far-wall clamp above which a run is refused.
pub const FAR_WALL_GUARD: f64 = 1e-8;

/// `g~ = g - h(., 0) e^{-x2}` on the interior nodes.
pub fn make_gtilde(
    grid: &GridSpec,
    g: impl Fn(f64, f64) -> f64,
    signal: &BoundarySignal,
) -> Result<GTilde> {
    let x1 = grid.x1_nodes();
    let h0: Vec<f64> = x1.iter().map(|&x| signal.h(x, 0.0)).collect();
    let field = grid.sample(&g);
    let mut values = field.values;
    for (a, mut col) in values.outer_iter_mut().enumerate() {
        for (k, v) in col.iter_mut().enumerate() {
            *v -= h0[a] * (-grid.x2(k)).exp();
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial datum g~"));
    }
    let l2 = grid.l2();
    let mut corner_mismatch = 0.0_f64;
    let mut far = 0.0_f64;
    let mut near = 0.0_f64;
    for (a, &x) in x1.iter().enumerate() {
        let g0 = g(x, 0.0);
        let gl = g(x, l2) - h0[a] * (-l2).exp();
        if !g0.is_finite() || !gl.is_finite() {
            return Err(Error::NonFinite("initial datum g on the walls"));
        }
        corner_mismatch = corner_mismatch.max((g0 - h0[a]).abs());
        near = near.max((g0 - h0[a]).abs());
        far = far.max(gl.abs());
    }
    let field = Field::new(values);
    let max = field.max_abs().max(far).max(near);
    if far > FAR_WALL_GUARD * max {
        return Err(Error::TruncationGuard { clamp: far, max });
    }
    Ok(GTilde {
        field,
        corner_mismatch,
        far_wall_clamp: far,
        near_wall_clamp: near,
    })
}

/// Grid, model and data of one simulation, before lifting.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub grid: GridSpec,
    pub flux: FluxSpec,
    pub signal: BoundarySignal,
    pub initial: InitialData,
    pub nu1: f64,
    pub dealias: bool,
}

impl Scenario {
    pub fn problem(&self) -> Result<Problem> {
        Ok(Problem::new(&self.grid, self.flux, self.signal.clone(), self.nu1)?.with_dealias(self.dealias))
    }

    pub fn gtilde(&self) -> Result<GTilde> {
        let (l1, l2) = (self.grid.l1(), self.grid.l2());
        make_gtilde(&self.grid, |x1, x2| self.initial.eval(l1, l2, x1, x2), &self.signal)
    }

    /// Same scenario with data `(g + eps dg, h + eps dh)`.
    pub fn perturbed(&self, dg: &InitialData, dh: &BoundarySignal, eps: f64) -> Self {
        Self {
            initial: self.initial.plus(&dg.scaled(eps)),
            signal: self.signal.plus(&dh.scaled(eps)),
            ..self.clone()
        }
    }

    /// Same data on another grid.
    pub fn on_grid(&self, grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            ..self.clone()
        }
    }
}

/// Everything needed to evaluate the lifted vector field.
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: GridSpec,
    pub solver: HelmholtzSolver,
    pub flux: FluxSpec,
    pub signal: BoundarySignal,
    pub nu1: f64,
    pub dealias: bool,
}

impl Problem {
    pub fn new(grid: &GridSpec, flux: FluxSpec, signal: BoundarySignal, nu1: f64) -> Result<Self> {
        if !(nu1 >= 0.0 && nu1.is_finite()) {
            return Err(Error::invalid("nu1", format!("must be >= 0, got {nu1}")));
        }
        Ok(Self {
            grid: grid.clone(),
            solver: HelmholtzSolver::new(grid),
            flux,
            signal,
            nu1,
            dealias: false,
        })
    }

    pub fn with_dealias(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn lifting(&self, t: f64) -> LiftingFields {
        LiftingFields::new(&self.grid, &self.signal, t)
    }

    /// `u = v + h(., t) e^{-x2}` on the interior nodes.
    pub fn reconstruct_u(&self, v: &Field, t: f64) -> Field {
        let lift = self.lifting(t);
        Field::new(&v.values + &lift.h_e().values)
    }

    pub fn div_flux(&self, v: &Field, t: f64) -> Result<Field> {
        let lift = self.lifting(t);
        let c = self.grid.forward(v)?;
        let d2v = self.grid.ddx2_from_coeffs(&c);
        let d1v = self.grid.ddx1(v)?;
        Ok(div_flux_parts(&self.flux, v, &d1v, &d2v, &lift))
    }

    /// `h~ E - div phi(v + h E)`, band-limited when dealiasing is on.
    pub fn forcing(&self, v: &Field, t: f64) -> Result<Field> {
        let (forcing, _) = self.forcing_with_coeffs(v, t)?;
        self.grid.inverse(&forcing)
    }

    /// Forcing coefficients together with the coefficients of `v`.
    pub(crate) fn forcing_with_coeffs(&self, v: &Field, t: f64) -> Result<(SpectralCoeffs, SpectralCoeffs)> {
        let lift = self.lifting(t);
        let cv = self.grid.forward(v)?;
        let mut cf = self.neg_div_coeffs(v, &cv, &lift)?;
        if !self.signal.is_zero() {
            let cs = self.line_times_e_coeffs(&lift.forcing_line(self.nu1), &lift);
            cf.coeffs += &cs.coeffs;
        }
        Ok((cf, cv))
    }

    /// Coefficients of `-div phi(v + h E)` given `v` and its coefficients.
    pub(crate) fn neg_div_coeffs(&self, v: &Field, cv: &SpectralCoeffs, lift: &LiftingFields) -> Result<SpectralCoeffs> {
        let d2v = self.grid.ddx2_from_coeffs(cv);
        let d1v = self.grid.ddx1(v)?;
        let mut f = div_flux_parts(&self.flux, v, &d1v, &d2v, lift);
        f.values.mapv_inplace(|x| -x);
        let mut cf = self.grid.forward(&f)?;
        if self.dealias {
            self.grid.dealias(&mut cf);
        }
        Ok(cf)
    }

    /// Coefficients of `line(x1) e^{-x2}`, band-limited when dealiasing is on.
    pub(crate) fn line_times_e_coeffs(&self, line: &[f64], lift: &LiftingFields) -> SpectralCoeffs {
        let mut c = self.grid.forward_separable(line, &lift.e);
        if self.dealias {
            self.grid.dealias(&mut c);
        }
        c
    }

    /// `v_t` for the configured `nu1`.
    pub fn rhs(&self, v: &Field, t: f64) -> Result<Field> {
        let (mut cf, cv) = self.forcing_with_coeffs(v, t)?;
        if self.nu1 != 0.0 {
            let nu1 = self.nu1;
            Zip::from(&mut cf.coeffs)
                .and(&cv.coeffs)
                .and(self.grid.symbol())
                .for_each(|f, &c, &l| *f -= c * (nu1 * l));
        }
        self.solver.solve_coeffs_in_place(&mut cf);
        self.grid.inverse(&cf)
    }

    /// Integrates `div Phi(w) = phi(w) . grad w` over the strip and returns it
    /// with the wall line integrals of `Phi(w) . n`; the two agree up to
    /// quadrature error (divergence theorem with `Phi' = phi`).
    pub fn divergence_theorem_check(&self, v: &Field, t: f64) -> Result<(f64, f64)> {
        let grid = &self.grid;
        let lift = self.lifting(t);
        let n2 = grid.n2();
        let d2_full = grid.ddx2_with_walls(v)?;
        let d1v = grid.ddx1(v)?;
        let l2 = grid.l2();
        let e_far = (-l2).exp();
        let mut integrand = Array2::zeros((grid.n1(), n2 + 1));
        for a in 0..grid.n1() {
            for k in 0..=n2 {
                let (vv, d1, e) = if k == 0 {
                    (0.0, 0.0, 1.0)
                } else if k == n2 {
                    (0.0, 0.0, e_far)
                } else {
                    (v.values[[a, k - 1]], d1v.values[[a, k - 1]], lift.e[k - 1])
                };
                let w = vv + lift.h[a] * e;
                let w1 = d1 + lift.h_x[a] * e;
                let w2 = d2_full[[a, k]] - lift.h[a] * e;
                let p = self.flux.phi(w);
                integrand[[a, k]] = p[0] * w1 + p[1] * w2;
            }
        }
        let area = grid.integrate_simpson_with_walls(&integrand);
        let boundary: f64 = (0..grid.n1())
            .map(|a| {
                self.flux.antiderivative(lift.h[a] * e_far)[1] - self.flux.antiderivative(lift.h[a])[1]
            })
            .sum::<f64>()
            * grid.dx1();
        Ok((area, boundary))
    }
}

/// `phi'_1(w) w_x1 + phi'_2(w) w_x2` with `w = v + h E`, `w_x1 = v_x1 + h_x1 E`,
/// and `w_x2 = v_x2 - h E`.
fn div_flux_parts(
    flux: &FluxSpec,
    v: &Field,
    d1v: &Field,
    d2v_full: &Array2<f64>,
    lift: &LiftingFields,
) -> Field {
    let n = d2v_full.dim().1 - 1;
    let d2v = d2v_full.slice(s![.., 1..n]);
    let mut out = Array2::zeros(v.shape());
    for ((a, k), o) in out.indexed_iter_mut() {
        let e = lift.e[k];
        let w = v.values[[a, k]] + lift.h[a] * e;
        let w1 = d1v.values[[a, k]] + lift.h_x[a] * e;
        let w2 = d2v[[a, k]] - lift.h[a] * e;
        let dp = flux.dphi(w);
        *o = dp[0] * w1 + dp[1] * w2;
    }
    Field::new(out)
}

/// `div phi(v + h E)` at time `t`.
pub fn div_flux(
    grid: &GridSpec,
    v: &Field,
    signal: &BoundarySignal,
    t: f64,
    flux: &FluxSpec,
) -> Result<Field> {
    Problem::new(grid, *flux, signal.clone(), 0.0)?.div_flux(v, t)
}

/// `v_t = (I - Delta)^{-1}{ h_x1x1t E - div phi(v + h E) }`.
pub fn rhs_gbbm(
    v: &Field,
    signal: &BoundarySignal,
    t: f64,
    flux: &FluxSpec,
    solver: &HelmholtzSolver,
) -> Result<Field> {
    Problem::new(solver.grid(), *flux, signal.clone(), 0.0)?.rhs(v, t)
}

/// `v_t = (I - Delta)^{-1}{ nu1 Delta v - div phi(v + h E) + h~ E }`,
/// `h~ = h_x1x1t + nu1 (h_x1x1 + h)`.
pub fn rhs_burgers(
    v: &Field,
    signal: &BoundarySignal,
    t: f64,
    flux: &FluxSpec,
    nu1: f64,
    solver: &HelmholtzSolver,
) -> Result<Field> {
    Problem::new(solver.grid(), *flux, signal.clone(), nu1)?.rhs(v, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::new(24.0, 10.0, 48, 32).unwrap()
    }

    fn pulse() -> BoundarySignal {
        BoundarySignal::pulse(0.3, 12.0, 2.0, 1.3, 0.4)
    }

    #[test]
    fn fluxes_vanish_at_zero_and_match_differences() {
        let families = [
            FluxSpec::bbm(),
            FluxSpec::new(FluxFamily::Oblique),
            FluxSpec::new(FluxFamily::Saturating),
            FluxSpec::linear(0.7, -0.2),
            FluxSpec::quadratic(),
        ];
        for f in families {
            assert_eq!(f.phi(0.0), [0.0, 0.0]);
            assert_eq!(f.antiderivative(0.0), [0.0, 0.0]);
            for &u in &[-2.3, -0.4, 0.0, 0.9, 3.1] {
                let eps = 1e-5;
                for i in 0..2 {
                    let fd = (f.phi(u + eps)[i] - f.phi(u - eps)[i]) / (2.0 * eps);
                    assert!((fd - f.dphi(u)[i]).abs() < 1e-8, "{} dphi at {u}", f.name());
                    let fd2 = (f.dphi(u + eps)[i] - f.dphi(u - eps)[i]) / (2.0 * eps);
                    assert!((fd2 - f.d2phi(u)[i]).abs() < 1e-7, "{} d2phi at {u}", f.name());
                }
            }
            // certified bound holds on a dense sweep
            let worst = (0..=40000)
                .map(|i| -20.0 + i as f64 * 1e-3)
                .map(|u| {
                    let d = f.d2phi(u);
                    (d[0] * d[0] + d[1] * d[1]).sqrt()
                })
                .fold(0.0, f64::max);
            assert!(worst <= f.d2phi_bound() * (1.0 + 1e-12), "{}", f.name());
        }
    }

    #[test]
    fn antiderivatives_match_quadrature() {
        let families = [
            FluxSpec::bbm(),
            FluxSpec::new(FluxFamily::Oblique),
            FluxSpec::new(FluxFamily::Saturating),
            FluxSpec::linear(0.7, -0.2),
            FluxSpec::quadratic(),
        ];
        for f in families {
            for &u in &[-1.7, 0.35, 2.2] {
                // composite Simpson on [0, u] with 2000 panels
                let n = 2000;
                let h = u / n as f64;
                for i in 0..2 {
                    let mut acc = f.phi(0.0)[i] + f.phi(u)[i];
                    for k in 1..n {
                        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                        acc += w * f.phi(k as f64 * h)[i];
                    }
                    let quad = acc * h / 3.0;
                    assert!((quad - f.antiderivative(u)[i]).abs() < 1e-10, "{} {u}", f.name());
                }
            }
        }
    }

    #[test]
    fn flux_lookup() {
        assert_eq!(FluxSpec::from_name("bbm", &[]).unwrap(), FluxSpec::bbm());
        assert_eq!(FluxSpec::from_name("linear", &[1.0, 2.0]).unwrap(), FluxSpec::linear(1.0, 2.0));
        assert!(FluxSpec::from_name("linear", &[1.0]).is_err());
        assert!(FluxSpec::from_name("bbm", &[1.0]).is_err());
        assert!(FluxSpec::from_name("cubic", &[]).is_err());
    }

    #[test]
    fn signal_time_derivative_matches_differences() {
        let s = pulse().plus(&BoundarySignal::pulse(-0.1, 8.0, 1.5, 2.0, 0.0));
        for &(x, t) in &[(11.0, 0.3), (9.5, 1.7), (12.0, 0.0)] {
            let mut errs = Vec::new();
            for dt in [1e-2, 5e-3] {
                let fd = (s.h(x, t + dt) - s.h(x, t - dt)) / (2.0 * dt);
                errs.push((fd - s.ht(x, t)).abs());
            }
            assert!(errs[0] / errs[1] > 3.8 && errs[0] / errs[1] < 4.2, "{errs:?}");
        }
        let g = grid();
        assert!(s.seam_ratio(g.l1()) < 1e-10);
        assert!(BoundarySignal::zero().is_zero());
        assert_eq!(BoundarySignal::zero().c1h2_norm(&g, 0.0, 1.0, 5), 0.0);
    }

    #[test]
    fn lifting_products_are_consistent() {
        let g = grid();
        let s = pulse();
        let lift = LiftingFields::new(&g, &s, 0.8);
        let twice = g.ddx1(&g.ddx1(&lift.h_e()).unwrap()).unwrap();
        let mut worst = 0.0_f64;
        for ((a, k), v) in twice.values.indexed_iter() {
            worst = worst.max((v / lift.e[k] - lift.h_xx[a]).abs());
        }
        assert!(worst < 1e-10, "{worst}");
        // spectral h_xx against the closed form
        for (a, x) in g.x1_nodes().into_iter().enumerate() {
            assert!((lift.h_xx[a] - s.hxx(x, 0.8)).abs() < 1e-10);
        }
    }

    #[test]
    fn gtilde_cases() {
        let g = grid();
        let gauss = InitialData::gaussian(0.5, 12.0, 4.0, 1.0);
        let eval = |x1: f64, x2: f64| gauss.eval(g.l1(), g.l2(), x1, x2);

        let plain = make_gtilde(&g, eval, &BoundarySignal::zero()).unwrap();
        assert_eq!(plain.field, g.sample(eval));

        // h(., 0) != 0 needs a nonzero phase
        let s = BoundarySignal::pulse(0.2, 12.0, 2.0, 1.0, 0.5);
        let wide = GridSpec::new(24.0, 20.0, 48, 32).unwrap();
        let lifted = make_gtilde(&wide, |x1, x2| s.h(x1, 0.0) * (-x2).exp(), &s).unwrap();
        assert!(lifted.field.max_abs() < 1e-15);
        assert!(lifted.corner_mismatch < 1e-15);

        let mixed = make_gtilde(&wide, |x1, x2| gauss.eval(24.0, 20.0, x1, x2), &s).unwrap();
        let x1 = wide.x1_nodes();
        let x2 = wide.x2_nodes();
        for i in 0..20 {
            let (a, k) = ((i * 7) % x1.len(), (i * 5) % x2.len());
            let direct = gauss.eval(24.0, 20.0, x1[a], x2[k]) - s.h(x1[a], 0.0) * (-x2[k]).exp();
            assert!((mixed.field.values[[a, k]] - direct).abs() < 1e-12);
        }
        assert!(mixed.corner_mismatch > 0.0);

        // the lifted profile at L2 = 10 is far from negligible
        assert!(matches!(
            make_gtilde(&g, |_, _| 0.0, &s),
            Err(Error::TruncationGuard { .. })
        ));
        assert!(matches!(
            make_gtilde(&g, |_, _| f64::NAN, &BoundarySignal::zero()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn div_flux_zero_and_linear() {
        let g = grid();
        let z = div_flux(&g, &g.zeros(), &BoundarySignal::zero(), 0.0, &FluxSpec::bbm()).unwrap();
        assert_eq!(z.max_abs(), 0.0);

        let v = g.sample(|x1, x2| (-(x1 - 12.0).powi(2) / 4.0 - (x2 - 5.0).powi(2)).exp());
        let s = pulse();
        let t = 0.6;
        let (a, b) = (0.8, -0.3);
        let got = div_flux(&g, &v, &s, t, &FluxSpec::linear(a, b)).unwrap();
        let lift = LiftingFields::new(&g, &s, t);
        let w = Field::new(&v.values + &lift.h_e().values);
        let w1 = g.ddx1(&w).unwrap();
        let w2 = g.ddx2_dirichlet(&v).unwrap().sub(&lift.h_e());
        let expected = Field::new(&w1.values * a + &w2.values * b);
        assert!(got.sub(&expected).max_abs() < 1e-11);
    }

    #[test]
    fn div_flux_quadratic_matches_fourth_order_differences() {
        let mut errs = Vec::new();
        for &n in &[32usize, 64] {
            let g = GridSpec::new(2.0 * PI, PI, n, n).unwrap();
            let v = g.sample(|x1, x2| 0.5 * x1.cos() * x2.sin());
            let d = div_flux(&g, &v, &BoundarySignal::zero(), 0.0, &FluxSpec::quadratic()).unwrap();
            let phi = v.values.mapv(|u| 0.5 * u * u);
            let h = g.dx1();
            let mut err = 0.0_f64;
            for a in 0..n {
                let at = |s: i64| phi[[((a as i64 + s).rem_euclid(n as i64)) as usize, n / 2]];
                let fd = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
                err = err.max((fd - d.values[[a, n / 2]]).abs());
            }
            errs.push(err);
        }
        let rate = errs[0] / errs[1];
        assert!(rate > 12.0 && rate < 20.0, "{errs:?}");
    }

    #[test]
    fn rhs_zero_linearity_and_composition() {
        let g = grid();
        let solver = HelmholtzSolver::new(&g);
        let zero = rhs_gbbm(&g.zeros(), &BoundarySignal::zero(), 0.0, &FluxSpec::bbm(), &solver).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        let v = g.sample(|x1, x2| (-(x1 - 10.0).powi(2) / 3.0 - (x2 - 4.0).powi(2)).exp());
        let lin = FluxSpec::linear(1.0, 0.0);
        let r1 = rhs_gbbm(&v, &BoundarySignal::zero(), 0.0, &lin, &solver).unwrap();
        let r2 = rhs_gbbm(&v.scaled(2.0), &BoundarySignal::zero(), 0.0, &lin, &solver).unwrap();
        assert!(r2.sub(&r1.scaled(2.0)).max_abs() < 1e-13);

        let s = pulse();
        let t = 1.1;
        let flux = FluxSpec::bbm();
        let got = rhs_gbbm(&v, &s, t, &flux, &solver).unwrap();
        let lift = LiftingFields::new(&g, &s, t);
        let forcing = lift.hxxt_e().sub(&div_flux(&g, &v, &s, t, &flux).unwrap());
        let expected = solver.solve(&forcing).unwrap();
        assert!(got.sub(&expected).max_abs() < 1e-12);
    }

    #[test]
    fn burgers_reduces_and_dissipates() {
        let g = grid();
        let solver = HelmholtzSolver::new(&g);
        let v = g.sample(|x1, x2| (-(x1 - 10.0).powi(2) / 3.0 - (x2 - 4.0).powi(2)).exp());
        let s = pulse();
        let flux = FluxSpec::bbm();
        let a = rhs_gbbm(&v, &s, 0.4, &flux, &solver).unwrap();
        let b = rhs_burgers(&v, &s, 0.4, &flux, 0.0, &solver).unwrap();
        assert!(a.sub(&b).max_abs() < 1e-14);
        assert!(rhs_burgers(&v, &s, 0.4, &flux, -1.0, &solver).is_err());

        // single mode, phi = 0, h = 0: rhs = -nu1 lambda / (1 + lambda) v
        let (l1, l2) = (g.l1(), g.l2());
        let mode = g.sample(|x1, x2| (2.0 * PI * 2.0 * x1 / l1).cos() * (PI * 3.0 * x2 / l2).sin());
        let lam = (4.0 * PI / l1).powi(2) + (3.0 * PI / l2).powi(2);
        let nu1 = 0.7;
        let r = rhs_burgers(&mode, &BoundarySignal::zero(), 0.0, &FluxSpec::linear(0.0, 0.0), nu1, &solver)
            .unwrap();
        assert!(r.sub(&mode.scaled(-nu1 * lam / (1.0 + lam))).max_abs() < 1e-12);

        // energy pairing <(I - Delta) rhs, v> = -||grad v||^2
        let r = rhs_burgers(&v, &BoundarySignal::zero(), 0.0, &FluxSpec::linear(0.0, 0.0), 1.0, &solver)
            .unwrap();
        let pairing = g.inner(&solver.apply(&r).unwrap(), &v);
        let cv = g.forward(&v).unwrap();
        let grad_sq = g.weighted_energy(&cv, |l| l);
        assert!((pairing + grad_sq).abs() < 1e-10 * grad_sq);
    }

    #[test]
    fn divergence_theorem_with_antiderivative() {
        // the area side carries Simpson error in x2, fourth order
        let gap = |n2: usize| {
            let g = GridSpec::new(24.0, 8.0, 64, n2).unwrap();
            let p = Problem::new(&g, FluxSpec::new(FluxFamily::Oblique), pulse(), 0.0).unwrap();
            let v = g.sample(|x1, x2| 0.4 * (-(x1 - 12.0).powi(2) / 4.0 - (x2 - 4.0).powi(2)).exp());
            let (area, boundary) = p.divergence_theorem_check(&v, 0.9).unwrap();
            assert!(boundary.abs() > 1e-3);
            (area - boundary).abs() / boundary.abs()
        };
        let coarse = gap(64);
        let fine = gap(128);
        assert!(fine < 1e-5, "{fine}");
        assert!(coarse / fine > 12.0, "{coarse} {fine}");
    }

    #[test]
    fn rhs_is_lipschitz_on_a_ball() {
        use rand::{Rng, SeedableRng};
        let g = GridSpec::new(24.0, 10.0, 32, 16).unwrap();
        let p = Problem::new(&g, FluxSpec::bbm(), pulse(), 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut smooth = |amp: f64| {
            let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            g.sample(move |x1, x2| {
                amp * (c[0] * (x1 * 0.26).sin() * (x2 * 0.31).sin()
                    + c[1] * (x1 * 0.52).cos() * (x2 * 0.63).sin()
                    + c[2] * (x2 * 0.94).sin()
                    + c[3] * (x1 * 0.26).cos() * (x2 * 1.26).sin()
                    + c[4] * (x1 * 0.79).sin() * (x2 * 0.31).sin()
                    + c[5] * (x2 * 1.57).sin())
            })
        };
        let mut worst = 0.0_f64;
        for _ in 0..20 {
            let v1 = smooth(0.3);
            let v2 = smooth(0.3);
            let num = g.sobolev_norm(&p.rhs(&v1, 0.5).unwrap().sub(&p.rhs(&v2, 0.5).unwrap()), 2.0).unwrap();
            let den = g.sobolev_norm(&v1.sub(&v2), 2.0).unwrap();
            worst = worst.max(num / den);
        }
        assert!(worst.is_finite() && worst < 10.0, "{worst}");
    }
}
