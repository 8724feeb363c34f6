//! Time evolution of the lifted unknown `v`.
//!
//! Two independent routes are provided:
//!
//! - [`picard_window`]: fixed-point iteration of the integral form
//!   `v = g~ + B h + C v` on a short window, with the time integral in `C`
//!   evaluated by composite trapezoid on stored iterate trajectories;
//! - [`rk4_advance`]: classical RK4 on the method-of-lines system
//!   `v_t = (I - Delta)^{-1}{ ... }`.
//!
//! [`run`] chains either route (or both) up to the final time.
use ndarray::Zip;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralCoeffs};
use crate::problem::{LiftingFields, Problem};

/// Lifted solution at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub v: Field,
    pub t: f64,
    pub step_count: u64,
    pub flux_name: String,
    pub nu1: f64,
    pub dt: f64,
}

impl SimState {
    pub fn initial(problem: &Problem, v: Field, dt: f64) -> Self {
        Self {
            v,
            t: 0.0,
            step_count: 0,
            flux_name: problem.flux.name().to_string(),
            nu1: problem.nu1,
            dt,
        }
    }
}

/// Outcome of one Picard window.
#[derive(Clone, Debug, PartialEq)]
pub struct PicardReport {
    pub t0: f64,
    /// Window length `S`.
    pub window: f64,
    /// Ball radius `R` (infinite when unconstrained).
    pub radius: f64,
    pub n_quad: usize,
    /// `||v_{n+1} - v_n||_{C_t H^2}` for each iteration.
    pub iterates: Vec<f64>,
    pub converged: bool,
}

impl PicardReport {
    /// Ratios of consecutive iterate differences.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.iterates.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// True when the difference sequence decreases monotonically from the
    /// first point where it drops below its first entry.
    pub fn eventually_decreasing(&self) -> bool {
        let Some(&first) = self.iterates.first() else {
            return false;
        };
        let start = self.iterates.iter().position(|&d| d < first).unwrap_or(0);
        self.iterates[start..].windows(2).all(|w| w[1] <= w[0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardOptions {
    /// Time nodes on `[t0, t0 + S]`, at least 2.
    pub n_quad: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Iterates whose `C_t H^2` norm exceeds this abort the window.
    pub radius: Option<f64>,
}

/// Converged trajectory of a Picard window on its quadrature nodes.
#[derive(Clone, Debug)]
pub struct PicardWindow {
    pub times: Vec<f64>,
    pub trajectory: Vec<Field>,
    pub report: PicardReport,
}

impl PicardWindow {
    pub fn endpoint(&self) -> &Field {
        self.trajectory.last().expect("window has at least two nodes")
    }
}

/// Solves the integral form on `[t0, t0 + window]` by Picard iteration.
///
/// For `nu1 = 0`:
/// `v(t) = v0 + (I-Delta)^{-1}{(h_x1x1(t) - h_x1x1(t0)) E} - int_t0^t (I-Delta)^{-1} div phi ds`.
/// For `nu1 > 0` the exponential kernel form
/// `v(t) = e^{-nu1 (t-t0)} v0 + int_t0^t e^{-nu1 (t-s)} (I-Delta)^{-1}{nu1 v + h~ E - div phi} ds`
/// is used.
pub fn picard_window(
    problem: &Problem,
    v0: &Field,
    t0: f64,
    window: f64,
    opts: &PicardOptions,
) -> Result<PicardWindow> {
    if !(window > 0.0 && window.is_finite()) {
        return Err(Error::invalid("window", format!("must be positive, got {window}")));
    }
    if opts.n_quad < 2 {
        return Err(Error::invalid("n_quad", "need at least 2 quadrature nodes"));
    }
    let grid = &problem.grid;
    let solver = &problem.solver;
    let nu1 = problem.nu1;
    let nq = opts.n_quad;
    let step = window / (nq - 1) as f64;
    let times: Vec<f64> = (0..nq).map(|q| t0 + step * q as f64).collect();
    let lifts: Vec<LiftingFields> = times.iter().map(|&t| problem.lifting(t)).collect();
    let decay = (-nu1 * step).exp();

    let c0 = grid.forward(v0)?;
    // v-independent part of the iteration
    let mut fixed: Vec<SpectralCoeffs> = Vec::with_capacity(nq);
    if nu1 == 0.0 {
        for lift in &lifts {
            let mut c = c0.clone();
            if !problem.signal.is_zero() {
                let diff: Vec<f64> = lift
                    .h_xx
                    .iter()
                    .zip(&lifts[0].h_xx)
                    .map(|(a, b)| a - b)
                    .collect();
                let mut b = problem.line_times_e_coeffs(&diff, lift);
                solver.solve_coeffs_in_place(&mut b);
                c.coeffs += &b.coeffs;
            }
            fixed.push(c);
        }
    } else {
        let forcing: Vec<SpectralCoeffs> = lifts
            .iter()
            .map(|lift| {
                let mut c = problem.line_times_e_coeffs(&lift.forcing_line(nu1), lift);
                solver.solve_coeffs_in_place(&mut c);
                c
            })
            .collect();
        let integral = exp_trapezoid(&forcing, step, decay);
        for (q, int) in integral.into_iter().enumerate() {
            let mut c = c0.clone();
            let k = (-nu1 * (times[q] - t0)).exp();
            c.coeffs.mapv_inplace(|z| z * k);
            c.coeffs += &int.coeffs;
            fixed.push(c);
        }
    }

    let mut report = PicardReport {
        t0,
        window,
        radius: opts.radius.unwrap_or(f64::INFINITY),
        n_quad: nq,
        iterates: Vec::new(),
        converged: false,
    };

    let mut current = fixed.clone();
    for _ in 0..opts.max_iter {
        let mut integrand = Vec::with_capacity(nq);
        for (q, c) in current.iter().enumerate() {
            let v = grid.inverse(c)?;
            let mut g = problem.neg_div_coeffs(&v, c, &lifts[q])?;
            if nu1 != 0.0 {
                g.coeffs.scaled_add(nu1.into(), &c.coeffs);
            }
            solver.solve_coeffs_in_place(&mut g);
            integrand.push(g);
        }
        let integral = exp_trapezoid(&integrand, step, decay);
        let mut diff = 0.0_f64;
        let mut norm = 0.0_f64;
        let next: Vec<SpectralCoeffs> = fixed
            .iter()
            .zip(integral)
            .zip(&current)
            .map(|((f, i), prev)| {
                let c = SpectralCoeffs {
                    coeffs: &f.coeffs + &i.coeffs,
                };
                let d = SpectralCoeffs {
                    coeffs: &c.coeffs - &prev.coeffs,
                };
                diff = diff.max(grid.sobolev_norm_coeffs(&d, 2.0).unwrap_or(f64::NAN));
                norm = norm.max(grid.sobolev_norm_coeffs(&c, 2.0).unwrap_or(f64::NAN));
                c
            })
            .collect();
        if !diff.is_finite() || !norm.is_finite() {
            return Err(Error::NonFinite("Picard iterate"));
        }
        report.iterates.push(diff);
        if let Some(r) = opts.radius {
            if norm > r {
                return Err(Error::PicardBallExceeded { radius: r, norm });
            }
        }
        current = next;
        if diff <= opts.tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        return Err(Error::PicardNonConvergence(Box::new(report)));
    }
    let trajectory = current
        .iter()
        .map(|c| grid.inverse(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(PicardWindow {
        times,
        trajectory,
        report,
    })
}

/// Cumulative `int_{t0}^{t_q} e^{-nu1 (t_q - s)} f(s) ds` by trapezoid, with
/// `decay = e^{-nu1 step}`.
fn exp_trapezoid(values: &[SpectralCoeffs], step: f64, decay: f64) -> Vec<SpectralCoeffs> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = SpectralCoeffs {
        coeffs: ndarray::Array2::zeros(values[0].shape()),
    };
    out.push(acc.clone());
    for q in 1..values.len() {
        let half = 0.5 * step;
        Zip::from(&mut acc.coeffs)
            .and(&values[q - 1].coeffs)
            .and(&values[q].coeffs)
            .for_each(|a, &prev, &cur| *a = *a * decay + prev * (half * decay) + cur * half);
        out.push(acc.clone());
    }
    out
}

/// Heuristic window length for the Picard solver.
///
/// With `C1 = ||g~||_{H^2} + c_B ||h||_{C_t H^2}` and a calibrated Lipschitz
/// constant `C2` of the `C` operator, the contraction condition
/// `C2 S (1 + 2 C1) <= 1/2` gives `S = 1 / (2 C2 (1 + 2 C1))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowPlanner {
    /// Bound of the `B` operator: `||B h||_{H^2} <= c_B ||h||_{C_t H^2(R)}`.
    pub c_b: f64,
    pub c2_hat: f64,
    pub max_window: f64,
}

/// `||B h||_{H^2} <= ||(h_x1x1(t) - h_x1x1(t0)) E||_{L^2} <= 2 ||E||_{L^2} max ||h||_{H^2}`
/// and `||E||_{L^2(0, L2)} <= 1/sqrt(2)`.
pub const B_OPERATOR_BOUND: f64 = std::f64::consts::SQRT_2;

impl WindowPlanner {
    /// Measures `C2` by random probing of `v -> (I-Delta)^{-1}{nu1 v - div phi(v + h E)}`
    /// on the ball of radius `radius` at time `t`; the largest observed ratio is
    /// divided by `1 + radius`.
    pub fn calibrate(
        problem: &Problem,
        t: f64,
        radius: f64,
        n_probes: usize,
        seed: u64,
        max_window: f64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let worst = probe_lipschitz(problem, t, radius, n_probes, &mut rng)?;
        Ok(Self {
            c_b: B_OPERATOR_BOUND,
            c2_hat: worst / (1.0 + radius),
            max_window,
        })
    }

    pub fn c1_hat(&self, g_tilde_h2: f64, h_norm: f64) -> f64 {
        g_tilde_h2 + self.c_b * h_norm
    }

    /// `R = 2 C1`.
    pub fn ball_radius(&self, g_tilde_h2: f64, h_norm: f64) -> f64 {
        2.0 * self.c1_hat(g_tilde_h2, h_norm)
    }

    pub fn suggest(&self, g_tilde_h2: f64, h_norm: f64) -> f64 {
        suggest_window(g_tilde_h2, h_norm, self)
    }
}

/// `S = min(max_window, 1 / (2 C2 (1 + 2 C1)))`; zero data gives the cap.
pub fn suggest_window(g_tilde_h2: f64, h_norm: f64, planner: &WindowPlanner) -> f64 {
    let c1 = planner.c1_hat(g_tilde_h2.max(0.0), h_norm.max(0.0));
    if c1 == 0.0 || planner.c2_hat <= 0.0 {
        return planner.max_window;
    }
    (1.0 / (2.0 * planner.c2_hat * (1.0 + 2.0 * c1))).min(planner.max_window)
}

/// Largest `||C v1 - C v2||_{H^2} / ||v1 - v2||_{H^2}` over `n_probes` random
/// smooth pairs with `||v_i||_{H^2} <= radius`.
pub fn probe_lipschitz(
    problem: &Problem,
    t: f64,
    radius: f64,
    n_probes: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let grid = &problem.grid;
    let lift = problem.lifting(t);
    let radius = radius.max(1e-3);
    let lam_ref = 0.05 * grid.symbol().iter().fold(0.0_f64, |m, &l| m.max(l));
    let apply = |c: &SpectralCoeffs| -> Result<SpectralCoeffs> {
        let v = grid.inverse(c)?;
        let mut g = problem.neg_div_coeffs(&v, c, &lift)?;
        if problem.nu1 != 0.0 {
            g.coeffs.scaled_add(problem.nu1.into(), &c.coeffs);
        }
        problem.solver.solve_coeffs_in_place(&mut g);
        Ok(g)
    };
    let mut worst = 0.0_f64;
    for _ in 0..n_probes {
        let c1 = random_smooth(problem, lam_ref, rng.random_range(0.2..1.0) * radius, rng)?;
        let c2 = random_smooth(problem, lam_ref, rng.random_range(0.2..1.0) * radius, rng)?;
        let num = SpectralCoeffs {
            coeffs: &apply(&c1)?.coeffs - &apply(&c2)?.coeffs,
        };
        let den = SpectralCoeffs {
            coeffs: &c1.coeffs - &c2.coeffs,
        };
        let d = grid.sobolev_norm_coeffs(&den, 2.0)?;
        if d > 0.0 {
            worst = worst.max(grid.sobolev_norm_coeffs(&num, 2.0)? / d);
        }
    }
    Ok(worst)
}

/// Coefficients of a random real field with spectrum `~ exp(-lambda / lam_ref)`
/// and `H^2` norm `target`.
fn random_smooth(problem: &Problem, lam_ref: f64, target: f64, rng: &mut impl Rng) -> Result<SpectralCoeffs> {
    let grid = &problem.grid;
    let raw = Field::new(ndarray::Array2::from_shape_fn(grid.shape(), |_| rng.random_range(-1.0..1.0)));
    let mut c = grid.forward(&raw)?;
    Zip::from(&mut c.coeffs)
        .and(grid.symbol())
        .for_each(|c, &l| *c *= (-l / lam_ref).exp());
    // back through physical space so the coefficients describe a real field
    let c = grid.forward(&grid.inverse(&c)?)?;
    let n = grid.sobolev_norm_coeffs(&c, 2.0)?;
    let s = if n > 0.0 { target / n } else { 0.0 };
    Ok(SpectralCoeffs {
        coeffs: c.coeffs.mapv(|z| z * s),
    })
}

/// One classical RK4 step; `dt` may be negative.
pub fn rk4_step(problem: &Problem, v: &Field, t: f64, dt: f64) -> Result<Field> {
    let k1 = problem.rhs(v, t)?;
    let k2 = problem.rhs(&v.axpy(0.5 * dt, &k1), t + 0.5 * dt)?;
    let k3 = problem.rhs(&v.axpy(0.5 * dt, &k2), t + 0.5 * dt)?;
    let k4 = problem.rhs(&v.axpy(dt, &k3), t + dt)?;
    let mut out = v.values.clone();
    Zip::from(&mut out)
        .and(&k1.values)
        .and(&k2.values)
        .and(&k3.values)
        .and(&k4.values)
        .for_each(|o, &a, &b, &c, &d| *o += dt / 6.0 * (a + 2.0 * b + 2.0 * c + d));
    Ok(Field::new(out))
}

/// Advances `n_steps` RK4 steps of size `dt > 0`; a non-finite state or an
/// `H^2` norm above `ceiling` stops the run with [`Error::BlowUp`].
pub fn rk4_advance(problem: &Problem, state: &SimState, dt: f64, n_steps: u64, ceiling: f64) -> Result<SimState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let mut v = state.v.clone();
    let mut step = state.step_count;
    let t_start = state.t;
    for i in 0..n_steps {
        let t = t_start + i as f64 * dt;
        v = rk4_step(problem, &v, t, dt)?;
        step += 1;
        guard(problem, &v, step, t + dt, ceiling)?;
    }
    Ok(SimState {
        v,
        t: t_start + n_steps as f64 * dt,
        step_count: step,
        flux_name: state.flux_name.clone(),
        nu1: state.nu1,
        dt,
    })
}

fn guard(problem: &Problem, v: &Field, step: u64, time: f64, ceiling: f64) -> Result<()> {
    let norm = if v.is_finite() {
        problem.grid.sobolev_norm(v, 2.0)?
    } else {
        f64::INFINITY
    };
    if !(norm <= ceiling) {
        return Err(Error::BlowUp {
            step,
            time,
            norm,
            ceiling,
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Rk4,
    Picard,
    Both,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Rk4 => "rk4",
            Mode::Picard => "picard",
            Mode::Both => "both",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PicardSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub max_window: f64,
    pub max_halvings: u32,
    pub n_probes: usize,
    pub seed: u64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 60,
            max_window: 0.1,
            max_halvings: 3,
            n_probes: 16,
            seed: 20240917,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub t_final: f64,
    pub dt: f64,
    pub mode: Mode,
    /// Snapshot every this many `dt` steps (the final time is always kept).
    pub snapshot_steps: u64,
    pub picard: PicardSettings,
    /// Blow-up ceiling as a multiple of `max(||g~||_{H^2}, 1)`.
    pub blowup_factor: f64,
}

impl RunSettings {
    pub fn new(t_final: f64, dt: f64, mode: Mode, snapshot_steps: u64) -> Self {
        Self {
            t_final,
            dt,
            mode,
            snapshot_steps,
            picard: PicardSettings::default(),
            blowup_factor: 1e6,
        }
    }

    /// Number of `dt` steps to reach `t_final`.
    pub fn total_steps(&self) -> Result<u64> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("T", format!("must be >= 0, got {}", self.t_final)));
        }
        let n = (self.t_final / self.dt).round();
        if (n * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(Error::invalid("T", "final time must be a multiple of dt"));
        }
        Ok(n as u64)
    }
}

/// Snapshots of one integration route.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub snapshots: Vec<SimState>,
    pub picard_reports: Vec<PicardReport>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn final_state(&self) -> &SimState {
        self.snapshots.last().expect("trajectory holds the initial state")
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// RK4 trajectory for `rk4`/`both`, Picard trajectory for `picard`.
    pub primary: Trajectory,
    /// Picard trajectory in `both` mode.
    pub secondary: Option<Trajectory>,
    /// `max_t ||v_rk4 - v_picard||_{H^2}` over common snapshots in `both` mode.
    pub mode_gap: Option<f64>,
    pub planner: Option<WindowPlanner>,
}

/// Advances `g_tilde` to `settings.t_final`.
pub fn run(problem: &Problem, g_tilde: &Field, settings: &RunSettings) -> Result<RunOutput> {
    problem.grid.check(g_tilde)?;
    let n_total = settings.total_steps()?;
    if settings.snapshot_steps == 0 {
        return Err(Error::invalid("snapshot_every", "must be at least one step"));
    }
    let ceiling = settings.blowup_factor * problem.grid.sobolev_norm(g_tilde, 2.0)?.max(1.0);
    let stops = snapshot_steps(n_total, settings.snapshot_steps);

    let rk4 = |_: ()| -> Result<Trajectory> {
        let mut state = SimState::initial(problem, g_tilde.clone(), settings.dt);
        let mut traj = Trajectory {
            snapshots: vec![state.clone()],
            picard_reports: Vec::new(),
        };
        let mut done = 0;
        for &stop in &stops[1..] {
            state = rk4_advance(problem, &state, settings.dt, stop - done, ceiling)?;
            // exact snapshot time, free of accumulated rounding
            state.t = stop as f64 * settings.dt;
            done = stop;
            traj.snapshots.push(state.clone());
        }
        Ok(traj)
    };

    match settings.mode {
        Mode::Rk4 => Ok(RunOutput {
            primary: rk4(())?,
            secondary: None,
            mode_gap: None,
            planner: None,
        }),
        Mode::Picard => {
            let (traj, planner) = run_picard(problem, g_tilde, settings, &stops, ceiling)?;
            Ok(RunOutput {
                primary: traj,
                secondary: None,
                mode_gap: None,
                planner: Some(planner),
            })
        }
        Mode::Both => {
            let a = rk4(())?;
            let (b, planner) = run_picard(problem, g_tilde, settings, &stops, ceiling)?;
            let mut gap = 0.0_f64;
            for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
                gap = gap.max(problem.grid.sobolev_norm(&x.v.sub(&y.v), 2.0)?);
            }
            Ok(RunOutput {
                primary: a,
                secondary: Some(b),
                mode_gap: Some(gap),
                planner: Some(planner),
            })
        }
    }
}

fn snapshot_steps(n_total: u64, every: u64) -> Vec<u64> {
    let mut stops: Vec<u64> = (0..=n_total).step_by(every as usize).collect();
    if *stops.last().unwrap() != n_total {
        stops.push(n_total);
    }
    stops
}

fn run_picard(
    problem: &Problem,
    g_tilde: &Field,
    settings: &RunSettings,
    stops: &[u64],
    ceiling: f64,
) -> Result<(Trajectory, WindowPlanner)> {
    let grid = &problem.grid;
    let ps = &settings.picard;
    let dt = settings.dt;
    let h_norm_at = |t: f64| problem.signal.ch2_norm(grid, t, t + ps.max_window, 8);
    let g0 = grid.sobolev_norm(g_tilde, 2.0)?;
    let probe_radius = 2.0 * (g0 + B_OPERATOR_BOUND * h_norm_at(0.0));
    let planner = WindowPlanner::calibrate(problem, 0.0, probe_radius, ps.n_probes, ps.seed, ps.max_window)?;

    let mut state = SimState::initial(problem, g_tilde.clone(), dt);
    let mut traj = Trajectory {
        snapshots: vec![state.clone()],
        picard_reports: Vec::new(),
    };
    let mut step = 0u64;
    for &stop in &stops[1..] {
        while step < stop {
            let t0 = step as f64 * dt;
            let vn = grid.sobolev_norm(&state.v, 2.0)?;
            let hn = h_norm_at(t0);
            let s = planner.suggest(vn, hn);
            let c1 = planner.c1_hat(vn, hn);
            let mut m = ((s / dt).floor() as u64).clamp(1, stop - step);
            let mut halvings = 0;
            let window = loop {
                let opts = PicardOptions {
                    n_quad: m as usize + 1,
                    tol: ps.tol,
                    max_iter: ps.max_iter,
                    radius: if c1 > 0.0 { Some(2.0 * c1) } else { None },
                };
                match picard_window(problem, &state.v, t0, m as f64 * dt, &opts) {
                    Ok(w) => break w,
                    Err(e @ (Error::PicardNonConvergence(_) | Error::PicardBallExceeded { .. })) => {
                        if halvings >= ps.max_halvings || m == 1 {
                            return Err(e);
                        }
                        halvings += 1;
                        m = (m / 2).max(1);
                    }
                    Err(e) => return Err(e),
                }
            };
            step += m;
            let v = window.endpoint().clone();
            guard(problem, &v, step, step as f64 * dt, ceiling)?;
            traj.picard_reports.push(window.report);
            state = SimState {
                v,
                t: step as f64 * dt,
                step_count: step,
                ..state
            };
        }
        traj.snapshots.push(state.clone());
    }
    Ok((traj, planner))
}
