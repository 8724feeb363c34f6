//! Energy identities, Gronwall-type envelopes and the data-dependence
//! experiment, all computed from stored trajectories.
use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::evolve::{run, RunSettings, SimState, Trajectory};
use crate::grid::{Field, GridSpec, SpectralCoeffs};
use crate::problem::{BoundarySignal, InitialData, Problem, Scenario};

/// Energy series of one trajectory and the gap in one of the two identities.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `||v||^2 + ||grad v||^2`
    pub e_h1: Vec<f64>,
    /// `||grad v||^2 + ||Delta v||^2`
    pub e_h2: Vec<f64>,
    /// Half the time derivative of the monitored energy, by differences.
    pub lhs: Vec<f64>,
    /// The right side of the identity, evaluated at each snapshot.
    pub rhs: Vec<f64>,
    pub identity_residual: Vec<f64>,
    /// `int_{x2=0} v phi(w) . n dS` with `v` evaluated from its series.
    pub boundary_flux: Vec<f64>,
}

impl EnergyReport {
    pub fn max_residual(&self) -> f64 {
        self.identity_residual.iter().fold(0.0, |m, &r| m.max(r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Identity {
    H1,
    H2,
}

/// `(E_h1, E_h2)` of `v`.
pub fn energies(grid: &GridSpec, v: &Field) -> Result<(f64, f64)> {
    let c = grid.forward(v)?;
    Ok(energies_coeffs(grid, &c))
}

fn energies_coeffs(grid: &GridSpec, c: &SpectralCoeffs) -> (f64, f64) {
    let e1 = grid.weighted_energy(c, |l| 1.0 + l);
    let e2 = grid.weighted_energy(c, |l| l + l * l);
    (e1, e2)
}

/// Flux of `v phi(w)` through the wall `x2 = 0` (outward normal `-e2`).
/// Returns the value and the scale `||v||_{L2} ||phi(w)||_{L2}` it is
/// measured against.
pub fn boundary_flux(problem: &Problem, v: &Field, t: f64) -> Result<(f64, f64)> {
    let grid = &problem.grid;
    let c = grid.forward(v)?;
    let v_wall = grid.eval_row(&c, 0.0);
    let lift = problem.lifting(t);
    let dx1 = grid.dx1();
    let flux: f64 = v_wall
        .iter()
        .zip(&lift.h)
        .map(|(&vw, &h)| -vw * problem.flux.phi(vw + h)[1] * dx1)
        .sum();
    let u = problem.reconstruct_u(v, t);
    let phi_sq: f64 = u
        .values
        .iter()
        .map(|&w| {
            let p = problem.flux.phi(w);
            p[0] * p[0] + p[1] * p[1]
        })
        .sum::<f64>()
        * grid.cell_area();
    Ok((flux, grid.l2_norm(v) * phi_sq.sqrt()))
}

/// Compares `1/2 d/dt E_h1` with `int (h~ e^{-x2} - div phi) v - nu1 ||grad v||^2`.
pub fn h1_identity_check(problem: &Problem, trajectory: &Trajectory) -> Result<EnergyReport> {
    identity_check(problem, &trajectory.snapshots, Identity::H1)
}

/// Compares `1/2 d/dt E_h2` with `-int (h~ e^{-x2} - div phi) Delta v - nu1 ||Delta v||^2`.
pub fn h2_identity_check(problem: &Problem, trajectory: &Trajectory) -> Result<EnergyReport> {
    identity_check(problem, &trajectory.snapshots, Identity::H2)
}

fn identity_check(problem: &Problem, snaps: &[SimState], which: Identity) -> Result<EnergyReport> {
    if snaps.len() < 3 {
        return Err(Error::TooFewSnapshots {
            needed: 3,
            got: snaps.len(),
        });
    }
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let spacing = times[1] - times[0];
    if !(spacing > 0.0) {
        return Err(Error::invalid("trajectory", "snapshot times must increase"));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - spacing).abs() > 1e-9 * spacing {
            return Err(Error::invalid("trajectory", "snapshot spacing must be uniform"));
        }
    }
    let grid = &problem.grid;
    let nu1 = problem.nu1;
    let n = snaps.len();
    let mut e_h1 = Vec::with_capacity(n);
    let mut e_h2 = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    let mut boundary = Vec::with_capacity(n);
    for s in snaps {
        let (cf, cv) = problem.forcing_with_coeffs(&s.v, s.t)?;
        let (e1, e2) = energies_coeffs(grid, &cv);
        e_h1.push(e1);
        e_h2.push(e2);
        let mut pair = 0.0;
        let mut damp = 0.0;
        Zip::from(&cf.coeffs)
            .and(&cv.coeffs)
            .and(grid.symbol())
            .for_each(|f, c, &l| {
                let w = match which {
                    Identity::H1 => 1.0,
                    Identity::H2 => l,
                };
                pair += w * (f * c.conj()).re;
                damp += w * l * c.norm_sqr();
            });
        rhs.push(pair - nu1 * damp);
        boundary.push(boundary_flux(problem, &s.v, s.t)?.0);
    }
    let energy = match which {
        Identity::H1 => &e_h1,
        Identity::H2 => &e_h2,
    };
    let lhs: Vec<f64> = half_derivative(energy, spacing);
    let identity_residual = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).collect();
    Ok(EnergyReport {
        times,
        e_h1,
        e_h2,
        lhs,
        rhs,
        identity_residual,
        boundary_flux: boundary,
    })
}

/// `1/2 dE/dt`, centered inside, one-sided second order at both ends.
fn half_derivative(e: &[f64], h: f64) -> Vec<f64> {
    let n = e.len();
    (0..n)
        .map(|i| {
            let d = if i == 0 {
                -3.0 * e[0] + 4.0 * e[1] - e[2]
            } else if i == n - 1 {
                3.0 * e[n - 1] - 4.0 * e[n - 2] + e[n - 3]
            } else {
                e[i + 1] - e[i - 1]
            };
            0.25 * d / h
        })
        .collect()
}

/// Smallest certified constant of the H^1 Gronwall bound.
#[derive(Clone, Debug, PartialEq)]
pub struct GronwallFit {
    pub c: f64,
    /// `||v(t)||_{H^1}` at each snapshot.
    pub norms: Vec<f64>,
    pub envelope: Vec<f64>,
}

/// Relative slack absorbing roundoff in the envelope comparison.
const ENVELOPE_SLACK: f64 = 1e-9;

fn envelope_at(a0_sq: f64, c: f64, t: f64, h: f64) -> f64 {
    (a0_sq + c * t * h * h * (1.0 + h)).sqrt() * (c * t * (1.0 + h)).exp()
}

/// Finds the smallest `C >= 0` with
/// `||v(t)||_{H1} <= [||g~||_{H1}^2 + C t h^2 (1 + h)]^{1/2} e^{C t (1 + h)}`
/// at every snapshot, `h` being a bound on the boundary data.
pub fn gronwall_envelope(report: &EnergyReport, h_norm: f64) -> GronwallFit {
    let t0 = report.times.first().copied().unwrap_or(0.0);
    let norms: Vec<f64> = report.e_h1.iter().map(|e| e.max(0.0).sqrt()).collect();
    let a0_sq = report.e_h1.first().copied().unwrap_or(0.0).max(0.0);
    let h = h_norm.max(0.0);
    let holds = |c: f64| {
        report
            .times
            .iter()
            .zip(&norms)
            .all(|(&t, &n)| n <= envelope_at(a0_sq, c, t - t0, h) * (1.0 + ENVELOPE_SLACK))
    };
    let c = if holds(0.0) {
        0.0
    } else {
        let mut hi = 1.0;
        while !holds(hi) {
            hi *= 2.0;
            if !hi.is_finite() {
                break;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if holds(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let envelope = report.times.iter().map(|&t| envelope_at(a0_sq, c, t - t0, h)).collect();
    GronwallFit { c, norms, envelope }
}

/// `||u||_{H^2}` of `u = v + h(x1) e^{-x2}` through the equivalent form
/// `Q(u) = ||u||^2 + 2 ||grad u||^2 + ||Delta u||^2`, split as
/// `Q(v) + 2 Q(v, L) + Q(L)` with `L = h e^{-x2}`. `Q(v)` is the spectral sum
/// `sum (1 + lambda)^2 |c|^2`, `Q(L)` is separable and integrated exactly in
/// `x2`, and the cross term uses Simpson's rule with the walls.
pub fn lifted_h2_norm(grid: &GridSpec, v: &Field, h: &[f64]) -> Result<f64> {
    grid.check(v)?;
    if h.len() != grid.n1() {
        return Err(Error::DimensionMismatch {
            expected: (grid.n1(), 1),
            got: (h.len(), 1),
        });
    }
    let c = grid.forward(v)?;
    let q_v = grid.weighted_energy(&c, |l| (1.0 + l) * (1.0 + l));
    if h.iter().all(|&x| x == 0.0) {
        return Ok(q_v.sqrt());
    }
    let hx = grid.ddx1_line(h);
    let hxx = grid.d2dx1_line(h);
    let dx1 = grid.dx1();
    let e_sq = 0.5 * (1.0 - (-2.0 * grid.l2()).exp());
    let q_l: f64 = (0..grid.n1())
        .map(|a| {
            let lap = hxx[a] + h[a];
            h[a] * h[a] + 2.0 * (hx[a] * hx[a] + h[a] * h[a]) + lap * lap
        })
        .sum::<f64>()
        * dx1
        * e_sq;

    let d1v = grid.ddx1(v)?;
    let d2v = grid.ddx2_from_coeffs(&c);
    let lap = grid.laplacian(v)?;
    let n2 = grid.n2();
    let mut cross = Array2::zeros((grid.n1(), n2 + 1));
    for a in 0..grid.n1() {
        for k in 0..=n2 {
            let e = (-(k as f64) * grid.dx2()).exp();
            let (vv, v1, vl) = if k == 0 || k == n2 {
                (0.0, 0.0, 0.0)
            } else {
                (v.values[[a, k - 1]], d1v.values[[a, k - 1]], lap.values[[a, k - 1]])
            };
            cross[[a, k]] = e
                * (vv * h[a] + 2.0 * (v1 * hx[a] - d2v[[a, k]] * h[a]) + vl * (hxx[a] + h[a]));
        }
    }
    let q_vl = grid.integrate_simpson_with_walls(&cross);
    Ok((q_v + 2.0 * q_vl + q_l).max(0.0).sqrt())
}

/// Results of the data-dependence experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct DependenceReport {
    pub epsilons: Vec<f64>,
    /// `max_t ||u1 - u2||_{H^2}` per scale.
    pub deltas: Vec<f64>,
    /// `deltas / eps`.
    pub delta_over_eps: Vec<f64>,
    /// `||g~1 - g~2||_{H^2} + ||h1 - h2||_{C^1_t H^2}` per scale.
    pub data_norms: Vec<f64>,
    /// `deltas / data_norms` (zero when both vanish).
    pub ratios: Vec<f64>,
    /// Smallest `C >= 0` with `delta <= data_norm e^{C T}` at every scale.
    pub growth_constant: f64,
    /// `data_norm e^{C T}` per scale.
    pub envelope: Vec<f64>,
    pub t_final: f64,
}

/// Number of time samples used for `C^1_t H^2` norms of signal differences.
const SIGNAL_SAMPLES: usize = 65;

/// Runs `(g, h)` against `(g + eps dg, h + eps dh)` for every `eps`.
/// Independent runs are spread over scoped threads; results do not depend
/// on scheduling.
pub fn dependence_experiment(
    base: &Scenario,
    dg: &InitialData,
    dh: &BoundarySignal,
    epsilons: &[f64],
    settings: &RunSettings,
) -> Result<DependenceReport> {
    if epsilons.is_empty() {
        return Err(Error::invalid("eps", "at least one scale is required"));
    }
    if epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("eps", "scales must be positive"));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("eps", "scales must be strictly decreasing"));
    }
    let grid = &base.grid;
    let t_final = settings.t_final;

    let run_scenario = |s: &Scenario| -> Result<(Trajectory, Field)> {
        let problem = s.problem()?;
        let gt = s.gtilde()?;
        let out = run(&problem, &gt.field, settings)?;
        Ok((out.primary, gt.field))
    };

    let scenarios: Vec<Scenario> = std::iter::once(base.clone())
        .chain(epsilons.iter().map(|&e| base.perturbed(dg, dh, e)))
        .collect();
    let results: Vec<Result<(Trajectory, Field)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| scope.spawn(move || run_scenario(s)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("dependence run panicked"))
            .collect()
    });
    let mut results = results.into_iter();
    let (base_traj, base_g) = results.next().expect("base run")?;

    let mut deltas = Vec::with_capacity(epsilons.len());
    let mut data_norms = Vec::with_capacity(epsilons.len());
    for (&eps, res) in epsilons.iter().zip(results) {
        let (traj, g) = res?;
        let dh_eps = dh.scaled(eps);
        let mut delta = 0.0_f64;
        for (s1, s2) in base_traj.snapshots.iter().zip(&traj.snapshots) {
            let dv = s2.v.sub(&s1.v);
            let line = dh_eps.sample(grid, s1.t);
            delta = delta.max(lifted_h2_norm(grid, &dv, &line)?);
        }
        let g_diff = grid.sobolev_norm(&g.sub(&base_g), 2.0)?;
        let h_diff = dh_eps.c1h2_norm(grid, 0.0, t_final, SIGNAL_SAMPLES);
        deltas.push(delta);
        data_norms.push(g_diff + h_diff);
    }

    let delta_over_eps = deltas.iter().zip(epsilons).map(|(d, e)| d / e).collect();
    let ratios = deltas
        .iter()
        .zip(&data_norms)
        .map(|(&d, &n)| if n > 0.0 { d / n } else { 0.0 })
        .collect();
    let mut growth = 0.0_f64;
    if t_final > 0.0 {
        for (&d, &n) in deltas.iter().zip(&data_norms) {
            if d > 0.0 && n > 0.0 {
                growth = growth.max(((d / n).ln() / t_final) * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
    let envelope = data_norms.iter().map(|n| n * (growth * t_final).exp()).collect();
    Ok(DependenceReport {
        epsilons: epsilons.to_vec(),
        deltas,
        delta_over_eps,
        data_norms,
        ratios,
        growth_constant: growth,
        envelope,
        t_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::Mode;
    use crate::problem::FluxSpec;
    use std::f64::consts::PI;

    fn scenario(grid: &GridSpec, flux: FluxSpec, signal: BoundarySignal, initial: InitialData, nu1: f64) -> Scenario {
        Scenario {
            grid: grid.clone(),
            flux,
            signal,
            initial,
            nu1,
            dealias: false,
        }
    }

    fn trajectory(s: &Scenario, t: f64, dt: f64, every: u64) -> (Problem, Trajectory) {
        let p = s.problem().unwrap();
        let g = s.gtilde().unwrap();
        let out = run(&p, &g.field, &RunSettings::new(t, dt, Mode::Rk4, every)).unwrap();
        (p, out.primary)
    }

    #[test]
    fn half_derivative_exact_on_quadratics() {
        let e: Vec<f64> = (0..6).map(|i| {
            let t = 0.1 * i as f64;
            1.0 + 2.0 * t + 3.0 * t * t
        }).collect();
        let d = half_derivative(&e, 0.1);
        for (i, v) in d.iter().enumerate() {
            let t = 0.1 * i as f64;
            assert!((v - 0.5 * (2.0 + 6.0 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_run_has_zero_residuals() {
        let g = GridSpec::new(6.0, 8.0, 16, 16).unwrap();
        let s = scenario(&g, FluxSpec::bbm(), BoundarySignal::zero(), InitialData::zero(), 0.0);
        let (p, traj) = trajectory(&s, 0.1, 0.01, 2);
        for r in [h1_identity_check(&p, &traj).unwrap(), h2_identity_check(&p, &traj).unwrap()] {
            assert!(r.identity_residual.iter().all(|&x| x == 0.0));
            assert!(r.boundary_flux.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn too_few_snapshots() {
        let g = GridSpec::new(6.0, 8.0, 16, 16).unwrap();
        let s = scenario(&g, FluxSpec::bbm(), BoundarySignal::zero(), InitialData::zero(), 0.0);
        let (p, traj) = trajectory(&s, 0.01, 0.01, 1);
        assert!(matches!(h1_identity_check(&p, &traj), Err(Error::TooFewSnapshots { needed: 3, got: 2 })));
    }

    #[test]
    fn single_mode_linear_flux_h2_identity() {
        // With linear flux (a, 0) a single mode only changes phase, so both
        // sides of the H^2 identity vanish; the advecting term pairs to zero
        // mode by mode.
        let g = GridSpec::new(2.0 * PI, 4.0, 16, 16).unwrap();
        let s = scenario(&g, FluxSpec::linear(1.0, 0.0), BoundarySignal::zero(), InitialData::mode(0.3, 1, 1), 0.0);
        let (p, traj) = trajectory(&s, 0.2, 0.005, 4);
        let r = h2_identity_check(&p, &traj).unwrap();
        assert!(r.max_residual() < 1e-8, "{}", r.max_residual());
        assert!(r.rhs.iter().all(|x| x.abs() < 1e-10));
        let e0 = r.e_h2[0];
        assert!(r.e_h2.iter().all(|e| (e - e0).abs() < 1e-10 * e0));
    }

    #[test]
    fn single_mode_burgers_decay_rate() {
        // Linear flux, nu1 > 0: each mode decays at rate nu1 lambda/(1+lambda),
        // so 1/2 dE/dt = -nu1 lambda E_h1/(1+lambda) exactly.
        let g = GridSpec::new(2.0 * PI, 4.0, 16, 16).unwrap();
        let s = scenario(&g, FluxSpec::linear(0.5, 0.0), BoundarySignal::zero(), InitialData::mode(0.3, 1, 2), 0.7);
        let (p, traj) = trajectory(&s, 0.2, 0.005, 4);
        let r = h1_identity_check(&p, &traj).unwrap();
        let lam = 1.0 + (2.0 * PI / 4.0).powi(2);
        for (rhs, e) in r.rhs.iter().zip(&r.e_h1) {
            let expected = -0.7 * lam / (1.0 + lam) * e;
            assert!((rhs - expected).abs() < 1e-10 * e.abs());
        }
        for (res, rhs) in r.identity_residual.iter().zip(&r.rhs) {
            assert!(*res < 1e-3 * rhs.abs(), "{res} {rhs}");
        }
    }

    #[test]
    fn identity_residual_second_order() {
        let g = GridSpec::new(8.0, 10.0, 32, 32).unwrap();
        let signal = BoundarySignal::pulse(0.2, 4.0, 1.0, 2.0, 0.0);
        let s = scenario(&g, FluxSpec::bbm(), signal, InitialData::gaussian(0.3, 4.0, 3.0, 1.0), 0.0);
        let (p, coarse) = trajectory(&s, 0.4, 0.005, 8);
        let (_, fine) = trajectory(&s, 0.4, 0.005, 4);
        let rc = h1_identity_check(&p, &coarse).unwrap().max_residual();
        let rf = h1_identity_check(&p, &fine).unwrap().max_residual();
        assert!(rc / rf > 3.5, "{rc} {rf}");
    }

    #[test]
    fn boundary_flux_negligible() {
        let g = GridSpec::new(8.0, 10.0, 32, 32).unwrap();
        let signal = BoundarySignal::pulse(0.2, 4.0, 1.0, 2.0, 0.5);
        let p = Problem::new(&g, FluxSpec::new(crate::problem::FluxFamily::Oblique), signal, 0.0).unwrap();
        let v = g.sample(|x1, x2| (x1 / 8.0 * 2.0 * PI).sin() * x2 * (10.0 - x2) * 0.01);
        let (f, scale) = boundary_flux(&p, &v, 0.3).unwrap();
        assert!(f.abs() <= 1e-12 * scale, "{f} {scale}");
    }

    #[test]
    fn gronwall_conservation_gives_zero() {
        let report = EnergyReport {
            times: vec![0.0, 0.5, 1.0],
            e_h1: vec![2.0, 2.0, 2.0 * (1.0 + 1e-12)],
            e_h2: vec![0.0; 3],
            lhs: vec![0.0; 3],
            rhs: vec![0.0; 3],
            identity_residual: vec![0.0; 3],
            boundary_flux: vec![0.0; 3],
        };
        assert_eq!(gronwall_envelope(&report, 0.0).c, 0.0);
    }

    #[test]
    fn gronwall_envelope_dominates_and_nests() {
        let times: Vec<f64> = (0..11).map(|i| 0.1 * i as f64).collect();
        let e_h1: Vec<f64> = times.iter().map(|t| 1.0 + t * t + 0.3 * (5.0 * t).sin().abs()).collect();
        let mk = |n: usize| EnergyReport {
            times: times[..n].to_vec(),
            e_h1: e_h1[..n].to_vec(),
            e_h2: vec![0.0; n],
            lhs: vec![0.0; n],
            rhs: vec![0.0; n],
            identity_residual: vec![0.0; n],
            boundary_flux: vec![0.0; n],
        };
        let full = gronwall_envelope(&mk(11), 0.4);
        assert!(full.c > 0.0);
        for (n, e) in full.norms.iter().zip(&full.envelope) {
            assert!(*n <= e * (1.0 + 1e-9));
        }
        let short = gronwall_envelope(&mk(6), 0.4);
        assert!(short.c <= full.c);
    }

    #[test]
    fn lifted_norm_matches_spectral_for_dirichlet_fields() {
        let g = GridSpec::new(6.0, 4.0, 32, 32).unwrap();
        let v = g.sample(|x1, x2| (2.0 * PI * x1 / 6.0).cos() * (PI * x2 / 4.0).sin());
        let a = lifted_h2_norm(&g, &v, &vec![0.0; 32]).unwrap();
        let b = g.sobolev_norm(&v, 2.0).unwrap();
        assert!((a - b).abs() < 1e-10 * b);
    }

    #[test]
    fn lifted_norm_of_pure_lifting() {
        // u = cos(k x1) e^{-x2}: harmonic when k = 1, so Delta u = 0 and
        // Q = ||u||^2 + 2 ||grad u||^2 = 5 ||u||^2.
        let l1 = 2.0 * PI;
        let l2 = 20.0;
        let g = GridSpec::new(l1, l2, 32, 16).unwrap();
        let h: Vec<f64> = g.x1_nodes().iter().map(|x| x.cos()).collect();
        let q = lifted_h2_norm(&g, &g.zeros(), &h).unwrap();
        let l2_sq = PI * 0.5 * (1.0 - (-2.0 * l2).exp());
        assert!((q * q - 5.0 * l2_sq).abs() < 1e-10 * l2_sq, "{} {}", q * q, 5.0 * l2_sq);
    }

    #[test]
    fn dependence_zero_direction() {
        let g = GridSpec::new(8.0, 10.0, 16, 16).unwrap();
        let s = scenario(&g, FluxSpec::bbm(), BoundarySignal::zero(), InitialData::gaussian(0.2, 4.0, 4.0, 1.0), 0.0);
        let settings = RunSettings::new(0.1, 0.01, Mode::Rk4, 5);
        let r = dependence_experiment(&s, &InitialData::zero(), &BoundarySignal::zero(), &[0.1, 0.05], &settings).unwrap();
        assert!(r.deltas.iter().all(|&d| d == 0.0));
        assert_eq!(r.growth_constant, 0.0);
    }

    #[test]
    fn dependence_rejects_bad_scales() {
        let g = GridSpec::new(8.0, 10.0, 16, 16).unwrap();
        let s = scenario(&g, FluxSpec::bbm(), BoundarySignal::zero(), InitialData::zero(), 0.0);
        let settings = RunSettings::new(0.1, 0.01, Mode::Rk4, 5);
        let z = (InitialData::zero(), BoundarySignal::zero());
        assert!(dependence_experiment(&s, &z.0, &z.1, &[], &settings).is_err());
        assert!(dependence_experiment(&s, &z.0, &z.1, &[0.1, 0.2], &settings).is_err());
        assert!(dependence_experiment(&s, &z.0, &z.1, &[-0.1], &settings).is_err());
    }

    #[test]
    fn boundary_perturbation_dominated() {
        let g = GridSpec::new(8.0, 10.0, 16, 24).unwrap();
        let s = scenario(&g, FluxSpec::bbm(), BoundarySignal::zero(), InitialData::gaussian(0.2, 4.0, 4.0, 1.0), 0.0);
        let dh = BoundarySignal::pulse(1.0, 4.0, 1.0, 2.0, 0.0);
        let settings = RunSettings::new(0.2, 0.01, Mode::Rk4, 5);
        let r = dependence_experiment(&s, &InitialData::zero(), &dh, &[0.1, 0.05], &settings).unwrap();
        let dh_norm = dh.c1h2_norm(&g, 0.0, 0.2, SIGNAL_SAMPLES);
        for (&d, &e) in r.deltas.iter().zip(&r.epsilons) {
            assert!(d > 0.0);
            assert!(d <= (r.growth_constant * 0.2).exp() * e * dh_norm * (1.0 + 1e-9));
        }
    }
}
