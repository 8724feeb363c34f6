//! The operations behind the `gbbm` subcommands. Each one writes its files
//! into an output directory and returns a [`Report`] of human-readable lines
//! plus a pass flag; the binary maps failures to exit codes.
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_config, serialize, Parsed, RunConfig};
use crate::error::{Error, Result};
use crate::evolve::{run, RunOutput, RunSettings};
use crate::grid::{Field, GridSpec};
use crate::helmholtz::{dense_operator, HelmholtzSolver};
use crate::output::{fmt_float, write_atomic, CsvTable, SnapshotFile};
use crate::problem::Problem;
use crate::verify::{
    boundary_flux, dependence_experiment, energies, gronwall_envelope, h1_identity_check, h2_identity_check,
    lifted_h2_norm, DependenceReport,
};

/// Outcome of a subcommand.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub passed: bool,
    pub lines: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Self {
            passed: true,
            lines: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(line);
    }
}

/// Reads and parses a config file; parse errors keep their key and line.
pub fn load_config(path: &Path) -> Result<Parsed> {
    let text = fs::read_to_string(path)?;
    parse_config(&text)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn resolve_dir(config: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&config.output_dir))
}

/// Log header shared by every config-driven command: the effective config
/// and the defaults that were filled in.
fn config_log(parsed: &Parsed) -> String {
    let mut s = String::from("# effective configuration\n");
    s.push_str(&serialize(&parsed.config));
    s.push_str("\n# defaults applied\n");
    for d in &parsed.defaults {
        let _ = writeln!(s, "{d}");
    }
    s
}

/// `run <config>`: integrates, writes `norms.csv`, snapshots and `run.log`.
pub fn run_command(parsed: &Parsed, out: Option<&Path>) -> Result<Report> {
    let c = &parsed.config;
    let dir = resolve_dir(c, out);
    prepare_dir(&dir)?;
    let scenario = c.scenario()?;
    let problem = scenario.problem()?;
    let gt = scenario.gtilde()?;
    let output = run(&problem, &gt.field, &c.run_settings())?;

    let table = norms_table(&problem, &output)?;
    table.write(&dir.join("norms.csv"))?;
    if c.write_snapshots {
        for (i, s) in output.primary.snapshots.iter().enumerate() {
            let bytes = SnapshotFile::from_state(&problem, s).to_bytes()?;
            write_atomic(&dir.join(format!("snap_{i:06}.bin")), &bytes)?;
        }
    }
    if !output.primary.picard_reports.is_empty() || output.secondary.is_some() {
        picard_table(&output).write(&dir.join("picard.csv"))?;
    }

    let mut report = Report::new();
    report.note(format!("snapshots: {}", output.primary.snapshots.len()));
    report.note(format!("corner mismatch |g - h| at x2=0: {}", fmt_float(gt.corner_mismatch)));
    report.note(format!("far-wall clamp: {}", fmt_float(gt.far_wall_clamp)));
    if let Some(gap) = output.mode_gap {
        report.note(format!("max H2 gap between rk4 and picard: {}", fmt_float(gap)));
    }
    if let Some(p) = &output.planner {
        report.note(format!("planner: c_b = {}, c2_hat = {}", fmt_float(p.c_b), fmt_float(p.c2_hat)));
    }
    let last = table.rows.last().expect("at least the initial row");
    report.note(format!("final t = {}, H2 = {}", fmt_float(last[0]), fmt_float(last[3])));
    let mut log = config_log(parsed);
    log.push_str("\n# summary\n");
    for l in &report.lines {
        let _ = writeln!(log, "{l}");
    }
    write_atomic(&dir.join("run.log"), log.as_bytes())?;
    Ok(report)
}

fn norms_table(problem: &Problem, output: &RunOutput) -> Result<CsvTable> {
    let grid = &problem.grid;
    let mut t = CsvTable::new(&["t", "L2", "H1", "H2", "E_h1", "E_h2", "boundary_flux"]);
    for s in &output.primary.snapshots {
        let (e1, e2) = energies(grid, &s.v)?;
        let (bf, _) = boundary_flux(problem, &s.v, s.t)?;
        t.push(vec![
            s.t,
            grid.l2_norm(&s.v),
            grid.sobolev_norm(&s.v, 1.0)?,
            grid.sobolev_norm(&s.v, 2.0)?,
            e1,
            e2,
            bf,
        ]);
    }
    Ok(t)
}

fn picard_table(output: &RunOutput) -> CsvTable {
    let mut t = CsvTable::new(&["t0", "window", "radius", "iterations", "final_difference", "converged"]);
    let reports = output
        .secondary
        .as_ref()
        .map(|s| &s.picard_reports)
        .unwrap_or(&output.primary.picard_reports);
    for r in reports {
        t.push(vec![
            r.t0,
            r.window,
            r.radius,
            r.iterates.len() as f64,
            r.iterates.last().copied().unwrap_or(0.0),
            if r.converged { 1.0 } else { 0.0 },
        ]);
    }
    t
}

/// Grid used by `verify-helmholtz`.
pub const HELMHOLTZ_GRID: (f64, f64, usize, usize) = (2.0, 1.5, 16, 8);

/// `verify-helmholtz [--n N]`: the solver against a dense direct solve,
/// the `H^2 <= L^2` bound, and an eigenfunction.
pub fn verify_helmholtz(n: usize, seed: u64) -> Result<Report> {
    let (l1, l2, n1, n2) = HELMHOLTZ_GRID;
    let grid = GridSpec::new(l1, l2, n1, n2)?;
    let solver = HelmholtzSolver::new(&grid);
    let a = dense_operator(&grid);
    let lu = a.clone().lu();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Report::new();

    let mut worst_diff = 0.0_f64;
    let mut worst_res = 0.0_f64;
    for _ in 0..n {
        let f = Field::new(grid.zeros().values.mapv(|_| rng.random_range(-1.0..1.0)));
        let u = solver.solve(&f)?;
        let fv = DVector::from_iterator(f.values.len(), f.values.iter().copied());
        let uv = DVector::from_iterator(u.values.len(), u.values.iter().copied());
        let direct = lu
            .solve(&fv)
            .ok_or_else(|| Error::invalid("dense oracle", "matrix is singular"))?;
        worst_diff = worst_diff.max((&uv - &direct).amax());
        let residual = (&a * &uv - &fv).norm() / fv.norm();
        worst_res = worst_res.max(residual);
    }
    report.check(
        "dense oracle",
        worst_diff <= 1e-10,
        format!("{n} right-hand sides, max |u - u_dense| = {}", fmt_float(worst_diff)),
    );
    report.check(
        "residual",
        worst_res <= 1e-11,
        format!("max ||(I - Delta) u - f|| / ||f|| = {}", fmt_float(worst_res)),
    );

    let mut worst_ratio = 0.0_f64;
    for _ in 0..n.max(1) * 4 {
        let f = Field::new(grid.zeros().values.mapv(|_| rng.random_range(-1.0..1.0)));
        let (lhs, rhs) = solver.h2_bound_check(&f)?;
        worst_ratio = worst_ratio.max(lhs / rhs);
    }
    report.check(
        "H2 bound",
        worst_ratio <= 1.0 + 1e-12,
        format!("max ||solve f||_H2 / ||f||_L2 = {}", fmt_float(worst_ratio)),
    );

    let lam = (2.0 * std::f64::consts::PI * 3.0 / l1).powi(2) + (std::f64::consts::PI * 2.0 / l2).powi(2);
    let mode = grid.sample(|x1, x2| {
        (2.0 * std::f64::consts::PI * 3.0 * x1 / l1).sin() * (std::f64::consts::PI * 2.0 * x2 / l2).sin()
    });
    let err = solver.solve(&mode.scaled(1.0 + lam))?.sub(&mode).max_abs();
    report.check("eigenfunction", err <= 1e-12, format!("max error {}", fmt_float(err)));
    Ok(report)
}

/// `verify-energy <config>`: both energy identities and the Gronwall fit;
/// writes `energy.csv`.
pub fn verify_energy(parsed: &Parsed, out: Option<&Path>) -> Result<Report> {
    let c = &parsed.config;
    let dir = resolve_dir(c, out);
    prepare_dir(&dir)?;
    let scenario = c.scenario()?;
    let problem = scenario.problem()?;
    let gt = scenario.gtilde()?;
    let output = run(&problem, &gt.field, &c.run_settings())?;
    let traj = &output.primary;
    let r1 = h1_identity_check(&problem, traj)?;
    let r2 = h2_identity_check(&problem, traj)?;
    let h_norm = c.signal.c1h2_norm(&problem.grid, 0.0, c.t_final, 65);
    let fit = gronwall_envelope(&r1, h_norm);

    let mut t = CsvTable::new(&[
        "t",
        "E_h1",
        "E_h2",
        "h1_lhs",
        "h1_rhs",
        "h1_residual",
        "h2_lhs",
        "h2_rhs",
        "h2_residual",
        "boundary_flux",
        "H1",
        "gronwall_envelope",
    ]);
    for i in 0..r1.times.len() {
        t.push(vec![
            r1.times[i],
            r1.e_h1[i],
            r1.e_h2[i],
            r1.lhs[i],
            r1.rhs[i],
            r1.identity_residual[i],
            r2.lhs[i],
            r2.rhs[i],
            r2.identity_residual[i],
            r1.boundary_flux[i],
            fit.norms[i],
            fit.envelope[i],
        ]);
    }
    t.write(&dir.join("energy.csv"))?;

    let mut report = Report::new();
    report.note(format!("max H1 identity residual: {}", fmt_float(r1.max_residual())));
    report.note(format!("max H2 identity residual: {}", fmt_float(r2.max_residual())));
    report.note(format!("Gronwall constant C = {} (||h||_C1H2 = {})", fmt_float(fit.c), fmt_float(h_norm)));
    let mut flux_ok = true;
    for s in &traj.snapshots {
        let (f, scale) = boundary_flux(&problem, &s.v, s.t)?;
        flux_ok &= f.abs() <= 1e-12 * scale;
    }
    report.check("boundary flux", flux_ok, "wall term negligible at every snapshot".to_string());
    let dominated = fit.norms.iter().zip(&fit.envelope).all(|(n, e)| *n <= e * (1.0 + 1e-9));
    report.check("envelope", dominated, "dominates ||v||_H1 at every snapshot".to_string());
    if c.nu1 > 0.0 && c.signal.is_zero() {
        let ok = r1.e_h1.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-10));
        report.check("dissipation", ok, "E_h1 nonincreasing".to_string());
    }
    let mut log = config_log(parsed);
    log.push_str("\n# summary\n");
    for l in &report.lines {
        let _ = writeln!(log, "{l}");
    }
    write_atomic(&dir.join("energy.log"), log.as_bytes())?;
    Ok(report)
}

/// `dependence <config> [--eps ...]`: writes `dependence.csv`.
pub fn dependence_command(parsed: &Parsed, eps: Option<&[f64]>, out: Option<&Path>) -> Result<Report> {
    let c = &parsed.config;
    let dir = resolve_dir(c, out);
    prepare_dir(&dir)?;
    let scenario = c.scenario()?;
    let eps = eps.unwrap_or(&c.eps);
    let r = dependence_experiment(&scenario, &c.perturb_initial, &c.perturb_signal, eps, &c.run_settings())?;
    dependence_table(&r).write(&dir.join("dependence.csv"))?;
    let mut report = Report::new();
    report.note(format!("growth constant C = {}", fmt_float(r.growth_constant)));
    for i in 0..r.epsilons.len() {
        report.note(format!(
            "eps = {}: delta = {}, delta/eps = {}",
            fmt_float(r.epsilons[i]),
            fmt_float(r.deltas[i]),
            fmt_float(r.delta_over_eps[i])
        ));
    }
    let finite = r.deltas.iter().chain(&r.ratios).all(|x| x.is_finite());
    report.check("finite", finite, "all deltas and ratios finite".to_string());
    let dominated = r.deltas.iter().zip(&r.envelope).all(|(d, e)| d <= e);
    report.check("envelope", dominated, "fitted envelope dominates every delta".to_string());
    Ok(report)
}

pub fn dependence_table(r: &DependenceReport) -> CsvTable {
    let mut t = CsvTable::new(&["eps", "delta", "delta_over_eps", "data_norm", "ratio", "envelope"]);
    for i in 0..r.epsilons.len() {
        t.push(vec![
            r.epsilons[i],
            r.deltas[i],
            r.delta_over_eps[i],
            r.data_norms[i],
            r.ratios[i],
            r.envelope[i],
        ]);
    }
    t
}

/// Results of the `dt`-halving and `L2`-doubling studies.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub dts: Vec<f64>,
    /// `H^2` norm of the final `v` per `dt`.
    pub final_h2: Vec<f64>,
    /// `||v_dt - v_{dt/2}||_{H^2}` at the final time.
    pub diffs: Vec<f64>,
    /// Ratios of consecutive `diffs` (16 for a fourth-order method).
    pub factors: Vec<f64>,
    /// `(L2, N2, final ||u||_{H^2})` on the original and the doubled strip.
    pub depth: [(f64, usize, f64); 2],
    pub depth_relative_change: f64,
}

/// Runs both studies on the configured scenario.
pub fn convergence_study(c: &RunConfig) -> Result<ConvergenceStudy> {
    let scenario = c.scenario()?;
    let levels = c.dt_levels as usize;
    let dts: Vec<f64> = (0..=levels).map(|i| c.dt / 2f64.powi(i as i32)).collect();
    let finals: Vec<Result<Field>> = std::thread::scope(|scope| {
        let handles: Vec<_> = dts
            .iter()
            .map(|&dt| {
                let scenario = &scenario;
                scope.spawn(move || -> Result<Field> {
                    let problem = scenario.problem()?;
                    let gt = scenario.gtilde()?;
                    let mut s = RunSettings::new(c.t_final, dt, crate::evolve::Mode::Rk4, u64::MAX);
                    s.blowup_factor = c.blowup_factor;
                    let out = run(&problem, &gt.field, &s)?;
                    Ok(out.primary.final_state().v.clone())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("convergence run panicked")).collect()
    });
    let finals: Vec<Field> = finals.into_iter().collect::<Result<_>>()?;
    let grid = &scenario.grid;
    let final_h2 = finals.iter().map(|v| grid.sobolev_norm(v, 2.0)).collect::<Result<Vec<_>>>()?;
    let diffs = finals
        .windows(2)
        .map(|w| grid.sobolev_norm(&w[0].sub(&w[1]), 2.0))
        .collect::<Result<Vec<_>>>()?;
    let factors = diffs.windows(2).map(|w| w[0] / w[1]).collect();

    let deep_grid = GridSpec::new(grid.l1(), 2.0 * grid.l2(), grid.n1(), 2 * grid.n2())?;
    let mut depth = [(0.0, 0, 0.0); 2];
    for (slot, g) in depth.iter_mut().zip([grid.clone(), deep_grid]) {
        let s = scenario.on_grid(&g);
        let problem = s.problem()?;
        let gt = s.gtilde()?;
        let mut settings = RunSettings::new(c.t_final, c.dt, crate::evolve::Mode::Rk4, u64::MAX);
        settings.blowup_factor = c.blowup_factor;
        let out = run(&problem, &gt.field, &settings)?;
        let last = out.primary.final_state();
        let h = c.signal.sample(&g, last.t);
        *slot = (g.l2(), g.n2(), lifted_h2_norm(&g, &last.v, &h)?);
    }
    let depth_relative_change = (depth[1].2 - depth[0].2).abs() / depth[0].2.max(f64::MIN_POSITIVE);
    Ok(ConvergenceStudy {
        dts,
        final_h2,
        diffs,
        factors,
        depth,
        depth_relative_change,
    })
}

/// `convergence <config>`: writes `convergence.csv` with a text `study`
/// column (`dt` or `L2`).
pub fn convergence_command(parsed: &Parsed, out: Option<&Path>) -> Result<Report> {
    let c = &parsed.config;
    let dir = resolve_dir(c, out);
    prepare_dir(&dir)?;
    let study = convergence_study(c)?;
    let mut csv = String::from("study,level,dt,L2,N2,final_H2,diff,factor\n");
    for (i, dt) in study.dts.iter().enumerate() {
        let diff = study.diffs.get(i).copied().unwrap_or(f64::NAN);
        let factor = study.factors.get(i).copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            csv,
            "dt,{i},{},{},{},{},{},{}",
            fmt_float(*dt),
            fmt_float(c.l2),
            c.n2,
            fmt_float(study.final_h2[i]),
            fmt_float(diff),
            fmt_float(factor)
        );
    }
    for (i, (l2, n2, h2)) in study.depth.iter().enumerate() {
        let diff = if i == 1 { study.depth_relative_change } else { f64::NAN };
        let _ = writeln!(
            csv,
            "L2,{i},{},{},{n2},{},{},{}",
            fmt_float(c.dt),
            fmt_float(*l2),
            fmt_float(*h2),
            fmt_float(diff),
            fmt_float(f64::NAN)
        );
    }
    write_atomic(&dir.join("convergence.csv"), csv.as_bytes())?;
    let mut report = Report::new();
    let factors: Vec<String> = study.factors.iter().map(|f| format!("{f:.3}")).collect();
    report.note(format!("dt-halving factors: {}", factors.join(", ")));
    report.note(format!(
        "relative change of final H2 under L2 doubling: {}",
        fmt_float(study.depth_relative_change)
    ));
    Ok(report)
}
