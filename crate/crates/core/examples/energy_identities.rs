//! Energy bookkeeping: exact conservation without boundary forcing, the two
//! differential identities with forcing, and the fitted Gronwall constant.
//!
//! ```sh
//! cargo run --release --example energy_identities
//! ```
use gbbm::evolve::{run, Mode, RunSettings};
use gbbm::problem::{BoundarySignal, FluxSpec, InitialData, Scenario};
use gbbm::verify::{gronwall_envelope, h1_identity_check, h2_identity_check};
use gbbm::GridSpec;

fn scenario(signal: BoundarySignal) -> gbbm::Result<Scenario> {
    Ok(Scenario {
        grid: GridSpec::new(24.0, 14.0, 64, 48)?,
        flux: FluxSpec::bbm(),
        signal,
        initial: InitialData::gaussian(0.5, 12.0, 5.0, 1.5),
        nu1: 0.0,
        dealias: false,
    })
}

fn main() -> gbbm::Result<()> {
    for (label, signal) in [
        ("no forcing", BoundarySignal::zero()),
        ("wavemaker", BoundarySignal::pulse(0.3, 12.0, 2.0, 2.0, 0.0)),
    ] {
        let s = scenario(signal)?;
        let problem = s.problem()?;
        let out = run(&problem, &s.gtilde()?.field, &RunSettings::new(2.0, 0.005, Mode::Rk4, 10))?;
        let r1 = h1_identity_check(&problem, &out.primary)?;
        let r2 = h2_identity_check(&problem, &out.primary)?;
        let h_norm = s.signal.c1h2_norm(&s.grid, 0.0, 2.0, 65);
        let fit = gronwall_envelope(&r1, h_norm);
        let drift = r1.e_h1.iter().map(|e| (e - r1.e_h1[0]).abs()).fold(0.0, f64::max) / r1.e_h1[0];
        println!("{label}:");
        println!("  E_h1 {:.8} -> {:.8} (max relative drift {drift:.2e})", r1.e_h1[0], r1.e_h1[r1.e_h1.len() - 1]);
        println!("  max residual: H1 identity {:.2e}, H2 identity {:.2e}", r1.max_residual(), r2.max_residual());
        println!("  Gronwall constant C = {:.4e}", fit.c);
    }
    Ok(())
}
