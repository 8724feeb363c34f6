//! Perturbs the initial datum and the wavemaker signal by `eps` times a fixed
//! direction and measures how far the solutions drift apart.
//!
//! ```sh
//! cargo run --release --example continuous_dependence
//! ```
use gbbm::evolve::{Mode, RunSettings};
use gbbm::problem::{BoundarySignal, FluxSpec, InitialData, Scenario};
use gbbm::verify::dependence_experiment;
use gbbm::GridSpec;

fn main() -> gbbm::Result<()> {
    let base = Scenario {
        grid: GridSpec::new(24.0, 12.0, 64, 48)?,
        flux: FluxSpec::bbm(),
        signal: BoundarySignal::pulse(0.1, 12.0, 2.0, 1.5, 0.0),
        initial: InitialData::gaussian(0.3, 12.0, 4.0, 1.5),
        nu1: 0.0,
        dealias: false,
    };
    let dg = InitialData::gaussian(1.0, 10.0, 4.5, 1.2);
    let dh = BoundarySignal::pulse(1.0, 13.0, 1.5, 2.5, 0.0);
    let eps = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let r = dependence_experiment(&base, &dg, &dh, &eps, &RunSettings::new(2.0, 0.01, Mode::Rk4, 10))?;
    println!("{:>8} {:>12} {:>12} {:>12} {:>12}", "eps", "delta", "delta/eps", "data norm", "envelope");
    for i in 0..eps.len() {
        println!(
            "{:>8} {:>12.4e} {:>12.6} {:>12.4e} {:>12.4e}",
            r.epsilons[i], r.deltas[i], r.delta_over_eps[i], r.data_norms[i], r.envelope[i]
        );
    }
    println!("fitted growth constant C = {:.4e}", r.growth_constant);
    Ok(())
}
