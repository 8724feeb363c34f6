//! A wavemaker at `x2 = 0` pushes pulses into a still strip. Prints the norm
//! history and writes the final snapshot to `wavemaker_final.bin`.
//!
//! ```sh
//! cargo run --release --example wavemaker_run
//! ```
use gbbm::evolve::{run, Mode, RunSettings};
use gbbm::output::{write_atomic, SnapshotFile};
use gbbm::problem::{BoundarySignal, FluxSpec, InitialData, Scenario};
use gbbm::verify::lifted_h2_norm;
use gbbm::GridSpec;

fn main() -> gbbm::Result<()> {
    let signal = BoundarySignal::from_rows(&[vec![0.2, 8.0, 1.5, 2.0, 0.0], vec![0.1, 24.0, 2.5, 3.0, 0.0]])?;
    let scenario = Scenario {
        grid: GridSpec::new(32.0, 16.0, 96, 64)?,
        flux: FluxSpec::bbm(),
        signal,
        initial: InitialData::zero(),
        nu1: 0.0,
        dealias: false,
    };
    let problem = scenario.problem()?;
    let g = scenario.gtilde()?;
    let out = run(&problem, &g.field, &RunSettings::new(4.0, 0.01, Mode::Rk4, 50))?;

    println!("{:>6} {:>12} {:>12} {:>12}", "t", "||v||_L2", "||v||_H2", "||u||_H2");
    for s in &out.primary.snapshots {
        let h = problem.signal.sample(&problem.grid, s.t);
        println!(
            "{:>6.2} {:>12.6} {:>12.6} {:>12.6}",
            s.t,
            problem.grid.l2_norm(&s.v),
            problem.grid.sobolev_norm(&s.v, 2.0)?,
            lifted_h2_norm(&problem.grid, &s.v, &h)?
        );
    }
    let last = out.primary.final_state();
    let bytes = SnapshotFile::from_state(&problem, last).to_bytes()?;
    write_atomic(std::path::Path::new("wavemaker_final.bin"), &bytes)?;
    println!("wrote wavemaker_final.bin ({} bytes)", bytes.len());
    Ok(())
}
