//! Viscous decay: `E_h1` for several `nu1` with no boundary forcing.
//!
//! ```sh
//! cargo run --release --example burgers_decay
//! ```
use gbbm::evolve::{run, Mode, RunSettings};
use gbbm::problem::{BoundarySignal, FluxSpec, InitialData, Scenario};
use gbbm::verify::energies;
use gbbm::GridSpec;

fn main() -> gbbm::Result<()> {
    let nus = [0.0, 0.1, 0.5, 1.0];
    let mut columns = Vec::new();
    for &nu1 in &nus {
        let s = Scenario {
            grid: GridSpec::new(24.0, 16.0, 64, 48)?,
            flux: FluxSpec::from_name("saturating", &[])?,
            signal: BoundarySignal::zero(),
            initial: InitialData::gaussian(0.8, 12.0, 8.0, 1.5),
            nu1,
            dealias: false,
        };
        let problem = s.problem()?;
        let out = run(&problem, &s.gtilde()?.field, &RunSettings::new(2.0, 0.005, Mode::Rk4, 40))?;
        let e = out
            .primary
            .snapshots
            .iter()
            .map(|st| energies(&s.grid, &st.v).map(|p| (st.t, p.0)))
            .collect::<gbbm::Result<Vec<_>>>()?;
        columns.push(e);
    }
    print!("{:>6}", "t");
    for nu in nus {
        print!(" {:>12}", format!("nu1={nu}"));
    }
    println!();
    for i in 0..columns[0].len() {
        print!("{:>6.2}", columns[0][i].0);
        for c in &columns {
            print!(" {:>12.6}", c[i].1);
        }
        println!();
    }
    Ok(())
}
