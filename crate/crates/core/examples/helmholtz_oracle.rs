//! Checks `(I - Delta)^{-1}` against a dense direct solve and the `H^2 <= L^2`
//! bound on random right-hand sides.
//!
//! ```sh
//! cargo run --example helmholtz_oracle
//! ```
use gbbm::helmholtz::dense_operator;
use gbbm::{Field, GridSpec, HelmholtzSolver};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};

fn main() -> gbbm::Result<()> {
    let grid = GridSpec::new(2.0, 1.5, 16, 8)?;
    let solver = HelmholtzSolver::new(&grid);
    let lu = dense_operator(&grid).lu();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);

    println!("{:>4} {:>12} {:>14}", "rhs", "max diff", "H2/L2 ratio");
    for i in 0..5 {
        let f = Field::new(grid.zeros().values.mapv(|_| rng.random_range(-1.0..1.0)));
        let u = solver.solve(&f)?;
        let fv = DVector::from_iterator(f.values.len(), f.values.iter().copied());
        let direct = lu.solve(&fv).expect("nonsingular");
        let diff = u.values.iter().zip(direct.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let (h2, l2) = solver.h2_bound_check(&f)?;
        println!("{i:>4} {diff:>12.3e} {:>14.12}", h2 / l2);
    }
    Ok(())
}
