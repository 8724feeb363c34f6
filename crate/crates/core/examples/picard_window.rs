//! Plans a contraction window from calibrated constants, solves it by Picard
//! iteration and compares with RK4 on the same nodes.
//!
//! ```sh
//! cargo run --release --example picard_window
//! ```
use gbbm::evolve::{picard_window, rk4_step, PicardOptions, WindowPlanner, B_OPERATOR_BOUND};
use gbbm::problem::{BoundarySignal, FluxSpec, InitialData, Scenario};
use gbbm::GridSpec;

fn main() -> gbbm::Result<()> {
    let scenario = Scenario {
        grid: GridSpec::new(24.0, 12.0, 64, 48)?,
        flux: FluxSpec::quadratic(),
        signal: BoundarySignal::pulse(0.2, 12.0, 2.0, 2.0, 0.0),
        initial: InitialData::gaussian(0.5, 12.0, 4.0, 1.5),
        nu1: 0.0,
        dealias: false,
    };
    let problem = scenario.problem()?;
    let grid = &problem.grid;
    let g = scenario.gtilde()?.field;

    let g_h2 = grid.sobolev_norm(&g, 2.0)?;
    let h_norm = problem.signal.ch2_norm(grid, 0.0, 0.5, 16);
    let probe = 2.0 * (g_h2 + B_OPERATOR_BOUND * h_norm);
    let planner = WindowPlanner::calibrate(&problem, 0.0, probe, 16, 1, 0.5)?;
    let window = planner.suggest(g_h2, h_norm);
    println!("C1 = {:.4}, C2 = {:.4}, R = {:.4}, S = {:.4}", planner.c1_hat(g_h2, h_norm), planner.c2_hat,
        planner.ball_radius(g_h2, h_norm), window);

    let steps = ((window / 1e-3) as usize).max(1);
    let dt = window / steps as f64;
    let opts = PicardOptions {
        n_quad: steps + 1,
        tol: 1e-11,
        max_iter: 60,
        radius: Some(planner.ball_radius(g_h2, h_norm)),
    };
    let w = picard_window(&problem, &g, 0.0, window, &opts)?;
    println!("iterate differences:");
    for (i, d) in w.report.iterates.iter().enumerate() {
        println!("  {i:>2} {d:.3e}");
    }
    println!("contraction ratios: {:?}", w.report.contraction_ratios().iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>());

    let mut v = g.clone();
    for q in 0..steps {
        v = rk4_step(&problem, &v, q as f64 * dt, dt)?;
    }
    println!("endpoint H2 gap to RK4: {:.3e}", grid.sobolev_norm(&w.endpoint().sub(&v), 2.0)?);
    Ok(())
}
