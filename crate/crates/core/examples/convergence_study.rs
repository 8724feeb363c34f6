//! Temporal self-convergence of RK4 and sensitivity to the truncation depth,
//! driven from the shipped canonical configuration.
//!
//! ```sh
//! cargo run --release --example convergence_study
//! ```
use gbbm::commands::convergence_study;
use gbbm::config::{parse_config, CANONICAL_CONFIG};

fn main() -> gbbm::Result<()> {
    let mut c = parse_config(CANONICAL_CONFIG)?.config;
    c.dt = 0.1;
    c.t_final = 2.0;
    c.dt_levels = 4;
    let s = convergence_study(&c)?;
    println!("{:>10} {:>14} {:>12} {:>8}", "dt", "final H2", "diff", "factor");
    for (i, dt) in s.dts.iter().enumerate() {
        let diff = s.diffs.get(i).map_or(String::new(), |d| format!("{d:.3e}"));
        let factor = s.factors.get(i).map_or(String::new(), |f| format!("{f:.2}"));
        println!("{dt:>10.5} {:>14.10} {diff:>12} {factor:>8}", s.final_h2[i]);
    }
    for (l2, n2, h2) in s.depth {
        println!("L2 = {l2:>5}, N2 = {n2:>4}: final ||u||_H2 = {h2:.12}");
    }
    println!("relative change under L2 doubling: {:.3e}", s.depth_relative_change);
    Ok(())
}
