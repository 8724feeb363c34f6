//! Parses the canonical configuration, lists the keys that took defaults in a
//! minimal file, and shows the serialized form.
//!
//! ```sh
//! cargo run --example config_round_trip
//! ```
use gbbm::config::{parse_config, serialize, CANONICAL_CONFIG};

fn main() -> gbbm::Result<()> {
    let canonical = parse_config(CANONICAL_CONFIG)?;
    let text = serialize(&canonical.config);
    assert_eq!(parse_config(&text)?.config, canonical.config);
    println!("{text}");

    let minimal = "[grid]\nL1 = 10\nL2 = 8\nN1 = 32\nN2 = 16\n[time]\nT = 1\ndt = 0.01\n";
    let parsed = parse_config(minimal)?;
    println!("# defaults applied to a minimal file:");
    for d in &parsed.defaults {
        println!("{d}");
    }

    match parse_config("[grid]\nL1 = 10\nL2 = 8\nN1 = 31\nN2 = 16\n[time]\nT = 1\ndt = 0.01\n") {
        Err(e) => println!("# rejected: {e}"),
        Ok(_) => unreachable!("odd N1 is invalid"),
    }
    Ok(())
}
