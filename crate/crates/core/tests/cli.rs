//! The `gbbm` binary: outputs, file formats and exit codes.
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gbbm::output::{CsvTable, SnapshotFile, SNAPSHOT_HEADER_LEN};

const BASE: &str = "[grid]\nL1 = 24\nL2 = 12\nN1 = 16\nN2 = 12\n\
                    [signal]\nkind = \"pulses\"\nparams = [0.1, 12, 2, 1.5, 0]\n\
                    [initial]\nkind = \"gaussian\"\nparams = [0.3, 12, 4, 1.5]\n";

fn gbbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gbbm")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("c.conf");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_with_zero_final_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}[time]\nT = 0\ndt = 0.01\n"));
    let out = dir.path().join("out");
    let o = gbbm(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let norms = CsvTable::parse(&fs::read_to_string(out.join("norms.csv")).unwrap()).unwrap();
    assert_eq!(norms.header, ["t", "L2", "H1", "H2", "E_h1", "E_h2", "boundary_flux"]);
    assert_eq!(norms.rows.len(), 1);
    assert!(out.join("snap_000000.bin").exists());
    assert!(!out.join("snap_000001.bin").exists());
}

#[test]
fn snapshots_hold_v_and_reconstructed_u() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}[time]\nT = 0.1\ndt = 0.01\nsnapshot_every = 5\n"));
    let out = dir.path().join("out");
    assert!(gbbm(&["run", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let bytes = fs::read(out.join("snap_000002.bin")).unwrap();
    assert_eq!(bytes.len(), SNAPSHOT_HEADER_LEN + 2 * 16 * 11 * 8);
    let s = SnapshotFile::from_bytes(&bytes).unwrap();
    assert_eq!((s.n1, s.n2, s.flux.as_str(), s.nu1), (16, 12, "bbm", 0.0));
    assert!((s.time - 0.1).abs() < 1e-15);
    let grid = gbbm::GridSpec::new(24.0, 12.0, 16, 12).unwrap();
    let signal = gbbm::problem::BoundarySignal::pulse(0.1, 12.0, 2.0, 1.5, 0.0);
    for ((a, k), u) in s.u.indexed_iter() {
        let lift = signal.h(grid.x1(a), s.time) * (-grid.x2(k)).exp();
        assert!((u - s.v[[a, k]] - lift).abs() < 1e-14);
    }
    let norms = CsvTable::parse(&fs::read_to_string(out.join("norms.csv")).unwrap()).unwrap();
    assert_eq!(norms.column("t").unwrap().len(), 3);
}

#[test]
fn verify_helmholtz_passes() {
    let o = gbbm(&["verify-helmholtz", "--n", "10"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4);
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_energy_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}[time]\nT = 0.2\ndt = 0.01\nsnapshot_every = 2\n"));
    let out = dir.path().join("out");
    let o = gbbm(&["verify-energy", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let t = CsvTable::parse(&fs::read_to_string(out.join("energy.csv")).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 11);
    let h1 = t.column("H1").unwrap();
    let env = t.column("gronwall_envelope").unwrap();
    assert!(h1.iter().zip(&env).all(|(n, e)| *n <= e * (1.0 + 1e-9)));
}

#[test]
fn dependence_with_zero_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}[time]\nT = 0.1\ndt = 0.01\n"));
    let out = dir.path().join("out");
    let o = gbbm(&["dependence", &cfg, "--eps", "0.1,0.05", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let t = CsvTable::parse(&fs::read_to_string(out.join("dependence.csv")).unwrap()).unwrap();
    assert_eq!(t.column("eps").unwrap(), [0.1, 0.05]);
    assert!(t.column("delta").unwrap().iter().all(|&d| d == 0.0));
}

#[test]
fn convergence_writes_both_studies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASE}[time]\nT = 0.4\ndt = 0.1\n[convergence]\ndt_levels = 2\n"));
    let out = dir.path().join("out");
    assert!(gbbm(&["convergence", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("dt,")).count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("L2,")).count(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let cfg = write_config(dir.path(), "[grid]\nL1 = 24\n");
    let o = gbbm(&["run", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.L2"));

    let cfg = write_config(dir.path(), &format!("{BASE}[time]\nT = 0.1\ndt = 0.01\nbogus = 3\n"));
    assert_eq!(gbbm(&["run", &cfg, "--out", out]).status.code(), Some(2));

    assert_eq!(gbbm(&["run", "/nonexistent/c.conf"]).status.code(), Some(2));

    // a far-wall violation is a configuration problem
    let cfg = write_config(
        dir.path(),
        "[grid]\nL1 = 24\nL2 = 6\nN1 = 16\nN2 = 12\n[initial]\nkind = \"gaussian\"\nparams = [1, 12, 4, 1.5]\n[time]\nT = 0.1\ndt = 0.01\n",
    );
    assert_eq!(gbbm(&["run", &cfg, "--out", out]).status.code(), Some(2));

    // Picard with a single allowed iteration cannot converge
    let cfg = write_config(
        dir.path(),
        &format!("{BASE}[time]\nT = 0.1\ndt = 0.01\nmode = \"picard\"\n[picard]\nmax_iter = 1\nmax_halvings = 0\n"),
    );
    assert_eq!(gbbm(&["run", &cfg, "--out", out]).status.code(), Some(3));
}
