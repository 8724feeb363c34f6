//! File formats: CSV reports and binary snapshots, written atomically.
//!
//! Snapshot layout (all little-endian):
//!
//! | bytes  | content                                  |
//! |--------|------------------------------------------|
//! | 0..5   | magic `GBBM1`                            |
//! | 5..8   | zero padding                             |
//! | 8..12  | `N1` as `u32`                            |
//! | 12..16 | `N2` as `u32`                            |
//! | 16..24 | time as `f64`                            |
//! | 24..32 | `nu1` as `f64`                           |
//! | 32..48 | flux name, zero padded                   |
//! | 48..   | `v`, then `u`, row-major `f64` (`x1` outer) |
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::evolve::SimState;
use crate::grid::Field;
use crate::problem::Problem;

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"GBBM1";
pub const SNAPSHOT_HEADER_LEN: usize = 48;
const FLUX_NAME_LEN: usize = 16;

/// One stored instant: the lifted unknown and the reconstructed solution.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotFile {
    /// Grid parameter `N1` (rows of the payload).
    pub n1: u32,
    /// Grid parameter `N2` (the payload has `N2 - 1` columns).
    pub n2: u32,
    pub time: f64,
    pub nu1: f64,
    pub flux: String,
    pub v: Array2<f64>,
    pub u: Array2<f64>,
}

impl SnapshotFile {
    pub fn from_state(problem: &Problem, state: &SimState) -> Self {
        let u = problem.reconstruct_u(&state.v, state.t);
        Self {
            n1: problem.grid.n1() as u32,
            n2: problem.grid.n2() as u32,
            time: state.t,
            nu1: state.nu1,
            flux: state.flux_name.clone(),
            v: state.v.values.clone(),
            u: u.values,
        }
    }

    pub fn payload_len(n1: u32, n2: u32) -> usize {
        2 * n1 as usize * (n2 as usize - 1) * 8
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let shape = (self.n1 as usize, self.n2 as usize - 1);
        if self.v.dim() != shape || self.u.dim() != shape {
            return Err(Error::DimensionMismatch {
                expected: shape,
                got: self.v.dim(),
            });
        }
        if self.flux.len() > FLUX_NAME_LEN {
            return Err(Error::Snapshot(format!("flux name `{}` longer than 16 bytes", self.flux)));
        }
        let mut out = Vec::with_capacity(SNAPSHOT_HEADER_LEN + Self::payload_len(self.n1, self.n2));
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(&self.n1.to_le_bytes());
        out.extend_from_slice(&self.n2.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        out.extend_from_slice(&self.nu1.to_le_bytes());
        let mut name = [0u8; FLUX_NAME_LEN];
        name[..self.flux.len()].copy_from_slice(self.flux.as_bytes());
        out.extend_from_slice(&name);
        for x in self.v.iter().chain(self.u.iter()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < SNAPSHOT_HEADER_LEN {
            return Err(Error::Snapshot(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..5] != SNAPSHOT_MAGIC || bytes[5..8] != [0; 3] {
            return Err(Error::Snapshot("bad magic".to_string()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let n1 = u32_at(8);
        let n2 = u32_at(12);
        if n1 == 0 || n2 < 2 {
            return Err(Error::Snapshot(format!("bad grid dims {n1} x {n2}")));
        }
        let payload = Self::payload_len(n1, n2);
        if bytes.len() != SNAPSHOT_HEADER_LEN + payload {
            return Err(Error::Snapshot(format!(
                "expected {} payload bytes, found {}",
                payload,
                bytes.len() - SNAPSHOT_HEADER_LEN
            )));
        }
        let name = &bytes[32..48];
        let end = name.iter().position(|&b| b == 0).unwrap_or(FLUX_NAME_LEN);
        let flux = std::str::from_utf8(&name[..end])
            .map_err(|_| Error::Snapshot("flux name is not UTF-8".to_string()))?
            .to_string();
        let shape = (n1 as usize, n2 as usize - 1);
        let count = shape.0 * shape.1;
        let floats: Vec<f64> = bytes[SNAPSHOT_HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let v = Array2::from_shape_vec(shape, floats[..count].to_vec()).expect("shape checked");
        let u = Array2::from_shape_vec(shape, floats[count..].to_vec()).expect("shape checked");
        Ok(Self {
            n1,
            n2,
            time: f64_at(16),
            nu1: f64_at(24),
            flux,
            v,
            u,
        })
    }

    pub fn v_field(&self) -> Field {
        Field::new(self.v.clone())
    }
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name")))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// 17 significant digits: enough to recover every `f64` exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A numeric table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_float(x)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::invalid("csv", "empty input"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|_| Error::invalid("csv", format!("bad cell `{c}`"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != header.len() {
                return Err(Error::invalid("csv", "row width differs from the header"));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> SnapshotFile {
        let v = Array2::from_shape_fn((8, 5), |(a, k)| a as f64 * 0.5 - k as f64 / 3.0);
        SnapshotFile {
            n1: 8,
            n2: 6,
            time: 0.125,
            nu1: 0.3,
            flux: "saturating".to_string(),
            u: v.mapv(|x| x + 1.0),
            v,
        }
    }

    #[test]
    fn snapshot_layout() {
        let s = sample();
        let b = s.to_bytes().unwrap();
        assert_eq!(b.len(), SNAPSHOT_HEADER_LEN + 2 * 8 * 5 * 8);
        assert_eq!(&b[..5], b"GBBM1");
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8);
        assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 6);
        assert_eq!(f64::from_le_bytes(b[16..24].try_into().unwrap()), 0.125);
        assert_eq!(&b[32..42], b"saturating");
        assert_eq!(f64::from_le_bytes(b[56..64].try_into().unwrap()), s.v[[0, 1]]);
        assert_eq!(SnapshotFile::from_bytes(&b).unwrap(), s);
    }

    #[test]
    fn snapshot_rejects_corruption() {
        let b = sample().to_bytes().unwrap();
        assert!(SnapshotFile::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(SnapshotFile::from_bytes(&bad).is_err());
        assert!(SnapshotFile::from_bytes(&b[..20]).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("gbbm-output-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #[test]
        fn csv_floats_round_trip(xs in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..20)) {
            let mut t = CsvTable::new(&["x"]);
            for &x in &xs {
                t.push(vec![x]);
            }
            let back = CsvTable::parse(&t.to_csv()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
