//! Run configuration, written in TOML.
//!
//! ```text
//! # comment
//! [grid]
//! L1 = 24
//! L2 = 12
//! N1 = 64
//! N2 = 48
//!
//! [signal]
//! kind = "pulses"
//! params = [[0.2, 12, 2, 1.5, 0], [0.1, 6, 1, 3, 0]]
//! ```
//!
//! Multi-term families (pulses, Gaussians, modes) take an array of rows; a
//! flat array is a single row. Unknown sections or keys and values outside
//! their range are rejected with the offending line.
use std::collections::BTreeMap;
use std::fmt::Write as _;

use toml_edit::{Document, TomlError, Value};

use crate::error::{Error, Result};
use crate::evolve::{Mode, PicardSettings, RunSettings};
use crate::grid::GridSpec;
use crate::problem::{BoundarySignal, FluxSpec, InitialData, Scenario};

/// The configuration shipped with the crate, every key at its default.
pub const CANONICAL_CONFIG: &str = include_str!("../configs/canonical.conf");

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub l1: f64,
    pub l2: f64,
    pub n1: usize,
    pub n2: usize,
    pub flux: FluxSpec,
    pub nu1: f64,
    pub signal: BoundarySignal,
    pub initial: InitialData,
    pub t_final: f64,
    pub dt: f64,
    pub mode: Mode,
    pub snapshot_every: u64,
    pub picard: PicardSettings,
    pub dealias: bool,
    pub blowup_factor: f64,
    pub output_dir: String,
    pub write_snapshots: bool,
    /// Direction `dg` of the dependence experiment.
    pub perturb_initial: InitialData,
    /// Direction `dh` of the dependence experiment.
    pub perturb_signal: BoundarySignal,
    /// Default scales of the dependence experiment.
    pub eps: Vec<f64>,
    /// Number of `dt` halvings in the convergence study.
    pub dt_levels: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            l1: 0.0,
            l2: 0.0,
            n1: 0,
            n2: 0,
            flux: FluxSpec::bbm(),
            nu1: 0.0,
            signal: BoundarySignal::zero(),
            initial: InitialData::zero(),
            t_final: 0.0,
            dt: 0.0,
            mode: Mode::Rk4,
            snapshot_every: 10,
            picard: PicardSettings::default(),
            dealias: false,
            blowup_factor: 1e6,
            output_dir: "out".to_string(),
            write_snapshots: true,
            perturb_initial: InitialData::zero(),
            perturb_signal: BoundarySignal::zero(),
            eps: vec![0.1, 0.05, 0.025, 0.0125],
            dt_levels: 3,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.l1, self.l2, self.n1, self.n2)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario {
            grid: self.grid()?,
            flux: self.flux,
            signal: self.signal.clone(),
            initial: self.initial.clone(),
            nu1: self.nu1,
            dealias: self.dealias,
        })
    }

    pub fn run_settings(&self) -> RunSettings {
        RunSettings {
            t_final: self.t_final,
            dt: self.dt,
            mode: self.mode,
            snapshot_steps: self.snapshot_every,
            picard: self.picard,
            blowup_factor: self.blowup_factor,
        }
    }
}

/// A parsed configuration and the keys that fell back to their defaults.
#[derive(Clone, Debug)]
pub struct Parsed {
    pub config: RunConfig,
    /// `section.key = value` for every default that was applied.
    pub defaults: Vec<String>,
}

struct Entry {
    value: Value,
    line: usize,
}

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["L1", "L2", "N1", "N2"]),
    ("model", &["flux", "flux_params", "nu1"]),
    ("signal", &["kind", "params"]),
    ("initial", &["kind", "params"]),
    ("time", &["T", "dt", "mode", "snapshot_every"]),
    ("picard", &["tol", "max_iter", "max_window", "max_halvings", "n_probes"]),
    ("numerics", &["dealias", "seed", "blowup_factor"]),
    ("output", &["dir", "snapshots"]),
    ("perturbation", &["initial_kind", "initial_params", "signal_kind", "signal_params", "eps"]),
    ("convergence", &["dt_levels"]),
];

const REQUIRED: &[&str] = &["grid.L1", "grid.L2", "grid.N1", "grid.N2", "time.T", "time.dt"];

fn config_err(key: &str, line: usize, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        line,
        reason: reason.into(),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Names the `section.key` on the line a syntax error points at.
fn syntax_error(text: &str, e: &TomlError) -> Error {
    let line = e.span().map_or(0, |s| line_of(text, s.start));
    let mut section = "";
    let mut key = String::new();
    for raw in text.lines().take(line) {
        let content = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = content.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            section = name.trim();
            key = section.to_string();
        } else if let Some((k, _)) = content.split_once('=') {
            key = format!("{section}.{}", k.trim());
        }
    }
    config_err(&key, line, e.message().trim().to_string())
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<Parsed> {
    let doc = Document::parse(text).map_err(|e| syntax_error(text, &e))?;
    let span_line = |span: Option<std::ops::Range<usize>>| span.map_or(0, |s| line_of(text, s.start));
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (name, item) in doc.iter() {
        let line = span_line(doc.as_table().key(name).and_then(|k| k.span()));
        let Some(table) = item.as_table_like() else {
            return Err(config_err(name, line, "key outside of any section"));
        };
        let allowed = KEYS
            .iter()
            .find(|(s, _)| *s == name)
            .map(|(_, k)| *k)
            .ok_or_else(|| config_err(name, line, "unknown section"))?;
        for (key, item) in table.iter() {
            let full = format!("{name}.{key}");
            let line = span_line(item.span());
            if !allowed.contains(&key) {
                return Err(config_err(&full, line, "unknown key"));
            }
            let value = item
                .as_value()
                .ok_or_else(|| config_err(&full, line, "expected a value"))?;
            entries.insert(
                full,
                Entry {
                    value: value.clone(),
                    line,
                },
            );
        }
    }
    for key in REQUIRED {
        match entries.get(*key) {
            None => return Err(config_err(key, 0, "missing required key")),
            Some(e) if e.value.as_str() == Some("") => return Err(config_err(key, e.line, "required key is empty")),
            _ => {}
        }
    }

    let mut r = Reader {
        entries,
        defaults: Vec::new(),
    };
    let mut c = RunConfig::default();
    let d = RunConfig::default();
    c.l1 = r.num("grid.L1", d.l1, |x| x > 0.0, "must be > 0")?;
    c.l2 = r.num("grid.L2", d.l2, |x| x > 0.0, "must be > 0")?;
    c.n1 = r.int("grid.N1", 0, |n| n >= 8 && n % 2 == 0, "must be even and >= 8")? as usize;
    c.n2 = r.int("grid.N2", 0, |n| n >= 8, "must be >= 8")? as usize;

    let flux_name = r.text("model.flux", d.flux.name())?;
    let (flux_params, fp_line) = r.list("model.flux_params", &[])?;
    c.flux = FluxSpec::from_name(&flux_name, &flux_params).map_err(|e| relabel(e, "model.flux", fp_line))?;
    c.nu1 = r.num("model.nu1", d.nu1, |x| x >= 0.0, "must be >= 0")?;

    c.signal = r.signal("signal.kind", "signal.params")?;
    c.initial = r.initial("initial.kind", "initial.params")?;

    c.t_final = r.num("time.T", d.t_final, |x| x >= 0.0, "must be >= 0")?;
    c.dt = r.num("time.dt", d.dt, |x| x > 0.0, "must be > 0")?;
    let mode = r.text("time.mode", d.mode.name())?;
    c.mode = match mode.as_str() {
        "rk4" => Mode::Rk4,
        "picard" => Mode::Picard,
        "both" => Mode::Both,
        _ => return Err(config_err("time.mode", r.line("time.mode"), "must be rk4, picard or both")),
    };
    c.snapshot_every = r.int("time.snapshot_every", d.snapshot_every, |n| n >= 1, "must be >= 1")?;
    if c.dt > 0.0 && c.t_final > 0.0 {
        let steps = (c.t_final / c.dt).round();
        if (steps * c.dt - c.t_final).abs() > 1e-9 * c.t_final.max(1.0) {
            return Err(config_err("time.T", r.line("time.T"), "must be an integer multiple of dt"));
        }
    }

    let dp = d.picard;
    c.picard.tol = r.num("picard.tol", dp.tol, |x| x > 0.0, "must be > 0")?;
    c.picard.max_iter = r.int("picard.max_iter", dp.max_iter as u64, |n| n >= 1, "must be >= 1")? as usize;
    c.picard.max_window = r.num("picard.max_window", dp.max_window, |x| x > 0.0, "must be > 0")?;
    c.picard.max_halvings = r.int("picard.max_halvings", dp.max_halvings as u64, |n| n <= 30, "must be <= 30")? as u32;
    c.picard.n_probes = r.int("picard.n_probes", dp.n_probes as u64, |n| n >= 1, "must be >= 1")? as usize;

    c.dealias = r.boolean("numerics.dealias", d.dealias)?;
    c.picard.seed = r.int("numerics.seed", dp.seed, |_| true, "")?;
    c.blowup_factor = r.num("numerics.blowup_factor", d.blowup_factor, |x| x > 1.0, "must be > 1")?;

    c.output_dir = r.text("output.dir", &d.output_dir)?;
    if c.output_dir.is_empty() {
        return Err(config_err("output.dir", r.line("output.dir"), "must not be empty"));
    }
    c.write_snapshots = r.boolean("output.snapshots", d.write_snapshots)?;

    c.perturb_initial = r.initial("perturbation.initial_kind", "perturbation.initial_params")?;
    c.perturb_signal = r.signal("perturbation.signal_kind", "perturbation.signal_params")?;
    let default_eps = d.eps.clone();
    let (eps, eps_line) = r.list("perturbation.eps", &default_eps)?;
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(config_err("perturbation.eps", eps_line, "must be positive and strictly decreasing"));
    }
    c.eps = eps;
    c.dt_levels = r.int("convergence.dt_levels", d.dt_levels as u64, |n| (2..=8).contains(&n), "must be in 2..=8")? as u32;

    Ok(Parsed {
        config: c,
        defaults: r.defaults,
    })
}

fn relabel(e: Error, key: &str, line: usize) -> Error {
    match e {
        Error::InvalidParameter { reason, .. } => config_err(key, line, reason),
        other => other,
    }
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    defaults: Vec<String>,
}

fn shown(v: &Value) -> String {
    v.to_string().trim().to_string()
}

fn number(v: &Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|n| n as f64)).filter(|x| x.is_finite())
}

fn numbers(key: &str, line: usize, items: &[&Value]) -> Result<Vec<f64>> {
    items
        .iter()
        .map(|v| number(v).ok_or_else(|| config_err(key, line, format!("`{}` is not a finite number", shown(v)))))
        .collect()
}

impl Reader {
    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn raw(&mut self, key: &str, default: impl FnOnce() -> String) -> Option<(Value, usize)> {
        match self.entries.get(key) {
            Some(e) => Some((e.value.clone(), e.line)),
            None => {
                self.defaults.push(format!("{key} = {}", default()));
                None
            }
        }
    }

    fn num(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, why: &str) -> Result<f64> {
        let Some((v, line)) = self.raw(key, || fmt_f64(default)) else {
            return Ok(default);
        };
        let x = number(&v).ok_or_else(|| config_err(key, line, format!("`{}` is not a finite number", shown(&v))))?;
        if !ok(x) {
            return Err(config_err(key, line, format!("{} out of range: {why}", shown(&v))));
        }
        Ok(x)
    }

    fn int(&mut self, key: &str, default: u64, ok: impl Fn(u64) -> bool, why: &str) -> Result<u64> {
        let Some((v, line)) = self.raw(key, || default.to_string()) else {
            return Ok(default);
        };
        let n = v
            .as_integer()
            .and_then(|n| u64::try_from(n).ok())
            .ok_or_else(|| config_err(key, line, format!("`{}` is not a non-negative integer", shown(&v))))?;
        if !ok(n) {
            return Err(config_err(key, line, format!("{n} out of range: {why}")));
        }
        Ok(n)
    }

    fn boolean(&mut self, key: &str, default: bool) -> Result<bool> {
        let Some((v, line)) = self.raw(key, || default.to_string()) else {
            return Ok(default);
        };
        v.as_bool()
            .ok_or_else(|| config_err(key, line, format!("`{}` is not true/false", shown(&v))))
    }

    fn text(&mut self, key: &str, default: &str) -> Result<String> {
        let Some((v, line)) = self.raw(key, || fmt_str(default)) else {
            return Ok(default.to_string());
        };
        v.as_str()
            .map(str::to_string)
            .ok_or_else(|| config_err(key, line, format!("`{}` is not a string", shown(&v))))
    }

    /// A flat array is one row; an array of arrays is several.
    fn rows(&mut self, key: &str) -> Result<(Vec<Vec<f64>>, usize)> {
        let Some((v, line)) = self.raw(key, || "[]".to_string()) else {
            return Ok((Vec::new(), 0));
        };
        let arr = v
            .as_array()
            .ok_or_else(|| config_err(key, line, format!("`{}` is not an array", shown(&v))))?;
        let items: Vec<&Value> = arr.iter().collect();
        if items.is_empty() {
            return Ok((Vec::new(), line));
        }
        if items.iter().all(|x| x.is_array()) {
            let rows = items
                .iter()
                .map(|row| numbers(key, line, &row.as_array().expect("checked").iter().collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            return Ok((rows, line));
        }
        Ok((vec![numbers(key, line, &items)?], line))
    }

    fn list(&mut self, key: &str, default: &[f64]) -> Result<(Vec<f64>, usize)> {
        let Some((v, line)) = self.raw(key, || fmt_list(default)) else {
            return Ok((default.to_vec(), 0));
        };
        let arr = v
            .as_array()
            .ok_or_else(|| config_err(key, line, format!("`{}` is not an array of numbers", shown(&v))))?;
        Ok((numbers(key, line, &arr.iter().collect::<Vec<_>>())?, line))
    }

    fn signal(&mut self, kind_key: &str, params_key: &str) -> Result<BoundarySignal> {
        let kind = self.text(kind_key, "zero")?;
        let (rows, line) = self.rows(params_key)?;
        match kind.as_str() {
            "zero" if rows.is_empty() => Ok(BoundarySignal::zero()),
            "zero" => Err(config_err(params_key, line, "kind `zero` takes no parameters")),
            "pulses" => BoundarySignal::from_rows(&rows).map_err(|e| relabel(e, params_key, line)),
            other => Err(config_err(kind_key, self.line(kind_key), format!("unknown signal kind `{other}`"))),
        }
    }

    fn initial(&mut self, kind_key: &str, params_key: &str) -> Result<InitialData> {
        let kind = self.text(kind_key, "zero")?;
        let (rows, line) = self.rows(params_key)?;
        if kind == "zero" && !rows.is_empty() {
            return Err(config_err(params_key, line, "kind `zero` takes no parameters"));
        }
        InitialData::from_name(&kind, &rows).map_err(|e| relabel(e, kind_key, self.line(kind_key).max(line)))
    }
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_str(s: &str) -> String {
    Value::from(s).to_string()
}

fn fmt_list(xs: &[f64]) -> String {
    format!("[{}]", xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(", "))
}

fn fmt_rows(rows: &[Vec<f64>]) -> String {
    format!("[{}]", rows.iter().map(|r| fmt_list(r)).collect::<Vec<_>>().join(", "))
}

/// Writes every key explicitly; `parse_config(&serialize(c))` returns `c`.
pub fn serialize(c: &RunConfig) -> String {
    let mut s = String::new();
    let sig = |s: &BoundarySignal| if s.pulses.is_empty() { "zero" } else { "pulses" };
    let (ik, ir) = c.initial.describe();
    let (pk, pr) = c.perturb_initial.describe();
    let _ = writeln!(s, "[grid]");
    let _ = writeln!(s, "L1 = {}", fmt_f64(c.l1));
    let _ = writeln!(s, "L2 = {}", fmt_f64(c.l2));
    let _ = writeln!(s, "N1 = {}", c.n1);
    let _ = writeln!(s, "N2 = {}", c.n2);
    let _ = writeln!(s, "\n[model]");
    let _ = writeln!(s, "flux = {}", fmt_str(c.flux.name()));
    let _ = writeln!(s, "flux_params = {}", fmt_list(&c.flux.params()));
    let _ = writeln!(s, "nu1 = {}", fmt_f64(c.nu1));
    let _ = writeln!(s, "\n[signal]");
    let _ = writeln!(s, "kind = {}", fmt_str(sig(&c.signal)));
    let _ = writeln!(s, "params = {}", fmt_rows(&c.signal.rows()));
    let _ = writeln!(s, "\n[initial]");
    let _ = writeln!(s, "kind = {}", fmt_str(ik));
    let _ = writeln!(s, "params = {}", fmt_rows(&ir));
    let _ = writeln!(s, "\n[time]");
    let _ = writeln!(s, "T = {}", fmt_f64(c.t_final));
    let _ = writeln!(s, "dt = {}", fmt_f64(c.dt));
    let _ = writeln!(s, "mode = {}", fmt_str(c.mode.name()));
    let _ = writeln!(s, "snapshot_every = {}", c.snapshot_every);
    let _ = writeln!(s, "\n[picard]");
    let _ = writeln!(s, "tol = {}", fmt_f64(c.picard.tol));
    let _ = writeln!(s, "max_iter = {}", c.picard.max_iter);
    let _ = writeln!(s, "max_window = {}", fmt_f64(c.picard.max_window));
    let _ = writeln!(s, "max_halvings = {}", c.picard.max_halvings);
    let _ = writeln!(s, "n_probes = {}", c.picard.n_probes);
    let _ = writeln!(s, "\n[numerics]");
    let _ = writeln!(s, "dealias = {}", c.dealias);
    let _ = writeln!(s, "seed = {}", c.picard.seed);
    let _ = writeln!(s, "blowup_factor = {}", fmt_f64(c.blowup_factor));
    let _ = writeln!(s, "\n[output]");
    let _ = writeln!(s, "dir = {}", fmt_str(&c.output_dir));
    let _ = writeln!(s, "snapshots = {}", c.write_snapshots);
    let _ = writeln!(s, "\n[perturbation]");
    let _ = writeln!(s, "initial_kind = {}", fmt_str(pk));
    let _ = writeln!(s, "initial_params = {}", fmt_rows(&pr));
    let _ = writeln!(s, "signal_kind = {}", fmt_str(sig(&c.perturb_signal)));
    let _ = writeln!(s, "signal_params = {}", fmt_rows(&c.perturb_signal.rows()));
    let _ = writeln!(s, "eps = {}", fmt_list(&c.eps));
    let _ = writeln!(s, "\n[convergence]");
    let _ = writeln!(s, "dt_levels = {}", c.dt_levels);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[grid]\nL1 = 24\nL2 = 12\nN1 = 32\nN2 = 24\n[time]\nT = 1\ndt = 0.01\n";

    fn key_of(e: Error) -> (String, usize) {
        match e {
            Error::Config { key, line, .. } => (key, line),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minimal_config_echoes_defaults() {
        let p = parse_config(MINIMAL).unwrap();
        assert_eq!(p.config.n1, 32);
        assert_eq!(p.config.mode, Mode::Rk4);
        assert!(p.defaults.iter().any(|d| d == "model.flux = \"bbm\""));
        assert!(p.defaults.iter().any(|d| d == "picard.tol = 1e-10"));
    }

    #[test]
    fn canonical_matches_defaults() {
        let p = parse_config(CANONICAL_CONFIG).unwrap();
        let mut expected = parse_config(MINIMAL).unwrap().config;
        expected.l1 = p.config.l1;
        expected.l2 = p.config.l2;
        expected.n1 = p.config.n1;
        expected.n2 = p.config.n2;
        expected.t_final = p.config.t_final;
        expected.dt = p.config.dt;
        expected.signal = p.config.signal.clone();
        expected.initial = p.config.initial.clone();
        assert_eq!(p.config, expected);
        assert!(p.defaults.is_empty(), "{:?}", p.defaults);
    }

    #[test]
    fn errors_name_key_and_line() {
        let (k, _) = key_of(parse_config("[grid]\nL1 = 1\n").unwrap_err());
        assert_eq!(k, "grid.L2");
        let (k, l) = key_of(parse_config(&MINIMAL.replace("L2 = 12", "L2 =")).unwrap_err());
        assert_eq!((k.as_str(), l), ("grid.L2", 3));
        let (k, l) = key_of(parse_config(&format!("{MINIMAL}bogus = 1\n")).unwrap_err());
        assert_eq!((k.as_str(), l), ("time.bogus", 9));
        let (k, l) = key_of(parse_config(&MINIMAL.replace("N1 = 32", "N1 = 7")).unwrap_err());
        assert_eq!((k.as_str(), l), ("grid.N1", 4));
        let (k, _) = key_of(parse_config(&format!("{MINIMAL}[nope]\n")).unwrap_err());
        assert_eq!(k, "nope");
        let (k, l) = key_of(parse_config(&format!("{MINIMAL}[model]\nnu1 = -1\n")).unwrap_err());
        assert_eq!((k.as_str(), l), ("model.nu1", 10));
        let (k, _) = key_of(parse_config(&MINIMAL.replace("T = 1", "T = 1.005")).unwrap_err());
        assert_eq!(k, "time.T");
        let (k, _) = key_of(parse_config(&format!("{MINIMAL}[signal]\nkind = \"pulses\"\nparams = [1, 2]\n")).unwrap_err());
        assert_eq!(k, "signal.params");
    }

    #[test]
    fn round_trip() {
        let text = format!(
            "{MINIMAL}[model]\nflux = \"linear\"\nflux_params = [0.5, -0.25]\nnu1 = 0.3\n\
             [signal]\nkind = \"pulses\"\nparams = [[0.2, 12, 2, 1.5, 0], [0.1, 3, 1, 0.7, 0.1]]\n\
             [initial]\nkind = \"gaussian\"\nparams = [0.3, 12, 5, 1.5]\n\
             [perturbation]\nsignal_kind = \"pulses\"\nsignal_params = [1, 12, 2, 1.5, 0]\neps = [0.2, 0.1]\n"
        );
        let a = parse_config(&text).unwrap().config;
        let b = parse_config(&serialize(&a)).unwrap();
        assert_eq!(a, b.config);
        assert!(b.defaults.is_empty());
    }
}
