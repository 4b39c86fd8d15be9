//! Run configuration: defaults, then the config file, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use backflow_core::kernels::{DEFAULT_QUADRATURE_NODES, DEFAULT_SERIES_ORDER, MAX_SERIES_ORDER};
use backflow_core::scales::WINDOW;
use backflow_core::spectral::{DEFAULT_INTERVALS, DEFAULT_LENGTHS};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Every recognised key and the section it belongs to. The empty section is
/// the part of the file before the first header.
pub const KEYS: &[(&str, &str)] = &[
    ("", "threads"),
    ("grid", "lengths"),
    ("grid", "intervals"),
    ("grid", "length"),
    ("grid", "points"),
    ("grid", "quadrature"),
    ("grid", "series_order"),
    ("scan", "shape"),
    ("scan", "slope"),
    ("scan", "epsilon"),
    ("scan", "epsilons"),
    ("scan", "epsilon_min"),
    ("scan", "epsilon_max"),
    ("scan", "epsilon_step"),
    ("scan", "duration"),
    ("scan", "samples_per_cell"),
    ("scan", "p_min"),
    ("scan", "p_max"),
    ("scan", "samples"),
    ("output", "dir"),
    ("output", "svg"),
    ("output", "cache"),
    ("output", "cache_dir"),
];

/// Keys that change where or how fast a run happens, not what it computes.
const UNHASHED: &[&str] = &["threads", "dir", "cache", "cache_dir"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    BmLambda,
    MuScan,
    Verify,
    BoundaryDump,
    KernelDump,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::BmLambda => "bm-lambda",
            Self::MuScan => "mu-scan",
            Self::Verify => "verify",
            Self::BoundaryDump => "boundary-dump",
            Self::KernelDump => "kernel-dump",
        }
    }
}

/// Parse `key = value` text with `[section]` headers. `#` and `;` start comments.
pub fn parse_file(text: &str, origin: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let at = || format!("{}:{}", origin.display(), i + 1);
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| CliError::Config(format!("{}: unterminated section header", at())))?
                .trim();
            if !KEYS.iter().any(|(s, _)| *s == name) || name.is_empty() {
                return Err(CliError::Config(format!("{}: unknown section [{name}]", at())));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| CliError::Config(format!("{}: expected `key = value`", at())))?;
        let key = key.trim().replace('-', "_");
        match KEYS.iter().find(|(_, k)| *k == key) {
            Some((s, _)) if *s == section => {}
            Some((s, _)) => {
                return Err(CliError::Config(format!("{}: key `{key}` belongs in section [{s}]", at())));
            }
            None => return Err(CliError::Config(format!("{}: unknown key `{key}`", at()))),
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("{}: duplicate key `{key}`", at())));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShapeChoice {
    Straight,
    Bump,
    /// The canonical momentum-space kernel.
    Bm,
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug)]
pub struct Settings {
    pub command: CommandKind,
    pub threads: Option<usize>,
    pub lengths: Vec<f64>,
    pub intervals: Vec<usize>,
    pub length: f64,
    pub points: usize,
    pub quadrature: usize,
    pub series_order: usize,
    pub shape: ShapeChoice,
    pub slope: f64,
    pub epsilon: f64,
    pub epsilons: Vec<f64>,
    pub duration: f64,
    pub samples_per_cell: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub samples: usize,
    pub dir: PathBuf,
    pub svg: bool,
    pub cache: bool,
    pub cache_dir: Option<PathBuf>,
}

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("`{key} = {value}`: {what}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(key, v, "expected a finite number"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse::<usize>().map_err(|_| bad(key, v, "expected a non-negative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

fn parse_list<T>(key: &str, v: &str, f: fn(&str, &str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| f(key, s)).collect()
}

/// Round away binary noise so that `-0.5 + 3 * 0.1` prints as `-0.2`.
fn tidy(x: f64) -> f64 {
    (x * 1e12).round() / 1e12 + 0.0
}

fn epsilon_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0) || max < min {
        return Err(CliError::Config(format!("bad epsilon range [{min}, {max}] with step {step}")));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| tidy(min + i as f64 * step)).collect())
}

impl Settings {
    pub fn resolve(command: CommandKind, map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let f = |k: &str, d: f64| get(k).map_or(Ok(d), |v| parse_f64(k, v));
        let u = |k: &str, d: usize| get(k).map_or(Ok(d), |v| parse_usize(k, v));
        let b = |k: &str, d: bool| get(k).map_or(Ok(d), |v| parse_bool(k, v));

        let default_shape = match command {
            CommandKind::BmLambda | CommandKind::Verify => ShapeChoice::Straight,
            _ => ShapeChoice::Bump,
        };
        let shape = match get("shape") {
            None => default_shape,
            Some("straight") => ShapeChoice::Straight,
            Some("bump") => ShapeChoice::Bump,
            Some("bm") => ShapeChoice::Bm,
            Some(v) => return Err(bad("shape", v, "expected straight, bump or bm")),
        };
        let epsilons = match get("epsilons") {
            Some(v) => parse_list("epsilons", v, parse_f64)?,
            None => epsilon_range(f("epsilon_min", -0.5)?, f("epsilon_max", 0.5)?, f("epsilon_step", 0.1)?)?,
        };
        if epsilons.is_empty() {
            return Err(CliError::Config("empty epsilon list".into()));
        }
        let (length, points) = match command {
            CommandKind::KernelDump => (10.0, 50),
            _ => (20.0, 1000),
        };
        let threads = match get("threads") {
            None => None,
            Some(v) => match parse_usize("threads", v)? {
                0 => return Err(bad("threads", v, "need at least one thread")),
                n => Some(n),
            },
        };
        let s = Self {
            command,
            threads,
            lengths: get("lengths").map_or(Ok(DEFAULT_LENGTHS.to_vec()), |v| parse_list("lengths", v, parse_f64))?,
            intervals: get("intervals")
                .map_or(Ok(DEFAULT_INTERVALS.to_vec()), |v| parse_list("intervals", v, parse_usize))?,
            length: f("length", length)?,
            points: u("points", points)?,
            quadrature: u("quadrature", DEFAULT_QUADRATURE_NODES)?,
            series_order: u("series_order", DEFAULT_SERIES_ORDER)?,
            shape,
            slope: f("slope", 1.0)?,
            epsilon: f("epsilon", 0.0)?,
            epsilons,
            duration: f("duration", WINDOW)?,
            samples_per_cell: u("samples_per_cell", 3)?,
            p_min: f("p_min", -3.0)?,
            p_max: f("p_max", 3.0)?,
            samples: u("samples", 601)?,
            dir: PathBuf::from(get("dir").unwrap_or(".")),
            svg: b("svg", false)?,
            cache: b("cache", false)?,
            cache_dir: get("cache_dir").map(PathBuf::from),
        };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.series_order > MAX_SERIES_ORDER {
            return fail(format!("series_order {} exceeds {MAX_SERIES_ORDER}", self.series_order));
        }
        if self.quadrature == 0 {
            return fail("quadrature needs at least one node".into());
        }
        if !(self.slope > 0.0) {
            return fail(format!("slope must be positive, got {}", self.slope));
        }
        if self.duration != 0.0 && self.duration != WINDOW {
            return fail(format!("duration must be 0 or {WINDOW} (the dimensionless window), got {}", self.duration));
        }
        if self.samples_per_cell == 0 {
            return fail("samples_per_cell must be positive".into());
        }
        if !(self.p_max > self.p_min) || self.samples < 2 {
            return fail(format!("need p_min < p_max and samples >= 2, got [{}, {}] x {}", self.p_min, self.p_max, self.samples));
        }
        if self.command == CommandKind::MuScan && self.shape != ShapeChoice::Bump {
            return fail("mu-scan scans the Gaussian-bump family; shape must be bump".into());
        }
        if self.shape == ShapeChoice::Bm && matches!(self.command, CommandKind::MuScan | CommandKind::BoundaryDump) {
            return fail(format!("shape bm has no boundary curve for {}", self.command.name()));
        }
        Ok(())
    }

    /// Canonical text of everything that determines the numbers.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(s, "command={}", self.command.name());
        let _ = writeln!(s, "lengths={}", list(&self.lengths));
        let _ = writeln!(s, "intervals={}", self.intervals.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        let _ = writeln!(s, "length={:?}", self.length);
        let _ = writeln!(s, "points={}", self.points);
        let _ = writeln!(s, "quadrature={}", self.quadrature);
        let _ = writeln!(s, "series_order={}", self.series_order);
        let _ = writeln!(s, "shape={:?}", self.shape);
        let _ = writeln!(s, "slope={:?}", self.slope);
        let _ = writeln!(s, "epsilon={:?}", self.epsilon);
        let _ = writeln!(s, "epsilons={}", list(&self.epsilons));
        let _ = writeln!(s, "duration={:?}", self.duration);
        let _ = writeln!(s, "samples_per_cell={}", self.samples_per_cell);
        let _ = writeln!(s, "p_range={:?},{:?},{}", self.p_min, self.p_max, self.samples);
        let _ = writeln!(s, "svg={}", self.svg);
        debug_assert!(UNHASHED.iter().all(|k| !s.contains(&format!("\n{k}="))));
        s
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Cache directory, if caching is enabled. The environment wins.
    pub fn cache_location(&self) -> Option<PathBuf> {
        if let Some(dir) = std::env::var_os("BACKFLOW_CACHE_DIR").filter(|d| !d.is_empty()) {
            return Some(PathBuf::from(dir));
        }
        if !self.cache {
            return None;
        }
        Some(self.cache_dir.clone().unwrap_or_else(|| self.dir.join("cache")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<Settings, CliError> {
        let map = parse_file(text, Path::new("test.cfg"))?;
        Settings::resolve(CommandKind::MuScan, &map)
    }

    #[test]
    fn sections_and_comments() {
        let s = resolve("threads = 2\n[grid]\nlengths = 5, 8 # short\nintervals = 40,80\n[scan]\nepsilons = -0.1, 0, 0.1\n").unwrap();
        assert_eq!(s.lengths, vec![5.0, 8.0]);
        assert_eq!(s.intervals, vec![40, 80]);
        assert_eq!(s.epsilons, vec![-0.1, 0.0, 0.1]);
        assert_eq!(s.threads, Some(2));
    }

    #[test]
    fn misplaced_and_unknown_keys() {
        assert!(resolve("[scan]\nlengths = 5, 8\n").is_err());
        assert!(resolve("[grid]\nwidth = 3\n").is_err());
        assert!(resolve("[plots]\n").is_err());
        assert!(resolve("[grid]\nlengths = 5\nlengths = 6\n").is_err());
        assert!(resolve("[grid\n").is_err());
    }

    #[test]
    fn default_scan_range() {
        let s = resolve("").unwrap();
        assert_eq!(s.epsilons.len(), 11);
        assert_eq!(s.epsilons[0], -0.5);
        assert_eq!(s.epsilons[5], 0.0);
        assert_eq!(s.epsilons[7], 0.2);
        assert_eq!(s.epsilons[10], 0.5);
        assert!(s.epsilons.iter().all(|e| e.to_bits() != (-0.0f64).to_bits()));
    }

    #[test]
    fn hash_ignores_placement() {
        let a = resolve("threads = 1\n[output]\ndir = a\n").unwrap();
        let b = resolve("threads = 8\n[output]\ndir = b\ncache = true\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = resolve("[grid]\nquadrature = 64\n").unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(resolve("[scan]\nslope = -1\n").is_err());
        assert!(resolve("[scan]\nshape = straight\n").is_err());
        assert!(resolve("[grid]\nseries_order = 40\n").is_err());
        assert!(resolve("threads = 0\n").is_err());
        assert!(resolve("[scan]\nduration = 3\n").is_err());
        assert!(resolve("[output]\nsvg = maybe\n").is_err());
    }
}
