//! Flat experiment configuration: parsing, canonical serialization, and
//! hashing.
//!
//! The on-disk format is a TOML subset with one `key = value` pair per
//! line, `#` comments, and no tables. Strings are double quoted, numbers
//! and booleans are bare. Serialization always emits every key in a fixed
//! order with shortest round-tripping float formatting, so deserializing a
//! serialized config reproduces it exactly and the SHA-256 of the
//! canonical text is a stable run identifier.

use kslab_core::{Dealias, Scheme, SolverConfig};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// How the initial perturbation is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    /// Smooth random mean-zero field scaled to sup norm `epsilon`.
    Random,
    /// Explicit cosine modes from the `modes` list.
    Modes,
    /// Gaussian density bump of prescribed mass.
    Bump,
}

impl Initial {
    fn as_str(self) -> &'static str {
        match self {
            Initial::Random => "random",
            Initial::Modes => "modes",
            Initial::Bump => "bump",
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(Initial::Random),
            "modes" => Ok(Initial::Modes),
            "bump" => Ok(Initial::Bump),
            other => Err(format!("unknown initial kind {other:?}")),
        }
    }
}

/// One run of the laboratory, complete enough to reproduce it bit for bit
/// together with the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub lengths: [f64; 2],
    pub grid: [usize; 2],
    pub gamma: u8,
    pub m: f64,
    pub initial: Initial,
    /// Sup-norm amplitude of random or mode initial data.
    pub epsilon: f64,
    /// Cosine modes `(k1, k2, amplitude)`; used when `initial = modes`.
    pub modes: Vec<(usize, usize, f64)>,
    pub bump_center: [f64; 2],
    pub bump_sigma: f64,
    pub bump_mass: f64,
    pub seed: u64,
    pub dt0: f64,
    pub dt_min: f64,
    pub t_end: f64,
    pub output_dt: f64,
    pub cfl_safety: f64,
    pub dealias: Dealias,
    pub scheme: Scheme,
    pub blowup_linf_threshold: Option<f64>,
    pub linear_only: bool,
    /// Fit window start; the end defaults to `t_end` when `fit_hi` is none.
    pub fit_lo: f64,
    pub fit_hi: Option<f64>,
    /// Norm columns to fit in the summary.
    pub fit_labels: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        ExperimentConfig {
            dim: 1,
            lengths: [PI, 1.0],
            grid: [64, 1],
            gamma: 1,
            m: 1.0,
            initial: Initial::Random,
            epsilon: 1e-3,
            modes: Vec::new(),
            bump_center: [0.0, 0.0],
            bump_sigma: 0.1,
            bump_mass: 1.0,
            seed: 0,
            dt0: solver.dt0,
            dt_min: solver.dt_min,
            t_end: solver.t_end,
            output_dt: solver.output_dt,
            cfl_safety: solver.cfl_safety,
            dealias: solver.dealias,
            scheme: solver.scheme,
            blowup_linf_threshold: None,
            linear_only: false,
            fit_lo: 1.0,
            fit_hi: None,
            fit_labels: vec!["u_L2".into(), "u_Linf".into()],
        }
    }
}

fn dealias_str(d: Dealias) -> &'static str {
    match d {
        Dealias::TwoThirds => "two_thirds",
        Dealias::None => "none",
    }
}

fn scheme_str(s: Scheme) -> &'static str {
    match s {
        Scheme::ImexCnab2 => "imex_cnab2",
        Scheme::ImexEuler => "imex_euler",
    }
}

fn fmt_modes(modes: &[(usize, usize, f64)]) -> String {
    modes
        .iter()
        .map(|&(k1, k2, amp)| format!("{k1},{k2}:{amp}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_modes(s: &str) -> Result<Vec<(usize, usize, f64)>, String> {
    let mut out = Vec::new();
    for entry in s.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (idx, amp) = entry
            .split_once(':')
            .ok_or_else(|| format!("mode entry {entry:?} is not k1[,k2]:amplitude"))?;
        let amp: f64 = amp
            .trim()
            .parse()
            .map_err(|_| format!("bad mode amplitude in {entry:?}"))?;
        let mut ks = idx.split(',').map(str::trim);
        let k1: usize = ks
            .next()
            .unwrap()
            .parse()
            .map_err(|_| format!("bad mode index in {entry:?}"))?;
        let k2: usize = match ks.next() {
            Some(k) => k.parse().map_err(|_| format!("bad mode index in {entry:?}"))?,
            None => 0,
        };
        if ks.next().is_some() {
            return Err(format!("mode entry {entry:?} has more than two indices"));
        }
        out.push((k1, k2, amp));
    }
    Ok(out)
}

/// SHA-256 of canonical request text, lowercase hex.
pub fn hash_text(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Lengths accept plain floats and the forms `pi`, `2pi`, `2*pi`, `pi/2`,
/// `3pi/4`.
pub fn parse_length(s: &str) -> Result<f64, String> {
    let t: String = s
        .trim()
        .to_ascii_lowercase()
        .chars()
        .filter(|c| *c != ' ' && *c != '*')
        .collect();
    let err = || format!("cannot parse length {s:?}");
    if let Some(pos) = t.find("pi") {
        let coeff = &t[..pos];
        let rest = &t[pos + 2..];
        let a: f64 = if coeff.is_empty() { 1.0 } else { coeff.parse().map_err(|_| err())? };
        let b: f64 = match rest.strip_prefix('/') {
            Some(d) => d.parse().map_err(|_| err())?,
            None if rest.is_empty() => 1.0,
            None => return Err(err()),
        };
        if b == 0.0 {
            return Err(err());
        }
        Ok(a * PI / b)
    } else {
        t.parse().map_err(|_| err())
    }
}

impl ExperimentConfig {
    /// Canonical text form; every key, fixed order.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        writeln!(w, "dim = {}", self.dim).unwrap();
        writeln!(w, "l1 = {}", self.lengths[0]).unwrap();
        writeln!(w, "l2 = {}", self.lengths[1]).unwrap();
        writeln!(w, "n1 = {}", self.grid[0]).unwrap();
        writeln!(w, "n2 = {}", self.grid[1]).unwrap();
        writeln!(w, "gamma = {}", self.gamma).unwrap();
        writeln!(w, "m = {}", self.m).unwrap();
        writeln!(w, "initial = \"{}\"", self.initial.as_str()).unwrap();
        writeln!(w, "epsilon = {}", self.epsilon).unwrap();
        writeln!(w, "modes = \"{}\"", fmt_modes(&self.modes)).unwrap();
        writeln!(w, "bump_center1 = {}", self.bump_center[0]).unwrap();
        writeln!(w, "bump_center2 = {}", self.bump_center[1]).unwrap();
        writeln!(w, "bump_sigma = {}", self.bump_sigma).unwrap();
        writeln!(w, "bump_mass = {}", self.bump_mass).unwrap();
        writeln!(w, "seed = {}", self.seed).unwrap();
        writeln!(w, "dt0 = {}", self.dt0).unwrap();
        writeln!(w, "dt_min = {}", self.dt_min).unwrap();
        writeln!(w, "t_end = {}", self.t_end).unwrap();
        writeln!(w, "output_dt = {}", self.output_dt).unwrap();
        writeln!(w, "cfl_safety = {}", self.cfl_safety).unwrap();
        writeln!(w, "dealias = \"{}\"", dealias_str(self.dealias)).unwrap();
        writeln!(w, "scheme = \"{}\"", scheme_str(self.scheme)).unwrap();
        match self.blowup_linf_threshold {
            Some(v) => writeln!(w, "blowup_linf_threshold = {v}").unwrap(),
            None => writeln!(w, "blowup_linf_threshold = \"none\"").unwrap(),
        }
        writeln!(w, "linear_only = {}", self.linear_only).unwrap();
        writeln!(w, "fit_lo = {}", self.fit_lo).unwrap();
        match self.fit_hi {
            Some(v) => writeln!(w, "fit_hi = {v}").unwrap(),
            None => writeln!(w, "fit_hi = \"none\"").unwrap(),
        }
        writeln!(w, "fit_labels = \"{}\"", self.fit_labels.join(",")).unwrap();
        s
    }

    /// SHA-256 of the canonical text, lowercase hex.
    pub fn hash(&self) -> String {
        hash_text(&self.to_canonical_string())
    }

    /// Applies `key = value` lines from `text` on top of `self`. Partial
    /// files are allowed; unknown keys are rejected.
    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            self.set(key, value)
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("bad value {value:?} for {key}"))
        }
        match key {
            "dim" => self.dim = num(key, value)?,
            "l1" => self.lengths[0] = parse_length(value)?,
            "l2" => self.lengths[1] = parse_length(value)?,
            "n1" => self.grid[0] = num(key, value)?,
            "n2" => self.grid[1] = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "initial" => self.initial = Initial::parse(value)?,
            "epsilon" => self.epsilon = num(key, value)?,
            "modes" => self.modes = parse_modes(value)?,
            "bump_center1" => self.bump_center[0] = parse_length(value)?,
            "bump_center2" => self.bump_center[1] = parse_length(value)?,
            "bump_sigma" => self.bump_sigma = num(key, value)?,
            "bump_mass" => self.bump_mass = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "dt0" => self.dt0 = num(key, value)?,
            "dt_min" => self.dt_min = num(key, value)?,
            "t_end" => self.t_end = num(key, value)?,
            "output_dt" => self.output_dt = num(key, value)?,
            "cfl_safety" => self.cfl_safety = num(key, value)?,
            "dealias" => {
                self.dealias = match value {
                    "two_thirds" => Dealias::TwoThirds,
                    "none" => Dealias::None,
                    other => return Err(format!("unknown dealias rule {other:?}")),
                }
            }
            "scheme" => {
                self.scheme = match value {
                    "imex_cnab2" => Scheme::ImexCnab2,
                    "imex_euler" => Scheme::ImexEuler,
                    other => return Err(format!("unknown scheme {other:?}")),
                }
            }
            "blowup_linf_threshold" => {
                self.blowup_linf_threshold = match value {
                    "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "linear_only" => self.linear_only = num(key, value)?,
            "fit_lo" => self.fit_lo = num(key, value)?,
            "fit_hi" => {
                self.fit_hi = match value {
                    "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "fit_labels" => {
                self.fit_labels = value
                    .split(',')
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect()
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Normalizes redundant fields and checks consistency before a run.
    pub fn validate(&mut self) -> Result<(), String> {
        match self.dim {
            1 => {
                self.lengths[1] = 1.0;
                self.grid[1] = 1;
            }
            2 => {}
            d => return Err(format!("dim must be 1 or 2, got {d}")),
        }
        if self.gamma > 1 {
            return Err(format!("gamma must be 0 or 1, got {}", self.gamma));
        }
        if self.initial == Initial::Modes && self.modes.is_empty() {
            return Err("initial = modes requires a nonempty mode list".into());
        }
        if self.dim == 1 {
            if let Some(&(_, k2, _)) = self.modes.iter().find(|&&(_, k2, _)| k2 != 0) {
                return Err(format!("mode k2 = {k2} is not available on a 1-d domain"));
            }
        }
        if self.fit_labels.is_empty() {
            return Err("fit_labels must name at least one norm column".into());
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            dt0: self.dt0,
            dt_min: self.dt_min,
            t_end: self.t_end,
            output_dt: self.output_dt,
            dealias: self.dealias,
            scheme: self.scheme,
            blowup_linf_threshold: self.blowup_linf_threshold,
            cfl_safety: self.cfl_safety,
            linear_only: self.linear_only,
        }
    }

    pub fn fit_window(&self, final_t: f64) -> (f64, f64) {
        (self.fit_lo, self.fit_hi.unwrap_or(self.t_end).min(final_t))
    }
}
