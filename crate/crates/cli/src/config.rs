//! Run configuration: coefficient specs, value lists and the key=value
//! settings layer shared by the config file and the command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use homog_core::{CoefficientField, Method, TimeMode, TimeOptions};

use crate::error::{CliError, Result};

/// Lattice density for sampling ellipticity bounds of non-periodic fields,
/// in points per unit length.
pub const BOUND_SAMPLES_PER_UNIT: f64 = 64.0;

/// A coefficient family and its parameters, written `name` or
/// `name:p1,p2,...`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefSpec {
    Constant(f64),
    Gloria,
    /// Laminate `mean + amplitude·sin(2πx1)`.
    Sine { mean: f64, amplitude: f64 },
    Checkerboard { c1: f64, c2: f64 },
    Lognormal { n_modes: usize, sigma: f64, corr_len: f64 },
}

impl CoefSpec {
    pub fn is_periodic(&self) -> bool {
        !matches!(self, CoefSpec::Lognormal { .. })
    }

    /// Builds the field. Lognormal bounds are sampled over the cube of edge
    /// `box_edge`.
    pub fn build(&self, seed: u64, box_edge: f64) -> Result<CoefficientField> {
        use homog_core::Profile;
        Ok(match *self {
            CoefSpec::Constant(c) => {
                if !(c > 0.0) {
                    return Err(CliError::Config(format!("constant coefficient must be positive, got {c}")));
                }
                CoefficientField::constant_isotropic(c)
            }
            CoefSpec::Gloria => CoefficientField::gloria_lebris(),
            CoefSpec::Sine { mean, amplitude } => {
                if !(mean > amplitude.abs()) {
                    return Err(CliError::Config(format!(
                        "sine laminate needs mean > |amplitude|, got {mean}, {amplitude}"
                    )));
                }
                CoefficientField::laminate_1d(Profile::Sine { mean, amplitude })
            }
            CoefSpec::Checkerboard { c1, c2 } => CoefficientField::checkerboard(c1, c2)?,
            CoefSpec::Lognormal { n_modes, sigma, corr_len } => {
                let mut f = CoefficientField::lognormal(seed, n_modes, sigma, corr_len)?;
                let samples = (BOUND_SAMPLES_PER_UNIT * box_edge).ceil().max(64.0) as usize;
                f.ellipticity_bounds(samples, box_edge)?;
                f
            }
        })
    }
}

impl fmt::Display for CoefSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefSpec::Constant(c) => write!(f, "constant:{c}"),
            CoefSpec::Gloria => write!(f, "gloria"),
            CoefSpec::Sine { mean, amplitude } => write!(f, "sine:{mean},{amplitude}"),
            CoefSpec::Checkerboard { c1, c2 } => write!(f, "checkerboard:{c1},{c2}"),
            CoefSpec::Lognormal { n_modes, sigma, corr_len } => {
                write!(f, "lognormal:{n_modes},{sigma},{corr_len}")
            }
        }
    }
}

impl FromStr for CoefSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n.trim(), parse_list::<f64>(p, "coefficient parameter")?),
            None => (s.trim(), Vec::new()),
        };
        let arity = |n: usize| -> Result<()> {
            if params.is_empty() || params.len() == n {
                Ok(())
            } else {
                Err(CliError::Config(format!("coefficient {name} takes {n} parameter(s), got {}", params.len())))
            }
        };
        let p = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        match name {
            "constant" => {
                arity(1)?;
                Ok(CoefSpec::Constant(p(0, 1.0)))
            }
            "gloria" | "gloria_lebris" => {
                arity(0)?;
                Ok(CoefSpec::Gloria)
            }
            "sine" | "laminate" => {
                arity(2)?;
                Ok(CoefSpec::Sine { mean: p(0, 2.0), amplitude: p(1, 1.0) })
            }
            "checkerboard" => {
                arity(2)?;
                Ok(CoefSpec::Checkerboard { c1: p(0, 1.0), c2: p(1, 4.0) })
            }
            "lognormal" => {
                arity(3)?;
                let modes = p(0, 64.0);
                if !(modes >= 1.0 && modes.fract() == 0.0) {
                    return Err(CliError::Config(format!("lognormal mode count must be a positive integer, got {modes}")));
                }
                Ok(CoefSpec::Lognormal { n_modes: modes as usize, sigma: p(1, 0.5), corr_len: p(2, 0.5) })
            }
            _ => Err(CliError::Config(format!("unknown coefficient {name}"))),
        }
    }
}

/// Where the error reference of a sweep comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferencePolicy {
    /// Periodic cell problem on the same `h`.
    Periodic,
    /// The result of the same method and `q` at the largest swept `R`.
    LargestR,
}

impl FromStr for ReferencePolicy {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(ReferencePolicy::Periodic),
            "largest_R" | "largest_r" => Ok(ReferencePolicy::LargestR),
            _ => Err(CliError::Config(format!("unknown reference policy {s}"))),
        }
    }
}

impl fmt::Display for ReferencePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferencePolicy::Periodic => "periodic",
            ReferencePolicy::LargestR => "largest_R",
        })
    }
}

pub fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            let x = x.trim();
            x.parse().map_err(|_| CliError::Config(format!("bad {what} '{x}'")))
        })
        .collect()
}

/// `start:stop:step` (stop included) or an explicit comma list.
pub fn parse_r_list(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => parse_list(s, "R value"),
        3 => {
            let v = parse_list::<f64>(&parts.join(","), "R range")?;
            let (start, stop, step) = (v[0], v[1], v[2]);
            if !(step > 0.0) || !(stop >= start) {
                return Err(CliError::Config(format!("bad R range {s}")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|k| start + k as f64 * step).collect())
        }
        _ => Err(CliError::Config(format!("bad R range {s}; use start:stop:step or a comma list"))),
    }
}

/// Keys accepted in config files and as flags.
pub const KNOWN_KEYS: &[&str] = &[
    "coef", "method", "r", "ko", "q", "n", "dim", "time_mode", "nt", "tol_t", "t_reg", "reference", "seed",
    "out", "tols", "t_long",
];

fn normalize_key(k: &str) -> String {
    k.trim().to_ascii_lowercase().replace('-', "_")
}

/// Key=value settings. Later insertions override earlier ones, so the
/// config file is loaded first and flags are applied on top.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Settings::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", no + 1)))?;
            out.set(k, v.trim())?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = normalize_key(key);
        if !KNOWN_KEYS.contains(&k.as_str()) {
            return Err(CliError::Config(format!("unknown key {key}")));
        }
        self.values.insert(k, value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize_key(key)).map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("bad value for {key}: '{v}'"))),
        }
    }

    pub fn coef(&self) -> Result<CoefSpec> {
        self.get("coef").unwrap_or("gloria").parse()
    }

    pub fn dim(&self) -> Result<usize> {
        let dim = self.parsed("dim")?.unwrap_or(2);
        if !(1..=2).contains(&dim) {
            return Err(CliError::Config(format!("dim must be 1 or 2, got {dim}")));
        }
        Ok(dim)
    }

    pub fn n_per_cell(&self) -> Result<usize> {
        let n = self.parsed("n")?.unwrap_or(32);
        if n < 4 {
            return Err(CliError::Config(format!("n must be at least 4, got {n}")));
        }
        Ok(n)
    }

    pub fn k_o(&self) -> Result<f64> {
        let k_o = self.parsed("ko")?.unwrap_or(2.0 / 3.0);
        if !(k_o > 0.0 && k_o < 1.0) {
            return Err(CliError::Config(format!("ko must lie in (0, 1), got {k_o}")));
        }
        Ok(k_o)
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.parsed("seed")?.unwrap_or(0))
    }

    pub fn qs(&self) -> Result<Vec<u32>> {
        let qs = parse_list::<u32>(self.get("q").unwrap_or("1"), "q")?;
        if let Some(q) = qs.iter().find(|&&q| q == 0) {
            return Err(CliError::Config(format!("filter order must be at least 1, got {q}")));
        }
        Ok(qs)
    }

    pub fn t_reg(&self) -> Result<Option<f64>> {
        let t: Option<f64> = self.parsed("t_reg")?;
        if let Some(t) = t.filter(|t| !(*t > 0.0)) {
            return Err(CliError::Config(format!("t_reg must be positive, got {t}")));
        }
        Ok(t)
    }

    pub fn time_options(&self) -> Result<TimeOptions> {
        let nt: Option<usize> = self.parsed("nt")?;
        let tol_t: Option<f64> = self.parsed("tol_t")?;
        if let Some(t) = tol_t.filter(|t| !(*t > 0.0)) {
            return Err(CliError::Config(format!("tol_t must be positive, got {t}")));
        }
        if nt == Some(0) {
            return Err(CliError::Config("nt must be positive".into()));
        }
        let mode = match self.get("time_mode") {
            None if nt.is_some() => TimeMode::Fixed,
            None => TimeMode::Adaptive,
            Some(m) => m.parse().map_err(|_| CliError::Config(format!("unknown time mode {m}")))?,
        };
        Ok(match mode {
            TimeMode::Fixed => TimeOptions::fixed(nt),
            TimeMode::Adaptive => TimeOptions::adaptive(tol_t),
        })
    }

    pub fn out(&self) -> Option<PathBuf> {
        self.get("out").map(PathBuf::from)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub coef: CoefSpec,
    pub methods: Vec<Method>,
    pub r_values: Vec<f64>,
    pub k_o: f64,
    pub qs: Vec<u32>,
    pub n_per_cell: usize,
    pub dim: usize,
    pub time: TimeOptions,
    pub t_reg: Option<f64>,
    pub reference: ReferencePolicy,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl SweepConfig {
    /// Defaults: gloria, parabolic, `R = 4:12:2`, `k_o = 2/3`, `q = 1`,
    /// `n = 32`, two dimensions, adaptive time stepping and the periodic
    /// reference for periodic fields (largest `R` otherwise).
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let coef = s.coef()?;
        let reference = match s.get("reference") {
            Some(r) => r.parse()?,
            None if coef.is_periodic() => ReferencePolicy::Periodic,
            None => ReferencePolicy::LargestR,
        };
        let cfg = Self {
            coef,
            methods: parse_list(s.get("method").unwrap_or("parabolic"), "method")?,
            r_values: parse_r_list(s.get("r").unwrap_or("4:12:2"))?,
            k_o: s.k_o()?,
            qs: s.qs()?,
            n_per_cell: s.n_per_cell()?,
            dim: s.dim()?,
            time: s.time_options()?,
            t_reg: s.t_reg()?,
            reference,
            seed: s.seed()?,
            out: s.out(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(CliError::Config("at least one method is required".into()));
        }
        if self.qs.is_empty() {
            return Err(CliError::Config("at least one q is required".into()));
        }
        if self.r_values.is_empty() {
            return Err(CliError::Config("at least one R is required".into()));
        }
        if let Some(r) = self.r_values.iter().find(|r| !(**r >= 1.0)) {
            return Err(CliError::Config(format!("R values must be at least 1, got {r}")));
        }
        if self.r_values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Config("R values must be strictly increasing".into()));
        }
        if self.reference == ReferencePolicy::Periodic && !self.coef.is_periodic() {
            return Err(CliError::Config(format!(
                "the periodic reference needs a periodic coefficient; use reference=largest_R for {}",
                self.coef
            )));
        }
        Ok(())
    }

    pub fn r_max(&self) -> f64 {
        self.r_values.last().copied().unwrap_or(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_ranges() {
        assert_eq!(parse_r_list("2:12:2").unwrap(), vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
        assert_eq!(parse_r_list("4,5.5").unwrap(), vec![4.0, 5.5]);
        assert_eq!(parse_r_list("1:2:0.5").unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(parse_r_list("4:2:1").is_err());
        assert!(parse_r_list("1:2").is_err());
    }

    #[test]
    fn coef_specs_round_trip() {
        for s in ["constant:2.5", "gloria", "sine:2,1", "checkerboard:1,4", "lognormal:64,0.5,0.5"] {
            let spec: CoefSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert_eq!("gloria_lebris".parse::<CoefSpec>().unwrap(), CoefSpec::Gloria);
        assert!("checkerboard:1".parse::<CoefSpec>().is_err());
        assert!("nope".parse::<CoefSpec>().is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut s = Settings::parse("# comment\ncoef = constant:3\nq=1,3\nR = 4:8:2\n").unwrap();
        s.set("q", "5").unwrap();
        let cfg = SweepConfig::from_settings(&s).unwrap();
        assert_eq!(cfg.qs, vec![5]);
        assert_eq!(cfg.coef, CoefSpec::Constant(3.0));
        assert_eq!(cfg.r_values, vec![4.0, 6.0, 8.0]);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        for text in [
            "R = 4,3",
            "R = 0.5,2",
            "method = nope",
            "ko = 1.5",
            "coef = lognormal\nreference = periodic",
            "nt = 0",
        ] {
            let s = Settings::parse(text).unwrap();
            let err = SweepConfig::from_settings(&s).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}: {err}");
        }
        assert!(Settings::parse("bogus = 1").is_err());
        assert!(Settings::parse("no equals sign").is_err());
    }

    #[test]
    fn nt_implies_fixed_steps() {
        let s = Settings::parse("nt = 128").unwrap();
        let t = s.time_options().unwrap();
        assert_eq!((t.mode, t.n_steps), (TimeMode::Fixed, Some(128)));
        assert_eq!(Settings::default().time_options().unwrap().mode, TimeMode::Adaptive);
    }

    #[test]
    fn lognormal_defaults_to_largest_r() {
        let s = Settings::parse("coef = lognormal").unwrap();
        assert_eq!(SweepConfig::from_settings(&s).unwrap().reference, ReferencePolicy::LargestR);
    }
}
