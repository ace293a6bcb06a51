//! Plain `key = value` run configuration with flag overrides.

use std::fmt;

use randcoef::adaptive::DEFAULT_KAPPA_SIGMA;
use randcoef::estimator::GridSpec;
use randcoef::kde::Bandwidth;
use randcoef::simbench::Mode;
use randcoef::svd::{QNorm, WeightKind};
use thiserror::Error;

/// Where a setting came from, for error pointers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag(name) => write!(f, "flag --{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{origin}: {message}")]
pub struct ConfigError {
    pub origin: Origin,
    pub message: String,
}

impl From<ConfigError> for randcoef::Error {
    fn from(e: ConfigError) -> Self {
        randcoef::Error::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightChoice {
    Indicator,
    Cosh,
}

/// Recognized keys with a one-line description, in print order.
pub const KEYS: &[(&str, &str)] = &[
    ("p", "number of regressors"),
    ("q", "multi-index norm: 1 or inf"),
    ("weight", "indicator or cosh"),
    ("r", "weight half-width R (required for estimate)"),
    ("x0", "regressor support half-width (required for estimate)"),
    (
        "eps",
        "interpolation half-width; default from the sample size recipe",
    ),
    ("fft_size", "length of the t-grid, a power of two"),
    ("a_step", "intercept grid step"),
    ("a_half", "intercept output window half-width"),
    ("b_half", "slope grid half-width"),
    ("b_step", "slope grid step"),
    ("max_order", "largest singular order kept per axis"),
    ("sigma_floor", "singular values below this are dropped"),
    (
        "interp_tol",
        "prolate eigenvalue tolerance of the interpolator",
    ),
    (
        "bandwidth",
        "silverman, a positive scale times silverman (scale:k), or comma-separated fixed values",
    ),
    ("delta", "trimming level; default 1/ln(n0)^2"),
    ("split", "fit the regressor density on the first half only"),
    ("kappa_sigma", "multiplier of the variance penalty"),
    ("adaptive", "select N and T from the data"),
    ("n_cut", "fixed spectral cut-off N when not adaptive"),
    (
        "t_cut",
        "fixed frequency cut-off T when not adaptive; default T_max",
    ),
    ("threads", "parallelism budget"),
    ("seed", "simulation seed"),
    ("reps", "simulation replications"),
    ("case", "simulation design: 1 or 2"),
    ("mode", "simulation tuning: adaptive or oracle"),
    ("n", "simulation sample size"),
    ("kappas", "comma-separated calibration grid"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub p: usize,
    pub q: QNorm,
    pub weight: Option<WeightChoice>,
    pub r: Option<f64>,
    pub x0: Option<f64>,
    pub eps: Option<f64>,
    pub grids: GridSpec,
    pub max_order: usize,
    pub sigma_floor: f64,
    pub interp_tol: f64,
    pub bandwidth: Bandwidth,
    pub delta: Option<f64>,
    pub split: bool,
    pub kappa_sigma: f64,
    pub adaptive: bool,
    pub n_cut: usize,
    pub t_cut: Option<f64>,
    pub threads: Option<usize>,
    pub seed: u64,
    pub reps: usize,
    pub case: u32,
    pub mode: Mode,
    pub n: usize,
    pub kappas: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            p: 1,
            q: QNorm::Inf,
            weight: None,
            r: None,
            x0: None,
            eps: None,
            grids: GridSpec::default(),
            max_order: 8,
            sigma_floor: 1e-13,
            interp_tol: 1e-14,
            bandwidth: Bandwidth::Silverman,
            delta: None,
            split: false,
            kappa_sigma: DEFAULT_KAPPA_SIGMA,
            adaptive: false,
            n_cut: 1,
            t_cut: None,
            threads: None,
            seed: 0,
            reps: 200,
            case: 1,
            mode: Mode::Adaptive,
            n: 1000,
            kappas: vec![0.01, 0.1, 0.5, 1.0],
        }
    }
}

/// Split text into (key, value, line) entries; `#` starts a comment.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String, usize)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError {
                origin: Origin::Line(line),
                message: format!("expected key = value, got `{body}`"),
            });
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(ConfigError {
                origin: Origin::Line(line),
                message: "empty key".into(),
            });
        }
        out.push((key.to_string(), v.trim().to_string(), line));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(v: &str, what: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("{what} expects a number, got `{v}`"))
}

fn positive(v: &str, what: &str) -> Result<f64, String> {
    let x: f64 = parse_num(v, what)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!(
            "{what} = {v} out of range: must be a finite value > 0"
        ))
    }
}

fn nonnegative(v: &str, what: &str) -> Result<f64, String> {
    let x: f64 = parse_num(v, what)?;
    if x >= 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!(
            "{what} = {v} out of range: must be a finite value ≥ 0"
        ))
    }
}

fn count(v: &str, what: &str, min: usize) -> Result<usize, String> {
    let x: usize = parse_num(v, what)?;
    if x >= min {
        Ok(x)
    } else {
        Err(format!("{what} = {v} out of range: must be ≥ {min}"))
    }
}

fn boolean(v: &str, what: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("{what} expects true or false, got `{v}`")),
    }
}

fn parse_bandwidth(v: &str) -> Result<Bandwidth, String> {
    if v.eq_ignore_ascii_case("silverman") {
        return Ok(Bandwidth::Silverman);
    }
    if let Some(k) = v.strip_prefix("scale:") {
        return positive(k.trim(), "bandwidth scale").map(Bandwidth::Scaled);
    }
    v.split(',')
        .map(|h| positive(h.trim(), "bandwidth"))
        .collect::<Result<Vec<_>, _>>()
        .map(Bandwidth::Fixed)
}

impl RunConfig {
    /// Set one key; the error carries `origin`.
    pub fn apply(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        self.apply_inner(key, value)
            .map_err(|message| ConfigError { origin, message })
    }

    fn apply_inner(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "p" => self.p = count(v, key, 1)?,
            "q" => {
                self.q = match v {
                    "1" => QNorm::One,
                    "inf" | "infinity" => QNorm::Inf,
                    _ => return Err(format!("q must be 1 or inf, got `{v}`")),
                }
            }
            "weight" => {
                self.weight = Some(match v {
                    "indicator" => WeightChoice::Indicator,
                    "cosh" => WeightChoice::Cosh,
                    _ => return Err(format!("weight must be indicator or cosh, got `{v}`")),
                })
            }
            "r" | "R" => self.r = Some(positive(v, "r")?),
            "x0" => self.x0 = Some(positive(v, key)?),
            "eps" => self.eps = Some(positive(v, key)?),
            "fft_size" => {
                let n = count(v, key, 16)?;
                if !n.is_power_of_two() {
                    return Err(format!("fft_size = {n} must be a power of two"));
                }
                self.grids.fft_size = n;
            }
            "a_step" => self.grids.a_step = positive(v, key)?,
            "a_half" => self.grids.a_half = positive(v, key)?,
            "b_half" => self.grids.b_half = positive(v, key)?,
            "b_step" => self.grids.b_step = positive(v, key)?,
            "max_order" => self.max_order = count(v, key, 1)?,
            "sigma_floor" => self.sigma_floor = nonnegative(v, key)?,
            "interp_tol" => self.interp_tol = positive(v, key)?,
            "bandwidth" => self.bandwidth = parse_bandwidth(v)?,
            "delta" => self.delta = Some(positive(v, key)?),
            "split" => self.split = boolean(v, key)?,
            "kappa_sigma" => self.kappa_sigma = nonnegative(v, key)?,
            "adaptive" => self.adaptive = boolean(v, key)?,
            "n_cut" => self.n_cut = count(v, key, 0)?,
            "t_cut" => self.t_cut = Some(positive(v, key)?),
            "threads" => self.threads = Some(count(v, key, 1)?),
            "seed" => self.seed = parse_num(v, key)?,
            "reps" => self.reps = count(v, key, 1)?,
            "case" => {
                self.case = match v {
                    "1" => 1,
                    "2" => 2,
                    _ => return Err(format!("case must be 1 or 2, got `{v}`")),
                }
            }
            "mode" => {
                self.mode = match v {
                    "adaptive" => Mode::Adaptive,
                    "oracle" => Mode::Oracle,
                    _ => return Err(format!("mode must be adaptive or oracle, got `{v}`")),
                }
            }
            "n" => self.n = count(v, key, 2)?,
            "kappas" => {
                let ks = v
                    .split(',')
                    .map(|k| nonnegative(k.trim(), "kappas"))
                    .collect::<Result<Vec<_>, _>>()?;
                if ks.is_empty() {
                    return Err("kappas must list at least one value".into());
                }
                self.kappas = ks;
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Defaults, then the file, then the flag overrides in order.
    pub fn load(text: Option<&str>, flags: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(t) = text {
            for (k, v, line) in parse_entries(t)? {
                cfg.apply(&k, &v, Origin::Line(line))?;
            }
        }
        for (k, v) in flags {
            cfg.apply(k, v, Origin::Flag(k.replace('_', "-")))?;
        }
        Ok(cfg)
    }

    /// Weight with its half-width; both must be set.
    pub fn weight_kind(&self) -> Result<WeightKind, ConfigError> {
        let origin = Origin::Flag("weight".into());
        let choice = self.weight.ok_or_else(|| ConfigError {
            origin: origin.clone(),
            message: "missing required key `weight`".into(),
        })?;
        let r = self.r.ok_or_else(|| ConfigError {
            origin: Origin::Flag("R".into()),
            message: format!("weight = {} requires `r` to be set", self.weight_name()),
        })?;
        Ok(match choice {
            WeightChoice::Indicator => WeightKind::Indicator { r },
            WeightChoice::Cosh => WeightKind::Cosh { r },
        })
    }

    fn weight_name(&self) -> &'static str {
        match self.weight {
            Some(WeightChoice::Indicator) => "indicator",
            Some(WeightChoice::Cosh) => "cosh",
            None => "unset",
        }
    }

    pub fn require_x0(&self) -> Result<f64, ConfigError> {
        self.x0.ok_or_else(|| ConfigError {
            origin: Origin::Flag("x0".into()),
            message: "missing required key `x0`".into(),
        })
    }

    /// Checks for the estimate command.
    pub fn validate_estimate(&self) -> Result<(WeightKind, f64), ConfigError> {
        let w = self.weight_kind()?;
        let x0 = self.require_x0()?;
        if self.n_cut > self.max_order {
            return Err(ConfigError {
                origin: Origin::Flag("n-cut".into()),
                message: format!(
                    "n_cut = {} exceeds max_order = {}",
                    self.n_cut, self.max_order
                ),
            });
        }
        Ok((w, x0))
    }

    /// Every key with its effective value, one `key = value` per line.
    pub fn render(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("unset".to_string(), |x| x.to_string());
        let mut out = String::new();
        for (key, doc) in KEYS {
            let value = match *key {
                "p" => self.p.to_string(),
                "q" => match self.q {
                    QNorm::One => "1".into(),
                    QNorm::Inf => "inf".into(),
                },
                "weight" => self.weight_name().into(),
                "r" => opt(self.r),
                "x0" => opt(self.x0),
                "eps" => opt(self.eps),
                "fft_size" => self.grids.fft_size.to_string(),
                "a_step" => self.grids.a_step.to_string(),
                "a_half" => self.grids.a_half.to_string(),
                "b_half" => self.grids.b_half.to_string(),
                "b_step" => self.grids.b_step.to_string(),
                "max_order" => self.max_order.to_string(),
                "sigma_floor" => self.sigma_floor.to_string(),
                "interp_tol" => self.interp_tol.to_string(),
                "bandwidth" => match &self.bandwidth {
                    Bandwidth::Silverman => "silverman".into(),
                    Bandwidth::Scaled(k) => format!("scale:{k}"),
                    Bandwidth::Fixed(h) => h
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                },
                "delta" => opt(self.delta),
                "split" => self.split.to_string(),
                "kappa_sigma" => self.kappa_sigma.to_string(),
                "adaptive" => self.adaptive.to_string(),
                "n_cut" => self.n_cut.to_string(),
                "t_cut" => opt(self.t_cut),
                "threads" => self.threads.map_or("unset".into(), |t| t.to_string()),
                "seed" => self.seed.to_string(),
                "reps" => self.reps.to_string(),
                "case" => self.case.to_string(),
                "mode" => self.mode.name().into(),
                "n" => self.n.to_string(),
                "kappas" => self
                    .kappas
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                _ => unreachable!("every key is rendered"),
            };
            if value == "unset" {
                out.push_str(&format!("# {doc}\n# {key} = unset\n"));
            } else {
                out.push_str(&format!("# {doc}\n{key} = {value}\n"));
            }
        }
        out
    }
}
