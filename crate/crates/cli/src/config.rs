//! Run configuration: flags, JSON config files, keyword resolution and validation.

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Growth,
    Tee,
    Montecarlo,
    Exact,
    Spectrum,
    Negativity,
    Covering,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Growth => "growth",
            Command::Tee => "tee",
            Command::Montecarlo => "montecarlo",
            Command::Exact => "exact",
            Command::Spectrum => "spectrum",
            Command::Negativity => "negativity",
            Command::Covering => "covering",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A number or a keyword such as `ln2` or `pi/3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Number(f64),
    Text(String),
}

impl std::str::FromStr for Param {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(Param::Text(s.to_string()))
    }
}

/// Flags and config-file fields share these names.
#[derive(Parser, Clone, Debug, Default, Serialize, Deserialize)]
#[command(name = "im-lab", version, about = "Influence-matrix experiments for controlled-SWAP brickwork circuits")]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Experiment to run (may instead come from the config file).
    #[arg(value_enum)]
    pub command: Option<Command>,

    /// JSON config file with the same fields as the flags; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Gate set: a, b, c or custom (with --gates).
    #[arg(long)]
    pub model: Option<String>,
    /// Coupling K of models a and b (number or keyword).
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<Param>,
    /// Angle θ of model c (number or keyword).
    #[arg(long)]
    pub theta: Option<Param>,
    /// Gate-set JSON file for --model custom.
    #[arg(long)]
    pub gates: Option<PathBuf>,
    /// Conjugate every control by exp(−i·angle·σ^y).
    #[arg(long = "deform-y")]
    #[serde(rename = "deform-y")]
    pub deform_y: Option<Param>,

    /// Even-site state of the bath (0, 1, +, -, +i, -i).
    #[arg(long = "psi-e")]
    #[serde(rename = "psi-e")]
    pub psi_e: Option<String>,
    /// Odd-site state of the bath.
    #[arg(long = "psi-o")]
    #[serde(rename = "psi-o")]
    pub psi_o: Option<String>,
    /// Initial impurity state (also `mixed`).
    #[arg(long = "rho-imp")]
    #[serde(rename = "rho-imp")]
    pub rho_imp: Option<String>,
    /// Impurity channel: identity, break:<state>, mix:p=<p>[,<state>] or a JSON Kraus list.
    #[arg(long)]
    pub channel: Option<String>,
    /// Observable: x, y or z.
    #[arg(long)]
    pub obs: Option<String>,

    /// Largest time.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub t: Option<usize>,
    /// Smallest time (tee).
    #[arg(long = "T-min")]
    #[serde(rename = "T-min")]
    pub t_min: Option<usize>,
    /// Chain length (spectrum).
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Largest chain length accepted (spectrum).
    #[arg(long = "max-L")]
    #[serde(rename = "max-L")]
    pub max_l: Option<usize>,
    /// Bond truncation (tee); exact when absent.
    #[arg(long)]
    pub chi: Option<usize>,
    /// Number of samples.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Local dimension (negativity).
    #[arg(long)]
    pub q: Option<usize>,
    /// Covering resolution.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Deduplication tolerance (growth).
    #[arg(long)]
    pub tol: Option<f64>,

    /// Output path; sidecars are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub detail: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { field: field.into(), detail: detail.into() }
    }
}

/// Keyword table for numeric parameters. Fractions of π are the binary64 quotient
/// `PI / n` (for n = 3 this differs from the correctly rounded `FRAC_PI_3` by one ulp).
pub const KEYWORDS: &[(&str, f64)] = &[
    ("ln2", std::f64::consts::LN_2),
    ("golden", 1.618_033_988_749_895),
    ("pi", std::f64::consts::PI),
    ("pi/2", std::f64::consts::PI / 2.0),
    ("pi/3", std::f64::consts::PI / 3.0),
    ("pi/4", std::f64::consts::PI / 4.0),
];

/// Resolves a keyword, a rational `a/b`, or a decimal number.
pub fn resolve_keyword(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((_, v)) = KEYWORDS.iter().find(|(k, _)| k.eq_ignore_ascii_case(s)) {
        return Some(*v);
    }
    if let Some((a, b)) = s.split_once('/') {
        let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (b != 0.0).then_some(a / b);
    }
    s.parse().ok()
}

fn resolve(field: &str, p: &Option<Param>) -> Result<Option<Param>, ConfigError> {
    match p {
        None => Ok(None),
        Some(Param::Number(v)) => Ok(Some(Param::Number(*v))),
        Some(Param::Text(s)) => resolve_keyword(s)
            .map(|v| Some(Param::Number(v)))
            .ok_or_else(|| ConfigError::new(field, format!("cannot resolve '{s}'"))),
    }
}

pub fn number(p: &Option<Param>) -> Option<f64> {
    match p {
        Some(Param::Number(v)) => Some(*v),
        _ => None,
    }
}

/// Reads a config file; errors name the line and column.
pub fn load_config_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        ConfigError::new("config", format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
    })
}

macro_rules! merge_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

/// Flags over file values, then defaults, keyword resolution and per-command checks.
pub fn validate_config(mut cfg: RunConfig) -> Result<RunConfig, ConfigError> {
    if let Some(path) = cfg.config.clone() {
        let file = load_config_file(&path)?;
        merge_fields!(cfg, file; command, model, k, theta, gates, deform_y, psi_e, psi_o, rho_imp, channel, obs,
            t, t_min, l, max_l, chi, n, seed, q, delta, tol, out, format);
    }
    let command = cfg.command.ok_or_else(|| ConfigError::new("command", "no command given"))?;
    cfg.k = resolve("K", &cfg.k)?;
    cfg.theta = resolve("theta", &cfg.theta)?;
    cfg.deform_y = resolve("deform-y", &cfg.deform_y)?;
    cfg.format.get_or_insert(Format::Csv);
    let ext = match cfg.format.unwrap() {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    cfg.out.get_or_insert_with(|| PathBuf::from(format!("{}.{ext}", command.name())));

    let needs_model = command != Command::Negativity;
    if needs_model {
        let model = cfg.model.clone().ok_or_else(|| ConfigError::new("model", "required"))?.to_lowercase();
        match model.as_str() {
            "a" | "b" => {
                if cfg.k.is_none() {
                    return Err(ConfigError::new("K", format!("model {model} needs K")));
                }
            }
            "c" => {
                if cfg.theta.is_none() {
                    return Err(ConfigError::new("theta", "model c needs theta"));
                }
            }
            "custom" => {
                if cfg.gates.is_none() {
                    return Err(ConfigError::new("gates", "model custom needs a gate-set file"));
                }
            }
            other => return Err(ConfigError::new("model", format!("unknown model '{other}'"))),
        }
        cfg.model = Some(model);
    }
    let walk = matches!(command, Command::Montecarlo | Command::Exact | Command::Covering);
    if matches!(command, Command::Tee | Command::Montecarlo | Command::Exact | Command::Covering) {
        cfg.psi_e.get_or_insert_with(|| "+".into());
        cfg.psi_o.get_or_insert_with(|| "+".into());
    }
    if walk {
        cfg.rho_imp.get_or_insert_with(|| "+".into());
        cfg.channel.get_or_insert_with(|| "identity".into());
        cfg.obs.get_or_insert_with(|| "x".into());
        if !matches!(cfg.obs.as_deref(), Some("x" | "y" | "z")) {
            return Err(ConfigError::new("obs", "expected x, y or z"));
        }
    }
    match command {
        Command::Growth => {
            cfg.t.get_or_insert(20);
            cfg.tol.get_or_insert(1e-8);
        }
        Command::Tee => {
            cfg.t.get_or_insert(8);
            cfg.t_min.get_or_insert(2);
            if cfg.t_min > cfg.t || cfg.t_min < Some(2) {
                return Err(ConfigError::new("T-min", "need 2 <= T-min <= T"));
            }
            if cfg.chi == Some(0) {
                return Err(ConfigError::new("chi", "must be at least 1"));
            }
        }
        Command::Montecarlo => {
            cfg.t.get_or_insert(8);
            cfg.n.get_or_insert(100_000);
            if cfg.seed.is_none() {
                return Err(ConfigError::new("seed", "sampling needs a seed"));
            }
        }
        Command::Exact => {
            cfg.t.get_or_insert(8);
        }
        Command::Spectrum => {
            cfg.l.get_or_insert(8);
            cfg.max_l.get_or_insert(im_lab::spectral::DEFAULT_MAX_L);
        }
        Command::Negativity => {
            cfg.q.get_or_insert(3);
            cfg.n.get_or_insert(10_000);
            if cfg.seed.is_none() {
                return Err(ConfigError::new("seed", "sampling needs a seed"));
            }
        }
        Command::Covering => {
            cfg.t.get_or_insert(4);
            cfg.delta.get_or_insert(0.1);
        }
    }
    if cfg.t == Some(0) && command != Command::Spectrum && command != Command::Negativity {
        return Err(ConfigError::new("T", "must be at least 1"));
    }
    if cfg.n == Some(0) {
        return Err(ConfigError::new("N", "must be at least 1"));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keywords_resolve_to_binary64() {
        assert_eq!(resolve_keyword("ln2"), Some(0.6931471805599453));
        assert_eq!(resolve_keyword("pi/3"), Some(1.0471975511965976));
        assert_eq!(resolve_keyword("7/10"), Some(0.7));
        assert_eq!(resolve_keyword("0.25"), Some(0.25));
        assert!((resolve_keyword("golden").unwrap() - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert_eq!(resolve_keyword("nonsense"), None);
    }

    #[test]
    fn montecarlo_needs_seed() {
        let cfg = RunConfig {
            command: Some(Command::Montecarlo),
            model: Some("c".into()),
            theta: Some(Param::Text("pi/3".into())),
            ..Default::default()
        };
        let err = validate_config(cfg).unwrap_err();
        assert_eq!(err.field, "seed");
    }

    #[test]
    fn defaults_are_filled() {
        let cfg = RunConfig {
            command: Some(Command::Growth),
            model: Some("B".into()),
            k: Some(Param::Text("ln2".into())),
            ..Default::default()
        };
        let cfg = validate_config(cfg).unwrap();
        assert_eq!(cfg.k, Some(Param::Number(std::f64::consts::LN_2)));
        assert_eq!(cfg.model.as_deref(), Some("b"));
        assert_eq!(cfg.t, Some(20));
        assert_eq!(cfg.out, Some(PathBuf::from("growth.csv")));
    }
}
