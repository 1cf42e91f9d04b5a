//! Experiment plans: the fully resolved parameter set a subcommand runs
//! with, assembled in three layers — built-in defaults, command-line
//! flags, then an optional JSON `--config` file whose present fields
//! override the flags. Validation happens once, on the assembled plan,
//! so every error points at the value that will actually run.
//!
//! Sweep syntax for `--N`:
//!
//! ```text
//!   6                       a single size
//!   256..65536:geometric    octave ladder (count defaults to the number
//!                           of octaves + 1, here 9)
//!   256..65536:geometric:5  5 log-spaced sizes
//!   100..500:linear:9       9 evenly spaced sizes
//! ```
//!
//! Values are rounded to integers and deduplicated; the resulting list
//! must be strictly increasing and every size must satisfy the
//! construction domain (dims >= 2, N >= 3, alpha in (1/q, 1)).

use std::fmt;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use besovlab::params::ConstructionParams;

/// Ill-formed plan input (sweep syntax, unknown format, parameter domain);
/// reported with exit code 2, as opposed to runtime failures (exit 1).
#[derive(Debug)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ValidationError {}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ValidationError> {
    Err(ValidationError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    fn parse(s: &str) -> Result<Self, ValidationError> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => invalid(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// The resolved plan. `sweep` holds a single value for the single-size
/// commands; `grid`/`t_end`/`steps`/`checkpoints`/`linearized` are only
/// meaningful for the commands that expose the corresponding flags and
/// keep their defaults elsewhere.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentPlan {
    pub command: String,
    pub dims: usize,
    pub sweep: Vec<u32>,
    pub alpha: f64,
    #[serde(with = "besovlab::besov::ext_exponent")]
    pub p: f64,
    #[serde(with = "besovlab::besov::ext_exponent")]
    pub q: f64,
    pub output_dir: PathBuf,
    /// Recorded for reproducibility; the implemented commands are fully
    /// deterministic and do not consume it.
    pub seed: u64,
    pub format: OutputFormat,
    pub grid: usize,
    pub t_end: Option<f64>,
    pub steps: usize,
    pub checkpoints: usize,
    pub linearized: bool,
}

/// Raw values as they arrive from flags, before the config overlay.
#[derive(Debug, Clone)]
pub struct PlanInputs {
    pub command: &'static str,
    /// the command accepts exactly one size, not a sweep
    pub single_size: bool,
    /// the command integrates the planar (d = 2) system only
    pub planar: bool,
    pub n: String,
    pub d: usize,
    pub alpha: f64,
    pub p: String,
    pub q: String,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub format: String,
    pub config: Option<PathBuf>,
    pub grid: usize,
    pub t_end: Option<f64>,
    pub steps: usize,
    pub checkpoints: usize,
    pub linearized: bool,
}

/// JSON `--config` schema: every field optional, unknown keys rejected.
/// Present fields override the command-line flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n: Option<NField>,
    d: Option<usize>,
    alpha: Option<f64>,
    p: Option<ExpField>,
    q: Option<ExpField>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    format: Option<String>,
    grid: Option<usize>,
    t_end: Option<f64>,
    steps: Option<usize>,
    checkpoints: Option<usize>,
    linearized: Option<bool>,
}

/// `"n": 6` or `"n": "256..65536:geometric"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NField {
    Int(u64),
    Expr(String),
}

/// `"p": 2` or `"p": "inf"`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ExpField {
    Num(f64),
    Label(String),
}

impl ExpField {
    fn into_string(self) -> String {
        match self {
            ExpField::Num(x) => format!("{x}"),
            ExpField::Label(s) => s,
        }
    }
}

fn parse_exponent(label: &str, s: &str) -> Result<f64, ValidationError> {
    match s.trim() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => match t.parse::<f64>() {
            Ok(x) => Ok(x),
            Err(_) => invalid(format!("{label} = `{s}` is neither a number nor `inf`")),
        },
    }
}

/// Parse the `--N` argument: a single integer or `a..b:mode[:count]`.
pub fn parse_sweep(expr: &str) -> Result<Vec<u32>, ValidationError> {
    let expr = expr.trim();
    if let Ok(single) = expr.parse::<u32>() {
        return Ok(vec![single]);
    }
    let (range, mode) = match expr.split_once(':') {
        Some(t) => t,
        None => {
            return invalid(format!(
                "sweep `{expr}` is neither an integer nor `a..b:geometric|linear[:count]`"
            ))
        }
    };
    let (a_str, b_str) = match range.split_once("..") {
        Some(t) => t,
        None => return invalid(format!("sweep range `{range}` must look like `a..b`")),
    };
    let a: u32 = match a_str.parse() {
        Ok(v) => v,
        Err(_) => return invalid(format!("sweep start `{a_str}` is not an integer")),
    };
    let b: u32 = match b_str.parse() {
        Ok(v) => v,
        Err(_) => return invalid(format!("sweep end `{b_str}` is not an integer")),
    };
    if b <= a {
        return invalid(format!("sweep needs b > a, got {a}..{b}"));
    }
    let (mode, count) = match mode.split_once(':') {
        Some((m, c)) => {
            let c: usize = match c.parse() {
                Ok(v) if v >= 2 => v,
                _ => return invalid(format!("sweep count `{c}` must be an integer >= 2")),
            };
            (m, Some(c))
        }
        None => (mode, None),
    };
    let (af, bf) = (a as f64, b as f64);
    let values: Vec<u32> = match mode {
        "geometric" => {
            let count = count.unwrap_or(((bf / af).log2().round() as usize) + 1).max(2);
            (0..count)
                .map(|i| {
                    let t = i as f64 / (count - 1) as f64;
                    (af * (bf / af).powf(t)).round() as u32
                })
                .collect()
        }
        "linear" => {
            let count = count.unwrap_or(9).max(2);
            (0..count)
                .map(|i| {
                    let t = i as f64 / (count - 1) as f64;
                    (af + (bf - af) * t).round() as u32
                })
                .collect()
        }
        other => {
            return invalid(format!("unknown sweep mode `{other}` (expected geometric or linear)"))
        }
    };
    let mut out = values;
    out.dedup();
    if out.windows(2).any(|w| w[1] <= w[0]) {
        return invalid(format!("sweep `{expr}` is not strictly increasing after rounding"));
    }
    Ok(out)
}

/// Assemble and validate the plan: defaults < flags < config file.
pub fn build_plan(inputs: PlanInputs) -> Result<ExperimentPlan, ValidationError> {
    let mut n = inputs.n;
    let mut d = inputs.d;
    let mut alpha = inputs.alpha;
    let mut p = inputs.p;
    let mut q = inputs.q;
    let mut output_dir = inputs.output_dir;
    let mut seed = inputs.seed;
    let mut format = inputs.format;
    let mut grid = inputs.grid;
    let mut t_end = inputs.t_end;
    let mut steps = inputs.steps;
    let mut checkpoints = inputs.checkpoints;
    let mut linearized = inputs.linearized;

    if let Some(path) = &inputs.config {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return invalid(format!("cannot read config {}: {e}", path.display())),
        };
        let cfg: ConfigFile = match serde_json::from_str(&text) {
            Ok(c) => c,
            Err(e) => return invalid(format!("malformed config {}: {e}", path.display())),
        };
        if let Some(v) = cfg.n {
            n = match v {
                NField::Int(i) => i.to_string(),
                NField::Expr(s) => s,
            };
        }
        if let Some(v) = cfg.d {
            d = v;
        }
        if let Some(v) = cfg.alpha {
            alpha = v;
        }
        if let Some(v) = cfg.p {
            p = v.into_string();
        }
        if let Some(v) = cfg.q {
            q = v.into_string();
        }
        if let Some(v) = cfg.output_dir {
            output_dir = v;
        }
        if let Some(v) = cfg.seed {
            seed = v;
        }
        if let Some(v) = cfg.format {
            format = v;
        }
        if let Some(v) = cfg.grid {
            grid = v;
        }
        if let Some(v) = cfg.t_end {
            t_end = Some(v);
        }
        if let Some(v) = cfg.steps {
            steps = v;
        }
        if let Some(v) = cfg.checkpoints {
            checkpoints = v;
        }
        if let Some(v) = cfg.linearized {
            linearized = v;
        }
    }

    let sweep = parse_sweep(&n)?;
    let p = parse_exponent("p", &p)?;
    let q = parse_exponent("q", &q)?;
    let format = OutputFormat::parse(&format)?;
    if steps == 0 {
        return invalid("steps must be >= 1");
    }
    if checkpoints == 0 {
        return invalid("checkpoints must be >= 1");
    }
    if let Some(t) = t_end {
        if !(t > 0.0) || !t.is_finite() {
            return invalid(format!("t-end = {t} must be a positive finite time"));
        }
    }
    // the construction domain, checked for every sweep point up front
    for &nv in &sweep {
        if let Err(e) = ConstructionParams::new(d, nv, alpha, p, q) {
            return invalid(e.to_string());
        }
    }
    if inputs.single_size && sweep.len() != 1 {
        return invalid(format!(
            "{} takes a single N, got a {}-point sweep",
            inputs.command,
            sweep.len()
        ));
    }
    if inputs.planar && d != 2 {
        return invalid(format!("{} integrates the 2D system; got d = {d}", inputs.command));
    }
    // the output directory is created last, once the plan is known to be valid
    if fs::create_dir_all(&output_dir).is_err() {
        return invalid(format!("output dir {} is not writable", output_dir.display()));
    }

    Ok(ExperimentPlan {
        command: inputs.command.to_string(),
        dims: d,
        sweep,
        alpha,
        p,
        q,
        output_dir,
        seed,
        format,
        grid,
        t_end,
        steps,
        checkpoints,
        linearized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_single_integer() {
        assert_eq!(parse_sweep("6").unwrap(), vec![6]);
    }

    #[test]
    fn sweep_geometric_defaults_to_octaves() {
        let v = parse_sweep("256..65536:geometric").unwrap();
        assert_eq!(v, (8..=16).map(|e| 1u32 << e).collect::<Vec<_>>());
    }

    #[test]
    fn sweep_geometric_with_count() {
        let v = parse_sweep("16..256:geometric:3").unwrap();
        assert_eq!(v, vec![16, 64, 256]);
    }

    #[test]
    fn sweep_linear_with_count() {
        let v = parse_sweep("10..50:linear:5").unwrap();
        assert_eq!(v, vec![10, 20, 30, 40, 50]);
    }

    #[test]
    fn sweep_rejects_garbage() {
        assert!(parse_sweep("abc").is_err());
        assert!(parse_sweep("6..4:geometric").is_err());
        assert!(parse_sweep("4..6:cubic").is_err());
        assert!(parse_sweep("4..6:linear:1").is_err());
    }

    #[test]
    fn exponent_accepts_inf() {
        assert!(parse_exponent("p", "inf").unwrap().is_infinite());
        assert_eq!(parse_exponent("q", "2").unwrap(), 2.0);
        assert!(parse_exponent("p", "two").is_err());
    }
}
