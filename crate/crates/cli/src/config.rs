//! Run configuration: a TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use gabor_core::cert::Method;
use gabor_core::linalg::EigenMethod;
use gabor_core::{GridFunction, GridSpec, Lattice, Window, WindowKind, C64};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Fully resolved settings of one run. Every field has a default, so a
/// config file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Analysis window, e.g. `gaussian:a=1,d=1` or `file:path=g.csv`.
    pub window: String,
    /// Synthesis window; the analysis window when absent.
    pub dual: Option<String>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Full lattice matrix, rows separated by `;`. Overrides `alpha`/`beta`.
    pub matrix: Option<String>,
    /// Use `alpha = beta = fraction * theta0` instead of explicit steps.
    pub mesh_fraction: Option<f64>,
    pub weight_s: f64,
    pub epsilon: f64,
    /// Norm of time-frequency shifts on the target space.
    pub c: f64,
    pub trunc_k: u64,
    pub grid_r: f64,
    pub grid_n: usize,
    pub method: Method,
    /// Translation nodes per unit length of Wiener cube tables.
    pub sub: usize,
    pub verify: bool,
    pub eigen: EigenMethod,
    pub seed: u64,
    /// Random trials of the `count` subcommand.
    pub trials: usize,
    /// Cube vertex of the `count` subcommand.
    pub cube: Option<Vec<i64>>,
    /// Evaluation point of the `poisson` subcommand.
    pub point: Option<Vec<f64>>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window: "gaussian:a=1,d=1".into(),
            dual: None,
            alpha: vec![0.5],
            beta: vec![0.5],
            matrix: None,
            mesh_fraction: None,
            weight_s: 0.0,
            epsilon: 1.0,
            c: 1.0,
            trunc_k: 20,
            grid_r: 8.0,
            grid_n: 1024,
            method: Method::LatticeSum,
            sub: 4,
            verify: false,
            eigen: EigenMethod::Lanczos,
            seed: 0,
            trials: 100,
            cube: None,
            point: None,
            format: Format::Json,
            out: None,
        }
    }
}

/// Command-line overrides; `None` keeps the file or default value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML file with any subset of the run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Window: gaussian:a=1,d=1 | hermite:orders=1/2,a=1 | indicator:lo=0,hi=1,d=1 | file:path=F,d=1
    #[arg(long)]
    pub window: Option<String>,
    /// Synthesis window (same syntax as --window).
    #[arg(long)]
    pub dual: Option<String>,
    /// Translation steps, one per axis or one for all.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub alpha: Option<Vec<f64>>,
    /// Modulation steps, one per axis or one for all.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Option<Vec<f64>>,
    /// Lattice matrix "a,b;c,d".
    #[arg(long, allow_hyphen_values = true)]
    pub matrix: Option<String>,
    /// Diagonal lattice with both steps equal to this fraction of theta0.
    #[arg(long)]
    pub mesh_fraction: Option<f64>,
    /// Exponent s of the polynomial weight (1 + |z|)^s.
    #[arg(long)]
    pub weight_s: Option<f64>,
    /// Accuracy target epsilon used for the mesh threshold.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Norm of time-frequency shifts (1 on L^2).
    #[arg(long)]
    pub c: Option<f64>,
    /// Truncation radius of lattice sums.
    #[arg(long = "trunc-K")]
    pub trunc_k: Option<u64>,
    /// Half-width of the periodic grid.
    #[arg(long = "grid-R")]
    pub grid_r: Option<f64>,
    /// Points per axis of the periodic grid.
    #[arg(long = "grid-N")]
    pub grid_n: Option<usize>,
    /// lattice-sum | binomial | diag-refined
    #[arg(long)]
    pub method: Option<Method>,
    /// Translation nodes per unit length of Wiener cube tables.
    #[arg(long)]
    pub sub: Option<usize>,
    /// Run the brute-force frame-operator oracle.
    #[arg(long)]
    pub verify: bool,
    /// lanczos | power
    #[arg(long)]
    pub eigen: Option<String>,
    /// Seed for random lattices and test functions.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random lattices for `count`.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Integer cube corner for `count`, one entry per axis.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub cube: Option<Vec<i64>>,
    /// Evaluation point for `poisson`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include wall-clock timings in the report (breaks byte-identity).
    #[arg(long)]
    pub timings: bool,
}

macro_rules! take {
    ($cfg:ident, $ov:ident, $($f:ident),*) => {
        $(if let Some(v) = $ov.$f.clone() { $cfg.$f = v; })*
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// File settings (if any) overlaid with command-line flags, validated.
    pub fn resolve(ov: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &ov.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        take!(
            cfg, ov, window, alpha, beta, weight_s, epsilon, c, trunc_k, grid_r, grid_n, method, sub, seed, trials,
            format
        );
        if ov.dual.is_some() {
            cfg.dual = ov.dual.clone();
        }
        if ov.matrix.is_some() {
            cfg.matrix = ov.matrix.clone();
        }
        if ov.mesh_fraction.is_some() {
            cfg.mesh_fraction = ov.mesh_fraction;
        }
        if ov.cube.is_some() {
            cfg.cube = ov.cube.clone();
        }
        if ov.point.is_some() {
            cfg.point = ov.point.clone();
        }
        if ov.out.is_some() {
            cfg.out = ov.out.clone();
        }
        if let Some(e) = &ov.eigen {
            cfg.eigen = parse_eigen(e)?;
        }
        cfg.verify |= ov.verify;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("c must be positive");
        }
        if !(self.weight_s >= 0.0 && self.weight_s.is_finite()) {
            return bad("weight-s must be non-negative");
        }
        if !(self.grid_r > 0.0 && self.grid_r.is_finite()) || self.grid_n < 2 {
            return bad("grid needs R > 0 and N >= 2");
        }
        if self.sub == 0 {
            return bad("sub must be at least 1");
        }
        if let Some(f) = self.mesh_fraction {
            if !(f > 0.0 && f.is_finite()) {
                return bad("mesh-fraction must be positive");
            }
        }
        if self.matrix.is_none() && self.mesh_fraction.is_none() {
            let steps = self.alpha.iter().chain(&self.beta);
            if self.alpha.is_empty() || self.beta.is_empty() || steps.clone().any(|v| !(*v > 0.0 && v.is_finite())) {
                return bad("alpha and beta must be non-empty lists of positive steps");
            }
        }
        if let Some(m) = &self.matrix {
            parse_matrix(m)?;
        }
        WindowSpec::parse(&self.window)?;
        if let Some(d) = &self.dual {
            WindowSpec::parse(d)?;
        }
        Ok(())
    }

    /// Dimension of the configured window.
    pub fn dim(&self) -> Result<usize, CliError> {
        Ok(WindowSpec::parse(&self.window)?.dim())
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        Ok(GridSpec::new(self.dim()?, self.grid_r, self.grid_n)?)
    }

    /// `(g, gamma)` sampled or analytic on the run grid.
    pub fn windows(&self) -> Result<(Window, Window), CliError> {
        let spec = self.grid()?;
        let g = WindowSpec::parse(&self.window)?.build(spec)?;
        let gamma = match &self.dual {
            Some(d) => {
                let w = WindowSpec::parse(d)?;
                if w.dim() != spec.dim {
                    return Err(CliError::Config("window and dual differ in dimension".into()));
                }
                w.build(spec)?
            }
            None => g.clone(),
        };
        Ok((g, gamma))
    }

    /// Explicit lattice of the run (not for `mesh_fraction`, which needs theta0).
    pub fn explicit_lattice(&self, d: usize) -> Result<Lattice, CliError> {
        if let Some(m) = &self.matrix {
            let rows = parse_matrix(m)?;
            if rows.len() != 2 * d {
                return Err(CliError::Config(format!(
                    "lattice matrix is {0}x{0}, windows on R^{d} need {1}x{1}",
                    rows.len(),
                    2 * d
                )));
            }
            return Ok(Lattice::new(&rows)?);
        }
        let alpha = broadcast(&self.alpha, d, "alpha")?;
        let beta = broadcast(&self.beta, d, "beta")?;
        Ok(Lattice::diagonal(&alpha, &beta)?)
    }
}

fn broadcast(v: &[f64], d: usize, name: &str) -> Result<Vec<f64>, CliError> {
    match v.len() {
        1 => Ok(vec![v[0]; d]),
        n if n == d => Ok(v.to_vec()),
        n => Err(CliError::Config(format!("{name} has {n} entries for d = {d}"))),
    }
}

pub fn parse_eigen(s: &str) -> Result<EigenMethod, CliError> {
    match s {
        "lanczos" => Ok(EigenMethod::Lanczos),
        "power" => Ok(EigenMethod::Power),
        other => Err(CliError::Config(format!("unknown eigensolver '{other}'"))),
    }
}

/// Rows of `"a,b;c,d"`.
pub fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| CliError::Config(format!("bad matrix entry '{}'", v.trim())))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Config(format!("matrix '{s}' is not square")));
    }
    Ok(rows)
}

/// Parsed `family:key=value,...` window description.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowSpec {
    Kind(WindowKind),
    File { path: PathBuf, d: usize },
}

impl WindowSpec {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = Vec::new();
        for item in rest.split(',').filter(|t| !t.trim().is_empty()) {
            let (k, v) = item.split_once('=').unwrap_or(("path", item));
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let num = |key: &str, default: f64| -> Result<f64, CliError> {
            get(key).map_or(Ok(default), |v| {
                v.parse()
                    .map_err(|_| CliError::Config(format!("window parameter {key}='{v}' is not a number")))
            })
        };
        let dim = |default: usize| -> Result<usize, CliError> {
            get("d").map_or(Ok(default), |v| {
                v.parse()
                    .ok()
                    .filter(|&d| d >= 1)
                    .ok_or_else(|| CliError::Config(format!("window dimension d='{v}' is invalid")))
            })
        };
        let known = |keys: &[&str]| -> Result<(), CliError> {
            match kv.iter().find(|(k, _)| !keys.contains(&k.as_str())) {
                Some((k, _)) => Err(CliError::Config(format!(
                    "unknown parameter '{k}' for window '{family}'"
                ))),
                None => Ok(()),
            }
        };
        match family.trim() {
            "gaussian" => {
                known(&["a", "d"])?;
                Ok(Self::Kind(WindowKind::Gaussian {
                    d: dim(1)?,
                    a: num("a", 1.0)?,
                }))
            }
            "hermite" => {
                known(&["a", "orders"])?;
                let orders = get("orders")
                    .unwrap_or("0")
                    .split('/')
                    .map(|o| {
                        o.parse::<usize>()
                            .map_err(|_| CliError::Config(format!("bad Hermite order '{o}'")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Self::Kind(WindowKind::Hermite {
                    orders,
                    a: num("a", 1.0)?,
                }))
            }
            "indicator" => {
                known(&["lo", "hi", "d"])?;
                Ok(Self::Kind(WindowKind::Indicator {
                    d: dim(1)?,
                    lo: num("lo", 0.0)?,
                    hi: num("hi", 1.0)?,
                }))
            }
            "file" => {
                known(&["path", "d"])?;
                let path = get("path").ok_or_else(|| CliError::Config("file window needs a path".into()))?;
                Ok(Self::File {
                    path: path.into(),
                    d: dim(1)?,
                })
            }
            other => Err(CliError::Config(format!("unknown window family '{other}'"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Kind(WindowKind::Gaussian { d, .. }) | Self::Kind(WindowKind::Indicator { d, .. }) => *d,
            Self::Kind(WindowKind::Hermite { orders, .. }) => orders.len(),
            Self::Kind(WindowKind::Sampled { .. }) => 1,
            Self::File { d, .. } => *d,
        }
    }

    pub fn build(&self, spec: GridSpec) -> Result<Window, CliError> {
        match self {
            Self::Kind(kind) => Ok(Window::from_kind(kind, spec)?),
            Self::File { path, .. } => load_samples(path, spec),
        }
    }
}

/// One sample per line, `re` or `re,im`, in row-major grid order.
fn load_samples(path: &Path, spec: GridSpec) -> Result<Window, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read window file {}: {e}", path.display())))?;
    let mut data = Vec::with_capacity(spec.len());
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64, CliError> {
            rec.get(i).map_or(Ok(0.0), |v| {
                v.trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad sample '{v}' in {}", path.display())))
            })
        };
        data.push(C64::new(field(0)?, field(1)?));
    }
    if data.len() != spec.len() {
        return Err(CliError::Config(format!(
            "window file has {} samples, the grid has {}",
            data.len(),
            spec.len()
        )));
    }
    Ok(Window::Sampled(GridFunction::from_vec(spec, data)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_specs() {
        assert_eq!(
            WindowSpec::parse("gaussian:a=2,d=2").unwrap(),
            WindowSpec::Kind(WindowKind::Gaussian { d: 2, a: 2.0 })
        );
        assert_eq!(WindowSpec::parse("gaussian").unwrap().dim(), 1);
        assert_eq!(WindowSpec::parse("hermite:orders=1/2").unwrap().dim(), 2);
        assert!(matches!(
            WindowSpec::parse("file:g.csv").unwrap(),
            WindowSpec::File { d: 1, .. }
        ));
        assert!(WindowSpec::parse("gaussian:b=1").is_err());
        assert!(WindowSpec::parse("boxcar").is_err());
    }

    #[test]
    fn matrices() {
        assert_eq!(parse_matrix("1,-1;1,1").unwrap(), vec![vec![1.0, -1.0], vec![1.0, 1.0]]);
        assert!(parse_matrix("1,2;3").is_err());
        assert!(parse_matrix("1,x;0,1").is_err());
    }

    #[test]
    fn toml_overrides() {
        let cfg = RunConfig::from_toml("alpha = [0.25]\ngrid_n = 512\nmethod = \"binomial\"").unwrap();
        assert_eq!(cfg.alpha, vec![0.25]);
        assert_eq!(cfg.method, Method::Binomial);
        assert!(RunConfig::from_toml("alhpa = [1.0]").is_err());
        let lat = cfg.explicit_lattice(1).unwrap();
        assert_eq!(lat.diag().unwrap(), (&[0.25][..], &[0.5][..]));
    }
}
