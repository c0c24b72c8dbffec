//! Run configuration. Command-line flags override a JSON config file, which
//! overrides the built-in defaults.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use bubblebif_core::{k2_path, k3_demo_path, AffinePath};
use serde::{Deserialize, Serialize};

use crate::formats::PathDocument;

/// Where the matrix path comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum PathSpec {
    /// `[[alpha, 1-alpha], [1-alpha, alpha]]` on `[0, 5]`.
    K2,
    /// Three-component demo path with `sum e^3 != 0`, on `[0, 3]`.
    K3,
    File(PathBuf),
}

impl FromStr for PathSpec {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "k2" => Self::K2,
            "k3" => Self::K3,
            other => Self::File(PathBuf::from(other)),
        })
    }
}

impl fmt::Display for PathSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::K2 => f.write_str("k2"),
            Self::K3 => f.write_str("k3"),
            Self::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl From<PathSpec> for String {
    fn from(p: PathSpec) -> Self {
        p.to_string()
    }
}

impl From<String> for PathSpec {
    fn from(s: String) -> Self {
        match s.parse() {
            Ok(p) => p,
            Err(never) => match never {},
        }
    }
}

impl PathSpec {
    pub fn load(&self) -> Result<AffinePath> {
        match self {
            Self::K2 => Ok(k2_path()),
            Self::K3 => Ok(k3_demo_path()),
            Self::File(p) => PathDocument::load(p)?.to_path(),
        }
    }
}

/// Parses `LO:HI`.
pub fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s.split_once(':').with_context(|| format!("expected LO:HI, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().with_context(|| format!("bad lower bound in {s:?}"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("bad upper bound in {s:?}"))?;
    Ok((lo, hi))
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dim: u32,
    pub n_max: usize,
    pub path: PathSpec,
    /// Restricts the path domain when set.
    pub alpha_range: Option<(f64, f64)>,
    /// Galerkin truncation `M`.
    pub trunc: usize,
    /// Radial quadrature order; `None` picks one from `dim` and `trunc`.
    pub quad_order: Option<usize>,
    pub eps_max: f64,
    pub steps: usize,
    /// Branch points must have a Newton residual below this.
    pub newton_tol: f64,
    /// Branch points must have `|L|` below this.
    pub lagrange_tol: f64,
    /// Crossings must satisfy `|Lambda(alpha_bar) - lambda_n|` below this.
    pub root_tol: f64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: 4,
            n_max: 3,
            path: PathSpec::K2,
            alpha_range: None,
            trunc: 20,
            quad_order: None,
            eps_max: 0.1,
            steps: 10,
            newton_tol: 1e-12,
            lagrange_tol: 1e-8,
            root_tol: 1e-10,
            out: None,
        }
    }
}

/// A partial configuration: one layer of the precedence stack.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub dim: Option<u32>,
    pub n_max: Option<usize>,
    pub path: Option<PathSpec>,
    pub alpha_range: Option<(f64, f64)>,
    pub trunc: Option<usize>,
    pub quad_order: Option<usize>,
    pub eps_max: Option<f64>,
    pub steps: Option<usize>,
    pub newton_tol: Option<f64>,
    pub lagrange_tol: Option<f64>,
    pub root_tol: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ConfigLayer {
    /// Reads a JSON config file. Relative file paths inside it (`path`,
    /// `out`) are taken relative to the file's directory.
    pub fn load(file: &Path) -> Result<Self> {
        let text = fs::read_to_string(file).with_context(|| format!("cannot read config {}", file.display()))?;
        let mut layer: Self =
            serde_json::from_str(&text).with_context(|| format!("malformed config {}", file.display()))?;
        let base = file.parent().unwrap_or(Path::new(""));
        if let Some(PathSpec::File(p)) = &layer.path {
            if p.is_relative() {
                layer.path = Some(PathSpec::File(base.join(p)));
            }
        }
        if let Some(out) = &layer.out {
            if out.is_relative() {
                layer.out = Some(base.join(out));
            }
        }
        Ok(layer)
    }

    fn apply(self, cfg: &mut RunConfig) {
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        take!(dim, n_max, path, trunc, eps_max, steps, newton_tol, lagrange_tol, root_tol);
        if self.alpha_range.is_some() {
            cfg.alpha_range = self.alpha_range;
        }
        if self.quad_order.is_some() {
            cfg.quad_order = self.quad_order;
        }
        if self.out.is_some() {
            cfg.out = self.out;
        }
    }
}

impl RunConfig {
    /// Defaults, then `file`, then `flags`; the result is validated.
    pub fn resolve(file: Option<ConfigLayer>, flags: ConfigLayer) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(f) = file {
            f.apply(&mut cfg);
        }
        flags.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 3 {
            bail!("dimension must be at least 3, got {}", self.dim);
        }
        if self.n_max < 2 {
            bail!("n_max must be at least 2, got {}", self.n_max);
        }
        if self.trunc < 2 {
            bail!("truncation must be positive and at least 2, got {}", self.trunc);
        }
        if self.steps == 0 {
            bail!("steps must be positive");
        }
        if self.quad_order == Some(0) {
            bail!("quadrature order must be positive");
        }
        for (name, v) in [
            ("eps_max", self.eps_max),
            ("newton_tol", self.newton_tol),
            ("lagrange_tol", self.lagrange_tol),
            ("root_tol", self.root_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                bail!("{name} must be positive and finite, got {v}");
            }
        }
        if let Some((lo, hi)) = self.alpha_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                bail!("alpha range {lo}:{hi} is empty or not finite");
            }
        }
        Ok(())
    }

    /// The configured path, restricted to `alpha_range` when given.
    pub fn load_path(&self) -> Result<AffinePath> {
        let path = self.path.load()?;
        match self.alpha_range {
            Some((lo, hi)) => Ok(path.with_domain(lo, hi)?),
            None => Ok(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bubblebif_core::MatrixPath;

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let file = ConfigLayer { dim: Some(5), steps: Some(4), eps_max: Some(0.2), ..Default::default() };
        let flags = ConfigLayer { dim: Some(3), ..Default::default() };
        let cfg = RunConfig::resolve(Some(file), flags).unwrap();
        assert_eq!(cfg.dim, 3);
        assert_eq!(cfg.steps, 4);
        assert_eq!(cfg.eps_max, 0.2);
        assert_eq!(cfg.trunc, RunConfig::default().trunc);
    }

    #[test]
    fn validation_rejects_bad_values() {
        for layer in [
            ConfigLayer { dim: Some(2), ..Default::default() },
            ConfigLayer { n_max: Some(1), ..Default::default() },
            ConfigLayer { steps: Some(0), ..Default::default() },
            ConfigLayer { eps_max: Some(-0.1), ..Default::default() },
            ConfigLayer { newton_tol: Some(f64::NAN), ..Default::default() },
            ConfigLayer { alpha_range: Some((2.0, 1.0)), ..Default::default() },
        ] {
            assert!(RunConfig::resolve(None, layer.clone()).is_err(), "{layer:?}");
        }
    }

    #[test]
    fn config_file_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.json");
        fs::write(&file, r#"{"dim": 5, "path": "paths/p.json", "alpha_range": [0.5, 2.0]}"#).unwrap();
        let layer = ConfigLayer::load(&file).unwrap();
        assert_eq!(layer.path, Some(PathSpec::File(dir.path().join("paths/p.json"))));
        assert_eq!(layer.alpha_range, Some((0.5, 2.0)));
        fs::write(&file, r#"{"dimension": 5}"#).unwrap();
        assert!(ConfigLayer::load(&file).is_err());
    }

    #[test]
    fn path_spec_parsing_and_domain() {
        assert_eq!("k2".parse::<PathSpec>().unwrap(), PathSpec::K2);
        assert_eq!("k3".parse::<PathSpec>().unwrap(), PathSpec::K3);
        assert_eq!(parse_range("1:2.5").unwrap(), (1.0, 2.5));
        assert!(parse_range("1-2").is_err());
        let cfg = RunConfig { alpha_range: Some((1.0, 2.0)), ..Default::default() };
        assert_eq!(cfg.load_path().unwrap().domain(), (1.0, 2.0));
    }
}
