//! On-disk formats: matrix-path documents, bifurcation and Pohozaev
//! reports, branch CSV with its coefficient sidecar and summary.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bubblebif_core::matrices::matrix_from_rows;
use bubblebif_core::{AffinePath, BifurcationCandidate, Branch, BranchPoint, PohozaevReport};
use serde::{Deserialize, Serialize};

/// `{"k": 2, "A0": [[..]], "A1": [[..]], "alpha_range": [lo, hi]}`, the path
/// `A(alpha) = A0 + alpha A1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDocument {
    pub k: usize,
    #[serde(rename = "A0")]
    pub a0: Vec<Vec<f64>>,
    #[serde(rename = "A1")]
    pub a1: Vec<Vec<f64>>,
    pub alpha_range: [f64; 2],
}

impl PathDocument {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("malformed matrix-path JSON")
    }

    pub fn load(file: &Path) -> Result<Self> {
        let text = fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", file.display()))
    }

    /// Checks the shapes against `k` and validates `A(alpha)` at both ends.
    pub fn to_path(&self) -> Result<AffinePath> {
        for (name, m) in [("A0", &self.a0), ("A1", &self.a1)] {
            if m.len() != self.k || m.iter().any(|row| row.len() != self.k) {
                bail!("{name} must be {k}x{k}", k = self.k);
            }
        }
        let a0 = matrix_from_rows(&self.a0)?;
        let a1 = matrix_from_rows(&self.a1)?;
        let [lo, hi] = self.alpha_range;
        AffinePath::new(&a0, &a1, (lo, hi)).context("path is not admissible")
    }

    pub fn from_path(path: &AffinePath) -> Self {
        use bubblebif_core::MatrixPath;
        let rows = |m: &bubblebif_core::nalgebra::DMatrix<f64>| {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let (lo, hi) = path.domain();
        Self { k: path.k(), a0: rows(path.base().matrix()), a1: rows(path.direction()), alpha_range: [lo, hi] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub alpha_bar: f64,
    pub i_bar: usize,
    pub n: usize,
    pub lambda_n: f64,
    pub eigenvector: Vec<f64>,
    pub transversality: f64,
    pub simple: bool,
    pub invertible: bool,
    pub trivial: bool,
}

impl From<&BifurcationCandidate> for CandidateRecord {
    fn from(c: &BifurcationCandidate) -> Self {
        Self {
            alpha_bar: c.alpha_bar,
            i_bar: c.i_bar,
            n: c.n,
            lambda_n: c.lambda_n,
            eigenvector: c.eigenvector.clone(),
            transversality: c.transversality,
            simple: c.simple,
            invertible: c.invertible,
            trivial: c.trivial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub candidates: Vec<CandidateRecord>,
}

impl BifurcationReport {
    pub fn new(candidates: &[BifurcationCandidate]) -> Self {
        Self { candidates: candidates.iter().map(CandidateRecord::from).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PohozaevRecord {
    pub value: f64,
    pub matrix_inverse_sum: f64,
    /// `[i, j, value]` triples.
    pub contributions: Vec<(usize, usize, f64)>,
}

impl From<&PohozaevReport> for PohozaevRecord {
    fn from(r: &PohozaevReport) -> Self {
        Self { value: r.value, matrix_inverse_sum: r.matrix_inverse_sum, contributions: r.contributions.clone() }
    }
}

/// One CSV row; the field names are the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub eps: f64,
    pub alpha: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub newton_residual: f64,
    #[serde(rename = "min_u_over_U")]
    pub min_u_over_u: f64,
    pub phi_norm: f64,
    /// Empty when `A(alpha)` is singular.
    pub pohozaev_residual: Option<f64>,
}

impl From<&BranchPoint> for BranchRow {
    fn from(p: &BranchPoint) -> Self {
        Self {
            eps: p.eps,
            alpha: p.alpha,
            l: p.l,
            newton_residual: p.newton_residual,
            min_u_over_u: p.min_u_over_u,
            phi_norm: p.phi_norm,
            pohozaev_residual: p.pohozaev_residual,
        }
    }
}

pub const BRANCH_CSV_HEADER: &str = "eps,alpha,L,newton_residual,min_u_over_U,phi_norm,pohozaev_residual";

pub fn write_branch_csv<W: Write>(out: W, points: &[BranchPoint]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    // the header is written explicitly so an empty branch still has one
    w.write_record(BRANCH_CSV_HEADER.split(','))?;
    for p in points {
        w.serialize(BranchRow::from(p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_branch_csv(text: &str) -> Result<Vec<BranchRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != BRANCH_CSV_HEADER {
        bail!("unexpected branch CSV header: {}", header.join(","));
    }
    Ok(r.deserialize().collect::<Result<Vec<BranchRow>, _>>()?)
}

/// Sidecar: Galerkin coefficients of `u - (1,...,1) U` per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDump {
    pub dim: u32,
    pub truncation: usize,
    pub points: Vec<CoefficientRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub eps: f64,
    pub alpha: f64,
    /// `coeffs[i][m]` multiplies the `m`-th normalized radial mode in component `i`.
    pub coeffs: Vec<Vec<f64>>,
}

impl CoefficientDump {
    pub fn new(dim: u32, truncation: usize, points: &[BranchPoint]) -> Self {
        Self {
            dim,
            truncation,
            points: points
                .iter()
                .map(|p| CoefficientRecord { eps: p.eps, alpha: p.alpha, coeffs: p.coeffs.clone() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSummary {
    pub candidate: CandidateRecord,
    pub points: usize,
    /// `d alpha / d eps` at the bifurcation point, closed formula.
    pub direction_derivative: f64,
    /// Central-difference slope of the traced branch, when both sides exist.
    pub finite_difference_slope: Option<f64>,
    pub transcritical: bool,
    pub max_abs_l: f64,
    /// Smallest `u_i / U` over all points and nodes.
    pub positivity_margin: f64,
    pub max_newton_residual: f64,
    pub max_abs_pohozaev: Option<f64>,
    pub truncated: bool,
    pub truncation: Option<String>,
    /// Every point meets the configured Newton and multiplier tolerances.
    pub accepted: bool,
}

impl BranchSummary {
    pub fn new(branch: &Branch, accepted: bool) -> Self {
        let pohozaev: Option<Vec<f64>> = branch.points.iter().map(|p| p.pohozaev_residual.map(f64::abs)).collect();
        Self {
            candidate: CandidateRecord::from(&branch.candidate),
            points: branch.points.len(),
            direction_derivative: branch.direction_derivative,
            finite_difference_slope: branch.central_slope(),
            transcritical: branch.transcritical(),
            max_abs_l: branch.max_abs_l(),
            positivity_margin: branch.min_positivity(),
            max_newton_residual: branch.points.iter().fold(0.0, |a, p| a.max(p.newton_residual)),
            max_abs_pohozaev: pohozaev.map(|v| v.into_iter().fold(0.0, f64::max)),
            truncated: branch.is_truncated(),
            truncation: branch.describe_truncation(),
            accepted,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
