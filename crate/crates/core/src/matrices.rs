//! Symmetric coupling matrices with unit row sums, one-parameter paths of
//! them, eigencurve tracking and detection of bifurcation parameters.
//!
//! Every admissible matrix fixes `1 = (1, ..., 1)` with eigenvalue 1. The
//! tracker works on the orthogonal complement of `1`, so the constant curve
//! `Lambda_1 = 1` is exact and crossings with it never confuse the matching.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result, Violation};
use crate::math::{abs, sqrt};
use crate::spectrum::eigenvalue;

/// Tolerance for symmetry and row sums of a coupling matrix.
pub const MATRIX_TOL: f64 = 1e-10;
/// Required overlap between matched eigenvectors at neighbouring grid points.
pub const MATCH_OVERLAP: f64 = 0.9;
/// Target accuracy `|Lambda(alpha) - lambda_n|` of refined crossings.
pub const ROOT_TOL: f64 = 1e-12;
/// Eigenvalues closer than this count as coincident (simplicity flag).
pub const SIMPLICITY_TOL: f64 = 1e-8;
/// Smallest `|eigenvalue|` of an invertible coupling matrix.
pub const INVERTIBILITY_TOL: f64 = 1e-10;
/// Step of the central difference used for non-affine path derivatives.
pub const FD_STEP: f64 = 1e-6;
/// Grid size used by [`find_bifurcation_candidates`].
pub const DEFAULT_GRID_POINTS: usize = 401;

const SIGN_TIE: f64 = 1e-12;
const CLUSTER_TOL: f64 = 1e-9;

/// A validated symmetric `k x k` matrix with unit row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    a: DMatrix<f64>,
}

/// Checks a raw matrix and reports every violated constraint.
pub fn validate(raw: &DMatrix<f64>) -> Result<CouplingMatrix> {
    let (rows, cols) = raw.shape();
    if rows != cols {
        return Err(Error::InvalidMatrix(alloc::vec![Violation::NotSquare { rows, cols }]));
    }
    let k = rows;
    let mut violations = Vec::new();
    if k < 2 {
        violations.push(Violation::TooSmall { k });
    }
    for i in 0..k {
        for j in 0..k {
            if !raw[(i, j)].is_finite() {
                violations.push(Violation::NonFinite { row: i, col: j });
            }
        }
    }
    if !violations.is_empty() {
        return Err(Error::InvalidMatrix(violations));
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let d = raw[(i, j)] - raw[(j, i)];
            if abs(d) > MATRIX_TOL {
                violations.push(Violation::Asymmetric { row: i, col: j, magnitude: d });
            }
        }
    }
    for i in 0..k {
        let sum: f64 = raw.row(i).iter().sum();
        if abs(sum - 1.0) > MATRIX_TOL {
            violations.push(Violation::RowSum { row: i, sum });
        }
    }
    if !violations.is_empty() {
        return Err(Error::InvalidMatrix(violations));
    }
    Ok(CouplingMatrix { a: (raw + raw.transpose()) * 0.5 })
}

impl CouplingMatrix {
    /// Validates a matrix given row by row.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        validate(&matrix_from_rows(rows)?)
    }

    /// The `k x k` identity (decoupled system).
    pub fn identity(k: usize) -> Result<Self> {
        validate(&DMatrix::identity(k, k))
    }

    pub fn k(&self) -> usize {
        self.a.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k()).map(|i| self.a.row(i).iter().copied().collect()).collect()
    }

    /// Inverse, or [`Error::SingularMatrix`] if some `|eigenvalue| <= INVERTIBILITY_TOL`.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let smallest = smallest_abs_eigenvalue(&self.a)?;
        if smallest <= INVERTIBILITY_TOL {
            return Err(Error::SingularMatrix { smallest_eigenvalue: smallest });
        }
        self.a
            .clone()
            .lu()
            .try_inverse()
            .ok_or(Error::SingularMatrix { smallest_eigenvalue: smallest })
    }
}

/// Builds a dense matrix from rows of equal length.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::InvalidMatrix(alloc::vec![Violation::NotSquare {
            rows: nrows,
            cols: bad.len()
        }]));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Orthogonal (Frobenius) projection of a square matrix onto the admissible
/// set: symmetrize, then remove the row-sum defect `r = S 1 - 1` by
/// `S - (r 1^T + 1 r^T)/k + (1^T r)/k^2 11^T`.
pub fn project_admissible(raw: &DMatrix<f64>) -> Result<CouplingMatrix> {
    if raw.nrows() != raw.ncols() {
        return Err(Error::InvalidMatrix(alloc::vec![Violation::NotSquare {
            rows: raw.nrows(),
            cols: raw.ncols()
        }]));
    }
    let k = raw.nrows();
    let kf = k as f64;
    let s = (raw + raw.transpose()) * 0.5;
    let r: DVector<f64> = DVector::from_fn(k, |i, _| s.row(i).sum() - 1.0);
    let total = r.sum();
    let projected = DMatrix::from_fn(k, k, |i, j| s[(i, j)] - (r[i] + r[j]) / kf + total / (kf * kf));
    validate(&projected)
}

/// Eigenvalues in increasing order with orthonormal eigenvectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i).iter().copied().collect()
    }
}

/// Full symmetric eigendecomposition with the sign convention of [`fix_sign`].
pub fn spectrum_of(a: &CouplingMatrix) -> Result<Spectrum> {
    let (values, vectors) = sorted_eigen(a.matrix())?;
    Ok(Spectrum { values, vectors })
}

fn sorted_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::LinearAlgebra("symmetric eigendecomposition"))?;
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(m.nrows(), m.nrows());
    for (c, &i) in order.iter().enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        fix_sign(&mut v);
        vectors.set_column(c, &DVector::from_vec(v));
    }
    Ok((values, vectors))
}

fn smallest_abs_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::LinearAlgebra("symmetric eigendecomposition"))?;
    Ok(eig.eigenvalues.iter().fold(f64::INFINITY, |acc, v| acc.min(abs(*v))))
}

/// Flips `v` so its largest-magnitude component is positive; among
/// components tied within `1e-12`, the first one decides.
pub fn fix_sign(v: &mut [f64]) {
    let big = v.iter().fold(0.0f64, |acc, x| acc.max(abs(*x)));
    if let Some(lead) = v.iter().find(|x| abs(**x) >= big - SIGN_TIE) {
        if *lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// A C1 family `alpha -> A(alpha)` of admissible matrices.
pub trait MatrixPath {
    fn k(&self) -> usize;
    /// Closed parameter interval `[lo, hi]`.
    fn domain(&self) -> (f64, f64);
    fn matrix(&self, alpha: f64) -> Result<CouplingMatrix>;
    /// `dA/dalpha`, symmetric with zero row sums.
    fn derivative(&self, alpha: f64) -> Result<DMatrix<f64>>;
}

/// `A(alpha) = A0 + alpha A1` with `A0` admissible and `A1` symmetric with
/// zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePath {
    a0: CouplingMatrix,
    a1: DMatrix<f64>,
    domain: (f64, f64),
}

impl AffinePath {
    pub fn new(a0: &DMatrix<f64>, a1: &DMatrix<f64>, domain: (f64, f64)) -> Result<Self> {
        let a0 = validate(a0)?;
        let k = a0.k();
        if a1.shape() != (k, k) {
            return Err(Error::Precondition(alloc::format!(
                "direction matrix is {}x{}, base matrix is {k}x{k}",
                a1.nrows(),
                a1.ncols()
            )));
        }
        // A0 + A1 must be admissible exactly when A1 is symmetric with zero row sums
        validate(&(a0.matrix() + a1))?;
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain { what: "path domain width", value: hi - lo });
        }
        Ok(Self { a0, a1: (a1 + a1.transpose()) * 0.5, domain })
    }

    /// Same path on a different parameter interval.
    pub fn with_domain(&self, lo: f64, hi: f64) -> Result<Self> {
        Self::new(self.a0.matrix(), &self.a1, (lo, hi))
    }

    pub fn base(&self) -> &CouplingMatrix {
        &self.a0
    }

    pub fn direction(&self) -> &DMatrix<f64> {
        &self.a1
    }
}

impl MatrixPath for AffinePath {
    fn k(&self) -> usize {
        self.a0.k()
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn matrix(&self, alpha: f64) -> Result<CouplingMatrix> {
        if !alpha.is_finite() {
            return Err(Error::Domain { what: "path parameter alpha", value: alpha });
        }
        validate(&(self.a0.matrix() + &self.a1 * alpha))
    }

    fn derivative(&self, _alpha: f64) -> Result<DMatrix<f64>> {
        Ok(self.a1.clone())
    }
}

/// A path given by a closure; the derivative is a central difference with
/// step [`FD_STEP`].
pub struct FnPath<F> {
    k: usize,
    f: F,
    domain: (f64, f64),
}

impl<F: Fn(f64) -> DMatrix<f64>> FnPath<F> {
    pub fn new(k: usize, domain: (f64, f64), f: F) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain { what: "path domain width", value: hi - lo });
        }
        let path = Self { k, f, domain };
        path.matrix(lo)?;
        Ok(path)
    }
}

impl<F: Fn(f64) -> DMatrix<f64>> MatrixPath for FnPath<F> {
    fn k(&self) -> usize {
        self.k
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn matrix(&self, alpha: f64) -> Result<CouplingMatrix> {
        let m = validate(&(self.f)(alpha))?;
        if m.k() != self.k {
            return Err(Error::Precondition(alloc::format!(
                "path produced a {}x{} matrix, expected k={}",
                m.k(),
                m.k(),
                self.k
            )));
        }
        Ok(m)
    }

    fn derivative(&self, alpha: f64) -> Result<DMatrix<f64>> {
        let plus = self.matrix(alpha + FD_STEP)?;
        let minus = self.matrix(alpha - FD_STEP)?;
        Ok((plus.matrix() - minus.matrix()) / (2.0 * FD_STEP))
    }
}

/// The two-component family `[[alpha, 1-alpha], [1-alpha, alpha]]` on `[0, 5]`,
/// with eigenvalues `1` and `2 alpha - 1`.
pub fn k2_path() -> AffinePath {
    let a0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let a1 = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    AffinePath::new(&a0, &a1, (0.0, 5.0)).expect("k2 path is admissible")
}

/// Closed-form crossing `(2n^2 + 2Nn - 2n + N^2) / (N(N+2))` of the
/// two-component family, where `2 alpha - 1 = lambda_n`.
pub fn k2_alpha_bar(n: usize, dim: u32) -> f64 {
    let (n, d) = (n as f64, f64::from(dim));
    (2.0 * n * n + 2.0 * d * n - 2.0 * n + d * d) / (d * (d + 2.0))
}

/// A three-component path whose moving eigenvector `e = (2, -1, -1)/sqrt 6`
/// has `sum e_j^3 != 0`:
/// `A(alpha) = 11^T/3 - 1/2 f f^T + alpha e e^T` with `f = (0, 1, -1)/sqrt 2`.
/// Its eigenvalues are `1`, `-1/2` and `alpha`; the domain is `[0, 3]`.
pub fn k3_demo_path() -> AffinePath {
    let e = [2.0 / sqrt(6.0), -1.0 / sqrt(6.0), -1.0 / sqrt(6.0)];
    let f = [0.0, 1.0 / sqrt(2.0), -1.0 / sqrt(2.0)];
    let a0 = DMatrix::from_fn(3, 3, |i, j| 1.0 / 3.0 - 0.5 * f[i] * f[j]);
    let a1 = DMatrix::from_fn(3, 3, |i, j| e[i] * e[j]);
    AffinePath::new(&a0, &a1, (0.0, 3.0)).expect("k3 demo path is admissible")
}

/// `e . A' e`, equal to the slope of the eigencurve through a simple eigenvalue.
pub fn transversality(a_prime: &DMatrix<f64>, e: &[f64]) -> f64 {
    let v = DVector::from_column_slice(e);
    v.dot(&(a_prime * &v))
}

/// One eigenvalue followed continuously along an `alpha` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCurve {
    /// 1-based; index 1 is the constant curve `Lambda = 1` on `(1, ..., 1)`.
    pub index: usize,
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    /// Unit eigenvectors, signs chosen continuously along the grid.
    pub vectors: Vec<Vec<f64>>,
}

/// Orthonormal basis of the complement of `(1, ..., 1)`, as columns.
fn complement_basis(k: usize) -> DMatrix<f64> {
    // Householder reflection sending e_1 to 1/sqrt(k); its other columns
    // span the complement.
    let kf = k as f64;
    let mut v = DVector::from_element(k, 1.0 / sqrt(kf));
    v[0] -= 1.0;
    let vv = v.dot(&v);
    let h = DMatrix::identity(k, k) - &v * v.transpose() * (2.0 / vv);
    h.columns(1, k - 1).into_owned()
}

/// Eigen-data of `A(alpha)` restricted to the complement of `1`:
/// ascending values and unit vectors in `R^k`.
fn reduced_eigen(path: &dyn MatrixPath, basis: &DMatrix<f64>, alpha: f64) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let a = path.matrix(alpha)?;
    let b = basis.transpose() * a.matrix() * basis;
    let b = (&b + b.transpose()) * 0.5;
    let (values, vecs) = sorted_eigen(&b)?;
    let vectors = (0..values.len()).map(|i| basis * vecs.column(i)).collect();
    Ok((values, vectors))
}

/// Re-expresses eigenvectors of clustered eigenvalues through the previous
/// vectors, so exact crossings on the grid keep a continuous choice.
fn align_clusters(values: &[f64], vectors: &mut [DVector<f64>], previous: &[DVector<f64>]) {
    let n = values.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && abs(values[end] - values[end - 1]) <= CLUSTER_TOL * (1.0 + abs(values[end])) {
            end += 1;
        }
        if end - start > 1 {
            let q: Vec<DVector<f64>> = vectors[start..end].to_vec();
            let project = |v: &DVector<f64>| -> DVector<f64> {
                q.iter().fold(DVector::zeros(v.len()), |acc, b| acc + b * b.dot(v))
            };
            // previous vectors with the largest weight in this cluster
            let mut ranked: Vec<(f64, usize)> =
                previous.iter().enumerate().map(|(i, v)| (project(v).norm(), i)).collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut chosen: Vec<DVector<f64>> = Vec::new();
            for &(_, i) in ranked.iter().take(end - start) {
                let mut v = project(&previous[i]);
                for c in &chosen {
                    let d = c.dot(&v);
                    v -= c * d;
                }
                let norm = v.norm();
                if norm > 1e-6 {
                    chosen.push(v / norm);
                }
            }
            if chosen.len() == end - start {
                vectors[start..end].clone_from_slice(&chosen);
            }
        }
        start = end;
    }
}

/// Follows all `k` eigencurves across `grid` by eigenvector overlap.
///
/// Curve 1 is `Lambda = 1` on `(1, ..., 1)/sqrt(k)` exactly. Curves
/// `2..=k` are numbered by increasing eigenvalue at `grid[0]`. If the
/// best overlap between neighbouring grid points is `<= 0.9`, the error
/// names the interval so the caller can refine the grid there.
pub fn track_eigencurves(path: &dyn MatrixPath, grid: &[f64]) -> Result<Vec<EigenCurve>> {
    if grid.len() < 2 {
        return Err(Error::Precondition("eigencurve grid needs at least 2 points".into()));
    }
    let (lo, hi) = path.domain();
    let span = hi - lo;
    if let Some(&bad) = grid.iter().find(|a| !(**a >= lo - 1e-12 * span && **a <= hi + 1e-12 * span)) {
        return Err(Error::Domain { what: "grid point outside the path domain", value: bad });
    }
    let k = path.k();
    let basis = complement_basis(k);
    let ones = alloc::vec![1.0 / sqrt(k as f64); k];

    let mut curves: Vec<EigenCurve> = (0..k)
        .map(|i| EigenCurve {
            index: i + 1,
            alphas: Vec::with_capacity(grid.len()),
            values: Vec::with_capacity(grid.len()),
            vectors: Vec::with_capacity(grid.len()),
        })
        .collect();

    let mut previous: Vec<DVector<f64>> = Vec::new();
    for (step, &alpha) in grid.iter().enumerate() {
        let (values, mut vectors) = reduced_eigen(path, &basis, alpha)?;
        let assignment: Vec<usize> = if step == 0 {
            // a degenerate cluster at the first point has no history; orient
            // it by the (analytic) continuation one grid point ahead
            let (_, ahead) = reduced_eigen(path, &basis, grid[1])?;
            align_clusters(&values, &mut vectors, &ahead);
            for v in &mut vectors {
                let mut s: Vec<f64> = v.iter().copied().collect();
                fix_sign(&mut s);
                *v = DVector::from_vec(s);
            }
            (0..k - 1).collect()
        } else {
            align_clusters(&values, &mut vectors, &previous);
            let mut taken = alloc::vec![false; k - 1];
            let mut assignment = Vec::with_capacity(k - 1);
            for prev in &previous {
                let (best, overlap) = vectors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !taken[*j])
                    .map(|(j, v)| (j, abs(v.dot(prev))))
                    .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
                if best == usize::MAX || overlap <= MATCH_OVERLAP {
                    return Err(Error::MatchingAmbiguity {
                        alpha_lo: grid[step - 1],
                        alpha_hi: alpha,
                        overlap: overlap.max(0.0),
                    });
                }
                taken[best] = true;
                if vectors[best].dot(prev) < 0.0 {
                    vectors[best] = -vectors[best].clone();
                }
                assignment.push(best);
            }
            assignment
        };

        curves[0].alphas.push(alpha);
        curves[0].values.push(1.0);
        curves[0].vectors.push(ones.clone());
        let mut next = Vec::with_capacity(k - 1);
        for (c, &j) in assignment.iter().enumerate() {
            let curve = &mut curves[c + 1];
            curve.alphas.push(alpha);
            curve.values.push(values[j]);
            curve.vectors.push(vectors[j].iter().copied().collect());
            next.push(vectors[j].clone());
        }
        previous = next;
    }
    Ok(curves)
}

/// A parameter value where a non-constant eigencurve meets some `lambda_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationCandidate {
    pub alpha_bar: f64,
    /// 1-based eigencurve index, always `>= 2`.
    pub i_bar: usize,
    pub n: usize,
    pub lambda_n: f64,
    /// Unit eigenvector of `A(alpha_bar)` for `lambda_n`, sign per [`fix_sign`].
    pub eigenvector: Vec<f64>,
    /// `e . A'(alpha_bar) e`.
    pub transversality: f64,
    /// No other non-constant eigencurve is within `1e-8` of any `lambda_m`.
    pub simple: bool,
    /// Smallest `|eigenvalue|` of `A(alpha_bar)` exceeds `1e-10`.
    pub invertible: bool,
    /// `n <= 1`: such crossings produce no new solutions.
    pub trivial: bool,
}

impl BifurcationCandidate {
    /// True when every hypothesis of the bifurcation theorem holds.
    pub fn certified(&self) -> bool {
        !self.trivial && self.simple && self.invertible && abs(self.transversality) > SIMPLICITY_TOL
    }

    /// `Ok` when the candidate can start a branch, else the reason.
    pub fn require_certified(&self) -> Result<()> {
        if self.trivial {
            return Err(Error::NotCertified(alloc::format!(
                "level n={} <= 1 gives no new solutions",
                self.n
            )));
        }
        if !self.simple {
            return Err(Error::NotCertified(
                "another eigencurve meets the spectrum at the same parameter (several crossings at once)".into(),
            ));
        }
        if !self.invertible {
            return Err(Error::NotCertified("A(alpha_bar) is singular".into()));
        }
        if abs(self.transversality) <= SIMPLICITY_TOL {
            return Err(Error::ZeroTransversality { value: self.transversality });
        }
        Ok(())
    }
}

/// Uniform grid of `points` samples over the path domain.
pub fn uniform_grid(path: &dyn MatrixPath, points: usize) -> Vec<f64> {
    let (lo, hi) = path.domain();
    let last = points.max(2) - 1;
    (0..=last).map(|i| if i == last { hi } else { lo + (hi - lo) * i as f64 / last as f64 }).collect()
}

/// [`find_bifurcation_candidates_on`] with a uniform grid of
/// [`DEFAULT_GRID_POINTS`] points.
pub fn find_bifurcation_candidates(path: &dyn MatrixPath, dim: u32, n_max: usize) -> Result<Vec<BifurcationCandidate>> {
    find_bifurcation_candidates_on(path, &uniform_grid(path, DEFAULT_GRID_POINTS), dim, n_max)
}

/// Every crossing `Lambda_i(alpha) = lambda_n`, `i >= 2`, `0 <= n <= n_max`,
/// on the grid's span, refined to `|Lambda - lambda_n| < 1e-12`.
///
/// Crossings are found as sign changes (or exact zeros) of
/// `Lambda_i - lambda_n` between grid points, so a curve that only touches
/// `lambda_n` without crossing is not reported. Results are sorted by
/// `alpha_bar`, then `n`.
pub fn find_bifurcation_candidates_on(
    path: &dyn MatrixPath,
    grid: &[f64],
    dim: u32,
    n_max: usize,
) -> Result<Vec<BifurcationCandidate>> {
    crate::quadrature::check_dim(dim)?;
    if n_max < 2 {
        return Err(Error::Precondition(alloc::format!("n_max={n_max} is below 2")));
    }
    let curves = track_eigencurves(path, grid)?;
    let basis = complement_basis(path.k());
    let mut found = Vec::new();
    for curve in curves.iter().skip(1) {
        for n in 0..=n_max {
            let target = eigenvalue(n, dim);
            let g: Vec<f64> = curve.values.iter().map(|v| v - target).collect();
            for j in 0..g.len() {
                let zero = |i: usize| abs(g[i]) < ROOT_TOL;
                let hit = if zero(j) {
                    // an isolated zero on the grid; a curve lying on lambda_n
                    // over a whole stretch does not cross it
                    let isolated = (j == 0 || !zero(j - 1)) && (j + 1 == g.len() || !zero(j + 1));
                    isolated.then_some(curve.alphas[j])
                } else if j + 1 < g.len() && abs(g[j + 1]) >= ROOT_TOL && g[j] * g[j + 1] < 0.0 {
                    let reference = DVector::from_column_slice(&curve.vectors[j]);
                    Some(refine_root(path, &basis, &reference, target, curve.alphas[j], curve.alphas[j + 1])?)
                } else {
                    None
                };
                if let Some(alpha_bar) = hit {
                    let reference = DVector::from_column_slice(&curve.vectors[j]);
                    found.push(certify(path, &basis, &reference, curve.index, n, dim, alpha_bar)?);
                }
            }
        }
    }
    found.sort_by(|a, b| a.alpha_bar.total_cmp(&b.alpha_bar).then(a.n.cmp(&b.n)));
    Ok(found)
}

/// Eigenvalue/vector of the curve through `reference` at `alpha`.
fn matched(
    path: &dyn MatrixPath,
    basis: &DMatrix<f64>,
    reference: &DVector<f64>,
    alpha: f64,
) -> Result<(f64, DVector<f64>, Vec<f64>)> {
    let (values, vectors) = reduced_eigen(path, basis, alpha)?;
    let (best, _) = vectors
        .iter()
        .enumerate()
        .map(|(j, v)| (j, abs(v.dot(reference))))
        .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok((values[best], vectors[best].clone(), values))
}

/// Bisection down to a short bracket, then safeguarded secant steps.
fn refine_root(
    path: &dyn MatrixPath,
    basis: &DMatrix<f64>,
    reference: &DVector<f64>,
    target: f64,
    mut a: f64,
    mut b: f64,
) -> Result<f64> {
    let eval = |x: f64| -> Result<f64> { Ok(matched(path, basis, reference, x)?.0 - target) };
    let mut fa = eval(a)?;
    let mut fb = eval(b)?;
    let width = b - a;
    let mut iterations = 0;
    while b - a > 1e-6 * width.max(1e-300) && iterations < 200 {
        let m = 0.5 * (a + b);
        let fm = eval(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
        iterations += 1;
    }
    for _ in 0..100 {
        let (x, fx) = if abs(fa) < abs(fb) { (a, fa) } else { (b, fb) };
        if abs(fx) < 0.1 * ROOT_TOL || b - a <= 4.0 * f64::EPSILON * abs(x).max(1.0) {
            return Ok(x);
        }
        let mut s = b - fb * (b - a) / (fb - fa);
        if !(s > a && s < b) {
            s = 0.5 * (a + b);
        }
        let fs = eval(s)?;
        if fs == 0.0 {
            return Ok(s);
        }
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
    }
    let (x, fx) = if abs(fa) < abs(fb) { (a, fa) } else { (b, fb) };
    if abs(fx) < ROOT_TOL {
        Ok(x)
    } else {
        Err(Error::NoConvergence { what: "crossing refinement", iterations: 300, last_update: b - a })
    }
}

fn certify(
    path: &dyn MatrixPath,
    basis: &DMatrix<f64>,
    reference: &DVector<f64>,
    index: usize,
    n: usize,
    dim: u32,
    alpha_bar: f64,
) -> Result<BifurcationCandidate> {
    let (_, vector, values) = matched(path, basis, reference, alpha_bar)?;
    let mut e: Vec<f64> = vector.iter().copied().collect();
    let norm = sqrt(e.iter().map(|x| x * x).sum());
    e.iter_mut().for_each(|x| *x /= norm);
    fix_sign(&mut e);
    let lambda_n = eigenvalue(n, dim);
    let own = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, v)| if abs(v - lambda_n) < acc.1 { (j, abs(v - lambda_n)) } else { acc })
        .0;
    let simple = values
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != own)
        .all(|(_, &v)| !hits_spectrum(v, dim));
    let a = path.matrix(alpha_bar)?;
    let invertible = smallest_abs_eigenvalue(a.matrix())? > INVERTIBILITY_TOL;
    let transversality = transversality(&path.derivative(alpha_bar)?, &e);
    Ok(BifurcationCandidate {
        alpha_bar,
        i_bar: index,
        n,
        lambda_n,
        eigenvector: e,
        transversality,
        simple,
        invertible,
        trivial: n <= 1,
    })
}

/// Whether `v` lies within [`SIMPLICITY_TOL`] of some `lambda_m`, `m >= 0`.
fn hits_spectrum(v: f64, dim: u32) -> bool {
    let mut m = 0;
    loop {
        let l = eigenvalue(m, dim);
        if abs(v - l) <= SIMPLICITY_TOL {
            return true;
        }
        if l > v + 1.0 {
            return false;
        }
        m += 1;
    }
}
