//! Radial Galerkin discretization of the system
//!
//! ```text
//! -Delta u_i = sum_j a_ij(alpha) u_j^p + L N(N+2)/(1+|x|^2)^2 W,   p = (N+2)/(N-2)
//! ```
//!
//! and continuation of the branches that leave the trivial solution
//! `u = (U, ..., U)` at a bifurcation candidate.
//!
//! Each component is written `u_i = U + sum_m c_{i,m} B_m` in the basis
//! `B_m = W_m / |W_m|_{D}` (radial eigenfunctions, normalized in the
//! gradient pairing), so the linear part is diagonal:
//! `int grad B_l . grad B_m = delta_lm` and `int w B_l B_m = delta_lm / lambda_m`.
//! Testing the equation against `B_m` gives the residual rows
//!
//! ```text
//! R_{i,m} = c_{i,m} - sum_j a_ij int (u_j^p - U^p) B_m - L kappa delta_{m,1}
//! ```
//!
//! with `kappa = int w W B_1`. Two scalar rows close the system: the
//! constraint `sum_i c_{i,1} = 0` (no component along `(1,...,1) W`), and
//! the amplitude `sum_i e_i c_{i,n} = eps`. The unknowns are `c`, `alpha`
//! and the Lagrange multiplier `L`.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math::{abs, powf, sqrt};
use crate::matrices::{BifurcationCandidate, CouplingMatrix, MatrixPath};
use crate::pohozaev::pohozaev_on_grid;
use crate::quadrature::{check_dim, RadialGrid, DEFAULT_RADIAL_ORDER};
use crate::spectrum::{
    bubble, bubble_derivative, critical_power, weight, DilationMode, EigenPair, RadialField,
};

/// Newton stops once the max-norm residual is below this.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// Step halvings allowed to keep every iterate inside `u_i > U/2`.
pub const MAX_HALVINGS: usize = 30;
/// Accepted branch points must have `|L|` below this.
pub const LAGRANGE_TOL: f64 = 1e-8;
/// Required orthonormality of the discrete basis.
pub const GRAM_TOL: f64 = 1e-10;
/// Positivity guard: iterates must keep `u_i / U` above this.
pub const POSITIVITY_FLOOR: f64 = 0.5;
/// Continuation steps are halved at most this often before the branch is cut.
pub const MAX_STEP_HALVINGS: usize = 10;
/// `|d alpha / d eps (0)|` above this counts as transcritical.
pub const TRANSCRITICAL_TOL: f64 = 1e-6;

/// Quadrature order used by [`GalerkinSystem::new`]: enough nodes to
/// integrate `u^p B_m` exactly when `p` is an integer, and never below
/// the default radial order.
pub fn default_quadrature_order(dim: u32, trunc: usize) -> usize {
    let p = critical_power(dim);
    let degree = (libm::ceil(p) as usize + 1) * trunc + 2;
    DEFAULT_RADIAL_ORDER.max(degree.div_ceil(2) + 2)
}

/// Discretization data shared by every solve: grid, basis samples, bubble.
#[derive(Debug, Clone)]
pub struct GalerkinSystem {
    dim: u32,
    k: usize,
    trunc: usize,
    p: f64,
    grid: RadialGrid,
    modes: Vec<EigenPair>,
    basis: Vec<Vec<f64>>,
    basis_d: Vec<Vec<f64>>,
    bubble: Vec<f64>,
    bubble_d: Vec<f64>,
    bubble_pow: Vec<f64>,
    weights: Vec<f64>,
    dilation: Vec<f64>,
    kappa: f64,
    gram_deviation: f64,
}

impl GalerkinSystem {
    /// [`assemble`] with [`default_quadrature_order`].
    pub fn new(dim: u32, k: usize, trunc: usize) -> Result<Self> {
        Self::assemble(dim, k, trunc, default_quadrature_order(dim, trunc))
    }

    /// Builds the basis `B_0..=B_trunc` on a grid of `order` nodes and checks
    /// `int grad B_l . grad B_m = delta_lm` and
    /// `lambda_m int w B_l B_m = delta_lm` to [`GRAM_TOL`].
    pub fn assemble(dim: u32, k: usize, trunc: usize, order: usize) -> Result<Self> {
        check_dim(dim)?;
        if k < 2 {
            return Err(Error::Precondition(alloc::format!("system size k={k} is below 2")));
        }
        if trunc < 2 {
            return Err(Error::Precondition(alloc::format!("truncation M={trunc} is below 2")));
        }
        let grid = RadialGrid::new(dim, order)?;
        let modes: Vec<EigenPair> = (0..=trunc)
            .map(|m| {
                let pair = EigenPair::new(m, 0, dim)?;
                Ok(pair.with_scale(pair.scale() / sqrt(pair.lambda())))
            })
            .collect::<Result<_>>()?;
        let basis: Vec<Vec<f64>> = modes.iter().map(|b| grid.sample(|r| b.value(r))).collect();
        let basis_d: Vec<Vec<f64>> = modes.iter().map(|b| grid.sample(|r| b.derivative(r))).collect();
        let p = critical_power(dim);
        let bubble_v = grid.sample(|r| bubble(dim, r));
        let bubble_d = grid.sample(|r| bubble_derivative(dim, r));
        let bubble_pow = bubble_v.iter().map(|u| powf(*u, p)).collect();
        let weights = grid.sample(|r| weight(dim, r));
        let mode = DilationMode::new(dim)?;
        let dilation = grid.sample(|r| mode.value(r));

        let mut deviation: f64 = 0.0;
        for l in 0..=trunc {
            for m in 0..=l {
                let target = if l == m { 1.0 } else { 0.0 };
                let grad: f64 = (0..grid.len()).map(|q| grid.volumes()[q] * basis_d[l][q] * basis_d[m][q]).sum();
                let mass: f64 = (0..grid.len())
                    .map(|q| grid.volumes()[q] * weights[q] * basis[l][q] * basis[m][q])
                    .sum();
                deviation = deviation.max(abs(grad - target)).max(abs(modes[m].lambda() * mass - target));
            }
        }
        if !(deviation <= GRAM_TOL) {
            return Err(Error::Gram { deviation });
        }
        let kappa = (0..grid.len())
            .map(|q| grid.volumes()[q] * weights[q] * dilation[q] * basis[1][q])
            .sum();
        Ok(Self {
            dim,
            k,
            trunc,
            p,
            grid,
            modes,
            basis,
            basis_d,
            bubble: bubble_v,
            bubble_d,
            bubble_pow,
            weights,
            dilation,
            kappa,
            gram_deviation: deviation,
        })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Highest basis index `M`; there are `M + 1` modes per component.
    pub fn truncation(&self) -> usize {
        self.trunc
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// Basis function `B_m` as a radial field.
    pub fn mode(&self, m: usize) -> &EigenPair {
        &self.modes[m]
    }

    /// `int w W B_1`, the Lagrange-multiplier coupling.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Largest Gram-matrix deviation found during assembly.
    pub fn gram_deviation(&self) -> f64 {
        self.gram_deviation
    }

    /// Number of Galerkin coefficients, `k (M + 1)`.
    pub fn n_coeffs(&self) -> usize {
        self.k * (self.trunc + 1)
    }

    fn idx(&self, i: usize, m: usize) -> usize {
        i * (self.trunc + 1) + m
    }

    fn check_coeffs(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.n_coeffs() {
            return Err(Error::Precondition(alloc::format!(
                "expected {} coefficients, got {}",
                self.n_coeffs(),
                coeffs.len()
            )));
        }
        Ok(())
    }

    fn check_matrix(&self, a: &CouplingMatrix) -> Result<()> {
        if a.k() != self.k {
            return Err(Error::Precondition(alloc::format!(
                "matrix is {}x{}, system has k={}",
                a.k(),
                a.k(),
                self.k
            )));
        }
        Ok(())
    }

    /// `u_i` at the grid nodes.
    pub fn component_values(&self, coeffs: &[f64]) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|i| {
                let mut u = self.bubble.clone();
                for m in 0..=self.trunc {
                    let c = coeffs[self.idx(i, m)];
                    if c != 0.0 {
                        u.iter_mut().zip(&self.basis[m]).for_each(|(v, b)| *v += c * b);
                    }
                }
                u
            })
            .collect()
    }

    /// `u_i'` at the grid nodes.
    pub fn component_derivatives(&self, coeffs: &[f64]) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|i| {
                let mut u = self.bubble_d.clone();
                for m in 0..=self.trunc {
                    let c = coeffs[self.idx(i, m)];
                    u.iter_mut().zip(&self.basis_d[m]).for_each(|(v, b)| *v += c * b);
                }
                u
            })
            .collect()
    }

    /// `min_{i, nodes} u_i / U` and where it is attained.
    fn positivity(&self, u: &[Vec<f64>]) -> (f64, usize, f64) {
        let mut worst = (f64::INFINITY, 0, 0.0);
        for (i, ui) in u.iter().enumerate() {
            for (q, v) in ui.iter().enumerate() {
                let ratio = v / self.bubble[q];
                if !(ratio >= worst.0) {
                    worst = (ratio, i, self.grid.radii()[q]);
                }
            }
        }
        worst
    }

    /// `int (u_j^p - U^p) B_m` for every `j, m`.
    fn nonlinear_moments(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let vol = self.grid.volumes();
        u.iter()
            .map(|uj| {
                let diff: Vec<f64> = uj
                    .iter()
                    .zip(&self.bubble_pow)
                    .zip(vol)
                    .map(|((v, up), dv)| (powf(*v, self.p) - up) * dv)
                    .collect();
                self.basis.iter().map(|b| b.iter().zip(&diff).map(|(x, y)| x * y).sum()).collect()
            })
            .collect()
    }

    /// Galerkin rows `R_{i,m}` for the coefficient vector `coeffs`
    /// (component-major, `k (M+1)` entries) and multiplier `L`.
    ///
    /// Fails with [`Error::Positivity`] if some `u_i <= 0` at a node, where
    /// the power nonlinearity is undefined.
    pub fn residual(&self, a: &CouplingMatrix, coeffs: &[f64], l: f64) -> Result<Vec<f64>> {
        self.check_coeffs(coeffs)?;
        self.check_matrix(a)?;
        let u = self.component_values(coeffs);
        let (ratio, component, radius) = self.positivity(&u);
        if !(ratio > 0.0) {
            return Err(Error::Positivity { component, radius, ratio });
        }
        Ok(self.rows(a, coeffs, l, &self.nonlinear_moments(&u)))
    }

    fn rows(&self, a: &CouplingMatrix, coeffs: &[f64], l: f64, moments: &[Vec<f64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_coeffs());
        for i in 0..self.k {
            for m in 0..=self.trunc {
                let coupling: f64 = (0..self.k).map(|j| a.get(i, j) * moments[j][m]).sum();
                let lagrange = if m == 1 { l * self.kappa } else { 0.0 };
                out.push(coeffs[self.idx(i, m)] - coupling - lagrange);
            }
        }
        out
    }

    /// `d R / d c`, a `k(M+1)` square matrix.
    pub fn jacobian(&self, a: &CouplingMatrix, coeffs: &[f64]) -> Result<DMatrix<f64>> {
        self.check_coeffs(coeffs)?;
        self.check_matrix(a)?;
        let u = self.component_values(coeffs);
        let (ratio, component, radius) = self.positivity(&u);
        if !(ratio > 0.0) {
            return Err(Error::Positivity { component, radius, ratio });
        }
        Ok(self.coeff_jacobian(a, &u))
    }

    fn coeff_jacobian(&self, a: &CouplingMatrix, u: &[Vec<f64>]) -> DMatrix<f64> {
        let size = self.trunc + 1;
        let vol = self.grid.volumes();
        // G_j[l][m] = int p u_j^{p-1} B_l B_m
        let gram: Vec<DMatrix<f64>> = u
            .iter()
            .map(|uj| {
                let d: Vec<f64> =
                    uj.iter().zip(vol).map(|(v, dv)| self.p * powf(*v, self.p - 1.0) * dv).collect();
                let mut g = DMatrix::zeros(size, size);
                for l in 0..size {
                    let bl: Vec<f64> = self.basis[l].iter().zip(&d).map(|(b, x)| b * x).collect();
                    for m in 0..=l {
                        let v: f64 = bl.iter().zip(&self.basis[m]).map(|(x, y)| x * y).sum();
                        g[(l, m)] = v;
                        g[(m, l)] = v;
                    }
                }
                g
            })
            .collect();
        let n = self.n_coeffs();
        let mut jac = DMatrix::identity(n, n);
        for i in 0..self.k {
            for j in 0..self.k {
                let aij = a.get(i, j);
                if aij == 0.0 {
                    continue;
                }
                for m in 0..size {
                    for l in 0..size {
                        jac[(self.idx(i, m), self.idx(j, l))] -= aij * gram[j][(l, m)];
                    }
                }
            }
        }
        jac
    }

    /// `d alpha / d eps` at `eps = 0` along the branch of `candidate`:
    ///
    /// ```text
    /// -1/2 * (-Lambda sum_j e_j^3 int U_2 B_n^3) / (-(e . A' e) int w B_n^2)
    /// ```
    ///
    /// with `U_2 = p (p - 1) U^{p-2} = 4(N+2)/(N-2)^2 U^{(6-N)/(N-2)}` and
    /// `Lambda = lambda_n`.
    pub fn bifurcation_direction(&self, path: &dyn MatrixPath, candidate: &BifurcationCandidate) -> Result<f64> {
        self.check_candidate(path, candidate)?;
        let n = candidate.n;
        let e = &candidate.eigenvector;
        let a_prime = path.derivative(candidate.alpha_bar)?;
        let ev = DVector::from_column_slice(e);
        let transversal = ev.dot(&(&a_prime * &ev));
        if abs(transversal) <= crate::matrices::SIMPLICITY_TOL {
            return Err(Error::ZeroTransversality { value: transversal });
        }
        let vol = self.grid.volumes();
        let b = &self.basis[n];
        let p = self.p;
        let cubic: f64 = (0..self.grid.len())
            .map(|q| vol[q] * p * (p - 1.0) * powf(self.bubble[q], p - 2.0) * b[q] * b[q] * b[q])
            .sum();
        let mass: f64 = (0..self.grid.len()).map(|q| vol[q] * self.weights[q] * b[q] * b[q]).sum();
        let sum_cubes: f64 = e.iter().map(|x| x * x * x).sum();
        let numerator = -candidate.lambda_n * sum_cubes * cubic;
        let denominator = -transversal * mass;
        Ok(-0.5 * numerator / denominator)
    }

    fn check_candidate(&self, path: &dyn MatrixPath, candidate: &BifurcationCandidate) -> Result<()> {
        candidate.require_certified()?;
        if path.k() != self.k || candidate.eigenvector.len() != self.k {
            return Err(Error::Precondition(alloc::format!(
                "candidate/path size {} does not match system k={}",
                candidate.eigenvector.len(),
                self.k
            )));
        }
        if candidate.n + 4 > self.trunc {
            return Err(Error::Precondition(alloc::format!(
                "truncation M={} must be at least n+4={}",
                self.trunc,
                candidate.n + 4
            )));
        }
        Ok(())
    }

    /// Kernel diagnostics of the linearization at `(alpha_bar, U, ..., U)`.
    pub fn kernel_report(&self, path: &dyn MatrixPath, candidate: &BifurcationCandidate) -> Result<KernelReport> {
        self.check_candidate(path, candidate)?;
        let a = path.matrix(candidate.alpha_bar)?;
        let zero = alloc::vec![0.0; self.n_coeffs()];
        let jac = self.jacobian(&a, &zero)?;
        let sv = jac.clone().singular_values();
        let largest = sv.max();
        let nullity = sv.iter().filter(|s| **s <= 1e-8 * largest).count();

        // The alpha column vanishes at eps = 0; use its eps-derivative
        // d/d eps [-(A' N(u))] = -(A' e)_i int p U^{p-1} B_n B_m instead.
        let problem = Extended::new(self, path, candidate, 0.0)?;
        let x = problem.trivial_state();
        let mut ext = problem.jacobian(&x)?;
        let a_prime = path.derivative(candidate.alpha_bar)?;
        let ev = DVector::from_column_slice(&candidate.eigenvector);
        let ae = &a_prime * ev;
        let col = self.n_coeffs();
        let lam = self.modes[candidate.n].lambda();
        for i in 0..self.k {
            for m in 0..=self.trunc {
                ext[(self.idx(i, m), col)] = if m == candidate.n { -ae[i] / lam } else { 0.0 };
            }
        }
        let svx = ext.singular_values();
        let condition = svx.max() / svx.min();
        Ok(KernelReport { nullity, smallest_singular_values: smallest(&sv, 3), extended_condition: condition })
    }

    /// Solves the extended system at amplitude `eps`, starting from the
    /// first-order prediction `alpha_bar + eps alpha_1`, `c = eps e B_n`.
    /// `eps = 0` returns the trivial solution.
    pub fn solve_extended(
        &self,
        path: &dyn MatrixPath,
        candidate: &BifurcationCandidate,
        eps: f64,
    ) -> Result<BranchPoint> {
        let problem = Extended::new(self, path, candidate, eps)?;
        if eps == 0.0 {
            return problem.point(&problem.trivial_state(), 0);
        }
        let slope = self.bifurcation_direction(path, candidate)?;
        let guess = problem.tangent_guess(eps, slope);
        let (x, iterations) = problem.newton(guess)?;
        problem.point(&x, iterations)
    }

    /// Branch points at `eps = j eps_max / steps` for `j = -steps..=steps`,
    /// each Newton solve warm-started by linear extrapolation from the
    /// previous two points on the same side.
    ///
    /// A failed step is retried with half the increment up to
    /// [`MAX_STEP_HALVINGS`] times; after that, or if an accepted point has
    /// `|L| >= LAGRANGE_TOL`, that side stops and the branch carries the
    /// reason in [`Branch::truncation`].
    pub fn trace_branch(
        &self,
        path: &dyn MatrixPath,
        candidate: &BifurcationCandidate,
        eps_max: f64,
        steps: usize,
    ) -> Result<Branch> {
        if !(eps_max.is_finite() && eps_max > 0.0) {
            return Err(Error::Domain { what: "eps_max", value: eps_max });
        }
        if steps == 0 {
            return Err(Error::Precondition("branch needs at least one step".into()));
        }
        let slope = self.bifurcation_direction(path, candidate)?;
        let origin = Extended::new(self, path, candidate, 0.0)?;
        let trivial = origin.trivial_state();
        let center = origin.point(&trivial, 0)?;
        let mut truncation = None;
        let mut sides: [Vec<BranchPoint>; 2] = [Vec::new(), Vec::new()];
        for (side, sign) in [(0usize, -1.0), (1, 1.0)] {
            let mut history: Vec<(f64, Vec<f64>)> = alloc::vec![(0.0, trivial.clone())];
            'targets: for j in 1..=steps {
                let target = sign * eps_max * j as f64 / steps as f64;
                let mut halvings = 0;
                loop {
                    let (last_eps, last_x) = history.last().expect("history starts at eps = 0").clone();
                    let mut step = target - last_eps;
                    for _ in 0..halvings {
                        step *= 0.5;
                    }
                    let eps = last_eps + step;
                    let problem = Extended::new(self, path, candidate, eps)?;
                    let guess = if history.len() >= 2 {
                        let (e0, x0) = &history[history.len() - 2];
                        let t = (eps - last_eps) / (last_eps - e0);
                        last_x.iter().zip(x0).map(|(b, a)| b + t * (b - a)).collect()
                    } else {
                        problem.tangent_guess(eps, slope)
                    };
                    match problem.newton(guess) {
                        Ok((x, iterations)) => {
                            let pt = problem.point(&x, iterations)?;
                            history.push((eps, x));
                            if (eps - target).abs() <= 1e-14 * eps_max {
                                if abs(pt.l) >= LAGRANGE_TOL {
                                    truncation = Some(BranchTruncation {
                                        eps,
                                        reason: Error::LagrangeMultiplier { value: pt.l },
                                    });
                                    break 'targets;
                                }
                                sides[side].push(pt);
                                continue 'targets;
                            }
                            halvings = 0;
                        }
                        Err(err) => {
                            halvings += 1;
                            if halvings > MAX_STEP_HALVINGS {
                                truncation = Some(BranchTruncation { eps, reason: err });
                                break 'targets;
                            }
                        }
                    }
                }
            }
        }
        let [mut negative, positive] = sides;
        negative.reverse();
        negative.push(center);
        negative.extend(positive);
        Ok(Branch { candidate: candidate.clone(), points: negative, direction_derivative: slope, truncation })
    }
}

fn smallest(values: &DVector<f64>, count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

/// Linearization diagnostics at a bifurcation candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    /// Singular values of `dR/dc` below `1e-8` times the largest.
    pub nullity: usize,
    pub smallest_singular_values: Vec<f64>,
    /// Condition number of the extended Jacobian with the `alpha` column
    /// replaced by its `eps`-derivative (the column itself is zero at
    /// `eps = 0`).
    pub extended_condition: f64,
}

/// One solved point of a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub eps: f64,
    pub alpha: f64,
    /// `coeffs[i][m]`: coefficient of `B_m` in `u_i - U`.
    pub coeffs: Vec<Vec<f64>>,
    /// Lagrange multiplier.
    pub l: f64,
    /// Max-norm of the extended residual at the returned state.
    pub newton_residual: f64,
    pub iterations: usize,
    /// `min_{i, nodes} u_i / U`.
    pub min_u_over_u: f64,
    /// Pohozaev value with forcing `L w W`; `None` if `A(alpha)` is singular.
    pub pohozaev_residual: Option<f64>,
    /// `|u - (1,...,1) U - eps e B_n|_D / |eps|`; zero at `eps = 0`.
    pub phi_norm: f64,
}

/// Why a branch stopped before `eps_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchTruncation {
    /// Amplitude of the failed attempt.
    pub eps: f64,
    pub reason: Error,
}

/// Branch of solutions through a bifurcation candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub candidate: BifurcationCandidate,
    /// Ordered by increasing `eps`; includes the trivial point `eps = 0`.
    pub points: Vec<BranchPoint>,
    /// `d alpha / d eps (0)` from the closed formula.
    pub direction_derivative: f64,
    pub truncation: Option<BranchTruncation>,
}

impl Branch {
    pub fn is_truncated(&self) -> bool {
        self.truncation.is_some()
    }

    /// Central-difference slope `(alpha(h) - alpha(-h)) / 2h` at the smallest
    /// `h` present on both sides, Richardson-extrapolated with `2h`.
    pub fn central_slope(&self) -> Option<f64> {
        let find = |e: f64| self.points.iter().find(|p| abs(p.eps - e) <= 1e-12 * abs(e)).map(|p| p.alpha);
        let h = self.points.iter().filter(|p| p.eps > 0.0).map(|p| p.eps).fold(f64::INFINITY, f64::min);
        if !h.is_finite() {
            return None;
        }
        let d1 = (find(h)? - find(-h)?) / (2.0 * h);
        match (find(2.0 * h), find(-2.0 * h)) {
            (Some(a), Some(b)) => Some((4.0 * d1 - (a - b) / (4.0 * h)) / 3.0),
            _ => Some(d1),
        }
    }

    pub fn max_abs_l(&self) -> f64 {
        self.points.iter().fold(0.0, |acc, p| acc.max(abs(p.l)))
    }

    pub fn min_positivity(&self) -> f64 {
        self.points.iter().fold(f64::INFINITY, |acc, p| acc.min(p.min_u_over_u))
    }

    pub fn transcritical(&self) -> bool {
        abs(self.direction_derivative) > TRANSCRITICAL_TOL
    }

    pub fn describe_truncation(&self) -> Option<String> {
        self.truncation.as_ref().map(|t| alloc::format!("stopped at eps = {}: {}", t.eps, t.reason))
    }
}

/// The square system in `(c, alpha, L)` at fixed amplitude.
struct Extended<'a> {
    sys: &'a GalerkinSystem,
    path: &'a dyn MatrixPath,
    candidate: &'a BifurcationCandidate,
    eps: f64,
}

impl<'a> Extended<'a> {
    fn new(
        sys: &'a GalerkinSystem,
        path: &'a dyn MatrixPath,
        candidate: &'a BifurcationCandidate,
        eps: f64,
    ) -> Result<Self> {
        sys.check_candidate(path, candidate)?;
        if !eps.is_finite() {
            return Err(Error::Domain { what: "branch amplitude eps", value: eps });
        }
        Ok(Self { sys, path, candidate, eps })
    }

    fn size(&self) -> usize {
        self.sys.n_coeffs() + 2
    }

    fn trivial_state(&self) -> Vec<f64> {
        let mut x = alloc::vec![0.0; self.size()];
        x[self.sys.n_coeffs()] = self.candidate.alpha_bar;
        x
    }

    fn tangent_guess(&self, eps: f64, slope: f64) -> Vec<f64> {
        let mut x = self.trivial_state();
        for (i, e) in self.candidate.eigenvector.iter().enumerate() {
            x[self.sys.idx(i, self.candidate.n)] = eps * e;
        }
        x[self.sys.n_coeffs()] += eps * slope;
        x
    }

    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], f64, f64) {
        let nc = self.sys.n_coeffs();
        (&x[..nc], x[nc], x[nc + 1])
    }

    fn residual_with(&self, x: &[f64], u: &[Vec<f64>]) -> Result<Vec<f64>> {
        let (c, alpha, l) = self.split(x);
        let a = self.path.matrix(alpha)?;
        let mut r = self.sys.rows(&a, c, l, &self.sys.nonlinear_moments(u));
        r.push((0..self.sys.k).map(|i| c[self.sys.idx(i, 1)]).sum());
        let amp: f64 = self
            .candidate
            .eigenvector
            .iter()
            .enumerate()
            .map(|(i, e)| e * c[self.sys.idx(i, self.candidate.n)])
            .sum();
        r.push(amp - self.eps);
        Ok(r)
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let u = self.sys.component_values(self.split(x).0);
        let (ratio, component, radius) = self.sys.positivity(&u);
        if !(ratio > 0.0) {
            return Err(Error::Positivity { component, radius, ratio });
        }
        self.residual_with(x, &u)
    }

    fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let sys = self.sys;
        let (c, alpha, _) = self.split(x);
        let u = sys.component_values(c);
        let (ratio, component, radius) = sys.positivity(&u);
        if !(ratio > 0.0) {
            return Err(Error::Positivity { component, radius, ratio });
        }
        let a = self.path.matrix(alpha)?;
        let a_prime = self.path.derivative(alpha)?;
        let moments = sys.nonlinear_moments(&u);
        let nc = sys.n_coeffs();
        let mut jac = DMatrix::zeros(nc + 2, nc + 2);
        jac.view_mut((0, 0), (nc, nc)).copy_from(&sys.coeff_jacobian(&a, &u));
        for i in 0..sys.k {
            for m in 0..=sys.trunc {
                let row = sys.idx(i, m);
                jac[(row, nc)] = -(0..sys.k).map(|j| a_prime[(i, j)] * moments[j][m]).sum::<f64>();
                if m == 1 {
                    jac[(row, nc + 1)] = -sys.kappa;
                }
            }
            jac[(nc, sys.idx(i, 1))] = 1.0;
            jac[(nc + 1, sys.idx(i, self.candidate.n))] = self.candidate.eigenvector[i];
        }
        Ok(jac)
    }

    fn min_ratio(&self, x: &[f64]) -> f64 {
        self.sys.positivity(&self.sys.component_values(self.split(x).0)).0
    }

    /// Newton with analytic Jacobian and step halving to stay in `u > U/2`.
    fn newton(&self, mut x: Vec<f64>) -> Result<(Vec<f64>, usize)> {
        let ratio = self.min_ratio(&x);
        if !(ratio > POSITIVITY_FLOOR) {
            let u = self.sys.component_values(self.split(&x).0);
            let (ratio, component, radius) = self.sys.positivity(&u);
            return Err(Error::Positivity { component, radius, ratio });
        }
        let mut f = self.residual(&x)?;
        let mut norm = max_norm(&f);
        for iteration in 0..NEWTON_MAX_ITER {
            if norm < NEWTON_TOL {
                return Ok((x, iteration));
            }
            let jac = self.jacobian(&x)?;
            let lu = jac.clone().lu();
            let rhs = DVector::from_vec(f.clone());
            let delta = match lu.solve(&rhs) {
                Some(d) if d.iter().all(|v| v.is_finite()) => d,
                _ => {
                    let sv = jac.singular_values();
                    return Err(Error::SingularJacobian { condition: sv.max() / sv.min() });
                }
            };
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a - scale * d).collect();
                let u = self.sys.component_values(self.split(&trial).0);
                let (ratio, component, radius) = self.sys.positivity(&u);
                if ratio > POSITIVITY_FLOOR {
                    accepted = Some((trial, u));
                    break;
                }
                accepted = None;
                scale *= 0.5;
                if scale < powf(0.5, MAX_HALVINGS as f64) {
                    return Err(Error::Positivity { component, radius, ratio });
                }
            }
            let (trial, u) = match accepted {
                Some(t) => t,
                None => {
                    let u = self.sys.component_values(self.split(&x).0);
                    let (ratio, component, radius) = self.sys.positivity(&u);
                    return Err(Error::Positivity { component, radius, ratio });
                }
            };
            x = trial;
            f = self.residual_with(&x, &u)?;
            norm = max_norm(&f);
            if !norm.is_finite() {
                return Err(Error::NewtonDivergence { iterations: iteration + 1, residual: norm });
            }
        }
        if norm < NEWTON_TOL {
            return Ok((x, NEWTON_MAX_ITER));
        }
        Err(Error::NewtonDivergence { iterations: NEWTON_MAX_ITER, residual: norm })
    }

    fn point(&self, x: &[f64], iterations: usize) -> Result<BranchPoint> {
        let sys = self.sys;
        let (c, alpha, l) = self.split(x);
        let u = sys.component_values(c);
        let residual = max_norm(&self.residual_with(x, &u)?);
        let min_ratio = sys.positivity(&u).0;
        let coeffs: Vec<Vec<f64>> = (0..sys.k).map(|i| c[sys.idx(i, 0)..=sys.idx(i, sys.trunc)].to_vec()).collect();
        let phi_norm = if self.eps == 0.0 {
            0.0
        } else {
            let mut acc = 0.0;
            for (i, row) in coeffs.iter().enumerate() {
                for (m, v) in row.iter().enumerate() {
                    let d = if m == self.candidate.n { v - self.eps * self.candidate.eigenvector[i] } else { *v };
                    acc += d * d;
                }
            }
            sqrt(acc) / abs(self.eps)
        };
        let a = self.path.matrix(alpha)?;
        let du = sys.component_derivatives(c);
        let forcing: Vec<f64> = sys.weights.iter().zip(&sys.dilation).map(|(w, d)| l * w * d).collect();
        let h = alloc::vec![forcing; sys.k];
        let pohozaev = match pohozaev_on_grid(&a, &sys.grid, &u, &du, &h) {
            Ok(rep) => Some(rep.value),
            Err(Error::SingularMatrix { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(BranchPoint {
            eps: self.eps,
            alpha,
            coeffs,
            l,
            newton_residual: residual,
            iterations,
            min_u_over_u: min_ratio,
            pohozaev_residual: pohozaev,
            phi_norm,
        })
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| if x.is_nan() { f64::NAN } else { acc.max(abs(*x)) })
}
