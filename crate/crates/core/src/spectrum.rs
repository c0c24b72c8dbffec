//! Spectral data of the linearization at the standard bubble
//!
//! ```text
//! -Delta w = lambda * N(N+2)/(1+|x|^2)^2 * w   on R^N
//! ```
//!
//! in closed form: eigenvalues, multiplicities and the radial profiles built
//! from Gegenbauer polynomials, together with an independent Galerkin solver
//! used to cross-check them.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::jacobi::JacobiParams;
use crate::math::{abs, exp, lgamma, ln, powf, powi, sphere_area, sqrt};
use crate::quadrature::{check_dim, gauss_jacobi, RadialGrid};

/// `(N - 2) / 2`.
pub fn nu0(dim: u32) -> f64 {
    (f64::from(dim) - 2.0) / 2.0
}

/// The critical power `(N + 2) / (N - 2)`.
pub fn critical_power(dim: u32) -> f64 {
    (f64::from(dim) + 2.0) / (f64::from(dim) - 2.0)
}

/// The weight `N(N+2) / (1 + r^2)^2`, equal to `p U^{p-1}`.
pub fn weight(dim: u32, r: f64) -> f64 {
    let n = f64::from(dim);
    let s = 1.0 + r * r;
    n * (n + 2.0) / (s * s)
}

/// A radial function with an analytic first derivative.
pub trait RadialField {
    fn value(&self, r: f64) -> f64;
    fn derivative(&self, r: f64) -> f64;
}

/// The bubble `U_{delta,y}(x) = [N(N-2) delta^2]^{(N-2)/4} / (delta^2 + |x-y|^2)^{(N-2)/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bubble {
    dim: u32,
    delta: f64,
    center: Vec<f64>,
}

impl Bubble {
    pub fn new(dim: u32, delta: f64, center: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Domain { what: "bubble scale delta", value: delta });
        }
        if center.len() != dim as usize {
            return Err(Error::Precondition(alloc::format!(
                "bubble center has {} coordinates, dimension is {dim}",
                center.len()
            )));
        }
        if let Some(&bad) = center.iter().find(|c| !c.is_finite()) {
            return Err(Error::Domain { what: "bubble center coordinate", value: bad });
        }
        Ok(Self { dim, delta, center })
    }

    /// `U = U_{1,0}`.
    pub fn standard(dim: u32) -> Result<Self> {
        Self::new(dim, 1.0, alloc::vec![0.0; dim as usize])
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `U_{delta,y}(x)`.
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.center.len() {
            return Err(Error::Precondition(alloc::format!(
                "point has {} coordinates, dimension is {}",
                x.len(),
                self.dim
            )));
        }
        let d2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(self.value(sqrt(d2)))
    }
}

impl RadialField for Bubble {
    /// Value at distance `r` from the center.
    fn value(&self, r: f64) -> f64 {
        let n = f64::from(self.dim);
        let d2 = self.delta * self.delta;
        powf(n * (n - 2.0) * d2, (n - 2.0) / 4.0) * powf(d2 + r * r, -(n - 2.0) / 2.0)
    }

    fn derivative(&self, r: f64) -> f64 {
        let n = f64::from(self.dim);
        let d2 = self.delta * self.delta;
        -(n - 2.0) * r * self.value(r) / (d2 + r * r)
    }
}

/// Standard bubble `U(r)`.
pub fn bubble(dim: u32, r: f64) -> f64 {
    let n = f64::from(dim);
    powf(n * (n - 2.0), (n - 2.0) / 4.0) * powf(1.0 + r * r, -(n - 2.0) / 2.0)
}

/// `U'(r)` of the standard bubble.
pub fn bubble_derivative(dim: u32, r: f64) -> f64 {
    -(f64::from(dim) - 2.0) * r * bubble(dim, r) / (1.0 + r * r)
}

/// `lambda_n = (2n+N-2)(2n+N) / (N(N+2))`.
///
/// The formula is stated for `N >= 3` but is evaluated for any `N >= 2`;
/// for `N = 2` it reduces to `n(n+1)/2`.
pub fn eigenvalue(n: usize, dim: u32) -> f64 {
    let (n, d) = (n as f64, f64::from(dim));
    (2.0 * n + d - 2.0) * (2.0 * n + d) / (d * (d + 2.0))
}

/// `beta_h = h(N - 2 + h)`, the eigenvalue of the Laplace-Beltrami operator
/// on `S^{N-1}` for harmonics of degree `h`.
pub fn harmonic_eigenvalue(h: u64, dim: u32) -> Result<u64> {
    check_dim(dim)?;
    (u64::from(dim) - 2)
        .checked_add(h)
        .and_then(|s| s.checked_mul(h))
        .ok_or(Error::Overflow { what: "harmonic eigenvalue" })
}

/// Dimension of the degree-`h` spherical harmonics on `S^{N-1}`:
/// `(N+2h-2)(N+h-3)! / ((N-2)! h!)`.
pub fn harmonic_multiplicity(h: u64, dim: u32) -> Result<u64> {
    check_dim(dim)?;
    let overflow = Error::Overflow { what: "multiplicity" };
    let d = u128::from(dim);
    // binom(N+h-3, h), exact at every step of the running product
    let mut binom: u128 = 1;
    for j in 1..=u128::from(h) {
        binom = binom.checked_mul(d - 3 + j).ok_or(overflow.clone())? / j;
    }
    let top = binom.checked_mul(d + 2 * u128::from(h) - 2).ok_or(overflow.clone())?;
    u64::try_from(top / (d - 2)).map_err(|_| overflow)
}

/// Multiplicity of `lambda_n`: the sum of `harmonic_multiplicity(h)` over `h <= n`.
pub fn multiplicity(n: u64, dim: u32) -> Result<u64> {
    let mut total: u64 = 0;
    for h in 0..=n {
        total = total
            .checked_add(harmonic_multiplicity(h, dim)?)
            .ok_or(Error::Overflow { what: "multiplicity" })?;
    }
    Ok(total)
}

/// Radial profile of an eigenfunction at level `n` with harmonic degree `h`:
///
/// ```text
/// psi(r) = s * r^h (1+r^2)^{-nu_h} P_{n-h}^{(nu_h, nu_h)}(xi),  xi = (1-r^2)/(1+r^2)
/// ```
///
/// with `nu_h = h + (N-2)/2`. [`EigenPair::new`] picks `s` so that
/// `int_{R^N} N(N+2)/(1+|x|^2)^2 psi^2 dx = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    n: usize,
    h: usize,
    dim: u32,
    lambda: f64,
    nu: f64,
    beta_h: f64,
    scale: f64,
    params: JacobiParams,
}

impl EigenPair {
    /// Unit weighted-L2 normalization.
    pub fn new(n: usize, h: usize, dim: u32) -> Result<Self> {
        let raw = Self::unnormalized(n, h, dim)?;
        let scale = 1.0 / sqrt(raw.raw_weighted_norm_sq());
        Ok(Self { scale, ..raw })
    }

    /// Scale factor 1, so `psi(0) = P_n(1)` when `h = 0`.
    pub fn unnormalized(n: usize, h: usize, dim: u32) -> Result<Self> {
        check_dim(dim)?;
        if h > n {
            return Err(Error::Precondition(alloc::format!(
                "harmonic index h={h} exceeds level n={n}"
            )));
        }
        let nu = h as f64 + nu0(dim);
        Ok(Self {
            n,
            h,
            dim,
            lambda: eigenvalue(n, dim),
            nu,
            beta_h: harmonic_eigenvalue(h as u64, dim)? as f64,
            scale: 1.0,
            params: JacobiParams::symmetric(nu)?,
        })
    }

    /// Same profile, different eigenvalue. Used to check that residual
    /// diagnostics detect a wrong `lambda`.
    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    /// Same shape with the given scale factor.
    pub fn with_scale(self, scale: f64) -> Self {
        Self { scale, ..self }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn beta_h(&self) -> f64 {
        self.beta_h
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Weighted L2 norm squared of the scale-1 profile, in closed form:
    /// `omega_N 2^{-2 nu} N(N+2)/4 * h_m` with `h_m` the Gegenbauer norm
    /// `2^{2nu+1} Gamma(m+nu+1)^2 / ((2m+2nu+1) m! Gamma(m+2nu+1))`.
    fn raw_weighted_norm_sq(&self) -> f64 {
        let m = (self.n - self.h) as f64;
        let nu = self.nu;
        let d = f64::from(self.dim);
        let log_hm = (2.0 * nu + 1.0) * ln(2.0) + 2.0 * lgamma(m + nu + 1.0)
            - ln(2.0 * m + 2.0 * nu + 1.0)
            - lgamma(m + 1.0)
            - lgamma(m + 2.0 * nu + 1.0);
        sphere_area(self.dim) * d * (d + 2.0) / 4.0 * exp(log_hm - 2.0 * nu * ln(2.0))
    }

    /// `(psi, psi', psi'')` at `r >= 0`.
    pub fn derivatives(&self, r: f64) -> (f64, f64, f64) {
        let h = self.h as i32;
        let nu = self.nu;
        let s = 1.0 + r * r;
        let xi = (1.0 - r * r) / s;
        let m = self.n - self.h;
        let p = self.params.value(m, xi);
        let dp = self.params.derivative(m, 1, xi);
        let ddp = self.params.derivative(m, 2, xi);

        // g = r^h q with q = (1+r^2)^{-nu}
        let q = powf(s, -nu);
        let dq = -2.0 * nu * r * q / s;
        let ddq = -2.0 * nu * q / s + 4.0 * nu * (nu + 1.0) * r * r * q / (s * s);
        let rh = powi(r, h);
        let rh1 = if h >= 1 { f64::from(h) * powi(r, h - 1) } else { 0.0 };
        let rh2 = if h >= 2 { f64::from(h * (h - 1)) * powi(r, h - 2) } else { 0.0 };
        let g = rh * q;
        let dg = rh1 * q + rh * dq;
        let ddg = rh2 * q + 2.0 * rh1 * dq + rh * ddq;

        let dxi = -4.0 * r / (s * s);
        let ddxi = (12.0 * r * r - 4.0) / (s * s * s);

        let c = self.scale;
        let value = c * g * p;
        let d1 = c * (dg * p + g * dp * dxi);
        let d2 = c * (ddg * p + 2.0 * dg * dp * dxi + g * (ddp * dxi * dxi + dp * ddxi));
        (value, d1, d2)
    }
}

impl RadialField for EigenPair {
    fn value(&self, r: f64) -> f64 {
        let s = 1.0 + r * r;
        let xi = (1.0 - r * r) / s;
        self.scale
            * powi(r, self.h as i32)
            * powf(s, -self.nu)
            * self.params.value(self.n - self.h, xi)
    }

    fn derivative(&self, r: f64) -> f64 {
        self.derivatives(r).1
    }
}

/// The dilation mode `W = x . grad U + (N-2)/2 U = d (1 - r^2)/(1 + r^2)^{N/2}`
/// with `d = N^{(N-2)/4} (N-2)^{(N+2)/4} / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationMode {
    dim: u32,
}

impl DilationMode {
    pub fn new(dim: u32) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { dim })
    }

    /// The constant `d`, equal to `W(0)`.
    pub fn amplitude(&self) -> f64 {
        let n = f64::from(self.dim);
        0.5 * powf(n, (n - 2.0) / 4.0) * powf(n - 2.0, (n + 2.0) / 4.0)
    }

    /// `r U'(r) + (N-2)/2 U(r)`, the defining expression.
    pub fn from_bubble(&self, r: f64) -> f64 {
        r * bubble_derivative(self.dim, r) + nu0(self.dim) * bubble(self.dim, r)
    }
}

impl RadialField for DilationMode {
    fn value(&self, r: f64) -> f64 {
        let s = 1.0 + r * r;
        self.amplitude() * (1.0 - r * r) * powf(s, -f64::from(self.dim) / 2.0)
    }

    fn derivative(&self, r: f64) -> f64 {
        let n = f64::from(self.dim);
        let s = 1.0 + r * r;
        // d/dr [(1 - r^2) s^{-N/2}] = -2r s^{-N/2} - N r (1 - r^2) s^{-N/2-1}
        self.amplitude() * powf(s, -n / 2.0) * (-2.0 * r - n * r * (1.0 - r * r) / s)
    }
}

/// A radial function sampled on the nodes of a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGridFunction {
    dim: u32,
    radii: Vec<f64>,
    values: Vec<f64>,
    derivatives: Vec<f64>,
    sup_ratio: f64,
}

impl RadialGridFunction {
    /// Samples `field` and `field'` at every grid radius.
    pub fn sample<F: RadialField + ?Sized>(grid: &RadialGrid, field: &F) -> Result<Self> {
        let dim = grid.dim();
        let mut values = Vec::with_capacity(grid.len());
        let mut derivatives = Vec::with_capacity(grid.len());
        let mut sup_ratio: f64 = 0.0;
        for &r in grid.radii() {
            let (v, d) = (field.value(r), field.derivative(r));
            if !v.is_finite() || !d.is_finite() {
                return Err(Error::NonFinite { what: "radial grid function", radius: r });
            }
            sup_ratio = sup_ratio.max(abs(v) / bubble(dim, r));
            values.push(v);
            derivatives.push(d);
        }
        Ok(Self { dim, radii: grid.radii().to_vec(), values, derivatives, sup_ratio })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivatives
    }

    /// `max_i |f(r_i)| / U(r_i)`, the discrete analogue of the weighted sup norm.
    pub fn sup_ratio(&self) -> f64 {
        self.sup_ratio
    }
}

/// `W_n(r) = (1+r^2)^{-(N-2)/2} P_n^{(nu0, nu0)}(xi)` on the grid, unnormalized.
#[allow(non_snake_case)]
pub fn W_n(n: usize, grid: &RadialGrid) -> Result<RadialGridFunction> {
    RadialGridFunction::sample(grid, &EigenPair::unnormalized(n, 0, grid.dim())?)
}

/// The dilation mode `W` on the grid.
#[allow(non_snake_case)]
pub fn dilation_mode_W(grid: &RadialGrid) -> Result<RadialGridFunction> {
    RadialGridFunction::sample(grid, &DilationMode::new(grid.dim())?)
}

/// Number of log-spaced sample radii used by [`default_residual_radii`].
pub const RESIDUAL_SAMPLES: usize = 40;

/// `RESIDUAL_SAMPLES` log-spaced radii in `[1e-2, 1e2]`.
pub fn default_residual_radii() -> Vec<f64> {
    let (lo, hi) = (ln(1e-2), ln(1e2));
    (0..RESIDUAL_SAMPLES)
        .map(|i| exp(lo + (hi - lo) * i as f64 / (RESIDUAL_SAMPLES - 1) as f64))
        .collect()
}

/// Largest scaled residual of the radial eigen-ODE
///
/// ```text
/// -psi'' - (N-1)/r psi' + beta_h/r^2 psi - lambda N(N+2)/(1+r^2)^2 psi
/// ```
///
/// over `radii`, each divided by `|psi| + |psi'| + |psi''|` at that radius.
pub fn ode_residual(pair: &EigenPair, radii: &[f64]) -> Result<f64> {
    let n = f64::from(pair.dim());
    let mut worst: f64 = 0.0;
    for &r in radii {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Domain { what: "residual sample radius", value: r });
        }
        let (f, d1, d2) = pair.derivatives(r);
        let res = -d2 - (n - 1.0) / r * d1 + pair.beta_h() / (r * r) * f
            - pair.lambda() * weight(pair.dim(), r) * f;
        let scale = abs(f) + abs(d1) + abs(d2);
        if scale > 0.0 {
            worst = worst.max(abs(res) / scale);
        }
    }
    Ok(worst)
}

/// Eigenvalues of the radial problem at harmonic degree `h`, computed by an
/// independent Galerkin discretization.
///
/// The trial space is `r^h (1+r^2)^{-nu_h} q_j(xi)` with
/// `q_j = P_j^{(nu_h - 1, nu_h - 1)}`, `j = 0..=m`. This is a non-orthogonal
/// basis, not the eigenbasis. Stiffness and mass are assembled in `xi` by
/// Gauss-Jacobi quadrature, where both integrands are exact polynomials
/// against `(1 - xi^2)^{nu_h - 1}`. Returns all `m + 1` eigenvalues in
/// increasing order.
pub fn discrete_eigenvalues(dim: u32, h: usize, m: usize) -> Result<Vec<f64>> {
    check_dim(dim)?;
    if m < 10 {
        return Err(Error::Precondition(alloc::format!("truncation M={m} is below 10")));
    }
    let n = f64::from(dim);
    let nu = h as f64 + nu0(dim);
    let beta = harmonic_eigenvalue(h as u64, dim)? as f64;
    let basis = JacobiParams::symmetric(nu - 1.0)?;
    let rule = gauss_jacobi(m + 8, basis)?;
    let size = m + 1;

    let mut stiff = DMatrix::<f64>::zeros(size, size);
    let mut mass = DMatrix::<f64>::zeros(size, size);
    let mut q = alloc::vec![0.0; size];
    let mut dq = alloc::vec![0.0; size];
    let d_params = basis.shifted(1);
    for ((&xi, &theta), &w) in rule.nodes().iter().zip(rule.angles()).zip(rule.weights()) {
        // r = tan(theta/2), 1 + xi = 2 cos^2(theta/2), 1 - xi = 2 sin^2(theta/2)
        let r = libm::tan(0.5 * theta);
        let c = libm::cos(0.5 * theta);
        let sn = libm::sin(0.5 * theta);
        let (opx, omx) = (2.0 * c * c, 2.0 * sn * sn);
        let base_weight = powf(opx * omx, nu - 1.0);

        basis.values_upto(xi, &mut q);
        for (j, slot) in dq.iter_mut().enumerate() {
            *slot = if j == 0 {
                0.0
            } else {
                0.5 * (j as f64 + 2.0 * nu - 1.0) * d_params.value(j - 1, xi)
            };
        }

        // psi_j = 2^{-nu} r^h (1+xi)^nu q_j, and dr/dxi = -1 / (r (1+xi)^2)
        let pref = powf(2.0, -nu) * powi(r, h as i32) * powf(opx, nu);
        // d/dxi log(r^h (1+xi)^nu)
        let dlog = -(h as f64) / (r * r * opx * opx) + nu / opx;
        let k_grad = powi(r, dim as i32) * opx * opx;
        let k_pot = if h == 0 { 0.0 } else { beta * powi(r, dim as i32 - 4) / (opx * opx) };
        let m_fac = n * (n + 2.0) / 4.0 * powi(r, dim as i32 - 2);
        let scale = w / base_weight;
        for i in 0..size {
            let pi = pref * q[i];
            let dpi = pref * (dlog * q[i] + dq[i]);
            for j in 0..=i {
                let pj = pref * q[j];
                let dpj = pref * (dlog * q[j] + dq[j]);
                stiff[(i, j)] += scale * (k_grad * dpi * dpj + k_pot * pi * pj);
                mass[(i, j)] += scale * m_fac * pi * pj;
            }
        }
    }
    for i in 0..size {
        for j in 0..i {
            stiff[(j, i)] = stiff[(i, j)];
            mass[(j, i)] = mass[(i, j)];
        }
    }

    let chol = mass.cholesky().ok_or(Error::LinearAlgebra("mass matrix is not positive definite"))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::LinearAlgebra("cholesky factor is singular"))?;
    let mut reduced = &linv * stiff * linv.transpose();
    reduced = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(reduced, f64::EPSILON, 10_000)
        .ok_or(Error::LinearAlgebra("symmetric eigenvalue iteration"))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}
