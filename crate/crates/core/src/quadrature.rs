//! Gauss-Jacobi rules and integration of radial functions over R^N.
//!
//! Radial integrals use the compactifying substitution
//! `xi = (1 - r^2) / (1 + r^2)`, under which
//!
//! ```text
//! int_{R^N} f(|x|) dx = omega_N int_{-1}^{1} f(r(xi)) (1-xi)^{nu} (1+xi)^{-nu-2} dxi,
//! nu = (N-2)/2.
//! ```
//!
//! The rule is built for the weight `(1-xi)^{nu} (1+xi)^{nu-1}`. Mass-type
//! pairings of bubble-like functions, gradient pairings and `|grad U|^2` all
//! become polynomials against that weight and are integrated exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jacobi::JacobiParams;
use crate::math::{abs, cos, exp, lgamma, ln, powf, sin, sphere_area, tan, PI};

/// Newton tolerance on the node angle `|dtheta|`. One further step follows,
/// since rounding in the recurrence keeps updates at a few ulps.
pub const NODE_TOL: f64 = 1e-13;
/// Iteration cap per node.
pub const NODE_MAX_ITER: usize = 100;
/// Default node count for radial integrals.
pub const DEFAULT_RADIAL_ORDER: usize = 128;

/// Gauss-Jacobi nodes and weights. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    angles: Vec<f64>,
    weights: Vec<f64>,
    params: JacobiParams,
}

impl QuadratureRule {
    /// Nodes in strictly increasing order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `theta_i` with `xi_i = cos(theta_i)`, decreasing.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn params(&self) -> JacobiParams {
        self.params
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `sum_i w_i f(xi_i)`, approximating `int (1-xi)^b (1+xi)^g f(xi) dxi`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Exact weight integral `2^{b+g+1} Gamma(b+1) Gamma(g+1) / Gamma(b+g+2)`.
    pub fn weight_mass(params: JacobiParams) -> f64 {
        let (b, g) = (params.beta(), params.gamma());
        exp((b + g + 1.0) * ln(2.0) + lgamma(b + 1.0) + lgamma(g + 1.0) - lgamma(b + g + 2.0))
    }
}

/// Builds the `order`-point Gauss-Jacobi rule.
///
/// Nodes start as eigenvalues of the Jacobi matrix (Golub-Welsch) and are
/// refined by Newton's method on the three-term recurrence.
pub fn gauss_jacobi(order: usize, params: JacobiParams) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::Precondition("quadrature order must be at least 1".into()));
    }
    let n = order;
    let nf = n as f64;
    let (a, b) = (params.beta(), params.gamma());
    let guesses = golub_welsch_nodes(n, a, b)?;
    let mut roots: Vec<f64> = Vec::with_capacity(n);
    let mut angles: Vec<f64> = Vec::with_capacity(n);
    for z in guesses {
        // Newton in theta with xi = cos(theta) keeps relative accuracy in
        // 1 -+ xi for nodes crowding the endpoints.
        let mut theta = libm::acos(z.clamp(-1.0, 1.0));
        let mut last = f64::INFINITY;
        for _ in 0..NODE_MAX_ITER {
            let c = cos(theta);
            let step = -params.value(n, c) / (sin(theta) * params.derivative(n, 1, c));
            if !step.is_finite() {
                break;
            }
            theta -= step;
            let converged = last <= NODE_TOL;
            last = abs(step);
            if converged {
                break;
            }
        }
        if !(last <= NODE_TOL) || !(theta > 0.0 && theta < PI) {
            return Err(Error::NoConvergence {
                what: "gauss-jacobi node",
                iterations: NODE_MAX_ITER,
                last_update: last,
            });
        }
        roots.push(cos(theta));
        angles.push(theta);
    }

    // Gamma(n+a+1) Gamma(n+b+1) / (Gamma(n+a+b+1) n!) * 2^{a+b+1}
    let log_c = lgamma(nf + a + 1.0) + lgamma(nf + b + 1.0)
        - lgamma(nf + a + b + 1.0)
        - lgamma(nf + 1.0)
        + (a + b + 1.0) * ln(2.0);
    let c = exp(log_c);
    let mut triples: Vec<(f64, f64, f64)> = roots
        .iter()
        .zip(&angles)
        .map(|(&x, &t)| {
            let dp = params.derivative(n, 1, x);
            let s = sin(t);
            (x, t, c / (s * s * dp * dp))
        })
        .collect();
    // exp(log_c) loses ~1e-13 to cancellation among large log-gammas at high
    // order; the total mass has only small arguments, so renormalize to it.
    let total: f64 = triples.iter().map(|t| t.2).sum();
    let fix = QuadratureRule::weight_mass(params) / total;
    for t in &mut triples {
        t.2 *= fix;
    }
    triples.sort_by(|p, q| p.0.total_cmp(&q.0));
    for w in triples.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::NoConvergence {
                what: "gauss-jacobi nodes (duplicate root)",
                iterations: NODE_MAX_ITER,
                last_update: w[1].0 - w[0].0,
            });
        }
    }
    Ok(QuadratureRule {
        nodes: triples.iter().map(|p| p.0).collect(),
        angles: triples.iter().map(|p| p.1).collect(),
        weights: triples.iter().map(|p| p.2).collect(),
        params,
    })
}

/// Eigenvalues of the symmetric tridiagonal matrix of the monic recurrence.
fn golub_welsch_nodes(n: usize, a: f64, b: f64) -> Result<Vec<f64>> {
    let mut jm = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let s = 2.0 * k as f64 + a + b;
        jm[(k, k)] = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if k >= 1 {
            let kf = k as f64;
            let off2 = if k == 1 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b) * (2.0 + a + b) * (3.0 + a + b))
            } else {
                4.0 * kf * (kf + a) * (kf + b) * (kf + a + b) / (s * s * (s + 1.0) * (s - 1.0))
            };
            let off = libm::sqrt(off2);
            jm[(k, k - 1)] = off;
            jm[(k - 1, k)] = off;
        }
    }
    let eig = jm
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::LinearAlgebra("jacobi matrix eigenvalues"))?;
    Ok(eig.eigenvalues.iter().copied().collect())
}

/// `(1 - xi) / (1 + xi)`.
#[inline]
pub fn r_squared_of_xi(xi: f64) -> f64 {
    (1.0 - xi) / (1.0 + xi)
}

/// `(1 - r^2) / (1 + r^2)`.
#[inline]
pub fn xi_of_r(r: f64) -> f64 {
    let r2 = r * r;
    (1.0 - r2) / (1.0 + r2)
}

/// Radial quadrature grid on R^N.
///
/// `integrate` sums `volume_i * f(r_i)` where `volume_i` already contains the
/// sphere area, the Jacobian of the substitution and the Gauss weight.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    dim: u32,
    rule: QuadratureRule,
    radii: Vec<f64>,
    volumes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(dim: u32, order: usize) -> Result<Self> {
        check_dim(dim)?;
        let nu = (f64::from(dim) - 2.0) / 2.0;
        let rule = gauss_jacobi(order, JacobiParams::new(nu, nu - 1.0)?)?;
        let omega = sphere_area(dim);
        let mut radii = Vec::with_capacity(order);
        let mut volumes = Vec::with_capacity(order);
        for (&theta, &w) in rule.angles().iter().zip(rule.weights()) {
            // r = tan(theta/2) and 1 + xi = 2 cos^2(theta/2)
            let half = 0.5 * theta;
            let c = cos(half);
            radii.push(tan(half));
            volumes.push(omega * w * powf(2.0 * c * c, 1.0 - f64::from(dim)));
        }
        Ok(Self { dim, rule, radii, volumes })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Radii `r_i`, decreasing (nodes `xi_i` increase).
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// `int_{R^N} f(|x|) dx`; reports the radius of the first non-finite term.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&r, &v) in self.radii.iter().zip(&self.volumes) {
            let term = v * f(r);
            if !term.is_finite() {
                return Err(Error::NonFinite { what: "radial integrand", radius: r });
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Same as `integrate` for integrand values already sampled on the grid.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.volumes).map(|(f, v)| f * v).sum()
    }

    /// Values of `f` at every radius.
    pub fn sample<F: FnMut(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.radii.iter().copied().map(f).collect()
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.len()]
    }
}

pub(crate) fn check_dim(dim: u32) -> Result<()> {
    if dim < 3 {
        return Err(Error::Precondition(alloc::format!("dimension N={dim} must be at least 3")));
    }
    Ok(())
}

/// `int_{R^N} f(|x|) dx` with the default 128-node radial grid.
pub fn radial_integral<F: FnMut(f64) -> f64>(f: F, dim: u32) -> Result<f64> {
    RadialGrid::new(dim, DEFAULT_RADIAL_ORDER)?.integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rule(order: usize, b: f64, g: f64) -> QuadratureRule {
        gauss_jacobi(order, JacobiParams::new(b, g).unwrap()).unwrap()
    }

    #[test]
    fn legendre_weights_sum_to_two() {
        let q = rule(5, 0.0, 0.0);
        let s: f64 = q.weights().iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn small_symmetric_rule_examples() {
        let q = rule(8, 1.0, 1.0);
        assert!((q.integrate(|x| x * x) - 4.0 / 15.0).abs() < 1e-15);
        assert!(q.integrate(|x| x).abs() < 1e-15);
    }

    #[test]
    fn order_zero_is_rejected() {
        assert!(gauss_jacobi(0, JacobiParams::symmetric(0.0).unwrap()).is_err());
    }

    #[test]
    fn single_node_rule() {
        let q = rule(1, 1.0, 0.0);
        // node at the weighted mean (g - b)/(b + g + 2)
        assert!((q.nodes()[0] + 1.0 / 3.0).abs() < 1e-15);
        assert!((q.weights()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn structure_and_mass_over_many_orders() {
        for &(b, g) in &[(0.0, 0.0), (0.5, -0.5), (0.5, 0.5), (1.0, 0.0), (2.0, 1.0), (10.0, 10.0), (1.5, 0.5)] {
            let p = JacobiParams::new(b, g).unwrap();
            let mass = QuadratureRule::weight_mass(p);
            for order in [1, 2, 3, 7, 16, 33, 64, 128, 200, 256] {
                let q = gauss_jacobi(order, p).unwrap_or_else(|e| panic!("b={b} g={g} order={order}: {e}"));
                assert_eq!(q.order(), order);
                assert!(q.nodes().windows(2).all(|w| w[0] < w[1]));
                assert!(q.nodes().iter().all(|&x| x > -1.0 && x < 1.0));
                assert!(q.weights().iter().all(|&w| w > 0.0));
                let s: f64 = q.weights().iter().sum();
                assert!((s - mass).abs() < 1e-13 * mass, "b={b} g={g} order={order}: {s} vs {mass}");
            }
        }
    }

    /// `int (1-x)^b (1+x)^g x^j dx` by the binomial expansion of `x = (1+x) - 1`
    /// and Beta integrals; second entry is the sum of absolute terms.
    fn weighted_moment(b: f64, g: f64, j: usize) -> (f64, f64) {
        let beta_int = |p: f64, q: f64| {
            exp((p + q + 1.0) * ln(2.0) + lgamma(p + 1.0) + lgamma(q + 1.0) - lgamma(p + q + 2.0))
        };
        (0..=j).fold((0.0, 0.0), |(v, s), t| {
            let sign = if (j - t) % 2 == 0 { 1.0 } else { -1.0 };
            let term = crate::math::binom_real(j as f64, t) * beta_int(b, g + t as f64);
            (v + sign * term, s + term)
        })
    }

    proptest! {
        #[test]
        fn exact_for_degree_2n_minus_1(
            order in 1usize..12,
            bi in 0usize..5,
            seed_coeffs in proptest::collection::vec(-1.0f64..1.0, 24),
        ) {
            let (b, g) = [(0.0, 0.0), (1.0, 1.0), (0.5, -0.5), (1.5, 0.5), (2.0, 3.0)][bi];
            let q = rule(order, b, g);
            let deg = 2 * order - 1;
            let coeffs = &seed_coeffs[..=deg];
            let quad = q.integrate(|x| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c));
            let exact: f64 = coeffs.iter().enumerate().map(|(j, c)| c * weighted_moment(b, g, j).0).sum();
            let scale: f64 = coeffs.iter().enumerate().map(|(j, c)| c.abs() * weighted_moment(b, g, j).1).sum();
            prop_assert!((quad - exact).abs() <= 1e-12 * scale.max(1e-300), "{} vs {}", quad, exact);
        }
    }

    fn bubble(dim: u32, r: f64) -> f64 {
        let n = f64::from(dim);
        powf(n * (n - 2.0), (n - 2.0) / 4.0) / powf(1.0 + r * r, (n - 2.0) / 2.0)
    }

    fn bubble_slope(dim: u32, r: f64) -> f64 {
        let n = f64::from(dim);
        -(n - 2.0) * r * bubble(dim, r) / (1.0 + r * r)
    }

    #[test]
    fn bubble_energy_identity() {
        for dim in 3..=6 {
            let n = f64::from(dim);
            let crit = 2.0 * n / (n - 2.0);
            let pot = radial_integral(|r| powf(bubble(dim, r), crit), dim).unwrap();
            let kin = radial_integral(|r| bubble_slope(dim, r).powi(2), dim).unwrap();
            assert!((pot - kin).abs() < 1e-10 * kin, "N={dim}: {pot} vs {kin}");
        }
    }

    #[test]
    fn gaussian_integral_over_r3() {
        // int exp(-|x|^2) over R^3 = pi^{3/2}
        let v = radial_integral(|r| exp(-r * r), 3).unwrap();
        assert!((v - powf(PI, 1.5)).abs() < 1e-9);
    }

    #[test]
    fn non_finite_integrand_names_radius() {
        let err = radial_integral(|r| if r > 1.0 { f64::NAN } else { 1.0 / (1.0 + r).powi(8) }, 4)
            .unwrap_err();
        match err {
            Error::NonFinite { radius, .. } => assert!(radius > 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn low_dimension_rejected() {
        assert!(RadialGrid::new(2, 16).is_err());
    }
}
