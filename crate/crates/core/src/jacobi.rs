//! Jacobi polynomials `P_m^{(beta, gamma)}` orthogonal for the weight
//! `(1 - xi)^beta (1 + xi)^gamma` on `(-1, 1)`.
//!
//! `beta == gamma` is the Gegenbauer (ultraspherical) family, which carries
//! every radial eigenfunction of the linearized bubble problem.

use crate::error::{Error, Result};
use crate::math::abs;

/// Points further than this outside `[-1, 1]` are rejected.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// Exponents of the Jacobi weight `(1 - xi)^beta (1 + xi)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiParams {
    beta: f64,
    gamma: f64,
}

impl JacobiParams {
    /// Both exponents must be finite and `> -1` so the weight is integrable.
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        for (what, v) in [("jacobi exponent beta", beta), ("jacobi exponent gamma", gamma)] {
            if !v.is_finite() || v <= -1.0 {
                return Err(Error::Domain { what, value: v });
            }
        }
        Ok(Self { beta, gamma })
    }

    /// Gegenbauer case `beta == gamma`.
    pub fn symmetric(nu: f64) -> Result<Self> {
        Self::new(nu, nu)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_symmetric(&self) -> bool {
        self.beta == self.gamma
    }

    /// Parameters of the `k`-th derivative family `(beta + k, gamma + k)`.
    pub fn shifted(&self, k: usize) -> Self {
        Self { beta: self.beta + k as f64, gamma: self.gamma + k as f64 }
    }

    /// `P_m(xi)` by the three-term recurrence, without the domain check.
    pub fn value(&self, m: usize, xi: f64) -> f64 {
        let (a, b) = (self.beta, self.gamma);
        if m == 0 {
            return 1.0;
        }
        let mut p_prev = 1.0;
        let mut p = 0.5 * ((a - b) + (a + b + 2.0) * xi);
        for n in 2..=m {
            let nf = n as f64;
            let s = 2.0 * nf + a + b;
            let c1 = 2.0 * nf * (nf + a + b) * (s - 2.0);
            let c2 = (s - 1.0) * (s * (s - 2.0) * xi + a * a - b * b);
            let c3 = 2.0 * (nf + a - 1.0) * (nf + b - 1.0) * s;
            let next = (c2 * p - c3 * p_prev) / c1;
            p_prev = p;
            p = next;
        }
        p
    }

    /// Writes `P_0(xi), ..., P_{out.len()-1}(xi)` into `out`.
    pub fn values_upto(&self, xi: f64, out: &mut [f64]) {
        let (a, b) = (self.beta, self.gamma);
        if out.is_empty() {
            return;
        }
        out[0] = 1.0;
        if out.len() == 1 {
            return;
        }
        out[1] = 0.5 * ((a - b) + (a + b + 2.0) * xi);
        for n in 2..out.len() {
            let nf = n as f64;
            let s = 2.0 * nf + a + b;
            let c1 = 2.0 * nf * (nf + a + b) * (s - 2.0);
            let c2 = (s - 1.0) * (s * (s - 2.0) * xi + a * a - b * b);
            let c3 = 2.0 * (nf + a - 1.0) * (nf + b - 1.0) * s;
            out[n] = (c2 * out[n - 1] - c3 * out[n - 2]) / c1;
        }
    }

    /// `d^k/dxi^k P_m(xi)` through the shifted-family identity
    /// `d/dxi P_m^{(a,b)} = (m+a+b+1)/2 * P_{m-1}^{(a+1,b+1)}`.
    pub fn derivative(&self, m: usize, k: usize, xi: f64) -> f64 {
        if k > m {
            return 0.0;
        }
        let mut scale = 1.0;
        let base = m as f64 + self.beta + self.gamma;
        for j in 1..=k {
            scale *= 0.5 * (base + j as f64);
        }
        scale * self.shifted(k).value(m - k, xi)
    }

    /// `P_m(1) = binom(m + beta, m)`.
    pub fn value_at_one(&self, m: usize) -> f64 {
        crate::math::binom_real(m as f64 + self.beta, m)
    }
}

fn check_domain(xi: f64) -> Result<()> {
    if !xi.is_finite() || abs(xi) > 1.0 + DOMAIN_SLACK {
        return Err(Error::Domain { what: "jacobi argument xi", value: xi });
    }
    Ok(())
}

/// `P_m^{(beta, gamma)}(xi)` for `|xi| <= 1`.
pub fn jacobi_eval(m: usize, params: JacobiParams, xi: f64) -> Result<f64> {
    check_domain(xi)?;
    Ok(params.value(m, xi))
}

/// First derivative of `P_m^{(beta, gamma)}` at `xi`.
pub fn jacobi_deriv(m: usize, params: JacobiParams, xi: f64) -> Result<f64> {
    check_domain(xi)?;
    Ok(params.derivative(m, 1, xi))
}
