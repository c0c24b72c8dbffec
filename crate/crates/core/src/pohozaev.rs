//! Numerical Pohozaev identity for forced systems
//! `-Delta u_i = sum_j a_ij u_j^p + H_i`:
//!
//! ```text
//! sum_ij (A^-1)_ij int_{R^N} H_i (x . grad u_j + (N-2)/2 u_j) dx = 0
//! ```
//!
//! together with the inverse-matrix sum `sum_ij (A^-1)_ij = k` of admissible
//! matrices.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, powi};
use crate::matrices::CouplingMatrix;
use crate::quadrature::{RadialGrid, DEFAULT_RADIAL_ORDER};
use crate::spectrum::{nu0, RadialField};

/// Radii at which forcing terms are probed for decay.
const TAIL_RADII: (f64, f64) = (1e3, 1e4);

/// Result of [`pohozaev_value`].
#[derive(Debug, Clone, PartialEq)]
pub struct PohozaevReport {
    /// `sum_ij (A^-1)_ij int H_i (r u_j' + (N-2)/2 u_j)`.
    pub value: f64,
    /// `(i, j, (A^-1)_ij int H_i (r u_j' + (N-2)/2 u_j))` for every pair.
    pub contributions: Vec<(usize, usize, f64)>,
    pub matrix_inverse_sum: f64,
    /// `|value(order) - value(order/2)|`; zero when only one grid was used.
    pub truncation_estimate: f64,
}

/// `sum_ij (A^-1)_ij`, equal to `k` for every invertible admissible matrix.
pub fn inverse_sum(a: &CouplingMatrix) -> Result<f64> {
    Ok(a.inverse()?.iter().sum())
}

/// Pohozaev value from samples on `grid`: `u[j]`, `du[j]` and `h[i]` hold
/// values of `u_j`, `u_j'` and `H_i` at every grid radius.
pub fn pohozaev_on_grid(
    a: &CouplingMatrix,
    grid: &RadialGrid,
    u: &[Vec<f64>],
    du: &[Vec<f64>],
    h: &[Vec<f64>],
) -> Result<PohozaevReport> {
    let k = a.k();
    if u.len() != k || du.len() != k || h.len() != k {
        return Err(Error::Precondition(alloc::format!(
            "expected {k} components, got u={}, u'={}, H={}",
            u.len(),
            du.len(),
            h.len()
        )));
    }
    if let Some(bad) = u.iter().chain(du).chain(h).find(|v| v.len() != grid.len()) {
        return Err(Error::Precondition(alloc::format!(
            "sample vector has {} entries, grid has {}",
            bad.len(),
            grid.len()
        )));
    }
    let inv = a.inverse()?;
    let nu = nu0(grid.dim());
    let radii = grid.radii();
    // dilation derivatives D_j = r u_j' + nu0 u_j
    let dil: Vec<Vec<f64>> = (0..k)
        .map(|j| (0..grid.len()).map(|q| radii[q] * du[j][q] + nu * u[j][q]).collect())
        .collect();
    let mut contributions = Vec::with_capacity(k * k);
    let mut value = 0.0;
    for i in 0..k {
        for j in 0..k {
            let prod: Vec<f64> = h[i].iter().zip(&dil[j]).map(|(a, b)| a * b).collect();
            let integral = grid.integrate_values(&prod);
            if !integral.is_finite() {
                return Err(Error::NonFinite { what: "pohozaev integrand", radius: f64::NAN });
            }
            let c = inv[(i, j)] * integral;
            contributions.push((i, j, c));
            value += c;
        }
    }
    Ok(PohozaevReport {
        value,
        contributions,
        matrix_inverse_sum: inv.iter().sum(),
        truncation_estimate: 0.0,
    })
}

/// Pohozaev value for radial `u_j` (with analytic derivatives) and forcing
/// terms `H_i`, integrated on the default radial grid. A second evaluation
/// on a grid of half the order gives the truncation estimate.
///
/// Each `H_i` is probed at `r = 1e3` and `1e4`: if `r^{N+2} H_i(r)^2` does
/// not decrease, `|x| H_i` is not square integrable and the call fails.
pub fn pohozaev_value(
    a: &CouplingMatrix,
    u: &[&dyn RadialField],
    h: &[&dyn Fn(f64) -> f64],
    dim: u32,
) -> Result<PohozaevReport> {
    let e = dim as i32 + 2;
    for (i, hi) in h.iter().enumerate() {
        let (r1, r2) = TAIL_RADII;
        let t1 = powi(r1, e) * hi(r1) * hi(r1);
        let t2 = powi(r2, e) * hi(r2) * hi(r2);
        if !t1.is_finite() || !t2.is_finite() {
            return Err(Error::NonIntegrable { component: i, tail_ratio: f64::INFINITY });
        }
        if t2 > 0.0 && t2 >= t1 {
            return Err(Error::NonIntegrable { component: i, tail_ratio: t2 / t1 });
        }
    }
    let eval = |order: usize| -> Result<PohozaevReport> {
        let grid = RadialGrid::new(dim, order)?;
        let sample = |f: &dyn Fn(f64) -> f64| -> Result<Vec<f64>> {
            grid.radii()
                .iter()
                .map(|&r| {
                    let v = f(r);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::NonFinite { what: "pohozaev input", radius: r })
                    }
                })
                .collect()
        };
        let uv = u.iter().map(|f| sample(&|r| f.value(r))).collect::<Result<Vec<_>>>()?;
        let dv = u.iter().map(|f| sample(&|r| f.derivative(r))).collect::<Result<Vec<_>>>()?;
        let hv = h.iter().map(|f| sample(*f)).collect::<Result<Vec<_>>>()?;
        pohozaev_on_grid(a, &grid, &uv, &dv, &hv)
    };
    let fine = eval(DEFAULT_RADIAL_ORDER)?;
    let coarse = eval(DEFAULT_RADIAL_ORDER / 2)?;
    Ok(PohozaevReport { truncation_estimate: abs(fine.value - coarse.value), ..fine })
}
