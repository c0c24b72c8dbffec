//! Bifurcation of radial solutions from the standard bubble for the
//! critical-exponent system `-Δu_i = Σ_j a_ij u_j^{(N+2)/(N-2)}` on R^N.
#![no_std]
// `!(x <= tol)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod continuation;
pub mod error;
pub mod jacobi;
mod math;
pub mod matrices;
pub mod pohozaev;
pub mod quadrature;
pub mod spectrum;

pub use nalgebra;

pub use error::{Error, Result, Violation};
pub use jacobi::{jacobi_deriv, jacobi_eval, JacobiParams};
pub use quadrature::{gauss_jacobi, radial_integral, QuadratureRule, RadialGrid};
pub use spectrum::{
    default_residual_radii, dilation_mode_W, discrete_eigenvalues, eigenvalue, harmonic_eigenvalue,
    multiplicity, ode_residual, Bubble, DilationMode, EigenPair, RadialField, RadialGridFunction, W_n,
};
pub use matrices::{
    find_bifurcation_candidates, k2_alpha_bar, k2_path, k3_demo_path, project_admissible, spectrum_of,
    track_eigencurves, transversality, validate, AffinePath, BifurcationCandidate, CouplingMatrix,
    EigenCurve, FnPath, MatrixPath,
};
pub use pohozaev::{inverse_sum, pohozaev_on_grid, pohozaev_value, PohozaevReport};
pub use continuation::{
    default_quadrature_order, Branch, BranchPoint, BranchTruncation, GalerkinSystem, KernelReport,
};
