//! The four subcommands as library functions returning structured data.

use anyhow::{bail, Context, Result};
use bubblebif_core::matrices::spectrum_of;
use bubblebif_core::{
    default_residual_radii, eigenvalue, find_bifurcation_candidates, multiplicity, ode_residual, AffinePath,
    BifurcationCandidate, Branch, EigenPair, GalerkinSystem, MatrixPath, RadialField,
};
use serde::Serialize;

use crate::config::RunConfig;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Error = 1,
    NoFindings = 2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub n: usize,
    pub lambda: f64,
    pub multiplicity: u64,
    /// Sum of the normalized radial profile `W_n` over the residual radii.
    pub checksum: f64,
    /// Largest ODE residual over every harmonic degree `h <= n`.
    pub max_ode_residual: f64,
}

/// Rows `n = 0..=n_max`. `lambda_shift` multiplies the eigenvalue used in
/// the residual check by `1 + lambda_shift` (zero in normal use).
pub fn spectrum_table(dim: u32, n_max: usize, lambda_shift: f64) -> Result<Vec<SpectrumRow>> {
    let radii = default_residual_radii();
    (0..=n_max)
        .map(|n| {
            let radial = EigenPair::new(n, 0, dim)?;
            let checksum = radii.iter().map(|&r| radial.value(r)).sum();
            let mut worst: f64 = 0.0;
            for h in 0..=n {
                let pair = EigenPair::new(n, h, dim)?;
                let pair = pair.with_lambda(pair.lambda() * (1.0 + lambda_shift));
                worst = worst.max(ode_residual(&pair, &radii)?);
            }
            Ok(SpectrumRow {
                n,
                lambda: eigenvalue(n, dim),
                multiplicity: multiplicity(n as u64, dim)?,
                checksum,
                max_ode_residual: worst,
            })
        })
        .collect()
}

pub fn spectrum_csv(rows: &[SpectrumRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn bifurcations(cfg: &RunConfig) -> Result<(AffinePath, Vec<BifurcationCandidate>)> {
    let path = cfg.load_path()?;
    let found = find_bifurcation_candidates(&path, cfg.dim, cfg.n_max)
        .with_context(|| format!("eigencurve analysis of path {}", cfg.path))?;
    Ok((path, found))
}

pub fn bifurcation_exit(found: &[BifurcationCandidate]) -> Exit {
    if found.iter().any(BifurcationCandidate::certified) {
        Exit::Success
    } else {
        Exit::NoFindings
    }
}

/// Which crossing a branch starts from.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Selector {
    pub level: Option<usize>,
    pub alpha_bar: Option<f64>,
}

/// Without a selector: the first certified crossing. Otherwise the crossing
/// closest to `alpha_bar` among those at `level`, certified or not, so that
/// the caller gets the reason if it cannot be continued.
pub fn select(found: &[BifurcationCandidate], sel: Selector) -> Result<BifurcationCandidate> {
    if sel.level.is_none() && sel.alpha_bar.is_none() {
        return found
            .iter()
            .find(|c| c.certified())
            .cloned()
            .context("no certified bifurcation candidate on this path");
    }
    let pool: Vec<&BifurcationCandidate> =
        found.iter().filter(|c| sel.level.is_none_or(|n| c.n == n)).collect();
    let target = sel.alpha_bar;
    let best = pool.into_iter().min_by(|a, b| {
        let da = target.map_or(0.0, |t| (a.alpha_bar - t).abs());
        let db = target.map_or(0.0, |t| (b.alpha_bar - t).abs());
        da.total_cmp(&db)
    });
    match best {
        Some(c) => Ok(c.clone()),
        None => bail!("no bifurcation candidate matches the selection {sel:?}"),
    }
}

pub fn galerkin_system(cfg: &RunConfig, k: usize) -> Result<GalerkinSystem> {
    Ok(match cfg.quad_order {
        Some(order) => GalerkinSystem::assemble(cfg.dim, k, cfg.trunc, order)?,
        None => GalerkinSystem::new(cfg.dim, k, cfg.trunc)?,
    })
}

pub fn branch(cfg: &RunConfig, sel: Selector) -> Result<(GalerkinSystem, Branch)> {
    let (path, found) = bifurcations(cfg)?;
    let cand = select(&found, sel)?;
    cand.require_certified().context("cannot continue from this crossing")?;
    let sys = galerkin_system(cfg, path.k())?;
    let branch = sys.trace_branch(&path, &cand, cfg.eps_max, cfg.steps)?;
    Ok((sys, branch))
}

/// True when every point meets the configured Newton and multiplier
/// tolerances and the branch was not cut short.
pub fn branch_accepted(cfg: &RunConfig, branch: &Branch) -> bool {
    !branch.is_truncated()
        && branch.points.iter().all(|p| p.newton_residual < cfg.newton_tol && p.l.abs() < cfg.lagrange_tol)
}

/// `|Lambda(alpha_bar) - lambda_n|` minimized over the eigenvalues of `A(alpha_bar)`.
pub fn crossing_defect(path: &dyn MatrixPath, cand: &BifurcationCandidate) -> Result<f64> {
    let a = path.matrix(cand.alpha_bar)?;
    let spec = spectrum_of(&a)?;
    Ok(spec.values.iter().map(|v| (v - cand.lambda_n).abs()).fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ConfigLayer, PathSpec};

    #[test]
    fn spectrum_rows_for_n3() {
        let rows = spectrum_table(3, 2, 0.0).unwrap();
        let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
        for (got, want) in lambdas.iter().zip([0.2, 1.0, 7.0 / 3.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(rows.iter().map(|r| r.multiplicity).collect::<Vec<_>>(), vec![1, 4, 9]);
        assert!(rows.iter().all(|r| r.max_ode_residual < 1e-9));
        let n4 = spectrum_table(4, 2, 0.0).unwrap();
        for (got, want) in n4.iter().map(|r| r.lambda).zip([1.0 / 3.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn perturbed_lambda_is_detected() {
        let rows = spectrum_table(4, 3, 1e-6).unwrap();
        assert!(rows.iter().any(|r| r.max_ode_residual > 1e-9));
    }

    #[test]
    fn k2_candidates_and_exit_codes() {
        let cfg = RunConfig::default();
        let (_, found) = bifurcations(&cfg).unwrap();
        let certified: Vec<f64> = found.iter().filter(|c| c.certified()).map(|c| c.alpha_bar).collect();
        assert_eq!(certified.len(), 2);
        assert!((certified[0] - 1.5).abs() < 1e-12 && (certified[1] - 13.0 / 6.0).abs() < 1e-12);
        assert_eq!(bifurcation_exit(&found), Exit::Success);
        let empty = RunConfig { alpha_range: Some((3.0, 3.5)), ..cfg };
        assert_eq!(bifurcation_exit(&bifurcations(&empty).unwrap().1), Exit::NoFindings);
    }

    #[test]
    fn selection_rules() {
        let (_, found) = bifurcations(&RunConfig::default()).unwrap();
        assert_eq!(select(&found, Selector::default()).unwrap().n, 2);
        assert_eq!(select(&found, Selector { level: Some(3), alpha_bar: None }).unwrap().n, 3);
        let near = select(&found, Selector { level: None, alpha_bar: Some(2.1) }).unwrap();
        assert!((near.alpha_bar - 13.0 / 6.0).abs() < 1e-12);
        let trivial = select(&found, Selector { level: Some(1), alpha_bar: None }).unwrap();
        assert!(trivial.trivial);
        assert!(select(&found, Selector { level: Some(9), alpha_bar: None }).is_err());
    }

    #[test]
    fn trivial_selection_is_refused() {
        let cfg = RunConfig::default();
        let err = branch(&cfg, Selector { level: Some(1), alpha_bar: None }).unwrap_err();
        assert!(format!("{err:#}").contains("n=1 <= 1"), "{err:#}");
    }

    #[test]
    fn k3_branch_is_transcritical() {
        let cfg = RunConfig::resolve(
            None,
            ConfigLayer { path: Some(PathSpec::K3), n_max: Some(2), eps_max: Some(0.02), steps: Some(4), ..Default::default() },
        )
        .unwrap();
        let (_, b) = branch(&cfg, Selector::default()).unwrap();
        assert!(b.transcritical());
        assert!(branch_accepted(&cfg, &b));
    }
}
