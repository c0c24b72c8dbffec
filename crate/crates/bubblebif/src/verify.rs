//! Invariant suite run by `bubblebif verify`.

use anyhow::Result;
use bubblebif_core::matrices::spectrum_of;
use bubblebif_core::nalgebra::DMatrix;
use bubblebif_core::quadrature::gauss_jacobi;
use bubblebif_core::{
    discrete_eigenvalues, eigenvalue, find_bifurcation_candidates, inverse_sum, k2_alpha_bar, multiplicity,
    project_admissible, AffinePath, CouplingMatrix, Error, JacobiParams, MatrixPath,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::{self, Selector};
use crate::config::{PathSpec, RunConfig};

/// Seed of every randomized check; fixed so reports are reproducible.
pub const SEED: u64 = 0x5eed_b0bb1e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Test hooks; the default injects nothing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Hooks {
    /// Relative error injected into every eigenvalue fed to the ODE residual.
    pub lambda_perturbation: f64,
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn record(&mut self, name: &str, status: Status, detail: String) {
        self.checks.push(Check { name: name.into(), status, detail });
    }

    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.record(name, if ok { Status::Pass } else { Status::Fail }, detail);
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.record(name, Status::Skip, why.into());
    }

    /// Runs `f`; an error is recorded as a failure.
    fn run(&mut self, name: &str, f: impl FnOnce() -> Result<(bool, String)>) {
        match f() {
            Ok((ok, detail)) => self.check(name, ok, detail),
            Err(e) => self.record(name, Status::Fail, format!("error: {e:#}")),
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, j| acc * (n - j) / (j + 1))
}

/// A uniformly drawn symmetric matrix with unit row sums whose eigenvalues
/// all have modulus at least `0.05`.
pub fn random_coupling(rng: &mut ChaCha8Rng, k: usize) -> CouplingMatrix {
    loop {
        let raw = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
        let a = project_admissible(&raw).expect("projection of a finite matrix is admissible");
        let smallest = spectrum_of(&a).expect("symmetric eigen").values.iter().map(|v| v.abs()).fold(f64::MAX, f64::min);
        if smallest >= 0.05 {
            return a;
        }
    }
}

pub fn run(cfg: &RunConfig, hooks: Hooks) -> Report {
    let mut s = Suite { checks: Vec::new() };
    let dim = cfg.dim;

    s.run("spectrum.discrete_eigenvalues", || {
        let mut worst: f64 = 0.0;
        for h in 0..=3 {
            let values = discrete_eigenvalues(dim, h, 60)?;
            for (j, v) in values.iter().take(4).enumerate() {
                let exact = eigenvalue(h + j, dim);
                worst = worst.max((v - exact).abs() / exact);
            }
        }
        Ok((worst < 1e-8, format!("max relative error {worst:.3e} (tolerance 1e-8)")))
    });

    s.run("spectrum.ode_residual", || {
        let rows = commands::spectrum_table(dim, cfg.n_max, hooks.lambda_perturbation)?;
        let worst = rows.iter().fold(0.0f64, |a, r| a.max(r.max_ode_residual));
        Ok((worst < 1e-9, format!("max residual {worst:.3e} over n <= {} (tolerance 1e-9)", cfg.n_max)))
    });

    s.run("spectrum.multiplicity", || {
        // sum over h <= n of the harmonic dimensions telescopes to C(n+N, N) - C(n+N-2, N)
        let d = u64::from(dim);
        let mut bad = Vec::new();
        for n in 0..=cfg.n_max as u64 {
            let expect = binomial(n + d, d) - binomial(n + d - 2, d);
            let got = multiplicity(n, dim)?;
            if got != expect {
                bad.push(format!("n={n}: {got} != {expect}"));
            }
        }
        let ok = bad.is_empty() && multiplicity(1, dim)? == d + 1 && multiplicity(0, dim)? == 1;
        Ok((ok, if bad.is_empty() { "closed form matches".into() } else { bad.join("; ") }))
    });

    s.run("pohozaev.inverse_sum_random", || {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let mut worst: f64 = 0.0;
        for k in 2..=6 {
            for _ in 0..100 {
                let a = random_coupling(&mut rng, k);
                worst = worst.max((inverse_sum(&a)? - k as f64).abs());
            }
        }
        Ok((worst < 1e-9, format!("max |sum A^-1 - k| {worst:.3e} over 500 matrices")))
    });

    s.run("transcritical.cubic_integral", || {
        let rule = gauss_jacobi(8, JacobiParams::new(0.0, 0.0)?)?;
        let v = 27.0 / 64.0 * rule.integrate(|x| (1.0 - x * x) * (5.0 * x * x - 1.0).powi(3));
        Ok(((v - 6.0 / 7.0).abs() < 1e-12, format!("{v:.15} vs 6/7")))
    });

    s.run("nondegeneracy.swap_matrix", || {
        let swap = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let path = AffinePath::new(&swap, &DMatrix::zeros(2, 2), (0.0, 1.0))?;
        let found = find_bifurcation_candidates(&path, dim, 50)?;
        let values = spectrum_of(&path.matrix(0.0)?)?.values;
        let ok = found.is_empty() && (values[0] + 1.0).abs() < 1e-15;
        Ok((ok, format!("{} crossings for n <= 50, Lambda_2 = {}", found.len(), values[0])))
    });

    let loaded = commands::bifurcations(cfg);
    let (path, found) = match loaded {
        Ok(v) => v,
        Err(e) => {
            s.record("bifurcations.scan", Status::Fail, format!("error: {e:#}"));
            return finish(s);
        }
    };
    s.check("bifurcations.scan", true, format!("{} crossings, {} certified", found.len(), found.iter().filter(|c| c.certified()).count()));

    s.run("bifurcations.crossing_defect", || {
        let mut worst: f64 = 0.0;
        for c in &found {
            worst = worst.max(commands::crossing_defect(&path, c)?);
        }
        Ok((worst < cfg.root_tol, format!("max |Lambda - lambda_n| {worst:.3e} (tolerance {:.0e})", cfg.root_tol)))
    });

    if cfg.path == PathSpec::K2 {
        s.run("bifurcations.k2_closed_form", || {
            let mut worst: f64 = 0.0;
            for c in found.iter().filter(|c| c.n >= 2) {
                worst = worst.max((c.alpha_bar - k2_alpha_bar(c.n, dim)).abs());
                worst = worst.max((2.0 * c.alpha_bar - 1.0 - eigenvalue(c.n, dim)).abs());
            }
            let half = found.iter().any(|c| (c.alpha_bar - 0.5).abs() < 1e-12);
            Ok((worst < 1e-10 && !half, format!("max deviation {worst:.3e}")))
        });
    }

    let (lo, hi) = path.domain();
    let probe = found.iter().find(|c| c.certified()).map_or(0.5 * (lo + hi), |c| c.alpha_bar);
    match path.matrix(probe).and_then(|a| inverse_sum(&a).map(|v| (a.k(), v))) {
        Ok((k, v)) => s.check(
            "pohozaev.inverse_sum_path",
            (v - k as f64).abs() < 1e-9,
            format!("sum A^-1 = {v} at alpha = {probe}"),
        ),
        Err(Error::SingularMatrix { smallest_eigenvalue }) => s.skip(
            "pohozaev.inverse_sum_path",
            &format!("A({probe}) is singular (smallest |eigenvalue| {smallest_eigenvalue:.1e})"),
        ),
        Err(e) => s.record("pohozaev.inverse_sum_path", Status::Fail, format!("error: {e}")),
    }

    let branch_checks = [
        "branch.newton",
        "branch.lagrange",
        "branch.positivity",
        "branch.phi_decay",
        "transcritical.direction",
        "pohozaev.branch",
    ];
    let Some(cand) = found.iter().find(|c| c.certified()) else {
        let why = match found.iter().find(|c| !c.trivial) {
            Some(c) if !c.invertible => "A(alpha_bar) is singular at every crossing; no certified candidate",
            _ if found.is_empty() => "no crossing on this path",
            _ => "no certified candidate on this path",
        };
        for name in branch_checks {
            s.skip(name, why);
        }
        return finish(s);
    };

    let traced = commands::branch(cfg, Selector { level: Some(cand.n), alpha_bar: Some(cand.alpha_bar) });
    let (sys, branch) = match traced {
        Ok(v) => v,
        Err(e) => {
            for name in branch_checks {
                s.record(name, Status::Fail, format!("error: {e:#}"));
            }
            return finish(s);
        }
    };
    let pts = &branch.points;
    let worst_res = pts.iter().fold(0.0f64, |a, p| a.max(p.newton_residual));
    s.check(
        "branch.newton",
        !branch.is_truncated() && worst_res < cfg.newton_tol,
        match branch.describe_truncation() {
            Some(t) => t,
            None => format!("{} points, max residual {worst_res:.3e}", pts.len()),
        },
    );
    let max_l = branch.max_abs_l();
    s.check("branch.lagrange", max_l < cfg.lagrange_tol, format!("max |L| {max_l:.3e}"));
    let margin = branch.min_positivity();
    s.check("branch.positivity", margin > 0.0, format!("min u/U {margin:.4}"));

    s.run("branch.phi_decay", || {
        let small = sys.solve_extended(&path, cand, 0.01)?.phi_norm;
        let large = sys.solve_extended(&path, cand, 0.04)?.phi_norm;
        Ok((small < 0.5 * large, format!("phi_norm {small:.3e} at 0.01, {large:.3e} at 0.04")))
    });

    let d = branch.direction_derivative;
    match branch.central_slope() {
        Some(fd) if d.abs() > 1e-6 => s.check(
            "transcritical.direction",
            (fd - d).abs() < 1e-4 * d.abs(),
            format!("formula {d:.10e}, branch slope {fd:.10e}"),
        ),
        Some(fd) => s.check(
            "transcritical.direction",
            d.abs() < 1e-10 && fd.abs() < 1e-6,
            format!("formula {d:.3e}, branch slope {fd:.3e} (expected zero)"),
        ),
        None => s.record("transcritical.direction", Status::Fail, "branch too short for a slope".into()),
    }

    let values: Option<Vec<f64>> = pts.iter().map(|p| p.pohozaev_residual).collect();
    match values {
        Some(v) => {
            let worst = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            s.check("pohozaev.branch", worst < 1e-6, format!("max |Pohozaev| {worst:.3e}"))
        }
        None => s.skip("pohozaev.branch", "A(alpha) is singular at some branch point"),
    }
    finish(s)
}

fn finish(s: Suite) -> Report {
    let count = |st| s.checks.iter().filter(|c| c.status == st).count();
    Report { passed: count(Status::Pass), failed: count(Status::Fail), skipped: count(Status::Skip), checks: s.checks }
}
