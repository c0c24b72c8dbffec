//! Argument parsing and output for the `bubblebif` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Exit, Selector};
use crate::config::{parse_range, ConfigLayer, PathSpec, RunConfig};
use crate::formats::{self, BifurcationReport, BranchSummary, CoefficientDump};
use crate::verify::{self, Hooks};

#[derive(Debug, Parser)]
#[command(name = "bubblebif", version, about = "Bifurcation from the standard bubble for critical-exponent systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues, multiplicities and eigenfunction residuals of the linearization.
    Spectrum(Common),
    /// Parameter values where an eigencurve of the path meets the spectrum.
    Bifurcations(Common),
    /// Trace the radial branch leaving a crossing.
    Branch {
        #[command(flatten)]
        common: Common,
        /// Level n of the crossing to continue.
        #[arg(long)]
        level: Option<usize>,
        /// Continue the crossing closest to this parameter value.
        #[arg(long)]
        alpha_bar: Option<f64>,
        /// Also write the Galerkin coefficients (requires --out).
        #[arg(long)]
        coefficients: bool,
    },
    /// Run the invariant suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Relative error injected into eigenvalues before the ODE check.
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_lambda: f64,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Space dimension N >= 3.
    #[arg(long = "dim", value_name = "N")]
    pub dim: Option<u32>,
    /// Highest eigenvalue level n considered.
    #[arg(long = "nmax")]
    pub n_max: Option<usize>,
    /// Matrix path: `k2`, `k3`, or a JSON file.
    #[arg(long, value_name = "FILE|k2|k3")]
    pub path: Option<PathSpec>,
    /// Restrict the path parameter to LO:HI.
    #[arg(long, value_name = "LO:HI", value_parser = parse_alpha_range, allow_hyphen_values = true)]
    pub alpha_range: Option<(f64, f64)>,
    #[arg(long)]
    pub eps_max: Option<f64>,
    /// Continuation steps on each side of the crossing.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Galerkin truncation M.
    #[arg(long = "trunc", value_name = "M")]
    pub trunc: Option<usize>,
    #[arg(long)]
    pub quad_order: Option<usize>,
    #[arg(long)]
    pub newton_tol: Option<f64>,
    #[arg(long)]
    pub lagrange_tol: Option<f64>,
    #[arg(long)]
    pub root_tol: Option<f64>,
    /// Directory for output files; standard output when absent.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// JSON config file; flags take precedence over it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

fn parse_alpha_range(s: &str) -> Result<(f64, f64), String> {
    parse_range(s).map_err(|e| format!("{e:#}"))
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig> {
        let file = self.config.as_deref().map(ConfigLayer::load).transpose()?;
        let flags = ConfigLayer {
            dim: self.dim,
            n_max: self.n_max,
            path: self.path.clone(),
            alpha_range: self.alpha_range,
            trunc: self.trunc,
            quad_order: self.quad_order,
            eps_max: self.eps_max,
            steps: self.steps,
            newton_tol: self.newton_tol,
            lagrange_tol: self.lagrange_tol,
            root_tol: self.root_tol,
            out: self.out.clone(),
        };
        RunConfig::resolve(file, flags)
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Error as i32 } else { Exit::Success as i32 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(exit) => exit as i32,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            Exit::Error as i32
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let file = dir.join(name);
    fs::write(&file, contents).with_context(|| format!("cannot write {}", file.display()))
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<Exit> {
    match command {
        Command::Spectrum(common) => {
            let cfg = common.resolve()?;
            let rows = commands::spectrum_table(cfg.dim, cfg.n_max, 0.0)?;
            let text = commands::spectrum_csv(&rows)?;
            match &cfg.out {
                Some(dir) => write_file(dir, "spectrum.csv", &text)?,
                None => stdout.write_all(text.as_bytes())?,
            }
            Ok(Exit::Success)
        }
        Command::Bifurcations(common) => {
            let cfg = common.resolve()?;
            let (_, found) = commands::bifurcations(&cfg)?;
            let text = formats::to_json(&BifurcationReport::new(&found))?;
            match &cfg.out {
                Some(dir) => write_file(dir, "bifurcations.json", &text)?,
                None => writeln!(stdout, "{text}")?,
            }
            Ok(commands::bifurcation_exit(&found))
        }
        Command::Branch { common, level, alpha_bar, coefficients } => {
            let cfg = common.resolve()?;
            if coefficients && cfg.out.is_none() {
                bail!("--coefficients needs --out DIR");
            }
            let (sys, branch) = commands::branch(&cfg, Selector { level, alpha_bar })?;
            let mut csv = Vec::new();
            formats::write_branch_csv(&mut csv, &branch.points)?;
            let csv = String::from_utf8(csv)?;
            let accepted = commands::branch_accepted(&cfg, &branch);
            let summary = formats::to_json(&BranchSummary::new(&branch, accepted))?;
            match &cfg.out {
                Some(dir) => {
                    write_file(dir, "branch.csv", &csv)?;
                    write_file(dir, "branch_summary.json", &summary)?;
                    if coefficients {
                        let dump = CoefficientDump::new(sys.dim(), sys.truncation(), &branch.points);
                        write_file(dir, "branch_coefficients.json", &formats::to_json(&dump)?)?;
                    }
                }
                None => {
                    stdout.write_all(csv.as_bytes())?;
                    writeln!(stderr, "{summary}")?;
                }
            }
            if let Some(t) = branch.describe_truncation() {
                writeln!(stderr, "branch truncated: {t}")?;
                return Ok(Exit::Error);
            }
            Ok(if accepted { Exit::Success } else { Exit::Error })
        }
        Command::Verify { common, perturb_lambda } => {
            let cfg = common.resolve()?;
            let report = verify::run(&cfg, Hooks { lambda_perturbation: perturb_lambda });
            let text = formats::to_json(&report)?;
            match &cfg.out {
                Some(dir) => write_file(dir, "verify.json", &text)?,
                None => writeln!(stdout, "{text}")?,
            }
            for c in &report.checks {
                writeln!(stderr, "{:<5} {}: {}", format!("{:?}", c.status).to_lowercase(), c.name, c.detail)?;
            }
            Ok(if report.ok() { Exit::Success } else { Exit::Error })
        }
    }
}
