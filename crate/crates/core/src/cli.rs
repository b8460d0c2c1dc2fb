//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::distributions::{sample, GeodesicNormal, Model};
use crate::ellipse::{contour_of_density, SphericalEllipse};
use crate::error::{Error, Result};
use crate::fit::{fit_mle, FitOptions};
use crate::io::{
    csv_string, points_csv, read_json, read_points_file, to_json_string, write_atomic, EllipseJson,
    FitResultJson, ModelJson,
};
use crate::quadrature::DEFAULT_REL_TOL;
use crate::sphere::{complete_frame, UnitVec3};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

/// Largest allowed spread of log-density over a written contour.
pub const CONTOUR_SPREAD_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "geodesic-normal",
    version,
    about = "Geodesic normal distributions and spherical ellipses on S2"
)]
pub struct Cli {
    /// Relative tolerance for normalizing-constant quadrature.
    #[arg(long, global = true, default_value_t = DEFAULT_REL_TOL)]
    pub rel_tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Suppress informational output and warnings.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a model's density at points.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw points from a geodesic normal model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(short = 'n')]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a geodesic normal to points by maximum likelihood.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = FitOptions::default().max_evals)]
        max_evals: usize,
    },
    /// Trace a density contour and write it with its ellipse.
    Contour {
        #[arg(long)]
        model: PathBuf,
        /// Contour level rho: the set where the quadratic form equals rho^2.
        #[arg(long)]
        level: f64,
        #[arg(short = 'n', default_value_t = 256)]
        n: usize,
        /// Trace CSV (t, x1, x2, x3).
        #[arg(long)]
        out: PathBuf,
        /// Ellipse JSON; defaults to the trace path with a .json extension.
        #[arg(long)]
        ellipse_out: Option<PathBuf>,
    },
    /// Evaluate one of the ellipse equations at points.
    EllipseCheck {
        #[arg(long)]
        ellipse: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long, value_enum)]
        eq: Equation,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Equation {
    Focal,
    Center,
    Semiaxis,
    Implicit,
    Single,
}

impl Equation {
    pub fn residual(self, e: &SphericalEllipse, x: &UnitVec3) -> Result<f64> {
        match self {
            Equation::Focal => e.residual_focal(x),
            Equation::Center => e.residual_center_form(x),
            Equation::Semiaxis => e.residual_semiaxis_form(x),
            Equation::Implicit => e.residual_standard_implicit(x),
            Equation::Single => Ok(e.residual_single_curve(x)),
        }
    }
}

enum Failure {
    Error(Error),
    NotConverged(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoConvergence { .. }
        | Error::NonFiniteIntegrand
        | Error::EnvelopeViolation { .. }
        | Error::AntipodalPoint
        | Error::OutOfInjectivityRadius(_)
        | Error::ContourNotConstant(_) => EXIT_NUMERIC,
        _ => EXIT_INPUT,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "{}",
                if line.starts_with("error:") {
                    line.to_string()
                } else {
                    format!("error: {line}")
                }
            );
            return EXIT_INPUT;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
        Err(Failure::NotConverged(evals)) => {
            eprintln!("error: fit did not converge within {evals} objective evaluations");
            EXIT_NOT_CONVERGED
        }
    }
}

fn execute(cli: &Cli) -> std::result::Result<(), Failure> {
    let say = |msg: String| {
        if !cli.quiet {
            println!("{msg}");
        }
    };
    match &cli.command {
        Command::Eval { model, points, out } => {
            let model = load_model(model)?;
            let xs = load_points(points, cli.quiet)?;
            let log_c = model.log_normalizing_constant(cli.rel_tol)?;
            let rows = xs.iter().map(|x| {
                let ld = model.log_density_unnorm(x) - log_c;
                let [a, b, c] = x.to_array();
                [a, b, c, ld, ld.exp()]
            });
            write_atomic(
                out,
                &csv_string(&["x1", "x2", "x3", "log_density", "density"], rows)?,
            )?;
            say(format!("evaluated {} points", xs.len()));
        }
        Command::Sample { model, n, out } => {
            let model = geodesic_normal_of(&load_model(model)?)?;
            let xs = sample(&model, *n, cli.seed)?;
            write_atomic(out, &points_csv(&xs)?)?;
            say(format!("wrote {} points", xs.len()));
        }
        Command::Fit {
            data,
            out,
            max_evals,
        } => {
            let xs = load_points(data, cli.quiet)?;
            let options = FitOptions {
                max_evals: *max_evals,
                rel_tol: cli.rel_tol,
                ..FitOptions::default()
            };
            let result = fit_mle(&xs, &options)?;
            write_atomic(out, &to_json_string(&FitResultJson::from(&result))?)?;
            if !result.converged {
                return Err(Failure::NotConverged(result.n_objective_evals));
            }
            say(format!(
                "log-likelihood {:.10e} after {} evaluations",
                result.log_likelihood, result.n_objective_evals
            ));
        }
        Command::Contour {
            model,
            level,
            n,
            out,
            ellipse_out,
        } => {
            let model = geodesic_normal_of(&load_model(model)?)?;
            let ellipse = contour_of_density(&model, *level)?;
            let trace = ellipse.trace_parametrized(*n)?;
            let log_c = Model::from(model).log_normalizing_constant(cli.rel_tol)?;
            let values: Vec<f64> = trace
                .iter()
                .map(|(_, x)| model.log_density_unnorm(x) - log_c)
                .collect();
            let spread = values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().copied().fold(f64::INFINITY, f64::min);
            if spread.is_nan() || spread >= CONTOUR_SPREAD_TOL {
                return Err(Error::ContourNotConstant(spread).into());
            }
            let rows = trace.iter().map(|(t, x)| {
                let [a, b, c] = x.to_array();
                [*t, a, b, c]
            });
            let ellipse_path = ellipse_out
                .clone()
                .unwrap_or_else(|| out.with_extension("json"));
            write_atomic(out, &csv_string(&["t", "x1", "x2", "x3"], rows)?)?;
            write_atomic(
                &ellipse_path,
                &to_json_string(&EllipseJson::from_ellipse(&ellipse))?,
            )?;
            say(format!(
                "alpha {:.16e} beta {:.16e} log-density spread {spread:.3e}",
                ellipse.alpha(),
                ellipse.beta()
            ));
        }
        Command::EllipseCheck {
            ellipse,
            points,
            eq,
            out,
        } => {
            let parsed: EllipseJson = read_json(ellipse)?;
            let ellipse = parsed.to_ellipse()?;
            let xs = load_points(points, cli.quiet)?;
            let residuals = xs
                .iter()
                .map(|x| eq.residual(&ellipse, x))
                .collect::<Result<Vec<_>>>()?;
            let rows = xs.iter().zip(&residuals).map(|(x, r)| {
                let [a, b, c] = x.to_array();
                [a, b, c, *r]
            });
            write_atomic(out, &csv_string(&["x1", "x2", "x3", "residual"], rows)?)?;
            let max = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            println!("max_abs_residual={max:.16e}");
        }
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<Model> {
    read_json::<ModelJson>(path)?.to_model()
}

fn load_points(path: &Path, quiet: bool) -> Result<Vec<UnitVec3>> {
    let set = read_points_file(path)?;
    if !quiet {
        for row in &set.renormalized {
            eprintln!(
                "warning: {}: row {} is not unit length; renormalized",
                path.display(),
                row + 1
            );
        }
    }
    Ok(set.points)
}

/// Sampling and contours need the anisotropic form; an isotropic model is
/// converted with equal concentrations.
fn geodesic_normal_of(model: &Model) -> Result<GeodesicNormal> {
    match model {
        Model::GeodesicNormal(m) => Ok(*m),
        Model::Isotropic(m) => {
            GeodesicNormal::new(complete_frame(m.mu(), None)?, m.kappa(), m.kappa())
        }
        _ => Err(Error::InvalidParameter(
            "this command needs a geodesic_normal or isotropic_gn model".into(),
        )),
    }
}
