//! Maximum-likelihood fitting of the anisotropic geodesic normal.
//!
//! The search runs Nelder–Mead over five coordinates: a rotation vector `r`
//! acting on the initial frame in its own axes (`frame = frame0 * R(r)`) and
//! `(ln lambda1, ln lambda2)`.

use std::cell::Cell;

use nalgebra::{Matrix2, SymmetricEigen, Vector2, Vector3};

use crate::distributions::{ConstantCache, GeodesicNormal, Model};
use crate::error::{Error, Result};
use crate::quadrature::DEFAULT_REL_TOL;
use crate::sphere::{complete_frame, geodesic_distance, log_map, Frame3, UnitVec3};

pub const MIN_OBSERVATIONS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub max_evals: usize,
    /// Simplex diameter bound in the search coordinates.
    pub x_tol: f64,
    /// Bound on the objective spread across the simplex, relative to its value.
    pub f_tol: f64,
    /// Tolerance for the normalizing constant quadrature.
    pub rel_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_evals: 2000,
            x_tol: 1e-7,
            f_tol: 1e-9,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub model: GeodesicNormal,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub n_objective_evals: usize,
    /// Quadratures run for normalizing constants during the search.
    pub n_integrations: usize,
    pub converged: bool,
    pub initial_model: GeodesicNormal,
    /// Best objective value after each simplex iteration.
    pub history: Vec<f64>,
}

/// Moment-based starting point: normalized mean, then the principal axes
/// and inverse variances of the tangent scatter at that mean.
pub fn initialize(data: &[UnitVec3]) -> Result<GeodesicNormal> {
    if data.len() < MIN_OBSERVATIONS {
        return Err(Error::DegenerateData(format!(
            "need at least {MIN_OBSERVATIONS} observations, got {}",
            data.len()
        )));
    }
    let sum: Vector3<f64> = data.iter().map(|x| *x.as_vector()).sum();
    if sum.norm() / (data.len() as f64) <= 1e-6 {
        return Err(Error::DegenerateData(
            "mean resultant length is zero".into(),
        ));
    }
    let mu = UnitVec3::from_vector(sum)?;
    if data.iter().all(|x| geodesic_distance(x, &mu) < 1e-8) {
        return Err(Error::DegenerateData("all observations coincide".into()));
    }
    let basis = complete_frame(&mu, None)?;
    let mut scatter = Matrix2::zeros();
    for x in data {
        let v = log_map(&mu, x)
            .map_err(|_| Error::DegenerateData("observation antipodal to the mean".into()))?;
        let c = Vector2::new(v.dot_point(basis.eta()), v.dot_point(basis.xi()));
        scatter += c * c.transpose();
    }
    scatter /= data.len() as f64;
    let eig = SymmetricEigen::new(scatter);
    let (major, minor) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let (s1, s2) = (eig.eigenvalues[major], eig.eigenvalues[minor]);
    if s2 <= f64::EPSILON * s1 {
        return Err(Error::DegenerateData(
            "observations have no spread along one tangent axis".into(),
        ));
    }
    let axis = eig.eigenvectors.column(major);
    let eta = UnitVec3::from_vector(
        axis[0] * basis.eta().as_vector() + axis[1] * basis.xi().as_vector(),
    )?;
    GeodesicNormal::new(complete_frame(&mu, Some(&eta))?, 1.0 / s1, 1.0 / s2)
}

/// `n log C(lambda1, lambda2) + 1/2 sum q(x_i)`, with the constant from the
/// process-wide cache at the default tolerance.
pub fn negative_log_likelihood(model: &GeodesicNormal, data: &[UnitVec3]) -> Result<f64> {
    negative_log_likelihood_with(model, data, ConstantCache::global(), DEFAULT_REL_TOL)
}

/// The quadratic forms are summed in sorted order, so the value does not
/// depend on the order of `data`.
pub fn negative_log_likelihood_with(
    model: &GeodesicNormal,
    data: &[UnitVec3],
    cache: &ConstantCache,
    rel_tol: f64,
) -> Result<f64> {
    let log_c = cache.log_normalizing_constant(&Model::from(*model), rel_tol)?;
    let mut q: Vec<f64> = data
        .iter()
        .map(|x| model.quadratic_form_direct(x))
        .collect();
    q.sort_unstable_by(f64::total_cmp);
    Ok(data.len() as f64 * log_c + 0.5 * q.iter().sum::<f64>())
}

pub fn fit_mle(data: &[UnitVec3], options: &FitOptions) -> Result<FitResult> {
    let initial = initialize(data)?;
    fit_from(data, initial, options)
}

/// Likelihood search started at `initial` instead of the moment estimate.
pub fn fit_from(
    data: &[UnitVec3],
    initial: GeodesicNormal,
    options: &FitOptions,
) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::DegenerateData("no observations".into()));
    }
    if initial.lambda1() <= 0.0 {
        return Err(Error::InvalidParameter(
            "initial concentrations must be positive".into(),
        ));
    }
    let cache = ConstantCache::new();
    let frame0 = *initial.frame();
    let objective = |p: &[f64; DIM]| -> Result<f64> {
        let model = model_at(&frame0, p)?;
        negative_log_likelihood_with(&model, data, &cache, options.rel_tol)
    };
    let start = [
        0.0,
        0.0,
        0.0,
        initial.lambda1().ln(),
        initial.lambda2().ln(),
    ];
    let outcome = nelder_mead(objective, start, options)?;
    let model = model_at(&frame0, &outcome.best)?;
    Ok(FitResult {
        model,
        log_likelihood: -outcome.value,
        n_obs: data.len(),
        n_objective_evals: outcome.evals,
        n_integrations: cache.integrations(),
        converged: outcome.converged,
        initial_model: initial,
        history: outcome.history,
    })
}

const DIM: usize = 5;
const ROTATION_STEP: f64 = 0.05;
const LOG_LAMBDA_STEP: f64 = 0.2;

fn model_at(frame0: &Frame3, p: &[f64; DIM]) -> Result<GeodesicNormal> {
    let frame = frame0.rotate_body(&Vector3::new(p[0], p[1], p[2]));
    let (l1, l2) = (p[3].exp(), p[4].exp());
    if !(l1.is_finite() && l2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "concentration overflow at ln lambda = ({}, {})",
            p[3], p[4]
        )));
    }
    GeodesicNormal::new(frame, l1, l2)
}

struct Outcome {
    best: [f64; DIM],
    value: f64,
    evals: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
fn nelder_mead<F>(f: F, start: [f64; DIM], options: &FitOptions) -> Result<Outcome>
where
    F: Fn(&[f64; DIM]) -> Result<f64>,
{
    let evals = Cell::new(0usize);
    let eval = |x: &[f64; DIM]| {
        evals.set(evals.get() + 1);
        f(x)
    };
    let mut simplex: Vec<([f64; DIM], f64)> = Vec::with_capacity(DIM + 1);
    simplex.push((start, eval(&start)?));
    for i in 0..DIM {
        let mut x = start;
        x[i] += if i < 3 {
            ROTATION_STEP
        } else {
            LOG_LAMBDA_STEP
        };
        let v = eval(&x)?;
        simplex.push((x, v));
    }
    let mut history = Vec::new();
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        if has_converged(&simplex, options) {
            converged = true;
            break;
        }
        if evals.get() >= options.max_evals {
            break;
        }
        let worst = simplex[DIM];
        let mut centroid = [0.0; DIM];
        for (x, _) in &simplex[..DIM] {
            for i in 0..DIM {
                centroid[i] += x[i] / DIM as f64;
            }
        }
        let toward = |t: f64| -> [f64; DIM] {
            std::array::from_fn(|i| centroid[i] + t * (worst.0[i] - centroid[i]))
        };

        let xr = toward(-1.0);
        let fr = eval(&xr)?;
        if fr < simplex[0].1 {
            let xe = toward(-2.0);
            let fe = eval(&xe)?;
            simplex[DIM] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[DIM - 1].1 {
            simplex[DIM] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = toward(-0.5);
            (xc, eval(&xc)?)
        } else {
            let xc = toward(0.5);
            (xc, eval(&xc)?)
        };
        if fc < fr.min(worst.1) {
            simplex[DIM] = (xc, fc);
            continue;
        }
        let best = simplex[0].0;
        for vertex in simplex.iter_mut().skip(1) {
            let x: [f64; DIM] = std::array::from_fn(|i| best[i] + 0.5 * (vertex.0[i] - best[i]));
            *vertex = (x, eval(&x)?);
        }
    }
    let (best, value) = simplex[0];
    Ok(Outcome {
        best,
        value,
        evals: evals.get(),
        converged,
        history,
    })
}

fn has_converged(simplex: &[([f64; DIM], f64)], options: &FitOptions) -> bool {
    let (x0, f0) = simplex[0];
    let f_spread = simplex
        .iter()
        .map(|(_, v)| (v - f0).abs())
        .fold(0.0, f64::max);
    let x_spread = simplex
        .iter()
        .flat_map(|(x, _)| x.iter().zip(&x0).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    f_spread <= options.f_tol * f0.abs().max(1.0) && x_spread <= options.x_tol
}
