//! Product quadrature on S²: Gauss–Legendre in `cos(theta)` crossed with the
//! equal-weight trapezoidal rule in azimuth.
//!
//! The polar axis of a rule is configurable. Integrands that are smooth
//! everywhere except at a point (the geodesic normal kernels are not smooth
//! at the antipode of their mean) converge much faster when that point sits
//! on the polar axis, so normalizing constants are computed with the rule
//! oriented along the model's mean direction.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sphere::{Frame3, UnitVec3};

pub const ADAPTIVE_START: (usize, usize) = (32, 64);
pub const MAX_DOUBLINGS: usize = 6;
/// Default relative tolerance for normalizing constants.
pub const DEFAULT_REL_TOL: f64 = 1e-9;

#[derive(Debug)]
struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the three-term Legendre recurrence.
    fn compute(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // descending order from +1 on the left half, mirrored on the right
            nodes[i] = x;
            nodes[n - 1 - i] = -x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().expect("poisoned").get(&n) {
            return rule.clone();
        }
        let rule = Arc::new(GaussLegendre::compute(n));
        cache
            .lock()
            .expect("poisoned")
            .entry(n)
            .or_insert(rule)
            .clone()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

/// Pairwise summation; fixed association order for a given length.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// Product rule with `n_polar * n_azimuth` nodes. Nodes are generated on
/// demand from the polar and azimuthal factors.
#[derive(Debug, Clone)]
pub struct SphereQuadratureRule {
    n_polar: usize,
    n_azimuth: usize,
    orientation: Frame3,
    polar: Arc<GaussLegendre>,
    azimuth: Vec<(f64, f64)>,
}

impl SphereQuadratureRule {
    /// Rule with polar axis `(0,0,1)` and azimuth measured from `(1,0,0)`.
    pub fn build(n_polar: usize, n_azimuth: usize) -> Result<Self> {
        let orientation = Frame3::new(UnitVec3::e3(), UnitVec3::e1(), UnitVec3::e2())
            .expect("coordinate axes are orthonormal");
        Self::build_oriented(n_polar, n_azimuth, orientation)
    }

    /// Rule whose polar axis is `orientation.mu()`, with azimuth zero along
    /// `orientation.eta()`.
    pub fn build_oriented(n_polar: usize, n_azimuth: usize, orientation: Frame3) -> Result<Self> {
        if n_polar < 2 || n_azimuth < 4 {
            return Err(Error::InvalidRuleSize { n_polar, n_azimuth });
        }
        let azimuth = (0..n_azimuth)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / n_azimuth as f64;
                (phi.cos(), phi.sin())
            })
            .collect();
        Ok(SphereQuadratureRule {
            n_polar,
            n_azimuth,
            orientation,
            polar: GaussLegendre::cached(n_polar),
            azimuth,
        })
    }

    pub fn n_polar(&self) -> usize {
        self.n_polar
    }

    pub fn n_azimuth(&self) -> usize {
        self.n_azimuth
    }

    pub fn len(&self) -> usize {
        self.n_polar * self.n_azimuth
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn orientation(&self) -> &Frame3 {
        &self.orientation
    }

    fn azimuth_weight(&self) -> f64 {
        2.0 * PI / self.n_azimuth as f64
    }

    fn ring(&self, i: usize) -> impl Iterator<Item = (UnitVec3, f64)> + '_ {
        let t = self.polar.nodes[i];
        let w = self.polar.weights[i] * self.azimuth_weight();
        let r = (1.0 - t * t).max(0.0).sqrt();
        let pole = self.orientation.mu().as_vector();
        let a = self.orientation.eta().as_vector();
        let b = self.orientation.xi().as_vector();
        self.azimuth.iter().map(move |&(c, s)| {
            let x = t * pole + (r * c) * a + (r * s) * b;
            (UnitVec3::from_unit_unchecked(x), w)
        })
    }

    /// All `(point, weight)` pairs, ring by ring.
    pub fn nodes(&self) -> impl Iterator<Item = (UnitVec3, f64)> + '_ {
        (0..self.n_polar).flat_map(move |i| self.ring(i))
    }

    pub fn weight_sum(&self) -> f64 {
        pairwise_sum(&self.polar.weights) * self.azimuth_weight() * self.n_azimuth as f64
    }
}

/// `sum_i w_i f(x_i)`. Rings are evaluated in parallel; the reduction order
/// is fixed, so the result does not depend on the thread count.
pub fn integrate<F>(rule: &SphereQuadratureRule, f: F) -> Result<f64>
where
    F: Fn(&UnitVec3) -> f64 + Sync,
{
    let ring_sums: Vec<Option<f64>> = (0..rule.n_polar)
        .into_par_iter()
        .map(|i| {
            let mut values = Vec::with_capacity(rule.n_azimuth);
            let mut weight = 0.0;
            for (x, w) in rule.ring(i) {
                let v = f(&x);
                if !v.is_finite() {
                    return None;
                }
                values.push(v);
                weight = w;
            }
            Some(weight * pairwise_sum(&values))
        })
        .collect();
    let sums: Option<Vec<f64>> = ring_sums.into_iter().collect();
    let sums = sums.ok_or(Error::NonFiniteIntegrand)?;
    Ok(pairwise_sum(&sums))
}

/// [`integrate_adaptive_oriented`] with the default `(0,0,1)` polar axis.
pub fn integrate_adaptive<F>(f: F, rel_tol: f64) -> Result<f64>
where
    F: Fn(&UnitVec3) -> f64 + Sync,
{
    let rule = SphereQuadratureRule::build(2, 4)?;
    integrate_adaptive_oriented(rule.orientation(), f, rel_tol)
}

/// Doubles both rule sizes from (32, 64) until two successive estimates
/// agree to `rel_tol`, giving up after six doublings.
pub fn integrate_adaptive_oriented<F>(orientation: &Frame3, f: F, rel_tol: f64) -> Result<f64>
where
    F: Fn(&UnitVec3) -> f64 + Sync,
{
    if rel_tol.is_nan() || rel_tol < 1e-12 {
        return Err(Error::ToleranceTooSmall(rel_tol));
    }
    let (mut n_polar, mut n_azimuth) = ADAPTIVE_START;
    let mut previous = integrate(
        &SphereQuadratureRule::build_oriented(n_polar, n_azimuth, *orientation)?,
        &f,
    )?;
    for _ in 0..MAX_DOUBLINGS {
        n_polar *= 2;
        n_azimuth *= 2;
        let rule = SphereQuadratureRule::build_oriented(n_polar, n_azimuth, *orientation)?;
        let estimate = integrate(&rule, &f)?;
        if (estimate - previous).abs() < rel_tol * estimate.abs() {
            return Ok(estimate);
        }
        previous = estimate;
        if n_polar >= ADAPTIVE_START.0 << MAX_DOUBLINGS {
            return Err(Error::NoConvergence {
                previous,
                last: estimate,
            });
        }
    }
    unreachable!("loop exits through convergence or NoConvergence")
}
