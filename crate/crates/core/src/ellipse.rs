//! Spherical ellipses: construction from foci, the equivalent defining
//! equations as signed residuals, and point tracing.
//!
//! Two curves are associated with an ellipse `(mu, eta, xi, alpha, beta)`:
//!
//! * the focal locus `d(x, f1) + d(x, f2) = 2 alpha`, whose semi-minor axis
//!   satisfies `cos alpha = cos beta cos gamma` ([`SphericalEllipse::trace_focal`]);
//! * the image under `exp_mu` of the tangent-plane ellipse with semi-axes
//!   `alpha`, `beta`, which is the zero set of
//!   [`SphericalEllipse::residual_single_curve`] and the level set of the
//!   geodesic normal density ([`SphericalEllipse::trace`]).
//!
//! The two curves share centre, axes and all four vertices. They coincide
//! exactly only for circles; elsewhere they differ by a small amount
//! (about 7e-4 rad in focal-sum residual for `alpha = pi/4`, `gamma = pi/6`).

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Rotation3;

use crate::distributions::GeodesicNormal;
use crate::error::{Error, Result};
use crate::sphere::{complete_frame, exp_map, geodesic_distance, Frame3, TangentVec, UnitVec3};

const AXIS_EPS: f64 = 1e-24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalEllipse {
    frame: Frame3,
    alpha: f64,
    beta: f64,
}

impl SphericalEllipse {
    /// Centre `frame.mu()`, major axis along `frame.eta()`, semi-axes
    /// `0 < beta <= alpha < pi` measured as geodesic lengths.
    pub fn new(frame: Frame3, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && 0.0 < beta && beta <= alpha && alpha < PI) {
            return Err(Error::InvalidParameter(format!(
                "semi-axes must satisfy 0 < beta <= alpha < pi, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(SphericalEllipse {
            frame: frame.righted(),
            alpha,
            beta,
        })
    }

    /// Ellipse with foci `f1`, `f2` and focal-distance sum `2 alpha`.
    pub fn from_foci(f1: &UnitVec3, f2: &UnitVec3, alpha: f64) -> Result<Self> {
        let c = f1.dot(f2);
        if c <= -1.0 + 1e-12 {
            return Err(Error::AntipodalFoci);
        }
        let gamma = 0.5 * geodesic_distance(f1, f2);
        // beta <= alpha needs cos(alpha) > 0 unless the ellipse is a circle
        let upper = if gamma > 0.0 {
            FRAC_PI_2.min(PI - gamma)
        } else {
            PI
        };
        if !(gamma < alpha && alpha < upper) {
            return Err(Error::AxisConstraintViolated {
                alpha,
                lower: gamma,
                upper,
            });
        }
        let mu = UnitVec3::from_vector(f1.as_vector() + f2.as_vector())?;
        let diff = f1.as_vector() - f2.as_vector();
        let frame = match UnitVec3::from_vector(diff) {
            Ok(eta) => complete_frame(&mu, Some(&eta))?,
            Err(_) => complete_frame(&mu, None)?,
        };
        let beta = if gamma > 0.0 {
            (alpha.cos() / gamma.cos()).clamp(-1.0, 1.0).acos()
        } else {
            alpha
        };
        Self::new(frame, alpha, beta)
    }

    pub fn frame(&self) -> &Frame3 {
        &self.frame
    }

    pub fn center(&self) -> &UnitVec3 {
        self.frame.mu()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_circle(&self) -> bool {
        self.alpha == self.beta
    }

    /// `gamma` with `cos alpha = cos beta cos gamma`, the distance from the
    /// centre to either focus. Exists for circles and for `alpha < pi/2`.
    pub fn focal_half_distance(&self) -> Result<f64> {
        if self.is_circle() {
            return Ok(0.0);
        }
        let (ca, cb) = (self.alpha.cos(), self.beta.cos());
        if ca <= 0.0 || cb < ca {
            return Err(Error::NoFocalForm {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        Ok((ca / cb).min(1.0).acos())
    }

    /// `(mu cos gamma + eta sin gamma, mu cos gamma - eta sin gamma)`.
    pub fn foci(&self) -> Result<(UnitVec3, UnitVec3)> {
        let gamma = self.focal_half_distance()?;
        if gamma == 0.0 {
            return Ok((*self.frame.mu(), *self.frame.mu()));
        }
        let (mu, eta) = (self.frame.mu().as_vector(), self.frame.eta().as_vector());
        let (c, s) = (gamma.cos(), gamma.sin());
        Ok((
            UnitVec3::from_vector(c * mu + s * eta)?,
            UnitVec3::from_vector(c * mu - s * eta)?,
        ))
    }

    /// `d(x, f1) + d(x, f2) - 2 alpha`.
    pub fn residual_focal(&self, x: &UnitVec3) -> Result<f64> {
        let (f1, f2) = self.foci()?;
        Ok(geodesic_distance(x, &f1) + geodesic_distance(x, &f2) - 2.0 * self.alpha)
    }

    /// Focal equation with the foci written through the centre and major axis.
    pub fn residual_center_form(&self, x: &UnitVec3) -> Result<f64> {
        let gamma = self.focal_half_distance()?;
        Ok(self.two_arc_sum(x, gamma.cos(), gamma.sin()))
    }

    /// Focal equation with `cos gamma = cos alpha / cos beta` substituted.
    pub fn residual_semiaxis_form(&self, x: &UnitVec3) -> Result<f64> {
        self.focal_half_distance()?;
        let ratio = if self.is_circle() {
            1.0
        } else {
            self.alpha.cos() / self.beta.cos()
        };
        let sin_part = (1.0 - ratio * ratio).max(0.0).sqrt();
        Ok(self.two_arc_sum(x, ratio, sin_part))
    }

    fn two_arc_sum(&self, x: &UnitVec3, cos_g: f64, sin_g: f64) -> f64 {
        let [c, e, _] = self.frame.coordinates(x);
        let a = (c * cos_g + e * sin_g).clamp(-1.0, 1.0).acos();
        let b = (c * cos_g - e * sin_g).clamp(-1.0, 1.0).acos();
        a + b - 2.0 * self.alpha
    }

    /// `x1^2 cos^2 gamma / cos^2 alpha + x2^2 sin^2 gamma / sin^2 alpha - 1`
    /// in frame coordinates `x1 = x.mu`, `x2 = x.eta`.
    ///
    /// Even in `x`, so it also vanishes on the antipodal copy of the ellipse.
    /// For a circle the second term is dropped.
    pub fn residual_standard_implicit(&self, x: &UnitVec3) -> Result<f64> {
        let gamma = self.focal_half_distance()?;
        let ca = self.alpha.cos();
        if ca.abs() < 1e-15 {
            return Err(Error::NoFocalForm {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        let [x1, x2, _] = self.frame.coordinates(x);
        let first = x1 * x1 * gamma.cos().powi(2) / (ca * ca);
        if gamma == 0.0 {
            return Ok(first - 1.0);
        }
        Ok(first + x2 * x2 * gamma.sin().powi(2) / self.alpha.sin().powi(2) - 1.0)
    }

    /// `acos^2(x.mu) [(x.eta)^2/alpha^2 + (x.xi)^2/beta^2] / [(x.eta)^2 + (x.xi)^2] - 1`.
    ///
    /// At `x = +-mu` the direction ratio is taken as the mean of the two
    /// axis weights.
    pub fn residual_single_curve(&self, x: &UnitVec3) -> f64 {
        let [c, e, s] = self.frame.coordinates(x);
        let angle = c.clamp(-1.0, 1.0).acos();
        let (wa, wb) = (
            1.0 / (self.alpha * self.alpha),
            1.0 / (self.beta * self.beta),
        );
        let (e2, s2) = (e * e, s * s);
        let denom = e2 + s2;
        let weight = if denom < AXIS_EPS {
            0.5 * (wa + wb)
        } else {
            (wa * e2 + wb * s2) / denom
        };
        angle * angle * weight - 1.0
    }

    /// `exp_mu(alpha cos t eta + beta sin t xi)` for `t = 2 pi k / n`.
    pub fn trace(&self, n: usize) -> Result<Vec<UnitVec3>> {
        Ok(self
            .trace_parametrized(n)?
            .into_iter()
            .map(|(_, x)| x)
            .collect())
    }

    /// [`trace`](Self::trace) with the parameter `t` of each point.
    pub fn trace_parametrized(&self, n: usize) -> Result<Vec<(f64, UnitVec3)>> {
        check_count(n)?;
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let v = TangentVec::from_components(
                    *self.frame.mu(),
                    self.alpha * t.cos(),
                    self.frame.eta(),
                    self.beta * t.sin(),
                    self.frame.xi(),
                )?;
                Ok((t, exp_map(&v)?))
            })
            .collect()
    }

    /// Points of the focal locus, one per direction `t = 2 pi k / n` from the
    /// centre. The radial distance comes from the standard implicit form in
    /// closed form; of its two antipodal roots the one on the focal locus
    /// is kept.
    pub fn trace_focal(&self, n: usize) -> Result<Vec<(f64, UnitVec3)>> {
        check_count(n)?;
        let gamma = self.focal_half_distance()?;
        let p = (gamma.cos() / self.alpha.cos()).powi(2);
        let q = (gamma.sin() / self.alpha.sin()).powi(2);
        let (mu, eta, xi) = (
            self.frame.mu().as_vector(),
            self.frame.eta().as_vector(),
            self.frame.xi().as_vector(),
        );
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let (c, s) = (t.cos(), t.sin());
                let cos_r = ((1.0 - c * c * q) / (p - c * c * q)).clamp(0.0, 1.0).sqrt();
                let candidates = [cos_r, -cos_r].map(|cr| {
                    let sr = (1.0 - cr * cr).max(0.0).sqrt();
                    UnitVec3::from_vector(cr * mu + (sr * c) * eta + (sr * s) * xi)
                });
                let mut best: Option<(f64, UnitVec3)> = None;
                for x in candidates {
                    let x = x?;
                    let r = self.residual_focal(&x)?.abs();
                    if best.is_none_or(|(b, _)| r < b) {
                        best = Some((r, x));
                    }
                }
                Ok((t, best.expect("two candidates").1))
            })
            .collect()
    }

    pub fn rotate(&self, rotation: &Rotation3<f64>) -> Self {
        SphericalEllipse {
            frame: self.frame.rotate(rotation),
            ..*self
        }
    }
}

fn check_count(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "trace needs at least 3 points, got {n}"
        )));
    }
    Ok(())
}

/// The level set `{x : q(x) = rho^2}` of a geodesic normal, where `q` is its
/// quadratic form: semi-axes `rho / sqrt(lambda1)` along `eta` and
/// `rho / sqrt(lambda2)` along `xi`.
pub fn contour_of_density(model: &GeodesicNormal, rho: f64) -> Result<SphericalEllipse> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "contour level must be positive, got {rho}"
        )));
    }
    if model.lambda1() <= 0.0 || model.lambda2() <= 0.0 {
        return Err(Error::DegenerateConcentration);
    }
    let alpha = rho / model.lambda1().sqrt();
    if alpha >= PI {
        return Err(Error::ContourTooLarge(alpha));
    }
    let beta = if model.lambda1() == model.lambda2() {
        alpha
    } else {
        rho / model.lambda2().sqrt()
    };
    SphericalEllipse::new(*model.frame(), alpha, beta)
}
