//! Densities on S²: the anisotropic geodesic normal and the families it is
//! compared against (isotropic geodesic normal, von Mises–Fisher, Kent).
//!
//! Each model exposes its unnormalized log-density (the exponent only) and a
//! normalizing constant obtained by quadrature. Constants depend only on the
//! concentration parameters, never on the orientation, and are cached.

mod cache;
mod sampling;

use nalgebra::{Matrix3, Rotation3};

pub use cache::ConstantCache;
pub use sampling::{sample, RejectionSampler};

use crate::error::{Error, Result};
use crate::quadrature::DEFAULT_REL_TOL;
use crate::sphere::{log_map, Frame3, UnitVec3};

/// Concentrations above this are outside the resolution of the default rules.
pub const LAMBDA_WARN_THRESHOLD: f64 = 1e4;
/// `(x.eta)^2 + (x.xi)^2` below this is treated as `x = +-mu`.
const AXIS_EPS: f64 = 1e-24;

fn check_nonneg(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be finite and >= 0, got {value}"
        )));
    }
    if value > LAMBDA_WARN_THRESHOLD {
        log::warn!("{name} = {value} exceeds {LAMBDA_WARN_THRESHOLD:e}; quadrature constants may be inaccurate");
    }
    Ok(())
}

/// `kappa * angle^2`, shared by the isotropic and anisotropic forms so that
/// equal concentrations give bit-identical exponents.
#[inline]
fn isotropic_form(kappa: f64, angle: f64) -> f64 {
    kappa * angle * angle
}

/// Anisotropic geodesic normal distribution with frame `(mu | eta | xi)` and
/// concentrations `lambda1` along `eta`, `lambda2` along `xi`.
///
/// Stored in canonical orientation: `lambda1 <= lambda2`, so `eta` is the
/// major axis of the density contours, and the frame is right-handed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicNormal {
    frame: Frame3,
    lambda1: f64,
    lambda2: f64,
}

impl GeodesicNormal {
    pub fn new(frame: Frame3, lambda1: f64, lambda2: f64) -> Result<Self> {
        check_nonneg("lambda1", lambda1)?;
        check_nonneg("lambda2", lambda2)?;
        if lambda1 + lambda2 <= 0.0 {
            return Err(Error::InvalidParameter(
                "lambda1 + lambda2 must be positive".into(),
            ));
        }
        let (frame, lambda1, lambda2) = if lambda1 > lambda2 {
            (frame.swap_axes(), lambda2, lambda1)
        } else {
            (frame.righted(), lambda1, lambda2)
        };
        Ok(GeodesicNormal {
            frame,
            lambda1,
            lambda2,
        })
    }

    pub fn frame(&self) -> &Frame3 {
        &self.frame
    }

    pub fn mu(&self) -> &UnitVec3 {
        self.frame.mu()
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// `lambda1 eta eta^T + lambda2 xi xi^T`; `mu` spans its null space.
    pub fn precision_matrix(&self) -> Matrix3<f64> {
        let eta = self.frame.eta().as_vector();
        let xi = self.frame.xi().as_vector();
        self.lambda1 * eta * eta.transpose() + self.lambda2 * xi * xi.transpose()
    }

    /// Quadratic form evaluated directly on the sphere:
    /// `acos^2(x.mu) (lambda1 e^2 + lambda2 s^2) / (e^2 + s^2)` with
    /// `e = x.eta`, `s = x.xi`.
    ///
    /// At `x = +-mu` the direction ratio is 0/0 and is taken as
    /// `(lambda1 + lambda2) / 2`.
    pub fn quadratic_form_direct(&self, x: &UnitVec3) -> f64 {
        let [c, e, s] = self.frame.coordinates(x);
        let angle = c.clamp(-1.0, 1.0).acos();
        if self.lambda1 == self.lambda2 {
            return isotropic_form(self.lambda1, angle);
        }
        let (e2, s2) = (e * e, s * s);
        let denom = e2 + s2;
        let weight = if denom < AXIS_EPS {
            0.5 * (self.lambda1 + self.lambda2)
        } else {
            (self.lambda1 * e2 + self.lambda2 * s2) / denom
        };
        angle * angle * weight
    }

    /// The same quadratic form computed through the tangent plane at `mu`:
    /// `Log_mu(x)^T Lambda Log_mu(x)`.
    pub fn quadratic_form_tangent(&self, x: &UnitVec3) -> Result<f64> {
        let y = *log_map(self.mu(), x)?.vector();
        Ok((y.transpose() * self.precision_matrix() * y)[(0, 0)])
    }

    pub fn log_density_unnorm(&self, x: &UnitVec3) -> f64 {
        -0.5 * self.quadratic_form_direct(x)
    }

    pub fn rotate(&self, rotation: &Rotation3<f64>) -> Self {
        GeodesicNormal {
            frame: self.frame.rotate(rotation),
            ..*self
        }
    }

    /// Same concentrations with a new frame (re-canonicalized).
    pub fn with_frame(&self, frame: Frame3) -> Self {
        GeodesicNormal {
            frame: frame.righted(),
            ..*self
        }
    }
}

/// Isotropic geodesic normal: `exp{-(kappa/2) acos^2(x.mu)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsotropicGeodesicNormal {
    mu: UnitVec3,
    kappa: f64,
}

impl IsotropicGeodesicNormal {
    pub fn new(mu: UnitVec3, kappa: f64) -> Result<Self> {
        check_nonneg("kappa", kappa)?;
        if kappa == 0.0 {
            return Err(Error::InvalidParameter("kappa must be positive".into()));
        }
        Ok(IsotropicGeodesicNormal { mu, kappa })
    }

    pub fn mu(&self) -> &UnitVec3 {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn log_density_unnorm(&self, x: &UnitVec3) -> f64 {
        -0.5 * isotropic_form(self.kappa, x.cos_angle(&self.mu).acos())
    }
}

/// von Mises–Fisher: `exp(kappa x.mu)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VonMisesFisher {
    mu: UnitVec3,
    kappa: f64,
}

impl VonMisesFisher {
    pub fn new(mu: UnitVec3, kappa: f64) -> Result<Self> {
        check_nonneg("kappa", kappa)?;
        Ok(VonMisesFisher { mu, kappa })
    }

    pub fn mu(&self) -> &UnitVec3 {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn log_density_unnorm(&self, x: &UnitVec3) -> f64 {
        self.kappa * x.dot(&self.mu)
    }
}

/// Kent (FB5): `exp{kappa g1.x + ovalness [(g2.x)^2 - (g3.x)^2]}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KentDistribution {
    frame: Frame3,
    kappa: f64,
    ovalness: f64,
}

impl KentDistribution {
    pub fn new(frame: Frame3, kappa: f64, ovalness: f64) -> Result<Self> {
        check_nonneg("kappa", kappa)?;
        check_nonneg("ovalness", ovalness)?;
        Ok(KentDistribution {
            frame,
            kappa,
            ovalness,
        })
    }

    pub fn frame(&self) -> &Frame3 {
        &self.frame
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn ovalness(&self) -> f64 {
        self.ovalness
    }

    /// `2 ovalness <= kappa`; beyond that the density has two modes.
    pub fn is_unimodal(&self) -> bool {
        2.0 * self.ovalness <= self.kappa
    }

    pub fn log_density_unnorm(&self, x: &UnitVec3) -> f64 {
        let [g1, g2, g3] = self.frame.coordinates(x);
        self.kappa * g1 + self.ovalness * (g2 * g2 - g3 * g3)
    }
}

/// Any of the supported densities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    GeodesicNormal(GeodesicNormal),
    Isotropic(IsotropicGeodesicNormal),
    VonMisesFisher(VonMisesFisher),
    Kent(KentDistribution),
}

impl From<GeodesicNormal> for Model {
    fn from(m: GeodesicNormal) -> Self {
        Model::GeodesicNormal(m)
    }
}

impl From<IsotropicGeodesicNormal> for Model {
    fn from(m: IsotropicGeodesicNormal) -> Self {
        Model::Isotropic(m)
    }
}

impl From<VonMisesFisher> for Model {
    fn from(m: VonMisesFisher) -> Self {
        Model::VonMisesFisher(m)
    }
}

impl From<KentDistribution> for Model {
    fn from(m: KentDistribution) -> Self {
        Model::Kent(m)
    }
}

impl Model {
    pub fn log_density_unnorm(&self, x: &UnitVec3) -> f64 {
        match self {
            Model::GeodesicNormal(m) => m.log_density_unnorm(x),
            Model::Isotropic(m) => m.log_density_unnorm(x),
            Model::VonMisesFisher(m) => m.log_density_unnorm(x),
            Model::Kent(m) => m.log_density_unnorm(x),
        }
    }

    /// Mean direction (`gamma1` for Kent).
    pub fn mean_direction(&self) -> &UnitVec3 {
        match self {
            Model::GeodesicNormal(m) => m.mu(),
            Model::Isotropic(m) => m.mu(),
            Model::VonMisesFisher(m) => m.mu(),
            Model::Kent(m) => m.frame().mu(),
        }
    }

    /// Upper bound on the exponent, used to keep quadrature sums in range.
    pub(crate) fn log_density_bound(&self) -> f64 {
        match self {
            Model::GeodesicNormal(_) | Model::Isotropic(_) => 0.0,
            Model::VonMisesFisher(m) => m.kappa,
            Model::Kent(m) => m.kappa + m.ovalness,
        }
    }

    /// The same parameters in the standard frame `mu = (1,0,0)`, `eta = (0,1,0)`.
    pub(crate) fn canonical(&self) -> Model {
        let frame = Frame3::standard();
        match self {
            Model::GeodesicNormal(m) => Model::GeodesicNormal(m.with_frame(frame)),
            Model::Isotropic(m) => Model::Isotropic(IsotropicGeodesicNormal {
                mu: *frame.mu(),
                ..*m
            }),
            Model::VonMisesFisher(m) => Model::VonMisesFisher(VonMisesFisher {
                mu: *frame.mu(),
                ..*m
            }),
            Model::Kent(m) => Model::Kent(KentDistribution { frame, ..*m }),
        }
    }

    pub fn rotate(&self, rotation: &Rotation3<f64>) -> Model {
        match self {
            Model::GeodesicNormal(m) => Model::GeodesicNormal(m.rotate(rotation)),
            Model::Isotropic(m) => Model::Isotropic(IsotropicGeodesicNormal {
                mu: m.mu.rotate(rotation),
                ..*m
            }),
            Model::VonMisesFisher(m) => Model::VonMisesFisher(VonMisesFisher {
                mu: m.mu.rotate(rotation),
                ..*m
            }),
            Model::Kent(m) => Model::Kent(KentDistribution {
                frame: m.frame.rotate(rotation),
                ..*m
            }),
        }
    }

    /// `log C` through the process-wide constant cache.
    pub fn log_normalizing_constant(&self, rel_tol: f64) -> Result<f64> {
        ConstantCache::global().log_normalizing_constant(self, rel_tol)
    }

    pub fn normalizing_constant(&self, rel_tol: f64) -> Result<f64> {
        self.log_normalizing_constant(rel_tol).map(f64::exp)
    }

    pub fn log_density(&self, x: &UnitVec3) -> Result<f64> {
        Ok(self.log_density_unnorm(x) - self.log_normalizing_constant(DEFAULT_REL_TOL)?)
    }

    pub fn density(&self, x: &UnitVec3) -> Result<f64> {
        self.log_density(x).map(f64::exp)
    }

    /// Log-densities of a batch, looking the constant up once.
    pub fn log_densities(&self, xs: &[UnitVec3], rel_tol: f64) -> Result<Vec<f64>> {
        let log_c = self.log_normalizing_constant(rel_tol)?;
        Ok(xs
            .iter()
            .map(|x| self.log_density_unnorm(x) - log_c)
            .collect())
    }
}
