//! Points, tangent vectors and orthonormal frames on the unit sphere S².
//!
//! Every dot product is clamped to `[-1, 1]` before it reaches `acos` or
//! `sqrt`; rounding routinely produces `1 + 1e-16` for coincident points.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};

/// Inputs with a smaller norm are rejected instead of normalized.
const MIN_NORM: f64 = 1e-12;
/// Below this geodesic distance the logarithm map uses its series limit.
const SERIES_THRESHOLD: f64 = 1e-8;
/// `x.mu` below `-1 + ANTIPODAL_MARGIN` is treated as the antipode.
const ANTIPODAL_MARGIN: f64 = 1e-12;
const ORTHOGONALITY_TOL: f64 = 1e-10;

/// A point on the unit sphere.
#[derive(Clone, Copy, PartialEq)]
pub struct UnitVec3(Vector3<f64>);

impl UnitVec3 {
    /// Normalizes `(x1, x2, x3)`; fails on non-finite or near-zero input.
    pub fn new(x1: f64, x2: f64, x3: f64) -> Result<Self> {
        Self::from_vector(Vector3::new(x1, x2, x3))
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = v.norm();
        if norm < MIN_NORM {
            return Err(Error::ZeroVector(norm));
        }
        Ok(UnitVec3(v / norm))
    }

    pub fn from_array(a: [f64; 3]) -> Result<Self> {
        Self::new(a[0], a[1], a[2])
    }

    pub fn e1() -> Self {
        UnitVec3(Vector3::x())
    }

    pub fn e2() -> Self {
        UnitVec3(Vector3::y())
    }

    pub fn e3() -> Self {
        UnitVec3(Vector3::z())
    }

    /// Wraps a vector the caller already knows to be unit length.
    pub(crate) fn from_unit_unchecked(v: Vector3<f64>) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-9);
        UnitVec3(v)
    }

    pub fn x1(&self) -> f64 {
        self.0.x
    }

    pub fn x2(&self) -> f64 {
        self.0.y
    }

    pub fn x3(&self) -> f64 {
        self.0.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.0.dot(&other.0)
    }

    /// Dot product clamped to `[-1, 1]`.
    pub fn cos_angle(&self, other: &UnitVec3) -> f64 {
        self.dot(other).clamp(-1.0, 1.0)
    }

    pub fn antipode(&self) -> UnitVec3 {
        UnitVec3(-self.0)
    }

    pub fn rotate(&self, rotation: &Rotation3<f64>) -> UnitVec3 {
        UnitVec3::from_vector(rotation * self.0).expect("rotation preserves unit norm")
    }
}

impl fmt::Debug for UnitVec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UnitVec3({}, {}, {})", self.0.x, self.0.y, self.0.z)
    }
}

/// A vector in the tangent plane at `base`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVec {
    base: UnitVec3,
    v: Vector3<f64>,
}

impl TangentVec {
    pub fn new(base: UnitVec3, v: Vector3<f64>) -> Result<Self> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite);
        }
        let off_plane = v.dot(base.as_vector()).abs();
        if off_plane > 1e-10 * v.norm().max(1.0) {
            return Err(Error::NotTangent(off_plane));
        }
        Ok(TangentVec { base, v })
    }

    /// Tangent vector `a * u + b * w` at `base`, for `u`, `w` tangent at `base`.
    pub fn from_components(
        base: UnitVec3,
        a: f64,
        u: &UnitVec3,
        b: f64,
        w: &UnitVec3,
    ) -> Result<Self> {
        Self::new(base, a * u.as_vector() + b * w.as_vector())
    }

    pub fn zero(base: UnitVec3) -> Self {
        TangentVec {
            base,
            v: Vector3::zeros(),
        }
    }

    pub fn base(&self) -> &UnitVec3 {
        &self.base
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn dot_point(&self, direction: &UnitVec3) -> f64 {
        self.v.dot(direction.as_vector())
    }
}

/// Right- or left-handed orthonormal basis `(mu | eta | xi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame3 {
    mu: UnitVec3,
    eta: UnitVec3,
    xi: UnitVec3,
}

impl Frame3 {
    pub fn new(mu: UnitVec3, eta: UnitVec3, xi: UnitVec3) -> Result<Self> {
        let pairs = [
            ("mu.eta", mu.dot(&eta)),
            ("mu.xi", mu.dot(&xi)),
            ("eta.xi", eta.dot(&xi)),
        ];
        for (name, d) in pairs {
            if d.abs() > ORTHOGONALITY_TOL {
                return Err(Error::NotOrthonormal(format!("{name} = {d:e}")));
            }
        }
        Ok(Frame3 { mu, eta, xi })
    }

    /// `((1,0,0), (0,1,0), (0,0,1))`: centre on the first axis, major axis on the second.
    pub fn standard() -> Self {
        Frame3 {
            mu: UnitVec3::e1(),
            eta: UnitVec3::e2(),
            xi: UnitVec3::e3(),
        }
    }

    pub fn mu(&self) -> &UnitVec3 {
        &self.mu
    }

    pub fn eta(&self) -> &UnitVec3 {
        &self.eta
    }

    pub fn xi(&self) -> &UnitVec3 {
        &self.xi
    }

    /// The orthogonal matrix with columns `mu`, `eta`, `xi`.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[
            *self.mu.as_vector(),
            *self.eta.as_vector(),
            *self.xi.as_vector(),
        ])
    }

    pub fn determinant(&self) -> f64 {
        self.matrix().determinant()
    }

    /// Coordinates `(x.mu, x.eta, x.xi)`.
    pub fn coordinates(&self, x: &UnitVec3) -> [f64; 3] {
        [x.dot(&self.mu), x.dot(&self.eta), x.dot(&self.xi)]
    }

    /// Same `mu` and `eta` with `xi` replaced by `mu x eta`.
    pub fn righted(&self) -> Frame3 {
        let xi = UnitVec3::from_vector(self.mu.as_vector().cross(self.eta.as_vector()))
            .expect("orthonormal columns have a unit cross product");
        Frame3 { xi, ..*self }
    }

    /// Swaps the roles of `eta` and `xi`, keeping the frame right-handed.
    pub fn swap_axes(&self) -> Frame3 {
        Frame3 {
            mu: self.mu,
            eta: self.xi,
            xi: self.eta,
        }
        .righted()
    }

    pub fn rotate(&self, rotation: &Rotation3<f64>) -> Frame3 {
        Frame3 {
            mu: self.mu.rotate(rotation),
            eta: self.eta.rotate(rotation),
            xi: self.xi.rotate(rotation),
        }
    }

    /// Rotation by `r` expressed in the frame's own coordinates: the columns
    /// of the result are `F * R(r)`.
    pub fn rotate_body(&self, r: &Vector3<f64>) -> Frame3 {
        let m = self.matrix() * Rotation3::new(*r).matrix();
        let col = |i: usize| {
            UnitVec3::from_vector(m.column(i).into_owned()).expect("rotated column is unit")
        };
        Frame3 {
            mu: col(0),
            eta: col(1),
            xi: col(2),
        }
    }
}

/// Arc length between two points, in `[0, pi]`.
pub fn geodesic_distance(a: &UnitVec3, b: &UnitVec3) -> f64 {
    a.cos_angle(b).acos()
}

/// Euclidean distance through the ball, `sqrt(2 (1 - a.b))`.
pub fn chord_distance(a: &UnitVec3, b: &UnitVec3) -> f64 {
    (2.0 * (1.0 - a.dot(b))).max(0.0).sqrt()
}

/// Logarithm map at `mu`: the tangent vector pointing towards `x` whose
/// length is the geodesic distance.
pub fn log_map(mu: &UnitVec3, x: &UnitVec3) -> Result<TangentVec> {
    let c = mu.dot(x);
    if c < -1.0 + ANTIPODAL_MARGIN {
        return Err(Error::AntipodalPoint);
    }
    let d = c.clamp(-1.0, 1.0).acos();
    let w = x.as_vector() - c * mu.as_vector();
    // ||w|| = sin(d) for unit x; dividing by ||w|| keeps ||result|| = d to rounding.
    let scale = if d < SERIES_THRESHOLD {
        1.0 + d * d / 6.0
    } else {
        d / w.norm()
    };
    // Strip the residual normal component left over from rounding.
    let mut v = w * scale;
    v -= v.dot(mu.as_vector()) * mu.as_vector();
    Ok(TangentVec { base: *mu, v })
}

/// Exponential map: walks `||v||` along the great circle leaving `base` in direction `v`.
pub fn exp_map(v: &TangentVec) -> Result<UnitVec3> {
    let n = v.norm();
    if n >= PI || !n.is_finite() {
        return Err(Error::OutOfInjectivityRadius(n));
    }
    if n < 1e-12 {
        return Ok(v.base);
    }
    let x = n.cos() * v.base.as_vector() + (n.sin() / n) * v.v;
    UnitVec3::from_vector(x)
}

/// Completes `mu` to a right-handed orthonormal frame. With a hint, `eta` is
/// the normalized component of the hint orthogonal to `mu`; without one, the
/// coordinate axis least aligned with `mu` is used.
pub fn complete_frame(mu: &UnitVec3, eta_hint: Option<&UnitVec3>) -> Result<Frame3> {
    let hint = match eta_hint {
        Some(h) => {
            if mu.dot(h).abs() >= 1.0 - 1e-10 {
                return Err(Error::DegenerateHint);
            }
            *h.as_vector()
        }
        None => {
            let m = mu.as_vector();
            let axis = (0..3)
                .min_by(|&i, &j| m[i].abs().total_cmp(&m[j].abs()))
                .unwrap_or(0);
            Vector3::ith(axis, 1.0)
        }
    };
    let m = mu.as_vector();
    let mut e = hint - hint.dot(m) * m;
    // second pass tightens orthogonality to ~1e-16
    e -= e.dot(m) * m;
    let eta = UnitVec3::from_vector(e)?;
    let xi = UnitVec3::from_vector(m.cross(eta.as_vector()))?;
    Ok(Frame3 { mu: *mu, eta, xi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, SQRT_2};

    fn random_point(rng: &mut impl Rng) -> UnitVec3 {
        loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 0.1 && n < 1.0 {
                return UnitVec3::from_vector(v).unwrap();
            }
        }
    }

    #[test]
    fn constructor_normalizes_and_rejects_zero() {
        let p = UnitVec3::new(2.0, 0.0, 0.0).unwrap();
        assert_eq!(p.to_array(), [1.0, 0.0, 0.0]);
        assert!(matches!(
            UnitVec3::new(0.0, 1e-13, 0.0),
            Err(Error::ZeroVector(_))
        ));
        assert_eq!(UnitVec3::new(f64::NAN, 0.0, 1.0), Err(Error::NonFinite));
    }

    #[test]
    fn distances() {
        let e1 = UnitVec3::e1();
        let e2 = UnitVec3::e2();
        assert_eq!(geodesic_distance(&e1, &e1), 0.0);
        assert_abs_diff_eq!(geodesic_distance(&e1, &e2), FRAC_PI_2, epsilon = 1e-15);
        let f1 = UnitVec3::new(FRAC_PI_6.cos(), FRAC_PI_6.sin(), 0.0).unwrap();
        let f2 = UnitVec3::new(FRAC_PI_6.cos(), -FRAC_PI_6.sin(), 0.0).unwrap();
        assert_abs_diff_eq!(
            geodesic_distance(&f1, &f2),
            std::f64::consts::FRAC_PI_3,
            epsilon = 1e-15
        );

        assert_eq!(chord_distance(&e1, &e1), 0.0);
        assert_abs_diff_eq!(chord_distance(&e1, &e1.antipode()), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(chord_distance(&e1, &e2), SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn geodesic_distance_never_nan() {
        // (1, 1e-9, 0) normalizes to a vector whose dot with itself rounds above 1
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = random_point(&mut rng);
            assert!(!geodesic_distance(&p, &p).is_nan());
            assert!(!geodesic_distance(&p, &p.antipode()).is_nan());
        }
    }

    #[test]
    fn log_map_examples() {
        let mu = UnitVec3::e1();
        assert_eq!(log_map(&mu, &mu).unwrap().norm(), 0.0);
        let v = log_map(&mu, &UnitVec3::e2()).unwrap();
        assert_abs_diff_eq!(v.vector()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.vector()[1], FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(v.vector()[2], 0.0, epsilon = 1e-15);
        assert_eq!(log_map(&mu, &mu.antipode()), Err(Error::AntipodalPoint));
    }

    #[test]
    fn log_map_is_an_isometry_and_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mu = random_point(&mut rng);
            let x = random_point(&mut rng);
            let v = log_map(&mu, &x).unwrap();
            assert!((v.norm() - geodesic_distance(&mu, &x)).abs() < 1e-10);
            assert!(v.dot_point(&mu).abs() <= 1e-10 * v.norm().max(1.0));
        }
    }

    #[test]
    fn log_map_near_the_base_point() {
        let mu = UnitVec3::e3();
        let x = UnitVec3::new(1e-10, 0.0, 1.0).unwrap();
        let v = log_map(&mu, &x).unwrap();
        assert!(v.norm().is_finite());
        assert!(v.norm() < 1e-8);
    }

    #[test]
    fn exp_map_examples() {
        let mu = UnitVec3::e1();
        assert_eq!(exp_map(&TangentVec::zero(mu)).unwrap(), mu);
        let v = TangentVec::new(mu, Vector3::new(0.0, FRAC_PI_2, 0.0)).unwrap();
        let x = exp_map(&v).unwrap();
        assert_abs_diff_eq!(x.x1(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.x2(), 1.0, epsilon = 1e-15);
        let far = TangentVec::new(mu, Vector3::new(0.0, PI, 0.0)).unwrap();
        assert!(matches!(
            exp_map(&far),
            Err(Error::OutOfInjectivityRadius(_))
        ));
    }

    #[test]
    fn exp_inverts_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 1000 {
            let mu = random_point(&mut rng);
            let x = random_point(&mut rng);
            if geodesic_distance(&mu, &x) > PI - 0.01 {
                continue;
            }
            let back = exp_map(&log_map(&mu, &x).unwrap()).unwrap();
            assert!((back.as_vector() - x.as_vector()).norm() < 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn tangent_vec_rejects_normal_component() {
        let base = UnitVec3::e1();
        assert!(matches!(
            TangentVec::new(base, Vector3::new(0.1, 1.0, 0.0)),
            Err(Error::NotTangent(_))
        ));
    }

    #[test]
    fn complete_frame_examples() {
        let mu = UnitVec3::e1();
        let f = complete_frame(&mu, Some(&UnitVec3::e2())).unwrap();
        assert_eq!(f, Frame3::standard());

        let f = complete_frame(&mu, Some(&UnitVec3::new(0.6, 0.8, 0.0).unwrap())).unwrap();
        assert_abs_diff_eq!(f.eta().x1(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.eta().x2(), 1.0, epsilon = 1e-15);

        let a = complete_frame(&UnitVec3::e3(), None).unwrap();
        let b = complete_frame(&UnitVec3::e3(), None).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a.determinant(), 1.0, epsilon = 1e-12);

        assert_eq!(
            complete_frame(&mu, Some(&mu.antipode())),
            Err(Error::DegenerateHint)
        );
    }

    #[test]
    fn complete_frame_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..500 {
            let mu = random_point(&mut rng);
            let hint = random_point(&mut rng);
            let f = if i % 2 == 0 {
                complete_frame(&mu, Some(&hint)).unwrap()
            } else {
                complete_frame(&mu, None).unwrap()
            };
            let m = f.matrix();
            let err = (m.transpose() * m - Matrix3::identity()).abs().max();
            assert!(err < 1e-12, "orthogonality error {err:e}");
            assert_abs_diff_eq!(f.determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn swap_axes_keeps_right_handedness() {
        let f = Frame3::standard().swap_axes();
        assert_eq!(f.eta(), &UnitVec3::e3());
        assert_abs_diff_eq!(f.determinant(), 1.0, epsilon = 1e-15);
    }
}
