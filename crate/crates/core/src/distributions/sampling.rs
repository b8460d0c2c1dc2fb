//! Rejection sampling for the geodesic normal with a von Mises–Fisher proposal.
//!
//! The proposal concentration is the smaller of the two concentrations, so
//! the proposal is at least as wide as the target along every tangent
//! direction. The envelope constant is the maximum log-ratio over a
//! 256 x 512 grid in the model frame plus a 10% margin. Every proposal is
//! checked against that bound exactly, and a violation is an error.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeodesicNormal, VonMisesFisher};
use crate::error::{Error, Result};
use crate::sphere::{Frame3, UnitVec3};

/// Scale from the smaller concentration to the proposal concentration.
/// At 1 the log-ratio `-q(x)/2 - kappa (x.mu)` is maximized at `mu`.
const PROPOSAL_SCALE: f64 = 1.0;
const GRID: (usize, usize) = (256, 512);
const ENVELOPE_MARGIN: f64 = 1.1;

impl VonMisesFisher {
    /// One exact draw: the cosine to `mu` by inverting its CDF, the azimuth uniformly.
    pub fn sample_one<R: Rng + ?Sized>(&self, frame: &Frame3, rng: &mut R) -> UnitVec3 {
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let kappa = self.kappa();
        let w = if kappa < 1e-8 {
            2.0 * u - 1.0
        } else {
            1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa
        }
        .clamp(-1.0, 1.0);
        let phi = 2.0 * PI * rng.random::<f64>();
        let r = (1.0 - w * w).max(0.0).sqrt();
        let x = w * self.mu().as_vector()
            + (r * phi.cos()) * frame.eta().as_vector()
            + (r * phi.sin()) * frame.xi().as_vector();
        UnitVec3::from_vector(x).expect("unit combination of an orthonormal frame")
    }
}

/// Reusable sampler for one model; holds the proposal and envelope.
#[derive(Clone, Debug)]
pub struct RejectionSampler {
    target: GeodesicNormal,
    proposal: VonMisesFisher,
    log_bound: f64,
}

impl RejectionSampler {
    pub fn new(target: GeodesicNormal) -> Result<Self> {
        let kappa = PROPOSAL_SCALE * target.lambda1().min(target.lambda2());
        let proposal = VonMisesFisher::new(*target.mu(), kappa)?;
        let mut sampler = RejectionSampler {
            target,
            proposal,
            log_bound: f64::NEG_INFINITY,
        };
        let frame = target.frame();
        let (n_theta, n_phi) = GRID;
        let mut grid_max = f64::NEG_INFINITY;
        for i in 0..n_theta {
            let theta = PI * i as f64 / (n_theta - 1) as f64;
            for j in 0..n_phi {
                let phi = 2.0 * PI * j as f64 / n_phi as f64;
                let x = theta.cos() * frame.mu().as_vector()
                    + (theta.sin() * phi.cos()) * frame.eta().as_vector()
                    + (theta.sin() * phi.sin()) * frame.xi().as_vector();
                let x = UnitVec3::from_vector(x)?;
                grid_max = grid_max.max(sampler.log_ratio(&x));
            }
        }
        sampler.log_bound = grid_max + ENVELOPE_MARGIN.ln();
        Ok(sampler)
    }

    pub fn proposal_kappa(&self) -> f64 {
        self.proposal.kappa()
    }

    /// Log envelope constant, relative to the unnormalized densities.
    pub fn log_bound(&self) -> f64 {
        self.log_bound
    }

    fn log_ratio(&self, x: &UnitVec3) -> f64 {
        self.target.log_density_unnorm(x) - self.proposal.log_density_unnorm(x)
    }

    /// Draws one point; also returns the number of proposals used.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(UnitVec3, usize)> {
        let mut proposals = 0;
        loop {
            proposals += 1;
            let x = self.proposal.sample_one(self.target.frame(), rng);
            let log_ratio = self.log_ratio(&x);
            if log_ratio > self.log_bound {
                return Err(Error::EnvelopeViolation {
                    log_ratio,
                    log_bound: self.log_bound,
                });
            }
            let u: f64 = rng.random();
            if u.ln() < log_ratio - self.log_bound {
                return Ok((x, proposals));
            }
        }
    }

    pub fn sample_with_rng<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<UnitVec3>> {
        (0..n).map(|_| self.draw(rng).map(|(x, _)| x)).collect()
    }
}

/// `n` independent draws from `model`, reproducible for a given seed.
pub fn sample(model: &GeodesicNormal, n: usize, seed: u64) -> Result<Vec<UnitVec3>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample size must be at least 1".into(),
        ));
    }
    let sampler = RejectionSampler::new(*model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sampler.sample_with_rng(n, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{complete_frame, log_map};
    use nalgebra::Vector3;

    #[test]
    fn same_seed_same_points() {
        let m = GeodesicNormal::new(Frame3::standard(), 3.0, 8.0).unwrap();
        assert_eq!(sample(&m, 1, 42).unwrap(), sample(&m, 1, 42).unwrap());
        assert_ne!(sample(&m, 1, 42).unwrap(), sample(&m, 1, 43).unwrap());
        assert!(sample(&m, 0, 42).is_err());
    }

    #[test]
    fn envelope_peaks_at_the_mean() {
        let m = GeodesicNormal::new(Frame3::standard(), 10.0, 100.0).unwrap();
        let s = RejectionSampler::new(m).unwrap();
        assert_eq!(s.proposal_kappa(), 10.0);
        // log ratio at mu is -kappa_p
        assert!((s.log_bound() - (-10.0 + 1.1f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn vmf_draws_match_the_mean_cosine() {
        // E[x.mu] = coth(kappa) - 1/kappa
        let kappa = 5.0;
        let vmf = VonMisesFisher::new(UnitVec3::e3(), kappa).unwrap();
        let frame = complete_frame(&UnitVec3::e3(), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 40000;
        let mean: f64 = (0..n)
            .map(|_| vmf.sample_one(&frame, &mut rng).x3())
            .sum::<f64>()
            / n as f64;
        let want = 1.0 / kappa.tanh() - 1.0 / kappa;
        assert!((mean - want).abs() < 0.005, "{mean} vs {want}");
    }

    #[test]
    fn isotropic_draws_center_on_the_mean() {
        let mu = UnitVec3::new(0.2, -0.3, 0.9).unwrap();
        let m = GeodesicNormal::new(complete_frame(&mu, None).unwrap(), 25.0, 25.0).unwrap();
        let xs = sample(&m, 20000, 5).unwrap();
        let resultant: Vector3<f64> = xs.iter().map(|x| *x.as_vector()).sum();
        let dir = UnitVec3::from_vector(resultant).unwrap();
        assert!(dir.cos_angle(&mu).acos().to_degrees() < 2.0);
    }

    #[test]
    fn anisotropic_draws_spread_along_the_major_axis() {
        let m = GeodesicNormal::new(Frame3::standard(), 10.0, 100.0).unwrap();
        let xs = sample(&m, 20000, 6).unwrap();
        let (mut ve, mut vx) = (0.0, 0.0);
        for x in &xs {
            let y = log_map(m.mu(), x).unwrap();
            ve += y.dot_point(m.frame().eta()).powi(2);
            vx += y.dot_point(m.frame().xi()).powi(2);
        }
        assert!(ve / vx > 2.0, "variance ratio {}", ve / vx);
    }

    #[test]
    fn zero_concentration_axis_uses_uniform_proposal() {
        let m = GeodesicNormal::new(Frame3::standard(), 0.0, 4.0).unwrap();
        let xs = sample(&m, 200, 1).unwrap();
        assert_eq!(xs.len(), 200);
    }
}
