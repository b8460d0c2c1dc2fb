use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{OnceLock, RwLock};

use super::Model;
use crate::error::Result;
use crate::quadrature::integrate_adaptive_oriented;
use crate::sphere::Frame3;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct ConstantKey {
    family: &'static str,
    params: [String; 2],
    rel_tol: u64,
}

/// 12 significant digits.
fn round_param(v: f64) -> String {
    format!("{v:.11e}")
}

impl ConstantKey {
    fn of(model: &Model, rel_tol: f64) -> Self {
        let (family, a, b) = match model {
            Model::GeodesicNormal(m) => ("geodesic_normal", m.lambda1(), m.lambda2()),
            Model::Isotropic(m) => ("isotropic_gn", m.kappa(), 0.0),
            Model::VonMisesFisher(m) => ("vmf", m.kappa(), 0.0),
            Model::Kent(m) => ("kent", m.kappa(), m.ovalness()),
        };
        ConstantKey {
            family,
            params: [round_param(a), round_param(b)],
            rel_tol: rel_tol.to_bits(),
        }
    }
}

/// Log normalizing constants keyed on the concentration parameters.
///
/// Values are deterministic functions of the key, so concurrent writers
/// racing on the same key store the same number.
#[derive(Debug, Default)]
pub struct ConstantCache {
    values: RwLock<HashMap<ConstantKey, f64>>,
    integrations: AtomicUsize,
    lookups: AtomicUsize,
}

impl ConstantCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn global() -> &'static ConstantCache {
        static GLOBAL: OnceLock<ConstantCache> = OnceLock::new();
        GLOBAL.get_or_init(ConstantCache::new)
    }

    /// Number of quadratures actually run (cache misses).
    pub fn integrations(&self) -> usize {
        self.integrations.load(Ordering::Relaxed)
    }

    pub fn lookups(&self) -> usize {
        self.lookups.load(Ordering::Relaxed)
    }

    pub fn log_normalizing_constant(&self, model: &Model, rel_tol: f64) -> Result<f64> {
        self.lookups.fetch_add(1, Ordering::Relaxed);
        let key = ConstantKey::of(model, rel_tol);
        if let Some(v) = self.values.read().expect("poisoned").get(&key) {
            return Ok(*v);
        }
        let value = compute_log_constant(model, rel_tol)?;
        self.integrations.fetch_add(1, Ordering::Relaxed);
        self.values.write().expect("poisoned").insert(key, value);
        Ok(value)
    }
}

/// Integrates the canonical copy of `model` with the rule's pole on its mean.
fn compute_log_constant(model: &Model, rel_tol: f64) -> Result<f64> {
    let canonical = model.canonical();
    let shift = canonical.log_density_bound();
    let integral = integrate_adaptive_oriented(
        &Frame3::standard(),
        |x| (canonical.log_density_unnorm(x) - shift).exp(),
        rel_tol,
    )?;
    Ok(shift + integral.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::GeodesicNormal;
    use crate::sphere::{complete_frame, UnitVec3};

    #[test]
    fn cache_ignores_frame_and_rounding_noise() {
        let cache = ConstantCache::new();
        let a: Model = GeodesicNormal::new(Frame3::standard(), 4.0, 9.0)
            .unwrap()
            .into();
        let frame = complete_frame(&UnitVec3::new(0.2, -0.4, 0.7).unwrap(), None).unwrap();
        let b: Model = GeodesicNormal::new(frame, 4.0 * (1.0 + 1e-15), 9.0)
            .unwrap()
            .into();
        let ca = cache.log_normalizing_constant(&a, 1e-9).unwrap();
        let cb = cache.log_normalizing_constant(&b, 1e-9).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(cache.integrations(), 1);
        assert_eq!(cache.lookups(), 2);

        let c: Model = GeodesicNormal::new(Frame3::standard(), 4.1, 9.0)
            .unwrap()
            .into();
        cache.log_normalizing_constant(&c, 1e-9).unwrap();
        assert_eq!(cache.integrations(), 2);
    }

    #[test]
    fn concurrent_lookups_agree() {
        let cache = ConstantCache::new();
        let m: Model = GeodesicNormal::new(Frame3::standard(), 1.0, 3.0)
            .unwrap()
            .into();
        let values: Vec<f64> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..4)
                .map(|_| s.spawn(|| cache.log_normalizing_constant(&m, 1e-9).unwrap()))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(values.windows(2).all(|w| w[0].to_bits() == w[1].to_bits()));
    }
}
