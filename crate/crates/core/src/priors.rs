//! Prior density over [`EarthquakeParams`] and prior sampling.
//!
//! Latitude and longitude carry no density of their own: they inherit one
//! from a truncated normal on the interface depth at that location, taken
//! against a uniform base measure on the geometry's bounding region (no
//! surface-to-depth Jacobian). The density is unnormalized in (lat, lon),
//! which is all the sampler needs.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::geometry::{EarthquakeParams, FaultGeometry};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Proposals tried by [`sample_prior`] before giving up on the location.
pub const MAX_LOCATION_PROPOSALS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    pub mean: f64,
    pub std: f64,
}

impl Normal {
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std;
        -0.5 * z * z - self.std.ln() - LN_SQRT_2PI
    }
}

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedNormal {
    fn mass(&self) -> f64 {
        phi((self.upper - self.mean) / self.std) - phi((self.lower - self.mean) / self.std)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(self.lower..=self.upper).contains(&x) {
            return f64::NEG_INFINITY;
        }
        Normal { mean: self.mean, std: self.std }.ln_pdf(x) - self.mass().ln()
    }

    /// Largest value of the density on its support.
    pub fn max_ln_pdf(&self) -> f64 {
        self.ln_pdf(self.mean.clamp(self.lower, self.upper))
    }
}

/// Exponential with rate λ restricted to [lower, upper]:
/// pdf(m) ∝ exp(−λ(m − lower)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedExponential {
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedExponential {
    fn ln_norm(&self) -> f64 {
        // ∫ λ e^{−λ(m−a)} dm over [a, b] = 1 − e^{−λ(b−a)}
        (-(-self.rate * (self.upper - self.lower)).exp_m1()).ln()
    }

    pub fn ln_pdf(&self, m: f64) -> f64 {
        if !(self.lower..=self.upper).contains(&m) {
            return f64::NEG_INFINITY;
        }
        self.rate.ln() - self.rate * (m - self.lower) - self.ln_norm()
    }

    pub fn mean(&self) -> f64 {
        let w = self.upper - self.lower;
        self.lower + 1.0 / self.rate - w / (self.rate * w).exp_m1()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let span = -(-self.rate * (self.upper - self.lower)).exp_m1();
        let m = self.lower - (-u * span).ln_1p() / self.rate;
        m.clamp(self.lower, self.upper)
    }
}

/// Priors on the six source parameters. In configuration files this is a
/// flat section (`depth_mean`, `magnitude_rate`, ...); see [`PriorFields`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PriorFields", into = "PriorFields")]
pub struct PriorSpec {
    /// Interface depth at (lat, lon), km.
    pub depth: TruncatedNormal,
    /// Depth offset, km.
    pub depth_offset: Normal,
    pub magnitude: TruncatedExponential,
    pub dlogl: Normal,
    pub dlogw: Normal,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            depth: TruncatedNormal { mean: 30.0, std: 5.0, lower: 2.5, upper: 50.0 },
            depth_offset: Normal { mean: 0.0, std: 5.0 },
            magnitude: TruncatedExponential { rate: 0.5, lower: 6.5, upper: 9.5 },
            dlogl: Normal { mean: 0.0, std: 0.188 },
            dlogw: Normal { mean: 0.0, std: 0.172 },
        }
    }
}

/// Flat key-value form of [`PriorSpec`]; omitted keys take the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorFields {
    pub depth_mean: f64,
    pub depth_std: f64,
    pub depth_lower: f64,
    pub depth_upper: f64,
    pub depth_offset_mean: f64,
    pub depth_offset_std: f64,
    pub magnitude_rate: f64,
    pub magnitude_lower: f64,
    pub magnitude_upper: f64,
    pub dlogl_mean: f64,
    pub dlogl_std: f64,
    pub dlogw_mean: f64,
    pub dlogw_std: f64,
}

impl Default for PriorFields {
    fn default() -> Self {
        PriorSpec::default().into()
    }
}

impl From<PriorSpec> for PriorFields {
    fn from(p: PriorSpec) -> Self {
        PriorFields {
            depth_mean: p.depth.mean,
            depth_std: p.depth.std,
            depth_lower: p.depth.lower,
            depth_upper: p.depth.upper,
            depth_offset_mean: p.depth_offset.mean,
            depth_offset_std: p.depth_offset.std,
            magnitude_rate: p.magnitude.rate,
            magnitude_lower: p.magnitude.lower,
            magnitude_upper: p.magnitude.upper,
            dlogl_mean: p.dlogl.mean,
            dlogl_std: p.dlogl.std,
            dlogw_mean: p.dlogw.mean,
            dlogw_std: p.dlogw.std,
        }
    }
}

impl From<PriorFields> for PriorSpec {
    fn from(f: PriorFields) -> Self {
        PriorSpec {
            depth: TruncatedNormal { mean: f.depth_mean, std: f.depth_std, lower: f.depth_lower, upper: f.depth_upper },
            depth_offset: Normal { mean: f.depth_offset_mean, std: f.depth_offset_std },
            magnitude: TruncatedExponential { rate: f.magnitude_rate, lower: f.magnitude_lower, upper: f.magnitude_upper },
            dlogl: Normal { mean: f.dlogl_mean, std: f.dlogl_std },
            dlogw: Normal { mean: f.dlogw_mean, std: f.dlogw_std },
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let sigmas = [self.depth.std, self.depth_offset.std, self.dlogl.std, self.dlogw.std];
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("prior standard deviations must be positive: {sigmas:?}")));
        }
        if !(self.depth.lower < self.depth.upper) || !(self.magnitude.lower < self.magnitude.upper) {
            return Err(Error::Config("prior bounds must satisfy lower < upper".into()));
        }
        if !(self.magnitude.rate > 0.0) {
            return Err(Error::Config("magnitude prior rate must be positive".into()));
        }
        Ok(())
    }

    /// Log prior density; −∞ outside the support.
    pub fn log_prior(&self, p: &EarthquakeParams, geom: &FaultGeometry) -> f64 {
        if !p.to_array().iter().all(|v| v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let magnitude = self.magnitude.ln_pdf(p.magnitude);
        if magnitude == f64::NEG_INFINITY {
            return magnitude;
        }
        let location = match geom.interp(p.lat, p.lon) {
            Ok(iface) => self.depth.ln_pdf(iface.depth),
            Err(_) => return f64::NEG_INFINITY,
        };
        location
            + self.depth_offset.ln_pdf(p.depth_offset)
            + magnitude
            + self.dlogl.ln_pdf(p.dlogl)
            + self.dlogw.ln_pdf(p.dlogw)
    }

    /// Draws each component independently. The location is drawn by
    /// rejection: uniform over the geometry region, accepted with probability
    /// proportional to the depth density at that point.
    pub fn sample<R: Rng + ?Sized>(&self, geom: &FaultGeometry, rng: &mut R) -> Result<EarthquakeParams> {
        let region = geom.region();
        let ceiling = self.depth.max_ln_pdf();
        let mut location = None;
        for _ in 0..MAX_LOCATION_PROPOSALS {
            let lat = rng.random_range(region.lat_min..=region.lat_max);
            let lon = rng.random_range(region.lon_min..=region.lon_max);
            let Ok(iface) = geom.interp(lat, lon) else { continue };
            let ln_accept = self.depth.ln_pdf(iface.depth) - ceiling;
            let u: f64 = rng.random();
            if u.ln() < ln_accept {
                location = Some((lat, lon));
                break;
            }
        }
        let (lat, lon) = location.ok_or_else(|| {
            Error::Config(format!(
                "no location with interface depth in [{}, {}] km found after {MAX_LOCATION_PROPOSALS} proposals; \
                 geometry and depth prior do not overlap",
                self.depth.lower, self.depth.upper
            ))
        })?;

        let normal = |n: &Normal, rng: &mut R| {
            let z: f64 = StandardNormal.sample(rng);
            n.mean + n.std * z
        };
        Ok(EarthquakeParams {
            lat,
            lon,
            depth_offset: normal(&self.depth_offset, rng),
            magnitude: self.magnitude.sample(rng),
            dlogl: normal(&self.dlogl, rng),
            dlogw: normal(&self.dlogw, rng),
        })
    }
}

/// Log prior density; see [`PriorSpec::log_prior`].
pub fn log_prior(p: &EarthquakeParams, spec: &PriorSpec, geom: &FaultGeometry) -> f64 {
    spec.log_prior(p, geom)
}

/// One prior draw; see [`PriorSpec::sample`].
pub fn sample_prior<R: Rng + ?Sized>(spec: &PriorSpec, geom: &FaultGeometry, rng: &mut R) -> Result<EarthquakeParams> {
    spec.sample(geom, rng)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometrySample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geometry() -> FaultGeometry {
        let mut samples = Vec::new();
        for i in 0..=10 {
            for j in 0..=10 {
                let lat = -8.0 + 0.4 * i as f64;
                let lon = 128.0 + 0.5 * j as f64;
                samples.push(GeometrySample { lat, lon, depth: 1.0 + 12.0 * (lon - 128.0), strike: 0.0, dip: 15.0 });
            }
        }
        FaultGeometry::new(samples).unwrap()
    }

    fn at(magnitude: f64) -> EarthquakeParams {
        EarthquakeParams { lat: -5.0, lon: 130.5, depth_offset: 0.0, magnitude, dlogl: 0.0, dlogw: 0.0 }
    }

    #[test]
    fn magnitude_outside_bounds_has_no_support() {
        let spec = PriorSpec::default();
        let g = geometry();
        assert_eq!(spec.log_prior(&at(10.0), &g), f64::NEG_INFINITY);
        assert_eq!(spec.log_prior(&at(6.4), &g), f64::NEG_INFINITY);
        assert!(spec.log_prior(&at(8.0), &g).is_finite());
    }

    #[test]
    fn dlogl_at_mean_contributes_the_mode() {
        let spec = PriorSpec::default();
        let g = geometry();
        let base = spec.log_prior(&at(8.0), &g);
        let mut shifted = at(8.0);
        shifted.dlogl = 0.1;
        let expected_mode = -(0.188 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((spec.dlogl.ln_pdf(0.0) - expected_mode).abs() < 1e-14);
        assert!((base - spec.log_prior(&shifted, &g) - 0.5 * (0.1f64 / 0.188).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn location_outside_depth_bounds_or_region() {
        let spec = PriorSpec::default();
        let g = geometry();
        let mut p = at(8.0);
        p.lon = 128.1; // interface depth 2.2 km
        assert_eq!(spec.log_prior(&p, &g), f64::NEG_INFINITY);
        p.lon = 140.0;
        assert_eq!(spec.log_prior(&p, &g), f64::NEG_INFINITY);
        p.lon = f64::NAN;
        assert_eq!(spec.log_prior(&p, &g), f64::NEG_INFINITY);
    }

    #[test]
    fn draws_lie_in_support() {
        let spec = PriorSpec::default();
        let g = geometry();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let p = spec.sample(&g, &mut rng).unwrap();
            assert!(p.magnitude > 6.5 && p.magnitude < 9.5);
            let depth = g.interp(p.lat, p.lon).unwrap().depth;
            assert!(depth > 2.5 && depth < 50.0, "depth {depth}");
            assert!(spec.log_prior(&p, &g) > f64::NEG_INFINITY);
        }
    }

    #[test]
    fn mismatched_geometry_is_a_config_error() {
        let spec = PriorSpec {
            depth: TruncatedNormal { mean: 300.0, std: 5.0, lower: 290.0, upper: 310.0 },
            ..PriorSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(spec.sample(&geometry(), &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn validation() {
        assert!(PriorSpec::default().validate().is_ok());
        let mut bad = PriorSpec::default();
        bad.dlogw.std = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = PriorSpec::default();
        bad.magnitude.lower = 9.6;
        assert!(bad.validate().is_err());
    }
}
