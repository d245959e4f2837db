//! Bayesian source inversion for pre-instrumental earthquakes.
//!
//! The crate couples a simplified tsunami forward model (fault geometry,
//! Okada dislocation, linear long-wave propagation) with observation
//! distributions that encode uncertain historical accounts, samples the
//! resulting posterior with multi-chain random-walk Metropolis–Hastings plus
//! periodic importance resampling, and quantifies how sensitive the posterior
//! is to the choice of observation distributions.
//!
//! Module map:
//!
//! - [`geometry`]: six-parameter earthquake description to Okada rectangles.
//! - [`okada`]: vertical seafloor displacement from rectangular dislocations.
//! - [`wavesim`]: staggered-grid linear shallow-water propagation and gauge observables.
//! - [`priors`]: prior density and prior sampling.
//! - [`obsmodel`]: observation distributions and the total log-likelihood.
//! - [`mcmc`]: the sampler, sample store and diagnostics.
//! - [`sensitivity`]: scores, Fisher information, relative-entropy bounds.
//! - [`scenario`]: configuration, forward-model composition, file formats, synthetic scenarios.

pub mod error;
pub mod geometry;
pub mod grid;
pub mod mcmc;
pub mod obsmodel;
pub mod okada;
pub mod priors;
pub mod scenario;
pub mod sensitivity;
pub mod special;
pub mod wavesim;

pub use error::{Error, Result};
pub use geometry::{EarthquakeParams, FaultGeometry, OkadaRect, ScalingLaw};
pub use grid::{BathymetryGrid, DeformationGrid, GridSpec};
pub use mcmc::{SampleRecord, SampleStore, SamplerConfig};
pub use obsmodel::{ObsDist, ObsKind, Observation};
pub use priors::PriorSpec;
pub use scenario::{ForwardModel, Scenario, ScenarioConfig};
pub use sensitivity::{BoundCurve, FIMatrix, ObsParamVector};
pub use wavesim::{ForwardOutput, Gauge, GaugeObservables};

/// Mean earth radius used for every flat-earth conversion, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters per degree of latitude on the spherical earth.
pub const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
