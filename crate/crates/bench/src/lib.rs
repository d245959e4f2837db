//! Fixtures shared by the benchmarks.

use histquake_core::scenario::{synthetic_sampler, write_synthetic_bundle, SyntheticSpec};
use histquake_core::{EarthquakeParams, Scenario};

/// The built-in synthetic scenario, loaded from a scratch directory, plus its
/// true source.
pub fn synthetic_scenario() -> (Scenario, EarthquakeParams) {
    let dir = tempfile::tempdir().expect("scratch directory");
    let bundle = write_synthetic_bundle(&SyntheticSpec::default(), dir.path(), 1, synthetic_sampler())
        .expect("synthetic scenario");
    let scenario = Scenario::from_file(&bundle.config_path).expect("load synthetic scenario");
    (scenario, bundle.truth)
}
