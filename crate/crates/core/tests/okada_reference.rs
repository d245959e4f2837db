//! Cross-check of the finite-rectangle Okada field against numerically
//! integrated point sources.

#[path = "support/okada_point.rs"]
mod okada_point;

use histquake_core::geometry::OkadaRect;
use histquake_core::grid::GridSpec;
use histquake_core::okada::{compute_deformation, uz_rectangle};
use okada_point::{uz_integrated, M_PER_DEG};

#[test]
fn finite_formula_matches_integrated_point_source_in_fault_frame() {
    let dip = 30f64.to_radians();
    let (l, w, d) = (60e3, 30e3, 35e3);
    for &(x, y) in &[(-40e3, 10e3), (10e3, -25e3), (30e3, 30e3), (75e3, 50e3), (20e3, 5e3), (100e3, -60e3)] {
        for &(ss, ds) in &[(1.0, 0.0), (0.0, 1.0)] {
            let closed = uz_rectangle(x, y, d, dip, l, w, ss, ds);
            let integrated = uz_integrated(x, y, d, dip, l, w, ss, ds);
            assert!(
                (closed - integrated).abs() < 1e-9,
                "({x}, {y}) ss={ss} ds={ds}: closed {closed} vs quadrature {integrated}"
            );
        }
    }
}

#[test]
fn thrust_rectangle_field_matches_reference_on_grid() {
    let rect = OkadaRect {
        centroid_lat: -4.0,
        centroid_lon: 131.0,
        depth: 25.0,
        strike: 40.0,
        dip: 30.0,
        rake: 90.0,
        length: 80.0,
        width: 40.0,
        slip: 6.0,
    };
    let spec = GridSpec::new(-5.0, 130.0, 0.2, 0.2, 11, 11).unwrap();
    let field = compute_deformation(&[rect], &spec).unwrap();

    // Independent frame construction from the documented conventions.
    let coslat = rect.centroid_lat.to_radians().cos();
    let dip = rect.dip.to_radians();
    let (ss_, cs_) = rect.strike.to_radians().sin_cos();
    let (l, w) = (rect.length * 1e3, rect.width * 1e3);
    let bottom = rect.depth * 1e3 + 0.5 * w * dip.sin();
    let mut worst: f64 = 0.0;
    for row in 0..spec.nlat {
        for col in 0..spec.nlon {
            let east = (spec.lon(col) - rect.centroid_lon) * coslat * M_PER_DEG;
            let north = (spec.lat(row) - rect.centroid_lat) * M_PER_DEG;
            let xc = east * ss_ + north * cs_;
            let yc = -east * cs_ + north * ss_;
            let x = xc + 0.5 * l;
            let y = yc + 0.5 * w * dip.cos();
            let reference = uz_integrated(x, y, bottom, dip, l, w, 0.0, rect.slip);
            let got = field.at(row, col);
            worst = worst.max((got - reference).abs());
            assert!(
                (got - reference).abs() < 1e-6,
                "cell ({row}, {col}): {got} vs {reference}"
            );
        }
    }
    assert!(field.max_abs() > 0.5, "field should be of metre scale");
    eprintln!("max |okada - reference| = {worst:e} m");
}
