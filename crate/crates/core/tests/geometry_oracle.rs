use histquake_core::geometry::{FaultGeometry, GeometrySample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute force: sort every sample by distance on the local equirectangular
/// plane, keep four, weight by inverse squared distance.
fn idw_reference(samples: &[GeometrySample], lat: f64, lon: f64) -> (f64, f64, f64) {
    let coslat = lat.to_radians().cos();
    let mut by_distance: Vec<(f64, &GeometrySample)> = samples
        .iter()
        .map(|s| (((s.lon - lon) * coslat).powi(2) + (s.lat - lat).powi(2), s))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nearest = &by_distance[..4];
    let total: f64 = nearest.iter().map(|(d2, _)| 1.0 / d2).sum();
    let (mut depth, mut dip, mut sx, mut cx) = (0.0, 0.0, 0.0, 0.0);
    for (d2, s) in nearest {
        let w = 1.0 / d2 / total;
        depth += w * s.depth;
        dip += w * s.dip;
        sx += w * s.strike.to_radians().sin();
        cx += w * s.strike.to_radians().cos();
    }
    (depth, sx.atan2(cx).to_degrees().rem_euclid(360.0), dip)
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[test]
fn scattered_interpolation_matches_brute_force_idw() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<GeometrySample> = (0..60)
        .map(|_| {
            let lat = rng.random_range(-8.0..-2.0);
            let lon = rng.random_range(127.0..133.0);
            GeometrySample {
                lat,
                lon,
                depth: 10.0 + 5.0 * (lon - 127.0) + rng.random_range(0.0..3.0),
                strike: rng.random_range(340.0..380.0f64).rem_euclid(360.0),
                dip: rng.random_range(8.0..25.0),
            }
        })
        .collect();
    let geom = FaultGeometry::new(samples.clone()).unwrap();
    assert!(!geom.is_gridded());
    let r = geom.region();
    for _ in 0..500 {
        let lat = rng.random_range(r.lat_min..r.lat_max);
        let lon = rng.random_range(r.lon_min..r.lon_max);
        let got = geom.interp(lat, lon).unwrap();
        let (depth, strike, dip) = idw_reference(&samples, lat, lon);
        assert!((got.depth - depth).abs() < 1e-9, "depth at ({lat}, {lon}): {} vs {depth}", got.depth);
        assert!((got.dip - dip).abs() < 1e-9);
        assert!(angle_gap(got.strike, strike) < 1e-9, "strike {} vs {strike}", got.strike);
    }
    for s in &samples {
        let p = geom.interp(s.lat, s.lon).unwrap();
        assert_eq!((p.depth, p.strike, p.dip), (s.depth, s.strike, s.dip));
    }
}

#[test]
fn gridded_interpolation_reproduces_bilinear_fields() {
    // depth = a + b·lat + c·lon + e·lat·lon is reproduced exactly by bilinear interpolation.
    let field = |lat: f64, lon: f64| 40.0 + 2.0 * lat + 3.0 * (lon - 130.0) + 0.5 * lat * (lon - 130.0);
    let mut samples = Vec::new();
    for i in 0..9 {
        for j in 0..7 {
            let (lat, lon) = (-6.0 + 0.5 * i as f64, 129.0 + 0.4 * j as f64);
            samples.push(GeometrySample { lat, lon, depth: field(lat, lon), strike: 10.0, dip: 12.0 + 0.1 * j as f64 });
        }
    }
    // Table order must not matter.
    samples.reverse();
    let geom = FaultGeometry::new(samples).unwrap();
    assert!(geom.is_gridded());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..500 {
        let lat = rng.random_range(-6.0..-2.0);
        let lon = rng.random_range(129.0..131.4);
        let p = geom.interp(lat, lon).unwrap();
        assert!((p.depth - field(lat, lon)).abs() < 1e-9, "({lat}, {lon}): {} vs {}", p.depth, field(lat, lon));
        assert!((p.dip - (12.0 + 0.1 * (lon - 129.0) / 0.4)).abs() < 1e-9);
        assert!(angle_gap(p.strike, 10.0) < 1e-9);
    }
}
