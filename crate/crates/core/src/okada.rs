//! Vertical surface displacement of an elastic half-space due to rectangular
//! dislocations (Okada, 1985).
//!
//! Each rectangle is evaluated in its own fault-aligned frame: x along
//! strike, y perpendicular to strike (pointing to the hanging-wall side's
//! opposite, so that the fault dips toward −y), origin at the deepest corner
//! where the strike-parallel bottom edge starts. Geographic points are mapped
//! onto a flat-earth plane tangent at the first rectangle's centroid.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::OkadaRect;
use crate::grid::{DeformationGrid, GridSpec};
use crate::METERS_PER_DEGREE;

/// μ/(λ + μ) for a Poisson solid (λ = μ).
pub const POISSON_MU_RATIO: f64 = 0.5;

/// Smallest dip evaluated, degrees.
const MIN_DIP_DEG: f64 = 1e-3;

/// Relative size of the nudge applied to evaluation points that fall on a
/// singular line of the formulas, as a fraction of a grid cell.
const EDGE_NUDGE: f64 = 1e-6;

/// A rectangle expressed in its Okada frame, lengths in meters.
#[derive(Debug, Clone, Copy)]
pub struct FaultFrame {
    /// Plane coordinates (east, north) of the origin corner, meters.
    origin: (f64, f64),
    /// Unit vector along strike in (east, north).
    along: (f64, f64),
    /// Unit vector perpendicular to strike, 90° counter-clockwise of `along`.
    across: (f64, f64),
    /// Depth of the bottom edge, meters.
    pub depth: f64,
    pub dip: f64,
    pub length: f64,
    pub width: f64,
    pub strike_slip: f64,
    pub dip_slip: f64,
}

/// Local flat-earth plane tangent at a reference point.
#[derive(Debug, Clone, Copy)]
pub struct TangentPlane {
    lat0: f64,
    lon0: f64,
    coslat0: f64,
}

impl TangentPlane {
    pub fn new(lat0: f64, lon0: f64) -> Self {
        TangentPlane { lat0, lon0, coslat0: lat0.to_radians().cos() }
    }

    /// (east, north) in meters.
    pub fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        (
            (lon - self.lon0) * self.coslat0 * METERS_PER_DEGREE,
            (lat - self.lat0) * METERS_PER_DEGREE,
        )
    }
}

impl FaultFrame {
    pub fn new(rect: &OkadaRect, plane: &TangentPlane) -> Self {
        let dip = rect.dip.abs().max(MIN_DIP_DEG).min(90.0).to_radians();
        let (ss, cs) = rect.strike.to_radians().sin_cos();
        let along = (ss, cs);
        let across = (-cs, ss);
        let length = rect.length * 1e3;
        let width = rect.width * 1e3;
        let (ce, cn) = plane.project(rect.centroid_lat, rect.centroid_lon);
        // Centroid sits at x = L/2, y = (W/2)·cos δ in the fault frame.
        let hx = 0.5 * length;
        let hy = 0.5 * width * dip.cos();
        let origin = (
            ce - hx * along.0 - hy * across.0,
            cn - hx * along.1 - hy * across.1,
        );
        let (sr, cr) = rect.rake.to_radians().sin_cos();
        FaultFrame {
            origin,
            along,
            across,
            depth: rect.depth * 1e3 + 0.5 * width * dip.sin(),
            dip,
            length,
            width,
            strike_slip: rect.slip * cr,
            dip_slip: rect.slip * sr,
        }
    }

    /// Fault-frame (x, y) of a plane point.
    pub fn local(&self, east: f64, north: f64) -> (f64, f64) {
        let de = east - self.origin.0;
        let dn = north - self.origin.1;
        (
            de * self.along.0 + dn * self.along.1,
            de * self.across.0 + dn * self.across.1,
        )
    }

    /// Vertical displacement at fault-frame point (x, y), meters.
    pub fn uz(&self, x: f64, y: f64) -> f64 {
        uz_rectangle(
            x,
            y,
            self.depth,
            self.dip,
            self.length,
            self.width,
            self.strike_slip,
            self.dip_slip,
        )
    }
}

/// Okada (1985) vertical surface displacement for a finite rectangle.
///
/// `x`, `y` are surface coordinates in the fault frame, `depth` is the depth
/// of the origin (bottom edge), `dip` is in radians. Returns the sum of the
/// strike-slip and dip-slip contributions.
#[allow(clippy::too_many_arguments)]
pub fn uz_rectangle(
    x: f64,
    y: f64,
    depth: f64,
    dip: f64,
    length: f64,
    width: f64,
    strike_slip: f64,
    dip_slip: f64,
) -> f64 {
    let (sd, cd) = dip.sin_cos();
    let p = y * cd + depth * sd;
    let q = y * sd - depth * cd;

    // Chinnery's notation: f(x, p) − f(x, p − W) − f(x − L, p) + f(x − L, p − W)
    let corner = |xi: f64, eta: f64| corner_terms(xi, eta, q, sd, cd);
    let (s1, d1) = corner(x, p);
    let (s2, d2) = corner(x, p - width);
    let (s3, d3) = corner(x - length, p);
    let (s4, d4) = corner(x - length, p - width);

    let ss = s1 - s2 - s3 + s4;
    let ds = d1 - d2 - d3 + d4;
    -(strike_slip * ss + dip_slip * ds) / (2.0 * PI)
}

/// Strike-slip and dip-slip vertical terms at one corner of the rectangle.
fn corner_terms(xi: f64, eta: f64, q: f64, sd: f64, cd: f64) -> (f64, f64) {
    let r = (xi * xi + eta * eta + q * q).sqrt();
    let dt = eta * sd - q * cd;
    let rx = r + xi;
    let re = r + eta;

    // Singular limits per Okada: 1/(R+η) → 0 and ln(R+η) → −ln(R−η) when R + η = 0.
    let (inv_re, ln_re) = if re.abs() < 1e-12 * r.max(1.0) {
        (0.0, -(r - eta).ln())
    } else {
        (1.0 / re, re.ln())
    };
    let inv_rx = if rx.abs() < 1e-12 * r.max(1.0) { 0.0 } else { 1.0 / rx };
    let theta = if q == 0.0 { 0.0 } else { (xi * eta / (q * r)).atan() };

    let (i4, i5) = if cd.abs() > 1e-10 {
        let i4 = POISSON_MU_RATIO / cd * ((r + dt).ln() - sd * ln_re);
        let i5 = if xi == 0.0 {
            0.0
        } else {
            let big_x = (xi * xi + q * q).sqrt();
            POISSON_MU_RATIO * 2.0 / cd
                * ((eta * (big_x + q * cd) + big_x * (r + big_x) * sd) / (xi * (r + big_x) * cd)).atan()
        };
        (i4, i5)
    } else {
        let i4 = -POISSON_MU_RATIO * q / (r + dt);
        let i5 = -POISSON_MU_RATIO * xi * sd / (r + dt);
        (i4, i5)
    };

    let strike = dt * q * inv_re / r + q * sd * inv_re + i4 * sd;
    let dip = dt * q * inv_rx / r + sd * theta - i5 * sd * cd;
    (strike, dip)
}

/// True when the point sits on a line where the corner formulas are singular.
fn on_singular_line(frame: &FaultFrame, x: f64, y: f64) -> bool {
    let q = y * frame.dip.sin() - frame.depth * frame.dip.cos();
    let tol = 1e-9 * frame.length.max(frame.width);
    q.abs() < tol || x.abs() < tol || (x - frame.length).abs() < tol
}

/// Sums the vertical displacement of every rectangle over the grid.
///
/// Rows are evaluated in parallel; every cell is a fixed-order sum over the
/// rectangles, so the result does not depend on scheduling.
pub fn compute_deformation(rects: &[OkadaRect], spec: &GridSpec) -> Result<DeformationGrid> {
    for r in rects {
        r.validate()?;
    }
    let Some(first) = rects.first() else {
        return Ok(DeformationGrid::zeros(*spec));
    };
    let plane = TangentPlane::new(first.centroid_lat, first.centroid_lon);
    let frames: Vec<FaultFrame> = rects.iter().map(|r| FaultFrame::new(r, &plane)).collect();
    let (cell_dx, cell_dy) = spec.cell_size_m();
    let nudge = EDGE_NUDGE * cell_dx.min(cell_dy);

    let mut dz = vec![0.0; spec.len()];
    dz.par_chunks_mut(spec.nlon).enumerate().for_each(|(row, out)| {
        let lat = spec.lat(row);
        for (col, cell) in out.iter_mut().enumerate() {
            let (e, n) = plane.project(lat, spec.lon(col));
            let mut total = 0.0;
            for f in &frames {
                let (mut x, mut y) = f.local(e, n);
                if on_singular_line(f, x, y) {
                    x += nudge;
                    y += nudge;
                }
                let v = f.uz(x, y);
                if v.is_finite() {
                    total += v;
                }
            }
            *cell = total;
        }
    });
    Ok(DeformationGrid { spec: *spec, dz })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Check values from Okada (1985), Table 2, case 2:
    // x = 2, y = 3, d = 4, δ = 70°, L = 3, W = 2, unit slip.
    #[test]
    fn okada_table_check_values() {
        let dip = 70f64.to_radians();
        let uz_ss = uz_rectangle(2.0, 3.0, 4.0, dip, 3.0, 2.0, 1.0, 0.0);
        let uz_ds = uz_rectangle(2.0, 3.0, 4.0, dip, 3.0, 2.0, 0.0, 1.0);
        assert!((uz_ss - -2.747e-3).abs() < 0.0005e-3, "strike-slip uz {uz_ss}");
        assert!((uz_ds - -3.564e-2).abs() < 0.0005e-2, "dip-slip uz {uz_ds}");
    }

    #[test]
    fn zero_slip_is_zero_field() {
        let rect = OkadaRect {
            centroid_lat: 0.0,
            centroid_lon: 0.0,
            depth: 20.0,
            strike: 30.0,
            dip: 20.0,
            rake: 90.0,
            length: 80.0,
            width: 40.0,
            slip: 0.0,
        };
        let spec = GridSpec::new(-1.0, -1.0, 0.1, 0.1, 21, 21).unwrap();
        let g = compute_deformation(&[rect], &spec).unwrap();
        assert!(g.dz.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_dip_is_finite() {
        let v = uz_rectangle(1.0, 0.5, 5.0, 90f64.to_radians(), 3.0, 2.0, 1.0, 1.0);
        assert!(v.is_finite());
        let near = uz_rectangle(1.0, 0.5, 5.0, (90.0f64 - 1e-7).to_radians(), 3.0, 2.0, 1.0, 1.0);
        assert!((v - near).abs() < 1e-6, "{v} vs {near}");
    }

    #[test]
    fn tiny_dip_is_clamped_not_nan() {
        let rect = OkadaRect {
            centroid_lat: 0.0,
            centroid_lon: 0.0,
            depth: 20.0,
            strike: 0.0,
            dip: 0.0,
            rake: 90.0,
            length: 50.0,
            width: 30.0,
            slip: 1.0,
        };
        let spec = GridSpec::new(-0.5, -0.5, 0.05, 0.05, 21, 21).unwrap();
        let g = compute_deformation(&[rect], &spec).unwrap();
        assert!(g.dz.iter().all(|v| v.is_finite()));
    }
}
