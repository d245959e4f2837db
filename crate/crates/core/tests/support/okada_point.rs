//! Independent route to the vertical surface displacement of a rectangular
//! dislocation: the Okada (1985) point-source solution integrated numerically
//! over the fault plane with composite Gauss–Legendre quadrature.

use std::f64::consts::PI;

const MU_RATIO: f64 = 0.5;
pub const M_PER_DEG: f64 = 6_371_000.0 * PI / 180.0;

/// Vertical surface displacement of a point dislocation with unit potency at
/// depth `d`, observed at (x, y) in the fault frame.
pub fn uz_point(x: f64, y: f64, d: f64, dip: f64, strike_slip: f64, dip_slip: f64) -> f64 {
    let (sd, cd) = dip.sin_cos();
    let r = (x * x + y * y + d * d).sqrt();
    let p = y * cd + d * sd;
    let q = y * sd - d * cd;
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    let rd = r + d;
    let i4 = MU_RATIO * (-x * y * (2.0 * r + d) / (r3 * rd * rd));
    let i5 = MU_RATIO * (1.0 / (r * rd) - x * x * (2.0 * r + d) / (r3 * rd * rd));
    let ss = 3.0 * x * d * q / r5 + i4 * sd;
    let ds = 3.0 * d * p * q / r5 - i5 * sd * cd;
    -(strike_slip * ss + dip_slip * ds) / (2.0 * PI)
}

pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// ∫₀ᴸ∫₀ᵂ point-source response of the patch at (ξ, η), with the patch at
/// along-strike ξ, horizontal offset η·cos δ and depth d − η·sin δ.
#[allow(clippy::too_many_arguments)]
pub fn uz_integrated(x: f64, y: f64, d: f64, dip: f64, l: f64, w: f64, ss: f64, ds: f64) -> f64 {
    let nodes = gauss_legendre(10);
    let panels = 24;
    let (sd, cd) = dip.sin_cos();
    let hl = l / panels as f64;
    let hw = w / panels as f64;
    let mut total = 0.0;
    for pi in 0..panels {
        for pj in 0..panels {
            for &(a, wa) in &nodes {
                let xi = hl * (pi as f64 + 0.5 * (a + 1.0));
                for &(b, wb) in &nodes {
                    let eta = hw * (pj as f64 + 0.5 * (b + 1.0));
                    let v = uz_point(x - xi, y - eta * cd, d - eta * sd, dip, ss, ds);
                    total += 0.25 * hl * hw * wa * wb * v;
                }
            }
        }
    }
    total
}
