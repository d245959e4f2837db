//! Special functions used by the observation densities and their scores.

use std::f64::consts::PI;

pub use statrs::function::erf::{erf, erfc};
pub use statrs::function::gamma::ln_gamma;

/// Digamma function ψ(x).
///
/// The argument is lifted above 6 with ψ(x) = ψ(x + 1) − 1/x before the
/// asymptotic series is applied; negative non-integers use the reflection
/// formula.
pub fn digamma(x: f64) -> f64 {
    if x.is_nan() || x == f64::NEG_INFINITY {
        return f64::NAN;
    }
    if x <= 0.0 {
        if x == x.floor() {
            return f64::NAN;
        }
        return digamma(1.0 - x) - PI / (PI * x).tan();
    }

    let mut x = x;
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }

    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli-number tail of the asymptotic expansion, Horner form in 1/x².
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0 - inv2 * 3617.0 / 8160.0)))))));
    shift + x.ln() - 0.5 * inv - tail
}

/// ln(1 + erf(z)) without cancellation for large negative `z`.
pub fn ln_one_plus_erf(z: f64) -> f64 {
    if z < 0.0 {
        erfc(-z).ln()
    } else {
        (1.0 + erf(z)).ln()
    }
}

/// e^{−z²} / (1 + erf(z)), stable for large negative `z`.
///
/// For z → −∞ the ratio behaves like √π·|z|, so it is evaluated through the
/// scaled complementary error function there.
pub fn gaussian_erf_ratio(z: f64) -> f64 {
    if z >= 0.0 {
        (-z * z).exp() / (1.0 + erf(z))
    } else if z > -25.0 {
        (-z * z).exp() / erfc(-z)
    } else {
        // erfc(x) ~ e^{-x²}/(x√π) · (1 − 1/(2x²) + 3/(4x⁴) − 15/(8x⁶) + 105/(16x⁸)), x = −z
        let x = -z;
        let inv2 = 1.0 / (x * x);
        let series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2.powi(3)
            + 6.5625 * inv2.powi(4)
            - 29.53125 * inv2.powi(5);
        x * PI.sqrt() / series
    }
}
