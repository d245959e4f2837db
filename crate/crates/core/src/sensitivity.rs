//! Sensitivity of the posterior to the observation-distribution parameters θ.
//!
//! Scores are partial derivatives of Φ = −log density with respect to each
//! distribution parameter. Their posterior covariance is the Fisher
//! information matrix, which drives the quadratic relative-entropy estimate,
//! the worst-case perturbation direction and the sensitivity bounds.

use std::f64::consts::{LN_2, PI, SQRT_2};

use log::info;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mcmc::mean_std;
use crate::obsmodel::{ObsDist, ObsKind, Observation};
use crate::special::{digamma, gaussian_erf_ratio};
use crate::wavesim::ForwardOutput;

/// ∂Φ/∂θ for one distribution at one value, in [`ObsDist::param_names`] order.
pub fn score(dist: &ObsDist, value: f64) -> Result<Vec<f64>> {
    if !value.is_finite() {
        return Err(Error::Domain(format!("score undefined at non-finite value {value}")));
    }
    Ok(match *dist {
        ObsDist::Normal { mean, std } => {
            let d = value - mean;
            vec![-d / (std * std), -d * d / std.powi(3) + 1.0 / std]
        }
        ObsDist::SkewNormal { loc, scale, a } => {
            let x = (value - loc) / scale;
            let z = a * x / SQRT_2;
            let ratio = gaussian_erf_ratio(z);
            let c = (2.0 / PI).sqrt();
            vec![
                -(x - c * a * ratio) / scale,
                (1.0 - x * x + 2.0 * z / PI.sqrt() * ratio) / scale,
                -c * x * ratio,
            ]
        }
        ObsDist::Chi { loc, scale, k } => {
            let x = (value - loc) / scale;
            if !(x > 0.0) {
                return Err(Error::Domain(format!("chi score undefined at value {value} (support starts at {loc})")));
            }
            vec![
                -(x - (k - 1.0) / x) / scale,
                -(x * x - k) / scale,
                0.5 * LN_2 + 0.5 * digamma(0.5 * k) - x.ln(),
            ]
        }
    })
}

/// One coordinate of θ.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsParam {
    /// Index into the observation list.
    pub observation: usize,
    pub gauge: String,
    pub kind: ObsKind,
    pub family: &'static str,
    pub name: &'static str,
    pub value: f64,
}

/// θ flattened in observation order, then parameter order within each
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsParamVector {
    pub entries: Vec<ObsParam>,
}

impl ObsParamVector {
    pub fn new(obs: &[Observation]) -> Self {
        let entries = obs
            .iter()
            .enumerate()
            .flat_map(|(i, o)| {
                o.dist.param_names().iter().zip(o.dist.params()).map(move |(name, value)| ObsParam {
                    observation: i,
                    gauge: o.gauge.clone(),
                    kind: o.kind,
                    family: o.dist.family(),
                    name,
                    value,
                })
            })
            .collect();
        ObsParamVector { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }
}

/// Concatenated scores of every observation for one forward output.
pub fn score_vector(out: &ForwardOutput, obs: &[Observation]) -> Result<Vec<f64>> {
    let mut s = Vec::new();
    for o in obs {
        s.extend(score(&o.dist, o.value(out)?)?);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FimMode {
    Absolute,
    /// Coordinates are relative changes θᵢ(1 + vᵢ); score i is scaled by θᵢ.
    Relative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FIMatrix {
    pub matrix: DMatrix<f64>,
    pub mode: FimMode,
    /// Samples used.
    pub samples: usize,
    /// Samples dropped because a forward value sat outside an observation's support.
    pub excluded: usize,
}

/// Symmetry tolerance on |Iᵢⱼ − Iⱼᵢ|.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue allowed after symmetrization.
pub const PSD_TOL: f64 = 1e-10;

impl FIMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks symmetry and positive semidefiniteness. Tolerances scale with
    /// the largest entry once it exceeds one.
    pub fn validate(&self) -> Result<()> {
        let scale = self.matrix.amax().max(1.0);
        let n = self.dim();
        for i in 0..n {
            for j in 0..i {
                if (self.matrix[(i, j)] - self.matrix[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Domain(format!("Fisher information not symmetric at ({i}, {j})")));
                }
            }
        }
        if n > 0 {
            let min = self.min_eigenvalue();
            if min < -PSD_TOL * scale {
                return Err(Error::Domain(format!("Fisher information not positive semidefinite: eigenvalue {min}")));
            }
        }
        Ok(())
    }
}

/// Empirical covariance (n − 1 divisor) of score vectors, symmetrized.
pub fn score_covariance(scores: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    let n = scores.len();
    let mut cov = DMatrix::zeros(dim, dim);
    if n < 2 {
        return cov;
    }
    let mut mean = DVector::zeros(dim);
    for s in scores {
        mean += DVector::from_column_slice(s);
    }
    mean /= n as f64;
    // Second-pass correction makes the mean exact for constant data.
    let mut correction = DVector::zeros(dim);
    for s in scores {
        correction += DVector::from_column_slice(s) - &mean;
    }
    mean += correction / n as f64;
    for s in scores {
        let d = DVector::from_column_slice(s) - &mean;
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= (n - 1) as f64;
    (&cov + cov.transpose()) * 0.5
}

/// Fisher information over the given posterior forward outputs.
pub fn fim<'a>(outputs: impl IntoIterator<Item = &'a ForwardOutput>, obs: &[Observation], mode: FimMode) -> Result<FIMatrix> {
    let theta = ObsParamVector::new(obs);
    let mut scores = Vec::new();
    let mut excluded = 0;
    for out in outputs {
        match score_vector(out, obs) {
            Ok(mut s) => {
                if mode == FimMode::Relative {
                    for (si, e) in s.iter_mut().zip(&theta.entries) {
                        *si *= e.value;
                    }
                }
                scores.push(s);
            }
            Err(Error::Domain(_)) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if excluded > 0 {
        info!("Fisher information: excluded {excluded} samples outside an observation's support");
    }
    if scores.is_empty() {
        return Err(Error::Domain("no posterior samples with defined scores".into()));
    }
    let m = FIMatrix { matrix: score_covariance(&scores, theta.len()), mode, samples: scores.len(), excluded };
    m.validate()?;
    Ok(m)
}

/// Second-order relative entropy estimate ½vᵀIv.
pub fn kl_quadratic(i: &FIMatrix, v: &[f64]) -> Result<f64> {
    if v.len() != i.dim() {
        return Err(Error::Dimension { expected: i.dim(), actual: v.len() });
    }
    let v = DVector::from_column_slice(v);
    Ok(0.5 * v.dot(&(&i.matrix * &v)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstDirection {
    pub vector: Vec<f64>,
    pub eigenvalue: f64,
    /// The top eigenvalue is repeated within tolerance, so the direction is not unique.
    pub degenerate: bool,
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 1_000_000;
const DEGENERACY_TOL: f64 = 1e-8;

/// Returns (eigenvalue, unit vector, converged).
fn power_iteration(m: &DMatrix<f64>, start: DVector<f64>) -> (f64, DVector<f64>, bool) {
    let scale = m.amax();
    let mut v = start.normalize();
    if scale == 0.0 {
        return (0.0, v, true);
    }
    for _ in 0..POWER_MAX_ITER {
        let w = m * &v;
        let lambda = v.dot(&w);
        if (&w - &v * lambda).norm() <= POWER_TOL * scale {
            return (lambda, v, true);
        }
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, v, true);
        }
        v = w / norm;
    }
    let lambda = v.dot(&(m * &v));
    (lambda, v, false)
}

/// Leading eigenvector of I: the unit perturbation with the largest
/// quadratic relative entropy. Sign fixed so the largest-magnitude component
/// is positive.
pub fn worst_direction(i: &FIMatrix) -> WorstDirection {
    let n = i.dim();
    if n == 0 {
        return WorstDirection { vector: Vec::new(), eigenvalue: 0.0, degenerate: true };
    }
    let m = (&i.matrix + i.matrix.transpose()) * 0.5;
    // Deterministic start with no special alignment to coordinate axes.
    let start = DVector::from_fn(n, |k, _| 1.0 + 0.1 * ((k as f64 + 1.0) * 0.618_033_988_75).fract());
    let (lambda, mut v, converged) = power_iteration(&m, start);

    // Second eigenvalue by deflation, started away from v.
    let deflated = &m - &v * v.transpose() * lambda;
    let mut other = DVector::from_fn(n, |k, _| ((k as f64 + 1.0) * 0.754_877_666_2).fract() - 0.5);
    other -= &v * v.dot(&other);
    let second = if n > 1 && other.norm() > 0.0 { power_iteration(&deflated, other).0 } else { f64::NEG_INFINITY };
    let degenerate = !converged || lambda <= 0.0 || (lambda - second).abs() <= DEGENERACY_TOL * lambda.abs().max(1e-300);

    let (imax, _) = v.iter().enumerate().fold((0, 0.0), |(bi, bv), (k, x)| if x.abs() > bv { (k, x.abs()) } else { (bi, bv) });
    if v[imax] < 0.0 {
        v = -v;
    }
    WorstDirection { vector: v.iter().copied().collect(), eigenvalue: lambda, degenerate }
}

/// Bounds on E_Q[f] − E_P[f] as functions of R = KL(Q‖P).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub r: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Essential infimum and supremum of f − E_P[f] over the samples.
    pub uniform_lower: f64,
    pub uniform_upper: f64,
    /// Set for empty or constant input; every bound is then zero.
    pub degenerate: bool,
}

/// Points in the initial c sweep.
pub const C_GRID_POINTS: usize = 200;

/// The tilted family at tilt c: returns (R, bound) with
/// R = c·E₂/E₁ − log E₁ and bound = E₂/E₁, E₁ = E[e^{cf̃}], E₂ = E[f̃ e^{cf̃}].
fn tilt(ft: &[f64], c: f64) -> (f64, f64) {
    let shift = ft.iter().map(|x| c * x).fold(f64::NEG_INFINITY, f64::max);
    let n = ft.len() as f64;
    let (mut e1, mut e2) = (0.0, 0.0);
    for &x in ft {
        let w = (c * x - shift).exp();
        e1 += w;
        e2 += x * w;
    }
    e1 /= n;
    e2 /= n;
    let bound = e2 / e1;
    let log_e1 = e1.ln() + shift;
    ((c * bound - log_e1).max(0.0), bound)
}

/// Sweeps c, returning monotone (R, bound) pairs starting at (0, 0).
fn sweep(ft: &[f64], std: f64, r_max: f64, sup: f64) -> Vec<(f64, f64)> {
    let mut cs: Vec<f64> = (0..C_GRID_POINTS)
        .map(|k| 1e-3 * 1e6f64.powf(k as f64 / (C_GRID_POINTS - 1) as f64) / std)
        .collect();
    // Extend toward larger tilts until the requested R is covered or the
    // bound has reached the sample supremum.
    let mut c = *cs.last().unwrap();
    let mut last = tilt(ft, c);
    let mut guard = 0;
    while last.0 < r_max && last.1 < sup && guard < 60 {
        c *= 2.0;
        let next = tilt(ft, c);
        if next.0 <= last.0 && next.1 <= last.1 {
            break;
        }
        cs.push(c);
        last = next;
        guard += 1;
    }
    let mut pts = vec![(0.0, 0.0)];
    for c in cs {
        let (r, b) = tilt(ft, c);
        let (pr, pb) = *pts.last().unwrap();
        pts.push((r.max(pr), b.max(pb).min(sup)));
    }
    pts
}

fn interpolate(pts: &[(f64, f64)], r: f64, cap: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    match pts.iter().position(|p| p.0 >= r) {
        Some(0) => pts[0].1,
        // Below the smallest tilt the bound follows its leading-order √R shape.
        Some(1) => pts[1].1 * (r / pts[1].0).sqrt(),
        Some(k) => {
            let (r0, b0) = pts[k - 1];
            let (r1, b1) = pts[k];
            if r1 > r0 { b0 + (b1 - b0) * (r - r0) / (r1 - r0) } else { b1 }
        }
        // Beyond the last tilt the sample supremum is the best available bound.
        None => cap,
    }
}

/// Expectation bounds for scalar samples `f` on the given R grid.
pub fn expectation_bounds(f: &[f64], r_grid: &[f64]) -> Result<BoundCurve> {
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("expectation bounds need finite samples".into()));
    }
    let (mean, std) = mean_std(f);
    if f.is_empty() || !(std > 0.0) {
        return Ok(BoundCurve {
            r: r_grid.to_vec(),
            lower: vec![0.0; r_grid.len()],
            upper: vec![0.0; r_grid.len()],
            uniform_lower: 0.0,
            uniform_upper: 0.0,
            degenerate: true,
        });
    }
    let ft: Vec<f64> = f.iter().map(|x| x - mean).collect();
    let neg: Vec<f64> = ft.iter().map(|x| -x).collect();
    let sup = ft.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inf = ft.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = r_grid.iter().copied().fold(0.0, f64::max);

    let up = sweep(&ft, std, r_max, sup);
    let down = sweep(&neg, std, r_max, -inf);
    Ok(BoundCurve {
        r: r_grid.to_vec(),
        lower: r_grid.iter().map(|&r| -interpolate(&down, r, -inf)).collect(),
        upper: r_grid.iter().map(|&r| interpolate(&up, r, sup)).collect(),
        uniform_lower: inf,
        uniform_upper: sup,
        degenerate: false,
    })
}

/// √Var(f) · √(vᵀIv), the first-order bound on |d E[f] / dt| along θ + t v.
pub fn sensitivity_bound(f: &[f64], v: &[f64], i: &FIMatrix) -> Result<f64> {
    let q = 2.0 * kl_quadratic(i, v)?;
    let (_, std) = mean_std(f);
    if f.len() < 2 {
        return Ok(0.0);
    }
    Ok(std * q.max(0.0).sqrt())
}

/// Logarithmically spaced grid of `n` points on [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_score_at_mean() {
        let s = score(&ObsDist::Normal { mean: 2.0, std: 0.5 }, 2.0).unwrap();
        assert_eq!(s, vec![0.0, 2.0]);
    }

    #[test]
    fn skew_free_score_matches_normal() {
        for v in [-3.0, -0.5, 0.0, 1.2, 7.0] {
            let n = score(&ObsDist::Normal { mean: 1.0, std: 2.0 }, v).unwrap();
            let s = score(&ObsDist::SkewNormal { loc: 1.0, scale: 2.0, a: 0.0 }, v).unwrap();
            assert_eq!(s[0], n[0]);
            assert!((s[1] - n[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn chi_score_at_support_edge_is_domain_error() {
        let d = ObsDist::Chi { loc: 0.5, scale: 1.5, k: 1.01 };
        assert!(matches!(score(&d, 0.5), Err(Error::Domain(_))));
        assert!(score(&d, 0.6).is_ok());
    }

    fn fim_of(m: DMatrix<f64>) -> FIMatrix {
        FIMatrix { matrix: m, mode: FimMode::Absolute, samples: 10, excluded: 0 }
    }

    #[test]
    fn worst_direction_simple_cases() {
        let d = worst_direction(&fim_of(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]))));
        assert!((d.vector[0] - 1.0).abs() < 1e-9 && d.vector[1].abs() < 1e-9);
        assert!(!d.degenerate);
        assert!(worst_direction(&fim_of(DMatrix::identity(4, 4))).degenerate);
        assert!(worst_direction(&fim_of(DMatrix::zeros(3, 3))).degenerate);
    }

    #[test]
    fn kl_of_zero_direction() {
        let i = fim_of(DMatrix::identity(3, 3) * 2.0);
        assert_eq!(kl_quadratic(&i, &[0.0; 3]).unwrap(), 0.0);
        assert!(kl_quadratic(&i, &[0.0; 2]).is_err());
        assert_eq!(sensitivity_bound(&[1.0, 2.0, 3.0], &[0.0; 3], &i).unwrap(), 0.0);
        assert_eq!(sensitivity_bound(&[2.0; 5], &[1.0; 3], &i).unwrap(), 0.0);
    }

    #[test]
    fn constant_observable_gives_zero_bounds() {
        let c = expectation_bounds(&[4.0; 50], &[0.0, 0.1, 1.0]).unwrap();
        assert!(c.degenerate);
        assert!(c.upper.iter().chain(&c.lower).all(|b| *b == 0.0));
        assert_eq!((c.uniform_lower, c.uniform_upper), (0.0, 0.0));
        assert!(expectation_bounds(&[], &[0.1]).unwrap().degenerate);
    }

    #[test]
    fn bounds_vanish_at_small_r() {
        let f: Vec<f64> = (0..400).map(|k| ((k * 37) % 101) as f64 / 10.0).collect();
        let c = expectation_bounds(&f, &[1e-10, 1e-6, 1e-2]).unwrap();
        assert!(c.upper[0] < 1e-4 && c.lower[0] > -1e-4);
        assert!(c.upper[0] < c.upper[1] && c.upper[1] < c.upper[2]);
    }
}
