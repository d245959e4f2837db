//! Observation distributions and the likelihood of a forward output.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::csv_error;
use crate::special::{ln_gamma, ln_one_plus_erf};
use crate::wavesim::{ForwardOutput, Gauge, GaugeObservables};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Density over the true value of one observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObsDist {
    Normal { mean: f64, std: f64 },
    /// Location/scale/shape: pdf = (2/σ) φ(x̃) Φ(a x̃), x̃ = (v − loc)/σ.
    SkewNormal { loc: f64, scale: f64, a: f64 },
    /// `loc + scale · X` with X a standard chi variable with `k` degrees of freedom.
    Chi { loc: f64, scale: f64, k: f64 },
}

impl ObsDist {
    pub fn family(&self) -> &'static str {
        match self {
            ObsDist::Normal { .. } => "normal",
            ObsDist::SkewNormal { .. } => "skewnorm",
            ObsDist::Chi { .. } => "chi",
        }
    }

    /// Parameter names in file and score order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ObsDist::Normal { .. } => &["mean", "std"],
            ObsDist::SkewNormal { .. } => &["loc", "scale", "a"],
            ObsDist::Chi { .. } => &["loc", "scale", "k"],
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            ObsDist::Normal { mean, std } => vec![mean, std],
            ObsDist::SkewNormal { loc, scale, a } => vec![loc, scale, a],
            ObsDist::Chi { loc, scale, k } => vec![loc, scale, k],
        }
    }

    /// Same family with new parameters, in [`ObsDist::param_names`] order.
    pub fn with_params(&self, p: &[f64]) -> Result<ObsDist> {
        let want = self.param_names().len();
        if p.len() != want {
            return Err(Error::Dimension { expected: want, actual: p.len() });
        }
        Ok(match self {
            ObsDist::Normal { .. } => ObsDist::Normal { mean: p[0], std: p[1] },
            ObsDist::SkewNormal { .. } => ObsDist::SkewNormal { loc: p[0], scale: p[1], a: p[2] },
            ObsDist::Chi { .. } => ObsDist::Chi { loc: p[0], scale: p[1], k: p[2] },
        })
    }

    pub fn from_family(family: &str, p: &[f64]) -> Result<ObsDist> {
        let template = match family.to_ascii_lowercase().as_str() {
            "normal" => ObsDist::Normal { mean: 0.0, std: 1.0 },
            "skewnorm" | "skew-normal" | "skewnormal" => ObsDist::SkewNormal { loc: 0.0, scale: 1.0, a: 0.0 },
            "chi" => ObsDist::Chi { loc: 0.0, scale: 1.0, k: 1.0 },
            other => return Err(Error::Config(format!("unknown distribution family `{other}`"))),
        };
        let dist = template.with_params(p).map_err(|_| {
            Error::Config(format!(
                "{family} takes {} parameters ({}), got {}",
                template.param_names().len(),
                template.param_names().join(", "),
                p.len()
            ))
        })?;
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ObsDist::Normal { mean, std } => mean.is_finite() && std > 0.0 && std.is_finite(),
            ObsDist::SkewNormal { loc, scale, a } => loc.is_finite() && scale > 0.0 && scale.is_finite() && a.is_finite(),
            ObsDist::Chi { loc, scale, k } => loc.is_finite() && scale > 0.0 && scale.is_finite() && k > 0.0 && k.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {} parameters {:?}", self.family(), self.params())))
        }
    }

    /// Log density at `value`. Infinite values (the never-arrived sentinel)
    /// and values outside the support give −∞.
    pub fn ln_pdf(&self, value: f64) -> f64 {
        if !value.is_finite() {
            return f64::NEG_INFINITY;
        }
        match *self {
            ObsDist::Normal { mean, std } => {
                let x = (value - mean) / std;
                -0.5 * x * x - std.ln() - HALF_LN_2PI
            }
            ObsDist::SkewNormal { loc, scale, a } => {
                let x = (value - loc) / scale;
                let z = a * x / std::f64::consts::SQRT_2;
                -(0.5 * x * x + scale.ln() + HALF_LN_2PI - ln_one_plus_erf(z))
            }
            ObsDist::Chi { loc, scale, k } => {
                let x = (value - loc) / scale;
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                if x == 0.0 {
                    return match k.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Greater) => f64::NEG_INFINITY,
                        Some(std::cmp::Ordering::Equal) => -(scale.ln() + 0.5 * (PI / 2.0).ln()),
                        _ => f64::INFINITY,
                    };
                }
                -(0.5 * x * x + scale.ln() + (0.5 * k - 1.0) * LN_2 + ln_gamma(0.5 * k) - (k - 1.0) * x.ln())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ObsDist::Normal { mean, .. } => mean,
            ObsDist::SkewNormal { loc, scale, a } => {
                let delta = a / (1.0 + a * a).sqrt();
                loc + scale * delta * (2.0 / PI).sqrt()
            }
            ObsDist::Chi { loc, scale, k } => {
                loc + scale * std::f64::consts::SQRT_2 * (ln_gamma(0.5 * (k + 1.0)) - ln_gamma(0.5 * k)).exp()
            }
        }
    }
}

/// Which observable an account constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObsKind {
    Height,
    Arrival,
    Inundation,
}

impl ObsKind {
    pub const ALL: [ObsKind; 3] = [ObsKind::Height, ObsKind::Arrival, ObsKind::Inundation];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObsKind::Height => "height",
            ObsKind::Arrival => "arrival",
            ObsKind::Inundation => "inundation",
        }
    }

    pub fn select(&self, o: &GaugeObservables) -> f64 {
        match self {
            ObsKind::Height => o.max_height,
            ObsKind::Arrival => o.arrival,
            ObsKind::Inundation => o.inundation,
        }
    }
}

impl fmt::Display for ObsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "height" => Ok(ObsKind::Height),
            "arrival" => Ok(ObsKind::Arrival),
            "inundation" => Ok(ObsKind::Inundation),
            other => Err(Error::Config(format!("unknown observation kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub gauge: String,
    pub kind: ObsKind,
    pub dist: ObsDist,
}

impl Observation {
    pub fn new(gauge: impl Into<String>, kind: ObsKind, dist: ObsDist) -> Self {
        Observation { gauge: gauge.into(), kind, dist }
    }

    /// Short label such as `Saparua arrival`.
    pub fn label(&self) -> String {
        format!("{} {}", self.gauge, self.kind)
    }

    /// The forward value this observation constrains.
    pub fn value(&self, out: &ForwardOutput) -> Result<f64> {
        out.get(&self.gauge)
            .map(|o| self.kind.select(o))
            .ok_or_else(|| Error::Config(format!("forward output has no gauge `{}` (needed by {})", self.gauge, self.label())))
    }
}

/// Log density of one observable value; see [`ObsDist::ln_pdf`].
pub fn log_obs_density(dist: &ObsDist, value: f64) -> f64 {
    dist.ln_pdf(value)
}

/// Sum of the per-observation log densities. Any impossible observation makes
/// the total −∞.
pub fn total_log_likelihood(out: &ForwardOutput, obs: &[Observation]) -> Result<f64> {
    let mut total = 0.0;
    for o in obs {
        total += o.dist.ln_pdf(o.value(out)?);
    }
    Ok(if total.is_nan() { f64::NEG_INFINITY } else { total })
}

/// Checks (gauge, kind) uniqueness and, when `gauges` is given, that every
/// gauge exists.
pub fn validate_observations(obs: &[Observation], gauges: &[Gauge]) -> Result<()> {
    for (i, o) in obs.iter().enumerate() {
        o.dist.validate()?;
        if !gauges.iter().any(|g| g.name == o.gauge) {
            return Err(Error::Config(format!("observation {} refers to unknown gauge `{}`", i + 1, o.gauge)));
        }
        if obs[..i].iter().any(|p| p.gauge == o.gauge && p.kind == o.kind) {
            return Err(Error::Config(format!("duplicate observation {}", o.label())));
        }
    }
    Ok(())
}

const FILE_HEADER: &str = "\
# Observation distributions, one per row.
# Parameter order by family:
#   normal    p1 = mean, p2 = std
#   skewnorm  p1 = loc,  p2 = scale, p3 = shape a
#   chi       p1 = loc,  p2 = scale, p3 = degrees of freedom k
# Units: height m, arrival minutes after rupture, inundation m.
";

/// Reads `gauge, kind, family, p1, p2[, p3]` rows. Every gauge must be one
/// of `gauges`; a dangling name is reported with its line number.
pub fn read_observations(path: &Path, gauges: &[Gauge]) -> Result<Vec<Observation>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut obs: Vec<Observation> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |msg: String| Error::parse(path, line, msg);
        if row.len() < 5 {
            return Err(bad(format!("expected `gauge, kind, family, p1, p2[, p3]`, got {} fields", row.len())));
        }
        let gauge = row[0].to_string();
        if !gauges.iter().any(|g| g.name == gauge) {
            return Err(bad(format!("unknown gauge `{gauge}`")));
        }
        let kind: ObsKind = row[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let params = row
            .iter()
            .skip(3)
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<f64>().map_err(|_| bad(format!("bad number `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        let dist = ObsDist::from_family(&row[2], &params).map_err(|e| bad(e.to_string()))?;
        if obs.iter().any(|o| o.gauge == gauge && o.kind == kind) {
            return Err(bad(format!("duplicate observation {gauge} {kind}")));
        }
        obs.push(Observation { gauge, kind, dist });
    }
    Ok(obs)
}

pub fn write_observations(path: &Path, obs: &[Observation]) -> Result<()> {
    let mut text = String::from(FILE_HEADER);
    text.push_str("gauge,kind,family,p1,p2,p3\n");
    for o in obs {
        let params: Vec<String> = o.dist.params().iter().map(|p| format!("{p:?}")).collect();
        text.push_str(&format!("{},{},{},{}\n", o.gauge, o.kind, o.dist.family(), params.join(",")));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
