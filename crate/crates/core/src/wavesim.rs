//! Linear long-wave tsunami propagation on a staggered grid and extraction
//! of gauge observables.
//!
//! Surface elevation η lives at cell centers, volume fluxes at cell faces
//! (Arakawa C grid). The scheme is forward–backward: fluxes are updated from
//! the current η gradient, then η from the divergence of the new fluxes. Faces
//! touching a dry cell or the domain edge carry no flux, so land and the outer
//! boundary reflect and the wet-cell volume is conserved to rounding.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::csv_error;
use crate::grid::{BathymetryGrid, DeformationGrid};

pub const GRAVITY: f64 = 9.81;
pub const DEFAULT_CFL: f64 = 0.45;
pub const DEFAULT_ARRIVAL_THRESHOLD_M: f64 = 0.05;

/// Any |η| above this marks the run as unstable.
pub const INSTABILITY_LIMIT_M: f64 = 100.0;

/// A named point where observables are extracted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// |η| that counts as wave arrival, meters.
    #[serde(rename = "arrival_threshold_m")]
    pub arrival_threshold: f64,
    /// Beach slope used to project wave height to inundation, degrees.
    #[serde(rename = "beach_slope_deg")]
    pub beach_slope_deg: f64,
}

impl Gauge {
    pub fn beach_slope(&self) -> f64 {
        self.beach_slope_deg.to_radians()
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("gauge with empty name".into()));
        }
        if !(self.arrival_threshold > 0.0) {
            return Err(Error::Config(format!(
                "gauge `{}`: arrival threshold must be positive",
                self.name
            )));
        }
        if !(self.beach_slope_deg > 0.0 && self.beach_slope_deg < 90.0) {
            return Err(Error::Config(format!(
                "gauge `{}`: beach slope must lie in (0, 90) degrees",
                self.name
            )));
        }
        Ok(())
    }

    /// Reads `name, lat, lon, arrival_threshold_m, beach_slope_deg` rows.
    pub fn read_csv(path: &Path) -> Result<Vec<Gauge>> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let mut gauges: Vec<Gauge> = Vec::new();
        for (i, row) in reader.deserialize::<Gauge>().enumerate() {
            let g = row.map_err(|e| csv_error(path, e))?;
            g.validate()?;
            if gauges.iter().any(|o| o.name == g.name) {
                return Err(Error::parse(path, i + 2, format!("duplicate gauge `{}`", g.name)));
            }
            gauges.push(g);
        }
        Ok(gauges)
    }

    pub fn write_csv(gauges: &[Gauge], path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for g in gauges {
            writer.serialize(g).map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

/// Observables at one gauge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeObservables {
    /// Minutes after rupture; `f64::INFINITY` if the wave never arrived.
    pub arrival: f64,
    /// Largest crest elevation above still water, m.
    pub max_height: f64,
    /// Plane-beach inundation distance, m.
    pub inundation: f64,
}

impl GaugeObservables {
    pub fn arrived(&self) -> bool {
        self.arrival.is_finite()
    }
}

/// Forward-model output: observables per gauge, in gauge order.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub gauges: Vec<(String, GaugeObservables)>,
}

impl ForwardOutput {
    pub fn get(&self, name: &str) -> Option<&GaugeObservables> {
        self.gauges.iter().find(|(n, _)| n == name).map(|(_, o)| o)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.gauges.iter().map(|(n, _)| n.as_str())
    }
}

/// Surface elevation sampled at each gauge, one value per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSeries {
    /// Seconds since rupture.
    pub times: Vec<f64>,
    /// `values[g][k]` is η at gauge g and time `times[k]`, meters.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    /// Simulated time, minutes.
    pub duration_min: f64,
    pub cfl: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings { duration_min: 60.0, cfl: DEFAULT_CFL }
    }
}

impl SimulationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_min > 0.0) || !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Config(format!(
                "simulation needs duration > 0 and 0 < cfl < 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Grid cell sampled by each gauge: the nearest cell, or its closest wet
/// neighbour when that cell is dry.
pub fn gauge_cells(bathy: &BathymetryGrid, gauges: &[Gauge]) -> Result<Vec<usize>> {
    let spec = bathy.spec;
    gauges
        .iter()
        .map(|g| {
            let (r, c) = spec.nearest_cell(g.lat, g.lon).ok_or_else(|| {
                Error::Config(format!("gauge `{}` lies outside the bathymetry grid", g.name))
            })?;
            if bathy.is_wet(r, c) {
                return Ok(spec.index(r, c));
            }
            let (fr, fc) = spec.fractional_index(g.lat, g.lon);
            let mut best: Option<(f64, usize)> = None;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if rr < 0 || cc < 0 || rr >= spec.nlat as i64 || cc >= spec.nlon as i64 {
                        continue;
                    }
                    let (rr, cc) = (rr as usize, cc as usize);
                    if !bathy.is_wet(rr, cc) {
                        continue;
                    }
                    let d = (rr as f64 - fr).powi(2) + (cc as f64 - fc).powi(2);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, spec.index(rr, cc)));
                    }
                }
            }
            best.map(|(_, idx)| idx).ok_or_else(|| {
                Error::Config(format!("gauge `{}` is not in or next to a wet cell", g.name))
            })
        })
        .collect()
}

/// Time step used by [`simulate`] for a grid, seconds.
pub fn time_step(bathy: &BathymetryGrid, cfl: f64) -> f64 {
    let (dx, dy) = bathy.spec.cell_size_m();
    cfl * dx.min(dy) / (GRAVITY * bathy.max_depth()).sqrt()
}

/// Runs the linear long-wave model from the deformation initial condition.
///
/// The initial surface is the seafloor uplift on wet cells with the water at
/// rest. Returns η sampled at every gauge cell at every time level from 0 to
/// the first level at or past `duration_min`.
pub fn simulate(
    dz: &DeformationGrid,
    bathy: &BathymetryGrid,
    gauges: &[Gauge],
    settings: &SimulationSettings,
) -> Result<GaugeSeries> {
    settings.validate()?;
    if dz.spec != bathy.spec {
        return Err(Error::Config(
            "deformation and bathymetry grids are not registered identically".into(),
        ));
    }
    let cells = gauge_cells(bathy, gauges)?;
    let mut state = WaveState::new(bathy, dz);

    let dt = time_step(bathy, settings.cfl);
    let duration = settings.duration_min * 60.0;
    let steps = (duration / dt).ceil() as usize;
    check_reflections(bathy, dz, gauges, duration);

    let mut times = Vec::with_capacity(steps + 1);
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1); gauges.len()];
    let record = |state: &WaveState, values: &mut Vec<Vec<f64>>| {
        for (series, &cell) in values.iter_mut().zip(&cells) {
            series.push(state.eta[cell]);
        }
    };
    times.push(0.0);
    record(&state, &mut values);
    for step in 1..=steps {
        let peak = state.advance(dt);
        if !(peak <= INSTABILITY_LIMIT_M) {
            return Err(Error::Unstable { step, value: peak });
        }
        times.push(step as f64 * dt);
        record(&state, &mut values);
    }
    Ok(GaugeSeries { times, values })
}

/// Mutable solver state. Public so that conservation can be checked directly.
pub struct WaveState {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    wet: Vec<bool>,
    /// η at cell centers.
    pub eta: Vec<f64>,
    /// East-face flux `hu`, `(nx + 1) * ny` entries, face j of row i at `i * (nx + 1) + j`.
    flux_x: Vec<f64>,
    /// North-face flux `hv`, `nx * (ny + 1)` entries, face i of column j at `i * nx + j`.
    flux_y: Vec<f64>,
    /// g·h on each open east face, zero on closed faces.
    gh_x: Vec<f64>,
    gh_y: Vec<f64>,
}

impl WaveState {
    pub fn new(bathy: &BathymetryGrid, dz: &DeformationGrid) -> Self {
        let spec = bathy.spec;
        let (nx, ny) = (spec.nlon, spec.nlat);
        let (dx, dy) = spec.cell_size_m();
        let wet: Vec<bool> = bathy.depth.iter().map(|&d| d > 0.0).collect();
        let eta = dz
            .dz
            .iter()
            .zip(&wet)
            .map(|(&v, &w)| if w { v } else { 0.0 })
            .collect();

        let mut gh_x = vec![0.0; (nx + 1) * ny];
        for i in 0..ny {
            for j in 1..nx {
                let (a, b) = (i * nx + j - 1, i * nx + j);
                if wet[a] && wet[b] {
                    gh_x[i * (nx + 1) + j] = GRAVITY * 0.5 * (bathy.depth[a] + bathy.depth[b]);
                }
            }
        }
        let mut gh_y = vec![0.0; nx * (ny + 1)];
        for i in 1..ny {
            for j in 0..nx {
                let (a, b) = ((i - 1) * nx + j, i * nx + j);
                if wet[a] && wet[b] {
                    gh_y[i * nx + j] = GRAVITY * 0.5 * (bathy.depth[a] + bathy.depth[b]);
                }
            }
        }
        WaveState {
            nx,
            ny,
            dx,
            dy,
            wet,
            eta,
            flux_x: vec![0.0; (nx + 1) * ny],
            flux_y: vec![0.0; nx * (ny + 1)],
            gh_x,
            gh_y,
        }
    }

    /// One forward–backward step. Returns the largest |η| afterwards.
    pub fn advance(&mut self, dt: f64) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let (cx, cy) = (dt / self.dx, dt / self.dy);

        for i in 0..ny {
            let row = i * nx;
            let frow = i * (nx + 1);
            for j in 1..nx {
                let gh = self.gh_x[frow + j];
                if gh != 0.0 {
                    self.flux_x[frow + j] -= cx * gh * (self.eta[row + j] - self.eta[row + j - 1]);
                }
            }
        }
        for i in 1..ny {
            for j in 0..nx {
                let gh = self.gh_y[i * nx + j];
                if gh != 0.0 {
                    self.flux_y[i * nx + j] -= cy * gh * (self.eta[i * nx + j] - self.eta[(i - 1) * nx + j]);
                }
            }
        }

        let mut peak: f64 = 0.0;
        for i in 0..ny {
            for j in 0..nx {
                let k = i * nx + j;
                if !self.wet[k] {
                    continue;
                }
                let fx = i * (nx + 1) + j;
                let div = cx * (self.flux_x[fx + 1] - self.flux_x[fx])
                    + cy * (self.flux_y[(i + 1) * nx + j] - self.flux_y[i * nx + j]);
                let v = self.eta[k] - div;
                self.eta[k] = v;
                peak = peak.max(v.abs());
            }
        }
        if peak.is_nan() {
            f64::NAN
        } else {
            peak
        }
    }

    /// Σ η · cell area over wet cells, m³.
    pub fn volume(&self) -> f64 {
        let area = self.dx * self.dy;
        self.eta
            .iter()
            .zip(&self.wet)
            .filter(|(_, &w)| w)
            .map(|(v, _)| v * area)
            .sum()
    }

    /// Σ |η| · cell area over wet cells, m³.
    pub fn abs_volume(&self) -> f64 {
        let area = self.dx * self.dy;
        self.eta
            .iter()
            .zip(&self.wet)
            .filter(|(_, &w)| w)
            .map(|(v, _)| v.abs() * area)
            .sum()
    }
}

/// Warns when a wave reflected off the outer boundary could reach a gauge
/// within the simulated time.
fn check_reflections(bathy: &BathymetryGrid, dz: &DeformationGrid, gauges: &[Gauge], duration: f64) {
    let spec = bathy.spec;
    let total: f64 = dz.dz.iter().map(|v| v.abs()).sum();
    if total == 0.0 || gauges.is_empty() {
        return;
    }
    let (dx, dy) = spec.cell_size_m();
    let (mut sr, mut sc) = (0.0, 0.0);
    for r in 0..spec.nlat {
        for c in 0..spec.nlon {
            let w = dz.at(r, c).abs() / total;
            sr += w * r as f64;
            sc += w * c as f64;
        }
    }
    let edges = |r: f64, c: f64| {
        [
            (r + 0.5) * dy,
            (spec.nlat as f64 - 0.5 - r) * dy,
            (c + 0.5) * dx,
            (spec.nlon as f64 - 0.5 - c) * dx,
        ]
    };
    let source = edges(sr, sc);
    let speed = (GRAVITY * bathy.max_depth()).sqrt();
    for g in gauges {
        let (gr, gc) = spec.fractional_index(g.lat, g.lon);
        let gauge = edges(gr, gc);
        let shortest = source
            .iter()
            .zip(&gauge)
            .map(|(a, b)| a + b)
            .fold(f64::INFINITY, f64::min);
        if shortest / speed < duration {
            log::debug!(
                "boundary reflections may reach gauge `{}` after {:.1} min (run lasts {:.1} min)",
                g.name,
                shortest / speed / 60.0,
                duration / 60.0
            );
        }
    }
}

/// Arrival time, maximum crest height and inundation for each gauge.
///
/// Arrival is the first time |η| reaches the gauge threshold, located by
/// linear interpolation between the bracketing samples.
pub fn extract_observables(series: &GaugeSeries, gauges: &[Gauge]) -> ForwardOutput {
    let out = gauges
        .iter()
        .zip(&series.values)
        .map(|(g, eta)| {
            let mut arrival = f64::INFINITY;
            if let Some(k) = eta.iter().position(|v| v.abs() >= g.arrival_threshold) {
                arrival = if k == 0 {
                    series.times[0]
                } else {
                    let (a, b) = (eta[k - 1].abs(), eta[k].abs());
                    let frac = (g.arrival_threshold - a) / (b - a);
                    series.times[k - 1] + frac * (series.times[k] - series.times[k - 1])
                };
                arrival /= 60.0;
            }
            let max_height = eta.iter().fold(0.0f64, |m, &v| m.max(v));
            let inundation = (max_height / g.beach_slope().tan()).max(0.0);
            (g.name.clone(), GaugeObservables { arrival, max_height, inundation })
        })
        .collect();
    ForwardOutput { gauges: out }
}
