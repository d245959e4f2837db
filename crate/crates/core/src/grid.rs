//! Regular latitude/longitude grids shared by the deformation and bathymetry
//! fields, plus ESRI ASCII-grid reading and writing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::METERS_PER_DEGREE;

/// Cell-centered regular grid. Row 0 is the southernmost row; values are
/// stored row-major with index `row * nlon + col`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Latitude of the center of the south-west cell, degrees.
    pub lat0: f64,
    /// Longitude of the center of the south-west cell, degrees.
    pub lon0: f64,
    pub dlat: f64,
    pub dlon: f64,
    pub nlat: usize,
    pub nlon: usize,
}

impl GridSpec {
    pub fn new(lat0: f64, lon0: f64, dlat: f64, dlon: f64, nlat: usize, nlon: usize) -> Result<Self> {
        if !(dlat > 0.0 && dlon > 0.0) || nlat == 0 || nlon == 0 {
            return Err(Error::Config(format!(
                "grid needs positive spacing and non-empty dimensions (dlat={dlat}, dlon={dlon}, nlat={nlat}, nlon={nlon})"
            )));
        }
        Ok(GridSpec { lat0, lon0, dlat, dlon, nlat, nlon })
    }

    pub fn len(&self) -> usize {
        self.nlat * self.nlon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lat(&self, row: usize) -> f64 {
        self.lat0 + row as f64 * self.dlat
    }

    pub fn lon(&self, col: usize) -> f64 {
        self.lon0 + col as f64 * self.dlon
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.nlon + col
    }

    pub fn center_lat(&self) -> f64 {
        self.lat0 + 0.5 * (self.nlat as f64 - 1.0) * self.dlat
    }

    /// Cell widths (east, north) in meters on the flat-earth plane tangent at
    /// the grid's central latitude.
    pub fn cell_size_m(&self) -> (f64, f64) {
        let dx = self.dlon * METERS_PER_DEGREE * self.center_lat().to_radians().cos();
        let dy = self.dlat * METERS_PER_DEGREE;
        (dx, dy)
    }

    /// Fractional (row, col) position of a geographic point.
    pub fn fractional_index(&self, lat: f64, lon: f64) -> (f64, f64) {
        ((lat - self.lat0) / self.dlat, (lon - self.lon0) / self.dlon)
    }

    /// Nearest cell to a point, or `None` if the point lies outside the grid.
    pub fn nearest_cell(&self, lat: f64, lon: f64) -> Option<(usize, usize)> {
        let (r, c) = self.fractional_index(lat, lon);
        let (r, c) = (r.round(), c.round());
        if r < 0.0 || c < 0.0 || r >= self.nlat as f64 || c >= self.nlon as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        self.nearest_cell(lat, lon).is_some()
    }
}

/// Vertical seafloor displacement on a grid, meters (positive up).
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationGrid {
    pub spec: GridSpec,
    pub dz: Vec<f64>,
}

impl DeformationGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        DeformationGrid { dz: vec![0.0; spec.len()], spec }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.dz[self.spec.index(row, col)]
    }

    pub fn max_abs(&self) -> f64 {
        self.dz.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DeformationGrid {
            spec: self.spec,
            dz: self.dz.iter().map(|v| v * factor).collect(),
        }
    }

    /// Debug dump in the same ASCII-grid format as the bathymetry.
    pub fn write_ascii(&self, path: &Path) -> Result<()> {
        write_ascii_grid(path, &self.spec, &self.dz)
    }
}

/// Water depth on a grid, meters. Positive values are water depth, negative
/// values are land elevation.
#[derive(Debug, Clone, PartialEq)]
pub struct BathymetryGrid {
    pub spec: GridSpec,
    pub depth: Vec<f64>,
}

impl BathymetryGrid {
    pub fn new(spec: GridSpec, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != spec.len() {
            return Err(Error::Config(format!(
                "bathymetry has {} values but the grid needs {}",
                depth.len(),
                spec.len()
            )));
        }
        if let Some(bad) = depth.iter().find(|d| !d.is_finite()) {
            return Err(Error::Config(format!("bathymetry contains non-finite value {bad}")));
        }
        if !depth.iter().any(|&d| d > 0.0) {
            return Err(Error::Config("bathymetry has no wet cell".into()));
        }
        Ok(BathymetryGrid { spec, depth })
    }

    /// Constant-depth basin.
    pub fn constant(spec: GridSpec, depth_m: f64) -> Result<Self> {
        Self::new(spec, vec![depth_m; spec.len()])
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.depth[self.spec.index(row, col)]
    }

    pub fn is_wet(&self, row: usize, col: usize) -> bool {
        self.at(row, col) > 0.0
    }

    pub fn max_depth(&self) -> f64 {
        self.depth.iter().fold(0.0, |m: f64, &d| m.max(d))
    }

    /// Reads an ESRI ASCII grid. `nodata_value` cells become dry land.
    pub fn read_ascii(path: &Path) -> Result<Self> {
        let (spec, values) = read_ascii_grid(path)?;
        Self::new(spec, values)
    }

    pub fn write_ascii(&self, path: &Path) -> Result<()> {
        write_ascii_grid(path, &self.spec, &self.depth)
    }
}

const NODATA: f64 = -9999.0;

/// Land elevation assigned to `nodata_value` cells.
const NODATA_ELEVATION: f64 = -1.0;

fn read_ascii_grid(path: &Path) -> Result<(GridSpec, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());

    let mut header = |key: &str| -> Result<(usize, f64)> {
        let (no, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, format!("missing header `{key}`")))?;
        let mut parts = line.split_whitespace();
        let name = parts.next().unwrap_or_default();
        if !name.eq_ignore_ascii_case(key) {
            return Err(Error::parse(path, no + 1, format!("expected `{key}`, found `{name}`")));
        }
        let value = parts
            .next()
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::parse(path, no + 1, format!("bad value for `{key}`")))?;
        Ok((no + 1, value))
    };

    let (l_ncols, ncols) = header("ncols")?;
    let (l_nrows, nrows) = header("nrows")?;
    let (_, xll) = header("xllcorner")?;
    let (_, yll) = header("yllcorner")?;
    let (l_cell, cellsize) = header("cellsize")?;
    let (_, nodata) = header("nodata_value")?;

    if ncols < 1.0 || ncols.fract() != 0.0 {
        return Err(Error::parse(path, l_ncols, "ncols must be a positive integer"));
    }
    if nrows < 1.0 || nrows.fract() != 0.0 {
        return Err(Error::parse(path, l_nrows, "nrows must be a positive integer"));
    }
    if cellsize <= 0.0 {
        return Err(Error::parse(path, l_cell, "cellsize must be positive"));
    }
    let (ncols, nrows) = (ncols as usize, nrows as usize);

    // File rows run north to south.
    let mut file_rows: Vec<Vec<f64>> = Vec::with_capacity(nrows);
    let mut row = Vec::with_capacity(ncols);
    for (no, line) in lines {
        for token in line.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| Error::parse(path, no + 1, format!("bad grid value `{token}`")))?;
            row.push(if v == nodata { NODATA_ELEVATION } else { v });
            if row.len() == ncols {
                file_rows.push(std::mem::replace(&mut row, Vec::with_capacity(ncols)));
            }
        }
    }
    if file_rows.len() != nrows || !row.is_empty() {
        return Err(Error::parse(
            path,
            0,
            format!("expected {nrows} rows of {ncols} values, found {} full rows", file_rows.len()),
        ));
    }

    let spec = GridSpec::new(
        yll + 0.5 * cellsize,
        xll + 0.5 * cellsize,
        cellsize,
        cellsize,
        nrows,
        ncols,
    )?;
    let values = file_rows.into_iter().rev().flatten().collect();
    Ok((spec, values))
}

fn write_ascii_grid(path: &Path, spec: &GridSpec, values: &[f64]) -> Result<()> {
    if (spec.dlat - spec.dlon).abs() > 1e-12 * spec.dlat {
        return Err(Error::Config(
            "ASCII grids need square cells (dlat == dlon)".into(),
        ));
    }
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", spec.nlon);
    let _ = writeln!(out, "nrows {}", spec.nlat);
    let _ = writeln!(out, "xllcorner {}", spec.lon0 - 0.5 * spec.dlon);
    let _ = writeln!(out, "yllcorner {}", spec.lat0 - 0.5 * spec.dlat);
    let _ = writeln!(out, "cellsize {}", spec.dlat);
    let _ = writeln!(out, "nodata_value {NODATA}");
    for row in (0..spec.nlat).rev() {
        let line: Vec<String> = (0..spec.nlon)
            .map(|col| values[spec.index(row, col)].to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
