//! Scenario configuration, the composed forward model, sample and checkpoint
//! files, and synthetic-truth scenario generation.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_rupture, csv_error, EarthquakeParams, FaultGeometry, GeometrySample, ScalingLaw};
use crate::grid::{BathymetryGrid, DeformationGrid, GridSpec};
use crate::mcmc::{chain_rng, ChainState, Checkpoint, SampleRecord, SampleSink, SamplerConfig, Target};
use crate::obsmodel::{read_observations, total_log_likelihood, write_observations, ObsDist, ObsKind, Observation};
use crate::okada::compute_deformation;
use crate::priors::PriorSpec;
use crate::wavesim::{extract_observables, simulate, ForwardOutput, Gauge, GaugeObservables, SimulationSettings};

pub const SAMPLES_FILE: &str = "samples.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";

/// Input tables of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilePaths {
    /// Interface geometry, `lat, lon, depth_km, strike_deg, dip_deg`.
    pub geometry: PathBuf,
    /// ESRI ASCII grid of water depth (m, positive down).
    pub bathymetry: PathBuf,
    pub gauges: PathBuf,
    pub observations: PathBuf,
}

/// How chain starting points are found when none are given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitSettings {
    /// Prior draws with positive posterior density collected per chain; the
    /// best of them starts the chain.
    pub candidates: usize,
    /// Prior draws tried per chain before giving up.
    pub max_attempts: usize,
}

impl Default for InitSettings {
    fn default() -> Self {
        InitSettings { candidates: 1, max_attempts: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub files: FilePaths,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub scaling: ScalingLaw,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default)]
    pub init: InitSettings,
    /// Explicit starting points, one per chain.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<EarthquakeParams>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ScenarioConfig {
    /// Parses TOML text. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, path: &Path, base: &Path) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            Error::parse(path, line, e.message().to_string())
        })?;
        cfg.sampler.seed = cfg.seed;
        for p in [
            &mut cfg.files.geometry,
            &mut cfg.files.bathymetry,
            &mut cfg.files.gauges,
            &mut cfg.files.observations,
            &mut cfg.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.scaling.validate()?;
        self.simulation.validate()?;
        self.sampler.validate(EarthquakeParams::DIM)?;
        if self.init.candidates == 0 || self.init.max_attempts < self.init.candidates {
            return Err(Error::Config("init needs 1 <= candidates <= max_attempts".into()));
        }
        if !self.initial.is_empty() && self.initial.len() != self.sampler.n_chains {
            return Err(Error::Config(format!(
                "{} initial points given for {} chains",
                self.initial.len(),
                self.sampler.n_chains
            )));
        }
        Ok(())
    }
}

/// Reads and validates a configuration file (syntax and values only; the
/// referenced tables are checked by [`Scenario::load`]).
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = ScenarioConfig::from_toml(&text, path, base)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Earthquake parameters → seafloor deformation → wave propagation → gauge
/// observables.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub geometry: FaultGeometry,
    pub bathymetry: BathymetryGrid,
    pub gauges: Vec<Gauge>,
    pub scaling: ScalingLaw,
    pub simulation: SimulationSettings,
}

impl ForwardModel {
    pub fn deformation(&self, p: &EarthquakeParams) -> Result<DeformationGrid> {
        let rects = build_rupture(p, &self.geometry, &self.scaling)?;
        compute_deformation(&rects, &self.bathymetry.spec)
    }

    pub fn run(&self, p: &EarthquakeParams) -> Result<ForwardOutput> {
        let dz = self.deformation(p)?;
        let series = simulate(&dz, &self.bathymetry, &self.gauges, &self.simulation)?;
        Ok(extract_observables(&series, &self.gauges))
    }

    pub fn gauge_names(&self) -> Vec<String> {
        self.gauges.iter().map(|g| g.name.clone()).collect()
    }
}

/// A loaded scenario; also the sampler's target density.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: ForwardModel,
    pub observations: Vec<Observation>,
}

impl Scenario {
    pub fn load(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let geometry = FaultGeometry::read_csv(&config.files.geometry)?;
        let bathymetry = BathymetryGrid::read_ascii(&config.files.bathymetry)?;
        let gauges = Gauge::read_csv(&config.files.gauges)?;
        let observations = read_observations(&config.files.observations, &gauges)?;
        for g in &gauges {
            if !bathymetry.spec.contains(g.lat, g.lon) {
                return Err(Error::Config(format!("gauge `{}` lies outside the bathymetry grid", g.name)));
            }
        }
        crate::wavesim::gauge_cells(&bathymetry, &gauges)?;
        let model = ForwardModel {
            geometry,
            bathymetry,
            gauges,
            scaling: config.scaling,
            simulation: config.simulation,
        };
        Ok(Scenario { config, model, observations })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Scenario::load(load_config(path)?)
    }

    pub fn log_prior_params(&self, p: &EarthquakeParams) -> f64 {
        self.config.prior.log_prior(p, &self.model.geometry)
    }

    /// Log posterior (unnormalized) of one parameter set, with its forward output.
    pub fn evaluate(&self, p: &EarthquakeParams) -> Result<(f64, f64, ForwardOutput)> {
        let lp = self.log_prior_params(p);
        let out = self.model.run(p)?;
        let ll = total_log_likelihood(&out, &self.observations)?;
        Ok((lp, ll, out))
    }

    /// Starting points for every chain: the explicit `initial` list, or the
    /// best of `init.candidates` prior draws with positive posterior density.
    pub fn initial_points(&self) -> Result<Vec<Vec<f64>>> {
        if !self.config.initial.is_empty() {
            return Ok(self.config.initial.iter().map(|p| p.to_array().to_vec()).collect());
        }
        let init = self.config.init;
        (0..self.config.sampler.n_chains)
            .map(|chain| {
                let mut rng = chain_rng(self.config.seed, INIT_STREAM - chain as u64);
                let draws = (0..init.max_attempts)
                    .map(|_| self.config.prior.sample(&self.model.geometry, &mut rng))
                    .collect::<Result<Vec<_>>>()?;
                let mut found: Vec<(f64, EarthquakeParams)> = Vec::new();
                for batch in draws.chunks(rayon::current_num_threads().max(1) * 2) {
                    let scored: Vec<f64> = batch
                        .par_iter()
                        .map(|p| {
                            let lp = self.log_prior(&p.to_array());
                            if lp == f64::NEG_INFINITY {
                                return lp;
                            }
                            self.forward(&p.to_array())
                                .and_then(|o| self.log_likelihood(&o))
                                .map(|ll| lp + ll)
                                .unwrap_or(f64::NEG_INFINITY)
                        })
                        .collect();
                    for (p, lp) in batch.iter().zip(scored) {
                        if lp > f64::NEG_INFINITY && found.len() < init.candidates {
                            found.push((lp, *p));
                        }
                    }
                    if found.len() >= init.candidates {
                        break;
                    }
                }
                let best = found
                    .iter()
                    .fold(None::<&(f64, EarthquakeParams)>, |b, c| match b {
                        Some(b) if b.0 >= c.0 => Some(b),
                        _ => Some(c),
                    })
                    .ok_or(Error::Initialization { chain })?;
                info!("chain {chain} starts at {:?} (log posterior {:.3})", best.1, best.0);
                Ok(best.1.to_array().to_vec())
            })
            .collect()
    }
}

/// Stream ids below this (counting down by chain) seed the initial prior draws.
const INIT_STREAM: u64 = u64::MAX - 1;

impl Target for Scenario {
    type Output = ForwardOutput;

    fn dim(&self) -> usize {
        EarthquakeParams::DIM
    }

    fn log_prior(&self, x: &[f64]) -> f64 {
        match EarthquakeParams::from_slice(x) {
            Ok(p) => self.log_prior_params(&p),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn forward(&self, x: &[f64]) -> Result<ForwardOutput> {
        self.model.run(&EarthquakeParams::from_slice(x)?)
    }

    fn log_likelihood(&self, out: &ForwardOutput) -> Result<f64> {
        total_log_likelihood(out, &self.observations)
    }
}

// ---------------------------------------------------------------------------
// Sample files

/// Column names of the samples table for the given gauges.
pub fn sample_columns(gauges: &[String]) -> Vec<String> {
    let mut cols: Vec<String> = ["chain", "step"].iter().map(|s| s.to_string()).collect();
    cols.extend(EarthquakeParams::NAMES.iter().map(|s| s.to_string()));
    cols.extend(["log_prior", "log_lik", "log_post", "accepted"].iter().map(|s| s.to_string()));
    for g in gauges {
        for kind in ObsKind::ALL {
            cols.push(format!("{g}_{kind}"));
        }
    }
    cols
}

fn record_fields(r: &SampleRecord<ForwardOutput>) -> Vec<String> {
    let mut f = vec![r.chain.to_string(), r.step.to_string()];
    f.extend(r.params.iter().map(|x| x.to_string()));
    f.extend([r.log_prior, r.log_lik, r.log_post].iter().map(|x| x.to_string()));
    f.push(u8::from(r.accepted).to_string());
    for (_, o) in &r.forward.gauges {
        for kind in ObsKind::ALL {
            f.push(kind.select(o).to_string());
        }
    }
    f
}

fn parse_record(row: &csv::StringRecord, gauges: &[String], path: &Path) -> Result<SampleRecord<ForwardOutput>> {
    let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
    let want = 12 + 3 * gauges.len();
    if row.len() != want {
        return Err(Error::parse(path, line, format!("expected {want} columns, found {}", row.len())));
    }
    let num = |i: usize| -> Result<f64> {
        row[i].parse::<f64>().map_err(|_| Error::parse(path, line, format!("bad number `{}`", &row[i])))
    };
    let int = |i: usize| -> Result<usize> {
        row[i].parse::<usize>().map_err(|_| Error::parse(path, line, format!("bad integer `{}`", &row[i])))
    };
    let forward = ForwardOutput {
        gauges: gauges
            .iter()
            .enumerate()
            .map(|(g, name)| {
                let base = 12 + 3 * g;
                Ok((name.clone(), GaugeObservables { max_height: num(base)?, arrival: num(base + 1)?, inundation: num(base + 2)? }))
            })
            .collect::<Result<_>>()?,
    };
    Ok(SampleRecord {
        chain: int(0)?,
        step: int(1)?,
        params: (2..8).map(num).collect::<Result<_>>()?,
        log_prior: num(8)?,
        log_lik: num(9)?,
        log_post: num(10)?,
        accepted: int(11)? == 1,
        forward,
    })
}

/// Gauge names encoded in a samples header.
fn gauges_from_header(header: &csv::StringRecord, path: &Path) -> Result<Vec<String>> {
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 12 || (cols.len() - 12) % 3 != 0 || cols[..12] != sample_columns(&[])[..] {
        return Err(Error::parse(path, 1, "not a samples table header"));
    }
    cols[12..]
        .chunks(3)
        .map(|c| {
            c[0].strip_suffix("_height")
                .map(str::to_string)
                .ok_or_else(|| Error::parse(path, 1, format!("unexpected column `{}`", c[0])))
        })
        .collect()
}

/// Reads a samples table. Returns the gauge names and the records in file order.
pub fn read_samples(path: &Path) -> Result<(Vec<String>, Vec<SampleRecord<ForwardOutput>>)> {
    let mut reader = csv::ReaderBuilder::new().from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let gauges = gauges_from_header(&header, path)?;
    let records = reader
        .records()
        .map(|row| parse_record(&row.map_err(|e| csv_error(path, e))?, &gauges, path))
        .collect::<Result<Vec<_>>>()?;
    Ok((gauges, records))
}

fn to_csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("writing to memory");
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 fields")
}

fn rng_fields(rng: &ChaCha8Rng) -> String {
    let seed: String = rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
    format!("{seed} {} {}", rng.get_stream(), rng.get_word_pos())
}

fn parse_rng(fields: &[&str], path: &Path, line: usize) -> Result<ChaCha8Rng> {
    let bad = || Error::parse(path, line, "malformed rng state");
    if fields.len() != 3 || fields[0].len() != 64 {
        return Err(bad());
    }
    let mut seed = [0u8; 32];
    for (i, b) in seed.iter_mut().enumerate() {
        *b = u8::from_str_radix(&fields[0][2 * i..2 * i + 2], 16).map_err(|_| bad())?;
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(fields[1].parse().map_err(|_| bad())?);
    rng.set_word_pos(fields[2].parse().map_err(|_| bad())?);
    Ok(rng)
}

const CHECKPOINT_MAGIC: &str = "histquake-checkpoint 1";

/// Writes a checkpoint as text: a header, the resampling stream, then per
/// chain a counter/stream line followed by the current record as a samples row.
pub fn write_checkpoint(path: &Path, cp: &Checkpoint<ForwardOutput>, gauges: &[String]) -> Result<()> {
    let mut text = format!("{CHECKPOINT_MAGIC}\nstep {}\nchains {}\n", cp.step, cp.states.len());
    text.push_str(&format!("resample_rng {}\n", rng_fields(&cp.resample_rng)));
    text.push_str(&format!("columns {}", to_csv_line(&sample_columns(gauges))));
    for s in &cp.states {
        text.push_str(&format!(
            "chain {} {} {} {} {}\n",
            s.current.chain,
            s.proposed,
            s.accepted,
            s.forward_failures,
            rng_fields(&s.rng)
        ));
        text.push_str(&to_csv_line(&record_fields(&s.current)));
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint<ForwardOutput>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<&str> = text.lines().collect();
    let bad = |line: usize, msg: &str| Error::parse(path, line, msg.to_string());
    if lines.first() != Some(&CHECKPOINT_MAGIC) {
        return Err(bad(1, "not a checkpoint file"));
    }
    let value = |i: usize, key: &str| -> Result<Vec<&str>> {
        let l = lines.get(i).ok_or_else(|| bad(i + 1, "truncated checkpoint"))?;
        let mut parts = l.split(' ');
        if parts.next() != Some(key) {
            return Err(bad(i + 1, &format!("expected `{key}`")));
        }
        Ok(parts.collect())
    };
    let step: usize = value(1, "step")?.first().and_then(|s| s.parse().ok()).ok_or_else(|| bad(2, "bad step"))?;
    let chains: usize = value(2, "chains")?.first().and_then(|s| s.parse().ok()).ok_or_else(|| bad(3, "bad chain count"))?;
    let resample_rng = parse_rng(&value(3, "resample_rng")?, path, 4)?;
    let columns_line = lines.get(4).and_then(|l| l.strip_prefix("columns ")).ok_or_else(|| bad(5, "expected `columns`"))?;
    let mut header_reader = csv::ReaderBuilder::new().has_headers(false).from_reader(columns_line.as_bytes());
    let header = header_reader
        .records()
        .next()
        .ok_or_else(|| bad(5, "empty columns"))?
        .map_err(|e| csv_error(path, e))?;
    let gauges = gauges_from_header(&header, path)?;

    let mut states = Vec::with_capacity(chains);
    for c in 0..chains {
        let i = 5 + 2 * c;
        let head = value(i, "chain")?;
        if head.len() != 7 {
            return Err(bad(i + 1, "malformed chain line"));
        }
        let count = |k: usize| head[k].parse::<u64>().map_err(|_| bad(i + 1, "bad counter"));
        let rng = parse_rng(&head[4..7], path, i + 1)?;
        let row_text = lines.get(i + 1).ok_or_else(|| bad(i + 2, "truncated checkpoint"))?;
        let mut rr = csv::ReaderBuilder::new().has_headers(false).from_reader(row_text.as_bytes());
        let row = rr.records().next().ok_or_else(|| bad(i + 2, "missing record"))?.map_err(|e| csv_error(path, e))?;
        let current = parse_record(&row, &gauges, path)?;
        states.push(ChainState { current, rng, proposed: count(1)?, accepted: count(2)?, forward_failures: count(3)? });
    }
    Ok(Checkpoint { step, states, resample_rng })
}

/// Streams records to `samples.csv` and checkpoints to `checkpoint.txt` in
/// the output directory.
pub struct CsvSink {
    samples: PathBuf,
    checkpoint: PathBuf,
    gauges: Vec<String>,
    writer: BufWriter<File>,
}

impl CsvSink {
    /// Starts a fresh samples table, replacing any previous one.
    pub fn create(dir: &Path, gauges: &[String]) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let samples = dir.join(SAMPLES_FILE);
        let file = File::create(&samples).map_err(|e| Error::io(&samples, e))?;
        let mut writer = BufWriter::new(file);
        writer.write_all(to_csv_line(&sample_columns(gauges)).as_bytes()).map_err(|e| Error::io(&samples, e))?;
        writer.flush().map_err(|e| Error::io(&samples, e))?;
        Ok(CsvSink { checkpoint: dir.join(CHECKPOINT_FILE), samples, gauges: gauges.to_vec(), writer })
    }

    /// Reopens an existing table for a resumed run, dropping any rows written
    /// after the checkpoint's step.
    pub fn resume(dir: &Path, gauges: &[String], step: usize) -> Result<Self> {
        let samples = dir.join(SAMPLES_FILE);
        let (found, records) = read_samples(&samples)?;
        if found != gauges {
            return Err(Error::Config(format!("{} was written for gauges {found:?}", samples.display())));
        }
        let mut sink = CsvSink::create(dir, gauges)?;
        let kept: Vec<_> = records.into_iter().filter(|r| r.step <= step).collect();
        sink.append(&kept)?;
        Ok(sink)
    }

    pub fn samples_path(&self) -> &Path {
        &self.samples
    }
}

impl SampleSink<ForwardOutput> for CsvSink {
    fn append(&mut self, records: &[SampleRecord<ForwardOutput>]) -> Result<()> {
        for r in records {
            self.writer
                .write_all(to_csv_line(&record_fields(r)).as_bytes())
                .map_err(|e| Error::io(&self.samples, e))?;
        }
        self.writer.flush().map_err(|e| Error::io(&self.samples, e))
    }

    fn checkpoint(&mut self, cp: &Checkpoint<ForwardOutput>) -> Result<()> {
        write_checkpoint(&self.checkpoint, cp, &self.gauges)
    }
}

/// Appends text to a file, creating it if needed.
pub fn append_text(path: &Path, text: &str) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads the first line of a text file, for quick header checks.
pub fn first_line(path: &Path) -> Result<String> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    BufReader::new(f).read_line(&mut line).map_err(|e| Error::io(path, e))?;
    Ok(line.trim_end().to_string())
}

// ---------------------------------------------------------------------------
// Synthetic scenarios

/// Flat-bottomed basin of `n × n` square cells centered on (lat, lon).
pub fn constant_basin(center_lat: f64, center_lon: f64, cell_deg: f64, n: usize, depth_m: f64) -> Result<BathymetryGrid> {
    let half = 0.5 * cell_deg * (n as f64 - 1.0);
    let spec = GridSpec::new(center_lat - half, center_lon - half, cell_deg, cell_deg, n, n)?;
    BathymetryGrid::constant(spec, depth_m)
}

/// Straight north–south trench at `trench_lon`, dipping east at `dip_deg`,
/// tabulated on a regular grid from the trench to `east_extent_deg` east.
pub fn straight_trench(
    lat_range: (f64, f64),
    trench_lon: f64,
    east_extent_deg: f64,
    spacing_deg: f64,
    top_depth_km: f64,
    dip_deg: f64,
) -> Result<FaultGeometry> {
    let km_per_deg_lon = crate::METERS_PER_DEGREE / 1000.0 * (0.5 * (lat_range.0 + lat_range.1)).to_radians().cos();
    let nlat = ((lat_range.1 - lat_range.0) / spacing_deg).round() as usize;
    let nlon = (east_extent_deg / spacing_deg).round() as usize;
    let mut samples = Vec::new();
    for i in 0..=nlat {
        for j in 0..=nlon {
            let lat = lat_range.0 + spacing_deg * i as f64;
            let east = spacing_deg * j as f64;
            let depth = top_depth_km + east * km_per_deg_lon * dip_deg.to_radians().tan();
            samples.push(GeometrySample { lat, lon: trench_lon + east, depth, strike: 0.0, dip: dip_deg });
        }
    }
    FaultGeometry::new(samples)
}

/// Widths of the synthetic observation distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Height standard deviation as a fraction of the true height.
    pub height_rel: f64,
    /// Arrival standard deviation, minutes.
    pub arrival_min: f64,
    /// Inundation standard deviation as a fraction of the true value; no
    /// inundation observations when absent.
    pub inundation_rel: Option<f64>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { height_rel: 0.1, arrival_min: 2.0, inundation_rel: None }
    }
}

/// Observation distributions centered on the forward output at `truth`.
pub fn synthetic_observations(out: &ForwardOutput, noise: &NoiseSpec) -> Result<Vec<Observation>> {
    let mut obs = Vec::new();
    for (name, o) in &out.gauges {
        if !o.arrived() {
            return Err(Error::Domain(format!("the wave never reaches gauge `{name}` for the chosen truth")));
        }
        if !(o.max_height > 0.0) {
            return Err(Error::Domain(format!("zero wave height at gauge `{name}` for the chosen truth")));
        }
        obs.push(Observation::new(name.clone(), ObsKind::Height, ObsDist::Normal { mean: o.max_height, std: noise.height_rel * o.max_height }));
        obs.push(Observation::new(name.clone(), ObsKind::Arrival, ObsDist::Normal { mean: o.arrival, std: noise.arrival_min }));
        if let Some(rel) = noise.inundation_rel {
            obs.push(Observation::new(name.clone(), ObsKind::Inundation, ObsDist::Normal { mean: o.inundation, std: rel * o.inundation }));
        }
    }
    for o in &obs {
        o.dist.validate()?;
    }
    Ok(obs)
}

/// Known truth of a synthetic scenario, as written to `truth.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub params: EarthquakeParams,
    pub noise: NoiseSpec,
}

/// Runs the forward model at `truth`, writes `observations.csv` and
/// `truth.toml` to `out_dir`, and returns the observations and the forward output.
pub fn generate_synthetic_scenario(
    model: &ForwardModel,
    prior: &PriorSpec,
    truth: &EarthquakeParams,
    noise: &NoiseSpec,
    out_dir: &Path,
) -> Result<(Vec<Observation>, ForwardOutput)> {
    if prior.log_prior(truth, &model.geometry) == f64::NEG_INFINITY {
        return Err(Error::Config(format!("truth {truth:?} has zero prior density")));
    }
    let out = model.run(truth)?;
    let obs = synthetic_observations(&out, noise)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_observations(&out_dir.join("observations.csv"), &obs)?;
    let record = TruthRecord { params: *truth, noise: *noise };
    let text = toml::to_string(&record).map_err(|e| Error::Config(e.to_string()))?;
    let path = out_dir.join("truth.toml");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok((obs, out))
}

pub fn read_truth(path: &Path) -> Result<TruthRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| {
        let line = e.span().map(|s| line_of(&text, s.start)).unwrap_or(0);
        Error::parse(path, line, e.message().to_string())
    })
}

/// Layout of the built-in synthetic scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub center: (f64, f64),
    pub cells: usize,
    pub cell_deg: f64,
    pub depth_m: f64,
    pub trench_lon: f64,
    pub trench_lat_range: (f64, f64),
    pub trench_extent_deg: f64,
    pub trench_top_km: f64,
    pub trench_dip_deg: f64,
    pub gauges: Vec<Gauge>,
    pub truth: EarthquakeParams,
    pub noise: NoiseSpec,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let gauge = |name: &str, lat, lon| Gauge {
            name: name.into(),
            lat,
            lon,
            arrival_threshold: crate::wavesim::DEFAULT_ARRIVAL_THRESHOLD_M,
            beach_slope_deg: 2.0,
        };
        SyntheticSpec {
            center: (-5.0, 130.0),
            cells: 100,
            cell_deg: 0.1,
            depth_m: 4000.0,
            trench_lon: 130.0,
            trench_lat_range: (-8.5, -1.5),
            trench_extent_deg: 2.5,
            trench_top_km: 5.0,
            trench_dip_deg: 12.0,
            gauges: vec![
                gauge("north", -2.0, 128.5),
                gauge("west", -5.5, 127.5),
                gauge("south", -8.5, 129.0),
                gauge("east", -4.0, 133.5),
                gauge("southeast", -7.5, 132.5),
            ],
            truth: EarthquakeParams { lat: -5.0, lon: 131.0, depth_offset: 0.0, magnitude: 8.6, dlogl: 0.0, dlogw: 0.0 },
            noise: NoiseSpec::default(),
        }
    }
}

/// Sampler layout used with the built-in synthetic scenario: 4 chains of
/// 5000 steps with a single resampling after step 1000.
pub fn synthetic_sampler() -> SamplerConfig {
    SamplerConfig {
        n_chains: 4,
        total_steps: 5000,
        burn_in: 1000,
        resample_steps: Some(vec![1000]),
        ..SamplerConfig::default()
    }
}

/// Files of a generated synthetic scenario.
#[derive(Debug, Clone)]
pub struct SyntheticBundle {
    pub config_path: PathBuf,
    pub truth: EarthquakeParams,
    pub forward: ForwardOutput,
    pub observations: Vec<Observation>,
}

/// Writes a complete synthetic scenario (grids, tables, truth and a
/// `scenario.toml` using `sampler`) into `dir`.
pub fn write_synthetic_bundle(spec: &SyntheticSpec, dir: &Path, seed: u64, sampler: SamplerConfig) -> Result<SyntheticBundle> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let bathymetry = constant_basin(spec.center.0, spec.center.1, spec.cell_deg, spec.cells, spec.depth_m)?;
    let geometry = straight_trench(
        spec.trench_lat_range,
        spec.trench_lon,
        spec.trench_extent_deg,
        0.25,
        spec.trench_top_km,
        spec.trench_dip_deg,
    )?;
    bathymetry.write_ascii(&dir.join("bathymetry.asc"))?;
    geometry.write_csv(&dir.join("geometry.csv"))?;
    Gauge::write_csv(&spec.gauges, &dir.join("gauges.csv"))?;

    let config = ScenarioConfig {
        seed,
        output_dir: PathBuf::from("output"),
        files: FilePaths {
            geometry: "geometry.csv".into(),
            bathymetry: "bathymetry.asc".into(),
            gauges: "gauges.csv".into(),
            observations: "observations.csv".into(),
        },
        prior: PriorSpec::default(),
        scaling: ScalingLaw::default(),
        sampler,
        simulation: SimulationSettings::default(),
        init: InitSettings::default(),
        initial: Vec::new(),
    };
    let model = ForwardModel {
        geometry,
        bathymetry,
        gauges: spec.gauges.clone(),
        scaling: config.scaling,
        simulation: config.simulation,
    };
    let (observations, forward) = generate_synthetic_scenario(&model, &config.prior, &spec.truth, &spec.noise, dir)?;
    let config_path = dir.join("scenario.toml");
    fs::write(&config_path, config.to_toml()?).map_err(|e| Error::io(&config_path, e))?;
    Ok(SyntheticBundle { config_path, truth: spec.truth, forward, observations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_numbers() {
        assert_eq!(line_of("a\nb\nc", 0), 1);
        assert_eq!(line_of("a\nb\nc", 2), 2);
        assert_eq!(line_of("a\nb\nc", 4), 3);
    }

    #[test]
    fn columns_round_trip_through_header() {
        let g = vec!["Pulu Ai".to_string(), "x".to_string()];
        let cols = sample_columns(&g);
        assert_eq!(cols.len(), 18);
        assert_eq!(cols[12], "Pulu Ai_height");
        let header = csv::StringRecord::from(cols);
        assert_eq!(gauges_from_header(&header, Path::new("t")).unwrap(), g);
    }

    #[test]
    fn rng_state_round_trip() {
        use rand::Rng;
        let mut rng = chain_rng(42, 3);
        let _: u64 = rng.random();
        let text = rng_fields(&rng);
        let fields: Vec<&str> = text.split(' ').collect();
        let mut back = parse_rng(&fields, Path::new("t"), 1).unwrap();
        assert_eq!(back.random::<u64>(), rng.random::<u64>());
    }

    #[test]
    fn trench_depth_increases_east() {
        let g = straight_trench((-6.0, -4.0), 130.0, 2.0, 0.25, 5.0, 12.0).unwrap();
        let near = g.interp(-5.0, 130.1).unwrap();
        let far = g.interp(-5.0, 131.0).unwrap();
        assert!(far.depth > near.depth && near.depth > 5.0);
        assert_eq!(far.strike, 0.0);
        assert!(g.is_gridded());
    }
}
