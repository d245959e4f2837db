//! Subcommand implementations behind the `histquake` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use histquake_core::error::{Error, Result};
use histquake_core::mcmc::{self, diagnostics, histogram, rolling_stats, run_sampler, SampleStore, Start, ROLLING_WINDOW};
use histquake_core::obsmodel::Observation;
use histquake_core::scenario::{
    self, load_config, read_checkpoint, read_samples, synthetic_sampler, write_synthetic_bundle, CsvSink, NoiseSpec, Scenario,
    SyntheticSpec,
};
use histquake_core::sensitivity::{
    expectation_bounds, fim, kl_quadratic, log_grid, sensitivity_bound, worst_direction, FimMode, ObsParamVector,
};
use histquake_core::{EarthquakeParams, ForwardOutput, SampleRecord};

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const ACCEPTANCE_FILE: &str = "acceptance.csv";
pub const ROLLING_FILE: &str = "rolling.csv";
pub const PREDICTIVE_FILE: &str = "predictive.csv";
pub const FIM_FILE: &str = "fim.csv";
pub const SENSITIVITY_FILE: &str = "sensitivity.csv";
pub const PARAMETER_SENSITIVITY_FILE: &str = "parameter_sensitivity.csv";
pub const BOUNDS_FILE: &str = "bounds.csv";

#[derive(Debug, Parser)]
#[command(name = "histquake", version, about = "Bayesian source inversion of historical earthquakes from tsunami accounts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the forward model once and print the gauge observables.
    Forward(ForwardArgs),
    /// Sample the posterior (or resume a previous run).
    Sample(SampleArgs),
    /// Summarize a samples table: rolling statistics, acceptance, MAP/MLE, predictive histograms.
    Diagnose(ConfigArgs),
    /// Fisher information, relative-entropy table, bound curves and sensitivity bounds.
    Sensitivity(SensitivityArgs),
    /// Write a synthetic-truth scenario.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Scenario configuration (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub lat: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: f64,
    #[arg(long)]
    pub magnitude: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub depth_offset: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub dlogl: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub dlogw: f64,
    /// Also write the seafloor deformation as an ESRI ASCII grid.
    #[arg(long)]
    pub deformation: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to the number of chains).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Continue from this checkpoint instead of starting fresh.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Use absolute rather than relative observation-parameter perturbations.
    #[arg(long)]
    pub absolute: bool,
    /// Size of the worst-case perturbation for the parameter sensitivity table.
    #[arg(long, default_value_t = 0.1)]
    pub perturbation: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for the generated scenario.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, allow_hyphen_values = true)]
    pub lat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lon: Option<f64>,
    #[arg(long)]
    pub magnitude: Option<f64>,
    /// Height standard deviation as a fraction of the true height.
    #[arg(long)]
    pub height_rel: Option<f64>,
    /// Arrival standard deviation in minutes.
    #[arg(long)]
    pub arrival_min: Option<f64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub total_steps: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Single resampling step (replaces the periodic rule).
    #[arg(long)]
    pub resample_at: Option<usize>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forward(a) => forward(&a),
        Command::Sample(a) => sample(&a).map(|_| ()),
        Command::Diagnose(a) => diagnose(&a),
        Command::Sensitivity(a) => sensitivity(&a),
        Command::Synth(a) => synth(&a),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) }
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn forward(a: &ForwardArgs) -> Result<()> {
    let scenario = Scenario::from_file(&a.config.config)?;
    let p = EarthquakeParams {
        lat: a.lat,
        lon: a.lon,
        depth_offset: a.depth_offset,
        magnitude: a.magnitude,
        dlogl: a.dlogl,
        dlogw: a.dlogw,
    };
    p.validate()?;
    if let Some(path) = &a.deformation {
        scenario.model.deformation(&p)?.write_ascii(path)?;
    }
    let (lp, ll, out) = scenario.evaluate(&p)?;
    let stdout = std::io::stdout();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(stdout.lock());
    let fail = |e: csv::Error| io_error(Path::new("<stdout>"), e);
    w.write_record(["gauge", "arrival_min", "max_height_m", "inundation_m"]).map_err(fail)?;
    for (name, o) in &out.gauges {
        w.write_record([name.clone(), o.arrival.to_string(), o.max_height.to_string(), o.inundation.to_string()])
            .map_err(fail)?;
    }
    w.flush().map_err(|e| io_error(Path::new("<stdout>"), e))?;
    drop(w);
    println!("# log_prior = {lp}");
    println!("# log_likelihood = {ll}");
    Ok(())
}

/// Runs or resumes the sampler; returns the path of the samples table.
pub fn sample(a: &SampleArgs) -> Result<PathBuf> {
    let mut cfg = load_config(&a.config.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
        cfg.sampler.seed = seed;
    }
    let scenario = Scenario::load(cfg)?;
    let sampler = &scenario.config.sampler;
    let workers = a.workers.unwrap_or(sampler.n_chains);
    if workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let dir = scenario.config.output_dir.clone();
    let gauges = scenario.model.gauge_names();
    let summary = match &a.resume {
        Some(cp_path) => {
            let cp = read_checkpoint(cp_path)?;
            let mut sink = CsvSink::resume(&dir, &gauges, cp.step)?;
            run_sampler(sampler, &scenario, Start::Resume(cp), workers, &mut sink)?
        }
        None => {
            let starts = scenario.initial_points()?;
            let mut sink = CsvSink::create(&dir, &gauges)?;
            run_sampler(sampler, &scenario, Start::Fresh(&starts), workers, &mut sink)?
        }
    };
    for (c, acc) in summary.acceptance.iter().enumerate() {
        println!("chain {c}: acceptance {acc:.3}, forward failures {}", summary.forward_failures[c]);
    }
    println!("resampled after steps {:?}", summary.resampled_at);
    let path = dir.join(scenario::SAMPLES_FILE);
    println!("samples written to {}", path.display());
    Ok(path)
}

/// Reads the samples table of a scenario and checks it against the gauges.
pub fn load_store(scenario: &Scenario) -> Result<SampleStore<ForwardOutput>> {
    let path = scenario.config.output_dir.join(scenario::SAMPLES_FILE);
    let (gauges, records) = read_samples(&path)?;
    if gauges != scenario.model.gauge_names() {
        return Err(Error::Config(format!("{} does not match the scenario's gauges", path.display())));
    }
    let sampler = &scenario.config.sampler;
    let store = SampleStore::new(records, sampler.n_chains, sampler.posterior_start());
    if store.posterior_set().next().is_none() {
        return Err(Error::Config(format!(
            "{} has no records after step {} (the posterior set is empty)",
            path.display(),
            store.posterior_start
        )));
    }
    Ok(store)
}

fn record_row(label: &str, r: &SampleRecord<ForwardOutput>) -> Vec<String> {
    let mut row = vec![label.to_string(), r.chain.to_string(), r.step.to_string()];
    row.extend(r.params.iter().map(|x| x.to_string()));
    row.extend([r.log_prior, r.log_lik, r.log_post].iter().map(|x| x.to_string()));
    row
}

pub fn diagnose(a: &ConfigArgs) -> Result<()> {
    let scenario = Scenario::from_file(&a.config)?;
    let store = load_store(&scenario)?;
    let dir = &scenario.config.output_dir;
    let d = diagnostics(&store);

    write_rows(
        &dir.join(DIAGNOSTICS_FILE),
        &["parameter", "mean", "std", "q05", "q25", "q50", "q75", "q95", "map", "mle"],
        EarthquakeParams::NAMES.iter().enumerate().map(|(i, name)| {
            let s = &d.summary[i];
            let mut row = vec![name.to_string(), s.mean.to_string(), s.std.to_string()];
            row.extend(s.quantiles.iter().map(|q| q.to_string()));
            for best in [&d.map, &d.mle] {
                row.push(best.as_ref().map_or("nan".into(), |r| r.params[i].to_string()));
            }
            row
        }),
    )?;

    write_rows(
        &dir.join(ACCEPTANCE_FILE),
        &["chain", "acceptance"],
        d.acceptance.iter().enumerate().map(|(c, a)| vec![c.to_string(), a.to_string()]),
    )?;

    let rolling: Vec<Vec<mcmc::RollingPoint>> =
        (0..EarthquakeParams::DIM).map(|i| rolling_stats(&store, i, ROLLING_WINDOW)).collect();
    write_rows(
        &dir.join(ROLLING_FILE),
        &["parameter", "step", "mean", "std"],
        rolling.iter().enumerate().flat_map(|(i, pts)| {
            pts.iter().map(move |p| {
                vec![EarthquakeParams::NAMES[i].to_string(), p.step.to_string(), p.mean.to_string(), p.std.to_string()]
            })
        }),
    )?;

    let post: Vec<&SampleRecord<ForwardOutput>> = store.posterior_set().collect();
    let mut predictive = Vec::new();
    for o in &scenario.observations {
        let values: Vec<f64> = post.iter().filter_map(|r| o.value(&r.forward).ok()).collect();
        for (lo, hi, count) in histogram(&values, PREDICTIVE_BINS) {
            predictive.push(vec![o.gauge.clone(), o.kind.to_string(), lo.to_string(), hi.to_string(), count.to_string()]);
        }
    }
    write_rows(&dir.join(PREDICTIVE_FILE), &["gauge", "observation", "lower", "upper", "count"], predictive)?;

    let mut extremes = Vec::new();
    if let Some(r) = &d.map {
        extremes.push(record_row("map", r));
    }
    if let Some(r) = &d.mle {
        extremes.push(record_row("mle", r));
    }
    let mut header = vec!["estimate", "chain", "step"];
    header.extend(EarthquakeParams::NAMES);
    header.extend(["log_prior", "log_lik", "log_post"]);
    write_rows(&dir.join("map_mle.csv"), &header, extremes)?;

    println!("posterior set: {} records after step {}", d.posterior_size, store.posterior_start);
    for (i, name) in EarthquakeParams::NAMES.iter().enumerate() {
        let s = &d.summary[i];
        println!("{name:>13}: mean {:>10.4}  std {:>8.4}  90% [{:.4}, {:.4}]", s.mean, s.std, s.quantiles[0], s.quantiles[4]);
    }
    println!("acceptance per chain: {:?}", d.acceptance.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    Ok(())
}

const PREDICTIVE_BINS: usize = 20;

/// Relative-entropy levels at which bound curves are reported.
pub fn bound_r_grid() -> Vec<f64> {
    log_grid(1e-4, 10.0, 51)
}

pub fn sensitivity(a: &SensitivityArgs) -> Result<()> {
    let scenario = Scenario::from_file(&a.config.config)?;
    let store = load_store(&scenario)?;
    let dir = &scenario.config.output_dir;
    let obs: &[Observation] = &scenario.observations;
    let theta = ObsParamVector::new(obs);
    let mode = if a.absolute { FimMode::Absolute } else { FimMode::Relative };
    let post: Vec<&SampleRecord<ForwardOutput>> = store.posterior_set().collect();
    let i = fim(post.iter().map(|r| &r.forward), obs, mode)?;
    i.validate()?;
    if i.excluded > 0 {
        warn!("{} posterior samples lie outside an observation's support and were excluded", i.excluded);
    }
    let worst = worst_direction(&i);
    if worst.degenerate {
        warn!("largest Fisher information eigenvalue is degenerate; the worst direction is one of several");
    }
    let labels: Vec<String> =
        theta.entries.iter().map(|e| format!("{}:{}:{}", e.gauge, e.kind, e.name)).collect();

    let mut header: Vec<&str> = vec!["row"];
    header.extend(labels.iter().map(String::as_str));
    write_rows(
        &dir.join(FIM_FILE),
        &header,
        (0..i.dim()).map(|r| {
            let mut row = vec![labels[r].clone()];
            row.extend((0..i.dim()).map(|c| i.matrix[(r, c)].to_string()));
            row
        }),
    )?;

    let table2 = theta
        .entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let mut v = vec![0.0; theta.len()];
            v[k] = match mode {
                FimMode::Relative => 0.1,
                FimMode::Absolute => 0.1 * e.value,
            };
            let re = kl_quadratic(&i, &v)?;
            Ok(vec![
                e.gauge.clone(),
                e.kind.to_string(),
                e.family.to_string(),
                e.name.to_string(),
                e.value.to_string(),
                i.matrix[(k, k)].to_string(),
                re.to_string(),
                worst.vector[k].to_string(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    write_rows(
        &dir.join(SENSITIVITY_FILE),
        &["name", "observation", "distribution", "parameter", "value", "FI", "RE_10pct", "sing_vec"],
        table2,
    )?;

    let v: Vec<f64> = worst
        .vector
        .iter()
        .zip(&theta.entries)
        .map(|(u, e)| match mode {
            FimMode::Relative => a.perturbation * u,
            FimMode::Absolute => a.perturbation * u * e.value,
        })
        .collect();
    let r_worst = kl_quadratic(&i, &v)?;
    let r_grid = bound_r_grid();
    let mut table3 = Vec::new();
    let mut bounds = Vec::new();
    for (p, name) in EarthquakeParams::NAMES.iter().enumerate() {
        let f: Vec<f64> = post.iter().map(|r| r.params[p]).collect();
        let (_, sd) = mcmc::mean_std(&f);
        table3.push(vec![name.to_string(), (sd * sd).to_string(), sensitivity_bound(&f, &v, &i)?.to_string()]);
        let curve = expectation_bounds(&f, &r_grid)?;
        for k in 0..curve.r.len() {
            bounds.push(vec![name.to_string(), curve.r[k].to_string(), curve.lower[k].to_string(), curve.upper[k].to_string()]);
        }
        bounds.push(vec![
            name.to_string(),
            f64::INFINITY.to_string(),
            curve.uniform_lower.to_string(),
            curve.uniform_upper.to_string(),
        ]);
    }
    write_rows(&dir.join(PARAMETER_SENSITIVITY_FILE), &["parameter", "variance", "sensitivity_bound"], table3)?;
    write_rows(&dir.join(BOUNDS_FILE), &["observable", "R", "lower", "upper"], bounds)?;

    info!("Fisher information from {} samples ({} excluded)", i.samples, i.excluded);
    println!("largest Fisher information eigenvalue {:.6e}", worst.eigenvalue);
    println!("relative entropy of the {:.0}% worst-case perturbation: {r_worst:.6e}", 100.0 * a.perturbation);
    println!("reports written to {}", dir.display());
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut spec = SyntheticSpec::default();
    if let Some(x) = a.lat {
        spec.truth.lat = x;
    }
    if let Some(x) = a.lon {
        spec.truth.lon = x;
    }
    if let Some(x) = a.magnitude {
        spec.truth.magnitude = x;
    }
    spec.noise = NoiseSpec {
        height_rel: a.height_rel.unwrap_or(spec.noise.height_rel),
        arrival_min: a.arrival_min.unwrap_or(spec.noise.arrival_min),
        ..spec.noise
    };
    let mut sampler = synthetic_sampler();
    if let Some(n) = a.chains {
        sampler.n_chains = n;
    }
    if let Some(n) = a.total_steps {
        sampler.total_steps = n;
    }
    if let Some(n) = a.burn_in {
        sampler.burn_in = n;
    }
    if let Some(k) = a.resample_at {
        sampler.resample_steps = Some(vec![k]);
    }
    sampler.validate(EarthquakeParams::DIM)?;
    let bundle = write_synthetic_bundle(&spec, &a.out, a.seed, sampler)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let fail = |e: std::io::Error| io_error(Path::new("<stdout>"), e);
    writeln!(out, "truth: {:?}", bundle.truth).map_err(fail)?;
    for (name, o) in &bundle.forward.gauges {
        writeln!(
            out,
            "{name}: arrival {:.2} min, height {:.3} m, inundation {:.1} m",
            o.arrival, o.max_height, o.inundation
        )
        .map_err(fail)?;
    }
    writeln!(out, "{} observations; configuration at {}", bundle.observations.len(), bundle.config_path.display())
        .map_err(fail)?;
    Ok(())
}
