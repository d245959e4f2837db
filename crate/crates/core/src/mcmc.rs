//! Multi-chain random-walk Metropolis–Hastings with periodic importance
//! resampling of the chain states.
//!
//! Each chain owns a ChaCha8 stream selected by its chain id, so a run is a
//! pure function of the seed no matter how chains are scheduled onto worker
//! threads. Resampling draws from a dedicated stream.

use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stream id reserved for the resampling draws.
pub const RESAMPLE_STREAM: u64 = u64::MAX;

/// Steps in the trailing window of [`rolling_stats`].
pub const ROLLING_WINDOW: usize = 100;

/// The unnormalized posterior seen by the sampler.
pub trait Target: Sync {
    type Output: Clone + Send + Sync;

    fn dim(&self) -> usize;

    /// Log prior density; −∞ outside the support.
    fn log_prior(&self, x: &[f64]) -> f64;

    /// Runs the forward model. Errors are treated as zero likelihood.
    fn forward(&self, x: &[f64]) -> Result<Self::Output>;

    fn log_likelihood(&self, out: &Self::Output) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_chains: usize,
    /// Resample every this many steps.
    pub resample_period: usize,
    /// Explicit resampling steps; replaces the periodic rule when set.
    pub resample_steps: Option<Vec<usize>>,
    pub resample_enabled: bool,
    pub total_steps: usize,
    /// Steps discarded after the last resampling.
    pub burn_in: usize,
    /// Random-walk standard deviation per parameter.
    pub proposal_stds: Vec<f64>,
    /// Set from the scenario's top-level seed.
    #[serde(skip)]
    pub seed: u64,
    /// Steps between checkpoints and sink flushes.
    pub checkpoint_every: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_chains: 14,
            resample_period: 6000,
            resample_steps: None,
            resample_enabled: true,
            total_steps: 24000,
            burn_in: 1000,
            // Tuned for roughly 0.23 acceptance on the built-in synthetic scenario.
            proposal_stds: vec![0.07, 0.07, 3.0, 0.025, 0.035, 0.07],
            seed: 0,
            checkpoint_every: 250,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_chains == 0 || self.resample_period == 0 || self.checkpoint_every == 0 {
            return Err(Error::Config("n_chains, resample_period and checkpoint_every must be at least 1".into()));
        }
        if self.total_steps == 0 || self.burn_in >= self.total_steps {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than total_steps ({})",
                self.burn_in, self.total_steps
            )));
        }
        if self.proposal_stds.len() != dim {
            return Err(Error::Config(format!(
                "proposal_stds has {} entries, the model has {dim} parameters",
                self.proposal_stds.len()
            )));
        }
        if self.proposal_stds.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("proposal_stds must be positive: {:?}", self.proposal_stds)));
        }
        if let Some(steps) = &self.resample_steps {
            if steps.iter().any(|&s| s == 0 || s >= self.total_steps) {
                return Err(Error::Config(format!(
                    "resample_steps must lie in [1, total_steps): {steps:?}"
                )));
            }
        }
        if self.posterior_start() >= self.total_steps {
            return Err(Error::Config(format!(
                "no steps remain after the last resampling ({:?}) plus burn_in ({})",
                self.last_resample(),
                self.burn_in
            )));
        }
        Ok(())
    }

    /// Whether the chains are resampled right after step `k`.
    pub fn resamples_after(&self, k: usize) -> bool {
        if !self.resample_enabled || k >= self.total_steps {
            return false;
        }
        match &self.resample_steps {
            Some(steps) => steps.contains(&k),
            None => k > 0 && k % self.resample_period == 0,
        }
    }

    pub fn last_resample(&self) -> Option<usize> {
        (1..self.total_steps).rev().find(|&k| self.resamples_after(k))
    }

    /// First step of the posterior set minus one.
    pub fn posterior_start(&self) -> usize {
        self.last_resample().unwrap_or(0) + self.burn_in
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord<O> {
    pub chain: usize,
    pub step: usize,
    pub params: Vec<f64>,
    pub log_prior: f64,
    pub log_lik: f64,
    pub log_post: f64,
    pub forward: O,
    pub accepted: bool,
}

fn combine(log_prior: f64, log_lik: f64) -> f64 {
    let lp = log_prior + log_lik;
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp
    }
}

#[derive(Debug, Clone)]
pub struct ChainState<O> {
    pub current: SampleRecord<O>,
    pub rng: ChaCha8Rng,
    pub proposed: u64,
    pub accepted: u64,
    /// Proposals whose forward model or likelihood returned an error.
    pub forward_failures: u64,
}

impl<O> ChainState<O> {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// The rng stream for chain `chain` (or [`RESAMPLE_STREAM`]).
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Evaluates prior, forward model and likelihood at `x`. The forward output
/// is `None` when the prior rules `x` out or the forward model failed.
fn evaluate<T: Target>(target: &T, x: &[f64], failures: &mut u64) -> (f64, f64, Option<T::Output>) {
    let log_prior = target.log_prior(x);
    if log_prior == f64::NEG_INFINITY || log_prior.is_nan() {
        return (f64::NEG_INFINITY, f64::NEG_INFINITY, None);
    }
    match target.forward(x) {
        Ok(out) => match target.log_likelihood(&out) {
            Ok(ll) => (log_prior, ll, Some(out)),
            Err(e) => {
                *failures += 1;
                debug!("likelihood failed at {x:?}: {e}");
                (log_prior, f64::NEG_INFINITY, Some(out))
            }
        },
        Err(e) => {
            *failures += 1;
            debug!("forward model failed at {x:?}: {e}");
            (log_prior, f64::NEG_INFINITY, None)
        }
    }
}

/// Builds the starting state of each chain. Every starting point must have
/// positive posterior density.
pub fn initialize<T: Target>(target: &T, cfg: &SamplerConfig, starts: &[Vec<f64>]) -> Result<Vec<ChainState<T::Output>>> {
    if starts.len() != cfg.n_chains {
        return Err(Error::Dimension { expected: cfg.n_chains, actual: starts.len() });
    }
    starts
        .par_iter()
        .enumerate()
        .map(|(chain, x)| {
            if x.len() != target.dim() {
                return Err(Error::Dimension { expected: target.dim(), actual: x.len() });
            }
            let mut failures = 0;
            let (log_prior, log_lik, out) = evaluate(target, x, &mut failures);
            let log_post = combine(log_prior, log_lik);
            match out {
                Some(forward) if log_post > f64::NEG_INFINITY => Ok(ChainState {
                    current: SampleRecord { chain, step: 0, params: x.clone(), log_prior, log_lik, log_post, forward, accepted: true },
                    rng: chain_rng(cfg.seed, chain as u64),
                    proposed: 0,
                    accepted: 0,
                    forward_failures: 0,
                }),
                _ => Err(Error::Initialization { chain }),
            }
        })
        .collect()
}

/// One random-walk step. The proposal perturbs every coordinate with its own
/// normal increment, then one uniform decides acceptance. Proposals outside
/// the prior support are rejected without running the forward model.
pub fn mh_step<T: Target>(state: &mut ChainState<T::Output>, cfg: &SamplerConfig, target: &T, step: usize) -> SampleRecord<T::Output> {
    let proposal: Vec<f64> = state
        .current
        .params
        .iter()
        .zip(&cfg.proposal_stds)
        .map(|(x, s)| {
            let z: f64 = StandardNormal.sample(&mut state.rng);
            x + s * z
        })
        .collect();
    let u: f64 = state.rng.random();
    state.proposed += 1;

    let (log_prior, log_lik, out) = evaluate(target, &proposal, &mut state.forward_failures);
    let log_post = combine(log_prior, log_lik);
    let accept = match out {
        Some(out) if log_post > f64::NEG_INFINITY && u.ln() < log_post - state.current.log_post => Some(out),
        _ => None,
    };
    match accept {
        Some(forward) => {
            state.accepted += 1;
            state.current = SampleRecord { chain: state.current.chain, step, params: proposal, log_prior, log_lik, log_post, forward, accepted: true };
        }
        None => {
            state.current.step = step;
            state.current.accepted = false;
        }
    }
    state.current.clone()
}

/// Normalized resampling weights ∝ exp(log_post − max).
pub fn resample_weights(log_posts: &[f64]) -> Result<Vec<f64>> {
    let max = log_posts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(Error::Resample);
    }
    let raw: Vec<f64> = log_posts.iter().map(|lp| (lp - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Redraws every chain's current record, with replacement, from the current
/// records of all chains. Chains keep their own rng streams and counters.
pub fn resample_chains<O: Clone>(states: &mut [ChainState<O>], rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let weights = resample_weights(&states.iter().map(|s| s.current.log_post).collect::<Vec<_>>())?;
    let pool: Vec<SampleRecord<O>> = states.iter().map(|s| s.current.clone()).collect();
    let mut picks = Vec::with_capacity(states.len());
    for state in states.iter_mut() {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = weights.len() - 1;
        for (j, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = j;
                break;
            }
        }
        // Never land on a zero-weight record through rounding at the top end.
        while weights[pick] == 0.0 {
            pick -= 1;
        }
        let chain = state.current.chain;
        let step = state.current.step;
        state.current = SampleRecord { chain, step, ..pool[pick].clone() };
        picks.push(pick);
    }
    Ok(picks)
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone)]
pub struct Checkpoint<O> {
    /// Last completed step.
    pub step: usize,
    pub states: Vec<ChainState<O>>,
    pub resample_rng: ChaCha8Rng,
}

/// Receives records as the sampler produces them.
pub trait SampleSink<O> {
    /// Records of one segment, ordered by step then chain.
    fn append(&mut self, records: &[SampleRecord<O>]) -> Result<()>;

    /// Called after every appended segment, once the records are persisted.
    fn checkpoint(&mut self, _checkpoint: &Checkpoint<O>) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub acceptance: Vec<f64>,
    pub forward_failures: Vec<u64>,
    pub resampled_at: Vec<usize>,
}

/// Where a run starts.
pub enum Start<'a, O> {
    Fresh(&'a [Vec<f64>]),
    Resume(Checkpoint<O>),
}

/// Runs the chains to `cfg.total_steps`. Chains advance in parallel on
/// `workers` threads between synchronization points (resampling steps and
/// checkpoints); records reach the sink ordered by step then chain, which keeps
/// the output independent of `workers` and of where a run was resumed.
pub fn run_sampler<T, S>(cfg: &SamplerConfig, target: &T, start: Start<'_, T::Output>, workers: usize, sink: &mut S) -> Result<RunSummary>
where
    T: Target,
    S: SampleSink<T::Output>,
{
    cfg.validate(target.dim())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let (mut states, mut resample_rng, mut done) = match start {
        Start::Fresh(starts) => {
            let states = pool.install(|| initialize(target, cfg, starts))?;
            (states, chain_rng(cfg.seed, RESAMPLE_STREAM), 0)
        }
        Start::Resume(cp) => {
            if cp.states.len() != cfg.n_chains {
                return Err(Error::Config(format!(
                    "checkpoint has {} chains, configuration asks for {}",
                    cp.states.len(),
                    cfg.n_chains
                )));
            }
            info!("resuming after step {}", cp.step);
            (cp.states, cp.resample_rng, cp.step)
        }
    };
    let mut resampled_at: Vec<usize> = (1..=done).filter(|&k| cfg.resamples_after(k)).collect();

    while done < cfg.total_steps {
        let mut end = (done + cfg.checkpoint_every).min(cfg.total_steps);
        if let Some(k) = (done + 1..end).find(|&k| cfg.resamples_after(k)) {
            end = k;
        }
        let segments: Vec<Vec<SampleRecord<T::Output>>> = pool.install(|| {
            states
                .par_iter_mut()
                .map(|state| (done + 1..=end).map(|k| mh_step(state, cfg, target, k)).collect())
                .collect()
        });
        let mut per_chain: Vec<_> = segments.into_iter().map(Vec::into_iter).collect();
        let records: Vec<SampleRecord<T::Output>> =
            (done + 1..=end).flat_map(|_| per_chain.iter_mut().map(|it| it.next().expect("one record per step")).collect::<Vec<_>>()).collect();
        sink.append(&records)?;
        done = end;
        if cfg.resamples_after(done) {
            let picks = resample_chains(&mut states, &mut resample_rng)?;
            info!("resampled after step {done}: chains now at {picks:?}");
            resampled_at.push(done);
        }
        sink.checkpoint(&Checkpoint { step: done, states: states.clone(), resample_rng: resample_rng.clone() })?;
    }

    let failures: Vec<u64> = states.iter().map(|s| s.forward_failures).collect();
    if failures.iter().any(|&f| f > 0) {
        warn!("forward model failures per chain: {failures:?} (counted as zero likelihood)");
    }
    Ok(RunSummary {
        acceptance: states.iter().map(|s| s.acceptance_rate()).collect(),
        forward_failures: failures,
        resampled_at,
    })
}

/// All records of a run, ordered by chain then step.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore<O> {
    pub records: Vec<SampleRecord<O>>,
    pub n_chains: usize,
    /// Records with `step` above this belong to the posterior set.
    pub posterior_start: usize,
}

impl<O> SampleStore<O> {
    pub fn new(mut records: Vec<SampleRecord<O>>, n_chains: usize, posterior_start: usize) -> Self {
        records.sort_by_key(|r| (r.chain, r.step));
        SampleStore { records, n_chains, posterior_start }
    }

    pub fn posterior_set(&self) -> impl Iterator<Item = &SampleRecord<O>> {
        self.records.iter().filter(move |r| r.step > self.posterior_start)
    }

    pub fn chain(&self, chain: usize) -> impl Iterator<Item = &SampleRecord<O>> {
        self.records.iter().filter(move |r| r.chain == chain)
    }
}

/// Collects everything in memory.
#[derive(Debug, Clone, Default)]
pub struct MemorySink<O> {
    pub records: Vec<SampleRecord<O>>,
    pub last_checkpoint: Option<Checkpoint<O>>,
}

impl<O: Clone> SampleSink<O> for MemorySink<O> {
    fn append(&mut self, records: &[SampleRecord<O>]) -> Result<()> {
        self.records.extend_from_slice(records);
        Ok(())
    }

    fn checkpoint(&mut self, checkpoint: &Checkpoint<O>) -> Result<()> {
        self.last_checkpoint = Some(checkpoint.clone());
        Ok(())
    }
}

/// Runs the sampler into memory.
pub fn sample<T: Target>(cfg: &SamplerConfig, target: &T, starts: &[Vec<f64>], workers: usize) -> Result<(SampleStore<T::Output>, RunSummary)> {
    let mut sink = MemorySink { records: Vec::new(), last_checkpoint: None };
    let summary = run_sampler(cfg, target, Start::Fresh(starts), workers, &mut sink)?;
    Ok((SampleStore::new(sink.records, cfg.n_chains, cfg.posterior_start()), summary))
}

/// Mean and standard deviation at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingPoint {
    pub step: usize,
    pub mean: f64,
    pub std: f64,
}

/// Sample mean and (n − 1) standard deviation; std is 0 for fewer than two values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Trailing-window mean and std of `param`, pooled over chains: the point at
/// step k uses every chain's records with step in (k − window, k].
pub fn rolling_stats<O>(store: &SampleStore<O>, param: usize, window: usize) -> Vec<RollingPoint> {
    let max_step = store.records.iter().map(|r| r.step).max().unwrap_or(0);
    let mut by_step: Vec<Vec<f64>> = vec![Vec::new(); max_step + 1];
    for r in &store.records {
        by_step[r.step].push(r.params[param]);
    }
    let mut out = Vec::new();
    let mut pooled: Vec<f64> = Vec::new();
    for k in 1..=max_step {
        if by_step[k].is_empty() {
            continue;
        }
        pooled.clear();
        for s in k.saturating_sub(window - 1).max(1)..=k {
            pooled.extend_from_slice(&by_step[s]);
        }
        let (mean, std) = mean_std(&pooled);
        out.push(RollingPoint { step: k, mean, std });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub mean: f64,
    pub std: f64,
    /// 5, 25, 50, 75 and 95 % quantiles.
    pub quantiles: [f64; 5],
}

pub const SUMMARY_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

pub fn summarize(values: &[f64]) -> ParamSummary {
    let (mean, std) = mean_std(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    ParamSummary { mean, std, quantiles: SUMMARY_QUANTILES.map(|q| quantile(&sorted, q)) }
}

#[derive(Debug, Clone)]
pub struct Diagnostics<O> {
    /// Per chain: accepted steps / steps.
    pub acceptance: Vec<f64>,
    /// Per parameter, over the posterior set.
    pub summary: Vec<ParamSummary>,
    /// Records of the posterior set with the largest log posterior and log likelihood.
    pub map: Option<SampleRecord<O>>,
    pub mle: Option<SampleRecord<O>>,
    pub posterior_size: usize,
}

pub fn diagnostics<O: Clone>(store: &SampleStore<O>) -> Diagnostics<O> {
    let acceptance = (0..store.n_chains)
        .map(|c| {
            let (n, a) = store.chain(c).fold((0usize, 0usize), |(n, a), r| (n + 1, a + r.accepted as usize));
            if n == 0 { 0.0 } else { a as f64 / n as f64 }
        })
        .collect();
    let post: Vec<&SampleRecord<O>> = store.posterior_set().collect();
    let dim = store.records.first().map_or(0, |r| r.params.len());
    let summary = (0..dim)
        .map(|i| summarize(&post.iter().map(|r| r.params[i]).collect::<Vec<_>>()))
        .collect();
    let argmax = |key: fn(&SampleRecord<O>) -> f64| {
        post.iter()
            .copied()
            .filter(|r| key(r) > f64::NEG_INFINITY)
            .fold(None::<&SampleRecord<O>>, |best, r| match best {
                Some(b) if key(b) >= key(r) => Some(b),
                _ => Some(r),
            })
            .cloned()
    };
    Diagnostics {
        acceptance,
        summary,
        map: argmax(|r| r.log_post),
        mle: argmax(|r| r.log_lik),
        posterior_size: post.len(),
    }
}

/// Equal-width histogram over [min, max] of `values`; returns (lower edge,
/// upper edge, count) per bin. Non-finite values are skipped.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in finite {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + width * b as f64, lo + width * (b + 1) as f64, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// 1-D standard normal posterior with an optional support cut.
    struct Gauss {
        calls: AtomicUsize,
        upper: f64,
    }

    impl Target for Gauss {
        type Output = f64;

        fn dim(&self) -> usize {
            1
        }

        fn log_prior(&self, x: &[f64]) -> f64 {
            if x[0] > self.upper { f64::NEG_INFINITY } else { 0.0 }
        }

        fn forward(&self, x: &[f64]) -> Result<f64> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(x[0])
        }

        fn log_likelihood(&self, out: &f64) -> Result<f64> {
            Ok(-0.5 * out * out)
        }
    }

    fn cfg(chains: usize, steps: usize) -> SamplerConfig {
        SamplerConfig {
            n_chains: chains,
            resample_period: 50,
            total_steps: steps,
            burn_in: 10,
            proposal_stds: vec![1.0],
            seed: 3,
            checkpoint_every: 17,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn resampling_schedule() {
        let mut c = cfg(2, 200);
        assert!(c.resamples_after(50) && c.resamples_after(150));
        assert!(!c.resamples_after(0) && !c.resamples_after(200) && !c.resamples_after(75));
        assert_eq!(c.last_resample(), Some(150));
        assert_eq!(c.posterior_start(), 160);
        c.resample_steps = Some(vec![60, 120]);
        assert!(c.resamples_after(60) && !c.resamples_after(50));
        c.resample_enabled = false;
        assert_eq!(c.last_resample(), None);
        assert_eq!(c.posterior_start(), 10);
    }

    #[test]
    fn equal_posterior_always_accepts() {
        struct Flat;
        impl Target for Flat {
            type Output = ();
            fn dim(&self) -> usize {
                2
            }
            fn log_prior(&self, _: &[f64]) -> f64 {
                0.0
            }
            fn forward(&self, _: &[f64]) -> Result<()> {
                Ok(())
            }
            fn log_likelihood(&self, _: &()) -> Result<f64> {
                Ok(-1.0)
            }
        }
        let c = SamplerConfig { n_chains: 1, proposal_stds: vec![1.0, 1.0], ..cfg(1, 10) };
        let mut s = initialize(&Flat, &c, &[vec![0.0, 0.0]]).unwrap().remove(0);
        for k in 1..=1000 {
            assert!(mh_step(&mut s, &c, &Flat, k).accepted);
        }
        assert_eq!(s.acceptance_rate(), 1.0);
    }

    #[test]
    fn outside_support_skips_forward_model() {
        let target = Gauss { calls: AtomicUsize::new(0), upper: 0.0 };
        let c = SamplerConfig { proposal_stds: vec![1e-6], ..cfg(1, 10) };
        let mut s = initialize(&target, &c, &[vec![0.0]]).unwrap().remove(0);
        let before = target.calls.load(Ordering::SeqCst);
        let mut skipped = 0;
        for k in 1..=200 {
            let calls = target.calls.load(Ordering::SeqCst);
            let expected_skip = {
                // Replay the proposal from a clone of the stream.
                let mut rng = s.rng.clone();
                let z: f64 = StandardNormal.sample(&mut rng);
                s.current.params[0] + 1e-6 * z > 0.0
            };
            let rec = mh_step(&mut s, &c, &target, k);
            let called = target.calls.load(Ordering::SeqCst) - calls;
            assert_eq!(called == 0, expected_skip);
            if expected_skip {
                skipped += 1;
                assert!(!rec.accepted);
            }
        }
        assert!(skipped > 0 && before == 1);
    }

    #[test]
    fn initialization_names_the_bad_chain() {
        let target = Gauss { calls: AtomicUsize::new(0), upper: 1.0 };
        let err = initialize(&target, &cfg(3, 10), &[vec![0.0], vec![0.5], vec![2.0]]).unwrap_err();
        assert!(matches!(err, Error::Initialization { chain: 2 }));
    }

    #[test]
    fn resampling_concentrates_on_dominant_record() {
        let target = Gauss { calls: AtomicUsize::new(0), upper: f64::INFINITY };
        let c = cfg(6, 10);
        let mut states = initialize(&target, &c, &vec![vec![0.0]; 6]).unwrap();
        for (i, s) in states.iter_mut().enumerate() {
            s.current.params = vec![i as f64];
            s.current.log_post = if i == 4 { 0.0 } else { -50.0 };
        }
        let mut rng = chain_rng(1, RESAMPLE_STREAM);
        let picks = resample_chains(&mut states, &mut rng).unwrap();
        assert_eq!(picks, vec![4; 6]);
        assert!(states.iter().enumerate().all(|(i, s)| s.current.params == vec![4.0] && s.current.chain == i));

        for s in states.iter_mut() {
            s.current.log_post = f64::NEG_INFINITY;
        }
        assert!(matches!(resample_chains(&mut states, &mut rng), Err(Error::Resample)));
    }

    #[test]
    fn resampling_equal_weights_is_uniform() {
        let target = Gauss { calls: AtomicUsize::new(0), upper: f64::INFINITY };
        let c = cfg(4, 10);
        let mut counts = [0usize; 4];
        let mut rng = chain_rng(9, RESAMPLE_STREAM);
        let trials = 20_000;
        for _ in 0..trials {
            let mut states = initialize(&target, &c, &vec![vec![0.0]; 4]).unwrap();
            for s in states.iter_mut() {
                s.current.log_post = -1.0;
            }
            for p in resample_chains(&mut states, &mut rng).unwrap() {
                counts[p] += 1;
            }
        }
        let n = (4 * trials) as f64;
        for c in counts {
            let p = c as f64 / n;
            assert!((p - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / n).sqrt() + 1e-3, "{counts:?}");
        }
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let target = Gauss { calls: AtomicUsize::new(0), upper: f64::INFINITY };
        let c = cfg(3, 120);
        let starts = vec![vec![0.1], vec![-0.2], vec![0.3]];
        let mut full = MemorySink { records: Vec::new(), last_checkpoint: None };
        run_sampler(&c, &target, Start::Fresh(&starts), 2, &mut full).unwrap();

        struct StopAt(MemorySink<f64>, usize);
        impl SampleSink<f64> for StopAt {
            fn append(&mut self, records: &[SampleRecord<f64>]) -> Result<()> {
                if records.iter().any(|r| r.step > self.1) {
                    return Err(Error::io("sink", std::io::Error::other("disk full")));
                }
                self.0.append(records)
            }
            fn checkpoint(&mut self, cp: &Checkpoint<f64>) -> Result<()> {
                self.0.checkpoint(cp)
            }
        }
        let mut partial = StopAt(MemorySink { records: Vec::new(), last_checkpoint: None }, 60);
        assert!(run_sampler(&c, &target, Start::Fresh(&starts), 1, &mut partial).is_err());
        let cp = partial.0.last_checkpoint.clone().unwrap();
        assert!(cp.step <= 60);
        let mut rest = partial.0;
        run_sampler(&c, &target, Start::Resume(cp), 3, &mut rest).unwrap();
        assert_eq!(rest.records, full.records);
    }

    #[test]
    fn diagnostics_on_constant_chain() {
        let rec = |step| SampleRecord { chain: 0, step, params: vec![1.5], log_prior: 0.0, log_lik: -1.0, log_post: -1.0, forward: (), accepted: false };
        let store = SampleStore::new((1..=300).map(rec).collect(), 1, 100);
        let d = diagnostics(&store);
        assert_eq!(d.acceptance, vec![0.0]);
        assert!(rolling_stats(&store, 0, 100).iter().all(|p| p.std == 0.0 && p.mean == 1.5));
        assert_eq!(d.posterior_size, 200);
        assert_eq!(d.summary[0].quantiles, [1.5; 5]);
    }

    #[test]
    fn quantiles_and_histogram() {
        let xs: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_eq!(quantile(&xs, 0.05), 5.0);
        assert_eq!(quantile(&xs, 0.5), 50.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.25), 1.25);
        let h = histogram(&xs, 4);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 101);
        assert_eq!(h[0].0, 0.0);
        assert_eq!(h[3].1, 100.0);
    }
}
