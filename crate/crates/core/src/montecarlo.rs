//! Recursive Monte Carlo sampler of the waiting time and Werner parameter of
//! the end-to-end link, for SWAP-ONLY and d-DIST-SWAP, and campaign
//! aggregation with DKW confidence bands.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::ProtocolParams;
use crate::pmf::TruncatedCdf;
use crate::werner::{
    aligned_werners, distill_links, distill_success_probability, swap_links,
    swap_links_with_comm_time, LinkSample, WernerParam,
};

/// Default DKW band confidence parameter.
pub const DEFAULT_Z: f64 = 0.01;

/// Source of uniform reals in `[0, 1)`. Every `(seed, stream)` pair gives an
/// independent, reproducible sequence.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::substream(seed, 0)
    }

    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}

/// Inverse-transform geometric sample, `ceil(log_{1-p}(1 - u))`, at least 1.
pub fn geometric_from_uniform(p: f64, u: f64) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let t = ((-u).ln_1p() / (-p).ln_1p()).ceil();
    if t < 1.0 {
        1
    } else {
        t as u64
    }
}

/// Number of attempts until the first success of a Bernoulli(`p`) trial.
pub fn sample_t0(p_gen: f64, rng: &mut RngStream) -> u64 {
    geometric_from_uniform(p_gen, rng.uniform())
}

/// Call counts collected while sampling.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkCounters {
    /// `swap_calls[l]`: calls of `sample_swap(l)`.
    pub swap_calls: Vec<u64>,
    /// `dist_calls[l]`: calls of `sample_dist(l, d)` with the full `d` rounds.
    pub dist_calls: Vec<u64>,
    pub swap_attempts: u64,
    pub dist_attempts: u64,
}

impl WorkCounters {
    fn new(n: u32) -> Self {
        Self {
            swap_calls: vec![0; n as usize + 1],
            dist_calls: vec![0; n as usize + 1],
            ..Self::default()
        }
    }

    /// Elementary links generated.
    pub fn generations(&self) -> u64 {
        self.swap_calls[0]
    }

    fn merge(&mut self, other: &WorkCounters) {
        for (a, b) in self.swap_calls.iter_mut().zip(&other.swap_calls) {
            *a += b;
        }
        for (a, b) in self.dist_calls.iter_mut().zip(&other.dist_calls) {
            *a += b;
        }
        self.swap_attempts += other.swap_attempts;
        self.dist_attempts += other.dist_attempts;
    }
}

/// One sampler bound to one random stream. Draw order per attempt: first
/// child, second child, then the success uniform. Werner parameters never
/// consume draws, so SWAP-ONLY times do not depend on `w0` or `t_coh`.
pub struct Sampler<'a> {
    params: &'a ProtocolParams,
    rng: RngStream,
    work: WorkCounters,
}

impl<'a> Sampler<'a> {
    pub fn new(params: &'a ProtocolParams, rng: RngStream) -> Result<Self> {
        params.validate_physics()?;
        Ok(Self {
            params,
            rng,
            work: WorkCounters::new(params.n),
        })
    }

    pub fn work(&self) -> &WorkCounters {
        &self.work
    }

    /// One end-to-end link of the full chain.
    pub fn sample(&mut self) -> LinkSample {
        self.sample_swap(self.params.n)
    }

    /// A `2^level`-hop link.
    pub fn sample_swap(&mut self, level: u32) -> LinkSample {
        assert!(level <= self.params.n, "level {level} above n = {}", self.params.n);
        self.work.swap_calls[level as usize] += 1;
        let params = self.params;
        if level == 0 {
            let t = sample_t0(params.p_gen, &mut self.rng);
            return LinkSample::new(t, params.werner0());
        }
        let mut elapsed = 0u64;
        loop {
            self.work.swap_attempts += 1;
            let a = self.sample_dist(level, params.d);
            let b = self.sample_dist(level, params.d);
            let out = if params.include_comm_time {
                swap_links_with_comm_time(a, b, params.t_coh, level - 1)
            } else {
                swap_links(a, b, params.t_coh)
            };
            let success = self.rng.uniform() < params.p_swap;
            elapsed += out.t;
            if success {
                return LinkSample::new(elapsed, out.w);
            }
        }
    }

    /// An input link of a level-`level` swap after `d_remaining` distillation rounds.
    pub fn sample_dist(&mut self, level: u32, d_remaining: u32) -> LinkSample {
        assert!(level >= 1, "distilled links exist from level 1 on");
        if d_remaining == self.params.d {
            self.work.dist_calls[level as usize] += 1;
        }
        if d_remaining == 0 {
            return self.sample_swap(level - 1);
        }
        let t_coh = self.params.t_coh;
        let mut elapsed = 0u64;
        loop {
            self.work.dist_attempts += 1;
            let a = self.sample_dist(level, d_remaining - 1);
            let b = self.sample_dist(level, d_remaining - 1);
            let (wa, wb) = aligned_werners(a, b, t_coh);
            let p_dist = distill_success_probability(WernerParam::clamped(wa), WernerParam::clamped(wb));
            let out = distill_links(a, b, t_coh);
            let success = self.rng.uniform() < p_dist;
            elapsed += out.t;
            if success {
                return LinkSample::new(elapsed, out.w);
            }
        }
    }
}

/// DKW sample count `ceil(-ln(z / 2) / (2 eps^2))`.
pub fn required_samples(eps: f64, z: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps", eps, "must lie in (0, 1)"));
    }
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::invalid("z", z, "must lie in (0, 1)"));
    }
    Ok((-(z / 2.0).ln() / (2.0 * eps * eps)).ceil() as u64)
}

/// DKW band half-width `sqrt(-ln(z / 2) / (2 m))`.
pub fn dkw_epsilon(m: u64, z: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", 0.0, "need at least one sample"));
    }
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::invalid("z", z, "must lie in (0, 1)"));
    }
    Ok((-(z / 2.0).ln() / (2.0 * m as f64)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignConfig {
    pub z: f64,
    /// Largest time kept in the ECDF; later samples land in the overflow count.
    /// `None` keeps every observed time.
    pub display_cap: Option<u64>,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            z: DEFAULT_Z,
            display_cap: None,
            threads: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub samples: Vec<LinkSample>,
    /// Empirical CDF on `0..=min(max sample, display cap)`.
    pub ecdf: TruncatedCdf,
    pub z: f64,
    pub dkw_eps: f64,
    /// Mean Werner parameter and sample count per delivery time.
    pub werner_by_time: BTreeMap<u64, (f64, u64)>,
    pub sample_mean_time: f64,
    pub standard_error: f64,
    /// Samples beyond the display cap.
    pub overflow: u64,
    pub work: WorkCounters,
}

impl CampaignResult {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = u64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn mean_werner(&self) -> f64 {
        self.samples.iter().map(|s| s.w.value()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn mean_fidelity(&self) -> f64 {
        (1.0 + 3.0 * self.mean_werner()) / 4.0
    }

    /// `sup_t |ECDF(t) - cdf(t)|` over `t` in the window of `cdf`; beyond the
    /// ECDF domain the ECDF is `1 - overflow / m`.
    pub fn sup_distance(&self, cdf: &TruncatedCdf) -> f64 {
        let m = self.samples.len() as f64;
        let tail = 1.0 - self.overflow as f64 / m;
        cdf.cum()
            .iter()
            .enumerate()
            .map(|(t, &c)| {
                let e = self.ecdf.cum().get(t).copied().unwrap_or(tail);
                (e - c).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `m` independent samples; sample `i` uses substream `i` of `seed`, so the
/// result does not depend on the number of workers.
pub fn run_campaign(params: &ProtocolParams, m: u64, seed: u64) -> Result<CampaignResult> {
    run_campaign_with(params, m, seed, &CampaignConfig::default())
}

pub fn run_campaign_with(
    params: &ProtocolParams,
    m: u64,
    seed: u64,
    config: &CampaignConfig,
) -> Result<CampaignResult> {
    params.validate_physics()?;
    let dkw_eps = dkw_epsilon(m, config.z)?;

    let draw = || -> (Vec<LinkSample>, WorkCounters) {
        (0..m)
            .into_par_iter()
            .map(|i| {
                let mut sampler = Sampler::new(params, RngStream::substream(seed, i))
                    .expect("parameters validated");
                let s = sampler.sample();
                (s, sampler.work)
            })
            .fold(
                || (Vec::new(), WorkCounters::new(params.n)),
                |(mut v, mut w), (s, sw)| {
                    v.push(s);
                    w.merge(&sw);
                    (v, w)
                },
            )
            .reduce(
                || (Vec::new(), WorkCounters::new(params.n)),
                |(mut a, mut wa), (b, wb)| {
                    a.extend(b);
                    wa.merge(&wb);
                    (a, wa)
                },
            )
    };
    let (samples, work) = match config.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(draw),
        None => draw(),
    };
    Ok(summarize(samples, work, config, dkw_eps))
}

fn summarize(
    samples: Vec<LinkSample>,
    work: WorkCounters,
    config: &CampaignConfig,
    dkw_eps: f64,
) -> CampaignResult {
    let m = samples.len();
    let max_t = samples.iter().map(|s| s.t).max().unwrap_or(0);
    let cap = config.display_cap.map_or(max_t, |c| c.min(max_t));

    let mut counts = vec![0u64; cap as usize + 1];
    let mut overflow = 0;
    let mut werner: BTreeMap<u64, (f64, u64)> = BTreeMap::new();
    for s in &samples {
        match counts.get_mut(s.t as usize) {
            Some(c) if s.t <= cap => *c += 1,
            _ => overflow += 1,
        }
        let entry = werner.entry(s.t).or_insert((0.0, 0));
        entry.0 += s.w.value();
        entry.1 += 1;
    }
    for (sum, count) in werner.values_mut() {
        *sum /= *count as f64;
    }

    let mut running = 0u64;
    let cum = counts
        .iter()
        .map(|&c| {
            running += c;
            running as f64 / m as f64
        })
        .collect();

    let mean = samples.iter().map(|s| s.t as f64).sum::<f64>() / m as f64;
    let standard_error = if m > 1 {
        let var = samples
            .iter()
            .map(|s| (s.t as f64 - mean).powi(2))
            .sum::<f64>()
            / (m - 1) as f64;
        (var / m as f64).sqrt()
    } else {
        0.0
    };

    CampaignResult {
        samples,
        ecdf: TruncatedCdf::from_raw(cum),
        z: config.z,
        dkw_eps,
        werner_by_time: werner,
        sample_mean_time: mean,
        standard_error,
        overflow,
        work,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_transform_examples() {
        assert_eq!(geometric_from_uniform(1.0, 0.7), 1);
        assert_eq!(geometric_from_uniform(0.5, 0.6), 2);
        assert_eq!(geometric_from_uniform(0.5, 0.0), 1);
        assert_eq!(geometric_from_uniform(0.5, 0.5), 1);
        assert_eq!(geometric_from_uniform(0.5, 0.75), 2);
        assert!(geometric_from_uniform(0.5, 1.0 - f64::EPSILON) > 40);
    }

    #[test]
    fn geometric_sample_mean() {
        let mut rng = RngStream::new(11);
        let m = 1_000_000;
        let total: u64 = (0..m).map(|_| sample_t0(0.1, &mut rng)).sum();
        let mean = total as f64 / m as f64;
        assert!((mean - 10.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn uniforms_in_unit_interval() {
        let mut rng = RngStream::new(3);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn substreams_differ() {
        let a: Vec<f64> = {
            let mut r = RngStream::substream(5, 0);
            (0..4).map(|_| r.uniform()).collect()
        };
        let b: Vec<f64> = {
            let mut r = RngStream::substream(5, 1);
            (0..4).map(|_| r.uniform()).collect()
        };
        assert_ne!(a, b);
    }

    #[test]
    fn degenerate_chain() {
        for n in [0, 1, 3, 6] {
            let params = ProtocolParams::new(1.0, 1.0, n).with_w0(0.9);
            let mut s = Sampler::new(&params, RngStream::new(1)).unwrap();
            for _ in 0..10 {
                let link = s.sample();
                assert_eq!(link.t, 1);
                assert!((link.w.value() - 0.9_f64.powi(1 << n)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn perfect_distillation_succeeds_immediately() {
        let params = ProtocolParams::new(1.0, 1.0, 1).with_distillation(1);
        let mut s = Sampler::new(&params, RngStream::new(1)).unwrap();
        let link = s.sample();
        assert_eq!(link, LinkSample::new(1, WernerParam::PERFECT));
        assert_eq!(s.work().dist_attempts, 2);
    }

    #[test]
    fn dkw_examples() {
        assert_eq!(required_samples(0.01, 0.01).unwrap(), 26492);
        assert_eq!(required_samples(0.1, 0.01).unwrap(), 265);
        let m = required_samples(0.02, 0.01).unwrap();
        let m2 = required_samples(0.04, 0.01).unwrap();
        assert!(m2 * 4 >= m && (m2 - 1) * 4 < m);
        assert!(required_samples(0.0, 0.01).is_err());
        assert!(required_samples(0.1, 1.0).is_err());
        let eps = dkw_epsilon(26492, 0.01).unwrap();
        assert!(eps <= 0.01 && eps > 0.00999);
    }

    #[test]
    fn single_sample_campaign() {
        let params = ProtocolParams::new(0.3, 0.5, 2);
        let r = run_campaign(&params, 1, 7).unwrap();
        let t = r.samples[0].t as usize;
        assert_eq!(r.ecdf.t_trunc(), t);
        assert_eq!(r.ecdf.get(t), 1.0);
        if t > 0 {
            assert_eq!(r.ecdf.get(t - 1), 0.0);
        }
        assert_eq!(r.standard_error, 0.0);
    }

    #[test]
    fn certain_chain_campaign() {
        let params = ProtocolParams::new(1.0, 1.0, 4);
        let r = run_campaign(&params, 500, 1).unwrap();
        assert_eq!(r.sample_mean_time, 1.0);
        assert_eq!(r.standard_error, 0.0);
    }

    #[test]
    fn campaign_is_reproducible_across_thread_counts() {
        let params = ProtocolParams::new(0.2, 0.6, 3).with_w0(0.95).with_t_coh(30.0);
        let one = CampaignConfig {
            threads: Some(1),
            ..CampaignConfig::default()
        };
        let four = CampaignConfig {
            threads: Some(4),
            ..CampaignConfig::default()
        };
        let a = run_campaign_with(&params, 2000, 42, &one).unwrap();
        let b = run_campaign_with(&params, 2000, 42, &four).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.ecdf, b.ecdf);
        assert_eq!(a.werner_by_time, b.werner_by_time);
        assert_eq!(a.work, b.work);
        let total: u64 = a.werner_by_time.values().map(|v| v.1).sum();
        assert_eq!(total, 2000);
    }

    #[test]
    fn display_cap_counts_overflow() {
        let params = ProtocolParams::new(0.1, 0.5, 1);
        let config = CampaignConfig {
            display_cap: Some(10),
            ..CampaignConfig::default()
        };
        let r = run_campaign_with(&params, 1000, 3, &config).unwrap();
        let beyond = r.times().filter(|&t| t > 10).count() as u64;
        assert_eq!(r.overflow, beyond);
        assert!(beyond > 0);
        assert_eq!(r.ecdf.t_trunc(), 10);
        assert!((r.ecdf.get(10) - (1.0 - beyond as f64 / 1000.0)).abs() < 1e-15);
    }
}
