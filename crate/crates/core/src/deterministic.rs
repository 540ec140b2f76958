//! Exact (up to truncation) waiting-time distributions and time-conditioned
//! average Werner parameters for the SWAP-ONLY protocol, together with the
//! dominating "sequential generation" chain used to bracket the mean waiting
//! time and to size the truncation window.

use crate::error::{Error, Result};
use crate::params::ProtocolParams;
use crate::pmf::{
    captured_mass, cdf_from_pmf, empirical_mean, geometric_compound_with, geometric_pmf,
    max_of_two_iid_pmf, CompoundOptions, Convolver, TruncatedCdf, TruncatedPmf,
};
use crate::werner::decay_factor;

/// Default bound on the total mass of the geometric-compound terms that are
/// skipped. Far below double-precision resolution of any entry near 1.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-20;

/// Default bound on the mass beyond the computed window; see [`negligible_tail_start`].
pub const DEFAULT_TAIL_CUTOFF: f64 = 1e-40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WernerMethod {
    /// Literal loop over (swap count, both input times, failure time).
    /// Quartic in `t_trunc`; intended for small windows.
    Direct,
    /// Aggregates the weighted Werner mass per attempt-completion time and
    /// convolves it once with the failure-time distribution. Quadratic in `t_trunc`.
    Convolved,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicOptions {
    pub compound: CompoundOptions,
    /// Keep every `Pr(T_{l+1} = t | K_l = k)`; memory grows as `n * t_trunc^2`.
    pub retain_conditionals: bool,
    pub werner_method: WernerMethod,
    /// Entries past the time where the remaining mass is provably below this
    /// are left at zero instead of computed. Zero computes the full window.
    pub tail_cutoff: f64,
}

impl Default for DeterministicOptions {
    fn default() -> Self {
        Self {
            compound: CompoundOptions::with_tail_tolerance(DEFAULT_TAIL_TOLERANCE),
            retain_conditionals: false,
            werner_method: WernerMethod::Convolved,
            tail_cutoff: DEFAULT_TAIL_CUTOFF,
        }
    }
}

impl DeterministicOptions {
    /// Evaluates every compound-sum term on the whole window.
    pub fn exact() -> Self {
        Self {
            compound: CompoundOptions::exact(),
            tail_cutoff: 0.0,
            ..Self::default()
        }
    }
}

/// Per-level waiting-time distributions `T_0, ..., T_n`.
#[derive(Debug, Clone)]
pub struct LevelDistributions {
    pmfs: Vec<TruncatedPmf>,
    cdfs: Vec<TruncatedCdf>,
    /// `conditionals[l][k - 1]` holds `Pr(T_{l+1} = t | K_l = k)`.
    conditionals: Option<Vec<Vec<TruncatedPmf>>>,
}

impl LevelDistributions {
    pub fn levels(&self) -> usize {
        self.pmfs.len()
    }

    pub fn t_trunc(&self) -> usize {
        self.pmfs[0].t_trunc()
    }

    pub fn pmf(&self, level: usize) -> &TruncatedPmf {
        &self.pmfs[level]
    }

    pub fn cdf(&self, level: usize) -> &TruncatedCdf {
        &self.cdfs[level]
    }

    /// Distribution of the full chain.
    pub fn top_pmf(&self) -> &TruncatedPmf {
        self.pmfs.last().expect("at least level 0")
    }

    pub fn top_cdf(&self) -> &TruncatedCdf {
        self.cdfs.last().expect("at least level 0")
    }

    /// Retained conditionals for the step from `level` to `level + 1`.
    pub fn conditionals(&self, level: usize) -> Option<&[TruncatedPmf]> {
        self.conditionals.as_ref().map(|c| c[level].as_slice())
    }
}

/// `W[l][t] = E[W_l | T_l = t]`; `None` where `Pr(T_l = t) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WernerProfile {
    levels: Vec<Vec<Option<f64>>>,
}

impl WernerProfile {
    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, level: usize) -> &[Option<f64>] {
        &self.levels[level]
    }

    pub fn get(&self, level: usize, t: usize) -> Option<f64> {
        self.levels[level].get(t).copied().flatten()
    }

    pub fn fidelity(&self, level: usize, t: usize) -> Option<f64> {
        self.get(level, t).map(|w| (1.0 + 3.0 * w) / 4.0)
    }

    pub fn top(&self) -> &[Option<f64>] {
        self.levels.last().expect("at least level 0")
    }
}

/// Bracket `lower <= E[T_n] <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanBounds {
    pub lower: f64,
    pub upper: f64,
}

fn check_swap_only(params: &ProtocolParams) -> Result<()> {
    params.validate()?;
    if params.d > 0 {
        return Err(Error::DistillationUnsupported(params.d));
    }
    Ok(())
}

/// Heralding delay of a swap on two `2^level`-hop links, if modelled.
fn comm_delay(params: &ProtocolParams, level: usize) -> usize {
    if params.include_comm_time {
        1usize << level
    } else {
        0
    }
}

fn shifted(pmf: TruncatedPmf, by: usize) -> TruncatedPmf {
    if by == 0 {
        return pmf;
    }
    let t_trunc = pmf.t_trunc();
    let mut out = vec![0.0; t_trunc + 1];
    if by <= t_trunc {
        out[by..].copy_from_slice(&pmf.probs()[..=t_trunc - by]);
    }
    TruncatedPmf::from_raw(out)
}

/// Shared level recursion; `attempt` turns the level-`l` distribution into
/// the distribution of one swap attempt's duration.
fn level_recursion<F>(
    params: &ProtocolParams,
    options: &DeterministicOptions,
    mut attempt: F,
) -> Result<LevelDistributions>
where
    F: FnMut(&TruncatedPmf, &mut Convolver) -> Result<TruncatedPmf>,
{
    let t_trunc = params.t_trunc;
    // Values at t only depend on values at earlier times, so a shorter window
    // reproduces the full computation exactly up to its end.
    let window = if options.tail_cutoff > 0.0 {
        negligible_tail_start(params, options.tail_cutoff).min(t_trunc)
    } else {
        t_trunc
    };
    let pad = |pmf: TruncatedPmf| {
        let mut v = pmf.into_vec();
        v.resize(t_trunc + 1, 0.0);
        TruncatedPmf::from_raw(v)
    };

    let mut convolver = Convolver::new(window);
    let mut current = geometric_pmf(params.p_gen, window)?;
    let mut pmfs = Vec::with_capacity(params.n as usize + 1);
    let mut conditionals = options.retain_conditionals.then(Vec::new);

    for level in 0..params.n as usize {
        let step = attempt(&current, &mut convolver)?;
        let step = shifted(step, comm_delay(params, level));
        let mut kept = Vec::new();
        let next = geometric_compound_with(
            &step,
            params.p_swap,
            options.compound,
            &mut convolver,
            |_, c| {
                if options.retain_conditionals {
                    kept.push(pad(c.clone()));
                }
            },
        )?;
        if let Some(all) = conditionals.as_mut() {
            all.push(kept);
        }
        pmfs.push(pad(std::mem::replace(&mut current, next)));
    }
    pmfs.push(pad(current));
    let cdfs = pmfs.iter().map(cdf_from_pmf).collect();
    Ok(LevelDistributions {
        pmfs,
        cdfs,
        conditionals,
    })
}

/// A time beyond which both the chain and its dominating chain have less
/// than `delta` probability mass, from the Chernoff bound
/// `Pr(T > t) <= E[exp(s T)] exp(-s t)` on the dominating chain.
pub fn negligible_tail_start(params: &ProtocolParams, delta: f64) -> usize {
    let log_mgf = |s: f64| -> Option<f64> {
        let e = s.exp();
        let mut mgf = if params.p_gen >= 1.0 {
            e
        } else {
            let den = 1.0 - (1.0 - params.p_gen) * e;
            if den <= 0.0 {
                return None;
            }
            params.p_gen * e / den
        };
        for level in 0..params.n as usize {
            let m = mgf * mgf * (s * comm_delay(params, level) as f64).exp();
            let den = 1.0 - (1.0 - params.p_swap) * m;
            if !(den > 0.0) || !m.is_finite() {
                return None;
            }
            mgf = params.p_swap * m / den;
        }
        mgf.is_finite().then(|| mgf.ln())
    };

    let mut hi = if params.p_gen >= 1.0 {
        50.0
    } else {
        (-(-params.p_gen).ln_1p()).min(50.0)
    };
    if log_mgf(hi).is_none() {
        let mut lo = 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if log_mgf(mid).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi = lo;
    }
    let candidates = (1..64)
        .map(|i| hi * i as f64 / 64.0)
        .chain((1..40).map(|j| hi * (1.0 - 0.5f64.powi(j))))
        .chain(std::iter::once(hi));
    let log_delta = delta.ln();
    let best = candidates
        .filter(|&s| s > 0.0)
        .filter_map(|s| log_mgf(s).map(|l| (l - log_delta) / s))
        .fold(f64::INFINITY, f64::min);
    if best.is_finite() && best < usize::MAX as f64 / 4.0 {
        best.ceil().max(1.0) as usize
    } else {
        usize::MAX / 4
    }
}

/// Waiting-time distributions of every level of a SWAP-ONLY chain.
pub fn compute_waiting_time(params: &ProtocolParams) -> Result<LevelDistributions> {
    compute_waiting_time_with(params, &DeterministicOptions::default())
}

pub fn compute_waiting_time_with(
    params: &ProtocolParams,
    options: &DeterministicOptions,
) -> Result<LevelDistributions> {
    check_swap_only(params)?;
    level_recursion(params, options, |pmf, _| Ok(max_of_two_iid_pmf(pmf)))
}

/// Distributions of the dominating chain in which the two input links of
/// every swap are generated one after the other.
pub fn compute_upper_bound_distribution(params: &ProtocolParams) -> Result<LevelDistributions> {
    compute_upper_bound_distribution_with(params, &DeterministicOptions::default())
}

pub fn compute_upper_bound_distribution_with(
    params: &ProtocolParams,
    options: &DeterministicOptions,
) -> Result<LevelDistributions> {
    check_swap_only(params)?;
    level_recursion(params, options, |pmf, convolver| convolver.convolve(pmf, pmf))
}

/// Exact mean of the dominating chain: `(2 / p_swap)^n / p_gen` without
/// communication time; each level adds its heralding delay otherwise.
pub fn upper_chain_mean(params: &ProtocolParams) -> f64 {
    let mut mean = 1.0 / params.p_gen;
    for level in 0..params.n as usize {
        mean = (2.0 * mean + comm_delay(params, level) as f64) / params.p_swap;
    }
    mean
}

/// Bounds on `E[T_n]` from the empirical means of `T_n` and of the dominating
/// chain on the window `0..=t_trunc`. `t_trunc = 0` is allowed and yields the
/// trivial bracket `[0, E[T_upper]]`.
pub fn mean_bounds(params: &ProtocolParams) -> Result<MeanBounds> {
    mean_bounds_with(params, &DeterministicOptions::default())
}

pub fn mean_bounds_with(params: &ProtocolParams, options: &DeterministicOptions) -> Result<MeanBounds> {
    params.validate_physics()?;
    if params.d > 0 {
        return Err(Error::DistillationUnsupported(params.d));
    }
    let analytic = upper_chain_mean(params);
    if params.t_trunc == 0 {
        return Ok(MeanBounds {
            lower: 0.0,
            upper: analytic,
        });
    }
    let lower = empirical_mean(compute_waiting_time_with(params, options)?.top_cdf());
    let upper_partial = empirical_mean(compute_upper_bound_distribution_with(params, options)?.top_cdf());
    Ok(MeanBounds {
        lower,
        upper: lower + (analytic - upper_partial).max(0.0),
    })
}

/// Truncation time for which Markov's inequality guarantees that at least
/// `coverage` of the probability mass of `T_n` lies in the window.
pub fn choose_truncation(params: &ProtocolParams, coverage: f64) -> Result<usize> {
    params.validate_physics()?;
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::invalid("coverage", coverage, "must lie in (0, 1)"));
    }
    let raw = upper_chain_mean(params) / (1.0 - coverage);
    // Absorb round-off in 1 / (1 - coverage) before taking the ceiling.
    let nearest = raw.round();
    let t = if (raw - nearest).abs() <= 1e-9 * raw.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    if t > usize::MAX as f64 / 4.0 {
        return Err(Error::invalid("t_trunc", t, "truncation time too large"));
    }
    Ok(t as usize)
}

/// The common closed-form approximation `(3 / (2 p_swap))^n / p_gen`.
pub fn three_over_two_estimate(params: &ProtocolParams) -> f64 {
    (1.5 / params.p_swap).powi(params.n as i32) / params.p_gen
}

/// Average Werner parameter of links delivered at each time, at every level.
pub fn compute_werner_profile(
    params: &ProtocolParams,
    dists: &LevelDistributions,
) -> Result<WernerProfile> {
    compute_werner_profile_with(params, dists, &DeterministicOptions::default())
}

pub fn compute_werner_profile_with(
    params: &ProtocolParams,
    dists: &LevelDistributions,
    options: &DeterministicOptions,
) -> Result<WernerProfile> {
    check_swap_only(params)?;
    if dists.t_trunc() != params.t_trunc {
        return Err(Error::TruncationMismatch {
            left: params.t_trunc,
            right: dists.t_trunc(),
        });
    }
    if dists.levels() != params.n as usize + 1 {
        return Err(Error::Config(format!(
            "distributions cover {} levels, parameters need {}",
            dists.levels(),
            params.n + 1
        )));
    }

    let base = dists
        .pmf(0)
        .probs()
        .iter()
        .map(|&p| (p > 0.0).then_some(params.w0))
        .collect();
    let mut levels: Vec<Vec<Option<f64>>> = vec![base];
    let mut convolver = Convolver::new(params.t_trunc);

    for level in 0..params.n as usize {
        // Sums run on Werner parameters relative to the largest one, so a
        // constant profile reproduces its square without rounding.
        let scale = levels[level]
            .iter()
            .flatten()
            .fold(0.0f64, |a, &b| a.max(b));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let below = LevelInput {
            pmf: dists.pmf(level).probs(),
            werner: &levels[level],
            scale,
        };
        let step = StepParams {
            p_swap: params.p_swap,
            t_coh: params.t_coh,
            comm: comm_delay(params, level),
        };
        let (num, den) = match options.werner_method {
            WernerMethod::Convolved => werner_sums_convolved(&below, &step),
            WernerMethod::Direct => werner_sums_direct(
                &below,
                &step,
                dists.conditionals(level),
                &mut convolver,
                options.compound,
            )?,
        };
        let next = num
            .iter()
            .zip(&den)
            .map(|(&n, &d)| (d > 0.0).then(|| ((n / d) * (scale * scale)).clamp(0.0, 1.0)))
            .collect();
        levels.push(next);
    }
    Ok(WernerProfile { levels })
}

struct LevelInput<'a> {
    pmf: &'a [f64],
    werner: &'a [Option<f64>],
    scale: f64,
}

impl LevelInput<'_> {
    fn werner_at(&self, t: usize) -> f64 {
        self.werner[t].map_or(0.0, |w| w / self.scale)
    }
}

struct StepParams {
    p_swap: f64,
    t_coh: f64,
    comm: usize,
}

/// Numerator and denominator of the realization average, accumulated group
/// by group: swap count `k`, input delivery times `(ta, tb)` of the last
/// attempt and total time `t_fail` of the `k - 1` failed attempts.
fn werner_sums_direct(
    below: &LevelInput,
    step: &StepParams,
    retained: Option<&[TruncatedPmf]>,
    convolver: &mut Convolver,
    compound: CompoundOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t_trunc = below.pmf.len() - 1;
    let comm_decay = decay_factor(step.comm as f64, step.t_coh);
    let mut num = vec![0.0; t_trunc + 1];
    let mut den = vec![0.0; t_trunc + 1];

    // One attempt's duration, for regenerating the failure-time conditionals.
    let attempt = {
        let pmf = TruncatedPmf::from_raw(below.pmf.to_vec());
        shifted(max_of_two_iid_pmf(&pmf), step.comm)
    };
    let spectrum = convolver.spectrum(&attempt)?;
    let max_terms = compound.max_terms.unwrap_or(t_trunc);

    // failures = Pr(sum of k - 1 attempts = t_fail); starts as the point mass at 0.
    let mut failures = TruncatedPmf::point_mass(0, t_trunc);
    let mut weight = step.p_swap;
    for k in 1..=max_terms {
        if k > 1 {
            failures = match retained.and_then(|c| c.get(k - 2)) {
                Some(c) => c.clone(),
                None => convolver.convolve_with(&failures, &spectrum)?,
            };
            weight *= 1.0 - step.p_swap;
        }
        if weight == 0.0 || failures.support_start().is_none() {
            break;
        }
        for ta in 1..=t_trunc {
            let pa = below.pmf[ta];
            if pa == 0.0 {
                continue;
            }
            for tb in 1..=t_trunc {
                let pb = below.pmf[tb];
                if pb == 0.0 {
                    continue;
                }
                let done = ta.max(tb) + step.comm;
                if done > t_trunc {
                    continue;
                }
                let w = below.werner_at(ta)
                    * below.werner_at(tb)
                    * decay_factor(ta.abs_diff(tb) as f64, step.t_coh)
                    * comm_decay;
                let p = weight * pa * pb;
                for t_fail in 0..=t_trunc - done {
                    let c = failures.probs()[t_fail];
                    if c == 0.0 {
                        continue;
                    }
                    num[done + t_fail] += w * p * c;
                    den[done + t_fail] += p * c;
                }
            }
        }
    }
    Ok((num, den))
}

/// Same sums as [`werner_sums_direct`], reorganized: the per-pair mass only
/// depends on the attempt completion time, and the failure-time weights
/// `sum_k p (1 - p)^(k-1) Pr(k - 1 attempts take t_fail)` obey the renewal
/// equation `F = p δ_0 + (1 - p) (attempt * F)`. Every term is nonnegative,
/// so the ratio keeps full relative precision deep in the tail.
fn werner_sums_convolved(below: &LevelInput, step: &StepParams) -> (Vec<f64>, Vec<f64>) {
    let t_trunc = below.pmf.len() - 1;
    let comm_decay = decay_factor(step.comm as f64, step.t_coh);
    let step_decay = decay_factor(1.0, step.t_coh);

    // attempt[s]: probability that one attempt completes at s.
    // werner_mass[s]: the same, weighted by the Werner parameter it would produce.
    let mut attempt = vec![0.0; t_trunc + 1];
    let mut werner_mass = vec![0.0; t_trunc + 1];
    // Running sums over earlier-delivered partners, decayed up to the current time.
    let mut earlier_mass = 0.0;
    let mut earlier_werner = 0.0;
    for s in 1..=t_trunc {
        let p = below.pmf[s];
        let pw = p * below.werner_at(s);
        earlier_mass += below.pmf[s - 1];
        earlier_werner = (earlier_werner + below.pmf[s - 1] * below.werner_at(s - 1)) * step_decay;
        let done = s + step.comm;
        if done > t_trunc {
            break;
        }
        attempt[done] = p * (p + 2.0 * earlier_mass);
        werner_mass[done] = pw * (pw + 2.0 * earlier_werner) * comm_decay;
    }

    let mut failures = vec![0.0; t_trunc + 1];
    failures[0] = step.p_swap;
    let fail = 1.0 - step.p_swap;
    if fail > 0.0 {
        for t in 1..=t_trunc {
            let acc: f64 = (1..=t).map(|j| attempt[j] * failures[t - j]).sum();
            failures[t] = fail * acc;
        }
    }

    let convolve = |a: &[f64]| -> Vec<f64> {
        (0..=t_trunc)
            .map(|t| (0..=t).map(|j| a[j] * failures[t - j]).sum())
            .collect()
    };
    (convolve(&werner_mass), convolve(&attempt))
}

/// Convenience: probability mass of `T_n` captured by the window.
pub fn captured_top_mass(dists: &LevelDistributions) -> f64 {
    captured_mass(dists.top_pmf())
}
