//! Probability distributions of nonnegative-integer random variables on a
//! truncated domain `{0, ..., t_trunc}`, and the composition primitives the
//! repeater-chain recursions are built from: maximum of two i.i.d. copies,
//! sum of independent variables (convolution) and geometric compound sums.
//!
//! Mass beyond `t_trunc` is dropped, never renormalized. Every operation that
//! combines distributions is exact on the window because all supports start
//! at `t >= 0`.

use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

/// Largest negative value produced by FFT round-off that is silently clamped to zero.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Slack allowed on the total mass of a truncated PMF.
pub const MASS_SLACK: f64 = 1e-9;

/// `Pr(X = t)` for `t` in `0..=t_trunc`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedPmf {
    probs: Vec<f64>,
}

/// `Pr(X <= t)` for `t` in `0..=t_trunc`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedCdf {
    cum: Vec<f64>,
}

impl TruncatedPmf {
    /// Validates and wraps a probability vector. Entries in `(-1e-12, 0)` are
    /// treated as round-off and clamped.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("t_trunc", -1.0, "a distribution needs at least one entry"));
        }
        for p in probs.iter_mut() {
            if !p.is_finite() || *p < -ROUNDOFF_FLOOR {
                return Err(Error::invalid("probability", *p, "entries must be finite and nonnegative"));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let mass = kahan_sum(&probs);
        if mass > 1.0 + MASS_SLACK {
            return Err(Error::invalid("total mass", mass, "must not exceed 1"));
        }
        Ok(Self { probs })
    }

    pub fn zeros(t_trunc: usize) -> Self {
        Self {
            probs: vec![0.0; t_trunc + 1],
        }
    }

    /// All mass at `at`; an `at` beyond the window yields the zero distribution.
    pub fn point_mass(at: usize, t_trunc: usize) -> Self {
        let mut probs = vec![0.0; t_trunc + 1];
        if at <= t_trunc {
            probs[at] = 1.0;
        }
        Self { probs }
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        Self { probs }
    }

    pub fn t_trunc(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `Pr(X = t)`, zero outside the window.
    pub fn get(&self, t: usize) -> f64 {
        self.probs.get(t).copied().unwrap_or(0.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// Index of the first nonzero entry, if any.
    pub fn support_start(&self) -> Option<usize> {
        self.probs.iter().position(|&p| p != 0.0)
    }
}

impl TruncatedCdf {
    /// Validates monotonicity and range. Violations below 1e-12 are round-off
    /// and are repaired.
    pub fn new(mut cum: Vec<f64>) -> Result<Self> {
        if cum.is_empty() {
            return Err(Error::invalid("t_trunc", -1.0, "a distribution needs at least one entry"));
        }
        let mut prev = 0.0_f64;
        for c in cum.iter_mut() {
            if !c.is_finite() || *c < -ROUNDOFF_FLOOR || *c > 1.0 + MASS_SLACK {
                return Err(Error::invalid("cumulative probability", *c, "must lie in [0, 1]"));
            }
            if *c < prev - ROUNDOFF_FLOOR {
                return Err(Error::invalid("cumulative probability", *c, "must be nondecreasing"));
            }
            *c = c.clamp(prev, 1.0);
            prev = *c;
        }
        Ok(Self { cum })
    }

    pub(crate) fn from_raw(cum: Vec<f64>) -> Self {
        debug_assert!(!cum.is_empty());
        Self { cum }
    }

    pub fn t_trunc(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    /// `Pr(X <= t)`; saturates at the last computed value beyond the window.
    pub fn get(&self, t: usize) -> f64 {
        self.cum[t.min(self.cum.len() - 1)]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.cum
    }
}

/// Neumaier-compensated sum.
pub(crate) fn kahan_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(name, p, "must lie in (0, 1]"));
    }
    Ok(())
}

/// `Pr(T <= t) = 1 - (1 - p)^t` for a geometric waiting time with success probability `p`.
pub fn geometric_cdf(p: f64, t_trunc: usize) -> Result<TruncatedCdf> {
    check_probability("p", p)?;
    if t_trunc < 1 {
        return Err(Error::invalid("t_trunc", t_trunc as f64, "must be at least 1"));
    }
    let cum = if p == 1.0 {
        (0..=t_trunc).map(|t| if t == 0 { 0.0 } else { 1.0 }).collect()
    } else {
        let log_fail = (-p).ln_1p();
        (0..=t_trunc).map(|t| -(t as f64 * log_fail).exp_m1()).collect()
    };
    Ok(TruncatedCdf::from_raw(cum))
}

/// `Pr(T = t) = p (1 - p)^(t - 1)` for `t >= 1`. Computed directly rather than
/// by differencing the CDF, so far-tail entries keep full relative precision.
pub fn geometric_pmf(p: f64, t_trunc: usize) -> Result<TruncatedPmf> {
    check_probability("p", p)?;
    if t_trunc < 1 {
        return Err(Error::invalid("t_trunc", t_trunc as f64, "must be at least 1"));
    }
    let mut probs = vec![0.0; t_trunc + 1];
    if p == 1.0 {
        probs[1] = 1.0;
    } else {
        let log_fail = (-p).ln_1p();
        for (t, slot) in probs.iter_mut().enumerate().skip(1) {
            *slot = p * ((t - 1) as f64 * log_fail).exp();
        }
    }
    Ok(TruncatedPmf::from_raw(probs))
}

pub fn pmf_from_cdf(cdf: &TruncatedCdf) -> TruncatedPmf {
    let cum = cdf.cum();
    let mut probs = Vec::with_capacity(cum.len());
    probs.push(cum[0]);
    probs.extend(cum.windows(2).map(|w| (w[1] - w[0]).max(0.0)));
    TruncatedPmf::from_raw(probs)
}

pub fn cdf_from_pmf(pmf: &TruncatedPmf) -> TruncatedCdf {
    let mut cum = Vec::with_capacity(pmf.probs.len());
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for &x in &pmf.probs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        cum.push((sum + comp).min(1.0));
    }
    TruncatedCdf::from_raw(cum)
}

/// Distribution of `max(X, X')` for i.i.d. copies, evaluated literally as
/// `Pr(X <= t)^2 - Pr(X <= t - 1)^2`.
pub fn max_of_two_iid(cdf: &TruncatedCdf) -> TruncatedPmf {
    let cum = cdf.cum();
    let mut probs = Vec::with_capacity(cum.len());
    probs.push(cum[0] * cum[0]);
    probs.extend(cum.windows(2).map(|w| (w[1] * w[1] - w[0] * w[0]).max(0.0)));
    TruncatedPmf::from_raw(probs)
}

/// Same distribution as [`max_of_two_iid`], evaluated as
/// `Pr(X = t) * (Pr(X <= t) + Pr(X <= t - 1))`, which avoids the cancellation
/// of the squared-CDF difference once the CDF approaches one.
pub fn max_of_two_iid_pmf(pmf: &TruncatedPmf) -> TruncatedPmf {
    let mut probs = Vec::with_capacity(pmf.probs.len());
    let mut below = 0.0_f64;
    let mut comp = 0.0_f64;
    for &p in &pmf.probs {
        probs.push(p * (2.0 * (below + comp) + p));
        let t = below + p;
        if below.abs() >= p.abs() {
            comp += (below - t) + p;
        } else {
            comp += (p - t) + below;
        }
        below = t;
    }
    TruncatedPmf::from_raw(probs)
}

/// `sum_{t=1}^{t_trunc} Pr(X >= t)`: the mean restricted to the computed window.
pub fn empirical_mean(cdf: &TruncatedCdf) -> f64 {
    let tail: Vec<f64> = cdf.cum()[..cdf.t_trunc()]
        .iter()
        .map(|&c| 1.0 - c)
        .collect();
    kahan_sum(&tail)
}

/// Probability mass inside the truncation window.
pub fn captured_mass(pmf: &TruncatedPmf) -> f64 {
    kahan_sum(&pmf.probs)
}

/// FFT convolution of distributions sharing a truncation window.
///
/// Plans and scratch buffers are kept between calls, so one `Convolver` should
/// be reused for all convolutions at a given `t_trunc`.
pub struct Convolver {
    t_trunc: usize,
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    time_buf: Vec<f64>,
    freq_buf: Vec<Complex<f64>>,
    scratch_fwd: Vec<Complex<f64>>,
    scratch_inv: Vec<Complex<f64>>,
}

/// Precomputed transform of one convolution operand.
#[derive(Clone)]
pub struct Spectrum {
    values: Vec<Complex<f64>>,
    support_start: usize,
    t_trunc: usize,
}

impl Convolver {
    pub fn new(t_trunc: usize) -> Self {
        // Linear (not circular) convolution of two length-(t_trunc + 1) arrays.
        let len = (2 * (t_trunc + 1)).next_power_of_two();
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_fwd = forward.make_scratch_vec();
        let scratch_inv = inverse.make_scratch_vec();
        Self {
            t_trunc,
            len,
            time_buf: forward.make_input_vec(),
            freq_buf: forward.make_output_vec(),
            forward,
            inverse,
            scratch_fwd,
            scratch_inv,
        }
    }

    pub fn t_trunc(&self) -> usize {
        self.t_trunc
    }

    pub fn fft_len(&self) -> usize {
        self.len
    }

    fn check(&self, pmf: &TruncatedPmf) -> Result<()> {
        if pmf.t_trunc() != self.t_trunc {
            return Err(Error::TruncationMismatch {
                left: self.t_trunc,
                right: pmf.t_trunc(),
            });
        }
        Ok(())
    }

    fn transform(&mut self, probs: &[f64]) {
        self.time_buf[..probs.len()].copy_from_slice(probs);
        self.time_buf[probs.len()..].fill(0.0);
        self.forward
            .process_with_scratch(&mut self.time_buf, &mut self.freq_buf, &mut self.scratch_fwd)
            .expect("buffer sizes come from the plan");
    }

    pub fn spectrum(&mut self, pmf: &TruncatedPmf) -> Result<Spectrum> {
        self.check(pmf)?;
        self.transform(pmf.probs());
        Ok(Spectrum {
            values: self.freq_buf.clone(),
            support_start: pmf.support_start().unwrap_or(usize::MAX),
            t_trunc: self.t_trunc,
        })
    }

    pub fn convolve(&mut self, a: &TruncatedPmf, b: &TruncatedPmf) -> Result<TruncatedPmf> {
        self.check(a)?;
        let spectrum = self.spectrum(b)?;
        self.convolve_with(a, &spectrum)
    }

    /// Convolves `a` with the operand whose transform is `b`.
    pub fn convolve_with(&mut self, a: &TruncatedPmf, b: &Spectrum) -> Result<TruncatedPmf> {
        self.check(a)?;
        if b.t_trunc != self.t_trunc {
            return Err(Error::TruncationMismatch {
                left: self.t_trunc,
                right: b.t_trunc,
            });
        }
        let lead = match a.support_start() {
            Some(s) => s.saturating_add(b.support_start),
            None => usize::MAX,
        };
        if lead > self.t_trunc {
            return Ok(TruncatedPmf::zeros(self.t_trunc));
        }
        self.transform(a.probs());
        for (x, y) in self.freq_buf.iter_mut().zip(&b.values) {
            *x *= *y;
        }
        self.inverse
            .process_with_scratch(&mut self.freq_buf, &mut self.time_buf, &mut self.scratch_inv)
            .expect("buffer sizes come from the plan");
        let scale = 1.0 / self.len as f64;
        let mut out = Vec::with_capacity(self.t_trunc + 1);
        // Entries below the sum of the support starts are exactly zero.
        out.resize(lead, 0.0);
        for (t, &v) in self.time_buf[lead..=self.t_trunc].iter().enumerate() {
            let v = v * scale;
            assert!(
                v >= -ROUNDOFF_FLOOR,
                "convolution produced {v} at t = {}, beyond FFT round-off",
                t + lead
            );
            out.push(v.max(0.0));
        }
        Ok(TruncatedPmf::from_raw(out))
    }
}

/// Distribution of `A + B` for independent `A`, `B`, truncated to the common window.
pub fn convolve(a: &TruncatedPmf, b: &TruncatedPmf) -> Result<TruncatedPmf> {
    if a.t_trunc() != b.t_trunc() {
        return Err(Error::TruncationMismatch {
            left: a.t_trunc(),
            right: b.t_trunc(),
        });
    }
    Convolver::new(a.t_trunc()).convolve(a, b)
}

/// Controls how many terms of the geometric compound sum are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundOptions {
    /// Largest number of summands `k`. `None` means `t_trunc`, which is exact
    /// on the window because every summand is at least one time step.
    pub max_terms: Option<usize>,
    /// Stop once the total mass of all remaining terms is provably below this
    /// bound. Zero evaluates every term up to `max_terms`.
    pub tail_tolerance: f64,
}

impl Default for CompoundOptions {
    fn default() -> Self {
        Self {
            max_terms: None,
            tail_tolerance: 0.0,
        }
    }
}

impl CompoundOptions {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn with_tail_tolerance(tail_tolerance: f64) -> Self {
        Self {
            max_terms: None,
            tail_tolerance,
        }
    }
}

/// Distribution of `sum_{j=1}^{K} X_j` with `K ~ Geometric(p)` and `X_j` i.i.d. copies of `summand`.
pub fn geometric_compound(summand: &TruncatedPmf, p: f64) -> Result<TruncatedPmf> {
    let mut convolver = Convolver::new(summand.t_trunc());
    geometric_compound_with(summand, p, CompoundOptions::exact(), &mut convolver, |_, _| {})
}

/// Geometric compound sum with explicit options.
///
/// `visit(k, conditional)` is called with `Pr(sum_{j=1}^{k} X_j = t)` for each
/// evaluated `k`, in increasing order.
pub fn geometric_compound_with<F>(
    summand: &TruncatedPmf,
    p: f64,
    options: CompoundOptions,
    convolver: &mut Convolver,
    mut visit: F,
) -> Result<TruncatedPmf>
where
    F: FnMut(usize, &TruncatedPmf),
{
    check_probability("p", p)?;
    if summand.probs[0] > 0.0 {
        return Err(Error::MassAtOrigin(summand.probs[0]));
    }
    if !(options.tail_tolerance >= 0.0) {
        return Err(Error::invalid(
            "tail_tolerance",
            options.tail_tolerance,
            "must be nonnegative",
        ));
    }
    let t_trunc = summand.t_trunc();
    let max_terms = options.max_terms.unwrap_or(t_trunc);
    let fail = 1.0 - p;

    let mut result = vec![0.0; t_trunc + 1];
    if max_terms == 0 {
        return Ok(TruncatedPmf::from_raw(result));
    }

    let spectrum = convolver.spectrum(summand)?;
    let mut conditional = summand.clone();
    let mut weight = p;
    let mut k = 1;
    loop {
        for (r, &c) in result.iter_mut().zip(conditional.probs()) {
            *r += weight * c;
        }
        visit(k, &conditional);

        if k == max_terms || fail == 0.0 {
            break;
        }
        let mass = captured_mass(&conditional);
        if mass == 0.0 {
            break;
        }
        // Conditional masses are nonincreasing in k, so the remaining terms
        // carry at most (1 - p)^k * mass.
        if options.tail_tolerance > 0.0 && (weight / p) * fail * mass <= options.tail_tolerance {
            break;
        }
        conditional = convolver.convolve_with(&conditional, &spectrum)?;
        weight *= fail;
        k += 1;
    }
    Ok(TruncatedPmf::from_raw(result))
}
