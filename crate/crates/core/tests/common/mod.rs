//! Exact rational brute force: direct k-summation with schoolbook convolution.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn schoolbook(a: &[Q], b: &[Q]) -> Vec<Q> {
    let n = a.len();
    let mut out = vec![Q::zero(); n];
    for i in 0..n {
        if a[i].is_zero() {
            continue;
        }
        for j in 0..n - i {
            out[i + j] += &a[i] * &b[j];
        }
    }
    out
}

pub fn geometric(p: &Q, t_trunc: usize) -> Vec<Q> {
    let fail = Q::one() - p;
    let mut out = vec![Q::zero(); t_trunc + 1];
    let mut w = p.clone();
    for x in out.iter_mut().skip(1) {
        *x = w.clone();
        w *= &fail;
    }
    out
}

/// Pmf of the max of two copies, from the squared CDF.
pub fn max_of_two(pmf: &[Q]) -> Vec<Q> {
    let mut cum = Q::zero();
    let mut prev_sq = Q::zero();
    pmf.iter()
        .map(|p| {
            cum += p;
            let sq = &cum * &cum;
            let d = &sq - &prev_sq;
            prev_sq = sq;
            d
        })
        .collect()
}

/// `sum_k p (1 - p)^(k-1) step^{*(k-1)} * last`.
pub fn compound(step: &[Q], last: &[Q], p: &Q) -> Vec<Q> {
    let t_trunc = step.len() - 1;
    let fail = Q::one() - p;
    let mut out = vec![Q::zero(); t_trunc + 1];
    let mut conditional = last.to_vec();
    let mut weight = p.clone();
    for _ in 1..=t_trunc {
        for (o, c) in out.iter_mut().zip(&conditional) {
            *o += &weight * c;
        }
        conditional = schoolbook(&conditional, step);
        weight *= &fail;
    }
    out
}

pub fn oracle_levels(p_gen: &Q, p_swap: &Q, n: u32, t_trunc: usize) -> Vec<Vec<Q>> {
    let mut levels = vec![geometric(p_gen, t_trunc)];
    for _ in 0..n {
        let m = max_of_two(levels.last().unwrap());
        levels.push(compound(&m, &m, p_swap));
    }
    levels
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap()
}

/// Werner oracle with per-step decay factor `r` exactly rational: the weighted
/// mass `E[W 1{T = t}]` follows the same compound structure as the pmf.
pub fn werner_oracle(p_gen: &Q, p_swap: &Q, w0: &Q, r: &Q, n: u32, t_trunc: usize) -> Vec<Vec<Option<Q>>> {
    let mut pmf = geometric(p_gen, t_trunc);
    let mut weighted: Vec<Q> = pmf.iter().map(|p| p * w0).collect();
    let ratio = |w: &[Q], p: &[Q]| -> Vec<Option<Q>> {
        w.iter()
            .zip(p)
            .map(|(w, p)| (!p.is_zero()).then(|| w / p))
            .collect()
    };
    let mut out = vec![ratio(&weighted, &pmf)];
    let mut powers = vec![Q::one()];
    for i in 1..=t_trunc {
        let next = &powers[i - 1] * r;
        powers.push(next);
    }
    for _ in 0..n {
        let m = max_of_two(&pmf);
        let mut a = vec![Q::zero(); t_trunc + 1];
        for ta in 1..=t_trunc {
            for tb in 1..=t_trunc {
                let s = ta.max(tb);
                a[s] += &weighted[ta] * &weighted[tb] * &powers[ta.abs_diff(tb)];
            }
        }
        weighted = compound(&m, &a, p_swap);
        pmf = compound(&m, &m, p_swap);
        out.push(ratio(&weighted, &pmf));
    }
    out
}

