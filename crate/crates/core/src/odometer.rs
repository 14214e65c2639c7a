//! Lazily sampled b-adic integers.
//!
//! A Haar-random b-adic integer has i.i.d. uniform digits, so a sample only
//! ever needs the finite prefix that a carry computation actually reads.
//! Digits come from a ChaCha stream keyed by `(seed, sample index)` and are
//! drawn in position order, so a sample is reproducible regardless of which
//! worker evaluates it or in what order samples are visited.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::digits::Expansion;
use crate::error::{Error, Result};

/// Default number of digits a carry may propagate past the top digit of `r`
/// before sampling gives up.
pub const DEFAULT_PROPAGATION_CAP: usize = 4096;

/// Read access to the digits of a (possibly lazily realized) b-adic integer.
pub trait BadicDigits {
    fn base(&self) -> u32;

    /// Digit at position `i`, realizing it if needed.
    fn digit(&mut self, i: usize) -> u32;
}

#[derive(Clone, Debug)]
pub struct LazyBadicSample {
    base: u32,
    digits: Vec<u32>,
    rng: ChaCha8Rng,
}

impl LazyBadicSample {
    pub fn new(base: u32, seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { base, digits: Vec::new(), rng }
    }

    /// A sample whose lowest digits are fixed to `prefix` (least-significant
    /// first); later digits are random.
    pub fn with_prefix(base: u32, prefix: &[u32], seed: u64, index: u64) -> Result<Self> {
        if let Some(&digit) = prefix.iter().find(|&&d| d >= base) {
            return Err(Error::InvalidDigit { digit, base });
        }
        let mut s = Self::new(base, seed, index);
        s.digits.extend_from_slice(prefix);
        Ok(s)
    }

    pub fn realized(&self) -> &[u32] {
        &self.digits
    }
}

impl BadicDigits for LazyBadicSample {
    fn base(&self) -> u32 {
        self.base
    }

    fn digit(&mut self, i: usize) -> u32 {
        while self.digits.len() <= i {
            let d = self.rng.gen_range(0..self.base);
            self.digits.push(d);
        }
        self.digits[i]
    }
}

/// `x + t` for a fixed integer `t`, computed digit by digit on demand from
/// the digits of `x`.
#[derive(Debug)]
pub struct Advanced<'a, X: BadicDigits> {
    inner: &'a mut X,
    offset: Expansion,
    sum: Vec<u32>,
    carry: u32,
}

impl<X: BadicDigits> Advanced<'_, X> {
    /// Digits of `x + t` computed so far.
    pub fn realized(&self) -> &[u32] {
        &self.sum
    }
}

impl<X: BadicDigits> BadicDigits for Advanced<'_, X> {
    fn base(&self) -> u32 {
        self.inner.base()
    }

    fn digit(&mut self, i: usize) -> u32 {
        let b = self.inner.base();
        while self.sum.len() <= i {
            let p = self.sum.len();
            let s = self.inner.digit(p) + self.offset.digit(p) + self.carry;
            self.carry = u32::from(s >= b);
            self.sum.push(if s >= b { s - b } else { s });
        }
        self.sum[i]
    }
}

/// `T^t x = x + t`, sharing the randomness of `x`.
pub fn advance<'a, X: BadicDigits>(x: &'a mut X, t: &Expansion) -> Result<Advanced<'a, X>> {
    if t.base() != x.base() {
        return Err(Error::BaseMismatch { expected: x.base(), got: t.base() });
    }
    Ok(Advanced { offset: t.clone(), inner: x, sum: Vec::new(), carry: 0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeltaOutcome {
    /// `Δ^(r)(x)`
    pub delta: i64,
    pub carries: u64,
    /// Number of low digits of `x` read.
    pub digits_consumed: usize,
}

/// `Δ^(r)(x)`: adds `r` to `x` until the carry dies out past the top digit of
/// `r`, reading only the digits of `x` that the addition touches.
pub fn sample_delta<X: BadicDigits>(r: &Expansion, x: &mut X, cap: usize) -> Result<DeltaOutcome> {
    let b = x.base();
    if r.base() != b {
        return Err(Error::BaseMismatch { expected: b, got: r.base() });
    }
    let top = r.len();
    let mut carry = 0u32;
    let mut carries = 0u64;
    let mut delta = 0i64;
    let mut pos = 0usize;
    while pos < top || carry == 1 {
        if pos >= top + cap {
            return Err(Error::PropagationCapExceeded { top, cap });
        }
        let xd = x.digit(pos);
        let s = xd + r.digit(pos) + carry;
        let out = if s >= b {
            carry = 1;
            carries += 1;
            s - b
        } else {
            carry = 0;
            s
        };
        delta += i64::from(out) - i64::from(xd);
        pos += 1;
    }
    Ok(DeltaOutcome { delta, carries, digits_consumed: pos })
}

/// `Δ_k^(r)(x) = s_k(x + r) - s_k(x)`, using only digits `0..=k`.
pub fn truncated_delta<X: BadicDigits>(x: &mut X, r: &Expansion, k: usize) -> Result<i64> {
    let b = x.base();
    if r.base() != b {
        return Err(Error::BaseMismatch { expected: b, got: r.base() });
    }
    let mut carry = 0u32;
    let mut delta = 0i64;
    for pos in 0..=k {
        let xd = x.digit(pos);
        let s = xd + r.digit(pos) + carry;
        carry = u32::from(s >= b);
        let out = if s >= b { s - b } else { s };
        delta += i64::from(out) - i64::from(xd);
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn exp(n: u64, b: u32) -> Expansion {
        Expansion::from_u64(n, b).unwrap()
    }

    #[test]
    fn zero_offset() {
        let mut x = LazyBadicSample::new(10, 1, 0);
        let out = sample_delta(&exp(0, 10), &mut x, DEFAULT_PROPAGATION_CAP).unwrap();
        assert_eq!((out.delta, out.carries, out.digits_consumed), (0, 0, 0));
        for k in 0..5 {
            assert_eq!(truncated_delta(&mut x, &exp(0, 10), k).unwrap(), 0);
        }
    }

    #[test]
    fn carry_trace_on_fixed_prefix() {
        let mut x = LazyBadicSample::with_prefix(2, &[1, 1, 0], 9, 0).unwrap();
        let out = sample_delta(&exp(1, 2), &mut x, DEFAULT_PROPAGATION_CAP).unwrap();
        assert_eq!((out.delta, out.carries, out.digits_consumed), (-1, 2, 3));
        assert!(LazyBadicSample::with_prefix(2, &[2], 0, 0).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        let mut x = LazyBadicSample::with_prefix(2, &[1; 40], 0, 0).unwrap();
        let err = sample_delta(&exp(1, 2), &mut x, 16).unwrap_err();
        assert!(matches!(err, Error::PropagationCapExceeded { top: 1, cap: 16 }));
    }

    #[test]
    fn samples_are_reproducible_and_independent_of_order() {
        let mut a = LazyBadicSample::new(7, 42, 3);
        let mut b = LazyBadicSample::new(7, 42, 3);
        let da: Vec<u32> = (0..50).map(|i| a.digit(i)).collect();
        // Realize b in a different access order.
        let _ = b.digit(49);
        let db: Vec<u32> = (0..50).map(|i| b.digit(i)).collect();
        assert_eq!(da, db);
        let mut c = LazyBadicSample::new(7, 42, 4);
        let dc: Vec<u32> = (0..50).map(|i| c.digit(i)).collect();
        assert_ne!(da, dc);
    }

    #[test]
    fn carry_identity_and_stabilization_per_sample() {
        for (r, b) in [(7u64, 10u32), (118, 2), (5900991, 10), (12345, 3)] {
            let re = exp(r, b);
            let sr = re.digit_sum() as i64;
            for i in 0..2000 {
                let mut x = LazyBadicSample::new(b, 5, i);
                let out = sample_delta(&re, &mut x, DEFAULT_PROPAGATION_CAP).unwrap();
                assert_eq!(out.delta, sr - out.carries as i64 * (b as i64 - 1));
                for k in out.digits_consumed..out.digits_consumed + 5 {
                    assert_eq!(truncated_delta(&mut x, &re, k).unwrap(), out.delta);
                }
            }
        }
    }

    #[test]
    fn truncated_cocycle() {
        let b = 3;
        for i in 0..500 {
            let t = exp(i * 7 + 1, b);
            let u = exp(i * 13 + 2, b);
            let tu = exp(i * 20 + 3, b);
            let mut x = LazyBadicSample::new(b, 11, i);
            for k in 0..12 {
                let whole = truncated_delta(&mut x, &tu, k).unwrap();
                let first = truncated_delta(&mut x, &t, k).unwrap();
                let mut shifted = advance(&mut x, &t).unwrap();
                let second = truncated_delta(&mut shifted, &u, k).unwrap();
                assert_eq!(whole, first + second);
            }
        }
    }

    #[test]
    fn advance_examples() {
        let mut x = LazyBadicSample::new(10, 3, 0);
        let prefix: Vec<u32> = (0..10).map(|i| x.digit(i)).collect();
        {
            let mut v = advance(&mut x, &exp(0, 10)).unwrap();
            let same: Vec<u32> = (0..10).map(|i| v.digit(i)).collect();
            assert_eq!(same, prefix);
        }
        {
            let mut v = advance(&mut x, &exp(1000, 10)).unwrap();
            let low: Vec<u32> = (0..3).map(|i| v.digit(i)).collect();
            assert_eq!(low, prefix[..3]);
            assert_eq!(v.realized().len(), 3);
        }
        assert!(advance(&mut x, &exp(3, 2)).is_err());
    }

    #[test]
    fn full_cocycle_through_advance() {
        let b = 10;
        for i in 0..1000u64 {
            let t = exp(5900 + i, b);
            let u = exp(991 + 3 * i, b);
            let tu = exp(5900 + 991 + 4 * i, b);
            let mut x = LazyBadicSample::new(b, 17, i);
            let whole = sample_delta(&tu, &mut x, DEFAULT_PROPAGATION_CAP).unwrap().delta;
            let first = sample_delta(&t, &mut x, DEFAULT_PROPAGATION_CAP).unwrap().delta;
            let mut shifted = advance(&mut x, &t).unwrap();
            let second = sample_delta(&u, &mut shifted, DEFAULT_PROPAGATION_CAP).unwrap().delta;
            assert_eq!(whole, first + second);
        }
    }

    #[test]
    fn empirical_mean_is_zero() {
        let r = exp(7, 10);
        let n = 1_000_000u64;
        let total: i64 = (0..n)
            .map(|i| {
                let mut x = LazyBadicSample::new(10, 2024, i);
                sample_delta(&r, &mut x, DEFAULT_PROPAGATION_CAP).unwrap().delta
            })
            .sum();
        let mean = total as f64 / n as f64;
        assert!(mean.abs() <= 3.0 * 28f64.sqrt() / 1000.0, "mean {mean}");
    }

    #[test]
    fn digit_marginals_are_uniform() {
        let crit = ChiSquared::new(9.0).unwrap().inverse_cdf(1.0 - 1e-3);
        let positions = 8;
        let mut counts = vec![[0u64; 10]; positions];
        let n = 100_000u64;
        for i in 0..n {
            let mut x = LazyBadicSample::new(10, 77, i);
            for (p, c) in counts.iter_mut().enumerate() {
                c[x.digit(p) as usize] += 1;
            }
        }
        let expected = n as f64 / 10.0;
        for c in &counts {
            let stat: f64 = c.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
            assert!(stat < crit, "chi-square {stat} >= {crit}");
        }
    }
}
