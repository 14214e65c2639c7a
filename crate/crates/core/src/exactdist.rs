//! Exact atoms, moments and variance of `μ^(r)`, the law of `s(x + r) - s(x)`
//! for a Haar-random b-adic integer `x`.
//!
//! The variation only takes the values `a_k = s(r) - k(b - 1)` where `k` is
//! the number of carries, so a distribution is stored as the vector of
//! carry-count probabilities. Everything is computed with exact rationals.
//!
//! Both the atom vector and the variance follow the same two-chain scheme:
//! writing `r = b·r' + r_0`, the law for `r` depends only on the laws for
//! `r'` and `r' + 1`, and the pair `(⌊r/b^i⌋, ⌊r/b^i⌋ + 1)` at level `i`
//! depends only on the pair at level `i + 1`. The chain bottoms out at
//! `(0, 1)` where both laws are known in closed form.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::digits::{check_base, decompose_blocks, BlockKind, Expansion};
use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Default requested tail mass for [`default_atom_cutoff`].
pub const DEFAULT_TAIL_EPS: f64 = 1e-30;

pub fn rational(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn big_pow(base: u32, exp: u64) -> BigUint {
    num_traits::pow(BigUint::from(base), exp as usize)
}

/// `q^e` for `q = 1/b` and any integer exponent.
fn inv_base_pow(base: u32, exp: i64) -> Rational {
    let p = BigInt::from(big_pow(base, exp.unsigned_abs()));
    if exp >= 0 {
        Rational::new(BigInt::one(), p)
    } else {
        Rational::from_integer(p)
    }
}

/// Renders a rational as `num/den`, always with an explicit denominator.
pub fn format_rational(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Scientific rendering with `sig` significant digits, rounded half-up from
/// the exact value.
pub fn format_decimal(q: &Rational, sig: usize) -> String {
    if q.is_zero() {
        return "0".into();
    }
    let sig = sig.max(1);
    let a = q.abs();
    let ten = BigInt::from(10);
    let lower = num_traits::pow(ten.clone(), sig - 1);
    let upper = num_traits::pow(ten.clone(), sig);
    let scaled = |e: i64| -> BigInt {
        let shift = sig as i64 - 1 - e;
        let p = Rational::from_integer(num_traits::pow(ten.clone(), shift.unsigned_abs() as usize));
        let v = if shift >= 0 { &a * p } else { &a / p };
        (v + rational(1, 2)).floor().to_integer()
    };
    let bits = a.numer().bits() as f64 - a.denom().bits() as f64;
    let mut e = (bits * std::f64::consts::LOG10_2).floor() as i64;
    let mut m = scaled(e);
    while m >= upper {
        e += 1;
        m = scaled(e);
    }
    while m < lower {
        e -= 1;
        m = scaled(e);
    }
    let digits = m.to_string();
    let sign = if q.is_negative() { "-" } else { "" };
    if digits.len() == 1 {
        format!("{sign}{digits}e{e}")
    } else {
        format!("{sign}{}.{}e{e}", &digits[..1], &digits[1..])
    }
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::InvalidArgument(format!("not a rational: {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

/// Nearest `f64`, also for numerators and denominators far outside the
/// `f64` range.
pub fn rational_to_f64(q: &Rational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let n = q.numer().abs();
    let d = q.denom();
    let shift = n.bits() as i64 - d.bits() as i64 - 64;
    let scaled = if shift >= 0 {
        &n / (d << shift as usize)
    } else {
        (&n << (-shift) as usize) / d
    };
    let v = scaled.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(shift.clamp(-2000, 2000) as i32);
    if q.is_negative() {
        -v
    } else {
        v
    }
}

/// `μ^(1)` at its `k`-th atom `1 - k(b - 1)`: `1/b^k - 1/b^(k+1)`.
pub fn mu_base1_atom(k: u64, base: u32) -> Rational {
    Rational::new(
        BigInt::from(base - 1),
        BigInt::from(big_pow(base, k + 1)),
    )
}

/// Carry-count probabilities `P(c = k)`, `k = 0..=max_k`, all over the
/// common denominator `b^exponent`.
struct CarryLaw {
    numerators: Vec<BigUint>,
    exponent: u64,
}

fn carry_law(r: &Expansion, max_k: usize) -> CarryLaw {
    let b = r.base();
    let width = max_k + 1;
    let top = u64::try_from(width).expect("atom count fits in u64");

    // Level L: the pair (0, 1). μ^(0) is the point mass, μ^(1) is geometric.
    let mut lo = vec![BigUint::zero(); width];
    lo[0] = big_pow(b, top);
    let mut hi: Vec<BigUint> = (0..width)
        .map(|k| big_pow(b, top - 1 - k as u64) * (b - 1))
        .collect();
    let mut exponent = top;
    // Trailing (b - 1)-run length of the current high part n. Adding n + 1
    // to x' instead of n turns that run into zeros, which costs the run's
    // carries on top of the one coming in from below.
    let mut run = 0usize;

    for &digit in r.digits().iter().rev() {
        // lo' = ((b - d)·lo + d·shift(hi, 1 + run)) / b
        let shift = 1 + run;
        let step = |lower: &[BigUint], upper: &[BigUint], d: u32| -> Vec<BigUint> {
            (0..width)
                .map(|k| {
                    let mut v = &lower[k] * (b - d);
                    if d > 0 && k >= shift {
                        v += &upper[k - shift] * d;
                    }
                    v
                })
                .collect()
        };
        let new_lo = step(&lo, &hi, digit);
        // ⌊r/b^i⌋ + 1 = b·⌊r/b^(i+1)⌋ + (digit + 1), or b·(⌊r/b^(i+1)⌋ + 1) on overflow.
        let new_hi = if digit + 1 < b {
            step(&lo, &hi, digit + 1)
        } else {
            hi.iter().map(|v| v * b).collect()
        };
        lo = new_lo;
        hi = new_hi;
        exponent += 1;
        run = if digit + 1 == b { run + 1 } else { 0 };
    }
    CarryLaw { numerators: lo, exponent }
}

/// Exact head of `μ^(r)`: atoms `k = 0..=K` at `a_k = s(r) - k(b - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicDistribution {
    pub base: u32,
    pub r: BigUint,
    pub s_r: u64,
    pub digit_count: usize,
    /// `atoms[k] = μ^(r)(a_k)`.
    pub atoms: Vec<Rational>,
    /// `1 - Σ atoms`, the mass of all atoms with `k > K`.
    pub tail_mass: Rational,
}

impl AtomicDistribution {
    /// `K`, the index of the last computed atom.
    pub fn cutoff(&self) -> usize {
        self.atoms.len() - 1
    }

    /// Index of the first atom folded into the tail.
    pub fn tail_index(&self) -> usize {
        self.atoms.len()
    }

    /// `a_k = s(r) - k(b - 1)`.
    pub fn location(&self, k: usize) -> i64 {
        self.s_r as i64 - k as i64 * (i64::from(self.base) - 1)
    }

    /// Carry index of the lattice point `d`, if `d` is on the lattice.
    pub fn index_of(&self, d: i64) -> Option<usize> {
        let gap = self.s_r as i64 - d;
        let step = i64::from(self.base) - 1;
        (gap >= 0 && gap % step == 0).then(|| (gap / step) as usize)
    }

    /// `μ^(r)(d)` when `d` is within the computed head; zero off-lattice or
    /// above `s(r)`, `None` when the atom lies in the tail.
    pub fn mass_at(&self, d: i64) -> Option<Rational> {
        match self.index_of(d) {
            None => Some(Rational::zero()),
            Some(k) => self.atoms.get(k).cloned(),
        }
    }

    /// Certified bound on the tail mass: `P(c > K) <= (1/b)^(K + 1 - L)` for
    /// `K >= L - 1` where `L` is the digit count of `r`.
    ///
    /// Carries at positions `0..L` are at most `L`; every further carry at
    /// position `L + j` needs `x_(L + j) = b - 1`, an independent event of
    /// probability `1/b`.
    pub fn tail_mass_bound(&self) -> Result<Rational> {
        let k = self.cutoff();
        if k + 1 < self.digit_count {
            return Err(Error::TailBoundUnavailable {
                needed: self.digit_count,
                available: self.atoms.len(),
            });
        }
        Ok(inv_base_pow(self.base, (k + 1 - self.digit_count) as i64))
    }

    /// `Σ_{k<=K} a_k^order · μ(a_k)`.
    pub fn head_moment(&self, order: u32) -> Rational {
        let mut acc = BigRational::zero();
        for (k, m) in self.atoms.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            let a = BigInt::from(self.location(k));
            acc += m * Rational::from_integer(num_traits::pow(a, order as usize));
        }
        acc
    }

    /// Certified bound on `Σ_{k>K} |a_k|^order · μ(a_k)`.
    ///
    /// For `k > K >= L` the atom sits at `|a_k| = k(b-1) - s(r) =: g(k)`, which
    /// is increasing. Summing by parts,
    /// `Σ_{k>K} g(k) p_k = g(K+1) P(c>K) + Σ_{k>=K+2} (g(k) - g(k-1)) P(c>=k)`,
    /// and `P(c >= k) <= (1/b)^(k - L)`.
    pub fn tail_moment_bound(&self, order: u32) -> Result<Rational> {
        let cutoff = self.cutoff();
        if cutoff < self.digit_count {
            return Err(Error::TailBoundUnavailable {
                needed: self.digit_count + 1,
                available: self.atoms.len(),
            });
        }
        if self.tail_mass.is_zero() {
            return Ok(Rational::zero());
        }
        let b = self.base;
        let s = BigInt::from(self.s_r);
        let g = |k: i64| -> BigInt {
            let v = BigInt::from(k) * (b as i64 - 1) - &s;
            num_traits::pow(v, order as usize)
        };
        let first = Rational::from_integer(g(cutoff as i64 + 1)) * &self.tail_mass;
        let n = cutoff as i64 + 2;
        let dg = |k: i64| g(k) - g(k - 1);
        let rest = polynomial_geometric_tail(dg, order as usize, n, b)
            * inv_base_pow(b, -(self.digit_count as i64));
        Ok(first + rest)
    }
}

/// `Σ_{k>=n} p(k) (1/b)^k` for a polynomial `p` of degree below `terms`,
/// given by its values.
///
/// With `q = 1/b`, `S(p, n) = (p(n) q^n + S(∇p, n + 1)) / (1 - q)` where
/// `∇p(k) = p(k) - p(k - 1)`; unrolled, the `i`-th term is
/// `q^(n+i) ∇^i p(n+i) / (1-q)^(i+1)`.
fn polynomial_geometric_tail(p: impl Fn(i64) -> BigInt, terms: usize, n: i64, base: u32) -> Rational {
    let one_minus_q = Rational::new(BigInt::from(base - 1), BigInt::from(base));
    let mut total = Rational::zero();
    let mut denom_pow = one_minus_q.clone();
    for i in 0..=terms {
        let m = n + i as i64;
        // ∇^i p(m) = Σ_t (-1)^t C(i, t) p(m - t)
        let mut diff = BigInt::zero();
        let mut binom = BigInt::one();
        for t in 0..=i {
            let term = &binom * p(m - t as i64);
            if t % 2 == 0 {
                diff += term;
            } else {
                diff -= term;
            }
            binom = binom * BigInt::from(i - t) / BigInt::from(t + 1);
        }
        total += Rational::from_integer(diff) * inv_base_pow(base, m) / &denom_pow;
        denom_pow *= &one_minus_q;
    }
    total
}

/// `K = L + ⌈log_b(1/eps)⌉`, enough atoms for the certified tail bound to
/// drop below `eps`.
pub fn default_atom_cutoff(digit_count: usize, base: u32, eps: f64) -> usize {
    let digits = (1.0 / eps).ln() / f64::from(base).ln();
    // Round values within float noise of an integer down to it.
    let extra = (digits - 1e-9).ceil().max(0.0) as usize;
    digit_count + extra
}

pub fn mu_distribution(r: &BigUint, base: u32, max_k: usize) -> Result<AtomicDistribution> {
    let e = Expansion::new(r, base)?;
    Ok(distribution_of(&e, max_k))
}

/// As [`mu_distribution`] with the default cutoff for a requested tail mass.
pub fn mu_distribution_eps(r: &BigUint, base: u32, eps: f64) -> Result<AtomicDistribution> {
    let e = Expansion::new(r, base)?;
    let k = default_atom_cutoff(e.len(), base, eps);
    Ok(distribution_of(&e, k))
}

pub fn distribution_of(e: &Expansion, max_k: usize) -> AtomicDistribution {
    let law = carry_law(e, max_k);
    let denom = BigInt::from(big_pow(e.base(), law.exponent));
    let mut head = BigUint::zero();
    let atoms = law
        .numerators
        .into_iter()
        .map(|n| {
            head += &n;
            Rational::new(BigInt::from(n), denom.clone())
        })
        .collect();
    let tail_mass = Rational::new(BigInt::from(big_pow(e.base(), law.exponent)) - BigInt::from(head), denom);
    AtomicDistribution {
        base: e.base(),
        r: e.value(),
        s_r: e.digit_sum(),
        digit_count: e.len(),
        atoms,
        tail_mass,
    }
}

/// The exact value `μ^(r)(d)`.
pub fn mu_atom(r: &BigUint, base: u32, d: i64) -> Result<Rational> {
    let e = Expansion::new(r, base)?;
    let gap = e.digit_sum() as i64 - d;
    let step = i64::from(base) - 1;
    if gap < 0 || gap % step != 0 {
        return Ok(Rational::zero());
    }
    let k = (gap / step) as usize;
    let law = carry_law(&e, k);
    Ok(Rational::new(
        BigInt::from(law.numerators[k].clone()),
        BigInt::from(big_pow(base, law.exponent)),
    ))
}

/// `Var(μ^(r))`, from the variance recursion
/// `V(b r' + d) = (b-d)/b V(r') + d/b V(r'+1) + d(b-d)` with `V(0) = 0`,
/// `V(1) = b`.
pub fn variance_exact(r: &BigUint, base: u32) -> Result<Rational> {
    let e = Expansion::new(r, base)?;
    Ok(variance_of(&e))
}

pub fn variance_of(e: &Expansion) -> Rational {
    let b = e.base();
    // Numerators over the shared denominator b^exponent.
    let mut lo = BigUint::zero();
    let mut hi = BigUint::from(b);
    let mut scale = BigUint::one();
    for &d in e.digits().iter().rev() {
        let next_scale = &scale * b;
        let step = |d: u32, lo: &BigUint, hi: &BigUint| -> BigUint {
            lo * (b - d) + hi * d + &next_scale * (d * (b - d))
        };
        let new_lo = step(d, &lo, &hi);
        let new_hi = if d + 1 < b {
            step(d + 1, &lo, &hi)
        } else {
            &hi * b
        };
        lo = new_lo;
        hi = new_hi;
        scale = next_scale;
    }
    Rational::new(BigInt::from(lo), BigInt::from(scale))
}

/// The shape of an integer with exactly one nonzero block (trailing zeros
/// do not change the law).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingleBlock {
    /// A digit `α` with `1 <= α <= b - 1`.
    Digit(u32),
    /// A run of `m` top digits `b - 1`.
    TopRun(u32),
}

pub fn single_block_of(r: &BigUint, base: u32) -> Result<SingleBlock> {
    let e = Expansion::new(r, base)?;
    let d = decompose_blocks(&e)?;
    let mut nonzero = d.nonzero_blocks();
    match (nonzero.next(), nonzero.next()) {
        (Some(block), None) => Ok(match block.kind {
            BlockKind::Single(a) => SingleBlock::Digit(a),
            BlockKind::TopDigit => SingleBlock::TopRun(block.len as u32),
            BlockKind::Zero => unreachable!("filtered"),
        }),
        _ => Err(Error::NotSingleBlock(r.to_string())),
    }
}

/// Closed-form variance for a single nonzero block: `α(1 + b - α)` for a
/// digit, `2b - 2/b^(m-1)` for a run of `m` top digits.
pub fn variance_closed_single_block(block: SingleBlock, base: u32) -> Result<Rational> {
    check_base(base)?;
    let b = i64::from(base);
    match block {
        SingleBlock::Digit(a) if a >= 1 && a < base => {
            let a = i64::from(a);
            Ok(Rational::from_integer(BigInt::from(a * (1 + b - a))))
        }
        SingleBlock::TopRun(m) if m >= 1 => {
            Ok(Rational::from_integer(BigInt::from(2 * b)) - inv_base_pow(base, i64::from(m) - 1) * BigInt::from(2))
        }
        other => Err(Error::NotSingleBlock(format!("{other:?} in base {base}"))),
    }
}

/// `Var(μ^(b^m r̂ + b^m - 1))` via
/// `V(r̂)/b^m + (1 - 1/b^m) V(r̂ + 1) + b - 1/b^(m-1)`.
pub fn variance_trailing_top_run(rhat: &BigUint, m: u32, base: u32) -> Result<Rational> {
    if m == 0 {
        return Err(Error::InvalidArgument("run length must be at least 1".into()));
    }
    let v0 = variance_exact(rhat, base)?;
    let v1 = variance_exact(&(rhat + 1u32), base)?;
    let w = inv_base_pow(base, i64::from(m));
    let one = Rational::one();
    Ok(&w * v0 + (&one - &w) * v1 + Rational::from_integer(BigInt::from(base)) - inv_base_pow(base, i64::from(m) - 1))
}

/// `Var(μ^(b^m r̂ + 1))` via
/// `(1 - 1/b^m) V(r̂) + V(r̂ + 1)/b^m + b - 1/b^(m-1)`.
pub fn variance_trailing_one(rhat: &BigUint, m: u32, base: u32) -> Result<Rational> {
    if m == 0 {
        return Err(Error::InvalidArgument("zero-run length must be at least 1".into()));
    }
    let v0 = variance_exact(rhat, base)?;
    let v1 = variance_exact(&(rhat + 1u32), base)?;
    let w = inv_base_pow(base, i64::from(m));
    let one = Rational::one();
    Ok((&one - &w) * v0 + &w * v1 + Rational::from_integer(BigInt::from(base)) - inv_base_pow(base, i64::from(m) - 1))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceReport {
    pub r: String,
    pub base: u32,
    #[serde(serialize_with = "ser_rational")]
    pub variance: Rational,
    pub rho: usize,
    pub lambda: usize,
    /// `b/4 · ρ`
    #[serde(serialize_with = "ser_rational")]
    pub lower_bound: Rational,
    /// `2b² · ρ`
    #[serde(serialize_with = "ser_rational")]
    pub upper_bound: Rational,
    /// `b/4 · λ`
    #[serde(serialize_with = "ser_rational")]
    pub lambda_lower: Rational,
    /// `b² · λ`
    #[serde(serialize_with = "ser_rational")]
    pub lambda_upper: Rational,
    pub all_bounds_hold: bool,
}

pub(crate) fn ser_rational<S: serde::Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(q))
}

pub fn check_variance_bounds(r: &BigUint, base: u32) -> Result<VarianceReport> {
    let e = Expansion::new(r, base)?;
    let blocks = decompose_blocks(&e)?;
    let variance = variance_of(&e);
    let b = BigInt::from(base);
    let quarter_b = Rational::new(b.clone(), BigInt::from(4));
    let b2 = Rational::from_integer(&b * &b);
    let rho = Rational::from_integer(BigInt::from(blocks.rho));
    let lambda = Rational::from_integer(BigInt::from(blocks.lambda));
    let lower_bound = &quarter_b * &rho;
    let upper_bound = &b2 * Rational::from_integer(BigInt::from(2)) * &rho;
    let lambda_lower = &quarter_b * &lambda;
    let lambda_upper = &b2 * &lambda;
    let all_bounds_hold = lower_bound <= variance
        && variance <= upper_bound
        && lambda_lower <= variance
        && variance <= lambda_upper;
    Ok(VarianceReport {
        r: r.to_string(),
        base,
        variance,
        rho: blocks.rho,
        lambda: blocks.lambda,
        lower_bound,
        upper_bound,
        lambda_lower,
        lambda_upper,
        all_bounds_hold,
    })
}

/// A closed interval of rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalInterval {
    pub lo: Rational,
    pub hi: Rational,
}

impl RationalInterval {
    pub fn point(q: Rational) -> Self {
        Self { lo: q.clone(), hi: q }
    }

    pub fn contains(&self, q: &Rational) -> bool {
        &self.lo <= q && q <= &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }
}

/// Enclosure of the mean of `μ^(r)` from the computed head and the certified
/// tail first-moment bound. The mean is zero, so the interval must contain it.
pub fn mean_check(dist: &AtomicDistribution) -> Result<RationalInterval> {
    let head = dist.head_moment(1);
    let tail = dist.tail_moment_bound(1)?;
    Ok(RationalInterval { lo: &head - &tail, hi: head + tail })
}

/// `σ_r = √Var(μ^(r))` as a fixed-point number: the true value lies in
/// `[scaled, scaled + 1) / 2^frac_bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sigma {
    pub scaled: BigUint,
    pub frac_bits: u32,
}

impl Sigma {
    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&Rational::new(
            BigInt::from(self.scaled.clone()),
            BigInt::one() << self.frac_bits as usize,
        ))
    }

    pub fn lower(&self) -> Rational {
        Rational::new(BigInt::from(self.scaled.clone()), BigInt::one() << self.frac_bits as usize)
    }

    pub fn upper(&self) -> Rational {
        Rational::new(BigInt::from(&self.scaled + 1u32), BigInt::one() << self.frac_bits as usize)
    }
}

/// `σ_r` with at least `precision` correct significant bits (the variance is
/// at least `b/4 >= 1/2` for `r >= 1`).
pub fn sigma(r: &BigUint, base: u32, precision: u32) -> Result<Sigma> {
    let v = variance_exact(r, base)?;
    if v.is_zero() {
        return Err(Error::ZeroHasNoBlocks);
    }
    Ok(sqrt_fixed(&v, precision + 1))
}

pub(crate) fn sqrt_fixed(v: &Rational, frac_bits: u32) -> Sigma {
    let num = v.numer().to_biguint().expect("variance is nonnegative");
    let den = v.denom().to_biguint().expect("denominator is positive");
    let scaled = ((num << (2 * frac_bits as usize)) / den).sqrt();
    Sigma { scaled, frac_bits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digits::reverse_expansion;
    use proptest::prelude::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(format_decimal(&rational(1, 16), 15), "6.25000000000000e-2");
        assert_eq!(format_decimal(&rational(-2, 3), 15), "-6.66666666666667e-1");
        assert_eq!(format_decimal(&rational(99, 5), 3), "1.98e1");
        assert_eq!(format_decimal(&rational(9995, 1000), 3), "1.00e1");
        assert_eq!(format_decimal(&rational(7, 1), 1), "7e0");
        assert_eq!(format_decimal(&rational(0, 1), 15), "0");
        let tiny = Rational::new(BigInt::one(), num_traits::pow(BigInt::from(10), 400));
        assert_eq!(format_decimal(&tiny, 2), "1.0e-400");
    }

    #[test]
    fn base1_atoms() {
        assert_eq!(mu_base1_atom(0, 2), rational(1, 2));
        assert_eq!(mu_base1_atom(1, 2), rational(1, 4));
        assert_eq!(mu_base1_atom(0, 10), rational(9, 10));
    }

    #[test]
    fn point_atoms() {
        assert_eq!(mu_atom(&big(0), 2, 0).unwrap(), Rational::one());
        assert_eq!(mu_atom(&big(0), 2, 1).unwrap(), Rational::zero());
        assert_eq!(mu_atom(&big(1), 2, 1).unwrap(), rational(1, 2));
        // Off-lattice and above s(r).
        assert_eq!(mu_atom(&big(1), 10, 0).unwrap(), Rational::zero());
        assert_eq!(mu_atom(&big(1), 10, 2).unwrap(), Rational::zero());
    }

    #[test]
    fn distribution_of_one() {
        let d = mu_distribution(&big(1), 2, 3).unwrap();
        assert_eq!(d.atoms, vec![rational(1, 2), rational(1, 4), rational(1, 8), rational(1, 16)]);
        assert_eq!(d.tail_mass, rational(1, 16));
        assert_eq!(d.location(3), -2);
    }

    #[test]
    fn distribution_of_zero() {
        for b in [2, 5, 10] {
            let d = mu_distribution(&big(0), b, 6).unwrap();
            assert_eq!(d.atoms[0], Rational::one());
            assert!(d.atoms[1..].iter().all(Zero::is_zero));
            assert!(d.tail_mass.is_zero());
            let mean = mean_check(&d).unwrap();
            assert_eq!(mean, RationalInterval::point(Rational::zero()));
        }
    }

    #[test]
    fn trailing_zeros_do_not_change_law() {
        for (r, b) in [(7u64, 10u32), (118, 2), (5, 3)] {
            let plain = mu_distribution(&big(r), b, 12).unwrap();
            let shifted = mu_distribution(&(big(r) * b.pow(3)), b, 12).unwrap();
            assert_eq!(plain.atoms, shifted.atoms);
        }
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance_exact(&big(1), 2).unwrap(), rational(2, 1));
        assert_eq!(variance_exact(&big(3), 2).unwrap(), rational(3, 1));
        assert_eq!(variance_exact(&big(7), 10).unwrap(), rational(28, 1));
        assert_eq!(variance_exact(&big(0), 10).unwrap(), Rational::zero());
    }

    #[test]
    fn closed_single_block_examples() {
        assert_eq!(variance_closed_single_block(SingleBlock::Digit(4), 10).unwrap(), rational(28, 1));
        assert_eq!(variance_closed_single_block(SingleBlock::TopRun(1), 2).unwrap(), rational(2, 1));
        assert_eq!(variance_closed_single_block(SingleBlock::TopRun(3), 10).unwrap(), rational(999, 50));
        assert!(variance_closed_single_block(SingleBlock::Digit(0), 10).is_err());
        assert!(variance_closed_single_block(SingleBlock::TopRun(0), 10).is_err());
        assert_eq!(single_block_of(&big(999), 10).unwrap(), SingleBlock::TopRun(3));
        assert_eq!(single_block_of(&big(4000), 10).unwrap(), SingleBlock::Digit(4));
        assert!(matches!(single_block_of(&big(19), 10), Err(Error::NotSingleBlock(_))));
    }

    #[test]
    fn trailing_run_examples() {
        assert_eq!(variance_trailing_top_run(&big(0), 2, 2).unwrap(), rational(3, 1));
        assert_eq!(variance_trailing_top_run(&big(1), 1, 10).unwrap(), rational(131, 5));
        assert_eq!(variance_trailing_top_run(&big(0), 1, 10).unwrap(), rational(18, 1));
        assert_eq!(variance_trailing_one(&big(0), 1, 2).unwrap(), rational(2, 1));
        assert_eq!(variance_trailing_one(&big(1), 2, 2).unwrap(), variance_exact(&big(5), 2).unwrap());
        assert_eq!(variance_trailing_one(&big(1), 2, 2).unwrap(), rational(7, 2));
        assert_eq!(variance_trailing_one(&big(1), 1, 10).unwrap(), rational(99, 5));
        assert_eq!(variance_exact(&big(11), 10).unwrap(), rational(99, 5));
    }

    #[test]
    fn bounds_examples() {
        let rep = check_variance_bounds(&big(1), 2).unwrap();
        assert_eq!(rep.variance, rational(2, 1));
        assert_eq!((rep.lower_bound.clone(), rep.upper_bound.clone()), (rational(1, 2), rational(8, 1)));
        assert!(rep.all_bounds_hold);
        let rep = check_variance_bounds(&big(3), 2).unwrap();
        assert_eq!((rep.rho, rep.lambda), (1, 1));
        assert_eq!((rep.lambda_lower.clone(), rep.lambda_upper.clone()), (rational(1, 2), rational(4, 1)));
        assert!(rep.all_bounds_hold);
        assert!(matches!(check_variance_bounds(&big(0), 2), Err(Error::ZeroHasNoBlocks)));
    }

    #[test]
    fn mean_interval_examples() {
        let d = mu_distribution(&big(1), 2, 30).unwrap();
        let m = mean_check(&d).unwrap();
        assert!(m.contains(&Rational::zero()));
        assert!(rational_to_f64(&m.width()) < 1e-6);

        let d = mu_distribution(&big(7), 10, 40).unwrap();
        assert!(mean_check(&d).unwrap().contains(&Rational::zero()));

        let d = mu_distribution(&big(118), 2, 5).unwrap();
        assert!(matches!(mean_check(&d), Err(Error::TailBoundUnavailable { .. })));
    }

    #[test]
    fn tail_moment_bound_for_one_is_exact_enough() {
        // μ^(1) in base 2: atoms at 1 - k with mass 2^-(k+1). The exact tail
        // first absolute moment beyond K is Σ_{k>K} (k-1) 2^-(k+1) = (K+1) 2^-(K+1).
        for cutoff in [3usize, 10, 25] {
            let d = mu_distribution(&big(1), 2, cutoff).unwrap();
            let exact = Rational::new(BigInt::from(cutoff + 1), BigInt::one() << (cutoff + 1));
            let bound = d.tail_moment_bound(1).unwrap();
            assert!(bound >= exact, "K={cutoff}");
            assert!(bound <= exact * BigInt::from(4));
        }
    }

    #[test]
    fn sigma_values() {
        let s = sigma(&big(1), 2, 53).unwrap();
        assert!((s.to_f64() - 2f64.sqrt()).abs() < 1e-15);
        assert!(s.lower() * s.lower() <= rational(2, 1) && s.upper() * s.upper() > rational(2, 1));
        assert!((sigma(&big(3), 2, 53).unwrap().to_f64() - 3f64.sqrt()).abs() < 1e-15);
        assert!((sigma(&big(7), 10, 53).unwrap().to_f64() - 28f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rational_text_round_trip() {
        let q = rational(-6, 8);
        assert_eq!(format_rational(&q), "-3/4");
        assert_eq!(parse_rational("-3/4").unwrap(), q);
        assert_eq!(format_rational(&rational(2, 1)), "2/1");
        assert!(parse_rational("1/0").is_err());
        assert_eq!(rational_to_f64(&rational(-3, 4)), -0.75);
    }

    #[test]
    fn cutoff_reaches_requested_tail() {
        assert_eq!(default_atom_cutoff(5, 10, 1e-30), 35);
        assert_eq!(default_atom_cutoff(3, 2, 0.25), 5);
    }

    fn arb_base() -> impl Strategy<Value = u32> {
        prop::sample::select(vec![2u32, 3, 10])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn one_step_measure_recursion(r in 0u64..1_000_000, b in arb_base(), k in 0usize..12) {
            let d_hi = mu_distribution(&big(r), b, 16).unwrap();
            let point = d_hi.location(k);
            let (rt, r0) = (r / b as u64, (r % b as u64) as i64);
            let bi = b as i64;
            let lhs = mu_atom(&big(r), b, point).unwrap();
            let rhs = rational(bi - r0, bi) * mu_atom(&big(rt), b, point - r0).unwrap()
                + rational(r0, bi) * mu_atom(&big(rt + 1), b, point + bi - r0).unwrap();
            prop_assert_eq!(&lhs, &rhs);
            prop_assert_eq!(&lhs, &d_hi.atoms[k]);
        }

        #[test]
        fn reverse_property(r in 1u64..1_000_000, b in arb_base()) {
            let e = Expansion::from_u64(r, b).unwrap();
            let rev = reverse_expansion(&e);
            let a = distribution_of(&e, 20);
            let c = distribution_of(&rev, 20);
            prop_assert_eq!(a.atoms, c.atoms);
        }

        #[test]
        fn variance_matches_second_moment(r in 1u64..1_000_000_000, b in arb_base()) {
            let d = mu_distribution_eps(&big(r), b, 1e-20).unwrap();
            let head = d.head_moment(2);
            let tail = d.tail_moment_bound(2).unwrap();
            let v = variance_exact(&big(r), b).unwrap();
            prop_assert!(head <= v && v <= &head + &tail);
            prop_assert!(mean_check(&d).unwrap().contains(&Rational::zero()));
            prop_assert!(d.tail_mass <= d.tail_mass_bound().unwrap());
        }

        #[test]
        fn increment_bound(r in 1u64..u64::MAX / 2, b in arb_base()) {
            let diff = variance_exact(&big(r + 1), b).unwrap() - variance_exact(&big(r), b).unwrap();
            prop_assert!(diff.abs() <= rational(b as i64, 1));
        }

        #[test]
        fn closed_forms_agree(rhat in 0u64..100_000, m in 1u32..6, b in arb_base()) {
            let bm = big(b as u64).pow(m);
            let top = &bm * rhat + &bm - 1u32;
            prop_assert_eq!(variance_trailing_top_run(&big(rhat), m, b).unwrap(), variance_exact(&top, b).unwrap());
            let one = &bm * rhat + 1u32;
            prop_assert_eq!(variance_trailing_one(&big(rhat), m, b).unwrap(), variance_exact(&one, b).unwrap());
        }

        #[test]
        fn bounds_hold(r in 1u64.., b in arb_base()) {
            prop_assert!(check_variance_bounds(&big(r), b).unwrap().all_bounds_hold);
        }
    }
}
