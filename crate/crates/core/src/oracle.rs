//! Ground truth by counting integers.
//!
//! `μ^(r)(d)` is the natural density of `{n : s(n + r) - s(n) = d}`. Counting
//! `n < N` gives empirical densities; counting over the first `b^(ℓ+1) - r`
//! residues modulo `b^(ℓ+1)`, on each of which the variation is fixed,
//! gives a rational interval of width `r / b^(ℓ+1)` that must contain the
//! exact atom.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::digits::Expansion;
use crate::error::{Error, Result};
use crate::exactdist::{
    default_atom_cutoff, distribution_of, format_rational, mean_check, Rational, RationalInterval,
    DEFAULT_TAIL_EPS,
};

/// Digits of `n` and `n + r` advanced together one step at a time.
#[derive(Clone, Debug)]
pub struct DeltaScanner {
    base: u32,
    n: Vec<u32>,
    m: Vec<u32>,
    sum_n: i64,
    sum_m: i64,
}

impl DeltaScanner {
    pub fn new(r: &Expansion, start: u64) -> Result<Self> {
        let b = r.base();
        let n = Expansion::from_u64(start, b)?;
        let m = Expansion::new(&(r.value() + start), b)?;
        Ok(Self {
            base: b,
            sum_n: n.digit_sum() as i64,
            sum_m: m.digit_sum() as i64,
            n: n.digits().to_vec(),
            m: m.digits().to_vec(),
        })
    }

    /// `s(n + r) - s(n)` at the current `n`.
    pub fn delta(&self) -> i64 {
        self.sum_m - self.sum_n
    }

    fn bump(digits: &mut Vec<u32>, sum: &mut i64, base: u32) {
        for d in digits.iter_mut() {
            if *d + 1 < base {
                *d += 1;
                *sum += 1;
                return;
            }
            *sum -= i64::from(*d);
            *d = 0;
        }
        digits.push(1);
        *sum += 1;
    }

    pub fn advance(&mut self) {
        Self::bump(&mut self.n, &mut self.sum_n, self.base);
        Self::bump(&mut self.m, &mut self.sum_m, self.base);
    }
}

/// Counts of `s(n + r) - s(n)` over `n` in `[start, end)`, indexed by carry
/// count.
fn scan_range(r: &Expansion, start: u64, end: u64) -> Result<Vec<u64>> {
    let step = i64::from(r.base()) - 1;
    let top = r.digit_sum() as i64;
    let mut counts = Vec::new();
    if start >= end {
        return Ok(counts);
    }
    let mut scanner = DeltaScanner::new(r, start)?;
    for _ in start..end {
        let k = ((top - scanner.delta()) / step) as usize;
        if k >= counts.len() {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
        scanner.advance();
    }
    Ok(counts)
}

fn merge_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

const SCAN_CHUNK: u64 = 1 << 22;

/// Counts indexed by carry count over `n` in `[0, end)`, in parallel chunks.
fn scan_counts(r: &Expansion, end: u64) -> Result<Vec<u64>> {
    let chunks = end.div_ceil(SCAN_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| scan_range(r, c * SCAN_CHUNK, ((c + 1) * SCAN_CHUNK).min(end)))
        .try_reduce(Vec::new, |a, b| Ok(merge_counts(a, b)))
}

fn counts_by_value(r: &Expansion, by_k: &[u64]) -> BTreeMap<i64, u64> {
    let step = i64::from(r.base()) - 1;
    let top = r.digit_sum() as i64;
    by_k.iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, &c)| (top - k as i64 * step, c))
        .collect()
}

/// `|{n < N : s(n + r) - s(n) = d}|` for every `d` that occurs.
pub fn empirical_counts(r: &Expansion, n: u64) -> Result<BTreeMap<i64, u64>> {
    Ok(counts_by_value(r, &scan_counts(r, n)?))
}

/// `|{n < N : s(n + r) - s(n) = d}| / N`.
pub fn empirical_density(r: &Expansion, n: u64) -> Result<BTreeMap<i64, Rational>> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let denom = BigInt::from(n);
    Ok(empirical_counts(r, n)?
        .into_iter()
        .map(|(d, c)| (d, Rational::new(BigInt::from(c), denom.clone())))
        .collect())
}

/// Carry-count histogram over the levels `n < b^(ℓ+1) - r` of a tower.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TowerCounts {
    pub base: u32,
    pub level: u32,
    pub r: BigUint,
    pub s_r: u64,
    /// `b^(ℓ+1)`.
    pub levels: BigUint,
    /// `counts[k]` = number of counted levels where adding `r` makes `k` carries.
    pub counts: Vec<BigUint>,
}

fn tower_levels(r: &Expansion, level: u32) -> Result<BigUint> {
    let levels = num_traits::pow(BigUint::from(r.base()), level as usize + 1);
    if levels <= r.value() {
        return Err(Error::LevelTooSmall { level });
    }
    Ok(levels)
}

impl TowerCounts {
    fn from_small(r: &Expansion, level: u32, levels: BigUint, counts: Vec<u64>) -> Self {
        Self {
            base: r.base(),
            level,
            r: r.value(),
            s_r: r.digit_sum(),
            levels,
            counts: counts.into_iter().map(BigUint::from).collect(),
        }
    }

    fn index_of(&self, d: i64) -> Option<usize> {
        let gap = self.s_r as i64 - d;
        let step = i64::from(self.base) - 1;
        (gap >= 0 && gap % step == 0).then(|| (gap / step) as usize)
    }

    pub fn count_at(&self, d: i64) -> BigUint {
        self.index_of(d)
            .and_then(|k| self.counts.get(k).cloned())
            .unwrap_or_default()
    }

    fn interval(&self, c: BigUint) -> RationalInterval {
        let denom = BigInt::from(self.levels.clone());
        RationalInterval {
            lo: Rational::new(BigInt::from(c.clone()), denom.clone()),
            hi: Rational::new(BigInt::from(c + &self.r), denom),
        }
    }

    /// `[c / b^(ℓ+1), (c + r) / b^(ℓ+1)]` around `μ^(r)(d)`.
    pub fn enclosure(&self, d: i64) -> RationalInterval {
        self.interval(self.count_at(d))
    }

    /// Enclosure of the mass of all atoms with more than `k` carries.
    pub fn tail_enclosure(&self, k: usize) -> RationalInterval {
        let c = self.counts.iter().skip(k + 1).fold(BigUint::zero(), |acc, x| acc + x);
        self.interval(c)
    }
}

/// Tower counts from the carry automaton.
///
/// Reading `n` digit by digit from the bottom, the digits `x` with
/// `x + r_i + c >= b` number exactly `r_i + c`, independently of everything
/// else; `n < b^(ℓ+1) - r` means no carry leaves position `ℓ`.
pub fn tower_counts(r: &Expansion, level: u32) -> Result<TowerCounts> {
    let levels = tower_levels(r, level)?;
    let b = r.base();
    let width = level as usize + 2;
    // state[c][k]
    let mut state = [vec![BigUint::zero(); width], vec![BigUint::zero(); width]];
    state[0][0] = BigUint::from(1u32);
    for i in 0..=level as usize {
        let ri = r.digit(i);
        let mut next = [vec![BigUint::zero(); width], vec![BigUint::zero(); width]];
        for c in 0..2u32 {
            let carrying = ri + c;
            let staying = b - carrying;
            for k in 0..width {
                let v = &state[c as usize][k];
                if v.is_zero() {
                    continue;
                }
                if staying > 0 {
                    next[0][k] += v * staying;
                }
                if carrying > 0 && k + 1 < width {
                    next[1][k + 1] += v * carrying;
                }
            }
        }
        state = next;
    }
    let [mut counts, _] = state;
    while counts.len() > 1 && counts.last().is_some_and(Zero::is_zero) {
        counts.pop();
    }
    Ok(TowerCounts { base: b, level, r: r.value(), s_r: r.digit_sum(), levels, counts })
}

/// Tower counts by scanning every level.
pub fn tower_counts_by_scan(r: &Expansion, level: u32) -> Result<TowerCounts> {
    let levels = tower_levels(r, level)?;
    let end = (&levels - r.value())
        .to_u64()
        .ok_or_else(|| Error::InvalidArgument("too many levels to scan".into()))?;
    let counts = scan_counts(r, end)?;
    Ok(TowerCounts::from_small(r, level, levels, counts))
}

/// `s(n)` for all `n < len`, for many scans over the same range.
#[derive(Clone, Debug)]
pub struct DigitSumTable {
    base: u32,
    sums: Vec<u8>,
}

impl DigitSumTable {
    pub fn new(base: u32, len: usize) -> Result<Self> {
        crate::digits::check_base(base)?;
        let b = base as usize;
        let mut sums = vec![0u8; len];
        for n in 1..len {
            let s = usize::from(sums[n / b]) + n % b;
            sums[n] = u8::try_from(s).map_err(|_| Error::InvalidArgument("digit sum exceeds 255".into()))?;
        }
        Ok(Self { base, sums })
    }

    pub fn len(&self) -> usize {
        self.sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    /// Tower counts for `r` by scanning the table; needs `b^(ℓ+1) <= len`.
    pub fn tower_counts(&self, r: u64, level: u32) -> Result<TowerCounts> {
        let e = Expansion::from_u64(r, self.base)?;
        let levels = tower_levels(&e, level)?;
        let total = levels
            .to_usize()
            .filter(|&l| l <= self.sums.len())
            .ok_or_else(|| Error::InvalidArgument("table too short for this level".into()))?;
        let end = total - r as usize;
        let top = e.digit_sum() as i64;
        let step = i64::from(self.base) - 1;
        let r = r as usize;
        // Histograms over d + 255 so the index stays nonnegative; four of them
        // so consecutive increments do not wait on each other.
        let mut lanes = vec![[0u32; 512]; 4];
        let mut hist = vec![0u64; 512];
        let (lo, hi) = (&self.sums[..end], &self.sums[r..r + end]);
        for (lc, hc) in lo.chunks(1 << 24).zip(hi.chunks(1 << 24)) {
            let mut lq = lc.chunks_exact(4);
            let mut hq = hc.chunks_exact(4);
            for (l4, h4) in (&mut lq).zip(&mut hq) {
                for j in 0..4 {
                    lanes[j][usize::from(h4[j]) + 255 - usize::from(l4[j])] += 1;
                }
            }
            for (l, h) in lq.remainder().iter().zip(hq.remainder()) {
                lanes[0][usize::from(*h) + 255 - usize::from(*l)] += 1;
            }
            for lane in lanes.iter_mut() {
                for (acc, c) in hist.iter_mut().zip(lane.iter_mut()) {
                    *acc += u64::from(*c);
                    *c = 0;
                }
            }
        }
        let mut counts = Vec::new();
        for (idx, &c) in hist.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let k = ((top - (idx as i64 - 255)) / step) as usize;
            if k >= counts.len() {
                counts.resize(k + 1, 0);
            }
            counts[k] += c;
        }
        Ok(TowerCounts::from_small(&e, level, levels, counts))
    }
}

/// `[c / b^(ℓ+1), (c + r) / b^(ℓ+1)]`, which contains `μ^(r)(d)`.
pub fn tower_enclosure(r: &BigUint, base: u32, level: u32, d: i64) -> Result<RationalInterval> {
    let e = Expansion::new(r, base)?;
    Ok(tower_counts(&e, level)?.enclosure(d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CesaroFn {
    Identity,
    Square,
    Abs,
    Indicator(i64),
}

impl CesaroFn {
    fn eval(self, d: i64) -> BigInt {
        match self {
            Self::Identity => d.into(),
            Self::Square => (i128::from(d) * i128::from(d)).into(),
            Self::Abs => d.abs().into(),
            Self::Indicator(x) => i64::from(d == x).into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CesaroResult {
    /// `(1/N) Σ_{n<N} f(Δ^(r)(n))`.
    pub empirical: Rational,
    /// Enclosure of `E f(Δ^(r))`.
    pub exact: RationalInterval,
}

impl CesaroResult {
    /// Distance from the empirical average to the exact enclosure.
    pub fn error(&self) -> Rational {
        if self.empirical < self.exact.lo {
            &self.exact.lo - &self.empirical
        } else if self.empirical > self.exact.hi {
            &self.empirical - &self.exact.hi
        } else {
            Rational::zero()
        }
    }
}

/// Cesàro average of `f(Δ^(r)(n))` over `n < N` against its expectation.
pub fn cesaro_check(r: &Expansion, n: u64, f: CesaroFn) -> Result<CesaroResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let total = empirical_counts(r, n)?
        .into_iter()
        .fold(BigInt::zero(), |acc, (d, c)| acc + f.eval(d) * BigInt::from(c));
    let empirical = Rational::new(total, BigInt::from(n));

    let dist = distribution_of(r, default_atom_cutoff(r.len(), r.base(), DEFAULT_TAIL_EPS));
    let head = |g: &dyn Fn(i64) -> BigInt| -> Rational {
        dist.atoms
            .iter()
            .enumerate()
            .fold(Rational::zero(), |acc, (k, m)| acc + m * Rational::from_integer(g(dist.location(k))))
    };
    let exact = match f {
        CesaroFn::Identity => mean_check(&dist)?,
        CesaroFn::Square => {
            let h = dist.head_moment(2);
            RationalInterval { hi: &h + dist.tail_moment_bound(2)?, lo: h }
        }
        CesaroFn::Abs => {
            let h = head(&|d| d.abs().into());
            RationalInterval { hi: &h + dist.tail_moment_bound(1)?, lo: h }
        }
        CesaroFn::Indicator(x) => match dist.mass_at(x) {
            Some(m) => RationalInterval::point(m),
            None => RationalInterval { lo: Rational::zero(), hi: dist.tail_mass.clone() },
        },
    };
    Ok(CesaroResult { empirical, exact })
}

/// A CSV/JSON row of an oracle dump.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleRow {
    pub r: String,
    pub b: u32,
    pub level_or_n: String,
    pub d: i64,
    pub lo: String,
    pub hi: String,
}

impl OracleRow {
    pub fn enclosure(t: &TowerCounts, d: i64) -> Self {
        let i = t.enclosure(d);
        Self {
            r: t.r.to_string(),
            b: t.base,
            level_or_n: format!("l={}", t.level),
            d,
            lo: format_rational(&i.lo),
            hi: format_rational(&i.hi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digits::delta;
    use crate::exactdist::{mu_atom, rational};
    use proptest::prelude::*;

    fn exp(n: u64, b: u32) -> Expansion {
        Expansion::from_u64(n, b).unwrap()
    }

    fn naive_counts(r: u64, b: u32, end: u64) -> BTreeMap<i64, u64> {
        let mut m = BTreeMap::new();
        for n in 0..end {
            *m.entry(delta(&n.into(), &r.into(), b).unwrap()).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn scanner_matches_direct_evaluation() {
        for (r, b) in [(0u64, 2u32), (1, 2), (7, 10), (118, 2), (5900991, 10), (26, 3)] {
            assert_eq!(empirical_counts(&exp(r, b), 5000).unwrap(), naive_counts(r, b, 5000));
        }
        // Chunk boundaries.
        let e = exp(37, 3);
        let big = empirical_counts(&e, SCAN_CHUNK + 1234).unwrap();
        let mut scanner = DeltaScanner::new(&e, 0).unwrap();
        let mut direct = BTreeMap::new();
        for _ in 0..SCAN_CHUNK + 1234 {
            *direct.entry(scanner.delta()).or_insert(0u64) += 1;
            scanner.advance();
        }
        assert_eq!(big, direct);
    }

    #[test]
    fn density_examples() {
        let zero = empirical_density(&exp(0, 10), 1000).unwrap();
        assert_eq!(zero.len(), 1);
        assert_eq!(zero[&0], rational(1, 1));
        let one = empirical_density(&exp(1, 2), 1 << 20).unwrap();
        assert_eq!(one[&1], rational(1, 2));
        assert!(empirical_density(&exp(1, 2), 0).is_err());
    }

    #[test]
    fn density_within_one_sided_bound() {
        // N = b^7 is a full tower period, so both the density and the atom lie
        // in the same interval of width r/N.
        let e = exp(7, 10);
        let n = 10_000_000u64;
        let dens = empirical_density(&e, n).unwrap();
        for (d, q) in &dens {
            let m = mu_atom(&7u32.into(), 10, *d).unwrap();
            let tol = rational(7, 10_000_000);
            assert!(num_traits::Signed::abs(&(q - &m)) <= tol, "d={d}");
        }
    }

    #[test]
    fn enclosure_examples() {
        let t = tower_counts(&exp(1, 2), 2).unwrap();
        assert_eq!(t.count_at(1), BigUint::from(4u32));
        let i = t.enclosure(1);
        assert_eq!((i.lo.clone(), i.hi.clone()), (rational(1, 2), rational(5, 8)));
        assert!(i.contains(&rational(1, 2)));
        let z = tower_enclosure(&BigUint::zero(), 10, 0, 0).unwrap();
        assert_eq!((z.lo, z.hi), (rational(1, 1), rational(1, 1)));
        assert!(matches!(
            tower_enclosure(&BigUint::from(8u32), 2, 2, 0),
            Err(Error::LevelTooSmall { level: 2 })
        ));
    }

    #[test]
    fn automaton_scan_and_table_agree() {
        let table = DigitSumTable::new(3, 3usize.pow(9) + 1000).unwrap();
        for r in 0..300u64 {
            for level in 5..=8u32 {
                if 3u64.pow(level + 1) <= r {
                    continue;
                }
                let a = tower_counts(&exp(r, 3), level).unwrap();
                let s = tower_counts_by_scan(&exp(r, 3), level).unwrap();
                let t = table.tower_counts(r, level).unwrap();
                assert_eq!(a, s, "r={r} l={level}");
                assert_eq!(a, t, "r={r} l={level}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn enclosures_contain_atoms(r in 1u64..10_000, b in prop::sample::select(vec![2u32, 3, 10])) {
            let e = exp(r, b);
            // b^(ℓ+1) >= 10^6 r
            let mut level = 0u32;
            while BigUint::from(b).pow(level + 1) < BigUint::from(r) * 1_000_000u32 {
                level += 1;
            }
            let t = tower_counts(&e, level).unwrap();
            let dist = distribution_of(&e, e.len() + 30);
            for k in 0..dist.atoms.len() {
                let d = dist.location(k);
                let i = t.enclosure(d);
                prop_assert!(i.contains(&dist.atoms[k]), "d={}", d);
                prop_assert_eq!(i.width(), Rational::new(BigInt::from(r), BigInt::from(t.levels.clone())));
            }
        }

        #[test]
        fn nested_enclosures(r in 1u64..5000, b in prop::sample::select(vec![2u32, 3, 10]), extra in 0u32..4) {
            let e = exp(r, b);
            let mut level = 0u32;
            while BigUint::from(b).pow(level + 1) <= BigUint::from(r) {
                level += 1;
            }
            level += extra;
            let coarse = tower_counts(&e, level).unwrap();
            let fine = tower_counts(&e, level + 1).unwrap();
            for k in 0..coarse.counts.len() + 2 {
                let d = e.digit_sum() as i64 - k as i64 * (b as i64 - 1);
                let c = coarse.enclosure(d);
                let f = fine.enclosure(d);
                let w = c.width();
                prop_assert!(&c.lo - &w <= f.lo && f.hi <= &c.hi + &w);
                prop_assert!(f.lo <= c.hi && c.lo <= f.hi);
            }
        }
    }

    #[test]
    fn cesaro_examples() {
        let id = cesaro_check(&exp(5900991, 10), 100_000, CesaroFn::Identity).unwrap();
        assert!(id.exact.contains(&Rational::zero()));
        let sq = cesaro_check(&exp(3, 2), 1 << 16, CesaroFn::Square).unwrap();
        assert!(sq.exact.contains(&rational(3, 1)));
        assert!(sq.exact.width() < rational(1, 1_000_000_000));
        let e = exp(7, 10);
        let ind = cesaro_check(&e, 123_456, CesaroFn::Indicator(-2)).unwrap();
        let dens = empirical_density(&e, 123_456).unwrap();
        assert_eq!(ind.empirical, dens[&-2]);
        let ab = cesaro_check(&e, 10_000, CesaroFn::Abs).unwrap();
        assert!(ab.exact.lo > Rational::zero());
    }

    #[test]
    fn cesaro_averages_converge() {
        for (r, b, f) in [(7u64, 10u32, CesaroFn::Square), (5, 3, CesaroFn::Abs), (118, 2, CesaroFn::Indicator(0))] {
            let e = exp(r, b);
            let errs: Vec<Rational> =
                [10_000u64, 100_000, 1_000_000].iter().map(|&n| cesaro_check(&e, n, f).unwrap().error()).collect();
            assert!(&errs[2] * BigInt::from(5) <= errs[0], "r={r}: {errs:?}");
        }
    }
}
