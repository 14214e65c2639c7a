//! The block-wise process `X_1, ..., X_λ` and its mixing diagnostics.
//!
//! Splitting `r` into its nonzero blocks, most-significant first, gives
//! prefixes `0 = r[0] < r[1] < ... < r[λ] = r` and
//! `X_i = Δ^(r[i] - r[i-1]) ∘ T^(r[i-1])`, so that `Σ X_i = Δ^(r)`.
//! Each `X_i` has the law of the variation for its block alone, since the
//! odometer preserves the digit measure.

use rayon::prelude::*;
use serde::Serialize;

use crate::digits::{nonzero_block_ranges, Expansion};
use crate::error::{Error, Result};
use crate::exactdist::{distribution_of, rational_to_f64, AtomicDistribution};
use crate::odometer::{BadicDigits, LazyBadicSample};

/// Two-sided 99.9% normal quantile used for every Wilson interval.
pub const WILSON_Z: f64 = 3.290_526_731_491_926;

/// Conditioning events with fewer hits than this are not used.
pub const MIN_EVENT_HITS: u64 = 50;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MixingProcessSample {
    pub r: String,
    pub base: u32,
    pub values: Vec<i64>,
    pub total: i64,
}

/// The block increments of `r`, ready to be applied to many samples.
#[derive(Clone, Debug)]
pub struct BlockProcess {
    r: Expansion,
    ranges: Vec<(usize, usize)>,
}

impl BlockProcess {
    pub fn new(r: &Expansion) -> Result<Self> {
        Ok(Self { r: r.clone(), ranges: nonzero_block_ranges(r)? })
    }

    pub fn base(&self) -> u32 {
        self.r.base()
    }

    pub fn r(&self) -> &Expansion {
        &self.r
    }

    /// `λ(r)`, the number of values per sample.
    pub fn lambda(&self) -> usize {
        self.ranges.len()
    }

    /// `r[i] - r[i-1]` for `i = 1..=λ`: the `i`-th nonzero block in place.
    pub fn increment(&self, i: usize) -> Expansion {
        let (lo, hi) = self.ranges[i - 1];
        let mut digits = vec![0u32; hi];
        digits[lo..hi].copy_from_slice(&self.r.digits()[lo..hi]);
        Expansion::from_digits_le(digits, self.r.base()).expect("digits of a valid expansion")
    }

    /// Exact law of `X_i` with `extra` atoms beyond the block's top digit.
    pub fn law(&self, i: usize, extra: usize) -> AtomicDistribution {
        let inc = self.increment(i);
        let k = inc.len() + extra;
        distribution_of(&inc, k)
    }

    /// Writes `X_1..X_λ` for `x` into `out` and returns their sum.
    pub fn sample_into<X: BadicDigits>(&self, x: &mut X, cap: usize, out: &mut [i64]) -> Result<i64> {
        let b = self.base();
        if x.base() != b {
            return Err(Error::BaseMismatch { expected: b, got: x.base() });
        }
        let top = self.r.len();
        // Realized digits of x + r[i-1]; beyond `y.len()` they agree with x.
        let mut y: Vec<u32> = Vec::with_capacity(top + 8);
        let mut total = 0;
        for (slot, &(lo, hi)) in out.iter_mut().zip(&self.ranges) {
            let mut pos = lo;
            let mut carry = 0u32;
            let mut delta = 0i64;
            while pos < hi || carry == 1 {
                if pos >= top + cap {
                    return Err(Error::PropagationCapExceeded { top, cap });
                }
                while y.len() <= pos {
                    y.push(x.digit(y.len()));
                }
                let add = if pos < hi { self.r.digit(pos) } else { 0 };
                let before = y[pos];
                let s = before + add + carry;
                carry = u32::from(s >= b);
                y[pos] = if s >= b { s - b } else { s };
                delta += i64::from(y[pos]) - i64::from(before);
                pos += 1;
            }
            *slot = delta;
            total += delta;
        }
        Ok(total)
    }
}

/// `X_1..X_λ` and their total for one sample.
pub fn sample_process<X: BadicDigits>(r: &Expansion, x: &mut X, cap: usize) -> Result<MixingProcessSample> {
    let process = BlockProcess::new(r)?;
    let mut values = vec![0; process.lambda()];
    let total = process.sample_into(x, cap, &mut values)?;
    Ok(MixingProcessSample { r: r.value().to_string(), base: r.base(), values, total })
}

/// Process values for samples `0..n` of a seeded stream, one row of `λ`
/// values per sample.
#[derive(Clone, Debug)]
pub struct ProcessBatch {
    pub lambda: usize,
    pub samples: u64,
    values: Vec<i64>,
}

impl ProcessBatch {
    pub fn generate(process: &BlockProcess, samples: u64, seed: u64, cap: usize) -> Result<Self> {
        let lambda = process.lambda();
        let mut values = vec![0i64; lambda * samples as usize];
        values
            .par_chunks_mut(lambda)
            .enumerate()
            .try_for_each(|(i, row)| {
                let mut x = LazyBadicSample::new(process.base(), seed, i as u64);
                process.sample_into(&mut x, cap, row).map(|_| ())
            })?;
        Ok(Self { lambda, samples, values })
    }

    /// `X_1..X_λ` of sample `i`.
    pub fn row(&self, i: u64) -> &[i64] {
        let start = i as usize * self.lambda;
        &self.values[start..start + self.lambda]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i64]> {
        self.values.chunks(self.lambda)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    /// Block index, starting at 1.
    pub index: usize,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub order: u32,
    pub per_block: Vec<MomentEstimate>,
    pub max_mean: f64,
}

/// Empirical `E|X_i|^order` for every block, with standard errors.
pub fn moment_check(batch: &ProcessBatch, order: u32) -> Result<MomentReport> {
    if !(0..=4).contains(&order) {
        return Err(Error::InvalidArgument(format!("moment order {order} outside 0..=4")));
    }
    let n = batch.samples as f64;
    let mut per_block = Vec::with_capacity(batch.lambda);
    for i in 0..batch.lambda {
        // Exact sums keep the result independent of evaluation order.
        let (mut s1, mut s2) = (0u128, 0u128);
        for row in batch.rows() {
            let v = (row[i].unsigned_abs() as u128).pow(order);
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 as f64 / n;
        let var = (s2 as f64 / n - mean * mean).max(0.0);
        let std_error = if batch.samples > 1 { (var / (n - 1.0)).sqrt() } else { f64::INFINITY };
        per_block.push(MomentEstimate { index: i + 1, mean, std_error });
    }
    let max_mean = per_block.iter().map(|m| m.mean).fold(0.0, f64::max);
    Ok(MomentReport { order, per_block, max_mean })
}

/// `2((b-1)/b)^(k/2 - 1)`.
pub fn phi_bound(k: u32, base: u32) -> f64 {
    let q = f64::from(base - 1) / f64::from(base);
    2.0 * q.powf(f64::from(k) / 2.0 - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiHalfSums {
    pub phi_half: f64,
    pub phi_half_bar: f64,
}

/// `Φ_{1/2} = Σ_{k<=n} k·√φ(k)` with `φ(k)` replaced by `min(1, phi_bound)`,
/// and `max(√Φ_{1/2}, Φ_{1/2}²)`.
pub fn phi_half_sums(base: u32, n_terms: u32) -> PhiHalfSums {
    let phi_half: f64 = (1..=n_terms)
        .map(|k| f64::from(k) * phi_bound(k, base).min(1.0).sqrt())
        .sum();
    PhiHalfSums { phi_half, phi_half_bar: phi_half.sqrt().max(phi_half * phi_half) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Predicate {
    AtLeastMedian,
    EqualsMode,
    AtMostMinusOne,
    EqualsZero,
}

impl Predicate {
    pub const ALL: [Predicate; 4] =
        [Self::AtLeastMedian, Self::EqualsMode, Self::AtMostMinusOne, Self::EqualsZero];

    fn label(self) -> &'static str {
        match self {
            Self::AtLeastMedian => "ge_median",
            Self::EqualsMode => "eq_mode",
            Self::AtMostMinusOne => "le_neg1",
            Self::EqualsZero => "eq_zero",
        }
    }
}

/// Events `{X_i ∈ S}` on the `per_side` indices nearest the gap on each side,
/// together with all intersections of two such events on distinct indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EventFamily {
    pub per_side: usize,
}

impl Default for EventFamily {
    fn default() -> Self {
        Self { per_side: 2 }
    }
}

impl EventFamily {
    pub fn id(&self) -> String {
        let preds: Vec<&str> = Predicate::ALL.iter().map(|p| p.label()).collect();
        format!("near{}:{}", self.per_side, preds.join("+"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiEstimate {
    pub k: usize,
    pub p: usize,
    /// `max |P̂(B | A) - P̂(B)|` over the tested pairs.
    pub estimate: f64,
    /// Combined Wilson radius of the maximizing pair.
    pub ci: f64,
    pub bound: f64,
    pub samples: u64,
    pub event_family: String,
    pub pairs_tested: usize,
    /// Some pair has `|P̂(B | A) - P̂(B)| - ci > bound`.
    pub violated: bool,
}

/// A CSV/JSON row of the mixing report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiRow {
    pub r: String,
    pub b: u32,
    pub k: usize,
    pub p: usize,
    pub family_id: String,
    pub estimate: f64,
    pub ci: f64,
    pub bound: f64,
    pub violated: bool,
}

impl PhiRow {
    pub fn new(r: &Expansion, est: &PhiEstimate) -> Self {
        Self {
            r: r.value().to_string(),
            b: r.base(),
            k: est.k,
            p: est.p,
            family_id: est.event_family.clone(),
            estimate: est.estimate,
            ci: est.ci,
            bound: est.bound,
            violated: est.violated,
        }
    }
}

/// Half-width of the 99.9% Wilson interval measured from the point estimate.
pub fn wilson_radius(hits: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (p - (center - half)).max(center + half - p)
}

/// Median and mode of a block law, used to define the event thresholds.
fn thresholds(law: &AtomicDistribution) -> (i64, i64) {
    let masses: Vec<f64> = law.atoms.iter().map(rational_to_f64).collect();
    let mode_k = masses
        .iter()
        .enumerate()
        .fold(0, |best, (k, &m)| if m > masses[best] { k } else { best });
    // Atoms are listed from the largest value down; accumulate from the bottom.
    let mut below = rational_to_f64(&law.tail_mass);
    let mut median = law.location(law.cutoff());
    for k in (0..masses.len()).rev() {
        below += masses[k];
        if below >= 0.5 {
            median = law.location(k);
            break;
        }
    }
    (median, law.location(mode_k))
}

struct SideEvents {
    indices: Vec<usize>,
    // (median, mode) per index
    thresholds: Vec<(i64, i64)>,
    // Conjunctions of (index slot, predicate) pairs.
    events: Vec<Vec<(usize, Predicate)>>,
}

impl SideEvents {
    fn new(indices: Vec<usize>, process: &BlockProcess) -> Self {
        let thresholds = indices.iter().map(|&i| thresholds(&process.law(i, 40))).collect();
        let mut events = Vec::new();
        for slot in 0..indices.len() {
            for p in Predicate::ALL {
                events.push(vec![(slot, p)]);
            }
        }
        for s1 in 0..indices.len() {
            for s2 in s1 + 1..indices.len() {
                for p1 in Predicate::ALL {
                    for p2 in Predicate::ALL {
                        events.push(vec![(s1, p1), (s2, p2)]);
                    }
                }
            }
        }
        Self { indices, thresholds, events }
    }

    fn mask(&self, row: &[i64]) -> u64 {
        let holds = |slot: usize, p: Predicate| {
            let v = row[self.indices[slot] - 1];
            let (median, mode) = self.thresholds[slot];
            match p {
                Predicate::AtLeastMedian => v >= median,
                Predicate::EqualsMode => v == mode,
                Predicate::AtMostMinusOne => v <= -1,
                Predicate::EqualsZero => v == 0,
            }
        };
        self.events.iter().enumerate().fold(0u64, |m, (e, conj)| {
            if conj.iter().all(|&(s, p)| holds(s, p)) {
                m | (1 << e)
            } else {
                m
            }
        })
    }
}

#[derive(Clone)]
struct Tally {
    na: Vec<u64>,
    nb: Vec<u64>,
    nab: Vec<u64>,
}

impl Tally {
    fn new(a: usize, b: usize) -> Self {
        Self { na: vec![0; a], nb: vec![0; b], nab: vec![0; a * b] }
    }

    fn merge(mut self, other: Self) -> Self {
        for (x, y) in self.na.iter_mut().zip(other.na) {
            *x += y;
        }
        for (x, y) in self.nb.iter_mut().zip(other.nb) {
            *x += y;
        }
        for (x, y) in self.nab.iter_mut().zip(other.nab) {
            *x += y;
        }
        self
    }
}

fn for_each_bit(mut m: u64, mut f: impl FnMut(usize)) {
    while m != 0 {
        f(m.trailing_zeros() as usize);
        m &= m - 1;
    }
}

/// Estimates `φ(k)` at split point `p` from a batch of process samples.
///
/// The past is `X_1..X_p` and the future `X_{p+k}..X_λ`; indices are 1-based.
/// The estimate is a lower bound for the true coefficient, since only a
/// finite event family is searched.
pub fn estimate_phi_batch(
    process: &BlockProcess,
    batch: &ProcessBatch,
    k: usize,
    p: usize,
    family: EventFamily,
) -> Result<PhiEstimate> {
    let lambda = process.lambda();
    if p == 0 || k == 0 || family.per_side == 0 {
        return Err(Error::InvalidArgument("p, k and the family size must be at least 1".into()));
    }
    if batch.lambda != lambda {
        return Err(Error::InvalidArgument("batch was generated for a different r".into()));
    }
    let bound = phi_bound(k as u32, process.base());
    let n = batch.samples;
    let empty = |pairs_tested| PhiEstimate {
        k,
        p,
        estimate: 0.0,
        ci: 0.0,
        bound,
        samples: n,
        event_family: family.id(),
        pairs_tested,
        violated: false,
    };
    if k >= lambda || p + k > lambda {
        return Ok(empty(0));
    }
    if p > lambda {
        return Err(Error::InvalidArgument(format!("p = {p} exceeds λ = {lambda}")));
    }
    let past: Vec<usize> = (p.saturating_sub(family.per_side - 1).max(1)..=p).rev().collect();
    let future: Vec<usize> = (p + k..=(p + k + family.per_side - 1).min(lambda)).collect();
    let a_side = SideEvents::new(past, process);
    let b_side = SideEvents::new(future, process);
    let (na, nb) = (a_side.events.len(), b_side.events.len());

    let tally = (0..n)
        .into_par_iter()
        .fold(
            || Tally::new(na, nb),
            |mut t, i| {
                let row = batch.row(i);
                let ma = a_side.mask(row);
                let mb = b_side.mask(row);
                for_each_bit(ma, |a| t.na[a] += 1);
                for_each_bit(mb, |b| t.nb[b] += 1);
                for_each_bit(ma, |a| for_each_bit(mb, |b| t.nab[a * nb + b] += 1));
                t
            },
        )
        .reduce(|| Tally::new(na, nb), Tally::merge);

    let mut best = empty(0);
    let mut any_conditioning = false;
    let mut best_diff = -1.0;
    for a in 0..na {
        let hits_a = tally.na[a];
        if hits_a < MIN_EVENT_HITS {
            continue;
        }
        any_conditioning = true;
        for b in 0..nb {
            let conditional = tally.nab[a * nb + b] as f64 / hits_a as f64;
            let marginal = tally.nb[b] as f64 / n as f64;
            let diff = (conditional - marginal).abs();
            let ci = wilson_radius(tally.nab[a * nb + b], hits_a) + wilson_radius(tally.nb[b], n);
            best.pairs_tested += 1;
            if diff - ci > bound {
                best.violated = true;
            }
            if diff > best_diff {
                best_diff = diff;
                best.estimate = diff;
                best.ci = ci;
            }
        }
    }
    if !any_conditioning {
        return Err(Error::InsufficientSamples { min_hits: MIN_EVENT_HITS, samples: n });
    }
    Ok(best)
}

/// Samples `n` process realizations and estimates `φ(k)` at split point `p`.
pub fn estimate_phi(
    r: &Expansion,
    k: usize,
    p: usize,
    family: EventFamily,
    n: u64,
    seed: u64,
    cap: usize,
) -> Result<PhiEstimate> {
    let process = BlockProcess::new(r)?;
    let batch = ProcessBatch::generate(&process, n, seed, cap)?;
    estimate_phi_batch(&process, &batch, k, p, family)
}
