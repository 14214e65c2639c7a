//! Base-`b` expansions and the combinatorics of adding a fixed integer.
//!
//! Digits are stored least-significant first. Anything user facing
//! (`Display`, block lists) is most-significant first, the way numbers are
//! usually written.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// A canonical base-`b` digit string. Zero is the empty string.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Expansion {
    base: u32,
    digits: Vec<u32>,
}

pub(crate) fn check_base(base: u32) -> Result<()> {
    if base < 2 {
        Err(Error::InvalidBase(base))
    } else {
        Ok(())
    }
}

impl Expansion {
    pub fn new(n: &BigUint, base: u32) -> Result<Self> {
        check_base(base)?;
        if n.is_zero() {
            return Ok(Self { base, digits: Vec::new() });
        }
        let digits = if base <= 256 {
            n.to_radix_le(base).into_iter().map(u32::from).collect()
        } else {
            let mut digits = Vec::new();
            let mut rest = n.clone();
            let divisor = BigUint::from(base);
            while !rest.is_zero() {
                let (q, d) = rest.div_rem(&divisor);
                digits.push(d.to_u32().expect("remainder below base"));
                rest = q;
            }
            digits
        };
        Ok(Self { base, digits })
    }

    pub fn from_u64(n: u64, base: u32) -> Result<Self> {
        check_base(base)?;
        let mut digits = Vec::new();
        let mut rest = n;
        let b = u64::from(base);
        while rest > 0 {
            digits.push((rest % b) as u32);
            rest /= b;
        }
        Ok(Self { base, digits })
    }

    /// Builds an expansion from least-significant-first digits, dropping
    /// most-significant zeros.
    pub fn from_digits_le(mut digits: Vec<u32>, base: u32) -> Result<Self> {
        check_base(base)?;
        if let Some(&digit) = digits.iter().find(|&&d| d >= base) {
            return Err(Error::InvalidDigit { digit, base });
        }
        while digits.last() == Some(&0) {
            digits.pop();
        }
        Ok(Self { base, digits })
    }

    /// Builds an expansion from digits written most-significant first.
    pub fn from_digits_be(digits: &[u32], base: u32) -> Result<Self> {
        Self::from_digits_le(digits.iter().rev().copied().collect(), base)
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    /// Digits, least-significant first.
    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// Digit at position `i`, zero beyond the top digit.
    pub fn digit(&self, i: usize) -> u32 {
        self.digits.get(i).copied().unwrap_or(0)
    }

    /// Number of digits; zero for the value zero.
    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_zero(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn value(&self) -> BigUint {
        if self.base <= 256 {
            let bytes: Vec<u8> = self.digits.iter().map(|&d| d as u8).collect();
            BigUint::from_radix_le(&bytes, self.base).unwrap_or_default()
        } else {
            self.digits
                .iter()
                .rev()
                .fold(BigUint::zero(), |acc, &d| acc * self.base + d)
        }
    }

    pub fn digit_sum(&self) -> u64 {
        self.digits.iter().map(|&d| u64::from(d)).sum()
    }
}

impl fmt::Display for Expansion {
    /// Most-significant digit first. Bases up to 36 use one character per
    /// digit, larger bases a dot-separated list.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.digits.is_empty() {
            return f.write_str("0");
        }
        if self.base <= 36 {
            for &d in self.digits.iter().rev() {
                let c = std::char::from_digit(d, self.base).expect("digit below base");
                write!(f, "{c}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.digits.iter().rev().map(u32::to_string).collect();
            f.write_str(&parts.join("."))
        }
    }
}

pub fn expand(n: &BigUint, base: u32) -> Result<Expansion> {
    Expansion::new(n, base)
}

/// `s(n)`: the sum of the digits.
pub fn digit_sum(e: &Expansion) -> u64 {
    e.digit_sum()
}

/// `s(n + r) - s(n)`.
pub fn delta(n: &BigUint, r: &BigUint, base: u32) -> Result<i64> {
    let before = Expansion::new(n, base)?.digit_sum();
    let after = Expansion::new(&(n + r), base)?.digit_sum();
    Ok(after as i64 - before as i64)
}

/// Number of carries produced by the schoolbook addition `n + r`.
pub fn carry_count(n: &BigUint, r: &BigUint, base: u32) -> Result<u64> {
    let n = Expansion::new(n, base)?;
    let r = Expansion::new(r, base)?;
    let width = n.len().max(r.len());
    let mut carry = 0u32;
    let mut carries = 0u64;
    for i in 0..width {
        let sum = n.digit(i) + r.digit(i) + carry;
        carry = u32::from(sum >= base);
        carries += u64::from(carry);
    }
    Ok(carries)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "digit")]
pub enum BlockKind {
    /// A maximal run of zeros.
    Zero,
    /// A maximal run of the top digit `b - 1`.
    TopDigit,
    /// One digit strictly between `0` and `b - 1`.
    Single(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Block {
    pub kind: BlockKind,
    pub len: usize,
}

/// The blocks of an expansion, most-significant first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockDecomposition {
    pub blocks: Vec<Block>,
    /// Number of blocks.
    pub rho: usize,
    /// Number of blocks that are not runs of zeros.
    pub lambda: usize,
}

impl BlockDecomposition {
    pub fn nonzero_blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(|b| b.kind != BlockKind::Zero)
    }
}

fn kind_of(d: u32, base: u32) -> BlockKind {
    if d == 0 {
        BlockKind::Zero
    } else if d == base - 1 {
        BlockKind::TopDigit
    } else {
        BlockKind::Single(d)
    }
}

pub fn decompose_blocks(e: &Expansion) -> Result<BlockDecomposition> {
    if e.is_zero() {
        return Err(Error::ZeroHasNoBlocks);
    }
    let mut blocks: Vec<Block> = Vec::new();
    for &d in e.digits.iter().rev() {
        let kind = kind_of(d, e.base);
        match blocks.last_mut() {
            Some(last) if last.kind == kind && !matches!(kind, BlockKind::Single(_)) => {
                last.len += 1
            }
            _ => blocks.push(Block { kind, len: 1 }),
        }
    }
    let rho = blocks.len();
    let lambda = blocks.iter().filter(|b| b.kind != BlockKind::Zero).count();
    Ok(BlockDecomposition { blocks, rho, lambda })
}

/// Reverses the digit string and drops the zeros that end up on top.
pub fn reverse_expansion(e: &Expansion) -> Expansion {
    let mut digits = e.digits.clone();
    digits.reverse();
    while digits.last() == Some(&0) {
        digits.pop();
    }
    Expansion { base: e.base, digits }
}

/// Digit ranges `[lo, hi)` (least-significant positions) of the nonzero
/// blocks, listed most-significant block first.
pub(crate) fn nonzero_block_ranges(e: &Expansion) -> Result<Vec<(usize, usize)>> {
    let decomposition = decompose_blocks(e)?;
    let mut ranges = Vec::with_capacity(decomposition.lambda);
    let mut hi = e.len();
    for block in &decomposition.blocks {
        let lo = hi - block.len;
        if block.kind != BlockKind::Zero {
            ranges.push((lo, hi));
        }
        hi = lo;
    }
    Ok(ranges)
}

/// `r[0], ..., r[λ]`: `r[i]` keeps the first `i` nonzero blocks (counted
/// from the most-significant end) and replaces the others by zeros.
pub fn block_prefix_integers(e: &Expansion) -> Result<Vec<BigUint>> {
    let ranges = nonzero_block_ranges(e)?;
    let mut digits = vec![0u32; e.len()];
    let mut out = Vec::with_capacity(ranges.len() + 1);
    out.push(BigUint::zero());
    for (lo, hi) in ranges {
        digits[lo..hi].copy_from_slice(&e.digits[lo..hi]);
        out.push(Expansion::from_digits_le(digits.clone(), e.base)?.value());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    fn exp(n: u64, b: u32) -> Expansion {
        Expansion::from_u64(n, b).unwrap()
    }

    #[test]
    fn expand_examples() {
        assert!(expand(&big(0), 10).unwrap().digits().is_empty());
        assert_eq!(expand(&big(118), 2).unwrap().digits(), &[0, 1, 1, 0, 1, 1, 1]);
        assert_eq!(
            expand(&big(5900991), 10).unwrap().digits(),
            &[1, 9, 9, 0, 0, 9, 5]
        );
        assert!(matches!(expand(&big(3), 1), Err(Error::InvalidBase(1))));
        assert_eq!(exp(118, 2).to_string(), "1110110");
    }

    #[test]
    fn large_base_round_trip() {
        let n = BigUint::parse_bytes(b"123456789012345678901234567890", 10).unwrap();
        let e = expand(&n, 1000).unwrap();
        assert_eq!(e.digits()[0], 890);
        assert_eq!(e.value(), n);
    }

    #[test]
    fn digit_sum_examples() {
        assert_eq!(digit_sum(&exp(0, 10)), 0);
        assert_eq!(digit_sum(&exp(118, 2)), 5);
        assert_eq!(digit_sum(&exp(999, 10)), 27);
    }

    #[test]
    fn delta_and_carries_examples() {
        assert_eq!(delta(&big(5), &big(7), 10).unwrap(), -2);
        assert_eq!(delta(&big(12345), &big(0), 7).unwrap(), 0);
        assert_eq!(delta(&big(3), &big(1), 2).unwrap(), -1);
        assert_eq!(carry_count(&big(5), &big(7), 10).unwrap(), 1);
        assert_eq!(carry_count(&big(98765), &big(0), 10).unwrap(), 0);
        assert_eq!(carry_count(&big(3), &big(1), 2).unwrap(), 2);
    }

    fn block(kind: BlockKind, len: usize) -> Block {
        Block { kind, len }
    }

    #[test]
    fn block_examples() {
        let d = decompose_blocks(&exp(118, 2)).unwrap();
        assert_eq!(
            d.blocks,
            vec![
                block(BlockKind::TopDigit, 3),
                block(BlockKind::Zero, 1),
                block(BlockKind::TopDigit, 2),
                block(BlockKind::Zero, 1)
            ]
        );
        assert_eq!((d.rho, d.lambda), (4, 2));

        let d = decompose_blocks(&exp(5900991, 10)).unwrap();
        assert_eq!(
            d.blocks,
            vec![
                block(BlockKind::Single(5), 1),
                block(BlockKind::TopDigit, 1),
                block(BlockKind::Zero, 2),
                block(BlockKind::TopDigit, 2),
                block(BlockKind::Single(1), 1)
            ]
        );
        assert_eq!((d.rho, d.lambda), (5, 4));

        let d = decompose_blocks(&exp(7, 2)).unwrap();
        assert_eq!(d.blocks, vec![block(BlockKind::TopDigit, 3)]);
        assert_eq!((d.rho, d.lambda), (1, 1));

        assert!(matches!(decompose_blocks(&exp(0, 3)), Err(Error::ZeroHasNoBlocks)));
    }

    #[test]
    fn adjacent_single_digits_are_separate_blocks() {
        let d = decompose_blocks(&exp(4455, 10)).unwrap();
        assert_eq!(d.rho, 4);
        assert_eq!(d.lambda, 4);
    }

    #[test]
    fn reverse_examples() {
        assert_eq!(reverse_expansion(&exp(6, 2)), exp(3, 2));
        assert_eq!(reverse_expansion(&exp(12321, 10)), exp(12321, 10));
        assert_eq!(reverse_expansion(&exp(100, 10)), exp(1, 10));
        assert_eq!(reverse_expansion(&exp(0, 10)), exp(0, 10));
    }

    #[test]
    fn prefix_integer_examples() {
        let p = block_prefix_integers(&exp(5900991, 10)).unwrap();
        assert_eq!(p, vec![big(0), big(5000000), big(5900000), big(5900990), big(5900991)]);
        assert_eq!(block_prefix_integers(&exp(700, 10)).unwrap(), vec![big(0), big(700)]);
        assert_eq!(
            block_prefix_integers(&exp(118, 2)).unwrap(),
            vec![big(0), big(112), big(118)]
        );
        assert!(block_prefix_integers(&exp(0, 2)).is_err());
    }

    fn arb_biguint(bits: usize) -> impl Strategy<Value = BigUint> {
        prop::collection::vec(any::<u32>(), bits / 32).prop_map(BigUint::new)
    }

    fn arb_base() -> impl Strategy<Value = u32> {
        prop::sample::select(vec![2u32, 3, 10, 16])
    }

    proptest! {
        #[test]
        fn round_trip(n in arb_biguint(256), b in arb_base()) {
            let e = expand(&n, b).unwrap();
            prop_assert_eq!(e.value(), n);
            prop_assert!(e.digits().iter().all(|&d| d < b));
            prop_assert!(e.digits().last() != Some(&0));
        }

        #[test]
        fn carry_identity(n in arb_biguint(128), r in arb_biguint(96), b in arb_base()) {
            let sr = expand(&r, b).unwrap().digit_sum() as i64;
            let c = carry_count(&n, &r, b).unwrap() as i64;
            prop_assert_eq!(delta(&n, &r, b).unwrap(), sr - c * (b as i64 - 1));
        }

        #[test]
        fn cocycle(n in arb_biguint(128), t in arb_biguint(64), u in arb_biguint(64), b in arb_base()) {
            let lhs = delta(&n, &(&t + &u), b).unwrap();
            let rhs = delta(&n, &t, b).unwrap() + delta(&(&n + &t), &u, b).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn block_partition(r in 1u64.., b in arb_base()) {
            let e = exp(r, b);
            let d = decompose_blocks(&e).unwrap();
            prop_assert_eq!(d.blocks.iter().map(|b| b.len).sum::<usize>(), e.len());
            prop_assert!(d.lambda <= d.rho && d.rho <= 2 * d.lambda);
            for pair in d.blocks.windows(2) {
                let same_run = pair[0].kind == pair[1].kind
                    && matches!(pair[0].kind, BlockKind::Zero | BlockKind::TopDigit);
                prop_assert!(!same_run);
            }
            let prefixes = block_prefix_integers(&e).unwrap();
            prop_assert_eq!(prefixes.len(), d.lambda + 1);
            prop_assert_eq!(prefixes.last().unwrap(), &BigUint::from(r));
        }

        #[test]
        fn reverse_is_involution_on_units_digit_nonzero(r in 1u64.., b in arb_base()) {
            prop_assume!(r % b as u64 != 0);
            let e = exp(r, b);
            prop_assert_eq!(reverse_expansion(&reverse_expansion(&e)), e);
        }
    }
}
