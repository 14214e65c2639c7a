use std::path::Path;

use digitdrift_core::digits::Expansion;
use digitdrift_core::BigUint;
use num_traits::Zero;

use crate::failure::Failure;

/// Parses `r` as a decimal integer, or as most-significant-first digits in
/// `base` when `radix` is set.
pub fn parse_r(text: &str, base: u32, radix: bool) -> Result<Expansion, Failure> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Failure::usage("r is empty"));
    }
    if !radix {
        let r: BigUint = text
            .parse()
            .map_err(|_| Failure::usage(format!("not a nonnegative integer: {text:?}")))?;
        return Ok(Expansion::new(&r, base)?);
    }
    let digits: Vec<u32> = if text.contains(',') {
        text.split(',')
            .map(|d| d.trim().parse::<u32>().map_err(|_| Failure::usage(format!("bad digit {d:?}"))))
            .collect::<Result<_, _>>()?
    } else {
        if base > 36 {
            return Err(Failure::usage("bases above 36 need comma-separated digits"));
        }
        text.chars()
            .map(|c| c.to_digit(36).ok_or_else(|| Failure::usage(format!("bad digit {c:?}"))))
            .collect::<Result<_, _>>()?
    };
    Ok(Expansion::from_digits_be(&digits, base)?)
}

/// `a..b`, both ends included.
pub fn parse_range(text: &str) -> Result<(BigUint, BigUint), Failure> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| Failure::usage(format!("expected a range a..b, got {text:?}")))?;
    let a: BigUint = a.trim().parse().map_err(|_| Failure::usage(format!("bad range start {a:?}")))?;
    let b: BigUint = b.trim().parse().map_err(|_| Failure::usage(format!("bad range end {b:?}")))?;
    if a > b {
        return Err(Failure::usage("empty range"));
    }
    if a.is_zero() {
        return Err(Failure::usage("r = 0 has no blocks"));
    }
    Ok((a, b))
}

/// `pattern@m1,m2,...`
pub fn parse_family(text: &str) -> Result<(String, Vec<usize>), Failure> {
    let (pattern, ms) = text
        .split_once('@')
        .ok_or_else(|| Failure::usage(format!("expected pattern@m1,m2,..., got {text:?}")))?;
    let repeats: Vec<usize> = ms
        .split(',')
        .filter(|m| !m.trim().is_empty())
        .map(|m| m.trim().parse().map_err(|_| Failure::usage(format!("bad repeat count {m:?}"))))
        .collect::<Result<_, _>>()?;
    if pattern.is_empty() || repeats.is_empty() || repeats.contains(&0) {
        return Err(Failure::usage("the family is empty"));
    }
    Ok((pattern.to_string(), repeats))
}

/// One r per line; blank lines and `#` comments are skipped.
pub fn read_list(path: &Path, base: u32, radix: bool) -> Result<Vec<Expansion>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| parse_r(l, base, radix))
        .collect()
}
