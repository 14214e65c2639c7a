use std::io::Write;

use digitdrift_core::digits::{reverse_expansion, Expansion};
use digitdrift_core::exactdist::{check_variance_bounds, distribution_of, format_rational, rational, variance_of};
use digitdrift_core::oracle::tower_counts;
use digitdrift_core::{BigUint, Rational};
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Check, VerifyArgs};
use crate::failure::Failure;
use crate::input::parse_range;
use crate::report::write_rows;
use crate::Context;

/// Atoms compared by the reverse check.
const REVERSE_ATOMS: usize = 40;
/// Atoms beyond the digit count compared by the recursion and enclosure checks.
const EXTRA_ATOMS: usize = 10;
/// Tower levels beyond the digit count, so that `b^(level+1) >= 10^6 · r`.
fn extra_levels(base: u32) -> u32 {
    (6.0 / f64::from(base).log10()).ceil() as u32
}

#[derive(Clone, Debug, Serialize)]
struct Witness {
    check: &'static str,
    r: String,
    b: u32,
    d: Option<i64>,
    lhs: String,
    rhs: String,
}

pub fn run(ctx: &Context, args: &VerifyArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let rs = targets(args)?;
    let mut checks = args.checks.clone();
    checks.sort();
    checks.dedup();
    let witnesses: Vec<Witness> = rs
        .par_iter()
        .map(|r| {
            let e = Expansion::new(r, args.base)?;
            let mut found = Vec::new();
            for &c in &checks {
                found.extend(run_check(c, &e));
            }
            Ok(found)
        })
        .collect::<Result<Vec<_>, Failure>>()?
        .into_iter()
        .flatten()
        .collect();
    write_rows(out, ctx.format, &witnesses)?;
    let names: Vec<&str> = checks.iter().map(|c| c.name()).collect();
    eprintln!("checked {} values of r ({}): {} violations", rs.len(), names.join(","), witnesses.len());
    if witnesses.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("{} invariant violations", witnesses.len())))
    }
}

fn targets(args: &VerifyArgs) -> Result<Vec<BigUint>, Failure> {
    if args.base < 2 {
        return Err(digitdrift_core::Error::InvalidBase(args.base).into());
    }
    if let Some(count) = args.random {
        let digits = args.digits.unwrap_or(0);
        if digits == 0 {
            return Err(Failure::usage("--digits must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        return Ok((0..count)
            .map(|_| {
                let mut ds: Vec<u32> = (0..digits).map(|_| rng.gen_range(0..args.base)).collect();
                ds[digits - 1] = rng.gen_range(1..args.base);
                Expansion::from_digits_le(ds, args.base).expect("digits below the base").value()
            })
            .collect());
    }
    let (a, b) = parse_range(args.range.as_deref().unwrap_or_default())?;
    let len = (&b - &a + BigUint::one())
        .to_usize()
        .filter(|&n| n <= 100_000_000)
        .ok_or_else(|| Failure::usage("range too large"))?;
    let mut out = Vec::with_capacity(len);
    let mut r = a;
    while r <= b {
        out.push(r.clone());
        r += 1u32;
    }
    Ok(out)
}

fn run_check(check: Check, e: &Expansion) -> Vec<Witness> {
    let witness = |d: Option<i64>, lhs: &Rational, rhs: &Rational| Witness {
        check: check.name(),
        r: e.value().to_string(),
        b: e.base(),
        d,
        lhs: format_rational(lhs),
        rhs: format_rational(rhs),
    };
    match check {
        Check::Bounds => {
            let rep = check_variance_bounds(&e.value(), e.base()).expect("r >= 1 in a valid base");
            if rep.all_bounds_hold {
                vec![]
            } else {
                let lo = rep.lower_bound.clone().max(rep.lambda_lower.clone());
                let hi = rep.upper_bound.clone().min(rep.lambda_upper.clone());
                vec![witness(None, &rep.variance, &if rep.variance < lo { lo } else { hi })]
            }
        }
        Check::Reverse => {
            let a = distribution_of(e, REVERSE_ATOMS - 1);
            let b = distribution_of(&reverse_expansion(e), REVERSE_ATOMS - 1);
            a.atoms
                .iter()
                .zip(&b.atoms)
                .enumerate()
                .filter(|(_, (x, y))| x != y)
                .map(|(k, (x, y))| witness(Some(a.location(k)), x, y))
                .collect()
        }
        Check::Recursion => recursion(e, &witness),
        Check::Enclosure => {
            let dist = distribution_of(e, e.len() + EXTRA_ATOMS);
            let level = (e.len() as u32).saturating_sub(1) + extra_levels(e.base());
            let tower = tower_counts(e, level).expect("valid expansion");
            (0..dist.atoms.len())
                .filter_map(|k| {
                    let d = dist.location(k);
                    let enc = tower.enclosure(d);
                    (!enc.contains(&dist.atoms[k])).then(|| {
                        let outside = if dist.atoms[k] < enc.lo { enc.lo } else { enc.hi };
                        witness(Some(d), &dist.atoms[k], &outside)
                    })
                })
                .collect()
        }
    }
}

/// With `r = b·q + d₀`: `μ^(r)(t) = (b - d₀)/b · μ^(q)(t - d₀) + d₀/b · μ^(q+1)(t - d₀ + b)`
/// atom by atom, and `Var(r) = (b - d₀)/b · Var(q) + d₀/b · Var(q + 1) + d₀(b - d₀)`.
fn recursion(e: &Expansion, witness: &dyn Fn(Option<i64>, &Rational, &Rational) -> Witness) -> Vec<Witness> {
    let b = e.base();
    let bi = i64::from(b);
    let r = e.value();
    let d0 = e.digit(0);
    let q = Expansion::new(&(&r / b), b).expect("valid base");
    let q1 = Expansion::new(&(&r / b + 1u32), b).expect("valid base");
    let k = e.len() + EXTRA_ATOMS;
    let dist = distribution_of(e, k);
    let lower = distribution_of(&q, k + 2);
    let upper = distribution_of(&q1, k + 2);
    let w_lo = rational(bi - i64::from(d0), bi);
    let w_hi = rational(i64::from(d0), bi);
    let mut found = Vec::new();
    for (i, m) in dist.atoms.iter().enumerate() {
        let t = dist.location(i);
        let d0 = i64::from(d0);
        if let (Some(a), Some(c)) = (lower.mass_at(t - d0), upper.mass_at(t - d0 + bi)) {
            let rhs = &w_lo * a + &w_hi * c;
            if *m != rhs {
                found.push(witness(Some(t), m, &rhs));
            }
        }
    }
    let v = variance_of(e);
    let rhs = &w_lo * variance_of(&q) + &w_hi * variance_of(&q1)
        + rational(i64::from(d0) * (bi - i64::from(d0)), 1);
    if v != rhs {
        found.push(witness(None, &v, &rhs));
    }
    found
}
