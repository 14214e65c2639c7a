use std::fs::File;
use std::io::{BufWriter, Write};

use digitdrift_core::cltdiag::{family_member, pattern_family, rate_report, FamilyMember, RateRow};
use serde::Serialize;

use crate::args::CltArgs;
use crate::failure::Failure;
use crate::input::{parse_family, read_list};
use crate::report::{both, write_rows};
use crate::Context;

#[derive(Serialize)]
struct CltRow {
    r: String,
    base: u32,
    rho: usize,
    lambda: usize,
    variance: String,
    variance_decimal: String,
    ks_lo: f64,
    ks_hi: f64,
    ks_times_rho_eighth: f64,
    smooth_gap: f64,
    smooth_gap_times_sqrt_rho: f64,
}

impl From<&RateRow> for CltRow {
    fn from(row: &RateRow) -> Self {
        let (variance, variance_decimal) = both(&row.variance);
        Self {
            r: row.r.clone(),
            base: row.base,
            rho: row.rho,
            lambda: row.lambda,
            variance,
            variance_decimal,
            ks_lo: row.ks_lo,
            ks_hi: row.ks_hi,
            ks_times_rho_eighth: row.ks_times_rho_eighth,
            smooth_gap: row.smooth_gap,
            smooth_gap_times_sqrt_rho: row.smooth_gap_times_sqrt_rho,
        }
    }
}

pub fn run(ctx: &Context, args: &CltArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let family: Vec<FamilyMember> = match (&args.family, &args.list) {
        (Some(text), _) => {
            let (pattern, repeats) = parse_family(text)?;
            pattern_family(&pattern, args.base, &repeats)?
        }
        (None, Some(path)) => read_list(path, args.base, ctx.radix_input)?.into_iter().map(family_member).collect(),
        (None, None) => return Err(Failure::usage("give --family or --list")),
    };
    if family.is_empty() {
        return Err(Failure::usage("the family is empty"));
    }
    if !(args.bound_factor >= 1.0) {
        return Err(Failure::usage("--bound-factor must be at least 1"));
    }
    let cache = ctx.cache();
    let report = rate_report(&family, cache.as_ref())?;
    let rows: Vec<CltRow> = report.rows.iter().map(CltRow::from).collect();
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_rows(&mut w, ctx.format, &rows)?;
            w.flush()?;
        }
        None => write_rows(out, ctx.format, &rows)?,
    }

    let mut blown = Vec::new();
    for (name, col) in [
        ("ks_times_rho_eighth", (|r: &RateRow| r.ks_times_rho_eighth) as fn(&RateRow) -> f64),
        ("smooth_gap_times_sqrt_rho", |r: &RateRow| r.smooth_gap_times_sqrt_rho),
    ] {
        let first = col(&report.rows[0]);
        let max = report.rows.iter().map(col).fold(f64::NEG_INFINITY, f64::max);
        if max > args.bound_factor * first {
            blown.push(format!("{name} grew from {first:e} to {max:e}"));
        }
    }
    if blown.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(blown.join("; ")))
    }
}
