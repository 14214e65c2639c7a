use std::io::Write;

use digitdrift_core::digits::Expansion;
use digitdrift_core::mixing::{estimate_phi_batch, BlockProcess, EventFamily, PhiRow, ProcessBatch};

use crate::args::PhiArgs;
use crate::failure::Failure;
use crate::input::parse_r;
use crate::report::write_rows;
use crate::Context;

/// `(10)^16`, sixteen alternating blocks.
const DEFAULT_REPEATS: usize = 16;

pub fn run(ctx: &Context, args: &PhiArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let r = match &args.r {
        Some(text) => parse_r(text, args.base, ctx.radix_input)?,
        None => Expansion::from_digits_be(&[1, 0].repeat(DEFAULT_REPEATS), args.base)?,
    };
    if args.samples == 0 {
        return Err(Failure::usage("--samples must be at least 1"));
    }
    if args.k.is_empty() || args.p.is_empty() || args.k.contains(&0) || args.p.contains(&0) {
        return Err(Failure::usage("--k and --p need values of at least 1"));
    }
    let process = BlockProcess::new(&r)?;
    if process.lambda() < 2 {
        return Err(Failure::usage(format!("λ(r) = {} leaves no gap between past and future", process.lambda())));
    }
    let family = EventFamily { per_side: args.per_side };
    let batch = ProcessBatch::generate(&process, args.samples, args.seed, args.cap)?;
    let mut rows = Vec::with_capacity(args.k.len() * args.p.len());
    for &p in &args.p {
        for &k in &args.k {
            let est = estimate_phi_batch(&process, &batch, k, p, family)?;
            rows.push(PhiRow::new(&r, &est));
        }
    }
    write_rows(out, ctx.format, &rows)?;
    let violated = rows.iter().filter(|r| r.violated).count();
    if violated == 0 {
        Ok(())
    } else {
        Err(Failure::Violation(format!("{violated} estimates exceed the mixing bound beyond their CI")))
    }
}
