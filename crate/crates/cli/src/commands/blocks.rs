use std::io::Write;

use digitdrift_core::digits::{decompose_blocks, BlockKind};
use serde::Serialize;

use crate::args::BlocksArgs;
use crate::failure::Failure;
use crate::input::parse_r;
use crate::report::write_rows;
use crate::Context;

#[derive(Serialize)]
struct BlockRow {
    r: String,
    b: u32,
    rho: usize,
    lambda: usize,
    /// 1-based, most-significant block first.
    block: usize,
    kind: &'static str,
    digit: u32,
    len: usize,
}

pub fn run(ctx: &Context, args: &BlocksArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let r = parse_r(&args.r, args.base, ctx.radix_input)?;
    let dec = decompose_blocks(&r)?;
    let value = r.value().to_string();
    let rows: Vec<BlockRow> = dec
        .blocks
        .iter()
        .enumerate()
        .map(|(i, blk)| {
            let (kind, digit) = match blk.kind {
                BlockKind::Zero => ("zero", 0),
                BlockKind::TopDigit => ("top", r.base() - 1),
                BlockKind::Single(d) => ("single", d),
            };
            BlockRow {
                r: value.clone(),
                b: r.base(),
                rho: dec.rho,
                lambda: dec.lambda,
                block: i + 1,
                kind,
                digit,
                len: blk.len,
            }
        })
        .collect();
    write_rows(out, ctx.format, &rows)
}
