use std::io::Write;

use digitdrift_core::cache::DistributionCache;
use digitdrift_core::digits::{decompose_blocks, Expansion};
use digitdrift_core::exactdist::{
    default_atom_cutoff, distribution_of, format_rational, mean_check, sigma, variance_of, AtomicDistribution,
    DEFAULT_TAIL_EPS,
};
use digitdrift_core::Error;
use serde::Serialize;

use crate::args::{DistArgs, Format};
use crate::failure::Failure;
use crate::input::parse_r;
use crate::report::{both, decimal, write_json};
use crate::Context;

#[derive(Serialize)]
struct AtomRow {
    r: String,
    b: u32,
    k: usize,
    d: i64,
    mass: String,
    mass_decimal: String,
}

#[derive(Serialize)]
struct DistReport {
    r: String,
    b: u32,
    s_r: u64,
    digit_count: usize,
    rho: Option<usize>,
    lambda: Option<usize>,
    cutoff: usize,
    tail_mass: String,
    tail_mass_decimal: String,
    mean_lo: Option<String>,
    mean_hi: Option<String>,
    variance: String,
    variance_decimal: String,
    sigma: String,
    atoms: Vec<AtomRow>,
}

pub fn run(ctx: &Context, args: &DistArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let r = parse_r(&args.r, args.base, ctx.radix_input)?;
    let cutoff = match (args.atoms, args.tail_eps) {
        (Some(0), _) => return Err(Failure::usage("--atoms must be at least 1")),
        (Some(n), _) => n - 1,
        (None, Some(eps)) if !(eps > 0.0 && eps < 1.0) => return Err(Error::InvalidEpsilon(eps).into()),
        // μ^(0) is the point mass at 0, so its one atom carries no tail.
        (None, _) if r.is_zero() => 0,
        (None, eps) => default_atom_cutoff(r.len(), r.base(), eps.unwrap_or(DEFAULT_TAIL_EPS)),
    };
    let dist = match ctx.cache() {
        Some(cache) => cached(&cache, &r, cutoff)?,
        None => distribution_of(&r, cutoff),
    };
    let report = build(&r, &dist)?;
    match ctx.format {
        Format::Json => write_json(out, &report),
        Format::Csv => write_csv(out, report),
    }
}

fn cached(cache: &DistributionCache, r: &Expansion, cutoff: usize) -> Result<AtomicDistribution, Failure> {
    Ok(cache.get_or_compute(r, cutoff)?)
}

fn build(r: &Expansion, dist: &AtomicDistribution) -> Result<DistReport, Failure> {
    let (rho, lambda) = match decompose_blocks(r) {
        Ok(b) => (Some(b.rho), Some(b.lambda)),
        Err(_) => (None, None),
    };
    let mean = match mean_check(dist) {
        Ok(i) => Some(i),
        Err(Error::TailBoundUnavailable { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let variance = variance_of(r);
    let sigma = if r.is_zero() {
        "0".to_string()
    } else {
        decimal(&sigma(&r.value(), r.base(), 64)?.lower())
    };
    let (tail_mass, tail_mass_decimal) = both(&dist.tail_mass);
    let (variance_s, variance_decimal) = both(&variance);
    let value = r.value().to_string();
    let atoms = dist
        .atoms
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let (mass, mass_decimal) = both(m);
            AtomRow { r: value.clone(), b: r.base(), k, d: dist.location(k), mass, mass_decimal }
        })
        .collect();
    Ok(DistReport {
        r: value,
        b: r.base(),
        s_r: dist.s_r,
        digit_count: dist.digit_count,
        rho,
        lambda,
        cutoff: dist.cutoff(),
        tail_mass,
        tail_mass_decimal,
        mean_lo: mean.as_ref().map(|i| format_rational(&i.lo)),
        mean_hi: mean.as_ref().map(|i| format_rational(&i.hi)),
        variance: variance_s,
        variance_decimal,
        sigma,
        atoms,
    })
}

/// Summary as `# key=value` comment lines, then one CSV row per atom.
fn write_csv(out: &mut dyn Write, report: DistReport) -> Result<(), Failure> {
    let opt = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
    writeln!(out, "# r={} b={} s_r={} digits={}", report.r, report.b, report.s_r, report.digit_count)?;
    writeln!(out, "# rho={} lambda={}", opt(report.rho), opt(report.lambda))?;
    writeln!(out, "# atoms={} tail={} ({})", report.cutoff + 1, report.tail_mass, report.tail_mass_decimal)?;
    match (&report.mean_lo, &report.mean_hi) {
        (Some(lo), Some(hi)) => writeln!(out, "# mean in [{lo}, {hi}]")?,
        _ => writeln!(out, "# mean enclosure needs more atoms than digits of r")?,
    }
    writeln!(out, "# variance={} ({})", report.variance, report.variance_decimal)?;
    writeln!(out, "# sigma={}", report.sigma)?;
    let mut w = csv::Writer::from_writer(out);
    for row in &report.atoms {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
