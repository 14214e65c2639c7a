use std::collections::BTreeMap;
use std::io::Write;

use digitdrift_core::exactdist::{default_atom_cutoff, distribution_of, rational_to_f64, AtomicDistribution, DEFAULT_TAIL_EPS};
use digitdrift_core::mixing::BlockProcess;
use digitdrift_core::odometer::{sample_delta, LazyBadicSample};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::SimulateArgs;
use crate::failure::Failure;
use crate::input::parse_r;
use crate::report::{both, write_rows};
use crate::Context;

#[derive(Serialize)]
struct HistRow {
    series: String,
    d: i64,
    count: u64,
    empirical: f64,
    exact: String,
    exact_decimal: String,
    z: String,
}

#[derive(Default)]
struct Tally {
    delta: BTreeMap<i64, u64>,
    blocks: Vec<BTreeMap<i64, u64>>,
    total: BTreeMap<i64, u64>,
    identity_failures: u64,
}

impl Tally {
    fn new(lambda: usize) -> Self {
        Self { blocks: vec![BTreeMap::new(); lambda], ..Self::default() }
    }

    fn merge(mut self, other: Tally) -> Tally {
        fn add(a: &mut BTreeMap<i64, u64>, b: BTreeMap<i64, u64>) {
            for (d, c) in b {
                *a.entry(d).or_default() += c;
            }
        }
        add(&mut self.delta, other.delta);
        add(&mut self.total, other.total);
        for (a, b) in self.blocks.iter_mut().zip(other.blocks) {
            add(a, b);
        }
        self.identity_failures += other.identity_failures;
        self
    }
}

pub fn run(ctx: &Context, args: &SimulateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let r = parse_r(&args.r, args.base, ctx.radix_input)?;
    if args.samples == 0 {
        return Err(Failure::usage("--samples must be at least 1"));
    }
    let process = if args.process { Some(BlockProcess::new(&r)?) } else { None };
    let lambda = process.as_ref().map_or(0, |p| p.lambda());
    let s_r = r.digit_sum() as i64;
    let step = i64::from(r.base()) - 1;

    let tally = (0..args.samples)
        .into_par_iter()
        .try_fold(
            || Tally::new(lambda),
            |mut t, i| -> Result<Tally, Failure> {
                let mut x = LazyBadicSample::new(r.base(), args.seed, i);
                let o = sample_delta(&r, &mut x, args.cap)?;
                if o.delta != s_r - o.carries as i64 * step {
                    t.identity_failures += 1;
                }
                *t.delta.entry(o.delta).or_default() += 1;
                if let Some(p) = &process {
                    let mut y = LazyBadicSample::new(r.base(), args.seed, i);
                    let mut values = vec![0i64; lambda];
                    let total = p.sample_into(&mut y, args.cap, &mut values)?;
                    if total != o.delta || values.iter().sum::<i64>() != total {
                        t.identity_failures += 1;
                    }
                    for (h, v) in t.blocks.iter_mut().zip(&values) {
                        *h.entry(*v).or_default() += 1;
                    }
                    *t.total.entry(total).or_default() += 1;
                }
                Ok(t)
            },
        )
        .try_reduce(|| Tally::new(lambda), |a, b| Ok(a.merge(b)))?;

    let n = args.samples;
    let exact = distribution_of(&r, default_atom_cutoff(r.len(), r.base(), DEFAULT_TAIL_EPS));
    let mut rows = histogram("delta", &tally.delta, &exact, n);
    if let Some(p) = &process {
        for (i, h) in tally.blocks.iter().enumerate() {
            let law = block_law(p, i + 1);
            rows.extend(histogram(&format!("X{}", i + 1), h, &law, n));
        }
        rows.extend(histogram("total", &tally.total, &exact, n));
    }
    write_rows(out, ctx.format, &rows)?;

    let max_z = rows.iter().filter_map(|row| row.z.parse::<f64>().ok()).fold(0.0f64, |m, z| m.max(z.abs()));
    eprintln!("{n} samples, largest |z| = {max_z:.3}");
    if tally.identity_failures > 0 {
        return Err(Failure::Violation(format!(
            "{} samples broke the carry or block-sum identity",
            tally.identity_failures
        )));
    }
    Ok(())
}

fn block_law(p: &BlockProcess, i: usize) -> AtomicDistribution {
    let len = p.increment(i).len();
    p.law(i, default_atom_cutoff(len, p.base(), DEFAULT_TAIL_EPS) - len)
}

/// Observed values together with every atom expected at least once.
fn histogram(series: &str, counts: &BTreeMap<i64, u64>, exact: &AtomicDistribution, n: u64) -> Vec<HistRow> {
    let nf = n as f64;
    let mut ds: Vec<i64> = counts.keys().copied().collect();
    ds.extend(
        (0..exact.atoms.len())
            .filter(|&k| rational_to_f64(&exact.atoms[k]) * nf >= 1.0)
            .map(|k| exact.location(k)),
    );
    ds.sort_unstable_by(|a, b| b.cmp(a));
    ds.dedup();
    ds.into_iter()
        .map(|d| {
            let count = counts.get(&d).copied().unwrap_or(0);
            let (exact_s, exact_decimal, z) = match exact.mass_at(d) {
                Some(m) => {
                    let (s, dec) = both(&m);
                    let p = rational_to_f64(&m);
                    let sd = (nf * p * (1.0 - p)).sqrt();
                    let dev = count as f64 - nf * p;
                    let z = if sd > 0.0 {
                        format!("{:.4}", dev / sd)
                    } else if dev == 0.0 {
                        "0".into()
                    } else {
                        "inf".into()
                    };
                    (s, dec, z)
                }
                None => (String::new(), String::new(), String::new()),
            };
            HistRow {
                series: series.to_string(),
                d,
                count,
                empirical: count as f64 / nf,
                exact: exact_s,
                exact_decimal,
                z,
            }
        })
        .collect()
}
