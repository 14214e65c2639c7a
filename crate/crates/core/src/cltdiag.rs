//! How far the normalized law `μ̃^(r)` (atoms `a_k / σ_r`) is from `N(0, 1)`.
//!
//! Distances are computed from exact atoms; everything that the finite atom
//! list cannot see (the tail beyond the cutoff, floating-point rounding) is
//! folded into explicit error terms.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::cache::DistributionCache;
use crate::digits::{decompose_blocks, Expansion};
use crate::error::{Error, Result};
use crate::exactdist::{
    default_atom_cutoff, distribution_of, mu_atom, rational_to_f64, ser_rational, variance_exact,
    variance_of, AtomicDistribution, Rational, DEFAULT_TAIL_EPS,
};

/// Largest tail mass accepted by the normal comparisons.
pub const MAX_TAIL_MASS: f64 = 1e-6;

/// `‖f'''‖∞` for [`mollifier_f`], attained at `t = 1/2`.
pub const MOLLIFIER_THIRD_SUP: f64 = 52.5;

/// Slack added to every interval for rounding in the `f64` evaluation.
const FLOAT_SLACK: f64 = 1e-12;

/// Quadrature range for expectations under `N(0, 1)`; the density beyond it
/// is below `1e-49`.
const GAUSS_RANGE: f64 = 15.0;

pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// `Φ(t)` through the complementary error function.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / SQRT_2)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_{n-1}(x).
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// Composite 20-point Gauss–Legendre on `[a, b]` with `panels` equal panels.
pub fn integrate_gl(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gl20();
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + width / 2.0;
        let panel: f64 = nodes.iter().zip(weights).map(|(x, w)| w * f(mid + x * width / 2.0)).sum();
        total += panel * width / 2.0;
    }
    total
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = (a + b) / 2.0;
        let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let err = left + right - whole;
        if depth == 0 || err.abs() <= 15.0 * tol {
            left + right + err / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f((a + b) / 2.0), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `E h(Y)` for `Y ~ N(0, 1)`, integrating `h·φ` over `[-15, 15]` in panels
/// of width at most 1/2 that also break at the given points.
pub fn gaussian_expectation(h: &dyn Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|x| x.abs() < GAUSS_RANGE).collect();
    cuts.push(-GAUSS_RANGE);
    cuts.push(GAUSS_RANGE);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let g = |y: f64| h(y) * normal_pdf(y);
    cuts.windows(2)
        .map(|w| integrate_gl(&g, w[0], w[1], ((w[1] - w[0]) * 2.0).ceil().max(1.0) as usize))
        .sum()
}

/// The degree-7 smoothstep, `1` for `t <= 0` and `0` for `t >= 1`.
pub fn mollifier_f(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let t4 = t * t * t * t;
        1.0 - t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    }
}

/// `f'''(t) = -840 t(1 - t)(1 - 5t + 5t²)` on `[0, 1]`, zero outside.
pub fn mollifier_f_third(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        0.0
    } else {
        -840.0 * t * (1.0 - t) * (1.0 - 5.0 * t + 5.0 * t * t)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(eps))
    }
}

/// `h_{t,ε}(u) = f((ε - t + u) / 2ε)`: `1` left of `t - ε`, `0` right of `t + ε`.
pub fn h_t_eps(t: f64, eps: f64, u: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(mollifier_f((eps - t + u) / (2.0 * eps)))
}

/// `‖h'''_{t,ε}‖∞ = ‖f'''‖∞ / 8ε³`.
pub fn h_third_sup(eps: f64) -> Result<f64> {
    check_eps(eps)?;
    Ok(MOLLIFIER_THIRD_SUP / (8.0 * eps.powi(3)))
}

/// `E h_{t,ε}(Y)` for `Y ~ N(0, 1)`.
pub fn gaussian_mollified(t: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let window = |u: f64| mollifier_f((eps - t + u) / (2.0 * eps)) * normal_pdf(u);
    Ok(normal_cdf(t - eps) + integrate_gl(&window, t - eps, t + eps, 4))
}

/// The same expectation by adaptive Simpson quadrature.
pub fn gaussian_mollified_adaptive(t: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let window = |u: f64| mollifier_f((eps - t + u) / (2.0 * eps)) * normal_pdf(u);
    Ok(normal_cdf(t - eps) + adaptive_simpson(&window, t - eps, t + eps, 1e-13))
}

/// `μ̃^(r)` in floating point: points `z_k = a_k / σ_r` with exact-rounded
/// masses and cumulative masses.
#[derive(Clone, Debug)]
pub struct NormalizedLaw {
    pub sigma: f64,
    /// Atom locations, ascending.
    pub points: Vec<f64>,
    pub masses: Vec<f64>,
    /// `F(z)` at each point, right limit.
    pub cdf: Vec<f64>,
    /// Mass of the uncomputed atoms, all located below `points[0]`.
    pub tail: f64,
    /// Bound on the tail contribution to `E|Z|³`.
    pub tail_third: Option<f64>,
}

impl NormalizedLaw {
    pub fn new(dist: &AtomicDistribution) -> Result<Self> {
        let tail = rational_to_f64(&dist.tail_mass);
        if tail >= MAX_TAIL_MASS {
            return Err(Error::TailTooHeavy(tail));
        }
        let var = variance_exact(&dist.r, dist.base)?;
        // μ^(0) is the point mass at 0; leave it unscaled.
        let sigma = if var.is_zero() { 1.0 } else { rational_to_f64(&var).sqrt() };
        let mut points = Vec::with_capacity(dist.atoms.len());
        let mut masses = Vec::with_capacity(dist.atoms.len());
        let mut cdf = Vec::with_capacity(dist.atoms.len());
        let mut running = dist.tail_mass.clone();
        for k in (0..dist.atoms.len()).rev() {
            running += &dist.atoms[k];
            points.push(dist.location(k) as f64 / sigma);
            masses.push(rational_to_f64(&dist.atoms[k]));
            cdf.push(rational_to_f64(&running));
        }
        let tail_third = dist
            .tail_moment_bound(3)
            .ok()
            .map(|t| rational_to_f64(&t) / sigma.powi(3));
        Ok(Self { sigma, points, masses, cdf, tail, tail_third })
    }

    /// `F(z)` where `z` is at or above the lowest computed atom.
    pub fn cdf_at(&self, z: f64) -> f64 {
        let idx = self.points.partition_point(|&p| p <= z);
        if idx == 0 {
            self.tail
        } else {
            self.cdf[idx - 1]
        }
    }

    /// `Σ h(z_k) m_k` over the computed atoms.
    pub fn head_expectation(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().zip(&self.masses).map(|(&z, &m)| h(z) * m).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsInterval {
    pub lo: f64,
    pub hi: f64,
}

impl KsInterval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// `sup_t |F_r(t) - Φ(t)|`, bracketed.
///
/// Between atoms `F_r` is constant and `Φ` monotone, so the supremum over
/// the computed range is attained at an atom, from one side or the other.
/// Below the lowest computed atom both CDFs are at most
/// `max(tail, Φ(z_K))`.
pub fn ks_distance(dist: &AtomicDistribution) -> Result<KsInterval> {
    let law = NormalizedLaw::new(dist)?;
    Ok(ks_of(&law))
}

pub fn ks_of(law: &NormalizedLaw) -> KsInterval {
    let mut lo: f64 = 0.0;
    let mut left = law.tail;
    for (&z, &right) in law.points.iter().zip(&law.cdf) {
        let phi = normal_cdf(z);
        lo = lo.max((left - phi).abs()).max((right - phi).abs());
        left = right;
    }
    let below = law.tail.max(normal_cdf(law.points[0]));
    let hi = lo.max(below) + FLOAT_SLACK;
    KsInterval { lo: (lo - FLOAT_SLACK).max(0.0), hi }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum SmoothFn {
    Cubic,
    Sin,
    Mollifier { t: f64, eps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothGap {
    /// `|E h(Z) - E h(Y)|` with the tail of `Z` left out.
    pub gap: f64,
    /// Bound on what the tail and the quadrature can change in `gap`.
    pub error_bound: f64,
    pub e_z: f64,
    pub e_y: f64,
}

pub fn smooth_gap(dist: &AtomicDistribution, h: SmoothFn) -> Result<SmoothGap> {
    smooth_gap_of(&NormalizedLaw::new(dist)?, h)
}

pub fn smooth_gap_of(law: &NormalizedLaw, h: SmoothFn) -> Result<SmoothGap> {
    let quad_err = 1e-10;
    let (e_z, e_y, tail_err) = match h {
        SmoothFn::Cubic => {
            let tail = law.tail_third.ok_or(Error::TailBoundUnavailable {
                needed: 1,
                available: 0,
            })?;
            (law.head_expectation(|z| z * z * z), gaussian_expectation(&|y| y * y * y, &[]), tail)
        }
        SmoothFn::Sin => (law.head_expectation(f64::sin), gaussian_expectation(&f64::sin, &[]), law.tail),
        SmoothFn::Mollifier { t, eps } => {
            check_eps(eps)?;
            let e_z = law.head_expectation(|z| mollifier_f((eps - t + z) / (2.0 * eps)));
            (e_z, gaussian_mollified(t, eps)?, law.tail)
        }
    };
    Ok(SmoothGap { gap: (e_z - e_y).abs(), error_bound: tail_err + quad_err + FLOAT_SLACK, e_z, e_y })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MollifierChain {
    pub eps: f64,
    pub ks_lo: f64,
    /// Largest `|E h_{t,ε}(Z) - E h_{t,ε}(Y)|` over the scanned `t`.
    pub smooth_sup: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `sup_t |F_r - Φ| <= sup_t |E h_{t,ε}(Z) - E h_{t,ε}(Y)| + 4ε/√(2π)`.
///
/// The right side is scanned over a grid in `[-8, 8]` and the points
/// `z_k ± ε`, so it only underestimates the true supremum; passing the scan
/// therefore confirms the inequality.
pub fn mollifier_chain(law: &NormalizedLaw, eps: f64) -> Result<MollifierChain> {
    check_eps(eps)?;
    let ks = ks_of(law);
    let mut ts: Vec<f64> = (0..=4000).map(|i| -8.0 + 16.0 * i as f64 / 4000.0).collect();
    for (&z, &m) in law.points.iter().zip(&law.masses) {
        if m > 1e-15 && z.abs() < 10.0 {
            ts.extend([z - eps, z, z + eps]);
        }
    }
    let smooth_sup = ts
        .par_iter()
        .map(|&t| smooth_gap_of(law, SmoothFn::Mollifier { t, eps }).map(|g| g.gap))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let rhs = smooth_sup + 4.0 * eps / (2.0 * PI).sqrt();
    Ok(MollifierChain { eps, ks_lo: ks.lo, smooth_sup, rhs, holds: ks.lo <= rhs })
}

/// One family member of a rate report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub r: String,
    pub base: u32,
    pub rho: usize,
    pub lambda: usize,
    #[serde(serialize_with = "ser_rational")]
    pub variance: Rational,
    pub ks_lo: f64,
    pub ks_hi: f64,
    pub ks_times_rho_eighth: f64,
    pub smooth_gap: f64,
    pub smooth_gap_times_sqrt_rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
}

impl RateReport {
    /// `max / min` of a column; infinite if the minimum is zero.
    pub fn spread(&self, column: impl Fn(&RateRow) -> f64) -> f64 {
        let vals: Vec<f64> = self.rows.iter().map(column).collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }
}

/// A labelled member of a test family.
#[derive(Clone, Debug)]
pub struct FamilyMember {
    pub label: String,
    pub r: Expansion,
}

/// `pattern` (digits, most-significant first) repeated `m` times, per `m`.
pub fn pattern_family(pattern: &str, base: u32, repeats: &[usize]) -> Result<Vec<FamilyMember>> {
    let digits: Vec<u32> = pattern
        .chars()
        .map(|c| c.to_digit(base.min(36)).ok_or_else(|| Error::InvalidArgument(format!("bad digit {c:?} in pattern"))))
        .collect::<Result<_>>()?;
    if digits.is_empty() {
        return Err(Error::InvalidArgument("empty pattern".into()));
    }
    repeats
        .iter()
        .map(|&m| {
            let r = Expansion::from_digits_be(&digits.repeat(m), base)?;
            Ok(FamilyMember { label: format!("({pattern})^{m}"), r })
        })
        .collect()
}

pub fn family_member(r: Expansion) -> FamilyMember {
    FamilyMember { label: r.value().to_string(), r }
}

/// The distribution used for normal comparisons, with the default tail cutoff.
pub fn clt_distribution(r: &Expansion, cache: Option<&DistributionCache>) -> Result<AtomicDistribution> {
    let k = default_atom_cutoff(r.len(), r.base(), DEFAULT_TAIL_EPS);
    match cache {
        Some(c) => c.get_or_compute(r, k),
        None => Ok(distribution_of(r, k)),
    }
}

pub fn rate_row(member: &FamilyMember, cache: Option<&DistributionCache>) -> Result<RateRow> {
    let blocks = decompose_blocks(&member.r)?;
    let dist = clt_distribution(&member.r, cache)?;
    let law = NormalizedLaw::new(&dist)?;
    let ks = ks_of(&law);
    let cubic = smooth_gap_of(&law, SmoothFn::Cubic)?;
    let rho = blocks.rho as f64;
    Ok(RateRow {
        r: member.label.clone(),
        base: member.r.base(),
        rho: blocks.rho,
        lambda: blocks.lambda,
        variance: variance_of(&member.r),
        ks_lo: ks.lo,
        ks_hi: ks.hi,
        ks_times_rho_eighth: ks.hi * rho.powf(0.125),
        smooth_gap: cubic.gap,
        smooth_gap_times_sqrt_rho: cubic.gap * rho.sqrt(),
    })
}

pub fn rate_report(family: &[FamilyMember], cache: Option<&DistributionCache>) -> Result<RateReport> {
    let rows = family.par_iter().map(|m| rate_row(m, cache)).collect::<Result<Vec<_>>>()?;
    Ok(RateReport { rows })
}

/// `|μ^(r)(d) - φ(d/σ_r)/σ_r|` in base 2.
pub fn local_limit_gap(r: &BigUint, d: i64) -> Result<f64> {
    if r.is_zero() {
        return Err(Error::InvalidArgument("the local limit needs r >= 1".into()));
    }
    let sigma = rational_to_f64(&variance_exact(r, 2)?).sqrt();
    let atom = rational_to_f64(&mu_atom(r, 2, d)?);
    Ok((atom - normal_pdf(d as f64 / sigma) / sigma).abs())
}
