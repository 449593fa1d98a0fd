//! Worst-case asymmetry under bounded drift, binomial total variation, and
//! the bound family relating per-bit asymmetry to distance from uniform.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::sources::DriftParams;

/// Default iteration cap for the incomplete-beta continued fraction.
pub const CF_MAX_ITER: usize = 500;
const CF_TOL: f64 = 1e-14;
const CF_TINY: f64 = 1e-300;

/// Slack used when comparing bounds that should be ordered.
pub const ORDER_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("denominator {0} is not positive")]
    NonPositiveDenominator(f64),
    #[error("invalid drift parameters: {0}")]
    Drift(String),
    #[error("k = {k} is outside 0..={n}")]
    KOutOfRange { k: u64, n: u64 },
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("incomplete beta arguments out of range: x = {x}, a = {a}, b = {b}")]
    BetaDomain { x: f64, a: f64, b: f64 },
    #[error("continued fraction did not converge in {iterations} iterations (x = {x}, a = {a}, b = {b})")]
    NoConvergence { x: f64, a: f64, b: f64, iterations: usize },
    #[error("shift x = {x} must lie in (0, {max}]")]
    Shift { x: f64, max: f64 },
    #[error("alpha = {0} must lie in [0, 1)")]
    Alpha(f64),
    #[error("rho = {0} must lie in (0, 1)")]
    Rho(f64),
    #[error("block length m = {m} must be at least {min}")]
    BlockLength { m: u64, min: u64 },
    #[error("no non-negative drift speed achieves alpha = {alpha} (computed delta = {delta})")]
    Infeasible { alpha: f64, delta: f64 },
    #[error("grid step h = {0} must be positive")]
    GridStep(f64),
}

/// `|γ| / [(p0−ε)(p1+ε+γ) + (p1+ε)(p0−ε−γ)]`: the asymmetry of the von Neumann
/// output bit produced by positions `i, i+1` when `ε_i = ε` and `γ_i = γ`.
pub fn u_value(p0: f64, eps: f64, gamma: f64) -> Result<f64, BoundsError> {
    let p1 = 1.0 - p0;
    let denom = (p0 - eps) * (p1 + eps + gamma) + (p1 + eps) * (p0 - eps - gamma);
    if !(denom > 0.0) {
        return Err(BoundsError::NonPositiveDenominator(denom));
    }
    Ok(gamma.abs() / denom)
}

fn drift_params(p0: f64, beta: f64, delta: f64) -> Result<DriftParams, BoundsError> {
    DriftParams::new(p0, beta, delta).map_err(|e| BoundsError::Drift(e.to_string()))
}

/// Closed-form maximum of [`u_value`] over all legal `(ε, γ)`.
pub fn alpha_max(p0: f64, beta: f64, delta: f64) -> Result<f64, BoundsError> {
    drift_params(p0, beta, delta)?;
    let p1 = 1.0 - p0;
    let denom = 2.0 * (p0 * p1 - beta * (beta - delta) - (p0 - p1).abs() * (beta - delta / 2.0));
    if !(denom > 0.0) {
        return Err(BoundsError::NonPositiveDenominator(denom));
    }
    Ok(delta / denom)
}

/// Result of the brute-force search in [`u_max_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMax {
    pub eps: f64,
    pub gamma: f64,
    pub value: f64,
}

/// Evenly spaced points covering `[lo, hi]` with spacing at most `h`,
/// endpoints included exactly.
fn grid(lo: f64, hi: f64, h: f64) -> impl Iterator<Item = f64> {
    let steps = ((hi - lo) / h).ceil().max(0.0) as usize;
    (0..=steps).map(move |i| {
        if i == steps {
            hi
        } else {
            lo + (hi - lo) * i as f64 / steps as f64
        }
    })
}

/// Maximises [`u_value`] over a grid of `{|ε| ≤ β, |γ| ≤ δ, |ε+γ| ≤ β}`.
pub fn u_max_oracle(p0: f64, beta: f64, delta: f64, h: f64) -> Result<GridMax, BoundsError> {
    if !(h > 0.0) {
        return Err(BoundsError::GridStep(h));
    }
    drift_params(p0, beta, delta)?;
    let mut best = GridMax { eps: 0.0, gamma: 0.0, value: 0.0 };
    for eps in grid(-beta, beta, h) {
        for gamma in grid(-delta, delta, h) {
            if (eps + gamma).abs() > beta + 1e-12 {
                continue;
            }
            if let Ok(value) = u_value(p0, eps, gamma) {
                if value > best.value {
                    best = GridMax { eps, gamma, value };
                }
            }
        }
    }
    Ok(best)
}

/// `g(c) = Σ_{y ∈ Bⁿ} |∏_i (1 + (−1)^{y_i} c_i) − 1|`.
pub fn product_deviation_sum(c: &[f64]) -> f64 {
    let n = c.len();
    assert!(n < 31, "product_deviation_sum enumerates 2^n terms");
    let mut terms: Vec<f64> = (0..1u32 << n)
        .map(|y| {
            let prod: f64 = c
                .iter()
                .enumerate()
                .map(|(i, ci)| if y >> i & 1 == 0 { 1.0 + ci } else { 1.0 - ci })
                .product();
            (prod - 1.0).abs()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// `S_{n,p}`: `n` independent trials with success probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binomial {
    n: u64,
    p: f64,
}

impl Binomial {
    pub fn new(n: u64, p: f64) -> Result<Self, BoundsError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(BoundsError::Probability(p));
        }
        Ok(Self { n, p })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn check(&self, k: u64) -> Result<(), BoundsError> {
        if k > self.n {
            Err(BoundsError::KOutOfRange { k, n: self.n })
        } else {
            Ok(())
        }
    }

    /// `P(X = k)`.
    pub fn pmf(&self, k: u64) -> Result<f64, BoundsError> {
        self.check(k)?;
        Ok(dbinom_raw(k as f64, self.n as f64, self.p, 1.0 - self.p))
    }

    /// `P(X ≤ k)`.
    pub fn cdf(&self, k: u64) -> Result<f64, BoundsError> {
        self.check(k)?;
        Ok(self.split(k).0)
    }

    /// `(P(X ≤ k), P(X > k))`, summing whichever side is lighter and taking
    /// the complement for the other.
    fn split(&self, k: u64) -> (f64, f64) {
        let n = self.n;
        if k >= n {
            return (1.0, 0.0);
        }
        let (p, q) = (self.p, 1.0 - self.p);
        let pmf = |j: u64| dbinom_raw(j as f64, n as f64, p, q);
        let mean = n as f64 * p;
        if (k as f64) < mean {
            let lower = tail_sum((0..=k).rev(), pmf);
            (lower, 1.0 - lower)
        } else {
            let upper = tail_sum(k + 1..=n, pmf);
            (1.0 - upper, upper)
        }
    }
}

/// Sums `pmf` over `range`, which walks away from the mode, stopping once
/// the terms are negligible.
fn tail_sum(range: impl Iterator<Item = u64>, pmf: impl Fn(u64) -> f64) -> f64 {
    let mut terms = Vec::new();
    let mut total = 0.0;
    for j in range {
        let t = pmf(j);
        terms.push(t);
        total += t;
        if t <= total * 1e-20 {
            break;
        }
    }
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// `S_{n,p}(k)`.
pub fn binom_pmf(spec: &Binomial, k: u64) -> Result<f64, BoundsError> {
    spec.pmf(k)
}

/// `F(k; n, p) = S_{n,p}({0, …, k})`.
pub fn binom_cdf(spec: &Binomial, k: u64) -> Result<f64, BoundsError> {
    spec.cdf(k)
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// stirlerr(n) = ln(n!) - ln(sqrt(2*pi*n)*(n/e)^n), at n = 0, 0.5, ..., 15
const SFERR_HALVES: [f64; 31] = [
    0.0,
    0.153_426_409_720_027_345_291_384_8,
    0.081_061_466_795_327_258_219_670_2,
    0.054_814_121_051_917_653_896_139_0,
    0.041_340_695_955_409_294_093_822_1,
    0.033_162_873_519_936_287_485_110_48,
    0.027_677_925_684_998_339_148_789_29,
    0.023_746_163_656_297_495_971_329_20,
    0.020_790_672_103_765_093_111_522_77,
    0.018_488_450_532_673_185_230_779_34,
    0.016_644_691_189_821_192_163_194_87,
    0.015_134_973_221_917_378_873_512_55,
    0.013_876_128_823_070_747_998_745_73,
    0.012_810_465_242_920_226_924_249_86,
    0.011_896_709_945_891_770_095_055_72,
    0.011_104_559_758_206_917_326_629_91,
    0.010_411_265_261_972_096_497_478_567,
    0.009_799_416_126_158_803_298_389_475,
    0.009_255_462_182_712_732_917_728_637,
    0.008_768_700_134_139_385_462_952_823,
    0.008_330_563_433_362_871_256_469_318,
    0.007_934_114_564_314_020_547_248_100,
    0.007_573_675_487_951_840_794_972_024,
    0.007_244_554_301_320_383_179_543_912,
    0.006_942_840_107_209_529_865_664_152,
    0.006_665_247_032_707_682_442_354_394,
    0.006_408_994_188_004_207_068_439_631,
    0.006_171_712_263_039_457_647_532_867,
    0.005_951_370_112_758_847_735_624_416,
    0.005_746_216_513_010_115_682_023_589,
    0.005_554_733_551_962_801_371_038_690,
];

fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        let nn = n + n;
        if nn == nn.trunc() {
            return SFERR_HALVES[nn as usize];
        }
        return libm::lgamma(n + 1.0) - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

// x ln(x/np) + np - x, without cancellation near x = np
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `Γ(n+1)/(Γ(x+1)Γ(n−x+1)) · p^x · q^{n−x}` for real `0 ≤ x ≤ n`.
fn dbinom_raw(x: f64, n: f64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0.0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if x == n { 1.0 } else { 0.0 };
    }
    if x == 0.0 {
        if n == 0.0 {
            return 1.0;
        }
        return if p < 0.1 { (n * (-p).ln_1p()).exp() } else { (n * q.ln()).exp() };
    }
    if x == n {
        return if q < 0.1 { (n * (-q).ln_1p()).exp() } else { (n * p.ln()).exp() };
    }
    if x < 0.0 || x > n {
        return 0.0;
    }
    let lc = stirlerr(n) - stirlerr(x) - stirlerr(n - x) - bd0(x, n * p) - bd0(n - x, n * q);
    let lf = LN_2PI + x.ln() + (-x / n).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// `I_x(a, b)` by continued fraction, with the default iteration cap.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64, BoundsError> {
    reg_inc_beta_capped(x, a, b, CF_MAX_ITER)
}

/// `I_x(a, b)` by continued fraction, failing after `max_iter` terms.
pub fn reg_inc_beta_capped(x: f64, a: f64, b: f64, max_iter: usize) -> Result<f64, BoundsError> {
    if !(0.0..=1.0).contains(&x) || !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(BoundsError::BetaDomain { x, a, b });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        return Ok(1.0 - beta_cf_side(1.0 - x, b, a, max_iter)?);
    }
    beta_cf_side(x, a, b, max_iter)
}

// x^a (1-x)^b / (a B(a,b)) times the continued fraction; valid below the switch point
fn beta_cf_side(x: f64, a: f64, b: f64, max_iter: usize) -> Result<f64, BoundsError> {
    let front = b / (a + b) * dbinom_raw(a, a + b, x, 1.0 - x);
    if front == 0.0 {
        return Ok(0.0);
    }
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_TOL {
            return Ok(front * h);
        }
    }
    Err(BoundsError::NoConvergence { x, a, b, iterations: max_iter })
}

/// `I_x(a, b)` for positive integers via `P(Bin(a+b−1, x) ≥ a)`.
pub fn reg_inc_beta_integer(x: f64, a: u64, b: u64) -> Result<f64, BoundsError> {
    if !(0.0..=1.0).contains(&x) || a == 0 || b == 0 {
        return Err(BoundsError::BetaDomain { x, a: a as f64, b: b as f64 });
    }
    let bin = Binomial::new(a + b - 1, x)?;
    Ok(bin.split(a - 1).1)
}

/// The first count at which the pmf of `S_{n,p+x}` reaches that of `S_{n,p}`.
pub fn crossing_index(n: u64, p: f64, x: f64) -> Result<u64, BoundsError> {
    let q = 1.0 - p;
    if !(p > 0.0 && p < 1.0) {
        return Err(BoundsError::Probability(p));
    }
    if !(x > 0.0 && x <= q) {
        return Err(BoundsError::Shift { x, max: q });
    }
    if n == 0 {
        return Ok(0);
    }
    if x >= q {
        return Ok(n);
    }
    let down = (-x / q).ln_1p();
    let up = (x / p).ln_1p();
    let l = (-(n as f64) * down / (up - down)).ceil();
    Ok((l.max(1.0) as u64).min(n))
}

/// `Δ(S_{n,p}, S_{n,p+x}) = I_{p+x}(ℓ, n−ℓ+1) − I_p(ℓ, n−ℓ+1)`.
pub fn binom_tv(n: u64, p: f64, x: f64) -> Result<f64, BoundsError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(BoundsError::Probability(p));
    }
    if x == 0.0 || n == 0 {
        return Ok(0.0);
    }
    if p == 0.0 {
        // S_{n,0} is a point mass at 0
        return Ok(-(n as f64 * (-x).ln_1p()).exp_m1());
    }
    let l = crossing_index(n, p, x)?;
    let (a, b) = (l as f64, (n - l + 1) as f64);
    let hi = reg_inc_beta(p + x, a, b)?;
    let lo = reg_inc_beta(p, a, b)?;
    Ok((hi - lo).clamp(0.0, 1.0))
}

fn check_alpha(alpha: f64) -> Result<(), BoundsError> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(BoundsError::Alpha(alpha))
    }
}

fn check_rho(rho: f64) -> Result<(), BoundsError> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(BoundsError::Rho(rho))
    }
}

fn check_m(m: u64, min: u64) -> Result<(), BoundsError> {
    if m < min {
        Err(BoundsError::BlockLength { m, min })
    } else {
        Ok(())
    }
}

/// `Δ(S_{m,1/2}, S_{m,(1+α)/2})`, the distance from `U_m` of the worst-case
/// normalized source.
pub fn tv_bound_exact(m: u64, alpha: f64) -> Result<f64, BoundsError> {
    check_alpha(alpha)?;
    check_m(m, 1)?;
    binom_tv(m, 0.5, alpha / 2.0)
}

/// `½((1+α)^m − 1)`.
pub fn tv_bound_naive(m: u64, alpha: f64) -> Result<f64, BoundsError> {
    check_alpha(alpha)?;
    check_m(m, 1)?;
    Ok(0.5 * (m as f64 * alpha.ln_1p()).exp_m1())
}

/// `(1+2ρ)^{1/m} − 1`, the largest α the naive bound certifies.
pub fn naive_alpha_for_rho(m: u64, rho: f64) -> Result<f64, BoundsError> {
    check_rho(rho)?;
    check_m(m, 1)?;
    Ok(((2.0 * rho).ln_1p() / m as f64).exp_m1())
}

fn linear_slope(m: u64) -> f64 {
    let m = m as f64;
    ((m + 1.0) / (2.0 * PI * (1.0 - 2.0 / m))).sqrt()
}

/// `α·√((m+1) / (2π(1 − 2/m)))`, defined for `m ≥ 3`.
pub fn linear_bound(m: u64, alpha: f64) -> Result<f64, BoundsError> {
    check_alpha(alpha)?;
    check_m(m, 3)?;
    Ok(alpha * linear_slope(m))
}

/// `ρ·√(2π(1 − 2/m) / (m+1))`, defined for `m ≥ 3`.
pub fn linear_alpha_for_rho(m: u64, rho: f64) -> Result<f64, BoundsError> {
    check_rho(rho)?;
    check_m(m, 3)?;
    Ok(rho / linear_slope(m))
}

/// Largest α in `[0, 1 − 1e−9]` with `tv_bound_exact(m, α) ≤ ρ`, to within 1e−10.
pub fn calibrate_alpha(m: u64, rho: f64) -> Result<f64, BoundsError> {
    check_rho(rho)?;
    check_m(m, 1)?;
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-9);
    if tv_bound_exact(m, hi)? <= rho {
        return Ok(hi);
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if tv_bound_exact(m, mid)? <= rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// The drift speed δ at which [`alpha_max`] equals `alpha` for the given
/// `p0` and amplitude `beta`. Returns `beta` when even `δ = β` keeps the
/// asymmetry below `alpha`.
pub fn calibrate_delta(p0: f64, beta: f64, alpha: f64) -> Result<f64, BoundsError> {
    drift_params(p0, beta, 0.0)?;
    check_alpha(alpha)?;
    let d = (p0 - (1.0 - p0)).abs();
    let denom = 1.0 - 2.0 * alpha * (beta + d / 2.0);
    if !(denom > 0.0) {
        return Err(BoundsError::NonPositiveDenominator(denom));
    }
    let delta = 2.0 * alpha * (p0 * (1.0 - p0) - beta * beta - d * beta) / denom;
    if delta < 0.0 {
        return Err(BoundsError::Infeasible { alpha, delta });
    }
    Ok(delta.min(beta))
}

/// Which member of the bound family produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundFamily {
    Exact,
    Naive,
    Linear,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 3] = [BoundFamily::Exact, BoundFamily::Naive, BoundFamily::Linear];

    pub fn tv(self, m: u64, alpha: f64) -> Result<f64, BoundsError> {
        match self {
            BoundFamily::Exact => tv_bound_exact(m, alpha),
            BoundFamily::Naive => tv_bound_naive(m, alpha),
            BoundFamily::Linear => linear_bound(m, alpha),
        }
    }

    pub fn alpha_for_rho(self, m: u64, rho: f64) -> Result<f64, BoundsError> {
        match self {
            BoundFamily::Exact => calibrate_alpha(m, rho),
            BoundFamily::Naive => naive_alpha_for_rho(m, rho),
            BoundFamily::Linear => linear_alpha_for_rho(m, rho),
        }
    }
}

impl fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundFamily::Exact => "exact",
            BoundFamily::Naive => "naive",
            BoundFamily::Linear => "linear",
        })
    }
}

impl FromStr for BoundFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(BoundFamily::Exact),
            "naive" => Ok(BoundFamily::Naive),
            "linear" => Ok(BoundFamily::Linear),
            other => Err(format!("unknown bound '{other}' (expected exact, naive or linear)")),
        }
    }
}

/// A distance value together with the bound and inputs that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationReport {
    pub family: BoundFamily,
    pub m: u64,
    pub alpha: f64,
    pub rho: Option<f64>,
    pub value: f64,
}

impl VariationReport {
    /// The distance bound at `(m, α)`.
    pub fn for_alpha(family: BoundFamily, m: u64, alpha: f64) -> Result<Self, BoundsError> {
        Ok(Self { family, m, alpha, rho: None, value: family.tv(m, alpha)? })
    }

    /// The largest α certified for `ρ`, with the bound evaluated there.
    pub fn for_rho(family: BoundFamily, m: u64, rho: f64) -> Result<Self, BoundsError> {
        let alpha = family.alpha_for_rho(m, rho)?;
        let value = if alpha < 1.0 { family.tv(m, alpha)? } else { rho };
        Ok(Self { family, m, alpha, rho: Some(rho), value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn u_value_examples() {
        assert_eq!(u_value(0.5, 0.0, 0.0).unwrap(), 0.0);
        close(u_value(0.5, 0.1, -0.01).unwrap(), 0.01 / 0.482, 1e-15);
        close(u_value(0.5, 0.09, 0.01).unwrap(), u_value(0.5, 0.1, -0.01).unwrap(), 1e-15);
        assert!(u_value(1.5, 0.0, 0.1).is_err());
    }

    #[test]
    fn u_value_symmetry_on_grid() {
        for p0 in [0.3, 0.5, 0.65] {
            for eps in [-0.1, -0.03, 0.0, 0.07] {
                for gamma in [-0.02, 0.005, 0.02] {
                    close(u_value(p0, eps, gamma).unwrap(), u_value(p0, eps + gamma, -gamma).unwrap(), 1e-14);
                }
            }
        }
    }

    #[test]
    fn alpha_max_examples() {
        close(alpha_max(0.5, 0.1, 0.01).unwrap(), 0.020_746_887_966_804_98, 1e-12);
        close(alpha_max(0.6, 0.05, 0.01).unwrap(), 0.01 / 0.458, 1e-15);
        assert_eq!(alpha_max(0.3, 0.1, 0.0).unwrap(), 0.0);
        assert!(alpha_max(0.5, 0.6, 0.01).is_err());
        assert!(alpha_max(0.5, 0.1, 0.2).is_err());
    }

    #[test]
    fn alpha_max_is_the_corner_value() {
        for (p0, beta, delta) in [(0.5, 0.1, 0.01), (0.4, 0.05, 0.02), (0.7, 0.1, 0.02), (0.6, 0.05, 0.01)] {
            let p1: f64 = 1.0 - p0;
            let (eps, gamma) = if p1 >= p0 { (beta, -delta) } else { (-beta, delta) };
            close(alpha_max(p0, beta, delta).unwrap(), u_value(p0, eps, gamma).unwrap(), 1e-14);
        }
    }

    #[test]
    fn oracle_examples() {
        let g = u_max_oracle(0.5, 0.1, 0.01, 1e-3).unwrap();
        close(g.value, alpha_max(0.5, 0.1, 0.01).unwrap(), 1e-3);
        let g = u_max_oracle(0.7, 0.1, 0.02, 1e-3).unwrap();
        assert!(g.eps < 0.0, "{g:?}");
        close(g.value, alpha_max(0.7, 0.1, 0.02).unwrap(), 1e-3);
        assert_eq!(u_max_oracle(0.5, 0.1, 0.0, 1e-3).unwrap().value, 0.0);
        assert!(u_max_oracle(0.5, 0.1, 0.01, 0.0).is_err());
    }

    #[test]
    fn grid_hits_endpoints() {
        let pts: Vec<f64> = grid(-0.1, 0.1, 0.03).collect();
        assert_eq!(pts[0], -0.1);
        assert_eq!(*pts.last().unwrap(), 0.1);
        assert!(pts.windows(2).all(|w| w[1] - w[0] <= 0.03 + 1e-15));
    }

    #[test]
    fn deviation_sum_small_cases() {
        assert_eq!(product_deviation_sum(&[]), 0.0);
        close(product_deviation_sum(&[0.3]), 0.6, 1e-15);
        // |(1.2)(1.1) − 1| + |(1.2)(0.9) − 1| + |(0.8)(1.1) − 1| + |(0.8)(0.9) − 1|
        close(product_deviation_sum(&[0.2, 0.1]), 0.32 + 0.08 + 0.12 + 0.28, 1e-15);
    }

    #[test]
    fn deviation_sum_is_only_weakly_increasing() {
        // every product keeps its sign, so the second coordinate cancels
        assert_eq!(product_deviation_sum(&[0.5, 0.1]), product_deviation_sum(&[0.5, 0.2]));
        close(product_deviation_sum(&[0.5, 0.2]), 2.0, 1e-15);
        let mut prev = 0.0;
        for i in 0..100 {
            let g = product_deviation_sum(&[0.3, i as f64 / 100.0, 0.6]);
            assert!(g >= prev - 1e-15);
            prev = g;
        }
    }

    #[test]
    fn binomial_examples() {
        let b = Binomial::new(2, 0.5).unwrap();
        close(b.pmf(1).unwrap(), 0.5, 1e-15);
        let b = Binomial::new(2, 0.6).unwrap();
        close(b.pmf(2).unwrap(), 0.36, 1e-15);
        close(b.cdf(1).unwrap(), 0.64, 1e-15);
        assert!(b.pmf(3).is_err());
        assert!(Binomial::new(3, 1.2).is_err());
    }

    #[test]
    fn binomial_matches_direct_products() {
        for &(n, p) in &[(10u64, 0.3), (25, 0.5), (40, 0.85)] {
            let b = Binomial::new(n, p).unwrap();
            let mut coeff = 1.0f64;
            for k in 0..=n {
                let direct = coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
                close(b.pmf(k).unwrap(), direct, 1e-13 * direct.max(1e-300) + 1e-300);
                coeff = coeff * (n - k) as f64 / (k + 1) as f64;
            }
        }
    }

    #[test]
    fn cdf_sums_to_one_at_scale() {
        for &(n, p) in &[(1_000_000u64, 0.5), (1_000_000, 0.01), (123_457, 0.77)] {
            let b = Binomial::new(n, p).unwrap();
            close(b.cdf(n).unwrap(), 1.0, 1e-10);
            let mean = (n as f64 * p) as u64;
            let (lo, hi) = b.split(mean);
            close(lo + hi, 1.0, 1e-12);
        }
    }

    #[test]
    fn degenerate_binomials() {
        let b = Binomial::new(5, 0.0).unwrap();
        assert_eq!(b.pmf(0).unwrap(), 1.0);
        assert_eq!(b.cdf(0).unwrap(), 1.0);
        let b = Binomial::new(5, 1.0).unwrap();
        assert_eq!(b.pmf(5).unwrap(), 1.0);
        assert_eq!(b.cdf(4).unwrap(), 0.0);
        let b = Binomial::new(0, 0.3).unwrap();
        assert_eq!(b.pmf(0).unwrap(), 1.0);
    }

    #[test]
    fn reg_inc_beta_examples() {
        close(reg_inc_beta(0.5, 1.0, 1.0).unwrap(), 0.5, 1e-15);
        close(reg_inc_beta(0.5, 1.0, 2.0).unwrap(), 0.75, 1e-15);
        close(reg_inc_beta(0.3, 2.0, 2.0).unwrap(), 0.216, 1e-15);
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        assert!(reg_inc_beta(1.2, 2.0, 3.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 3.0).is_err());
    }

    #[test]
    fn reg_inc_beta_half_integer() {
        // I_x(1/2, 1/2) = (2/π) asin(√x)
        for x in [0.01, 0.2, 0.5, 0.9] {
            close(reg_inc_beta(x, 0.5, 0.5).unwrap(), 2.0 / PI * x.sqrt().asin(), 1e-13);
        }
    }

    #[test]
    fn default_cap_suffices_at_scale() {
        for &(a, b) in &[(500_000u64, 500_001u64), (300_000, 700_001)] {
            let mean = a as f64 / (a + b) as f64;
            for dx in [-2e-3, -5e-4, 0.0, 3e-4, 1e-3] {
                let x = mean + dx;
                close(
                    reg_inc_beta(x, a as f64, b as f64).unwrap(),
                    reg_inc_beta_integer(x, a, b).unwrap(),
                    1e-10,
                );
            }
        }
        assert!(matches!(
            reg_inc_beta_capped(0.5, 1000.0, 1000.0, 3),
            Err(BoundsError::NoConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn integer_path_examples() {
        close(reg_inc_beta_integer(0.3, 2, 2).unwrap(), 0.216, 1e-15);
        close(reg_inc_beta_integer(0.5, 1, 2).unwrap(), 0.75, 1e-15);
        assert!(reg_inc_beta_integer(0.5, 0, 2).is_err());
    }

    #[test]
    fn crossing_examples() {
        assert_eq!(crossing_index(1, 0.5, 0.1).unwrap(), 1);
        assert_eq!(crossing_index(2, 0.5, 0.1).unwrap(), 2);
        assert_eq!(crossing_index(100, 0.5, 0.05).unwrap(), 53);
        assert_eq!(crossing_index(7, 0.4, 0.6).unwrap(), 7);
        assert!(crossing_index(5, 0.5, 0.0).is_err());
        assert!(crossing_index(5, 0.5, 0.6).is_err());
    }

    #[test]
    fn binom_tv_examples() {
        close(binom_tv(1, 0.5, 0.1).unwrap(), 0.1, 1e-15);
        close(binom_tv(2, 0.5, 0.1).unwrap(), 0.11, 1e-15);
        assert_eq!(binom_tv(30, 0.4, 0.0).unwrap(), 0.0);
        close(binom_tv(3, 0.0, 0.2).unwrap(), 1.0 - 0.8f64.powi(3), 1e-15);
        assert!(binom_tv(3, 0.5, 0.6).is_err());
    }

    #[test]
    fn bound_examples() {
        close(tv_bound_exact(2, 0.2).unwrap(), 0.11, 1e-15);
        assert_eq!(tv_bound_exact(40, 0.0).unwrap(), 0.0);
        close(tv_bound_exact(1, 0.2).unwrap(), 0.1, 1e-15);
        assert!(tv_bound_exact(0, 0.1).is_err());
        assert!(tv_bound_exact(3, 1.0).is_err());

        close(tv_bound_naive(2, 0.1).unwrap(), 0.105, 1e-15);
        close(naive_alpha_for_rho(1, 0.5).unwrap(), 1.0, 1e-15);
        close(naive_alpha_for_rho(2, 0.5).unwrap(), 2f64.sqrt() - 1.0, 1e-15);

        close(linear_alpha_for_rho(1_000_000, 0.01).unwrap(), 2.5066e-5, 1e-9);
        assert_eq!(linear_bound(10, 0.0).unwrap(), 0.0);
        assert!(tv_bound_exact(100, 0.01).unwrap() <= linear_bound(100, 0.01).unwrap());
        assert!(matches!(linear_bound(2, 0.1), Err(BoundsError::BlockLength { m: 2, min: 3 })));
        assert!(linear_alpha_for_rho(1, 0.1).is_err());
    }

    #[test]
    fn calibration_examples() {
        close(calibrate_alpha(2, 0.11).unwrap(), 0.2, 1e-8);
        assert!(calibrate_alpha(50, 1e-14).unwrap() < 1e-12);
        close(calibrate_alpha(1, 0.999_999_999_9).unwrap(), 1.0 - 1e-9, 1e-12);
        assert!(calibrate_alpha(2, 0.0).is_err());

        close(calibrate_delta(0.5, 0.1, 0.020_746_9).unwrap(), 0.01, 1e-7);
        let alpha = alpha_max(0.62, 0.07, 0.013).unwrap();
        close(calibrate_delta(0.62, 0.07, alpha).unwrap(), 0.013, 1e-14);
        assert_eq!(calibrate_delta(0.5, 0.1, 0.9).unwrap(), 0.1);
        assert!(calibrate_delta(0.5, 0.6, 0.1).is_err());
        assert!(calibrate_delta(0.5, 0.1, 1.0).is_err());
    }

    #[test]
    fn exact_bound_increases_in_alpha() {
        for m in [1u64, 2, 5, 64, 1000] {
            let mut prev = 0.0;
            for i in 1..40 {
                let v = tv_bound_exact(m, i as f64 / 40.0).unwrap();
                assert!(v > prev || (v == 1.0 && prev > 1.0 - 1e-12), "m = {m}");
                prev = v;
            }
        }
    }

    #[test]
    fn family_parsing_and_reports() {
        assert_eq!("linear".parse::<BoundFamily>().unwrap(), BoundFamily::Linear);
        assert!("quadratic".parse::<BoundFamily>().is_err());
        let r = VariationReport::for_alpha(BoundFamily::Exact, 2, 0.2).unwrap();
        close(r.value, 0.11, 1e-15);
        let r = VariationReport::for_rho(BoundFamily::Exact, 2, 0.11).unwrap();
        close(r.alpha, 0.2, 1e-8);
        assert_eq!(r.rho, Some(0.11));
    }
}
