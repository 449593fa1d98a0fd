//! Empirical block statistics of bit streams and the bound sweeps.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::bits::{BitString, QaryString};
use crate::bounds::{alpha_max, linear_bound, tv_bound_exact, tv_bound_naive, BoundsError};
use crate::exactdist::{uniform_dist, DistributionTable, ExactError, ENUMERATION_MAX_LEN};

/// Largest block length accepted by [`borel_counts`].
pub const BOREL_MAX_BLOCK: usize = 20;

/// Deviation, in standard deviations, tolerated by the statistical checks.
pub const SIGMA_TOLERANCE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("block length must be at least 1")]
    ZeroBlock,
    #[error("block length {m} exceeds the limit {max}")]
    BlockTooLong { m: usize, max: usize },
    #[error("input of length {len} is shorter than the block length {m}")]
    TooShort { len: usize, m: usize },
    #[error("unknown counting mode '{0}' (expected overlapping or non-overlapping)")]
    UnknownMode(String),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

fn check_block(len: usize, m: usize, max: usize) -> Result<(), StatsError> {
    if m == 0 {
        return Err(StatsError::ZeroBlock);
    }
    if m > max {
        return Err(StatsError::BlockTooLong { m, max });
    }
    if len < m {
        return Err(StatsError::TooShort { len, m });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountMode {
    #[default]
    NonOverlapping,
    Overlapping,
}

impl fmt::Display for CountMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CountMode::NonOverlapping => "non-overlapping",
            CountMode::Overlapping => "overlapping",
        })
    }
}

impl FromStr for CountMode {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "non-overlapping" | "nonoverlapping" | "disjoint" => Ok(CountMode::NonOverlapping),
            "overlapping" => Ok(CountMode::Overlapping),
            other => Err(StatsError::UnknownMode(other.to_string())),
        }
    }
}

/// Block counts of one length in one string.
#[derive(Debug, Clone, PartialEq)]
pub struct BorelReport {
    pub m: usize,
    pub mode: CountMode,
    /// `counts[v]` is the number of occurrences of the block with value `v`.
    pub counts: Vec<u64>,
    /// Number of blocks scanned.
    pub total: u64,
}

impl BorelReport {
    /// Count expected for each block under the uniform law.
    pub fn expected(&self) -> f64 {
        self.total as f64 * (-(self.m as f64)).exp2()
    }

    /// Binomial standard deviation of each count under the uniform law.
    pub fn sigma(&self) -> f64 {
        let q = (-(self.m as f64)).exp2();
        (self.total as f64 * q * (1.0 - q)).sqrt()
    }

    /// `(count − expected) / σ` per block.
    pub fn deviations(&self) -> Vec<f64> {
        let (e, s) = (self.expected(), self.sigma());
        self.counts
            .iter()
            .map(|&c| if s > 0.0 { (c as f64 - e) / s } else { 0.0 })
            .collect()
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.deviations().into_iter().fold(0.0, |a, d| a.max(d.abs()))
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.max_abs_deviation() <= sigmas
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,mode,block,count,expected,deviation_sigma\n");
        let e = self.expected();
        for (v, (c, d)) in self.counts.iter().zip(self.deviations()).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.m,
                self.mode,
                BitString::from_u64(v as u64, self.m),
                c,
                format_sig(e, 12),
                format_sig(d, 12)
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "m = {} ({}), {} blocks, expected {} each, sigma {}\n",
            self.m,
            self.mode,
            self.total,
            format_sig(self.expected(), 12),
            format_sig(self.sigma(), 6)
        );
        let width = self.m.max(5);
        let _ = writeln!(out, "{:<width$}  {:>12}  {:>10}", "block", "count", "sigma");
        for (v, (c, d)) in self.counts.iter().zip(self.deviations()).enumerate() {
            let block = BitString::from_u64(v as u64, self.m).to_string();
            let _ = writeln!(out, "{block:<width$}  {c:>12}  {d:>10.3}");
        }
        out
    }
}

/// Occurrences of every `m`-bit block in `x`.
pub fn borel_counts(x: &BitString, m: usize, mode: CountMode) -> Result<BorelReport, StatsError> {
    check_block(x.len(), m, BOREL_MAX_BLOCK)?;
    let mut counts = vec![0u64; 1 << m];
    let total = match mode {
        CountMode::NonOverlapping => {
            let blocks = x.len() / m;
            for j in 0..blocks {
                counts[x.block_value(j * m, m) as usize] += 1;
            }
            blocks
        }
        CountMode::Overlapping => {
            let mask = (1u64 << m) - 1;
            let mut window = 0u64;
            for (i, b) in x.iter().enumerate() {
                window = (window << 1 | b as u64) & mask;
                if i + 1 >= m {
                    counts[window as usize] += 1;
                }
            }
            x.len() - m + 1
        }
    };
    Ok(BorelReport { m, mode, counts, total: total as u64 })
}

/// Relative frequencies of the disjoint `m`-blocks of `x`.
pub fn empirical_block_dist(x: &BitString, m: usize) -> Result<DistributionTable, StatsError> {
    check_block(x.len(), m, ENUMERATION_MAX_LEN.min(BOREL_MAX_BLOCK))?;
    let report = borel_counts(x, m, CountMode::NonOverlapping)?;
    let weights = report.counts.iter().map(|&c| c as f64).collect();
    Ok(DistributionTable::from_weights(m, weights)?)
}

/// An empirical distance to uniform and the sampling slack around it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalTv {
    pub value: f64,
    /// `½ Σ_y 4·√(u(1−u)/N)` with `u = 2^{−m}`.
    pub slack: f64,
    pub blocks: u64,
}

/// `Δ(empirical m-block law of x, U_m)`.
pub fn empirical_tv_to_uniform(x: &BitString, m: usize) -> Result<EmpiricalTv, StatsError> {
    let dist = empirical_block_dist(x, m)?;
    let blocks = (x.len() / m) as u64;
    let value = crate::exactdist::total_variation(&dist, &uniform_dist(m)?)?;
    Ok(EmpiricalTv { value, slack: tv_slack(&uniform_dist(m)?, blocks), blocks })
}

/// `½ Σ_y 4·√(q_y(1−q_y)/N)`: the spread of an `N`-sample estimate of `Δ`
/// around the distance of the law `q`.
pub fn tv_slack(q: &DistributionTable, samples: u64) -> f64 {
    if samples == 0 {
        return f64::INFINITY;
    }
    let n = samples as f64;
    0.5 * q
        .probs()
        .iter()
        .map(|p| SIGMA_TOLERANCE * (p * (1.0 - p) / n).sqrt())
        .sum::<f64>()
}

/// Counts of the disjoint `len`-symbol blocks of `x`; block `(s_1, …, s_len)`
/// is stored at `Σ (s_j − 1)·Q^{len−j}`.
pub fn qary_block_counts(x: &QaryString, len: usize) -> Result<Vec<u64>, StatsError> {
    let q = x.alphabet() as usize;
    let cells = q.checked_pow(len as u32).filter(|c| *c <= 1 << BOREL_MAX_BLOCK);
    let Some(cells) = cells else {
        return Err(StatsError::BlockTooLong { m: len, max: BOREL_MAX_BLOCK });
    };
    check_block(x.len(), len, usize::MAX)?;
    let mut counts = vec![0u64; cells];
    for block in x.symbols().chunks_exact(len) {
        let idx = block.iter().fold(0usize, |acc, &s| acc * q + (s as usize - 1));
        counts[idx] += 1;
    }
    Ok(counts)
}

/// `%.{digits}g`-style formatting: `digits` significant digits, trailing
/// zeros removed, exponent form outside `[1e−4, 10^digits)`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Drift parameters attached to a sweep row when α came from [`alpha_max`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftPoint {
    pub p0: f64,
    pub beta: f64,
    pub delta: f64,
}

/// One point of a bound sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub drift: Option<DriftPoint>,
    pub m: u64,
    pub alpha: f64,
    pub tv_exact: f64,
    /// Absent for `m < 3`, where the linear bound is undefined.
    pub tv_linear: Option<f64>,
    pub tv_naive: f64,
}

fn sweep_row(m: u64, alpha: f64, drift: Option<DriftPoint>) -> Result<SweepRow, StatsError> {
    Ok(SweepRow {
        drift,
        m,
        alpha,
        tv_exact: tv_bound_exact(m, alpha)?,
        tv_linear: if m >= 3 { Some(linear_bound(m, alpha)?) } else { None },
        tv_naive: tv_bound_naive(m, alpha)?,
    })
}

/// Every bound at every `(m, α)`; rows grouped by `m` in the given order.
pub fn sweep_alpha(ms: &[u64], alphas: &[f64]) -> Result<Vec<SweepRow>, StatsError> {
    ms.iter()
        .flat_map(|&m| alphas.iter().map(move |&a| sweep_row(m, a, None)))
        .collect()
}

/// Every bound at `α = alpha_max(p0, β, δ)` for each drift point and `m`.
pub fn sweep_drift(ms: &[u64], points: &[DriftPoint]) -> Result<Vec<SweepRow>, StatsError> {
    let mut rows = Vec::new();
    for pt in points {
        let alpha = alpha_max(pt.p0, pt.beta, pt.delta)?;
        for &m in ms {
            rows.push(sweep_row(m, alpha, Some(*pt))?);
        }
    }
    Ok(rows)
}

/// `count` points spaced evenly in log scale from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i + 1 == count {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// CSV with header `m,alpha,tv_exact,tv_linear,tv_naive`, prefixed by
/// `p0,beta,delta` when the rows carry drift points.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let drift = rows.iter().any(|r| r.drift.is_some());
    let mut out = String::new();
    if drift {
        out.push_str("p0,beta,delta,");
    }
    out.push_str("m,alpha,tv_exact,tv_linear,tv_naive\n");
    for r in rows {
        if drift {
            let d = r.drift.expect("drift sweep rows all carry a drift point");
            let _ = write!(out, "{},{},{},", format_sig(d.p0, 12), format_sig(d.beta, 12), format_sig(d.delta, 12));
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.m,
            format_sig(r.alpha, 12),
            format_sig(r.tv_exact, 12),
            r.tv_linear.map(|v| format_sig(v, 12)).unwrap_or_default(),
            format_sig(r.tv_naive, 12)
        );
    }
    out
}
