//! Exact finite probability spaces over `Bⁿ`, built by enumeration.
//!
//! Tables are indexed by the integer value of a string read MSB-first, so
//! index order is lexicographic order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::bits::BitString;
use crate::normalize::NormalizationMethod;
use crate::sources::{DriftTrace, MarkovTable, PairDist, SourceError, SourceSpec};

/// Largest string length accepted by the enumerating operations.
pub const ENUMERATION_MAX_LEN: usize = 26;
/// Largest table length accepted by [`check_independence`].
pub const INDEPENDENCE_MAX_LEN: usize = 16;
/// Tolerance for exact identities in double precision.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("length {n} exceeds the enumeration guard {max}")]
    GuardExceeded { n: usize, max: usize },
    #[error("tables have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("output length m = {m} is outside 1..={max} for n = {n}")]
    OutputLength { n: usize, m: usize, max: usize },
    #[error("no probability mass on outputs of length {m}; the source is degenerate")]
    DegenerateSource { m: usize },
    #[error("drift trace has {available} entries, string has {needed} bits")]
    TraceTooShort { needed: usize, available: usize },
    #[error("alpha = {0} must lie in [0, 1)")]
    AlphaRange(f64),
    #[error("invalid distribution table: {0}")]
    InvalidTable(String),
    #[error(transparent)]
    Source(#[from] SourceError),
}

fn guard(n: usize, max: usize) -> Result<(), ExactError> {
    if n > max {
        Err(ExactError::GuardExceeded { n, max })
    } else {
        Ok(())
    }
}

/// A probability assignment to every string of one fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    len: usize,
    probs: Vec<f64>,
}

impl DistributionTable {
    /// Checks non-negativity and that the entries sum to 1 within [`EXACT_TOL`].
    pub fn new(len: usize, probs: Vec<f64>) -> Result<Self, ExactError> {
        guard(len, ENUMERATION_MAX_LEN)?;
        if probs.len() != 1usize << len {
            return Err(ExactError::InvalidTable(format!(
                "length {len} needs {} entries, got {}",
                1usize << len,
                probs.len()
            )));
        }
        if let Some(i) = probs.iter().position(|p| !(*p >= 0.0)) {
            return Err(ExactError::InvalidTable(format!(
                "entry {} is {}",
                BitString::from_u64(i as u64, len),
                probs[i]
            )));
        }
        let total = pairwise_sum(&probs);
        if (total - 1.0).abs() > EXACT_TOL {
            return Err(ExactError::InvalidTable(format!("entries sum to {total}")));
        }
        Ok(Self { len, probs })
    }

    /// Table from string/probability pairs; unlisted strings get 0.
    pub fn from_entries<'a>(
        len: usize,
        entries: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, ExactError> {
        guard(len, ENUMERATION_MAX_LEN)?;
        let mut probs = vec![0.0; 1 << len];
        for (s, p) in entries {
            let x: BitString = s
                .parse()
                .map_err(|e| ExactError::InvalidTable(format!("'{s}': {e}")))?;
            if x.len() != len {
                return Err(ExactError::InvalidTable(format!("'{s}' does not have length {len}")));
            }
            probs[x.to_u64() as usize] = p;
        }
        Self::new(len, probs)
    }

    /// Divides non-negative weights by their total.
    pub fn from_weights(len: usize, weights: Vec<f64>) -> Result<Self, ExactError> {
        let total = pairwise_sum(&weights);
        if !(total > 0.0) {
            return Err(ExactError::DegenerateSource { m: len });
        }
        Self::new(len, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: &BitString) -> f64 {
        assert_eq!(x.len(), self.len, "string length does not match table");
        self.probs[x.to_u64() as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (BitString, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (BitString::from_u64(i as u64, self.len), p))
    }

    /// Probability of the event `B^offset · x · B^(n − offset − |x|)`.
    pub fn window_prob(&self, offset: usize, x: &BitString) -> f64 {
        assert!(offset + x.len() <= self.len, "window exceeds table length");
        let shift = self.len - offset - x.len();
        let mask = if x.is_empty() { 0 } else { (1u64 << x.len()) - 1 };
        let target = x.to_u64();
        self.probs
            .iter()
            .enumerate()
            .filter(|(i, _)| ((*i as u64) >> shift) & mask == target)
            .map(|(_, p)| p)
            .sum()
    }

    /// `string,probability` rows in lexicographic order, with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("string,probability\n");
        for (x, p) in self.iter() {
            let _ = writeln!(out, "{x},{p:e}");
        }
        out
    }
}

/// Tree summation; the reduction order depends only on the slice length.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1..=16 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `p0^{#0(x)} · p1^{#1(x)}`.
pub fn pn_prob(x: &BitString, p0: f64) -> f64 {
    p0.powi(x.zeros() as i32) * (1.0 - p0).powi(x.ones() as i32)
}

/// `q_1(x) = ∏ q_i^{x_i}` with `q_i^0 = p0 − ε_i` and `q_i^1 = p1 + ε_i`.
pub fn rn_prob(x: &BitString, trace: &DriftTrace, p0: f64) -> Result<f64, ExactError> {
    if trace.len() < x.len() {
        return Err(ExactError::TraceTooShort {
            needed: x.len(),
            available: trace.len(),
        });
    }
    Ok(x.iter()
        .zip(trace.epsilons())
        .map(|(b, e)| if b { 1.0 - p0 + e } else { p0 - e })
        .product())
}

/// Per-bit conditional law used by the enumerator.
enum BitModel {
    Constant { p0: f64 },
    Independent { q0: Vec<f64> },
    Markov { p0: f64, table: MarkovTable },
    Pairwise(Vec<PairDist>),
}

impl BitModel {
    fn from_spec(spec: &SourceSpec, n: usize) -> Result<Self, ExactError> {
        spec.validate()?;
        Ok(match spec {
            SourceSpec::Constant { p0 } => BitModel::Constant { p0: *p0 },
            SourceSpec::Drifting { params, .. } => {
                let trace = spec.deterministic_trace(n)?.expect("drifting source has a trace");
                BitModel::Independent {
                    q0: trace.epsilons().iter().map(|e| params.p0 - e).collect(),
                }
            }
            SourceSpec::Markov { p0, table, .. } => BitModel::Markov {
                p0: *p0,
                table: table.clone(),
            },
            SourceSpec::Pairwise(pairs) => BitModel::Pairwise(pairs.clone()),
        })
    }

    /// Probability that bit `i` (0-based) equals `bit`, given the `i` earlier
    /// bits held in the low bits of `prefix`.
    fn prob(&self, i: usize, prefix: u64, bit: bool) -> f64 {
        let q0 = match self {
            BitModel::Constant { p0 } => *p0,
            BitModel::Independent { q0 } => q0[i],
            BitModel::Markov { p0, table } => {
                let k = table.k();
                if i < k {
                    *p0
                } else {
                    table.p0(prefix & ((1u64 << k) - 1))
                }
            }
            BitModel::Pairwise(pairs) => {
                let pair = &pairs[(i / 2) % pairs.len()];
                if i % 2 == 0 {
                    pair.first(false)
                } else {
                    let first = prefix & 1 == 1;
                    let marginal = pair.first(first);
                    if marginal == 0.0 {
                        return 0.0;
                    }
                    return pair.prob(first, bit) / marginal;
                }
            }
        };
        if bit {
            1.0 - q0
        } else {
            q0
        }
    }
}

/// Calls `visit(x, P(x))` for every `x ∈ Bⁿ` of positive probability.
fn enumerate(model: &BitModel, n: usize, visit: &mut impl FnMut(u64, f64)) {
    fn walk(model: &BitModel, n: usize, i: usize, prefix: u64, prob: f64, visit: &mut impl FnMut(u64, f64)) {
        if i == n {
            visit(prefix, prob);
            return;
        }
        for bit in [false, true] {
            let p = prob * model.prob(i, prefix, bit);
            if p > 0.0 {
                walk(model, n, i + 1, prefix << 1 | bit as u64, p, visit);
            }
        }
    }
    walk(model, n, 0, 0, 1.0, visit);
}

/// The exact law of the first `n` bits of `spec`.
///
/// Drifting sources need a trace fixed by the source description (sine, fixed, adversarial);
/// a random walk must first be realized and passed as a fixed trace.
pub fn exact_source_dist(spec: &SourceSpec, n: usize) -> Result<DistributionTable, ExactError> {
    guard(n, ENUMERATION_MAX_LEN)?;
    let model = BitModel::from_spec(spec, n)?;
    let mut probs = vec![0.0; 1 << n];
    enumerate(&model, n, &mut |x, p| probs[x as usize] = p);
    DistributionTable::new(n, probs)
}

/// Von Neumann output of the `n`-bit integer `x`, as `(value, length)`.
fn vn_u64(x: u64, n: usize) -> (u64, usize) {
    let mut value = 0u64;
    let mut len = 0usize;
    for j in 0..n / 2 {
        let shift = n - 2 * j - 2;
        let pair = (x >> shift) & 0b11;
        if pair == 0b01 || pair == 0b10 {
            value = value << 1 | (pair >> 1);
            len += 1;
        }
    }
    (value, len)
}

fn max_output_len(method: NormalizationMethod, n: usize) -> usize {
    match method {
        NormalizationMethod::VonNeumann => n / 2,
        NormalizationMethod::Peres => n,
        NormalizationMethod::Parity { block } => n / block,
    }
}

fn for_each_output(
    spec: &SourceSpec,
    n: usize,
    method: NormalizationMethod,
    mut visit: impl FnMut(u64, usize, f64),
) -> Result<(), ExactError> {
    guard(n, ENUMERATION_MAX_LEN)?;
    let model = BitModel::from_spec(spec, n)?;
    match method {
        NormalizationMethod::VonNeumann => enumerate(&model, n, &mut |x, p| {
            let (y, len) = vn_u64(x, n);
            visit(y, len, p);
        }),
        _ => enumerate(&model, n, &mut |x, p| {
            let y = method.apply(&BitString::from_u64(x, n));
            if y.len() <= 64 {
                visit(y.to_u64(), y.len(), p);
            }
        }),
    }
    Ok(())
}

/// `P_{n→m}`: the law of the von Neumann output of `n` source bits,
/// conditioned on the output having exactly `m` bits.
pub fn normalized_dist(spec: &SourceSpec, n: usize, m: usize) -> Result<DistributionTable, ExactError> {
    normalized_dist_with(spec, n, m, NormalizationMethod::VonNeumann)
}

/// As [`normalized_dist`] for any normalisation method.
pub fn normalized_dist_with(
    spec: &SourceSpec,
    n: usize,
    m: usize,
    method: NormalizationMethod,
) -> Result<DistributionTable, ExactError> {
    guard(n, ENUMERATION_MAX_LEN)?;
    let max = max_output_len(method, n);
    if m < 1 || m > max {
        return Err(ExactError::OutputLength { n, m, max });
    }
    let mut weights = vec![0.0; 1 << m];
    for_each_output(spec, n, method, |y, len, p| {
        if len == m {
            weights[y as usize] += p;
        }
    })?;
    DistributionTable::from_weights(m, weights)
}

/// For every output length reached with positive probability: the mass of
/// that length and the conditional law of the output given the length.
pub fn output_dists_by_length(
    spec: &SourceSpec,
    n: usize,
    method: NormalizationMethod,
) -> Result<BTreeMap<usize, (f64, DistributionTable)>, ExactError> {
    let mut buckets: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for_each_output(spec, n, method, |y, len, p| {
        buckets.entry(len).or_insert_with(|| vec![0.0; 1 << len])[y as usize] += p;
    })?;
    buckets
        .into_iter()
        .map(|(len, w)| {
            let mass = pairwise_sum(&w);
            Ok((len, (mass, DistributionTable::from_weights(len, w)?)))
        })
        .collect()
}

/// `U_m`: every string of length `m` gets `2^{−m}`.
pub fn uniform_dist(m: usize) -> Result<DistributionTable, ExactError> {
    guard(m, ENUMERATION_MAX_LEN)?;
    let p = (-(m as f64)).exp2();
    DistributionTable::new(m, vec![p; 1 << m])
}

/// `Δ(P, Q) = ½ Σ_x |P(x) − Q(x)|`.
pub fn total_variation(p: &DistributionTable, q: &DistributionTable) -> Result<f64, ExactError> {
    if p.len != q.len {
        return Err(ExactError::LengthMismatch {
            left: p.len,
            right: q.len,
        });
    }
    let diffs: Vec<f64> = p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).collect();
    Ok((0.5 * pairwise_sum(&diffs)).min(1.0))
}

/// Outcome of [`check_independence`].
#[derive(Debug, Clone, PartialEq)]
pub enum Independence {
    Independent,
    /// `P(x_1…x_k B^{n−k}) = lhs` differs from
    /// `P(x_1…x_{k−1} B^{n−k+1}) · P(B^{k−1} x_k B^{n−k}) = rhs`.
    Counterexample {
        k: usize,
        prefix: BitString,
        lhs: f64,
        rhs: f64,
    },
}

/// Tests prefix/next-bit independence at every position, reporting the first
/// violation (smallest `k`, then lexicographically smallest prefix).
pub fn check_independence(table: &DistributionTable) -> Result<Independence, ExactError> {
    let n = table.len();
    guard(n, INDEPENDENCE_MAX_LEN)?;
    // prefix_mass[k][v]: probability of the prefix v ∈ B^k
    let mut prefix_mass: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    prefix_mass[n] = table.probs.clone();
    for k in (0..n).rev() {
        prefix_mass[k] = prefix_mass[k + 1].chunks(2).map(|c| c[0] + c[1]).collect();
    }
    for k in 1..=n {
        let at_k = &prefix_mass[k];
        let mut position = [0.0f64; 2];
        for (v, p) in at_k.iter().enumerate() {
            position[v & 1] += p;
        }
        for (v, &lhs) in at_k.iter().enumerate() {
            let rhs = prefix_mass[k - 1][v >> 1] * position[v & 1];
            if (lhs - rhs).abs() > EXACT_TOL {
                return Ok(Independence::Counterexample {
                    k,
                    prefix: BitString::from_u64(v as u64, k),
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(Independence::Independent)
}

/// Which way the worst-case per-bit asymmetry leans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lean {
    /// Zeros favoured: each bit is 0 with probability `(1 + α)/2`.
    Zero,
    /// Ones favoured: each bit is 0 with probability `(1 − α)/2`.
    One,
}

/// `∏_i (1 + s·(−1)^{y_i}·α)/2` with `s = +1` for [`Lean::Zero`], `−1` for [`Lean::One`].
pub fn worst_case_product_dist(alpha: f64, m: usize, lean: Lean) -> Result<DistributionTable, ExactError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(ExactError::AlphaRange(alpha));
    }
    guard(m, ENUMERATION_MAX_LEN)?;
    let s = match lean {
        Lean::Zero => 1.0,
        Lean::One => -1.0,
    };
    let p_zero = (1.0 + s * alpha) / 2.0;
    let p_one = (1.0 - s * alpha) / 2.0;
    let probs = (0..1u64 << m)
        .map(|y| {
            let ones = y.count_ones() as i32;
            p_zero.powi(m as i32 - ones) * p_one.powi(ones)
        })
        .collect();
    DistributionTable::new(m, probs)
}
