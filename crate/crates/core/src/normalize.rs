//! Un-biasing transformations.
//!
//! Von Neumann maps each disjoint pair `01 → 0`, `10 → 1` and drops `00`, `11`;
//! a trailing odd bit is ignored. Peres recycles the XOR stream and the
//! discarded pairs. The parity method XORs fixed-size blocks. The q-ary
//! symbol deletion erases one letter of the alphabet.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bits::{BitString, QaryString};

/// Largest `n` for which [`vn_preimage`] enumerates.
pub const PREIMAGE_MAX_LEN: usize = 26;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("parity block length {0} must be at least 2")]
    BlockTooShort(usize),
    #[error("preimage length n = {n} exceeds the enumeration guard {PREIMAGE_MAX_LEN}")]
    GuardExceeded { n: usize },
    #[error("preimage length n = {n} is shorter than twice the output length {m}")]
    TooShort { n: usize, m: usize },
    #[error("symbol {symbol} is not in the alphabet 1..={alphabet}")]
    UnknownSymbol { symbol: u16, alphabet: u16 },
    #[error("unknown method '{0}' (expected vn|peres|parity)")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationMethod {
    VonNeumann,
    Peres,
    Parity { block: usize },
}

impl NormalizationMethod {
    pub fn parity(block: usize) -> Result<Self, NormalizeError> {
        if block < 2 {
            return Err(NormalizeError::BlockTooShort(block));
        }
        Ok(NormalizationMethod::Parity { block })
    }

    pub fn apply(&self, x: &BitString) -> BitString {
        match *self {
            NormalizationMethod::VonNeumann => vn_normalize(x),
            NormalizationMethod::Peres => peres_normalize(x),
            NormalizationMethod::Parity { block } => {
                parity_normalize(x, block).expect("block length validated at construction")
            }
        }
    }
}

impl fmt::Display for NormalizationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizationMethod::VonNeumann => f.write_str("vn"),
            NormalizationMethod::Peres => f.write_str("peres"),
            NormalizationMethod::Parity { block } => write!(f, "parity({block})"),
        }
    }
}

impl FromStr for NormalizationMethod {
    type Err = NormalizeError;

    /// `vn`, `peres`, or `parity` (block 2) / `parity:L`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vn" | "von-neumann" => Ok(NormalizationMethod::VonNeumann),
            "peres" => Ok(NormalizationMethod::Peres),
            "parity" => NormalizationMethod::parity(2),
            other => match other.strip_prefix("parity:").and_then(|l| l.parse().ok()) {
                Some(block) => NormalizationMethod::parity(block),
                None => Err(NormalizeError::UnknownMethod(other.to_string())),
            },
        }
    }
}

/// `F(b1 b2)`: `None` for an equal pair, otherwise the first bit.
#[inline]
pub fn vn_pair(b1: bool, b2: bool) -> Option<bool> {
    (b1 != b2).then_some(b1)
}

/// `f(b) = b·b̄`, the pair that [`vn_pair`] maps back to `b`.
#[inline]
pub fn vn_encode(b: bool) -> (bool, bool) {
    (b, !b)
}

pub fn vn_normalize(x: &BitString) -> BitString {
    let mut out = BitString::with_capacity(x.len() / 4);
    for j in 0..x.len() / 2 {
        if let Some(b) = vn_pair(x.bit(2 * j), x.bit(2 * j + 1)) {
            out.push(b);
        }
    }
    out
}

/// Incremental von Neumann normalisation over a stream of chunks.
///
/// A dangling odd bit is held until the next chunk arrives, so the output
/// equals [`vn_normalize`] of the concatenated input for any chunking.
#[derive(Debug, Default)]
pub struct VnStream {
    carry: Option<bool>,
}

impl VnStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, chunk: &BitString, out: &mut BitString) {
        for b in chunk.iter() {
            match self.carry.take() {
                None => self.carry = Some(b),
                Some(first) => {
                    if let Some(y) = vn_pair(first, b) {
                        out.push(y);
                    }
                }
            }
        }
    }

    /// True when an unpaired bit is pending; it is dropped if the stream ends here.
    pub fn has_pending(&self) -> bool {
        self.carry.is_some()
    }
}

/// All `z ∈ Bⁿ` with `vn_normalize(z) = y` whose output has exactly `|y|` bits,
/// in lexicographic order.
///
/// Members have the form `u_1 f(y_1) … u_m f(y_m) u_{m+1} v` with every
/// `u_i ∈ {00, 11}*` and `v` a single trailing bit when `n` is odd.
pub fn vn_preimage(y: &BitString, n: usize) -> Result<Vec<BitString>, NormalizeError> {
    if n > PREIMAGE_MAX_LEN {
        return Err(NormalizeError::GuardExceeded { n });
    }
    let m = y.len();
    if n < 2 * m {
        return Err(NormalizeError::TooShort { n, m });
    }
    let pairs = n / 2;
    let mut out = Vec::new();
    let mut prefix = BitString::with_capacity(n);
    fill_pairs(y, 0, pairs, n % 2 == 1, &mut prefix, &mut out);
    out.sort();
    Ok(out)
}

fn fill_pairs(
    y: &BitString,
    used: usize,
    pairs_left: usize,
    odd: bool,
    prefix: &mut BitString,
    out: &mut Vec<BitString>,
) {
    let needed = y.len() - used;
    if pairs_left == 0 {
        if odd {
            for v in [false, true] {
                let mut z = prefix.clone();
                z.push(v);
                out.push(z);
            }
        } else {
            out.push(prefix.clone());
        }
        return;
    }
    let mark = prefix.len();
    if pairs_left > needed {
        for d in [false, true] {
            prefix.push(d);
            prefix.push(d);
            fill_pairs(y, used, pairs_left - 1, odd, prefix, out);
            prefix.truncate(mark);
        }
    }
    if needed > 0 {
        let (a, b) = vn_encode(y.bit(used));
        prefix.push(a);
        prefix.push(b);
        fill_pairs(y, used + 1, pairs_left - 1, odd, prefix, out);
        prefix.truncate(mark);
    }
}

/// Peres' iterated extractor:
/// `Ψ(x) = VN(x) · Ψ(u) · Ψ(v)`, where `u_j` is the XOR of pair `j` and `v`
/// collects the common bit of each discarded (equal) pair. `Ψ(x) = λ` for `|x| < 2`.
pub fn peres_normalize(x: &BitString) -> BitString {
    let mut out = BitString::with_capacity(x.len() / 2);
    peres_into(x, &mut out);
    out
}

fn peres_into(x: &BitString, out: &mut BitString) {
    if x.len() < 2 {
        return;
    }
    let pairs = x.len() / 2;
    let mut xors = BitString::with_capacity(pairs);
    let mut equal = BitString::with_capacity(pairs);
    for j in 0..pairs {
        let (a, b) = (x.bit(2 * j), x.bit(2 * j + 1));
        match vn_pair(a, b) {
            Some(y) => out.push(y),
            None => equal.push(a),
        }
        xors.push(a ^ b);
    }
    peres_into(&xors, out);
    peres_into(&equal, out);
}

/// XOR of each disjoint `block`-bit block; a trailing partial block is dropped.
pub fn parity_normalize(x: &BitString, block: usize) -> Result<BitString, NormalizeError> {
    if block < 2 {
        return Err(NormalizeError::BlockTooShort(block));
    }
    Ok((0..x.len() / block)
        .map(|j| (j * block..(j + 1) * block).fold(false, |acc, i| acc ^ x.bit(i)))
        .collect())
}

/// Removes every occurrence of `symbol`, keeping the other symbols in order.
pub fn delete_symbol(x: &QaryString, symbol: u16) -> Result<QaryString, NormalizeError> {
    if symbol == 0 || symbol > x.alphabet() {
        return Err(NormalizeError::UnknownSymbol {
            symbol,
            alphabet: x.alphabet(),
        });
    }
    let kept = x.symbols().iter().copied().filter(|&s| s != symbol).collect();
    Ok(QaryString::from_parts_unchecked(x.alphabet(), kept))
}
