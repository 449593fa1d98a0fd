//! Bit strings, q-ary strings, and the two on-disk bit formats.
//!
//! The ASCII format is a run of `'0'`/`'1'` characters with arbitrary
//! interleaved whitespace. The packed format is an 8-byte little-endian bit
//! count followed by the bits packed MSB-first; pad bits in the final byte
//! are written as zero and ignored on read.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

const WORD_BITS: usize = 64;
const HEADER_LEN: usize = 8;

/// Errors produced while decoding a bit file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitsError {
    #[error("illegal character {byte:#04x} at byte offset {offset}")]
    IllegalChar { offset: usize, byte: u8 },
    #[error("packed header at byte offset 0 is {len} bytes long, expected {HEADER_LEN}")]
    TruncatedHeader { len: usize },
    #[error(
        "packed header at byte offset 0 declares {declared} bits but the payload starting at \
         byte offset {HEADER_LEN} only holds {capacity}"
    )]
    MalformedHeader { declared: u64, capacity: u64 },
}

/// On-disk representation of a [`BitString`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitFormat {
    #[default]
    Ascii,
    Packed,
}

impl FromStr for BitFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ascii" => Ok(BitFormat::Ascii),
            "packed" => Ok(BitFormat::Packed),
            other => Err(format!("unknown bit format '{other}' (expected ascii|packed)")),
        }
    }
}

/// A growable sequence of bits.
///
/// Bits are stored MSB-first in 64-bit words. Unused bits of the last word
/// are always zero, so equality and hashing can compare words directly.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(WORD_BITS)),
            len: 0,
        }
    }

    /// Builds the `len`-bit string whose bits are the low `len` bits of
    /// `value`, most significant first. Lexicographic order of strings of a
    /// fixed length matches numeric order of `value`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= WORD_BITS, "from_u64 supports at most 64 bits");
        let mut s = Self::with_capacity(len);
        for i in (0..len).rev() {
            s.push((value >> i) & 1 == 1);
        }
        s
    }

    /// Inverse of [`BitString::from_u64`]. Panics when longer than 64 bits.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= WORD_BITS, "to_u64 supports at most 64 bits");
        if self.len == 0 {
            0
        } else {
            self.words[0] >> (WORD_BITS - self.len)
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        let offset = self.len % WORD_BITS;
        if offset == 0 {
            self.words.push(0);
        }
        if bit {
            let last = self.words.len() - 1;
            self.words[last] |= 1u64 << (WORD_BITS - 1 - offset);
        }
        self.len += 1;
    }

    #[inline]
    pub fn get(&self, index: usize) -> Option<bool> {
        (index < self.len).then(|| self.bit(index))
    }

    /// Unchecked-by-contract read; panics on out-of-range index.
    #[inline]
    pub fn bit(&self, index: usize) -> bool {
        assert!(index < self.len, "bit index {index} out of range for length {}", self.len);
        (self.words[index / WORD_BITS] >> (WORD_BITS - 1 - index % WORD_BITS)) & 1 == 1
    }

    pub fn iter(&self) -> Bits<'_> {
        Bits { s: self, pos: 0 }
    }

    /// `#_b(x)`: the number of positions holding `bit`.
    pub fn count(&self, bit: bool) -> usize {
        let ones: usize = self.words.iter().map(|w| w.count_ones() as usize).sum();
        if bit {
            ones
        } else {
            self.len - ones
        }
    }

    pub fn ones(&self) -> usize {
        self.count(true)
    }

    pub fn zeros(&self) -> usize {
        self.count(false)
    }

    /// Shortens the string to `len` bits; no-op when already shorter.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.words.truncate(len.div_ceil(WORD_BITS));
        let offset = len % WORD_BITS;
        if offset != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= !(u64::MAX >> offset);
        }
        self.len = len;
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.words.reserve(other.words.len());
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut out = BitString::with_capacity(self.len + other.len);
        out.extend_from(self);
        out.extend_from(other);
        out
    }

    /// Copy of bits `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        assert!(start <= end && end <= self.len, "slice {start}..{end} out of range");
        (start..end).map(|i| self.bit(i)).collect()
    }

    /// Value of the `width`-bit block starting at `start`, MSB-first.
    pub fn block_value(&self, start: usize, width: usize) -> u64 {
        assert!(width <= WORD_BITS && start + width <= self.len);
        (start..start + width).fold(0u64, |acc, i| (acc << 1) | self.bit(i) as u64)
    }

    fn to_packed_bytes(&self) -> impl Iterator<Item = u8> + '_ {
        let nbytes = self.len.div_ceil(8);
        self.words.iter().flat_map(|w| w.to_be_bytes()).take(nbytes)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            f.write_str("BitString(λ)")
        } else {
            write!(f, "BitString({self})")
        }
    }
}

impl FromStr for BitString {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_bits(s.as_bytes(), BitFormat::Ascii)
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let iter = iter.into_iter();
        let mut s = BitString::with_capacity(iter.size_hint().0);
        for b in iter {
            s.push(b);
        }
        s
    }
}

impl Extend<bool> for BitString {
    fn extend<I: IntoIterator<Item = bool>>(&mut self, iter: I) {
        for b in iter {
            self.push(b);
        }
    }
}

pub struct Bits<'a> {
    s: &'a BitString,
    pos: usize,
}

impl Iterator for Bits<'_> {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        let b = self.s.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.s.len - self.pos;
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for Bits<'_> {}

impl<'a> IntoIterator for &'a BitString {
    type Item = bool;
    type IntoIter = Bits<'a>;

    fn into_iter(self) -> Bits<'a> {
        self.iter()
    }
}

/// Number of positions of `x` holding `bit`.
pub fn count_bits(x: &BitString, bit: bool) -> usize {
    x.count(bit)
}

pub fn parse_bits(bytes: &[u8], format: BitFormat) -> Result<BitString, BitsError> {
    match format {
        BitFormat::Ascii => {
            let mut s = BitString::with_capacity(bytes.len());
            for (offset, &byte) in bytes.iter().enumerate() {
                match byte {
                    b'0' => s.push(false),
                    b'1' => s.push(true),
                    b if b.is_ascii_whitespace() => {}
                    _ => return Err(BitsError::IllegalChar { offset, byte }),
                }
            }
            Ok(s)
        }
        BitFormat::Packed => {
            if bytes.len() < HEADER_LEN {
                return Err(BitsError::TruncatedHeader { len: bytes.len() });
            }
            let (header, payload) = bytes.split_at(HEADER_LEN);
            let declared = u64::from_le_bytes(header.try_into().expect("8-byte header"));
            let capacity = (payload.len() as u64).saturating_mul(8);
            if declared > capacity {
                return Err(BitsError::MalformedHeader { declared, capacity });
            }
            let n = declared as usize;
            let mut s = BitString::with_capacity(n);
            for i in 0..n {
                s.push((payload[i / 8] >> (7 - i % 8)) & 1 == 1);
            }
            Ok(s)
        }
    }
}

pub fn serialize_bits(x: &BitString, format: BitFormat) -> Vec<u8> {
    match format {
        BitFormat::Ascii => x.iter().map(|b| if b { b'1' } else { b'0' }).collect(),
        BitFormat::Packed => {
            let mut out = Vec::with_capacity(HEADER_LEN + x.len().div_ceil(8));
            out.extend_from_slice(&(x.len() as u64).to_le_bytes());
            out.extend(x.to_packed_bytes());
            out
        }
    }
}

/// A string over the alphabet `{a_1, …, a_Q}`; symbols are stored as their
/// 1-based index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QaryString {
    alphabet: u16,
    symbols: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QaryError {
    #[error("alphabet size {0} is below 2")]
    AlphabetTooSmall(u16),
    #[error("symbol {symbol} at position {position} is outside the alphabet 1..={alphabet}")]
    SymbolOutOfRange {
        position: usize,
        symbol: u16,
        alphabet: u16,
    },
}

impl QaryString {
    pub fn new(alphabet: u16, symbols: Vec<u16>) -> Result<Self, QaryError> {
        if alphabet < 2 {
            return Err(QaryError::AlphabetTooSmall(alphabet));
        }
        if let Some((position, &symbol)) = symbols
            .iter()
            .enumerate()
            .find(|(_, &s)| s == 0 || s > alphabet)
        {
            return Err(QaryError::SymbolOutOfRange {
                position,
                symbol,
                alphabet,
            });
        }
        Ok(Self { alphabet, symbols })
    }

    /// Letters `a`, `b`, `c`, … name symbols 1, 2, 3, ….
    pub fn from_letters(text: &str, alphabet: u16) -> Result<Self, QaryError> {
        let symbols = text
            .bytes()
            .map(|c| if c.is_ascii_lowercase() { (c - b'a' + 1) as u16 } else { 0 })
            .collect();
        Self::new(alphabet, symbols)
    }

    pub fn alphabet(&self) -> u16 {
        self.alphabet
    }

    pub fn symbols(&self) -> &[u16] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub(crate) fn from_parts_unchecked(alphabet: u16, symbols: Vec<u16>) -> Self {
        Self { alphabet, symbols }
    }
}

impl fmt::Display for QaryString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.alphabet <= 26 {
            for &s in &self.symbols {
                write!(f, "{}", (b'a' + (s - 1) as u8) as char)?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.symbols.iter().map(u16::to_string).collect();
            f.write_str(&parts.join(","))
        }
    }
}
