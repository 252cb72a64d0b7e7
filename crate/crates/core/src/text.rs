//! Sentinel-terminated input texts and their character order.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Texts are capped at 2^40 bytes.
pub const MAX_TEXT_LEN: u64 = 1 << 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("empty input")]
    Empty,
    #[error("input contains the sentinel byte 0x{sentinel:02x} at offset {offset}")]
    SentinelInBody { sentinel: u8, offset: usize },
    #[error("text does not end with the sentinel byte 0x{0:02x}")]
    MissingSentinel(u8),
    #[error("text of {0} bytes exceeds the 2^40 byte cap")]
    TooLong(u64),
}

/// How the terminal sentinel is chosen and ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SentinelPolicy {
    /// Append 0x00, which sorts below every other byte.
    #[default]
    AutoAppend,
    /// Append `$`, ordered above every other byte.
    PaperCompat,
}

impl SentinelPolicy {
    pub fn sentinel(self) -> u8 {
        match self {
            SentinelPolicy::AutoAppend => 0x00,
            SentinelPolicy::PaperCompat => b'$',
        }
    }

    pub fn order(self) -> CharOrder {
        match self {
            SentinelPolicy::AutoAppend => CharOrder::Raw,
            SentinelPolicy::PaperCompat => CharOrder::SentinelLast(b'$'),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SentinelPolicy::AutoAppend => "auto-append",
            SentinelPolicy::PaperCompat => "paper-compat",
        }
    }
}

impl fmt::Display for SentinelPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A total order on byte values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CharOrder {
    /// Plain byte order.
    Raw,
    /// Byte order, except that the given byte sorts above all others.
    SentinelLast(u8),
}

impl CharOrder {
    /// Position of `b` in this order, in `0..=256`.
    #[inline]
    pub fn key(self, b: u8) -> u16 {
        match self {
            CharOrder::Raw => b as u16,
            CharOrder::SentinelLast(s) if b == s => 256,
            CharOrder::SentinelLast(_) => b as u16,
        }
    }

    #[inline]
    pub fn cmp_bytes(self, a: u8, b: u8) -> Ordering {
        self.key(a).cmp(&self.key(b))
    }

    /// Lexicographic comparison of byte strings under this order.
    pub fn cmp_slices(self, a: &[u8], b: &[u8]) -> Ordering {
        for (&x, &y) in a.iter().zip(b) {
            match self.cmp_bytes(x, y) {
                Ordering::Equal => {}
                other => return other,
            }
        }
        a.len().cmp(&b.len())
    }
}

/// A byte text ending with exactly one sentinel.
#[derive(Clone, PartialEq, Eq)]
pub struct Text {
    bytes: Vec<u8>,
    policy: SentinelPolicy,
}

impl fmt::Debug for Text {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Text")
            .field("bytes", &String::from_utf8_lossy(&self.bytes))
            .field("policy", &self.policy)
            .finish()
    }
}

impl Text {
    /// Appends the policy's sentinel to `body`.
    pub fn new(body: &[u8], policy: SentinelPolicy) -> Result<Self, TextError> {
        if body.is_empty() {
            return Err(TextError::Empty);
        }
        let mut bytes = Vec::with_capacity(body.len() + 1);
        bytes.extend_from_slice(body);
        bytes.push(policy.sentinel());
        Self::from_terminated(bytes, policy)
    }

    /// Wraps bytes that already end with the policy's sentinel.
    pub fn from_terminated(bytes: Vec<u8>, policy: SentinelPolicy) -> Result<Self, TextError> {
        let sentinel = policy.sentinel();
        if (bytes.len() as u64) > MAX_TEXT_LEN {
            return Err(TextError::TooLong(bytes.len() as u64));
        }
        match bytes.split_last() {
            None => Err(TextError::Empty),
            Some((&last, _)) if last != sentinel => Err(TextError::MissingSentinel(sentinel)),
            Some((_, body)) => match body.iter().position(|&b| b == sentinel) {
                Some(offset) => Err(TextError::SentinelInBody { sentinel, offset }),
                None => Ok(Self { bytes, policy }),
            },
        }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Length including the sentinel.
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    /// Always false: a text holds at least its sentinel.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn policy(&self) -> SentinelPolicy {
        self.policy
    }

    pub fn sentinel(&self) -> u8 {
        self.policy.sentinel()
    }

    pub fn order(&self) -> CharOrder {
        self.policy.order()
    }

    pub fn suffix(&self, i: usize) -> &[u8] {
        &self.bytes[i..]
    }

    /// Upper bound on doubling passes, `ceil(log2 n)`.
    pub fn max_doubling_passes(&self) -> u32 {
        ceil_log2(self.len() as u64)
    }
}

pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}
