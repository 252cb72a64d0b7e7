//! Brute-force reference implementations.
//!
//! Single-threaded and quadratic on purpose; every function refuses texts
//! longer than the cap.

use std::cmp::Ordering;

use crate::bwt::BwtResult;
use crate::error::{Error, Result};
use crate::text::Text;

pub const DEFAULT_ORACLE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Oracle {
    pub cap: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ORACLE_CAP,
        }
    }
}

impl Oracle {
    pub fn with_cap(cap: usize) -> Self {
        Self { cap }
    }

    fn check(&self, text: &Text) -> Result<()> {
        if text.len() > self.cap {
            Err(Error::OracleCap {
                n: text.len(),
                cap: self.cap,
            })
        } else {
            Ok(())
        }
    }

    /// Sorts all rotations and reads off the last column.
    pub fn rotations_bwt(&self, text: &Text) -> Result<BwtResult> {
        self.check(text)?;
        let s = text.bytes();
        let n = s.len();
        let order = text.order();
        let rotation = |i: usize| s[i..].iter().chain(&s[..i]).copied();
        let mut rows: Vec<usize> = (0..n).collect();
        rows.sort_by(|&a, &b| {
            rotation(a)
                .zip(rotation(b))
                .map(|(x, y)| order.cmp_bytes(x, y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });
        let bwt = rows.iter().map(|&r| s[(r + n - 1) % n]).collect();
        let index_i = rows.iter().position(|&r| r == 0).expect("row 0 present") as u64;
        Ok(BwtResult {
            bwt,
            index_i,
            sa: None,
        })
    }

    /// Sorts suffix start positions by direct suffix comparison.
    pub fn naive_suffix_array(&self, text: &Text) -> Result<Vec<u64>> {
        self.check(text)?;
        let order = text.order();
        let mut sa: Vec<usize> = (0..text.len()).collect();
        sa.sort_by(|&a, &b| order.cmp_slices(text.suffix(a), text.suffix(b)));
        Ok(sa.into_iter().map(|i| i as u64).collect())
    }

    /// Rank of every suffix by its length-`h` prefix (shorter near the end of
    /// the text). Equal prefixes share the sorted position of the first one.
    pub fn h_order_ranks(&self, text: &Text, h: usize) -> Result<Vec<u64>> {
        self.check(text)?;
        assert!(h >= 1, "prefix length must be at least 1");
        let n = text.len();
        let order = text.order();
        let prefix = |i: usize| &text.bytes()[i..(i + h).min(n)];
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| order.cmp_slices(prefix(a), prefix(b)));
        let mut ranks = vec![0u64; n];
        for p in 1..n {
            let (prev, cur) = (idx[p - 1], idx[p]);
            ranks[cur] = if prefix(prev) == prefix(cur) {
                ranks[prev]
            } else {
                p as u64
            };
        }
        Ok(ranks)
    }
}

pub fn rotations_bwt(text: &Text) -> Result<BwtResult> {
    Oracle::default().rotations_bwt(text)
}

pub fn naive_suffix_array(text: &Text) -> Result<Vec<u64>> {
    Oracle::default().naive_suffix_array(text)
}

pub fn h_order_ranks(text: &Text, h: usize) -> Result<Vec<u64>> {
    Oracle::default().h_order_ranks(text, h)
}

/// One sequential doubling step: canonical ranks by length-`h` prefixes in,
/// canonical ranks by length-`2h` prefixes out.
pub fn double_ranks(ranks: &[u64], h: usize) -> Vec<u64> {
    let n = ranks.len();
    let key = |i: usize| (ranks[i], ranks.get(i + h).map(|&r| r + 1).unwrap_or(0));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| key(i));
    let mut out = vec![0u64; n];
    for p in 1..n {
        let (prev, cur) = (idx[p - 1], idx[p]);
        out[cur] = if key(prev) == key(cur) { out[prev] } else { p as u64 };
    }
    out
}

/// Inverts a suffix array into ranks.
pub fn inverse_permutation(sa: &[u64]) -> Vec<u64> {
    let mut isa = vec![0u64; sa.len()];
    for (j, &i) in sa.iter().enumerate() {
        isa[i as usize] = j as u64;
    }
    isa
}

/// The sequential suffix-array route to the BWT.
pub fn bwt_from_sa_sequential(text: &Text, sa: &[u64]) -> BwtResult {
    let s = text.bytes();
    let n = s.len();
    let bwt = sa.iter().map(|&i| s[(i as usize + n - 1) % n]).collect();
    let index_i = sa.iter().position(|&i| i == 0).unwrap_or(0) as u64;
    BwtResult {
        bwt,
        index_i,
        sa: Some(sa.to_vec()),
    }
}
