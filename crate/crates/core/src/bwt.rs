//! BWT from a suffix array by a dataflow join, plus the inverse transform.

use crate::engine::{Dataset, Engine};
use crate::error::{Error, Result};
use crate::suffix::{make_input, SaEntry};
use crate::text::{CharOrder, Text};

/// A Burrows-Wheeler transform with its 0-based primary row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BwtResult {
    pub bwt: Vec<u8>,
    /// Row of the original string among the sorted rotations.
    pub index_i: u64,
    pub sa: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum JoinPart {
    Char(u8),
    Rank(u64),
}

const NO_RANK: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct JoinSlot {
    byte: Option<u8>,
    rank: u64,
    conflict: bool,
}

impl From<JoinPart> for JoinSlot {
    fn from(part: JoinPart) -> Self {
        match part {
            JoinPart::Char(b) => JoinSlot {
                byte: Some(b),
                rank: NO_RANK,
                conflict: false,
            },
            JoinPart::Rank(r) => JoinSlot {
                byte: None,
                rank: r,
                conflict: false,
            },
        }
    }
}

impl JoinSlot {
    fn merge(self, other: JoinSlot) -> JoinSlot {
        JoinSlot {
            byte: self.byte.or(other.byte),
            rank: if self.rank == NO_RANK { other.rank } else { self.rank },
            conflict: self.conflict
                || other.conflict
                || (self.byte.is_some() && other.byte.is_some())
                || (self.rank != NO_RANK && other.rank != NO_RANK),
        }
    }
}

/// Joins the suffix array with the text on position `(sa[j] + n - 1) mod n`
/// and orders the joined characters by rank `j`.
///
/// Requires a unique terminal sentinel, so that suffix order and rotation
/// order agree.
pub fn bwt_from_sa(engine: &Engine, text: &Text, sa: Dataset<SaEntry>, keep_sa: bool) -> Result<BwtResult> {
    let n = text.len() as u64;
    if sa.len() as u64 != n {
        return Err(Error::NotPermutation(format!(
            "suffix array has {} entries for a text of {n}",
            sa.len()
        )));
    }
    let index_i = engine.collect(engine.filter_map_records(sa.clone(), |e| (e.index == 0).then_some(e.rank)))?;
    let index_i = match index_i.as_slice() {
        [j] => *j,
        _ => return Err(Error::NotPermutation("suffix 0 must appear exactly once".into())),
    };
    let sa_values = if keep_sa {
        Some(engine.collect(engine.map_records(sa.clone(), |e| e.index))?)
    } else {
        None
    };

    let ranks = engine.try_map_records(sa, |e| {
        if e.index >= n {
            return Err(Error::NotPermutation(format!("suffix index {} out of range", e.index)));
        }
        Ok(((e.index + n - 1) % n, JoinPart::Rank(e.rank)))
    })?;
    let chars = engine.map_records(make_input(engine, text), |r| (r.position, JoinPart::Char(r.byte)));
    let tagged = engine.map_records(engine.union(ranks, chars), |(k, part)| (k, JoinSlot::from(part)));
    let joined = engine.reduce_by_key(tagged, JoinSlot::merge);
    let by_rank = engine.try_map_records(joined, |(pos, slot)| match (slot.conflict, slot.byte, slot.rank) {
        (false, Some(b), r) if r != NO_RANK => Ok((r, b)),
        _ => Err(Error::NotPermutation(format!("position {pos} joined {slot:?}"))),
    })?;
    let sorted = engine.sort_by_key(by_rank, |&(r, _)| r)?;

    let mut bwt = Vec::with_capacity(n as usize);
    for (j, (rank, byte)) in engine.collect(sorted)?.into_iter().enumerate() {
        if rank != j as u64 {
            return Err(Error::NotPermutation(format!("rank {j} missing or repeated")));
        }
        bwt.push(byte);
    }
    Ok(BwtResult {
        bwt,
        index_i,
        sa: sa_values,
    })
}

/// Reconstructs the text from its BWT by last-to-first mapping.
pub fn inverse_bwt(bwt: &[u8], index_i: u64, order: CharOrder) -> Vec<u8> {
    let n = bwt.len();
    assert!(n > 0 && (index_i as usize) < n, "row index out of range");

    let mut counts = [0usize; 256];
    for &b in bwt {
        counts[b as usize] += 1;
    }
    let mut by_order: Vec<u8> = (0..=255u8).filter(|&b| counts[b as usize] > 0).collect();
    by_order.sort_by_key(|&b| order.key(b));
    let mut first_row = [0usize; 256];
    let mut acc = 0;
    for b in by_order {
        first_row[b as usize] = acc;
        acc += counts[b as usize];
    }

    // lf[row] = row of the rotation starting with bwt[row].
    let mut seen = [0usize; 256];
    let lf: Vec<usize> = bwt
        .iter()
        .map(|&b| {
            let r = first_row[b as usize] + seen[b as usize];
            seen[b as usize] += 1;
            r
        })
        .collect();

    let mut out = vec![0u8; n];
    let mut row = index_i as usize;
    for slot in out.iter_mut().rev() {
        *slot = bwt[row];
        row = lf[row];
    }
    out
}
