//! Suffix array construction by prefix doubling over the dataflow engine.
//!
//! Pass `k` (starting at 0) pairs every suffix rank with the rank of the
//! suffix `2^k` positions later, sorts the pairs and re-ranks them. Ranks are
//! kept in canonical form: every suffix in a run of equal pairs gets the
//! sorted position of the first suffix of the run. The loop stops as soon as
//! no two suffixes share a rank.

use std::time::{Duration, Instant};

use crate::engine::{Dataset, Engine, ScanContext};
use crate::error::{Error, Result};
use crate::text::{CharOrder, Text};

/// One position of the input text. The record key is implicit (null).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InputRecord {
    pub byte: u8,
    pub position: u64,
}

/// `(suffix index, rank)`: one element of an inverse suffix array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RankEntry {
    pub index: u64,
    pub rank: u64,
}

/// `(rank, suffix index)`: one element of a suffix array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SaEntry {
    pub rank: u64,
    pub index: u64,
}

/// Rank of the suffix `h` positions later, or `NONE` when that position is
/// past the end of the text. `NONE` orders below every real rank.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShiftedRank(u64);

impl ShiftedRank {
    pub const NONE: ShiftedRank = ShiftedRank(0);

    #[inline]
    pub fn some(rank: u64) -> Self {
        ShiftedRank(rank + 1)
    }

    #[inline]
    pub fn get(self) -> Option<u64> {
        self.0.checked_sub(1)
    }

    pub fn is_none(self) -> bool {
        self.0 == 0
    }
}

impl std::fmt::Debug for ShiftedRank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.get() {
            Some(r) => write!(f, "{r}"),
            None => f.write_str("NONE"),
        }
    }
}

impl From<Option<u64>> for ShiftedRank {
    fn from(r: Option<u64>) -> Self {
        r.map_or(ShiftedRank::NONE, ShiftedRank::some)
    }
}

/// A suffix rank paired with the rank of the suffix `h` positions later.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairRecord {
    pub index: u64,
    pub own: u64,
    pub shifted: ShiftedRank,
}

impl PairRecord {
    pub fn new(index: u64, own: u64, shifted: Option<u64>) -> Self {
        Self {
            index,
            own,
            shifted: shifted.into(),
        }
    }

    /// Sort key of the pair.
    #[inline]
    pub fn value(&self) -> (u64, ShiftedRank) {
        (self.own, self.shifted)
    }
}

/// A rank entering the pairing reduce, tagged with where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairPart {
    Own(u64),
    Shifted(u64),
}

const ABSENT: u64 = u64::MAX;

/// Accumulator of the pairing reduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSlot {
    own: u64,
    shifted: u64,
    conflict: bool,
}

impl From<PairPart> for PairSlot {
    fn from(part: PairPart) -> Self {
        match part {
            PairPart::Own(r) => PairSlot {
                own: r,
                shifted: ABSENT,
                conflict: false,
            },
            PairPart::Shifted(r) => PairSlot {
                own: ABSENT,
                shifted: r,
                conflict: false,
            },
        }
    }
}

impl PairSlot {
    fn merge(self, other: PairSlot) -> PairSlot {
        let pick = |a: u64, b: u64| if a == ABSENT { b } else { a };
        PairSlot {
            own: pick(self.own, other.own),
            shifted: pick(self.shifted, other.shifted),
            conflict: self.conflict
                || other.conflict
                || (self.own != ABSENT && other.own != ABSENT)
                || (self.shifted != ABSENT && other.shifted != ABSENT),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OccEntry {
    pub byte: u8,
    pub count: u64,
    /// Number of text characters strictly smaller than `byte`.
    pub occ: u64,
}

/// Character counts and their exclusive prefix sums under the text order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccTable {
    entries: Vec<OccEntry>,
    lookup: Box<[u64; 256]>,
}

impl OccTable {
    /// Builds the table from per-character counts.
    pub fn from_counts(mut counts: Vec<(u8, u64)>, order: CharOrder) -> Self {
        counts.sort_by_key(|&(c, _)| order.key(c));
        let mut lookup = Box::new([ABSENT; 256]);
        let mut acc = 0u64;
        let entries = counts
            .into_iter()
            .map(|(byte, count)| {
                let e = OccEntry { byte, count, occ: acc };
                lookup[byte as usize] = acc;
                acc += count;
                e
            })
            .collect();
        Self { entries, lookup }
    }

    /// Entries in character order.
    pub fn entries(&self) -> &[OccEntry] {
        &self.entries
    }

    pub fn occ(&self, byte: u8) -> Option<u64> {
        let v = self.lookup[byte as usize];
        (v != ABSENT).then_some(v)
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }

    /// Suffixes sharing a first character with an earlier one.
    pub fn ties(&self) -> u64 {
        self.entries.iter().map(|e| e.count - 1).sum()
    }
}

/// One record per text position, in contiguous partitions.
pub fn make_input(engine: &Engine, text: &Text) -> Dataset<InputRecord> {
    let records = text
        .bytes()
        .iter()
        .enumerate()
        .map(|(i, &byte)| InputRecord {
            byte,
            position: i as u64,
        })
        .collect();
    engine.dataset(records)
}

/// Counts characters with map + reduce, then prefix-sums the collected counts.
pub fn occ_table(engine: &Engine, input: &Dataset<InputRecord>, order: CharOrder) -> Result<OccTable> {
    let ones = engine.map_records(input.clone(), |r| (r.byte, 1u64));
    let counts = engine.reduce_by_key(ones, |a, b| a + b);
    Ok(OccTable::from_counts(engine.collect(counts)?, order))
}

/// Initial ranks: the rank of suffix `i` is `occ` of its first character.
pub fn init_isa(engine: &Engine, input: Dataset<InputRecord>, occ: &OccTable) -> Result<Dataset<RankEntry>> {
    engine.try_map_records(input, |r| match occ.occ(r.byte) {
        Some(rank) => Ok(RankEntry {
            index: r.position,
            rank,
        }),
        None => Err(Error::CorruptIsa(format!(
            "byte 0x{:02x} at {} missing from the occurrence table",
            r.byte, r.position
        ))),
    })
}

/// `(i, r) -> (i, Own(r))`
pub fn own_records(engine: &Engine, isa: Dataset<RankEntry>) -> Dataset<(i64, PairPart)> {
    engine.map_records(isa, |e| (e.index as i64, PairPart::Own(e.rank)))
}

/// `(i, r) -> (i - h, Shifted(r))`
pub fn shifted_records(engine: &Engine, isa: Dataset<RankEntry>, h: u64) -> Dataset<(i64, PairPart)> {
    let h = h as i64;
    engine.map_records(isa, move |e| (e.index as i64 - h, PairPart::Shifted(e.rank)))
}

/// Pairs the rank of every suffix `i` with the rank of suffix `i + h`.
///
/// `isa` must hold exactly one entry per index in `0..n`.
pub fn shift_and_pair(engine: &Engine, isa: Dataset<RankEntry>, h: u64, n: u64) -> Result<Dataset<PairRecord>> {
    let own = own_records(engine, isa.clone());
    let shifted = shifted_records(engine, isa, h);
    let tagged = engine.union(own, shifted);
    let keyed = engine.filter_map_records(tagged, |(k, part)| (k >= 0).then(|| (k as u64, PairSlot::from(part))));
    let paired = engine.reduce_by_key(keyed, PairSlot::merge);
    engine.try_map_records(paired, |(index, slot)| {
        if slot.conflict {
            return Err(Error::CorruptIsa(format!("duplicate rank records for index {index}")));
        }
        if slot.own == ABSENT {
            return Err(Error::CorruptIsa(format!("no rank for index {index}")));
        }
        if index >= n || slot.own >= n || (slot.shifted != ABSENT && slot.shifted >= n) {
            return Err(Error::CorruptIsa(format!("entry for index {index} out of range")));
        }
        let shifted = (slot.shifted != ABSENT).then_some(slot.shifted);
        Ok(PairRecord::new(index, slot.own, shifted))
    })
}

#[derive(Debug)]
struct RunSummary {
    len: u64,
    runs: u64,
    first: (u64, ShiftedRank),
    last: (u64, ShiftedRank),
    last_run_start: u64,
}

fn summarize_runs(records: &[PairRecord]) -> RunSummary {
    let mut runs = 1;
    let mut last_run_start = 0;
    for (p, w) in records.windows(2).enumerate() {
        if w[0].value() != w[1].value() {
            runs += 1;
            last_run_start = p as u64 + 1;
        }
    }
    RunSummary {
        len: records.len() as u64,
        runs,
        first: records[0].value(),
        last: records[records.len() - 1].value(),
        last_run_start,
    }
}

/// Value and rank of the last record of a partition.
#[derive(Debug, Clone, Copy)]
struct RunCarry {
    value: (u64, ShiftedRank),
    rank: u64,
}

/// Sorts pairs by value and assigns canonical ranks.
///
/// Returns the new ranks keyed by suffix index, and the number of records
/// that copied the rank of their predecessor.
pub fn rerank(engine: &Engine, pairs: Dataset<PairRecord>) -> Result<(Dataset<RankEntry>, u64)> {
    let sorted = engine.sort_by_key(pairs, PairRecord::value)?;
    Ok(rank_sorted_pairs(engine, sorted))
}

/// The ranking scan of [`rerank`] on an already globally sorted dataset.
///
/// Runs of equal values may span any number of partitions: phase 1 carries
/// the rank of each partition's last run to the right.
pub fn rank_sorted_pairs(engine: &Engine, sorted: Dataset<PairRecord>) -> (Dataset<RankEntry>, u64) {
    let mut ties = 0u64;
    let ranked = engine.scan_partitions_with_carry(
        sorted,
        summarize_runs,
        |prev: Option<&RunCarry>, offset, s: &RunSummary| {
            let continues = prev.is_some_and(|c| c.value == s.first);
            let first_rank = match prev {
                Some(c) if continues => c.rank,
                _ => offset,
            };
            ties += s.len - s.runs + u64::from(continues);
            let rank = if s.last_run_start == 0 {
                first_rank
            } else {
                offset + s.last_run_start
            };
            RunCarry { value: s.last, rank }
        },
        |records, ctx: ScanContext<'_, PairRecord, RunCarry>| {
            let mut prev = ctx.carry.map(|c| (c.value, c.rank));
            records
                .into_iter()
                .enumerate()
                .map(|(p, rec)| {
                    let value = rec.value();
                    let rank = match prev {
                        Some((v, r)) if v == value => r,
                        _ => ctx.offset + p as u64,
                    };
                    prev = Some((value, rank));
                    RankEntry { index: rec.index, rank }
                })
                .collect()
        },
    );
    (ranked, ties)
}

/// Statistics of one doubling pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublingPass {
    /// 1-based pass number.
    pub pass: u32,
    pub shift: u64,
    pub ties: u64,
    pub elapsed: Duration,
}

#[derive(Debug)]
pub struct IsaBuild {
    pub isa: Dataset<RankEntry>,
    pub occ: OccTable,
    pub initial_ties: u64,
    pub init_elapsed: Duration,
    pub passes: Vec<DoublingPass>,
}

impl IsaBuild {
    pub fn iterations(&self) -> u32 {
        self.passes.len() as u32
    }
}

pub fn build_isa(engine: &Engine, text: &Text) -> Result<IsaBuild> {
    build_isa_observed(engine, text, |_, _| {})
}

/// [`build_isa`], calling `observe` with the rank dataset after every pass.
pub fn build_isa_observed<F>(engine: &Engine, text: &Text, mut observe: F) -> Result<IsaBuild>
where
    F: FnMut(&DoublingPass, &Dataset<RankEntry>),
{
    let n = text.len() as u64;
    let cap = text.max_doubling_passes();
    let start = Instant::now();
    let input = make_input(engine, text);
    let occ = occ_table(engine, &input, text.order())?;
    let mut isa = init_isa(engine, input, &occ)?;
    let initial_ties = occ.ties();
    let init_elapsed = start.elapsed();

    let mut passes = Vec::new();
    let mut ties = initial_ties;
    let mut shift = 1u64;
    while ties > 0 {
        if passes.len() as u32 == cap {
            return Err(Error::IterationCap { cap, ties });
        }
        let started = Instant::now();
        let pairs = shift_and_pair(engine, isa, shift, n)?;
        let (next, next_ties) = rerank(engine, pairs)?;
        let pass = DoublingPass {
            pass: passes.len() as u32 + 1,
            shift,
            ties: next_ties,
            elapsed: started.elapsed(),
        };
        observe(&pass, &next);
        passes.push(pass);
        isa = next;
        ties = next_ties;
        shift *= 2;
    }
    Ok(IsaBuild {
        isa,
        occ,
        initial_ties,
        init_elapsed,
        passes,
    })
}

/// Flips `(i, r)` into `(r, i)` and sorts by rank; the result is the suffix
/// array. Fails unless the ranks are a permutation of `0..n`.
pub fn invert_isa(engine: &Engine, isa: Dataset<RankEntry>) -> Result<Dataset<SaEntry>> {
    let flipped = engine.map_records(isa, |e| SaEntry {
        rank: e.rank,
        index: e.index,
    });
    let sorted = engine.sort_by_key(flipped, |e| e.rank)?;
    let mut bad: Option<String> = None;
    let sa = engine.scan_partitions_with_carry(
        sorted,
        |part: &[SaEntry]| {
            let first = part[0].rank;
            let consecutive = part.iter().enumerate().all(|(p, e)| e.rank == first + p as u64);
            (first, consecutive)
        },
        |_, offset, &(first, consecutive)| {
            if bad.is_none() && (!consecutive || first != offset) {
                bad = Some(format!("ranks near position {offset} are not consecutive"));
            }
        },
        |records, _| records,
    );
    match bad {
        Some(msg) => Err(Error::NotPermutation(msg)),
        None => Ok(sa),
    }
}

/// Collects ranks into a vector indexed by suffix.
pub fn ranks_by_index(engine: &Engine, isa: Dataset<RankEntry>, n: usize) -> Result<Vec<u64>> {
    let mut out = vec![u64::MAX; n];
    for e in engine.collect(isa)? {
        out[e.index as usize] = e.rank;
    }
    Ok(out)
}
