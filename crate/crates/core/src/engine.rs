//! A small in-process partitioned-dataset engine.
//!
//! A [`Dataset`] is an ordered list of partitions. The [`Engine`] runs one task
//! per partition on its worker pool and inserts a barrier at every shuffle
//! ([`Engine::reduce_by_key`], [`Engine::range_partition_sort`] and phase 1 of
//! the offset scans). Records always cross a shuffle by value.
//!
//! All user closures must be pure. Given that, the logical content of every
//! pipeline output is independent of the worker count.

use std::fmt;

use thiserror::Error;

/// Default upper bound on the number of records [`Engine::collect`] returns.
pub const DEFAULT_COLLECT_LIMIT: usize = 1 << 34;

/// Expected sampled keys per target partition under the default fraction.
pub const SAMPLES_PER_PARTITION: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("partition count must be at least 1")]
    NoPartitions,
    #[error("sample fraction {0} is outside (0, 1]")]
    SampleFraction(f64),
    #[error("refusing to collect {records} records (limit {limit})")]
    CollectLimit { records: usize, limit: usize },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub workers: usize,
    pub partitions: usize,
    /// Fraction of records sampled when choosing range boundaries. `None`
    /// means `min(1, 20 * partitions / n)`.
    pub sample_fraction: Option<f64>,
    pub collect_limit: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            workers: 1,
            partitions: 1,
            sample_fraction: None,
            collect_limit: DEFAULT_COLLECT_LIMIT,
        }
    }
}

impl EngineConfig {
    pub fn new(workers: usize, partitions: usize) -> Self {
        Self {
            workers,
            partitions,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.workers == 0 {
            return Err(EngineError::NoWorkers);
        }
        if self.partitions == 0 {
            return Err(EngineError::NoPartitions);
        }
        if let Some(f) = self.sample_fraction {
            check_fraction(f)?;
        }
        Ok(())
    }
}

fn check_fraction(f: f64) -> Result<(), EngineError> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(EngineError::SampleFraction(f))
    }
}

/// An ordered collection of record partitions.
#[derive(Clone, PartialEq, Eq)]
pub struct Dataset<R> {
    partitions: Vec<Vec<R>>,
}

impl<R: fmt::Debug> fmt::Debug for Dataset<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.partitions.iter()).finish()
    }
}

impl<R> Dataset<R> {
    /// Builds a dataset from explicit partitions. An empty list becomes a
    /// single empty partition.
    pub fn from_partitions(mut partitions: Vec<Vec<R>>) -> Self {
        if partitions.is_empty() {
            partitions.push(Vec::new());
        }
        Self { partitions }
    }

    /// Splits `records` into `partitions` contiguous ranges of near-equal size.
    pub fn from_vec(records: Vec<R>, partitions: usize) -> Self {
        let partitions = partitions.max(1);
        let n = records.len();
        let mut out = Vec::with_capacity(partitions);
        let mut iter = records.into_iter();
        for p in 0..partitions {
            let take = contiguous_len(n, partitions, p);
            out.push(iter.by_ref().take(take).collect());
        }
        Self { partitions: out }
    }

    pub fn partitions(&self) -> &[Vec<R>] {
        &self.partitions
    }

    pub fn into_partitions(self) -> Vec<Vec<R>> {
        self.partitions
    }

    pub fn num_partitions(&self) -> usize {
        self.partitions.len()
    }

    pub fn partition_lengths(&self) -> Vec<usize> {
        self.partitions.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.partitions.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.iter().all(Vec::is_empty)
    }

    /// Iterates over all records in partition order.
    pub fn iter(&self) -> impl Iterator<Item = &R> {
        self.partitions.iter().flatten()
    }
}

/// Length of partition `p` when `n` records are split into `parts` ranges.
pub(crate) fn contiguous_len(n: usize, parts: usize, p: usize) -> usize {
    n / parts + usize::from(p < n % parts)
}

/// Keys that can be shuffled by hash.
///
/// The hash is fixed: [`splitmix64`] over the key's integer encoding, so a
/// record lands in the same output partition on every machine.
pub trait ShuffleKey: Ord + Send {
    fn shuffle_hash(&self) -> u64;
}

macro_rules! shuffle_key_int {
    ($($t:ty),*) => {$(
        impl ShuffleKey for $t {
            #[inline]
            fn shuffle_hash(&self) -> u64 {
                splitmix64(*self as u64)
            }
        }
    )*};
}

shuffle_key_int!(u8, u16, u32, u64, usize, i8, i16, i32, i64);

impl<A: ShuffleKey, B: ShuffleKey> ShuffleKey for (A, B) {
    fn shuffle_hash(&self) -> u64 {
        splitmix64(self.0.shuffle_hash() ^ self.1.shuffle_hash().rotate_left(29))
    }
}

/// The splitmix64 finalizer.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Routes keys to contiguous ranges.
///
/// Key `k` goes to the first partition whose upper boundary is greater than
/// `k`, or to the last partition when no such boundary exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangePartitioner<K> {
    boundaries: Vec<K>,
}

impl<K: Ord> RangePartitioner<K> {
    /// Chooses boundaries at evenly spaced quantiles of `sample`.
    ///
    /// Duplicate boundaries collapse, and a boundary equal to the smallest
    /// sampled key is dropped since it would only bound records below the
    /// sample. The partition count can therefore shrink, down to 1.
    pub fn from_sample(mut sample: Vec<K>, target_partitions: usize) -> Self
    where
        K: Clone,
    {
        sample.sort_unstable();
        let mut boundaries: Vec<K> = Vec::new();
        let Some(min) = sample.first() else {
            return Self { boundaries };
        };
        for p in 1..target_partitions {
            let k = &sample[p * sample.len() / target_partitions];
            if k != min && boundaries.last() != Some(k) {
                boundaries.push(k.clone());
            }
        }
        Self { boundaries }
    }

    /// Builds a partitioner from explicit boundaries, sorting and
    /// deduplicating them.
    pub fn from_boundaries(mut boundaries: Vec<K>) -> Self {
        boundaries.sort_unstable();
        boundaries.dedup();
        Self { boundaries }
    }

    pub fn boundaries(&self) -> &[K] {
        &self.boundaries
    }

    pub fn num_partitions(&self) -> usize {
        self.boundaries.len() + 1
    }

    #[inline]
    pub fn partition_of(&self, key: &K) -> usize {
        self.boundaries.partition_point(|b| b <= key)
    }
}

/// Context handed to the per-partition closure of an offset scan.
#[derive(Debug)]
pub struct ScanContext<'a, R, C = ()> {
    pub partition: usize,
    /// Total record count of all earlier partitions.
    pub offset: u64,
    /// Last record of the closest earlier non-empty partition.
    pub predecessor: Option<&'a R>,
    /// Carry produced by the sequential sweep over earlier non-empty partitions.
    pub carry: Option<&'a C>,
}

enum Executor {
    Inline,
    #[cfg(feature = "parallel")]
    Pool(rayon::ThreadPool),
}

/// Runs dataset operations over a worker pool.
pub struct Engine {
    config: EngineConfig,
    executor: Executor,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("config", &self.config)
            .field("parallel", &self.is_parallel())
            .finish()
    }
}

impl Engine {
    /// Creates an engine backed by a thread pool of `config.workers` threads.
    /// Without the `parallel` feature this is the same as [`Engine::sequential`].
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .thread_name(|i| format!("dbwt-worker-{i}"))
                .build()
                .map_err(|e| EngineError::Pool(e.to_string()))?;
            Ok(Self {
                config,
                executor: Executor::Pool(pool),
            })
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok(Self {
                config,
                executor: Executor::Inline,
            })
        }
    }

    /// Creates an engine that runs every partition task on the calling thread.
    pub fn sequential(config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self {
            config,
            executor: Executor::Inline,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn partitions(&self) -> usize {
        self.config.partitions
    }

    pub fn is_parallel(&self) -> bool {
        !matches!(self.executor, Executor::Inline)
    }

    /// Runs `f` once per item, preserving order. This is the only place
    /// partition tasks are dispatched.
    fn run<T, U, F>(&self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(usize, T) -> U + Sync + Send,
    {
        match &self.executor {
            Executor::Inline => items.into_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Executor::Pool(pool) => {
                use rayon::prelude::*;
                pool.install(|| {
                    items
                        .into_par_iter()
                        .enumerate()
                        .map(|(i, t)| f(i, t))
                        .collect()
                })
            }
        }
    }

    pub fn dataset<R>(&self, records: Vec<R>) -> Dataset<R> {
        Dataset::from_vec(records, self.config.partitions)
    }

    pub fn map_records<A, B, F>(&self, ds: Dataset<A>, f: F) -> Dataset<B>
    where
        A: Send,
        B: Send,
        F: Fn(A) -> B + Sync + Send,
    {
        let partitions = self.run(ds.partitions, |_, part| part.into_iter().map(&f).collect());
        Dataset { partitions }
    }

    pub fn filter_map_records<A, B, F>(&self, ds: Dataset<A>, f: F) -> Dataset<B>
    where
        A: Send,
        B: Send,
        F: Fn(A) -> Option<B> + Sync + Send,
    {
        let partitions = self.run(ds.partitions, |_, part| part.into_iter().filter_map(&f).collect());
        Dataset { partitions }
    }

    /// Fallible map. The error from the lowest-numbered failing partition wins.
    pub fn try_map_records<A, B, E, F>(&self, ds: Dataset<A>, f: F) -> Result<Dataset<B>, E>
    where
        A: Send,
        B: Send,
        E: Send,
        F: Fn(A) -> Result<B, E> + Sync + Send,
    {
        let results = self.run(ds.partitions, |_, part| {
            part.into_iter().map(&f).collect::<Result<Vec<B>, E>>()
        });
        let partitions = results.into_iter().collect::<Result<Vec<_>, E>>()?;
        Ok(Dataset { partitions })
    }

    /// Multiset union: the partitions of `a` followed by those of `b`.
    pub fn union<R>(&self, a: Dataset<R>, b: Dataset<R>) -> Dataset<R> {
        let mut partitions = a.partitions;
        partitions.extend(b.partitions);
        partitions.retain(|p| !p.is_empty());
        Dataset::from_partitions(partitions)
    }

    /// Hash-shuffles records by key into `self.partitions()` outputs and folds
    /// each key's values with `combine`.
    ///
    /// `combine` must be associative and commutative: values meet in an
    /// unspecified grouping order.
    pub fn reduce_by_key<K, V, F>(&self, ds: Dataset<(K, V)>, combine: F) -> Dataset<(K, V)>
    where
        K: ShuffleKey,
        V: Send,
        F: Fn(V, V) -> V + Sync + Send,
    {
        let num_out = self.config.partitions;
        let buckets = self.run(ds.partitions, |_, part| {
            let mut buckets: Vec<Vec<(K, V)>> = (0..num_out).map(|_| Vec::new()).collect();
            for (k, v) in part {
                let dest = (k.shuffle_hash() % num_out as u64) as usize;
                buckets[dest].push((k, v));
            }
            buckets
        });
        let inputs = transpose(buckets, num_out);
        let partitions = self.run(inputs, |_, chunks| {
            let mut records: Vec<(K, V)> = Vec::with_capacity(chunks.iter().map(Vec::len).sum());
            for chunk in chunks {
                records.extend(chunk);
            }
            records.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            let mut out: Vec<(K, V)> = Vec::new();
            let mut iter = records.into_iter();
            if let Some(mut current) = iter.next() {
                for (k, v) in iter {
                    if k == current.0 {
                        let (ck, cv) = current;
                        current = (ck, combine(cv, v));
                    } else {
                        out.push(std::mem::replace(&mut current, (k, v)));
                    }
                }
                out.push(current);
            }
            out
        });
        Dataset { partitions }
    }

    /// Resolves the sampling fraction for a dataset of `n` records.
    pub fn sample_fraction_for(&self, n: usize, target_partitions: usize) -> Result<f64, EngineError> {
        match self.config.sample_fraction {
            Some(f) => {
                check_fraction(f)?;
                Ok(f)
            }
            None if n == 0 => Ok(1.0),
            None => Ok((SAMPLES_PER_PARTITION * target_partitions as f64 / n as f64).min(1.0)),
        }
    }

    /// Samples keys, routes records through a [`RangePartitioner`] and sorts
    /// each output partition locally. The result is globally sorted by `key`.
    /// Ties have no guaranteed order.
    pub fn range_partition_sort<R, K, F>(
        &self,
        ds: Dataset<R>,
        key: F,
        target_partitions: usize,
        sample_fraction: f64,
    ) -> Result<Dataset<R>, EngineError>
    where
        R: Send + Sync,
        K: Ord + Clone + Send + Sync,
        F: Fn(&R) -> K + Sync + Send,
    {
        if target_partitions == 0 {
            return Err(EngineError::NoPartitions);
        }
        check_fraction(sample_fraction)?;
        let partitioner = self.sample_partitioner(&ds, &key, target_partitions, sample_fraction);
        Ok(self.sort_with_partitioner(ds, &key, &partitioner))
    }

    /// [`Engine::range_partition_sort`] with the configured partition count
    /// and sampling fraction.
    pub fn sort_by_key<R, K, F>(&self, ds: Dataset<R>, key: F) -> Result<Dataset<R>, EngineError>
    where
        R: Send + Sync,
        K: Ord + Clone + Send + Sync,
        F: Fn(&R) -> K + Sync + Send,
    {
        let target = self.config.partitions;
        let fraction = self.sample_fraction_for(ds.len(), target)?;
        self.range_partition_sort(ds, key, target, fraction)
    }

    fn sample_partitioner<R, K, F>(
        &self,
        ds: &Dataset<R>,
        key: &F,
        target_partitions: usize,
        fraction: f64,
    ) -> RangePartitioner<K>
    where
        R: Send + Sync,
        K: Ord + Clone + Send + Sync,
        F: Fn(&R) -> K + Sync + Send,
    {
        if target_partitions == 1 {
            return RangePartitioner::from_boundaries(Vec::new());
        }
        let threshold = if fraction >= 1.0 {
            u64::MAX
        } else {
            (fraction * u64::MAX as f64) as u64
        };
        let offsets = prefix_offsets(&ds.partition_lengths());
        let parts: Vec<(u64, &[R])> = offsets
            .iter()
            .copied()
            .zip(ds.partitions.iter().map(Vec::as_slice))
            .collect();
        let samples = self.run(parts, |_, (offset, part)| {
            part.iter()
                .enumerate()
                .filter(|(i, _)| threshold == u64::MAX || splitmix64(offset + *i as u64) <= threshold)
                .map(|(_, r)| key(r))
                .collect::<Vec<K>>()
        });
        RangePartitioner::from_sample(samples.into_iter().flatten().collect(), target_partitions)
    }

    fn sort_with_partitioner<R, K, F>(&self, ds: Dataset<R>, key: &F, partitioner: &RangePartitioner<K>) -> Dataset<R>
    where
        R: Send + Sync,
        K: Ord + Clone + Send + Sync,
        F: Fn(&R) -> K + Sync + Send,
    {
        let num_out = partitioner.num_partitions();
        let buckets = self.run(ds.partitions, |_, part| {
            let mut buckets: Vec<Vec<R>> = (0..num_out).map(|_| Vec::new()).collect();
            for r in part {
                let dest = partitioner.partition_of(&key(&r));
                buckets[dest].push(r);
            }
            buckets
        });
        let inputs = transpose(buckets, num_out);
        let partitions = self.run(inputs, |_, chunks| {
            let mut records: Vec<R> = Vec::with_capacity(chunks.iter().map(Vec::len).sum());
            for chunk in chunks {
                records.extend(chunk);
            }
            records.sort_unstable_by_key(|r| key(r));
            records
        });
        Dataset { partitions }
    }

    /// Runs `local` on every partition with its global offset and the last
    /// record of the previous non-empty partition.
    pub fn scan_partitions_with_offsets<R, B, F>(&self, ds: Dataset<R>, local: F) -> Dataset<B>
    where
        R: Send + Sync + Clone,
        B: Send,
        F: Fn(Vec<R>, ScanContext<'_, R>) -> Vec<B> + Sync + Send,
    {
        self.scan_partitions_with_carry(ds, |_| (), |_, _, _| (), local)
    }

    /// Two-phase scan with a sequential carry.
    ///
    /// Phase 1 computes `summarize` for each partition in parallel, then folds
    /// the summaries of non-empty partitions left to right with `sweep`, which
    /// gets the previous carry, the partition offset and the summary. Phase 2
    /// calls `local` on each partition in parallel with the carry left by the
    /// earlier partitions.
    pub fn scan_partitions_with_carry<R, S, C, B, FS, FW, FL>(
        &self,
        ds: Dataset<R>,
        summarize: FS,
        mut sweep: FW,
        local: FL,
    ) -> Dataset<B>
    where
        R: Send + Sync + Clone,
        S: Send,
        C: Send + Sync,
        B: Send,
        FS: Fn(&[R]) -> S + Sync + Send,
        FW: FnMut(Option<&C>, u64, &S) -> C,
        FL: Fn(Vec<R>, ScanContext<'_, R, C>) -> Vec<B> + Sync + Send,
    {
        let lengths = ds.partition_lengths();
        let offsets = prefix_offsets(&lengths);
        let slices: Vec<&[R]> = ds.partitions.iter().map(Vec::as_slice).collect();
        let summaries = self.run(slices, |_, part| {
            if part.is_empty() {
                None
            } else {
                Some(summarize(part))
            }
        });

        // Barrier: sequential sweep over the boundary summaries.
        let mut incoming: Vec<(Option<R>, Option<usize>)> = Vec::with_capacity(lengths.len());
        let mut carries: Vec<C> = Vec::new();
        let mut last: Option<R> = None;
        for (p, summary) in summaries.iter().enumerate() {
            let carry_index = carries.len().checked_sub(1);
            incoming.push((last.clone(), carry_index));
            if let Some(summary) = summary {
                let next = sweep(carries.last(), offsets[p], summary);
                carries.push(next);
                last = ds.partitions[p].last().cloned();
            }
        }

        let tasks: Vec<_> = ds
            .partitions
            .into_iter()
            .zip(incoming)
            .zip(offsets)
            .collect();
        let carries = &carries;
        let partitions = self.run(tasks, |p, ((records, (pred, carry_index)), offset)| {
            let ctx = ScanContext {
                partition: p,
                offset,
                predecessor: pred.as_ref(),
                carry: carry_index.map(|c| &carries[c]),
            };
            local(records, ctx)
        });
        Dataset { partitions }
    }

    pub fn count<R>(&self, ds: &Dataset<R>) -> usize {
        ds.len()
    }

    /// Concatenates partitions in partition order. Refused above the
    /// configured collect limit.
    pub fn collect<R>(&self, ds: Dataset<R>) -> Result<Vec<R>, EngineError> {
        let records = ds.len();
        if records > self.config.collect_limit {
            return Err(EngineError::CollectLimit {
                records,
                limit: self.config.collect_limit,
            });
        }
        let mut out = Vec::with_capacity(records);
        for part in ds.partitions {
            out.extend(part);
        }
        Ok(out)
    }
}

/// Exclusive prefix sums of partition lengths.
pub fn prefix_offsets(lengths: &[usize]) -> Vec<u64> {
    let mut acc = 0u64;
    lengths
        .iter()
        .map(|&l| {
            let o = acc;
            acc += l as u64;
            o
        })
        .collect()
}

/// Turns per-input bucket lists into per-output chunk lists.
fn transpose<T>(buckets: Vec<Vec<Vec<T>>>, num_out: usize) -> Vec<Vec<Vec<T>>> {
    let mut inputs: Vec<Vec<Vec<T>>> = (0..num_out).map(|_| Vec::with_capacity(buckets.len())).collect();
    for per_input in buckets {
        for (dest, chunk) in per_input.into_iter().enumerate() {
            if !chunk.is_empty() {
                inputs[dest].push(chunk);
            }
        }
    }
    inputs
}
