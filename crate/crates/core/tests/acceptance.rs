//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use dbwt::cli::{write_outputs, BuildConfig};
use dbwt::corpus;
use dbwt::engine::{Dataset, Engine, EngineConfig};
use dbwt::oracle::{self, Oracle};
use dbwt::suffix::{
    build_isa, build_isa_observed, invert_isa, make_input, occ_table, init_isa, rank_sorted_pairs,
    ranks_by_index, shift_and_pair, PairRecord, RankEntry,
};
use dbwt::text::ceil_log2;
use dbwt::{build_index, bwt_from_sa, inverse_bwt, SentinelPolicy, Text};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn engine(workers: usize, partitions: usize) -> Engine {
    Engine::new(EngineConfig::new(workers, partitions)).expect("engine")
}

const POLICIES: [SentinelPolicy; 2] = [SentinelPolicy::AutoAppend, SentinelPolicy::PaperCompat];

/// Symbols of an alphabet of the given size that avoid the sentinel. The
/// 256-symbol alphabet is every byte except the sentinel.
fn alphabet(size: usize, policy: SentinelPolicy) -> Vec<u8> {
    let s = policy.sentinel();
    match size {
        1 => b"A".to_vec(),
        2 => b"AB".to_vec(),
        4 => b"ACGT".to_vec(),
        26 => (b'a'..=b'z').collect(),
        _ => (0..=255u8).filter(|&b| b != s).collect(),
    }
}

/// Random sentinel-terminated text with total length `n` in `1..=max_n`.
fn random_text(rng: &mut ChaCha8Rng, max_n: usize, alpha_size: usize, policy: SentinelPolicy) -> Text {
    let n = rng.gen_range(1..=max_n);
    let symbols = alphabet(alpha_size, policy);
    let mut bytes: Vec<u8> = (0..n - 1).map(|_| symbols[rng.gen_range(0..symbols.len())]).collect();
    bytes.push(policy.sentinel());
    Text::from_terminated(bytes, policy).expect("valid text")
}

fn adversarial_texts() -> Vec<Text> {
    let mut bodies: Vec<Vec<u8>> = Vec::new();
    for n in [1, 2, 3, 7, 64, 255, 256, 257, 1000, 4095, 65_536] {
        bodies.push(vec![b'A'; n]);
        bodies.push(b"AB".iter().copied().cycle().take(n).collect());
        bodies.push(b"ABC".iter().copied().cycle().take(n).collect());
    }
    // Fibonacci word.
    let (mut a, mut b) = (b"A".to_vec(), b"AB".to_vec());
    while b.len() < 5000 {
        let next = [b.clone(), a].concat();
        a = b;
        b = next;
    }
    bodies.push(b);
    // Binary de Bruijn sequence of order 10 (prefer-ones construction).
    let order = 10;
    let mut seen = std::collections::HashSet::new();
    let mut seq: Vec<u8> = vec![b'A'; order];
    seen.insert(seq.clone());
    loop {
        let tail = seq[seq.len() - (order - 1)..].to_vec();
        let mut advanced = false;
        for c in *b"BA" {
            let mut w = tail.clone();
            w.push(c);
            if seen.insert(w) {
                seq.push(c);
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
    bodies.push(seq);
    let mut out = Vec::new();
    for body in bodies {
        for p in POLICIES {
            out.push(Text::new(&body, p).expect("valid"));
        }
    }
    out
}

fn sa_of(engine: &Engine, text: &Text) -> Result<(Vec<u64>, u32), String> {
    let built = build_isa(engine, text).map_err(|e| e.to_string())?;
    let iterations = built.iterations();
    let sa = invert_isa(engine, built.isa).map_err(|e| e.to_string())?;
    let sa = engine.collect(sa).map_err(|e| e.to_string())?;
    Ok((sa.iter().map(|e| e.index).collect(), iterations))
}

fn check_bound(text: &Text, iterations: u32) -> Result<(), String> {
    ensure(iterations <= ceil_log2(text.len() as u64), || {
        format!("{iterations} passes for n = {} ({text:?})", text.len())
    })
}

fn criterion_1_golden() -> Outcome {
    let start = Instant::now();
    let e = engine(2, 3);
    let t = Text::new(b"BANANA", SentinelPolicy::PaperCompat).unwrap();

    let input = make_input(&e, &t);
    let occ = occ_table(&e, &input, t.order()).map_err(|e| e.to_string())?;
    let occ_pairs: Vec<(u8, u64)> = occ.entries().iter().map(|x| (x.byte, x.occ)).collect();
    ensure(occ_pairs == vec![(b'A', 0), (b'B', 3), (b'N', 4), (b'$', 6)], || format!("occ {occ_pairs:?}"))?;

    let isa = init_isa(&e, input, &occ).map_err(|e| e.to_string())?;
    let mut initial = e.collect(isa).unwrap();
    initial.sort();
    let expected: Vec<RankEntry> = [(0, 3), (1, 0), (2, 4), (3, 0), (4, 4), (5, 0), (6, 6)]
        .into_iter()
        .map(|(index, rank)| RankEntry { index, rank })
        .collect();
    ensure(initial == expected, || format!("initial ISA {initial:?}"))?;

    let built = build_index(&e, &t, true).map_err(|e| e.to_string())?;
    ensure(built.result.bwt == b"BNN$AAA", || format!("bwt {:?}", String::from_utf8_lossy(&built.result.bwt)))?;
    ensure(built.result.index_i == 3, || format!("index_I {}", built.result.index_i))?;
    let sa = built.result.sa.clone().unwrap_or_default();
    ensure(sa == vec![1, 3, 5, 0, 2, 4, 6], || format!("SA {sa:?}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("bwt BNN$AAA, I=3, SA, Occ and initial ISA exact ({elapsed:.2?})"))
}

fn criterion_2_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sizes = [1, 2, 4, 26, 256];
    let oracle = Oracle::default();
    let mut checked = 0;
    for policy in POLICIES {
        for i in 0..1000 {
            let text = random_text(&mut rng, 512, sizes[i % sizes.len()], policy);
            let e = Engine::sequential(EngineConfig::new(1, 1 + i % 4)).unwrap();
            let (sa, iterations) = sa_of(&e, &text)?;
            let naive = oracle.naive_suffix_array(&text).map_err(|e| e.to_string())?;
            ensure(sa == naive, || format!("SA mismatch on {text:?}"))?;
            check_bound(&text, iterations)?;

            let sa_ds = e.dataset(
                sa.iter()
                    .enumerate()
                    .map(|(j, &index)| dbwt::SaEntry { rank: j as u64, index })
                    .collect(),
            );
            let got = bwt_from_sa(&e, &text, sa_ds, false).map_err(|e| e.to_string())?;
            let rot = oracle.rotations_bwt(&text).map_err(|e| e.to_string())?;
            ensure(got.bwt == rot.bwt && got.index_i == rot.index_i, || format!("BWT mismatch on {text:?}"))?;
            ensure(inverse_bwt(&got.bwt, got.index_i, text.order()) == text.bytes(), || {
                format!("round trip failed on {text:?}")
            })?;
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("{checked} random texts, 0 mismatches ({elapsed:.1?})"))
}

fn criterion_3_h_order() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sizes = [1, 2, 4, 26, 256];
    let oracle = Oracle::default();
    let mut checked_passes = 0;
    let mut texts = 0;
    for policy in POLICIES {
        for i in 0..200 {
            let text = random_text(&mut rng, 256, sizes[i % sizes.len()], policy);
            let e = engine(1 + i % 3, 1 + i % 5);
            let n = text.len();
            let mut failure: Option<String> = None;
            build_isa_observed(&e, &text, |pass, isa| {
                if failure.is_some() {
                    return;
                }
                let got = ranks_by_index(&e, isa.clone(), n).unwrap();
                let want = oracle.h_order_ranks(&text, 2 * pass.shift as usize).unwrap();
                if got != want {
                    failure = Some(format!("pass {} on {text:?}: {got:?} vs {want:?}", pass.pass));
                }
                checked_passes += 1;
            })
            .map_err(|e| e.to_string())?;
            if let Some(f) = failure {
                return Err(f);
            }
            texts += 1;
        }
    }
    Ok(format!("{texts} texts, {checked_passes} passes match h-order oracle"))
}

fn criterion_4_iteration_bound() -> Outcome {
    let e = engine(2, 4);
    let mut max_seen = 0;
    let texts = adversarial_texts();
    for text in &texts {
        let (sa, iterations) = sa_of(&e, text)?;
        check_bound(text, iterations)?;
        max_seen = max_seen.max(iterations);
        if text.len() <= 4096 {
            let naive = oracle::naive_suffix_array(text).map_err(|e| e.to_string())?;
            ensure(sa == naive, || format!("SA mismatch on adversarial {text:?}"))?;
        }
    }
    Ok(format!(
        "{} adversarial texts within ceil(log2 n) passes (max {max_seen}); random texts checked in 2",
        texts.len()
    ))
}

fn criterion_5_round_trip() -> Outcome {
    let e = engine(2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut texts = adversarial_texts();
    for i in 0..200 {
        texts.push(random_text(&mut rng, 512, [1, 2, 4, 26, 256][i % 5], POLICIES[i % 2]));
    }
    for text in &texts {
        let built = build_index(&e, text, false).map_err(|e| e.to_string())?;
        let back = inverse_bwt(&built.result.bwt, built.result.index_i, text.order());
        ensure(back == text.bytes(), || format!("round trip failed on n = {}", text.len()))?;
    }
    Ok(format!("{} texts reproduced exactly", texts.len()))
}

fn criterion_6_determinism() -> Outcome {
    let body = corpus::proteins(1 << 20, 6);
    let text = Text::new(&body, SentinelPolicy::AutoAppend).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reference: Option<(Vec<u8>, Vec<u8>)> = None;
    let mut runs = 0;
    for workers in [1, 2, 8] {
        for partitions in [1, 3, 16] {
            let config = BuildConfig {
                input: "proteins-1MiB".into(),
                head: None,
                out: None,
                policy: SentinelPolicy::AutoAppend,
                workers,
                partitions,
                sample_fraction: None,
                max_input_bytes: u64::MAX,
                emit_sa: true,
            };
            let e = Engine::new(config.engine_config()).map_err(|e| e.to_string())?;
            let built = build_index(&e, &text, true).map_err(|e| e.to_string())?;
            let prefix = dir.path().join(format!("w{workers}p{partitions}"));
            write_outputs(&prefix, &config, &built, text.len()).map_err(|e| e.to_string())?;
            let bwt = std::fs::read(prefix.with_extension("bwt")).map_err(|e| e.to_string())?;
            let sa = std::fs::read(prefix.with_extension("sa")).map_err(|e| e.to_string())?;
            match &reference {
                None => reference = Some((bwt, sa)),
                Some((rb, rs)) => ensure(rb == &bwt && rs == &sa, || {
                    format!("outputs differ for workers {workers}, partitions {partitions}")
                })?,
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} configurations, byte-identical .bwt and .sa"))
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn timed_build(workers: usize, text: &Text) -> Result<Duration, String> {
    let e = engine(workers, 16);
    let start = Instant::now();
    build_index(&e, text, false).map_err(|e| e.to_string())?;
    Ok(start.elapsed())
}

fn criterion_7a_ten_mib() -> Outcome {
    let text = Text::new(&corpus::proteins(10 << 20, 7), SentinelPolicy::AutoAppend).unwrap();
    let workers = std::thread::available_parallelism().map_or(8, |n| n.get()).min(8);
    let elapsed = timed_build(workers, &text)?;
    ensure(elapsed < Duration::from_secs(600), || format!("10 MiB took {elapsed:.1?}"))?;
    Ok(format!("10 MiB end-to-end in {elapsed:.1?} with {workers} workers"))
}

fn criterion_7b_scaling() -> Outcome {
    let text = Text::new(&corpus::proteins(5 << 20, 8), SentinelPolicy::AutoAppend).unwrap();
    let one = median((0..3).map(|_| timed_build(1, &text)).collect::<Result<_, _>>()?);
    let four = median((0..3).map(|_| timed_build(4, &text)).collect::<Result<_, _>>()?);
    let ratio = four.as_secs_f64() / one.as_secs_f64();
    let cores = std::thread::available_parallelism().map_or(0, |n| n.get());
    let detail = format!("median 1 worker {one:.2?}, 4 workers {four:.2?}, ratio {ratio:.2} (<= 0.80 required; {cores} cores available)");
    ensure(ratio <= 0.8, || detail.clone())?;
    Ok(detail)
}

fn criterion_8_boundary_ties() -> Outcome {
    let mut straddles = 0;
    let mut texts = 0;
    for period in [b"AB".as_slice(), b"ABC", b"AAB"] {
        for n in [30usize, 97, 500, 2001] {
            for policy in POLICIES {
                let body: Vec<u8> = period.iter().copied().cycle().take(n).collect();
                let text = Text::new(&body, policy).unwrap();

                // Whole pipeline: 3 partitions vs 1, rank for rank after every pass.
                let mut per_pass = Vec::new();
                let single = engine(1, 1);
                build_isa_observed(&single, &text, |_, isa| {
                    per_pass.push(ranks_by_index(&single, isa.clone(), text.len()).unwrap())
                })
                .map_err(|e| e.to_string())?;
                let three = engine(2, 3);
                let mut k = 0;
                let mut diverged = None;
                build_isa_observed(&three, &text, |pass, isa| {
                    let r = ranks_by_index(&three, isa.clone(), text.len()).unwrap();
                    if per_pass.get(k) != Some(&r) && diverged.is_none() {
                        diverged = Some(pass.pass);
                    }
                    k += 1;
                })
                .map_err(|e| e.to_string())?;
                ensure(diverged.is_none() && k == per_pass.len(), || {
                    format!("partitions=3 diverges at pass {diverged:?} for {text:?}")
                })?;

                // Ranking scan on sorted pairs cut into 3 contiguous partitions,
                // so equal runs straddle the cuts.
                let input = make_input(&single, &text);
                let occ = occ_table(&single, &input, text.order()).unwrap();
                let isa = init_isa(&single, input, &occ).unwrap();
                let pairs = shift_and_pair(&single, isa, 1, text.len() as u64).unwrap();
                let mut sorted: Vec<PairRecord> = single.collect(pairs).unwrap();
                sorted.sort_by_key(PairRecord::value);
                let whole = rank_sorted_pairs(&single, Dataset::from_vec(sorted.clone(), 1));
                let cut = Dataset::from_vec(sorted.clone(), 3);
                let lens = cut.partition_lengths();
                let mut at = 0;
                for l in &lens[..2] {
                    at += l;
                    if at > 0 && at < sorted.len() && sorted[at - 1].value() == sorted[at].value() {
                        straddles += 1;
                    }
                }
                let split = rank_sorted_pairs(&three, cut);
                ensure(split.1 == whole.1, || format!("tie counts {} vs {}", split.1, whole.1))?;
                let a = ranks_by_index(&single, whole.0, text.len()).unwrap();
                let b = ranks_by_index(&three, split.0, text.len()).unwrap();
                ensure(a == b, || format!("split ranking differs for {text:?}"))?;
                texts += 1;
            }
        }
    }
    ensure(straddles > 0, || "no equal run straddled a cut".into())?;
    Ok(format!("{texts} periodic texts identical to single-partition runs ({straddles} straddling runs)"))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 golden values", criterion_1_golden),
        ("2 oracle equivalence", criterion_2_oracle_equivalence),
        ("3 h-order invariant", criterion_3_h_order),
        ("4 iteration bound", criterion_4_iteration_bound),
        ("5 round trip", criterion_5_round_trip),
        ("6 determinism under parallelism", criterion_6_determinism),
        ("7a 10 MiB under 10 minutes", criterion_7a_ten_mib),
        ("7b 4-worker scaling <= 0.8x", criterion_7b_scaling),
        ("8 boundary-tie correctness", criterion_8_boundary_ties),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{:.1?}]", start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{:.1?}]", start.elapsed());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
