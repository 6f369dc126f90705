//! Throughput and memory measurement.
//!
//! Protocol: the mechanism is fully initialized before any timing starts;
//! one warm-up pass runs untimed; wall time is the median over the repeats;
//! rates extrapolate to 24 hours as `tokens_per_second * 86400`. Memory
//! figures come from the allocation counters in [`crate::alloc_track`] and
//! cover only the perturbation calls, never initialization.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::alloc_track;
use crate::diffract::Diffractor;
use crate::error::{Error, Result};
use crate::mvc::MvcMechanism;
use crate::rng::SeedStream;
use crate::tokenize::tokenize;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// One measured configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub mechanism: String,
    pub config: String,
    pub epsilon: f64,
    pub tokens: u64,
    pub wall_s: f64,
    pub tok_per_s: f64,
    pub tok_per_day: f64,
    /// Initialization time, measured by the caller outside the timed section.
    pub init_s: f64,
    /// Cumulative bytes allocated by the perturbation calls.
    pub total_mem_bytes: u64,
    pub per_word_mem_bytes: f64,
    /// Peak growth of live bytes over the measured section.
    pub peak_extra_mem_bytes: u64,
}

pub const BENCH_CSV_HEADER: &str =
    "mechanism,config,epsilon,tokens,wall_s,tok_per_s,tok_per_day,init_s,total_mem_bytes,per_word_mem_bytes";

impl BenchReport {
    fn from_timing(
        mechanism: &str,
        config: &str,
        epsilon: f64,
        tokens: u64,
        wall_s: f64,
        init_s: f64,
    ) -> Self {
        let tok_per_s = tokens as f64 / wall_s;
        BenchReport {
            mechanism: mechanism.to_string(),
            config: config.to_string(),
            epsilon,
            tokens,
            wall_s,
            tok_per_s,
            tok_per_day: tok_per_s * SECONDS_PER_DAY,
            init_s,
            total_mem_bytes: 0,
            per_word_mem_bytes: 0.0,
            peak_extra_mem_bytes: 0,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.mechanism,
            self.config,
            self.epsilon,
            self.tokens,
            self.wall_s,
            self.tok_per_s,
            self.tok_per_day,
            self.init_s,
            self.total_mem_bytes,
            self.per_word_mem_bytes
        )
    }
}

/// Write reports in the fixed CSV schema.
pub fn write_bench_csv<W: Write>(mut out: W, reports: &[BenchReport]) -> Result<()> {
    let io = |e: std::io::Error| Error::Format(format!("csv write failed: {e}"));
    writeln!(out, "{BENCH_CSV_HEADER}").map_err(io)?;
    for r in reports {
        writeln!(out, "{}", r.csv_row()).map_err(io)?;
    }
    Ok(())
}

/// A mechanism that can perturb single words for benchmarking. The output
/// token is borrowed so the per-word allocation cost is the mechanism's own.
pub trait WordMechanism: Sync {
    fn tag(&self) -> &str;
    fn perturb_one<'a>(&'a self, word: &'a str, rng: &mut ChaCha8Rng) -> &'a str;
}

impl WordMechanism for Diffractor {
    fn tag(&self) -> &str {
        self.mechanism().kind.tag()
    }

    fn perturb_one<'a>(&'a self, word: &'a str, rng: &mut ChaCha8Rng) -> &'a str {
        self.perturb_word_borrowed(word, rng)
    }
}

impl WordMechanism for MvcMechanism<'_> {
    fn tag(&self) -> &str {
        "mvc"
    }

    fn perturb_one<'a>(&'a self, word: &'a str, rng: &mut ChaCha8Rng) -> &'a str {
        // benchmark samples are drawn from the vocabulary, so membership holds
        self.perturb(word, rng).unwrap_or(word)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    /// Timed repetitions; the median wall time is reported.
    pub repeats: usize,
    pub seed: u64,
    /// Worker threads; 1 (the default) is the single-threaded protocol used
    /// for comparisons. Parallel runs partition tokens with per-token RNG
    /// streams, so results are identical to the sequential ones.
    pub threads: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { repeats: 5, seed: 0, threads: 1 }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    xs[xs.len() / 2]
}

fn run_pass(mech: &dyn WordMechanism, words: &[&str], seeds: &SeedStream, pass: u64) -> u64 {
    let mut sink = 0u64;
    for (i, w) in words.iter().enumerate() {
        let mut rng = seeds.rng(pass, i as u64);
        let out = mech.perturb_one(w, &mut rng);
        sink = sink.wrapping_add(out.len() as u64);
    }
    std::hint::black_box(sink)
}

fn run_pass_parallel(
    mech: &dyn WordMechanism,
    words: &[&str],
    seeds: &SeedStream,
    pass: u64,
    pool: &rayon::ThreadPool,
) -> u64 {
    let sink = pool.install(|| {
        words
            .par_iter()
            .enumerate()
            .map(|(i, w)| {
                let mut rng = seeds.rng(pass, i as u64);
                mech.perturb_one(w, &mut rng).len() as u64
            })
            .reduce(|| 0u64, u64::wrapping_add)
    });
    std::hint::black_box(sink)
}

/// Time perturbation of a fixed word sample. `init_s` is the caller-measured
/// initialization cost; it is reported but never part of the timed section,
/// which starts after one untimed warm-up pass.
pub fn bench_throughput(
    mech: &dyn WordMechanism,
    words: &[&str],
    epsilon: f64,
    config: &str,
    init_s: f64,
    opts: BenchOptions,
) -> Result<BenchReport> {
    if words.is_empty() {
        return Err(Error::Contract("word sample must be non-empty".into()));
    }
    if opts.repeats == 0 {
        return Err(Error::Contract("repeats must be positive".into()));
    }
    let seeds = SeedStream::new(opts.seed);
    let pool = if opts.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| Error::Contract(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let one_pass = |pass: u64| match &pool {
        Some(p) => run_pass_parallel(mech, words, &seeds, pass, p),
        None => run_pass(mech, words, &seeds, pass),
    };
    one_pass(u64::MAX); // warm-up, untimed
    let mut times = Vec::with_capacity(opts.repeats);
    for pass in 0..opts.repeats {
        let t0 = Instant::now();
        one_pass(pass as u64);
        times.push(t0.elapsed().as_secs_f64());
    }
    Ok(BenchReport::from_timing(
        mech.tag(),
        config,
        epsilon,
        words.len() as u64,
        median(times),
        init_s,
    ))
}

/// Time perturbation of a whole text corpus. Tokens are counted by the
/// diffraction tokenizer; non-word tokens pass through and are counted too,
/// as any corpus run would emit them.
pub fn bench_corpus(
    mech: &dyn WordMechanism,
    corpus_path: impl AsRef<Path>,
    epsilon: f64,
    config: &str,
    init_s: f64,
    opts: BenchOptions,
) -> Result<BenchReport> {
    let path = corpus_path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.into(), source })?;
    let mut tokens: Vec<String> = Vec::new();
    let mut word_flags: Vec<bool> = Vec::new();
    for line in text.lines() {
        for t in tokenize(line) {
            word_flags.push(t.is_word);
            tokens.push(t.text);
        }
    }
    if tokens.is_empty() {
        return Err(Error::Contract(format!("corpus {} contains no tokens", path.display())));
    }
    if opts.repeats == 0 {
        return Err(Error::Contract("repeats must be positive".into()));
    }
    let seeds = SeedStream::new(opts.seed);
    let run = |pass: u64| {
        let mut sink = 0u64;
        for (i, (tok, is_word)) in tokens.iter().zip(&word_flags).enumerate() {
            if *is_word {
                let mut rng = seeds.rng(pass, i as u64);
                sink = sink.wrapping_add(mech.perturb_one(tok, &mut rng).len() as u64);
            } else {
                sink = sink.wrapping_add(tok.len() as u64);
            }
        }
        std::hint::black_box(sink)
    };
    run(u64::MAX); // warm-up
    let mut times = Vec::with_capacity(opts.repeats);
    for pass in 0..opts.repeats {
        let t0 = Instant::now();
        run(pass as u64);
        times.push(t0.elapsed().as_secs_f64());
    }
    Ok(BenchReport::from_timing(
        mech.tag(),
        config,
        epsilon,
        tokens.len() as u64,
        median(times),
        init_s,
    ))
}

/// Measure steady-state allocation attributable to perturbation calls:
/// cumulative allocated bytes over one pass (after a warm-up pass), plus the
/// peak growth of live bytes. Requires the tracking allocator; errors
/// otherwise rather than reporting zeros.
pub fn bench_memory(
    mech: &dyn WordMechanism,
    words: &[&str],
    epsilon: f64,
    config: &str,
    init_s: f64,
    seed: u64,
) -> Result<BenchReport> {
    if words.is_empty() {
        return Err(Error::Contract("word sample must be non-empty".into()));
    }
    if !alloc_track::is_tracking() {
        return Err(Error::Contract(
            "allocation tracking is not installed in this process".into(),
        ));
    }
    let seeds = SeedStream::new(seed);
    run_pass(mech, words, &seeds, u64::MAX); // reach steady state first
    alloc_track::reset_peak();
    let live_before = alloc_track::current_live();
    let total_before = alloc_track::total_allocated();
    let t0 = Instant::now();
    run_pass(mech, words, &seeds, 0);
    let wall_s = t0.elapsed().as_secs_f64();
    let total = alloc_track::total_allocated() - total_before;
    let peak_extra = (alloc_track::peak_live() - live_before).max(0) as u64;
    let mut report =
        BenchReport::from_timing(mech.tag(), config, epsilon, words.len() as u64, wall_s, init_s);
    report.total_mem_bytes = total;
    report.per_word_mem_bytes = total as f64 / words.len() as f64;
    report.peak_extra_mem_bytes = peak_extra;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffract::{ConfigTag, ListBank};
    use crate::list::WordList;
    use crate::mechanisms::MechanismConfig;

    fn synthetic_diffractor(v: usize, epsilon: f64) -> Diffractor {
        let words: Vec<String> = (0..v).map(|i| format!("w{i:06}")).collect();
        let list = WordList::from_words("synthetic", words).unwrap();
        Diffractor::new(
            MechanismConfig::geometric(epsilon, 7).unwrap(),
            ListBank::new(vec![list], ConfigTag::Custom).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn extrapolation_arithmetic_is_exact() {
        let d = synthetic_diffractor(100, 1.0);
        let words: Vec<&str> = d.bank().lists()[0].words().iter().map(|s| s.as_str()).collect();
        let r = bench_throughput(&d, &words, 1.0, "custom", 0.25, BenchOptions::default())
            .unwrap();
        assert_eq!(r.tok_per_day, r.tok_per_s * SECONDS_PER_DAY);
        assert_eq!(r.tokens, 100);
        assert_eq!(r.init_s, 0.25);
        assert!(r.wall_s > 0.0);
    }

    #[test]
    fn init_time_is_reported_but_not_timed() {
        // A deliberately slow "initialization" must not leak into wall_s for
        // a tiny workload.
        let d = synthetic_diffractor(50, 1.0);
        let words: Vec<&str> = d.bank().lists()[0].words().iter().map(|s| s.as_str()).collect();
        let t0 = Instant::now();
        std::thread::sleep(std::time::Duration::from_millis(60));
        let init_s = t0.elapsed().as_secs_f64();
        let r = bench_throughput(&d, &words, 1.0, "custom", init_s, BenchOptions::default())
            .unwrap();
        assert!(r.init_s >= 0.05);
        assert!(r.wall_s < 0.05, "timed section must exclude init, got {}", r.wall_s);
    }

    #[test]
    fn corpus_bench_counts_tokenizer_tokens() {
        let d = synthetic_diffractor(20, 1.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        std::fs::write(&path, "w000001 w000002 , w000003 !\nw000004 w000005 .\n").unwrap();
        let r = bench_corpus(&d, &path, 1.0, "custom", 0.0, BenchOptions::default()).unwrap();
        assert_eq!(r.tokens, 8);
        assert_eq!(r.tok_per_day, r.tok_per_s * SECONDS_PER_DAY);
    }

    #[test]
    fn geometric_throughput_is_size_independent() {
        // O(1) per word: rates for V=10k and V=50k stay within 2x.
        let small = synthetic_diffractor(10_000, 1.0);
        let large = synthetic_diffractor(50_000, 1.0);
        let sample = |d: &Diffractor| -> Vec<String> {
            d.bank().lists()[0].words().iter().step_by(7).take(20_000).cloned().collect()
        };
        let ws = sample(&small);
        let wl = sample(&large);
        let ws_refs: Vec<&str> = ws.iter().map(|s| s.as_str()).collect();
        let wl_refs: Vec<&str> = wl.iter().map(|s| s.as_str()).collect();
        let rs = bench_throughput(&small, &ws_refs, 1.0, "custom", 0.0, BenchOptions::default())
            .unwrap();
        let rl = bench_throughput(&large, &wl_refs, 1.0, "custom", 0.0, BenchOptions::default())
            .unwrap();
        let ratio = rs.tok_per_s / rl.tok_per_s;
        assert!(
            (0.5..=2.0).contains(&ratio),
            "rates should be within 2x: {} vs {}",
            rs.tok_per_s,
            rl.tok_per_s
        );
    }

    #[test]
    fn mvc_throughput_degrades_with_vocabulary_size() {
        use crate::embedding::EmbeddingModel;
        use rand::{Rng, SeedableRng};
        let make = |v: usize| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
            let words: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
            let vectors: Vec<f32> = (0..v * 50).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            EmbeddingModel::from_parts("m", 50, words, vectors, false).unwrap()
        };
        let small = make(1_000);
        let big = make(8_000);
        let mech_small = MvcMechanism::new(&small, 1.0).unwrap();
        let mech_big = MvcMechanism::new(&big, 1.0).unwrap();
        let words_small: Vec<&str> = small.words().iter().take(40).map(|s| s.as_str()).collect();
        let words_big: Vec<&str> = big.words().iter().take(40).map(|s| s.as_str()).collect();
        let opts = BenchOptions { repeats: 3, ..Default::default() };
        let rs = bench_throughput(&mech_small, &words_small, 1.0, "custom", 0.0, opts).unwrap();
        let rb = bench_throughput(&mech_big, &words_big, 1.0, "custom", 0.0, opts).unwrap();
        // 8x the vocabulary must cost at least 4x the scan time
        assert!(
            rs.tok_per_s >= 4.0 * rb.tok_per_s,
            "V=1k rate {} vs V=8k rate {}",
            rs.tok_per_s,
            rb.tok_per_s
        );
    }

    #[test]
    fn rate_ordering_geometric_tem_mvc() {
        use crate::embedding::EmbeddingModel;
        use rand::{Rng, SeedableRng};
        let v = 4000usize;
        let dim = 32usize;
        let eps = 0.5;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let words: Vec<String> = (0..v).map(|i| format!("w{i:05}")).collect();
        let vectors: Vec<f32> = (0..v * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let model =
            EmbeddingModel::from_parts("ord", dim, words.clone(), vectors, false).unwrap();
        let geo = Diffractor::new(
            MechanismConfig::geometric(eps, 1).unwrap(),
            ListBank::new(
                vec![WordList::from_words("ord", words.clone()).unwrap()],
                ConfigTag::Custom,
            )
            .unwrap(),
        )
        .unwrap();
        let tem = Diffractor::new(
            MechanismConfig::tem(eps, 0.001, 1).unwrap(),
            ListBank::new(
                vec![WordList::from_words("ord", words.clone()).unwrap()],
                ConfigTag::Custom,
            )
            .unwrap(),
        )
        .unwrap();
        let mvc = MvcMechanism::new(&model, eps).unwrap();
        let sample: Vec<&str> = words.iter().step_by(17).take(200).map(|s| s.as_str()).collect();
        let opts = BenchOptions::default();
        let r_geo = bench_throughput(&geo, &sample, eps, "custom", 0.0, opts).unwrap();
        let r_tem = bench_throughput(&tem, &sample, eps, "custom", 0.0, opts).unwrap();
        let r_mvc = bench_throughput(&mvc, &sample, eps, "custom", 0.0, opts).unwrap();
        assert!(
            r_geo.tok_per_s >= r_tem.tok_per_s && r_tem.tok_per_s >= r_mvc.tok_per_s,
            "expected geometric >= tem >= mvc, got {:.0} / {:.0} / {:.0}",
            r_geo.tok_per_s,
            r_tem.tok_per_s,
            r_mvc.tok_per_s
        );
    }

    #[test]
    fn parallel_pass_matches_sequential() {
        let d = synthetic_diffractor(2000, 0.5);
        let words: Vec<&str> = d.bank().lists()[0].words().iter().map(|s| s.as_str()).collect();
        let seeds = crate::rng::SeedStream::new(3);
        let sequential = run_pass(&d, &words, &seeds, 7);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let parallel = run_pass_parallel(&d, &words, &seeds, 7, &pool);
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn memory_bench_requires_tracking_allocator() {
        // The unit-test binary does not install the tracking allocator; the
        // memory path must refuse to fabricate numbers.
        let d = synthetic_diffractor(10, 1.0);
        let words: Vec<&str> = d.bank().lists()[0].words().iter().map(|s| s.as_str()).collect();
        assert!(!alloc_track::is_tracking());
        assert!(bench_memory(&d, &words, 1.0, "custom", 0.0, 0).is_err());
    }

    #[test]
    fn csv_schema_is_stable() {
        let mut r = BenchReport::from_timing("geometric", "L0", 1.0, 10, 2.0, 0.5);
        r.total_mem_bytes = 128;
        r.per_word_mem_bytes = 12.8;
        let mut buf = Vec::new();
        write_bench_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), BENCH_CSV_HEADER);
        assert_eq!(lines.next().unwrap(), "geometric,L0,1,10,2,5,432000,0.5,128,12.8");
    }
}
