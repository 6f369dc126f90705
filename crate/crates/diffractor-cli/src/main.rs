//! `diffractor` — build word lists, perturb text, estimate plausible
//! deniability and benchmark mechanisms.
//!
//! Runs are described by a flat `key = value` config file; flags override
//! file values. Exit codes: 0 success, 2 configuration, 3 i/o, 4 contract,
//! 5 malformed data.

use std::io::{BufRead, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;

use diffractor::alloc_track::TrackingAllocator;
use diffractor::bench::{bench_corpus, bench_memory, bench_throughput, write_bench_csv, BenchOptions, BenchReport};
use diffractor::diffract::Diffractor;
use diffractor::embedding::{load_embeddings, LoadOptions};
use diffractor::eval::{estimate_deniability, write_deniability_csv, DeniabilityStats};
use diffractor::list::{build_list, Backend};
use diffractor::mvc::MvcMechanism;
use diffractor::{Error, RunConfig};

// makes memory columns of `diffractor bench` real measurements
#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator::new();

/// Exact-backend list construction above this size is better served by the
/// approximate backend or a vocabulary limit.
const EXACT_BACKEND_ADVISORY: usize = 50_000;

#[derive(Parser)]
#[command(name = "diffractor", version, about = "Word-level metric-DP text obfuscation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a word list from an embedding model by greedy chaining.
    BuildList(BuildListArgs),
    /// Perturb text line by line (stdin/stdout by default).
    Perturb(PerturbArgs),
    /// Estimate plausible-deniability statistics over an epsilon grid.
    Stats(StatsArgs),
    /// Measure throughput and memory.
    Bench(BenchArgs),
}

#[derive(Args)]
struct BuildListArgs {
    /// Text-format embedding file.
    #[arg(long)]
    embeddings: PathBuf,
    /// Seed-word RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep only the first K words of the file.
    #[arg(long)]
    limit: Option<usize>,
    /// Nearest-neighbor backend.
    #[arg(long, value_enum, default_value_t = BackendArg::Exact)]
    backend: BackendArg,
    /// Approximation slack for the approximate backend.
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    /// Case-fold tokens while loading.
    #[arg(long, default_value_t = true)]
    lowercase: bool,
    /// Output list file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Exact,
    Approx,
}

#[derive(Args)]
struct PerturbArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Input text file; stdin when omitted.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-token perturbation records as CSV.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Override the config epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the config master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for line processing (output order is preserved and
    /// results are independent of the thread count).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Words to sample from the vocabulary union.
    #[arg(long, default_value_t = 100)]
    sample: usize,
    /// Perturbations per word.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Comma-separated epsilon grid; the config epsilon is used when omitted.
    #[arg(long = "eps-grid")]
    eps_grid: Option<String>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// `1000`: time a random word sample; `corpus`: time a full text file.
    #[arg(long, value_enum, default_value_t = BenchMode::M1000)]
    mode: BenchMode,
    /// Corpus path for `--mode corpus`.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Also benchmark a baseline mechanism.
    #[arg(long, value_enum, default_value_t = BaselineArg::None)]
    baseline: BaselineArg,
    /// Sample size for `--mode 1000`.
    #[arg(long, default_value_t = 1000)]
    words: usize,
    /// Timed repetitions (median reported).
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchMode {
    #[value(name = "1000")]
    M1000,
    Corpus,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum BaselineArg {
    None,
    Mvc,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildList(args) => cmd_build_list(args),
        Command::Perturb(args) => cmd_perturb(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Bench(args) => cmd_bench(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn cmd_build_list(args: BuildListArgs) -> Result<(), Error> {
    let t0 = Instant::now();
    let model = load_embeddings(
        &args.embeddings,
        LoadOptions { limit: args.limit, lowercase: args.lowercase },
    )?;
    let load_s = t0.elapsed().as_secs_f64();

    let backend = match args.backend {
        BackendArg::Exact => {
            if model.len() > EXACT_BACKEND_ADVISORY {
                eprintln!(
                    "warning: exact backend on {} words scans O(V^2); consider \
                     --backend approx or --limit",
                    model.len()
                );
            }
            Backend::Exact
        }
        BackendArg::Approx => Backend::Approximate { rho: args.rho },
    };
    let t1 = Instant::now();
    let list = build_list(&model, args.seed, backend)?;
    let build_s = t1.elapsed().as_secs_f64();
    list.save(&args.out)?;
    println!(
        "built list of {} words from {} (dim {}) in {:.2}s (load {:.2}s); wrote {}",
        list.len(),
        model.name(),
        model.dim(),
        build_s,
        load_s,
        args.out.display()
    );
    Ok(())
}

fn load_config_with_overrides(
    path: &PathBuf,
    epsilon: Option<f64>,
    seed: Option<u64>,
) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(e) = epsilon {
        cfg.epsilon = e;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_perturb(args: PerturbArgs) -> Result<(), Error> {
    let cfg = load_config_with_overrides(&args.config, args.epsilon, args.seed)?;
    let diffractor = cfg.diffractor()?;

    let reader: Box<dyn BufRead> = match &args.input {
        Some(path) => Box::new(std::io::BufReader::new(std::fs::File::open(path).map_err(
            |source| Error::Io { path: path.clone(), source },
        )?)),
        None => Box::new(std::io::BufReader::new(std::io::stdin())),
    };
    let mut writer: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(std::fs::File::create(path).map_err(
            |source| Error::Io { path: path.clone(), source },
        )?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    };
    let mut records_writer = match &args.records {
        Some(path) => {
            let f = std::fs::File::create(path)
                .map_err(|source| Error::Io { path: path.clone(), source })?;
            let mut w = csv::Writer::from_writer(BufWriter::new(f));
            w.write_record(["line", "original", "output", "chosen_list", "was_oov"])
                .map_err(|e| Error::Format(format!("csv write failed: {e}")))?;
            Some(w)
        }
        None => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.max(1))
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;

    // Chunked streaming: constant memory in corpus size, parallel within a
    // chunk, output order preserved. Per-(line, token) RNG streams make the
    // result independent of scheduling.
    const CHUNK: usize = 1024;
    let mut line_no = 0u64;
    let mut lines = reader.lines();
    let io_out = |e: std::io::Error| Error::Io { path: args.out.clone().unwrap_or_else(|| "<stdout>".into()), source: e };
    loop {
        let mut chunk = Vec::with_capacity(CHUNK);
        for line in lines.by_ref().take(CHUNK) {
            let line = line.map_err(|source| Error::Io {
                path: args.input.clone().unwrap_or_else(|| "<stdin>".into()),
                source,
            })?;
            chunk.push((line_no, line));
            line_no += 1;
        }
        if chunk.is_empty() {
            break;
        }
        let outputs: Vec<_> = pool.install(|| {
            chunk
                .par_iter()
                .map(|(idx, line)| diffractor.perturb_text(line, *idx))
                .collect()
        });
        for ((idx, _), (out, recs)) in chunk.iter().zip(outputs) {
            writeln!(writer, "{out}").map_err(io_out)?;
            if let Some(w) = records_writer.as_mut() {
                for r in recs {
                    w.write_record([
                        idx.to_string(),
                        r.original,
                        r.output,
                        r.chosen_list.map(|l| l.to_string()).unwrap_or_default(),
                        r.was_oov.to_string(),
                    ])
                    .map_err(|e| Error::Format(format!("csv write failed: {e}")))?;
                }
            }
        }
    }
    writer.flush().map_err(io_out)?;
    if let Some(mut w) = records_writer {
        w.flush().map_err(|e| Error::Format(format!("csv flush failed: {e}")))?;
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<(), Error> {
    let cfg = load_config_with_overrides(&args.config, None, None)?;
    let grid: Vec<f64> = match &args.eps_grid {
        Some(s) => {
            let mut grid = Vec::new();
            for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let e: f64 = tok.parse().map_err(|_| {
                    Error::Config(vec![format!("eps-grid: not a number: {tok:?}")])
                })?;
                if e <= 0.0 {
                    return Err(Error::Config(vec![format!(
                        "eps-grid: epsilon must be positive, got {e}"
                    )]));
                }
                grid.push(e);
            }
            grid
        }
        None => vec![cfg.epsilon],
    };
    if grid.is_empty() {
        return Err(Error::Config(vec!["eps-grid: grid is empty".to_string()]));
    }

    let bank = cfg.build_bank()?;
    let mut all_rows: Vec<DeniabilityStats> = Vec::new();
    for &eps in &grid {
        let mut run = cfg.clone();
        run.epsilon = eps;
        let d = Diffractor::new(run.mechanism_config()?, bank.clone())?
            .with_oov_policy(run.oov_policy)
            .with_case_policy(run.case_policy);
        // sample seed fixed across the grid: matched words and draws
        let (rows, agg) = estimate_deniability(&d, args.sample, args.trials, cfg.master_seed)?;
        eprintln!(
            "eps={eps}: mean N_w = {:.4}, mean S_w = {:.2} ({} words x {} trials)",
            agg.mean_n_w, agg.mean_s_w, agg.words, agg.trials
        );
        all_rows.extend(rows);
    }

    let mech = cfg.mechanism.tag();
    let tag = cfg.config_tag.tag();
    match &args.out {
        Some(path) => {
            let f = std::fs::File::create(path)
                .map_err(|source| Error::Io { path: path.clone(), source })?;
            write_deniability_csv(BufWriter::new(f), &all_rows, mech, tag)?;
        }
        None => write_deniability_csv(std::io::stdout().lock(), &all_rows, mech, tag)?,
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Error> {
    let cfg = load_config_with_overrides(&args.config, None, None)?;
    let opts = BenchOptions { repeats: args.repeats.max(1), seed: cfg.master_seed };

    // Initialization happens out here; only its duration enters the report.
    let t0 = Instant::now();
    let diffractor = cfg.diffractor()?;
    let init_s = t0.elapsed().as_secs_f64();

    let tag = cfg.config_tag.tag();
    let mut reports: Vec<BenchReport> = Vec::new();

    let union: Vec<&str> = diffractor.bank().vocabulary_union();
    let mut rng = diffractor.seeds().rng(u64::MAX - 1, 0);
    let sample: Vec<&str> =
        (0..args.words.max(1)).map(|_| union[rng.random_range(0..union.len())]).collect();

    let mvc_model = if args.baseline == BaselineArg::Mvc {
        let path = cfg.embeddings.first().ok_or_else(|| {
            Error::Config(vec![
                "embeddings: the mvc baseline needs an embedding model in the config"
                    .to_string(),
            ])
        })?;
        let t = Instant::now();
        let model =
            load_embeddings(path, LoadOptions { limit: cfg.limit, lowercase: cfg.lowercase })?;
        Some((model, t.elapsed().as_secs_f64()))
    } else {
        None
    };

    match args.mode {
        BenchMode::M1000 => {
            let mut report =
                bench_throughput(&diffractor, &sample, cfg.epsilon, tag, init_s, opts)?;
            let mem = bench_memory(&diffractor, &sample, cfg.epsilon, tag, init_s, opts.seed)?;
            report.total_mem_bytes = mem.total_mem_bytes;
            report.per_word_mem_bytes = mem.per_word_mem_bytes;
            report.peak_extra_mem_bytes = mem.peak_extra_mem_bytes;
            reports.push(report);
            if let Some((model, mvc_init)) = &mvc_model {
                let mech = MvcMechanism::new(model, cfg.epsilon)?;
                // words must come from the model's own vocabulary
                let mvc_sample: Vec<&str> = (0..args.words.max(1))
                    .map(|_| model.word(rng.random_range(0..model.len())))
                    .collect();
                let mut report =
                    bench_throughput(&mech, &mvc_sample, cfg.epsilon, tag, *mvc_init, opts)?;
                let mem =
                    bench_memory(&mech, &mvc_sample, cfg.epsilon, tag, *mvc_init, opts.seed)?;
                report.total_mem_bytes = mem.total_mem_bytes;
                report.per_word_mem_bytes = mem.per_word_mem_bytes;
                report.peak_extra_mem_bytes = mem.peak_extra_mem_bytes;
                reports.push(report);
            }
        }
        BenchMode::Corpus => {
            let corpus = args.corpus.as_ref().ok_or_else(|| {
                Error::Config(vec!["corpus: --mode corpus needs --corpus".to_string()])
            })?;
            reports.push(bench_corpus(&diffractor, corpus, cfg.epsilon, tag, init_s, opts)?);
            if let Some((model, mvc_init)) = &mvc_model {
                let mech = MvcMechanism::new(model, cfg.epsilon)?;
                reports.push(bench_corpus(&mech, corpus, cfg.epsilon, tag, *mvc_init, opts)?);
            }
        }
    }

    match &args.out {
        Some(path) => {
            let f = std::fs::File::create(path)
                .map_err(|source| Error::Io { path: path.clone(), source })?;
            write_bench_csv(BufWriter::new(f), &reports)?;
        }
        None => write_bench_csv(std::io::stdout().lock(), &reports)?,
    }
    Ok(())
}
