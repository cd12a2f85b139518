use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use asrnoise::align::error_counts_for_files;
use asrnoise::corpus::{load_parallel_corpus, statistics_from_file, FrequencyTable, Vocabulary};
use asrnoise::factored::{
    emit_factored_corpus, EmbeddingSpec, FactoredOutputs, Factorizer, Format,
};
use asrnoise::noise::{NoiseConfig, NoiseContext, Strategy, DEFAULT_PLACEHOLDER};
use asrnoise::pinyin::{HomophoneTable, PinyinDictionary};
use asrnoise::pipeline::{noise_file, NoiseOutputs, Workers};
use asrnoise::seed::DEFAULT_SEED;
use asrnoise::testset::{craft_testset_files, verify_testset_files, NoisyTestSpec, TestsetOutputs};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

const EXIT_IO: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

/// Speech-recognition-style noise for Chinese-sourced parallel corpora.
#[derive(Parser)]
#[command(
    name = "asrnoise",
    version,
    after_help = "Exit status: 0 success, 2 usage error, 3 I/O error, 4 invalid input or settings."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count CJK characters and write the frequency table.
    Stats(StatsArgs),
    /// Write noised copies of a source file, one per epoch.
    Noise(NoiseArgs),
    /// Build noisy test sets with exactly k homophone substitutions.
    Testset(TestsetArgs),
    /// Write character|pinyin factored input.
    Factorize(FactorizeArgs),
    /// Align references and hypotheses and report error rates.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    src: PathBuf,
    /// Target side; only checked for an equal line count.
    #[arg(long)]
    tgt: Option<PathBuf>,
    /// Frequency TSV to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    src: PathBuf,
    /// Target side; checked for an equal line count, never rewritten.
    #[arg(long)]
    tgt: Option<PathBuf>,
    /// Frequency TSV from `stats`; computed from --src when absent.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    pinyin_dict: Option<PathBuf>,
    /// TOML file with strategy, p, seed and placeholder_token. Flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    epochs: u32,
    /// Also write `<name>.epoch<k>.log.tsv` with every substitution.
    #[arg(long)]
    log: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TestsetArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    refs: PathBuf,
    /// Substitutions per sentence; repeat or comma-separate for several sets.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    variants: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    pinyin_dict: PathBuf,
    /// Frequency TSV weighting the homophone choice; computed from --src when absent.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct FactorizeArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    pinyin_dict: PathBuf,
    #[arg(long, default_value = "combined")]
    format: Format,
    #[arg(long, default_value_t = EmbeddingSpec::default().char_dim)]
    char_dim: usize,
    #[arg(long, default_value_t = EmbeddingSpec::default().pinyin_dim)]
    pinyin_dim: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    hyps: PathBuf,
    /// Error-rate TSV to write; the summary always goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

/// Noise settings as read from a config file; every field may be omitted.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseFile {
    strategy: Option<Strategy>,
    p: Option<f64>,
    seed: Option<u64>,
    placeholder_token: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Stats(a) => stats(a),
        Command::Noise(a) => noise(a),
        Command::Testset(a) => testset(a),
        Command::Factorize(a) => factorize(a),
        Command::Analyze(a) => analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}

/// The error and its causes, skipping causes already spelled out above.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !msg.contains(&c) {
            msg.push_str(": ");
            msg.push_str(&c);
        }
    }
    msg
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<asrnoise::Error>() {
            return if err.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_IO
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if cause.is::<toml::de::Error>() {
            return EXIT_VALIDATION;
        }
    }
    EXIT_VALIDATION
}

fn config_error(message: impl Into<String>) -> anyhow::Error {
    asrnoise::Error::Config(message.into()).into()
}

/// Fails before any work if an output exists and `force` is off.
fn guard<'a>(paths: impl IntoIterator<Item = &'a PathBuf>, force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            return Err(config_error(format!(
                "{} already exists (pass --force to overwrite)",
                p.display()
            )));
        }
    }
    Ok(())
}

fn file_name(p: &Path) -> Result<String> {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| config_error(format!("{} is not a file path", p.display())))
}

fn require_file(p: &Path) -> Result<()> {
    std::fs::metadata(p).map_err(|e| asrnoise::Error::Io {
        path: p.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn check_line_counts(src: &Path, tgt: &Path) -> Result<()> {
    let (s, t) = (
        asrnoise::io::count_lines(src)?,
        asrnoise::io::count_lines(tgt)?,
    );
    if s != t {
        return Err(asrnoise::Error::LineCountMismatch {
            source_lines: s,
            target_lines: t,
        }
        .into());
    }
    Ok(())
}

fn load_statistics(src: &Path, stats: Option<&Path>) -> Result<(Vocabulary, FrequencyTable)> {
    match stats {
        Some(p) => {
            let freq = FrequencyTable::read_tsv(p)?;
            Ok((Vocabulary::from_frequencies(&freq), freq))
        }
        None => Ok(statistics_from_file(src)?),
    }
}

fn homophones(
    vocab: &Vocabulary,
    freq: &FrequencyTable,
    dict: &PinyinDictionary,
) -> HomophoneTable {
    let table = HomophoneTable::build(vocab, freq, dict);
    if !table.missing().is_empty() {
        eprintln!(
            "warning: {} of {} vocabulary characters have no dictionary entry",
            table.missing().len(),
            vocab.len()
        );
    }
    table
}

fn stats(a: StatsArgs) -> Result<()> {
    require_file(&a.src)?;
    guard([&a.out], a.force)?;
    let freq = match &a.tgt {
        Some(tgt) => {
            let mut freq = FrequencyTable::new();
            for pair in load_parallel_corpus(&a.src, tgt)? {
                freq.observe(&pair?.src.tokens);
            }
            freq
        }
        None => statistics_from_file(&a.src)?.1,
    };
    freq.write_tsv(&a.out)?;
    println!("vocabulary size: {}", freq.len());
    println!("CJK tokens: {}", freq.total());
    Ok(())
}

fn noise_config(a: &NoiseArgs) -> Result<NoiseConfig> {
    let file: NoiseFile = match &a.config {
        Some(p) => {
            let text = asrnoise::io::read_to_string(p)?;
            toml::from_str(&text).with_context(|| format!("reading {}", p.display()))?
        }
        None => NoiseFile::default(),
    };
    let config = NoiseConfig {
        strategy: a
            .strategy
            .or(file.strategy)
            .ok_or_else(|| config_error("no strategy given (--strategy or config file)"))?,
        p: a.p
            .or(file.p)
            .ok_or_else(|| config_error("no rate given (--p or config file)"))?,
        seed: a.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        placeholder_token: file
            .placeholder_token
            .unwrap_or_else(|| DEFAULT_PLACEHOLDER.into()),
    };
    config.validate()?;
    Ok(config)
}

fn noise(a: NoiseArgs) -> Result<()> {
    let config = noise_config(&a)?;
    if a.epochs == 0 {
        return Err(config_error("--epochs must be at least 1"));
    }
    require_file(&a.src)?;
    if let Some(tgt) = &a.tgt {
        check_line_counts(&a.src, tgt)?;
    }
    if config.strategy == Strategy::Homophone && a.pinyin_dict.is_none() {
        return Err(config_error("the homophone strategy needs --pinyin-dict"));
    }
    let outputs = NoiseOutputs::plan(&a.out_dir, &file_name(&a.src)?, a.epochs, a.log);
    guard(outputs.all(), a.force)?;

    let (vocab, freq) = load_statistics(&a.src, a.stats.as_deref())?;
    let table = match &a.pinyin_dict {
        Some(p) => Some(homophones(&vocab, &freq, &PinyinDictionary::load(p)?)),
        None => None,
    };
    let ctx =
        NoiseContext::new(vocab, freq, table).with_placeholder(config.placeholder_token.clone());
    ctx.check(config.strategy)?;
    let workers = Workers::new(a.workers)?;
    eprintln!("seed: {}", config.seed);

    std::fs::create_dir_all(&a.out_dir).map_err(|e| asrnoise::Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    let tallies = noise_file(&a.src, &outputs, &config, &ctx, &workers)?;
    for (epoch, (t, path)) in tallies.iter().zip(&outputs.noised).enumerate() {
        println!(
            "epoch {epoch}: {} — substitution rate {:.4} ({} of {} eligible, p = {}), {} changed, {} kept for lack of homophones",
            path.display(),
            t.rate(),
            t.selected,
            t.eligible,
            config.p,
            t.changed,
            t.skipped
        );
    }
    Ok(())
}

fn testset(a: TestsetArgs) -> Result<()> {
    let specs =
        a.k.iter()
            .map(|&k| NoisyTestSpec::new(k, a.variants, a.seed))
            .collect::<asrnoise::Result<Vec<_>>>()?;
    require_file(&a.src)?;
    require_file(&a.refs)?;
    let stem = file_name(&a.src)?;
    let plans: Vec<_> = specs
        .iter()
        .map(|s| TestsetOutputs::plan(&a.out_dir, &stem, s.k))
        .collect();
    guard(plans.iter().flat_map(|p| p.all()), a.force)?;

    let dict = PinyinDictionary::load(&a.pinyin_dict)?;
    let (vocab, freq) = load_statistics(&a.src, a.stats.as_deref())?;
    let table = homophones(&vocab, &freq, &dict);
    let workers = Workers::new(a.workers)?;
    eprintln!("seed: {}", a.seed);
    std::fs::create_dir_all(&a.out_dir).map_err(|e| asrnoise::Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;

    for (spec, plan) in specs.iter().zip(&plans) {
        let summary = craft_testset_files(&a.src, &a.refs, plan, spec, &table, &workers)?;
        let report = verify_testset_files(&a.src, &plan.noisy, spec, &table, &dict, &workers)?;
        println!(
            "k={}: {} — {} lines from {} sentences, {} substitutions, {} shortfalls, {} duplicate variants",
            spec.k,
            plan.noisy.display(),
            summary.output_lines,
            summary.input_lines,
            summary.substitutions,
            summary.shortfalls,
            summary.duplicates
        );
        if !report.is_clean() {
            for v in report.violations.iter().take(10) {
                eprintln!("  {v}");
            }
            bail!(asrnoise::Error::Structural(format!(
                "{} verification failures in {}",
                report.violations.len(),
                plan.noisy.display()
            )));
        }
        println!(
            "  verified: {} lines, all substitutions are homophones",
            report.lines
        );
    }
    Ok(())
}

fn factorize(a: FactorizeArgs) -> Result<()> {
    let spec = EmbeddingSpec::new(a.char_dim, a.pinyin_dim)?;
    require_file(&a.src)?;
    let stem = file_name(&a.src)?;
    let outputs = FactoredOutputs::plan(&a.out_dir, &stem, a.format);
    let spec_path = a.out_dir.join(format!("{stem}.embedding.json"));
    guard(outputs.paths().into_iter().chain([&spec_path]), a.force)?;

    let dict = PinyinDictionary::load(&a.pinyin_dict)?;
    let workers = Workers::new(a.workers)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| asrnoise::Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    let coverage = emit_factored_corpus(&a.src, &outputs, &Factorizer::new(&dict), &workers)?;
    std::fs::write(&spec_path, spec.to_json() + "\n").map_err(|e| asrnoise::Error::Io {
        path: spec_path.clone(),
        source: e,
    })?;
    for p in outputs.paths() {
        println!("wrote {}", p.display());
    }
    println!(
        "dictionary coverage: {:.2}% ({} of {} CJK tokens unknown)",
        coverage.percent(),
        coverage.unknown,
        coverage.cjk_tokens
    );
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    require_file(&a.refs)?;
    require_file(&a.hyps)?;
    if let Some(out) = &a.out {
        guard([out], a.force)?;
    }
    let report = error_counts_for_files(&a.refs, &a.hyps)?.report()?;
    if let Some(out) = &a.out {
        std::fs::write(out, report.to_tsv()).map_err(|e| asrnoise::Error::Io {
            path: out.clone(),
            source: e,
        })?;
    }
    println!("{report}");
    Ok(())
}
