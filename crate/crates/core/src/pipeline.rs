//! Chunked, parallel file processing with ordered output.
//!
//! Input is read in chunks of [`CHUNK_LINES`] lines. Each chunk is processed
//! on a worker pool and written back in line order, so memory stays bounded
//! by one chunk and the bytes written do not depend on the worker count.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::corpus::SentenceTokens;
use crate::error::{Error, Result};
use crate::io::{LineWriter, Lines};
use crate::noise::{perturb_in_epoch, NoiseConfig, NoiseContext, NoiseTally, NoisySentence};

pub const CHUNK_LINES: usize = 8192;

/// A fixed-size worker pool.
pub struct Workers {
    pool: ThreadPool,
}

impl Workers {
    /// `0` means one worker per available core.
    pub fn new(n: usize) -> Result<Self> {
        let pool = ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
        Ok(Workers { pool })
    }

    pub fn count(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// Maps `f` over `items` in parallel, keeping input order.
    pub fn map<T: Sync, U: Send>(&self, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

/// Reads the next chunk of a file as tokenized sentences numbered from the
/// current line.
pub fn next_sentences<R: std::io::BufRead>(
    lines: &mut Lines<R>,
    workers: &Workers,
) -> Result<Vec<SentenceTokens>> {
    let first = lines.lines_read();
    let chunk = lines.chunk(CHUNK_LINES)?;
    let numbered: Vec<_> = chunk.into_iter().enumerate().collect();
    Ok(workers.install(|| {
        numbered
            .into_par_iter()
            .map(|(i, line)| SentenceTokens::new(first + i, line))
            .collect()
    }))
}

/// Output locations of one noising run.
#[derive(Debug, Clone)]
pub struct NoiseOutputs {
    pub noised: Vec<PathBuf>,
    pub logs: Vec<PathBuf>,
}

impl NoiseOutputs {
    /// `<dir>/<stem>.epoch<k>.noised`, and `<dir>/<stem>.epoch<k>.log.tsv`
    /// when `with_log` is set.
    pub fn plan(dir: &Path, stem: &str, epochs: u32, with_log: bool) -> Self {
        let noised = (0..epochs)
            .map(|k| dir.join(format!("{stem}.epoch{k}.noised")))
            .collect();
        let logs = if with_log {
            (0..epochs)
                .map(|k| dir.join(format!("{stem}.epoch{k}.log.tsv")))
                .collect()
        } else {
            Vec::new()
        };
        NoiseOutputs { noised, logs }
    }

    pub fn all(&self) -> impl Iterator<Item = &PathBuf> {
        self.noised.iter().chain(&self.logs)
    }
}

/// Audit row `sentence_id<TAB>position<TAB>original<TAB>noise`.
pub fn log_rows(n: &NoisySentence) -> impl Iterator<Item = String> + '_ {
    n.substitutions
        .iter()
        .map(move |s| format!("{}\t{}\t{}\t{}", n.id, s.position, s.original, s.noise))
}

/// Perturbs a source file once per epoch.
///
/// Returns one tally per epoch.
pub fn noise_file(
    src: &Path,
    outputs: &NoiseOutputs,
    config: &NoiseConfig,
    ctx: &NoiseContext,
    workers: &Workers,
) -> Result<Vec<NoiseTally>> {
    config.validate()?;
    ctx.check(config.strategy)?;
    let epochs = outputs.noised.len() as u32;
    if epochs == 0 {
        return Err(Error::Config("epochs must be positive".into()));
    }
    let mut writers = outputs
        .noised
        .iter()
        .map(LineWriter::create)
        .collect::<Result<Vec<_>>>()?;
    let mut logs = outputs
        .logs
        .iter()
        .map(LineWriter::create)
        .collect::<Result<Vec<_>>>()?;
    let mut tallies = vec![NoiseTally::default(); epochs as usize];

    let mut lines = Lines::open(src)?;
    loop {
        let sentences = next_sentences(&mut lines, workers)?;
        if sentences.is_empty() {
            break;
        }
        for epoch in 0..epochs {
            let noisy: Vec<(String, NoisySentence)> = workers
                .map(&sentences, |s| {
                    perturb_in_epoch(s, epoch, config, ctx).map(|n| (n.render(s), n))
                })
                .into_iter()
                .collect::<Result<_>>()?;
            let e = epoch as usize;
            for (line, n) in &noisy {
                writers[e].write_line(line)?;
                if let Some(log) = logs.get_mut(e) {
                    for row in log_rows(n) {
                        log.write_line(&row)?;
                    }
                }
                tallies[e].add(n);
            }
        }
    }
    for w in writers.into_iter().chain(logs) {
        w.finish()?;
    }
    Ok(tallies)
}
