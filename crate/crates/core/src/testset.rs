//! Homophone-noised evaluation sets.
//!
//! Every source sentence yields `variants` noisy copies. Each copy replaces
//! `min(k, |E|)` distinct positions, drawn uniformly without replacement
//! from the positions `E` whose character has at least one homophone, by a
//! homophone sampled in proportion to corpus counts. Output is
//! sentence-major: the variants of sentence `i` occupy lines
//! `i*variants .. (i+1)*variants`.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;

use crate::corpus::{SentenceTokens, Token};
use crate::error::{Error, Result};
use crate::io::{LineWriter, Lines};
use crate::noise::Substitution;
use crate::pinyin::{HomophoneTable, PinyinDictionary};
use crate::pipeline::{next_sentences, Workers};
use crate::seed::{self, Domain};

/// Attempts made to obtain a variant that differs from the earlier ones.
pub const UNIQUENESS_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoisyTestSpec {
    pub k: usize,
    pub variants: usize,
    pub seed: u64,
}

impl NoisyTestSpec {
    pub fn new(k: usize, variants: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if variants == 0 {
            return Err(Error::Config("variants must be at least 1".into()));
        }
        Ok(NoisyTestSpec { k, variants, seed })
    }
}

impl Default for NoisyTestSpec {
    fn default() -> Self {
        NoisyTestSpec {
            k: 1,
            variants: 3,
            seed: seed::DEFAULT_SEED,
        }
    }
}

/// Positions whose character has a nonempty homophone set.
pub fn homophone_eligible(sentence: &SentenceTokens, table: &HomophoneTable) -> Vec<usize> {
    sentence
        .tokens
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.as_cjk().filter(|&c| table.has_homophones(c)).map(|_| i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub tokens: Vec<Token>,
    pub substitutions: Vec<Substitution>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CraftedSentence {
    pub id: usize,
    pub variants: Vec<Variant>,
    /// Size of the homophone-eligible set.
    pub eligible: usize,
    /// Extra draws spent on avoiding duplicate variants.
    pub retries: usize,
    /// Variants equal to an earlier variant despite the retries.
    pub duplicates: usize,
}

impl CraftedSentence {
    pub fn is_shortfall(&self, k: usize) -> bool {
        self.eligible < k
    }
}

fn draw_variant<R: Rng + ?Sized>(
    sentence: &SentenceTokens,
    eligible: &[usize],
    k: usize,
    table: &HomophoneTable,
    rng: &mut R,
) -> Variant {
    let amount = k.min(eligible.len());
    let mut picks: Vec<usize> = index::sample(rng, eligible.len(), amount)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    picks.sort_unstable();

    let mut tokens = sentence.tokens.clone();
    let mut substitutions = Vec::with_capacity(amount);
    for position in picks {
        let original = sentence.tokens[position]
            .as_cjk()
            .expect("eligible positions hold characters");
        let homophone = table
            .sample(original, rng)
            .expect("eligible characters have homophones");
        tokens[position] = Token::Cjk(homophone);
        substitutions.push(Substitution {
            position,
            original,
            noise: Token::Cjk(homophone),
        });
    }
    Variant {
        tokens,
        substitutions,
    }
}

/// All variants of one sentence.
pub fn craft_sentence(
    sentence: &SentenceTokens,
    spec: &NoisyTestSpec,
    table: &HomophoneTable,
) -> CraftedSentence {
    let eligible = homophone_eligible(sentence, table);
    let mut out = CraftedSentence {
        id: sentence.id,
        variants: Vec::with_capacity(spec.variants),
        eligible: eligible.len(),
        retries: 0,
        duplicates: 0,
    };
    let mut seen: HashSet<Vec<Token>> = HashSet::new();
    for v in 0..spec.variants {
        let mut rng = seed::stream(
            spec.seed,
            Domain::Testset,
            &[spec.k as u64, sentence.id as u64, v as u64],
        );
        let mut variant = draw_variant(sentence, &eligible, spec.k, table, &mut rng);
        let mut attempts = 1;
        while seen.contains(&variant.tokens) && attempts < UNIQUENESS_ATTEMPTS {
            variant = draw_variant(sentence, &eligible, spec.k, table, &mut rng);
            attempts += 1;
            out.retries += 1;
        }
        if !seen.insert(variant.tokens.clone()) {
            out.duplicates += 1;
        }
        out.variants.push(variant);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry {
    /// 0-based source line.
    pub line: usize,
    pub variant: usize,
    pub position: usize,
    pub original: char,
    pub homophone: char,
}

impl fmt::Display for AuditEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            self.line, self.variant, self.position, self.original, self.homophone
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shortfall {
    pub line: usize,
    pub eligible: usize,
    pub k: usize,
}

impl fmt::Display for Shortfall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.line, self.eligible, self.k)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TestsetAudit {
    pub substitutions: Vec<AuditEntry>,
    pub shortfalls: Vec<Shortfall>,
    pub retries: usize,
    pub duplicates: usize,
}

impl TestsetAudit {
    fn record(&mut self, crafted: &CraftedSentence, k: usize) {
        for (v, variant) in crafted.variants.iter().enumerate() {
            for s in &variant.substitutions {
                self.substitutions.push(AuditEntry {
                    line: crafted.id,
                    variant: v,
                    position: s.position,
                    original: s.original,
                    homophone: s.noise.as_cjk().expect("homophones are characters"),
                });
            }
        }
        if crafted.is_shortfall(k) {
            self.shortfalls.push(Shortfall {
                line: crafted.id,
                eligible: crafted.eligible,
                k,
            });
        }
        self.retries += crafted.retries;
        self.duplicates += crafted.duplicates;
    }
}

/// An in-memory noisy test set.
#[derive(Debug, Clone, Default)]
pub struct NoisyTestset {
    pub sources: Vec<String>,
    pub references: Vec<Vec<u8>>,
    pub audit: TestsetAudit,
}

/// Crafts a noisy test set from sentences and their references.
pub fn craft_noisy_testset(
    corpus: &[SentenceTokens],
    references: &[Vec<u8>],
    spec: &NoisyTestSpec,
    table: &HomophoneTable,
) -> Result<NoisyTestset> {
    NoisyTestSpec::new(spec.k, spec.variants, spec.seed)?;
    if table.is_empty() {
        return Err(Error::Config("the homophone table is empty".into()));
    }
    if corpus.len() != references.len() {
        return Err(Error::LineCountMismatch {
            source_lines: corpus.len(),
            target_lines: references.len(),
        });
    }
    let mut out = NoisyTestset::default();
    for (sentence, reference) in corpus.iter().zip(references) {
        let crafted = craft_sentence(sentence, spec, table);
        for variant in &crafted.variants {
            out.sources.push(sentence.render(&variant.tokens));
            out.references.push(reference.clone());
        }
        out.audit.record(&crafted, spec.k);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TestsetOutputs {
    pub noisy: PathBuf,
    pub refs: PathBuf,
    pub audit: PathBuf,
    pub shortfall: PathBuf,
}

impl TestsetOutputs {
    pub fn plan(dir: &Path, stem: &str, k: usize) -> Self {
        let p = |ext: &str| dir.join(format!("{stem}.k{k}.{ext}"));
        TestsetOutputs {
            noisy: p("noisy"),
            refs: p("refs"),
            audit: p("audit.tsv"),
            shortfall: p("shortfall.tsv"),
        }
    }

    pub fn all(&self) -> [&PathBuf; 4] {
        [&self.noisy, &self.refs, &self.audit, &self.shortfall]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TestsetSummary {
    pub input_lines: usize,
    pub output_lines: usize,
    pub substitutions: usize,
    pub shortfalls: usize,
    pub retries: usize,
    pub duplicates: usize,
}

/// Streams a source/reference pair of files into the four test-set outputs.
pub fn craft_testset_files(
    src: &Path,
    refs: &Path,
    outputs: &TestsetOutputs,
    spec: &NoisyTestSpec,
    table: &HomophoneTable,
    workers: &Workers,
) -> Result<TestsetSummary> {
    NoisyTestSpec::new(spec.k, spec.variants, spec.seed)?;
    if table.is_empty() {
        return Err(Error::Config("the homophone table is empty".into()));
    }
    let mut noisy = LineWriter::create(&outputs.noisy)?;
    let mut refs_out = LineWriter::create(&outputs.refs)?;
    let mut audit_out = LineWriter::create(&outputs.audit)?;
    let mut short_out = LineWriter::create(&outputs.shortfall)?;

    let mut src_lines = Lines::open(src)?;
    let mut ref_lines = Lines::open(refs)?;
    let mut summary = TestsetSummary::default();
    loop {
        let sentences = next_sentences(&mut src_lines, workers)?;
        let mut references = Vec::with_capacity(sentences.len());
        for _ in 0..sentences.len() {
            match ref_lines.next() {
                Some(r) => references.push(r?),
                None => break,
            }
        }
        if references.len() < sentences.len()
            || (sentences.is_empty() && ref_lines.next().is_some())
        {
            return Err(Error::LineCountMismatch {
                source_lines: crate::io::count_lines(src)?,
                target_lines: crate::io::count_lines(refs)?,
            });
        }
        if sentences.is_empty() {
            break;
        }
        let crafted = workers.map(&sentences, |s| craft_sentence(s, spec, table));
        let mut audit = TestsetAudit::default();
        for ((sentence, reference), c) in sentences.iter().zip(&references).zip(&crafted) {
            for variant in &c.variants {
                noisy.write_line(&sentence.render(&variant.tokens))?;
                refs_out.write_line(reference)?;
                summary.output_lines += 1;
            }
            audit.record(c, spec.k);
        }
        for e in &audit.substitutions {
            audit_out.write_line(&e.to_string())?;
        }
        for s in &audit.shortfalls {
            short_out.write_line(&s.to_string())?;
        }
        summary.input_lines += sentences.len();
        summary.substitutions += audit.substitutions.len();
        summary.shortfalls += audit.shortfalls.len();
        summary.retries += audit.retries;
        summary.duplicates += audit.duplicates;
    }
    for w in [noisy, refs_out, audit_out, short_out] {
        w.finish()?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Length {
        line: usize,
        expected: usize,
        found: usize,
    },
    Count {
        line: usize,
        expected: usize,
        found: usize,
    },
    NotHomophone {
        line: usize,
        position: usize,
        original: String,
        replacement: String,
    },
    /// The audit log disagrees with the noisy text, or repeats a position.
    Audit { line: usize, message: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Length { line, expected, found } => {
                write!(f, "line {line}: {found} tokens, expected {expected}")
            }
            Violation::Count { line, expected, found } => {
                write!(f, "line {line}: {found} substitutions, expected {expected}")
            }
            Violation::NotHomophone { line, position, original, replacement } => write!(
                f,
                "line {line}: position {position} replaces `{original}` with non-homophone `{replacement}`"
            ),
            Violation::Audit { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

/// Outcome of checking a noisy test set against its source.
///
/// Line numbers in violations are 1-based lines of the noisy file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerificationReport {
    pub lines: usize,
    pub substitutions: usize,
    /// Substitution counts indexed by variant.
    pub per_variant: Vec<usize>,
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn check_variant(
        &mut self,
        original: &SentenceTokens,
        noisy: &SentenceTokens,
        variant: usize,
        expected: usize,
        dict: &PinyinDictionary,
    ) -> Vec<usize> {
        let line = noisy.id + 1;
        self.lines += 1;
        if self.per_variant.len() <= variant {
            self.per_variant.resize(variant + 1, 0);
        }
        if original.len() != noisy.len() {
            self.violations.push(Violation::Length {
                line,
                expected: original.len(),
                found: noisy.len(),
            });
            return Vec::new();
        }
        let mut diffs = Vec::new();
        for (position, (a, b)) in original.tokens.iter().zip(&noisy.tokens).enumerate() {
            if a == b {
                continue;
            }
            diffs.push(position);
            let homophonous = match (a.as_cjk(), b.as_cjk()) {
                (Some(x), Some(y)) => dict
                    .syllable(x)
                    .is_some_and(|s| dict.syllable(y) == Some(s)),
                _ => false,
            };
            if !homophonous {
                self.violations.push(Violation::NotHomophone {
                    line,
                    position,
                    original: a.surface(),
                    replacement: b.surface(),
                });
            }
        }
        if diffs.len() != expected {
            self.violations.push(Violation::Count {
                line,
                expected,
                found: diffs.len(),
            });
        }
        self.substitutions += diffs.len();
        self.per_variant[variant] += diffs.len();
        diffs
    }

    fn check_audit(&mut self, line: usize, diffs: &[usize], entries: &[&AuditEntry]) {
        let mut positions: Vec<usize> = entries.iter().map(|e| e.position).collect();
        positions.sort_unstable();
        let before = positions.len();
        positions.dedup();
        if positions.len() != before {
            self.violations.push(Violation::Audit {
                line,
                message: "repeated substitution position".into(),
            });
        } else if positions != diffs {
            self.violations.push(Violation::Audit {
                line,
                message: format!("audit positions {positions:?} differ from edits {diffs:?}"),
            });
        }
    }
}

/// Checks a sentence-major noisy test set.
///
/// `noisy` must hold `spec.variants` lines per original sentence. When an
/// audit is given, its positions must be pairwise distinct within each
/// variant and agree with the observed edits.
pub fn verify_testset(
    original: &[SentenceTokens],
    noisy: &[SentenceTokens],
    spec: &NoisyTestSpec,
    table: &HomophoneTable,
    dict: &PinyinDictionary,
    audit: Option<&TestsetAudit>,
) -> Result<VerificationReport> {
    if noisy.len() != original.len() * spec.variants {
        return Err(Error::Structural(format!(
            "{} noisy lines for {} sentences and {} variants",
            noisy.len(),
            original.len(),
            spec.variants
        )));
    }
    let mut by_variant: std::collections::HashMap<(usize, usize), Vec<&AuditEntry>> =
        std::collections::HashMap::new();
    if let Some(a) = audit {
        for e in &a.substitutions {
            by_variant.entry((e.line, e.variant)).or_default().push(e);
        }
    }
    let mut report = VerificationReport::default();
    for (sentence, copies) in original.iter().zip(noisy.chunks(spec.variants)) {
        let expected = spec.k.min(homophone_eligible(sentence, table).len());
        for (v, copy) in copies.iter().enumerate() {
            let diffs = report.check_variant(sentence, copy, v, expected, dict);
            if audit.is_some() {
                let entries = by_variant.remove(&(sentence.id, v)).unwrap_or_default();
                report.check_audit(copy.id + 1, &diffs, &entries);
            }
        }
    }
    Ok(report)
}

/// File-based [`verify_testset`], streaming both files.
pub fn verify_testset_files(
    src: &Path,
    noisy: &Path,
    spec: &NoisyTestSpec,
    table: &HomophoneTable,
    dict: &PinyinDictionary,
    workers: &Workers,
) -> Result<VerificationReport> {
    let mut src_lines = Lines::open(src)?;
    let mut noisy_lines = Lines::open(noisy)?;
    let mut report = VerificationReport::default();
    loop {
        let originals = next_sentences(&mut src_lines, workers)?;
        let mut copies = Vec::with_capacity(originals.len() * spec.variants);
        for _ in 0..originals.len() * spec.variants {
            let id = noisy_lines.lines_read();
            match noisy_lines.next() {
                Some(line) => copies.push(SentenceTokens::new(id, line?)),
                None => break,
            }
        }
        if copies.len() != originals.len() * spec.variants
            || (originals.is_empty() && noisy_lines.next().is_some())
        {
            return Err(Error::Structural(format!(
                "{} has {} lines, expected {} ({} sentences x {} variants)",
                noisy.display(),
                crate::io::count_lines(noisy)?,
                crate::io::count_lines(src)? * spec.variants,
                crate::io::count_lines(src)?,
                spec.variants
            )));
        }
        if originals.is_empty() {
            break;
        }
        let part = verify_testset(&originals, &copies, spec, table, dict, None)?;
        report.lines += part.lines;
        report.substitutions += part.substitutions;
        if report.per_variant.len() < part.per_variant.len() {
            report.per_variant.resize(part.per_variant.len(), 0);
        }
        for (acc, n) in report.per_variant.iter_mut().zip(&part.per_variant) {
            *acc += n;
        }
        report.violations.extend(part.violations);
    }
    Ok(report)
}
