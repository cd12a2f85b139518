//! Levenshtein alignment and error classification.
//!
//! Alignments use unit costs. Among equally cheap alignments the backtrace
//! prefers, at every cell, a diagonal step (match or substitution), then a
//! deletion, then an insertion.

use std::fmt;
use std::path::Path;

use crate::corpus::{tokenize, Token};
use crate::error::{Error, Result};
use crate::io::Lines;

/// Longest sequence accepted by [`levenshtein_align`].
pub const MAX_ALIGN_LEN: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Match,
    Substitution,
    Deletion,
    Insertion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlignmentOp<T> {
    Match(T),
    Substitution {
        reference: T,
        hypothesis: T,
    },
    /// A reference token missing from the hypothesis.
    Deletion(T),
    /// A hypothesis token absent from the reference.
    Insertion(T),
}

impl<T> AlignmentOp<T> {
    pub fn kind(&self) -> OpKind {
        match self {
            AlignmentOp::Match(_) => OpKind::Match,
            AlignmentOp::Substitution { .. } => OpKind::Substitution,
            AlignmentOp::Deletion(_) => OpKind::Deletion,
            AlignmentOp::Insertion(_) => OpKind::Insertion,
        }
    }

    pub fn ref_token(&self) -> Option<&T> {
        match self {
            AlignmentOp::Match(t) | AlignmentOp::Deletion(t) => Some(t),
            AlignmentOp::Substitution { reference, .. } => Some(reference),
            AlignmentOp::Insertion(_) => None,
        }
    }

    pub fn hyp_token(&self) -> Option<&T> {
        match self {
            AlignmentOp::Match(t) | AlignmentOp::Insertion(t) => Some(t),
            AlignmentOp::Substitution { hypothesis, .. } => Some(hypothesis),
            AlignmentOp::Deletion(_) => None,
        }
    }

    pub fn cost(&self) -> usize {
        match self {
            AlignmentOp::Match(_) => 0,
            _ => 1,
        }
    }
}

const DIAG: u8 = 1;
const UP: u8 = 2;
const LEFT: u8 = 4;

/// A minimum-cost edit script turning `reference` into `hypothesis`.
pub fn levenshtein_align<T: PartialEq + Clone>(
    reference: &[T],
    hypothesis: &[T],
) -> Result<Vec<AlignmentOp<T>>> {
    for len in [reference.len(), hypothesis.len()] {
        if len > MAX_ALIGN_LEN {
            return Err(Error::TooLong {
                len,
                limit: MAX_ALIGN_LEN,
            });
        }
    }
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    // moves[i * width + j]: optimal predecessor steps into cell (i, j)
    let mut moves = vec![0u8; (n + 1) * width];
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; width];
    moves[1..width].fill(LEFT);
    for i in 1..=n {
        cur[0] = i;
        moves[i * width] = UP;
        for j in 1..=m {
            let sub = prev[j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = prev[j] + 1;
            let ins = cur[j - 1] + 1;
            let best = sub.min(del).min(ins);
            cur[j] = best;
            moves[i * width + j] = (u8::from(sub == best) * DIAG)
                | (u8::from(del == best) * UP)
                | (u8::from(ins == best) * LEFT);
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let step = moves[i * width + j];
        if step & DIAG != 0 {
            let (r, h) = (&reference[i - 1], &hypothesis[j - 1]);
            ops.push(if r == h {
                AlignmentOp::Match(r.clone())
            } else {
                AlignmentOp::Substitution {
                    reference: r.clone(),
                    hypothesis: h.clone(),
                }
            });
            i -= 1;
            j -= 1;
        } else if step & UP != 0 {
            ops.push(AlignmentOp::Deletion(reference[i - 1].clone()));
            i -= 1;
        } else {
            ops.push(AlignmentOp::Insertion(hypothesis[j - 1].clone()));
            j -= 1;
        }
    }
    ops.reverse();
    Ok(ops)
}

pub fn alignment_cost<T>(ops: &[AlignmentOp<T>]) -> usize {
    ops.iter().map(AlignmentOp::cost).sum()
}

/// Edit distance in O(min(n, m)) memory.
pub fn levenshtein_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0; short.len() + 1];
    for (i, x) in long.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y))
                .min(prev[j + 1] + 1)
                .min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Operation counts, mergeable across shards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub matches: u64,
    pub substitutions: u64,
    pub deletions: u64,
    pub insertions: u64,
}

impl ErrorCounts {
    pub fn add_ops<T>(&mut self, ops: &[AlignmentOp<T>]) {
        for op in ops {
            match op.kind() {
                OpKind::Match => self.matches += 1,
                OpKind::Substitution => self.substitutions += 1,
                OpKind::Deletion => self.deletions += 1,
                OpKind::Insertion => self.insertions += 1,
            }
        }
    }

    pub fn merge(self, o: ErrorCounts) -> ErrorCounts {
        ErrorCounts {
            matches: self.matches + o.matches,
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
        }
    }

    /// Tokens on the reference side.
    pub fn reference_tokens(&self) -> u64 {
        self.matches + self.substitutions + self.deletions
    }

    pub fn errors(&self) -> u64 {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn report(&self) -> Result<ErrorReport> {
        let n = self.reference_tokens();
        if n == 0 {
            return Err(Error::NoReferenceTokens);
        }
        let rate = |x: u64| x as f64 / n as f64;
        Ok(ErrorReport {
            counts: *self,
            reference_tokens: n,
            sub_rate: rate(self.substitutions),
            del_rate: rate(self.deletions),
            ins_rate: rate(self.insertions),
            wer: rate(self.errors()),
        })
    }
}

/// Per-category error rates over reference tokens. `wer` exceeds 1 when
/// insertions outnumber the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub counts: ErrorCounts,
    pub reference_tokens: u64,
    pub sub_rate: f64,
    pub del_rate: f64,
    pub ins_rate: f64,
    pub wer: f64,
}

impl ErrorReport {
    /// `category<TAB>count<TAB>rate` rows with a header.
    pub fn to_tsv(&self) -> String {
        let c = &self.counts;
        format!(
            "category\tcount\trate\n\
             substitution\t{}\t{:.4}\n\
             deletion\t{}\t{:.4}\n\
             insertion\t{}\t{:.4}\n\
             wer\t{}\t{:.4}\n\
             reference_tokens\t{}\t\n",
            c.substitutions,
            self.sub_rate,
            c.deletions,
            self.del_rate,
            c.insertions,
            self.ins_rate,
            c.errors(),
            self.wer,
            self.reference_tokens
        )
    }
}

impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |x: f64| 100.0 * x;
        writeln!(f, "reference tokens: {}", self.reference_tokens)?;
        writeln!(
            f,
            "substitution: {:>8} ({:.4}, {:.2}%)",
            self.counts.substitutions,
            self.sub_rate,
            pct(self.sub_rate)
        )?;
        writeln!(
            f,
            "deletion:     {:>8} ({:.4}, {:.2}%)",
            self.counts.deletions,
            self.del_rate,
            pct(self.del_rate)
        )?;
        writeln!(
            f,
            "insertion:    {:>8} ({:.4}, {:.2}%)",
            self.counts.insertions,
            self.ins_rate,
            pct(self.ins_rate)
        )?;
        write!(f, "WER: {:.4} ({:.2}%)", self.wer, pct(self.wer))
    }
}

/// Aggregate error rates over `(reference, hypothesis)` token sequences.
pub fn error_rates<I, S>(pairs: I) -> Result<ErrorReport>
where
    I: IntoIterator<Item = (S, S)>,
    S: AsRef<[Token]>,
{
    let mut counts = ErrorCounts::default();
    for (r, h) in pairs {
        counts.add_ops(&levenshtein_align(r.as_ref(), h.as_ref())?);
    }
    counts.report()
}

/// Counts for two line-aligned text files, tokenized at character level.
pub fn error_counts_for_files(refs: &Path, hyps: &Path) -> Result<ErrorCounts> {
    let mut a = Lines::open(refs)?;
    let mut b = Lines::open(hyps)?;
    let mut counts = ErrorCounts::default();
    loop {
        match (a.next(), b.next()) {
            (None, None) => return Ok(counts),
            (Some(r), Some(h)) => {
                counts.add_ops(&levenshtein_align(&tokenize(&r?), &tokenize(&h?))?);
            }
            _ => {
                return Err(Error::Structural(format!(
                    "{} has {} lines but {} has {}",
                    refs.display(),
                    crate::io::count_lines(refs)?,
                    hyps.display(),
                    crate::io::count_lines(hyps)?
                )))
            }
        }
    }
}

/// Result of comparing a noised corpus with its original.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NoiseAudit {
    pub counts: ErrorCounts,
    /// Substitutions found on each line.
    pub per_line: Vec<usize>,
    /// Chinese characters in the original.
    pub cjk_tokens: u64,
}

impl NoiseAudit {
    pub fn add_line(&mut self, original: &str, noised: &str) -> Result<()> {
        let a = tokenize(original);
        let b = tokenize(noised);
        let ops = levenshtein_align(&a, &b)?;
        let mut line = ErrorCounts::default();
        line.add_ops(&ops);
        self.per_line.push(line.substitutions as usize);
        self.counts = self.counts.merge(line);
        self.cjk_tokens += a.iter().filter(|t| t.as_cjk().is_some()).count() as u64;
        Ok(())
    }

    pub fn is_substitution_only(&self) -> bool {
        self.counts.deletions == 0 && self.counts.insertions == 0
    }

    /// Observed substitutions per original Chinese character.
    ///
    /// A selected position whose noise equals the original character (uniform
    /// noise may draw the character itself) is invisible here.
    pub fn substitution_rate(&self) -> f64 {
        if self.cjk_tokens == 0 {
            0.0
        } else {
            self.counts.substitutions as f64 / self.cjk_tokens as f64
        }
    }
}

pub fn noise_audit<A: AsRef<str>, B: AsRef<str>>(
    original: &[A],
    noised: &[B],
) -> Result<NoiseAudit> {
    if original.len() != noised.len() {
        return Err(Error::Structural(format!(
            "original has {} lines, noised has {}",
            original.len(),
            noised.len()
        )));
    }
    let mut audit = NoiseAudit::default();
    for (a, b) in original.iter().zip(noised) {
        audit.add_line(a.as_ref(), b.as_ref())?;
    }
    Ok(audit)
}

pub fn noise_audit_files(original: &Path, noised: &Path) -> Result<NoiseAudit> {
    let mut a = Lines::open(original)?;
    let mut b = Lines::open(noised)?;
    let mut audit = NoiseAudit::default();
    loop {
        match (a.next(), b.next()) {
            (None, None) => return Ok(audit),
            (Some(x), Some(y)) => audit.add_line(&x?, &y?)?,
            _ => {
                return Err(Error::Structural(format!(
                    "{} and {} differ in line count",
                    original.display(),
                    noised.display()
                )))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    fn kinds(ops: &[AlignmentOp<char>]) -> Vec<OpKind> {
        ops.iter().map(AlignmentOp::kind).collect()
    }

    #[test]
    fn substitution_example() {
        let ops = levenshtein_align(&chars("语音翻译"), &chars("语音翻一")).unwrap();
        use OpKind::*;
        assert_eq!(kinds(&ops), [Match, Match, Match, Substitution]);
        assert_eq!(
            ops[3],
            AlignmentOp::Substitution {
                reference: '译',
                hypothesis: '一'
            }
        );
    }

    #[test]
    fn deletion_example() {
        let ops = levenshtein_align(&chars("语音翻译"), &chars("音翻译")).unwrap();
        use OpKind::*;
        assert_eq!(kinds(&ops), [Deletion, Match, Match, Match]);
        assert_eq!(ops[0], AlignmentOp::Deletion('语'));
    }

    #[test]
    fn insertion_examples() {
        let ops = levenshtein_align(&chars("语音翻译"), &chars("语音翻译了")).unwrap();
        use OpKind::*;
        assert_eq!(kinds(&ops), [Match, Match, Match, Match, Insertion]);
        let ops = levenshtein_align(&[], &chars("abc")).unwrap();
        assert_eq!(kinds(&ops), [Insertion; 3]);
        let ops = levenshtein_align(&chars("abc"), &[]).unwrap();
        assert_eq!(kinds(&ops), [Deletion; 3]);
        assert!(levenshtein_align::<char>(&[], &[]).unwrap().is_empty());
    }

    #[test]
    fn identical_sequences_are_all_matches() {
        let s = chars("语音翻译");
        let ops = levenshtein_align(&s, &s).unwrap();
        assert!(ops.iter().all(|o| o.kind() == OpKind::Match));
        assert_eq!(alignment_cost(&ops), 0);
    }

    #[test]
    fn ties_prefer_substitution() {
        // "ab" -> "ba": two substitutions cost the same as delete + insert
        let ops = levenshtein_align(&chars("ab"), &chars("ba")).unwrap();
        assert_eq!(kinds(&ops), [OpKind::Substitution; 2]);
        // deletion preferred over insertion
        let ops = levenshtein_align(&chars("ab"), &chars("b")).unwrap();
        assert_eq!(kinds(&ops), [OpKind::Deletion, OpKind::Match]);
    }

    #[test]
    fn rejects_overlong_input() {
        let long = vec![0u8; MAX_ALIGN_LEN + 1];
        assert!(matches!(
            levenshtein_align(&long, &[0u8]),
            Err(Error::TooLong { .. })
        ));
    }

    #[test]
    fn rates_and_report() {
        let r = tokenize("语音翻译");
        let report = error_rates([(r.clone(), tokenize("语音翻一"))]).unwrap();
        assert_eq!(report.sub_rate, 0.25);
        assert_eq!(report.wer, 0.25);
        assert_eq!(report.del_rate, 0.0);

        let report = error_rates([(r.clone(), r.clone())]).unwrap();
        assert_eq!(report.wer, 0.0);
        assert!(report.to_tsv().contains("wer\t0\t0.0000"));

        let report = error_rates([(tokenize("a"), tokenize("b c d"))]).unwrap();
        assert!(report.wer > 1.0);

        assert!(matches!(
            error_rates([(Vec::new(), tokenize("a"))]),
            Err(Error::NoReferenceTokens)
        ));
    }

    #[test]
    fn report_format() {
        let counts = ErrorCounts {
            matches: 906 + 7,
            substitutions: 64,
            deletions: 23,
            insertions: 7,
        };
        let report = counts.report().unwrap();
        let text = report.to_string();
        assert!(text.contains("(0.0640, 6.40%)"), "{text}");
        assert!(report
            .to_tsv()
            .starts_with("category\tcount\trate\nsubstitution\t64\t0.0640\n"));
    }

    #[test]
    fn audits() {
        let audit = noise_audit(&["语音翻译", "好"], &["语因翻译", "好"]).unwrap();
        assert_eq!(audit.per_line, [1, 0]);
        assert!(audit.is_substitution_only());
        assert_eq!(audit.substitution_rate(), 0.2);

        let same = noise_audit(&["语音", "x"], &["语音", "x"]).unwrap();
        assert_eq!(same.counts.errors(), 0);
        assert!(noise_audit(&["a", "b"], &["a"]).is_err());
    }
}
