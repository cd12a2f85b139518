//! Character-level tokenization of the source side, parallel corpus
//! ingestion, and vocabulary and frequency statistics.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{LineWriter, Lines};

/// Whether `c` lies in the CJK Unified Ideographs block or Extension A.
#[inline]
pub fn is_cjk(c: char) -> bool {
    matches!(c, '\u{4E00}'..='\u{9FFF}' | '\u{3400}'..='\u{4DBF}')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Cjk,
    Other,
}

/// One source token: a single Chinese character, or a maximal run of
/// non-CJK, non-whitespace characters such as `90%`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Cjk(char),
    Other(String),
}

impl Token {
    pub fn kind(&self) -> TokenKind {
        match self {
            Token::Cjk(_) => TokenKind::Cjk,
            Token::Other(_) => TokenKind::Other,
        }
    }

    pub fn as_cjk(&self) -> Option<char> {
        match *self {
            Token::Cjk(c) => Some(c),
            Token::Other(_) => None,
        }
    }

    pub fn surface(&self) -> String {
        self.to_string()
    }

    pub fn push_to(&self, out: &mut String) {
        match self {
            Token::Cjk(c) => out.push(*c),
            Token::Other(s) => out.push_str(s),
        }
    }

    fn first_char(&self) -> Option<char> {
        match self {
            Token::Cjk(c) => Some(*c),
            Token::Other(s) => s.chars().next(),
        }
    }

    fn last_char(&self) -> Option<char> {
        match self {
            Token::Cjk(c) => Some(*c),
            Token::Other(s) => s.chars().next_back(),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Cjk(c) => write!(f, "{c}"),
            Token::Other(s) => f.write_str(s),
        }
    }
}

impl From<char> for Token {
    fn from(c: char) -> Self {
        if is_cjk(c) {
            Token::Cjk(c)
        } else {
            Token::Other(c.to_string())
        }
    }
}

/// Splits a line into tokens together with their byte spans.
pub fn tokenize_spans(line: &str) -> (Vec<Token>, Vec<Range<usize>>) {
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut run: Option<usize> = None;

    for (i, c) in line.char_indices() {
        if is_cjk(c) || c.is_whitespace() {
            if let Some(start) = run.take() {
                tokens.push(Token::Other(line[start..i].to_string()));
                spans.push(start..i);
            }
            if !c.is_whitespace() {
                tokens.push(Token::Cjk(c));
                spans.push(i..i + c.len_utf8());
            }
        } else if run.is_none() {
            run = Some(i);
        }
    }
    if let Some(start) = run {
        tokens.push(Token::Other(line[start..].to_string()));
        spans.push(start..line.len());
    }
    (tokens, spans)
}

pub fn tokenize(line: &str) -> Vec<Token> {
    tokenize_spans(line).0
}

/// A tokenized source sentence.
///
/// The original line is kept so that a perturbed copy can be written back
/// with the same spacing as the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceTokens {
    pub id: usize,
    pub tokens: Vec<Token>,
    text: String,
    spans: Vec<Range<usize>>,
}

impl SentenceTokens {
    pub fn new(id: usize, line: impl Into<String>) -> Self {
        let text = line.into();
        let (tokens, spans) = tokenize_spans(&text);
        SentenceTokens {
            id,
            tokens,
            text,
            spans,
        }
    }

    pub fn from_bytes(id: usize, bytes: &[u8]) -> Result<Self> {
        let line = crate::io::decode_line(bytes)?;
        Ok(SentenceTokens::new(id, line))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Writes `replacement` (one token per original token) into the original
    /// line, keeping every separator as it was.
    ///
    /// Where a replacement would glue two non-CJK tokens together, a single
    /// space is inserted so that re-tokenizing the result yields exactly
    /// `replacement` again.
    pub fn render(&self, replacement: &[Token]) -> String {
        assert_eq!(
            replacement.len(),
            self.tokens.len(),
            "replacement must have one token per original token"
        );
        let mut out = String::with_capacity(self.text.len() + 8);
        let mut prev_end = 0;
        let mut prev: Option<&Token> = None;
        for (tok, span) in replacement.iter().zip(&self.spans) {
            let gap = &self.text[prev_end..span.start];
            if gap.is_empty() {
                let left = prev.and_then(Token::last_char);
                let right = tok.first_char();
                if let (Some(l), Some(r)) = (left, right) {
                    if !is_cjk(l) && !is_cjk(r) {
                        out.push(' ');
                    }
                }
            }
            out.push_str(gap);
            tok.push_to(&mut out);
            prev_end = span.end;
            prev = Some(tok);
        }
        out.push_str(&self.text[prev_end..]);
        out
    }

    /// The tokens joined by single spaces.
    pub fn spaced(tokens: &[Token]) -> String {
        let mut out = String::new();
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            t.push_to(&mut out);
        }
        out
    }
}

/// A source sentence and its untouched target line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub src: SentenceTokens,
    pub tgt: Vec<u8>,
}

/// Streams sentence pairs from two line-aligned files.
///
/// The target side is passed through as raw bytes. A line-count mismatch is
/// reported when the shorter file runs out, after counting the remainder of
/// the longer one.
pub fn load_parallel_corpus(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
) -> Result<ParallelCorpus<std::io::BufReader<std::fs::File>>> {
    Ok(ParallelCorpus {
        src: Lines::open(src_path)?,
        tgt: Lines::open(tgt_path)?,
        done: false,
    })
}

pub struct ParallelCorpus<R> {
    src: Lines<R>,
    tgt: Lines<R>,
    done: bool,
}

impl<R: BufRead> ParallelCorpus<R> {
    pub fn from_readers(src: Lines<R>, tgt: Lines<R>) -> Self {
        ParallelCorpus {
            src,
            tgt,
            done: false,
        }
    }

    fn mismatch(&mut self) -> Error {
        for line in self.src.by_ref() {
            if let Err(e) = line {
                return e;
            }
        }
        while let Some(line) = self.tgt.next_bytes() {
            if let Err(e) = line {
                return e;
            }
        }
        Error::LineCountMismatch {
            source_lines: self.src.lines_read(),
            target_lines: self.tgt.lines_read(),
        }
    }
}

impl<R: BufRead> Iterator for ParallelCorpus<R> {
    type Item = Result<SentencePair>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let id = self.src.lines_read();
        let src = self.src.next();
        let tgt = self.tgt.next_bytes();
        let item = match (src, tgt) {
            (None, None) => None,
            (Some(Ok(s)), Some(Ok(t))) => Some(Ok(SentencePair {
                src: SentenceTokens::new(id, s),
                tgt: t,
            })),
            (Some(Err(e)), _) | (_, Some(Err(e))) => Some(Err(e)),
            (Some(Ok(_)), None) | (None, Some(Ok(_))) => Some(Err(self.mismatch())),
        };
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Corpus counts of Chinese characters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: HashMap<char, u64>,
    total: u64,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, c: char, n: u64) {
        debug_assert!(is_cjk(c));
        if n == 0 {
            return;
        }
        *self.counts.entry(c).or_insert(0) += n;
        self.total += n;
    }

    pub fn observe(&mut self, tokens: &[Token]) {
        for c in tokens.iter().filter_map(Token::as_cjk) {
            self.add(c, 1);
        }
    }

    /// Associative, commutative merge of two partial tables.
    pub fn merge(mut self, other: FrequencyTable) -> FrequencyTable {
        if self.counts.len() < other.counts.len() {
            return other.merge(self);
        }
        for (c, n) in other.counts {
            *self.counts.entry(c).or_insert(0) += n;
        }
        self.total += other.total;
        self
    }

    pub fn count(&self, c: char) -> u64 {
        self.counts.get(&c).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Entries by descending count, ties broken by ascending code point.
    pub fn sorted(&self) -> Vec<(char, u64)> {
        let mut v: Vec<_> = self.counts.iter().map(|(&c, &n)| (c, n)).collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// `char<TAB>count`, one row per character, in [`sorted`](Self::sorted) order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (c, n) in self.sorted() {
            out.push(c);
            out.push('\t');
            out.push_str(&n.to_string());
            out.push('\n');
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = LineWriter::create(path)?;
        for (c, n) in self.sorted() {
            w.write_line(&format!("{c}\t{n}"))?;
        }
        w.finish()
    }

    pub fn parse_tsv(text: &str, origin: &str) -> Result<Self> {
        let mut table = FrequencyTable::new();
        for (i, line) in text.lines().enumerate() {
            let parse_err = |message: String| Error::Parse {
                origin: origin.to_string(),
                line: i + 1,
                message,
            };
            if line.trim().is_empty() {
                continue;
            }
            let (ch, count) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected `char<TAB>count`".into()))?;
            let mut chars = ch.chars();
            let c = match (chars.next(), chars.next()) {
                (Some(c), None) if is_cjk(c) => c,
                _ => return Err(parse_err(format!("`{ch}` is not a single CJK character"))),
            };
            let n: u64 = count
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad count `{count}`")))?;
            if table.counts.contains_key(&c) {
                return Err(parse_err(format!("duplicate character `{c}`")));
            }
            table.add(c, n);
        }
        Ok(table)
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = crate::io::read_to_string(path)?;
        Self::parse_tsv(&text, &path.display().to_string())
    }
}

impl FromIterator<(char, u64)> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = (char, u64)>>(iter: I) -> Self {
        let mut t = FrequencyTable::new();
        for (c, n) in iter {
            t.add(c, n);
        }
        t
    }
}

/// Distinct characters with dense ids, in frequency order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    chars: Vec<char>,
    ids: HashMap<char, u32>,
}

impl Vocabulary {
    /// Every character with a nonzero count, ordered as in
    /// [`FrequencyTable::sorted`], so that a vocabulary rebuilt from an
    /// exported TSV has identical ids.
    pub fn from_frequencies(freq: &FrequencyTable) -> Self {
        Self::from_chars(freq.sorted().into_iter().map(|(c, _)| c))
    }

    pub fn from_chars(chars: impl IntoIterator<Item = char>) -> Self {
        let mut v = Vocabulary::default();
        for c in chars {
            if !v.ids.contains_key(&c) {
                v.ids.insert(c, v.chars.len() as u32);
                v.chars.push(c);
            }
        }
        v
    }

    pub fn id(&self, c: char) -> Option<u32> {
        self.ids.get(&c).copied()
    }

    pub fn get(&self, id: u32) -> Option<char> {
        self.chars.get(id as usize).copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.ids.contains_key(&c)
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }
}

/// Vocabulary and frequency table of the source side of a corpus.
pub fn build_statistics<'a>(
    corpus: impl IntoIterator<Item = &'a SentenceTokens>,
) -> (Vocabulary, FrequencyTable) {
    let mut freq = FrequencyTable::new();
    for s in corpus {
        freq.observe(&s.tokens);
    }
    (Vocabulary::from_frequencies(&freq), freq)
}

/// Counts characters of a batch of raw lines in parallel.
pub fn count_lines_parallel(lines: &[String]) -> FrequencyTable {
    lines
        .par_iter()
        .fold(FrequencyTable::new, |mut acc, line| {
            acc.observe(&tokenize(line));
            acc
        })
        .reduce(FrequencyTable::new, FrequencyTable::merge)
}

/// Streams a source file in chunks and counts its characters.
pub fn statistics_from_file(path: impl AsRef<Path>) -> Result<(Vocabulary, FrequencyTable)> {
    let mut lines = Lines::open(path)?;
    let mut freq = FrequencyTable::new();
    loop {
        let chunk = lines.chunk(crate::pipeline::CHUNK_LINES)?;
        if chunk.is_empty() {
            break;
        }
        freq = freq.merge(count_lines_parallel(&chunk));
    }
    Ok((Vocabulary::from_frequencies(&freq), freq))
}
