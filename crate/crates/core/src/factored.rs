//! Character + Pinyin factored input features.
//!
//! Every token is paired with a syllable: its toneless Pinyin for Chinese
//! characters, `<na>` for other tokens, `<unk>` for characters missing from
//! the dictionary and `<sub>` for the substitution placeholder. The input
//! vector of a token is the concatenation of its character embedding and its
//! syllable embedding, so homophones share the trailing block exactly.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::corpus::{SentenceTokens, Token};
use crate::error::{Error, Result};
use crate::io::{LineWriter, Lines};
use crate::noise::DEFAULT_PLACEHOLDER;
use crate::pinyin::{PinyinDictionary, NA, UNK};
use crate::pipeline::{next_sentences, Workers};
use crate::seed::{self, Domain};

/// Syllable paired with the substitution placeholder.
pub const SUB: &str = "<sub>";
/// Key of the fallback row in both embedding tables.
pub const UNK_ROW: &str = "<unk>";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FactoredToken {
    pub surface: String,
    pub syllable: String,
}

impl FactoredToken {
    pub fn new(surface: impl Into<String>, syllable: impl Into<String>) -> Self {
        FactoredToken {
            surface: surface.into(),
            syllable: syllable.into(),
        }
    }
}

/// `[surface;syllable]`
impl fmt::Display for FactoredToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{};{}]", self.surface, self.syllable)
    }
}

pub struct Factorizer<'a> {
    dict: &'a PinyinDictionary,
    placeholder: String,
}

impl<'a> Factorizer<'a> {
    pub fn new(dict: &'a PinyinDictionary) -> Self {
        Factorizer {
            dict,
            placeholder: DEFAULT_PLACEHOLDER.to_string(),
        }
    }

    pub fn with_placeholder(mut self, placeholder: impl Into<String>) -> Self {
        self.placeholder = placeholder.into();
        self
    }

    pub fn token(&self, token: &Token) -> FactoredToken {
        let syllable = match token {
            Token::Cjk(c) => self.dict.syllable(*c).unwrap_or(UNK),
            Token::Other(s) if *s == self.placeholder => SUB,
            Token::Other(_) => NA,
        };
        FactoredToken::new(token.surface(), syllable)
    }

    pub fn tokens(&self, tokens: &[Token]) -> Vec<FactoredToken> {
        tokens.iter().map(|t| self.token(t)).collect()
    }
}

/// Factorizes a sentence with the default placeholder.
pub fn factorize_sentence(
    sentence: &SentenceTokens,
    dict: &PinyinDictionary,
) -> Vec<FactoredToken> {
    Factorizer::new(dict).tokens(&sentence.tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// One line per sentence of space-separated `surface|syllable` tokens.
    Combined,
    /// Two line-aligned files of surfaces and syllables.
    Split,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "combined" => Ok(Format::Combined),
            "split" => Ok(Format::Split),
            _ => Err(Error::Config(format!("unknown format `{s}`"))),
        }
    }
}

fn escape_surface(surface: &str, out: &mut String) {
    for c in surface.chars() {
        if c == '|' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
}

/// One combined-format line.
pub fn combined_line(tokens: &[FactoredToken]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        escape_surface(&t.surface, &mut out);
        out.push('|');
        out.push_str(&t.syllable);
    }
    out
}

/// Inverse of [`combined_line`].
pub fn parse_combined_line(line: &str) -> Result<Vec<FactoredToken>> {
    let bad = |message: String| Error::Parse {
        origin: "<factored>".into(),
        line: 1,
        message,
    };
    line.split(' ')
        .filter(|f| !f.is_empty())
        .map(|field| {
            let mut surface = String::new();
            let mut chars = field.char_indices();
            while let Some((i, c)) = chars.next() {
                match c {
                    '\\' => match chars.next() {
                        Some((_, e @ ('|' | '\\'))) => surface.push(e),
                        _ => return Err(bad(format!("bad escape in `{field}`"))),
                    },
                    '|' => {
                        let syllable = &field[i + 1..];
                        if surface.is_empty() || syllable.is_empty() || syllable.contains('|') {
                            return Err(bad(format!("malformed factor `{field}`")));
                        }
                        return Ok(FactoredToken::new(surface, syllable));
                    }
                    c => surface.push(c),
                }
            }
            Err(bad(format!("missing `|` in `{field}`")))
        })
        .collect()
}

/// The surface and syllable lines of the split format.
pub fn split_lines(tokens: &[FactoredToken]) -> (String, String) {
    let surfaces: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
    let syllables: Vec<&str> = tokens.iter().map(|t| t.syllable.as_str()).collect();
    (surfaces.join(" "), syllables.join(" "))
}

pub fn parse_split_lines(surfaces: &str, syllables: &str) -> Result<Vec<FactoredToken>> {
    let a: Vec<&str> = surfaces.split(' ').filter(|s| !s.is_empty()).collect();
    let b: Vec<&str> = syllables.split(' ').filter(|s| !s.is_empty()).collect();
    if a.len() != b.len() {
        return Err(Error::Structural(format!(
            "{} surfaces but {} syllables",
            a.len(),
            b.len()
        )));
    }
    Ok(a.into_iter()
        .zip(b)
        .map(|(s, p)| FactoredToken::new(s, p))
        .collect())
}

#[derive(Debug, Clone)]
pub enum FactoredOutputs {
    Combined(PathBuf),
    Split {
        surfaces: PathBuf,
        syllables: PathBuf,
    },
}

impl FactoredOutputs {
    /// `<stem>.factored`, or `<stem>.surface` + `<stem>.pinyin`.
    pub fn plan(dir: &Path, stem: &str, format: Format) -> Self {
        match format {
            Format::Combined => FactoredOutputs::Combined(dir.join(format!("{stem}.factored"))),
            Format::Split => FactoredOutputs::Split {
                surfaces: dir.join(format!("{stem}.surface")),
                syllables: dir.join(format!("{stem}.pinyin")),
            },
        }
    }

    pub fn paths(&self) -> Vec<&PathBuf> {
        match self {
            FactoredOutputs::Combined(p) => vec![p],
            FactoredOutputs::Split {
                surfaces,
                syllables,
            } => vec![surfaces, syllables],
        }
    }
}

/// Dictionary coverage of the Chinese characters seen while factorizing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Coverage {
    pub sentences: usize,
    pub cjk_tokens: u64,
    pub unknown: u64,
}

impl Coverage {
    pub fn percent(&self) -> f64 {
        if self.cjk_tokens == 0 {
            100.0
        } else {
            100.0 * (self.cjk_tokens - self.unknown) as f64 / self.cjk_tokens as f64
        }
    }

    fn add(&mut self, tokens: &[FactoredToken], source: &[Token]) {
        self.sentences += 1;
        for (f, t) in tokens.iter().zip(source) {
            if t.as_cjk().is_some() {
                self.cjk_tokens += 1;
                if f.syllable == UNK {
                    self.unknown += 1;
                }
            }
        }
    }
}

pub fn emit_factored_corpus(
    src: &Path,
    outputs: &FactoredOutputs,
    factorizer: &Factorizer<'_>,
    workers: &Workers,
) -> Result<Coverage> {
    let mut writers = outputs
        .paths()
        .into_iter()
        .map(LineWriter::create)
        .collect::<Result<Vec<_>>>()?;
    let mut coverage = Coverage::default();
    let mut lines = Lines::open(src)?;
    loop {
        let sentences = next_sentences(&mut lines, workers)?;
        if sentences.is_empty() {
            break;
        }
        let factored = workers.map(&sentences, |s| factorizer.tokens(&s.tokens));
        for (s, f) in sentences.iter().zip(&factored) {
            coverage.add(f, &s.tokens);
            match writers.as_mut_slice() {
                [combined] => combined.write_line(&combined_line(f))?,
                [surfaces, syllables] => {
                    let (a, b) = split_lines(f);
                    surfaces.write_line(&a)?;
                    syllables.write_line(&b)?;
                }
                _ => unreachable!(),
            }
        }
    }
    for w in writers {
        w.finish()?;
    }
    Ok(coverage)
}

/// Reads factored sentences back from either format.
pub fn read_factored(outputs: &FactoredOutputs) -> Result<Vec<Vec<FactoredToken>>> {
    match outputs {
        FactoredOutputs::Combined(p) => Lines::open(p)?.map(|l| parse_combined_line(&l?)).collect(),
        FactoredOutputs::Split {
            surfaces,
            syllables,
        } => {
            let a: Vec<String> = Lines::open(surfaces)?.collect::<Result<_>>()?;
            let b: Vec<String> = Lines::open(syllables)?.collect::<Result<_>>()?;
            if a.len() != b.len() {
                return Err(Error::Structural(format!(
                    "{} surface lines but {} syllable lines",
                    a.len(),
                    b.len()
                )));
            }
            a.iter()
                .zip(&b)
                .map(|(x, y)| parse_split_lines(x, y))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub char_dim: usize,
    pub pinyin_dim: usize,
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        EmbeddingSpec {
            char_dim: 64,
            pinyin_dim: 448,
        }
    }
}

impl EmbeddingSpec {
    pub fn new(char_dim: usize, pinyin_dim: usize) -> Result<Self> {
        let spec = EmbeddingSpec {
            char_dim,
            pinyin_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.char_dim == 0 || self.pinyin_dim == 0 {
            return Err(Error::Config(
                "embedding dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.char_dim + self.pinyin_dim
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: EmbeddingSpec = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("embedding spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    dim: usize,
    rows: HashMap<String, Vec<f32>>,
}

impl Table {
    fn new(dim: usize, rows: HashMap<String, Vec<f32>>, name: &str) -> Result<Self> {
        if let Some((key, row)) = rows.iter().find(|(_, r)| r.len() != dim) {
            return Err(Error::Structural(format!(
                "{name} row `{key}` has dimension {}, expected {dim}",
                row.len()
            )));
        }
        if !rows.contains_key(UNK_ROW) {
            return Err(Error::Structural(format!(
                "{name} table lacks a `{UNK_ROW}` row"
            )));
        }
        Ok(Table { dim, rows })
    }

    fn row(&self, key: &str) -> &[f32] {
        self.rows.get(key).unwrap_or_else(|| &self.rows[UNK_ROW])
    }
}

/// Reference lookup tables for the two factors. No training happens here;
/// the random initialization exists for shape and sharing checks.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTables {
    chars: Table,
    syllables: Table,
}

impl EmbeddingTables {
    pub fn from_rows(
        spec: EmbeddingSpec,
        chars: HashMap<String, Vec<f32>>,
        syllables: HashMap<String, Vec<f32>>,
    ) -> Result<Self> {
        spec.validate()?;
        Ok(EmbeddingTables {
            chars: Table::new(spec.char_dim, chars, "character")?,
            syllables: Table::new(spec.pinyin_dim, syllables, "syllable")?,
        })
    }

    /// Rows drawn uniformly from [-0.1, 0.1], one per key plus `<unk>`.
    /// Keys are visited in sorted order so the tables depend only on the seed
    /// and the key sets.
    pub fn random<'k>(
        spec: EmbeddingSpec,
        surfaces: impl IntoIterator<Item = &'k str>,
        syllables: impl IntoIterator<Item = &'k str>,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        let dist = Uniform::new_inclusive(-0.1f32, 0.1f32);
        let mut rng = seed::stream(seed, Domain::Embedding, &[]);
        let mut fill = |keys: Vec<&str>, dim: usize| -> HashMap<String, Vec<f32>> {
            let mut keys = keys;
            keys.push(UNK_ROW);
            keys.sort_unstable();
            keys.dedup();
            keys.into_iter()
                .map(|k| {
                    (
                        k.to_string(),
                        (0..dim).map(|_| dist.sample(&mut rng)).collect(),
                    )
                })
                .collect()
        };
        let chars = fill(surfaces.into_iter().collect(), spec.char_dim);
        let sylls = fill(syllables.into_iter().collect(), spec.pinyin_dim);
        Self::from_rows(spec, chars, sylls)
    }

    pub fn spec(&self) -> EmbeddingSpec {
        EmbeddingSpec {
            char_dim: self.chars.dim,
            pinyin_dim: self.syllables.dim,
        }
    }

    /// Character embedding followed by syllable embedding.
    pub fn concat_embedding(&self, token: &FactoredToken) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.chars.dim + self.syllables.dim);
        v.extend_from_slice(self.chars.row(&token.surface));
        v.extend_from_slice(self.syllables.row(&token.syllable));
        v
    }
}
