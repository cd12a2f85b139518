//! Character to toneless Pinyin lookup and homophone groups.

use std::collections::HashMap;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::corpus::{FrequencyTable, SentenceTokens, Token, Vocabulary};
use crate::error::{Error, Result};
use crate::io::LineWriter;

/// Syllable of a non-CJK token.
pub const NA: &str = "<na>";
/// Syllable of a Chinese character missing from the dictionary.
pub const UNK: &str = "<unk>";

/// Reduces a Pinyin reading to its toneless form: tone digits are dropped,
/// tone diacritics are folded onto the base vowel, and `ü` (or `u:`/`v`)
/// is written `v`. Returns `None` unless the result is nonempty lowercase
/// ASCII letters.
pub fn strip_tone(reading: &str) -> Option<String> {
    let mut out = String::with_capacity(reading.len());
    let mut chars = reading.trim().chars().peekable();
    while let Some(c) = chars.next() {
        let base = match c.to_lowercase().next().unwrap_or(c) {
            'ā' | 'á' | 'ǎ' | 'à' => 'a',
            'ē' | 'é' | 'ě' | 'è' | 'ê' | 'ế' | 'ề' => 'e',
            'ī' | 'í' | 'ǐ' | 'ì' => 'i',
            'ō' | 'ó' | 'ǒ' | 'ò' => 'o',
            'ū' | 'ú' | 'ǔ' | 'ù' => 'u',
            'ü' | 'ǖ' | 'ǘ' | 'ǚ' | 'ǜ' => 'v',
            'ń' | 'ň' | 'ǹ' => 'n',
            'ḿ' => 'm',
            'u' if chars.peek() == Some(&':') => {
                chars.next();
                'v'
            }
            '0'..='5' => continue,
            other => other,
        };
        // a combining tone mark left over from decomposed input
        if ('\u{0300}'..='\u{036F}').contains(&base) {
            continue;
        }
        out.push(base);
    }
    if !out.is_empty() && out.bytes().all(|b| b.is_ascii_lowercase()) {
        Some(out)
    } else {
        None
    }
}

/// Character to canonical toneless syllable.
#[derive(Debug, Clone, Default)]
pub struct PinyinDictionary {
    map: HashMap<char, String>,
    duplicates: usize,
}

impl PinyinDictionary {
    /// Parses `char<TAB>syllable[,syllable…]` rows. The first listed reading
    /// is canonical. Blank lines and lines starting with `#` are skipped.
    /// A repeated character overwrites the earlier row and is counted in
    /// [`duplicates`](Self::duplicates).
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut dict = PinyinDictionary::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                origin: origin.to_string(),
                line: i + 1,
                message,
            };
            let (ch, readings) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `char<TAB>syllables`".into()))?;
            let mut chars = ch.chars();
            let c = match (chars.next(), chars.next()) {
                (Some(c), None) => c,
                (None, _) => return Err(err("empty character field".into())),
                _ => return Err(err(format!("`{ch}` is not a single character"))),
            };
            let first = readings.split(',').next().unwrap_or("").trim();
            if first.is_empty() {
                return Err(err("empty syllable field".into()));
            }
            let syllable =
                strip_tone(first).ok_or_else(|| err(format!("bad syllable `{first}`")))?;
            if dict.map.insert(c, syllable).is_some() {
                dict.duplicates += 1;
            }
        }
        Ok(dict)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = crate::io::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (char, &'a str)>) -> Self {
        let mut dict = PinyinDictionary::default();
        for (c, s) in pairs {
            let s = strip_tone(s).expect("valid syllable");
            if dict.map.insert(c, s).is_some() {
                dict.duplicates += 1;
            }
        }
        dict
    }

    pub fn syllable(&self, c: char) -> Option<&str> {
        self.map.get(&c).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Rows whose character had already been seen.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    fn syllable_of_token<'a>(&'a self, token: &Token) -> &'a str {
        match token {
            Token::Cjk(c) => self.syllable(*c).unwrap_or(UNK),
            Token::Other(_) => NA,
        }
    }
}

/// One syllable per token; `<na>` for non-CJK tokens, `<unk>` for characters
/// missing from the dictionary.
pub fn to_pinyin(sentence: &SentenceTokens, dict: &PinyinDictionary) -> Vec<String> {
    tokens_to_pinyin(&sentence.tokens, dict)
}

pub fn tokens_to_pinyin(tokens: &[Token], dict: &PinyinDictionary) -> Vec<String> {
    tokens
        .iter()
        .map(|t| dict.syllable_of_token(t).to_string())
        .collect()
}

#[derive(Debug, Clone)]
struct Group {
    members: Vec<(char, u64)>,
    sampler: Option<WeightedIndex<u64>>,
}

/// Vocabulary characters grouped by canonical toneless syllable, with their
/// corpus counts.
#[derive(Debug, Clone, Default)]
pub struct HomophoneTable {
    syllables: Vec<String>,
    groups: Vec<Group>,
    by_syllable: HashMap<String, usize>,
    by_char: HashMap<char, usize>,
    missing: Vec<(char, u64)>,
}

impl HomophoneTable {
    /// Members of each group keep vocabulary order. Vocabulary characters
    /// without a dictionary entry are left out and listed in
    /// [`missing`](Self::missing).
    pub fn build(vocab: &Vocabulary, freq: &FrequencyTable, dict: &PinyinDictionary) -> Self {
        let mut table = HomophoneTable::default();
        for &c in vocab.chars() {
            let count = freq.count(c);
            let Some(syl) = dict.syllable(c) else {
                table.missing.push((c, count));
                continue;
            };
            let gi = *table.by_syllable.entry(syl.to_string()).or_insert_with(|| {
                table.syllables.push(syl.to_string());
                table.groups.push(Group {
                    members: Vec::new(),
                    sampler: None,
                });
                table.groups.len() - 1
            });
            table.groups[gi].members.push((c, count));
            table.by_char.insert(c, gi);
        }
        for g in &mut table.groups {
            if g.members.len() > 1 {
                g.sampler = WeightedIndex::new(g.members.iter().map(|m| m.1)).ok();
            }
        }
        table
    }

    pub fn group(&self, syllable: &str) -> Option<&[(char, u64)]> {
        self.by_syllable
            .get(syllable)
            .map(|&g| self.groups[g].members.as_slice())
    }

    pub fn syllable_of(&self, c: char) -> Option<&str> {
        self.by_char.get(&c).map(|&g| self.syllables[g].as_str())
    }

    /// Characters sharing `c`'s syllable, excluding `c`.
    pub fn homophones_of(&self, c: char) -> Vec<(char, u64)> {
        match self.by_char.get(&c) {
            Some(&g) => self.groups[g]
                .members
                .iter()
                .copied()
                .filter(|&(m, _)| m != c)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Whether `c` has at least one homophone with a positive count.
    pub fn has_homophones(&self, c: char) -> bool {
        self.by_char
            .get(&c)
            .is_some_and(|&g| self.groups[g].members.iter().any(|&(m, n)| m != c && n > 0))
    }

    /// Draws a homophone of `c` with probability proportional to its count,
    /// renormalized over the group without `c`. Returns `None` when that set
    /// is empty.
    pub fn sample<R: Rng + ?Sized>(&self, c: char, rng: &mut R) -> Option<char> {
        if !self.has_homophones(c) {
            return None;
        }
        let group = &self.groups[self.by_char[&c]];
        let sampler = group.sampler.as_ref()?;
        loop {
            let (m, _) = group.members[sampler.sample(rng)];
            if m != c {
                return Some(m);
            }
        }
    }

    /// `(syllable, members)` in order of first appearance.
    pub fn groups(&self) -> impl Iterator<Item = (&str, &[(char, u64)])> {
        self.syllables
            .iter()
            .zip(&self.groups)
            .map(|(s, g)| (s.as_str(), g.members.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Vocabulary characters that had no dictionary entry, with counts.
    pub fn missing(&self) -> &[(char, u64)] {
        &self.missing
    }

    /// Writes the characters lacking a dictionary entry as `char<TAB>count`.
    pub fn write_coverage_report(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = LineWriter::create(path)?;
        for (c, n) in &self.missing {
            w.write_line(&format!("{c}\t{n}"))?;
        }
        w.finish()
    }
}
