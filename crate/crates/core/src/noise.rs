//! Simulated ASR substitution noise.
//!
//! Each eligible position of a source sentence is independently selected
//! with probability `p`; a selected character `c` is replaced by a symbol
//! drawn by one of four strategies:
//!
//! | strategy      | support           | P(c̃)                                   |
//! |---------------|-------------------|-----------------------------------------|
//! | `Placeholder` | `{<SUB>}`         | 1                                       |
//! | `Uniform`     | `V`               | `1/|V|` (may return `c` itself)         |
//! | `Frequency`   | `V \ {c}`         | `Count(c̃) / Σ_{c'∈V\{c}} Count(c')`     |
//! | `Homophone`   | `V(c) \ {c}`      | `Count(c̃) / Σ_{c'∈V(c)\{c}} Count(c')`  |
//!
//! `V(c)` is the set of vocabulary characters sharing `c`'s toneless Pinyin.
//! The excluded-support strategies sample from the full weighted table and
//! redraw while the draw equals `c`, which yields exactly the renormalized
//! distribution.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Bernoulli, Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{FrequencyTable, SentenceTokens, Token, Vocabulary};
use crate::error::{Error, Result};
use crate::pinyin::HomophoneTable;
use crate::seed::{self, Domain, StreamRng};

pub const DEFAULT_PLACEHOLDER: &str = "<SUB>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Placeholder,
    Uniform,
    Frequency,
    Homophone,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Placeholder,
        Strategy::Uniform,
        Strategy::Frequency,
        Strategy::Homophone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Placeholder => "placeholder",
            Strategy::Uniform => "uniform",
            Strategy::Frequency => "frequency",
            Strategy::Homophone => "homophone",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

fn default_placeholder() -> String {
    DEFAULT_PLACEHOLDER.to_string()
}

fn default_seed() -> u64 {
    seed::DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub strategy: Strategy,
    /// Substitution probability per eligible position.
    pub p: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_placeholder")]
    pub placeholder_token: String,
}

impl NoiseConfig {
    pub fn new(strategy: Strategy, p: f64, seed: u64) -> Result<Self> {
        let config = NoiseConfig {
            strategy,
            p,
            seed,
            placeholder_token: default_placeholder(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!(
                "substitution rate p must be in [0, 1], got {}",
                self.p
            )));
        }
        if self.placeholder_token.is_empty() || self.placeholder_token.contains(char::is_whitespace)
        {
            return Err(Error::Config(
                "placeholder token must be nonempty and contain no whitespace".into(),
            ));
        }
        Ok(())
    }
}

/// Read-only tables the samplers draw from.
#[derive(Debug, Clone)]
pub struct NoiseContext {
    vocab: Vocabulary,
    freq: FrequencyTable,
    by_count: Option<WeightedIndex<u64>>,
    homophones: Option<HomophoneTable>,
    placeholder: String,
}

impl NoiseContext {
    pub fn new(
        vocab: Vocabulary,
        freq: FrequencyTable,
        homophones: Option<HomophoneTable>,
    ) -> Self {
        let by_count = WeightedIndex::new(vocab.chars().iter().map(|&c| freq.count(c))).ok();
        NoiseContext {
            vocab,
            freq,
            by_count,
            homophones,
            placeholder: default_placeholder(),
        }
    }

    pub fn with_placeholder(mut self, placeholder: impl Into<String>) -> Self {
        self.placeholder = placeholder.into();
        self
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn freq(&self) -> &FrequencyTable {
        &self.freq
    }

    pub fn homophones(&self) -> Option<&HomophoneTable> {
        self.homophones.as_ref()
    }

    pub fn placeholder(&self) -> &str {
        &self.placeholder
    }

    /// Fails when the tables cannot support `strategy` at all.
    pub fn check(&self, strategy: Strategy) -> Result<()> {
        match strategy {
            Strategy::Placeholder => Ok(()),
            Strategy::Uniform if self.vocab.is_empty() => Err(Error::Config(
                "uniform noise needs a nonempty vocabulary".into(),
            )),
            Strategy::Frequency if self.vocab.len() <= 1 => Err(Error::Config(
                "frequency noise needs at least two vocabulary characters".into(),
            )),
            Strategy::Homophone if self.homophones.is_none() => Err(Error::Config(
                "homophone noise needs a homophone table (pass a Pinyin dictionary)".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// One Bernoulli bit per token position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubstitutionMask {
    pub bits: Vec<bool>,
}

impl SubstitutionMask {
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    pub position: usize,
    pub original: char,
    pub noise: Token,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoisySentence {
    pub id: usize,
    pub tokens: Vec<Token>,
    /// Every selected position, in increasing order.
    pub substitutions: Vec<Substitution>,
    /// Selected positions left unchanged because the character has no
    /// homophone.
    pub skipped: usize,
    /// Number of eligible positions in the sentence.
    pub eligible: usize,
}

impl NoisySentence {
    pub fn unchanged(sentence: &SentenceTokens, eligible: usize) -> Self {
        NoisySentence {
            id: sentence.id,
            tokens: sentence.tokens.clone(),
            substitutions: Vec::new(),
            skipped: 0,
            eligible,
        }
    }

    /// The perturbed line, spaced like the original.
    pub fn render(&self, original: &SentenceTokens) -> String {
        original.render(&self.tokens)
    }

    pub fn spaced(&self) -> String {
        SentenceTokens::spaced(&self.tokens)
    }
}

/// Positions holding an in-vocabulary Chinese character.
pub fn eligible_positions(sentence: &SentenceTokens, vocab: &Vocabulary) -> Vec<usize> {
    sentence
        .tokens
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.as_cjk().filter(|&c| vocab.contains(c)).map(|_| i))
        .collect()
}

/// Draws one Bernoulli variate per token and clears the ineligible ones, so
/// the random stream consumed depends only on the sentence length.
pub fn sample_mask<R: Rng + ?Sized>(
    sentence: &SentenceTokens,
    vocab: &Vocabulary,
    p: f64,
    rng: &mut R,
) -> Result<SubstitutionMask> {
    let bernoulli = Bernoulli::new(p).map_err(|_| Error::Config(format!("bad p {p}")))?;
    let bits = sentence
        .tokens
        .iter()
        .map(|t| {
            let hit = bernoulli.sample(rng);
            hit && t.as_cjk().is_some_and(|c| vocab.contains(c))
        })
        .collect();
    Ok(SubstitutionMask { bits })
}

/// Draws a noise symbol for `original`.
///
/// `Ok(None)` means the homophone strategy found no homophone and the
/// character is to be kept.
pub fn sample_noise<R: Rng + ?Sized>(
    strategy: Strategy,
    original: char,
    ctx: &NoiseContext,
    rng: &mut R,
) -> Result<Option<Token>> {
    match strategy {
        Strategy::Placeholder => Ok(Some(Token::Other(ctx.placeholder.clone()))),
        Strategy::Uniform => {
            if ctx.vocab.is_empty() {
                return Err(Error::Config(
                    "uniform noise over an empty vocabulary".into(),
                ));
            }
            let id = rng.gen_range(0..ctx.vocab.len() as u32);
            Ok(ctx.vocab.get(id).map(Token::Cjk))
        }
        Strategy::Frequency => {
            let rest = ctx.freq.total() - ctx.freq.count(original);
            let sampler = match &ctx.by_count {
                Some(s) if rest > 0 => s,
                _ => {
                    return Err(Error::Config(format!(
                        "frequency noise for `{original}` has empty support"
                    )))
                }
            };
            loop {
                let c = ctx.vocab.chars()[sampler.sample(rng)];
                if c != original {
                    return Ok(Some(Token::Cjk(c)));
                }
            }
        }
        Strategy::Homophone => {
            let table = ctx
                .homophones
                .as_ref()
                .ok_or_else(|| Error::Config("homophone noise needs a homophone table".into()))?;
            Ok(table.sample(original, rng).map(Token::Cjk))
        }
    }
}

/// Applies a given mask: selected positions are replaced by sampled noise,
/// all others are copied unchanged.
pub fn apply_mask<R: Rng + ?Sized>(
    sentence: &SentenceTokens,
    mask: &SubstitutionMask,
    strategy: Strategy,
    ctx: &NoiseContext,
    rng: &mut R,
) -> Result<NoisySentence> {
    let mut out =
        NoisySentence::unchanged(sentence, eligible_positions(sentence, &ctx.vocab).len());
    for i in mask.positions() {
        let Some(original) = sentence.tokens[i].as_cjk() else {
            continue;
        };
        let noise = match sample_noise(strategy, original, ctx, rng)? {
            Some(t) => t,
            None => {
                out.skipped += 1;
                Token::Cjk(original)
            }
        };
        out.tokens[i] = noise.clone();
        out.substitutions.push(Substitution {
            position: i,
            original,
            noise,
        });
    }
    Ok(out)
}

pub fn perturb_sentence<R: Rng + ?Sized>(
    sentence: &SentenceTokens,
    config: &NoiseConfig,
    ctx: &NoiseContext,
    rng: &mut R,
) -> Result<NoisySentence> {
    let mask = sample_mask(sentence, &ctx.vocab, config.p, rng)?;
    apply_mask(sentence, &mask, config.strategy, ctx, rng)
}

/// Random stream of one sentence in one epoch.
pub fn sentence_rng(seed: u64, epoch: u32, sentence_id: usize) -> StreamRng {
    seed::stream(seed, Domain::Noise, &[epoch as u64, sentence_id as u64])
}

/// Perturbs `sentence` for `epoch` with its own derived stream.
pub fn perturb_in_epoch(
    sentence: &SentenceTokens,
    epoch: u32,
    config: &NoiseConfig,
    ctx: &NoiseContext,
) -> Result<NoisySentence> {
    let mut rng = sentence_rng(config.seed, epoch, sentence.id);
    perturb_sentence(sentence, config, ctx, &mut rng)
}

/// Lazily perturbs a corpus `epochs` times.
///
/// Items come sentence by sentence, all epochs of a sentence together, so
/// the corpus is traversed once. Each `(epoch, sentence id)` has its own
/// stream, so the output does not depend on iteration order.
pub fn perturb_corpus<'a, I>(
    corpus: I,
    config: &'a NoiseConfig,
    ctx: &'a NoiseContext,
    epochs: u32,
) -> Result<impl Iterator<Item = Result<(u32, NoisySentence)>> + 'a>
where
    I: IntoIterator<Item = SentenceTokens> + 'a,
{
    config.validate()?;
    ctx.check(config.strategy)?;
    if epochs == 0 {
        return Err(Error::Config("epochs must be positive".into()));
    }
    Ok(corpus.into_iter().flat_map(move |sentence| {
        (0..epochs)
            .map(move |epoch| perturb_in_epoch(&sentence, epoch, config, ctx).map(|n| (epoch, n)))
    }))
}

/// Running totals over perturbed sentences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NoiseTally {
    pub sentences: usize,
    pub eligible: u64,
    pub selected: u64,
    pub changed: u64,
    pub skipped: u64,
}

impl NoiseTally {
    pub fn add(&mut self, n: &NoisySentence) {
        self.sentences += 1;
        self.eligible += n.eligible as u64;
        self.selected += n.substitutions.len() as u64;
        self.skipped += n.skipped as u64;
        self.changed += n
            .substitutions
            .iter()
            .filter(|s| s.noise != Token::Cjk(s.original))
            .count() as u64;
    }

    pub fn merge(mut self, other: NoiseTally) -> NoiseTally {
        self.sentences += other.sentences;
        self.eligible += other.eligible;
        self.selected += other.selected;
        self.changed += other.changed;
        self.skipped += other.skipped;
        self
    }

    /// Selected positions over eligible positions.
    pub fn rate(&self) -> f64 {
        if self.eligible == 0 {
            0.0
        } else {
            self.selected as f64 / self.eligible as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_statistics;
    use crate::pinyin::PinyinDictionary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn demo_ctx() -> NoiseContext {
        let corpus = [
            SentenceTokens::new(0, "语音翻译"),
            SentenceTokens::new(1, "因好"),
        ];
        let (vocab, freq) = build_statistics(&corpus);
        let dict = PinyinDictionary::from_pairs([
            ('语', "yu"),
            ('音', "yin"),
            ('因', "yin"),
            ('翻', "fan"),
            ('译', "yi"),
            ('好', "hao"),
        ]);
        let homophones = HomophoneTable::build(&vocab, &freq, &dict);
        NoiseContext::new(vocab, freq, Some(homophones))
    }

    fn mask_at(len: usize, positions: &[usize]) -> SubstitutionMask {
        SubstitutionMask {
            bits: (0..len).map(|i| positions.contains(&i)).collect(),
        }
    }

    #[test]
    fn eligibility() {
        let ctx = demo_ctx();
        let s = SentenceTokens::new(0, "语音翻译");
        assert_eq!(eligible_positions(&s, ctx.vocab()), [0, 1, 2, 3]);
        let s = SentenceTokens::new(0, "abc 90%");
        assert!(eligible_positions(&s, ctx.vocab()).is_empty());
        let s = SentenceTokens::new(0, "语字90%");
        assert_eq!(eligible_positions(&s, ctx.vocab()), [0]);
    }

    #[test]
    fn degenerate_masks() {
        let ctx = demo_ctx();
        let s = SentenceTokens::new(0, "语音 x 翻字译");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let none = sample_mask(&s, ctx.vocab(), 0.0, &mut rng).unwrap();
        assert_eq!(none.count(), 0);
        let all = sample_mask(&s, ctx.vocab(), 1.0, &mut rng).unwrap();
        assert_eq!(
            all.positions().collect::<Vec<_>>(),
            eligible_positions(&s, ctx.vocab())
        );
        assert!(sample_mask(&s, ctx.vocab(), 1.5, &mut rng).is_err());
    }

    #[test]
    fn table_three_rows() {
        let ctx = demo_ctx();
        let s = SentenceTokens::new(0, "语音翻译");
        let mask = mask_at(4, &[1]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let out = apply_mask(&s, &mask, Strategy::Placeholder, &ctx, &mut rng).unwrap();
        assert_eq!(out.spaced(), "语 <SUB> 翻 译");

        let out = apply_mask(&s, &mask, Strategy::Homophone, &ctx, &mut rng).unwrap();
        assert_eq!(out.spaced(), "语 因 翻 译");
        assert_eq!(out.render(&s), "语因翻译");

        for strategy in [Strategy::Uniform, Strategy::Frequency] {
            let out = apply_mask(&s, &mask, strategy, &ctx, &mut rng).unwrap();
            let c = out.tokens[1].as_cjk().unwrap();
            assert!(ctx.vocab().contains(c));
            assert_eq!(out.substitutions.len(), 1);
        }
    }

    #[test]
    fn empty_homophone_group_keeps_character() {
        let ctx = demo_ctx();
        let s = SentenceTokens::new(0, "翻");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = apply_mask(&s, &mask_at(1, &[0]), Strategy::Homophone, &ctx, &mut rng).unwrap();
        assert_eq!(out.tokens, s.tokens);
        assert_eq!(out.skipped, 1);
        assert_eq!(out.substitutions.len(), 1);
    }

    #[test]
    fn frequency_support_errors() {
        let freq: FrequencyTable = [('甲', 3)].into_iter().collect();
        let ctx = NoiseContext::new(Vocabulary::from_frequencies(&freq), freq, None);
        assert!(ctx.check(Strategy::Frequency).is_err());
        assert!(ctx.check(Strategy::Homophone).is_err());
        assert!(ctx.check(Strategy::Uniform).is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_noise(Strategy::Frequency, '甲', &ctx, &mut rng).is_err());
    }

    #[test]
    fn p_zero_is_identity() {
        let ctx = demo_ctx();
        let config = NoiseConfig::new(Strategy::Uniform, 0.0, 9).unwrap();
        let corpus = vec![
            SentenceTokens::new(0, "语音 翻译 90%"),
            SentenceTokens::new(1, ""),
        ];
        let out: Vec<_> = perturb_corpus(corpus.clone(), &config, &ctx, 1)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        for ((_, n), s) in out.iter().zip(&corpus) {
            assert!(n.substitutions.is_empty());
            assert_eq!(n.render(s), s.text());
        }
    }

    #[test]
    fn config_validation() {
        assert!(NoiseConfig::new(Strategy::Uniform, -0.1, 0).is_err());
        assert!(NoiseConfig::new(Strategy::Uniform, 1.0, 0).is_ok());
        let ctx = demo_ctx();
        let config = NoiseConfig::new(Strategy::Uniform, 0.5, 0).unwrap();
        assert!(perturb_corpus(Vec::new(), &config, &ctx, 0).is_err());
        assert_eq!(
            "homophone".parse::<Strategy>().unwrap(),
            Strategy::Homophone
        );
        assert!("dropout".parse::<Strategy>().is_err());
    }

    #[test]
    fn config_from_toml_like_json() {
        let c: NoiseConfig = serde_json::from_str(r#"{"strategy":"frequency","p":0.1}"#).unwrap();
        assert_eq!(c.seed, seed::DEFAULT_SEED);
        assert_eq!(c.placeholder_token, "<SUB>");
        assert_eq!(c.strategy, Strategy::Frequency);
    }
}
