//! Corpus augmentation for Chinese-sourced machine translation under
//! speech-recognition noise.
//!
//! The crate covers the data side of training and evaluating translation
//! systems that must cope with recognition errors:
//!
//! * [`corpus`]: character-level tokenization, parallel corpus streaming,
//!   vocabulary and frequency statistics.
//! * [`pinyin`]: toneless Pinyin lookup and homophone groups.
//! * [`noise`]: Bernoulli substitution masks and the placeholder, uniform,
//!   frequency and homophone noise samplers.
//! * [`testset`]: evaluation sets with exactly `k` homophone substitutions
//!   per sentence, and their verification.
//! * [`factored`]: character + Pinyin factored features and a reference
//!   embedding concatenation.
//! * [`align`]: Levenshtein alignment, error classification and rates.
//!
//! ```
//! use asrnoise::corpus::{build_statistics, SentenceTokens};
//! use asrnoise::noise::{apply_mask, NoiseContext, Strategy, SubstitutionMask};
//! use asrnoise::pinyin::{HomophoneTable, PinyinDictionary};
//! use rand::SeedableRng;
//!
//! let corpus = [SentenceTokens::new(0, "语音翻译"), SentenceTokens::new(1, "因为")];
//! let (vocab, freq) = build_statistics(&corpus);
//! let dict = PinyinDictionary::parse("语\tyu\n音\tyin\n因\tyin\n翻\tfan\n译\tyi\n为\twei\n", "dict")?;
//! let homophones = HomophoneTable::build(&vocab, &freq, &dict);
//! let ctx = NoiseContext::new(vocab, freq, Some(homophones));
//!
//! let mask = SubstitutionMask { bits: vec![false, true, false, false] };
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let noisy = apply_mask(&corpus[0], &mask, Strategy::Homophone, &ctx, &mut rng)?;
//! assert_eq!(noisy.spaced(), "语 因 翻 译");
//! # Ok::<(), asrnoise::Error>(())
//! ```

pub mod align;
pub mod corpus;
mod error;
pub mod factored;
pub mod io;
pub mod noise;
pub mod pinyin;
pub mod pipeline;
pub mod seed;
pub mod testset;

pub use error::{Error, Result};
