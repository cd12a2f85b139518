#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use asrnoise::pinyin::PinyinDictionary;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` consecutive CJK characters starting at 一.
pub fn alphabet(n: usize) -> Vec<char> {
    (0x4E00u32..).take(n).filter_map(char::from_u32).collect()
}

/// Letters-only name for group `g`: a, b, ..., z, ba, bb, ...
pub fn syllable(mut g: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (g % 26) as u8);
        g /= 26;
        if g == 0 {
            break;
        }
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

/// Synthetic toned readings: groups of `group` consecutive characters share
/// a syllable (the last group possibly smaller).
pub fn dictionary_text(chars: &[char], group: usize) -> String {
    let mut out = String::new();
    for (i, c) in chars.iter().enumerate() {
        writeln!(out, "{c}\t{}{}", syllable(i / group), 1 + i % 4).unwrap();
    }
    out
}

pub fn dictionary(chars: &[char], group: usize) -> PinyinDictionary {
    PinyinDictionary::parse(&dictionary_text(chars, group), "synthetic").unwrap()
}

/// Lines of 5..=30 characters with a skewed character distribution and the
/// occasional Latin word, number or punctuation run.
pub fn corpus(lines: usize, chars: &[char], seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..lines)
        .map(|_| {
            let len = rng.gen_range(5..=30);
            let mut s = String::new();
            for _ in 0..len {
                match rng.gen_range(0..20) {
                    0 => s.push_str(" ASR "),
                    1 => s.push_str("90%"),
                    2 => s.push('，'),
                    _ => {
                        let u: f64 = rng.gen();
                        s.push(chars[((u * u) * chars.len() as f64) as usize]);
                    }
                }
            }
            s
        })
        .collect()
}

pub fn write_lines(path: &Path, lines: &[String]) {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text).unwrap();
}
