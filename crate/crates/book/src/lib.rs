//! The guide in `book/` is plain mdbook, which cannot run snippets that use
//! outside crates. Each chapter is pulled in here as module docs instead, so
//! `cargo test --doc -p asrnoise-book` runs every snippet against the
//! current library. One module per chapter keeps failures easy to place.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/tokenization.md")]
pub mod tokenization {}

#[doc = include_str!("../../../book/src/pinyin.md")]
pub mod pinyin {}

#[doc = include_str!("../../../book/src/noise.md")]
pub mod noise {}

#[doc = include_str!("../../../book/src/testsets.md")]
pub mod testsets {}

#[doc = include_str!("../../../book/src/factored.md")]
pub mod factored {}

#[doc = include_str!("../../../book/src/alignment.md")]
pub mod alignment {}

#[doc = include_str!("../../../book/src/reproducibility.md")]
pub mod reproducibility {}
