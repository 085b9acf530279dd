// mdbook cannot run listings that depend on workspace crates, so every
// chapter is also a module doc and `cargo test --doc -p roadloc-book` runs
// its code blocks. A failing doctest names the module, which names the
// chapter.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/geometry.md")]
pub mod geometry {}
#[doc = include_str!("src/tuples.md")]
pub mod tuples {}
#[doc = include_str!("src/index.md")]
pub mod index {}
#[doc = include_str!("src/locating.md")]
pub mod locating {}
#[doc = include_str!("src/masks.md")]
pub mod masks {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
#[doc = include_str!("src/tuning.md")]
pub mod tuning {}
