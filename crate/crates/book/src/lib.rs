//! mdbook can't run snippets that depend on workspace crates, so every
//! chapter of `book/src` is pulled in here as a module doc and `cargo test`
//! runs the code blocks as doctests. One module per chapter so a failure
//! names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/continuous.md")]
pub mod continuous {}
#[doc = include_str!("../../../book/src/lax.md")]
pub mod lax {}
#[doc = include_str!("../../../book/src/lagrangian.md")]
pub mod lagrangian {}
#[doc = include_str!("../../../book/src/discrete.md")]
pub mod discrete {}
#[doc = include_str!("../../../book/src/plaquettes.md")]
pub mod plaquettes {}
#[doc = include_str!("../../../book/src/semidiscrete.md")]
pub mod semidiscrete {}
#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}

#[cfg(test)]
mod tests {
    /// Every chapter listed in the summary is included above.
    #[test]
    fn summary_matches_modules() {
        let summary = include_str!("../../../book/src/SUMMARY.md");
        let lib = include_str!("lib.rs");
        for line in summary.lines().filter(|l| l.contains("](")) {
            let file = line.split("](").nth(1).unwrap().trim_end_matches(')');
            assert!(lib.contains(&format!("book/src/{file}")), "{file} not included");
        }
    }
}
