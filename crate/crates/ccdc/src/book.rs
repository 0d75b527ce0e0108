//! Keeps the guide honest: every fenced Rust block in `book/src/*.md` is
//! compiled and run by `cargo test --doc`, so the chapters cannot drift from
//! the code they describe.

#[doc = include_str!("../../../book/src/introduction.md")]
pub struct GuideIntroduction;

#[doc = include_str!("../../../book/src/model.md")]
pub struct GuideModel;

#[doc = include_str!("../../../book/src/placement.md")]
pub struct GuidePlacement;

#[doc = include_str!("../../../book/src/baselines.md")]
pub struct GuideBaselines;

#[doc = include_str!("../../../book/src/compressed.md")]
pub struct GuideCompressed;

#[doc = include_str!("../../../book/src/verification.md")]
pub struct GuideVerification;

#[doc = include_str!("../../../book/src/cli.md")]
pub struct GuideCli;
