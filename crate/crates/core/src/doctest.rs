//! Runs the code blocks of the guide in `book/src` as doc-tests, one module
//! per chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/model.md")]
mod model {}

#[doc = include_str!("../../../book/src/elliptic.md")]
mod elliptic {}

#[doc = include_str!("../../../book/src/stepping.md")]
mod stepping {}

#[doc = include_str!("../../../book/src/monitors.md")]
mod monitors {}

#[doc = include_str!("../../../book/src/harness.md")]
mod harness {}
