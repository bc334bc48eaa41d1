//! Compilation-error repair engine.
//!
//! The crate is organised along the repair pipeline:
//!
//! * [`diagnostics`] captures build output and turns it into structured
//!   [`Diagnostic`](diagnostics::Diagnostic) records.
//! * [`context`] assembles the [`ErrorContext`](context::ErrorContext): the
//!   syntax-tree window around the failing line plus project metadata.
//! * [`hypothesis`] renders the first-pass prompt and parses the backend's
//!   candidate fix.
//! * [`retrieval`] formulates web queries, fans them out to source clients and
//!   selects a scored, non-redundant evidence set.
//! * [`synthesis`] merges the hypothesis with the evidence into cited,
//!   confidence-scored [`FinalSolution`](synthesis::FinalSolution)s.
//! * [`diff`] parses, applies and renders unified diffs.
//! * [`eval`] runs repair systems over a benchmark and reports the metrics.
//!
//! [`pipeline`] wires the stages together and [`cache`] provides the search
//! response cache shared by long-running sessions.

pub mod cache;
pub mod context;
pub mod diagnostics;
pub mod diff;
pub mod eval;
pub mod hypothesis;
pub mod pipeline;
pub mod retrieval;
pub mod synthesis;
pub(crate) mod text;
pub(crate) mod util;

pub use context::ErrorContext;
pub use diagnostics::{Diagnostic, LanguageId, RawCapture};
pub use diff::UnifiedDiff;
pub use pipeline::{Pipeline, PipelineConfig, RepairOutcome};
pub use synthesis::FinalSolution;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    mod diagnostics {}
    #[doc = include_str!("../../../book/src/context.md")]
    mod context {}
    #[doc = include_str!("../../../book/src/confidence.md")]
    mod confidence {}
    #[doc = include_str!("../../../book/src/evidence.md")]
    mod evidence {}
    #[doc = include_str!("../../../book/src/synthesis.md")]
    mod synthesis {}
    #[doc = include_str!("../../../book/src/diffs.md")]
    mod diffs {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
}
