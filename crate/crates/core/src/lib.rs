//! Gradient-free video question answering over inference services.
//!
//! The flow, per record: sample `n` uniformly spaced frames from the video,
//! render a question-dependent captioning instruction, caption every frame
//! through an instruction-following vision-language service, join the
//! captions into a single video description, render a multiple-choice QA
//! prompt around it, send that to a text-only reasoning service, and parse
//! the answer letter. Both models are opaque network endpoints speaking a
//! small JSON protocol ([`wire`]); a deterministic in-repo [`mock`] server
//! implements the same protocol so everything here tests offline.
//!
//! Modules:
//! - [`types`] — shared domain vocabulary (records, captions, predictions)
//! - [`sampler`] — uniform frame planning and extraction
//! - [`templates`] — prompt template registry and rendering
//! - [`client`] — retrying, concurrency-bounded endpoint clients
//! - [`cache`] — content-addressed caption cache
//! - [`pipeline`] — per-record and whole-dataset orchestration
//! - [`datasets`] — benchmark adapters and the normalized record format
//! - [`eval`] — scoring, per-type breakdowns, template ablations
//! - [`mock`] — deterministic wire-protocol server for offline testing

pub mod cache;
pub mod client;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod mock;
pub mod pipeline;
pub mod sampler;
pub mod templates;
pub mod types;
pub mod wire;

pub use error::{Error, Result};
