//! Expert finding over parliamentary interventions with topic subprofiles.
//!
//! Each candidate's documents are split into per-topic subdocuments by
//! an LDA model, merged per (candidate, topic) into subprofiles, retrieved
//! with a query-likelihood model and fused back into a candidate ranking.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod lda;
pub mod profiles;
pub mod retrieval;
pub mod splitter;
pub mod synth;
pub mod topicselect;

pub use error::{Error, Result};
