//! Serialization of diagrams and their traceability.
//!
//! JSON documents use four-space indentation, sorted lists and sorted keys, so
//! equal diagrams serialize to equal bytes.

mod dot;
mod json;

pub use dot::{dfd_to_dot, render_png, RenderOutcome};
pub(crate) use json::tag_texts;
pub use json::{
    dfd_from_json, dfd_to_json, document_from_json, trace_from_json, trace_to_json, DfdDocument, FlowRecord, NodeRecord,
};

/// Document schemas shipped with the crate.
pub const DFD_SCHEMA: &str = include_str!("../../schemas/dfd.schema.json");
pub const TRACE_SCHEMA: &str = include_str!("../../schemas/traceability.schema.json");
