//! Summary scoring and the position probe.

mod probe;
mod rouge;

pub use probe::{
    identical_chunk_document, position_probe, synthetic_documents, ProbeResult, ProbeSet,
    PROBE_RIDGE,
};
pub use rouge::{lcs_len, rouge_l, rouge_n, score_text, RougeScore, RougeTriple};
