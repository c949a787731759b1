//! Benchmark and instruction item construction.

pub mod code;
pub mod equations;
pub mod instruct;
pub mod items;
pub mod mcq;
pub mod preference;
pub mod tdoc;
pub mod templates;

pub use code::{make_code_infill_item, make_code_llm_item};
pub use equations::{extract_display_equations, make_masked_equation_items};
pub use instruct::make_instruct_item;
pub use items::{BenchItem, ItemRecord};
pub use mcq::{derive_open_qa, generate_validated_mcqs, McqAgents, McqOutcome};
pub use preference::{build_preference_pairs, PreferenceCandidate, PreferenceThresholds};
pub use tdoc::make_tdoc_items;
pub use templates::render_prompt_template;

use crate::clients::ClientError;
use items::ItemError;

#[derive(Debug, thiserror::Error)]
pub enum ForgeError {
    #[error("unknown prompt template {0:?}")]
    UnknownTemplate(String),
    #[error("template {template} needs variable {{{name}}}")]
    MissingVariable { template: String, name: String },
    #[error("source has {lines} lines; at least {min} required")]
    TooShort { lines: usize, min: usize },
    #[error("source already contains the placeholder {0}")]
    PlaceholderInSource(&'static str),
    #[error("malformed model reply: {0}")]
    Malformed(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Item(#[from] ItemError),
    #[error(transparent)]
    Client(#[from] ClientError),
}
