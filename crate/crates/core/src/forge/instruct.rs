//! General and protocol instruction items drafted by a model from a passage.

use serde::Deserialize;

use super::items::{InstructItem, InstructKind};
use super::templates::render_with;
use super::ForgeError;
use crate::clients::ChatClient;

#[derive(Deserialize)]
struct Draft {
    instruction: String,
    #[serde(default)]
    input: String,
    #[serde(alias = "response")]
    output: String,
}

/// Reads the first `{…}` object in a reply as an instruction draft.
pub fn parse_instruct_reply(kind: InstructKind, reply: &str) -> Result<InstructItem, ForgeError> {
    let (Some(start), Some(end)) = (reply.find('{'), reply.rfind('}')) else {
        return Err(ForgeError::Malformed("reply holds no JSON object".into()));
    };
    if end < start {
        return Err(ForgeError::Malformed("reply holds no JSON object".into()));
    }
    let d: Draft = serde_json::from_str(&reply[start..=end])
        .map_err(|e| ForgeError::Malformed(format!("instruction reply: {e}")))?;
    let item = InstructItem {
        kind,
        instruction: d.instruction.trim().to_string(),
        input: d.input.trim().to_string(),
        response: d.output.trim().to_string(),
    };
    item.validate()?;
    Ok(item)
}

pub fn make_instruct_item(
    kind: InstructKind,
    text: &str,
    client: &ChatClient,
    model_id: &str,
) -> Result<InstructItem, ForgeError> {
    let template = match kind {
        InstructKind::General => "general-instruct",
        InstructKind::Protocol => "protocol-instruct",
        InstructKind::OpenQa => {
            return Err(ForgeError::Invalid(
                "open-ended QA items derive from validated MCQs".into(),
            ));
        }
    };
    let reply = client.ask(model_id, &render_with(template, "text", text)?)?;
    parse_instruct_reply(kind, &reply)
}
