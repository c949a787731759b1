//! Prompt templates for the generation agents. Placeholders are `{text}`,
//! `{script}` and `{question}`; other braces are literal.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use super::ForgeError;

pub const TEMPLATE_IDS: [&str; 7] = [
    "mcq-generate",
    "mcq-validate",
    "code-request",
    "code-summary",
    "code-analysis",
    "general-instruct",
    "protocol-instruct",
];

pub fn template_source(id: &str) -> Option<&'static str> {
    Some(match id {
        "mcq-generate" => include_str!("../../templates/mcq-generate.txt"),
        "mcq-validate" => include_str!("../../templates/mcq-validate.txt"),
        "code-request" => include_str!("../../templates/code-request.txt"),
        "code-summary" => include_str!("../../templates/code-summary.txt"),
        "code-analysis" => include_str!("../../templates/code-analysis.txt"),
        "general-instruct" => include_str!("../../templates/general-instruct.txt"),
        "protocol-instruct" => include_str!("../../templates/protocol-instruct.txt"),
        _ => return None,
    })
}

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{(text|script|question)\}").expect("placeholder regex"));

/// Substitutes every placeholder in one pass, so variable values are never
/// re-expanded.
pub fn render_prompt_template(id: &str, vars: &BTreeMap<&str, &str>) -> Result<String, ForgeError> {
    let src = template_source(id).ok_or_else(|| ForgeError::UnknownTemplate(id.to_string()))?;
    if let Some(missing) = PLACEHOLDER
        .captures_iter(src)
        .map(|c| c.get(1).map_or("", |m| m.as_str()))
        .find(|name| !vars.contains_key(name))
    {
        return Err(ForgeError::MissingVariable {
            template: id.to_string(),
            name: missing.to_string(),
        });
    }
    Ok(PLACEHOLDER
        .replace_all(src, |c: &regex::Captures<'_>| vars[&c[1]].to_string())
        .into_owned())
}

/// Shorthand for templates with one placeholder.
pub fn render_with(id: &str, name: &str, value: &str) -> Result<String, ForgeError> {
    render_prompt_template(id, &BTreeMap::from([(name, value)]))
}
