use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("template `{template}` requires slot `{slot}`")]
    MissingSlot { template: String, slot: String },
}

/// Output of [`PromptTemplate::render`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    /// Supplied slot names the template does not declare.
    pub ignored_slots: Vec<String>,
}

/// A prompt with `{slot}` placeholders.
///
/// Only declared slot names are substituted; every other brace is literal,
/// which lets templates embed JSON reply schemas verbatim. All declared slots
/// are required.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub text: String,
    pub slots: Vec<String>,
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, text: impl Into<String>, slots: &[&str]) -> Self {
        Self { id: id.into(), text: text.into(), slots: slots.iter().map(|s| s.to_string()).collect() }
    }

    fn is_slot(&self, name: &str) -> bool {
        self.slots.iter().any(|s| s == name)
    }

    pub fn render(&self, values: &BTreeMap<String, String>) -> Result<Rendered, RenderError> {
        for slot in &self.slots {
            if !values.contains_key(slot) {
                return Err(RenderError::MissingSlot { template: self.id.clone(), slot: slot.clone() });
            }
        }
        let ignored_slots: Vec<String> = values.keys().filter(|k| !self.is_slot(k)).cloned().collect();
        for k in &ignored_slots {
            log::warn!("template `{}` ignores unknown slot `{k}`", self.id);
        }

        let mut out = String::with_capacity(self.text.len() + values.values().map(String::len).sum::<usize>());
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let close = after.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'));
            match close {
                Some(end) if after.as_bytes()[end] == b'}' && self.is_slot(&after[..end]) => {
                    out.push_str(&values[&after[..end]]);
                    rest = &after[end + 1..];
                }
                _ => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(Rendered { text: out, ignored_slots })
    }

    /// Convenience wrapper over [`render`](Self::render) for `&str` pairs.
    pub fn render_pairs(&self, pairs: &[(&str, &str)]) -> Result<Rendered, RenderError> {
        let values = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        self.render(&values)
    }
}
