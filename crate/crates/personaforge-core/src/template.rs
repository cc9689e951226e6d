//! Slot validation shared by the three prompt builders.

/// A prompt template slot was left unfilled.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template slot `{0}` is empty")]
    EmptySlot(&'static str),
}

/// Rejects empty or whitespace-only slot values.
pub fn require_slot<'a>(name: &'static str, value: &'a str) -> Result<&'a str, TemplateError> {
    if value.trim().is_empty() {
        Err(TemplateError::EmptySlot(name))
    } else {
        Ok(value)
    }
}
