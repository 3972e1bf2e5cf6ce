//! Deterministic "understand" skills: text normalization, pattern and
//! keyword intent classification, entity extraction and slot filling.

mod model;
mod normalize;
mod slots;

use thiserror::Error;

pub use model::{EntityDef, EntityKind, IntentDef, Mention, ModelDef, NluModel, NluResult};
pub use normalize::{normalize, parse_date, parse_money, parse_number, tokenize};
pub use slots::{slot_step, SlotAction, SlotFrame, SlotSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NluError {
    #[error("invalid model: {0}")]
    Model(String),
    #[error("slot frame `{0}` was cancelled")]
    FrameCancelled(String),
}

/// Free-function form of [`NluModel::classify`].
pub fn classify(model: &NluModel, text: &str) -> NluResult {
    model.classify(text)
}

/// Free-function form of [`NluModel::extract_entities`].
pub fn extract_entities(
    model: &NluModel,
    text: &str,
) -> std::collections::BTreeMap<String, crate::contract::Value> {
    model.extract_entities(text)
}
