//! Resolution of LoRA parameter names to base-model weight keys.

use serde::{Deserialize, Serialize};

/// Which factor of the low-rank pair a parameter holds.
///
/// `Left` is the `lora_B` factor of shape (m × r); `Right` is the `lora_A`
/// factor of shape (r × n), for a base weight of shape (m × n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A resolved LoRA parameter name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoraKey {
    /// The parameter name as it appears in the adapter checkpoint.
    pub raw: String,
    /// The base-model weight key the factor applies to.
    pub base_key: String,
    /// Left (`lora_B`) or Right (`lora_A`).
    pub side: Side,
    /// Final module segment of the key, e.g. `q_proj`.
    pub module_tag: String,
}

/// Maps a LoRA parameter name to its base weight key.
///
/// The rewrite strips an optional leading `base_model.model.` prefix and
/// replaces a terminal `.lora_A.weight` / `.lora_B.weight` with `.weight`.
/// Names that are not LoRA factor parameters resolve to `None`; callers
/// count those as skips.
pub fn resolve_base_key(name: &str) -> Option<LoraKey> {
    let stripped = name.strip_prefix("base_model.model.").unwrap_or(name);
    let (stem, side) = if let Some(stem) = stripped.strip_suffix(".lora_A.weight") {
        (stem, Side::Right)
    } else if let Some(stem) = stripped.strip_suffix(".lora_B.weight") {
        (stem, Side::Left)
    } else {
        return None;
    };
    if stem.is_empty() {
        return None;
    }
    let module_tag = stem.rsplit('.').next().unwrap_or(stem).to_string();
    Some(LoraKey {
        raw: name.to_string(),
        base_key: format!("{stem}.weight"),
        side,
        module_tag,
    })
}
