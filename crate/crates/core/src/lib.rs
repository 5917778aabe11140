//! Data-free, training-free transfer of LoRA adapters between base models.
//!
//! An adapter trained against one base model is carried onto a different
//! base model in two steps. First the truncated singular subspaces of
//! matching source and target weights are aligned by the Frobenius-optimal
//! linear map between their bases. Then the adapter's low-rank update is
//! projected through the aligned bases, either factor by factor (keeping
//! the adapter rank) or as a re-factored full update at the truncation
//! rank. No gradients, no data: only checkpoint tensors go in and out.
//!
//! The crate is organized around the pipeline stages:
//!
//! * [`store`] / [`tensor`] / [`dtype`] — bit-exact checkpoint I/O;
//! * [`keys`] — mapping adapter parameter names onto base weight keys;
//! * [`linalg`] — truncated SVD, minimum-norm least squares, energy
//!   accounting;
//! * [`align`] — subspace alignment with residual diagnostics;
//! * [`transfer`] — projection, adapter assembly and the run report;
//! * [`diagnostics`] — spectra, decay fits, cost trade-offs;
//! * [`synth`] — deterministic synthetic models and adapters for tests and
//!   demos.

pub mod align;
pub mod diagnostics;
pub mod dtype;
pub mod error;
pub mod keys;
pub mod linalg;
pub mod store;
pub mod synth;
pub mod tensor;
pub mod transfer;

mod util;

pub use align::{align_subspaces, align_subspaces_checked, AlignmentMap};
pub use diagnostics::{spectrum_report, tradeoff_table, SpectrumReport, TradeoffRow};
pub use dtype::DType;
pub use error::{Error, Result};
pub use keys::{resolve_base_key, LoraKey, Side};
pub use linalg::{
    energy_retained, frobenius_norm, geometric_decay_eta, min_norm_lstsq, pseudoinverse,
    singular_values, truncated_svd, TruncatedSvd,
};
pub use store::TensorStore;
pub use synth::{generate_lora, generate_model_pair, SynthSpec};
pub use tensor::Tensor;
pub use transfer::{
    interpolate_resize, project_factor, project_full_update, refactor_update, transfer_adapter,
    Baseline, KeyReport, KeyStatus, LoraFactorPair, TransferAggregate, TransferConfig,
    TransferMode, TransferReport, TransferredAdapter, TransferredEntry,
};
