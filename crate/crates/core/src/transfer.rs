//! Projection of source LoRA updates through aligned subspaces and assembly
//! of the target-compatible adapter.
//!
//! Per-factor projection keeps the adapter rank: `B → Ũ·(U_sᵀB)` and
//! `A → (A·V_s)·Ṽᵀ`. The full-update route projects the effective update
//! `ΔW = scale·B·A` as `Ũ·(U_sᵀ·ΔW·V_s)·Ṽᵀ` and refactors it at the
//! truncation rank. When source and target dimensions match, both routes
//! coincide with the plain two-sided subspace projection; the core is
//! always taken in source coordinates so the same formulas type-check when
//! the dimensions differ.

use std::collections::BTreeMap;
use std::time::Instant;

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align_subspaces, AlignmentMap};
use crate::dtype::DType;
use crate::error::{Error, Result};
use crate::keys::{resolve_base_key, Side};
use crate::linalg::{frobenius_norm, truncated_svd};
use crate::store::TensorStore;
use crate::tensor::Tensor;
use crate::util::derive_seed;

/// Module list applied by default, mirroring the stock transfer
/// configuration.
pub const DEFAULT_TARGET_MODULES: [&str; 7] = [
    "q_proj", "v_proj", "k_proj", "o_proj", "gate_proj", "up_proj", "down_proj",
];

/// Default truncation rank.
pub const DEFAULT_RANK: usize = 320;

/// Default emitted LoRA alpha.
pub const DEFAULT_OUT_ALPHA: f64 = 64.0;

/// One adapter entry: left factor `B` (m × r), right factor `A` (r × n).
///
/// The effective update is `(alpha / rank) · B · A`.
#[derive(Debug, Clone)]
pub struct LoraFactorPair {
    pub base_key: String,
    pub b: Mat<f64>,
    pub a: Mat<f64>,
    pub rank: usize,
    pub alpha: f64,
}

impl LoraFactorPair {
    pub fn new(base_key: impl Into<String>, b: Mat<f64>, a: Mat<f64>, alpha: f64) -> Result<Self> {
        if b.ncols() != a.nrows() {
            return Err(Error::ShapeMismatch {
                expected: format!("B columns == A rows, B has {}", b.ncols()),
                got: format!("A has {} rows", a.nrows()),
            });
        }
        let rank = b.ncols();
        Ok(LoraFactorPair {
            base_key: base_key.into(),
            b,
            a,
            rank,
            alpha,
        })
    }

    /// Load-time scaling `alpha / rank`.
    pub fn scale(&self) -> f64 {
        self.alpha / self.rank as f64
    }

    /// `scale · B · A`.
    pub fn effective_update(&self) -> Mat<f64> {
        (&self.b * &self.a) * self.scale()
    }
}

/// Emission mode for the output adapter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// Project each factor, keeping the source adapter rank.
    FactorPreserving,
    /// Project the effective update and refactor it at the truncation rank.
    Refactored,
}

/// Optional baseline that bypasses subspace projection entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    None,
    /// Directly resize factors onto the target dimensions by piecewise
    /// linear interpolation.
    Interpolate,
}

/// Configuration of one transfer run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferConfig {
    /// Truncation rank for both base-weight SVDs.
    pub rank: usize,
    /// LoRA alpha written into the output adapter.
    pub out_alpha: f64,
    /// Module tags eligible for transfer.
    pub target_modules: Vec<String>,
    pub mode: TransferMode,
    pub baseline: Baseline,
    pub seed: u64,
    pub out_dtype: DType,
    /// LoRA alpha the source adapter was trained with. `None` treats the
    /// stored factors as already scaled (scale 1).
    pub source_alpha: Option<f64>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            rank: DEFAULT_RANK,
            out_alpha: DEFAULT_OUT_ALPHA,
            target_modules: DEFAULT_TARGET_MODULES.iter().map(|s| s.to_string()).collect(),
            mode: TransferMode::FactorPreserving,
            baseline: Baseline::None,
            seed: 0,
            out_dtype: DType::F16,
            source_alpha: None,
        }
    }
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidRank {
                rank: 0,
                reason: "truncation rank must be at least 1".into(),
            });
        }
        if self.target_modules.is_empty() {
            return Err(Error::InvalidArgument("target_modules must be non-empty".into()));
        }
        if !(self.out_alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "out_alpha must be positive, got {}",
                self.out_alpha
            )));
        }
        Ok(())
    }
}

/// Outcome of processing one adapter key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyStatus {
    Transferred,
    SkippedMissingSource,
    SkippedMissingTarget,
    SkippedUnresolvable,
    SkippedFilteredModule,
    Failed,
}

/// Per-key statistics of one transfer run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyReport {
    pub base_key: String,
    pub status: KeyStatus,
    pub module_tag: Option<String>,
    pub source_shape: Option<[usize; 2]>,
    pub target_shape: Option<[usize; 2]>,
    /// Rank of the incoming adapter factors.
    pub adapter_rank: Option<usize>,
    /// Truncation rank actually used after clamping.
    pub rank_used: Option<usize>,
    pub rank_clamped: bool,
    /// Fraction of source base-weight energy captured at the used rank.
    pub eta_source: Option<f64>,
    pub eta_target: Option<f64>,
    pub residual_u: Option<f64>,
    pub residual_v: Option<f64>,
    /// `‖ΔW_s − ΔW_t‖_F / ‖ΔW_s‖_F`, reported only when source and target
    /// dimensions match.
    pub projection_residual: Option<f64>,
    pub detail: Option<String>,
}

impl KeyReport {
    fn skipped(base_key: impl Into<String>, status: KeyStatus) -> Self {
        KeyReport {
            base_key: base_key.into(),
            status,
            module_tag: None,
            source_shape: None,
            target_shape: None,
            adapter_rank: None,
            rank_used: None,
            rank_clamped: false,
            eta_source: None,
            eta_target: None,
            residual_u: None,
            residual_v: None,
            projection_residual: None,
            detail: None,
        }
    }

    fn failed(base_key: impl Into<String>, detail: String) -> Self {
        let mut row = Self::skipped(base_key, KeyStatus::Failed);
        row.detail = Some(detail);
        row
    }
}

/// Aggregate counters; `total_keys` always equals the sum of the
/// per-status counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferAggregate {
    pub total_keys: usize,
    pub transferred: usize,
    pub skipped_missing_source: usize,
    pub skipped_missing_target: usize,
    pub skipped_unresolvable: usize,
    pub skipped_filtered_module: usize,
    pub failed: usize,
    pub wall_clock_seconds: f64,
}

impl TransferAggregate {
    pub fn reconciles(&self) -> bool {
        self.total_keys
            == self.transferred
                + self.skipped_missing_source
                + self.skipped_missing_target
                + self.skipped_unresolvable
                + self.skipped_filtered_module
                + self.failed
    }
}

/// Full diagnostic record of one transfer run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferReport {
    pub config: TransferConfig,
    pub per_key: Vec<KeyReport>,
    pub aggregate: TransferAggregate,
}

/// One emitted adapter entry with the tensor names it will be stored under.
#[derive(Debug, Clone)]
pub struct TransferredEntry {
    pub pair: LoraFactorPair,
    pub name_b: String,
    pub name_a: String,
    pub module_tag: String,
}

/// The assembled output adapter.
#[derive(Debug, Clone)]
pub struct TransferredAdapter {
    pub entries: BTreeMap<String, TransferredEntry>,
    pub out_alpha: f64,
    pub dtype: DType,
}

impl TransferredAdapter {
    /// Largest emitted factor rank (ranks can differ per key after
    /// clamping on small layers).
    pub fn out_rank(&self) -> usize {
        self.entries.values().map(|e| e.pair.rank).max().unwrap_or(0)
    }

    /// Sorted, de-duplicated module tags present in the adapter.
    pub fn module_tags(&self) -> Vec<String> {
        let mut tags: Vec<String> = self
            .entries
            .values()
            .map(|e| e.module_tag.clone())
            .collect();
        tags.sort();
        tags.dedup();
        tags
    }

    /// Serializes factors at the configured dtype under their original
    /// parameter names.
    pub fn to_store(&self) -> Result<TensorStore> {
        let mut store = TensorStore::new();
        for entry in self.entries.values() {
            store.insert(Tensor::from_mat(
                &entry.name_b,
                self.dtype,
                entry.pair.b.as_ref(),
            ))?;
            store.insert(Tensor::from_mat(
                &entry.name_a,
                self.dtype,
                entry.pair.a.as_ref(),
            ))?;
        }
        let mut meta = BTreeMap::new();
        meta.insert("lora_alpha".to_string(), format!("{}", self.out_alpha));
        meta.insert("r".to_string(), format!("{}", self.out_rank()));
        store.set_metadata(meta);
        Ok(store)
    }
}

/// Projects a full source update into the aligned target subspace:
/// `Ũ·(U_sᵀ·ΔW·V_s)·Ṽᵀ`, shaped (m' × n').
pub fn project_full_update(dw: MatRef<'_, f64>, map: &AlignmentMap) -> Result<Mat<f64>> {
    let (m, n) = map.source_dims();
    if (dw.nrows(), dw.ncols()) != (m, n) {
        return Err(Error::ShapeMismatch {
            expected: format!("{m}×{n} to match the source base weight"),
            got: format!("{}×{}", dw.nrows(), dw.ncols()),
        });
    }
    let core = map.svd_source.u.transpose() * dw * &map.svd_source.v;
    Ok(&map.u_aligned * core * map.v_aligned.transpose())
}

/// Projects a single adapter factor.
///
/// Left factors land in the target row space (m' × r_lora); right factors
/// in the target column space (r_lora × n').
pub fn project_factor(
    factor: MatRef<'_, f64>,
    side: Side,
    map: &AlignmentMap,
) -> Result<Mat<f64>> {
    let (m, n) = map.source_dims();
    match side {
        Side::Left => {
            if factor.nrows() != m {
                return Err(Error::ShapeMismatch {
                    expected: format!("{m} rows to match the source base weight"),
                    got: format!("{}", factor.nrows()),
                });
            }
            let coords = map.svd_source.u.transpose() * factor;
            Ok(&map.u_aligned * coords)
        }
        Side::Right => {
            if factor.ncols() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n} columns to match the source base weight"),
                    got: format!("{}", factor.ncols()),
                });
            }
            let coords = factor * &map.svd_source.v;
            Ok(coords * map.v_aligned.transpose())
        }
    }
}

/// Refactors a projected update into rank-r factors: `B = Ũ`,
/// `A = (rank / alpha)·C·Ṽᵀ`, so loading with the standard `alpha / rank`
/// scale reproduces the projected update.
pub fn refactor_update(
    dw_t: MatRef<'_, f64>,
    map: &AlignmentMap,
    out_alpha: f64,
) -> Result<LoraFactorPair> {
    let (mt, nt) = map.target_dims();
    if (dw_t.nrows(), dw_t.ncols()) != (mt, nt) {
        return Err(Error::ShapeMismatch {
            expected: format!("{mt}×{nt} to match the target base weight"),
            got: format!("{}×{}", dw_t.nrows(), dw_t.ncols()),
        });
    }
    if !(out_alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "out_alpha must be positive, got {out_alpha}"
        )));
    }
    let core = map.u_aligned.transpose() * dw_t * &map.v_aligned;
    let b = map.u_aligned.clone();
    let a = (core * map.v_aligned.transpose()) * (map.rank as f64 / out_alpha);
    LoraFactorPair::new(map.base_key.clone(), b, a, out_alpha)
}

/// Resizes the model-facing dimension of a factor by 1-D piecewise-linear
/// interpolation (rows of `B`, columns of `A`). The adapter-rank dimension
/// is never touched.
pub fn interpolate_resize(
    factor: MatRef<'_, f64>,
    side: Side,
    target_dim: usize,
) -> Result<Mat<f64>> {
    if target_dim == 0 {
        return Err(Error::InvalidArgument(
            "interpolation target dimension must be at least 1".into(),
        ));
    }
    Ok(match side {
        Side::Left => resample_axis(factor, target_dim, false),
        Side::Right => resample_axis(factor, target_dim, true),
    })
}

fn resample_axis(a: MatRef<'_, f64>, new_len: usize, along_cols: bool) -> Mat<f64> {
    let old_len = if along_cols { a.ncols() } else { a.nrows() };
    if new_len == old_len {
        return a.to_owned();
    }
    let sample = |idx: usize, other: usize| -> f64 {
        let get = |i: usize| if along_cols { a[(other, i)] } else { a[(i, other)] };
        if old_len == 1 || new_len == 1 {
            return get(0.min(old_len - 1));
        }
        let x = idx as f64 * (old_len - 1) as f64 / (new_len - 1) as f64;
        let i0 = (x.floor() as usize).min(old_len - 1);
        let i1 = (i0 + 1).min(old_len - 1);
        let frac = x - i0 as f64;
        get(i0) * (1.0 - frac) + get(i1) * frac
    };
    if along_cols {
        Mat::from_fn(a.nrows(), new_len, |i, j| sample(j, i))
    } else {
        Mat::from_fn(new_len, a.ncols(), |i, j| sample(i, j))
    }
}

struct PendingPair {
    module_tag: String,
    name_a: Option<String>,
    name_b: Option<String>,
    duplicate: Option<String>,
}

struct ComputeItem<'a> {
    base_key: String,
    module_tag: String,
    name_b: String,
    name_a: String,
    factor_b: &'a Tensor,
    factor_a: &'a Tensor,
    w_s: &'a Tensor,
    w_t: &'a Tensor,
}

/// Transfers every resolvable adapter key present in both base stores.
///
/// Keys missing from either store are skipped and counted; an adapter
/// factor without its partner fails that key but the run continues. The
/// result is a deterministic function of the inputs, the configuration and
/// the seed. Returns [`Error::AllKeysSkipped`] (carrying the full report)
/// when not a single key could be transferred.
pub fn transfer_adapter(
    source: &TensorStore,
    target: &TensorStore,
    adapter: &TensorStore,
    cfg: &TransferConfig,
) -> Result<(TransferredAdapter, TransferReport)> {
    cfg.validate()?;
    let started = Instant::now();

    let mut rows: Vec<KeyReport> = Vec::new();
    let mut groups: BTreeMap<String, PendingPair> = BTreeMap::new();

    for (name, _) in adapter.iter() {
        let Some(key) = resolve_base_key(name) else {
            rows.push(KeyReport::skipped(name, KeyStatus::SkippedUnresolvable));
            continue;
        };
        let pending = groups.entry(key.base_key.clone()).or_insert_with(|| PendingPair {
            module_tag: key.module_tag.clone(),
            name_a: None,
            name_b: None,
            duplicate: None,
        });
        let slot = match key.side {
            Side::Right => &mut pending.name_a,
            Side::Left => &mut pending.name_b,
        };
        if slot.is_some() {
            pending.duplicate = Some(name.to_string());
        } else {
            *slot = Some(name.to_string());
        }
    }

    let mut items: Vec<ComputeItem<'_>> = Vec::new();
    for (base_key, pending) in &groups {
        let mut row = KeyReport::skipped(base_key, KeyStatus::Transferred);
        row.module_tag = Some(pending.module_tag.clone());

        if let Some(dup) = &pending.duplicate {
            row.status = KeyStatus::Failed;
            row.detail = Some(format!("duplicate factor parameter `{dup}`"));
            rows.push(row);
            continue;
        }
        let (Some(name_a), Some(name_b)) = (&pending.name_a, &pending.name_b) else {
            row.status = KeyStatus::Failed;
            row.detail = Some(match (&pending.name_a, &pending.name_b) {
                (Some(_), None) => "lora_A present without matching lora_B".to_string(),
                (None, Some(_)) => "lora_B present without matching lora_A".to_string(),
                _ => "no factor parameters".to_string(),
            });
            rows.push(row);
            continue;
        };
        if !cfg.target_modules.iter().any(|m| m == &pending.module_tag) {
            row.status = KeyStatus::SkippedFilteredModule;
            rows.push(row);
            continue;
        }
        let Some(w_s) = source.get(base_key) else {
            row.status = KeyStatus::SkippedMissingSource;
            rows.push(row);
            continue;
        };
        let Some(w_t) = target.get(base_key) else {
            row.status = KeyStatus::SkippedMissingTarget;
            rows.push(row);
            continue;
        };
        items.push(ComputeItem {
            base_key: base_key.clone(),
            module_tag: pending.module_tag.clone(),
            name_b: name_b.clone(),
            name_a: name_a.clone(),
            factor_b: adapter.get(name_b).expect("name taken from this store"),
            factor_a: adapter.get(name_a).expect("name taken from this store"),
            w_s,
            w_t,
        });
    }

    // Per-key work items are independent; the merge below re-establishes
    // deterministic key order regardless of completion order.
    let computed: Vec<(KeyReport, Option<TransferredEntry>)> = items
        .par_iter()
        .map(|item| process_key(item, cfg))
        .collect();

    let mut entries = BTreeMap::new();
    for (row, entry) in computed {
        rows.push(row);
        if let Some(entry) = entry {
            entries.insert(entry.pair.base_key.clone(), entry);
        }
    }
    rows.sort_by(|a, b| a.base_key.cmp(&b.base_key));

    let mut aggregate = TransferAggregate {
        total_keys: rows.len(),
        transferred: 0,
        skipped_missing_source: 0,
        skipped_missing_target: 0,
        skipped_unresolvable: 0,
        skipped_filtered_module: 0,
        failed: 0,
        wall_clock_seconds: 0.0,
    };
    for row in &rows {
        match row.status {
            KeyStatus::Transferred => aggregate.transferred += 1,
            KeyStatus::SkippedMissingSource => aggregate.skipped_missing_source += 1,
            KeyStatus::SkippedMissingTarget => aggregate.skipped_missing_target += 1,
            KeyStatus::SkippedUnresolvable => aggregate.skipped_unresolvable += 1,
            KeyStatus::SkippedFilteredModule => aggregate.skipped_filtered_module += 1,
            KeyStatus::Failed => aggregate.failed += 1,
        }
    }
    aggregate.wall_clock_seconds = started.elapsed().as_secs_f64();

    let report = TransferReport {
        config: cfg.clone(),
        per_key: rows,
        aggregate,
    };
    if report.aggregate.transferred == 0 {
        return Err(Error::AllKeysSkipped {
            report: Box::new(report),
        });
    }
    let adapter_out = TransferredAdapter {
        entries,
        out_alpha: cfg.out_alpha,
        dtype: cfg.out_dtype,
    };
    Ok((adapter_out, report))
}

fn process_key(
    item: &ComputeItem<'_>,
    cfg: &TransferConfig,
) -> (KeyReport, Option<TransferredEntry>) {
    let base_key = &item.base_key;
    let mut row = KeyReport::skipped(base_key, KeyStatus::Transferred);
    row.module_tag = Some(item.module_tag.clone());

    macro_rules! fail {
        ($detail:expr) => {
            return (KeyReport::failed(base_key, $detail), None)
        };
    }

    let w_s = match item.w_s.to_mat() {
        Ok(m) => m,
        Err(e) => fail!(format!("source base weight: {e}")),
    };
    let w_t = match item.w_t.to_mat() {
        Ok(m) => m,
        Err(e) => fail!(format!("target base weight: {e}")),
    };
    let b = match item.factor_b.to_mat() {
        Ok(m) => m,
        Err(e) => fail!(format!("left factor: {e}")),
    };
    let a = match item.factor_a.to_mat() {
        Ok(m) => m,
        Err(e) => fail!(format!("right factor: {e}")),
    };

    if b.nrows() != w_s.nrows() || a.ncols() != w_s.ncols() {
        fail!(format!(
            "factor shapes B {}×{} / A {}×{} do not match source base weight {}×{}",
            b.nrows(),
            b.ncols(),
            a.nrows(),
            a.ncols(),
            w_s.nrows(),
            w_s.ncols()
        ));
    }
    if b.ncols() != a.nrows() {
        fail!(format!(
            "adapter ranks disagree: B has {} columns, A has {} rows",
            b.ncols(),
            a.nrows()
        ));
    }

    let r_lora = b.ncols();
    let scale_s = cfg.source_alpha.unwrap_or(r_lora as f64) / r_lora as f64;
    row.source_shape = Some([w_s.nrows(), w_s.ncols()]);
    row.target_shape = Some([w_t.nrows(), w_t.ncols()]);
    row.adapter_rank = Some(r_lora);

    if cfg.baseline == Baseline::Interpolate {
        let b_t = match interpolate_resize(b.as_ref(), Side::Left, w_t.nrows()) {
            Ok(m) => m,
            Err(e) => fail!(e.to_string()),
        };
        let a_t = match interpolate_resize(a.as_ref(), Side::Right, w_t.ncols()) {
            Ok(m) => m,
            Err(e) => fail!(e.to_string()),
        };
        let fold = scale_s * r_lora as f64 / cfg.out_alpha;
        let pair = match LoraFactorPair::new(base_key, b_t * fold, a_t, cfg.out_alpha) {
            Ok(p) => p,
            Err(e) => fail!(e.to_string()),
        };
        let entry = TransferredEntry {
            pair,
            name_b: item.name_b.clone(),
            name_a: item.name_a.clone(),
            module_tag: item.module_tag.clone(),
        };
        return (row, Some(entry));
    }

    let svd_s = match truncated_svd(w_s.as_ref(), cfg.rank, derive_seed(cfg.seed, base_key, 0)) {
        Ok(s) => s,
        Err(e) => fail!(format!("source SVD: {e}")),
    };
    // Identical weights on both sides (self-transfer) share one
    // factorization; each key is processed by exactly one worker, so this
    // also guarantees at-most-once SVD computation per (store, key, rank).
    let svd_t = if item.w_s == item.w_t {
        svd_s.clone()
    } else {
        match truncated_svd(w_t.as_ref(), cfg.rank, derive_seed(cfg.seed, base_key, 1)) {
            Ok(s) => s,
            Err(e) => fail!(format!("target SVD: {e}")),
        }
    };

    let map = align_subspaces(base_key, &svd_s, &svd_t);
    row.rank_used = Some(map.rank);
    row.rank_clamped =
        map.rank_clamped || map.rank < cfg.rank;
    row.eta_source = Some(map.svd_source.energy_captured());
    row.eta_target = Some(map.svd_target.energy_captured());
    row.residual_u = Some(map.residual_u);
    row.residual_v = Some(map.residual_v);

    let pair = match cfg.mode {
        TransferMode::FactorPreserving => {
            let b_p = match project_factor(b.as_ref(), Side::Left, &map) {
                Ok(m) => m,
                Err(e) => fail!(e.to_string()),
            };
            let a_p = match project_factor(a.as_ref(), Side::Right, &map) {
                Ok(m) => m,
                Err(e) => fail!(e.to_string()),
            };
            let fold = scale_s * r_lora as f64 / cfg.out_alpha;
            match LoraFactorPair::new(base_key, b_p * fold, a_p, cfg.out_alpha) {
                Ok(p) => p,
                Err(e) => fail!(e.to_string()),
            }
        }
        TransferMode::Refactored => {
            let dw_eff = (&b * &a) * scale_s;
            let dw_t = match project_full_update(dw_eff.as_ref(), &map) {
                Ok(m) => m,
                Err(e) => fail!(e.to_string()),
            };
            match refactor_update(dw_t.as_ref(), &map, cfg.out_alpha) {
                Ok(p) => p,
                Err(e) => fail!(e.to_string()),
            }
        }
    };

    if map.dims_match() {
        let dw_eff = (&b * &a) * scale_s;
        let denom = frobenius_norm(dw_eff.as_ref());
        row.projection_residual = Some(if denom == 0.0 {
            0.0
        } else {
            frobenius_norm((&dw_eff - pair.effective_update()).as_ref()) / denom
        });
    }

    let entry = TransferredEntry {
        pair,
        name_b: item.name_b.clone(),
        name_a: item.name_a.clone(),
        module_tag: item.module_tag.clone(),
    };
    (row, Some(entry))
}
