//! Frobenius-optimal alignment of source singular subspaces onto target
//! subspaces.
//!
//! For truncated factors `U_s`, `U_t` the minimizer of `‖P·U_s − U_t‖_F`
//! of least norm is `P̂ = U_t·U_s⁺`. Since SVD output has orthonormal
//! columns, `U_s⁺ = U_sᵀ`, so the aligned basis `P̂·U_s = U_t·(U_sᵀU_s)`
//! collapses onto `U_t` up to floating-point noise. The implementation
//! computes that closed form directly; tests pin its optimality against the
//! general least-squares solver.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, orthonormality_defect, TruncatedSvd};

/// Aligned bases for one base-model weight key, plus residual diagnostics.
#[derive(Debug, Clone)]
pub struct AlignmentMap {
    pub base_key: String,
    pub svd_source: TruncatedSvd,
    pub svd_target: TruncatedSvd,
    /// `P̂_U·U_s`, shaped (m' × r): lives in the target row space.
    pub u_aligned: Mat<f64>,
    /// `P̂_V·V_s`, shaped (n' × r): lives in the target column space.
    pub v_aligned: Mat<f64>,
    /// `‖P̂_U·U_s − U_t‖_F`.
    pub residual_u: f64,
    /// `‖P̂_V·V_s − V_t‖_F`.
    pub residual_v: f64,
    /// Common rank used after truncating both factorizations.
    pub rank: usize,
    /// True when source and target had different effective ranks.
    pub rank_clamped: bool,
}

impl AlignmentMap {
    /// Source weight dimensions (m × n).
    pub fn source_dims(&self) -> (usize, usize) {
        (self.svd_source.nrows(), self.svd_source.ncols())
    }

    /// Target weight dimensions (m' × n').
    pub fn target_dims(&self) -> (usize, usize) {
        (self.svd_target.nrows(), self.svd_target.ncols())
    }

    pub fn dims_match(&self) -> bool {
        self.source_dims() == self.target_dims()
    }
}

/// Aligns the source subspaces onto the target subspaces.
///
/// Both factorizations are truncated to their common rank first; a mismatch
/// is recorded in [`AlignmentMap::rank_clamped`].
pub fn align_subspaces(
    base_key: impl Into<String>,
    svd_source: &TruncatedSvd,
    svd_target: &TruncatedSvd,
) -> AlignmentMap {
    let rank = svd_source.rank.min(svd_target.rank);
    let rank_clamped = svd_source.rank != svd_target.rank;
    let s = svd_source.truncate(rank);
    let t = svd_target.truncate(rank);

    // P̂_U·U_s = (U_t·U_sᵀ)·U_s, evaluated right-to-left so the large
    // m'×m transform is never materialized.
    let gram_u = s.u.transpose() * &s.u; // r × r
    let u_aligned = &t.u * &gram_u;
    let gram_v = s.v.transpose() * &s.v;
    let v_aligned = &t.v * &gram_v;

    let residual_u = frobenius_norm((&u_aligned - &t.u).as_ref());
    let residual_v = frobenius_norm((&v_aligned - &t.v).as_ref());

    AlignmentMap {
        base_key: base_key.into(),
        svd_source: s,
        svd_target: t,
        u_aligned,
        v_aligned,
        residual_u,
        residual_v,
        rank,
        rank_clamped,
    }
}

/// Like [`align_subspaces`], but first verifies that the source factors are
/// numerically orthonormal (deviation ≤ `max_defect`), which is what makes
/// the closed form valid. SVD output always passes; hand-built factors may
/// not.
pub fn align_subspaces_checked(
    base_key: impl Into<String>,
    svd_source: &TruncatedSvd,
    svd_target: &TruncatedSvd,
    max_defect: f64,
) -> Result<AlignmentMap> {
    let du = orthonormality_defect(svd_source.u.as_ref());
    let dv = orthonormality_defect(svd_source.v.as_ref());
    if du > max_defect || dv > max_defect {
        return Err(Error::InvalidArgument(format!(
            "source factors deviate from orthonormality by {:.3e} (limit {:.3e})",
            du.max(dv),
            max_defect
        )));
    }
    Ok(align_subspaces(base_key, svd_source, svd_target))
}
