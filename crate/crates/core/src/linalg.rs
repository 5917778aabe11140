//! Dense low-rank kernels: truncated SVD, minimum-norm least squares and
//! spectral energy accounting.
//!
//! Small matrices (min dimension ≤ [`DENSE_SVD_CUTOFF`]) go through an exact
//! dense SVD. Larger ones use a seeded randomized range finder with
//! oversampling [`OVERSAMPLING`] and [`POWER_ITERATIONS`] power iterations,
//! which keeps the cost at O(r·m·n) instead of O(m·n·min(m,n)).

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Below this min-dimension the exact dense SVD is used.
pub const DENSE_SVD_CUTOFF: usize = 512;

/// Extra sampled directions in the randomized range finder.
pub const OVERSAMPLING: usize = 10;

/// Power iterations applied to sharpen the sampled range.
pub const POWER_ITERATIONS: usize = 4;

/// Singular values below `max(m, n) × σ_max × 2⁻²³` are treated as zero
/// when forming pseudoinverses (f32 machine-epsilon scaling).
const PINV_EPS: f64 = 1.1920929e-7; // 2^-23

/// Rank-r factors of one weight matrix.
///
/// Invariants maintained by [`truncated_svd`]:
/// * `u` (m × r) and `v` (n × r) have orthonormal columns to ≤ 1e-5;
/// * `s` is sorted non-increasing, all entries ≥ 0;
/// * for each column of `u` the entry of largest magnitude is non-negative,
///   which pins the sign ambiguity so repeated runs and both SVD paths
///   agree bitwise.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
    /// Σ_{i>r} σ_i²; exact on the dense path, estimated as
    /// `‖W‖_F² − Σ_{i≤r} σ_i²` on the randomized path.
    pub tail_energy: f64,
    /// Effective rank kept (min of the requested rank and both dimensions).
    pub rank: usize,
    /// Rank requested by the caller, before clamping.
    pub requested_rank: usize,
}

impl TruncatedSvd {
    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    /// True when the requested rank exceeded `min(m, n)` and was clamped.
    pub fn rank_clamped(&self) -> bool {
        self.rank < self.requested_rank
    }

    /// Fraction of squared-Frobenius energy captured by the kept factors.
    pub fn energy_captured(&self) -> f64 {
        let retained: f64 = self.s.iter().map(|s| s * s).sum();
        let total = retained + self.tail_energy;
        if total == 0.0 {
            0.0
        } else {
            retained / total
        }
    }

    /// U · diag(S) · Vᵀ.
    pub fn reconstruct(&self) -> Mat<f64> {
        let mut us = self.u.clone();
        scale_columns(&mut us, &self.s);
        &us * self.v.transpose()
    }

    /// Copy truncated to the first `rank` triplets.
    pub fn truncate(&self, rank: usize) -> TruncatedSvd {
        if rank >= self.rank {
            return self.clone();
        }
        let dropped: f64 = self.s[rank..].iter().map(|s| s * s).sum();
        TruncatedSvd {
            u: self.u.subcols(0, rank).to_owned(),
            s: self.s[..rank].to_vec(),
            v: self.v.subcols(0, rank).to_owned(),
            tail_energy: self.tail_energy + dropped,
            rank,
            requested_rank: self.requested_rank,
        }
    }
}

/// Rank-truncated SVD of `w`, deterministic in `(w, rank, seed)`.
///
/// The effective rank is `min(rank, m, n)`; requesting more than the matrix
/// supports clamps silently and is reported through
/// [`TruncatedSvd::rank_clamped`].
pub fn truncated_svd(w: MatRef<'_, f64>, rank: usize, seed: u64) -> Result<TruncatedSvd> {
    if rank == 0 {
        return Err(Error::InvalidRank {
            rank,
            reason: "truncation rank must be at least 1".into(),
        });
    }
    ensure_finite(w)?;
    let k = w.nrows().min(w.ncols());
    if k == 0 {
        return Err(Error::ShapeMismatch {
            expected: "a non-empty matrix".into(),
            got: format!("{}×{}", w.nrows(), w.ncols()),
        });
    }
    let r_eff = rank.min(k);
    let mut out = if k <= DENSE_SVD_CUTOFF {
        dense_truncated(w, r_eff)?
    } else {
        randomized_truncated(w, r_eff, seed)?
    };
    out.requested_rank = rank;
    fix_signs(&mut out.u, &mut out.v);
    Ok(out)
}

/// Full singular spectrum of `w` via the dense path.
pub fn singular_values(w: MatRef<'_, f64>) -> Result<Vec<f64>> {
    ensure_finite(w)?;
    let svd = w.thin_svd().map_err(|_| Error::SvdFailed)?;
    let s = svd.S();
    Ok((0..s.dim()).map(|i| s[i]).collect())
}

fn dense_truncated(w: MatRef<'_, f64>, r: usize) -> Result<TruncatedSvd> {
    let svd = w.thin_svd().map_err(|_| Error::SvdFailed)?;
    let s_full = svd.S();
    let k = s_full.dim();
    let tail_energy: f64 = (r..k).map(|i| s_full[i] * s_full[i]).sum();
    Ok(TruncatedSvd {
        u: svd.U().subcols(0, r).to_owned(),
        s: (0..r).map(|i| s_full[i]).collect(),
        v: svd.V().subcols(0, r).to_owned(),
        tail_energy,
        rank: r,
        requested_rank: r,
    })
}

fn randomized_truncated(w: MatRef<'_, f64>, r: usize, seed: u64) -> Result<TruncatedSvd> {
    let (m, n) = (w.nrows(), w.ncols());
    let k = m.min(n);
    let l = (r + OVERSAMPLING).min(k);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega: Mat<f64> = Mat::from_fn(n, l, |_, _| StandardNormal.sample(&mut rng));

    let mut q = thin_q(&w * &omega);
    for _ in 0..POWER_ITERATIONS {
        let z = thin_q(w.transpose() * &q);
        q = thin_q(w * &z);
    }

    // Project into the sampled range and factor the small core exactly.
    let b = q.transpose() * w; // l × n
    let svd = b.thin_svd().map_err(|_| Error::SvdFailed)?;
    let s_all = svd.S();
    let u = &q * svd.U().subcols(0, r);
    let s: Vec<f64> = (0..r).map(|i| s_all[i]).collect();
    let v = svd.V().subcols(0, r).to_owned();

    let total = frobenius_norm(w).powi(2);
    let retained: f64 = s.iter().map(|x| x * x).sum();
    Ok(TruncatedSvd {
        u,
        s,
        v,
        tail_energy: (total - retained).max(0.0),
        rank: r,
        requested_rank: r,
    })
}

fn thin_q(y: Mat<f64>) -> Mat<f64> {
    y.qr().compute_thin_Q()
}

/// Minimum-norm least-squares solve: the `P` minimizing `‖P·A − B‖_F`, and
/// among minimizers the one of least Frobenius norm (`P = B·A⁺`).
///
/// `a` is (m × r), `b` is (m' × r); the result is (m' × m). Rank-deficient
/// `a` is handled by singular-value thresholding inside the pseudoinverse.
pub fn min_norm_lstsq(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::ShapeMismatch {
            expected: format!("matching column counts, A has {}", a.ncols()),
            got: format!("B has {}", b.ncols()),
        });
    }
    Ok(b * pseudoinverse(a)?)
}

/// Moore–Penrose pseudoinverse with f32-scale singular value thresholding.
pub fn pseudoinverse(a: MatRef<'_, f64>) -> Result<Mat<f64>> {
    ensure_finite(a)?;
    let svd = a.thin_svd().map_err(|_| Error::SvdFailed)?;
    let s = svd.S();
    let k = s.dim();
    let smax = if k > 0 { s[0] } else { 0.0 };
    let cutoff = a.nrows().max(a.ncols()) as f64 * smax * PINV_EPS;
    // A⁺ = V Σ⁺ Uᵀ
    let mut v_scaled = svd.V().to_owned();
    let inv: Vec<f64> = (0..k)
        .map(|i| if s[i] > cutoff { 1.0 / s[i] } else { 0.0 })
        .collect();
    scale_columns(&mut v_scaled, &inv);
    Ok(&v_scaled * svd.U().transpose())
}

/// √Σ w_ij², accumulated in f64.
pub fn frobenius_norm(w: MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            acc += w[(i, j)] * w[(i, j)];
        }
    }
    acc.sqrt()
}

/// Fraction of squared-Frobenius energy captured by the top `r` singular
/// values: `Σ_{i≤r} σ_i² / Σ_i σ_i²`.
pub fn energy_retained(sigma: &[f64], r: usize) -> Result<f64> {
    if sigma.iter().any(|s| *s < 0.0 || !s.is_finite()) {
        return Err(Error::InvalidArgument(
            "singular values must be finite and non-negative".into(),
        ));
    }
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    let retained: f64 = sigma.iter().take(r).map(|s| s * s).sum();
    Ok(retained / total)
}

/// Closed-form energy retention `1 − ρ^r` under the geometric spectral
/// decay model `σ_i² ≈ σ_1²·ρ^i`.
pub fn geometric_decay_eta(rho: f64, r: usize) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "decay ratio must lie in (0, 1), got {rho}"
        )));
    }
    if r == 0 {
        return Err(Error::InvalidRank {
            rank: 0,
            reason: "rank must be at least 1".into(),
        });
    }
    Ok(1.0 - rho.powi(r as i32))
}

/// Flips factor signs so the largest-magnitude entry of every `u` column is
/// non-negative (first index wins ties).
fn fix_signs(u: &mut Mat<f64>, v: &mut Mat<f64>) {
    for j in 0..u.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..u.nrows() {
            let a = u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..v.nrows() {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }
}

fn scale_columns(m: &mut Mat<f64>, factors: &[f64]) {
    for (j, f) in factors.iter().enumerate() {
        for i in 0..m.nrows() {
            m[(i, j)] *= f;
        }
    }
}

fn ensure_finite(w: MatRef<'_, f64>) -> Result<()> {
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            if !w[(i, j)].is_finite() {
                return Err(Error::NonFinite);
            }
        }
    }
    Ok(())
}

/// Largest deviation of `mᵀm` from the identity, used by orthonormality
/// checks in tests and the strict alignment path.
pub fn orthonormality_defect(m: MatRef<'_, f64>) -> f64 {
    let gram = m.transpose() * m;
    let mut worst = 0.0f64;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}
