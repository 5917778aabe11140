//! Spectral and transfer-quality diagnostics: energy retention curves,
//! geometric-decay fits and cost trade-off tables.

use std::time::Instant;

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{energy_retained, frobenius_norm, singular_values, truncated_svd};
use crate::synth::{geometric_singular_values, matrix_with_spectrum};

/// Spectra up to this min-dimension are computed densely; larger matrices
/// fall back to the top-k values plus a tail estimate.
pub const DENSE_SPECTRUM_CUTOFF: usize = 4096;

const NOISE_EPS: f64 = 1.1920929e-7; // 2^-23, f32 machine-epsilon scaling

/// Spectral summary of one weight matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub base_key: String,
    /// Full spectrum, or the top-k values when `truncated_spectrum`.
    pub sigma: Vec<f64>,
    /// (r, η(r)) pairs for the requested ranks; non-decreasing in r.
    pub eta_curve: Vec<(usize, f64)>,
    /// Least-squares fit of σ_i² ≈ σ_1²·ρ^i over the usable spectrum.
    pub fitted_rho: Option<f64>,
    /// Bound on the projection error at the largest requested rank:
    /// √((1 − η)·‖W‖_F²).
    pub tail_bound: f64,
    /// Energy beyond the stored values (0 for dense spectra).
    pub tail_energy: f64,
    pub truncated_spectrum: bool,
}

/// Computes η values, a decay fit and the tail bound for one matrix.
pub fn spectrum_report(
    base_key: impl Into<String>,
    w: MatRef<'_, f64>,
    ranks: &[usize],
    seed: u64,
) -> Result<SpectrumReport> {
    if ranks.is_empty() || ranks.iter().any(|&r| r == 0) {
        return Err(Error::InvalidArgument(
            "ranks must be non-empty and at least 1".into(),
        ));
    }
    let total_sq = frobenius_norm(w).powi(2);
    if total_sq == 0.0 {
        return Err(Error::ZeroSpectrum);
    }

    let k = w.nrows().min(w.ncols());
    let r_max = *ranks.iter().max().expect("non-empty");
    let (sigma, tail_energy, truncated_spectrum) = if k <= DENSE_SPECTRUM_CUTOFF {
        (singular_values(w)?, 0.0, false)
    } else {
        let svd = truncated_svd(w, r_max, seed)?;
        let tail = svd.tail_energy;
        (svd.s, tail, true)
    };

    let stored_sq: f64 = sigma.iter().map(|s| s * s).sum();
    let denom = stored_sq + tail_energy;
    let eta_at = |r: usize| -> f64 {
        let retained: f64 = sigma.iter().take(r).map(|s| s * s).sum();
        retained / denom
    };
    let eta_curve: Vec<(usize, f64)> = ranks.iter().map(|&r| (r, eta_at(r))).collect();
    let eta_max = eta_at(r_max);
    let tail_bound = ((1.0 - eta_max).max(0.0) * denom).sqrt();

    Ok(SpectrumReport {
        base_key: base_key.into(),
        fitted_rho: fit_decay(&sigma, w.nrows().max(w.ncols())),
        sigma,
        eta_curve,
        tail_bound,
        tail_energy,
        truncated_spectrum,
    })
}

/// Log-linear regression of σ_i² against the index, over the top 80% of
/// values above the f32 noise floor. Returns `None` with fewer than two
/// usable points.
fn fit_decay(sigma: &[f64], max_dim: usize) -> Option<f64> {
    let smax = sigma.first().copied()?;
    if smax <= 0.0 {
        return None;
    }
    let floor = smax * max_dim as f64 * NOISE_EPS;
    let usable = sigma.iter().take_while(|&&s| s > floor).count();
    let count = (usable as f64 * 0.8).ceil() as usize;
    if count < 2 {
        return None;
    }
    // ln σ_i² = a + b·i with 1-based i; ρ = e^b.
    let points: Vec<(f64, f64)> = sigma[..count]
        .iter()
        .enumerate()
        .map(|(idx, s)| ((idx + 1) as f64, 2.0 * s.ln()))
        .collect();
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Some(slope.exp())
}

/// One row of the cost/quality trade-off table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub rank: usize,
    /// O(r·m·n) against O(m·n·min(m,n)): r / min(m,n).
    pub predicted_time_ratio: f64,
    /// O(r(m+n)) against O(m·n): r(m+n) / (m·n).
    pub predicted_memory_ratio: f64,
    /// Median of the timed truncated-SVD runs; `None` when `runs` is 0.
    pub measured_seconds: Option<f64>,
    pub eta: f64,
    /// Set when the factored form stops being smaller than the dense
    /// matrix.
    pub no_savings: bool,
}

/// Times truncated SVDs of a synthetic (m × n) matrix with geometric
/// spectral decay `rho` across `ranks`, alongside the predicted ratios.
/// Timings are the median of `runs` repetitions after one warm-up.
pub fn tradeoff_table(
    m: usize,
    n: usize,
    ranks: &[usize],
    rho: f64,
    runs: usize,
    seed: u64,
) -> Result<Vec<TradeoffRow>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    if ranks.is_empty() || ranks.iter().any(|&r| r == 0) {
        return Err(Error::InvalidArgument(
            "ranks must be non-empty and at least 1".into(),
        ));
    }
    let k = m.min(n);
    let sigma = geometric_singular_values(rho, k);
    let w = matrix_with_spectrum(m, n, &sigma, seed)?;

    if runs > 0 {
        // One warm-up so the first measured rank is not penalized.
        let _ = truncated_svd(w.as_ref(), ranks[0].min(k), seed)?;
    }

    let mut rows = Vec::with_capacity(ranks.len());
    for &rank in ranks {
        let memory_ratio = rank as f64 * (m + n) as f64 / (m as f64 * n as f64);
        let measured = if runs == 0 {
            None
        } else {
            let mut times = Vec::with_capacity(runs);
            for _ in 0..runs {
                let t0 = Instant::now();
                let _ = truncated_svd(w.as_ref(), rank, seed)?;
                times.push(t0.elapsed().as_secs_f64());
            }
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(times[times.len() / 2])
        };
        rows.push(TradeoffRow {
            rank,
            predicted_time_ratio: rank as f64 / k as f64,
            predicted_memory_ratio: memory_ratio,
            measured_seconds: measured,
            eta: energy_retained(&sigma, rank)?,
            no_savings: memory_ratio >= 1.0,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::geometric_decay_eta;
    use crate::synth::gaussian_matrix;
    use crosslora_testkit as oracle;

    #[test]
    fn recovers_exact_geometric_decay() {
        let sigma = geometric_singular_values(0.94, 64);
        let w = matrix_with_spectrum(72, 64, &sigma, 5).unwrap();
        let report = spectrum_report("k", w.as_ref(), &[4, 16, 64], 0).unwrap();
        let rho = report.fitted_rho.unwrap();
        assert!((0.935..=0.945).contains(&rho), "fitted rho {rho}");
        assert!(!report.truncated_spectrum);
    }

    #[test]
    fn eta_is_one_at_full_rank() {
        let w = gaussian_matrix(20, 12, 9);
        let report = spectrum_report("k", w.as_ref(), &[4, 12], 0).unwrap();
        let (_, eta_full) = report.eta_curve[1];
        assert_eq!(eta_full, 1.0);
        for pair in report.eta_curve.windows(2) {
            assert!(pair[0].1 <= pair[1].1);
        }
        assert!(report.tail_bound.abs() < 1e-6);
    }

    #[test]
    fn eta_matches_energy_retained_exactly() {
        let w = gaussian_matrix(24, 18, 11);
        let report = spectrum_report("k", w.as_ref(), &[3, 7, 11], 0).unwrap();
        for (r, eta) in &report.eta_curve {
            assert_eq!(*eta, energy_retained(&report.sigma, *r).unwrap());
        }
    }

    #[test]
    fn eta_stays_above_99_percent_for_paper_decay_range() {
        for rho in [0.92, 0.94, 0.97] {
            let sigma = geometric_singular_values(rho, 3072);
            let eta = energy_retained(&sigma, 320).unwrap();
            assert!(eta >= 0.99, "rho {rho}: eta {eta}");
            let closed = geometric_decay_eta(rho, 320).unwrap();
            assert!((eta - closed).abs() < 1e-6);
        }
    }

    #[test]
    fn reconstruction_error_identity() {
        // ‖W − W_r‖² + Σ_{i≤r} σ_i² == ‖W‖² over singular directions.
        let w = gaussian_matrix(30, 22, 13);
        let svd = truncated_svd(w.as_ref(), 6, 0).unwrap();
        let err_sq = oracle::frobenius_diff(w.as_ref(), svd.reconstruct().as_ref()).powi(2);
        let retained: f64 = svd.s.iter().map(|s| s * s).sum();
        let total = frobenius_norm(w.as_ref()).powi(2);
        assert!(
            ((err_sq + retained) - total).abs() <= 1e-5 * total,
            "{err_sq} + {retained} vs {total}"
        );
    }

    #[test]
    fn zero_matrix_is_rejected() {
        let w = faer::Mat::<f64>::zeros(8, 8);
        assert!(matches!(
            spectrum_report("k", w.as_ref(), &[2], 0),
            Err(Error::ZeroSpectrum)
        ));
    }

    #[test]
    fn tradeoff_predicted_ratios() {
        let rows = tradeoff_table(96, 96, &[10, 48, 96], 0.9, 0, 0).unwrap();
        assert!((rows[0].predicted_memory_ratio - 10.0 * 192.0 / (96.0 * 96.0)).abs() < 1e-12);
        assert!(!rows[0].no_savings);
        // r == min(m,n): factored form is twice the dense size.
        assert!(rows[2].predicted_memory_ratio >= 1.0);
        assert!(rows[2].no_savings);
        assert!((rows[2].predicted_time_ratio - 1.0).abs() < 1e-12);
        // η non-decreasing in rank.
        assert!(rows[0].eta <= rows[1].eta && rows[1].eta <= rows[2].eta);
        assert_eq!(rows[0].measured_seconds, None);
    }

    #[test]
    fn tradeoff_desk_scale_memory_check() {
        // The 3072×3072 / r=320 arithmetic from the cost model, checked
        // without building the matrix.
        let ratio: f64 = 320.0 * (3072.0 + 3072.0) / (3072.0 * 3072.0);
        assert!((ratio - 0.2083).abs() < 1e-3);
    }

    #[test]
    fn tradeoff_timed_smoke() {
        let rows = tradeoffs_smoke();
        for row in &rows {
            assert!(row.measured_seconds.unwrap() >= 0.0);
        }
    }

    fn tradeoffs_smoke() -> Vec<TradeoffRow> {
        tradeoff_table(48, 40, &[4, 8], 0.9, 1, 0).unwrap()
    }
}
