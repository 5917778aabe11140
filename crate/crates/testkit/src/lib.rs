//! Brute-force reference oracles for the test suites.
//!
//! Everything here trades speed for transparency: a one-sided Jacobi SVD,
//! a pseudoinverse built on it, naive norm accumulation and a plain
//! piecewise-linear resampler. Test code compares the production kernels
//! against these implementations; nothing in this crate is reachable from
//! the shipped library.

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Full (thin) SVD with singular values sorted in non-increasing order.
pub struct FullSvd {
    pub u: Mat<f64>,
    pub sigma: Vec<f64>,
    pub v: Mat<f64>,
}

/// One-sided Jacobi SVD. Quadratically convergent and accurate to close to
/// machine precision for the small matrices used in tests.
pub fn jacobi_svd(a: MatRef<'_, f64>) -> FullSvd {
    let transposed = a.nrows() < a.ncols();
    let mut work: Mat<f64> = if transposed {
        a.transpose().to_owned()
    } else {
        a.to_owned()
    };
    let m = work.nrows();
    let n = work.ncols();
    let mut v = Mat::<f64>::identity(n, n);

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    let wp = work[(i, p)];
                    let wq = work[(i, q)];
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let rel = gamma.abs() / (alpha * beta).sqrt();
                if rel <= 1e-15 {
                    continue;
                }
                off = off.max(rel);
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = work[(i, p)];
                    let wq = work[(i, q)];
                    work[(i, p)] = c * wp - s * wq;
                    work[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if off < 1e-14 {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| work[(i, j)] * work[(i, j)]).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    let mut u = Mat::<f64>::zeros(m, n);
    let mut v_sorted = Mat::<f64>::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        if s > 0.0 {
            for i in 0..m {
                u[(i, dst)] = work[(i, src)] / s;
            }
        }
        for i in 0..n {
            v_sorted[(i, dst)] = v[(i, src)];
        }
    }

    if transposed {
        FullSvd {
            u: v_sorted,
            sigma,
            v: u,
        }
    } else {
        FullSvd {
            u,
            sigma,
            v: v_sorted,
        }
    }
}

/// Moore–Penrose pseudoinverse via the Jacobi SVD. Singular values at or
/// below `rel_tol × σ_max` are treated as zero.
pub fn pinv(a: MatRef<'_, f64>, rel_tol: f64) -> Mat<f64> {
    let FullSvd { u, sigma, v } = jacobi_svd(a);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cut = rel_tol * smax;
    let k = sigma.len();
    // A⁺ = V Σ⁺ Uᵀ
    let mut vs = Mat::<f64>::zeros(a.ncols(), k);
    for j in 0..k {
        if sigma[j] > cut && sigma[j] > 0.0 {
            let inv = 1.0 / sigma[j];
            for i in 0..a.ncols() {
                vs[(i, j)] = v[(i, j)] * inv;
            }
        }
    }
    &vs * u.transpose()
}

/// Squared tail energy Σ_{i≥r} σ_i² of a sorted spectrum.
pub fn tail_energy_sq(sigma: &[f64], r: usize) -> f64 {
    sigma.iter().skip(r).map(|s| s * s).sum()
}

/// Frobenius norm by naive elementwise summation.
pub fn frobenius_naive(a: MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * a[(i, j)];
        }
    }
    acc.sqrt()
}

/// Reference piecewise-linear resampling of rows onto `new_rows`
/// coordinates, endpoints kept fixed.
pub fn resample_rows(a: MatRef<'_, f64>, new_rows: usize) -> Mat<f64> {
    let m = a.nrows();
    Mat::from_fn(new_rows, a.ncols(), |i, j| {
        if m == 1 {
            return a[(0, j)];
        }
        if new_rows == 1 {
            return a[(0, j)];
        }
        let x = i as f64 * (m - 1) as f64 / (new_rows - 1) as f64;
        let i0 = x.floor() as usize;
        let i1 = (i0 + 1).min(m - 1);
        let frac = x - i0 as f64;
        a[(i0, j)] * (1.0 - frac) + a[(i1, j)] * frac
    })
}

/// Reference piecewise-linear resampling of columns onto `new_cols`.
pub fn resample_cols(a: MatRef<'_, f64>, new_cols: usize) -> Mat<f64> {
    resample_rows(a.transpose(), new_cols).transpose().to_owned()
}

/// Deterministic standard-normal matrix for test inputs.
pub fn gaussian_mat(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Largest absolute entry of `a - b`; matrices must have equal shape.
pub fn max_abs_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    worst
}

/// Frobenius norm of `a - b`.
pub fn frobenius_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let d = a[(i, j)] - b[(i, j)];
            acc += d * d;
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(svd: &FullSvd) -> Mat<f64> {
        let k = svd.sigma.len();
        let mut us = svd.u.to_owned();
        for j in 0..k {
            for i in 0..us.nrows() {
                us[(i, j)] *= svd.sigma[j];
            }
        }
        &us * svd.v.transpose()
    }

    #[test]
    fn jacobi_reconstructs_random_matrices() {
        for (m, n, seed) in [(6, 4, 1u64), (4, 7, 2), (5, 5, 3), (12, 3, 4)] {
            let a = gaussian_mat(m, n, seed);
            let svd = jacobi_svd(a.as_ref());
            let err = frobenius_diff(a.as_ref(), reconstruct(&svd).as_ref());
            assert!(err < 1e-12, "({m},{n}): err {err}");
            for w in svd.sigma.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn jacobi_diagonal_spectrum() {
        let mut a = Mat::<f64>::zeros(3, 3);
        a[(0, 0)] = 3.0;
        a[(1, 1)] = 2.0;
        a[(2, 2)] = 1.0;
        let svd = jacobi_svd(a.as_ref());
        assert!((svd.sigma[0] - 3.0).abs() < 1e-13);
        assert!((svd.sigma[1] - 2.0).abs() < 1e-13);
        assert!((svd.sigma[2] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn pinv_satisfies_penrose_identity() {
        let a = gaussian_mat(6, 4, 9);
        let p = pinv(a.as_ref(), 1e-12);
        let apa = &a * &p * &a;
        assert!(frobenius_diff(a.as_ref(), apa.as_ref()) < 1e-10);
    }

    #[test]
    fn resample_identity_when_same_size() {
        let a = gaussian_mat(5, 3, 11);
        let r = resample_rows(a.as_ref(), 5);
        assert_eq!(max_abs_diff(a.as_ref(), r.as_ref()), 0.0);
    }
}
