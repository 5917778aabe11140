//! Deterministic synthetic base-model pairs and adapters.
//!
//! Desk-scale stand-ins for real checkpoints: per-layer projection weights
//! with controlled geometric spectra, a tunable amount of shared dominant
//! directions between the two models, and adapters whose energy split
//! between the retained subspace and its complement is exact. Everything is
//! a pure function of the spec and seed.

use std::collections::BTreeMap;

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dtype::DType;
use crate::error::{Error, Result};
use crate::linalg::frobenius_norm;
use crate::store::TensorStore;
use crate::tensor::Tensor;
use crate::util::derive_seed;

const ATTN_MODULES: [&str; 4] = ["q_proj", "k_proj", "v_proj", "o_proj"];
const MLP_MODULES: [&str; 3] = ["gate_proj", "up_proj", "down_proj"];

/// Recipe for one synthetic source/target model pair.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub layers: usize,
    pub hidden_source: usize,
    pub hidden_target: usize,
    pub intermediate_source: usize,
    pub intermediate_target: usize,
    /// Geometric decay of squared singular values, σ_i² = ρ^i.
    pub spectrum_rho: f64,
    /// Share of the target's dominant directions drawn from the source's
    /// generator; 1 with equal dimensions reproduces the source bitwise.
    pub subspace_overlap: f64,
    pub lora_rank: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            layers: 2,
            hidden_source: 64,
            hidden_target: 64,
            intermediate_source: 96,
            intermediate_target: 96,
            spectrum_rho: 0.94,
            subspace_overlap: 1.0,
            lora_rank: 8,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidArgument("layers must be at least 1".into()));
        }
        let dims = [
            self.hidden_source,
            self.hidden_target,
            self.intermediate_source,
            self.intermediate_target,
        ];
        if dims.iter().any(|&d| d < self.lora_rank.max(1)) {
            return Err(Error::InvalidArgument(format!(
                "all dimensions must be at least lora_rank ({})",
                self.lora_rank
            )));
        }
        if !(self.spectrum_rho > 0.0 && self.spectrum_rho < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "spectrum_rho must lie in (0, 1), got {}",
                self.spectrum_rho
            )));
        }
        if !(0.0..=1.0).contains(&self.subspace_overlap) {
            return Err(Error::InvalidArgument(format!(
                "subspace_overlap must lie in [0, 1], got {}",
                self.subspace_overlap
            )));
        }
        Ok(())
    }
}

/// Singular values with σ_i² = ρ^i for i = 1..=k.
pub fn geometric_singular_values(rho: f64, k: usize) -> Vec<f64> {
    (1..=k).map(|i| rho.powf(i as f64 / 2.0)).collect()
}

/// Deterministic standard-normal matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::<f64>::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

fn thin_orthonormal(block: Mat<f64>) -> Mat<f64> {
    block.qr().compute_thin_Q()
}

/// A matrix with prescribed singular values and random orthonormal factors.
pub fn matrix_with_spectrum(m: usize, n: usize, sigma: &[f64], seed: u64) -> Result<Mat<f64>> {
    let k = sigma.len();
    if k > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "{k} singular values do not fit a {m}×{n} matrix"
        )));
    }
    let u = thin_orthonormal(gaussian_matrix(m, k, seed ^ 0x5u64));
    let v = thin_orthonormal(gaussian_matrix(n, k, seed ^ 0xau64));
    let mut us = u;
    for (j, s) in sigma.iter().enumerate() {
        for i in 0..us.nrows() {
            us[(i, j)] *= s;
        }
    }
    Ok(&us * v.transpose())
}

/// Per-layer weight keys and shapes for one side of the pair.
fn layout(layers: usize, hidden: usize, intermediate: usize) -> Vec<(String, usize, usize)> {
    let mut keys = Vec::new();
    for layer in 0..layers {
        for tag in ATTN_MODULES {
            keys.push((
                format!("model.layers.{layer}.self_attn.{tag}.weight"),
                hidden,
                hidden,
            ));
        }
        for tag in MLP_MODULES {
            let (m, n) = if tag == "down_proj" {
                (hidden, intermediate)
            } else {
                (intermediate, hidden)
            };
            keys.push((format!("model.layers.{layer}.mlp.{tag}.weight"), m, n));
        }
    }
    keys
}

/// Generates the source and target base stores.
///
/// Both sides of one key draw their dominant directions from a shared
/// Gaussian generator; `subspace_overlap` blends the target's generator
/// between the shared block and an independent one. With overlap 1 and
/// equal dimensions the stores come out bitwise identical.
pub fn generate_model_pair(spec: &SynthSpec) -> Result<(TensorStore, TensorStore)> {
    spec.validate()?;
    let src_layout = layout(spec.layers, spec.hidden_source, spec.intermediate_source);
    let tgt_layout = layout(spec.layers, spec.hidden_target, spec.intermediate_target);

    let mut source = TensorStore::new();
    let mut target = TensorStore::new();
    for ((key, ms, ns), (_, mt, nt)) in src_layout.into_iter().zip(tgt_layout) {
        let k_s = ms.min(ns);
        let k_t = mt.min(nt);
        let m_max = ms.max(mt);
        let n_max = ns.max(nt);
        let k_max = k_s.max(k_t);

        let shared_u = gaussian_matrix(m_max, k_max, derive_seed(spec.seed, &key, 0));
        let shared_v = gaussian_matrix(n_max, k_max, derive_seed(spec.seed, &key, 1));

        let u_s = thin_orthonormal(shared_u.submatrix(0, 0, ms, k_s).to_owned());
        let v_s = thin_orthonormal(shared_v.submatrix(0, 0, ns, k_s).to_owned());
        let w_s = assemble(u_s, &geometric_singular_values(spec.spectrum_rho, k_s), v_s);
        source.insert(Tensor::from_mat(&key, DType::F32, w_s.as_ref()))?;

        let u_t_block = blend_block(
            shared_u.submatrix(0, 0, mt, k_t),
            spec.subspace_overlap,
            derive_seed(spec.seed, &key, 2),
        );
        let v_t_block = blend_block(
            shared_v.submatrix(0, 0, nt, k_t),
            spec.subspace_overlap,
            derive_seed(spec.seed, &key, 3),
        );
        let w_t = assemble(
            thin_orthonormal(u_t_block),
            &geometric_singular_values(spec.spectrum_rho, k_t),
            thin_orthonormal(v_t_block),
        );
        target.insert(Tensor::from_mat(&key, DType::F32, w_t.as_ref()))?;
    }
    Ok((source, target))
}

fn blend_block(shared: MatRef<'_, f64>, overlap: f64, indep_seed: u64) -> Mat<f64> {
    // Endpoints bypass the mix so overlap = 1 stays bitwise equal to the
    // shared block and overlap = 0 is fully independent.
    if overlap == 1.0 {
        return shared.to_owned();
    }
    let indep = gaussian_matrix(shared.nrows(), shared.ncols(), indep_seed);
    if overlap == 0.0 {
        return indep;
    }
    shared * overlap + indep * (1.0 - overlap)
}

fn assemble(u: Mat<f64>, sigma: &[f64], v: Mat<f64>) -> Mat<f64> {
    let mut us = u;
    for (j, s) in sigma.iter().enumerate() {
        for i in 0..us.nrows() {
            us[(i, j)] *= s;
        }
    }
    &us * v.transpose()
}

/// Generates a LoRA adapter against `base` whose factor energy splits
/// exactly between the top-`subspace_rank` singular subspace of each weight
/// and its orthogonal complement.
///
/// `in_subspace_fraction` 1 makes self-transfer lossless; 0 makes the
/// projected update vanish. The adapter's alpha and rank are recorded in
/// the store metadata.
pub fn generate_lora(
    base: &TensorStore,
    modules: &[String],
    lora_rank: usize,
    subspace_rank: usize,
    in_subspace_fraction: f64,
    alpha: f64,
    seed: u64,
) -> Result<TensorStore> {
    if lora_rank == 0 || subspace_rank == 0 {
        return Err(Error::InvalidArgument(
            "lora_rank and subspace_rank must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&in_subspace_fraction) {
        return Err(Error::InvalidArgument(format!(
            "in_subspace_fraction must lie in [0, 1], got {in_subspace_fraction}"
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }

    let mut adapter = TensorStore::new();
    let mut seen: Vec<&str> = Vec::new();
    for (key, tensor) in base.iter() {
        let Some(stem) = key.strip_suffix(".weight") else {
            continue;
        };
        let tag = stem.rsplit('.').next().unwrap_or(stem);
        if !modules.iter().any(|m| m == tag) || !tensor.is_matrix() {
            continue;
        }
        seen.push(tag);

        let w = tensor.to_mat()?;
        let (m, n) = (w.nrows(), w.ncols());
        let k = m.min(n);
        if subspace_rank > k || (in_subspace_fraction < 1.0 && subspace_rank >= k) {
            return Err(Error::InvalidArgument(format!(
                "subspace_rank {subspace_rank} leaves no complement in a {m}×{n} weight"
            )));
        }
        let svd = w.thin_svd().map_err(|_| Error::SvdFailed)?;
        let u = svd.U();
        let v = svd.V();

        let b = split_factor(
            u,
            subspace_rank,
            lora_rank,
            in_subspace_fraction,
            derive_seed(seed, key, 10),
            false,
        );
        let a = split_factor(
            v,
            subspace_rank,
            lora_rank,
            in_subspace_fraction,
            derive_seed(seed, key, 11),
            true,
        );

        adapter.insert(Tensor::from_mat(
            format!("base_model.model.{stem}.lora_B.weight"),
            DType::F32,
            b.as_ref(),
        ))?;
        adapter.insert(Tensor::from_mat(
            format!("base_model.model.{stem}.lora_A.weight"),
            DType::F32,
            a.as_ref(),
        ))?;
    }

    for module in modules {
        if !seen.iter().any(|t| t == module) {
            return Err(Error::MissingModule(module.clone()));
        }
    }

    let mut meta = BTreeMap::new();
    meta.insert("lora_alpha".to_string(), format!("{alpha}"));
    meta.insert("r".to_string(), format!("{lora_rank}"));
    adapter.set_metadata(meta);
    Ok(adapter)
}

/// Mixes a unit-norm in-subspace block with a unit-norm complement block so
/// the in-subspace energy share equals `fraction` exactly (the two blocks
/// are Frobenius-orthogonal by construction).
fn split_factor(
    basis: MatRef<'_, f64>,
    subspace_rank: usize,
    lora_rank: usize,
    fraction: f64,
    seed: u64,
    transposed: bool,
) -> Mat<f64> {
    let k = basis.ncols();
    let make = |cols: std::ops::Range<usize>, seed: u64| -> Mat<f64> {
        let span = basis.subcols(cols.start, cols.end - cols.start);
        let coeffs = gaussian_matrix(cols.end - cols.start, lora_rank, seed);
        let block = span * coeffs;
        let norm = frobenius_norm(block.as_ref());
        block * (1.0 / norm)
    };

    let mixed = if fraction == 1.0 {
        make(0..subspace_rank, seed)
    } else if fraction == 0.0 {
        make(subspace_rank..k, seed ^ 1)
    } else {
        make(0..subspace_rank, seed) * fraction.sqrt()
            + make(subspace_rank..k, seed ^ 1) * (1.0 - fraction).sqrt()
    };
    if transposed {
        mixed.transpose().to_owned()
    } else {
        mixed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crosslora_testkit as oracle;

    #[test]
    fn overlap_one_equal_dims_is_bitwise_identical() {
        let spec = SynthSpec::default();
        let (source, target) = generate_model_pair(&spec).unwrap();
        assert_eq!(source, target);
        assert_eq!(source.len(), spec.layers * 7);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec {
            subspace_overlap: 0.5,
            hidden_target: 96,
            ..Default::default()
        };
        let a = generate_model_pair(&spec).unwrap();
        let b = generate_model_pair(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shapes_follow_spec_dims() {
        let spec = SynthSpec {
            hidden_source: 64,
            hidden_target: 96,
            intermediate_source: 80,
            intermediate_target: 128,
            ..Default::default()
        };
        let (source, target) = generate_model_pair(&spec).unwrap();
        let q = "model.layers.0.self_attn.q_proj.weight";
        assert_eq!(source.get(q).unwrap().shape(), &[64, 64]);
        assert_eq!(target.get(q).unwrap().shape(), &[96, 96]);
        let up = "model.layers.0.mlp.up_proj.weight";
        assert_eq!(source.get(up).unwrap().shape(), &[80, 64]);
        assert_eq!(target.get(up).unwrap().shape(), &[128, 96]);
        let down = "model.layers.0.mlp.down_proj.weight";
        assert_eq!(source.get(down).unwrap().shape(), &[64, 80]);
        assert_eq!(target.get(down).unwrap().shape(), &[96, 128]);
    }

    #[test]
    fn generated_spectrum_matches_rho() {
        let spec = SynthSpec::default();
        let (source, _) = generate_model_pair(&spec).unwrap();
        let w = source
            .get("model.layers.0.self_attn.q_proj.weight")
            .unwrap()
            .to_mat()
            .unwrap();
        let svd = oracle::jacobi_svd(w.as_ref());
        for (i, s) in svd.sigma.iter().enumerate().take(32) {
            let expect = spec.spectrum_rho.powf((i + 1) as f64 / 2.0);
            assert!((s - expect).abs() < 1e-5, "σ_{i} = {s}, expected {expect}");
        }
    }

    #[test]
    fn lora_fraction_one_lies_in_subspace() {
        let spec = SynthSpec::default();
        let (source, _) = generate_model_pair(&spec).unwrap();
        let modules = vec!["q_proj".to_string()];
        let adapter = generate_lora(&source, &modules, 4, 16, 1.0, 8.0, 3).unwrap();
        assert_eq!(adapter.len(), 2 * spec.layers);

        let b = adapter
            .get("base_model.model.model.layers.0.self_attn.q_proj.lora_B.weight")
            .unwrap()
            .to_mat()
            .unwrap();
        let w = source
            .get("model.layers.0.self_attn.q_proj.weight")
            .unwrap()
            .to_mat()
            .unwrap();
        let full = oracle::jacobi_svd(w.as_ref());
        // Dense projector oracle: energy of B outside the top-16 subspace.
        let u16 = full.u.subcols(0, 16);
        let proj = &u16 * (u16.transpose() * &b);
        let outside = oracle::frobenius_diff(proj.as_ref(), b.as_ref());
        // F32 storage rounding leaves ~1e-7 of spill outside the subspace.
        assert!(outside < 1e-6, "outside energy {outside}");
    }

    #[test]
    fn lora_fraction_half_splits_energy() {
        let spec = SynthSpec::default();
        let (source, _) = generate_model_pair(&spec).unwrap();
        let modules = vec!["o_proj".to_string()];
        let adapter = generate_lora(&source, &modules, 4, 16, 0.5, 8.0, 9).unwrap();
        let b = adapter
            .get("base_model.model.model.layers.0.self_attn.o_proj.lora_B.weight")
            .unwrap()
            .to_mat()
            .unwrap();
        let w = source
            .get("model.layers.0.self_attn.o_proj.weight")
            .unwrap()
            .to_mat()
            .unwrap();
        let full = oracle::jacobi_svd(w.as_ref());
        let u16 = full.u.subcols(0, 16);
        let proj = &u16 * (u16.transpose() * &b);
        let ratio = oracle::frobenius_naive(proj.as_ref()).powi(2)
            / oracle::frobenius_naive(b.as_ref()).powi(2);
        assert!((ratio - 0.5).abs() <= 0.05, "in-subspace energy ratio {ratio}");
    }

    #[test]
    fn lora_metadata_and_missing_module() {
        let (source, _) = generate_model_pair(&SynthSpec::default()).unwrap();
        let adapter = generate_lora(
            &source,
            &["q_proj".to_string()],
            8,
            16,
            1.0,
            16.0,
            0,
        )
        .unwrap();
        let meta = adapter.metadata().unwrap();
        assert_eq!(meta.get("lora_alpha").unwrap(), "16");
        assert_eq!(meta.get("r").unwrap(), "8");

        let err = generate_lora(&source, &["x_proj".to_string()], 8, 16, 1.0, 16.0, 0)
            .unwrap_err();
        assert!(err.to_string().contains("x_proj"));
    }

    #[test]
    fn lora_rejects_fraction_without_complement() {
        let (source, _) = generate_model_pair(&SynthSpec::default()).unwrap();
        // subspace_rank == min dim leaves no orthogonal complement
        let err = generate_lora(&source, &["q_proj".to_string()], 4, 64, 0.0, 8.0, 0)
            .unwrap_err();
        assert!(err.to_string().contains("complement"));
    }
}
