//! Dense tensors with explicit dtype, shape and row-major byte storage.

use faer::{Mat, MatRef};

use crate::dtype::{decode_f32, encode_f32, DType};
use crate::error::{Error, Result};

/// A named dense tensor backed by a row-major little-endian byte buffer.
///
/// The buffer length always equals `product(shape) × byte_width(dtype)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    name: String,
    dtype: DType,
    shape: Vec<usize>,
    data: Vec<u8>,
}

impl Tensor {
    /// Builds a tensor, checking that the buffer length matches the shape.
    pub fn new(
        name: impl Into<String>,
        dtype: DType,
        shape: Vec<usize>,
        data: Vec<u8>,
    ) -> Result<Self> {
        let name = name.into();
        let numel: usize = shape.iter().product();
        let expected = numel * dtype.byte_width();
        if data.len() != expected {
            return Err(Error::BadTensor {
                name,
                reason: format!(
                    "data length {} does not match shape {:?} × {} ({} bytes expected)",
                    data.len(),
                    shape,
                    dtype,
                    expected
                ),
            });
        }
        Ok(Tensor {
            name,
            dtype,
            shape,
            data,
        })
    }

    /// Builds a tensor from f32 values, converting to the requested dtype.
    pub fn from_f32(
        name: impl Into<String>,
        dtype: DType,
        shape: Vec<usize>,
        values: &[f32],
    ) -> Result<Self> {
        let name = name.into();
        let numel: usize = shape.iter().product();
        if values.len() != numel {
            return Err(Error::BadTensor {
                name,
                reason: format!("{} values do not fill shape {:?}", values.len(), shape),
            });
        }
        let data = encode_f32(values, dtype);
        Tensor::new(name, dtype, shape, data)
    }

    /// Builds a 2-D tensor from a matrix, narrowing through f32 into `dtype`.
    pub fn from_mat(name: impl Into<String>, dtype: DType, mat: MatRef<'_, f64>) -> Self {
        let (m, n) = (mat.nrows(), mat.ncols());
        let mut values = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                values.push(mat[(i, j)] as f32);
            }
        }
        Tensor::from_f32(name, dtype, vec![m, n], &values)
            .expect("shape derived from the matrix itself")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    /// Decodes the buffer into f32 values (exact for all supported dtypes).
    pub fn to_f32(&self) -> Vec<f32> {
        decode_f32(&self.data, self.dtype)
    }

    /// Decodes a 2-D tensor into an f64 matrix for linear algebra.
    ///
    /// Higher-rank tensors are rejected; only matrices take part in the
    /// transfer math.
    pub fn to_mat(&self) -> Result<Mat<f64>> {
        if self.shape.len() != 2 {
            return Err(Error::BadTensor {
                name: self.name.clone(),
                reason: format!("expected a 2-D matrix, found shape {:?}", self.shape),
            });
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let values = self.to_f32();
        Ok(Mat::from_fn(m, n, |i, j| values[i * n + j] as f64))
    }

    /// Converts element values to `target`, keeping name and shape.
    ///
    /// Rounds to nearest even; f16/bf16 overflow saturates to the largest
    /// finite value of the target format.
    pub fn cast(&self, target: DType) -> Tensor {
        if target == self.dtype {
            return self.clone();
        }
        let values = self.to_f32();
        Tensor {
            name: self.name.clone(),
            dtype: target,
            shape: self.shape.clone(),
            data: encode_f32(&values, target),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtype::{f16_bits_to_f32, F16_MAX};

    #[test]
    fn new_rejects_wrong_length() {
        let err = Tensor::new("w", DType::F32, vec![2, 2], vec![0u8; 15]).unwrap_err();
        assert!(err.to_string().contains("w"));
    }

    #[test]
    fn cast_exact_value() {
        let t = Tensor::from_f32("x", DType::F32, vec![1], &[1.0]).unwrap();
        let h = t.cast(DType::F16);
        assert_eq!(h.dtype(), DType::F16);
        assert_eq!(h.to_f32(), vec![1.0]);
    }

    #[test]
    fn cast_saturates() {
        let t = Tensor::from_f32("x", DType::F32, vec![2], &[70000.0, -70000.0]).unwrap();
        let h = t.cast(DType::F16);
        assert_eq!(h.to_f32(), vec![F16_MAX, -F16_MAX]);
    }

    #[test]
    fn cast_keeps_shape() {
        let t = Tensor::from_f32("x", DType::F32, vec![3, 4], &[0.25; 12]).unwrap();
        let h = t.cast(DType::BF16);
        assert_eq!(h.shape(), &[3, 4]);
        assert_eq!(h.data().len(), 12 * 2);
    }

    #[test]
    fn cast_round_trip_error_bounded() {
        // Random F32 matrix round-tripped through F16 stays within 2^-11
        // relative error per element, checked against the reference
        // conversion from the `half` crate.
        let mut state = 42u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 32) as f32 / u32::MAX as f32) * 8.0 - 4.0
        };
        let values: Vec<f32> = (0..256).map(|_| next()).collect();
        let t = Tensor::from_f32("m", DType::F32, vec![16, 16], &values).unwrap();
        let back = t.cast(DType::F16).cast(DType::F32);
        let bound = 2.0f32.powi(-11);
        for (orig, round) in values.iter().zip(back.to_f32()) {
            // 2^-24 absolute slack covers values that land in the f16
            // subnormal range.
            assert!((round - orig).abs() <= bound * orig.abs() + 2.0f32.powi(-24));
            let reference = half::f16::from_f32(*orig).to_f32();
            assert_eq!(round, reference);
        }
    }

    #[test]
    fn cast_to_f16_idempotent() {
        let values: Vec<f32> = (0..64).map(|i| (i as f32 - 31.5) * 0.37).collect();
        let t = Tensor::from_f32("m", DType::F32, vec![64], &values).unwrap();
        let once = t.cast(DType::F16);
        let twice = once.cast(DType::F32).cast(DType::F16);
        assert_eq!(once.data(), twice.data());
    }

    #[test]
    fn mat_round_trip_row_major() {
        let values = [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = Tensor::from_f32("m", DType::F32, vec![2, 3], &values).unwrap();
        let m = t.to_mat().unwrap();
        assert_eq!(m[(0, 2)], 3.0);
        assert_eq!(m[(1, 0)], 4.0);
        let t2 = Tensor::from_mat("m", DType::F32, m.as_ref());
        assert_eq!(t, t2);
    }

    #[test]
    fn to_mat_rejects_higher_rank() {
        let t = Tensor::from_f32("e", DType::F32, vec![2, 2, 2], &[0.0; 8]).unwrap();
        assert!(t.to_mat().is_err());
    }

    #[test]
    fn f16_tensor_decodes_exactly() {
        let t = Tensor::new("h", DType::F16, vec![2], 0x3c00u16.to_le_bytes().iter().chain(0x4000u16.to_le_bytes().iter()).copied().collect()).unwrap();
        assert_eq!(t.to_f32(), vec![f16_bits_to_f32(0x3c00), 2.0]);
    }
}
