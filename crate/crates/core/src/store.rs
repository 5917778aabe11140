//! Checkpoint tensor files.
//!
//! Single-file format, bit-exact:
//!
//! ```text
//! bytes 0..8    u64 little-endian header length N
//! bytes 8..8+N  UTF-8 JSON object: name -> {dtype, shape, data_offsets},
//!               plus an optional "__metadata__" string map
//! bytes 8+N..   raw tensor payloads, row-major little-endian, densely
//!               packed and non-overlapping in offset order
//! ```
//!
//! `data_offsets` are relative to the start of the byte buffer that follows
//! the header. Writing is deterministic: tensors are laid out in
//! lexicographic name order and the header JSON is emitted with sorted keys,
//! so equal stores produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use crate::dtype::DType;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// An ordered collection of named tensors plus optional string metadata.
///
/// Iteration order is lexicographic by name, which is what makes every
/// downstream artifact of a run reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorStore {
    entries: BTreeMap<String, Tensor>,
    metadata: Option<BTreeMap<String, String>>,
}

impl TensorStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a tensor, keyed by its name. Replaces any previous tensor of
    /// the same name.
    pub fn insert(&mut self, tensor: Tensor) -> Result<()> {
        if tensor.name().is_empty() {
            return Err(Error::BadTensor {
                name: String::new(),
                reason: "tensor names must be non-empty".into(),
            });
        }
        self.entries.insert(tensor.name().to_string(), tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tensor names in lexicographic order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// (name, tensor) pairs in lexicographic name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn metadata(&self) -> Option<&BTreeMap<String, String>> {
        self.metadata.as_ref()
    }

    pub fn set_metadata(&mut self, metadata: BTreeMap<String, String>) {
        self.metadata = Some(metadata);
    }

    /// Reads a checkpoint file.
    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes =
            fs::read(path).map_err(|e| Error::from(e).with_path(path))?;
        Self::from_bytes(&bytes).map_err(|e| e.with_path(path))
    }

    /// Writes the store as a checkpoint file. Two calls with equal stores
    /// produce byte-identical files.
    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| Error::from(e).with_path(path))
    }

    /// Parses the checkpoint format from a byte buffer.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Malformed(format!(
                "file is {} bytes; need at least 8 for the header length",
                bytes.len()
            )));
        }
        let header_len = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
        let Some(buffer_start) = header_len.checked_add(8).filter(|&e| e <= bytes.len()) else {
            return Err(Error::Malformed(format!(
                "header length {} exceeds file size {}",
                header_len,
                bytes.len()
            )));
        };
        let header = std::str::from_utf8(&bytes[8..buffer_start]).map_err(|e| {
            Error::Malformed(format!(
                "header is not valid UTF-8 (error at byte offset {})",
                8 + e.valid_up_to()
            ))
        })?;
        let root: Value = serde_json::from_str(header)
            .map_err(|e| Error::Malformed(format!("header is not valid JSON: {e}")))?;
        let Value::Object(obj) = root else {
            return Err(Error::Malformed("header JSON is not an object".into()));
        };

        let buffer = &bytes[buffer_start..];
        let mut store = TensorStore::new();
        let mut spans: Vec<(usize, usize, String)> = Vec::new();

        for (name, value) in obj {
            if name == "__metadata__" {
                store.metadata = Some(parse_metadata(&value)?);
                continue;
            }
            let (tensor, begin, end) = parse_entry(&name, &value, buffer)?;
            if tensor.numel() > 0 {
                spans.push((begin, end, name.clone()));
            }
            store.insert(tensor)?;
        }

        check_packing(&mut spans, buffer.len())?;
        Ok(store)
    }

    /// Serializes the store into checkpoint-format bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut header = Map::new();
        if let Some(meta) = &self.metadata {
            let map: Map<String, Value> = meta
                .iter()
                .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                .collect();
            header.insert("__metadata__".into(), Value::Object(map));
        }

        let mut buffer = Vec::new();
        for (name, tensor) in &self.entries {
            if name.is_empty() {
                return Err(Error::BadTensor {
                    name: String::new(),
                    reason: "tensor names must be non-empty".into(),
                });
            }
            let begin = buffer.len();
            buffer.extend_from_slice(tensor.data());
            let end = buffer.len();
            header.insert(
                name.clone(),
                serde_json::json!({
                    "dtype": tensor.dtype().as_str(),
                    "shape": tensor.shape(),
                    "data_offsets": [begin, end],
                }),
            );
        }

        let header_json = serde_json::to_string(&Value::Object(header))
            .expect("header serialization cannot fail");
        let mut out = Vec::with_capacity(8 + header_json.len() + buffer.len());
        out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        out.extend_from_slice(header_json.as_bytes());
        out.extend_from_slice(&buffer);
        Ok(out)
    }
}

fn parse_metadata(value: &Value) -> Result<BTreeMap<String, String>> {
    let Value::Object(obj) = value else {
        return Err(Error::Malformed("__metadata__ is not an object".into()));
    };
    let mut map = BTreeMap::new();
    for (k, v) in obj {
        let Value::String(s) = v else {
            return Err(Error::Malformed(format!(
                "__metadata__ entry `{k}` is not a string"
            )));
        };
        map.insert(k.clone(), s.clone());
    }
    Ok(map)
}

fn parse_entry(name: &str, value: &Value, buffer: &[u8]) -> Result<(Tensor, usize, usize)> {
    let bad = |reason: String| Error::BadTensor {
        name: name.to_string(),
        reason,
    };

    let Value::Object(obj) = value else {
        return Err(bad("header entry is not an object".into()));
    };

    let dtype_tag = obj
        .get("dtype")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("missing or non-string dtype".into()))?;
    let dtype = DType::parse(dtype_tag)
        .ok_or_else(|| bad(format!("unknown dtype tag `{dtype_tag}`")))?;

    let shape_val = obj
        .get("shape")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing or non-array shape".into()))?;
    let mut shape = Vec::with_capacity(shape_val.len());
    for dim in shape_val {
        let d = dim
            .as_u64()
            .ok_or_else(|| bad(format!("shape dimension `{dim}` is not a non-negative integer")))?;
        shape.push(d as usize);
    }

    let offsets = obj
        .get("data_offsets")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 2)
        .ok_or_else(|| bad("missing or malformed data_offsets".into()))?;
    let begin = offsets[0]
        .as_u64()
        .ok_or_else(|| bad("data_offsets[0] is not a non-negative integer".into()))?
        as usize;
    let end = offsets[1]
        .as_u64()
        .ok_or_else(|| bad("data_offsets[1] is not a non-negative integer".into()))?
        as usize;

    if begin > end || end > buffer.len() {
        return Err(bad(format!(
            "data_offsets [{begin}, {end}] out of bounds for buffer of {} bytes",
            buffer.len()
        )));
    }
    let numel: usize = shape.iter().product();
    let expected = numel * dtype.byte_width();
    if end - begin != expected {
        return Err(bad(format!(
            "data_offsets span {} bytes but shape {:?} × {} needs {}",
            end - begin,
            shape,
            dtype,
            expected
        )));
    }

    let tensor = Tensor::new(name, dtype, shape, buffer[begin..end].to_vec())?;
    Ok((tensor, begin, end))
}

/// Rejects overlapping, gapped or trailing payload bytes.
fn check_packing(spans: &mut [(usize, usize, String)], buffer_len: usize) -> Result<()> {
    spans.sort();
    let mut cursor = 0usize;
    for (begin, end, name) in spans.iter() {
        if *begin < cursor {
            return Err(Error::BadTensor {
                name: name.clone(),
                reason: "data_offsets overlap a previous tensor".into(),
            });
        }
        if *begin > cursor {
            return Err(Error::BadTensor {
                name: name.clone(),
                reason: format!("gap before tensor data (expected offset {cursor}, found {begin})"),
            });
        }
        cursor = *end;
    }
    if cursor != buffer_len {
        return Err(Error::Malformed(format!(
            "{} unused trailing bytes in data buffer",
            buffer_len - cursor
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f32_store(entries: &[(&str, Vec<usize>, Vec<f32>)]) -> TensorStore {
        let mut store = TensorStore::new();
        for (name, shape, values) in entries {
            store
                .insert(Tensor::from_f32(*name, DType::F32, shape.clone(), values).unwrap())
                .unwrap();
        }
        store
    }

    /// Hand-assembled file holding a single 2x2 F32 identity tensor.
    fn identity_file() -> Vec<u8> {
        let header = r#"{"w":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]}}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        for v in [1.0f32, 0.0, 0.0, 1.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    #[test]
    fn reads_identity_tensor() {
        let store = TensorStore::from_bytes(&identity_file()).unwrap();
        let w = store.get("w").unwrap();
        assert_eq!(w.shape(), &[2, 2]);
        assert_eq!(w.data().len(), 16);
        assert_eq!(w.to_f32(), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn empty_store_writes_empty_header() {
        let bytes = TensorStore::new().to_bytes().unwrap();
        assert_eq!(&bytes[8..], b"{}");
        assert_eq!(u64::from_le_bytes(bytes[0..8].try_into().unwrap()), 2);
        let back = TensorStore::from_bytes(&bytes).unwrap();
        assert!(back.is_empty());
    }

    #[test]
    fn round_trip_is_bitwise() {
        let mut store = f32_store(&[
            ("z.weight", vec![2, 3], vec![0.5; 6]),
            ("a.weight", vec![4], vec![1.0, -1.0, 2.0, -2.0]),
        ]);
        store.set_metadata(BTreeMap::from([(
            "format".to_string(),
            "pt".to_string(),
        )]));
        let bytes = store.to_bytes().unwrap();
        let back = TensorStore::from_bytes(&bytes).unwrap();
        assert_eq!(store, back);
        // write(read(file)) reproduces the file too
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn writes_are_deterministic() {
        let store = f32_store(&[("b", vec![2], vec![1.0, 2.0]), ("a", vec![1], vec![3.0])]);
        assert_eq!(store.to_bytes().unwrap(), store.to_bytes().unwrap());
    }

    #[test]
    fn metadata_survives_independent_json_parse() {
        let mut store = f32_store(&[("t", vec![1], vec![9.0])]);
        store.set_metadata(BTreeMap::from([
            ("lora_alpha".to_string(), "16".to_string()),
            ("r".to_string(), "8".to_string()),
        ]));
        let bytes = store.to_bytes().unwrap();
        let header_len = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
        let value: serde_json::Value =
            serde_json::from_slice(&bytes[8..8 + header_len]).unwrap();
        assert_eq!(value["__metadata__"]["lora_alpha"], "16");
        assert_eq!(value["__metadata__"]["r"], "8");
    }

    #[test]
    fn rejects_offsets_beyond_buffer() {
        let header = r#"{"w":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]}}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[0u8; 8]); // only half the declared payload
        let err = TensorStore::from_bytes(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("`w`"), "{msg}");
        assert!(msg.contains("out of bounds"), "{msg}");
    }

    #[test]
    fn rejects_unknown_dtype() {
        let header = r#"{"q":{"dtype":"I4","shape":[1],"data_offsets":[0,4]}}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[0u8; 4]);
        let err = TensorStore::from_bytes(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("`q`") && msg.contains("I4"), "{msg}");
    }

    #[test]
    fn rejects_overlapping_tensors() {
        let header = concat!(
            r#"{"a":{"dtype":"F32","shape":[1],"data_offsets":[0,4]},"#,
            r#""b":{"dtype":"F32","shape":[1],"data_offsets":[2,6]}}"#
        );
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[0u8; 6]);
        let err = TensorStore::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("overlap"), "{err}");
    }

    #[test]
    fn rejects_gapped_layout() {
        let header = r#"{"a":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[0u8; 8]);
        let err = TensorStore::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("gap"), "{err}");
    }

    #[test]
    fn rejects_truncated_header() {
        let err = TensorStore::from_bytes(&[1, 2, 3]).unwrap_err();
        assert!(err.to_string().contains("8"), "{err}");
        let mut bytes = 1000u64.to_le_bytes().to_vec();
        bytes.extend_from_slice(b"{}");
        let err = TensorStore::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("exceeds"), "{err}");
    }

    #[test]
    fn rejects_non_json_and_non_utf8() {
        let mut bytes = 2u64.to_le_bytes().to_vec();
        bytes.extend_from_slice(&[0xff, 0xfe]);
        assert!(TensorStore::from_bytes(&bytes)
            .unwrap_err()
            .to_string()
            .contains("UTF-8"));

        let mut bytes = 2u64.to_le_bytes().to_vec();
        bytes.extend_from_slice(b"[]");
        assert!(TensorStore::from_bytes(&bytes)
            .unwrap_err()
            .to_string()
            .contains("not an object"));
    }

    #[test]
    fn rejects_length_mismatch() {
        let header = r#"{"w":{"dtype":"F32","shape":[3],"data_offsets":[0,8]}}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend_from_slice(&[0u8; 8]);
        let err = TensorStore::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("needs 12"), "{err}");
    }

    #[test]
    fn rejects_empty_name_on_write() {
        let mut store = TensorStore::new();
        let err = store
            .insert(Tensor::from_f32("", DType::F32, vec![1], &[0.0]).unwrap())
            .unwrap_err();
        assert!(err.to_string().contains("non-empty"));
    }

    #[test]
    fn file_io_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.safetensors");
        let store = f32_store(&[("x", vec![2, 2], vec![1.0, 2.0, 3.0, 4.0])]);
        store.write_file(&path).unwrap();
        let back = TensorStore::read_file(&path).unwrap();
        assert_eq!(store, back);
    }

    #[test]
    fn read_missing_file_names_path() {
        let err = TensorStore::read_file("/nonexistent/nope.safetensors").unwrap_err();
        assert!(err.to_string().contains("nope.safetensors"), "{err}");
    }
}
