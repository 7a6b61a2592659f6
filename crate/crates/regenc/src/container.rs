//! Binary model container: a JSON header describing named tensors followed
//! by their raw little-endian float64 payloads. Round-trips are bit-exact.
//!
//! Layout:
//!
//! ```text
//! bytes 0..4    magic "RGNC"
//! bytes 4..8    format version, u32 LE (currently 1)
//! bytes 8..12   header length H, u32 LE
//! bytes 12..12+H  UTF-8 JSON header:
//!     { "kind": "...", "meta": {...},
//!       "tensors": [ { "name": "...", "shape": [..] }, ... ] }
//! then, for each tensor in header order, shape-product f64 values, LE.
//! ```
//!
//! `kind` is `"mlp"`, `"codec"`, or `"bundle"`; `meta` carries the
//! architecture (e.g. the MLP spec) needed to rebuild the model.

use crate::codec::TargetCodec;
use crate::error::{Error, Result};
use crate::nn::{MlpModel, MlpSpec};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"RGNC";
pub const VERSION: u32 = 1;

/// Parser guards against hostile input: headers above this size are
/// rejected before allocation.
const MAX_HEADER_BYTES: u32 = 1 << 20;
/// Upper bound on elements per tensor (1 GiB of f64).
const MAX_TENSOR_ELEMS: u64 = 1 << 27;

#[derive(Serialize, Deserialize)]
struct HeaderTensor {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: serde_json::Value,
    tensors: Vec<HeaderTensor>,
}

/// In-memory form of a container file.
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<(String, Tensor)>,
}

pub fn write_container<W: Write>(mut w: W, c: &Container) -> Result<()> {
    let header = Header {
        kind: c.kind.clone(),
        meta: c.meta.clone(),
        tensors: c
            .tensors
            .iter()
            .map(|(name, t)| HeaderTensor { name: name.clone(), shape: t.shape().to_vec() })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Container(format!("header encode: {e}")))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for (_, t) in &c.tensors {
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_container<R: Read>(mut r: R) -> Result<Container> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| Error::Container(format!("truncated magic: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::Container(format!("bad magic {magic:?}")));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|e| Error::Container(format!("truncated version: {e}")))?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    r.read_exact(&mut word).map_err(|e| Error::Container(format!("truncated header length: {e}")))?;
    let header_len = u32::from_le_bytes(word);
    if header_len == 0 || header_len > MAX_HEADER_BYTES {
        return Err(Error::Container(format!("header length {header_len} out of bounds")));
    }
    let mut header_bytes = vec![0u8; header_len as usize];
    r.read_exact(&mut header_bytes)
        .map_err(|e| Error::Container(format!("truncated header: {e}")))?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Container(format!("header decode: {e}")))?;

    let mut tensors = Vec::with_capacity(header.tensors.len());
    for ht in header.tensors {
        if ht.shape.is_empty() || ht.shape.contains(&0) {
            return Err(Error::Container(format!(
                "tensor {:?} has invalid shape {:?}",
                ht.name, ht.shape
            )));
        }
        let mut numel: u64 = 1;
        for &d in &ht.shape {
            numel = numel
                .checked_mul(d as u64)
                .filter(|&n| n <= MAX_TENSOR_ELEMS)
                .ok_or_else(|| {
                    Error::Container(format!("tensor {:?} shape overflows", ht.name))
                })?;
        }
        let mut data = vec![0u8; (numel as usize) * 8];
        r.read_exact(&mut data).map_err(|e| {
            Error::Container(format!("truncated payload for {:?}: {e}", ht.name))
        })?;
        let values: Vec<f64> = data
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect();
        tensors.push((ht.name, Tensor::new(ht.shape, values)?));
    }
    let mut trailer = [0u8; 1];
    if r.read(&mut trailer)? != 0 {
        return Err(Error::Container("trailing bytes after payload".into()));
    }
    Ok(Container { kind: header.kind, meta: header.meta, tensors })
}

fn open_write(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn open_read(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    Ok(std::io::BufReader::new(std::fs::File::open(path)?))
}

fn meta_of<T: Serialize>(value: &T) -> Result<serde_json::Value> {
    serde_json::to_value(value).map_err(|e| Error::Container(format!("meta encode: {e}")))
}

pub fn mlp_to_container(model: &MlpModel) -> Result<Container> {
    Ok(Container {
        kind: "mlp".into(),
        meta: meta_of(&model.spec)?,
        tensors: model
            .param_names()
            .into_iter()
            .zip(model.params.iter().cloned())
            .collect(),
    })
}

pub fn mlp_from_container(c: &Container) -> Result<MlpModel> {
    if c.kind != "mlp" {
        return Err(Error::Container(format!("expected kind \"mlp\", got {:?}", c.kind)));
    }
    let spec: MlpSpec = serde_json::from_value(c.meta.clone())
        .map_err(|e| Error::Container(format!("mlp meta: {e}")))?;
    spec.validate()?;
    let params: Vec<Tensor> = c.tensors.iter().map(|(_, t)| t.clone()).collect();
    let model = MlpModel { spec, params };
    let expect: usize = model.spec.param_count();
    let got: usize = model.params.iter().map(Tensor::numel).sum();
    if expect != got {
        return Err(Error::Container(format!(
            "mlp parameter count {got} does not match spec ({expect})"
        )));
    }
    Ok(model)
}

pub fn save_mlp(path: &Path, model: &MlpModel) -> Result<()> {
    write_container(open_write(path)?, &mlp_to_container(model)?)
}

pub fn load_mlp(path: &Path) -> Result<MlpModel> {
    mlp_from_container(&read_container(open_read(path)?)?)
}

pub fn codec_to_container(codec: &TargetCodec) -> Result<Container> {
    Ok(Container {
        kind: "codec".into(),
        meta: serde_json::json!({ "k": codec.k(), "m": codec.m() }),
        tensors: TargetCodec::param_names()
            .iter()
            .map(|s| s.to_string())
            .zip(codec.params().iter().map(|&t| t.clone()))
            .collect(),
    })
}

pub fn codec_from_container(c: &Container) -> Result<TargetCodec> {
    if c.kind != "codec" {
        return Err(Error::Container(format!("expected kind \"codec\", got {:?}", c.kind)));
    }
    let find = |name: &str| -> Result<Tensor> {
        c.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.clone())
            .ok_or_else(|| Error::Container(format!("missing tensor {name:?}")))
    };
    TargetCodec::new(find("codec.w_lin")?, find("codec.w_bias")?, find("codec.mu")?)
}

pub fn save_codec(path: &Path, codec: &TargetCodec) -> Result<()> {
    write_container(open_write(path)?, &codec_to_container(codec)?)
}

pub fn load_codec(path: &Path) -> Result<TargetCodec> {
    codec_from_container(&read_container(open_read(path)?)?)
}

pub fn bundle_to_container(bundle: &crate::pipeline::TrainedBundle) -> Result<Container> {
    let mut tensors: Vec<(String, Tensor)> = bundle
        .mlp
        .param_names()
        .into_iter()
        .zip(bundle.mlp.params.iter().cloned())
        .collect();
    match (&bundle.codec, &bundle.mu) {
        (Some(codec), _) => {
            for (name, t) in TargetCodec::param_names().iter().zip(codec.params()) {
                tensors.push((name.to_string(), t.clone()));
            }
        }
        (None, Some(mu)) => tensors.push(("bundle.mu".into(), mu.clone())),
        (None, None) => {}
    }
    Ok(Container {
        kind: "bundle".into(),
        meta: serde_json::json!({
            "method": meta_of(&bundle.method)?,
            "mlp_spec": meta_of(&bundle.mlp.spec)?,
        }),
        tensors,
    })
}

pub fn bundle_from_container(c: &Container) -> Result<crate::pipeline::TrainedBundle> {
    if c.kind != "bundle" {
        return Err(Error::Container(format!("expected kind \"bundle\", got {:?}", c.kind)));
    }
    let method: crate::pipeline::MethodKind =
        serde_json::from_value(c.meta["method"].clone())
            .map_err(|e| Error::Container(format!("bundle method: {e}")))?;
    let spec: MlpSpec = serde_json::from_value(c.meta["mlp_spec"].clone())
        .map_err(|e| Error::Container(format!("bundle mlp spec: {e}")))?;
    spec.validate()?;
    let mlp_params: Vec<Tensor> = c
        .tensors
        .iter()
        .filter(|(n, _)| n.starts_with("mlp."))
        .map(|(_, t)| t.clone())
        .collect();
    let mlp = MlpModel { spec, params: mlp_params };
    if mlp.params.iter().map(Tensor::numel).sum::<usize>() != mlp.spec.param_count() {
        return Err(Error::Container("bundle mlp parameter count mismatch".into()));
    }
    let find = |name: &str| -> Option<Tensor> {
        c.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t.clone())
    };
    let codec = match (find("codec.w_lin"), find("codec.w_bias"), find("codec.mu")) {
        (Some(w_lin), Some(w_bias), Some(mu)) => Some(TargetCodec::new(w_lin, w_bias, mu)?),
        _ => None,
    };
    let mu = codec.as_ref().map(|c| c.mu.clone()).or_else(|| find("bundle.mu"));
    Ok(crate::pipeline::TrainedBundle { method, mlp, mu, codec })
}

pub fn save_bundle(path: &Path, bundle: &crate::pipeline::TrainedBundle) -> Result<()> {
    write_container(open_write(path)?, &bundle_to_container(bundle)?)
}

pub fn load_bundle(path: &Path) -> Result<crate::pipeline::TrainedBundle> {
    bundle_from_container(&read_container(open_read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn mlp_roundtrip_is_bit_exact() {
        let spec = MlpSpec::new(3, vec![5, 4], 2);
        let model = MlpModel::init(&spec, &mut Rng::from_seed(99)).unwrap();
        let mut buf = Vec::new();
        write_container(&mut buf, &mlp_to_container(&model).unwrap()).unwrap();
        let back = mlp_from_container(&read_container(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back.spec, model.spec);
        for (a, b) in back.params.iter().zip(&model.params) {
            assert_eq!(a.shape(), b.shape());
            let bits_a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn codec_roundtrip() {
        let cfg = crate::codec::CodecInitConfig::new(7, 1);
        let codec = crate::codec::init_uniform_1d(&cfg).unwrap();
        let mut buf = Vec::new();
        write_container(&mut buf, &codec_to_container(&codec).unwrap()).unwrap();
        let back = codec_from_container(&read_container(buf.as_slice()).unwrap()).unwrap();
        assert_eq!(back, codec);
    }

    #[test]
    fn reader_rejects_malformed_input() {
        assert!(read_container(&b"XXXX"[..]).is_err());
        assert!(read_container(&b"RGNC"[..]).is_err());
        // huge header length
        let mut bad = Vec::new();
        bad.extend_from_slice(MAGIC);
        bad.extend_from_slice(&VERSION.to_le_bytes());
        bad.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(read_container(bad.as_slice()).is_err());
        // header JSON that is not a header
        let mut bad = Vec::new();
        bad.extend_from_slice(MAGIC);
        bad.extend_from_slice(&VERSION.to_le_bytes());
        bad.extend_from_slice(&2u32.to_le_bytes());
        bad.extend_from_slice(b"{}");
        assert!(read_container(bad.as_slice()).is_err());
        // shape overflow
        let json = br#"{"kind":"mlp","meta":null,"tensors":[{"name":"t","shape":[4294967295,4294967295]}]}"#;
        let mut bad = Vec::new();
        bad.extend_from_slice(MAGIC);
        bad.extend_from_slice(&VERSION.to_le_bytes());
        bad.extend_from_slice(&(json.len() as u32).to_le_bytes());
        bad.extend_from_slice(json);
        assert!(read_container(bad.as_slice()).is_err());
    }

    #[test]
    fn reader_rejects_truncation_and_trailer() {
        let spec = MlpSpec::new(2, vec![3], 1);
        let model = MlpModel::init(&spec, &mut Rng::from_seed(1)).unwrap();
        let mut buf = Vec::new();
        write_container(&mut buf, &mlp_to_container(&model).unwrap()).unwrap();

        let truncated = &buf[..buf.len() - 3];
        assert!(read_container(truncated).is_err());

        let mut extended = buf.clone();
        extended.push(0);
        assert!(read_container(extended.as_slice()).is_err());
    }
}
