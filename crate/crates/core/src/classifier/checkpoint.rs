//! `RGNN` checkpoint files.
//!
//! ```text
//! "RGNN" u16 version
//! u32 tensor count, then per tensor:
//!     u16 name length, name, u8 ndim, u32 dims[ndim], u64 offset, u64 length
//! u64 payload bytes, f32 payload
//! 5 × (f32 scale, f32 offset) feature normalization
//! u32 metadata bytes, metadata as key=value lines
//! ```
//!
//! Offsets and lengths count f32 elements and must tile the payload with no
//! gaps. Adam moments, when present, are stored as extra tensors named
//! `adam.m.<tensor>` and `adam.v.<tensor>`.

use std::collections::BTreeMap;
use std::path::Path;

use super::network::{Network, NetworkSpec};
use super::train::AdamState;
use crate::error::{Error, Result};
use crate::feature_encoder::{Normalization, CHANNELS};

const MAGIC: &[u8; 4] = b"RGNN";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub normalization: Normalization,
    pub metadata: BTreeMap<String, String>,
    pub optimizer: Option<AdamState>,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn spec_metadata(spec: &NetworkSpec) -> Vec<(String, String)> {
    let (il, k, ch) = spec.input;
    vec![
        ("input_shape".into(), format!("{il}x{k}x{ch}")),
        ("conv_channels".into(), join(&spec.conv_channels)),
        ("pool_after".into(), join(&spec.pool_after)),
        ("hidden".into(), join(&spec.hidden)),
        ("classes".into(), spec.classes.to_string()),
        ("keep_prob".into(), spec.keep_prob.to_string()),
        (
            "downsampling".into(),
            "3x3 stride 1 same padding; 2x2 max pool (ceil) after conv2 and conv4".into(),
        ),
    ]
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| Error::Format(format!("bad list entry {x:?}"))))
        .collect()
}

fn spec_from_metadata(meta: &BTreeMap<String, String>) -> Result<NetworkSpec> {
    let get = |k: &str| {
        meta.get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("checkpoint metadata lacks {k}")))
    };
    let dims = parse_list(&get("input_shape")?.replace('x', ","))?;
    let [il, k, ch] = dims[..] else {
        return Err(Error::Format(format!("input_shape {:?}", get("input_shape")?)));
    };
    let spec = NetworkSpec {
        input: (il, k, ch),
        conv_channels: parse_list(get("conv_channels")?)?,
        pool_after: parse_list(get("pool_after")?)?,
        hidden: parse_list(get("hidden")?)?,
        classes: get("classes")?
            .parse()
            .map_err(|_| Error::Format("bad classes".into()))?,
        keep_prob: get("keep_prob")?
            .parse()
            .map_err(|_| Error::Format("bad keep_prob".into()))?,
    };
    spec.validate().map_err(|e| Error::Format(e.to_string()))?;
    Ok(spec)
}

impl Checkpoint {
    pub fn new(network: Network<f32>, normalization: Normalization) -> Self {
        Self {
            network,
            normalization,
            metadata: BTreeMap::new(),
            optimizer: None,
        }
    }

    fn entries(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let mut out: Vec<(String, Vec<usize>, &[f32])> = self
            .network
            .tensor_shapes()
            .into_iter()
            .zip(self.network.tensors())
            .map(|((n, s), t)| (n, s, t))
            .collect();
        if let Some(adam) = &self.optimizer {
            let shapes = self.network.tensor_shapes();
            for (prefix, moments) in [("adam.m.", &adam.m), ("adam.v.", &adam.v)] {
                for ((n, s), t) in shapes.iter().zip(moments) {
                    out.push((format!("{prefix}{n}"), s.clone(), t.as_slice()));
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let entries = self.entries();
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.extend_from_slice(&VERSION.to_le_bytes());
        b.extend_from_slice(&(entries.len() as u32).to_le_bytes());
        let mut offset = 0u64;
        for (name, shape, t) in &entries {
            b.extend_from_slice(&(name.len() as u16).to_le_bytes());
            b.extend_from_slice(name.as_bytes());
            b.push(shape.len() as u8);
            for d in shape {
                b.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            b.extend_from_slice(&offset.to_le_bytes());
            b.extend_from_slice(&(t.len() as u64).to_le_bytes());
            offset += t.len() as u64;
        }
        b.extend_from_slice(&(offset * 4).to_le_bytes());
        for (_, _, t) in &entries {
            for v in t.iter() {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        for c in 0..CHANNELS {
            b.extend_from_slice(&self.normalization.scale[c].to_le_bytes());
            b.extend_from_slice(&self.normalization.offset[c].to_le_bytes());
        }
        let mut meta: BTreeMap<String, String> = self.metadata.clone();
        meta.extend(spec_metadata(&self.network.spec));
        if let Some(adam) = &self.optimizer {
            meta.insert("adam_step".into(), adam.step.to_string());
        }
        let text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        b.extend_from_slice(&(text.len() as u32).to_le_bytes());
        b.extend_from_slice(text.as_bytes());
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { b: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("not an RGNN checkpoint".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32()? as usize;
        let mut manifest = Vec::with_capacity(count.min(1024));
        let mut expect_offset = 0u64;
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let ndim = r.u8()? as usize;
            let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let offset = r.u64()?;
            let n = r.u64()?;
            if offset != expect_offset {
                return Err(Error::Format(format!("{name} at offset {offset}, expected {expect_offset}")));
            }
            if shape.iter().product::<usize>() as u64 != n {
                return Err(Error::Format(format!("{name}: shape {shape:?} vs length {n}")));
            }
            expect_offset += n;
            manifest.push((name, shape, offset as usize, n as usize));
        }
        let payload_bytes = r.u64()?;
        if payload_bytes != expect_offset * 4 {
            return Err(Error::Format(format!(
                "payload is {payload_bytes} bytes, manifest covers {}",
                expect_offset * 4
            )));
        }
        let payload: Vec<f32> = r
            .take(payload_bytes as usize)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut normalization = Normalization::identity();
        for c in 0..CHANNELS {
            normalization.scale[c] = r.f32()?;
            normalization.offset[c] = r.f32()?;
        }
        let meta_len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(meta_len)?)
            .map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let mut metadata = BTreeMap::new();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("metadata line {line:?}")))?;
            metadata.insert(k.to_string(), v.to_string());
        }

        let spec = spec_from_metadata(&metadata)?;
        let mut network = Network::<f32>::zeros(spec)?;
        let shapes = network.tensor_shapes();
        let find = |name: &str, shape: &[usize]| -> Result<Option<Vec<f32>>> {
            match manifest.iter().find(|(n, ..)| n == name) {
                None => Ok(None),
                Some((_, s, off, n)) if s == shape => Ok(Some(payload[*off..off + n].to_vec())),
                Some((_, s, ..)) => Err(Error::Format(format!("{name} has shape {s:?}, want {shape:?}"))),
            }
        };
        for ((name, shape), t) in shapes.iter().zip(network.tensors_mut()) {
            *t = find(name, shape)?.ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
        }
        let mut optimizer = None;
        if let Some(step) = metadata.get("adam_step") {
            let step = step.parse().map_err(|_| Error::Format("bad adam_step".into()))?;
            let mut m = Vec::new();
            let mut v = Vec::new();
            for (name, shape) in &shapes {
                m.push(find(&format!("adam.m.{name}"), shape)?.ok_or_else(|| Error::Format(format!("missing adam.m.{name}")))?);
                v.push(find(&format!("adam.v.{name}"), shape)?.ok_or_else(|| Error::Format(format!("missing adam.v.{name}")))?);
            }
            optimizer = Some(AdamState { m, v, step });
        }
        let expected = shapes.len() * if optimizer.is_some() { 3 } else { 1 };
        if manifest.len() != expected {
            return Err(Error::Format(format!("{} tensors, expected {expected}", manifest.len())));
        }
        for (k, _) in spec_metadata(&network.spec) {
            metadata.remove(&k);
        }
        metadata.remove("adam_step");
        Ok(Self {
            network,
            normalization,
            metadata,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.b.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated checkpoint: need {n} bytes at {}, have {}",
                self.pos,
                self.b.len() - self.pos
            )));
        }
        let s = &self.b[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
