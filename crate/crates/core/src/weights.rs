//! Named parameter tensors and the `UWT1` weight file format.
//!
//! File layout (all integers little-endian `u32`):
//!
//! ```text
//! "UWT1"
//! record_count
//! record_count x { name_len, name (UTF-8), ndims, dims[ndims] }
//! payload: each tensor's f32 LE values, in record order
//! ```
//!
//! Seeded initialization draws every tensor from its own stream of
//! [`CounterRng`], keyed by the FNV-1a hash of the tensor name.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::CounterRng;

pub const MAGIC: &[u8; 4] = b"UWT1";

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::invalid(
                "tensor",
                format!("shape {shape:?} needs {n} values, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// How a declared parameter is initialized.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    Uniform {
        fan_in: usize,
    },
    Ones,
    Zeros,
    /// Literal values (configuration records).
    Values(Vec<f32>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn uniform(name: impl Into<String>, shape: Vec<usize>, fan_in: usize) -> Self {
        ParamSpec {
            name: name.into(),
            shape,
            init: Init::Uniform { fan_in },
        }
    }

    pub fn ones(name: impl Into<String>, shape: Vec<usize>) -> Self {
        ParamSpec {
            name: name.into(),
            shape,
            init: Init::Ones,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        ParamSpec {
            name: name.into(),
            shape,
            init: Init::Zeros,
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Ordered collection of named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightStore {
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Materializes `specs` deterministically from `seed`.
    pub fn from_specs(specs: &[ParamSpec], seed: u64) -> Result<Self> {
        let mut store = WeightStore::new();
        for spec in specs {
            let n: usize = spec.shape.iter().product();
            let data = match &spec.init {
                Init::Uniform { fan_in } => {
                    let bound = 1.0 / (*fan_in.max(&1) as f64).sqrt();
                    let rng = CounterRng::new(seed, fnv1a(&spec.name));
                    (0..n)
                        .map(|i| rng.uniform_range(i as u64, -bound, bound) as f32)
                        .collect()
                }
                Init::Ones => vec![1.0; n],
                Init::Zeros => vec![0.0; n],
                Init::Values(v) => v.clone(),
            };
            store.insert(spec.name.clone(), Tensor::new(spec.shape.clone(), data)?)?;
        }
        Ok(store)
    }

    /// Adds or replaces a tensor. Replacements keep their position.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        if let Some(index) = tensor.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let name = name.into();
        match self.index.get(&name) {
            Some(&i) => self.entries[i].1 = tensor,
            None => {
                self.index.insert(name.clone(), self.entries.len());
                self.entries.push((name, tensor));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].1)
            .ok_or_else(|| Error::MissingWeight(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.entries[i].1),
            None => Err(Error::MissingWeight(name.to_string())),
        }
    }

    /// Fetches a tensor and checks its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<&Tensor> {
        let t = self.get(name)?;
        if t.shape != shape {
            return Err(Error::Config(format!(
                "weight `{name}` has shape {:?}, expected {shape:?}",
                t.shape
            )));
        }
        Ok(t)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Zeroes every tensor whose name satisfies `pred`.
    pub fn zero_where(&mut self, pred: impl Fn(&str) -> bool) {
        for (name, t) in &mut self.entries {
            if pred(name) {
                t.data.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    /// Appends all tensors of `other`, replacing same-named entries.
    pub fn merge(&mut self, other: WeightStore) -> Result<()> {
        for (n, t) in other.entries {
            self.insert(n, t)?;
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let u32_of = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::invalid("weights", format!("{what} exceeds u32")))
        };
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&u32_of(self.entries.len(), "record count")?.to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&u32_of(name.len(), "name length")?.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&u32_of(t.shape.len(), "rank")?.to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&u32_of(d, "dimension")?.to_le_bytes());
            }
        }
        for (_, t) in &self.entries {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::MalformedFile("bad magic, expected \"UWT1\"".into()));
        }
        let count = cur.u32()? as usize;
        let mut manifest = Vec::new();
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let name = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| Error::MalformedFile("tensor name is not UTF-8".into()))?
                .to_string();
            let rank = cur.u32()? as usize;
            let shape = (0..rank)
                .map(|_| cur.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            manifest.push((name, shape));
        }
        let mut store = WeightStore::new();
        for (name, shape) in manifest {
            let n: usize = shape.iter().product();
            let raw = cur.take(
                n.checked_mul(4)
                    .ok_or_else(|| Error::MalformedFile(format!("tensor `{name}` is too large")))?,
            )?;
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedFile(format!("tensor `{name}` has non-finite values")));
            }
            if store.contains(&name) {
                return Err(Error::MalformedFile(format!("duplicate tensor `{name}`")));
            }
            store.insert(name, Tensor { shape, data })?;
        }
        if cur.pos != bytes.len() {
            return Err(Error::MalformedFile(format!(
                "{} trailing bytes after payload",
                bytes.len() - cur.pos
            )));
        }
        Ok(store)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode()?)?;
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::MalformedFile(format!(
                    "truncated: needed {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<ParamSpec> {
        vec![
            ParamSpec::uniform("a.weight", vec![3, 4], 4),
            ParamSpec::ones("a.gamma", vec![4]),
            ParamSpec::zeros("a.beta", vec![4]),
        ]
    }

    #[test]
    fn seeded_init_is_deterministic_and_bounded() {
        let a = WeightStore::from_specs(&specs(), 42).unwrap();
        let b = WeightStore::from_specs(&specs(), 42).unwrap();
        let c = WeightStore::from_specs(&specs(), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.get("a.weight").unwrap(), c.get("a.weight").unwrap());
        assert!(a.get("a.weight").unwrap().data.iter().all(|v| v.abs() <= 0.5));
        assert_eq!(a.get("a.gamma").unwrap().data, vec![1.0; 4]);
    }

    #[test]
    fn byte_layout() {
        let mut s = WeightStore::new();
        s.insert("w", Tensor::new(vec![2], vec![1.0, 2.0]).unwrap()).unwrap();
        let bytes = s.encode().unwrap();
        let mut expected = b"UWT1".to_vec();
        for v in [1u32, 1] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        expected.push(b'w');
        for v in [1u32, 2] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&2.0f32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn roundtrip_and_rejections() {
        let a = WeightStore::from_specs(&specs(), 1).unwrap();
        let bytes = a.encode().unwrap();
        let b = WeightStore::decode(&bytes).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.names().collect::<Vec<_>>(), vec!["a.weight", "a.gamma", "a.beta"]);

        assert!(WeightStore::decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(WeightStore::decode(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(WeightStore::decode(&bad).is_err());
    }

    #[test]
    fn expect_checks_shape() {
        let a = WeightStore::from_specs(&specs(), 1).unwrap();
        assert!(a.expect("a.weight", &[3, 4]).is_ok());
        assert!(a.expect("a.weight", &[4, 3]).is_err());
        assert!(matches!(a.get("nope"), Err(Error::MissingWeight(_))));
    }
}
