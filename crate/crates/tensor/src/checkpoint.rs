//! Flat binary checkpoint archive.
//!
//! ```text
//! magic      8 bytes   "TRPCKPT1"
//! manifest   u32 len + UTF-8 text (the model configuration)
//! count      u32
//! entry*     u32 name len + UTF-8 name
//!            u32 rank + rank * u32 extents
//!            numel * f32
//! ```
//! All integers and floats are little-endian. Trailing bytes are rejected.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, TensorError};
use crate::param::ParamStore;
use crate::real::Real;

pub const MAGIC: &[u8; 8] = b"TRPCKPT1";
const MAX_RANK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: String,
    pub entries: Vec<Entry>,
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| TensorError::Checkpoint(format!("{v} does not fit in u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(TensorError::Checkpoint(format!(
                "truncated {what} at byte {} (need {n}, have {})",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec())
            .map_err(|_| TensorError::Checkpoint(format!("{what} is not UTF-8")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

impl Checkpoint {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        put_u32(&mut buf, self.manifest.len())?;
        buf.extend_from_slice(self.manifest.as_bytes());
        put_u32(&mut buf, self.entries.len())?;
        for e in &self.entries {
            if e.shape.iter().product::<usize>() != e.values.len() {
                return Err(TensorError::Checkpoint(format!(
                    "entry `{}` shape {:?} does not match its values",
                    e.name, e.shape
                )));
            }
            put_u32(&mut buf, e.name.len())?;
            buf.extend_from_slice(e.name.as_bytes());
            put_u32(&mut buf, e.shape.len())?;
            for &d in &e.shape {
                put_u32(&mut buf, d)?;
            }
            for v in &e.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(buf)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8, "magic")? != MAGIC {
            return Err(TensorError::Checkpoint("bad magic".into()));
        }
        let manifest = r.string("manifest")?;
        let count = r.u32("entry count")?;
        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for _ in 0..count {
            let name = r.string("entry name")?;
            if !seen.insert(name.clone()) {
                return Err(TensorError::Checkpoint(format!("duplicate entry `{name}`")));
            }
            let rank = r.u32("rank")?;
            if rank == 0 || rank > MAX_RANK {
                return Err(TensorError::Checkpoint(format!(
                    "entry `{name}` has rank {rank}"
                )));
            }
            let mut shape = Vec::with_capacity(rank);
            let mut numel: usize = 1;
            for _ in 0..rank {
                let d = r.u32("extent")?;
                if d == 0 {
                    return Err(TensorError::Checkpoint(format!(
                        "entry `{name}` has a zero extent"
                    )));
                }
                numel = numel
                    .checked_mul(d)
                    .filter(|&n| n <= r.remaining() / 4)
                    .ok_or_else(|| {
                        TensorError::Checkpoint(format!("entry `{name}` is larger than the file"))
                    })?;
                shape.push(d);
            }
            let raw = r.take(numel * 4, "values")?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            entries.push(Entry {
                name,
                shape,
                values,
            });
        }
        if r.remaining() != 0 {
            return Err(TensorError::Checkpoint(format!(
                "{} trailing bytes",
                r.remaining()
            )));
        }
        Ok(Checkpoint { manifest, entries })
    }

    /// Writes to a sibling temp file and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> std::io::Result<()> {
        let bytes = self.encode().map_err(std::io::Error::other)?;
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.tmp",
            path.file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("checkpoint")
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)
    }

    pub fn read(path: &Path) -> std::io::Result<std::result::Result<Self, TensorError>> {
        let bytes = fs::read(path)?;
        Ok(Self::decode(&bytes))
    }

    pub fn entry(&self, name: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

impl<T: Real> ParamStore<T> {
    /// Parameters then buffers, in registration order.
    pub fn to_checkpoint(&self, manifest: &str) -> Checkpoint {
        let mut entries: Vec<Entry> = self
            .params()
            .iter()
            .map(|p| Entry {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
                values: p.tensor.data().iter().map(|v| v.as_f64() as f32).collect(),
            })
            .collect();
        entries.extend(self.buffers().iter().map(|b| Entry {
            name: b.name.clone(),
            shape: b.shape.clone(),
            values: b.values.iter().map(|v| v.as_f64() as f32).collect(),
        }));
        Checkpoint {
            manifest: manifest.to_owned(),
            entries,
        }
    }

    /// Loads values by name. Every parameter and buffer must be present
    /// with a matching shape; extra entries are an error.
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let expected = self.params().len() + self.buffers().len();
        if ckpt.entries.len() != expected {
            return Err(TensorError::Checkpoint(format!(
                "checkpoint has {} entries, model expects {expected}",
                ckpt.entries.len()
            )));
        }
        for e in &ckpt.entries {
            let cast = || {
                e.values
                    .iter()
                    .map(|&v| T::cast(v as f64))
                    .collect::<Vec<T>>()
            };
            if let Some(id) = self.find(&e.name) {
                if self.get(id).shape() != e.shape.as_slice() {
                    return Err(TensorError::Checkpoint(format!(
                        "`{}` has shape {:?}, model expects {:?}",
                        e.name,
                        e.shape,
                        self.get(id).shape()
                    )));
                }
                self.set_values(id, cast())?;
            } else if let Some(id) = self.find_buffer(&e.name) {
                if self
                    .buffers()
                    .iter()
                    .find(|b| b.name == e.name)
                    .map(|b| &b.shape)
                    != Some(&e.shape)
                {
                    return Err(TensorError::Checkpoint(format!(
                        "buffer `{}` shape mismatch",
                        e.name
                    )));
                }
                self.set_buffer(id, cast());
            } else {
                return Err(TensorError::Checkpoint(format!(
                    "unknown entry `{}`",
                    e.name
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Checkpoint {
        Checkpoint {
            manifest: "clip_size = 6\n".into(),
            entries: vec![
                Entry {
                    name: "a.weight".into(),
                    shape: vec![2, 3],
                    values: vec![1.0, -2.0, 3.5, 0.0, 1e-8, -0.0],
                },
                Entry {
                    name: "a.bias".into(),
                    shape: vec![1],
                    values: vec![42.0],
                },
            ],
        }
    }

    #[test]
    fn layout_is_little_endian() {
        let bytes = sample().encode().unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(&bytes[8..12], &14u32.to_le_bytes());
        let tail = &bytes[bytes.len() - 4..];
        assert_eq!(tail, &42.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_truncation_and_trailing_bytes() {
        let bytes = sample().encode().unwrap();
        for cut in [0, 7, 12, bytes.len() - 1] {
            assert!(Checkpoint::decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(Checkpoint::decode(&longer).is_err());
    }

    #[test]
    fn huge_declared_extent_does_not_allocate() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.push(b'x');
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        assert!(Checkpoint::decode(&bytes).is_err());
    }

    #[test]
    fn atomic_write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/model.ckpt");
        sample().write_atomic(&path).unwrap();
        assert_eq!(Checkpoint::read(&path).unwrap().unwrap(), sample());
    }

    #[test]
    fn store_round_trip_checks_shapes() {
        let mut store = ParamStore::<f32>::new();
        store.add_param("w", vec![1.0, 2.0], &[2]).unwrap();
        store.add_buffer("bn.running_var", vec![1.0], &[1]).unwrap();
        let ck = store.to_checkpoint("m");
        let mut other = ParamStore::<f32>::new();
        other.add_param("w", vec![0.0, 0.0], &[2]).unwrap();
        other.add_buffer("bn.running_var", vec![0.0], &[1]).unwrap();
        other.load_checkpoint(&ck).unwrap();
        assert_eq!(other.get(other.find("w").unwrap()).data(), &[1.0, 2.0]);

        let mut wrong = ParamStore::<f32>::new();
        wrong.add_param("w", vec![0.0; 3], &[3]).unwrap();
        wrong.add_buffer("bn.running_var", vec![0.0], &[1]).unwrap();
        assert!(wrong.load_checkpoint(&ck).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_identity(
            manifest in "[ -~]{0,40}",
            raw in proptest::collection::vec((1usize..4, 1usize..4, proptest::collection::vec(any::<f32>(), 16)), 0..4),
        ) {
            let entries: Vec<Entry> = raw
                .into_iter()
                .enumerate()
                .map(|(i, (a, b, vals))| Entry { name: format!("p{i}"), shape: vec![a, b], values: vals[..a * b].to_vec() })
                .collect();
            let ck = Checkpoint { manifest, entries };
            let back = Checkpoint::decode(&ck.encode().unwrap()).unwrap();
            prop_assert_eq!(back.manifest, ck.manifest);
            for (x, y) in back.entries.iter().zip(&ck.entries) {
                prop_assert_eq!(&x.shape, &y.shape);
                prop_assert!(x.values.iter().zip(&y.values).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
        }

        #[test]
        fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let mut with_magic = MAGIC.to_vec();
            with_magic.extend_from_slice(&bytes);
            let _ = Checkpoint::decode(&bytes);
            let _ = Checkpoint::decode(&with_magic);
        }
    }
}
