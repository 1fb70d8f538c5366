//! Minimal named-array container: the single-file binary blob used for all
//! checkpoints and fitted models. Entries are written sorted by name with
//! little-endian payloads, so identical contents always serialize to
//! identical bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TCDBLOB1";

#[derive(Debug, Clone, PartialEq)]
pub enum Array {
    F32 { shape: Vec<usize>, data: Vec<f32> },
    F64 { shape: Vec<usize>, data: Vec<f64> },
}

impl Array {
    pub fn numel(&self) -> usize {
        match self {
            Array::F32 { shape, .. } | Array::F64 { shape, .. } => shape.iter().product(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Array::F32 { shape, .. } | Array::F64 { shape, .. } => shape,
        }
    }

    pub fn as_f32(&self) -> Result<&[f32]> {
        match self {
            Array::F32 { data, .. } => Ok(data),
            Array::F64 { .. } => Err(Error::invalid_state("array holds f64, expected f32")),
        }
    }

    pub fn as_f64(&self) -> Result<&[f64]> {
        match self {
            Array::F64 { data, .. } => Ok(data),
            Array::F32 { .. } => Err(Error::invalid_state("array holds f32, expected f64")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Blob {
    entries: BTreeMap<String, Array>,
}

impl Blob {
    pub fn new() -> Self {
        Blob::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, array: Array) {
        self.entries.insert(name.into(), array);
    }

    pub fn insert_f32(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        self.insert(name, Array::F32 { shape, data });
    }

    pub fn insert_f64(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        self.insert(name, Array::F64 { shape, data });
    }

    pub fn get(&self, name: &str) -> Result<&Array> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::invalid_state(format!("blob entry {name:?} missing")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for (name, array) in &self.entries {
            let name_bytes = name.as_bytes();
            w.write_all(&(name_bytes.len() as u32).to_le_bytes())?;
            w.write_all(name_bytes)?;
            let (tag, shape): (u8, &[usize]) = match array {
                Array::F32 { shape, .. } => (0, shape),
                Array::F64 { shape, .. } => (1, shape),
            };
            w.write_all(&[tag])?;
            w.write_all(&(shape.len() as u32).to_le_bytes())?;
            for &d in shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            match array {
                Array::F32 { data, .. } => {
                    for v in data {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
                Array::F64 { data, .. } => {
                    for v in data {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> std::io::Result<Self> {
        fn bad(msg: &str) -> std::io::Error {
            std::io::Error::new(std::io::ErrorKind::InvalidData, msg)
        }
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a blob file"));
        }
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let count = u64::from_le_bytes(buf8) as usize;
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let mut buf4 = [0u8; 4];
            r.read_exact(&mut buf4)?;
            let name_len = u32::from_le_bytes(buf4) as usize;
            let mut name_bytes = vec![0u8; name_len];
            r.read_exact(&mut name_bytes)?;
            let name = String::from_utf8(name_bytes).map_err(|_| bad("bad entry name"))?;
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag)?;
            r.read_exact(&mut buf4)?;
            let rank = u32::from_le_bytes(buf4) as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                r.read_exact(&mut buf8)?;
                shape.push(u64::from_le_bytes(buf8) as usize);
            }
            let numel: usize = shape.iter().product();
            let array = match tag[0] {
                0 => {
                    let mut data = vec![0f32; numel];
                    let mut b = [0u8; 4];
                    for v in &mut data {
                        r.read_exact(&mut b)?;
                        *v = f32::from_le_bytes(b);
                    }
                    Array::F32 { shape, data }
                }
                1 => {
                    let mut data = vec![0f64; numel];
                    let mut b = [0u8; 8];
                    for v in &mut data {
                        r.read_exact(&mut b)?;
                        *v = f64::from_le_bytes(b);
                    }
                    Array::F64 { shape, data }
                }
                _ => return Err(bad("unknown dtype tag")),
            };
            entries.insert(name, array);
        }
        Ok(Blob { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        self.write_to(&mut bytes).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(bytes.as_slice()).map_err(|e| Error::io(path, e))
    }
}
