//! On-disk cache of squared-distance cost matrices.
//!
//! Layout (little endian): 8-byte magic, `u32` format version, `u32` kind
//! tag, `u32` axis count, one `u64` per axis, `u64` entry count, then the
//! `f64` entries row-major.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DCCOSTM\n";
pub const COST_CACHE_VERSION: u32 = 1;

/// Which support a cost matrix lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostKind {
    Circle,
    Torus2,
    SphereZonal,
    /// Full longitude × colatitude grid of the sphere.
    SphereLift,
}

impl CostKind {
    fn tag(self) -> u32 {
        match self {
            CostKind::Circle => 0,
            CostKind::Torus2 => 1,
            CostKind::SphereZonal => 2,
            CostKind::SphereLift => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            CostKind::Circle => "circle",
            CostKind::Torus2 => "torus2",
            CostKind::SphereZonal => "sphere_zonal",
            CostKind::SphereLift => "sphere_lift",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CostKey {
    pub kind: CostKind,
    pub dims: Vec<usize>,
}

impl CostKey {
    pub fn nodes(&self) -> usize {
        self.dims.iter().product()
    }

    fn file_name(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        format!("cost-{}-{}.bin", self.kind.name(), dims.join("x"))
    }
}

#[derive(Debug, Clone)]
pub struct CostCache {
    dir: PathBuf,
}

impl CostCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CostCache { dir: dir.into() }
    }

    pub fn path_for(&self, key: &CostKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    /// Reads a cached matrix. A missing file or an older format version
    /// yields `None`; a damaged file is a parse error.
    pub fn load(&self, key: &CostKey) -> Result<Option<Vec<f64>>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        decode(&path, &bytes, key)
    }

    pub fn store(&self, key: &CostKey, values: &[f64]) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(key);
        let tmp = path.with_extension("bin.tmp");
        let mut buf = Vec::with_capacity(40 + 8 * values.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&COST_CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(&key.kind.tag().to_le_bytes());
        buf.extend_from_slice(&(key.dims.len() as u32).to_le_bytes());
        for d in &key.dims {
            buf.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        file.write_all(&buf).map_err(|e| Error::io(&tmp, e))?;
        file.sync_all().map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    /// Loads the matrix or builds and stores it.
    pub fn get_or_build(&self, key: &CostKey, build: impl FnOnce() -> Vec<f64>) -> Result<Vec<f64>> {
        if let Some(v) = self.load(key)? {
            return Ok(v);
        }
        let v = build();
        self.store(key, &v)?;
        Ok(v)
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse(self.path, "truncated cost cache"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn decode(path: &Path, bytes: &[u8], key: &CostKey) -> Result<Option<Vec<f64>>> {
    let mut r = Reader {
        path,
        bytes,
        pos: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(Error::parse(path, "not a cost cache file"));
    }
    if r.u32()? != COST_CACHE_VERSION {
        return Ok(None);
    }
    if r.u32()? != key.kind.tag() {
        return Err(Error::parse(path, "cost cache kind does not match its name"));
    }
    let ndims = r.u32()? as usize;
    let mut dims = Vec::with_capacity(ndims);
    for _ in 0..ndims {
        dims.push(r.u64()? as usize);
    }
    if dims != key.dims {
        return Err(Error::parse(path, format!("cached dims {dims:?} differ from {:?}", key.dims)));
    }
    let count = r.u64()? as usize;
    let n = key.nodes();
    if count != n * n {
        return Err(Error::parse(path, format!("expected {} entries, found {count}", n * n)));
    }
    let raw = r.take(8 * count)?;
    if r.pos != bytes.len() {
        return Err(Error::parse(path, "trailing bytes in cost cache"));
    }
    Ok(Some(
        raw.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_version_bump() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CostCache::new(dir.path());
        let key = CostKey {
            kind: CostKind::Circle,
            dims: vec![2],
        };
        let vals = vec![0.0, 1.5, 1.5, 0.0];
        assert!(cache.load(&key).unwrap().is_none());
        cache.store(&key, &vals).unwrap();
        assert_eq!(cache.load(&key).unwrap().unwrap(), vals);

        let mut bytes = fs::read(cache.path_for(&key)).unwrap();
        bytes[8] = 99;
        fs::write(cache.path_for(&key), &bytes).unwrap();
        assert!(cache.load(&key).unwrap().is_none());
        let rebuilt = cache.get_or_build(&key, || vals.clone()).unwrap();
        assert_eq!(rebuilt, vals);

        fs::write(cache.path_for(&key), b"garbage!garbage!").unwrap();
        assert!(matches!(cache.load(&key), Err(Error::Parse { .. })));
    }
}
