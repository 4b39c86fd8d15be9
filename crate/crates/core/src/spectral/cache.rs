//! On-disk cache of assembled matrices.
//!
//! Layout: magic `BFKM1`, N (u64), L (f64), series order (u64), epsilon
//! (f64), then `(N+1)^2` pairs `(re, im)` of f64, row-major, all little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use super::matrix::{assemble_kernel, KernelMatrix, KernelSpec};
use crate::error::{Error, Result};
use crate::kernels::QuadratureRule;
use crate::scales::GridSpec;

const MAGIC: &[u8; 5] = b"BFKM1";
const HEADER: usize = 5 + 8 * 4;

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixCache {
    dir: PathBuf,
}

impl MatrixCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::Cache(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Cache key: kernel, grid, series order and quadrature size.
    pub fn key(kernel: &KernelSpec, grid: &GridSpec, rule: &QuadratureRule) -> String {
        let nodes = if kernel.uses_quadrature() { rule.len() } else { 0 };
        format!("{}|L={:e}|N={}|nodes={}", kernel.describe(), grid.length, grid.intervals, nodes)
    }

    pub fn path_for(&self, kernel: &KernelSpec, grid: &GridSpec, rule: &QuadratureRule) -> PathBuf {
        let key = Self::key(kernel, grid, rule);
        self.dir.join(format!("bfkm-{:016x}.bin", fnv1a(key.as_bytes())))
    }

    /// Cached matrix, or `None` on a miss or a header mismatch.
    pub fn load(&self, kernel: &KernelSpec, grid: &GridSpec, rule: &QuadratureRule) -> Result<Option<KernelMatrix>> {
        let path = self.path_for(kernel, grid, rule);
        let mut file = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let dim = grid.dim();
        if bytes.len() != HEADER + dim * dim * 16 || &bytes[..5] != MAGIC {
            return Ok(None);
        }
        let word = |i: usize| <[u8; 8]>::try_from(&bytes[5 + 8 * i..13 + 8 * i]).expect("8 bytes");
        let (order, eps) = kernel.header_fields();
        if u64::from_le_bytes(word(0)) != grid.intervals as u64
            || f64::from_le_bytes(word(1)).to_bits() != grid.length.to_bits()
            || u64::from_le_bytes(word(2)) != order
            || f64::from_le_bytes(word(3)).to_bits() != eps.to_bits()
        {
            return Ok(None);
        }
        let data = bytes[HEADER..]
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        Ok(Some(KernelMatrix::from_symmetric(*grid, kernel.clone(), data, 0.0)))
    }

    /// Write atomically: temporary file in the cache directory, then rename.
    pub fn store(&self, m: &KernelMatrix, rule: &QuadratureRule) -> Result<()> {
        let path = self.path_for(&m.kernel, &m.grid, rule);
        let (order, eps) = m.kernel.header_fields();
        let mut bytes = Vec::with_capacity(HEADER + m.as_slice().len() * 16);
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&(m.grid.intervals as u64).to_le_bytes());
        bytes.extend_from_slice(&m.grid.length.to_le_bytes());
        bytes.extend_from_slice(&order.to_le_bytes());
        bytes.extend_from_slice(&eps.to_le_bytes());
        for z in m.as_slice() {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        let tmp = self.dir.join(format!(
            ".tmp-{}-{}-{}",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed),
            path.file_name().and_then(|s| s.to_str()).unwrap_or("m")
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

/// Assemble through an optional cache.
pub fn assemble_cached(
    cache: Option<&MatrixCache>,
    kernel: &KernelSpec,
    grid: &GridSpec,
    rule: &QuadratureRule,
) -> Result<KernelMatrix> {
    if let Some(c) = cache {
        if let Some(m) = c.load(kernel, grid, rule)? {
            return Ok(m);
        }
    }
    let m = assemble_kernel(kernel, grid, rule)?;
    if let Some(c) = cache {
        c.store(&m, rule)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gauss_legendre;
    use crate::scales::BoundaryShape;

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let cache = MatrixCache::new(dir.path()).unwrap();
        let grid = GridSpec::new(4.0, 20).unwrap();
        let rule = gauss_legendre(16).unwrap();
        let k = KernelSpec::boundary(BoundaryShape::GaussianBump { epsilon: -0.2 }, 4);
        assert!(cache.load(&k, &grid, &rule).unwrap().is_none());
        let a = assemble_cached(Some(&cache), &k, &grid, &rule).unwrap();
        let b = assemble_cached(Some(&cache), &k, &grid, &rule).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let bytes = fs::read(cache.path_for(&k, &grid, &rule)).unwrap();
        assert_eq!(&bytes[..5], b"BFKM1");
        assert_eq!(u64::from_le_bytes(bytes[5..13].try_into().unwrap()), 20);
        assert_eq!(f64::from_le_bytes(bytes[13..21].try_into().unwrap()), 4.0);
        assert_eq!(u64::from_le_bytes(bytes[21..29].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(bytes[29..37].try_into().unwrap()), -0.2);
        assert_eq!(bytes.len(), 37 + 21 * 21 * 16);
        let other = gauss_legendre(17).unwrap();
        assert_ne!(cache.path_for(&k, &grid, &rule), cache.path_for(&k, &grid, &other));
    }

    #[test]
    fn corrupted_file_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = MatrixCache::new(dir.path()).unwrap();
        let grid = GridSpec::new(3.0, 6).unwrap();
        let rule = gauss_legendre(4).unwrap();
        let k = KernelSpec::BrackenMelloy;
        fs::write(cache.path_for(&k, &grid, &rule), b"BFKM1 truncated").unwrap();
        assert!(cache.load(&k, &grid, &rule).unwrap().is_none());
    }
}
