//! The OPBL dataset container and the OPBL-style checkpoint container.
//!
//! Dataset layout (version 1, little-endian):
//! magic `OPBL`, u32 version, u32 N, input grid block (u32 dims, per-dim u32
//! point counts, u32 channels), output grid block, N input arrays then N
//! output arrays as float64, then a length-prefixed UTF-8 metadata string of
//! `key=value` lines. Grid extents and boundary kinds travel in reserved
//! metadata keys so the roundtrip is bit-exact.

use crate::field::{BoundaryKind, Dataset, Field, Grid, Metadata};
use crate::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const DATASET_MAGIC: &[u8; 4] = b"OPBL";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"OPBM";
pub const VERSION: u32 = 1;

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated file".into()))?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated file".into()))?;
    Ok(u64::from_le_bytes(buf))
}

fn write_f64_array(w: &mut impl Write, vals: &[f64]) -> Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64_array(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; len * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("truncated array data".into()))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn write_grid_block(w: &mut impl Write, grid: &Grid, channels: usize) -> Result<()> {
    write_u32(w, grid.dims() as u32)?;
    for &p in grid.points() {
        write_u32(w, p as u32)?;
    }
    write_u32(w, channels as u32)?;
    Ok(())
}

fn read_grid_block(r: &mut impl Read) -> Result<(usize, Vec<usize>, usize)> {
    let dims = read_u32(r)? as usize;
    if dims == 0 || dims > 2 {
        return Err(Error::Format(format!("bad dims {dims} in grid block")));
    }
    let mut points = Vec::with_capacity(dims);
    for _ in 0..dims {
        points.push(read_u32(r)? as usize);
    }
    let channels = read_u32(r)? as usize;
    Ok((dims, points, channels))
}

fn grid_meta(meta: &mut Metadata, prefix: &str, grid: &Grid) {
    let extents: Vec<String> = grid.extents().iter().map(|e| format!("{e}")).collect();
    let bounds: Vec<&str> = grid.boundaries().iter().map(|b| b.as_str()).collect();
    meta.set(&format!("{prefix}_extents"), extents.join(","));
    meta.set(&format!("{prefix}_boundaries"), bounds.join(","));
}

fn grid_from_meta(meta: &Metadata, prefix: &str, dims: usize, points: &[usize]) -> Result<Grid> {
    let extents: Vec<f64> = meta
        .get(&format!("{prefix}_extents"))
        .ok_or_else(|| Error::Format(format!("missing {prefix}_extents metadata")))?
        .split(',')
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad extent '{s}'")))
        })
        .collect::<Result<_>>()?;
    let bounds: Vec<BoundaryKind> = meta
        .get(&format!("{prefix}_boundaries"))
        .ok_or_else(|| Error::Format(format!("missing {prefix}_boundaries metadata")))?
        .split(',')
        .map(BoundaryKind::parse)
        .collect::<Result<_>>()?;
    Grid::new(dims, points, &extents, &bounds)
}

/// Write a dataset to `path` in the OPBL v1 container format.
pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset_to(ds, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn write_dataset_to(ds: &Dataset, w: &mut impl Write) -> Result<()> {
    w.write_all(DATASET_MAGIC)?;
    write_u32(w, VERSION)?;
    write_u32(w, ds.len() as u32)?;

    // For an empty dataset there is no grid to describe; write a minimal
    // placeholder block that the reader discards.
    let placeholder = Grid::periodic_1d(2, 1.0).expect("valid placeholder grid");
    let (in_grid, in_ch) = ds
        .inputs
        .first()
        .map(|f| (&f.grid, f.channels))
        .unwrap_or((&placeholder, 1));
    let (out_grid, out_ch) = ds
        .outputs
        .first()
        .map(|f| (&f.grid, f.channels))
        .unwrap_or((&placeholder, 1));

    write_grid_block(w, in_grid, in_ch)?;
    write_grid_block(w, out_grid, out_ch)?;

    for f in &ds.inputs {
        write_f64_array(w, &f.values)?;
    }
    for f in &ds.outputs {
        write_f64_array(w, &f.values)?;
    }

    let mut meta = ds.meta.clone();
    if !ds.is_empty() {
        grid_meta(&mut meta, "input", in_grid);
        grid_meta(&mut meta, "output", out_grid);
    }
    let text = meta.to_text();
    write_u32(w, text.len() as u32)?;
    w.write_all(text.as_bytes())?;
    Ok(())
}

/// Read a dataset from `path`.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    read_dataset_from(&mut bytes.as_slice())
}

pub fn read_dataset_from(r: &mut impl Read) -> Result<Dataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated file".into()))?;
    if &magic != DATASET_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected OPBL",
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let n = read_u32(r)? as usize;
    let (in_dims, in_points, in_ch) = read_grid_block(r)?;
    let (out_dims, out_points, out_ch) = read_grid_block(r)?;

    let in_np: usize = in_points.iter().product();
    let out_np: usize = out_points.iter().product();
    let mut in_values = Vec::with_capacity(n);
    for _ in 0..n {
        in_values.push(read_f64_array(r, in_np * in_ch)?);
    }
    let mut out_values = Vec::with_capacity(n);
    for _ in 0..n {
        out_values.push(read_f64_array(r, out_np * out_ch)?);
    }

    let meta_len = read_u32(r)? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes)
        .map_err(|_| Error::Format("truncated metadata".into()))?;
    let text =
        String::from_utf8(meta_bytes).map_err(|_| Error::Format("metadata not UTF-8".into()))?;
    let meta = Metadata::from_text(&text)?;

    if n == 0 {
        return Dataset::new(Vec::new(), Vec::new(), meta);
    }

    let in_grid = grid_from_meta(&meta, "input", in_dims, &in_points)?;
    let out_grid = grid_from_meta(&meta, "output", out_dims, &out_points)?;

    let inputs = in_values
        .into_iter()
        .map(|v| Field::new(in_grid.clone(), in_ch, v))
        .collect::<Result<_>>()?;
    let outputs = out_values
        .into_iter()
        .map(|v| Field::new(out_grid.clone(), out_ch, v))
        .collect::<Result<_>>()?;
    Dataset::new(inputs, outputs, meta)
}

/// A named-array checkpoint container (magic `OPBM`): a manifest string plus
/// a list of named float64 arrays. Used for model checkpoints and PCA bases.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub manifest: Metadata,
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn new(manifest: Metadata) -> Self {
        Checkpoint {
            manifest,
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, values: Vec<f64>) {
        self.arrays.push((name.to_string(), values));
    }

    pub fn get(&self, name: &str) -> Result<&[f64]> {
        self.arrays
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Format(format!("checkpoint missing array '{name}'")))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        write_u32(&mut buf, VERSION)?;
        let text = self.manifest.to_text();
        write_u32(&mut buf, text.len() as u32)?;
        buf.extend_from_slice(text.as_bytes());
        write_u32(&mut buf, self.arrays.len() as u32)?;
        for (name, vals) in &self.arrays {
            write_u32(&mut buf, name.len() as u32)?;
            buf.extend_from_slice(name.as_bytes());
            write_u64(&mut buf, vals.len() as u64)?;
            write_f64_array(&mut buf, vals)?;
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let r = &mut bytes.as_slice();
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated file".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("bad checkpoint magic, expected OPBM".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let meta_len = read_u32(r)? as usize;
        let mut meta_bytes = vec![0u8; meta_len];
        r.read_exact(&mut meta_bytes)
            .map_err(|_| Error::Format("truncated manifest".into()))?;
        let manifest = Metadata::from_text(
            &String::from_utf8(meta_bytes).map_err(|_| Error::Format("manifest not UTF-8".into()))?,
        )?;
        let count = read_u32(r)? as usize;
        let mut arrays = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(r)? as usize;
            let mut name_bytes = vec![0u8; name_len];
            r.read_exact(&mut name_bytes)
                .map_err(|_| Error::Format("truncated array name".into()))?;
            let name = String::from_utf8(name_bytes)
                .map_err(|_| Error::Format("array name not UTF-8".into()))?;
            let len = read_u64(r)? as usize;
            arrays.push((name, read_f64_array(r, len)?));
        }
        Ok(Checkpoint { manifest, arrays })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn sample_dataset(seed: u64) -> Dataset {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let gin = Grid::periodic_2d(4, 1.0).unwrap();
        let gout = Grid::periodic_1d(8, 2.0).unwrap();
        let inputs = (0..2)
            .map(|_| {
                let vals = (0..16).map(|_| rng.gen::<f64>()).collect();
                Field::new(gin.clone(), 1, vals).unwrap()
            })
            .collect();
        let outputs = (0..2)
            .map(|_| {
                let vals = (0..16).map(|_| rng.gen::<f64>()).collect();
                Field::new(gout.clone(), 2, vals).unwrap()
            })
            .collect();
        let mut meta = Metadata::new();
        meta.set("problem", "test");
        meta.set("tau", 3.0);
        meta.set("seed", 42u64);
        Dataset::new(inputs, outputs, meta).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for seed in 0..5 {
            let ds = sample_dataset(seed);
            let path = dir.path().join(format!("ds{seed}.opbl"));
            write_dataset(&ds, &path).unwrap();
            let back = read_dataset(&path).unwrap();
            assert_eq!(ds.inputs, back.inputs);
            assert_eq!(ds.outputs, back.outputs);
            assert_eq!(back.meta.get("problem"), Some("test"));
            // writing again yields byte-identical files
            let path2 = dir.path().join(format!("ds{seed}b.opbl"));
            write_dataset(&back, &path2).unwrap();
            let a = std::fs::read(&path2).unwrap();
            write_dataset(&back, &path2).unwrap();
            assert_eq!(a, std::fs::read(&path2).unwrap());
        }
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.opbl");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
    }

    #[test]
    fn version_mismatch_is_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample_dataset(1);
        let path = dir.path().join("v.opbl");
        write_dataset(&ds, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9; // bump version field
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_dataset(&path),
            Err(Error::Version { found: 9, .. })
        ));
    }

    #[test]
    fn truncated_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample_dataset(2);
        let path = dir.path().join("t.opbl");
        write_dataset(&ds, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
    }

    #[test]
    fn empty_dataset_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let mut meta = Metadata::new();
        meta.set("problem", "empty");
        let ds = Dataset::new(Vec::new(), Vec::new(), meta).unwrap();
        let path = dir.path().join("empty.opbl");
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.meta.get("problem"), Some("empty"));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut manifest = Metadata::new();
        manifest.set("arch", "fno");
        let mut ck = Checkpoint::new(manifest);
        ck.push("lift.w", vec![1.0, -2.5, 3.25]);
        ck.push("lift.b", vec![0.0]);
        let path = dir.path().join("m.opbm");
        ck.write(&path).unwrap();
        let back = Checkpoint::read(&path).unwrap();
        assert_eq!(ck, back);
        assert!(back.get("missing").is_err());
    }
}
