//! Checkpoint archive: a UTF-8 manifest followed by raw little-endian `f32`
//! buffers. Round-trips are bit-exact.
//!
//! Layout:
//!
//! ```text
//! sfc1
//! name=<tensor name> shape=<d0>x<d1>... dtype=f32 offset=<byte offset>
//! ...one line per tensor...
//! <empty line>
//! <raw data, offsets relative to the byte after the empty line>
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::mlp::Mlp;
use crate::error::{Error, Result};

const MAGIC: &str = "sfc1";

#[derive(Clone, Debug, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorEntry {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        let entry = TensorEntry {
            name: name.into(),
            shape,
            data,
        };
        assert_eq!(
            entry.shape.iter().product::<usize>(),
            entry.data.len(),
            "tensor {} shape/data mismatch",
            entry.name
        );
        entry
    }
}

pub fn write_checkpoint(path: &Path, entries: &[TensorEntry]) -> Result<()> {
    let mut manifest = String::new();
    manifest.push_str(MAGIC);
    manifest.push('\n');
    let mut offset = 0usize;
    for e in entries {
        let shape = e
            .shape
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        manifest.push_str(&format!(
            "name={} shape={} dtype=f32 offset={}\n",
            e.name, shape, offset
        ));
        offset += e.data.len() * 4;
    }
    manifest.push('\n');

    let mut bytes = manifest.into_bytes();
    bytes.reserve(offset);
    for e in entries {
        for v in &e.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<TensorEntry>> {
    let bytes = fs::read(path)?;
    let header_end = find_header_end(&bytes)
        .ok_or_else(|| Error::Checkpoint(format!("{}: missing manifest terminator", path.display())))?;
    let manifest = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Checkpoint(format!("{}: manifest is not UTF-8", path.display())))?;
    let blob = &bytes[header_end + 2..];

    let mut lines = manifest.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::Checkpoint(format!(
            "{}: bad magic, expected '{MAGIC}'",
            path.display()
        )));
    }

    let mut entries = Vec::new();
    for line in lines {
        let mut name = None;
        let mut shape: Option<Vec<usize>> = None;
        let mut offset = None;
        let mut dtype_ok = false;
        for field in line.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Checkpoint(format!("malformed manifest field '{field}'")))?;
            match key {
                "name" => name = Some(value.to_string()),
                "shape" => {
                    let dims = value
                        .split('x')
                        .map(|d| d.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::Checkpoint(format!("bad shape '{value}'")))?;
                    shape = Some(dims);
                }
                "dtype" => {
                    if value != "f32" {
                        return Err(Error::Checkpoint(format!("unsupported dtype '{value}'")));
                    }
                    dtype_ok = true;
                }
                "offset" => {
                    offset = Some(value.parse::<usize>().map_err(|_| {
                        Error::Checkpoint(format!("bad offset '{value}'"))
                    })?);
                }
                other => {
                    return Err(Error::Checkpoint(format!("unknown manifest key '{other}'")));
                }
            }
        }
        let name = name.ok_or_else(|| Error::Checkpoint("entry missing name".into()))?;
        let shape = shape.ok_or_else(|| Error::Checkpoint(format!("{name}: missing shape")))?;
        let offset = offset.ok_or_else(|| Error::Checkpoint(format!("{name}: missing offset")))?;
        if !dtype_ok {
            return Err(Error::Checkpoint(format!("{name}: missing dtype")));
        }
        let count: usize = shape.iter().product();
        let end = offset + count * 4;
        if end > blob.len() {
            return Err(Error::Checkpoint(format!(
                "{name}: data range {offset}..{end} exceeds blob of {} bytes",
                blob.len()
            )));
        }
        let data = blob[offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        entries.push(TensorEntry { name, shape, data });
    }
    Ok(entries)
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    bytes.windows(2).position(|w| w == b"\n\n")
}

impl Mlp<f32> {
    /// Emits `{prefix}.l{i}.w` / `{prefix}.l{i}.b` entries for every layer.
    pub fn export_tensors(&self, prefix: &str) -> Vec<TensorEntry> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for (i, layer) in self.layers.iter().enumerate() {
            out.push(TensorEntry::new(
                format!("{prefix}.l{i}.w"),
                vec![layer.out_dim, layer.in_dim],
                layer.w.clone(),
            ));
            out.push(TensorEntry::new(
                format!("{prefix}.l{i}.b"),
                vec![layer.out_dim],
                layer.b.clone(),
            ));
        }
        out
    }

    /// Loads parameters from an entry map, validating every shape.
    pub fn load_tensors(
        &mut self,
        prefix: &str,
        entries: &BTreeMap<String, &TensorEntry>,
    ) -> Result<()> {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let wname = format!("{prefix}.l{i}.w");
            let bname = format!("{prefix}.l{i}.b");
            let w = entries
                .get(wname.as_str())
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {wname}")))?;
            let b = entries
                .get(bname.as_str())
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {bname}")))?;
            if w.shape != [layer.out_dim, layer.in_dim] {
                return Err(Error::Checkpoint(format!(
                    "{wname}: checkpoint shape {:?} vs network shape {:?}",
                    w.shape,
                    [layer.out_dim, layer.in_dim]
                )));
            }
            if b.shape != [layer.out_dim] {
                return Err(Error::Checkpoint(format!(
                    "{bname}: checkpoint shape {:?} vs network shape {:?}",
                    b.shape,
                    [layer.out_dim]
                )));
            }
            layer.w.copy_from_slice(&w.data);
            layer.b.copy_from_slice(&b.data);
        }
        Ok(())
    }
}

pub fn entry_map(entries: &[TensorEntry]) -> BTreeMap<String, &TensorEntry> {
    entries.iter().map(|e| (e.name.clone(), e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::mlp::{Activation, LayerSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let entries = vec![
            TensorEntry::new("a.w", vec![2, 3], vec![1.0, -2.5, 3e-8, f32::MIN_POSITIVE, 0.1, -0.0]),
            TensorEntry::new("a.b", vec![2], vec![0.25, f32::MAX]),
        ];
        write_checkpoint(&path, &entries).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (orig, rt) in entries.iter().zip(&back) {
            assert_eq!(orig.name, rt.name);
            assert_eq!(orig.shape, rt.shape);
            for (a, b) in orig.data.iter().zip(&rt.data) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn mlp_export_load_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net: Mlp<f32> = Mlp::new(
            4,
            &[
                LayerSpec::plain(8, Activation::Tanh),
                LayerSpec::plain(3, Activation::Linear),
            ],
            &mut rng,
        );
        let entries = net.export_tensors("pi");
        let mut other: Mlp<f32> = Mlp::new(
            4,
            &[
                LayerSpec::plain(8, Activation::Tanh),
                LayerSpec::plain(3, Activation::Linear),
            ],
            &mut rng,
        );
        other.load_tensors("pi", &entry_map(&entries)).unwrap();
        for (a, b) in net.layers.iter().zip(&other.layers) {
            assert_eq!(a.w, b.w);
            assert_eq!(a.b, b.b);
        }
    }

    #[test]
    fn shape_mismatch_is_reported_with_both_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net: Mlp<f32> = Mlp::new(4, &[LayerSpec::plain(3, Activation::Linear)], &mut rng);
        let entries = net.export_tensors("pi");
        let mut smaller: Mlp<f32> = Mlp::new(2, &[LayerSpec::plain(3, Activation::Linear)], &mut rng);
        let err = smaller
            .load_tensors("pi", &entry_map(&entries))
            .unwrap_err()
            .to_string();
        assert!(err.contains("[3, 4]") && err.contains("[3, 2]"), "{err}");
    }

    #[test]
    fn rejects_corrupt_archives() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"not a checkpoint").unwrap();
        assert!(read_checkpoint(&path).is_err());

        std::fs::write(&path, b"sfc1\nname=x shape=4 dtype=f32 offset=0\n\nxx").unwrap();
        assert!(read_checkpoint(&path).is_err());
    }
}
