use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stack::{LayerConfig, LayerStack};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Leading bytes of the binary tensor file.
pub const CHECKPOINT_MAGIC: &[u8; 6] = b"TSLIF1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorIndex {
    name: String,
    shape: Vec<usize>,
    /// Byte offset of the first value in the binary file.
    offset: usize,
    learnable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format: String,
    binary: String,
    layers: Vec<LayerConfig>,
    tensors: Vec<TensorIndex>,
}

/// Writes `manifest` (JSON) and a sibling `.bin` with the tensors.
pub fn save_checkpoint(stack: &LayerStack, manifest: &Path) -> Result<()> {
    let stem = manifest
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Checkpoint(format!("bad manifest path {}", manifest.display())))?;
    let binary = format!("{stem}.bin");
    let mut bytes = CHECKPOINT_MAGIC.to_vec();
    let mut tensors = Vec::new();
    for e in stack.registry.entries() {
        tensors.push(TensorIndex {
            name: e.name.clone(),
            shape: e.tensor.shape().to_vec(),
            offset: bytes.len(),
            learnable: e.learnable,
        });
        for x in e.tensor.data() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let m = Manifest {
        format: String::from_utf8_lossy(CHECKPOINT_MAGIC).into_owned(),
        binary: binary.clone(),
        layers: stack.configs().to_vec(),
        tensors,
    };
    fs::write(manifest.with_file_name(&binary), bytes)?;
    fs::write(manifest, serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

/// Rebuilds a stack from a manifest written by [`save_checkpoint`].
pub fn load_checkpoint(manifest: &Path) -> Result<LayerStack> {
    let text = fs::read_to_string(manifest)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", manifest.display())))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format.as_bytes() != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("unknown format '{}'", m.format)));
    }
    let bin_path = manifest.with_file_name(&m.binary);
    let bytes = fs::read(&bin_path).map_err(|e| Error::Checkpoint(format!("{}: {e}", bin_path.display())))?;
    if !bytes.starts_with(CHECKPOINT_MAGIC) {
        return Err(Error::Checkpoint("binary file lacks magic header".into()));
    }
    let mut tensors = Vec::with_capacity(m.tensors.len());
    for t in &m.tensors {
        let n: usize = t.shape.iter().product();
        let end = t.offset + 8 * n;
        if t.offset < CHECKPOINT_MAGIC.len() || end > bytes.len() {
            return Err(Error::Checkpoint(format!("tensor '{}' out of bounds", t.name)));
        }
        let data = bytes[t.offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push((t.name.clone(), Tensor::new(t.shape.clone(), data)?));
    }
    let mut stack = LayerStack::new(m.layers, 0)?;
    stack.load_tensors(tensors)?;
    Ok(stack)
}
