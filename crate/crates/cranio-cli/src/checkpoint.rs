//! Model checkpoints: a small magic-tagged binary container holding the
//! network config as JSON followed by the raw little-endian f64 parameter
//! arrays. `load(save(m))` reproduces the model exactly.

use std::path::Path;

use cranio_core::nn::{Model, NetworkConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

const MAGIC: &[u8; 8] = b"CRIMPL01";

#[derive(Serialize, Deserialize)]
struct Header {
    config: NetworkConfig,
    seed: u64,
}

pub fn save_model(path: &Path, model: &Model) -> Result<(), CliError> {
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        seed: model.seed,
    })
    .map_err(|e| CliError::data("serializing checkpoint header", e))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for (w, b) in model.weights.iter().zip(&model.biases) {
        for &v in w {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in b {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::data(&format!("writing {}", path.display()), e))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::data(&format!("reading {}", path.display()), e))?;
    let bad = |msg: &str| CliError::Data(format!("checkpoint {}: {msg}", path.display()));
    if bytes.len() < MAGIC.len() + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut off = MAGIC.len();
    let hlen = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize;
    off += 8;
    if bytes.len() < off + hlen {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&bytes[off..off + hlen])
        .map_err(|e| CliError::data(&format!("checkpoint header in {}", path.display()), e))?;
    off += hlen;

    // shapes come from the config; a zeroed model carries them
    let mut model = Model::zeroed(header.config)
        .map_err(|e| CliError::data(&format!("checkpoint config in {}", path.display()), e))?;
    model.seed = header.seed;
    let expected = model.param_count() * 8;
    if bytes.len() - off != expected {
        return Err(bad("parameter payload length mismatch"));
    }
    let read_f64 = |off: &mut usize| {
        let v = f64::from_le_bytes(bytes[*off..*off + 8].try_into().unwrap());
        *off += 8;
        v
    };
    for layer in 0..model.weights.len() {
        for i in 0..model.weights[layer].len() {
            model.weights[layer][i] = read_f64(&mut off);
        }
        for i in 0..model.biases[layer].len() {
            model.biases[layer][i] = read_f64(&mut off);
        }
    }
    Ok(model)
}
