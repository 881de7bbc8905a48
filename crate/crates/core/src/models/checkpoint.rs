//! Binary model checkpoint.
//!
//! Layout: the 8-byte magic `GTWCKPT1`, a little-endian `u32` header length,
//! a JSON header, then for each layer in wiring order its row-major weights
//! followed by its biases as little-endian IEEE-754 `f64`. The header is
//!
//! ```text
//! {"arch": "<tag>", "hidden_layers_per_block": n, "neurons_per_layer": [..],
//!  "n_types": k, "layers": [[n_in, n_out], ...]}
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::arch::{ArchKind, ArchitectureSpec};
use super::network::Model;
use crate::error::{Error, Result};
use crate::nn::{LayerParams, Trainable};

const MAGIC: &[u8; 8] = b"GTWCKPT1";

#[derive(Serialize, Deserialize)]
struct Header {
    arch: String,
    hidden_layers_per_block: usize,
    neurons_per_layer: Vec<usize>,
    n_types: usize,
    layers: Vec<(usize, usize)>,
}

pub fn write_checkpoint<W: Write>(model: &Model, mut w: W) -> Result<()> {
    let spec = model.spec();
    let header = Header {
        arch: spec.kind.tag().to_string(),
        hidden_layers_per_block: spec.hidden_layers_per_block,
        neurons_per_layer: spec.neurons_per_layer.clone(),
        n_types: spec.n_types,
        layers: model.layers().iter().map(|l| (l.n_in, l.n_out)).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let mut buf = Vec::with_capacity(model.n_params() * 8);
    for layer in model.layers() {
        for v in layer.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Model> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model checkpoint".into()));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    let kind: ArchKind = header.arch.parse()?;
    let spec = ArchitectureSpec {
        kind,
        hidden_layers_per_block: header.hidden_layers_per_block,
        neurons_per_layer: header.neurons_per_layer,
        n_types: header.n_types,
    };
    let mut layers = Vec::with_capacity(header.layers.len());
    let mut word = [0u8; 8];
    for (n_in, n_out) in header.layers {
        let mut layer = LayerParams::zeros(n_in, n_out);
        for v in layer.values_mut() {
            r.read_exact(&mut word)?;
            *v = f64::from_le_bytes(word);
        }
        layers.push(layer);
    }
    Model::from_layers(spec, layers)
}
