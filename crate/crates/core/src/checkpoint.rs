//! `GRNN` model checkpoints.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "GRNN"                magic
//! u32                   format version (1)
//! u8                    model kind (0 attention, 1 avg_pool, 2 max_pool, 3 softmax_regression)
//! u32 × 6               K, D, d, layers, classes, steps
//! f64                   dropout probability
//! u32                   tensor count
//! f64 × n               every parameter tensor, in `ParamSet::tensors` order
//! u8                    1 if optimizer state follows, else 0
//!   u64                 Adam step count
//!   f64 × 4             alpha, beta1, beta2, epsilon
//!   f64 × n             first moments, same order as the parameters
//!   f64 × n             second moments
//! u32                   CRC-32 of every preceding byte
//! ```
//!
//! Tensor shapes are implied by the configuration.

use std::path::Path;

use crate::codec::{Reader, WriteLe};
use crate::error::{Error, FormatError, Result};
use crate::model::{ModelConfig, ModelKind, Network, ParamSet};
use crate::optim::{AdamConfig, AdamState};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"GRNN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub optimizer: Option<AdamState<Network>>,
}

fn put_tensors(out: &mut Vec<u8>, set: &Network) {
    for t in set.tensors() {
        t.data().iter().for_each(|&v| out.put_f64(v));
    }
}

fn read_tensors(r: &mut Reader<'_>, set: &mut Network) -> Result<(), FormatError> {
    for t in set.tensors_mut() {
        for v in t.data_mut() {
            *v = r.f64()?;
        }
    }
    Ok(())
}

pub fn encode_checkpoint(
    network: &Network,
    optimizer: Option<&AdamState<Network>>,
) -> Result<Vec<u8>> {
    if let Some(opt) = optimizer {
        if !network.same_shapes(&opt.m) || !network.same_shapes(&opt.v) {
            return Err(Error::Contract(
                "optimizer state does not match the network".into(),
            ));
        }
    }
    let c = network.config();
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.put_u32(CHECKPOINT_VERSION);
    out.put_u8(c.kind.code());
    for v in [c.grid, c.feat_dim, c.hidden, c.layers, c.classes, c.steps] {
        out.put_u32(
            u32::try_from(v).map_err(|_| Error::Config(format!("dimension {v} too large")))?,
        );
    }
    out.put_f64(c.dropout);
    out.put_u32(network.tensors().len() as u32);
    put_tensors(&mut out, network);
    match optimizer {
        Some(opt) => {
            out.put_u8(1);
            out.put_u64(opt.step_count);
            let a = opt.config;
            for v in [a.alpha, a.beta1, a.beta2, a.epsilon] {
                out.put_f64(v);
            }
            put_tensors(&mut out, &opt.m);
            put_tensors(&mut out, &opt.v);
        }
        None => out.put_u8(0),
    }
    out.put_crc();
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    r.version(CHECKPOINT_VERSION)?;
    let code = r.u8()?;
    let kind = ModelKind::from_code(code)
        .ok_or_else(|| FormatError::Malformed(format!("unknown model kind code {code}")))?;
    let mut dims = [0usize; 6];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let [grid, feat_dim, hidden, layers, classes, steps] = dims;
    let config = ModelConfig {
        kind,
        grid,
        feat_dim,
        hidden,
        layers,
        classes,
        steps,
        dropout: r.f64()?,
    };
    config
        .validate()
        .map_err(|e| FormatError::Malformed(format!("stored configuration is invalid: {e}")))?;
    let mut network = Network::zeros(config)?;
    let count = r.u32()? as usize;
    if count != network.tensors().len() {
        return Err(FormatError::Malformed(format!(
            "{count} tensors stored, configuration implies {}",
            network.tensors().len()
        ))
        .into());
    }
    read_tensors(&mut r, &mut network)?;
    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let step_count = r.u64()?;
            let config = AdamConfig {
                alpha: r.f64()?,
                beta1: r.f64()?,
                beta2: r.f64()?,
                epsilon: r.f64()?,
            };
            let mut m = network.zeros_like();
            let mut v = network.zeros_like();
            read_tensors(&mut r, &mut m)?;
            read_tensors(&mut r, &mut v)?;
            Some(AdamState {
                config,
                m,
                v,
                step_count,
            })
        }
        other => return Err(FormatError::Malformed(format!("bad optimizer flag {other}")).into()),
    };
    r.finish_crc()?;
    Ok(Checkpoint { network, optimizer })
}

pub fn save_checkpoint(
    path: &Path,
    network: &Network,
    optimizer: Option<&AdamState<Network>>,
) -> Result<()> {
    let bytes = encode_checkpoint(network, optimizer)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::adam_step;
    use crate::rng::Rng;

    fn config(kind: ModelKind) -> ModelConfig {
        ModelConfig {
            kind,
            grid: 2,
            feat_dim: 3,
            hidden: 4,
            layers: 2,
            classes: 3,
            steps: 5,
            dropout: 0.25,
        }
    }

    fn bits(n: &Network) -> Vec<u64> {
        n.flatten().iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn round_trip_every_kind() {
        for kind in ModelKind::ALL {
            let net = Network::init(config(kind), &mut Rng::new(5)).unwrap();
            let back = decode_checkpoint(&encode_checkpoint(&net, None).unwrap()).unwrap();
            assert_eq!(back.network.config(), net.config());
            assert_eq!(bits(&back.network), bits(&net));
            assert!(back.optimizer.is_none());
        }
    }

    #[test]
    fn round_trip_with_optimizer_state() {
        let mut net = Network::init(config(ModelKind::Attention), &mut Rng::new(6)).unwrap();
        let mut state = AdamState::new(&net, AdamConfig::with_alpha(0.01)).unwrap();
        let mut grad = net.zeros_like();
        let mut rng = Rng::new(1);
        for t in grad.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = rng.normal());
        }
        adam_step(&mut net, &grad, &mut state).unwrap();
        let bytes = encode_checkpoint(&net, Some(&state)).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.optimizer.as_ref(), Some(&state));
        assert_eq!(bits(&back.network), bits(&net));
        assert_eq!(
            encode_checkpoint(&back.network, back.optimizer.as_ref()).unwrap(),
            bytes
        );
    }

    #[test]
    fn corrupted_crc_detected() {
        let net = Network::init(config(ModelKind::MaxPool), &mut Rng::new(7)).unwrap();
        let mut bytes = encode_checkpoint(&net, None).unwrap();
        bytes[60] ^= 0x10;
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(Error::Format(FormatError::Crc { .. }))
        ));
        bytes[0] = b'X';
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(Error::Format(FormatError::BadMagic { .. }))
        ));
    }
}
