//! Checkpoint container: 8-byte magic, u32 version, u64 header length, a JSON
//! header, then raw little-endian f64 payloads in the order the header lists.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use cef_core::bijective::BijectiveLayer;
use cef_core::flow::CefModel;
use cef_core::linalg::PluMatrix;
use cef_core::train::Adam;
use cef_core::{CefError, Result};

use crate::arch::Architecture;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CEFCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Non-trainable state of one `h` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Buffer {
    Actnorm { initialized: bool },
    Permutation { perm: Vec<usize>, signs: Vec<f64> },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamHeader {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub architecture: Architecture,
    pub buffers: Vec<Buffer>,
    pub seed: u64,
    pub epoch: usize,
    /// Names and lengths of the f64 payloads, in file order.
    pub payloads: Vec<(String, usize)>,
    #[serde(default)]
    pub adam_g: Option<AdamHeader>,
    #[serde(default)]
    pub adam_h: Option<AdamHeader>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub architecture: Architecture,
    pub model: CefModel,
    pub seed: u64,
    pub epoch: usize,
    pub adam: Option<(Adam, Adam)>,
}

fn adam_header(a: &Adam) -> AdamHeader {
    AdamHeader { learning_rate: a.learning_rate, beta1: a.beta1, beta2: a.beta2, epsilon: a.epsilon, step: a.step }
}

fn buffers(model: &CefModel) -> Vec<Buffer> {
    model
        .h
        .iter()
        .map(|b| match b {
            BijectiveLayer::ActNorm(a) => Buffer::Actnorm { initialized: a.initialized },
            BijectiveLayer::InvConv1x1(c) => {
                Buffer::Permutation { perm: c.weight.perm().to_vec(), signs: c.weight.signs().to_vec() }
            }
            BijectiveLayer::AffineCoupling(_) => Buffer::None,
        })
        .collect()
}

fn apply_buffers(model: &mut CefModel, bufs: &[Buffer]) -> Result<()> {
    if bufs.len() != model.h.len() {
        return Err(CefError::Format(format!("{} buffers for {} h blocks", bufs.len(), model.h.len())));
    }
    for (i, (block, buf)) in model.h.iter_mut().zip(bufs).enumerate() {
        match (block, buf) {
            (BijectiveLayer::ActNorm(a), Buffer::Actnorm { initialized }) => a.initialized = *initialized,
            (BijectiveLayer::InvConv1x1(c), Buffer::Permutation { perm, signs }) => {
                let w = &c.weight;
                c.weight = PluMatrix::new(w.dim(), perm.clone(), signs.clone(), w.params().to_vec())?;
            }
            (BijectiveLayer::AffineCoupling(_), Buffer::None) => {}
            _ => return Err(CefError::Format(format!("buffer {i} does not match its block"))),
        }
    }
    Ok(())
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.model.g_params();
        let h = self.model.h_params();
        let mut payloads: Vec<(String, &[f64])> = vec![("g".into(), &g), ("h".into(), &h)];
        if let Some((ag, ah)) = &self.adam {
            payloads.push(("adam_g.m".into(), &ag.m));
            payloads.push(("adam_g.v".into(), &ag.v));
            payloads.push(("adam_h.m".into(), &ah.m));
            payloads.push(("adam_h.v".into(), &ah.v));
        }
        let header = Header {
            architecture: self.architecture.clone(),
            buffers: buffers(&self.model),
            seed: self.seed,
            epoch: self.epoch,
            payloads: payloads.iter().map(|(n, p)| (n.clone(), p.len())).collect(),
            adam_g: self.adam.as_ref().map(|(a, _)| adam_header(a)),
            adam_h: self.adam.as_ref().map(|(_, a)| adam_header(a)),
        };
        let json = serde_json::to_vec_pretty(&header).map_err(|e| CefError::Format(e.to_string()))?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for (_, p) in payloads {
            for v in p {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(CefError::Format("not a checkpoint (bad magic)".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != CHECKPOINT_VERSION {
            return Err(CefError::Format(format!("unsupported checkpoint version {version}")));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8);
        if len > 1 << 30 {
            return Err(CefError::Format(format!("implausible header length {len}")));
        }
        let mut json = vec![0u8; len as usize];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json).map_err(|e| CefError::Format(e.to_string()))?;

        let mut payloads = Vec::with_capacity(header.payloads.len());
        for (name, n) in &header.payloads {
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes).map_err(|e| CefError::Format(format!("payload {name}: {e}")))?;
            let v: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            payloads.push((name.as_str(), v));
        }
        let take = |name: &str| -> Option<&Vec<f64>> { payloads.iter().find(|(n, _)| *n == name).map(|(_, v)| v) };

        let mut model = header.architecture.build(&mut ChaCha8Rng::seed_from_u64(header.seed))?;
        let missing = |n: &str| CefError::Format(format!("checkpoint lacks payload '{n}'"));
        model.set_g_params(take("g").ok_or_else(|| missing("g"))?)?;
        model.set_h_params(take("h").ok_or_else(|| missing("h"))?)?;
        apply_buffers(&mut model, &header.buffers)?;

        let adam = match (&header.adam_g, &header.adam_h) {
            (Some(hg), Some(hh)) => {
                let restore = |h: &AdamHeader, m: &str, v: &str| -> Result<Adam> {
                    let mut a = Adam::new(0, h.learning_rate);
                    a.beta1 = h.beta1;
                    a.beta2 = h.beta2;
                    a.epsilon = h.epsilon;
                    a.step = h.step;
                    a.m = take(m).ok_or_else(|| missing(m))?.clone();
                    a.v = take(v).ok_or_else(|| missing(v))?.clone();
                    Ok(a)
                };
                Some((restore(hg, "adam_g.m", "adam_g.v")?, restore(hh, "adam_h.m", "adam_h.v")?))
            }
            _ => None,
        };
        Ok(Self { architecture: header.architecture, model, seed: header.seed, epoch: header.epoch, adam })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path)
            .map_err(|e| CefError::Config(format!("cannot open checkpoint {}: {e}", path.display())))?;
        Self::read(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{BijectiveSpec, ConformalSpec, OrthoKind};
    use cef_core::bijective::BijectiveBlock;

    #[test]
    fn roundtrip_keeps_permutation_and_flags() {
        let arch = Architecture {
            latent_dim: 3,
            g: vec![ConformalSpec::Orthogonal { param: OrthoKind::Householder, reflections: Some(2) }],
            h: vec![BijectiveSpec::Actnorm { spatial: 1 }, BijectiveSpec::InvConv1x1 { spatial: 1 }],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = arch.build(&mut rng).unwrap();
        model.mark_actnorm_initialized();
        if let BijectiveLayer::InvConv1x1(c) = &mut model.h[1] {
            c.weight = PluMatrix::random(3, 0.5, &mut rng);
        }
        let ck = Checkpoint { architecture: arch, model, seed: 4, epoch: 7, adam: None };
        let mut bytes = Vec::new();
        ck.write(&mut bytes).unwrap();
        let back = Checkpoint::read(&bytes[..]).unwrap();
        assert_eq!(back.epoch, 7);
        assert!(!back.model.has_uninitialized_actnorm());
        let z = [0.3, -1.2, 0.5];
        assert_eq!(back.model.h[1].forward(&z).unwrap(), ck.model.h[1].forward(&z).unwrap());
    }

    #[test]
    fn rejects_garbage() {
        assert!(Checkpoint::read(&b"NOTACKPTxxxxxxxxxxxx"[..]).is_err());
        assert!(Checkpoint::read(&b"CEF"[..]).is_err());
    }
}
