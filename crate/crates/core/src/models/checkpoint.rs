//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! "EDGANCKP" | u32 version | 32-byte SHA-256 of the model configs
//! "GEN\0" | u32 n | n tensors      (generator, declaration order)
//! "DIS\0" | u32 n | n tensors      (discriminator)
//! ["OPT\0" | generator Adam state | discriminator Adam state]
//! "END\0"
//! ```
//!
//! A tensor is `u32 ndim | u64 dims... | f64 values...`.

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::discriminator::{Discriminator, DiscriminatorConfig};
use super::generator::{Generator, GeneratorConfig};
use crate::autodiff::{AdamState, Module, RngState, Stream, Tensor};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"EDGANCKP";
const VERSION: u32 = 1;

#[derive(Serialize)]
struct ConfigPair<'a> {
    generator: &'a GeneratorConfig,
    discriminator: &'a DiscriminatorConfig,
}

/// SHA-256 over the JSON form of both model configs.
pub fn config_digest(gen: &GeneratorConfig, disc: &DiscriminatorConfig) -> [u8; 32] {
    let json = serde_json::to_vec(&ConfigPair {
        generator: gen,
        discriminator: disc,
    })
    .expect("model configs serialise");
    Sha256::digest(&json).into()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub generator: Generator,
    pub discriminator: Discriminator,
    /// Optimiser state for generator and discriminator, when saved.
    pub optimizers: Option<(AdamState, AdamState)>,
}

fn write_module(w: &mut Writer, tag: &[u8], m: &dyn Module) {
    w.bytes(tag);
    let ps = m.parameters();
    w.u32(ps.len() as u32);
    for p in ps {
        w.tensor(&p.value);
    }
}

fn read_module(r: &mut Reader<'_>, tag: &[u8], m: &mut dyn Module) -> Result<()> {
    r.expect(tag)?;
    let n = r.u32()? as usize;
    let mut ps = m.parameters_mut();
    if n != ps.len() {
        return Err(Error::Format(format!("checkpoint holds {} tensors, model has {}", n, ps.len())));
    }
    for (i, p) in ps.iter_mut().enumerate() {
        let t = r.tensor()?;
        if t.shape() != p.shape() {
            return Err(Error::Format(format!(
                "tensor {} has shape {:?}, model expects {:?}",
                i,
                t.shape(),
                p.shape()
            )));
        }
        p.value = t;
    }
    Ok(())
}

fn write_adam(w: &mut Writer, s: &AdamState) {
    w.u64(s.step);
    w.u32(s.m.len() as u32);
    for t in s.m.iter().chain(&s.v) {
        w.tensor(t);
    }
}

fn read_adam(r: &mut Reader<'_>, m: &dyn Module) -> Result<AdamState> {
    let step = r.u64()?;
    let n = r.u32()? as usize;
    let shapes: Vec<Vec<usize>> = m.parameters().iter().map(|p| p.shape().to_vec()).collect();
    if n != shapes.len() {
        return Err(Error::Format(format!("optimiser state for {} tensors, model has {}", n, shapes.len())));
    }
    let read = |r: &mut Reader<'_>| -> Result<Vec<Tensor>> {
        shapes
            .iter()
            .map(|s| {
                let t = r.tensor()?;
                if t.shape() != s.as_slice() {
                    return Err(Error::Format(format!("optimiser moment shape {:?}, expected {:?}", t.shape(), s)));
                }
                Ok(t)
            })
            .collect()
    };
    let m1 = read(r)?;
    let v = read(r)?;
    Ok(AdamState { step, m: m1, v })
}

pub fn encode_checkpoint(gen: &Generator, disc: &Discriminator, optimizers: Option<(&AdamState, &AdamState)>) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.bytes(&config_digest(&gen.config, &disc.config));
    write_module(&mut w, b"GEN\0", gen);
    write_module(&mut w, b"DIS\0", disc);
    if let Some((g, d)) = optimizers {
        w.bytes(b"OPT\0");
        write_adam(&mut w, g);
        write_adam(&mut w, d);
    }
    w.bytes(b"END\0");
    w.finish()
}

/// Restores a checkpoint written for exactly these configs.
pub fn decode_checkpoint(bytes: &[u8], gen_cfg: &GeneratorConfig, disc_cfg: &DiscriminatorConfig) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes);
    r.expect(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("checkpoint version {} (supported: {})", version, VERSION)));
    }
    let stored = r.take(32)?;
    let expected = config_digest(gen_cfg, disc_cfg);
    if stored != expected {
        return Err(Error::DigestMismatch {
            expected: hex::encode(expected),
            found: hex::encode(stored),
        });
    }
    let mut scratch = RngState::new(0, Stream::Init);
    let mut generator = Generator::new(gen_cfg.clone(), &mut scratch)?;
    let mut discriminator = Discriminator::new(disc_cfg.clone(), &mut scratch)?;
    read_module(&mut r, b"GEN\0", &mut generator)?;
    read_module(&mut r, b"DIS\0", &mut discriminator)?;
    let tag = r.take(4)?;
    let optimizers = match tag {
        b"OPT\0" => {
            let g = read_adam(&mut r, &generator)?;
            let d = read_adam(&mut r, &discriminator)?;
            r.expect(b"END\0")?;
            Some((g, d))
        }
        b"END\0" => None,
        other => return Err(Error::Format(format!("unexpected checkpoint section {:?}", other))),
    };
    if !r.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after checkpoint", r.remaining())));
    }
    Ok(Checkpoint {
        generator,
        discriminator,
        optimizers,
    })
}
