//! Versioned binary checkpoint.
//!
//! ```text
//! magic "BGCKPT\0\0" | version u32 | model kind u8
//! section*: tag [u8; 4] | payload length u64 | payload
//!   CONF  config as JSON
//!   META  epoch u64, seed u64
//!   LAYR  network count u32; per network: name (u16 length + bytes),
//!         layer count u32, layers (tag u8 + fields)
//!   PARM  every parameter and BatchNorm running statistic, f64
//! crc32 u32 over everything before it
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::{build_model, Encoder, GanConfig, GanModel, ModelKind};
use crate::error::{Error, Result};
use crate::nn::{Layer, LayerSpec, Network};
use crate::rng::Rng;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"BGCKPT\0\0";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config: GanConfig,
    pub epoch: usize,
    pub model: GanModel,
}

impl Checkpoint {
    pub fn new(config: GanConfig, epoch: usize, model: GanModel) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config,
            epoch,
            model,
        }
    }

    /// Checkpoint of the freshly initialized model for `config`.
    pub fn untrained(config: &GanConfig) -> Result<Self> {
        Ok(Self::new(config.clone(), 0, build_model(config)?))
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model.kind
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.push(self.model.kind.tag());

        section(&mut out, b"CONF", &serde_json::to_vec(&self.config)?);

        let mut meta = Vec::new();
        meta.extend_from_slice(&(self.epoch as u64).to_le_bytes());
        meta.extend_from_slice(&self.config.seed.to_le_bytes());
        section(&mut out, b"META", &meta);

        let nets = self.model.networks();
        let mut layr = Vec::new();
        layr.extend_from_slice(&(nets.len() as u32).to_le_bytes());
        let mut parm = Vec::new();
        for (name, net) in &nets {
            layr.extend_from_slice(&(name.len() as u16).to_le_bytes());
            layr.extend_from_slice(name.as_bytes());
            layr.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
            for layer in net.layers() {
                write_spec(&mut layr, &layer.spec());
                for v in layer_values(layer) {
                    parm.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        section(&mut out, b"LAYR", &layr);
        section(&mut out, b"PARM", &parm);

        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 5 {
            return Err(Error::ChecksumMismatch);
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        if bytes.len() < 17 {
            return Err(Error::ChecksumMismatch);
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
            return Err(Error::ChecksumMismatch);
        }
        let kind = ModelKind::from_tag(body[12])
            .ok_or_else(|| Error::CorruptCheckpoint(format!("unknown model tag {}", body[12])))?;

        let mut r = Reader::new(&body[13..]);
        let conf = r.section(b"CONF")?;
        let config: GanConfig = serde_json::from_slice(conf)
            .map_err(|e| Error::CorruptCheckpoint(format!("config: {e}")))?;
        if config.model_kind != kind {
            return Err(Error::CorruptCheckpoint("model kind disagrees with config".into()));
        }
        let mut meta = Reader::new(r.section(b"META")?);
        let epoch = meta.u64()? as usize;
        let seed = meta.u64()?;
        if seed != config.seed {
            return Err(Error::CorruptCheckpoint("seed disagrees with config".into()));
        }
        let mut layr = Reader::new(r.section(b"LAYR")?);
        let mut parm = Reader::new(r.section(b"PARM")?);
        if !r.is_done() {
            return Err(Error::CorruptCheckpoint("trailing bytes".into()));
        }

        let count = layr.u32()? as usize;
        let mut nets = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = layr.u16()? as usize;
            let name = String::from_utf8(layr.take(name_len)?.to_vec())
                .map_err(|_| Error::CorruptCheckpoint("network name".into()))?;
            let n_layers = layr.u32()? as usize;
            let mut layers = Vec::with_capacity(n_layers);
            // scratch rng: every value is overwritten from PARM
            let mut scratch = Rng::new(0);
            for _ in 0..n_layers {
                let spec = read_spec(&mut layr)?;
                let mut layer = Layer::new(&spec, &mut scratch)
                    .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
                fill_layer(&mut layer, &mut parm)?;
                layers.push(layer);
            }
            let net = Network::from_layers(layers)
                .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
            nets.push((name, net));
        }
        if !parm.is_done() || !layr.is_done() {
            return Err(Error::CorruptCheckpoint("section length mismatch".into()));
        }
        let model = assemble(kind, nets)?;
        Ok(Self {
            version,
            config,
            epoch,
            model,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    Checkpoint::from_bytes(&bytes)
}

fn assemble(kind: ModelKind, nets: Vec<(String, Network)>) -> Result<GanModel> {
    let take = |name: &str| -> Option<Network> {
        nets.iter().find(|(n, _)| n == name).map(|(_, net)| net.clone())
    };
    let missing = |n: &str| Error::CorruptCheckpoint(format!("missing network {n}"));
    let generator = take("generator").ok_or_else(|| missing("generator"))?;
    let discriminator = take("discriminator").ok_or_else(|| missing("discriminator"))?;
    let encoder = match kind {
        ModelKind::Vaegan => Some(Encoder {
            trunk: take("encoder").ok_or_else(|| missing("encoder"))?,
            mu: take("encoder_mu").ok_or_else(|| missing("encoder_mu"))?,
            logvar: take("encoder_logvar").ok_or_else(|| missing("encoder_logvar"))?,
        }),
        _ => None,
    };
    Ok(GanModel {
        kind,
        generator,
        discriminator,
        encoder,
    })
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn write_spec(out: &mut Vec<u8>, spec: &LayerSpec) {
    match *spec {
        LayerSpec::FullyConnected { inputs, outputs } => {
            out.push(0);
            out.extend_from_slice(&(inputs as u64).to_le_bytes());
            out.extend_from_slice(&(outputs as u64).to_le_bytes());
        }
        LayerSpec::LeakyRelu { slope } => {
            out.push(1);
            out.extend_from_slice(&slope.to_le_bytes());
        }
        LayerSpec::Relu => out.push(2),
        LayerSpec::Tanh => out.push(3),
        LayerSpec::Sigmoid => out.push(4),
        LayerSpec::BatchNorm {
            features,
            momentum,
            epsilon,
        } => {
            out.push(5);
            out.extend_from_slice(&(features as u64).to_le_bytes());
            out.extend_from_slice(&momentum.to_le_bytes());
            out.extend_from_slice(&epsilon.to_le_bytes());
        }
    }
}

fn read_spec(r: &mut Reader<'_>) -> Result<LayerSpec> {
    Ok(match r.u8()? {
        0 => LayerSpec::FullyConnected {
            inputs: r.u64()? as usize,
            outputs: r.u64()? as usize,
        },
        1 => LayerSpec::LeakyRelu { slope: r.f64()? },
        2 => LayerSpec::Relu,
        3 => LayerSpec::Tanh,
        4 => LayerSpec::Sigmoid,
        5 => LayerSpec::BatchNorm {
            features: r.u64()? as usize,
            momentum: r.f64()?,
            epsilon: r.f64()?,
        },
        t => return Err(Error::CorruptCheckpoint(format!("unknown layer tag {t}"))),
    })
}

fn layer_values(layer: &Layer) -> Vec<f64> {
    match layer {
        Layer::FullyConnected { weight, bias } => {
            weight.value.iter().chain(&bias.value).copied().collect()
        }
        Layer::BatchNorm(bn) => bn
            .gamma
            .value
            .iter()
            .chain(&bn.beta.value)
            .chain(&bn.running_mean)
            .chain(&bn.running_var)
            .copied()
            .collect(),
        _ => Vec::new(),
    }
}

fn fill_layer(layer: &mut Layer, r: &mut Reader<'_>) -> Result<()> {
    let mut fill = |dst: &mut [f64]| -> Result<()> {
        for v in dst.iter_mut() {
            *v = r.f64()?;
        }
        Ok(())
    };
    match layer {
        Layer::FullyConnected { weight, bias } => {
            fill(&mut weight.value)?;
            fill(&mut bias.value)?;
        }
        Layer::BatchNorm(bn) => {
            fill(&mut bn.gamma.value)?;
            fill(&mut bn.beta.value)?;
            fill(&mut bn.running_mean)?;
            fill(&mut bn.running_var)?;
        }
        _ => {}
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CorruptCheckpoint("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn section(&mut self, tag: &[u8; 4]) -> Result<&'a [u8]> {
        let found = self.take(4)?;
        if found != tag {
            return Err(Error::CorruptCheckpoint(format!(
                "expected section {}, found {}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(found)
            )));
        }
        let len = self.u64()? as usize;
        self.take(len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ModelKind) -> Checkpoint {
        let mut c = GanConfig::new(kind);
        c.beat_length = 16;
        c.seed = 3;
        Checkpoint::untrained(&c).unwrap()
    }

    #[test]
    fn bytes_round_trip_all_kinds() {
        for kind in [ModelKind::Classic, ModelKind::Vaegan, ModelKind::WganFc] {
            let c = small(kind);
            let back = Checkpoint::from_bytes(&c.to_bytes().unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn truncated_is_checksum_error() {
        let bytes = small(ModelKind::Classic).to_bytes().unwrap();
        let cut = &bytes[..bytes.len() - 100];
        assert!(matches!(Checkpoint::from_bytes(cut), Err(Error::ChecksumMismatch)));
        assert!(matches!(Checkpoint::from_bytes(&bytes[..10]), Err(Error::ChecksumMismatch)));
    }

    #[test]
    fn flipped_byte_is_checksum_error() {
        let mut bytes = small(ModelKind::Classic).to_bytes().unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::ChecksumMismatch)));
    }

    #[test]
    fn future_version_rejected() {
        let mut bytes = small(ModelKind::Classic).to_bytes().unwrap();
        bytes[8..12].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::VersionMismatch { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn bad_magic_rejected() {
        let mut bytes = small(ModelKind::Classic).to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::CorruptCheckpoint(_))));
    }
}
