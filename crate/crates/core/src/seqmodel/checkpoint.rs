//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes   "MTLPROG\0"
//! version    u32 LE
//! header     u32 LE length + JSON {kind, channel, config, normalizer, reg}
//! tensors    u32 LE count, then per tensor:
//!              u16 LE name length, UTF-8 name, u32 LE rows, u32 LE cols,
//!              rows*cols f64 LE
//! checksum   32 bytes  SHA-256 of everything above
//! ```
//!
//! Parameters are stored as raw IEEE-754 bits, so a round trip is bit-exact.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataprep::Normalizer;
use crate::error::{Error, Result};
use crate::numeric::{ParamSet, RegularizationSpec};
use crate::seqmodel::model::{MtlModel, StlModel};
use crate::seqmodel::{Channel, ModelConfig};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"MTLPROG\0";

#[derive(Clone, Debug, PartialEq)]
pub enum Checkpoint {
    Mtl(MtlModel),
    Stl(StlModel),
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    channel: Option<Channel>,
    config: ModelConfig,
    normalizer: Normalizer,
    reg: RegularizationSpec,
}

fn write_tensors(params: &dyn ParamSet, out: &mut Vec<u8>) {
    let mut tensors: Vec<(String, (usize, usize), Vec<f64>)> = Vec::new();
    params.visit("", &mut |name, shape, v| {
        tensors.push((name.to_string(), shape, v.to_vec()))
    });
    out.extend((tensors.len() as u32).to_le_bytes());
    for (name, (rows, cols), values) in tensors {
        out.extend((name.len() as u16).to_le_bytes());
        out.extend(name.as_bytes());
        out.extend((rows as u32).to_le_bytes());
        out.extend((cols as u32).to_le_bytes());
        for v in values {
            out.extend(v.to_bits().to_le_bytes());
        }
    }
}

pub fn serialize(checkpoint: &Checkpoint) -> Vec<u8> {
    let (header, params): (Header, &dyn ParamSet) = match checkpoint {
        Checkpoint::Mtl(m) => (
            Header {
                kind: "mtl".into(),
                channel: None,
                config: m.config,
                normalizer: m.normalizer,
                reg: m.reg,
            },
            &m.params,
        ),
        Checkpoint::Stl(m) => (
            Header {
                kind: "stl".into(),
                channel: Some(m.channel),
                config: m.config,
                normalizer: m.normalizer,
                reg: m.reg,
            },
            &m.params,
        ),
    };
    let mut out = Vec::new();
    out.extend(MAGIC);
    out.extend(CHECKPOINT_VERSION.to_le_bytes());
    let json = serde_json::to_vec(&header).expect("header serializes");
    out.extend((json.len() as u32).to_le_bytes());
    out.extend(json);
    write_tensors(params, &mut out);
    let digest = Sha256::digest(&out);
    out.extend(digest.as_slice());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CorruptCheckpoint("unexpected end of payload".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        )))
    }
}

fn read_tensors(reader: &mut Reader<'_>, params: &mut dyn ParamSet) -> Result<()> {
    let mut expected: Vec<(String, (usize, usize))> = Vec::new();
    params.visit("", &mut |name, shape, _| {
        expected.push((name.to_string(), shape))
    });
    let count = reader.u32()? as usize;
    if count != expected.len() {
        return Err(Error::CorruptCheckpoint(format!(
            "expected {} tensors for this config, found {count}",
            expected.len()
        )));
    }
    let mut flat = Vec::new();
    for (name, (rows, cols)) in expected {
        let len = reader.u16()? as usize;
        let found = std::str::from_utf8(reader.take(len)?)
            .map_err(|_| Error::CorruptCheckpoint("tensor name is not UTF-8".into()))?;
        if found != name {
            return Err(Error::CorruptCheckpoint(format!(
                "expected tensor `{name}`, found `{found}`"
            )));
        }
        let (r, c) = (reader.u32()? as usize, reader.u32()? as usize);
        if (r, c) != (rows, cols) {
            return Err(Error::CorruptCheckpoint(format!(
                "tensor `{name}` is {r}x{c}, config implies {rows}x{cols}"
            )));
        }
        for _ in 0..r * c {
            let v = reader.f64()?;
            if !v.is_finite() {
                return Err(Error::CorruptCheckpoint(format!(
                    "non-finite value in `{name}`"
                )));
            }
            flat.push(v);
        }
    }
    params.unflatten(&flat);
    Ok(())
}

pub fn deserialize(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 4 + 32 {
        return Err(Error::CorruptCheckpoint("payload too short".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
    }
    let mut reader = Reader { buf: body, pos: 12 };
    let hlen = reader.u32()? as usize;
    let header: Header = serde_json::from_slice(reader.take(hlen)?)
        .map_err(|e| Error::CorruptCheckpoint(format!("header: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| Error::CorruptCheckpoint(format!("header config: {e}")))?;
    let checkpoint = match (header.kind.as_str(), header.channel) {
        ("mtl", None) => {
            let mut m = MtlModel::zeros(header.config, header.normalizer);
            m.reg = header.reg;
            read_tensors(&mut reader, &mut m.params)?;
            Checkpoint::Mtl(m)
        }
        ("stl", Some(channel)) => {
            let mut m = StlModel::zeros(header.config, channel, header.normalizer);
            m.reg = header.reg;
            read_tensors(&mut reader, &mut m.params)?;
            Checkpoint::Stl(m)
        }
        (kind, _) => {
            return Err(Error::CorruptCheckpoint(format!(
                "unknown model kind `{kind}`"
            )))
        }
    };
    if reader.pos != body.len() {
        return Err(Error::CorruptCheckpoint(
            "trailing bytes after tensors".into(),
        ));
    }
    Ok(checkpoint)
}

impl MtlModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        serialize(&Checkpoint::Mtl(self.clone()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match deserialize(bytes)? {
            Checkpoint::Mtl(m) => Ok(m),
            Checkpoint::Stl(_) => Err(Error::invalid("checkpoint holds a single-task model")),
        }
    }
}

impl StlModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        serialize(&Checkpoint::Stl(self.clone()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match deserialize(bytes)? {
            Checkpoint::Stl(m) => Ok(m),
            Checkpoint::Mtl(_) => Err(Error::invalid("checkpoint holds a multi-task model")),
        }
    }
}
