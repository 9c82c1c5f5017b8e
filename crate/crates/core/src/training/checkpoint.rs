//! Binary checkpoint of a trained model.
//!
//! All integers and reals are little-endian:
//!
//! ```text
//! magic      4 bytes  "CRCK"
//! version    u32      1
//! kind       u8       0 MF, 1 VBPR, 2 DeepStyle, 3 AMR, 4 DVBPR, 5 CausalRec
//! fusion     u8       0 product, 1 sum
//! config     u32 length, then that many bytes of TrainConfig as JSON
//! shape      5 x u64  n_users, n_items, n_categories, dim, visual_dim
//! tables     9 x { u8 tag, u64 length, length x f64 }
//!            in the order alpha, beta_u, beta_i, gamma_u, gamma_i,
//!            theta_u, E, c, delta; unallocated tables have length 0
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::config::{Fusion, ModelKind, TrainConfig};
use crate::error::{Error, Result};
use crate::params::{ParamSet, Shape, Table};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CRCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn kind_tag(kind: ModelKind) -> u8 {
    ModelKind::ALL.iter().position(|&k| k == kind).expect("kind listed in ALL") as u8
}

pub fn write_checkpoint(mut w: impl Write, params: &ParamSet, config: &TrainConfig) -> std::io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&[kind_tag(params.kind)])?;
    w.write_all(&[match params.fusion {
        Fusion::Product => 0,
        Fusion::Sum => 1,
    }])?;
    let json = serde_json::to_vec(config).expect("config is always serializable");
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    let s = params.shape;
    for n in [s.n_users, s.n_items, s.n_categories, s.dim, s.visual_dim] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for (tag, t) in Table::ALL.into_iter().enumerate() {
        let table = params.table(t);
        w.write_all(&[tag as u8])?;
        w.write_all(&(table.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(table.len() * 8);
        for x in table {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &ParamSet, config: &TrainConfig) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, params, config).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::format(self.path, "truncated checkpoint"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::format(self.path, "size does not fit in memory"))
    }
}

pub fn read_checkpoint(mut r: impl Read, path: &Path) -> Result<(ParamSet, TrainConfig)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { bytes: &bytes, path };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let kind = *ModelKind::ALL
        .get(c.u8()? as usize)
        .ok_or_else(|| Error::format(path, "unknown model kind"))?;
    let fusion = match c.u8()? {
        0 => Fusion::Product,
        1 => Fusion::Sum,
        t => return Err(Error::format(path, format!("unknown fusion tag {t}"))),
    };
    let n = c.u32()? as usize;
    let config: TrainConfig =
        serde_json::from_slice(c.take(n)?).map_err(|e| Error::format(path, format!("config: {e}")))?;
    let shape = Shape {
        n_users: c.usize()?,
        n_items: c.usize()?,
        n_categories: c.usize()?,
        dim: c.usize()?,
        visual_dim: c.usize()?,
    };
    let mut params = ParamSet::zeros(kind, fusion, shape);
    for (tag, t) in Table::ALL.into_iter().enumerate() {
        if c.u8()? as usize != tag {
            return Err(Error::format(path, format!("expected table {}", t.name())));
        }
        let len = c.usize()?;
        let expect = params.table(t).len();
        if len != expect {
            return Err(Error::format(
                path,
                format!("table {} has {len} entries, expected {expect}", t.name()),
            ));
        }
        let raw = c.take(len.checked_mul(8).ok_or_else(|| Error::format(path, "table too large"))?)?;
        for (x, b) in params.table_mut(t).iter_mut().zip(raw.chunks_exact(8)) {
            *x = f64::from_le_bytes(b.try_into().unwrap());
        }
    }
    if !c.bytes.is_empty() {
        return Err(Error::format(path, "trailing bytes after checkpoint"));
    }
    Ok((params, config))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ParamSet, TrainConfig)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file), path)
}
