//! On-disk formats.
//!
//! Interactions: UTF-8 text, one `user<TAB>item[<TAB>timestamp]` record per
//! line, `#` starts a comment line, timestamp `-1` means absent.
//!
//! Features (binary, little-endian):
//!
//! ```text
//! magic  "VFT1"          4 bytes
//! dim    u32
//! count  u64
//! count x { len u16, token [u8; len] (UTF-8), values [f32; dim] }
//! ```
//!
//! Features (TSV fallback): `token<TAB>v1<TAB>...<TAB>vD`, with `D` supplied
//! by the caller.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FeatureStore, RawInteractions};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"VFT1";

pub fn load_interactions(path: impl AsRef<Path>) -> Result<RawInteractions> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_interactions(BufReader::new(file), path)
}

pub fn parse_interactions(reader: impl BufRead, path: &Path) -> Result<RawInteractions> {
    let mut raw = RawInteractions::default();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(format!(
                "expected 2 or 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(parse_err("empty user or item token".into()));
        }
        let ts = match fields.get(2) {
            None => None,
            Some(t) => match t.trim().parse::<i64>() {
                Ok(-1) => None,
                Ok(v) => Some(v),
                Err(_) => return Err(parse_err(format!("timestamp '{t}' is not an integer"))),
            },
        };
        raw.push(fields[0], fields[1], ts);
    }
    Ok(raw)
}

pub fn write_interactions(path: impl AsRef<Path>, raw: &RawInteractions) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "# user\titem\ttimestamp").map_err(io)?;
    for r in &raw.records {
        match r.timestamp {
            Some(t) => writeln!(out, "{}\t{}\t{}", r.user, r.item, t),
            None => writeln!(out, "{}\t{}", r.user, r.item),
        }
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Loads a feature file. Files starting with the binary magic are read as
/// binary; otherwise `tsv_dim` must be given and the file is read as TSV.
pub fn load_visual_features(path: impl AsRef<Path>, tsv_dim: Option<usize>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(FEATURE_MAGIC) {
        return read_features_binary(&bytes[..], path);
    }
    match tsv_dim {
        Some(dim) => read_features_tsv(&bytes[..], dim, path),
        None => Err(Error::format(
            path,
            "bad magic (expected VFT1); pass a feature dimension to read TSV",
        )),
    }
}

pub fn read_features_binary(mut r: impl Read, path: &Path) -> Result<FeatureStore> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, path, "header")?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::format(path, "bad magic (expected VFT1)"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    read_exact(&mut r, &mut b4, path, "header")?;
    let dim = u32::from_le_bytes(b4) as usize;
    read_exact(&mut r, &mut b8, path, "header")?;
    let count = u64::from_le_bytes(b8);
    if dim == 0 {
        return Err(Error::format(path, "dimension must be >= 1"));
    }
    let mut store = FeatureStore::new(dim)?;
    let mut values = vec![0f32; dim];
    let mut raw = vec![0u8; dim * 4];
    for rec in 0..count {
        let what = format!("record {rec}");
        let mut b2 = [0u8; 2];
        read_exact(&mut r, &mut b2, path, &what)?;
        let mut token = vec![0u8; u16::from_le_bytes(b2) as usize];
        read_exact(&mut r, &mut token, path, &what)?;
        let token = String::from_utf8(token)
            .map_err(|_| Error::format(path, format!("{what}: token is not UTF-8")))?;
        read_exact(&mut r, &mut raw, path, &what)?;
        for (v, chunk) in values.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        store
            .insert(token, &values)
            .map_err(|e| Error::format(path, format!("{what}: {e}")))?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing bytes after last record"));
    }
    Ok(store)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(path, format!("truncated {what}")),
        _ => Error::io(path, e),
    })
}

pub fn read_features_tsv(r: impl BufRead, dim: usize, path: &Path) -> Result<FeatureStore> {
    if dim == 0 {
        return Err(Error::format(path, "dimension must be >= 1"));
    }
    let mut store = FeatureStore::new(dim)?;
    let mut values = Vec::with_capacity(dim);
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let mut fields = line.split('\t');
        let token = fields.next().unwrap_or_default();
        values.clear();
        for f in fields {
            values.push(
                f.trim()
                    .parse::<f32>()
                    .map_err(|_| err(format!("'{f}' is not a number")))?,
            );
        }
        if values.len() != dim {
            return Err(err(format!(
                "expected {dim} values after the token, found {}",
                values.len()
            )));
        }
        store
            .insert(token, &values)
            .map_err(|e| err(e.to_string()))?;
    }
    Ok(store)
}

pub fn write_features_binary(path: impl AsRef<Path>, store: &FeatureStore) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    out.write_all(FEATURE_MAGIC).map_err(io)?;
    out.write_all(&(store.dim() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(store.len() as u64).to_le_bytes()).map_err(io)?;
    for (token, values) in store.iter() {
        let len = u16::try_from(token.len())
            .map_err(|_| Error::Data(format!("token '{token}' longer than 65535 bytes")))?;
        out.write_all(&len.to_le_bytes()).map_err(io)?;
        out.write_all(token.as_bytes()).map_err(io)?;
        for v in values {
            out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn write_features_tsv(path: impl AsRef<Path>, store: &FeatureStore) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    for (token, values) in store.iter() {
        write!(out, "{token}").map_err(io)?;
        for v in values {
            write!(out, "\t{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// `item<TAB>category` lines.
pub fn load_categories(path: impl AsRef<Path>) -> Result<HashMap<String, String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut f = line.split('\t');
        match (f.next(), f.next(), f.next()) {
            (Some(item), Some(cat), None) if !item.is_empty() && !cat.is_empty() => {
                map.insert(item.to_string(), cat.to_string());
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: "expected item<TAB>category".into(),
                })
            }
        }
    }
    Ok(map)
}

/// `user<TAB>item<TAB>score` for every pair, scores as full-precision reals.
pub fn write_ground_truth(
    path: impl AsRef<Path>,
    user_tokens: &[String],
    item_tokens: &[String],
    scores: &[f64],
) -> Result<()> {
    let path = path.as_ref();
    if scores.len() != user_tokens.len() * item_tokens.len() {
        return Err(Error::Shape {
            expected: user_tokens.len() * item_tokens.len(),
            got: scores.len(),
        });
    }
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "# user\titem\tscore").map_err(io)?;
    for (u, row) in user_tokens.iter().zip(scores.chunks(item_tokens.len())) {
        for (i, s) in item_tokens.iter().zip(row) {
            writeln!(out, "{u}\t{i}\t{s}").map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
