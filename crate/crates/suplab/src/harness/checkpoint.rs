//! Binary checkpoints. Every container starts with a 4-byte ASCII magic and
//! a little-endian u32 version; integers are u32 LE, floats f64 LE. Loads
//! report the byte offset of the first defect.

use crate::classify::{LinearHead, MoeModel};
use crate::error::{Error, Result};
use crate::numeric::matrix::Matrix;
use crate::sae::{SaeModel, SaeVariant};
use std::io::Read;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MAGIC_SAE: &[u8; 4] = b"SPLB";
pub const MAGIC_HEAD: &[u8; 4] = b"SPLH";
pub const MAGIC_MOE: &[u8; 4] = b"SPLM";
pub const MAGIC_EMBED: &[u8; 4] = b"SPLE";

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn fail(&self, msg: String) -> Error {
        Error::Format { offset: self.pos as u64, msg }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(self.fail(format!(
                "truncated: need {n} bytes, {} remain",
                self.buf.len() - self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            self.pos = 0;
            return Err(self.fail(format!(
                "magic {:?} is not {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(expected)
            )));
        }
        let version = self.u32()?;
        if version != CHECKPOINT_VERSION {
            self.pos = 4;
            return Err(self.fail(format!(
                "version {version}, this build reads {CHECKPOINT_VERSION}"
            )));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(8 * n)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        Matrix::from_vec(rows, cols, self.f64s(rows * cols)?)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: format!("{} trailing bytes", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

struct Writer {
    out: Vec<u8>,
}

impl Writer {
    fn new(magic: &[u8; 4]) -> Self {
        let mut out = Vec::new();
        out.extend_from_slice(magic);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        Writer { out }
    }

    fn u8(&mut self, v: u8) {
        self.out.push(v);
    }

    fn u32(&mut self, v: usize) {
        self.out.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Ok(bytes)
}

pub fn save_sae(path: &Path, model: &SaeModel) -> Result<()> {
    let mut w = Writer::new(MAGIC_SAE);
    w.u32(model.encoder.rows());
    w.u32(model.encoder.cols());
    w.u32(model.s);
    w.u8(match model.variant {
        SaeVariant::TopK => 0,
        SaeVariant::Threshold => 1,
    });
    w.f64s(model.encoder.data());
    w.f64s(&model.enc_bias);
    w.f64s(model.decoder.data());
    w.f64s(&model.theta_act);
    std::fs::write(path, w.out)?;
    Ok(())
}

pub fn load_sae(path: &Path) -> Result<SaeModel> {
    let bytes = read_file(path)?;
    let mut c = Cursor::new(&bytes);
    c.magic(MAGIC_SAE)?;
    let d1 = c.u32()? as usize;
    let d2 = c.u32()? as usize;
    let s = c.u32()? as usize;
    let variant = match c.u8()? {
        0 => SaeVariant::TopK,
        1 => SaeVariant::Threshold,
        other => {
            return Err(Error::Format {
                offset: c.pos as u64 - 1,
                msg: format!("unknown variant tag {other}"),
            })
        }
    };
    let model = SaeModel {
        encoder: c.matrix(d1, d2)?,
        enc_bias: c.f64s(d1)?,
        decoder: c.matrix(d2, d1)?,
        theta_act: c.f64s(d1)?,
        s,
        variant,
    };
    c.finish()?;
    Ok(model)
}

pub fn save_head(path: &Path, head: &LinearHead) -> Result<()> {
    std::fs::write(path, head_bytes(head))?;
    Ok(())
}

fn head_bytes(head: &LinearHead) -> Vec<u8> {
    let mut w = Writer::new(MAGIC_HEAD);
    w.u32(head.classes());
    w.u32(head.dim());
    w.f64s(head.w.data());
    w.f64s(&head.b);
    w.out
}

fn head_from(c: &mut Cursor) -> Result<LinearHead> {
    let classes = c.u32()? as usize;
    let dim = c.u32()? as usize;
    Ok(LinearHead { w: c.matrix(classes, dim)?, b: c.f64s(classes)? })
}

pub fn load_head(path: &Path) -> Result<LinearHead> {
    let bytes = read_file(path)?;
    let mut c = Cursor::new(&bytes);
    c.magic(MAGIC_HEAD)?;
    let head = head_from(&mut c)?;
    c.finish()?;
    Ok(head)
}

pub fn save_moe(path: &Path, model: &MoeModel) -> Result<()> {
    let mut w = Writer::new(MAGIC_MOE);
    w.u32(model.experts.len());
    w.u32(model.base.classes());
    w.u32(model.centroids.cols());
    w.f64s(model.centroids.data());
    w.f64s(model.base.w.data());
    w.f64s(&model.base.b);
    for e in &model.experts {
        w.f64s(e.w.data());
        w.f64s(&e.b);
    }
    std::fs::write(path, w.out)?;
    Ok(())
}

pub fn load_moe(path: &Path) -> Result<MoeModel> {
    let bytes = read_file(path)?;
    let mut c = Cursor::new(&bytes);
    c.magic(MAGIC_MOE)?;
    let experts = c.u32()? as usize;
    let classes = c.u32()? as usize;
    let dim = c.u32()? as usize;
    let centroids = c.matrix(experts, dim)?;
    let base = LinearHead { w: c.matrix(classes, dim)?, b: c.f64s(classes)? };
    let mut heads = Vec::with_capacity(experts);
    for _ in 0..experts {
        heads.push(LinearHead { w: c.matrix(classes, dim)?, b: c.f64s(classes)? });
    }
    c.finish()?;
    Ok(MoeModel { centroids, experts: heads, base })
}

/// Point cloud with optional integer labels; the embedding container the
/// loaders in `embeddings` fall back to when the file is not CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub points: Matrix,
    pub labels: Option<Vec<usize>>,
}

pub fn save_embeddings(path: &Path, emb: &Embeddings) -> Result<()> {
    if let Some(labels) = &emb.labels {
        if labels.len() != emb.points.rows() {
            return Err(Error::Dimension(format!(
                "{} labels for {} points",
                labels.len(),
                emb.points.rows()
            )));
        }
    }
    let mut w = Writer::new(MAGIC_EMBED);
    w.u32(emb.points.rows());
    w.u32(emb.points.cols());
    w.u8(emb.labels.is_some() as u8);
    w.f64s(emb.points.data());
    if let Some(labels) = &emb.labels {
        for &l in labels {
            w.u32(l);
        }
    }
    std::fs::write(path, w.out)?;
    Ok(())
}

pub fn load_embeddings_binary(path: &Path) -> Result<Embeddings> {
    let bytes = read_file(path)?;
    parse_embeddings(&bytes)
}

pub fn parse_embeddings(bytes: &[u8]) -> Result<Embeddings> {
    let mut c = Cursor::new(bytes);
    c.magic(MAGIC_EMBED)?;
    let n = c.u32()? as usize;
    let d = c.u32()? as usize;
    let has_labels = c.u8()? != 0;
    let points = c.matrix(n, d)?;
    let labels = if has_labels {
        let mut ls = Vec::with_capacity(n);
        for _ in 0..n {
            ls.push(c.u32()? as usize);
        }
        Some(ls)
    } else {
        None
    };
    c.finish()?;
    Ok(Embeddings { points, labels })
}
