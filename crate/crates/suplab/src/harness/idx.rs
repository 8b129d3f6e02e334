//! IDX tensor files (the MNIST container): big-endian magic
//! [0, 0, dtype, ndim], one big-endian u32 size per dimension, then raw
//! data. Only the unsigned-byte dtype (0x08) is stored by MNIST and that is
//! all the loader accepts.

use crate::error::{Error, Result};
use crate::numeric::matrix::Matrix;
use std::io::Read;
use std::path::{Path, PathBuf};

pub const IDX_UBYTE: u8 = 0x08;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxData {
    pub dtype: u8,
    pub shape: Vec<usize>,
    pub bytes: Vec<u8>,
}

impl IdxData {
    pub fn elements(&self) -> usize {
        self.shape.iter().product()
    }
}

fn be_u32(buf: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if end > buf.len() {
        return Err(Error::Format {
            offset: buf.len() as u64,
            msg: format!("truncated: need {end} bytes for a u32 at offset {offset}"),
        });
    }
    Ok(u32::from_be_bytes([buf[offset], buf[offset + 1], buf[offset + 2], buf[offset + 3]]))
}

/// Parses an IDX file. Structural defects report the byte offset at fault.
pub fn load_idx(path: &Path) -> Result<IdxData> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_idx(&bytes)
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    if bytes.len() < 4 {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            msg: "file shorter than the 4-byte magic".into(),
        });
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        let offset = if bytes[0] != 0 { 0 } else { 1 };
        return Err(Error::Format {
            offset,
            msg: format!("bad magic: leading bytes {:#04x} {:#04x}", bytes[0], bytes[1]),
        });
    }
    let dtype = bytes[2];
    if dtype != IDX_UBYTE {
        return Err(Error::Format {
            offset: 2,
            msg: format!("unsupported dtype {dtype:#04x}, expected ubyte (0x08)"),
        });
    }
    let ndim = bytes[3] as usize;
    if ndim == 0 {
        return Err(Error::Format { offset: 3, msg: "zero-dimensional tensor".into() });
    }
    let mut shape = Vec::with_capacity(ndim);
    for d in 0..ndim {
        shape.push(be_u32(bytes, 4 + 4 * d)? as usize);
    }
    let data_start = 4 + 4 * ndim;
    let expected: usize = shape.iter().product();
    let got = bytes.len() - data_start;
    if got != expected {
        return Err(Error::Format {
            offset: data_start as u64 + got.min(expected) as u64,
            msg: format!("payload holds {got} bytes, shape {shape:?} needs {expected}"),
        });
    }
    Ok(IdxData { dtype, shape, bytes: bytes[data_start..].to_vec() })
}

pub fn write_idx(path: &Path, data: &IdxData) -> Result<()> {
    if data.bytes.len() != data.elements() {
        return Err(Error::Dimension(format!(
            "{} bytes for shape {:?}",
            data.bytes.len(),
            data.shape
        )));
    }
    let mut out = vec![0u8, 0, data.dtype, data.shape.len() as u8];
    for &d in &data.shape {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&data.bytes);
    std::fs::write(path, out)?;
    Ok(())
}

/// One MNIST split held in byte form; features materialize on demand as
/// pixels scaled to [0, 1].
#[derive(Debug, Clone)]
pub struct MnistSplit {
    pub images: Vec<u8>,
    pub count: usize,
    pub dim: usize,
    pub labels: Vec<usize>,
}

impl MnistSplit {
    /// Feature rows for the given sample indices, pixels in [0, 1].
    pub fn features(&self, indices: &[usize]) -> Result<Matrix> {
        let mut m = Matrix::zeros(indices.len(), self.dim);
        for (r, &idx) in indices.iter().enumerate() {
            if idx >= self.count {
                return Err(Error::Data(format!(
                    "sample {idx} outside split of {}",
                    self.count
                )));
            }
            let src = &self.images[idx * self.dim..(idx + 1) * self.dim];
            for (v, &px) in m.row_mut(r).iter_mut().zip(src) {
                *v = px as f64 / 255.0;
            }
        }
        Ok(m)
    }

    pub fn labels_for(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: MnistSplit,
    pub test: MnistSplit,
}

/// Dataset root: SUPLAB_DATA_DIR, else $HOME/data/mnist, else ./data/mnist.
pub fn default_data_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("SUPLAB_DATA_DIR") {
        return PathBuf::from(dir);
    }
    if let Ok(home) = std::env::var("HOME") {
        return Path::new(&home).join("data").join("mnist");
    }
    PathBuf::from("data/mnist")
}

fn load_split(dir: &Path, images: &str, labels: &str) -> Result<MnistSplit> {
    let img = load_idx(&dir.join(images))?;
    if img.shape.len() != 3 {
        return Err(Error::Data(format!(
            "{images}: expected 3-d image tensor, got shape {:?}",
            img.shape
        )));
    }
    let lab = load_idx(&dir.join(labels))?;
    if lab.shape.len() != 1 || lab.shape[0] != img.shape[0] {
        return Err(Error::Data(format!(
            "{labels}: {:?} labels for {} images",
            lab.shape, img.shape[0]
        )));
    }
    if let Some(&bad) = lab.bytes.iter().find(|&&b| b > 9) {
        return Err(Error::Data(format!("label {bad} outside [0, 9]")));
    }
    Ok(MnistSplit {
        count: img.shape[0],
        dim: img.shape[1] * img.shape[2],
        images: img.bytes,
        labels: lab.bytes.iter().map(|&b| b as usize).collect(),
    })
}

pub fn load_mnist(dir: &Path) -> Result<Mnist> {
    Ok(Mnist {
        train: load_split(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte")?,
        test: load_split(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?,
    })
}

/// Class-balanced subsample: `per_class` indices per label value, in label
/// order, shuffled at the end. Classes with fewer members contribute all of
/// them (the "±1" slack comes from rounding a fraction upstream).
pub fn balanced_indices(
    labels: &[usize],
    classes: usize,
    per_class: usize,
    rng: &mut crate::numeric::rng::SeededRng,
) -> Vec<usize> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        if y < classes {
            by_class[y].push(i);
        }
    }
    let mut picked = Vec::new();
    for pool in by_class.iter_mut() {
        rng.shuffle(pool);
        picked.extend_from_slice(&pool[..per_class.min(pool.len())]);
    }
    rng.shuffle(&mut picked);
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_a_synthetic_tensor_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.idx");
        let data = IdxData {
            dtype: IDX_UBYTE,
            shape: vec![3, 2, 2],
            bytes: (0..12u8).collect(),
        };
        write_idx(&path, &data).unwrap();
        let back = load_idx(&path).unwrap();
        assert_eq!(back, data);
        // And the on-disk header is the documented big-endian layout.
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(&raw[..4], &[0, 0, 0x08, 3]);
        assert_eq!(&raw[4..8], &[0, 0, 0, 3]);
    }

    #[test]
    fn bad_magic_reports_the_offending_byte() {
        match parse_idx(&[1, 0, 8, 1, 0, 0, 0, 0]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
        match parse_idx(&[0, 0, 0x0d, 1, 0, 0, 0, 0]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_reports_where_data_ran_out() {
        // Shape says 5 bytes, payload has 2: offset points past the last
        // valid payload byte.
        let bytes = [0u8, 0, 8, 1, 0, 0, 0, 5, 42, 42];
        match parse_idx(&bytes) {
            Err(Error::Format { offset, msg }) => {
                assert_eq!(offset, 10);
                assert!(msg.contains("needs 5"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn balanced_subsample_has_equal_class_counts() {
        let mut rng = crate::numeric::rng::SeededRng::new(5);
        let labels: Vec<usize> = (0..1000).map(|_| rng.index(10)).collect();
        let picked = balanced_indices(&labels, 10, 30, &mut rng);
        let mut counts = [0usize; 10];
        for &i in &picked {
            counts[labels[i]] += 1;
        }
        assert!(counts.iter().all(|&c| c == 30), "{counts:?}");
    }

    #[test]
    fn split_features_scale_pixels_into_the_unit_interval() {
        let split = MnistSplit {
            images: vec![0, 255, 128, 64],
            count: 2,
            dim: 2,
            labels: vec![3, 7],
        };
        let m = split.features(&[1, 0]).unwrap();
        assert_eq!(m.row(0), &[128.0 / 255.0, 64.0 / 255.0]);
        assert_eq!(m.row(1), &[0.0, 1.0]);
        assert_eq!(split.labels_for(&[1, 0]), vec![7, 3]);
        assert!(matches!(split.features(&[2]), Err(Error::Data(_))));
    }
}
