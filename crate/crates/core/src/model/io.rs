//! Binary weight serialization.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes   "PCADVWTS"
//! version          u32       currently 1
//! num_classes      u32
//! per_point_count  u32
//! head_count       u32
//! per layer (per-point stack first, then head):
//!   in_dim         u32
//!   out_dim        u32
//!   activation     u8        0 = identity, 1 = relu
//! per layer, same order:
//!   weights        out_dim * in_dim f64, row-major
//!   biases         out_dim f64
//! ```
//!
//! Round-trips are bit-exact; truncated or over-long files and unknown
//! versions are rejected without producing a partial model.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

use super::{Activation, DenseLayer, PointClassifier};

const MAGIC: &[u8; 8] = b"PCADVWTS";
const VERSION: u32 = 1;

pub fn save_weights<W: Write>(model: &PointClassifier, sink: &mut W) -> Result<()> {
    sink.write_all(MAGIC)?;
    sink.write_all(&VERSION.to_le_bytes())?;
    sink.write_all(&(model.num_classes as u32).to_le_bytes())?;
    sink.write_all(&(model.per_point.len() as u32).to_le_bytes())?;
    sink.write_all(&(model.head.len() as u32).to_le_bytes())?;
    for layer in model.per_point.iter().chain(&model.head) {
        sink.write_all(&(layer.in_dim() as u32).to_le_bytes())?;
        sink.write_all(&(layer.out_dim() as u32).to_le_bytes())?;
        let tag: u8 = match layer.activation {
            Activation::Identity => 0,
            Activation::Relu => 1,
        };
        sink.write_all(&[tag])?;
    }
    for layer in model.per_point.iter().chain(&model.head) {
        for w in layer.weights.iter() {
            sink.write_all(&w.to_le_bytes())?;
        }
        for b in layer.biases.iter() {
            sink.write_all(&b.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_weights_to_path<P: AsRef<Path>>(model: &PointClassifier, path: P) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    save_weights(model, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn load_weights<R: Read>(source: &mut R) -> Result<PointClassifier> {
    let mut magic = [0u8; 8];
    read_exact(source, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse { line: 0, message: "bad magic; not a weight file".into() });
    }
    let version = read_u32(source)?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let num_classes = read_u32(source)? as usize;
    let per_point_count = read_u32(source)? as usize;
    let head_count = read_u32(source)? as usize;
    if per_point_count + head_count > 1024 {
        return Err(Error::Parse { line: 0, message: "implausible layer count".into() });
    }
    let mut dims = Vec::with_capacity(per_point_count + head_count);
    for _ in 0..per_point_count + head_count {
        let in_dim = read_u32(source)? as usize;
        let out_dim = read_u32(source)? as usize;
        let mut tag = [0u8; 1];
        read_exact(source, &mut tag)?;
        let activation = match tag[0] {
            0 => Activation::Identity,
            1 => Activation::Relu,
            other => {
                return Err(Error::Parse { line: 0, message: format!("unknown activation tag {other}") })
            }
        };
        if in_dim == 0 || out_dim == 0 || in_dim > 1 << 20 || out_dim > 1 << 20 {
            return Err(Error::Parse { line: 0, message: "implausible layer dimensions".into() });
        }
        dims.push((in_dim, out_dim, activation));
    }
    let mut layers = Vec::with_capacity(dims.len());
    for &(in_dim, out_dim, activation) in &dims {
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..in_dim * out_dim {
            weights.push(read_f64(source)?);
        }
        let mut biases = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            biases.push(read_f64(source)?);
        }
        let weights = Array2::from_shape_vec((out_dim, in_dim), weights)
            .map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
        layers.push(DenseLayer::new(weights, Array1::from_vec(biases), activation)?);
    }
    let mut trailing = [0u8; 1];
    if source.read(&mut trailing)? != 0 {
        return Err(Error::Parse { line: 0, message: "trailing bytes after weight data".into() });
    }
    let head = layers.split_off(per_point_count);
    PointClassifier::new(layers, head, num_classes)
}

pub fn load_weights_from_path<P: AsRef<Path>>(path: P) -> Result<PointClassifier> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    load_weights(&mut file)
}

fn read_exact<R: Read>(source: &mut R, buf: &mut [u8]) -> Result<()> {
    source.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Parse { line: 0, message: "truncated weight file".into() }
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32<R: Read>(source: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(source, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(source: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(source, &mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
