//! On-disk tensor format and model checkpoints.
//!
//! Tensor files are little-endian: magic `GRT1`, version u16 (= 1), dtype u8
//! (0 = u8, 1 = f32, 2 = f64), rank u8, rank x u32 dimensions, then the raw
//! row-major payload. No compression, no padding between fields.
//!
//! A checkpoint file concatenates one tensor blob per parameter, a plain-text
//! manifest (`name dims offset` per line) and a trailing u64 with the
//! manifest's byte offset.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::grid::GridTensor;
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"GRT1";
pub const VERSION: u16 = 1;

pub const DTYPE_U8: u8 = 0;
pub const DTYPE_F32: u8 = 1;
pub const DTYPE_F64: u8 = 2;

/// Scalars with a native on-disk encoding.
pub trait TensorElement: Scalar {
    const DTYPE: u8;
    const WIDTH: usize;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl TensorElement for f32 {
    const DTYPE: u8 = DTYPE_F32;
    const WIDTH: usize = 4;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("f32 width"))
    }
}

impl TensorElement for f64 {
    const DTYPE: u8 = DTYPE_F64;
    const WIDTH: usize = 8;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("f64 width"))
    }
}

fn encode_header(dtype: u8, dims: &[u32]) -> Result<Vec<u8>> {
    if dims.len() > u8::MAX as usize {
        return Err(CoreError::Format(format!("rank {} too large", dims.len())));
    }
    let mut buf = Vec::with_capacity(8 + 4 * dims.len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(dtype);
    buf.push(dims.len() as u8);
    for &d in dims {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    Ok(buf)
}

/// Serializes a raw tensor blob (header + payload) into a byte vector.
pub fn encode_blob<F: TensorElement>(dims: &[u32], data: &[F]) -> Result<Vec<u8>> {
    let n = checked_len(dims)?;
    if n != data.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "payload length {} != dim product {n}",
            data.len()
        )));
    }
    let mut buf = encode_header(F::DTYPE, dims)?;
    buf.reserve(data.len() * F::WIDTH);
    for &v in data {
        v.write_le(&mut buf);
    }
    Ok(buf)
}

fn checked_len(dims: &[u32]) -> Result<usize> {
    let mut n: u64 = 1;
    for &d in dims {
        n = n
            .checked_mul(d as u64)
            .ok_or(CoreError::DimOverflow(u64::MAX))?;
    }
    usize::try_from(n).map_err(|_| CoreError::DimOverflow(n))
}

struct Header {
    dtype: u8,
    dims: Vec<u32>,
}

fn decode_header(r: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| CoreError::Format("file too short for magic".into()))?;
    if magic != MAGIC {
        return Err(CoreError::Format(format!(
            "bad magic bytes {magic:?}, expected {MAGIC:?}"
        )));
    }
    let mut v = [0u8; 2];
    r.read_exact(&mut v)
        .map_err(|_| CoreError::Format("file too short for version".into()))?;
    let version = u16::from_le_bytes(v);
    if version != VERSION {
        return Err(CoreError::Format(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let mut b = [0u8; 2];
    r.read_exact(&mut b)
        .map_err(|_| CoreError::Format("file too short for dtype/rank".into()))?;
    let (dtype, rank) = (b[0], b[1]);
    if dtype > DTYPE_F64 {
        return Err(CoreError::Format(format!("unknown dtype code {dtype}")));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let mut d = [0u8; 4];
        r.read_exact(&mut d)
            .map_err(|_| CoreError::Format("file too short for dimensions".into()))?;
        dims.push(u32::from_le_bytes(d));
    }
    Ok(Header { dtype, dims })
}

fn decode_payload<F: TensorElement>(dtype: u8, n: usize, r: &mut impl Read) -> Result<Vec<F>> {
    let width = match dtype {
        DTYPE_U8 => 1,
        DTYPE_F32 => 4,
        DTYPE_F64 => 8,
        other => return Err(CoreError::Format(format!("unknown dtype code {other}"))),
    };
    if dtype == DTYPE_F64 && F::WIDTH < 8 {
        return Err(CoreError::Format(
            "f64 payload cannot be read losslessly into an f32 tensor".into(),
        ));
    }
    let mut bytes = vec![0u8; n * width];
    let mut got = 0;
    while got < bytes.len() {
        let k = r
            .read(&mut bytes[got..])
            .map_err(CoreError::Io)?;
        if k == 0 {
            return Err(CoreError::Truncated {
                expected: bytes.len(),
                got,
            });
        }
        got += k;
    }
    let data = match dtype {
        DTYPE_U8 => bytes
            .iter()
            .map(|&b| F::from_u8(b).expect("u8 fits any float"))
            .collect(),
        DTYPE_F32 => bytes
            .chunks_exact(4)
            .map(|c| {
                F::from_f32(f32::from_le_bytes(c.try_into().unwrap()))
                    .expect("f32 widens losslessly")
            })
            .collect(),
        _ => bytes.chunks_exact(8).map(|c| F::read_le(c)).collect(),
    };
    Ok(data)
}

/// Writes a raw tensor of arbitrary rank.
pub fn write_raw<F: TensorElement>(path: &Path, dims: &[u32], data: &[F]) -> Result<()> {
    let blob = encode_blob(dims, data)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&blob)?;
    w.flush()?;
    Ok(())
}

/// Reads a raw tensor of arbitrary rank. Errors on bad magic, version or
/// dtype, payload truncation and trailing bytes.
pub fn read_raw<F: TensorElement>(path: &Path) -> Result<(Vec<u32>, Vec<F>)> {
    let mut r = BufReader::new(File::open(path)?);
    let header = decode_header(&mut r)?;
    let n = checked_len(&header.dims)?;
    let data = decode_payload::<F>(header.dtype, n, &mut r)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(CoreError::Format("trailing bytes after payload".into()));
    }
    Ok((header.dims, data))
}

/// Writes a rank-3 grid tensor in the scalar's native dtype.
pub fn write_tensor<F: TensorElement>(t: &GridTensor<F>, path: &Path) -> Result<()> {
    let (h, w, c) = t.shape();
    write_raw(path, &[h as u32, w as u32, c as u32], t.data())
}

/// Writes a rank-3 grid tensor with dtype 0; every value must be a whole
/// number in [0, 255].
pub fn write_tensor_u8<F: TensorElement>(t: &GridTensor<F>, path: &Path) -> Result<()> {
    let (h, w, c) = t.shape();
    let dims = [h as u32, w as u32, c as u32];
    let mut buf = encode_header(DTYPE_U8, &dims)?;
    buf.reserve(t.len());
    for &v in t.data() {
        let as_u8 = v.to_u8().filter(|_| v.fract() == F::zero());
        match as_u8 {
            Some(b) => buf.push(b),
            None => {
                return Err(CoreError::Format(format!(
                    "value {v} not representable as u8"
                )))
            }
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads a rank-3 grid tensor.
pub fn read_tensor<F: TensorElement>(path: &Path) -> Result<GridTensor<F>> {
    let (dims, data) = read_raw::<F>(path)?;
    if dims.len() != 3 {
        return Err(CoreError::Format(format!(
            "expected rank 3, got rank {}",
            dims.len()
        )));
    }
    GridTensor::new(dims[0] as usize, dims[1] as usize, dims[2] as usize, data)
}

/// Writes a frame stack as one rank-4 tensor (frames, h, w, c).
pub fn write_frames<F: TensorElement>(frames: &[GridTensor<F>], path: &Path) -> Result<()> {
    let first = frames.first().ok_or(CoreError::EmptyInput("frames"))?;
    let (h, w, c) = first.shape();
    let mut data = Vec::with_capacity(frames.len() * first.len());
    for f in frames {
        first.ensure_same_shape(f, "frame stack")?;
        data.extend_from_slice(f.data());
    }
    write_raw(
        path,
        &[frames.len() as u32, h as u32, w as u32, c as u32],
        &data,
    )
}

/// Reads a rank-4 tensor back into a frame stack.
pub fn read_frames<F: TensorElement>(path: &Path) -> Result<Vec<GridTensor<F>>> {
    let (dims, data) = read_raw::<F>(path)?;
    if dims.len() != 4 {
        return Err(CoreError::Format(format!(
            "expected rank 4, got rank {}",
            dims.len()
        )));
    }
    let (n, h, w, c) = (
        dims[0] as usize,
        dims[1] as usize,
        dims[2] as usize,
        dims[3] as usize,
    );
    let frame_len = h * w * c;
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        frames.push(GridTensor::new(
            h,
            w,
            c,
            data[i * frame_len..(i + 1) * frame_len].to_vec(),
        )?);
    }
    Ok(frames)
}

/// One named parameter in a checkpoint.
#[derive(Debug, Clone)]
pub struct CheckpointEntry<F> {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<F>,
}

/// Saves named parameter tensors plus the plain-text manifest.
pub fn save_checkpoint<F: TensorElement>(path: &Path, entries: &[CheckpointEntry<F>]) -> Result<()> {
    let mut body = Vec::new();
    let mut manifest = String::new();
    for e in entries {
        let offset = body.len();
        let blob = encode_blob(&e.dims, &e.data)?;
        body.extend_from_slice(&blob);
        let dims_str = e
            .dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        manifest.push_str(&format!("{} {} {}\n", e.name, dims_str, offset));
    }
    let manifest_offset = body.len() as u64;
    body.extend_from_slice(manifest.as_bytes());
    body.extend_from_slice(&manifest_offset.to_le_bytes());
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// Loads every parameter tensor of a checkpoint, in manifest order.
pub fn load_checkpoint<F: TensorElement>(path: &Path) -> Result<Vec<CheckpointEntry<F>>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 8 {
        return Err(CoreError::Format("checkpoint too short".into()));
    }
    let manifest_offset =
        u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap()) as usize;
    if manifest_offset > bytes.len() - 8 {
        return Err(CoreError::Format("manifest offset out of range".into()));
    }
    let manifest = std::str::from_utf8(&bytes[manifest_offset..bytes.len() - 8])
        .map_err(|_| CoreError::Format("manifest is not utf-8".into()))?;
    let mut entries = Vec::new();
    for line in manifest.lines() {
        let mut parts = line.split_whitespace();
        let (name, dims_str, off_str) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(CoreError::Format(format!("bad manifest line: {line}"))),
        };
        let dims: Vec<u32> = dims_str
            .split('x')
            .map(|d| {
                d.parse::<u32>()
                    .map_err(|_| CoreError::Format(format!("bad dims in manifest: {dims_str}")))
            })
            .collect::<Result<_>>()?;
        let offset: usize = off_str
            .parse()
            .map_err(|_| CoreError::Format(format!("bad offset in manifest: {off_str}")))?;
        if offset >= manifest_offset {
            return Err(CoreError::Format("blob offset beyond manifest".into()));
        }
        let mut cursor = &bytes[offset..manifest_offset];
        let header = decode_header(&mut cursor)?;
        if header.dims != dims {
            return Err(CoreError::Format(format!(
                "manifest dims {dims:?} disagree with blob dims {:?}",
                header.dims
            )));
        }
        let n = checked_len(&dims)?;
        let data = decode_payload::<F>(header.dtype, n, &mut cursor)?;
        entries.push(CheckpointEntry {
            name: name.to_string(),
            dims,
            data,
        });
    }
    Ok(entries)
}
