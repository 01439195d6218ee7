//! `SPMX1` container: a single-line JSON header terminated by `\n`, followed
//! immediately by the raw little-endian payload in C order.
//!
//! ```text
//! {"magic":"SPMX1","dtype":"f32","order":"C","dims":[2,1,4,4],"axes":["F","Z","Y","X"],"meta":{}}\n<payload>
//! ```

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::Array4;
use serde::{Deserialize, Serialize};

use crate::bands::BandLayout;
use crate::image::{ConcentrationMap, Meta, SpectralImage};
use crate::{Error, Result};

pub const MAGIC: &str = "SPMX1";

/// Headers longer than this are rejected before parsing.
const MAX_HEADER_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U16,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U16 => 2,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Dtype::F32),
            "u16" => Ok(Dtype::U16),
            other => Err(Error::UnsupportedDtype(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerHeader {
    pub magic: String,
    pub dtype: Dtype,
    pub order: String,
    pub dims: Vec<usize>,
    pub axes: Vec<String>,
    #[serde(default)]
    pub meta: Meta,
}

impl ContainerHeader {
    pub fn new(dtype: Dtype, dims: Vec<usize>, axes: Vec<String>, meta: Meta) -> Self {
        Self { magic: MAGIC.into(), dtype, order: "C".into(), dims, axes, meta }
    }

    pub fn element_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn payload_len(&self) -> usize {
        self.element_count() * self.dtype.size()
    }

    fn validate(&self) -> Result<()> {
        if self.magic != MAGIC {
            return Err(Error::BadMagic);
        }
        if self.order != "C" {
            return Err(Error::HeaderMismatch(format!("unsupported order `{}`", self.order)));
        }
        if self.axes.len() != self.dims.len() {
            return Err(Error::HeaderMismatch(format!(
                "{} axes for {} dims",
                self.axes.len(),
                self.dims.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U16(Vec<u16>),
}

impl TensorData {
    pub fn dtype(&self) -> Dtype {
        match self {
            TensorData::F32(_) => Dtype::F32,
            TensorData::U16(_) => Dtype::U16,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|&x| f64::from(x)).collect(),
            TensorData::U16(v) => v.iter().map(|&x| f64::from(x)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: TensorData,
}

pub fn write_container(path: impl AsRef<Path>, tensor: &Tensor, header: &ContainerHeader) -> Result<()> {
    header.validate()?;
    if header.dims != tensor.dims {
        return Err(Error::HeaderMismatch(format!("header dims {:?} vs tensor {:?}", header.dims, tensor.dims)));
    }
    if header.dtype != tensor.data.dtype() {
        return Err(Error::HeaderMismatch(format!("header dtype {:?} vs tensor {:?}", header.dtype, tensor.data.dtype())));
    }
    if header.element_count() != tensor.data.len() {
        return Err(Error::HeaderMismatch(format!(
            "dims imply {} elements, tensor holds {}",
            header.element_count(),
            tensor.data.len()
        )));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    match &tensor.data {
        TensorData::F32(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        TensorData::U16(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_container(path: impl AsRef<Path>) -> Result<(Tensor, ContainerHeader)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = Vec::new();
    let n = r.by_ref().take(MAX_HEADER_BYTES as u64).read_until(b'\n', &mut line)?;
    if n == 0 || line.last() != Some(&b'\n') {
        return Err(Error::BadMagic);
    }
    let raw: serde_json::Value = serde_json::from_slice(&line).map_err(|_| Error::BadMagic)?;
    if raw.get("magic").and_then(|m| m.as_str()) != Some(MAGIC) {
        return Err(Error::BadMagic);
    }
    let dtype = raw.get("dtype").and_then(|d| d.as_str()).unwrap_or("<missing>");
    Dtype::parse(dtype)?;
    let header: ContainerHeader =
        serde_json::from_value(raw).map_err(|e| Error::HeaderMismatch(format!("malformed header: {e}")))?;
    header.validate()?;

    let expected = header.payload_len();
    let mut payload = Vec::with_capacity(expected);
    r.read_to_end(&mut payload)?;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(Error::HeaderMismatch(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let data = match header.dtype {
        Dtype::F32 => TensorData::F32(payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()),
        Dtype::U16 => TensorData::U16(payload.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()),
    };
    Ok((Tensor { dims: header.dims.clone(), data }, header))
}

fn dims4(header: &ContainerHeader, first_axis: &str) -> Result<(usize, usize, usize, usize)> {
    let expected = [first_axis, "Z", "Y", "X"];
    if header.axes.iter().map(String::as_str).ne(expected) {
        return Err(Error::HeaderMismatch(format!("axes {:?}, expected {:?}", header.axes, expected)));
    }
    Ok((header.dims[0], header.dims[1], header.dims[2], header.dims[3]))
}

fn encode(data: &Array4<f64>, dtype: Dtype) -> TensorData {
    match dtype {
        Dtype::F32 => TensorData::F32(data.iter().map(|&v| v as f32).collect()),
        Dtype::U16 => TensorData::U16(data.iter().map(|&v| v.round().clamp(0.0, f64::from(u16::MAX)) as u16).collect()),
    }
}

/// Stores a spectral image with axes `L,Z,Y,X`; the band layout goes into
/// `meta.band_layout`.
pub fn write_spectral_image(path: impl AsRef<Path>, img: &SpectralImage, dtype: Dtype) -> Result<()> {
    let mut meta = img.meta.clone();
    if let Some(layout) = img.layout() {
        meta.insert("band_layout".into(), serde_json::to_value(layout)?);
    }
    let dims = img.data().shape().to_vec();
    let header = ContainerHeader::new(dtype, dims.clone(), ["L", "Z", "Y", "X"].map(String::from).to_vec(), meta);
    write_container(path, &Tensor { dims, data: encode(img.data(), dtype) }, &header)
}

pub fn read_spectral_image(path: impl AsRef<Path>) -> Result<SpectralImage> {
    let (tensor, mut header) = read_container(path)?;
    let shape = dims4(&header, "L")?;
    let layout = match header.meta.remove("band_layout") {
        Some(v) => Some(serde_json::from_value::<BandLayout>(v)?),
        None => None,
    };
    let data = Array4::from_shape_vec(shape, tensor.data.to_f64()).expect("length checked against dims");
    Ok(SpectralImage::new(data, layout)?.with_meta(header.meta))
}

/// Stores a concentration map with axes `F,Z,Y,X`; labels go into
/// `meta.labels`.
pub fn write_concentration_map(path: impl AsRef<Path>, map: &ConcentrationMap, dtype: Dtype) -> Result<()> {
    let mut meta = map.meta.clone();
    meta.insert("labels".into(), serde_json::to_value(map.labels())?);
    let dims = map.data().shape().to_vec();
    let header = ContainerHeader::new(dtype, dims.clone(), ["F", "Z", "Y", "X"].map(String::from).to_vec(), meta);
    write_container(path, &Tensor { dims, data: encode(map.data(), dtype) }, &header)
}

pub fn read_concentration_map(path: impl AsRef<Path>) -> Result<ConcentrationMap> {
    let (tensor, mut header) = read_container(path)?;
    let shape = dims4(&header, "F")?;
    let data = Array4::from_shape_vec(shape, tensor.data.to_f64()).expect("length checked against dims");
    let map = match header.meta.remove("labels") {
        Some(v) => ConcentrationMap::new(data, serde_json::from_value(v)?)?,
        None => ConcentrationMap::unlabeled(data)?,
    };
    Ok(map.with_meta(header.meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_size_arithmetic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.spmx");
        let dims = vec![2, 1, 4, 4];
        let tensor = Tensor { dims: dims.clone(), data: TensorData::F32(vec![1.5; 32]) };
        let header = ContainerHeader::new(Dtype::F32, dims, ["F", "Z", "Y", "X"].map(String::from).to_vec(), Meta::new());
        write_container(&path, &tensor, &header).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(bytes.len() - nl - 1, 128);
        assert!(bytes.starts_with(br#"{"magic":"SPMX1","dtype":"f32","order":"C","dims":[2,1,4,4]"#));
    }

    #[test]
    fn header_must_match_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let tensor = Tensor { dims: vec![2, 2], data: TensorData::U16(vec![1, 2, 3, 4]) };
        let axes = vec!["Y".to_string(), "X".to_string()];
        let wrong_dims = ContainerHeader::new(Dtype::U16, vec![4, 1], axes.clone(), Meta::new());
        assert!(matches!(write_container(dir.path().join("x"), &tensor, &wrong_dims), Err(Error::HeaderMismatch(_))));
        let wrong_type = ContainerHeader::new(Dtype::F32, vec![2, 2], axes.clone(), Meta::new());
        assert!(matches!(write_container(dir.path().join("x"), &tensor, &wrong_type), Err(Error::HeaderMismatch(_))));
        let wrong_axes = ContainerHeader::new(Dtype::U16, vec![2, 2], vec!["X".into()], Meta::new());
        assert!(matches!(write_container(dir.path().join("x"), &tensor, &wrong_axes), Err(Error::HeaderMismatch(_))));
    }

    #[test]
    fn negative_cases() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.spmx");
        std::fs::write(&path, b"{\"magic\":\"SPMX2\",\"dtype\":\"f32\",\"order\":\"C\",\"dims\":[1],\"axes\":[\"X\"],\"meta\":{}}\n\0\0\0\0").unwrap();
        assert!(matches!(read_container(&path), Err(Error::BadMagic)));
        std::fs::write(&path, b"GIF89a...").unwrap();
        assert!(matches!(read_container(&path), Err(Error::BadMagic)));
        std::fs::write(&path, b"{\"magic\":\"SPMX1\",\"dtype\":\"f32\",\"order\":\"C\",\"dims\":[2],\"axes\":[\"X\"],\"meta\":{}}\n\0\0\0\0").unwrap();
        assert!(matches!(read_container(&path), Err(Error::TruncatedPayload { expected: 8, found: 4 })));
        std::fs::write(&path, b"{\"magic\":\"SPMX1\",\"dtype\":\"f64\",\"order\":\"C\",\"dims\":[1],\"axes\":[\"X\"],\"meta\":{}}\n\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(read_container(&path), Err(Error::UnsupportedDtype(ref d)) if d == "f64"));
    }
}
