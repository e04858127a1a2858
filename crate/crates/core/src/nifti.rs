//! Single-file NIfTI-1 (`.nii`, `.nii.gz`) reading and writing.
//!
//! Only 3D volumes of `uint8`, `int16` and `float32` are supported. Integer data
//! is read as labels, floating data as intensities (with `scl_slope` /
//! `scl_inter` applied). Voxel order on disk is the crate order: x fastest.
//!
//! Written files use a fixed header: 1 mm isotropic spacing, identity qform
//! and sform, a constant description, no extensions, and zero time fields, so
//! identical grids always produce identical bytes. Source orientation is read
//! but never used; callers are responsible for orienting their inputs
//! consistently.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{voxel_count, Dims, IntensityGrid, LabelGrid};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const VOX_OFFSET: usize = 352;
pub const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
pub const MAGIC_PAIR: &[u8; 4] = b"ni1\0";
const DESCRIPTION: &[u8] = b"anatomy-forge synthetic volume";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Datatype {
    Uint8,
    Int16,
    Float32,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Float32 => 16,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(Datatype::Uint8),
            4 => Ok(Datatype::Int16),
            16 => Ok(Datatype::Float32),
            other => Err(Error::UnsupportedDatatype(other)),
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Float32 => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Datatype::Uint8 => "uint8",
            Datatype::Int16 => "int16",
            Datatype::Float32 => "float32",
        }
    }
}

/// The header fields this crate reads.
#[derive(Clone, Debug, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: Datatype,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub qform_code: i16,
    pub sform_code: i16,
    pub big_endian: bool,
}

impl NiftiHeader {
    pub fn dims(&self) -> Dims {
        [self.dim[1] as usize, self.dim[2] as usize, self.dim[3] as usize]
    }

    /// Voxel spacing as recorded in the file (informational only).
    pub fn spacing(&self) -> [f32; 3] {
        [self.pixdim[1], self.pixdim[2], self.pixdim[3]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Volume {
    Labels(LabelGrid),
    Intensity(IntensityGrid),
}

impl Volume {
    pub fn dims(&self) -> Dims {
        match self {
            Volume::Labels(g) => g.dims(),
            Volume::Intensity(g) => g.dims(),
        }
    }

    pub fn into_labels(self) -> Option<LabelGrid> {
        match self {
            Volume::Labels(g) => Some(g),
            Volume::Intensity(_) => None,
        }
    }

    pub fn into_intensity(self) -> Option<IntensityGrid> {
        match self {
            Volume::Intensity(g) => Some(g),
            Volume::Labels(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum VolumeRef<'a> {
    Labels(&'a LabelGrid),
    Intensity(&'a IntensityGrid),
}

impl<'a> From<&'a LabelGrid> for VolumeRef<'a> {
    fn from(g: &'a LabelGrid) -> Self {
        VolumeRef::Labels(g)
    }
}

impl<'a> From<&'a IntensityGrid> for VolumeRef<'a> {
    fn from(g: &'a IntensityGrid) -> Self {
        VolumeRef::Intensity(g)
    }
}

impl<'a> From<&'a Volume> for VolumeRef<'a> {
    fn from(v: &'a Volume) -> Self {
        match v {
            Volume::Labels(g) => VolumeRef::Labels(g),
            Volume::Intensity(g) => VolumeRef::Intensity(g),
        }
    }
}

fn parse_header(b: &[u8]) -> Result<NiftiHeader> {
    if b.len() < HEADER_SIZE {
        return Err(Error::Truncated {
            expected: HEADER_SIZE,
            found: b.len(),
        });
    }
    let big = match (LittleEndian::read_i32(&b[0..4]), BigEndian::read_i32(&b[0..4])) {
        (348, _) => false,
        (_, 348) => true,
        _ => return Err(Error::BadMagic([b[344], b[345], b[346], b[347]])),
    };
    let i16_at = |o: usize| {
        if big {
            BigEndian::read_i16(&b[o..o + 2])
        } else {
            LittleEndian::read_i16(&b[o..o + 2])
        }
    };
    let f32_at = |o: usize| {
        if big {
            BigEndian::read_f32(&b[o..o + 4])
        } else {
            LittleEndian::read_f32(&b[o..o + 4])
        }
    };
    let magic = [b[344], b[345], b[346], b[347]];
    if &magic == MAGIC_PAIR {
        return Err(Error::TwoFileNifti);
    }
    if &magic != MAGIC_SINGLE {
        return Err(Error::BadMagic(magic));
    }
    let dim = [0, 1, 2, 3, 4, 5, 6, 7].map(|i| i16_at(40 + 2 * i));
    if dim[0] != 3 || dim[1..4].iter().any(|&d| d < 1) {
        return Err(Error::UnsupportedDim(dim));
    }
    let datatype = Datatype::from_code(i16_at(70))?;
    Ok(NiftiHeader {
        dim,
        datatype,
        pixdim: [0, 1, 2, 3, 4, 5, 6, 7].map(|i| f32_at(76 + 4 * i)),
        vox_offset: f32_at(108),
        scl_slope: f32_at(112),
        scl_inter: f32_at(116),
        qform_code: i16_at(252),
        sform_code: i16_at(254),
        big_endian: big,
    })
}

/// Decodes a complete single-file NIfTI-1 image (optionally gzip-compressed).
pub fn decode_nifti(bytes: &[u8]) -> Result<(NiftiHeader, Volume)> {
    let inflated;
    let bytes = if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut v = Vec::new();
        GzDecoder::new(bytes).read_to_end(&mut v)?;
        inflated = v;
        &inflated[..]
    } else {
        bytes
    };
    let h = parse_header(bytes)?;
    let offset = h.vox_offset as usize;
    if offset < VOX_OFFSET {
        return Err(Error::UnsupportedDim(h.dim));
    }
    let dims = h.dims();
    let n = voxel_count(dims);
    let need = offset + n * h.datatype.bytes();
    if bytes.len() < need {
        return Err(Error::Truncated {
            expected: need,
            found: bytes.len(),
        });
    }
    let payload = &bytes[offset..need];
    let volume = match h.datatype {
        Datatype::Uint8 => Volume::Labels(LabelGrid::from_vec(dims, payload.to_vec())?),
        Datatype::Int16 => {
            let mut data = Vec::with_capacity(n);
            for ch in payload.chunks_exact(2) {
                let v = if h.big_endian {
                    BigEndian::read_i16(ch)
                } else {
                    LittleEndian::read_i16(ch)
                };
                let v = u8::try_from(v).map_err(|_| Error::LabelRange(v as i64))?;
                data.push(v);
            }
            Volume::Labels(LabelGrid::from_vec(dims, data)?)
        }
        Datatype::Float32 => {
            let scale = h.scl_slope != 0.0 && !(h.scl_slope == 1.0 && h.scl_inter == 0.0);
            let data = payload
                .chunks_exact(4)
                .map(|ch| {
                    let v = if h.big_endian {
                        BigEndian::read_f32(ch)
                    } else {
                        LittleEndian::read_f32(ch)
                    };
                    if scale {
                        v * h.scl_slope + h.scl_inter
                    } else {
                        v
                    }
                })
                .collect();
            Volume::Intensity(IntensityGrid::from_vec(dims, data)?)
        }
    };
    Ok((h, volume))
}

/// Encodes a volume as little-endian single-file NIfTI-1 with the fixed header.
pub fn encode_nifti<'a>(volume: impl Into<VolumeRef<'a>>, datatype: Datatype) -> Result<Vec<u8>> {
    let volume = volume.into();
    let dims = match volume {
        VolumeRef::Labels(g) => g.dims(),
        VolumeRef::Intensity(g) => g.dims(),
    };
    match (volume, datatype) {
        (VolumeRef::Labels(_), Datatype::Uint8 | Datatype::Int16)
        | (VolumeRef::Intensity(_), Datatype::Float32) => {}
        (VolumeRef::Labels(_), dt) => {
            return Err(Error::IncompatibleDatatype { datatype: dt.name(), kind: "label" })
        }
        (VolumeRef::Intensity(_), dt) => {
            return Err(Error::IncompatibleDatatype { datatype: dt.name(), kind: "intensity" })
        }
    }
    if dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::Config(format!("dims {dims:?} exceed the NIfTI-1 limit")));
    }
    let n = voxel_count(dims);
    let mut out = vec![0u8; VOX_OFFSET + n * datatype.bytes()];
    {
        let h = &mut out[..HEADER_SIZE];
        LittleEndian::write_i32(&mut h[0..4], HEADER_SIZE as i32);
        h[38] = b'r';
        let dim: [i16; 8] = [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
        for (i, d) in dim.iter().enumerate() {
            LittleEndian::write_i16(&mut h[40 + 2 * i..], *d);
        }
        LittleEndian::write_i16(&mut h[70..72], datatype.code());
        LittleEndian::write_i16(&mut h[72..74], (datatype.bytes() * 8) as i16);
        for i in 0..4 {
            LittleEndian::write_f32(&mut h[76 + 4 * i..], 1.0);
        }
        LittleEndian::write_f32(&mut h[108..112], VOX_OFFSET as f32);
        LittleEndian::write_f32(&mut h[112..116], 1.0);
        // xyzt_units: millimetres
        h[123] = 2;
        h[148..148 + DESCRIPTION.len()].copy_from_slice(DESCRIPTION);
        LittleEndian::write_i16(&mut h[252..254], 1);
        LittleEndian::write_i16(&mut h[254..256], 1);
        // srow_x/y/z: identity
        LittleEndian::write_f32(&mut h[280..284], 1.0);
        LittleEndian::write_f32(&mut h[300..304], 1.0);
        LittleEndian::write_f32(&mut h[320..324], 1.0);
        h[344..348].copy_from_slice(MAGIC_SINGLE);
    }
    let payload = &mut out[VOX_OFFSET..];
    match volume {
        VolumeRef::Labels(g) => match datatype {
            Datatype::Uint8 => payload.copy_from_slice(g.data()),
            _ => {
                for (ch, &v) in payload.chunks_exact_mut(2).zip(g.data()) {
                    LittleEndian::write_i16(ch, v as i16);
                }
            }
        },
        VolumeRef::Intensity(g) => {
            for (ch, &v) in payload.chunks_exact_mut(4).zip(g.data()) {
                LittleEndian::write_f32(ch, v);
            }
        }
    }
    Ok(out)
}

pub fn read_nifti_with_header(path: &Path) -> Result<(NiftiHeader, Volume)> {
    decode_nifti(&std::fs::read(path)?)
}

/// Reads a `.nii` or `.nii.gz` file.
pub fn read_nifti(path: &Path) -> Result<Volume> {
    read_nifti_with_header(path).map(|(_, v)| v)
}

/// Writes a volume; a path ending in `.gz` is gzip-compressed.
pub fn write_nifti<'a>(volume: impl Into<VolumeRef<'a>>, path: &Path, datatype: Datatype) -> Result<()> {
    let bytes = encode_nifti(volume, datatype)?;
    let gz = path.extension().is_some_and(|e| e == "gz");
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    if gz {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(&bytes)?;
        enc.finish()?.flush()?;
    } else {
        let mut file = file;
        file.write_all(&bytes)?;
        file.flush()?;
    }
    Ok(())
}
