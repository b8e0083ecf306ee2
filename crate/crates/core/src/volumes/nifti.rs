//! NIfTI-1 single-file (`.nii`, `.nii.gz`) reading and writing for masks.
//!
//! Reading accepts either byte order (detected from `sizeof_hdr`) and any of
//! the standard integer or float datatypes; every nonzero stored value is
//! foreground. Writing always produces a little-endian, `uint8` file with the
//! data at byte 352.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use thiserror::Error;

use super::{MaskVolume, VolumeError};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;
const DT_UINT8: i16 = 2;
const NIFTI_UNITS_MM: u8 = 2;

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("gzip stream is corrupt: {0}")]
    Gzip(std::io::Error),
    #[error("file is {0} bytes, shorter than the 348-byte header")]
    TruncatedHeader(usize),
    #[error("header field sizeof_hdr is {0} in both byte orders, expected 348")]
    BadSizeofHdr(i32),
    #[error("header field magic is {0:?}, expected \"n+1\\0\"")]
    BadMagic([u8; 4]),
    #[error("header field dim[0] is {0}, only 3-dimensional volumes are supported")]
    UnsupportedDimensionality(i16),
    #[error("header field dim[{axis}] is {value}, expected a positive extent")]
    BadDim { axis: usize, value: i16 },
    #[error("header field datatype is {0}, which is not a supported integer or float type")]
    UnsupportedDatatype(i16),
    #[error("header field bitpix is {bitpix}, inconsistent with datatype {datatype}")]
    BitpixMismatch { datatype: i16, bitpix: i16 },
    #[error("header field pixdim[{axis}] is {value}, expected a finite positive spacing")]
    BadPixdim { axis: usize, value: f32 },
    #[error("header field vox_offset is {0}, outside the file")]
    BadVoxOffset(f32),
    #[error("voxel data is truncated: need {needed} bytes after vox_offset, found {found}")]
    TruncatedData { needed: usize, found: usize },
    #[error("voxel {index} holds non-finite value {value} (header field datatype {datatype})")]
    NonFiniteVoxel { index: usize, value: f64, datatype: i16 },
    #[error("dim[{axis}] = {value} does not fit the header field dim (max 32767)")]
    DimTooLarge { axis: usize, value: usize },
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Fields<'a> {
    buf: &'a [u8],
    endian: Endian,
}

impl Fields<'_> {
    fn bytes<const N: usize>(&self, off: usize) -> [u8; N] {
        let mut b = [0u8; N];
        b.copy_from_slice(&self.buf[off..off + N]);
        if let Endian::Big = self.endian {
            b.reverse();
        }
        b
    }
    fn i16(&self, off: usize) -> i16 {
        i16::from_le_bytes(self.bytes(off))
    }
    fn f32(&self, off: usize) -> f32 {
        f32::from_le_bytes(self.bytes(off))
    }
}

fn decompress_if_gzip(raw: Vec<u8>) -> Result<Vec<u8>, NiftiError> {
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(NiftiError::Gzip)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Read a mask from a `.nii` or `.nii.gz` file. Compression is detected
/// from the gzip magic bytes rather than the file name.
pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskVolume, NiftiError> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|source| NiftiError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_mask_from_bytes(raw)
}

/// Parse a mask from in-memory file contents (optionally gzip-compressed).
pub fn read_mask_from_bytes(raw: Vec<u8>) -> Result<MaskVolume, NiftiError> {
    let buf = decompress_if_gzip(raw)?;
    if buf.len() < HEADER_SIZE {
        return Err(NiftiError::TruncatedHeader(buf.len()));
    }
    let le = i32::from_le_bytes(buf[0..4].try_into().unwrap());
    let endian = if le == HEADER_SIZE as i32 {
        Endian::Little
    } else if i32::from_be_bytes(buf[0..4].try_into().unwrap()) == HEADER_SIZE as i32 {
        Endian::Big
    } else {
        return Err(NiftiError::BadSizeofHdr(le));
    };
    let h = Fields { buf: &buf, endian };

    let magic: [u8; 4] = buf[344..348].try_into().unwrap();
    if &magic != b"n+1\0" {
        return Err(NiftiError::BadMagic(magic));
    }

    let ndim = h.i16(40);
    if ndim != 3 {
        return Err(NiftiError::UnsupportedDimensionality(ndim));
    }
    let mut dims = [0usize; 3];
    for (axis, d) in dims.iter_mut().enumerate() {
        let value = h.i16(42 + 2 * axis);
        if value < 1 {
            return Err(NiftiError::BadDim { axis: axis + 1, value });
        }
        *d = value as usize;
    }

    let datatype = h.i16(70);
    let bitpix = h.i16(72);
    let width = datatype_width(datatype).ok_or(NiftiError::UnsupportedDatatype(datatype))?;
    if bitpix as usize != 8 * width {
        return Err(NiftiError::BitpixMismatch { datatype, bitpix });
    }

    let mut spacing = [0f64; 3];
    for (axis, s) in spacing.iter_mut().enumerate() {
        let value = h.f32(80 + 4 * axis);
        if !value.is_finite() || value <= 0.0 {
            return Err(NiftiError::BadPixdim { axis: axis + 1, value });
        }
        *s = value as f64;
    }

    let vox_offset = h.f32(108);
    if !vox_offset.is_finite() || vox_offset < HEADER_SIZE as f32 || vox_offset as usize > buf.len() {
        return Err(NiftiError::BadVoxOffset(vox_offset));
    }
    let data = &buf[vox_offset as usize..];
    let count = dims[0] * dims[1] * dims[2];
    let needed = count * width;
    if data.len() < needed {
        return Err(NiftiError::TruncatedData { needed, found: data.len() });
    }

    let voxels = decode_binary(&data[..needed], datatype, width, endian)?;
    let affine = read_affine(&h);
    let mask = MaskVolume::from_voxels(dims, voxels)?.with_spacing(spacing)?.with_affine(affine);
    Ok(mask)
}

fn datatype_width(datatype: i16) -> Option<usize> {
    Some(match datatype {
        2 | 256 => 1,
        4 | 512 => 2,
        8 | 16 | 768 => 4,
        64 | 1024 | 1280 => 8,
        _ => return None,
    })
}

fn decode_binary(data: &[u8], datatype: i16, width: usize, endian: Endian) -> Result<Vec<u8>, NiftiError> {
    let word = |chunk: &[u8]| -> [u8; 8] {
        let mut b = [0u8; 8];
        b[..width].copy_from_slice(chunk);
        if let Endian::Big = endian {
            b[..width].reverse();
        }
        b
    };
    data.chunks_exact(width)
        .enumerate()
        .map(|(index, chunk)| {
            let b = word(chunk);
            let nonzero = match datatype {
                16 => {
                    let v = f32::from_le_bytes(b[..4].try_into().unwrap());
                    if !v.is_finite() {
                        return Err(NiftiError::NonFiniteVoxel { index, value: v as f64, datatype });
                    }
                    v != 0.0
                }
                64 => {
                    let v = f64::from_le_bytes(b);
                    if !v.is_finite() {
                        return Err(NiftiError::NonFiniteVoxel { index, value: v, datatype });
                    }
                    v != 0.0
                }
                // Integer types: any set bit is a nonzero value.
                _ => b.iter().any(|&x| x != 0),
            };
            Ok(nonzero as u8)
        })
        .collect()
}

fn read_affine(h: &Fields<'_>) -> Option<[[f64; 4]; 4]> {
    let sform_code = h.i16(254);
    let qform_code = h.i16(252);
    if sform_code > 0 {
        let mut a = [[0.0; 4]; 4];
        for (row, off) in [280usize, 296, 312].into_iter().enumerate() {
            for col in 0..4 {
                a[row][col] = h.f32(off + 4 * col) as f64;
            }
        }
        a[3][3] = 1.0;
        Some(a)
    } else if qform_code > 0 {
        Some(qform_affine(h))
    } else {
        None
    }
}

fn qform_affine(h: &Fields<'_>) -> [[f64; 4]; 4] {
    let (b, c, d) = (h.f32(256) as f64, h.f32(260) as f64, h.f32(264) as f64);
    let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
    let qfac = if h.f32(76) < 0.0 { -1.0 } else { 1.0 };
    let (dx, dy, dz) = (h.f32(80) as f64, h.f32(84) as f64, h.f32(88) as f64 * qfac);
    let r = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
    ];
    let offset = [h.f32(268) as f64, h.f32(272) as f64, h.f32(276) as f64];
    let mut m = [[0.0; 4]; 4];
    for i in 0..3 {
        m[i] = [r[i][0] * dx, r[i][1] * dy, r[i][2] * dz, offset[i]];
    }
    m[3] = [0.0, 0.0, 0.0, 1.0];
    m
}

/// Encode a mask as an uncompressed little-endian NIfTI-1 byte stream.
pub fn write_mask_to_bytes(mask: &MaskVolume) -> Result<Vec<u8>, NiftiError> {
    encode(mask, "")
}

fn encode(mask: &MaskVolume, description: &str) -> Result<Vec<u8>, NiftiError> {
    if let Some(axis) = mask.dims().iter().position(|&d| d > i16::MAX as usize) {
        return Err(NiftiError::DimTooLarge { axis: axis + 1, value: mask.dims()[axis] });
    }
    let mut h = vec![0u8; VOX_OFFSET];
    let put = |h: &mut Vec<u8>, off: usize, bytes: &[u8]| h[off..off + bytes.len()].copy_from_slice(bytes);

    put(&mut h, 0, &(HEADER_SIZE as i32).to_le_bytes());
    put(&mut h, 38, b"r");
    let [nx, ny, nz] = mask.dims();
    let dim: [i16; 8] = [3, nx as i16, ny as i16, nz as i16, 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        put(&mut h, 40 + 2 * i, &d.to_le_bytes());
    }
    put(&mut h, 70, &DT_UINT8.to_le_bytes());
    put(&mut h, 72, &8i16.to_le_bytes());
    let s = mask.spacing();
    let pixdim: [f32; 8] = [1.0, s[0] as f32, s[1] as f32, s[2] as f32, 1.0, 1.0, 1.0, 1.0];
    for (i, p) in pixdim.iter().enumerate() {
        put(&mut h, 76 + 4 * i, &p.to_le_bytes());
    }
    put(&mut h, 108, &(VOX_OFFSET as f32).to_le_bytes());
    put(&mut h, 112, &1f32.to_le_bytes());
    h[123] = NIFTI_UNITS_MM;
    put(&mut h, 124, &1f32.to_le_bytes()); // cal_max
    // descrip is 80 bytes, NUL padded; longer text is cut.
    let desc = description.as_bytes();
    put(&mut h, 148, &desc[..desc.len().min(79)]);
    if let Some(a) = mask.affine() {
        put(&mut h, 254, &1i16.to_le_bytes());
        for (row, off) in [280usize, 296, 312].into_iter().enumerate() {
            for col in 0..4 {
                put(&mut h, off + 4 * col, &(a[row][col] as f32).to_le_bytes());
            }
        }
    }
    put(&mut h, 344, b"n+1\0");
    h.extend_from_slice(mask.voxels());
    Ok(h)
}

/// Write a mask as NIfTI-1. A `.gz` extension selects gzip compression.
pub fn write_mask(mask: &MaskVolume, path: impl AsRef<Path>) -> Result<(), NiftiError> {
    write_mask_described(mask, path, "")
}

/// [`write_mask`] with free text in the header's `descrip` field.
pub fn write_mask_described(mask: &MaskVolume, path: impl AsRef<Path>, description: &str) -> Result<(), NiftiError> {
    let path = path.as_ref();
    let io_err = |source| NiftiError::Io { path: path.display().to_string(), source };
    let bytes = encode(mask, description)?;
    let gz = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    let payload = if gz {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&bytes).map_err(io_err)?;
        enc.finish().map_err(io_err)?
    } else {
        bytes
    };
    fs::write(path, payload).map_err(io_err)
}
