//! Little-endian `PCPM` probability-map and `PCLM` label-map files.
//!
//! ```text
//! PCPM: b"PCPM" | u16 version=1 | u16 C | u32 H | u32 W | u8 elem_width=4 | f32[C*H*W]
//! PCLM: b"PCLM" | u16 version=1 | u32 H | u32 W | u8[H*W]
//! ```
//!
//! Probability payloads are class-major (all of class 0, then class 1, ...),
//! each plane row-major.

use std::io::{Read, Write};

use crate::calibration::ProbMap;
use crate::error::{Error, Result};
use crate::label_space::LabelSpace;
use crate::labels::LabelGrid;

pub const PROB_MAGIC: [u8; 4] = *b"PCPM";
pub const LABEL_MAGIC: [u8; 4] = *b"PCLM";
pub const FORMAT_VERSION: u16 = 1;
pub const PROB_HEADER_LEN: usize = 17;
pub const LABEL_HEADER_LEN: usize = 14;

const ELEM_WIDTH: u8 = 4;

/// Writes `map` as a `PCPM` file and returns the number of bytes written.
///
/// Values are narrowed to `f32`; a map read from a file writes back bit-exactly.
pub fn write_prob_map<W: Write>(map: &ProbMap, mut dest: W) -> Result<u64> {
    let c = u16::try_from(map.num_classes())
        .map_err(|_| Error::dim(format!("{} classes do not fit u16", map.num_classes())))?;
    let h = u32::try_from(map.height()).map_err(|_| Error::dim("height does not fit u32"))?;
    let w = u32::try_from(map.width()).map_err(|_| Error::dim("width does not fit u32"))?;

    let mut buf = Vec::with_capacity(PROB_HEADER_LEN + 4 * map.as_pixel_major().len());
    buf.extend_from_slice(&PROB_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&c.to_le_bytes());
    buf.extend_from_slice(&h.to_le_bytes());
    buf.extend_from_slice(&w.to_le_bytes());
    buf.push(ELEM_WIDTH);
    for v in map.to_class_major() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    dest.write_all(&buf)?;
    Ok(buf.len() as u64)
}

/// Reads a `PCPM` file, validating the header, payload length and every pixel.
pub fn read_prob_map<R: Read>(mut src: R) -> Result<ProbMap> {
    let mut header = [0u8; PROB_HEADER_LEN];
    read_header(&mut src, &mut header, PROB_MAGIC)?;
    check_version(&header)?;
    let c = u16::from_le_bytes([header[6], header[7]]) as usize;
    let h = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    if header[16] != ELEM_WIDTH {
        return Err(Error::Format(format!(
            "unsupported element width {} (only 4-byte floats)",
            header[16]
        )));
    }
    let byte_len = c
        .checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::dim(format!("{c}x{h}x{w} payload size overflows")))?;
    let payload = read_payload(&mut src, byte_len)?;
    let planes: Vec<f64> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    ProbMap::from_class_major(w, h, c, &planes)
}

/// Writes `grid` as a `PCLM` file and returns the number of bytes written.
pub fn write_label_map<W: Write>(grid: &LabelGrid, mut dest: W) -> Result<u64> {
    let h = u32::try_from(grid.height()).map_err(|_| Error::dim("height does not fit u32"))?;
    let w = u32::try_from(grid.width()).map_err(|_| Error::dim("width does not fit u32"))?;
    let mut buf = Vec::with_capacity(LABEL_HEADER_LEN + grid.labels().len());
    buf.extend_from_slice(&LABEL_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&h.to_le_bytes());
    buf.extend_from_slice(&w.to_le_bytes());
    buf.extend_from_slice(grid.labels());
    dest.write_all(&buf)?;
    Ok(buf.len() as u64)
}

/// Reads a `PCLM` file without class-range validation.
pub fn read_label_grid<R: Read>(mut src: R) -> Result<LabelGrid> {
    let mut header = [0u8; LABEL_HEADER_LEN];
    read_header(&mut src, &mut header, LABEL_MAGIC)?;
    check_version(&header)?;
    let h = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(header[10..14].try_into().unwrap()) as usize;
    let len = h
        .checked_mul(w)
        .ok_or_else(|| Error::dim(format!("{h}x{w} payload size overflows")))?;
    let payload = read_payload(&mut src, len)?;
    LabelGrid::new(w, h, payload)
}

/// Reads a `PCLM` file and checks every value against `space`.
pub fn read_label_map<R: Read>(src: R, space: &LabelSpace) -> Result<LabelGrid> {
    let grid = read_label_grid(src)?;
    grid.validate(space)?;
    Ok(grid)
}

fn read_header<R: Read>(src: &mut R, header: &mut [u8], magic: [u8; 4]) -> Result<()> {
    let got = read_up_to(src, header)?;
    if got < 4 {
        return Err(Error::Format(format!(
            "file too short for a header ({got} bytes)"
        )));
    }
    check_magic(header, magic)?;
    if got < header.len() {
        return Err(Error::Truncated {
            expected: header.len() as u64,
            actual: got as u64,
        });
    }
    Ok(())
}

fn check_magic(header: &[u8], expected: [u8; 4]) -> Result<()> {
    let found: [u8; 4] = header[..4].try_into().unwrap();
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

fn check_version(header: &[u8]) -> Result<()> {
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    Ok(())
}

/// Reads exactly `len` payload bytes and insists the stream ends there.
///
/// The buffer grows with the data actually present, so a corrupt header
/// claiming a huge payload fails as truncation instead of a huge allocation.
fn read_payload<R: Read>(src: &mut R, len: usize) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    src.by_ref().take(len as u64).read_to_end(&mut payload)?;
    if payload.len() < len {
        return Err(Error::Truncated {
            expected: len as u64,
            actual: payload.len() as u64,
        });
    }
    let mut extra = [0u8; 1];
    if read_up_to(src, &mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(payload)
}

fn read_up_to<R: Read>(src: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match src.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}
