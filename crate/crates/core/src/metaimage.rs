//! MetaImage (`.mhd` + `.raw`) reading and writing.
//!
//! Only the subset needed here is supported: 3-D, uncompressed,
//! little-endian payloads of `MET_SHORT` (CT) or `MET_UCHAR` (masks).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::volume::{Grid, Mask, Spacing, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    Short,
    UChar,
}

impl ElementType {
    fn tag(self) -> &'static str {
        match self {
            ElementType::Short => "MET_SHORT",
            ElementType::UChar => "MET_UCHAR",
        }
    }

    fn size(self) -> usize {
        match self {
            ElementType::Short => 2,
            ElementType::UChar => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub grid: Grid,
    pub element_type: ElementType,
    /// `None` for `ElementDataFile = LOCAL`.
    pub data_file: Option<String>,
}

pub fn read_header(path: &Path) -> Result<Header> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_header(path, &bytes).map(|(h, _)| h)
}

/// Parse the header; also returns the byte offset just past it (for LOCAL data).
fn parse_header(path: &Path, bytes: &[u8]) -> Result<(Header, usize)> {
    let bad = |msg: String| Error::Header {
        path: path.to_path_buf(),
        msg,
    };
    let mut dims: Option<Vec<usize>> = None;
    let mut spacing: Option<Vec<f64>> = None;
    let mut offset = vec![0.0; 3];
    let mut element_type = None;
    let mut data_file = None;
    let mut ndims = None;
    let mut pos = 0usize;
    let mut consumed = None;

    while pos < bytes.len() {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| pos + p + 1)
            .unwrap_or(bytes.len());
        let line = std::str::from_utf8(&bytes[pos..end])
            .map_err(|_| bad("header is not UTF-8".into()))?
            .trim();
        pos = end;
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(bad(format!("line without '=': {line}")));
        };
        let key = key.trim();
        let value = value.trim();
        let floats = |v: &str| -> Result<Vec<f64>> {
            v.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number in {key}: {t}"))))
                .collect()
        };
        match key {
            "NDims" => ndims = Some(value.parse::<usize>().map_err(|_| bad("bad NDims".into()))?),
            "DimSize" => {
                dims = Some(
                    value
                        .split_whitespace()
                        .map(|t| t.parse::<usize>().map_err(|_| bad(format!("bad DimSize: {t}"))))
                        .collect::<Result<_>>()?,
                )
            }
            "ElementSpacing" | "ElementSize" => spacing = Some(floats(value)?),
            "Offset" | "Origin" | "Position" => offset = floats(value)?,
            "ElementType" => {
                element_type = Some(match value {
                    "MET_SHORT" => ElementType::Short,
                    "MET_UCHAR" => ElementType::UChar,
                    other => return Err(bad(format!("unsupported ElementType {other}"))),
                })
            }
            "CompressedData" if value.eq_ignore_ascii_case("true") => {
                return Err(bad("compressed data is not supported".into()))
            }
            "BinaryDataByteOrderMSB" | "ElementByteOrderMSB" if value.eq_ignore_ascii_case("true") => {
                return Err(bad("big-endian data is not supported".into()))
            }
            "ElementDataFile" => {
                data_file = (value != "LOCAL").then(|| value.to_string());
                consumed = Some(pos);
                break;
            }
            _ => {}
        }
    }

    if ndims != Some(3) {
        return Err(bad(format!("NDims must be 3, got {ndims:?}")));
    }
    let dims = dims.ok_or_else(|| bad("missing DimSize".into()))?;
    if dims.len() != 3 {
        return Err(bad("DimSize must have 3 entries".into()));
    }
    let sp = spacing.unwrap_or_else(|| vec![1.0; 3]);
    if sp.len() != 3 || offset.len() != 3 {
        return Err(bad("ElementSpacing and Offset must have 3 entries".into()));
    }
    let element_type = element_type.ok_or_else(|| bad("missing ElementType".into()))?;
    let consumed = consumed.ok_or_else(|| bad("missing ElementDataFile".into()))?;
    let grid = Grid::new(
        [dims[0], dims[1], dims[2]],
        Spacing::new(sp[0], sp[1], sp[2])?,
        [offset[0], offset[1], offset[2]],
    )?;
    Ok((
        Header {
            grid,
            element_type,
            data_file,
        },
        consumed,
    ))
}

fn read_payload(path: &Path) -> Result<(Header, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, consumed) = parse_header(path, &bytes)?;
    let raw = match &header.data_file {
        None => bytes[consumed..].to_vec(),
        Some(name) => {
            let raw_path = path.parent().unwrap_or(Path::new(".")).join(name);
            fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?
        }
    };
    let expected = header.grid.len() * header.element_type.size();
    if raw.len() < expected {
        return Err(Error::DataLength {
            expected,
            actual: raw.len(),
        });
    }
    Ok((header, raw))
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    let (header, raw) = read_payload(path)?;
    let n = header.grid.len();
    let data = match header.element_type {
        ElementType::Short => raw[..2 * n]
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]))
            .collect(),
        ElementType::UChar => raw[..n].iter().map(|&b| b as i16).collect(),
    };
    Volume::new(header.grid, data)
}

/// Reads a mask; any nonzero element is foreground.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let (header, raw) = read_payload(path)?;
    let n = header.grid.len();
    let data = match header.element_type {
        ElementType::UChar => raw[..n].iter().map(|&b| b != 0).collect(),
        ElementType::Short => raw[..2 * n]
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) != 0)
            .collect(),
    };
    Mask::new(header.grid, data)
}

fn raw_path_for(path: &Path) -> (PathBuf, String) {
    let raw = path.with_extension("raw");
    let name = raw
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data.raw".into());
    (raw, name)
}

fn header_text(grid: &Grid, et: ElementType, data_file: &str) -> String {
    let d = grid.dims;
    let s = grid.spacing.as_array();
    let o = grid.origin;
    format!(
        "ObjectType = Image\nNDims = 3\nBinaryData = True\nBinaryDataByteOrderMSB = False\n\
         CompressedData = False\nDimSize = {} {} {}\nElementSpacing = {} {} {}\n\
         Offset = {} {} {}\nElementType = {}\nElementDataFile = {}\n",
        d[0],
        d[1],
        d[2],
        s[0],
        s[1],
        s[2],
        o[0],
        o[1],
        o[2],
        et.tag(),
        data_file
    )
}

fn write_pair(path: &Path, grid: &Grid, et: ElementType, payload: &[u8]) -> Result<()> {
    let (raw_path, name) = raw_path_for(path);
    fs::write(path, header_text(grid, et, &name)).map_err(|e| Error::io(path, e))?;
    let mut f = fs::File::create(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    f.write_all(payload).map_err(|e| Error::io(&raw_path, e))?;
    Ok(())
}

/// Writes `path` (header) and a sibling `.raw` payload.
pub fn write_volume(path: &Path, vol: &Volume) -> Result<()> {
    let payload: Vec<u8> = vol.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_pair(path, vol.grid(), ElementType::Short, &payload)
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    let payload: Vec<u8> = mask.data().iter().map(|&b| b as u8).collect();
    write_pair(path, mask.grid(), ElementType::UChar, &payload)
}
