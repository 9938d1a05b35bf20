//! In-memory NRRD codec for the 3D volumes the pipeline produces and
//! consumes: 8/16-bit integer types, raw or gzip encoding.
//!
//! Writing always emits NRRD0004 with raw little-endian payload, so output
//! bytes are a pure function of the grid.

use std::collections::HashMap;
use std::io::Read;

use crate::error::NrrdError;
use crate::grid::{GridKind, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    U8,
    I8,
    U16,
    I16,
}

impl ScalarType {
    fn bytes(self) -> usize {
        match self {
            ScalarType::U8 | ScalarType::I8 => 1,
            ScalarType::U16 | ScalarType::I16 => 2,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "uchar" | "unsigned char" | "uint8" | "uint8_t" => Some(ScalarType::U8),
            "signed char" | "int8" | "int8_t" => Some(ScalarType::I8),
            "ushort" | "unsigned short" | "unsigned short int" | "uint16" | "uint16_t" => {
                Some(ScalarType::U16)
            }
            "short" | "short int" | "signed short" | "signed short int" | "int16" | "int16_t" => {
                Some(ScalarType::I16)
            }
            _ => None,
        }
    }
}

fn parse_header(bytes: &[u8]) -> Result<(HashMap<String, String>, usize), NrrdError> {
    // header is ASCII lines up to the first blank line
    let mut pos = 0usize;
    let mut lines: Vec<String> = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(NrrdError::BadMagic)?;
        let line = &rest[..nl];
        let line = if line.ends_with(b"\r") {
            &line[..nl - 1]
        } else {
            line
        };
        pos += nl + 1;
        if line.is_empty() {
            break;
        }
        lines.push(String::from_utf8_lossy(line).into_owned());
    }
    let magic = lines.first().ok_or(NrrdError::BadMagic)?;
    if !magic.starts_with("NRRD000") {
        return Err(NrrdError::BadMagic);
    }
    let mut fields = HashMap::new();
    for line in &lines[1..] {
        if line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| NrrdError::MalformedHeader { line: line.clone() })?;
        // both "key: value" fields and "key:= value" key-value pairs
        let value = value.strip_prefix('=').unwrap_or(value);
        fields.insert(key.trim().to_ascii_lowercase(), value.trim().to_string());
    }
    Ok((fields, pos))
}

fn parse_sizes(v: &str) -> Result<[usize; 3], NrrdError> {
    let parts: Vec<usize> = v
        .split_whitespace()
        .map(|t| {
            t.parse().map_err(|_| NrrdError::InvalidField {
                field: "sizes",
                value: v.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    if parts.len() != 3 {
        return Err(NrrdError::Unsupported {
            field: "sizes",
            value: v.to_string(),
        });
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn parse_spacing(fields: &HashMap<String, String>) -> Result<[f64; 3], NrrdError> {
    if let Some(v) = fields.get("spacings") {
        let parts: Vec<f64> = v
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| NrrdError::InvalidField {
                    field: "spacings",
                    value: v.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        if parts.len() != 3 {
            return Err(NrrdError::InvalidField {
                field: "spacings",
                value: v.to_string(),
            });
        }
        return Ok([parts[0], parts[1], parts[2]]);
    }
    if let Some(v) = fields.get("space directions") {
        // e.g. (1,0,0) (0,1,0) (0,0,2.5); spacing is the column norm
        let mut spacing = Vec::new();
        for tok in v.split_whitespace() {
            let inner = tok.trim_matches(|c| c == '(' || c == ')');
            let comps: Vec<f64> = inner
                .split(',')
                .map(|t| {
                    t.parse().map_err(|_| NrrdError::InvalidField {
                        field: "space directions",
                        value: v.to_string(),
                    })
                })
                .collect::<Result<_, _>>()?;
            spacing.push(comps.iter().map(|c| c * c).sum::<f64>().sqrt());
        }
        if spacing.len() != 3 {
            return Err(NrrdError::InvalidField {
                field: "space directions",
                value: v.to_string(),
            });
        }
        return Ok([spacing[0], spacing[1], spacing[2]]);
    }
    Err(NrrdError::MissingField {
        field: "spacings | space directions",
    })
}

/// Parses a 3D NRRD byte stream into a grid.
pub fn read_nrrd(bytes: &[u8]) -> Result<VoxelGrid, NrrdError> {
    let (fields, payload_start) = parse_header(bytes)?;
    let dim = fields
        .get("dimension")
        .ok_or(NrrdError::MissingField { field: "dimension" })?;
    if dim.trim() != "3" {
        return Err(NrrdError::Unsupported {
            field: "dimension",
            value: dim.clone(),
        });
    }
    let type_str = fields
        .get("type")
        .ok_or(NrrdError::MissingField { field: "type" })?;
    let scalar = ScalarType::parse(type_str).ok_or_else(|| NrrdError::Unsupported {
        field: "type",
        value: type_str.clone(),
    })?;
    let sizes = parse_sizes(
        fields
            .get("sizes")
            .ok_or(NrrdError::MissingField { field: "sizes" })?,
    )?;
    let spacing = parse_spacing(&fields)?;
    let encoding = fields
        .get("encoding")
        .ok_or(NrrdError::MissingField { field: "encoding" })?
        .as_str();
    let big_endian = match fields.get("endian").map(|s| s.as_str()) {
        Some("little") | None => false,
        Some("big") => true,
        Some(other) => {
            return Err(NrrdError::Unsupported {
                field: "endian",
                value: other.to_string(),
            })
        }
    };

    let n = sizes[0] * sizes[1] * sizes[2];
    let expected = n * scalar.bytes();
    let raw: Vec<u8> = match encoding {
        "raw" => bytes[payload_start..].to_vec(),
        "gzip" | "gz" => {
            let mut out = Vec::new();
            flate2::read::GzDecoder::new(&bytes[payload_start..])
                .read_to_end(&mut out)
                .map_err(|e| NrrdError::Gzip(e.to_string()))?;
            out
        }
        other => {
            return Err(NrrdError::Unsupported {
                field: "encoding",
                value: other.to_string(),
            })
        }
    };
    if raw.len() != expected {
        return Err(NrrdError::PayloadLength {
            expected,
            got: raw.len(),
        });
    }

    let data: Vec<f32> = match scalar {
        ScalarType::U8 => raw.iter().map(|&b| b as f32).collect(),
        ScalarType::I8 => raw.iter().map(|&b| b as i8 as f32).collect(),
        ScalarType::U16 => raw
            .chunks_exact(2)
            .map(|c| {
                let v = if big_endian {
                    u16::from_be_bytes([c[0], c[1]])
                } else {
                    u16::from_le_bytes([c[0], c[1]])
                };
                v as f32
            })
            .collect(),
        ScalarType::I16 => raw
            .chunks_exact(2)
            .map(|c| {
                let v = if big_endian {
                    i16::from_be_bytes([c[0], c[1]])
                } else {
                    i16::from_le_bytes([c[0], c[1]])
                };
                v as f32
            })
            .collect(),
    };

    let kind = match fields.get("content").map(|s| s.as_str()) {
        Some("mask") => GridKind::Mask,
        Some("hounsfield") => GridKind::Hu,
        _ => {
            if scalar == ScalarType::U8 && data.iter().all(|&v| v == 0.0 || v == 1.0) {
                GridKind::Mask
            } else {
                GridKind::Hu
            }
        }
    };
    Ok(VoxelGrid::new(sizes, spacing, kind, data)?)
}

/// Serializes a grid as NRRD0004 with raw little-endian payload.
///
/// Masks are written as uint8, Hounsfield volumes as int16 (clamped to the
/// type range). Probability grids have no lossless integer representation
/// and are rejected; binarize before writing.
pub fn write_nrrd(grid: &VoxelGrid) -> Result<Vec<u8>, NrrdError> {
    let (type_str, content) = match grid.kind() {
        GridKind::Mask => ("uint8", "mask"),
        GridKind::Hu => ("int16", "hounsfield"),
        GridKind::Probability => {
            return Err(NrrdError::UnsupportedKind {
                kind: GridKind::Probability,
            })
        }
    };
    let [nx, ny, nz] = grid.dims();
    let [sx, sy, sz] = grid.spacing();
    let mut out = Vec::new();
    out.extend_from_slice(b"NRRD0004\n");
    out.extend_from_slice(format!("type: {type_str}\n").as_bytes());
    out.extend_from_slice(b"dimension: 3\n");
    out.extend_from_slice(format!("sizes: {nx} {ny} {nz}\n").as_bytes());
    out.extend_from_slice(format!("spacings: {sx} {sy} {sz}\n").as_bytes());
    out.extend_from_slice(b"endian: little\n");
    out.extend_from_slice(b"encoding: raw\n");
    out.extend_from_slice(format!("content: {content}\n").as_bytes());
    out.push(b'\n');
    match grid.kind() {
        GridKind::Mask => {
            out.extend(grid.data().iter().map(|&v| if v != 0.0 { 1u8 } else { 0 }));
        }
        GridKind::Hu => {
            for &v in grid.data() {
                let q = v.clamp(i16::MIN as f32, i16::MAX as f32) as i16;
                out.extend_from_slice(&q.to_le_bytes());
            }
        }
        GridKind::Probability => unreachable!(),
    }
    Ok(out)
}
