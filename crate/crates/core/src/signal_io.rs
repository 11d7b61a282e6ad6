//! Readers for vibration recordings: the MAT-v5 subset used by the CWRU
//! bearing files, little-endian float64 streams and one-number-per-line text.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::ZlibDecoder;
use thiserror::Error;

use crate::signal::{
    FaultAnnotation, OperatingCondition, SensorPosition, SignalError, TimeSeriesSignal, DEFAULT_SAMPLING_RATE_HZ,
};

// https://www.mathworks.com/help/pdf_doc/matlab/matfile_format.pdf
const HEADER_LEN: usize = 128;
const MAGIC: &[u8] = b"MATLAB 5.0";

const MI_INT8: u32 = 1;
const MI_UINT8: u32 = 2;
const MI_INT16: u32 = 3;
const MI_UINT16: u32 = 4;
const MI_INT32: u32 = 5;
const MI_UINT32: u32 = 6;
const MI_SINGLE: u32 = 7;
const MI_DOUBLE: u32 = 9;
const MI_INT64: u32 = 12;
const MI_UINT64: u32 = 13;
const MI_MATRIX: u32 = 14;
const MI_COMPRESSED: u32 = 15;

const MX_DOUBLE_CLASS: u32 = 6;
const FLAG_COMPLEX: u32 = 0x0800;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("not a MAT-v5 file: {0}")]
    BadMagic(String),
    #[error("unsupported element: {0}")]
    UnsupportedElement(String),
    #[error("file is truncated")]
    TruncatedFile,
    #[error("compressed element could not be inflated: {0}")]
    ChecksumOrInflateFailure(String),
}

#[derive(Debug, Error)]
pub enum SignalIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mat(#[from] MatError),
    #[error("no variable matches the requested channel (available: {available:?})")]
    NoMatchingChannel { available: Vec<String> },
    #[error("several channel variables match and no hint was given: {candidates:?}")]
    AmbiguousChannel { candidates: Vec<String> },
    #[error("line {line}: cannot parse {text:?} as a number")]
    Text { line: usize, text: String },
    #[error("raw float64 stream length {0} is not a multiple of 8")]
    RawLength(usize),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self {
            Endian::Little => u32::from_le_bytes(a),
            Endian::Big => u32::from_be_bytes(a),
        }
    }

    fn u16(self, b: &[u8]) -> u16 {
        let a = [b[0], b[1]];
        match self {
            Endian::Little => u16::from_le_bytes(a),
            Endian::Big => u16::from_be_bytes(a),
        }
    }
}

fn class_name(class: u32) -> &'static str {
    match class {
        1 => "mxCELL_CLASS",
        2 => "mxSTRUCT_CLASS",
        3 => "mxOBJECT_CLASS",
        4 => "mxCHAR_CLASS",
        5 => "mxSPARSE_CLASS",
        6 => "mxDOUBLE_CLASS",
        7 => "mxSINGLE_CLASS",
        8 => "mxINT8_CLASS",
        9 => "mxUINT8_CLASS",
        10 => "mxINT16_CLASS",
        11 => "mxUINT16_CLASS",
        12 => "mxINT32_CLASS",
        13 => "mxUINT32_CLASS",
        14 => "mxINT64_CLASS",
        15 => "mxUINT64_CLASS",
        _ => "unknown class",
    }
}

/// One data element: its type code and payload.
struct Element<'a> {
    tag: u32,
    data: &'a [u8],
}

/// Reads the element starting at `pos`, returning it and the offset of the
/// next one. Small-format elements pack type, size and data in 8 bytes.
fn read_element(buf: &[u8], pos: usize, endian: Endian) -> Result<(Element<'_>, usize), MatError> {
    let tag_bytes = buf.get(pos..pos + 8).ok_or(MatError::TruncatedFile)?;
    let first = endian.u32(&tag_bytes[0..4]);
    if first >> 16 != 0 {
        let tag = first & 0xffff;
        let size = (first >> 16) as usize;
        if size > 4 {
            return Err(MatError::UnsupportedElement(format!(
                "small element of type {tag} claims {size} bytes"
            )));
        }
        return Ok((
            Element {
                tag,
                data: &tag_bytes[4..4 + size],
            },
            pos + 8,
        ));
    }
    let size = endian.u32(&tag_bytes[4..8]) as usize;
    let start = pos + 8;
    let end = start.checked_add(size).ok_or(MatError::TruncatedFile)?;
    let data = buf.get(start..end).ok_or(MatError::TruncatedFile)?;
    let next = if first == MI_COMPRESSED {
        end
    } else {
        end.div_ceil(8) * 8
    };
    Ok((Element { tag: first, data }, next.min(buf.len()).max(end)))
}

fn numeric_to_f64(el: &Element<'_>, endian: Endian) -> Result<Vec<f64>, MatError> {
    macro_rules! conv {
        ($t:ty, $n:expr) => {{
            if !el.data.len().is_multiple_of($n) {
                return Err(MatError::TruncatedFile);
            }
            el.data
                .chunks_exact($n)
                .map(|c| {
                    let arr: [u8; $n] = c.try_into().unwrap();
                    let v = match endian {
                        Endian::Little => <$t>::from_le_bytes(arr),
                        Endian::Big => <$t>::from_be_bytes(arr),
                    };
                    v as f64
                })
                .collect()
        }};
    }
    let out: Vec<f64> = match el.tag {
        MI_DOUBLE => conv!(f64, 8),
        MI_SINGLE => conv!(f32, 4),
        MI_INT8 => conv!(i8, 1),
        MI_UINT8 => conv!(u8, 1),
        MI_INT16 => conv!(i16, 2),
        MI_UINT16 => conv!(u16, 2),
        MI_INT32 => conv!(i32, 4),
        MI_UINT32 => conv!(u32, 4),
        MI_INT64 => conv!(i64, 8),
        MI_UINT64 => conv!(u64, 8),
        other => {
            return Err(MatError::UnsupportedElement(format!(
                "numeric data of element type {other}"
            )))
        }
    };
    Ok(out)
}

fn parse_matrix(data: &[u8], endian: Endian) -> Result<(String, Vec<f64>), MatError> {
    if data.is_empty() {
        return Err(MatError::UnsupportedElement("empty miMATRIX".into()));
    }
    let (flags, pos) = read_element(data, 0, endian)?;
    if flags.tag != MI_UINT32 || flags.data.len() < 8 {
        return Err(MatError::UnsupportedElement(format!(
            "array flags of type {} ({} bytes)",
            flags.tag,
            flags.data.len()
        )));
    }
    let word = endian.u32(&flags.data[0..4]);
    let class = word & 0xff;
    if class != MX_DOUBLE_CLASS {
        return Err(MatError::UnsupportedElement(format!(
            "miMATRIX of class {} ({class})",
            class_name(class)
        )));
    }
    if word & FLAG_COMPLEX != 0 {
        return Err(MatError::UnsupportedElement("complex mxDOUBLE_CLASS array".into()));
    }

    let (dims, pos) = read_element(data, pos, endian)?;
    if dims.tag != MI_INT32 || dims.data.len() % 4 != 0 {
        return Err(MatError::UnsupportedElement(format!("dimensions of type {}", dims.tag)));
    }
    let count = dims
        .data
        .chunks_exact(4)
        .map(|c| endian.u32(c) as usize)
        .try_fold(1usize, |acc, d| acc.checked_mul(d))
        .ok_or(MatError::TruncatedFile)?;

    let (name_el, pos) = read_element(data, pos, endian)?;
    if name_el.tag != MI_INT8 && name_el.tag != MI_UINT8 {
        return Err(MatError::UnsupportedElement(format!(
            "array name of type {}",
            name_el.tag
        )));
    }
    let name = String::from_utf8_lossy(name_el.data).trim_end_matches('\0').to_string();

    let (real, _) = read_element(data, pos, endian)?;
    let values = numeric_to_f64(&real, endian)?;
    if values.len() != count {
        return Err(MatError::TruncatedFile);
    }
    Ok((name, values))
}

fn parse_elements(
    buf: &[u8],
    endian: Endian,
    out: &mut BTreeMap<String, Vec<f64>>,
    nested: bool,
) -> Result<(), MatError> {
    let mut pos = 0;
    while pos < buf.len() {
        let (el, next) = read_element(buf, pos, endian)?;
        match el.tag {
            MI_MATRIX => {
                let (name, values) = parse_matrix(el.data, endian)?;
                out.insert(name, values);
            }
            MI_COMPRESSED if !nested => {
                let mut inflated = Vec::new();
                ZlibDecoder::new(el.data)
                    .read_to_end(&mut inflated)
                    .map_err(|e| MatError::ChecksumOrInflateFailure(e.to_string()))?;
                parse_elements(&inflated, endian, out, true)?;
            }
            other => {
                return Err(MatError::UnsupportedElement(format!("top-level element type {other}")));
            }
        }
        pos = next;
    }
    Ok(())
}

/// Parses a MAT-v5 file into its double arrays, keyed by variable name.
/// Arrays are returned flattened in column-major order.
pub fn parse_mat_v5(bytes: &[u8]) -> Result<BTreeMap<String, Vec<f64>>, MatError> {
    if bytes.len() < HEADER_LEN {
        return Err(MatError::TruncatedFile);
    }
    if !bytes.starts_with(MAGIC) {
        return Err(MatError::BadMagic(
            "header text does not start with \"MATLAB 5.0\"".into(),
        ));
    }
    let endian = match &bytes[126..128] {
        b"IM" => Endian::Little,
        b"MI" => Endian::Big,
        other => {
            return Err(MatError::BadMagic(format!("endian indicator {other:?}")));
        }
    };
    let version = endian.u16(&bytes[124..126]);
    if version != 0x0100 {
        return Err(MatError::BadMagic(format!("version 0x{version:04x}")));
    }
    let mut out = BTreeMap::new();
    parse_elements(&bytes[HEADER_LEN..], endian, &mut out, false)?;
    Ok(out)
}

pub fn parse_raw_f64(bytes: &[u8]) -> Result<Vec<f64>, SignalIoError> {
    if !bytes.len().is_multiple_of(8) {
        return Err(SignalIoError::RawLength(bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn encode_raw_f64(samples: &[f64]) -> Vec<u8> {
    samples.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Parses one number per line; blank lines are skipped.
pub fn parse_text(text: &str) -> Result<Vec<f64>, SignalIoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| SignalIoError::Text {
                line: i + 1,
                text: l.to_string(),
            })
        })
        .collect()
}

/// Picks the channel variable out of a parsed MAT file.
pub fn select_channel(
    vars: &BTreeMap<String, Vec<f64>>,
    hint: Option<SensorPosition>,
) -> Result<(&str, &[f64]), SignalIoError> {
    let patterns: Vec<&str> = match hint {
        Some(p) => vec![p.channel_pattern()],
        None => SensorPosition::ALL.iter().map(|p| p.channel_pattern()).collect(),
    };
    let candidates: Vec<&String> = vars.keys().filter(|k| patterns.iter().any(|p| k.contains(p))).collect();
    match candidates.as_slice() {
        [] => Err(SignalIoError::NoMatchingChannel {
            available: vars.keys().cloned().collect(),
        }),
        [one] => Ok((one.as_str(), vars[*one].as_slice())),
        many => Err(SignalIoError::AmbiguousChannel {
            candidates: many.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

/// Metadata attached to a recording when it is loaded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadRequest {
    pub channel_hint: Option<SensorPosition>,
    pub annotation: FaultAnnotation,
    pub condition: OperatingCondition,
    pub sampling_rate_hz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Mat,
    Text,
    Raw,
}

fn sniff(path: &Path, bytes: &[u8]) -> Format {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("mat") => return Format::Mat,
        Some("txt") | Some("csv") => return Format::Text,
        Some("f64") | Some("bin") | Some("raw") => return Format::Raw,
        _ => {}
    }
    if bytes.starts_with(MAGIC) {
        return Format::Mat;
    }
    match std::str::from_utf8(bytes) {
        Ok(s) if parse_text(s).is_ok() => Format::Text,
        _ => Format::Raw,
    }
}

/// Loads a recording from disk and attaches its metadata. The sensor
/// position of the result is the selected channel (MAT) or the hint
/// (raw/text, default drive end).
pub fn load_signal(path: &Path, req: &LoadRequest) -> Result<TimeSeriesSignal, SignalIoError> {
    let bytes = fs::read(path).map_err(|source| SignalIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let fs = req.sampling_rate_hz.unwrap_or(DEFAULT_SAMPLING_RATE_HZ);

    let (samples, position, source_id) = match sniff(path, &bytes) {
        Format::Mat => {
            let vars = parse_mat_v5(&bytes)?;
            let (name, values) = select_channel(&vars, req.channel_hint)?;
            let position = if name.contains(SensorPosition::FanEnd.channel_pattern()) {
                SensorPosition::FanEnd
            } else {
                SensorPosition::DriveEnd
            };
            (values.to_vec(), position, format!("{stem}:{name}"))
        }
        Format::Text => {
            let text = String::from_utf8_lossy(&bytes);
            (
                parse_text(&text)?,
                req.channel_hint.unwrap_or(SensorPosition::DriveEnd),
                stem,
            )
        }
        Format::Raw => (
            parse_raw_f64(&bytes)?,
            req.channel_hint.unwrap_or(SensorPosition::DriveEnd),
            stem,
        ),
    };
    Ok(TimeSeriesSignal::new(
        samples,
        fs,
        position,
        req.condition,
        req.annotation,
        source_id,
    )?)
}
