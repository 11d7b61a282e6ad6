//! Segmentation, normalized FFT magnitudes and the integer string encoding
//! fed to the language model.

use std::cell::RefCell;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::TimeSeriesSignal;

/// Default segment length.
pub const DEFAULT_SEGMENT_LEN: usize = 512;
/// Default number of retained decimal places.
pub const DEFAULT_DECIMALS: u32 = 3;
/// Largest supported number of decimal places.
pub const MAX_DECIMALS: u32 = 12;
pub const SEPARATOR: char = ',';
pub const MISSING_TOKEN: &str = "NaN";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("signal has {len} samples, segment length is {segment_len}")]
    SignalTooShort { len: usize, segment_len: usize },
    #[error("{requested} contiguous segments of length {segment_len} do not fit in {len} samples")]
    TooManySegments {
        requested: usize,
        segment_len: usize,
        len: usize,
    },
    #[error("segment length and count must be positive")]
    ZeroLength,
    #[error("sample {0} is not finite")]
    NonFiniteInput(usize),
    #[error("decimal places {0} exceed the maximum of 12")]
    TooManyDecimals(u32),
    #[error("token {index} ({token:?}) is not a non-negative integer or NaN")]
    BadToken { index: usize, token: String },
    #[error("spectrum value {index} is negative ({value})")]
    NegativeMagnitude { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentMode {
    ContiguousNonOverlap,
    #[default]
    RandomStart,
}

/// A fixed-length window cut from a parent signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f64>,
    pub parent: String,
    pub start_index: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Start offsets for `count` windows of `segment_len` samples over a signal
/// of `len` samples.
pub fn segment_offsets(
    len: usize,
    segment_len: usize,
    count: usize,
    mode: SegmentMode,
    seed: u64,
) -> Result<Vec<usize>, PreprocessError> {
    if segment_len == 0 || count == 0 {
        return Err(PreprocessError::ZeroLength);
    }
    if len < segment_len {
        return Err(PreprocessError::SignalTooShort { len, segment_len });
    }
    match mode {
        SegmentMode::ContiguousNonOverlap => {
            if count > len / segment_len {
                return Err(PreprocessError::TooManySegments {
                    requested: count,
                    segment_len,
                    len,
                });
            }
            Ok((0..count).map(|k| k * segment_len).collect())
        }
        SegmentMode::RandomStart => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let last = len - segment_len;
            Ok((0..count).map(|_| rng.random_range(0..=last)).collect())
        }
    }
}

pub fn segment(
    signal: &TimeSeriesSignal,
    segment_len: usize,
    count: usize,
    mode: SegmentMode,
    seed: u64,
) -> Result<Vec<Segment>, PreprocessError> {
    let offsets = segment_offsets(signal.len(), segment_len, count, mode, seed)?;
    let samples = signal.samples();
    Ok(offsets
        .into_iter()
        .map(|start| Segment {
            samples: samples[start..start + segment_len].to_vec(),
            parent: signal.source_id().to_string(),
            start_index: start,
        })
        .collect())
}

/// Per-bin FFT magnitudes scaled by 1/L. Values are non-negative; a NaN
/// entry marks a missing slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumVector {
    values: Vec<f64>,
}

impl SpectrumVector {
    pub fn new(values: Vec<f64>) -> Result<Self, PreprocessError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(PreprocessError::NegativeMagnitude { index, value });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Bins 0..=L/2.
    pub fn one_sided(&self) -> &[f64] {
        &self.values[..self.values.len() / 2 + 1]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unscaled DFT magnitudes |X[m]| for m = 0..L-1.
pub fn dft_magnitudes(samples: &[f64]) -> Result<Vec<f64>, PreprocessError> {
    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
        return Err(PreprocessError::NonFiniteInput(i));
    }
    if samples.is_empty() {
        return Err(PreprocessError::ZeroLength);
    }
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(samples.len()));
    fft.process(&mut buf);
    Ok(buf.iter().map(|c| c.norm()).collect())
}

pub fn fft_magnitude(segment: &Segment) -> Result<SpectrumVector, PreprocessError> {
    fft_magnitude_of(&segment.samples)
}

pub fn fft_magnitude_of(samples: &[f64]) -> Result<SpectrumVector, PreprocessError> {
    let scale = samples.len() as f64;
    let values = dft_magnitudes(samples)?.into_iter().map(|m| m / scale).collect();
    Ok(SpectrumVector { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedMagnitude {
    pub value: f64,
    pub sign: Sign,
}

/// Splits `y` into magnitude and sign; zero counts as positive.
pub fn handle_sign(y: f64) -> SignedMagnitude {
    SignedMagnitude {
        value: y.abs(),
        sign: if y >= 0.0 { Sign::Positive } else { Sign::Negative },
    }
}

/// Truncates `y` toward zero at `decimals` places and returns the scaled
/// integer, or `None` for non-finite input or results beyond i128.
///
/// Works on the shortest round-trip decimal form of `y`, so a value typed as
/// 0.29 quantizes to 29 at two places even though its binary value is a hair
/// below 0.29.
pub fn quantize_one(y: f64, decimals: u32) -> Option<i128> {
    if !y.is_finite() {
        return None;
    }
    let SignedMagnitude { value, sign } = handle_sign(y);
    if value == 0.0 {
        return Some(0);
    }
    // "d.ddddde-x": mantissa digits and decimal exponent
    let sci = format!("{value:e}");
    let (mantissa, exp) = sci.split_once('e')?;
    let exp: i64 = exp.parse().ok()?;
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    // value = 0.digits * 10^(exp+1); keep exp+1+decimals leading digits
    let keep = exp + 1 + decimals as i64;
    if keep <= 0 {
        return Some(0);
    }
    let keep = keep as usize;
    let mut int_digits: String = digits.chars().take(keep).collect();
    while int_digits.len() < keep {
        int_digits.push('0');
    }
    let magnitude: i128 = int_digits.parse().ok()?;
    Some(match sign {
        Sign::Positive => magnitude,
        Sign::Negative => -magnitude,
    })
}

pub fn quantize(values: &[f64], decimals: u32) -> Result<Vec<Option<i128>>, PreprocessError> {
    if decimals > MAX_DECIMALS {
        return Err(PreprocessError::TooManyDecimals(decimals));
    }
    Ok(values.iter().map(|&y| quantize_one(y, decimals)).collect())
}

/// Separator-joined quantized magnitudes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSample {
    pub text: String,
    pub decimals: u32,
}

impl EncodedSample {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split(SEPARATOR)
    }

    /// Back to reals: each token divided by 10^D, "NaN" to NaN.
    pub fn decode(&self) -> Result<Vec<f64>, PreprocessError> {
        decode_text(&self.text, self.decimals)
    }
}

impl fmt::Display for EncodedSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

pub fn decode_text(text: &str, decimals: u32) -> Result<Vec<f64>, PreprocessError> {
    let scale = 10f64.powi(decimals as i32);
    text.split(SEPARATOR)
        .enumerate()
        .map(|(index, tok)| {
            if tok == MISSING_TOKEN {
                return Ok(f64::NAN);
            }
            if tok.is_empty() || !tok.bytes().all(|b| b.is_ascii_digit()) {
                return Err(PreprocessError::BadToken {
                    index,
                    token: tok.to_string(),
                });
            }
            tok.parse::<u128>()
                .map(|q| q as f64 / scale)
                .map_err(|_| PreprocessError::BadToken {
                    index,
                    token: tok.to_string(),
                })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeOptions {
    pub decimals: u32,
    /// Encode only bins 0..=L/2.
    #[serde(default)]
    pub one_sided: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            decimals: DEFAULT_DECIMALS,
            one_sided: false,
        }
    }
}

/// Encodes non-negative magnitudes. Missing (non-finite) slots render as "NaN".
pub fn encode_values(values: &[f64], decimals: u32) -> Result<EncodedSample, PreprocessError> {
    let quantized = quantize(values, decimals)?;
    let mut text = String::with_capacity(values.len() * (decimals as usize + 2));
    for (i, q) in quantized.into_iter().enumerate() {
        if i > 0 {
            text.push(SEPARATOR);
        }
        match q {
            // magnitudes are non-negative, so no sign character is written
            Some(v) => {
                use std::fmt::Write;
                write!(text, "{}", v.unsigned_abs()).unwrap();
            }
            None => text.push_str(MISSING_TOKEN),
        }
    }
    Ok(EncodedSample { text, decimals })
}

pub fn encode(spectrum: &SpectrumVector, decimals: u32) -> Result<EncodedSample, PreprocessError> {
    encode_values(spectrum.values(), decimals)
}

pub fn encode_with(spectrum: &SpectrumVector, opts: EncodeOptions) -> Result<EncodedSample, PreprocessError> {
    if opts.one_sided {
        encode_values(spectrum.one_sided(), opts.decimals)
    } else {
        encode_values(spectrum.values(), opts.decimals)
    }
}
