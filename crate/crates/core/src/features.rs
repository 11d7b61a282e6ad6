//! Time- and frequency-domain statistics of a segment.
//!
//! All moments are population moments (divide by the number of values).
//! Degenerate segments follow fixed conventions so that no NaN reaches a
//! prompt: skewness and kurtosis are 0 when the standard deviation is 0, and
//! crest, shape and impulse factors are 0 when the mean absolute value is 0.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::format_sig;
use crate::preprocess::{dft_magnitudes, PreprocessError, Segment};

pub const TIME_FEATURE_NAMES: [&str; 10] = [
    "mean",
    "rms",
    "std",
    "crest_factor",
    "skewness",
    "shape_factor",
    "kurtosis",
    "peak_to_peak",
    "energy_factor",
    "impulse_factor",
];

pub const FREQ_FEATURE_NAMES: [&str; 5] = [
    "peak_frequency",
    "p2p_frequency",
    "spectral_kurtosis",
    "spectral_bandwidth",
    "spectral_skewness",
];

/// Canonical column order of a feature table.
pub const FEATURE_NAMES: [&str; 15] = [
    "mean",
    "rms",
    "std",
    "crest_factor",
    "skewness",
    "shape_factor",
    "kurtosis",
    "peak_to_peak",
    "energy_factor",
    "impulse_factor",
    "peak_frequency",
    "p2p_frequency",
    "spectral_kurtosis",
    "spectral_bandwidth",
    "spectral_skewness",
];

/// Significant digits used by the CSV export.
pub const CSV_SIG_DIGITS: usize = 12;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("segment has {0} samples, at least 2 are required")]
    SegmentTooShort(usize),
    #[error("feature table needs at least one segment")]
    EmptyInput,
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeFeatures {
    pub mean: f64,
    pub rms: f64,
    pub std: f64,
    pub crest_factor: f64,
    pub skewness: f64,
    pub shape_factor: f64,
    pub kurtosis: f64,
    pub peak_to_peak: f64,
    pub energy_factor: f64,
    pub impulse_factor: f64,
}

impl TimeFeatures {
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.mean,
            self.rms,
            self.std,
            self.crest_factor,
            self.skewness,
            self.shape_factor,
            self.kurtosis,
            self.peak_to_peak,
            self.energy_factor,
            self.impulse_factor,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FreqFeatures {
    /// Hz.
    pub peak_frequency: f64,
    /// Range of the one-sided magnitudes, max|X| - min|X|.
    pub p2p_frequency: f64,
    pub spectral_kurtosis: f64,
    /// Hz.
    pub spectral_bandwidth: f64,
    pub spectral_skewness: f64,
    /// Bin index behind `peak_frequency`.
    #[serde(default)]
    pub peak_bin: usize,
}

impl FreqFeatures {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.peak_frequency,
            self.p2p_frequency,
            self.spectral_kurtosis,
            self.spectral_bandwidth,
            self.spectral_skewness,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub time: TimeFeatures,
    pub freq: FreqFeatures,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; 15] {
        let mut out = [0.0; 15];
        out[..10].copy_from_slice(&self.time.to_array());
        out[10..].copy_from_slice(&self.freq.to_array());
        out
    }

    /// Rebuilds a vector from values in canonical column order. The peak bin
    /// is not recoverable and is left at 0.
    pub fn from_array(v: [f64; 15]) -> Self {
        FeatureVector {
            time: TimeFeatures {
                mean: v[0],
                rms: v[1],
                std: v[2],
                crest_factor: v[3],
                skewness: v[4],
                shape_factor: v[5],
                kurtosis: v[6],
                peak_to_peak: v[7],
                energy_factor: v[8],
                impulse_factor: v[9],
            },
            freq: FreqFeatures {
                peak_frequency: v[10],
                p2p_frequency: v[11],
                spectral_kurtosis: v[12],
                spectral_bandwidth: v[13],
                spectral_skewness: v[14],
                peak_bin: 0,
            },
        }
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> {
        FEATURE_NAMES.into_iter().zip(self.to_array())
    }
}

/// Standardized third and fourth moments, 0 when sigma is 0.
fn shape_moments(values: &[f64], mean: f64, sigma: f64) -> (f64, f64) {
    if sigma == 0.0 {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let (m3, m4) = values.iter().fold((0.0, 0.0), |(a, b), &v| {
        let d = v - mean;
        let d2 = d * d;
        (a + d2 * d, b + d2 * d2)
    });
    (m3 / n / sigma.powi(3), m4 / n / sigma.powi(4))
}

pub fn time_features_of(x: &[f64]) -> Result<TimeFeatures, FeatureError> {
    if x.len() < 2 {
        return Err(FeatureError::SegmentTooShort(x.len()));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(PreprocessError::NonFiniteInput(i).into());
    }
    let n = x.len() as f64;
    let sum: f64 = x.iter().sum();
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    let sum_abs: f64 = x.iter().map(|v| v.abs()).sum();
    let max_abs = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);

    let mean = sum / n;
    let rms = (sum_sq / n).sqrt();
    let std = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let (skewness, kurtosis) = shape_moments(x, mean, std);
    let mean_abs = sum_abs / n;
    let (crest_factor, shape_factor, impulse_factor) = if mean_abs == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        (max_abs / rms, rms / mean_abs, max_abs / mean_abs)
    };
    let energy_factor = if sum_abs == 0.0 {
        0.0
    } else {
        sum_sq / (sum_abs * sum_abs)
    };

    Ok(TimeFeatures {
        mean,
        rms,
        std,
        crest_factor,
        skewness,
        shape_factor,
        kurtosis,
        peak_to_peak: max - min,
        energy_factor,
        impulse_factor,
    })
}

pub fn time_features(segment: &Segment) -> Result<TimeFeatures, FeatureError> {
    time_features_of(&segment.samples)
}

/// Frequency-domain statistics over the one-sided magnitudes |X(m)|,
/// m = 0..=L/2, of the unscaled transform.
pub fn freq_features_of(x: &[f64], sampling_rate_hz: f64) -> Result<FreqFeatures, FeatureError> {
    if x.len() < 2 {
        return Err(FeatureError::SegmentTooShort(x.len()));
    }
    let full = dft_magnitudes(x)?;
    let mags = &full[..x.len() / 2 + 1];
    let bin_hz = sampling_rate_hz / x.len() as f64;
    let count = mags.len() as f64;

    let mut peak_bin = 0;
    for (m, &v) in mags.iter().enumerate() {
        if v > mags[peak_bin] {
            peak_bin = m;
        }
    }
    let max = mags[peak_bin];
    let min = mags.iter().copied().fold(f64::INFINITY, f64::min);

    let mean = mags.iter().sum::<f64>() / count;
    let sigma = (mags.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count).sqrt();
    let (spectral_skewness, spectral_kurtosis) = shape_moments(mags, mean, sigma);

    let total: f64 = mags.iter().sum();
    let spectral_bandwidth = if total == 0.0 {
        0.0
    } else {
        let centroid = mags.iter().enumerate().map(|(m, v)| m as f64 * v).sum::<f64>() / total;
        let spread = mags
            .iter()
            .enumerate()
            .map(|(m, v)| (m as f64 - centroid).powi(2) * v)
            .sum::<f64>()
            / total;
        spread.sqrt() * bin_hz
    };

    Ok(FreqFeatures {
        peak_frequency: peak_bin as f64 * bin_hz,
        p2p_frequency: max - min,
        spectral_kurtosis,
        spectral_bandwidth,
        spectral_skewness,
        peak_bin,
    })
}

pub fn freq_features(segment: &Segment, sampling_rate_hz: f64) -> Result<FreqFeatures, FeatureError> {
    freq_features_of(&segment.samples, sampling_rate_hz)
}

pub fn feature_vector(segment: &Segment, sampling_rate_hz: f64) -> Result<FeatureVector, FeatureError> {
    feature_vector_of(&segment.samples, sampling_rate_hz)
}

pub fn feature_vector_of(x: &[f64], sampling_rate_hz: f64) -> Result<FeatureVector, FeatureError> {
    Ok(FeatureVector {
        time: time_features_of(x)?,
        freq: freq_features_of(x, sampling_rate_hz)?,
    })
}

/// Feature rows under the fixed 15-column header.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn header() -> [&'static str; 15] {
        FEATURE_NAMES
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes the table as CSV, values at 12 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(FEATURE_NAMES)
            .map_err(|e| FeatureError::Csv(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row.to_array().iter().map(|v| format_sig(*v, CSV_SIG_DIGITS)))
                .map_err(|e| FeatureError::Csv(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, FeatureError> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(|e| FeatureError::Csv(e.to_string()))?.clone();
        if header.iter().ne(FEATURE_NAMES) {
            return Err(FeatureError::Csv(format!("unexpected header {header:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| FeatureError::Csv(e.to_string()))?;
            let mut v = [0.0; 15];
            for (slot, field) in v.iter_mut().zip(rec.iter()) {
                *slot = field
                    .parse()
                    .map_err(|_| FeatureError::Csv(format!("row {}: bad value {field:?}", i + 1)))?;
            }
            rows.push(FeatureVector::from_array(v));
        }
        Ok(FeatureTable { rows })
    }
}

pub fn feature_table(segments: &[Segment], sampling_rate_hz: f64) -> Result<FeatureTable, FeatureError> {
    if segments.is_empty() {
        return Err(FeatureError::EmptyInput);
    }
    let rows = segments
        .iter()
        .map(|s| feature_vector(s, sampling_rate_hz))
        .collect::<Result<_, _>>()?;
    Ok(FeatureTable { rows })
}
