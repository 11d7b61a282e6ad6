//! Domain types for raw vibration recordings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default sampling rate of the recordings handled by this crate (12 kHz).
pub const DEFAULT_SAMPLING_RATE_HZ: f64 = 12_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("signal has no samples")]
    Empty,
    #[error("sample {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("sampling rate must be positive, got {0}")]
    BadSamplingRate(f64),
    #[error("speed {0} rpm outside [1, 100000]")]
    BadSpeed(u32),
    #[error("fault size {0} inch is not one of 0.007, 0.014, 0.021")]
    BadFaultSize(f64),
    #[error("normal condition cannot carry a fault size")]
    NormalWithSize,
    #[error("fault kind {0} requires a fault size")]
    MissingSize(FaultKind),
    #[error("unknown {what}: {value:?}")]
    Unknown { what: &'static str, value: String },
}

/// Accelerometer mounting position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SensorPosition {
    DriveEnd,
    FanEnd,
}

impl SensorPosition {
    /// Two-letter tag used in subset ids ("DE"/"FE").
    pub fn tag(self) -> &'static str {
        match self {
            SensorPosition::DriveEnd => "DE",
            SensorPosition::FanEnd => "FE",
        }
    }

    /// Substring identifying this channel in CWRU variable names.
    pub fn channel_pattern(self) -> &'static str {
        match self {
            SensorPosition::DriveEnd => "DE_time",
            SensorPosition::FanEnd => "FE_time",
        }
    }

    pub const ALL: [SensorPosition; 2] = [SensorPosition::DriveEnd, SensorPosition::FanEnd];
}

impl fmt::Display for SensorPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SensorPosition {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "de" | "drive" | "drive_end" | "driveend" | "drive-end" => Ok(SensorPosition::DriveEnd),
            "fe" | "fan" | "fan_end" | "fanend" | "fan-end" => Ok(SensorPosition::FanEnd),
            _ => Err(SignalError::Unknown {
                what: "sensor position",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultKind {
    Normal,
    InnerRace,
    OuterRace,
    RollingElement,
}

impl FaultKind {
    pub const ALL: [FaultKind; 4] = [
        FaultKind::Normal,
        FaultKind::InnerRace,
        FaultKind::OuterRace,
        FaultKind::RollingElement,
    ];
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FaultKind::Normal => "normal",
            FaultKind::InnerRace => "inner",
            FaultKind::OuterRace => "outer",
            FaultKind::RollingElement => "rolling",
        };
        f.write_str(s)
    }
}

impl FromStr for FaultKind {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "normal" | "no" | "healthy" => Ok(FaultKind::Normal),
            "inner" | "inner_race" | "innerrace" | "irf" | "ir" => Ok(FaultKind::InnerRace),
            "outer" | "outer_race" | "outerrace" | "orf" | "or" => Ok(FaultKind::OuterRace),
            "rolling" | "rolling_element" | "ball" | "ref" | "b" => Ok(FaultKind::RollingElement),
            _ => Err(SignalError::Unknown {
                what: "fault kind",
                value: s.to_string(),
            }),
        }
    }
}

/// The three seeded defect diameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultSize {
    #[serde(rename = "0.007")]
    Mils7,
    #[serde(rename = "0.014")]
    Mils14,
    #[serde(rename = "0.021")]
    Mils21,
}

impl FaultSize {
    pub const ALL: [FaultSize; 3] = [FaultSize::Mils7, FaultSize::Mils14, FaultSize::Mils21];

    pub fn inches(self) -> f64 {
        match self {
            FaultSize::Mils7 => 0.007,
            FaultSize::Mils14 => 0.014,
            FaultSize::Mils21 => 0.021,
        }
    }

    /// 1, 2 or 3: the suffix used by the ten-class label codes.
    pub fn ordinal(self) -> u8 {
        match self {
            FaultSize::Mils7 => 1,
            FaultSize::Mils14 => 2,
            FaultSize::Mils21 => 3,
        }
    }

    pub fn from_ordinal(n: u8) -> Option<Self> {
        match n {
            1 => Some(FaultSize::Mils7),
            2 => Some(FaultSize::Mils14),
            3 => Some(FaultSize::Mils21),
            _ => None,
        }
    }

    pub fn from_inches(inches: f64) -> Result<Self, SignalError> {
        FaultSize::ALL
            .into_iter()
            .find(|s| (s.inches() - inches).abs() < 1e-9)
            .ok_or(SignalError::BadFaultSize(inches))
    }
}

impl fmt::Display for FaultSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.inches())
    }
}

/// Health state of the bearing a recording was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawAnnotation", into = "RawAnnotation")]
pub struct FaultAnnotation {
    kind: FaultKind,
    size: Option<FaultSize>,
}

impl FaultAnnotation {
    pub fn new(kind: FaultKind, size: Option<FaultSize>) -> Result<Self, SignalError> {
        match (kind, size) {
            (FaultKind::Normal, Some(_)) => Err(SignalError::NormalWithSize),
            (FaultKind::Normal, None) => Ok(Self { kind, size }),
            (k, None) => Err(SignalError::MissingSize(k)),
            (_, Some(_)) => Ok(Self { kind, size }),
        }
    }

    pub fn normal() -> Self {
        Self {
            kind: FaultKind::Normal,
            size: None,
        }
    }

    pub fn fault(kind: FaultKind, size: FaultSize) -> Result<Self, SignalError> {
        Self::new(kind, Some(size))
    }

    pub fn kind(&self) -> FaultKind {
        self.kind
    }

    pub fn size(&self) -> Option<FaultSize> {
        self.size
    }

    /// All ten annotation groups in canonical order: normal, then every
    /// (kind, size) pair with sizes ascending.
    pub fn all_groups() -> Vec<FaultAnnotation> {
        let mut out = vec![FaultAnnotation::normal()];
        for kind in [FaultKind::InnerRace, FaultKind::OuterRace, FaultKind::RollingElement] {
            for size in FaultSize::ALL {
                out.push(FaultAnnotation { kind, size: Some(size) });
            }
        }
        out
    }
}

impl fmt::Display for FaultAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.size {
            Some(s) => write!(f, "{}@{}", self.kind, s),
            None => write!(f, "{}", self.kind),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawAnnotation {
    kind: FaultKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    size_inches: Option<f64>,
}

impl TryFrom<RawAnnotation> for FaultAnnotation {
    type Error = SignalError;

    fn try_from(raw: RawAnnotation) -> Result<Self, Self::Error> {
        let size = raw.size_inches.map(FaultSize::from_inches).transpose()?;
        FaultAnnotation::new(raw.kind, size)
    }
}

impl From<FaultAnnotation> for RawAnnotation {
    fn from(a: FaultAnnotation) -> Self {
        RawAnnotation {
            kind: a.kind,
            size_inches: a.size.map(FaultSize::inches),
        }
    }
}

/// Motor load and shaft speed of a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OperatingCondition {
    pub load_hp: u8,
    pub speed_rpm: u32,
}

impl OperatingCondition {
    /// The four load/speed pairs of the CWRU 12 kHz recordings.
    pub const CWRU: [OperatingCondition; 4] = [
        OperatingCondition {
            load_hp: 0,
            speed_rpm: 1797,
        },
        OperatingCondition {
            load_hp: 1,
            speed_rpm: 1772,
        },
        OperatingCondition {
            load_hp: 2,
            speed_rpm: 1750,
        },
        OperatingCondition {
            load_hp: 3,
            speed_rpm: 1730,
        },
    ];

    pub fn cwru(load_hp: u8) -> Option<OperatingCondition> {
        Self::CWRU.into_iter().find(|c| c.load_hp == load_hp)
    }
}

/// A validated vibration record with its acquisition metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesSignal {
    samples: Vec<f64>,
    sampling_rate_hz: f64,
    sensor_position: SensorPosition,
    condition: OperatingCondition,
    fault: FaultAnnotation,
    source_id: String,
}

impl TimeSeriesSignal {
    pub fn new(
        samples: Vec<f64>,
        sampling_rate_hz: f64,
        sensor_position: SensorPosition,
        condition: OperatingCondition,
        fault: FaultAnnotation,
        source_id: impl Into<String>,
    ) -> Result<Self, SignalError> {
        if samples.is_empty() {
            return Err(SignalError::Empty);
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SignalError::NonFinite { index, value });
        }
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(SignalError::BadSamplingRate(sampling_rate_hz));
        }
        if !(1..=100_000).contains(&condition.speed_rpm) {
            return Err(SignalError::BadSpeed(condition.speed_rpm));
        }
        Ok(Self {
            samples,
            sampling_rate_hz,
            sensor_position,
            condition,
            fault,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn sensor_position(&self) -> SensorPosition {
        self.sensor_position
    }

    pub fn condition(&self) -> OperatingCondition {
        self.condition
    }

    pub fn load_hp(&self) -> u8 {
        self.condition.load_hp
    }

    pub fn speed_rpm(&self) -> u32 {
        self.condition.speed_rpm
    }

    pub fn fault(&self) -> FaultAnnotation {
        self.fault
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    /// Subset id of the condition this signal belongs to, e.g. "0HPDE".
    pub fn subset_id(&self) -> String {
        subset_id(self.condition.load_hp, self.sensor_position)
    }
}

pub fn subset_id(load_hp: u8, position: SensorPosition) -> String {
    format!("{}HP{}", load_hp, position.tag())
}
