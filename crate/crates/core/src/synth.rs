//! Labeled synthetic bearing signals for desk-scale testing.
//!
//! A healthy bearing is a shaft-rate sinusoid plus white Gaussian noise. A
//! defect adds a train of exponentially decaying bursts that ring at a
//! resonance; the burst rate is a fixed multiple of the shaft frequency and
//! the resonance depends on the fault kind, and the burst amplitude grows
//! with defect size. The fan-end sensor sits further from the defect: it
//! sees weaker bursts at lower resonances plus an extra shaft harmonic, so
//! moving the sensor changes the spectrum the way a different machine
//! component would.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::DEFAULT_SEGMENT_LEN;
use crate::signal::{
    FaultAnnotation, FaultKind, OperatingCondition, SensorPosition, SignalError, TimeSeriesSignal,
    DEFAULT_SAMPLING_RATE_HZ,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Shape parameters of the generator. These are configuration, not physics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultModel {
    pub shaft_amplitude: f64,
    /// Burst repetition rate as a multiple of shaft frequency.
    pub outer_multiplier: f64,
    pub inner_multiplier: f64,
    pub rolling_multiplier: f64,
    /// Cage rate as a multiple of shaft frequency, modulating rolling-element bursts.
    pub cage_multiplier: f64,
    /// Burst amplitude for a 0.007 inch defect; scales linearly with size.
    pub burst_amplitude: f64,
    pub burst_decay_s: f64,
    /// Drive-end resonance excited by inner-race, outer-race and
    /// rolling-element defects, in that order.
    pub resonance_drive_end_hz: [f64; 3],
    /// Fan-end resonances as a multiple of the drive-end ones.
    pub fan_end_resonance_scale: f64,
    /// Burst amplitude reaching the fan-end sensor, relative to the drive end.
    pub fan_end_attenuation: f64,
    /// Amplitude of the third shaft harmonic picked up at the fan end.
    pub fan_end_harmonic: f64,
}

impl Default for FaultModel {
    fn default() -> Self {
        Self {
            shaft_amplitude: 0.2,
            outer_multiplier: 3.58,
            inner_multiplier: 5.41,
            rolling_multiplier: 4.71,
            cage_multiplier: 0.4,
            burst_amplitude: 3.0,
            burst_decay_s: 1.2e-3,
            resonance_drive_end_hz: [2000.0, 3200.0, 4400.0],
            fan_end_resonance_scale: 0.45,
            fan_end_attenuation: 0.35,
            fan_end_harmonic: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub fault: FaultAnnotation,
    pub sensor_position: SensorPosition,
    pub load_hp: u8,
    pub speed_rpm: u32,
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub model: FaultModel,
}

impl SynthSpec {
    /// A 10 s drive-end recording at 12 kHz under the given CWRU condition.
    pub fn new(fault: FaultAnnotation, condition: OperatingCondition, seed: u64) -> Self {
        Self {
            fault,
            sensor_position: SensorPosition::DriveEnd,
            load_hp: condition.load_hp,
            speed_rpm: condition.speed_rpm,
            duration_s: 10.0,
            sampling_rate_hz: DEFAULT_SAMPLING_RATE_HZ,
            noise_sigma: 0.1,
            seed,
            model: FaultModel::default(),
        }
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sampling_rate_hz).round() as usize
    }

    pub fn validate(&self, segment_len: usize) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return bad("sampling rate must be positive");
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad("duration must be positive");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise sigma must be non-negative");
        }
        if !(1..=100_000).contains(&self.speed_rpm) {
            return bad("speed must be in [1, 100000] rpm");
        }
        if self.num_samples() < 2 * segment_len {
            return Err(SynthError::InvalidSpec(format!(
                "{} samples is fewer than twice the segment length {segment_len}",
                self.num_samples()
            )));
        }
        Ok(())
    }
}

fn source_id(spec: &SynthSpec) -> String {
    format!(
        "synth-{}HP{}-{}-{}",
        spec.load_hp,
        spec.sensor_position.tag(),
        spec.fault,
        spec.seed
    )
}

/// Generates the recording described by `spec`; identical specs give
/// identical samples.
pub fn generate(spec: &SynthSpec) -> Result<TimeSeriesSignal, SynthError> {
    spec.validate(DEFAULT_SEGMENT_LEN)?;
    let m = &spec.model;
    let n = spec.num_samples();
    let fs = spec.sampling_rate_hz;
    let shaft_hz = spec.speed_rpm as f64 / 60.0;

    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let mut v = m.shaft_amplitude * (2.0 * PI * shaft_hz * t).sin();
            if spec.sensor_position == SensorPosition::FanEnd {
                v += m.fan_end_harmonic * (2.0 * PI * 3.0 * shaft_hz * t).sin();
            }
            v
        })
        .collect();

    if let Some(size) = spec.fault.size() {
        let rate_mult = match spec.fault.kind() {
            FaultKind::OuterRace => m.outer_multiplier,
            FaultKind::InnerRace => m.inner_multiplier,
            FaultKind::RollingElement => m.rolling_multiplier,
            FaultKind::Normal => unreachable!("normal annotations carry no size"),
        };
        let burst_hz = rate_mult * shaft_hz;
        let base = match spec.fault.kind() {
            FaultKind::InnerRace => m.resonance_drive_end_hz[0],
            FaultKind::OuterRace => m.resonance_drive_end_hz[1],
            _ => m.resonance_drive_end_hz[2],
        };
        let (resonance, path_gain) = match spec.sensor_position {
            SensorPosition::DriveEnd => (base, 1.0),
            SensorPosition::FanEnd => (base * m.fan_end_resonance_scale, m.fan_end_attenuation),
        };
        let amp = path_gain * m.burst_amplitude * size.inches() / 0.007;
        let tail = (6.0 * m.burst_decay_s * fs).ceil() as usize;
        let period = fs / burst_hz;
        let mut k = 0usize;
        loop {
            let t0 = k as f64 * period / fs;
            let start = (k as f64 * period).ceil() as usize;
            if start >= n {
                break;
            }
            let modulation = match spec.fault.kind() {
                FaultKind::InnerRace => 0.8 + 0.2 * (2.0 * PI * shaft_hz * t0).cos(),
                FaultKind::RollingElement => 0.8 + 0.2 * (2.0 * PI * m.cage_multiplier * shaft_hz * t0).cos(),
                _ => 1.0,
            };
            for (i, v) in x.iter_mut().enumerate().skip(start).take(tail) {
                let dt = i as f64 / fs - t0;
                *v += amp * modulation * (-dt / m.burst_decay_s).exp() * (2.0 * PI * resonance * dt).sin();
            }
            k += 1;
        }
    }

    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        for v in x.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }

    Ok(TimeSeriesSignal::new(
        x,
        fs,
        spec.sensor_position,
        OperatingCondition {
            load_hp: spec.load_hp,
            speed_rpm: spec.speed_rpm,
        },
        spec.fault,
        source_id(spec),
    )?)
}

/// One recording per annotation group (normal plus every kind/size pair) for a
/// single condition and sensor position. Seeds are derived from `seed`.
pub fn generate_subset(
    condition: OperatingCondition,
    position: SensorPosition,
    noise_sigma: f64,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<TimeSeriesSignal>, SynthError> {
    FaultAnnotation::all_groups()
        .into_iter()
        .enumerate()
        .map(|(i, fault)| {
            let mut spec = SynthSpec::new(
                fault,
                condition,
                derive_seed(seed, &[condition.load_hp as u64, position as u64, i as u64]),
            );
            spec.sensor_position = position;
            spec.noise_sigma = noise_sigma;
            spec.duration_s = duration_s;
            generate(&spec)
        })
        .collect()
}

/// Mixes `parts` into `seed` (splitmix64 steps) for independent sub-streams.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
