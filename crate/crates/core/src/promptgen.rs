//! Instruction prompts, label vocabulary and JSONL corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{feature_vector, FeatureError, FeatureVector};
use crate::format::format_sig;
use crate::preprocess::{
    encode_with, fft_magnitude, segment, EncodeOptions, EncodedSample, PreprocessError, SegmentMode,
    DEFAULT_SEGMENT_LEN,
};
use crate::signal::{FaultAnnotation, FaultKind, FaultSize, SensorPosition, TimeSeriesSignal};
use crate::synth::derive_seed;

/// Segments drawn per annotation group (normal, or one fault kind at one size).
pub const DEFAULT_SEGMENTS_PER_GROUP: usize = 230;
/// Significant digits of statistical feature values in prompts.
pub const STAT_SIG_DIGITS: usize = 6;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("payload is for the {payload} track but the {track} track was requested")]
    TrackMismatch { track: Track, payload: Track },
    #[error("the ten-class scheme needs a fault size for {0}")]
    MissingSizeForTenScheme(FaultKind),
    #[error("subset {subset} has no signal for {group}")]
    MissingClass { subset: String, group: FaultAnnotation },
    #[error("signals mix operating conditions or sensor positions: {0} and {1}")]
    MixedConditions(String, String),
    #[error("duplicate signal source id {0}")]
    DuplicateSource(String),
    #[error("no records")]
    EmptyInput,
    #[error("unknown label code {0:?}")]
    UnknownLabel(String),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    Fft,
    Stat,
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Track::Fft => "fft",
            Track::Stat => "stat",
        })
    }
}

impl FromStr for Track {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fft" => Ok(Track::Fft),
            "stat" | "st" | "statistical" => Ok(Track::Stat),
            _ => Err(format!("unknown track {s:?} (expected fft or stat)")),
        }
    }
}

/// Four classes (fault sizes merged) or ten classes (one per size).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Four,
    Ten,
}

impl Scheme {
    pub fn num_classes(self) -> usize {
        match self {
            Scheme::Four => 4,
            Scheme::Ten => 10,
        }
    }

    /// Every label of the scheme, ordered by class index.
    pub fn labels(self) -> Vec<Label> {
        match self {
            Scheme::Four => FaultKind::ALL
                .into_iter()
                .map(|kind| Label {
                    scheme: self,
                    kind,
                    size: None,
                })
                .collect(),
            Scheme::Ten => FaultAnnotation::all_groups()
                .into_iter()
                .map(|a| Label {
                    scheme: self,
                    kind: a.kind(),
                    size: a.size(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Four => "four",
            Scheme::Ten => "ten",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "4" | "four" => Ok(Scheme::Four),
            "10" | "ten" => Ok(Scheme::Ten),
            _ => Err(format!("unknown label scheme {s:?} (expected 4 or 10)")),
        }
    }
}

/// A class of either scheme. In the four-class scheme `size` is always `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    scheme: Scheme,
    kind: FaultKind,
    size: Option<FaultSize>,
}

// Vocabulary: (kind, short code, canonical output text).
const VOCAB: [(FaultKind, &str, &str); 4] = [
    (FaultKind::Normal, "NO", "Normal"),
    (FaultKind::InnerRace, "IRF", "Inner Race Fault"),
    (FaultKind::OuterRace, "ORF", "Outer Race Fault"),
    (FaultKind::RollingElement, "REF", "Rolling Element Fault"),
];

fn vocab(kind: FaultKind) -> (&'static str, &'static str) {
    let (_, code, text) = VOCAB.iter().find(|(k, _, _)| *k == kind).expect("all kinds listed");
    (code, text)
}

impl Label {
    pub fn new(scheme: Scheme, kind: FaultKind, size: Option<FaultSize>) -> Result<Self, PromptError> {
        let size = match (scheme, kind, size) {
            (_, FaultKind::Normal, _) | (Scheme::Four, _, _) => None,
            (Scheme::Ten, k, None) => return Err(PromptError::MissingSizeForTenScheme(k)),
            (Scheme::Ten, _, s) => s,
        };
        Ok(Label { scheme, kind, size })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn kind(&self) -> FaultKind {
        self.kind
    }

    pub fn size(&self) -> Option<FaultSize> {
        self.size
    }

    /// Short code such as "NO", "IRF" or "ORF2".
    pub fn code(&self) -> String {
        let (code, _) = vocab(self.kind);
        match self.size {
            Some(s) => format!("{code}{}", s.ordinal()),
            None => code.to_string(),
        }
    }

    /// Text used as the `output` of a prompt record.
    pub fn canonical(&self) -> String {
        let (_, text) = vocab(self.kind);
        match self.size {
            Some(s) => format!("{text} ({s} inch)"),
            None => text.to_string(),
        }
    }

    /// Position of the label in `Scheme::labels`.
    pub fn index(&self) -> usize {
        let k = match self.kind {
            FaultKind::Normal => return 0,
            FaultKind::InnerRace => 0,
            FaultKind::OuterRace => 1,
            FaultKind::RollingElement => 2,
        };
        match (self.scheme, self.size) {
            (Scheme::Ten, Some(s)) => 1 + 3 * k + (s.ordinal() as usize - 1),
            _ => 1 + k,
        }
    }

    pub fn from_code(code: &str, scheme: Scheme) -> Result<Self, PromptError> {
        let unknown = || PromptError::UnknownLabel(code.to_string());
        let upper = code.trim().to_ascii_uppercase();
        let (head, digit) = match upper.char_indices().last() {
            Some((i, c)) if c.is_ascii_digit() => (&upper[..i], Some(c as u8 - b'0')),
            _ => (upper.as_str(), None),
        };
        let head = if head == "IFR" { "IRF" } else { head };
        let (kind, _, _) = VOCAB.iter().find(|(_, c, _)| *c == head).ok_or_else(unknown)?;
        let size = match digit {
            Some(d) => Some(FaultSize::from_ordinal(d).ok_or_else(unknown)?),
            None => None,
        };
        if *kind == FaultKind::Normal && size.is_some() {
            return Err(unknown());
        }
        Label::new(scheme, *kind, size)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

pub fn label_for(fault: FaultAnnotation, scheme: Scheme) -> Result<Label, PromptError> {
    Label::new(scheme, fault.kind(), fault.size())
}

/// Machine description substituted into the instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquipInfo {
    pub name: String,
    pub model: String,
    #[serde(default)]
    pub geometry: BTreeMap<String, String>,
}

impl EquipInfo {
    /// CWRU test-rig bearing at the given end (6205-2RS drive end, 6203-2RS fan end).
    pub fn cwru(position: SensorPosition) -> Self {
        let (name, model, geo): (&str, &str, [(&str, &str); 6]) = match position {
            SensorPosition::DriveEnd => (
                "2 hp induction motor test rig, drive-end deep groove ball bearing",
                "SKF 6205-2RS JEM",
                [
                    ("inside diameter", "0.9843 in"),
                    ("outside diameter", "2.0472 in"),
                    ("thickness", "0.5906 in"),
                    ("ball diameter", "0.3126 in"),
                    ("pitch diameter", "1.537 in"),
                    ("number of balls", "9"),
                ],
            ),
            SensorPosition::FanEnd => (
                "2 hp induction motor test rig, fan-end deep groove ball bearing",
                "SKF 6203-2RS JEM",
                [
                    ("inside diameter", "0.6693 in"),
                    ("outside diameter", "1.5748 in"),
                    ("thickness", "0.4724 in"),
                    ("ball diameter", "0.2656 in"),
                    ("pitch diameter", "1.122 in"),
                    ("number of balls", "8"),
                ],
            ),
        };
        EquipInfo {
            name: name.to_string(),
            model: model.to_string(),
            geometry: geo.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// "<name>, model <model>, <key>: <value>, ..." with keys in sorted order.
    pub fn render(&self) -> String {
        let mut s = format!("{}, model {}", self.name, self.model);
        for (k, v) in &self.geometry {
            s.push_str(", ");
            s.push_str(k);
            s.push_str(": ");
            s.push_str(v);
        }
        s
    }
}

fn task_query(track: Track) -> &'static str {
    match track {
        Track::Fft => "please predict the operating status of the bearing based on the following FFT vector.",
        Track::Stat => "please predict the operating status of the bearing based on the following time-domain and frequency-domain features.",
    }
}

/// Instruction text for one record. Without `equip` the machine-information
/// clause is dropped.
pub fn make_instruction(equip: Option<&EquipInfo>, load_hp: u8, speed_rpm: u32, track: Track) -> String {
    match equip {
        Some(e) => format!(
            "Given machine information: {}; and working conditions: {load_hp} hp, {speed_rpm} rpm, {}",
            e.render(),
            task_query(track)
        ),
        None => format!(
            "Given working conditions: {load_hp} hp, {speed_rpm} rpm, {}",
            task_query(track)
        ),
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Payload<'a> {
    Fft(&'a EncodedSample),
    Stat(&'a FeatureVector),
}

impl Payload<'_> {
    pub fn track(&self) -> Track {
        match self {
            Payload::Fft(_) => Track::Fft,
            Payload::Stat(_) => Track::Stat,
        }
    }
}

/// "name: value" pairs joined by "; ", values at 6 significant digits.
pub fn render_features(f: &FeatureVector) -> String {
    f.named()
        .map(|(name, v)| format!("{name}: {}", format_sig(v, STAT_SIG_DIGITS)))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Inverse of [`render_features`], up to the printed precision.
pub fn parse_features(text: &str) -> Option<[f64; 15]> {
    let mut out = [0.0; 15];
    let mut n = 0;
    for (i, part) in text.split("; ").enumerate() {
        let (name, value) = part.split_once(": ")?;
        if i >= 15 || name != crate::features::FEATURE_NAMES[i] {
            return None;
        }
        out[i] = value.parse().ok()?;
        n += 1;
    }
    (n == 15).then_some(out)
}

pub fn make_input(track: Track, payload: Payload<'_>) -> Result<String, PromptError> {
    if payload.track() != track {
        return Err(PromptError::TrackMismatch {
            track,
            payload: payload.track(),
        });
    }
    Ok(match payload {
        Payload::Fft(e) => e.text.clone(),
        Payload::Stat(f) => render_features(f),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub id: String,
    pub label: String,
    pub scheme: Scheme,
    pub subset_id: String,
    pub source_id: String,
    pub track: Track,
    pub segment_start: usize,
}

/// One instruction-tuning example. Trainers may ignore `meta`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub meta: RecordMeta,
}

impl PromptRecord {
    pub fn label(&self) -> Result<Label, PromptError> {
        Label::from_code(&self.meta.label, self.meta.scheme)
    }

    pub fn id(&self) -> &str {
        &self.meta.id
    }

    /// The single prompt sent to a chat model: instruction, newline, input.
    pub fn prompt(&self) -> String {
        format!("{}\n{}", self.instruction, self.input)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquipChoice {
    /// The CWRU bearing for the subset's sensor position.
    #[default]
    Auto,
    Fixed(EquipInfo),
    /// Drop the machine-information clause.
    Omitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub track: Track,
    pub scheme: Scheme,
    pub segments_per_group: usize,
    pub segment_len: usize,
    pub encode: EncodeOptions,
    pub mode: SegmentMode,
    pub seed: u64,
    pub equip: EquipChoice,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            track: Track::Fft,
            scheme: Scheme::Four,
            segments_per_group: DEFAULT_SEGMENTS_PER_GROUP,
            segment_len: DEFAULT_SEGMENT_LEN,
            encode: EncodeOptions::default(),
            mode: SegmentMode::RandomStart,
            seed: 0,
            equip: EquipChoice::Auto,
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Builds the records of one subset (one load and sensor position). Every
/// annotation group contributes `segments_per_group` records, split evenly
/// over the group's signals; records come out grouped by class in
/// `FaultAnnotation::all_groups` order.
pub fn build_subset(signals: &[TimeSeriesSignal], cfg: &BuildConfig) -> Result<Vec<PromptRecord>, PromptError> {
    let first = signals.first().ok_or(PromptError::EmptyInput)?;
    let subset = first.subset_id();
    let mut seen = BTreeSet::new();
    for s in signals {
        if s.subset_id() != subset || s.speed_rpm() != first.speed_rpm() {
            return Err(PromptError::MixedConditions(
                format!("{} {} rpm", subset, first.speed_rpm()),
                format!("{} {} rpm", s.subset_id(), s.speed_rpm()),
            ));
        }
        if !seen.insert(s.source_id()) {
            return Err(PromptError::DuplicateSource(s.source_id().to_string()));
        }
    }

    let equip = match &cfg.equip {
        EquipChoice::Auto => Some(EquipInfo::cwru(first.sensor_position())),
        EquipChoice::Fixed(e) => Some(e.clone()),
        EquipChoice::Omitted => None,
    };
    let instruction = make_instruction(equip.as_ref(), first.load_hp(), first.speed_rpm(), cfg.track);

    let mut jobs: Vec<(&TimeSeriesSignal, usize)> = Vec::new();
    for group in FaultAnnotation::all_groups() {
        let members: Vec<&TimeSeriesSignal> = signals.iter().filter(|s| s.fault() == group).collect();
        if members.is_empty() {
            return Err(PromptError::MissingClass {
                subset: subset.clone(),
                group,
            });
        }
        let base = cfg.segments_per_group / members.len();
        let extra = cfg.segments_per_group % members.len();
        for (i, s) in members.into_iter().enumerate() {
            let count = base + usize::from(i < extra);
            if count > 0 {
                jobs.push((s, count));
            }
        }
    }

    let per_signal: Vec<Vec<PromptRecord>> = jobs
        .par_iter()
        .map(|&(signal, count)| records_for_signal(signal, count, cfg, &instruction, &subset))
        .collect::<Result<_, _>>()?;
    Ok(per_signal.into_iter().flatten().collect())
}

fn records_for_signal(
    signal: &TimeSeriesSignal,
    count: usize,
    cfg: &BuildConfig,
    instruction: &str,
    subset: &str,
) -> Result<Vec<PromptRecord>, PromptError> {
    let label = label_for(signal.fault(), cfg.scheme)?;
    let seed = derive_seed(cfg.seed, &[fnv1a(signal.source_id())]);
    let segments = segment(signal, cfg.segment_len, count, cfg.mode, seed)?;
    segments
        .iter()
        .enumerate()
        .map(|(k, seg)| {
            let input = match cfg.track {
                Track::Fft => {
                    let encoded = encode_with(&fft_magnitude(seg)?, cfg.encode)?;
                    make_input(Track::Fft, Payload::Fft(&encoded))?
                }
                Track::Stat => {
                    let fv = feature_vector(seg, signal.sampling_rate_hz())?;
                    make_input(Track::Stat, Payload::Stat(&fv))?
                }
            };
            Ok(PromptRecord {
                instruction: instruction.to_string(),
                input,
                output: label.canonical(),
                meta: RecordMeta {
                    id: format!("{subset}/{}/{k:04}", signal.source_id()),
                    label: label.code(),
                    scheme: cfg.scheme,
                    subset_id: subset.to_string(),
                    source_id: signal.source_id().to_string(),
                    track: cfg.track,
                    segment_start: seg.start_index,
                },
            })
        })
        .collect()
}

pub fn write_jsonl_to<W: Write>(records: &[PromptRecord], out: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_jsonl(records: &[PromptRecord], path: &Path) -> Result<(), PromptError> {
    if records.is_empty() {
        return Err(PromptError::EmptyInput);
    }
    let io = |source| PromptError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    write_jsonl_to(records, file).map_err(io)
}

pub fn read_jsonl_from<R: BufRead>(input: R) -> Result<Vec<PromptRecord>, PromptError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| PromptError::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PromptRecord = serde_json::from_str(&line).map_err(|e| PromptError::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<PromptRecord>, PromptError> {
    let file = File::open(path).map_err(|source| PromptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_jsonl_from(BufReader::new(file))
}
