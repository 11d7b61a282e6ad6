//! Train/eval protocols over subsets, realized as stratified holdouts and
//! persisted as id manifests.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::promptgen::{PromptRecord, Track};
use crate::signal::{subset_id, SensorPosition};
use crate::synth::derive_seed;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.9;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("missing subset {0}")]
    MissingSubset(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {message}")]
    BadManifest { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSelection {
    pub subsets: Vec<String>,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSelection {
    pub name: String,
    pub subsets: Vec<String>,
    /// Share of each class drawn for evaluation. For subsets that also feed
    /// training this must equal the held-out share `1 - train.fraction`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub name: String,
    pub train: SubsetSelection,
    pub eval_sets: Vec<EvalSelection>,
    pub seed: u64,
}

fn corpus_name(track: Track) -> &'static str {
    match track {
        Track::Fft => "CWRUfft",
        Track::Stat => "CWRUst",
    }
}

fn all_loads(end: SensorPosition) -> Vec<String> {
    (0..4).map(|l| subset_id(l, end)).collect()
}

fn require(available: &BTreeSet<String>, needed: &[String]) -> Result<(), SplitError> {
    match needed.iter().find(|s| !available.contains(*s)) {
        Some(s) => Err(SplitError::MissingSubset(s.clone())),
        None => Ok(()),
    }
}

/// All four loads of one sensor position merged, 10% of each class held out.
pub fn task1_plan(
    end: SensorPosition,
    track: Track,
    available: &BTreeSet<String>,
    seed: u64,
) -> Result<SplitPlan, SplitError> {
    let subsets = all_loads(end);
    require(available, &subsets)?;
    let name = format!("{}-{}", corpus_name(track), end.tag());
    Ok(SplitPlan {
        name: name.clone(),
        train: SubsetSelection {
            subsets: subsets.clone(),
            fraction: DEFAULT_TRAIN_FRACTION,
        },
        eval_sets: vec![EvalSelection {
            name,
            subsets,
            fraction: 1.0 - DEFAULT_TRAIN_FRACTION,
        }],
        seed,
    })
}

/// Train on 90% of 0HPDE; evaluate on its holdout and on other loads and
/// the fan end without retraining.
pub fn task2_plan(available: &BTreeSet<String>, seed: u64) -> Result<SplitPlan, SplitError> {
    let source = subset_id(0, SensorPosition::DriveEnd);
    let targets = [
        subset_id(1, SensorPosition::DriveEnd),
        subset_id(2, SensorPosition::DriveEnd),
        subset_id(3, SensorPosition::DriveEnd),
        subset_id(0, SensorPosition::FanEnd),
        subset_id(1, SensorPosition::FanEnd),
    ];
    let mut needed = vec![source.clone()];
    needed.extend(targets.iter().cloned());
    require(available, &needed)?;
    let mut eval_sets = vec![EvalSelection {
        name: source.clone(),
        subsets: vec![source.clone()],
        fraction: 1.0 - DEFAULT_TRAIN_FRACTION,
    }];
    eval_sets.extend(targets.iter().map(|t| EvalSelection {
        name: t.clone(),
        subsets: vec![t.clone()],
        fraction: 1.0,
    }));
    Ok(SplitPlan {
        name: "task2".into(),
        train: SubsetSelection {
            subsets: vec![source],
            fraction: DEFAULT_TRAIN_FRACTION,
        },
        eval_sets,
        seed,
    })
}

/// All eight subsets merged, 10% of each class held out.
pub fn task3_plan(track: Track, available: &BTreeSet<String>, seed: u64) -> Result<SplitPlan, SplitError> {
    let mut subsets = all_loads(SensorPosition::DriveEnd);
    subsets.extend(all_loads(SensorPosition::FanEnd));
    require(available, &subsets)?;
    let name = format!("{}-all", corpus_name(track));
    Ok(SplitPlan {
        name: name.clone(),
        train: SubsetSelection {
            subsets: subsets.clone(),
            fraction: DEFAULT_TRAIN_FRACTION,
        },
        eval_sets: vec![EvalSelection {
            name,
            subsets,
            fraction: 1.0 - DEFAULT_TRAIN_FRACTION,
        }],
        seed,
    })
}

/// Record ids per split part, each list in corpus order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizedSplit {
    pub plan: String,
    pub seed: u64,
    pub train: Vec<String>,
    pub evals: Vec<(String, Vec<String>)>,
}

fn check_fraction(f: f64, what: &str) -> Result<(), SplitError> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(SplitError::InvalidPlan(format!("{what} fraction {f} outside (0, 1]")))
    }
}

/// Per-class sample of `fraction` of `pool` (rounded per class); returns the
/// selected ids.
fn stratified_pick(pool: &[&PromptRecord], fraction: f64, seed: u64) -> HashSet<String> {
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in pool {
        by_class.entry(r.meta.label.as_str()).or_default().push(r.id());
    }
    let mut picked = HashSet::new();
    for (class, mut ids) in by_class {
        ids.sort_unstable();
        let class_seed = derive_seed(
            seed,
            &[class
                .bytes()
                .fold(0u64, |h, b| h.wrapping_mul(131).wrapping_add(b as u64))],
        );
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(class_seed));
        let take = (ids.len() as f64 * fraction).round() as usize;
        picked.extend(ids.into_iter().take(take).map(str::to_string));
    }
    picked
}

impl SplitPlan {
    pub fn subsets(&self) -> BTreeSet<String> {
        let mut s: BTreeSet<String> = self.train.subsets.iter().cloned().collect();
        for e in &self.eval_sets {
            s.extend(e.subsets.iter().cloned());
        }
        s
    }

    pub fn realize(&self, records: &[PromptRecord]) -> Result<RealizedSplit, SplitError> {
        check_fraction(self.train.fraction, "train")?;
        let present: BTreeSet<String> = records.iter().map(|r| r.meta.subset_id.clone()).collect();
        require(&present, &self.subsets().into_iter().collect::<Vec<_>>())?;
        let mut ids = HashSet::new();
        for r in records {
            if !ids.insert(r.id()) {
                return Err(SplitError::InvalidPlan(format!("duplicate record id {}", r.id())));
            }
        }

        let train_subsets: BTreeSet<&str> = self.train.subsets.iter().map(String::as_str).collect();
        let pool: Vec<&PromptRecord> = records
            .iter()
            .filter(|r| train_subsets.contains(r.meta.subset_id.as_str()))
            .collect();
        let holdout_fraction = 1.0 - self.train.fraction;
        let holdout = stratified_pick(&pool, holdout_fraction, self.seed);
        let train: Vec<String> = pool
            .iter()
            .filter(|r| !holdout.contains(r.id()))
            .map(|r| r.id().to_string())
            .collect();

        let mut evals = Vec::new();
        for (i, e) in self.eval_sets.iter().enumerate() {
            check_fraction(e.fraction, &e.name)?;
            let inside = e.subsets.iter().filter(|s| train_subsets.contains(s.as_str())).count();
            let members: Vec<&PromptRecord> = records
                .iter()
                .filter(|r| e.subsets.contains(&r.meta.subset_id))
                .collect();
            let chosen: Vec<String> = if inside == e.subsets.len() {
                if (e.fraction - holdout_fraction).abs() > 1e-9 {
                    return Err(SplitError::InvalidPlan(format!(
                        "eval set {} draws from training subsets with fraction {} but the holdout is {}",
                        e.name, e.fraction, holdout_fraction
                    )));
                }
                members
                    .iter()
                    .filter(|r| holdout.contains(r.id()))
                    .map(|r| r.id().to_string())
                    .collect()
            } else if inside == 0 {
                let picked = stratified_pick(&members, e.fraction, derive_seed(self.seed, &[i as u64 + 1]));
                members
                    .iter()
                    .filter(|r| picked.contains(r.id()))
                    .map(|r| r.id().to_string())
                    .collect()
            } else {
                return Err(SplitError::InvalidPlan(format!(
                    "eval set {} mixes training and unseen subsets",
                    e.name
                )));
            };
            evals.push((e.name.clone(), chosen));
        }
        Ok(RealizedSplit {
            plan: self.name.clone(),
            seed: self.seed,
            train,
            evals,
        })
    }
}

/// Picks `ids` out of `records`, preserving manifest order.
pub fn select_records(records: &[PromptRecord], ids: &[String]) -> Result<Vec<PromptRecord>, SplitError> {
    let index: BTreeMap<&str, &PromptRecord> = records.iter().map(|r| (r.id(), r)).collect();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .map(|r| (*r).clone())
                .ok_or_else(|| SplitError::InvalidPlan(format!("record {id} not found in corpus")))
        })
        .collect()
}

/// Id list of one split part with the plan, seed and corpora it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub plan: String,
    pub seed: u64,
    pub part: String,
    /// Corpus files (relative to the work directory) holding the records.
    pub corpora: Vec<String>,
    pub ids: Vec<String>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = format!("# plan: {}\n# seed: {}\n# part: {}\n", self.plan, self.seed, self.part);
        for c in &self.corpora {
            s.push_str(&format!("# corpus: {c}\n"));
        }
        for id in &self.ids {
            s.push_str(id);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut plan = None;
        let mut seed = None;
        let mut part = None;
        let mut corpora = Vec::new();
        let mut ids = Vec::new();
        for line in text.lines() {
            if let Some(h) = line.strip_prefix("# ") {
                let (key, value) = h.split_once(": ").ok_or_else(|| format!("bad header line {line:?}"))?;
                match key {
                    "plan" => plan = Some(value.to_string()),
                    "seed" => seed = Some(value.parse::<u64>().map_err(|e| format!("seed: {e}"))?),
                    "part" => part = Some(value.to_string()),
                    "corpus" => corpora.push(value.to_string()),
                    other => return Err(format!("unknown header {other:?}")),
                }
            } else if !line.is_empty() {
                ids.push(line.to_string());
            }
        }
        Ok(Manifest {
            plan: plan.ok_or("missing plan header")?,
            seed: seed.ok_or("missing seed header")?,
            part: part.ok_or("missing part header")?,
            corpora,
            ids,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), SplitError> {
        fs::write(path, self.render()).map_err(|source| SplitError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, SplitError> {
        let text = fs::read_to_string(path).map_err(|source| SplitError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Manifest::parse(&text).map_err(|message| SplitError::BadManifest {
            path: path.display().to_string(),
            message,
        })
    }
}
