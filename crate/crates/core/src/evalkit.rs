//! Mapping model answers to labels, and the metric suite.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::promptgen::{Label, Scheme};
use crate::signal::{FaultKind, FaultSize};

const DEFAULT_SYNONYMS: &str = include_str!("../data/synonyms.toml");

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to score")]
    EmptyInput,
    #[error("labels from different schemes in one evaluation")]
    SchemeMismatch,
    #[error("synonym table: {0}")]
    Synonyms(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindSynonyms {
    #[serde(default)]
    pub phrases: Vec<String>,
    #[serde(default)]
    pub exact: Vec<String>,
    #[serde(default)]
    pub codes: Vec<String>,
}

/// Editable synonym data, one entry per fault kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymTable {
    pub normal: KindSynonyms,
    pub inner_race: KindSynonyms,
    pub outer_race: KindSynonyms,
    pub rolling_element: KindSynonyms,
}

impl Default for SynonymTable {
    fn default() -> Self {
        toml::from_str(DEFAULT_SYNONYMS).expect("shipped synonym table parses")
    }
}

impl SynonymTable {
    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        toml::from_str(text).map_err(|e| EvalError::Synonyms(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, EvalError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| EvalError::Synonyms(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn entries(&self) -> [(FaultKind, &KindSynonyms); 4] {
        [
            (FaultKind::Normal, &self.normal),
            (FaultKind::InnerRace, &self.inner_race),
            (FaultKind::OuterRace, &self.outer_race),
            (FaultKind::RollingElement, &self.rolling_element),
        ]
    }
}

/// Lowercased words with punctuation removed; decimal points inside numbers survive.
fn normalize(text: &str) -> Vec<String> {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '.' { c } else { ' ' })
        .collect();
    lowered
        .split_whitespace()
        .filter_map(|w| {
            let w = w.trim_end_matches('.');
            let w = match w.strip_prefix('.') {
                Some(rest) if rest.starts_with(|c: char| c.is_ascii_digit()) => w,
                Some(rest) => rest.trim_start_matches('.'),
                None => w,
            };
            (!w.is_empty()).then(|| w.to_string())
        })
        .collect()
}

fn contains_seq(words: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && words.windows(phrase.len()).any(|w| w == phrase)
}

fn size_from_number(word: &str) -> Option<FaultSize> {
    let v: f64 = word.parse().ok()?;
    FaultSize::ALL.into_iter().find(|s| (s.inches() - v).abs() < 1e-9)
}

/// (kind, normalized phrases, normalized exact answers, lowercase codes).
type KindEntry = (FaultKind, Vec<Vec<String>>, Vec<Vec<String>>, Vec<String>);

/// Maps free text to labels using a synonym table.
#[derive(Debug, Clone)]
pub struct LabelMapper {
    entries: Vec<KindEntry>,
}

impl Default for LabelMapper {
    fn default() -> Self {
        Self::new(&SynonymTable::default())
    }
}

impl LabelMapper {
    pub fn new(table: &SynonymTable) -> Self {
        let entries = table
            .entries()
            .into_iter()
            .map(|(kind, syn)| {
                (
                    kind,
                    syn.phrases.iter().map(|p| normalize(p)).collect(),
                    syn.exact.iter().map(|p| normalize(p)).collect(),
                    syn.codes.iter().map(|c| c.to_lowercase()).collect(),
                )
            })
            .collect();
        Self { entries }
    }

    /// The label named by `text`, or `None` when the text names no class,
    /// names several, or (ten-class scheme) lacks a single size cue.
    pub fn map(&self, text: &str, scheme: Scheme) -> Option<Label> {
        let words = normalize(text);
        let mut kinds: Vec<FaultKind> = Vec::new();
        let mut sizes: Vec<FaultSize> = Vec::new();

        for (kind, phrases, exact, codes) in &self.entries {
            let mut hit =
                phrases.iter().any(|p| contains_seq(&words, p)) || exact.iter().any(|p| !p.is_empty() && *p == words);
            for (i, w) in words.iter().enumerate() {
                for code in codes {
                    if w == code {
                        hit = true;
                        let next = words.get(i + 1).and_then(|n| n.parse::<u8>().ok());
                        if let Some(s) = next.and_then(FaultSize::from_ordinal) {
                            sizes.push(s);
                        }
                    } else if let Some(rest) = w.strip_prefix(code.as_str()) {
                        if let Some(s) = rest.parse::<u8>().ok().and_then(FaultSize::from_ordinal) {
                            hit = true;
                            sizes.push(s);
                        }
                    }
                }
            }
            if hit {
                kinds.push(*kind);
            }
        }
        sizes.extend(words.iter().filter_map(|w| size_from_number(w)));

        let [kind] = kinds.as_slice() else {
            return None;
        };
        sizes.sort();
        sizes.dedup();
        match (scheme, kind) {
            (_, FaultKind::Normal) | (Scheme::Four, _) => Label::new(scheme, *kind, None).ok(),
            (Scheme::Ten, k) => match sizes.as_slice() {
                [s] => Label::new(scheme, *k, Some(*s)).ok(),
                _ => None,
            },
        }
    }
}

fn default_mapper() -> &'static LabelMapper {
    static MAPPER: OnceLock<LabelMapper> = OnceLock::new();
    MAPPER.get_or_init(LabelMapper::default)
}

/// Maps with the shipped synonym table; `None` means unmapped.
pub fn map_prediction(text: &str, scheme: Scheme) -> Option<Label> {
    default_mapper().map(text, scheme)
}

/// Counts with rows as true classes and columns as predicted classes; the
/// last column counts unmapped answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn total(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.row_sum(i)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("true\\pred");
        for l in &self.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push_str(",Unmapped\n");
        for (l, row) in self.labels.iter().zip(&self.counts) {
            s.push_str(l);
            for c in row {
                s.push_str(&format!(",{c}"));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub support: u64,
    pub predicted: u64,
    pub true_positives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// False when the class was never predicted (precision set to 0).
    pub precision_defined: bool,
    /// False when the class has no true instances (recall set to 0).
    pub recall_defined: bool,
    /// Classes with neither instances nor predictions are left out of the macro averages.
    pub in_macro: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scheme: Scheme,
    pub total: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub unmapped_count: u64,
    pub per_class: Vec<ClassMetrics>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "records {}  unmapped {}  accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
            self.total, self.unmapped_count, self.accuracy, self.macro_precision, self.macro_recall, self.macro_f1
        )?;
        writeln!(
            f,
            "{:<8} {:>8} {:>9} {:>9} {:>9} {:>9}",
            "class", "support", "predicted", "precision", "recall", "f1"
        )?;
        for c in &self.per_class {
            let mark = |defined: bool| if defined { ' ' } else { '*' };
            writeln!(
                f,
                "{:<8} {:>8} {:>9} {:>8.4}{} {:>8.4}{} {:>9.4}",
                c.label,
                c.support,
                c.predicted,
                c.precision,
                mark(c.precision_defined),
                c.recall,
                mark(c.recall_defined),
                c.f1
            )?;
        }
        if self.per_class.iter().any(|c| !c.precision_defined || !c.recall_defined) {
            writeln!(f, "* undefined (0/0), reported as 0")?;
        }
        Ok(())
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, false)
    } else {
        (num as f64 / den as f64, true)
    }
}

/// Scores (truth, prediction) pairs. Unmapped predictions are wrong and
/// count as a false negative of the true class. Averages are macro over
/// the classes that occur as truth or prediction.
pub fn score(pairs: &[(Label, Option<Label>)]) -> Result<(EvalReport, ConfusionMatrix), EvalError> {
    let scheme = pairs.first().ok_or(EvalError::EmptyInput)?.0.scheme();
    if pairs
        .iter()
        .any(|(t, p)| t.scheme() != scheme || p.is_some_and(|p| p.scheme() != scheme))
    {
        return Err(EvalError::SchemeMismatch);
    }
    let labels = scheme.labels();
    let k = labels.len();
    let mut counts = vec![vec![0u64; k + 1]; k];
    for (t, p) in pairs {
        let col = p.map_or(k, |p| p.index());
        counts[t.index()][col] += 1;
    }
    let cm = ConfusionMatrix {
        labels: labels.iter().map(Label::code).collect(),
        counts,
    };

    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let support = cm.row_sum(c);
            let predicted: u64 = (0..k).map(|r| cm.counts[r][c]).sum();
            let (precision, precision_defined) = ratio(tp, predicted);
            let (recall, recall_defined) = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label: cm.labels[c].clone(),
                support,
                predicted,
                true_positives: tp,
                precision,
                recall,
                f1,
                precision_defined,
                recall_defined,
                in_macro: support > 0 || predicted > 0,
            }
        })
        .collect();

    let active: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.in_macro).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| active.iter().map(|c| f(c)).sum::<f64>() / active.len() as f64;
    let total = cm.total();
    let report = EvalReport {
        scheme,
        total,
        accuracy: cm.trace() as f64 / total as f64,
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        unmapped_count: cm.counts.iter().map(|r| r[k]).sum(),
        per_class,
    };
    Ok((report, cm))
}
