use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use faultlm::baselines::{fit, ClassifierKind};
use faultlm::evalkit::{score, ConfusionMatrix, EvalReport, LabelMapper, SynonymTable};
use faultlm::llm_client::{evaluate_endpoint, LlmClient, ResponseCache};
use faultlm::preprocess::{self, decode_text, fft_magnitude_of, EncodeOptions};
use faultlm::promptgen::{
    build_subset, parse_features, read_jsonl, write_jsonl, BuildConfig, EquipChoice, Label, PromptRecord, Scheme, Track,
};
use faultlm::signal::{FaultAnnotation, FaultKind, FaultSize, OperatingCondition, SensorPosition, TimeSeriesSignal};
use faultlm::signal_io::{encode_raw_f64, load_signal, parse_raw_f64, parse_text, LoadRequest};
use faultlm::splits::{select_records, task1_plan, task2_plan, task3_plan, Manifest, SplitPlan};
use faultlm::synth::{generate, generate_subset, SynthSpec};
use faultlm::FEATURE_NAMES;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::manifest;
use crate::{
    BaselineArgs, BaselineModel, BuildArgs, Ctx, EncodeArgs, EvalArgs, IngestArgs, ReportArgs, SplitArgs, SynthArgs,
};

/// Index file of an ingested signal directory.
const SIGNAL_INDEX: &str = "signals.jsonl";

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn ensure_parent(path: &Path) -> Result<PathBuf, CliError> {
    let dir = parent_dir(path);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    ensure_parent(path)?;
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn parse_size(s: Option<&str>) -> Result<Option<FaultSize>, CliError> {
    let Some(s) = s.map(str::trim).filter(|s| !s.is_empty()) else {
        return Ok(None);
    };
    let v: f64 = s
        .parse()
        .map_err(|_| CliError::Input(format!("bad fault size {s:?}")))?;
    let inches = if v >= 1.0 { v / 1000.0 } else { v };
    Ok(Some(FaultSize::from_inches(inches)?))
}

fn parse_annotation(kind: &str, size: Option<&str>) -> Result<FaultAnnotation, CliError> {
    let kind: FaultKind = kind.parse()?;
    Ok(FaultAnnotation::new(kind, parse_size(size)?)?)
}

fn condition(load_hp: u8, speed_rpm: Option<u32>) -> Result<OperatingCondition, CliError> {
    match (speed_rpm, OperatingCondition::cwru(load_hp)) {
        (Some(speed_rpm), _) => Ok(OperatingCondition { load_hp, speed_rpm }),
        (None, Some(c)) => Ok(c),
        (None, None) => Err(CliError::Input(format!(
            "no default speed for load {load_hp} hp; give speed_rpm"
        ))),
    }
}

/// "0HPDE" -> (0, DriveEnd).
fn parse_subset(id: &str) -> Result<(u8, SensorPosition), CliError> {
    let bad = || CliError::Input(format!("bad subset id {id:?} (expected e.g. 0HPDE)"));
    let upper = id.to_ascii_uppercase();
    let (load, pos) = upper.split_once("HP").ok_or_else(bad)?;
    Ok((load.parse().map_err(|_| bad())?, pos.parse().map_err(|_| bad())?))
}

pub fn synth(ctx: &mut Ctx, a: SynthArgs) -> Result<(), CliError> {
    if let Some(s) = a.seed {
        ctx.cfg.seed = s;
    }
    if let Some(n) = a.noise {
        ctx.cfg.synth.noise_sigma = n;
    }
    if let Some(d) = a.duration {
        ctx.cfg.synth.duration_s = d;
    }
    let fault = parse_annotation(&a.kind, a.size.as_deref())?;
    let mut spec = SynthSpec::new(fault, condition(a.load, None)?, ctx.cfg.seed);
    spec.sensor_position = a.position.parse()?;
    spec.noise_sigma = ctx.cfg.synth.noise_sigma;
    spec.duration_s = ctx.cfg.synth.duration_s;
    let signal = generate(&spec)?;
    let out = ctx.path(&a.out);
    write_file(&out, &encode_raw_f64(signal.samples()))?;
    let inputs = BTreeMap::from([
        (
            "fault".to_string(),
            format!(
                "{} {}",
                fault.kind(),
                fault.size().map(|s| s.to_string()).unwrap_or_default()
            ),
        ),
        ("load_hp".to_string(), a.load.to_string()),
        ("position".to_string(), spec.sensor_position.tag().to_string()),
    ]);
    manifest::record(&parent_dir(&out), &[&out], "synth", &ctx.cfg, inputs)?;
    eprintln!("wrote {} samples to {}", signal.len(), out.display());
    Ok(())
}

#[derive(Deserialize)]
struct IndexRow {
    path: PathBuf,
    kind: String,
    #[serde(default)]
    size: Option<String>,
    load_hp: u8,
    #[serde(default)]
    speed_rpm: Option<u32>,
    #[serde(default)]
    channel: Option<String>,
    #[serde(default)]
    sampling_rate_hz: Option<f64>,
}

/// One line of an ingested directory's index.
#[derive(Debug, Serialize, Deserialize)]
struct SignalEntry {
    file: String,
    source_id: String,
    position: SensorPosition,
    condition: OperatingCondition,
    fault: FaultAnnotation,
    sampling_rate_hz: f64,
}

pub fn ingest(ctx: &mut Ctx, a: IngestArgs) -> Result<(), CliError> {
    let index = ctx.path(&a.index);
    let base = parent_dir(&index);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&index)
        .map_err(|e| CliError::Input(format!("{}: {e}", index.display())))?;
    let out = ctx.path(&a.out);
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut lines = String::new();
    let mut count = 0;
    for (i, row) in reader.deserialize::<IndexRow>().enumerate() {
        let row = row.map_err(|e| CliError::Input(format!("{} row {}: {e}", index.display(), i + 1)))?;
        let channel_hint = row
            .channel
            .as_deref()
            .filter(|c| !c.is_empty())
            .map(str::parse)
            .transpose()?;
        let req = LoadRequest {
            channel_hint,
            annotation: parse_annotation(&row.kind, row.size.as_deref())?,
            condition: condition(row.load_hp, row.speed_rpm)?,
            sampling_rate_hz: row.sampling_rate_hz,
        };
        let path = if row.path.is_absolute() {
            row.path.clone()
        } else {
            base.join(&row.path)
        };
        let signal = load_signal(&path, &req)?;
        let file = format!("{i:05}.f64");
        let target = out.join(&file);
        std::fs::write(&target, encode_raw_f64(signal.samples())).map_err(|e| CliError::io(&target, e))?;
        let entry = SignalEntry {
            file,
            source_id: signal.source_id().to_string(),
            position: signal.sensor_position(),
            condition: signal.condition(),
            fault: signal.fault(),
            sampling_rate_hz: signal.sampling_rate_hz(),
        };
        lines.push_str(&serde_json::to_string(&entry).expect("entry serializes"));
        lines.push('\n');
        count += 1;
    }
    let index_out = out.join(SIGNAL_INDEX);
    std::fs::write(&index_out, lines).map_err(|e| CliError::io(&index_out, e))?;
    let inputs = BTreeMap::from([("index".to_string(), a.index.display().to_string())]);
    manifest::record(&out, &[&index_out], "ingest", &ctx.cfg, inputs)?;
    eprintln!("ingested {count} recordings into {}", out.display());
    Ok(())
}

fn load_ingested(dir: &Path, load: u8, position: SensorPosition) -> Result<Vec<TimeSeriesSignal>, CliError> {
    let index = dir.join(SIGNAL_INDEX);
    let text = std::fs::read_to_string(&index).map_err(|e| CliError::io(&index, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let e: SignalEntry = serde_json::from_str(line)
            .map_err(|err| CliError::Input(format!("{} line {}: {err}", index.display(), i + 1)))?;
        if e.condition.load_hp != load || e.position != position {
            continue;
        }
        let path = dir.join(&e.file);
        let bytes = std::fs::read(&path).map_err(|err| CliError::io(&path, err))?;
        out.push(TimeSeriesSignal::new(
            parse_raw_f64(&bytes)?,
            e.sampling_rate_hz,
            e.position,
            e.condition,
            e.fault,
            e.source_id,
        )?);
    }
    Ok(out)
}

/// Numeric view of a record's input: decoded FFT magnitudes or the 15 features.
fn record_vector(r: &PromptRecord, decimals: u32) -> Result<Vec<f64>, CliError> {
    match r.meta.track {
        Track::Fft => Ok(decode_text(&r.input, decimals)?),
        Track::Stat => parse_features(&r.input)
            .map(|f| f.to_vec())
            .ok_or_else(|| CliError::Input(format!("record {}: unparsable feature input", r.id()))),
    }
}

fn write_vectors_csv(path: &Path, records: &[PromptRecord], decimals: u32) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let width = match records.first() {
        Some(r) => record_vector(r, decimals)?.len(),
        None => 0,
    };
    let mut header = vec!["label".to_string()];
    match records.first().map(|r| r.meta.track) {
        Some(Track::Stat) => header.extend(FEATURE_NAMES.iter().map(|s| s.to_string())),
        _ => header.extend((0..width).map(|i| format!("bin{i}"))),
    }
    let csv_err = |e: csv::Error| CliError::Input(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.meta.label.clone()];
        row.extend(record_vector(r, decimals)?.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    write_file(path, &bytes)
}

pub fn build(ctx: &mut Ctx, a: BuildArgs) -> Result<(), CliError> {
    let cfg = &mut ctx.cfg;
    if let Some(t) = &a.track {
        cfg.track = t.parse().map_err(CliError::Usage)?;
    }
    if let Some(s) = &a.scheme {
        cfg.scheme = s.parse().map_err(CliError::Usage)?;
    }
    if a.no_equip_info {
        cfg.equip_info = false;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.synthetic {
        cfg.data_root = None;
    }
    if let Some(d) = &a.data_root {
        cfg.data_root = Some(d.clone());
    }
    if let Some(l) = a.l {
        cfg.segment_len = l;
    }
    if let Some(d) = a.d {
        cfg.decimals = d;
    }
    if let Some(k) = a.k {
        cfg.segments_per_group = k;
    }
    let build_cfg = BuildConfig {
        track: cfg.track,
        scheme: cfg.scheme,
        segments_per_group: cfg.segments_per_group,
        segment_len: cfg.segment_len,
        encode: EncodeOptions {
            decimals: cfg.decimals,
            ..Default::default()
        },
        seed: cfg.seed,
        equip: if cfg.equip_info {
            EquipChoice::Auto
        } else {
            EquipChoice::Omitted
        },
        ..Default::default()
    };
    let cfg = ctx.cfg.clone();

    let mut records = Vec::new();
    for id in &a.subset {
        let (load, position) = parse_subset(id)?;
        let signals = match &cfg.data_root {
            None => generate_subset(
                condition(load, None)?,
                position,
                cfg.synth.noise_sigma,
                cfg.synth.duration_s,
                cfg.seed,
            )?,
            Some(root) => load_ingested(&ctx.path(root), load, position)?,
        };
        if signals.is_empty() {
            return Err(CliError::Input(format!("no recordings for subset {id}")));
        }
        records.extend(build_subset(&signals, &build_cfg)?);
    }

    let out = ctx.path(&a.out);
    let dir = ensure_parent(&out)?;
    write_jsonl(&records, &out)?;
    let mut artifacts = vec![out.clone()];
    if let Some(v) = &a.vectors_csv {
        let path = ctx.path(v);
        write_vectors_csv(&path, &records, cfg.decimals)?;
        if parent_dir(&path) == dir {
            artifacts.push(path);
        } else {
            manifest::record(&parent_dir(&path), &[&path], "build", &cfg, BTreeMap::new())?;
        }
    }
    let inputs = BTreeMap::from([("subsets".to_string(), a.subset.join(","))]);
    let refs: Vec<&Path> = artifacts.iter().map(PathBuf::as_path).collect();
    manifest::record(&dir, &refs, "build", &cfg, inputs)?;
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

/// Records of a corpus JSONL or of a split manifest (ids resolved against
/// the manifest's corpora).
fn load_set(ctx: &Ctx, path: &Path) -> Result<Vec<PromptRecord>, CliError> {
    let full = ctx.path(path);
    if full.extension().is_some_and(|e| e == "jsonl") {
        return Ok(read_jsonl(&full)?);
    }
    let m = Manifest::read(&full)?;
    let mut pool = Vec::new();
    for c in &m.corpora {
        pool.extend(read_jsonl(&ctx.path(Path::new(c)))?);
    }
    Ok(select_records(&pool, &m.ids)?)
}

fn plan_for(name: &str, track: Track, available: &BTreeSet<String>, seed: u64) -> Result<SplitPlan, CliError> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "task1-de" => task1_plan(SensorPosition::DriveEnd, track, available, seed)?,
        "task1-fe" => task1_plan(SensorPosition::FanEnd, track, available, seed)?,
        "task2" => task2_plan(available, seed)?,
        "task3" => task3_plan(track, available, seed)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown split plan {other:?} (expected task1-de, task1-fe, task2 or task3)"
            )))
        }
    })
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn split(ctx: &mut Ctx, a: SplitArgs) -> Result<(), CliError> {
    if let Some(p) = &a.plan {
        ctx.cfg.split.plan = p.clone();
    }
    if let Some(s) = a.seed {
        ctx.cfg.split.seed = s;
    }
    let mut records = Vec::new();
    for c in &a.corpus {
        records.extend(read_jsonl(&ctx.path(c))?);
    }
    let track = records
        .first()
        .map(|r| r.meta.track)
        .ok_or_else(|| CliError::Input("corpora hold no records".into()))?;
    let available: BTreeSet<String> = records.iter().map(|r| r.meta.subset_id.clone()).collect();
    let plan = plan_for(&ctx.cfg.split.plan, track, &available, ctx.cfg.split.seed)?;
    let realized = plan.realize(&records)?;

    let out = ctx.path(&a.out);
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let corpora: Vec<String> = a.corpus.iter().map(|c| c.display().to_string()).collect();
    let mut parts = vec![("train".to_string(), realized.train.clone())];
    parts.extend(
        realized
            .evals
            .iter()
            .map(|(n, ids)| (format!("eval-{}", file_safe(n)), ids.clone())),
    );
    let mut artifacts = Vec::new();
    for (part, ids) in parts {
        let m = Manifest {
            plan: plan.name.clone(),
            seed: plan.seed,
            part: part.clone(),
            corpora: corpora.clone(),
            ids,
        };
        let txt = out.join(format!("{part}.txt"));
        m.write(&txt)?;
        let jsonl = out.join(format!("{part}.jsonl"));
        write_jsonl(&select_records(&records, &m.ids)?, &jsonl)?;
        eprintln!("{part}: {} records", m.ids.len());
        artifacts.extend([txt, jsonl]);
    }
    let plan_path = out.join("plan.json");
    let plan_json = serde_json::to_string_pretty(&plan).expect("plan serializes") + "\n";
    std::fs::write(&plan_path, plan_json).map_err(|e| CliError::io(&plan_path, e))?;
    artifacts.push(plan_path);
    let refs: Vec<&Path> = artifacts.iter().map(PathBuf::as_path).collect();
    let inputs = BTreeMap::from([("corpora".to_string(), corpora.join(","))]);
    manifest::record(&out, &refs, "split", &ctx.cfg, inputs)?;
    Ok(())
}

/// A labelled vector CSV: a `label` column followed by numeric columns.
fn read_vectors_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(|e| CliError::Input(e.to_string()))?.clone();
    let label_col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| CliError::Input(format!("{}: no label column", path.display())))?;
    let (mut labels, mut rows) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{} row {}: {e}", path.display(), i + 1)))?;
        let mut v = Vec::with_capacity(rec.len() - 1);
        for (j, field) in rec.iter().enumerate() {
            if j == label_col {
                labels.push(field.to_string());
            } else {
                v.push(
                    field.trim().parse().map_err(|_| {
                        CliError::Input(format!("{} row {}: bad value {field:?}", path.display(), i + 1))
                    })?,
                );
            }
        }
        rows.push(v);
    }
    Ok((labels, rows))
}

fn labelled_vectors(ctx: &Ctx, path: &Path, decimals: u32) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let full = ctx.path(path);
    if full.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return read_vectors_csv(&full);
    }
    let records = load_set(ctx, path)?;
    let vectors = records
        .iter()
        .map(|r| record_vector(r, decimals))
        .collect::<Result<_, _>>()?;
    Ok((records.into_iter().map(|r| r.meta.label).collect(), vectors))
}

fn to_labels(codes: &[String], scheme: Scheme) -> Result<Vec<Label>, CliError> {
    Ok(codes
        .iter()
        .map(|c| Label::from_code(c, scheme))
        .collect::<Result<_, _>>()?)
}

/// Report file shared by `eval` and `baseline`; the metrics sit at the top
/// level so `accuracy` is a direct field.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub set: String,
    #[serde(flatten)]
    pub report: EvalReport,
    pub confusion: ConfusionMatrix,
}

fn write_report(path: &Path, report: &ReportFile) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    write_file(path, text.as_bytes())
}

pub fn baseline(ctx: &mut Ctx, a: BaselineArgs) -> Result<(), CliError> {
    if let Some(d) = a.d {
        ctx.cfg.decimals = d;
    }
    let (train_codes, train_x) = labelled_vectors(ctx, &a.train, ctx.cfg.decimals)?;
    let (test_codes, test_x) = labelled_vectors(ctx, &a.test, ctx.cfg.decimals)?;
    let all: Vec<String> = train_codes.iter().chain(&test_codes).cloned().collect();
    let scheme = if to_labels(&all, Scheme::Four).is_ok() {
        Scheme::Four
    } else {
        Scheme::Ten
    };
    let train_y: Vec<usize> = to_labels(&train_codes, scheme)?.iter().map(Label::index).collect();
    let truth = to_labels(&test_codes, scheme)?;
    let kind = match a.model {
        BaselineModel::Knn => ClassifierKind::Knn { k: a.k },
        BaselineModel::Centroid => ClassifierKind::NearestCentroid,
    };
    let model = fit(&train_x, &train_y, kind)?;
    let labels = scheme.labels();
    let preds = model.predict_many(&test_x)?;
    let pairs: Vec<(Label, Option<Label>)> = truth
        .into_iter()
        .zip(preds)
        .map(|(t, p)| (t, Some(labels[p])))
        .collect();
    let (report, confusion) = score(&pairs)?;
    print!("{report}");
    if let Some(out) = &a.out {
        let path = ctx.path(out);
        let name = match a.model {
            BaselineModel::Knn => format!("knn(k={})", a.k),
            BaselineModel::Centroid => "nearest-centroid".into(),
        };
        let file = ReportFile {
            model: name,
            endpoint: None,
            set: a.test.display().to_string(),
            report,
            confusion,
        };
        write_report(&path, &file)?;
        let inputs = BTreeMap::from([
            ("train".to_string(), a.train.display().to_string()),
            ("test".to_string(), a.test.display().to_string()),
        ]);
        manifest::record(&parent_dir(&path), &[&path], "baseline", &ctx.cfg, inputs)?;
    }
    Ok(())
}

/// The endpoint without query string or credentials, for reports.
fn public_url(url: &str) -> String {
    let url = url.split(['?', '#']).next().unwrap_or("");
    let Some((scheme, rest)) = url.split_once("://") else {
        return url.to_string();
    };
    let authority_end = rest.find('/').unwrap_or(rest.len());
    match rest[..authority_end].rfind('@') {
        Some(at) => format!("{scheme}://{}", &rest[at + 1..]),
        None => url.to_string(),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    parent_dir(path).join(format!("{stem}.{suffix}"))
}

pub fn eval(ctx: &mut Ctx, a: EvalArgs) -> Result<(), CliError> {
    if let Some(e) = &a.endpoint {
        ctx.cfg.inference.endpoint_url = Some(e.clone());
    }
    if let Some(m) = &a.model {
        ctx.cfg.inference.model_name = Some(m.clone());
    }
    if let Some(c) = a.concurrency {
        ctx.cfg.inference.max_concurrency = c;
    }
    let client = LlmClient::new(ctx.cfg.inference_config()?)?;
    let records = load_set(ctx, &a.set)?;
    let scheme = records
        .first()
        .map(|r| r.meta.scheme)
        .ok_or_else(|| CliError::Input(format!("{}: empty eval set", a.set.display())))?;
    let mapper = match &a.synonyms {
        Some(p) => LabelMapper::new(&SynonymTable::from_path(&ctx.path(p))?),
        None => LabelMapper::default(),
    };
    let cache = match &a.cache {
        Some(p) => {
            let path = ctx.path(p);
            ensure_parent(&path)?;
            Some(ResponseCache::open(&path).map_err(|e| CliError::io(&path, e))?)
        }
        None => None,
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Input(format!("async runtime: {e}")))?;
    let ev = rt.block_on(evaluate_endpoint(&client, &records, scheme, &mapper, cache.as_ref()))?;

    let out = ctx.path(&a.out);
    let responses_path = sibling(&out, "responses.jsonl");
    let confusion_path = sibling(&out, "confusion.csv");
    let mut lines = String::new();
    for r in &ev.responses {
        lines.push_str(&serde_json::to_string(r).expect("response serializes"));
        lines.push('\n');
    }
    write_file(&responses_path, lines.as_bytes())?;
    write_file(&confusion_path, ev.confusion.to_csv().as_bytes())?;
    let failed = ev.responses.iter().filter(|r| r.error.is_some()).count();
    print!("{}", ev.report);
    let file = ReportFile {
        model: client.config().model_name.clone(),
        endpoint: Some(public_url(&client.config().endpoint_url)),
        set: a.set.display().to_string(),
        report: ev.report,
        confusion: ev.confusion,
    };
    write_report(&out, &file)?;
    let inputs = BTreeMap::from([("set".to_string(), a.set.display().to_string())]);
    manifest::record(
        &parent_dir(&out),
        &[&out, &responses_path, &confusion_path],
        "eval",
        &ctx.cfg,
        inputs,
    )?;
    if failed > 0 {
        eprintln!("{failed} requests failed and were scored as unmapped");
    }
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    file: String,
    model: &'a str,
    set: &'a str,
    total: u64,
    accuracy: f64,
    macro_f1: f64,
    unmapped: u64,
}

pub fn report(ctx: &Ctx, a: ReportArgs) -> Result<(), CliError> {
    let mut files = Vec::new();
    for p in &a.reports {
        let path = ctx.path(p);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let r: ReportFile =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        files.push((p.display().to_string(), r));
    }
    let rows: Vec<SummaryRow> = files
        .iter()
        .map(|(file, r)| SummaryRow {
            file: file.clone(),
            model: &r.model,
            set: &r.set,
            total: r.report.total,
            accuracy: r.report.accuracy,
            macro_f1: r.report.macro_f1,
            unmapped: r.report.unmapped_count,
        })
        .collect();
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("summary serializes"));
        return Ok(());
    }
    for (file, r) in &files {
        println!("== {file}: {} on {}", r.model, r.set);
        print!("{}", r.report);
        println!("{}", r.confusion.to_csv());
    }
    if rows.len() > 1 {
        println!(
            "{:<32} {:<20} {:>8} {:>9} {:>9} {:>9}",
            "file", "model", "records", "accuracy", "macro_f1", "unmapped"
        );
        for r in &rows {
            println!(
                "{:<32} {:<20} {:>8} {:>9.4} {:>9.4} {:>9}",
                r.file, r.model, r.total, r.accuracy, r.macro_f1, r.unmapped
            );
        }
    }
    Ok(())
}

fn read_float_stream(ctx: &Ctx, input: Option<&Path>) -> Result<Vec<f64>, CliError> {
    let bytes = match input {
        Some(p) => {
            let path = ctx.path(p);
            std::fs::read(&path).map_err(|e| CliError::io(&path, e))?
        }
        None => {
            let mut buf = Vec::new();
            std::io::stdin()
                .read_to_end(&mut buf)
                .map_err(|e| CliError::io(Path::new("<stdin>"), e))?;
            buf
        }
    };
    if let Some(values) = std::str::from_utf8(&bytes).ok().and_then(|s| parse_text(s).ok()) {
        return Ok(values);
    }
    Ok(parse_raw_f64(&bytes)?)
}

pub fn encode(ctx: &Ctx, a: EncodeArgs) -> Result<(), CliError> {
    let samples = read_float_stream(ctx, a.input.as_deref())?;
    let end = a
        .offset
        .checked_add(a.l)
        .filter(|&e| e <= samples.len() && a.l > 0)
        .ok_or_else(|| {
            CliError::Input(format!(
                "need {} samples from offset {}, stream has {}",
                a.l,
                a.offset,
                samples.len()
            ))
        })?;
    let spectrum = fft_magnitude_of(&samples[a.offset..end])?;
    let encoded = preprocess::encode(&spectrum, a.d)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{}", encoded.text).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}
