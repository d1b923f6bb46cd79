//! Stage functions shared by `run_experiment` and the CLI subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{DetectorKind, ExperimentConfig, LexicalFeatures, ModelSpec};
use crate::acoustic::{self, acoustic_features, apply_normalizer, fit_normalizer, time_shift, FeatureRow, NormStats};
use crate::classifiers::{
    boost_train, cnn_train, decode_artifact, encode_artifact, forest_train, mnb_train, svm_train, write_artifact,
    Classifier, Model, Prediction,
};
use crate::dataset::{assign_labels, load_manifest, make_fold, make_split, DatasetTag, SplitPlan, VideoRecord};
use crate::error::{Error, Result};
use crate::fusion::{aggregate_units, unit_video, vote, write_fused, FusedVerdict, FusionMode, Modality, ModalityVerdict};
use crate::label::Label;
use crate::lexical::{
    embed_document, normalize_text, tfidf_fit, tfidf_transform, train_word_embeddings, EmbeddingTable,
    RuleLemmatizer, StopWords, TfidfModel, TokenizedDocument,
};
use crate::media::{self, cache, default_decoder, load_transcript, Frame};
use crate::seed;
use crate::visual::{
    detect_video_cached, read_detections, select_frames, CommandDetector, FaceDetector, FullFrameDetector,
    ReplayDetector, VisualMode,
};

const INGEST_KEY_FILE: &str = "ingest.key";

/// Everything a stage needs: the effective config, the labeled records that
/// take part in the split, and resolved directories.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub config: ExperimentConfig,
    /// Sorted by id, paths resolved against the manifest's directory.
    pub records: Vec<VideoRecord>,
    pub labels: BTreeMap<String, Label>,
    pub split: SplitPlan,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Set when every record carries the same dataset tag.
    pub dataset: Option<DatasetTag>,
}

impl Workspace {
    pub fn label(&self, id: &str) -> Label {
        self.labels[id]
    }

    pub fn train_records(&self) -> impl Iterator<Item = &VideoRecord> {
        self.records.iter().filter(|r| self.split.is_train(&r.id))
    }

    pub fn test_records(&self) -> impl Iterator<Item = &VideoRecord> {
        self.records.iter().filter(|r| self.split.is_test(&r.id))
    }

    pub fn verdict_path(&self, m: Modality) -> PathBuf {
        self.out_dir.join("verdicts").join(format!("{m}.jsonl"))
    }

    pub fn model_path(&self, m: Modality) -> PathBuf {
        self.out_dir.join("models").join(format!("{m}.model"))
    }

    pub fn enabled(&self) -> Vec<Modality> {
        Modality::ALL.into_iter().filter(|&m| self.config.section_enabled(m)).collect()
    }

    fn assert_train(&self, unit_id: &str) -> Result<()> {
        let v = unit_video(unit_id);
        if self.split.is_train(v) {
            Ok(())
        } else {
            Err(Error::contract(format!("leakage: training unit `{unit_id}` is not from a training video")))
        }
    }

    fn assert_test(&self, unit_id: &str) -> Result<()> {
        let v = unit_video(unit_id);
        if self.split.is_test(v) {
            Ok(())
        } else {
            Err(Error::contract(format!("leakage: scored unit `{unit_id}` is not from a test video")))
        }
    }
}

/// Validate the config, load and label the manifest, split, and write `split.json`.
pub fn prepare(config: &ExperimentConfig) -> Result<Workspace> {
    config.validate()?;
    let config = config.effective();
    let records = load_manifest(&config.manifest)?;
    let base = config.manifest.parent().unwrap_or(Path::new("."));
    let mut records: Vec<VideoRecord> = records.iter().map(|r| r.resolve(base)).collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    for r in &records {
        for p in [&r.media_path, &r.transcript_path] {
            if !p.exists() {
                return Err(Error::data(format!("record `{}`: {} does not exist", r.id, p.display())));
            }
        }
    }
    let labeled = assign_labels(&records, &config.dataset)?;
    let split = match config.dataset.n_folds {
        Some(_) => make_fold(&labeled, &config.dataset, config.fold)?,
        None => make_split(&labeled, &config.dataset)?,
    };
    let first = records.first().map(|r| r.dataset_tag);
    let dataset = first.filter(|&t| records.iter().all(|r| r.dataset_tag == t));
    let out_dir = config.out_dir.clone();
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let split_path = out_dir.join("split.json");
    fs::write(&split_path, split.to_json()).map_err(|e| Error::io(&split_path, e))?;
    Ok(Workspace {
        cache_dir: config.resolved_cache_dir(),
        labels: labeled.into_iter().collect(),
        records,
        split,
        out_dir,
        dataset,
        config,
    })
}

/// Map over items on a small scoped worker pool, keeping input order. The
/// first error by input position wins.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).clamp(1, 8);
    if workers == 1 || items.len() < 2 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let f = &f;
    let parts: Vec<Vec<Result<R>>> = std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(f).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    parts.into_iter().flatten().collect()
}

fn ingest_key(ws: &Workspace, rec: &VideoRecord) -> Result<String> {
    let bytes = fs::read(&rec.media_path).map_err(|e| Error::io(&rec.media_path, e))?;
    let cfg = serde_json::to_vec(&ws.config.ingest).expect("ingest config serializes");
    Ok(seed::content_hash(&[b"ingest/v1", &bytes, &cfg]))
}

fn ingest_one(ws: &Workspace, rec: &VideoRecord) -> Result<String> {
    let key = ingest_key(ws, rec)?;
    let dir = cache::video_dir(&ws.cache_dir, &rec.id);
    let key_path = dir.join(INGEST_KEY_FILE);
    if fs::read_to_string(&key_path).is_ok_and(|k| k.trim() == key) {
        return Ok(key);
    }
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let decoder = default_decoder();
    let frames = media::extract_frames(&rec.id, &rec.media_path, &decoder, &ws.config.ingest)?;
    let audio = media::extract_audio(&rec.id, &rec.media_path, &decoder, &ws.config.ingest)?;
    cache::write_frames(&ws.cache_dir, &frames)?;
    cache::write_audio(&ws.cache_dir, &audio)?;
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    // the key goes last so an interrupted ingest is redone
    fs::write(&key_path, &key).map_err(|e| Error::io(&key_path, e))?;
    Ok(key)
}

/// Decode every video into the frame/audio cache. Returns the ingest key per video.
pub fn ingest(ws: &Workspace) -> Result<BTreeMap<String, String>> {
    let keys = par_map(&ws.records, |r| ingest_one(ws, r).map_err(|e| e.in_stage("ingest", &r.id)))?;
    Ok(ws.records.iter().map(|r| r.id.clone()).zip(keys).collect())
}

fn read_ingest_key(ws: &Workspace, id: &str) -> Result<String> {
    let p = cache::video_dir(&ws.cache_dir, id).join(INGEST_KEY_FILE);
    fs::read_to_string(&p)
        .map(|s| s.trim().to_string())
        .map_err(|_| Error::data(format!("video `{id}` is not ingested; run ingest first")))
}

// ---- acoustic ----

fn acoustic_rows(ws: &Workspace, id: &str) -> Result<Vec<FeatureRow>> {
    let a = &ws.config.acoustic;
    let key = read_ingest_key(ws, id)?;
    let section = serde_json::to_vec(&(&a.features, &a.mel, acoustic::FORMAT_VERSION)).expect("serializes");
    let h = seed::content_hash(&[key.as_bytes(), &section]);
    let path = cache::video_dir(&ws.cache_dir, id).join(format!("acoustic-{}.jsonl", &h[..16]));
    if path.exists() {
        return acoustic::features::read_feature_cache(&path);
    }
    let clip = cache::read_audio(&ws.cache_dir, id)?;
    let rows = acoustic::chunk_audio(&clip, &a.features)?
        .iter()
        .map(|c| acoustic_features(c, &a.features, &a.mel))
        .collect::<Result<Vec<_>>>()?;
    acoustic::features::write_feature_cache(&path, &rows)?;
    Ok(rows)
}

/// Time-shifted copies of each chunk, for training only.
fn augmented_rows(ws: &Workspace, id: &str) -> Result<Vec<FeatureRow>> {
    let a = &ws.config.acoustic;
    if a.augment_copies == 0 {
        return Ok(Vec::new());
    }
    let clip = cache::read_audio(&ws.cache_dir, id)?;
    let mut out = Vec::new();
    for chunk in acoustic::chunk_audio(&clip, &a.features)? {
        for c in 0..a.augment_copies {
            let mut cfg = a.augment.clone();
            cfg.seed = seed::derive(a.augment.seed, &format!("copy{c}"));
            out.push(acoustic_features(&time_shift(&chunk, &cfg)?, &a.features, &a.mel)?);
        }
    }
    Ok(out)
}

fn feature_values(rows: &[FeatureRow]) -> Vec<(String, Vec<f64>)> {
    rows.iter()
        .filter_map(|r| r.values().map(|v| (r.clip_id().to_string(), v.to_vec())))
        .collect()
}

// ---- lexical ----

fn tokenized(rec: &VideoRecord) -> Result<TokenizedDocument> {
    let raw = load_transcript(&rec.id, &rec.transcript_path)?;
    Ok(normalize_text(&raw, &StopWords::english_v1(), &RuleLemmatizer::default()))
}

fn lexical_row(doc: &TokenizedDocument, features: LexicalFeatures, tfidf: &TfidfModel, emb: Option<&EmbeddingTable>) -> Option<Vec<f64>> {
    match (features, emb) {
        (LexicalFeatures::Counts, _) => Some(tfidf.counts(doc)).filter(|v| !v.is_zero()).map(|v| v.to_dense()),
        (LexicalFeatures::Tfidf, _) => Some(tfidf_transform(doc, tfidf)).filter(|v| !v.is_zero()).map(|v| v.to_dense()),
        (LexicalFeatures::Embedding, Some(e)) => {
            let d = embed_document(doc, tfidf, e);
            (!d.abstain).then_some(d.values)
        }
        (LexicalFeatures::Embedding, None) => None,
    }
}

// ---- visual ----

fn build_detector(ws: &Workspace) -> Result<Box<dyn FaceDetector>> {
    let v = &ws.config.visual;
    Ok(match v.detector {
        DetectorKind::FullFrame => Box::new(FullFrameDetector),
        DetectorKind::Replay => {
            let mut det = ReplayDetector::default();
            for r in &ws.records {
                let sidecar = r.media_path.with_extension("faces.jsonl");
                if sidecar.exists() {
                    det.insert(&r.id, read_detections(&sidecar)?);
                }
            }
            Box::new(det)
        }
        DetectorKind::Command => Box::new(CommandDetector {
            program: PathBuf::from(&v.detector_command[0]),
            args: v.detector_command[1..].to_vec(),
            version: v.detector_version.clone(),
            scratch_dir: ws.cache_dir.join("detector-scratch"),
        }),
    })
}

/// Keep `k` evenly spaced items.
fn subsample<T>(items: Vec<T>, k: Option<usize>) -> Vec<T> {
    match k {
        Some(k) if k < items.len() => {
            let n = items.len();
            let keep: Vec<usize> = (0..k).map(|i| i * n / k).collect();
            items
                .into_iter()
                .enumerate()
                .filter(|(i, _)| keep.binary_search(i).is_ok())
                .map(|(_, x)| x)
                .collect()
        }
        _ => items,
    }
}

fn visual_units(ws: &Workspace, id: &str, detector: &dyn FaceDetector, limit: Option<usize>) -> Result<Vec<Frame>> {
    let v = &ws.config.visual;
    read_ingest_key(ws, id)?;
    let frames = cache::read_frames(&ws.cache_dir, id)?;
    let detections = match v.preprocess.mode {
        VisualMode::FullFrame => Vec::new(),
        VisualMode::SingleFace => {
            let cache_dir = (v.detector == DetectorKind::Command).then_some(ws.cache_dir.as_path());
            detect_video_cached(&frames, detector, cache_dir)?
        }
    };
    Ok(subsample(select_frames(&frames, &detections, &v.preprocess), limit))
}

fn pixels(f: &Frame) -> Vec<f64> {
    f.pixels.data.iter().map(|&p| p as f64).collect()
}

// ---- training ----

/// Fitted preprocessing state that must travel with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Prep {
    Acoustic { norm: NormStats },
    Lexical { features: LexicalFeatures, tfidf: TfidfModel, embedding: Option<EmbeddingTable> },
    Visual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModality {
    pub modality: Modality,
    pub prep: Prep,
    pub model: Model,
    pub n_train_units: usize,
}

pub fn fit_model(spec: &ModelSpec, x: &[Vec<f64>], y: &[Label]) -> Result<Model> {
    Ok(match spec {
        ModelSpec::Svm(c) => Model::Svm(svm_train(x, y, c)?),
        ModelSpec::Mnb(c) => Model::Mnb(mnb_train(x, y, c)?),
        ModelSpec::Forest(c) => Model::Forest(forest_train(x, y, c)?),
        ModelSpec::Boost(c) => Model::Boost(boost_train(x, y, c)?),
        ModelSpec::Cnn(c) => Model::Cnn(cnn_train(x, y, c)?),
    })
}

fn train_units(ws: &Workspace, m: Modality) -> Result<(Prep, Vec<(String, Vec<f64>)>)> {
    let train: Vec<&VideoRecord> = ws.train_records().collect();
    match m {
        Modality::Acoustic => {
            let per_video = par_map(&train, |r| {
                let mut rows = acoustic_rows(ws, &r.id)?;
                rows.extend(augmented_rows(ws, &r.id)?);
                Ok(feature_values(&rows))
            })?;
            let units: Vec<(String, Vec<f64>)> = per_video.into_iter().flatten().collect();
            let raw: Vec<Vec<f64>> = units.iter().map(|u| u.1.clone()).collect();
            let norm = fit_normalizer(&raw, &ws.split.split_id())?;
            let scaled = apply_normalizer(&raw, &norm)?;
            let units = units.into_iter().zip(scaled).map(|((id, _), x)| (id, x)).collect();
            Ok((Prep::Acoustic { norm }, units))
        }
        Modality::Lexical => {
            let lx = &ws.config.lexical;
            let docs = train.iter().map(|r| tokenized(r)).collect::<Result<Vec<_>>>()?;
            let tfidf = tfidf_fit(&docs)?;
            let embedding = match lx.features {
                LexicalFeatures::Embedding => Some(train_word_embeddings(&docs, &lx.embedding)?),
                _ => None,
            };
            let units = docs
                .iter()
                .filter_map(|d| {
                    lexical_row(d, lx.features, &tfidf, embedding.as_ref()).map(|x| (format!("{}@doc", d.source_video), x))
                })
                .collect();
            Ok((
                Prep::Lexical {
                    features: lx.features,
                    tfidf,
                    embedding,
                },
                units,
            ))
        }
        Modality::Visual => {
            let detector = build_detector(ws)?;
            let limit = ws.config.visual.train_frames_per_video;
            let mut units = Vec::new();
            for r in &train {
                let frames = visual_units(ws, &r.id, detector.as_ref(), limit).map_err(|e| e.in_stage("features", &r.id))?;
                units.extend(frames.iter().map(|f| (f.unit_id(), pixels(f))));
            }
            Ok((Prep::Visual, units))
        }
    }
}

/// Fit preprocessing and the classifier on training videos only.
pub fn train(ws: &Workspace, m: Modality) -> Result<TrainedModality> {
    let (prep, units) = train_units(ws, m)?;
    for (id, _) in &units {
        ws.assert_train(id)?;
    }
    if units.is_empty() {
        return Err(Error::data(format!("no usable {m} training units")));
    }
    let y: Vec<Label> = units.iter().map(|(id, _)| ws.label(unit_video(id))).collect();
    let x: Vec<Vec<f64>> = units.into_iter().map(|(_, x)| x).collect();
    let model = fit_model(ws.config.model(m), &x, &y).map_err(|e| Error::Stage {
        stage: "train",
        video_id: m.to_string(),
        source: Box::new(e),
    })?;
    Ok(TrainedModality {
        modality: m,
        prep,
        model,
        n_train_units: x.len(),
    })
}

fn model_config_json(ws: &Workspace, m: Modality) -> serde_json::Value {
    serde_json::to_value(ws.config.model(m)).expect("model spec serializes")
}

pub fn save_trained(ws: &Workspace, t: &TrainedModality) -> Result<PathBuf> {
    let m = t.modality;
    let bytes = encode_artifact(
        &format!("pipeline/{m}"),
        model_config_json(ws, m),
        &ws.split.split_id(),
        ws.config.seed,
        t,
    );
    let path = ws.model_path(m);
    write_artifact(&path, &bytes)?;
    Ok(path)
}

/// Load a saved pipeline model, refusing one trained under another split or model config.
pub fn load_trained(ws: &Workspace, m: Modality) -> Result<TrainedModality> {
    let path = ws.model_path(m);
    let bytes = fs::read(&path).map_err(|_| Error::data(format!("no {m} model at {}; run train first", path.display())))?;
    let (header, t): (_, TrainedModality) = decode_artifact(&bytes, &format!("pipeline/{m}"))?;
    if header.split_id != ws.split.split_id() || header.config != model_config_json(ws, m) {
        return Err(Error::data(format!("{} was trained under a different split or config; rerun train", path.display())));
    }
    Ok(t)
}

// ---- scoring ----

fn score_video(ws: &Workspace, t: &TrainedModality, rec: &VideoRecord, detector: Option<&dyn FaceDetector>) -> Result<ModalityVerdict> {
    let m = t.modality;
    let units: Vec<(String, Vec<f64>)> = match &t.prep {
        Prep::Acoustic { norm } => {
            let units = feature_values(&acoustic_rows(ws, &rec.id)?);
            let raw: Vec<Vec<f64>> = units.iter().map(|u| u.1.clone()).collect();
            let scaled = apply_normalizer(&raw, norm)?;
            units.into_iter().zip(scaled).map(|((id, _), x)| (id, x)).collect()
        }
        Prep::Lexical {
            features,
            tfidf,
            embedding,
        } => {
            let doc = tokenized(rec)?;
            lexical_row(&doc, *features, tfidf, embedding.as_ref())
                .map(|x| (format!("{}@doc", rec.id), x))
                .into_iter()
                .collect()
        }
        Prep::Visual => {
            let detector = detector.expect("visual scoring has a detector");
            visual_units(ws, &rec.id, detector, ws.config.visual.eval_frames_per_video)?
                .iter()
                .map(|f| (f.unit_id(), pixels(f)))
                .collect()
        }
    };
    let mut preds: Vec<Prediction> = Vec::with_capacity(units.len());
    for (id, x) in &units {
        ws.assert_test(id)?;
        preds.push(t.model.predict(id, x)?);
    }
    aggregate_units(&preds, m, &rec.id)
}

/// One verdict per test video, sorted by video id.
pub fn score(ws: &Workspace, t: &TrainedModality) -> Result<Vec<ModalityVerdict>> {
    let test: Vec<&VideoRecord> = ws.test_records().collect();
    let detector = match t.modality {
        Modality::Visual => Some(build_detector(ws)?),
        _ => None,
    };
    let det = detector.as_deref();
    test.iter()
        .map(|r| score_video(ws, t, r, det).map_err(|e| e.in_stage("eval", &r.id)))
        .collect()
}

pub fn write_verdicts(path: &Path, verdicts: &[ModalityVerdict]) -> Result<()> {
    let mut buf = Vec::new();
    for v in verdicts {
        serde_json::to_writer(&mut buf, v).expect("verdict serializes");
        buf.push(b'\n');
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_verdicts(path: &Path) -> Result<Vec<ModalityVerdict>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::data(format!("{}: {e}", path.display()))))
        .collect()
}

/// Verdicts for every modality: read from `<out>/verdicts` for enabled ones,
/// abstentions for disabled ones.
pub fn load_all_verdicts(ws: &Workspace) -> Result<BTreeMap<Modality, Vec<ModalityVerdict>>> {
    let mut out = BTreeMap::new();
    for m in Modality::ALL {
        let v = if ws.config.section_enabled(m) {
            let p = ws.verdict_path(m);
            if !p.exists() {
                return Err(Error::data(format!("no {m} verdicts at {}; run eval first", p.display())));
            }
            read_verdicts(&p)?
        } else {
            ws.test_records().map(|r| ModalityVerdict::abstain(m, r.id.clone())).collect()
        };
        out.insert(m, v);
    }
    Ok(out)
}

// ---- fusion ----

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutcome {
    pub mode: FusionMode,
    pub fused: Vec<FusedVerdict>,
    /// Videos where every modality abstained.
    pub no_evidence: Vec<String>,
}

pub fn fuse(ws: &Workspace, verdicts: &BTreeMap<Modality, Vec<ModalityVerdict>>, mode: FusionMode) -> Result<FusionOutcome> {
    let mut by_video: BTreeMap<&str, Vec<ModalityVerdict>> = BTreeMap::new();
    for vs in verdicts.values() {
        for v in vs {
            if !ws.split.is_test(&v.video_id) {
                return Err(Error::contract(format!("verdict for non-test video `{}`", v.video_id)));
            }
            by_video.entry(v.video_id.as_str()).or_default().push(v.clone());
        }
    }
    let mut fused = Vec::new();
    let mut no_evidence = Vec::new();
    for r in ws.test_records() {
        let vs = by_video.get(r.id.as_str()).map_or(&[][..], Vec::as_slice);
        match vote(vs, mode) {
            Ok(f) => fused.push(f),
            Err(Error::Data(_)) => no_evidence.push(r.id.clone()),
            Err(e) => return Err(e.in_stage("fuse", &r.id)),
        }
    }
    Ok(FusionOutcome { mode, fused, no_evidence })
}

pub fn fused_path(ws: &Workspace) -> PathBuf {
    ws.out_dir.join("fused.jsonl")
}

pub fn write_fusion(ws: &Workspace, outcome: &FusionOutcome) -> Result<PathBuf> {
    let p = fused_path(ws);
    write_fused(&p, &outcome.fused)?;
    Ok(p)
}

/// Unit counts produced by the feature stage for one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub modality: Modality,
    pub n_videos: usize,
    pub n_units: usize,
    pub n_abstained_videos: usize,
}

/// Compute (and cache) per-video units without training anything.
pub fn features(ws: &Workspace, m: Modality) -> Result<FeatureSummary> {
    let per_video: Vec<usize> = match m {
        Modality::Acoustic => par_map(&ws.records, |r| {
            acoustic_rows(ws, &r.id)
                .map(|rows| feature_values(&rows).len())
                .map_err(|e| e.in_stage("features", &r.id))
        })?,
        Modality::Lexical => ws
            .records
            .iter()
            .map(|r| tokenized(r).map(|d| usize::from(!d.tokens.is_empty())).map_err(|e| e.in_stage("features", &r.id)))
            .collect::<Result<_>>()?,
        Modality::Visual => {
            let detector = build_detector(ws)?;
            ws.records
                .iter()
                .map(|r| {
                    visual_units(ws, &r.id, detector.as_ref(), None)
                        .map(|f| f.len())
                        .map_err(|e| e.in_stage("features", &r.id))
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(FeatureSummary {
        modality: m,
        n_videos: per_video.len(),
        n_units: per_video.iter().sum(),
        n_abstained_videos: per_video.iter().filter(|&&n| n == 0).count(),
    })
}
