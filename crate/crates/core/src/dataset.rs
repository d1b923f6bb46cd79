//! Dataset manifests, TruthProp labeling and video-level stratified splits.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetTag {
    Rlt,
    Mu3d,
    Synthetic,
}

/// One manifest entry. Paths are kept exactly as written; see [`VideoRecord::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub id: String,
    #[serde(rename = "dataset")]
    pub dataset_tag: DatasetTag,
    #[serde(rename = "media")]
    pub media_path: PathBuf,
    #[serde(rename = "transcript")]
    pub transcript_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_prop: Option<f64>,
    #[serde(rename = "speaker", default, skip_serializing_if = "Option::is_none")]
    pub speaker_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

impl VideoRecord {
    /// Join relative media/transcript paths onto `base` (normally the manifest's directory).
    pub fn resolve(&self, base: &Path) -> VideoRecord {
        let join = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        VideoRecord {
            media_path: join(&self.media_path),
            transcript_path: join(&self.transcript_path),
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::data("record with empty id"));
        }
        if let Some(tp) = self.truth_prop {
            if !(0.0..=1.0).contains(&tp) {
                return Err(Error::data(format!(
                    "record `{}`: truth_prop {tp} outside [0, 1]",
                    self.id
                )));
            }
        }
        if matches!(self.dataset_tag, DatasetTag::Rlt | DatasetTag::Synthetic) && self.label.is_none() {
            return Err(Error::data(format!(
                "record `{}`: {:?} records must carry a label",
                self.id, self.dataset_tag
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// TruthProp at or above this value labels an MU3D video truthful.
    pub mu3d_truth_threshold: f64,
    pub test_fraction: f64,
    pub n_folds: Option<usize>,
    pub split_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            mu3d_truth_threshold: 0.70,
            test_fraction: 0.2,
            n_folds: None,
            split_seed: 7,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu3d_truth_threshold > 0.0 && self.mu3d_truth_threshold < 1.0) {
            return Err(Error::usage("mu3d_truth_threshold must lie in (0, 1)"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::usage("test_fraction must lie in (0, 1)"));
        }
        if matches!(self.n_folds, Some(k) if k < 2) {
            return Err(Error::usage("n_folds must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    #[serde(rename = "train")]
    pub train_ids: BTreeSet<String>,
    #[serde(rename = "test")]
    pub test_ids: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_index: Option<usize>,
}

impl SplitPlan {
    /// Short content id used to tag artifacts fitted on this split.
    pub fn split_id(&self) -> String {
        let json = serde_json::to_vec(self).expect("split plan serializes");
        seed::content_hash(&[&json])[..16].to_string()
    }

    pub fn is_train(&self, id: &str) -> bool {
        self.train_ids.contains(id)
    }

    pub fn is_test(&self, id: &str) -> bool {
        self.test_ids.contains(id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("split plan serializes")
    }

    pub fn from_json(s: &str) -> Result<SplitPlan> {
        let plan: SplitPlan =
            serde_json::from_str(s).map_err(|e| Error::data(format!("split plan: {e}")))?;
        if let Some(id) = plan.train_ids.intersection(&plan.test_ids).next() {
            return Err(Error::data(format!("split plan lists `{id}` on both sides")));
        }
        Ok(plan)
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<VideoRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let rec: VideoRecord = serde_json::from_str(line)
            .map_err(|e| Error::data(format!("manifest line {}: {e}", lineno + 1)))?;
        rec.validate()?;
        if !seen.insert(rec.id.clone()) {
            return Err(Error::data(format!("duplicate video id `{}`", rec.id)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<Vec<VideoRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn write_manifest(path: &Path, records: &[VideoRecord]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("record serializes");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn label_mu3d(truth_prop: f64, config: &DatasetConfig) -> Label {
    debug_assert!((0.0..=1.0).contains(&truth_prop));
    if truth_prop >= config.mu3d_truth_threshold {
        Label::Truthful
    } else {
        Label::Deceptive
    }
}

/// Resolve every record's label. MU3D records are labeled from TruthProp
/// whenever it is present; any other record must already carry a label.
pub fn assign_labels(records: &[VideoRecord], config: &DatasetConfig) -> Result<Vec<(String, Label)>> {
    records
        .iter()
        .map(|r| {
            let label = match (r.dataset_tag, r.truth_prop, r.label) {
                (DatasetTag::Mu3d, Some(tp), _) => label_mu3d(tp, config),
                (_, _, Some(l)) => l,
                _ => {
                    return Err(Error::data(format!(
                        "record `{}` has neither a label nor a truth_prop",
                        r.id
                    )))
                }
            };
            Ok((r.id.clone(), label))
        })
        .collect()
}

fn shuffled_by_class(labeled: &[(String, Label)], split_seed: u64) -> Result<BTreeMap<Label, Vec<String>>> {
    let mut by_class: BTreeMap<Label, Vec<String>> = BTreeMap::new();
    for (id, label) in labeled {
        by_class.entry(*label).or_default().push(id.clone());
    }
    for label in Label::BOTH {
        let n = by_class.get(&label).map_or(0, Vec::len);
        if n < 2 {
            return Err(Error::data(format!(
                "split needs at least 2 {label} videos, manifest has {n}"
            )));
        }
    }
    // Shuffle rule: sort ids, then Fisher-Yates with a per-class stream.
    for (label, ids) in by_class.iter_mut() {
        ids.sort();
        let mut rng = seed::rng(split_seed, &format!("split/{label}"));
        ids.shuffle(&mut rng);
    }
    Ok(by_class)
}

/// Video-level stratified train/test split.
pub fn make_split(labeled: &[(String, Label)], config: &DatasetConfig) -> Result<SplitPlan> {
    config.validate()?;
    let by_class = shuffled_by_class(labeled, config.split_seed)?;
    let mut plan = SplitPlan {
        seed: config.split_seed,
        train_ids: BTreeSet::new(),
        test_ids: BTreeSet::new(),
        fold_index: None,
    };
    for ids in by_class.values() {
        let n = ids.len();
        let n_test = ((n as f64 * config.test_fraction).round() as usize).clamp(1, n - 1);
        plan.test_ids.extend(ids[..n_test].iter().cloned());
        plan.train_ids.extend(ids[n_test..].iter().cloned());
    }
    Ok(plan)
}

/// Fold `fold_index` of a stratified k-fold partition: the i-th shuffled
/// video of each class goes to fold i mod k.
pub fn make_fold(labeled: &[(String, Label)], config: &DatasetConfig, fold_index: usize) -> Result<SplitPlan> {
    config.validate()?;
    let k = config
        .n_folds
        .ok_or_else(|| Error::usage("make_fold requires n_folds"))?;
    if fold_index >= k {
        return Err(Error::usage(format!("fold index {fold_index} out of range for {k} folds")));
    }
    let by_class = shuffled_by_class(labeled, config.split_seed)?;
    let mut plan = SplitPlan {
        seed: config.split_seed,
        train_ids: BTreeSet::new(),
        test_ids: BTreeSet::new(),
        fold_index: Some(fold_index),
    };
    for ids in by_class.values() {
        for (i, id) in ids.iter().enumerate() {
            if i % k == fold_index {
                plan.test_ids.insert(id.clone());
            } else {
                plan.train_ids.insert(id.clone());
            }
        }
    }
    if plan.test_ids.is_empty() {
        return Err(Error::data(format!("fold {fold_index} is empty; too few videos for {k} folds")));
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, label: Label) -> VideoRecord {
        VideoRecord {
            id: id.into(),
            dataset_tag: DatasetTag::Rlt,
            media_path: format!("{id}.mp4").into(),
            transcript_path: format!("{id}.txt").into(),
            label: Some(label),
            truth_prop: None,
            speaker_id: None,
            duration_s: None,
        }
    }

    fn labeled(n_dec: usize, n_tru: usize) -> Vec<(String, Label)> {
        (0..n_dec)
            .map(|i| (format!("d{i:03}"), Label::Deceptive))
            .chain((0..n_tru).map(|i| (format!("t{i:03}"), Label::Truthful)))
            .collect()
    }

    #[test]
    fn rlt_sized_manifest_loads_with_published_class_counts() {
        let records: Vec<_> = (0..121)
            .map(|i| rec(&format!("trial_{i:03}"), if i < 61 { Label::Deceptive } else { Label::Truthful }))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        write_manifest(&path, &records).unwrap();
        let loaded = load_manifest(&path).unwrap();
        assert_eq!(loaded.len(), 121);
        let dec = loaded.iter().filter(|r| r.label == Some(Label::Deceptive)).count();
        assert_eq!((dec, 121 - dec), (61, 60));
        assert_eq!(loaded, records);
    }

    #[test]
    fn empty_manifest_is_empty() {
        assert!(parse_manifest("").unwrap().is_empty());
        assert!(parse_manifest("\n\n").unwrap().is_empty());
    }

    #[test]
    fn manifest_errors() {
        let bad_tp = r#"{"id":"a","dataset":"mu3d","media":"a.mp4","transcript":"a.txt","truth_prop":1.3}"#;
        assert!(matches!(parse_manifest(bad_tp), Err(Error::Data(_))));
        let dup = r#"{"id":"a","dataset":"rlt","media":"a","transcript":"a","label":"truthful"}
{"id":"a","dataset":"rlt","media":"b","transcript":"b","label":"deceptive"}"#;
        match parse_manifest(dup) {
            Err(Error::Data(m)) => assert!(m.contains("`a`")),
            other => panic!("{other:?}"),
        }
        let unlabeled_rlt = r#"{"id":"a","dataset":"rlt","media":"a","transcript":"a"}"#;
        assert!(parse_manifest(unlabeled_rlt).is_err());
        let unlabeled_mu3d = r#"{"id":"a","dataset":"mu3d","media":"a","transcript":"a","truth_prop":0.4,"extra":1}"#;
        assert_eq!(parse_manifest(unlabeled_mu3d).unwrap().len(), 1);
        assert!(matches!(
            load_manifest(Path::new("/nonexistent/manifest.jsonl")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn mu3d_threshold() {
        let cfg = DatasetConfig::default();
        assert_eq!(label_mu3d(0.69, &cfg), Label::Deceptive);
        assert_eq!(label_mu3d(0.70, &cfg), Label::Truthful);
        assert_eq!(label_mu3d(1.0, &cfg), Label::Truthful);
        assert_eq!(label_mu3d(0.0, &cfg), Label::Deceptive);
    }

    #[test]
    fn assign_labels_prefers_truth_prop_for_mu3d() {
        let mut r = rec("m1", Label::Deceptive);
        r.dataset_tag = DatasetTag::Mu3d;
        r.truth_prop = Some(0.9);
        let out = assign_labels(&[r], &DatasetConfig::default()).unwrap();
        assert_eq!(out[0].1, Label::Truthful);
    }

    #[test]
    fn ten_record_split() {
        let cfg = DatasetConfig { split_seed: 7, ..Default::default() };
        let data = labeled(5, 5);
        let a = make_split(&data, &cfg).unwrap();
        let b = make_split(&data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.test_ids.len(), 2);
        assert_eq!(a.test_ids.iter().filter(|id| id.starts_with('d')).count(), 1);
        assert_eq!(a.train_ids.len(), 8);
    }

    #[test]
    fn rlt_sized_split_is_stratified() {
        let cfg = DatasetConfig { split_seed: 7, ..Default::default() };
        let plan = make_split(&labeled(61, 60), &cfg).unwrap();
        let dec = plan.test_ids.iter().filter(|id| id.starts_with('d')).count() as f64;
        let tru = plan.test_ids.iter().filter(|id| id.starts_with('t')).count() as f64;
        assert!((dec - 12.2).abs() <= 1.0 && (tru - 12.0).abs() <= 1.0);
        assert!((24..=25).contains(&plan.test_ids.len()));
        assert_eq!(plan.train_ids.len() + plan.test_ids.len(), 121);
    }

    #[test]
    fn single_class_is_rejected() {
        let cfg = DatasetConfig::default();
        assert!(matches!(make_split(&labeled(3, 0), &cfg), Err(Error::Data(_))));
    }

    #[test]
    fn folds_partition_the_manifest() {
        let cfg = DatasetConfig { n_folds: Some(5), ..Default::default() };
        let data = labeled(12, 11);
        let mut seen = BTreeSet::new();
        for f in 0..5 {
            let plan = make_fold(&data, &cfg, f).unwrap();
            assert!(plan.train_ids.is_disjoint(&plan.test_ids));
            for id in &plan.test_ids {
                assert!(seen.insert(id.clone()));
            }
        }
        assert_eq!(seen.len(), 23);
    }

    #[test]
    fn split_plan_json_shape() {
        let plan = make_split(&labeled(2, 2), &DatasetConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&plan.to_json()).unwrap();
        assert!(v.get("seed").is_some() && v["train"].is_array() && v["test"].is_array());
        assert_eq!(SplitPlan::from_json(&plan.to_json()).unwrap(), plan);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn label_mu3d_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let cfg = DatasetConfig::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if label_mu3d(lo, &cfg) == Label::Truthful {
                prop_assert_eq!(label_mu3d(hi, &cfg), Label::Truthful);
            }
        }

        #[test]
        fn manifest_round_trip(
            rows in prop::collection::vec(
                (any::<bool>(), prop::option::of(0.0f64..=1.0), prop::option::of(0.1f64..600.0)), 0..20)
        ) {
            let records: Vec<_> = rows.iter().enumerate().map(|(i, (dec, tp, dur))| {
                let mut r = rec(&format!("v{i}"), if *dec { Label::Deceptive } else { Label::Truthful });
                r.truth_prop = *tp;
                r.duration_s = *dur;
                r.speaker_id = if i % 2 == 0 { Some(format!("s{i}")) } else { None };
                r
            }).collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.jsonl");
            write_manifest(&path, &records).unwrap();
            prop_assert_eq!(load_manifest(&path).unwrap(), records);
        }
    }
}
