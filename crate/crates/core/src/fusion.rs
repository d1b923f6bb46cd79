//! Video-level aggregation of unit predictions and late-fusion voting.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::Prediction;
use crate::error::{Error, Result};
use crate::label::{Label, DECISION_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Acoustic,
    Lexical,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Visual, Modality::Acoustic, Modality::Lexical];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Visual => "visual",
            Modality::Acoustic => "acoustic",
            Modality::Lexical => "lexical",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::usage(format!("unknown modality `{s}` (expected visual, acoustic or lexical)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    HardMajority,
    SoftMean,
}

impl FusionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::HardMajority => "hard_majority",
            FusionMode::SoftMean => "soft_mean",
        }
    }
}

/// One modality's call on one video. `score` and `label` are `None` when it abstains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityVerdict {
    pub modality: Modality,
    pub video_id: String,
    pub score: Option<f64>,
    pub label: Option<Label>,
    pub n_units: usize,
}

impl ModalityVerdict {
    pub fn abstain(modality: Modality, video_id: impl Into<String>) -> Self {
        ModalityVerdict {
            modality,
            video_id: video_id.into(),
            score: None,
            label: None,
            n_units: 0,
        }
    }

    pub fn scored(modality: Modality, video_id: impl Into<String>, score: f64, n_units: usize) -> Self {
        ModalityVerdict {
            modality,
            video_id: video_id.into(),
            score: Some(score),
            label: Some(Label::from_score(score)),
            n_units,
        }
    }

    pub fn is_abstain(&self) -> bool {
        self.score.is_none()
    }

    fn confidence(&self) -> f64 {
        self.score.map_or(0.0, |s| (s - DECISION_THRESHOLD).abs())
    }
}

/// Video id of a unit id of the form `<video>@<unit>`.
pub fn unit_video(unit_id: &str) -> &str {
    unit_id.rsplit_once('@').map_or(unit_id, |(v, _)| v)
}

/// Mean unit score, thresholded; no units means abstain.
pub fn aggregate_units(preds: &[Prediction], modality: Modality, video_id: &str) -> Result<ModalityVerdict> {
    if let Some(p) = preds.iter().find(|p| unit_video(&p.unit_id) != video_id) {
        return Err(Error::contract(format!(
            "unit `{}` does not belong to video `{video_id}`",
            p.unit_id
        )));
    }
    if preds.is_empty() {
        return Ok(ModalityVerdict::abstain(modality, video_id));
    }
    let mean = preds.iter().map(|p| p.score).sum::<f64>() / preds.len() as f64;
    Ok(ModalityVerdict::scored(modality, video_id, mean, preds.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedVerdict {
    pub video_id: String,
    pub label: Label,
    pub mode: FusionMode,
    /// Mean of the non-abstaining scores (set in soft mode only).
    pub score: Option<f64>,
    /// True when two voters disagreed and confidence decided.
    pub tie_broken: bool,
    pub verdicts: Vec<ModalityVerdict>,
}

impl FusedVerdict {
    pub fn modality_score(&self, m: Modality) -> Option<f64> {
        self.verdicts.iter().find(|v| v.modality == m).and_then(|v| v.score)
    }
}

pub fn vote(verdicts: &[ModalityVerdict], mode: FusionMode) -> Result<FusedVerdict> {
    if verdicts.len() != 3 {
        return Err(Error::contract(format!("vote needs 3 verdicts, got {}", verdicts.len())));
    }
    let video_id = verdicts[0].video_id.clone();
    for m in Modality::ALL {
        if !verdicts.iter().any(|v| v.modality == m) {
            return Err(Error::contract(format!("no {m} verdict for video `{video_id}`")));
        }
    }
    if verdicts.iter().any(|v| v.video_id != video_id) {
        return Err(Error::contract("verdicts from different videos"));
    }
    // canonical order so the soft mean sums the same way for any input order
    let mut sorted = verdicts.to_vec();
    sorted.sort_by_key(|v| v.modality);
    let live: Vec<&ModalityVerdict> = sorted.iter().filter(|v| !v.is_abstain()).collect();
    if live.is_empty() {
        return Err(Error::data(format!("no evidence for video `{video_id}`: every modality abstained")));
    }
    let mut tie_broken = false;
    let mut score = None;
    let label = match mode {
        FusionMode::HardMajority => {
            let deceptive = live.iter().filter(|v| v.label == Some(Label::Deceptive)).count();
            let truthful = live.len() - deceptive;
            if deceptive != truthful {
                if deceptive > truthful {
                    Label::Deceptive
                } else {
                    Label::Truthful
                }
            } else {
                // two voters that disagree: the more confident one wins, exact ties go deceptive
                tie_broken = true;
                let (d, t): (Vec<&&ModalityVerdict>, Vec<_>) = live.iter().partition(|v| v.label == Some(Label::Deceptive));
                if t[0].confidence() > d[0].confidence() {
                    Label::Truthful
                } else {
                    Label::Deceptive
                }
            }
        }
        FusionMode::SoftMean => {
            let mean = live.iter().filter_map(|v| v.score).sum::<f64>() / live.len() as f64;
            score = Some(mean);
            Label::from_score(mean)
        }
    };
    Ok(FusedVerdict {
        video_id,
        label,
        mode,
        score,
        tie_broken,
        verdicts: sorted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityScores {
    pub visual: Option<f64>,
    pub acoustic: Option<f64>,
    pub lexical: Option<f64>,
}

/// One line of the fused output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedRecord {
    pub video_id: String,
    pub label: Label,
    pub mode: FusionMode,
    pub modality_scores: ModalityScores,
}

impl From<&FusedVerdict> for FusedRecord {
    fn from(v: &FusedVerdict) -> Self {
        FusedRecord {
            video_id: v.video_id.clone(),
            label: v.label,
            mode: v.mode,
            modality_scores: ModalityScores {
                visual: v.modality_score(Modality::Visual),
                acoustic: v.modality_score(Modality::Acoustic),
                lexical: v.modality_score(Modality::Lexical),
            },
        }
    }
}

pub fn write_fused(path: &Path, verdicts: &[FusedVerdict]) -> Result<()> {
    let mut buf = Vec::new();
    for v in verdicts {
        serde_json::to_writer(&mut buf, &FusedRecord::from(v)).expect("fused record serializes");
        buf.push(b'\n');
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

pub fn read_fused(path: &Path) -> Result<Vec<FusedRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), n + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn preds(video: &str, scores: &[f64]) -> Vec<Prediction> {
        scores
            .iter()
            .enumerate()
            .map(|(k, &s)| Prediction::new(format!("{video}@{k}"), s))
            .collect()
    }

    fn verdict(m: Modality, score: Option<f64>) -> ModalityVerdict {
        match score {
            Some(s) => ModalityVerdict::scored(m, "v", s, 1),
            None => ModalityVerdict::abstain(m, "v"),
        }
    }

    fn three(scores: [Option<f64>; 3]) -> Vec<ModalityVerdict> {
        Modality::ALL.iter().zip(scores).map(|(&m, s)| verdict(m, s)).collect()
    }

    #[test]
    fn aggregation_examples() {
        let v = aggregate_units(&preds("a", &[0.2, 0.4, 0.9]), Modality::Acoustic, "a").unwrap();
        assert!((v.score.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(v.label, Some(Label::Deceptive));
        let v = aggregate_units(&preds("a", &[0.9, 0.9]), Modality::Visual, "a").unwrap();
        assert_eq!((v.score, v.n_units), (Some(0.9), 2));
        let v = aggregate_units(&[], Modality::Lexical, "a").unwrap();
        assert!(v.is_abstain() && v.label.is_none() && v.n_units == 0);
        let mut mixed = preds("a", &[0.1]);
        mixed.extend(preds("b", &[0.1]));
        assert!(matches!(aggregate_units(&mixed, Modality::Visual, "a"), Err(Error::Contract(_))));
    }

    #[test]
    fn majority_truth_table() {
        for bits in 0..8u8 {
            let scores = [0, 1, 2].map(|k| Some(if bits >> k & 1 == 1 { 0.8 } else { 0.2 }));
            let fused = vote(&three(scores), FusionMode::HardMajority).unwrap();
            let expected = if bits.count_ones() >= 2 { Label::Deceptive } else { Label::Truthful };
            assert_eq!(fused.label, expected, "bits {bits:03b}");
            assert!(!fused.tie_broken);
        }
    }

    #[test]
    fn abstention_patterns() {
        // one abstainer, four label pairs, three positions
        for gap in 0..3 {
            for (a, b) in [(0.9, 0.8), (0.1, 0.3), (0.1, 0.6), (0.7, 0.45)] {
                let mut s = [Some(a), Some(b), Some(b)];
                s[gap] = None;
                let others: Vec<f64> = s.iter().flatten().cloned().collect();
                let fused = vote(&three(s), FusionMode::HardMajority).unwrap();
                let (l0, l1) = (Label::from_score(others[0]), Label::from_score(others[1]));
                let expected = if l0 == l1 {
                    l0
                } else if (others[0] - 0.5).abs() > (others[1] - 0.5).abs() {
                    l0
                } else {
                    l1
                };
                assert_eq!(fused.label, expected);
                assert_eq!(fused.tie_broken, l0 != l1);
            }
        }
        let fused = vote(&three([Some(0.1), None, Some(0.6)]), FusionMode::HardMajority).unwrap();
        assert_eq!(fused.label, Label::Truthful);
        let even = vote(&three([Some(0.25), None, Some(0.75)]), FusionMode::HardMajority).unwrap();
        assert_eq!(even.label, Label::Deceptive);
        for k in 0..3 {
            let mut s = [None; 3];
            s[k] = Some(0.35);
            assert_eq!(vote(&three(s), FusionMode::HardMajority).unwrap().label, Label::Truthful);
        }
        assert!(matches!(vote(&three([None; 3]), FusionMode::SoftMean), Err(Error::Data(_))));
    }

    #[test]
    fn soft_mean_example() {
        let fused = vote(&three([Some(0.9), Some(0.9), Some(0.0)]), FusionMode::SoftMean).unwrap();
        assert!((fused.score.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(fused.label, Label::Deceptive);
        let hard = vote(&three([Some(0.9), Some(0.9), Some(0.0)]), FusionMode::HardMajority).unwrap();
        assert_eq!(hard.label, Label::Deceptive);
    }

    #[test]
    fn bad_verdict_sets() {
        let two = three([Some(0.1), Some(0.2), Some(0.3)])[..2].to_vec();
        assert!(matches!(vote(&two, FusionMode::HardMajority), Err(Error::Contract(_))));
        let mut dup = three([Some(0.1), Some(0.2), Some(0.3)]);
        dup[2].modality = Modality::Visual;
        assert!(matches!(vote(&dup, FusionMode::HardMajority), Err(Error::Contract(_))));
    }

    #[test]
    fn fused_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fused.jsonl");
        let fused = vec![vote(&three([Some(0.9), None, Some(0.2)]), FusionMode::HardMajority).unwrap()];
        write_fused(&path, &fused).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.trim(),
            r#"{"video_id":"v","label":"deceptive","mode":"hard_majority","modality_scores":{"visual":0.9,"acoustic":null,"lexical":0.2}}"#
        );
        assert_eq!(read_fused(&path).unwrap(), vec![FusedRecord::from(&fused[0])]);
    }

    fn opt_score() -> impl Strategy<Value = Option<f64>> {
        prop_oneof![Just(None), (0.0f64..=1.0).prop_map(Some), Just(Some(0.5))]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn vote_ignores_order(s in [opt_score(), opt_score(), opt_score()], perm in 0usize..6, soft in any::<bool>()) {
            prop_assume!(s.iter().any(Option::is_some));
            let mode = if soft { FusionMode::SoftMean } else { FusionMode::HardMajority };
            let base = three(s);
            let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let shuffled: Vec<_> = orders[perm].iter().map(|&k| base[k].clone()).collect();
            prop_assert_eq!(vote(&base, mode).unwrap(), vote(&shuffled, mode).unwrap());
        }

        #[test]
        fn soft_mean_is_monotone(s in [opt_score(), opt_score(), opt_score()], k in 0usize..3, bump in 0.0f64..1.0) {
            prop_assume!(s[k].is_some());
            let before = vote(&three(s), FusionMode::SoftMean).unwrap();
            let mut up = s;
            up[k] = up[k].map(|v| (v + bump).min(1.0));
            let after = vote(&three(up), FusionMode::SoftMean).unwrap();
            prop_assert!(!(before.label == Label::Deceptive && after.label == Label::Truthful));
        }
    }
}
