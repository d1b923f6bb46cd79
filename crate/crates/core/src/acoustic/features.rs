//! The fixed 25-slot acoustic descriptor.
//!
//! Layout: `[0..12)` mean chroma (C..B), `[12..21)` mean log mel-band energy
//! over 9 bands, `[21]` mean zero-crossing rate, `[22]` mean RMS, `[23]` mean
//! spectral rolloff (Hz), `[24]` mean spectral bandwidth (Hz).
//!
//! Chroma, rolloff and bandwidth are averaged over frames with spectral
//! energy; the other slots over every frame. A clip with no energetic frame
//! yields [`FeatureRow::Abstain`].

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dsp::{self, Spectrum};
use super::mel::{power_to_db, MelConfig, MelFilterbank};
use super::{AcousticConfig, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::media::AudioClip;

pub const FEATURE_DIM: usize = 25;
pub const CHROMA_SLOTS: usize = 12;
pub const MEL_SLOTS: usize = 9;
pub const ZCR_SLOT: usize = 21;
pub const RMS_SLOT: usize = 22;
pub const ROLLOFF_SLOT: usize = 23;
pub const BANDWIDTH_SLOT: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcousticFeatureVector {
    pub values: [f64; FEATURE_DIM],
    pub clip_id: String,
    pub start_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureRow {
    Features(AcousticFeatureVector),
    Abstain { clip_id: String, start_s: f64 },
}

impl FeatureRow {
    pub fn values(&self) -> Option<&[f64; FEATURE_DIM]> {
        match self {
            FeatureRow::Features(v) => Some(&v.values),
            FeatureRow::Abstain { .. } => None,
        }
    }

    pub fn clip_id(&self) -> &str {
        match self {
            FeatureRow::Features(v) => &v.clip_id,
            FeatureRow::Abstain { clip_id, .. } => clip_id,
        }
    }
}

pub fn acoustic_features(clip: &AudioClip, acfg: &AcousticConfig, mcfg: &MelConfig) -> Result<FeatureRow> {
    acfg.validate()?;
    if clip.samples.len() < acfg.frame_len {
        return Err(Error::data(format!(
            "clip `{}` has {} samples, fewer than frame_len {}",
            clip.clip_id(),
            clip.samples.len(),
            acfg.frame_len
        )));
    }
    let f_max = mcfg.f_max.unwrap_or(clip.sample_rate as f64 / 2.0).min(clip.sample_rate as f64 / 2.0);
    let bank = MelFilterbank::new(MEL_SLOTS, acfg.frame_len, clip.sample_rate, mcfg.f_min, f_max);
    let freqs = dsp::bin_frequencies(acfg.frame_len, clip.sample_rate);
    let mut spectrum = Spectrum::new(acfg.frame_len);

    let n_frames = 1 + (clip.samples.len() - acfg.frame_len) / acfg.hop;
    let mut all = [0.0; FEATURE_DIM];
    let mut voiced_sum = [0.0; FEATURE_DIM];
    let mut n_voiced = 0usize;
    for t in 0..n_frames {
        let frame = &clip.samples[t * acfg.hop..t * acfg.hop + acfg.frame_len];
        all[ZCR_SLOT] += dsp::zero_crossing_rate(frame)?;
        all[RMS_SLOT] += dsp::rms(frame)?;
        let power = spectrum.power(frame);
        for (slot, p) in bank.apply(&power).into_iter().enumerate() {
            all[CHROMA_SLOTS + slot] += power_to_db(p);
        }
        let mags: Vec<f64> = power.iter().map(|p| p.sqrt()).collect();
        let (Ok(chroma), Ok(rolloff), Ok(bw)) = (
            dsp::chroma_profile(&mags, &freqs),
            dsp::spectral_rolloff(&mags, &freqs, acfg.rolloff_fraction),
            dsp::spectral_bandwidth(&mags, &freqs),
        ) else {
            continue;
        };
        n_voiced += 1;
        for (slot, c) in chroma.iter().enumerate() {
            voiced_sum[slot] += c;
        }
        voiced_sum[ROLLOFF_SLOT] += rolloff;
        voiced_sum[BANDWIDTH_SLOT] += bw;
    }
    if n_voiced == 0 {
        return Ok(FeatureRow::Abstain {
            clip_id: clip.clip_id(),
            start_s: clip.start_s,
        });
    }
    let mut values = [0.0; FEATURE_DIM];
    for slot in CHROMA_SLOTS..RMS_SLOT + 1 {
        values[slot] = all[slot] / n_frames as f64;
    }
    for slot in (0..CHROMA_SLOTS).chain([ROLLOFF_SLOT, BANDWIDTH_SLOT]) {
        values[slot] = voiced_sum[slot] / n_voiced as f64;
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("non-finite acoustic feature in `{}`", clip.clip_id())));
    }
    Ok(FeatureRow::Features(AcousticFeatureVector {
        values,
        clip_id: clip.clip_id(),
        start_s: clip.start_s,
    }))
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    format_version: u32,
    clip_id: String,
    start_s: f64,
    values: Option<Vec<f64>>,
}

/// One line per clip: `{format_version, clip_id, start_s, values}`; abstaining
/// clips carry `values: null`.
pub fn write_feature_cache(path: &Path, rows: &[FeatureRow]) -> Result<()> {
    let mut buf = Vec::new();
    for row in rows {
        let line = match row {
            FeatureRow::Features(v) => CacheLine {
                format_version: FORMAT_VERSION,
                clip_id: v.clip_id.clone(),
                start_s: v.start_s,
                values: Some(v.values.to_vec()),
            },
            FeatureRow::Abstain { clip_id, start_s } => CacheLine {
                format_version: FORMAT_VERSION,
                clip_id: clip_id.clone(),
                start_s: *start_s,
                values: None,
            },
        };
        serde_json::to_writer(&mut buf, &line).expect("json");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_feature_cache(path: &Path) -> Result<Vec<FeatureRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let line: CacheLine =
                serde_json::from_str(l).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
            if line.format_version != FORMAT_VERSION {
                return Err(Error::data(format!("{}: unsupported format_version", path.display())));
            }
            Ok(match line.values {
                Some(v) => FeatureRow::Features(AcousticFeatureVector {
                    values: v
                        .try_into()
                        .map_err(|_| Error::data(format!("{}: feature row is not 25 wide", path.display())))?,
                    clip_id: line.clip_id,
                    start_s: line.start_s,
                }),
                None => FeatureRow::Abstain {
                    clip_id: line.clip_id,
                    start_s: line.start_s,
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, n: usize, rate: u32) -> AudioClip {
        let s = (0..n).map(|i| 0.5 * (2.0 * PI * freq * i as f64 / rate as f64).sin()).collect();
        AudioClip::new(s, rate, "sine", 0.0).unwrap()
    }

    #[test]
    fn silence_abstains() {
        let clip = AudioClip::new(vec![0.0; 4000], 16000, "quiet", 2.0).unwrap();
        let row = acoustic_features(&clip, &AcousticConfig::default(), &MelConfig::default()).unwrap();
        assert!(matches!(row, FeatureRow::Abstain { ref clip_id, .. } if clip_id == "quiet@2.000"));
    }

    #[test]
    fn a440_peaks_in_the_a_slot() {
        let row = acoustic_features(&sine(440.0, 8000, 16000), &AcousticConfig::default(), &MelConfig::default()).unwrap();
        let v = row.values().unwrap();
        let argmax = (0..12).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
        assert_eq!(argmax, 9);
        assert!(v[ZCR_SLOT] > 0.0 && v[ZCR_SLOT] < 0.1);
        assert!((v[RMS_SLOT] - 0.5 / 2f64.sqrt()).abs() < 0.01);
        assert!(v[ROLLOFF_SLOT] >= 400.0 && v[ROLLOFF_SLOT] <= 8000.0);
    }

    #[test]
    fn short_clip_is_rejected() {
        let clip = sine(440.0, 100, 16000);
        assert!(matches!(
            acoustic_features(&clip, &AcousticConfig::default(), &MelConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn feature_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        let rows = vec![
            acoustic_features(&sine(300.0, 4000, 16000), &AcousticConfig::default(), &MelConfig::default()).unwrap(),
            FeatureRow::Abstain { clip_id: "x@4.000".into(), start_s: 4.0 },
        ];
        write_feature_cache(&path, &rows).unwrap();
        assert_eq!(read_feature_cache(&path).unwrap(), rows);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn feature_vectors_respect_their_ranges(
            xs in prop::collection::vec(-1.0f64..=1.0, 512..3000),
        ) {
            let clip = AudioClip::new(xs, 16000, "fz", 0.0).unwrap();
            if let FeatureRow::Features(v) = acoustic_features(&clip, &AcousticConfig::default(), &MelConfig::default()).unwrap() {
                prop_assert_eq!(v.values.len(), FEATURE_DIM);
                prop_assert!(v.values.iter().all(|x| x.is_finite()));
                prop_assert!((0.0..=1.0).contains(&v.values[ZCR_SLOT]));
                prop_assert!(v.values[RMS_SLOT] >= 0.0);
                prop_assert!((0.0..=8000.0).contains(&v.values[ROLLOFF_SLOT]));
                prop_assert!(v.values[BANDWIDTH_SLOT] >= 0.0);
            }
        }
    }
}
