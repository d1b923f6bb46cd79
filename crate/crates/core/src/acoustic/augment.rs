//! Train-time augmentation: circular time shift on waveforms and stripe
//! masking on mel spectrograms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mel::MelSpectrogram;
use crate::error::{Error, Result};
use crate::media::AudioClip;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub max_shift_fraction: f64,
    pub n_freq_masks: usize,
    pub max_freq_width: usize,
    pub n_time_masks: usize,
    pub max_time_width: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            max_shift_fraction: 0.2,
            n_freq_masks: 1,
            max_freq_width: 8,
            n_time_masks: 1,
            max_time_width: 8,
            seed: 0,
        }
    }
}

/// Rotate right by `k` samples (left when negative).
pub fn time_shift_by(clip: &AudioClip, k: i64) -> AudioClip {
    let mut out = clip.clone();
    let n = out.samples.len() as i64;
    if n > 0 {
        let k = k.rem_euclid(n) as usize;
        out.samples.rotate_right(k);
    }
    out
}

/// The shift `time_shift` will apply to this clip under `config`.
pub fn draw_shift(clip: &AudioClip, config: &AugmentConfig) -> i64 {
    let max_shift = (config.max_shift_fraction.max(0.0) * clip.samples.len() as f64).floor() as i64;
    if max_shift == 0 {
        return 0;
    }
    let mut rng = seed::rng(config.seed, &format!("time_shift/{}", clip.clip_id()));
    rng.random_range(-max_shift..=max_shift)
}

pub fn time_shift(clip: &AudioClip, config: &AugmentConfig) -> Result<AudioClip> {
    if clip.samples.is_empty() {
        return Err(Error::data("cannot time-shift an empty clip"));
    }
    Ok(time_shift_by(clip, draw_shift(clip, config)))
}

/// Masked stripes as (start, width) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MaskPlan {
    pub freq: Vec<(usize, usize)>,
    pub time: Vec<(usize, usize)>,
}

impl MaskPlan {
    pub fn covers(&self, band: usize, frame: usize) -> bool {
        self.freq.iter().any(|&(s, w)| band >= s && band < s + w)
            || self.time.iter().any(|&(s, w)| frame >= s && frame < s + w)
    }
}

pub fn draw_masks(n_mels: usize, n_frames: usize, clip_id: &str, config: &AugmentConfig) -> Result<MaskPlan> {
    if config.n_freq_masks > 0 && config.max_freq_width >= n_mels {
        return Err(Error::contract("max_freq_width must be smaller than n_mels"));
    }
    if config.n_time_masks > 0 && config.max_time_width >= n_frames {
        return Err(Error::contract("max_time_width must be smaller than the frame count"));
    }
    let mut rng = seed::rng(config.seed, &format!("spec_augment/{clip_id}"));
    let mut stripe = |axis: usize, max_w: usize| {
        let w = rng.random_range(0..=max_w);
        let s = rng.random_range(0..=axis - w);
        (s, w)
    };
    let freq = (0..config.n_freq_masks).map(|_| stripe(n_mels, config.max_freq_width)).collect();
    let time = (0..config.n_time_masks).map(|_| stripe(n_frames, config.max_time_width)).collect();
    Ok(MaskPlan { freq, time })
}

/// Overwrite every masked cell with the mean of the unmasked input matrix.
pub fn apply_masks(mel: &MelSpectrogram, plan: &MaskPlan) -> MelSpectrogram {
    let fill = mel.mean();
    let mut out = mel.clone();
    for b in 0..mel.n_mels {
        for t in 0..mel.n_frames {
            if plan.covers(b, t) {
                out.set(b, t, fill);
            }
        }
    }
    out
}

pub fn spec_augment(mel: &MelSpectrogram, config: &AugmentConfig) -> Result<MelSpectrogram> {
    let plan = draw_masks(mel.n_mels, mel.n_frames, &mel.clip_id, config)?;
    Ok(apply_masks(mel, &plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::mel::MelConfig;
    use proptest::prelude::*;

    fn mel(n_mels: usize, n_frames: usize, salt: u64) -> MelSpectrogram {
        MelSpectrogram {
            values: (0..n_mels * n_frames).map(|i| ((i as u64 * 2654435761 + salt) % 1000) as f64 / 10.0 - 50.0).collect(),
            n_mels,
            n_frames,
            config: MelConfig::default(),
            clip_id: format!("clip{salt}"),
        }
    }

    #[test]
    fn shift_cases() {
        let c = AudioClip {
            samples: vec![1.0, 2.0, 3.0, 4.0],
            sample_rate: 4,
            source_video: "v".into(),
            start_s: 0.0,
        };
        assert_eq!(time_shift_by(&c, 1).samples, vec![4.0, 1.0, 2.0, 3.0]);
        assert_eq!(time_shift_by(&c, -1).samples, vec![2.0, 3.0, 4.0, 1.0]);
        let none = AugmentConfig { max_shift_fraction: 0.0, ..Default::default() };
        assert_eq!(time_shift(&c, &none).unwrap(), c);
    }

    #[test]
    fn masking_cases() {
        let m = mel(16, 20, 1);
        let none = AugmentConfig { n_freq_masks: 0, n_time_masks: 0, ..Default::default() };
        assert_eq!(spec_augment(&m, &none).unwrap(), m);

        let plan = MaskPlan { freq: vec![(3, 2)], time: vec![] };
        let out = apply_masks(&m, &plan);
        let mean = m.mean();
        let masked = out.values.iter().filter(|&&v| v == mean).count();
        assert_eq!(masked, 2 * 20);

        let too_wide = AugmentConfig { max_freq_width: 16, ..Default::default() };
        assert!(matches!(spec_augment(&m, &too_wide), Err(Error::Contract(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn time_shift_preserves_the_multiset(xs in prop::collection::vec(-1.0f64..=1.0, 1..300), seed in any::<u64>()) {
            let c = AudioClip::new(xs.clone(), 100, "fz", 0.0).unwrap();
            let cfg = AugmentConfig { seed, max_shift_fraction: 0.5, ..Default::default() };
            let s = time_shift(&c, &cfg).unwrap();
            prop_assert_eq!(&s, &time_shift(&c, &cfg).unwrap());
            let mut a = xs.clone();
            let mut b = s.samples.clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(&a, &b);
            let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
            prop_assert_eq!(rms(&a), rms(&b));
        }

        #[test]
        fn spec_augment_only_touches_planned_cells(
            n_mels in 4usize..40, n_frames in 4usize..60, salt in 0u64..1000, seed in any::<u64>(),
        ) {
            let m = mel(n_mels, n_frames, salt);
            let cfg = AugmentConfig {
                seed,
                n_freq_masks: 2,
                max_freq_width: n_mels / 2,
                n_time_masks: 2,
                max_time_width: n_frames / 2,
                ..Default::default()
            };
            let out = spec_augment(&m, &cfg).unwrap();
            prop_assert_eq!(&out, &spec_augment(&m, &cfg).unwrap());
            let plan = draw_masks(n_mels, n_frames, &m.clip_id, &cfg).unwrap();
            let mean = m.mean();
            for b in 0..n_mels {
                for t in 0..n_frames {
                    if plan.covers(b, t) {
                        prop_assert_eq!(out.get(b, t), mean);
                    } else {
                        prop_assert_eq!(out.get(b, t).to_bits(), m.get(b, t).to_bits());
                    }
                }
            }
        }
    }
}
