//! Acoustic pipeline: fixed-length clips, mel spectrograms, the 25-slot
//! spectral feature vector, augmentation and feature normalization.

pub mod augment;
pub mod dsp;
pub mod features;
pub mod mel;
pub mod normalize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::AudioClip;

pub use augment::{spec_augment, time_shift, AugmentConfig, MaskPlan};
pub use features::{acoustic_features, AcousticFeatureVector, FeatureRow, FEATURE_DIM};
pub use mel::{mel_spectrogram, MelConfig, MelFilterbank, MelSpectrogram};
pub use normalize::{apply_normalizer, fit_normalizer, NormStats};

/// Version tag written into every acoustic cache file.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcousticConfig {
    /// 4.0 for the classical feature path, 1.0 for spectrogram models.
    pub chunk_len_s: f64,
    pub remainder_keep_fraction: f64,
    pub frame_len: usize,
    pub hop: usize,
    pub rolloff_fraction: f64,
    pub n_mel_summary_bands: usize,
}

impl Default for AcousticConfig {
    fn default() -> Self {
        AcousticConfig {
            chunk_len_s: 4.0,
            remainder_keep_fraction: 0.5,
            frame_len: 512,
            hop: 160,
            rolloff_fraction: 0.85,
            n_mel_summary_bands: 9,
        }
    }
}

impl AcousticConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.chunk_len_s > 0.0) {
            return Err(Error::usage("chunk_len_s must be positive"));
        }
        if !(self.remainder_keep_fraction > 0.0 && self.remainder_keep_fraction <= 1.0) {
            return Err(Error::usage("remainder_keep_fraction must lie in (0, 1]"));
        }
        if self.hop == 0 || self.hop > self.frame_len || self.frame_len < 2 {
            return Err(Error::usage("need 0 < hop <= frame_len"));
        }
        if !(self.rolloff_fraction > 0.0 && self.rolloff_fraction < 1.0) {
            return Err(Error::usage("rolloff_fraction must lie in (0, 1)"));
        }
        if self.n_mel_summary_bands != features::MEL_SLOTS {
            return Err(Error::usage(format!(
                "the 25-slot feature layout needs exactly {} mel summary bands",
                features::MEL_SLOTS
            )));
        }
        Ok(())
    }
}

/// Append zeros until the clip holds exactly `target_len` samples.
pub fn pad_silence(clip: &AudioClip, target_len: usize) -> Result<AudioClip> {
    if clip.samples.len() > target_len {
        return Err(Error::contract(format!(
            "clip of {} samples cannot be padded down to {target_len}",
            clip.samples.len()
        )));
    }
    let mut out = clip.clone();
    out.samples.resize(target_len, 0.0);
    Ok(out)
}

/// Split into consecutive non-overlapping windows of `chunk_len_s`. A trailing
/// partial window survives (zero-padded) only if it covers at least
/// `remainder_keep_fraction` of a window.
pub fn chunk_audio(clip: &AudioClip, config: &AcousticConfig) -> Result<Vec<AudioClip>> {
    config.validate()?;
    if clip.samples.is_empty() {
        return Err(Error::data(format!("clip `{}` is empty", clip.clip_id())));
    }
    let len = (config.chunk_len_s * clip.sample_rate as f64).round() as usize;
    let rate = clip.sample_rate as f64;
    let mut out = Vec::new();
    for (i, window) in clip.samples.chunks(len).enumerate() {
        if window.len() < len && (window.len() as f64) < config.remainder_keep_fraction * len as f64 {
            break;
        }
        let chunk = AudioClip {
            samples: window.to_vec(),
            sample_rate: clip.sample_rate,
            source_video: clip.source_video.clone(),
            start_s: clip.start_s + (i * len) as f64 / rate,
        };
        out.push(pad_silence(&chunk, len)?);
    }
    Ok(out)
}
