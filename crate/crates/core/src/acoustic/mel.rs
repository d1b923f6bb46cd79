//! Mel scale, triangular filterbank and log-mel spectrogram.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dsp::{bin_frequencies, Spectrum};
use super::FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::media::AudioClip;

/// Power floor added before dB compression.
pub const POWER_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

pub fn power_to_db(p: f64) -> f64 {
    10.0 * (p + POWER_FLOOR).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    /// Defaults to Nyquist when absent.
    pub f_max: Option<f64>,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            sample_rate: 16_000,
            n_fft: 512,
            hop: 160,
            n_mels: 64,
            f_min: 0.0,
            f_max: None,
        }
    }
}

impl MelConfig {
    pub fn f_max(&self) -> f64 {
        self.f_max.unwrap_or(self.sample_rate as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.n_mels == 0 {
            return Err(Error::usage("n_mels must be at least 1"));
        }
        if self.n_fft < 2 || self.hop == 0 {
            return Err(Error::usage("n_fft must be >= 2 and hop positive"));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max() && self.f_max() <= nyquist) {
            return Err(Error::usage("mel band edges must satisfy 0 <= f_min < f_max <= sample_rate/2"));
        }
        Ok(())
    }
}

/// `n_mels` triangular filters over the one-sided spectrum of an `n_fft`
/// transform. Filter j rises from centre j-1 to a peak of 1 at centre j and
/// falls to zero at centre j+1; the n_mels + 2 centres are equally spaced in mel.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub centers_hz: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub bin_freqs: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32, f_min: f64, f_max: f64) -> MelFilterbank {
        let (m_lo, m_hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(m_lo + (m_hi - m_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_freqs = bin_frequencies(n_fft, sample_rate);
        let weights = (1..=n_mels)
            .map(|j| {
                let (lo, c, hi) = (edges[j - 1], edges[j], edges[j + 1]);
                bin_freqs
                    .iter()
                    .map(|&f| {
                        if f >= lo && f <= c {
                            (f - lo) / (c - lo)
                        } else if f > c && f <= hi {
                            (hi - f) / (hi - c)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        MelFilterbank {
            centers_hz: edges[1..=n_mels].to_vec(),
            weights,
            bin_freqs,
        }
    }

    pub fn from_config(cfg: &MelConfig) -> MelFilterbank {
        MelFilterbank::new(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.f_min, cfg.f_max())
    }

    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    /// Filter-weighted sums of a power spectrum.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Index of the filter whose peak is closest to `freq_hz`.
    pub fn nearest_band(&self, freq_hz: f64) -> usize {
        self.centers_hz
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - freq_hz).abs().total_cmp(&(b.1 - freq_hz).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// n_mels × T matrix of dB values, stored row-major (one row per mel band).
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub values: Vec<f64>,
    pub n_mels: usize,
    pub n_frames: usize,
    pub config: MelConfig,
    pub clip_id: String,
}

impl MelSpectrogram {
    #[inline]
    pub fn get(&self, band: usize, frame: usize) -> f64 {
        self.values[band * self.n_frames + frame]
    }

    #[inline]
    pub fn set(&mut self, band: usize, frame: usize, v: f64) {
        self.values[band * self.n_frames + frame] = v;
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Binary matrix (f64 LE, row-major) plus a JSON sidecar with the config.
    pub fn write(&self, matrix_path: &Path, sidecar_path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(matrix_path, buf).map_err(|e| Error::io(matrix_path, e))?;
        let sidecar = serde_json::json!({
            "format_version": FORMAT_VERSION,
            "clip_id": self.clip_id,
            "n_mels": self.n_mels,
            "n_frames": self.n_frames,
            "config": self.config,
        });
        fs::write(sidecar_path, serde_json::to_vec_pretty(&sidecar).expect("json"))
            .map_err(|e| Error::io(sidecar_path, e))
    }

    pub fn read(matrix_path: &Path, sidecar_path: &Path) -> Result<MelSpectrogram> {
        let text = fs::read(sidecar_path).map_err(|e| Error::io(sidecar_path, e))?;
        let side: serde_json::Value =
            serde_json::from_slice(&text).map_err(|e| Error::data(format!("mel sidecar: {e}")))?;
        if side["format_version"].as_u64() != Some(FORMAT_VERSION as u64) {
            return Err(Error::data("mel sidecar: unsupported format_version"));
        }
        let n_mels = side["n_mels"].as_u64().unwrap_or(0) as usize;
        let n_frames = side["n_frames"].as_u64().unwrap_or(0) as usize;
        let config: MelConfig = serde_json::from_value(side["config"].clone())
            .map_err(|e| Error::data(format!("mel sidecar config: {e}")))?;
        let bytes = fs::read(matrix_path).map_err(|e| Error::io(matrix_path, e))?;
        if bytes.len() != n_mels * n_frames * 8 {
            return Err(Error::data("mel matrix size does not match its sidecar"));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        Ok(MelSpectrogram {
            values,
            n_mels,
            n_frames,
            config,
            clip_id: side["clip_id"].as_str().unwrap_or_default().to_string(),
        })
    }
}

/// Mel-filtered power per frame (before dB), frames as rows.
pub fn mel_power_frames(samples: &[f64], cfg: &MelConfig, bank: &MelFilterbank) -> Vec<Vec<f64>> {
    let n_frames = 1 + (samples.len() - cfg.n_fft) / cfg.hop;
    let mut spec = Spectrum::new(cfg.n_fft);
    (0..n_frames)
        .map(|t| {
            let start = t * cfg.hop;
            bank.apply(&spec.power(&samples[start..start + cfg.n_fft]))
        })
        .collect()
}

pub fn mel_spectrogram(clip: &AudioClip, cfg: &MelConfig) -> Result<MelSpectrogram> {
    cfg.validate()?;
    if clip.sample_rate != cfg.sample_rate {
        return Err(Error::contract(format!(
            "clip sampled at {} Hz, mel config expects {} Hz",
            clip.sample_rate, cfg.sample_rate
        )));
    }
    if clip.samples.len() < cfg.n_fft {
        return Err(Error::data(format!(
            "clip of {} samples is shorter than n_fft = {}",
            clip.samples.len(),
            cfg.n_fft
        )));
    }
    let bank = MelFilterbank::from_config(cfg);
    let frames = mel_power_frames(&clip.samples, cfg, &bank);
    let n_frames = frames.len();
    let mut values = vec![0.0; cfg.n_mels * n_frames];
    for (t, col) in frames.iter().enumerate() {
        for (m, &p) in col.iter().enumerate() {
            values[m * n_frames + t] = power_to_db(p);
        }
    }
    Ok(MelSpectrogram {
        values,
        n_mels: cfg.n_mels,
        n_frames,
        config: cfg.clone(),
        clip_id: clip.clip_id(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mel_scale_anchors() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        assert_eq!(hz_to_mel(700.0), 2595.0 * 2f64.log10());
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
        for f in [0.0, 123.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_count_and_errors() {
        let cfg = MelConfig::default();
        let clip = AudioClip::new(vec![0.0; 16000], 16000, "v", 0.0).unwrap();
        let mel = mel_spectrogram(&clip, &cfg).unwrap();
        assert_eq!(mel.n_frames, 1 + (16000 - 512) / 160);
        assert!(mel.values.iter().all(|v| v.is_finite()));
        assert!((mel.get(0, 0) + 100.0).abs() < 1e-9);
        let short = AudioClip::new(vec![0.0; 100], 16000, "v", 0.0).unwrap();
        assert!(matches!(mel_spectrogram(&short, &cfg), Err(Error::Data(_))));
    }

    #[test]
    fn tone_lands_in_nearest_band() {
        let cfg = MelConfig::default();
        let samples: Vec<f64> = (0..16000)
            .map(|i| 0.5 * (2.0 * PI * 1000.0 * i as f64 / 16000.0).sin())
            .collect();
        let clip = AudioClip::new(samples, 16000, "tone", 0.0).unwrap();
        let mel = mel_spectrogram(&clip, &cfg).unwrap();
        let target = MelFilterbank::from_config(&cfg).nearest_band(1000.0);
        let interior = 1..mel.n_frames - 1;
        let hits = interior
            .clone()
            .filter(|&t| {
                let argmax = (0..mel.n_mels).max_by(|&a, &b| mel.get(a, t).total_cmp(&mel.get(b, t))).unwrap();
                argmax == target
            })
            .count();
        assert!(hits as f64 >= 0.9 * interior.len() as f64);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<f64> = (0..2000).map(|i| ((i as f64) * 0.01).sin() * 0.3).collect();
        let clip = AudioClip::new(samples, 16000, "c", 1.5).unwrap();
        let mel = mel_spectrogram(&clip, &MelConfig::default()).unwrap();
        let (m, s) = (dir.path().join("m.bin"), dir.path().join("m.json"));
        mel.write(&m, &s).unwrap();
        assert_eq!(MelSpectrogram::read(&m, &s).unwrap(), mel);
    }
}
