//! Demuxing videos into timestamped frames and a mono audio track, and
//! loading transcripts.

pub mod cache;
pub mod decoder;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decoder::{default_decoder, FfmpegDecoder, MediaDecoder, PcmAudio, SynvDecoder, SynvWriter, VideoStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub frame_step_s: f64,
    pub target_sample_rate: u32,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            frame_step_s: 0.1,
            target_sample_rate: 16_000,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_step_s > 0.0 && self.frame_step_s.is_finite()) {
            return Err(Error::usage("frame_step_s must be positive"));
        }
        if self.target_sample_rate == 0 {
            return Err(Error::usage("target_sample_rate must be positive"));
        }
        Ok(())
    }
}

/// Row-major H×W×3 RGB image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Image> {
        if height == 0 || width == 0 {
            return Err(Error::data("image dimensions must be positive"));
        }
        if data.len() != height * width * 3 {
            return Err(Error::contract(format!(
                "image buffer holds {} values, expected {}",
                data.len(),
                height * width * 3
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::data("pixel values must lie in [0, 1]"));
        }
        Ok(Image { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Image {
        Image {
            height,
            width,
            data: vec![value; height * width * 3],
        }
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Image> {
        let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        Image::new(height, width, data)
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub pixels: Image,
    pub timestamp_s: f64,
    pub source_video: String,
}

impl Frame {
    pub fn unit_id(&self) -> String {
        format!("{}@{:.2}", self.source_video, self.timestamp_s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_video: String,
    pub start_s: f64,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_video: impl Into<String>, start_s: f64) -> Result<AudioClip> {
        if sample_rate == 0 {
            return Err(Error::data("sample_rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(Error::data("audio samples must be finite and within [-1, 1]"));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
            source_video: source_video.into(),
            start_s,
        })
    }

    pub fn clip_id(&self) -> String {
        format!("{}@{:.3}", self.source_video, self.start_s)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub text: String,
    pub source_video: String,
}

/// Number of sampling instants k·step strictly below `duration`.
pub fn frame_count(duration_s: f64, step_s: f64) -> usize {
    if duration_s <= 0.0 {
        return 0;
    }
    let ratio = duration_s / step_s;
    let nearest = ratio.round();
    if (ratio - nearest).abs() < 1e-9 {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

pub fn extract_frames(
    video_id: &str,
    path: &Path,
    decoder: &dyn MediaDecoder,
    config: &IngestConfig,
) -> Result<Vec<Frame>> {
    config.validate()?;
    let mut stream = decoder.open_video(path)?;
    let n = frame_count(stream.duration_s(), config.frame_step_s);
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * config.frame_step_s;
        let pixels = stream.frame_at(t)?;
        frames.push(Frame {
            pixels,
            timestamp_s: t,
            source_video: video_id.to_string(),
        });
    }
    Ok(frames)
}

/// Average interleaved channels down to mono.
pub fn downmix(pcm: &PcmAudio) -> Vec<f64> {
    let ch = pcm.channels.max(1);
    pcm.samples
        .chunks_exact(ch)
        .map(|frame| frame.iter().map(|&s| s as f64).sum::<f64>() / ch as f64)
        .collect()
}

/// Linear-interpolation resampler. Output length is round(n · to / from).
pub fn resample_linear(samples: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if samples.is_empty() {
        return Vec::new();
    }
    if from_rate == to_rate {
        return samples.to_vec();
    }
    let n_out = (samples.len() as f64 * to_rate as f64 / from_rate as f64).round() as usize;
    let last = samples.len() - 1;
    let ratio = from_rate as f64 / to_rate as f64;
    (0..n_out)
        .map(|i| {
            let pos = i as f64 * ratio;
            let j = (pos.floor() as usize).min(last);
            let frac = pos - j as f64;
            let next = samples[(j + 1).min(last)];
            samples[j] * (1.0 - frac) + next * frac
        })
        .collect()
}

pub fn extract_audio(
    video_id: &str,
    path: &Path,
    decoder: &dyn MediaDecoder,
    config: &IngestConfig,
) -> Result<AudioClip> {
    config.validate()?;
    let pcm = decoder.decode_audio(path)?;
    if pcm.sample_rate == 0 || pcm.channels == 0 {
        return Err(Error::data(format!("{}: no usable audio stream", path.display())));
    }
    let mono = downmix(&pcm);
    let samples = resample_linear(&mono, pcm.sample_rate, config.target_sample_rate)
        .into_iter()
        .map(|s| if s.is_finite() { s.clamp(-1.0, 1.0) } else { 0.0 })
        .collect();
    AudioClip::new(samples, config.target_sample_rate, video_id, 0.0)
}

pub fn load_transcript(video_id: &str, path: &Path) -> Result<RawDocument> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::data(format!("{}: invalid UTF-8 ({e})", path.display())))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let text = text.replace("\r\n", "\n").replace('\r', "\n");
    Ok(RawDocument {
        text,
        source_video: video_id.to_string(),
    })
}
