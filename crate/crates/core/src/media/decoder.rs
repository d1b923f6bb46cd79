//! Pluggable media decoding.
//!
//! [`SynvDecoder`] reads the small uncompressed container written by the
//! synthetic corpus generator. [`FfmpegDecoder`] shells out to the system
//! `ffmpeg`/`ffprobe` tools for real recordings.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::Image;
use crate::error::{Error, Result};

/// Interleaved PCM as decoded from the container.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmAudio {
    pub sample_rate: u32,
    pub channels: usize,
    pub samples: Vec<f32>,
}

pub trait VideoStream {
    fn duration_s(&self) -> f64;
    /// The frame displayed at time `t` (seconds from the start).
    fn frame_at(&mut self, t: f64) -> Result<Image>;
}

/// One instance per worker; implementations need not be `Sync`.
pub trait MediaDecoder: Send {
    fn name(&self) -> &str;
    fn open_video(&self, path: &Path) -> Result<Box<dyn VideoStream>>;
    fn decode_audio(&self, path: &Path) -> Result<PcmAudio>;
}

const SYNV_MAGIC: &[u8] = b"SYNV1\n";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SynvHeader {
    width: usize,
    height: usize,
    fps: f64,
    n_frames: usize,
    sample_rate: u32,
    channels: usize,
    n_samples: usize,
}

/// Builder for `.synv` files: magic line, JSON header line, RGB8 frames,
/// then little-endian f32 interleaved audio.
pub struct SynvWriter {
    header: SynvHeader,
    frames: Vec<u8>,
    audio: Vec<f32>,
}

impl SynvWriter {
    pub fn new(width: usize, height: usize, fps: f64, sample_rate: u32, channels: usize) -> Self {
        SynvWriter {
            header: SynvHeader {
                width,
                height,
                fps,
                n_frames: 0,
                sample_rate,
                channels,
                n_samples: 0,
            },
            frames: Vec::new(),
            audio: Vec::new(),
        }
    }

    pub fn push_frame(&mut self, rgb8: &[u8]) -> Result<()> {
        if rgb8.len() != self.header.width * self.header.height * 3 {
            return Err(Error::contract("frame buffer size does not match the container"));
        }
        self.frames.extend_from_slice(rgb8);
        self.header.n_frames += 1;
        Ok(())
    }

    pub fn push_audio(&mut self, interleaved: &[f32]) {
        self.audio.extend_from_slice(interleaved);
        self.header.n_samples = if self.header.channels == 0 {
            0
        } else {
            self.audio.len() / self.header.channels
        };
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.frames.len() + self.audio.len() * 4 + 256);
        out.extend_from_slice(SYNV_MAGIC);
        serde_json::to_writer(&mut out, &self.header).expect("header serializes");
        out.push(b'\n');
        out.extend_from_slice(&self.frames);
        for s in &self.audio {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

struct SynvFile {
    header: SynvHeader,
    body: Vec<u8>,
}

impl SynvFile {
    fn read(path: &Path) -> Result<SynvFile> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let corrupt = |why: &str| Error::data(format!("{}: undecodable media ({why})", path.display()));
        let rest = bytes.strip_prefix(SYNV_MAGIC).ok_or_else(|| corrupt("bad magic"))?;
        let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| corrupt("truncated header"))?;
        let header: SynvHeader =
            serde_json::from_slice(&rest[..nl]).map_err(|e| corrupt(&e.to_string()))?;
        let body = rest[nl + 1..].to_vec();
        let frame_bytes = header.n_frames * header.width * header.height * 3;
        let audio_bytes = header.n_samples * header.channels * 4;
        if body.len() != frame_bytes + audio_bytes {
            return Err(corrupt("payload size mismatch"));
        }
        if header.n_frames > 0 && !(header.fps > 0.0) {
            return Err(corrupt("non-positive frame rate"));
        }
        Ok(SynvFile { header, body })
    }
}

struct SynvVideo {
    file: SynvFile,
}

impl VideoStream for SynvVideo {
    fn duration_s(&self) -> f64 {
        let h = &self.file.header;
        if h.n_frames == 0 {
            0.0
        } else {
            h.n_frames as f64 / h.fps
        }
    }

    fn frame_at(&mut self, t: f64) -> Result<Image> {
        let h = &self.file.header;
        if h.n_frames == 0 {
            return Err(Error::data("video stream has no frames"));
        }
        let idx = ((t * h.fps + 1e-9).floor().max(0.0) as usize).min(h.n_frames - 1);
        let size = h.width * h.height * 3;
        Image::from_rgb8(h.height, h.width, &self.file.body[idx * size..(idx + 1) * size])
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SynvDecoder;

impl MediaDecoder for SynvDecoder {
    fn name(&self) -> &str {
        "synv"
    }

    fn open_video(&self, path: &Path) -> Result<Box<dyn VideoStream>> {
        Ok(Box::new(SynvVideo {
            file: SynvFile::read(path)?,
        }))
    }

    fn decode_audio(&self, path: &Path) -> Result<PcmAudio> {
        let file = SynvFile::read(path)?;
        let h = &file.header;
        if h.channels == 0 || h.sample_rate == 0 || h.n_samples == 0 {
            return Err(Error::data(format!("{}: no audio stream", path.display())));
        }
        let offset = h.n_frames * h.width * h.height * 3;
        let samples = file.body[offset..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(PcmAudio {
            sample_rate: h.sample_rate,
            channels: h.channels,
            samples,
        })
    }
}

/// Adapter over the system `ffmpeg` and `ffprobe` binaries.
#[derive(Debug, Clone)]
pub struct FfmpegDecoder {
    pub ffmpeg: String,
    pub ffprobe: String,
}

impl Default for FfmpegDecoder {
    fn default() -> Self {
        FfmpegDecoder {
            ffmpeg: "ffmpeg".into(),
            ffprobe: "ffprobe".into(),
        }
    }
}

fn run_tool(program: &str, args: &[&str], unit: &Path) -> Result<Vec<u8>> {
    let out = Command::new(program).args(args).output().map_err(|e| Error::Component {
        component: program.to_string(),
        unit: unit.display().to_string(),
        message: e.to_string(),
    })?;
    if !out.status.success() {
        return Err(Error::data(format!(
            "{}: undecodable media ({})",
            unit.display(),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(out.stdout)
}

struct FfmpegVideo {
    decoder: FfmpegDecoder,
    path: std::path::PathBuf,
    width: usize,
    height: usize,
    duration: f64,
}

impl VideoStream for FfmpegVideo {
    fn duration_s(&self) -> f64 {
        self.duration
    }

    fn frame_at(&mut self, t: f64) -> Result<Image> {
        let ts = format!("{t:.3}");
        let path = self.path.to_string_lossy().into_owned();
        let raw = run_tool(
            &self.decoder.ffmpeg,
            &["-v", "error", "-ss", &ts, "-i", &path, "-frames:v", "1", "-f", "rawvideo", "-pix_fmt", "rgb24", "-"],
            &self.path,
        )?;
        if raw.len() != self.width * self.height * 3 {
            return Err(Error::data(format!("{}: short frame at {ts}s", self.path.display())));
        }
        Image::from_rgb8(self.height, self.width, &raw)
    }
}

impl MediaDecoder for FfmpegDecoder {
    fn name(&self) -> &str {
        "ffmpeg"
    }

    fn open_video(&self, path: &Path) -> Result<Box<dyn VideoStream>> {
        let p = path.to_string_lossy().into_owned();
        let probe = run_tool(
            &self.ffprobe,
            &[
                "-v", "error", "-select_streams", "v:0", "-show_entries", "stream=width,height:format=duration",
                "-of", "json", &p,
            ],
            path,
        )?;
        let v: serde_json::Value =
            serde_json::from_slice(&probe).map_err(|e| Error::data(format!("ffprobe output: {e}")))?;
        let stream = &v["streams"][0];
        let width = stream["width"].as_u64().unwrap_or(0) as usize;
        let height = stream["height"].as_u64().unwrap_or(0) as usize;
        let duration = v["format"]["duration"]
            .as_str()
            .and_then(|s| s.parse::<f64>().ok())
            .unwrap_or(0.0);
        if width == 0 || height == 0 {
            return Err(Error::data(format!("{}: no video stream", path.display())));
        }
        Ok(Box::new(FfmpegVideo {
            decoder: self.clone(),
            path: path.to_path_buf(),
            width,
            height,
            duration,
        }))
    }

    fn decode_audio(&self, path: &Path) -> Result<PcmAudio> {
        let p = path.to_string_lossy().into_owned();
        let probe = run_tool(
            &self.ffprobe,
            &["-v", "error", "-select_streams", "a:0", "-show_entries", "stream=sample_rate,channels", "-of", "json", &p],
            path,
        )?;
        let v: serde_json::Value =
            serde_json::from_slice(&probe).map_err(|e| Error::data(format!("ffprobe output: {e}")))?;
        let stream = &v["streams"][0];
        let sample_rate = stream["sample_rate"].as_str().and_then(|s| s.parse().ok()).unwrap_or(0u32);
        let channels = stream["channels"].as_u64().unwrap_or(0) as usize;
        if sample_rate == 0 || channels == 0 {
            return Err(Error::data(format!("{}: no audio stream", path.display())));
        }
        let raw = run_tool(&self.ffmpeg, &["-v", "error", "-i", &p, "-vn", "-f", "f32le", "-acodec", "pcm_f32le", "-"], path)?;
        let samples = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(PcmAudio {
            sample_rate,
            channels,
            samples,
        })
    }
}

/// Dispatches `.synv` files to the in-process reader and everything else to ffmpeg.
#[derive(Debug, Default, Clone)]
pub struct AutoDecoder {
    pub ffmpeg: FfmpegDecoder,
}

impl AutoDecoder {
    fn pick(&self, path: &Path) -> &dyn MediaDecoder {
        if path.extension().is_some_and(|e| e == "synv") {
            &SynvDecoder
        } else {
            &self.ffmpeg
        }
    }
}

impl MediaDecoder for AutoDecoder {
    fn name(&self) -> &str {
        "auto"
    }

    fn open_video(&self, path: &Path) -> Result<Box<dyn VideoStream>> {
        self.pick(path).open_video(path)
    }

    fn decode_audio(&self, path: &Path) -> Result<PcmAudio> {
        self.pick(path).decode_audio(path)
    }
}

pub fn default_decoder() -> AutoDecoder {
    AutoDecoder::default()
}
