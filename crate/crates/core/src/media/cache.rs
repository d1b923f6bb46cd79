//! On-disk demux cache: `<cache>/<video>/frames/<centiseconds>.png` and
//! `<cache>/<video>/audio.raw` (a `rate=<Hz>` header line, then f32 LE mono).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{AudioClip, Frame, Image};
use crate::error::{Error, Result};

pub fn video_dir(cache_dir: &Path, video_id: &str) -> PathBuf {
    cache_dir.join(video_id)
}

fn frame_file_name(timestamp_s: f64) -> String {
    format!("{:08}.png", (timestamp_s * 100.0).round() as u64)
}

pub fn write_frames(cache_dir: &Path, frames: &[Frame]) -> Result<()> {
    for f in frames {
        let dir = video_dir(cache_dir, &f.source_video).join("frames");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join(frame_file_name(f.timestamp_s));
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), f.pixels.width as u32, f.pixels.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        w.write_image_data(&f.pixels.to_rgb8())
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn read_frames(cache_dir: &Path, video_id: &str) -> Result<Vec<Frame>> {
    let dir = video_dir(cache_dir, video_id).join("frames");
    let mut names: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    names.sort();
    let mut frames = Vec::with_capacity(names.len());
    for path in names {
        let centis: u64 = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::data(format!("{}: bad frame file name", path.display())))?;
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut reader = png::Decoder::new(std::io::BufReader::new(file))
            .read_info()
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| Error::data(format!("{}: image too large", path.display())))?;
        let mut buf = vec![0; size];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(Error::data(format!("{}: expected 8-bit RGB", path.display())));
        }
        let pixels = Image::from_rgb8(info.height as usize, info.width as usize, &buf[..info.buffer_size()])?;
        frames.push(Frame {
            pixels,
            timestamp_s: centis as f64 / 100.0,
            source_video: video_id.to_string(),
        });
    }
    Ok(frames)
}

pub fn write_audio(cache_dir: &Path, clip: &AudioClip) -> Result<()> {
    let dir = video_dir(cache_dir, &clip.source_video);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join("audio.raw");
    let mut buf = format!("rate={}\n", clip.sample_rate).into_bytes();
    for &s in &clip.samples {
        buf.extend_from_slice(&(s as f32).to_le_bytes());
    }
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&path, e))
}

pub fn read_audio(cache_dir: &Path, video_id: &str) -> Result<AudioClip> {
    let path = video_dir(cache_dir, video_id).join("audio.raw");
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::data(format!("{}: missing header", path.display())))?;
    let header = std::str::from_utf8(&bytes[..nl]).unwrap_or("");
    let rate: u32 = header
        .strip_prefix("rate=")
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| Error::data(format!("{}: bad header `{header}`", path.display())))?;
    let body = &bytes[nl + 1..];
    if body.len() % 4 != 0 {
        return Err(Error::data(format!("{}: truncated sample block", path.display())));
    }
    let samples = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    AudioClip::new(samples, rate, video_id, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_and_audio_round_trip_through_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let bytes: Vec<u8> = (0..2 * 3 * 3).map(|i| (i * 13) as u8).collect();
        let frames: Vec<Frame> = (0..3)
            .map(|k| Frame {
                pixels: Image::from_rgb8(2, 3, &bytes).unwrap(),
                timestamp_s: k as f64 * 0.1,
                source_video: "v1".into(),
            })
            .collect();
        write_frames(dir.path(), &frames).unwrap();
        assert!(dir.path().join("v1/frames/00000010.png").exists());
        let back = read_frames(dir.path(), "v1").unwrap();
        assert_eq!(back, frames);

        let clip = AudioClip::new(vec![0.25, -0.5, 1.0], 16000, "v1", 0.0).unwrap();
        write_audio(dir.path(), &clip).unwrap();
        let raw = fs::read(dir.path().join("v1/audio.raw")).unwrap();
        assert!(raw.starts_with(b"rate=16000\n"));
        assert_eq!(read_audio(dir.path(), "v1").unwrap(), clip);
    }
}
