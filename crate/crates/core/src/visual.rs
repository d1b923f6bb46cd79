//! Face detection, single-face filtering, cropping and resizing of sampled frames.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media::{Frame, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualMode {
    SingleFace,
    FullFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisualConfig {
    pub image_size: usize,
    pub crop_margin: f64,
    pub mode: VisualMode,
}

impl Default for VisualConfig {
    fn default() -> Self {
        VisualConfig {
            image_size: 64,
            crop_margin: 0.2,
            mode: VisualMode::SingleFace,
        }
    }
}

impl VisualConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 8 {
            return Err(Error::usage(format!("image_size must be at least 8, got {}", self.image_size)));
        }
        if !(self.crop_margin >= 0.0 && self.crop_margin.is_finite()) {
            return Err(Error::usage("crop_margin must be a non-negative number"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
}

impl FaceBox {
    /// Intersect with the image rectangle. Boxes that end up empty are dropped.
    pub fn clamp(&self, width: usize, height: usize) -> Option<FaceBox> {
        let (wf, hf) = (width as f64, height as f64);
        let x0 = self.x.clamp(0.0, wf);
        let y0 = self.y.clamp(0.0, hf);
        let x1 = (self.x + self.w).clamp(0.0, wf);
        let y1 = (self.y + self.h).clamp(0.0, hf);
        let all_finite = [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite());
        (all_finite && x1 > x0 && y1 > y0).then(|| FaceBox {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
            confidence: self.confidence.clamp(0.0, 1.0),
        })
    }
}

/// A face detector. Implementations need not be thread-safe; use one per worker.
pub trait FaceDetector {
    fn name(&self) -> &str;
    fn version(&self) -> &str;
    fn detect(&self, frame: &Frame) -> Result<Vec<FaceBox>>;
}

/// Test detector driven by a closure over the frame.
pub struct StubDetector {
    rule: Box<dyn Fn(&Frame) -> Result<Vec<FaceBox>>>,
}

impl StubDetector {
    pub fn new(rule: impl Fn(&Frame) -> Result<Vec<FaceBox>> + 'static) -> Self {
        StubDetector { rule: Box::new(rule) }
    }

    pub fn fixed(boxes: Vec<FaceBox>) -> Self {
        Self::new(move |_| Ok(boxes.clone()))
    }
}

impl FaceDetector for StubDetector {
    fn name(&self) -> &str {
        "stub"
    }
    fn version(&self) -> &str {
        "1"
    }
    fn detect(&self, frame: &Frame) -> Result<Vec<FaceBox>> {
        (self.rule)(frame)
    }
}

/// Reports the whole frame as the single face.
#[derive(Debug, Default, Clone, Copy)]
pub struct FullFrameDetector;

impl FaceDetector for FullFrameDetector {
    fn name(&self) -> &str {
        "full_frame"
    }
    fn version(&self) -> &str {
        "1"
    }
    fn detect(&self, frame: &Frame) -> Result<Vec<FaceBox>> {
        Ok(vec![FaceBox {
            x: 0.0,
            y: 0.0,
            w: frame.pixels.width as f64,
            h: frame.pixels.height as f64,
            confidence: 1.0,
        }])
    }
}

/// One line of a detection cache or `<video>.faces.jsonl` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub timestamp_s: f64,
    pub boxes: Vec<FaceBox>,
}

fn centis(t: f64) -> i64 {
    (t * 100.0).round() as i64
}

/// Replays recorded detections keyed by (video id, timestamp).
#[derive(Debug, Default, Clone)]
pub struct ReplayDetector {
    records: HashMap<(String, i64), Vec<FaceBox>>,
}

impl ReplayDetector {
    pub fn insert(&mut self, video_id: &str, records: Vec<DetectionRecord>) {
        for r in records {
            self.records.insert((video_id.to_string(), centis(r.timestamp_s)), r.boxes);
        }
    }

    /// Load `<dir>/<video>.faces.jsonl` for each listed video. Missing sidecars are skipped.
    pub fn from_sidecars<'a>(dir: &Path, video_ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut det = ReplayDetector::default();
        for id in video_ids {
            let path = dir.join(format!("{id}.faces.jsonl"));
            if path.exists() {
                det.insert(id, read_detections(&path)?);
            }
        }
        Ok(det)
    }
}

impl FaceDetector for ReplayDetector {
    fn name(&self) -> &str {
        "replay"
    }
    fn version(&self) -> &str {
        "1"
    }
    fn detect(&self, frame: &Frame) -> Result<Vec<FaceBox>> {
        self.records
            .get(&(frame.source_video.clone(), centis(frame.timestamp_s)))
            .cloned()
            .ok_or_else(|| Error::data("no recorded detection for this frame"))
    }
}

/// Adapter for an external detector program. It is invoked as `<program> <args..> <png>`
/// and must print a JSON array of `{x, y, w, h, confidence}` boxes on stdout.
#[derive(Debug, Clone)]
pub struct CommandDetector {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub version: String,
    pub scratch_dir: PathBuf,
}

impl FaceDetector for CommandDetector {
    fn name(&self) -> &str {
        "command"
    }
    fn version(&self) -> &str {
        &self.version
    }
    fn detect(&self, frame: &Frame) -> Result<Vec<FaceBox>> {
        let png = self
            .scratch_dir
            .join(format!("detect-{}-{}.png", std::process::id(), centis(frame.timestamp_s)));
        write_png(&png, &frame.pixels)?;
        let out = Command::new(&self.program).args(&self.args).arg(&png).output();
        let _ = fs::remove_file(&png);
        let out = out.map_err(|e| Error::io(&self.program, e))?;
        if !out.status.success() {
            return Err(Error::data(format!(
                "detector exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        serde_json::from_slice(&out.stdout).map_err(|e| Error::data(format!("unparseable detector output: {e}")))
    }
}

fn write_png(path: &Path, img: &Image) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    enc.write_header()
        .and_then(|mut w| w.write_image_data(&img.to_rgb8()))
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Run the detector on one frame and clamp its boxes to the image.
pub fn detect_faces(frame: &Frame, detector: &dyn FaceDetector) -> Result<Vec<FaceBox>> {
    let boxes = detector.detect(frame).map_err(|e| Error::Component {
        component: format!("face detector `{}`", detector.name()),
        unit: frame.unit_id(),
        message: e.to_string(),
    })?;
    Ok(boxes
        .iter()
        .filter_map(|b| b.clamp(frame.pixels.width, frame.pixels.height))
        .collect())
}

pub fn read_detections(path: &Path) -> Result<Vec<DetectionRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::data(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_detections(path: &Path, records: &[DetectionRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("detection record serializes");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn detection_cache_path(cache_dir: &Path, video_id: &str, detector: &dyn FaceDetector) -> PathBuf {
    cache_dir
        .join(video_id)
        .join(format!("faces-{}-v{}.jsonl", detector.name(), detector.version()))
}

/// Detect faces on every frame of one video, reusing the on-disk cache when its
/// timestamps match the frames.
pub fn detect_video_cached(
    frames: &[Frame],
    detector: &dyn FaceDetector,
    cache_dir: Option<&Path>,
) -> Result<Vec<Vec<FaceBox>>> {
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let path = cache_dir.map(|d| detection_cache_path(d, &first.source_video, detector));
    if let Some(p) = path.as_deref().filter(|p| p.exists()) {
        let cached = read_detections(p)?;
        let same = cached.len() == frames.len()
            && cached.iter().zip(frames).all(|(r, f)| centis(r.timestamp_s) == centis(f.timestamp_s));
        if same {
            return Ok(cached.into_iter().map(|r| r.boxes).collect());
        }
    }
    let detections: Vec<Vec<FaceBox>> = frames.iter().map(|f| detect_faces(f, detector)).collect::<Result<_>>()?;
    if let Some(p) = path {
        let records: Vec<DetectionRecord> = frames
            .iter()
            .zip(&detections)
            .map(|(f, b)| DetectionRecord {
                timestamp_s: f.timestamp_s,
                boxes: b.clone(),
            })
            .collect();
        write_detections(&p, &records)?;
    }
    Ok(detections)
}

/// Bilinear resize to `target`×`target` with half-pixel centers and edge clamping.
pub fn resize_image(img: &Image, target: usize) -> Image {
    resize_to(img, target, target)
}

pub fn resize_to(img: &Image, out_h: usize, out_w: usize) -> Image {
    if img.height == out_h && img.width == out_w {
        return img.clone();
    }
    let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f32)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, (s - lo as f64) as f32)
            })
            .collect()
    };
    let ys = axis(img.height, out_h);
    let xs = axis(img.width, out_w);
    let mut data = Vec::with_capacity(out_h * out_w * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..3 {
                let top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
                let bottom = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
                data.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
            }
        }
    }
    Image {
        height: out_h,
        width: out_w,
        data,
    }
}

/// Cut out `b` grown by `margin`·size on each side, clamped to the image.
pub fn crop(img: &Image, b: &FaceBox, margin: f64) -> Image {
    let (mx, my) = (b.w * margin, b.h * margin);
    let x0 = ((b.x - mx).floor().max(0.0) as usize).min(img.width - 1);
    let y0 = ((b.y - my).floor().max(0.0) as usize).min(img.height - 1);
    let x1 = ((b.x + b.w + mx).ceil() as usize).clamp(x0 + 1, img.width);
    let y1 = ((b.y + b.h + my).ceil() as usize).clamp(y0 + 1, img.height);
    let mut data = Vec::with_capacity((y1 - y0) * (x1 - x0) * 3);
    for y in y0..y1 {
        let row = (y * img.width + x0) * 3..(y * img.width + x1) * 3;
        data.extend_from_slice(&img.data[row]);
    }
    Image {
        height: y1 - y0,
        width: x1 - x0,
        data,
    }
}

/// Apply the mode's survival rule to precomputed detections. Pure in its inputs, so
/// replaying cached detections yields the same frame set.
pub fn select_frames(frames: &[Frame], detections: &[Vec<FaceBox>], cfg: &VisualConfig) -> Vec<Frame> {
    let prepared = |f: &Frame, pixels: Image| Frame {
        pixels,
        timestamp_s: f.timestamp_s,
        source_video: f.source_video.clone(),
    };
    match cfg.mode {
        VisualMode::FullFrame => frames
            .iter()
            .map(|f| prepared(f, resize_image(&f.pixels, cfg.image_size)))
            .collect(),
        VisualMode::SingleFace => frames
            .iter()
            .zip(detections)
            .filter_map(|(f, boxes)| match boxes.as_slice() {
                [only] => Some(prepared(
                    f,
                    resize_image(&crop(&f.pixels, only, cfg.crop_margin), cfg.image_size),
                )),
                _ => None,
            })
            .collect(),
    }
}

pub fn filter_and_crop(frames: &[Frame], detector: &dyn FaceDetector, cfg: &VisualConfig) -> Result<Vec<Frame>> {
    let detections = match cfg.mode {
        VisualMode::FullFrame => Vec::new(),
        VisualMode::SingleFace => frames.iter().map(|f| detect_faces(f, detector)).collect::<Result<_>>()?,
    };
    Ok(select_frames(frames, &detections, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(h: usize, w: usize, value: f32) -> Frame {
        Frame {
            pixels: Image::filled(h, w, value),
            timestamp_s: 0.3,
            source_video: "v1".into(),
        }
    }

    fn fb(x: f64, y: f64, w: f64, h: f64) -> FaceBox {
        FaceBox { x, y, w, h, confidence: 0.9 }
    }

    #[test]
    fn stub_detector_counts() {
        let f = frame(20, 30, 0.5);
        assert!(detect_faces(&f, &StubDetector::fixed(vec![])).unwrap().is_empty());
        let two = StubDetector::fixed(vec![fb(1.0, 1.0, 5.0, 5.0), fb(10.0, 2.0, 6.0, 6.0)]);
        assert_eq!(detect_faces(&f, &two).unwrap().len(), 2);
    }

    #[test]
    fn detector_failure_names_the_frame() {
        let bad = StubDetector::new(|_| Err(Error::data("model missing")));
        match detect_faces(&frame(8, 8, 0.0), &bad) {
            Err(Error::Component { unit, .. }) => assert_eq!(unit, "v1@0.30"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_face_rule() {
        let frames = vec![frame(40, 40, 0.2), frame(40, 40, 0.4), frame(40, 40, 0.6)];
        let dets = vec![vec![], vec![fb(5.0, 5.0, 10.0, 10.0)], vec![fb(0.0, 0.0, 9.0, 9.0), fb(20.0, 20.0, 9.0, 9.0)]];
        let cfg = VisualConfig { image_size: 16, ..Default::default() };
        let kept = select_frames(&frames, &dets, &cfg);
        assert_eq!(kept.len(), 1);
        let img = &kept[0].pixels;
        assert_eq!((img.height, img.width, img.data.len()), (16, 16, 16 * 16 * 3));
        assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((img.mean() - 0.4).abs() < 1e-6);

        let full = VisualConfig { mode: VisualMode::FullFrame, ..cfg };
        assert_eq!(select_frames(&frames, &[], &full).len(), 3);
    }

    #[test]
    fn crop_applies_margin_and_clamps() {
        let mut data = Vec::new();
        for y in 0..10 {
            for x in 0..10 {
                data.extend([x as f32 / 10.0, y as f32 / 10.0, 0.0]);
            }
        }
        let img = Image::new(10, 10, data).unwrap();
        let c = crop(&img, &fb(2.0, 3.0, 5.0, 5.0), 0.2);
        assert_eq!((c.height, c.width), (7, 7));
        assert_eq!(c.at(0, 0, 0), 0.1);
        assert_eq!(c.at(0, 0, 1), 0.2);
        let edge = crop(&img, &fb(8.0, 8.0, 2.0, 2.0), 0.5);
        assert_eq!((edge.height, edge.width), (3, 3));
    }

    #[test]
    fn resize_examples() {
        let img = Image::new(3, 5, (0..45).map(|i| i as f32 / 45.0).collect()).unwrap();
        assert_eq!(resize_to(&img, 3, 5), img);
        let flat = resize_image(&Image::filled(7, 3, 0.37), 12);
        assert!(flat.data.iter().all(|&v| (v - 0.37).abs() < 1e-6));

        // checkerboard [[0,1],[1,0]] in every channel
        let checker = Image::new(2, 2, [0.0, 1.0, 1.0, 0.0].iter().flat_map(|&v| [v; 3]).collect()).unwrap();
        let out = resize_image(&checker, 4);
        // source coordinates are (i + 0.5) / 2 - 0.5 clamped: 0, 0.25, 0.75, 1
        let expected = [
            [0.0, 0.25, 0.75, 1.0],
            [0.25, 0.375, 0.625, 0.75],
            [0.75, 0.625, 0.375, 0.25],
            [1.0, 0.75, 0.25, 0.0],
        ];
        for (y, row) in expected.iter().enumerate() {
            for (x, &v) in row.iter().enumerate() {
                for c in 0..3 {
                    assert!((out.at(y, x, c) - v).abs() < 1e-6, "({y},{x})");
                }
            }
        }
    }

    #[test]
    fn detection_cache_replays() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..4)
            .map(|k| Frame {
                timestamp_s: k as f64 * 0.1,
                ..frame(12, 12, 0.5)
            })
            .collect();
        let stub = StubDetector::new(|f| {
            let n = (f.timestamp_s * 10.0).round() as usize % 3;
            Ok(vec![fb(1.0, 1.0, 4.0, 4.0); n])
        });
        let first = detect_video_cached(&frames, &stub, Some(dir.path())).unwrap();
        let broken = StubDetector::new(|_| Err(Error::data("must not run")));
        let path = detection_cache_path(dir.path(), "v1", &stub);
        assert!(path.exists());
        let mut replay = ReplayDetector::default();
        replay.insert("v1", read_detections(&path).unwrap());
        let second: Vec<_> = frames.iter().map(|f| detect_faces(f, &replay).unwrap()).collect();
        assert_eq!(first, second);
        let cfg = VisualConfig { image_size: 8, ..Default::default() };
        assert_eq!(select_frames(&frames, &first, &cfg), select_frames(&frames, &second, &cfg));
        // same detector name and version, so the cache answers without running it
        assert_eq!(detect_video_cached(&frames, &broken, Some(dir.path())).unwrap(), first);
        assert!(detect_video_cached(&frames[..2], &broken, Some(dir.path())).is_err());
    }

    proptest! {
        #[test]
        fn clamped_boxes_stay_inside(
            x in -50.0f64..80.0, y in -50.0f64..80.0, w in 0.0f64..100.0, h in 0.0f64..100.0,
            width in 1usize..64, height in 1usize..64,
        ) {
            if let Some(b) = fb(x, y, w, h).clamp(width, height) {
                prop_assert!(b.x >= 0.0 && b.y >= 0.0 && b.w > 0.0 && b.h > 0.0);
                prop_assert!(b.x + b.w <= width as f64 + 1e-9 && b.y + b.h <= height as f64 + 1e-9);
                let c = crop(&Image::filled(height, width, 0.5), &b, 0.2);
                prop_assert!(c.height >= 1 && c.width >= 1 && c.height <= height && c.width <= width);
            }
        }

        #[test]
        fn resize_output_shape_and_range(h in 1usize..20, w in 1usize..20, t in 8usize..24, seed in any::<u64>()) {
            let data: Vec<f32> = (0..h * w * 3).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f32 / 999.0).collect();
            let out = resize_image(&Image::new(h, w, data).unwrap(), t);
            prop_assert_eq!(out.data.len(), t * t * 3);
            prop_assert!(out.data.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
