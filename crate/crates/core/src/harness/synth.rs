//! Synthetic acceptance corpus. Each class leaves a clean, noisy signature in
//! every channel: bright frames, a 3 kHz tone and one marker vocabulary for
//! deceptive videos; dark frames, a 300 Hz tone and another vocabulary for
//! truthful ones.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{write_manifest, DatasetTag, VideoRecord};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::media::SynvWriter;
use crate::seed::{self, DetRng};
use crate::visual::{write_detections, DetectionRecord, FaceBox};

pub const WIDTH: usize = 64;
pub const HEIGHT: usize = 48;
pub const FPS: f64 = 10.0;
pub const SAMPLE_RATE: u32 = 22_050;
pub const DECEPTIVE_TONE_HZ: f64 = 3_000.0;
pub const TRUTHFUL_TONE_HZ: f64 = 300.0;
pub const DECEPTIVE_MARKERS: [&str; 5] = ["honestly", "swear", "absolutely", "definitely", "frankly"];
pub const TRUTHFUL_MARKERS: [&str; 5] = ["remember", "recall", "exactly", "specifically", "noticed"];
const NEUTRAL: [&str; 16] = [
    "car", "street", "morning", "office", "phone", "door", "money", "friend", "night", "work", "home", "store",
    "paper", "call", "light", "window",
];
const FILLERS: [&str; 3] = ["um", "uh", "hmm"];

const FACE_W: usize = 20;
const FACE_H: usize = 24;

/// One generated video before it is written out.
#[derive(Debug, Clone)]
pub struct SynthVideo {
    pub id: String,
    pub label: Label,
    pub duration_s: f64,
    /// RGB8 frames at [`FPS`].
    pub frames: Vec<Vec<u8>>,
    /// Interleaved stereo at [`SAMPLE_RATE`].
    pub audio: Vec<f32>,
    pub transcript: String,
    pub detections: Vec<DetectionRecord>,
}

fn face_box(x: usize, y: usize, w: usize, h: usize, confidence: f64) -> FaceBox {
    FaceBox {
        x: x as f64,
        y: y as f64,
        w: w as f64,
        h: h as f64,
        confidence,
    }
}

fn paint_face(buf: &mut [f64], x0: usize, y0: usize, w: usize, h: usize, tone: f64) {
    for y in y0..(y0 + h).min(HEIGHT) {
        for x in x0..(x0 + w).min(WIDTH) {
            let eye = y == y0 + h / 3 && (x == x0 + w / 4 || x == x0 + 3 * w / 4);
            let v = if eye { tone * 0.5 } else { tone };
            for c in 0..3 {
                buf[(y * WIDTH + x) * 3 + c] = v;
            }
        }
    }
}

fn synth_frames(label: Label, n_frames: usize, rng: &mut DetRng) -> (Vec<Vec<u8>>, Vec<DetectionRecord>) {
    let base: f64 = match label {
        Label::Deceptive => rng.random_range(0.76..0.86),
        Label::Truthful => rng.random_range(0.14..0.24),
    };
    let face_tone = (base + 0.08).min(1.0);
    let fx = rng.random_range(8..WIDTH - FACE_W - 8);
    let fy = rng.random_range(4..HEIGHT - FACE_H - 4);
    let mut frames = Vec::with_capacity(n_frames);
    let mut detections = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let mut buf = vec![base; WIDTH * HEIGHT * 3];
        let x = (fx as i64 + rng.random_range(-2..=2)) as usize;
        let y = (fy as i64 + rng.random_range(-2..=2)) as usize;
        paint_face(&mut buf, x, y, FACE_W, FACE_H, face_tone);
        let mut boxes = Vec::new();
        let roll: f64 = rng.random();
        if roll < 0.8 {
            boxes.push(face_box(x, y, FACE_W, FACE_H, 0.99));
        } else if roll < 0.9 {
            // a bystander enters the shot
            let bx = if x > WIDTH / 2 { 1 } else { WIDTH - 13 };
            paint_face(&mut buf, bx, 2, 12, 14, face_tone);
            boxes.push(face_box(x, y, FACE_W, FACE_H, 0.99));
            boxes.push(face_box(bx, 2, 12, 14, 0.9));
        }
        let bytes = buf
            .iter()
            .map(|v| ((v + rng.random_range(-0.12..0.12)).clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        frames.push(bytes);
        detections.push(DetectionRecord {
            timestamp_s: k as f64 / FPS,
            boxes,
        });
    }
    (frames, detections)
}

fn synth_audio(label: Label, n_samples: usize, rng: &mut DetRng) -> Vec<f32> {
    let base = match label {
        Label::Deceptive => DECEPTIVE_TONE_HZ,
        Label::Truthful => TRUTHFUL_TONE_HZ,
    };
    let freq = base;
    let phase = rng.random_range(0.0..TAU);
    let amp = 0.4;
    let noise = Normal::new(0.0, 0.03).expect("valid normal");
    let rate = SAMPLE_RATE as f64;
    let mut out = Vec::with_capacity(n_samples * 2);
    for i in 0..n_samples {
        let t = i as f64 / rate;
        // 0.3 s bursts separated by 0.1 s gaps
        let on = (t % 0.4) < 0.3;
        let s = if on { amp * (TAU * freq * t + phase).sin() } else { 0.0 };
        for _ in 0..2 {
            out.push((s + noise.sample(rng)).clamp(-1.0, 1.0) as f32);
        }
    }
    out
}

fn synth_transcript(label: Label, rng: &mut DetRng) -> String {
    let (own, other) = match label {
        Label::Deceptive => (&DECEPTIVE_MARKERS, &TRUTHFUL_MARKERS),
        Label::Truthful => (&TRUTHFUL_MARKERS, &DECEPTIVE_MARKERS),
    };
    let mut words: Vec<&str> = Vec::new();
    for _ in 0..rng.random_range(3..=5) {
        words.push(own[rng.random_range(0..own.len())]);
    }
    if rng.random_bool(0.25) {
        words.push(other[rng.random_range(0..other.len())]);
    }
    for _ in 0..rng.random_range(0..=3) {
        words.push(FILLERS[rng.random_range(0..FILLERS.len())]);
    }
    let n_words = rng.random_range(20..=32);
    while words.len() < n_words {
        words.push(NEUTRAL[rng.random_range(0..NEUTRAL.len())]);
    }
    words.shuffle(rng);
    let mut text = String::new();
    for (i, w) in words.iter().enumerate() {
        if i == 0 {
            let mut c = w.chars();
            text.extend(c.next().map(|f| f.to_ascii_uppercase()));
            text.push_str(c.as_str());
        } else {
            text.push_str(if i % 9 == 0 { ", " } else { " " });
            text.push_str(w);
        }
    }
    text.push_str(".\n");
    text
}

pub fn synth_video(id: &str, label: Label, seed: u64) -> SynthVideo {
    let mut rng = seed::rng(seed, &format!("synth/{id}"));
    let tenths = rng.random_range(40..=70);
    let duration_s = tenths as f64 / 10.0;
    let n_frames = tenths as usize;
    let (frames, detections) = synth_frames(label, n_frames, &mut rng);
    let n_samples = (duration_s * SAMPLE_RATE as f64).round() as usize;
    let audio = synth_audio(label, n_samples, &mut rng);
    let transcript = synth_transcript(label, &mut rng);
    SynthVideo {
        id: id.to_string(),
        label,
        duration_s,
        frames,
        audio,
        transcript,
        detections,
    }
}

/// Labels alternate deceptive/truthful by index, so any even count is balanced.
pub fn synth_label(index: usize) -> Label {
    if index % 2 == 0 {
        Label::Deceptive
    } else {
        Label::Truthful
    }
}

/// Write `n_videos` synthetic videos (`media/<id>.synv` plus a
/// `media/<id>.faces.jsonl` detection sidecar), transcripts, and a labeled
/// `manifest.jsonl` under `out_dir`. Returns the manifest path.
pub fn generate_synthetic_corpus(n_videos: usize, seed: u64, out_dir: &Path) -> Result<PathBuf> {
    if n_videos < 8 || n_videos % 2 != 0 {
        return Err(Error::usage(format!("n_videos must be even and at least 8, got {n_videos}")));
    }
    let media = out_dir.join("media");
    let transcripts = out_dir.join("transcripts");
    for d in [&media, &transcripts] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut records = Vec::with_capacity(n_videos);
    for i in 0..n_videos {
        let id = format!("syn{i:03}");
        let v = synth_video(&id, synth_label(i), seed);
        let mut w = SynvWriter::new(WIDTH, HEIGHT, FPS, SAMPLE_RATE, 2);
        for f in &v.frames {
            w.push_frame(f)?;
        }
        w.push_audio(&v.audio);
        w.write(&media.join(format!("{id}.synv")))?;
        write_detections(&media.join(format!("{id}.faces.jsonl")), &v.detections)?;
        let tpath = transcripts.join(format!("{id}.txt"));
        fs::write(&tpath, &v.transcript).map_err(|e| Error::io(&tpath, e))?;
        records.push(VideoRecord {
            id: id.clone(),
            dataset_tag: DatasetTag::Synthetic,
            media_path: PathBuf::from(format!("media/{id}.synv")),
            transcript_path: PathBuf::from(format!("transcripts/{id}.txt")),
            label: Some(v.label),
            truth_prop: None,
            speaker_id: None,
            duration_s: Some(v.duration_s),
        });
    }
    let manifest = out_dir.join("manifest.jsonl");
    write_manifest(&manifest, &records)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::load_manifest;

    fn goertzel_power(x: &[f64], freq: f64, rate: f64) -> f64 {
        let w = TAU * freq / rate;
        let (mut s1, mut s2) = (0.0, 0.0);
        for &v in x {
            let s = v + 2.0 * w.cos() * s1 - s2;
            s2 = s1;
            s1 = s;
        }
        s1 * s1 + s2 * s2 - 2.0 * w.cos() * s1 * s2
    }

    fn accuracy(preds: &[Label], truth: &[Label]) -> f64 {
        preds.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
    }

    #[test]
    fn threshold_oracles_separate_each_channel() {
        let videos: Vec<SynthVideo> = (0..40).map(|i| synth_video(&format!("v{i}"), synth_label(i), 1)).collect();
        let truth: Vec<Label> = videos.iter().map(|v| v.label).collect();
        let pick = |deceptive: bool| if deceptive { Label::Deceptive } else { Label::Truthful };

        let visual: Vec<Label> = videos
            .iter()
            .map(|v| {
                let mean = v.frames.iter().flatten().map(|&b| b as f64 / 255.0).sum::<f64>()
                    / v.frames.iter().map(Vec::len).sum::<usize>() as f64;
                match v.label {
                    Label::Deceptive => assert!(mean > 0.7, "{mean}"),
                    Label::Truthful => assert!(mean < 0.3, "{mean}"),
                }
                pick(mean > 0.5)
            })
            .collect();
        let acoustic: Vec<Label> = videos
            .iter()
            .map(|v| {
                let left: Vec<f64> = v.audio.iter().step_by(2).map(|&s| s as f64).collect();
                let rate = SAMPLE_RATE as f64;
                // short blocks keep the bins wide enough to catch the jittered tone
                let band = |f: f64| left.chunks(256).map(|b| goertzel_power(b, f, rate)).sum::<f64>();
                pick(band(DECEPTIVE_TONE_HZ) > band(TRUTHFUL_TONE_HZ))
            })
            .collect();
        let lexical: Vec<Label> = videos
            .iter()
            .map(|v| {
                let count = |set: &[&str]| v.transcript.split(|c: char| !c.is_alphabetic()).filter(|w| set.contains(&w.to_lowercase().as_str())).count();
                pick(count(&DECEPTIVE_MARKERS) > count(&TRUTHFUL_MARKERS))
            })
            .collect();
        for (name, preds) in [("visual", visual), ("acoustic", acoustic), ("lexical", lexical)] {
            assert!(accuracy(&preds, &truth) >= 0.95, "{name}");
        }
    }

    #[test]
    fn corpus_is_balanced_and_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = generate_synthetic_corpus(8, 1, a.path()).unwrap();
        generate_synthetic_corpus(8, 1, b.path()).unwrap();
        let recs = load_manifest(&ma).unwrap();
        assert_eq!(recs.len(), 8);
        assert_eq!(recs.iter().filter(|r| r.label == Some(Label::Deceptive)).count(), 4);
        for r in &recs {
            for p in [&r.media_path, &r.transcript_path] {
                assert_eq!(fs::read(a.path().join(p)).unwrap(), fs::read(b.path().join(p)).unwrap());
            }
        }
        assert_eq!(fs::read(&ma).unwrap(), fs::read(b.path().join("manifest.jsonl")).unwrap());
    }

    #[test]
    fn rejects_bad_sizes_and_unwritable_dirs() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(generate_synthetic_corpus(6, 1, d.path()), Err(Error::Usage(_))));
        assert!(matches!(generate_synthetic_corpus(9, 1, d.path()), Err(Error::Usage(_))));
        let file = d.path().join("plain");
        fs::write(&file, b"x").unwrap();
        assert_eq!(generate_synthetic_corpus(8, 1, &file.join("sub")).unwrap_err().exit_code(), 2);
    }
}
