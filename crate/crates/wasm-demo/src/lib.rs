//! Three browser-callable operations over `ddp-core`. Each takes plain numbers
//! or a JSON string and returns a JSON string, so the page needs no bundler.

use std::f64::consts::TAU;

use ddp_core::acoustic::{acoustic_features, mel_spectrogram, spec_augment, AcousticConfig, AugmentConfig, FeatureRow, MelConfig};
use ddp_core::classifiers::{svm_train, Classifier, Kernel, SvmConfig};
use ddp_core::fusion::{vote, FusionMode, Modality, ModalityVerdict};
use ddp_core::label::Label;
use ddp_core::media::AudioClip;
use ddp_core::seed;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const RATE: u32 = 16_000;

#[derive(Serialize)]
struct MelView {
    n_mels: usize,
    n_frames: usize,
    /// dB values, band-major.
    mel: Vec<f64>,
    masked: Vec<f64>,
    /// The 25-slot feature vector, or null when every frame was silent.
    features: Option<Vec<f64>>,
}

/// One second of a tone plus seeded white noise, analysed like a training chunk.
pub fn mel_view(tone_hz: f64, noise: f64, seed_value: u64) -> Result<String, String> {
    use rand::Rng;
    let mut rng = seed::rng(seed_value, "demo/noise");
    let samples: Vec<f64> = (0..RATE as usize)
        .map(|i| {
            let t = i as f64 / RATE as f64;
            0.5 * (TAU * tone_hz * t).sin() + noise * rng.random_range(-1.0..1.0)
        })
        .collect();
    let clip = AudioClip::new(samples, RATE, "demo", 0.0).map_err(|e| e.to_string())?;
    let mcfg = MelConfig::default();
    let mel = mel_spectrogram(&clip, &mcfg).map_err(|e| e.to_string())?;
    let aug = AugmentConfig {
        n_freq_masks: 2,
        n_time_masks: 2,
        seed: seed_value,
        ..AugmentConfig::default()
    };
    let masked = spec_augment(&mel, &aug).map_err(|e| e.to_string())?;
    let features = match acoustic_features(&clip, &AcousticConfig::default(), &mcfg).map_err(|e| e.to_string())? {
        FeatureRow::Features(v) => Some(v.values.to_vec()),
        FeatureRow::Abstain { .. } => None,
    };
    let view = MelView {
        n_mels: mel.n_mels,
        n_frames: mel.n_frames,
        mel: mel.values,
        masked: masked.values,
        features,
    };
    Ok(serde_json::to_string(&view).expect("serializes"))
}

#[derive(Deserialize)]
struct Point {
    x: f64,
    y: f64,
    deceptive: bool,
}

#[derive(Serialize)]
struct Surface {
    grid: usize,
    /// P(deceptive) on a grid over the unit square, row-major from y = 0.
    scores: Vec<f64>,
    n_support: usize,
    train_accuracy: f64,
}

/// Train an RBF SVM on clicked points and sample its score over [0, 1]².
pub fn svm_surface(points_json: &str, c: f64, gamma: f64, grid: usize) -> Result<String, String> {
    let points: Vec<Point> = serde_json::from_str(points_json).map_err(|e| e.to_string())?;
    let x: Vec<Vec<f64>> = points.iter().map(|p| vec![p.x, p.y]).collect();
    let y: Vec<Label> = points
        .iter()
        .map(|p| if p.deceptive { Label::Deceptive } else { Label::Truthful })
        .collect();
    let cfg = SvmConfig {
        c,
        kernel: Kernel::Rbf,
        gamma,
        ..SvmConfig::default()
    };
    let model = svm_train(&x, &y, &cfg).map_err(|e| e.to_string())?;
    let grid = grid.clamp(2, 200);
    let mut scores = Vec::with_capacity(grid * grid);
    for gy in 0..grid {
        for gx in 0..grid {
            let p = [gx as f64 / (grid - 1) as f64, gy as f64 / (grid - 1) as f64];
            scores.push(model.score(&p).map_err(|e| e.to_string())?);
        }
    }
    let correct = x
        .iter()
        .zip(&y)
        .filter(|(p, l)| model.score(p).map(Label::from_score).ok() == Some(**l))
        .count();
    let surface = Surface {
        grid,
        scores,
        n_support: model.support_vectors.len(),
        train_accuracy: correct as f64 / x.len() as f64,
    };
    Ok(serde_json::to_string(&surface).expect("serializes"))
}

#[derive(Serialize)]
struct FusionView {
    hard_majority: Option<ddp_core::fusion::FusedVerdict>,
    soft_mean: Option<ddp_core::fusion::FusedVerdict>,
    error: Option<String>,
}

/// Vote over three modality scores; a negative score means that modality abstains.
pub fn fusion_vote(visual: f64, acoustic: f64, lexical: f64) -> String {
    let verdicts: Vec<ModalityVerdict> = Modality::ALL
        .into_iter()
        .zip([visual, acoustic, lexical])
        .map(|(m, s)| {
            if s < 0.0 {
                ModalityVerdict::abstain(m, "demo")
            } else {
                ModalityVerdict::scored(m, "demo", s.min(1.0), 1)
            }
        })
        .collect();
    let hard = vote(&verdicts, FusionMode::HardMajority);
    let soft = vote(&verdicts, FusionMode::SoftMean);
    let view = FusionView {
        error: hard.as_ref().err().map(|e| e.to_string()),
        hard_majority: hard.ok(),
        soft_mean: soft.ok(),
    };
    serde_json::to_string(&view).expect("serializes")
}

#[wasm_bindgen(js_name = melView)]
pub fn mel_view_js(tone_hz: f64, noise: f64, seed_value: u32) -> Result<String, JsError> {
    mel_view(tone_hz, noise, seed_value as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = svmSurface)]
pub fn svm_surface_js(points_json: &str, c: f64, gamma: f64, grid: u32) -> Result<String, JsError> {
    svm_surface(points_json, c, gamma, grid as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fusionVote)]
pub fn fusion_vote_js(visual: f64, acoustic: f64, lexical: f64) -> String {
    fusion_vote(visual, acoustic, lexical)
}
