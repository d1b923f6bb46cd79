//! Frame-level spectral and temporal descriptors.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Frequency of C0, the reference for pitch-class folding.
pub const C0_HZ: f64 = 16.3516;

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Centre frequency of each one-sided FFT bin.
pub fn bin_frequencies(n_fft: usize, sample_rate: u32) -> Vec<f64> {
    (0..=n_fft / 2)
        .map(|k| k as f64 * sample_rate as f64 / n_fft as f64)
        .collect()
}

/// Windowed real FFT of fixed size; reused across frames.
pub struct Spectrum {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    buf: Vec<Complex<f64>>,
}

impl Spectrum {
    pub fn new(n_fft: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Spectrum {
            fft,
            window: hann(n_fft),
            buf: vec![Complex::new(0.0, 0.0); n_fft],
        }
    }

    pub fn n_fft(&self) -> usize {
        self.window.len()
    }

    fn transform(&mut self, frame: &[f64]) {
        debug_assert_eq!(frame.len(), self.window.len());
        for ((b, &x), &w) in self.buf.iter_mut().zip(frame).zip(&self.window) {
            *b = Complex::new(x * w, 0.0);
        }
        self.fft.process(&mut self.buf);
    }

    /// |X_k|² for k = 0..=n/2.
    pub fn power(&mut self, frame: &[f64]) -> Vec<f64> {
        self.transform(frame);
        self.buf[..=self.window.len() / 2].iter().map(|c| c.norm_sqr()).collect()
    }

    /// |X_k| for k = 0..=n/2.
    pub fn magnitude(&mut self, frame: &[f64]) -> Vec<f64> {
        self.transform(frame);
        self.buf[..=self.window.len() / 2].iter().map(|c| c.norm()).collect()
    }
}

/// Fraction of adjacent pairs whose signs differ; zero counts as positive.
pub fn zero_crossing_rate(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::data("zero-crossing rate needs at least 2 samples"));
    }
    let crossings = samples
        .windows(2)
        .filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0))
        .count();
    Ok(crossings as f64 / (samples.len() - 1) as f64)
}

pub fn rms(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::data("rms of an empty sequence"));
    }
    let ms = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
    Ok(ms.sqrt())
}

fn total_mass(magnitudes: &[f64], bin_freqs: &[f64]) -> Result<f64> {
    if magnitudes.len() != bin_freqs.len() {
        return Err(Error::contract("magnitudes and bin frequencies differ in length"));
    }
    let total: f64 = magnitudes.iter().sum();
    if !(total > 0.0) {
        return Err(Error::data("spectrum carries no energy"));
    }
    Ok(total)
}

/// Frequency of the first bin at which the cumulative magnitude reaches
/// `fraction` of the total.
pub fn spectral_rolloff(magnitudes: &[f64], bin_freqs: &[f64], fraction: f64) -> Result<f64> {
    let total = total_mass(magnitudes, bin_freqs)?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::contract("rolloff fraction must lie in (0, 1)"));
    }
    let target = fraction * total;
    let mut acc = 0.0;
    for (m, f) in magnitudes.iter().zip(bin_freqs) {
        acc += m;
        if acc >= target {
            return Ok(*f);
        }
    }
    // Rounding can leave the running sum a hair below `target`.
    Ok(*bin_freqs.last().expect("non-empty spectrum"))
}

/// Magnitude-weighted standard deviation of frequency about the centroid.
pub fn spectral_bandwidth(magnitudes: &[f64], bin_freqs: &[f64]) -> Result<f64> {
    let total = total_mass(magnitudes, bin_freqs)?;
    let centroid = magnitudes.iter().zip(bin_freqs).map(|(m, f)| m * f).sum::<f64>() / total;
    let var = magnitudes
        .iter()
        .zip(bin_freqs)
        .map(|(m, f)| m * (f - centroid) * (f - centroid))
        .sum::<f64>()
        / total;
    Ok(var.max(0.0).sqrt())
}

pub fn pitch_class(freq_hz: f64) -> usize {
    let semitones = (12.0 * (freq_hz / C0_HZ).log2()).round() as i64;
    semitones.rem_euclid(12) as usize
}

/// Twelve-bin pitch-class energy profile scaled so its maximum is 1.
/// Class 0 is C. The DC bin never contributes.
pub fn chroma_profile(magnitudes: &[f64], bin_freqs: &[f64]) -> Result<[f64; 12]> {
    if magnitudes.len() != bin_freqs.len() {
        return Err(Error::contract("magnitudes and bin frequencies differ in length"));
    }
    let mut profile = [0.0; 12];
    for (&m, &f) in magnitudes.iter().zip(bin_freqs) {
        if f > 0.0 && m > 0.0 {
            profile[pitch_class(f)] += m * m;
        }
    }
    let peak = profile.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::data("no voiced bins for chroma"));
    }
    for v in &mut profile {
        *v /= peak;
    }
    Ok(profile)
}
