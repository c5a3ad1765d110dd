//! Synthetic corpora with known speaker centroids and emotion offsets.
//!
//! Frames of speaker `s` in emotion `e` are drawn i.i.d. from
//! `N(c_s + o_e, σ_w² I)` with `c_s ~ N(0, σ_s² I)`, `o_e ~ N(0, σ_e² I)`
//! shared by all speakers and `o_N = 0`. The frames stand in for normalized
//! acoustic features. A separate background population speaks neutral only.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::corpus::Utterance;
use crate::error::{Error, Result};
use crate::features::{AudioClip, FeatureMatrix};
use crate::labels::{Emotion, Split};
use crate::scalar::Real;

/// Generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub emotions: Vec<Emotion>,
    pub feature_dim: usize,
    /// σ_s
    pub speaker_spread: f64,
    /// σ_e
    pub emotion_shift: f64,
    /// σ_w
    pub within_noise: f64,
    pub frames_per_second: f64,
    pub train_duration_s: f64,
    pub test_duration_s: f64,
    /// Per (speaker, emotion).
    pub train_utts: usize,
    /// Per (speaker, emotion).
    pub test_utts: usize,
    pub n_background: usize,
    pub background_utts: usize,
    pub background_duration_s: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_speakers: 10,
            emotions: Emotion::EVALUATED.to_vec(),
            feature_dim: 39,
            speaker_spread: 3.0,
            emotion_shift: 1.5,
            within_noise: 1.0,
            frames_per_second: 10.0,
            train_duration_s: 120.0,
            test_duration_s: 30.0,
            train_utts: 1,
            test_utts: 10,
            n_background: 200,
            background_utts: 2,
            background_duration_s: 30.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_speakers < 2 {
            return bad(format!("n_speakers = {} must be at least 2", self.n_speakers));
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be positive".into());
        }
        if self.emotions.is_empty() || self.emotions.contains(&Emotion::Unknown) {
            return bad("emotions must be a non-empty list of N/H/A/S".into());
        }
        let mut sorted = self.emotions.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.emotions.len() {
            return bad("emotions contain duplicates".into());
        }
        // σ_e = 0 is allowed as the no-emotion control
        if !(self.speaker_spread > 0.0 && self.within_noise > 0.0 && self.emotion_shift >= 0.0) {
            return bad("speaker_spread and within_noise must be positive, emotion_shift non-negative".into());
        }
        for (name, v) in [
            ("frames_per_second", self.frames_per_second),
            ("train_duration_s", self.train_duration_s),
            ("test_duration_s", self.test_duration_s),
            ("background_duration_s", self.background_duration_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.train_utts == 0 || self.test_utts == 0 {
            return bad("train_utts and test_utts must be positive".into());
        }
        if self.n_background > 0 && self.background_utts == 0 {
            return bad("background_utts must be positive".into());
        }
        Ok(())
    }

    pub fn frames_for(&self, duration_s: f64) -> usize {
        ((duration_s * self.frames_per_second).round() as usize).max(1)
    }
}

/// Generator ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub speakers: Vec<String>,
    /// One row per entry of `speakers`.
    pub centroids: Array2<f64>,
    pub emotion_offsets: BTreeMap<Emotion, Array1<f64>>,
    pub background_speakers: Vec<String>,
    pub background_centroids: Array2<f64>,
}

impl SynthTruth {
    pub fn centroid(&self, speaker: &str) -> Option<Array1<f64>> {
        self.speakers
            .iter()
            .position(|s| s == speaker)
            .map(|i| self.centroids.row(i).to_owned())
    }
}

pub type SynthUtterance<T> = Utterance<T>;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus<T> {
    pub utterances: Vec<SynthUtterance<T>>,
    pub truth: SynthTruth,
    pub config: SynthConfig,
}

impl<T> SynthCorpus<T> {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &SynthUtterance<T>> {
        self.utterances.iter().filter(move |u| u.split == split)
    }
}

pub fn speaker_label(i: usize) -> String {
    format!("spk{i:02}")
}

pub fn background_label(i: usize) -> String {
    format!("bg{i:03}")
}

fn gaussian_rows(rng: &mut ChaCha8Rng, rows: usize, dim: usize, std: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, dim), || {
        let z: f64 = StandardNormal.sample(&mut *rng);
        std * z
    })
}

fn draw_frames<T: Real>(rng: &mut ChaCha8Rng, n: usize, mean: &Array1<f64>, std: f64) -> Array2<T> {
    let d = mean.len();
    let mut out = Array2::<T>::zeros((n, d));
    for mut row in out.rows_mut() {
        for (v, &m) in row.iter_mut().zip(mean.iter()) {
            let z: f64 = StandardNormal.sample(&mut *rng);
            *v = T::lit(m + std * z);
        }
    }
    out
}

/// Draws a corpus. Identical configs give identical corpora.
pub fn generate<T: Real>(cfg: &SynthConfig) -> Result<SynthCorpus<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.feature_dim;
    let speakers: Vec<String> = (0..cfg.n_speakers).map(speaker_label).collect();
    let centroids = gaussian_rows(&mut rng, cfg.n_speakers, d, cfg.speaker_spread);
    let mut emotion_offsets = BTreeMap::new();
    for &e in &Emotion::EVALUATED {
        // every evaluated emotion is drawn so subsets of emotions share offsets
        let o = gaussian_rows(&mut rng, 1, d, cfg.emotion_shift).index_axis_move(Axis(0), 0);
        if cfg.emotions.contains(&e) {
            emotion_offsets.insert(e, if e.is_neutral() { Array1::zeros(d) } else { o });
        }
    }
    let background_speakers: Vec<String> = (0..cfg.n_background).map(background_label).collect();
    let background_centroids = gaussian_rows(&mut rng, cfg.n_background, d, cfg.speaker_spread);

    let mut utterances = Vec::new();
    let mut emit = |rng: &mut ChaCha8Rng, id: String, speaker: &str, emotion: Emotion, split: Split, duration_s: f64, mean: &Array1<f64>| {
        let frames = draw_frames::<T>(rng, cfg.frames_for(duration_s), mean, cfg.within_noise);
        utterances.push(SynthUtterance {
            features: FeatureMatrix::from_frames(id, frames),
            speaker: speaker.to_string(),
            emotion,
            split,
            duration_s,
        });
    };
    for (i, spk) in speakers.iter().enumerate() {
        for e in &cfg.emotions {
            let mean = &centroids.row(i).to_owned() + &emotion_offsets[e];
            for k in 0..cfg.train_utts {
                emit(&mut rng, format!("{spk}_{e}_train{k}"), spk, *e, Split::Train, cfg.train_duration_s, &mean);
            }
            for k in 0..cfg.test_utts {
                emit(&mut rng, format!("{spk}_{e}_test{k}"), spk, *e, Split::Test, cfg.test_duration_s, &mean);
            }
        }
    }
    for (i, spk) in background_speakers.iter().enumerate() {
        let mean = background_centroids.row(i).to_owned();
        for k in 0..cfg.background_utts {
            emit(
                &mut rng,
                format!("{spk}_N_bg{k}"),
                spk,
                Emotion::Neutral,
                Split::Background,
                cfg.background_duration_s,
                &mean,
            );
        }
    }
    Ok(SynthCorpus {
        utterances,
        truth: SynthTruth {
            speakers,
            centroids,
            emotion_offsets,
            background_speakers,
            background_centroids,
        },
        config: cfg.clone(),
    })
}

/// Nearest enrolled centroid (Euclidean) to the utterance's frame mean with
/// the true emotion offset removed; ties go to the smallest label.
pub fn oracle_identify<T: Real>(truth: &SynthTruth, utt: &SynthUtterance<T>) -> Result<String> {
    let offset = truth
        .emotion_offsets
        .get(&utt.emotion)
        .ok_or_else(|| Error::InvalidInput(format!("no offset for emotion {}", utt.emotion)))?;
    let frames = &utt.features.frames;
    if frames.ncols() != truth.centroids.ncols() {
        return Err(Error::DimensionMismatch {
            context: "oracle frame dimension",
            expected: truth.centroids.ncols(),
            got: frames.ncols(),
        });
    }
    if frames.nrows() == 0 {
        return Err(Error::InsufficientData(format!("utterance {} has no frames", utt.id())));
    }
    let mean = frames.mapv(|v| v.as_f64()).mean_axis(Axis(0)).expect("non-empty") - offset;
    let mut best: Option<(f64, &str)> = None;
    for (s, c) in truth.speakers.iter().zip(truth.centroids.rows()) {
        let dist: f64 = mean.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        best = match best {
            Some((bd, bl)) if bd < dist || (bd == dist && bl <= s.as_str()) => Some((bd, bl)),
            _ => Some((dist, s.as_str())),
        };
    }
    Ok(best.expect("at least two speakers").1.to_string())
}

/// Raw-audio variant: alternating band-limited noise bursts and silence.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSynthConfig {
    pub sample_rate: u32,
    pub burst_s: f64,
    pub gap_s: f64,
    pub amplitude: f64,
    /// Bandwidth of each burst in Hz.
    pub bandwidth_hz: f64,
}

impl Default for AudioSynthConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            burst_s: 0.4,
            gap_s: 0.1,
            amplitude: 0.3,
            bandwidth_hz: 400.0,
        }
    }
}

/// Band centre for a (speaker index, emotion) class: speakers are spaced
/// across the spectrum and emotions nudge the band upward.
pub fn class_band_hz(speaker: usize, emotion: Emotion, sample_rate: u32) -> f64 {
    let nyquist = sample_rate as f64 / 2.0;
    let base = 300.0 + 450.0 * (speaker % 12) as f64;
    let nudge = match emotion {
        Emotion::Neutral | Emotion::Unknown => 0.0,
        Emotion::Happy => 120.0,
        Emotion::Angry => 240.0,
        Emotion::Sad => -120.0,
    };
    (base + nudge).clamp(100.0, nyquist - 100.0)
}

/// White noise restricted to `[lo, hi]` Hz by zeroing FFT bins, scaled to
/// the requested peak amplitude.
pub fn band_noise(rng: &mut impl Rng, n: usize, sample_rate: u32, lo_hz: f64, hi_hz: f64, peak: f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(&mut *rng), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let bin_hz = sample_rate as f64 / n as f64;
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * bin_hz;
        if f < lo_hz || f > hi_hz {
            *v = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let max = buf.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let scale = if max > 0.0 { peak / max } else { 0.0 };
    buf.iter().map(|c| c.re * scale).collect()
}

/// A clip of `duration_s` seconds for one (speaker, emotion) class.
pub fn synth_clip<T: Real>(
    cfg: &AudioSynthConfig,
    id: impl Into<String>,
    speaker: usize,
    emotion: Emotion,
    duration_s: f64,
    seed: u64,
) -> AudioClip<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = cfg.sample_rate;
    let total = (duration_s * sr as f64).round() as usize;
    let burst = ((cfg.burst_s * sr as f64).round() as usize).max(1);
    let gap = (cfg.gap_s * sr as f64).round() as usize;
    let centre = class_band_hz(speaker, emotion, sr);
    let (lo, hi) = (centre - cfg.bandwidth_hz / 2.0, centre + cfg.bandwidth_hz / 2.0);
    let mut samples = Vec::with_capacity(total);
    while samples.len() < total {
        let n = burst.min(total - samples.len());
        samples.extend(band_noise(&mut rng, n, sr, lo, hi, cfg.amplitude).into_iter().map(T::lit));
        let g = gap.min(total - samples.len());
        samples.extend(std::iter::repeat_n(T::zero(), g));
    }
    AudioClip::new(id, samples, sr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_speakers: 3,
            n_background: 4,
            test_utts: 2,
            seed: 5,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn layout_and_determinism() {
        let cfg = small();
        let a = generate::<f64>(&cfg).unwrap();
        assert_eq!(a.split(Split::Train).count(), 12);
        assert_eq!(a.split(Split::Test).count(), 24);
        assert_eq!(a.split(Split::Background).count(), 8);
        assert!(a.split(Split::Background).all(|u| u.emotion == Emotion::Neutral));
        let train = a.split(Split::Train).next().unwrap();
        assert_eq!(train.features.n_frames(), 1200);
        assert_eq!(train.features.dim(), 39);
        assert_eq!(a, generate::<f64>(&cfg).unwrap());
        let other = generate::<f64>(&SynthConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.truth.centroids, other.truth.centroids);
        assert_eq!(a.truth.emotion_offsets[&Emotion::Neutral], Array1::zeros(39));
    }

    #[test]
    fn frame_means_concentrate() {
        let cfg = SynthConfig {
            n_background: 0,
            ..small()
        };
        let c = generate::<f64>(&cfg).unwrap();
        let mut inside = 0;
        let mut total = 0;
        for u in &c.utterances {
            let n = u.features.n_frames() as f64;
            let mean = u.features.frames.mean_axis(Axis(0)).unwrap();
            let expect = c.truth.centroid(&u.speaker).unwrap() + &c.truth.emotion_offsets[&u.emotion];
            for (m, e) in mean.iter().zip(expect.iter()) {
                total += 1;
                if (m - e).abs() <= 3.0 * cfg.within_noise / n.sqrt() {
                    inside += 1;
                }
            }
        }
        assert!(inside as f64 / total as f64 >= 0.99, "{inside}/{total}");
    }

    #[test]
    fn null_emotion_control() {
        let c = generate::<f64>(&SynthConfig {
            emotion_shift: 0.0,
            ..small()
        })
        .unwrap();
        assert!(c.truth.emotion_offsets.values().all(|o| o.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn oracle_accuracy_and_ties() {
        let c = generate::<f64>(&SynthConfig {
            n_background: 0,
            ..SynthConfig::default()
        })
        .unwrap();
        let tests: Vec<_> = c.split(Split::Test).collect();
        let hits = tests
            .iter()
            .filter(|u| oracle_identify(&c.truth, u).unwrap() == u.speaker)
            .count();
        assert!(hits as f64 >= 0.99 * tests.len() as f64);

        let mut truth = c.truth.clone();
        let row = truth.centroids.row(3).to_owned();
        truth.centroids.row_mut(7).assign(&row);
        let mut u = tests[0].clone();
        u.emotion = Emotion::Neutral;
        u.features.frames = Array2::from_shape_fn((5, 39), |(_, j)| row[j]);
        assert_eq!(oracle_identify(&truth, &u).unwrap(), "spk03");
    }

    #[test]
    fn band_noise_stays_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = band_noise(&mut rng, 4000, 16_000, 1000.0, 1400.0, 0.5);
        assert!((x.iter().map(|v| v.abs()).fold(0.0, f64::max) - 0.5).abs() < 1e-12);
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(4000).process(&mut buf);
        let (mut inside, mut outside) = (0.0, 0.0);
        for (k, c) in buf.iter().enumerate().take(2000) {
            let f = k as f64 * 4.0;
            if (1000.0..=1400.0).contains(&f) {
                inside += c.norm_sqr();
            } else {
                outside += c.norm_sqr();
            }
        }
        assert!(outside < 1e-12 * inside);
    }

    #[test]
    fn clip_has_requested_length() {
        let clip = synth_clip::<f64>(&AudioSynthConfig::default(), "x", 2, Emotion::Angry, 1.25, 3);
        assert_eq!(clip.samples.len(), 20_000);
        clip.validate().unwrap();
    }
}
