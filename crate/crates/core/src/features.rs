//! Acoustic front end: MFCC extraction, Δ/ΔΔ regression, energy-based voice
//! activity detection and per-utterance cepstral mean/variance normalization.
//!
//! The chain is `compute_mfcc → append_deltas → energy_vad → cmvn`; see
//! [`extract_features`]. Coefficient 0 of every frame holds the frame
//! log-energy instead of the zeroth cepstrum, so the VAD can read it directly.

use std::path::Path;
use std::sync::Arc;

use ndarray::{s, Array2, ArrayView2, Axis};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Floor applied to every energy before taking its logarithm.
pub const ENERGY_FLOOR: f64 = 1e-10;
/// Variance floor used by CMVN for (near-)constant columns.
pub const CMVN_VARIANCE_FLOOR: f64 = 1e-10;

/// A mono PCM clip with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
    pub id: String,
}

impl<T: Real> AudioClip<T> {
    pub fn new(id: impl Into<String>, samples: Vec<T>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
            id: id.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidInput(format!(
                "clip {}: sample rate must be positive",
                self.id
            )));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidInput(format!("clip {}: no samples", self.id)));
        }
        if let Some(i) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "clip {}: non-finite sample at index {i}",
                self.id
            )));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Front-end parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub frame_len_ms: f64,
    pub frame_shift_ms: f64,
    pub n_cepstra: usize,
    pub n_mel_filters: usize,
    pub preemphasis: f64,
    pub delta_window: usize,
    pub vad_dynamic_range_db: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frame_len_ms: 20.0,
            frame_shift_ms: 10.0,
            n_cepstra: 13,
            n_mel_filters: 26,
            preemphasis: 0.97,
            delta_window: 2,
            vad_dynamic_range_db: 30.0,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_len_ms > 0.0 && self.frame_shift_ms > 0.0) {
            return Err(Error::Config("frame length and shift must be positive".into()));
        }
        if self.frame_shift_ms > self.frame_len_ms {
            return Err(Error::Config(format!(
                "frame_shift_ms ({}) exceeds frame_len_ms ({})",
                self.frame_shift_ms, self.frame_len_ms
            )));
        }
        if self.n_cepstra == 0 || self.n_cepstra > self.n_mel_filters {
            return Err(Error::Config(format!(
                "n_cepstra ({}) must be in 1..=n_mel_filters ({})",
                self.n_cepstra, self.n_mel_filters
            )));
        }
        if self.delta_window == 0 {
            return Err(Error::Config("delta_window must be at least 1".into()));
        }
        if !(self.vad_dynamic_range_db > 0.0) {
            return Err(Error::Config("vad_dynamic_range_db must be positive".into()));
        }
        Ok(())
    }

    /// Total feature dimension (base + Δ + ΔΔ).
    pub fn dim(&self) -> usize {
        3 * self.n_cepstra
    }

    pub fn frame_len_samples(&self, sample_rate: u32) -> usize {
        (self.frame_len_ms * f64::from(sample_rate) / 1000.0).round() as usize
    }

    pub fn frame_shift_samples(&self, sample_rate: u32) -> usize {
        ((self.frame_shift_ms * f64::from(sample_rate) / 1000.0).round() as usize).max(1)
    }
}

/// Per-utterance feature matrix: one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub frames: Array2<T>,
    pub vad_mask: Vec<bool>,
    pub utterance_id: String,
}

impl<T: Real> FeatureMatrix<T> {
    /// Wraps already-normalized frames; every frame is marked voiced.
    pub fn from_frames(utterance_id: impl Into<String>, frames: Array2<T>) -> Self {
        let n = frames.nrows();
        Self {
            frames,
            vad_mask: vec![true; n],
            utterance_id: utterance_id.into(),
        }
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn n_voiced(&self) -> usize {
        self.vad_mask.iter().filter(|&&v| v).count()
    }

    /// Copies out the voiced frames only.
    pub fn voiced_frames(&self) -> Array2<T> {
        let idx: Vec<usize> = (0..self.n_frames()).filter(|&t| self.vad_mask[t]).collect();
        self.frames.select(Axis(0), &idx)
    }

    /// Frames `[start, end)` as a new matrix (mask carried along).
    pub fn slice_frames(&self, id: impl Into<String>, start: usize, end: usize) -> Self {
        let end = end.min(self.n_frames());
        let start = start.min(end);
        Self {
            frames: self.frames.slice(s![start..end, ..]).to_owned(),
            vad_mask: self.vad_mask[start..end].to_vec(),
            utterance_id: id.into(),
        }
    }
}

/// Reusable MFCC analyzer for one sample rate.
pub struct MfccExtractor<T: Real> {
    cfg: FeatureConfig,
    sample_rate: u32,
    frame_len: usize,
    frame_shift: usize,
    nfft: usize,
    window: Vec<T>,
    filterbank: Array2<T>,
    dct: Array2<T>,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Real> MfccExtractor<T> {
    pub fn new(cfg: &FeatureConfig, sample_rate: u32) -> Result<Self> {
        cfg.validate()?;
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        let frame_len = cfg.frame_len_samples(sample_rate);
        if frame_len < 2 {
            return Err(Error::Config(format!(
                "frame of {} ms at {sample_rate} Hz is shorter than two samples",
                cfg.frame_len_ms
            )));
        }
        let frame_shift = cfg.frame_shift_samples(sample_rate);
        let nfft = frame_len.next_power_of_two();
        let window = hamming(frame_len);
        let filterbank = mel_filterbank(cfg.n_mel_filters, nfft, sample_rate);
        let dct = dct_matrix(cfg.n_cepstra, cfg.n_mel_filters);
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        Ok(Self {
            cfg: cfg.clone(),
            sample_rate,
            frame_len,
            frame_shift,
            nfft,
            window,
            filterbank,
            dct,
            fft,
        })
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn frame_shift(&self) -> usize {
        self.frame_shift
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    /// Triangular mel filterbank, `n_mel_filters × (nfft/2 + 1)`.
    pub fn filterbank(&self) -> ArrayView2<'_, T> {
        self.filterbank.view()
    }

    pub fn frame_count(&self, n_samples: usize) -> usize {
        frame_count(n_samples, self.frame_len, self.frame_shift)
    }

    fn check_clip(&self, clip: &AudioClip<T>) -> Result<()> {
        clip.validate()?;
        if clip.sample_rate != self.sample_rate {
            return Err(Error::InvalidInput(format!(
                "clip {} has sample rate {}, extractor expects {}",
                clip.id, clip.sample_rate, self.sample_rate
            )));
        }
        if clip.samples.len() < self.frame_len {
            return Err(Error::TooShort {
                samples: clip.samples.len(),
                needed: self.frame_len,
            });
        }
        Ok(())
    }

    fn preemphasized(&self, samples: &[T]) -> Vec<T> {
        let a = T::lit(self.cfg.preemphasis);
        let mut out = Vec::with_capacity(samples.len());
        out.push(samples[0]);
        out.extend(samples.windows(2).map(|w| w[1] - a * w[0]));
        out
    }

    /// Linear-scale mel filterbank energies and frame energies, one row per
    /// frame.
    pub fn filterbank_energies(&self, clip: &AudioClip<T>) -> Result<(Array2<T>, Vec<T>)> {
        self.check_clip(clip)?;
        let signal = self.preemphasized(&clip.samples);
        let n_frames = self.frame_count(signal.len());
        let n_bins = self.nfft / 2 + 1;
        let mut energies = Array2::<T>::zeros((n_frames, self.cfg.n_mel_filters));
        let mut frame_energy = Vec::with_capacity(n_frames);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.nfft];
        let mut power = ndarray::Array1::<T>::zeros(n_bins);
        for t in 0..n_frames {
            let frame = &signal[t * self.frame_shift..t * self.frame_shift + self.frame_len];
            frame_energy.push(frame.iter().map(|&x| x * x).sum());
            for (i, slot) in buf.iter_mut().enumerate() {
                let re = if i < self.frame_len {
                    frame[i] * self.window[i]
                } else {
                    T::zero()
                };
                *slot = Complex::new(re, T::zero());
            }
            self.fft.process(&mut buf);
            for k in 0..n_bins {
                power[k] = buf[k].norm_sqr();
            }
            energies.row_mut(t).assign(&self.filterbank.dot(&power));
        }
        Ok((energies, frame_energy))
    }

    /// Base cepstra (with log-energy in slot 0); Δ and ΔΔ columns zeroed and
    /// every frame marked voiced.
    pub fn compute(&self, clip: &AudioClip<T>) -> Result<FeatureMatrix<T>> {
        let (energies, frame_energy) = self.filterbank_energies(clip)?;
        let floor = T::lit(ENERGY_FLOOR);
        let log_mel = energies.mapv(|e| e.max(floor).ln());
        let ceps = log_mel.dot(&self.dct.t());
        let n_frames = ceps.nrows();
        let nc = self.cfg.n_cepstra;
        let mut frames = Array2::<T>::zeros((n_frames, 3 * nc));
        frames.slice_mut(s![.., ..nc]).assign(&ceps);
        for (t, e) in frame_energy.into_iter().enumerate() {
            frames[[t, 0]] = e.max(floor).ln();
        }
        Ok(FeatureMatrix {
            frames,
            vad_mask: vec![true; n_frames],
            utterance_id: clip.id.clone(),
        })
    }
}

/// `floor((n − len)/shift) + 1` frames, zero if the clip is shorter than one
/// frame.
pub fn frame_count(n_samples: usize, frame_len: usize, frame_shift: usize) -> usize {
    if n_samples < frame_len || frame_shift == 0 {
        0
    } else {
        (n_samples - frame_len) / frame_shift + 1
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Center frequencies (Hz) of `n_filters` mel filters spanning 0 Hz to
/// Nyquist.
pub fn mel_centers_hz(n_filters: usize, sample_rate: u32) -> Vec<f64> {
    let top = hz_to_mel(f64::from(sample_rate) / 2.0);
    (1..=n_filters)
        .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
        .collect()
}

/// Triangular filters evaluated at each FFT bin frequency; peak weight 1.
pub fn mel_filterbank<T: Real>(n_filters: usize, nfft: usize, sample_rate: u32) -> Array2<T> {
    let n_bins = nfft / 2 + 1;
    let top = hz_to_mel(f64::from(sample_rate) / 2.0);
    let edges: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_filters + 1) as f64))
        .collect();
    let bin_hz = f64::from(sample_rate) / nfft as f64;
    Array2::from_shape_fn((n_filters, n_bins), |(m, k)| {
        let f = k as f64 * bin_hz;
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let w = if f > lo && f <= mid {
            (f - lo) / (mid - lo)
        } else if f > mid && f < hi {
            (hi - f) / (hi - mid)
        } else {
            0.0
        };
        T::lit(w)
    })
}

fn hamming<T: Real>(n: usize) -> Vec<T> {
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| T::lit(0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos()))
        .collect()
}

/// Orthonormal DCT-II basis, `n_out × n_in`.
fn dct_matrix<T: Real>(n_out: usize, n_in: usize) -> Array2<T> {
    let m = n_in as f64;
    Array2::from_shape_fn((n_out, n_in), |(k, j)| {
        let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
        T::lit(scale * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / m).cos())
    })
}

/// MFCC base coefficients for one clip (see [`MfccExtractor::compute`]).
pub fn compute_mfcc<T: Real>(clip: &AudioClip<T>, cfg: &FeatureConfig) -> Result<FeatureMatrix<T>> {
    clip.validate()?;
    MfccExtractor::new(cfg, clip.sample_rate)?.compute(clip)
}

// Regression derivative over ±window frames with edge replication.
fn regression_delta<T: Real>(x: ArrayView2<T>, window: usize) -> Array2<T> {
    let (n, d) = x.dim();
    let mut out = Array2::<T>::zeros((n, d));
    if n == 0 {
        return out;
    }
    let denom = T::from_count(2 * (1..=window).map(|k| k * k).sum::<usize>());
    let last = n as isize - 1;
    let clamp = |i: isize| i.clamp(0, last) as usize;
    for t in 0..n {
        for k in 1..=window {
            let fwd = x.row(clamp(t as isize + k as isize));
            let bwd = x.row(clamp(t as isize - k as isize));
            let w = T::from_count(k);
            for j in 0..d {
                out[[t, j]] += w * (fwd[j] - bwd[j]);
            }
        }
    }
    out.mapv_inplace(|v| v / denom);
    out
}

/// Fills the Δ and ΔΔ column blocks from the base block.
pub fn append_deltas<T: Real>(f: &FeatureMatrix<T>, cfg: &FeatureConfig) -> Result<FeatureMatrix<T>> {
    let nc = cfg.n_cepstra;
    if f.dim() != 3 * nc {
        return Err(Error::DimensionMismatch {
            context: "append_deltas",
            expected: 3 * nc,
            got: f.dim(),
        });
    }
    if cfg.delta_window == 0 {
        return Err(Error::Config("delta_window must be at least 1".into()));
    }
    let base = f.frames.slice(s![.., ..nc]);
    let delta = regression_delta(base, cfg.delta_window);
    let delta2 = regression_delta(delta.view(), cfg.delta_window);
    let mut out = f.clone();
    out.frames.slice_mut(s![.., nc..2 * nc]).assign(&delta);
    out.frames.slice_mut(s![.., 2 * nc..]).assign(&delta2);
    Ok(out)
}

/// Marks frames within `vad_dynamic_range_db` of the loudest frame as voiced.
pub fn energy_vad<T: Real>(f: &FeatureMatrix<T>, cfg: &FeatureConfig) -> FeatureMatrix<T> {
    let mut out = f.clone();
    if f.n_frames() == 0 || f.dim() == 0 {
        return out;
    }
    let energy = f.frames.column(0);
    let max = energy.iter().copied().fold(T::neg_infinity(), T::max);
    let threshold = max - T::lit(cfg.vad_dynamic_range_db * std::f64::consts::LN_10 / 10.0);
    for (flag, &e) in out.vad_mask.iter_mut().zip(energy.iter()) {
        *flag = e >= threshold;
    }
    out
}

/// Per-utterance mean/variance normalization over voiced frames; unvoiced
/// frames are dropped.
pub fn cmvn<T: Real>(f: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
    let voiced = f.voiced_frames();
    let n = voiced.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "utterance {}: cmvn needs at least 2 voiced frames, got {n}",
            f.utterance_id
        )));
    }
    let nt = T::from_count(n);
    let mean = voiced.sum_axis(Axis(0)) / nt;
    let mut out = voiced;
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        let mu = mean[j];
        col.mapv_inplace(|x| x - mu);
        // second pass removes the residual mean left by round-off
        let resid = col.sum() / nt;
        col.mapv_inplace(|x| x - resid);
        let var = col.iter().map(|&x| x * x).sum::<T>() / nt;
        let var = if var < T::lit(CMVN_VARIANCE_FLOOR) {
            log::warn!(
                "utterance {}: column {j} has zero variance, floored",
                f.utterance_id
            );
            T::lit(CMVN_VARIANCE_FLOOR)
        } else {
            var
        };
        let sd = var.sqrt();
        col.mapv_inplace(|x| x / sd);
    }
    Ok(FeatureMatrix::from_frames(f.utterance_id.clone(), out))
}

/// Full front end: MFCC, deltas, VAD, CMVN.
pub fn extract_features<T: Real>(clip: &AudioClip<T>, cfg: &FeatureConfig) -> Result<FeatureMatrix<T>> {
    let base = compute_mfcc(clip, cfg)?;
    let with_deltas = append_deltas(&base, cfg)?;
    let voiced = energy_vad(&with_deltas, cfg);
    cmvn(&voiced)
}

/// Reads a mono 16-bit integer or 32-bit float WAV file.
pub fn read_wav<T: Real>(path: &Path, id: impl Into<String>) -> Result<AudioClip<T>> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = hound::WavReader::new(std::io::BufReader::new(file)).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::format(
            path,
            format!("expected mono audio, found {} channels", spec.channels),
        ));
    }
    let samples: Vec<T> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| T::lit(f64::from(v) / 32768.0)))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| T::lit(f64::from(v))))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (fmt, bits) => {
            return Err(Error::format(
                path,
                format!("unsupported sample format {fmt:?} with {bits} bits"),
            ))
        }
    };
    Ok(AudioClip::new(id, samples, spec.sample_rate))
}

/// Writes a clip as mono 16-bit PCM, clipping to `[-1, 1]`.
pub fn write_wav<T: Real>(path: &Path, clip: &AudioClip<T>) -> Result<()> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in &clip.samples {
        let v = (s.as_f64().clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}
