//! Flat `key = value` experiment configuration.
//!
//! Every key has a default; a file only lists overrides. Blank lines and
//! `#` comments are ignored. Unknown keys and ill-typed values are errors
//! naming the key.

use std::fmt::Write as _;
use std::path::Path;

use crate::einv::{AugmentConfig, EinvConfig};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub features: FeatureConfig,
    pub ubm_components: usize,
    pub ubm_iterations: usize,
    pub tv_rank: usize,
    pub tv_iterations: usize,
    pub lda_dim: usize,
    pub segment_window_s: f64,
    pub segment_hop_s: f64,
    pub augment: AugmentConfig,
    /// Hidden layer widths; input and output follow `lda_dim`.
    pub einv_hidden: Vec<usize>,
    pub einv: EinvConfig,
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            features: FeatureConfig::default(),
            ubm_components: 1024,
            ubm_iterations: 10,
            tv_rank: 400,
            tv_iterations: 5,
            lda_dim: 150,
            segment_window_s: 30.0,
            segment_hop_s: 10.0,
            augment: AugmentConfig::default(),
            einv_hidden: vec![64, 32, 64],
            einv: EinvConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn parse_num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key {key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|v| parse_num::<usize>(key, v.trim()))
        .collect()
}

// (key, accessor) table shared by parsing and printing.
macro_rules! scalar_keys {
    ($m:ident, $self:ident) => {
        $m!(seed, $self.seed);
        $m!(frame_len_ms, $self.features.frame_len_ms);
        $m!(frame_shift_ms, $self.features.frame_shift_ms);
        $m!(n_cepstra, $self.features.n_cepstra);
        $m!(n_mel_filters, $self.features.n_mel_filters);
        $m!(preemphasis, $self.features.preemphasis);
        $m!(delta_window, $self.features.delta_window);
        $m!(vad_dynamic_range_db, $self.features.vad_dynamic_range_db);
        $m!(ubm_components, $self.ubm_components);
        $m!(ubm_iterations, $self.ubm_iterations);
        $m!(tv_rank, $self.tv_rank);
        $m!(tv_iterations, $self.tv_iterations);
        $m!(lda_dim, $self.lda_dim);
        $m!(segment_window_s, $self.segment_window_s);
        $m!(segment_hop_s, $self.segment_hop_s);
        $m!(augment_pairs, $self.augment.total_pairs);
        $m!(augment_k_min, $self.augment.k_min);
        $m!(augment_k_max, $self.augment.k_max);
        $m!(einv_learning_rate, $self.einv.learning_rate);
        $m!(einv_beta1, $self.einv.beta1);
        $m!(einv_beta2, $self.einv.beta2);
        $m!(einv_epsilon, $self.einv.epsilon);
        $m!(einv_epochs, $self.einv.epochs);
        $m!(einv_batch_size, $self.einv.batch_size);
        $m!(einv_train_fraction, $self.einv.train_fraction);
        $m!(synth_speakers, $self.synth.n_speakers);
        $m!(synth_feature_dim, $self.synth.feature_dim);
        $m!(synth_speaker_spread, $self.synth.speaker_spread);
        $m!(synth_emotion_shift, $self.synth.emotion_shift);
        $m!(synth_within_noise, $self.synth.within_noise);
        $m!(synth_frames_per_second, $self.synth.frames_per_second);
        $m!(synth_train_duration_s, $self.synth.train_duration_s);
        $m!(synth_test_duration_s, $self.synth.test_duration_s);
        $m!(synth_train_utts, $self.synth.train_utts);
        $m!(synth_test_utts, $self.synth.test_utts);
        $m!(synth_background, $self.synth.n_background);
        $m!(synth_background_utts, $self.synth.background_utts);
        $m!(synth_background_duration_s, $self.synth.background_duration_s);
    };
}

impl ExperimentConfig {
    /// Desk-scale model sizes: 64-component UBM, rank-50 total variability
    /// and a 20-dimensional LDA, keeping roughly the full-scale 150/400
    /// LDA-to-rank ratio.
    pub fn desk() -> Self {
        Self {
            ubm_components: 64,
            tv_rank: 50,
            lda_dim: 20,
            ..Self::default()
        }
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        macro_rules! try_key {
            ($name:ident, $field:expr) => {
                if key == stringify!($name) {
                    $field = parse_num(key, value)?;
                    return Ok(());
                }
            };
        }
        scalar_keys!(try_key, self);
        match key {
            "einv_hidden" => {
                self.einv_hidden = parse_list(key, value)?;
                Ok(())
            }
            "synth_emotions" => {
                self.synth.emotions = value
                    .split(',')
                    .map(|e| e.trim().parse())
                    .collect::<Result<_>>()
                    .map_err(|_| Error::Config(format!("key {key}: cannot parse {value:?}")))?;
                Ok(())
            }
            _ => Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Every key with its current value, one per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        macro_rules! put {
            ($name:ident, $field:expr) => {
                let _ = writeln!(out, "{} = {}", stringify!($name), $field);
            };
        }
        scalar_keys!(put, self);
        let hidden: Vec<String> = self.einv_hidden.iter().map(|h| h.to_string()).collect();
        let _ = writeln!(out, "einv_hidden = {}", hidden.join(","));
        let emotions: Vec<&str> = self.synth.emotions.iter().map(|e| e.code()).collect();
        let _ = writeln!(out, "synth_emotions = {}", emotions.join(","));
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if self.ubm_components == 0 || self.ubm_iterations == 0 {
            return Err(Error::Config("ubm_components and ubm_iterations must be positive".into()));
        }
        if self.tv_rank == 0 || self.tv_iterations == 0 {
            return Err(Error::Config("tv_rank and tv_iterations must be positive".into()));
        }
        if self.lda_dim == 0 || self.lda_dim > self.tv_rank {
            return Err(Error::Config(format!(
                "lda_dim = {} must lie in 1..=tv_rank ({})",
                self.lda_dim, self.tv_rank
            )));
        }
        if !(self.segment_window_s > 0.0 && self.segment_hop_s > 0.0) {
            return Err(Error::Config("segment_window_s and segment_hop_s must be positive".into()));
        }
        if self.augment.k_min == 0 || self.augment.k_min > self.augment.k_max || self.augment.total_pairs == 0 {
            return Err(Error::Config("augment_k_min..augment_k_max or augment_pairs invalid".into()));
        }
        if self.einv_hidden.is_empty() || self.einv_hidden.contains(&0) {
            return Err(Error::Config("einv_hidden needs positive widths".into()));
        }
        self.einv_config().validate()?;
        self.synth.validate()
    }

    /// Extractor settings with layer sizes derived from `lda_dim`.
    pub fn einv_config(&self) -> EinvConfig {
        let mut dims = vec![self.lda_dim];
        dims.extend(&self.einv_hidden);
        dims.push(self.lda_dim);
        EinvConfig {
            layer_dims: dims,
            ..self.einv.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ExperimentConfig::parse("# comment\nubm_components = 64\n tv_rank=50 # trailing\n\nlda_dim = 20\neinv_hidden = 8,4,8\n")
            .unwrap();
        assert_eq!(cfg.ubm_components, 64);
        assert_eq!(cfg.tv_rank, 50);
        assert_eq!(cfg.einv_config().layer_dims, vec![20, 8, 4, 8, 20]);
        assert_eq!(cfg.einv.batch_size, 256);
        assert_eq!(ExperimentConfig::default().einv_config().layer_dims, vec![150, 64, 32, 64, 150]);
    }

    #[test]
    fn errors_name_the_key() {
        let err = ExperimentConfig::parse("ubm_component = 3").unwrap_err().to_string();
        assert!(err.contains("ubm_component"), "{err}");
        let err = ExperimentConfig::parse("tv_rank = many").unwrap_err().to_string();
        assert!(err.contains("tv_rank"), "{err}");
        assert!(ExperimentConfig::parse("lda_dim = 500").is_err());
        assert!(ExperimentConfig::parse("novalue").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::desk();
        cfg.synth.emotion_shift = 0.0;
        cfg.seed = 17;
        let back = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }
}
