//! End-to-end experiment: background models, embeddings, extractor training
//! and evaluation of every framework. Each stage is also exposed on its own
//! so the command-line tool can persist intermediate artifacts.

use std::collections::BTreeMap;

use ndarray::Array1;
use rayon::prelude::*;

use crate::compensate::{apply_compensation, fit_lda_ivectors, fit_wccn, CompEmbedding, LdaTransform, WccnTransform, DEFAULT_RIDGE};
use crate::config::ExperimentConfig;
use crate::corpus::Utterance;
use crate::einv::{augment, extract_einv, group_cells, split_utterance, train_einv, EinvNet, EpochLoss};
use crate::error::{Error, Result};
use crate::gmm::{accumulate_all, em_fit, BwStats, DiagGmm};
use crate::ident::{build_models, cosine, evaluate, grid_evaluate, EvalReport, Framework, GridReport, Trial};
use crate::labels::{Emotion, Split};
use crate::scalar::Real;
use crate::synth::{generate, SynthCorpus};
use crate::tv::{train_tv, IvectorExtractor, IVector, TvModel};

/// Stage seed derived from the root seed and a stage name (FNV-1a of the
/// name, mixed with SplitMix64).
pub fn derive_seed(root: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = root ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub const STAGE_SYNTH: &str = "synth";
pub const STAGE_UBM: &str = "ubm";
pub const STAGE_TV: &str = "tv";
pub const STAGE_AUGMENT: &str = "augment";
pub const STAGE_EINV: &str = "einv";

/// Session compensation trained on background embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Backend<T> {
    pub lda: LdaTransform<T>,
    pub wccn: WccnTransform<T>,
}

impl<T: Real> Backend<T> {
    pub fn compensate(&self, iv: &IVector<T>, speaker: &str, emotion: Emotion) -> Result<CompEmbedding<T>> {
        apply_compensation(iv, &self.lda, &self.wccn, speaker, emotion)
    }
}

pub fn train_ubm<T: Real>(background: &[&Utterance<T>], cfg: &ExperimentConfig) -> Result<DiagGmm<T>> {
    if background.is_empty() {
        return Err(Error::InsufficientData("no background utterances for the UBM".into()));
    }
    let feats: Vec<_> = background.iter().map(|u| u.features.clone()).collect();
    let fit = em_fit(&feats, cfg.ubm_components, cfg.ubm_iterations, derive_seed(cfg.seed, STAGE_UBM))?;
    if let (Some(first), Some(last)) = (fit.avg_log_likelihood.first(), fit.avg_log_likelihood.last()) {
        log::info!("UBM: {} components, avg log-likelihood {:.4} -> {:.4}", cfg.ubm_components, first.as_f64(), last.as_f64());
    }
    Ok(fit.model)
}

pub fn stats_for<T: Real>(ubm: &DiagGmm<T>, utts: &[&Utterance<T>]) -> Result<Vec<BwStats<T>>> {
    let feats: Vec<_> = utts.iter().map(|u| u.features.clone()).collect();
    accumulate_all(ubm, &feats)
}

pub fn train_tv_model<T: Real>(ubm: &DiagGmm<T>, stats: &[BwStats<T>], cfg: &ExperimentConfig) -> Result<TvModel<T>> {
    train_tv(stats, ubm, cfg.tv_rank, cfg.tv_iterations, derive_seed(cfg.seed, STAGE_TV))
}

/// LDA and WCCN from background i-vectors labeled by speaker.
pub fn train_backend<T: Real>(ivectors: &[IVector<T>], speakers: &[String], lda_dim: usize) -> Result<Backend<T>> {
    let lda = fit_lda_ivectors(ivectors, speakers, lda_dim)?;
    let w = crate::compensate::stack(ivectors.iter().map(|iv| iv.w.view()))?;
    let projected = lda.project_rows(w.view())?;
    let wccn = fit_wccn(projected.view(), speakers, DEFAULT_RIDGE)?;
    Ok(Backend { lda, wccn })
}

/// Fixed-length windows of an utterance as separate utterances; the frame
/// rate is inferred from the frame count and the labeled duration.
pub fn segment_utterance<T: Real>(u: &Utterance<T>, window_s: f64, hop_s: f64) -> Result<Vec<Utterance<T>>> {
    let specs = split_utterance(u.id(), &u.speaker, u.emotion, u.duration_s, window_s, hop_s)?;
    let rate = u.features.n_frames() as f64 / u.duration_s;
    let len = ((window_s * rate).round() as usize).max(1);
    specs
        .iter()
        .map(|s| {
            let start = (s.start_s * rate).round() as usize;
            let end = (start + len).min(u.features.n_frames());
            if start >= end {
                return Err(Error::InsufficientData(format!("segment {} has no frames", s.segment_id())));
            }
            Ok(Utterance {
                features: u.features.slice_frames(s.segment_id(), start, end),
                speaker: u.speaker.clone(),
                emotion: u.emotion,
                split: u.split,
                duration_s: s.duration_s,
            })
        })
        .collect()
}

/// Trained front-to-back models.
#[derive(Debug, Clone)]
pub struct TrainedSystem<T> {
    pub ubm: DiagGmm<T>,
    pub tv: TvModel<T>,
    pub backend: Backend<T>,
    pub net: EinvNet<T>,
    pub trace: Vec<EpochLoss>,
}

/// Everything an experiment reports.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome<T> {
    pub reports: Vec<EvalReport>,
    pub grid: GridReport,
    pub system: TrainedSystem<T>,
    pub train_embeddings: Vec<CompEmbedding<T>>,
    pub test_embeddings: Vec<CompEmbedding<T>>,
    /// Share of emotional test embeddings the extractor moves closer (in
    /// cosine) to their speaker's neutral centroid.
    pub neutral_pull_rate: f64,
}

impl<T> ExperimentOutcome<T> {
    pub fn report(&self, f: Framework) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.framework == f)
    }
}

fn embed<T: Real>(
    extractor: &IvectorExtractor<T>,
    backend: &Backend<T>,
    utts: &[&Utterance<T>],
    stats: &[BwStats<T>],
) -> Result<Vec<CompEmbedding<T>>> {
    utts.par_iter()
        .zip(stats.par_iter())
        .map(|(u, s)| backend.compensate(&extractor.extract(s)?, &u.speaker, u.emotion))
        .collect()
}

/// Runs every stage on a labeled corpus.
pub fn run_experiment<T: Real>(utts: &[Utterance<T>], cfg: &ExperimentConfig) -> Result<ExperimentOutcome<T>> {
    cfg.validate()?;
    let pick = |s: Split| utts.iter().filter(move |u| u.split == s).collect::<Vec<_>>();
    let background = pick(Split::Background);
    let train = pick(Split::Train);
    let test = pick(Split::Test);
    if train.is_empty() || test.is_empty() {
        return Err(Error::InsufficientData("corpus needs train and test utterances".into()));
    }

    let ubm = train_ubm(&background, cfg)?;
    let bg_stats = stats_for(&ubm, &background)?;
    let tv = train_tv_model(&ubm, &bg_stats, cfg)?;
    let extractor = IvectorExtractor::new(&tv);
    let bg_ivecs = extractor.extract_all(&bg_stats)?;
    let bg_speakers: Vec<String> = background.iter().map(|u| u.speaker.clone()).collect();
    let backend = train_backend(&bg_ivecs, &bg_speakers, cfg.lda_dim)?;

    let train_emb = embed(&extractor, &backend, &train, &stats_for(&ubm, &train)?)?;
    let test_emb = embed(&extractor, &backend, &test, &stats_for(&ubm, &test)?)?;

    let mut segments = Vec::new();
    for u in &train {
        segments.extend(segment_utterance(u, cfg.segment_window_s, cfg.segment_hop_s)?);
    }
    let seg_refs: Vec<&Utterance<T>> = segments.iter().collect();
    let seg_emb = embed(&extractor, &backend, &seg_refs, &stats_for(&ubm, &seg_refs)?)?;
    let pairs = augment(&group_cells(&seg_emb), &cfg.augment, derive_seed(cfg.seed, STAGE_AUGMENT))?;
    let einv_cfg = crate::einv::EinvConfig {
        seed: derive_seed(cfg.seed, STAGE_EINV),
        ..cfg.einv_config()
    };
    let training = train_einv(&pairs, &einv_cfg)?;
    let net = training.net;

    let trials: Vec<Trial<T>> = test_emb.iter().map(Trial::from).collect();
    let reports = Framework::ALL
        .iter()
        .map(|&f| {
            let models = build_models(&train_emb, f, Some(&net))?;
            evaluate(&trials, &models, f, Some(&net))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = grid_evaluate(&train_emb, &trials)?;
    let neutral_pull_rate = neutral_pull_rate(&seg_emb, &test_emb, &net)?;

    Ok(ExperimentOutcome {
        reports,
        grid,
        system: TrainedSystem {
            ubm,
            tv,
            backend,
            net,
            trace: training.trace,
        },
        train_embeddings: train_emb,
        test_embeddings: test_emb,
        neutral_pull_rate,
    })
}

/// Fraction of emotional embeddings `x` of speaker `s` with
/// `cos(f(x), c_s) > cos(x, c_s)`, where `c_s` is the mean of the speaker's
/// neutral reference embeddings.
pub fn neutral_pull_rate<T: Real>(reference: &[CompEmbedding<T>], held_out: &[CompEmbedding<T>], net: &EinvNet<T>) -> Result<f64> {
    let mut sums: BTreeMap<&str, (Array1<T>, usize)> = BTreeMap::new();
    for e in reference.iter().filter(|e| e.emotion.is_neutral()) {
        let entry = sums.entry(e.speaker.as_str()).or_insert_with(|| (Array1::zeros(e.dim()), 0));
        entry.0 += &e.e;
        entry.1 += 1;
    }
    let (mut closer, mut total) = (0usize, 0usize);
    for x in held_out.iter().filter(|e| !e.emotion.is_neutral() && e.emotion != Emotion::Unknown) {
        let Some((sum, n)) = sums.get(x.speaker.as_str()) else {
            continue;
        };
        let c = sum / T::from_count(*n);
        let mapped = extract_einv(net, x)?;
        total += 1;
        if cosine(mapped.e.view(), c.view())? > cosine(x.e.view(), c.view())? {
            closer += 1;
        }
    }
    if total == 0 {
        return Err(Error::InsufficientData("no emotional embeddings with a neutral reference".into()));
    }
    Ok(closer as f64 / total as f64)
}

/// Generates the synthetic corpus for `cfg` (seeded from the root seed).
pub fn synth_corpus<T: Real>(cfg: &ExperimentConfig) -> Result<SynthCorpus<T>> {
    let mut sc = cfg.synth.clone();
    sc.seed = derive_seed(cfg.seed, STAGE_SYNTH);
    generate(&sc)
}

pub fn run_synthetic<T: Real>(cfg: &ExperimentConfig) -> Result<ExperimentOutcome<T>> {
    let corpus = synth_corpus::<T>(cfg)?;
    run_experiment(&corpus.utterances, cfg)
}
