//! One function per subcommand. Each reads its inputs from the experiment
//! directory, writes its outputs there and returns a one-line summary.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use einv::config::ExperimentConfig;
use einv::corpus::{read_manifest, write_manifest, Manifest, Utterance};
use einv::einv::{augment, group_cells, train_einv, EinvConfig, EinvNet};
use einv::features::{extract_features, read_wav, write_wav};
use einv::ident::{
    build_models, embeddings_csv, evaluate, format_framework_table, format_grid_table, framework_csv, grid_csv,
    grid_evaluate, Framework, SpeakerModel, Trial,
};
use einv::io::{self, RowLabel};
use einv::labels::{Emotion, Split};
use einv::pipeline::{self, derive_seed, segment_utterance, Backend, STAGE_AUGMENT, STAGE_EINV};
use einv::synth::{synth_clip, AudioSynthConfig};
use einv::tv::IvectorExtractor;

use crate::layout::{Layout, Set};

pub struct Ctx {
    pub layout: Layout,
    pub cfg: ExperimentConfig,
}

impl Ctx {
    fn write_config(&self) -> Result<()> {
        let path = self.layout.config();
        std::fs::write(&path, self.cfg.to_text()).with_context(|| format!("writing {}", path.display()))
    }

    fn manifest(&self) -> Result<Manifest> {
        Ok(read_manifest(&self.layout.manifest())?)
    }

    fn utterances(&self, split: Split) -> Result<Vec<Utterance<f64>>> {
        let manifest = self.manifest()?;
        manifest
            .split(split)
            .collect::<Vec<_>>()
            .par_iter()
            .map(|row| {
                let features = io::load_features(&self.layout.features(&row.id), row.id.clone())?;
                Ok(Utterance {
                    features,
                    speaker: row.speaker.clone(),
                    emotion: row.emotion,
                    split: row.split,
                    duration_s: row.duration_s,
                })
            })
            .collect()
    }

    fn set_utterances(&self, set: Set) -> Result<Vec<Utterance<f64>>> {
        let utts = self.utterances(set.split())?;
        if set != Set::Segments {
            return Ok(utts);
        }
        let mut out = Vec::new();
        for u in &utts {
            out.extend(segment_utterance(u, self.cfg.segment_window_s, self.cfg.segment_hop_s)?);
        }
        Ok(out)
    }

    fn net(&self) -> Result<EinvNet<f64>> {
        Ok(io::load_einv(&self.layout.einv())?)
    }

    fn einv_config(&self) -> EinvConfig {
        EinvConfig {
            seed: derive_seed(self.cfg.seed, STAGE_EINV),
            ..self.cfg.einv_config()
        }
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

fn labels_of(utts: &[Utterance<f64>]) -> Vec<RowLabel> {
    utts.iter()
        .map(|u| RowLabel {
            id: u.id().to_string(),
            speaker: u.speaker.clone(),
            emotion: u.emotion,
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn synth_gen(ctx: &Ctx, audio: bool) -> Result<String> {
    let corpus = pipeline::synth_corpus::<f64>(&ctx.cfg)?;
    ensure_dir(ctx.layout.root())?;
    let mut manifest = Manifest::default();
    if audio {
        ensure_dir(&ctx.layout.audio_dir())?;
        let acfg = AudioSynthConfig::default();
        let n_spk = corpus.truth.speakers.len();
        let index_of = |spk: &str| {
            corpus
                .truth
                .speakers
                .iter()
                .position(|s| s == spk)
                .or_else(|| corpus.truth.background_speakers.iter().position(|s| s == spk).map(|i| n_spk + i))
                .expect("speaker from the corpus")
        };
        let rows: Vec<_> = corpus
            .utterances
            .par_iter()
            .map(|u| -> Result<einv::corpus::ManifestRow> {
                let seed = derive_seed(ctx.cfg.seed, &format!("audio/{}", u.id()));
                let clip = synth_clip::<f64>(&acfg, u.id(), index_of(&u.speaker), u.emotion, u.duration_s, seed);
                let rel = format!("audio/{}.wav", crate::layout::sanitize(u.id()));
                write_wav(&ctx.layout.root().join(&rel), &clip)?;
                let mut row = u.row();
                row.id = rel;
                Ok(row)
            })
            .collect::<Result<_>>()?;
        manifest.rows = rows;
    } else {
        ensure_dir(&ctx.layout.features_dir())?;
        corpus
            .utterances
            .par_iter()
            .try_for_each(|u| io::save_features(&ctx.layout.features(u.id()), &u.features))?;
        manifest.rows = corpus.utterances.iter().map(|u| u.row()).collect();
    }
    write_manifest(&ctx.layout.manifest(), &manifest)?;
    ctx.write_config()?;
    let count = |s: Split| manifest.split(s).count();
    Ok(format!(
        "synth-gen: {} utterances ({} background, {} train, {} test){} -> {}",
        manifest.rows.len(),
        count(Split::Background),
        count(Split::Train),
        count(Split::Test),
        if audio { " as audio" } else { "" },
        ctx.layout.root().display()
    ))
}

pub fn featurize(ctx: &Ctx, manifest_path: Option<&Path>) -> Result<String> {
    let src: PathBuf = manifest_path.map_or_else(|| ctx.layout.manifest(), Path::to_path_buf);
    let manifest = read_manifest(&src)?;
    let base = src.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    // audio paths in the copied manifest must resolve from the experiment directory
    let rebase = base != ctx.layout.root();
    ensure_dir(&ctx.layout.features_dir())?;
    let rows = manifest
        .rows
        .par_iter()
        .map(|row| -> Result<_> {
            let wav = base.join(&row.id);
            let mut out = row.clone();
            if rebase {
                out.id = wav.to_string_lossy().into_owned();
            }
            let clip = read_wav::<f64>(&wav, out.id.clone())?;
            let feats = extract_features(&clip, &ctx.cfg.features).with_context(|| format!("featurizing {}", wav.display()))?;
            io::save_features(&ctx.layout.features(&out.id), &feats)?;
            out.duration_s = clip.duration_s();
            Ok((out, feats.n_frames(), feats.n_voiced()))
        })
        .collect::<Result<Vec<_>>>()?;
    let frames: usize = rows.iter().map(|r| r.1).sum();
    let voiced: usize = rows.iter().map(|r| r.2).sum();
    let out = Manifest {
        rows: rows.into_iter().map(|r| r.0).collect(),
    };
    write_manifest(&ctx.layout.manifest(), &out)?;
    ctx.write_config()?;
    Ok(format!(
        "featurize: {} utterances, {frames} frames ({voiced} voiced) -> {}",
        out.rows.len(),
        ctx.layout.features_dir().display()
    ))
}

pub fn train_ubm(ctx: &Ctx) -> Result<String> {
    let bg = ctx.utterances(Split::Background)?;
    let refs: Vec<_> = bg.iter().collect();
    let ubm = pipeline::train_ubm(&refs, &ctx.cfg)?;
    io::save_ubm(&ctx.layout.ubm(), &ubm)?;
    Ok(format!(
        "train-ubm: {} components x {} dims from {} background utterances -> {}",
        ubm.n_components(),
        ubm.dim(),
        bg.len(),
        ctx.layout.ubm().display()
    ))
}

pub fn accumulate_stats(ctx: &Ctx) -> Result<String> {
    let ubm = io::load_ubm::<f64>(&ctx.layout.ubm())?;
    let mut counts = Vec::new();
    for set in Set::ALL {
        let utts = ctx.set_utterances(set)?;
        if utts.is_empty() {
            anyhow::bail!(einv::Error::InsufficientData(format!("no {} utterances", set.name())));
        }
        let refs: Vec<_> = utts.iter().collect();
        let stats = pipeline::stats_for(&ubm, &refs)?;
        io::save_stats(&ctx.layout.stats(set), &stats, &labels_of(&utts))?;
        counts.push(format!("{} {}", stats.len(), set.name()));
    }
    Ok(format!("accumulate-stats: {}", counts.join(", ")))
}

pub fn train_tv(ctx: &Ctx) -> Result<String> {
    let ubm = io::load_ubm::<f64>(&ctx.layout.ubm())?;
    let (stats, _) = io::load_stats::<f64>(&ctx.layout.stats(Set::Background))?;
    let tv = pipeline::train_tv_model(&ubm, &stats, &ctx.cfg)?;
    io::save_tv(&ctx.layout.tv(), &tv)?;
    Ok(format!(
        "train-tv: rank {} from {} utterances, {} iterations -> {}",
        tv.rank(),
        stats.len(),
        ctx.cfg.tv_iterations,
        ctx.layout.tv().display()
    ))
}

pub fn extract_ivectors(ctx: &Ctx) -> Result<String> {
    let tv = io::load_tv::<f64>(&ctx.layout.tv())?;
    let ex = IvectorExtractor::new(&tv);
    let mut counts = Vec::new();
    for set in Set::ALL {
        let (stats, labels) = io::load_stats::<f64>(&ctx.layout.stats(set))?;
        let ivs = ex.extract_all(&stats)?;
        io::save_ivectors(&ctx.layout.ivectors(set), &ivs, &labels)?;
        counts.push(format!("{} {}", ivs.len(), set.name()));
    }
    Ok(format!("extract-ivectors: {} (dim {})", counts.join(", "), tv.rank()))
}

pub fn train_backend(ctx: &Ctx) -> Result<String> {
    let (ivs, labels) = io::load_ivectors::<f64>(&ctx.layout.ivectors(Set::Background))?;
    let speakers: Vec<String> = labels.iter().map(|l| l.speaker.clone()).collect();
    let backend = pipeline::train_backend(&ivs, &speakers, ctx.cfg.lda_dim)?;
    io::save_lda(&ctx.layout.lda(), &backend.lda)?;
    io::save_wccn(&ctx.layout.wccn(), &backend.wccn)?;
    for set in [Set::Train, Set::Test, Set::Segments] {
        compensate_set(ctx, &backend, set)?;
    }
    Ok(format!(
        "train-backend: LDA {} -> {} and WCCN from {} background i-vectors; embeddings written",
        backend.lda.input_dim(),
        backend.lda.output_dim(),
        ivs.len()
    ))
}

fn compensate_set(ctx: &Ctx, backend: &Backend<f64>, set: Set) -> Result<()> {
    let (ivs, labels) = io::load_ivectors::<f64>(&ctx.layout.ivectors(set))?;
    let embs = ivs
        .iter()
        .zip(&labels)
        .map(|(iv, l)| backend.compensate(iv, &l.speaker, l.emotion))
        .collect::<einv::Result<Vec<_>>>()?;
    io::save_embeddings(&ctx.layout.embeddings(set), &embs)?;
    if set != Set::Segments {
        write_text(&ctx.layout.embeddings_csv(set), &embeddings_csv(&embs))?;
    }
    Ok(())
}

pub fn train_einv_stage(ctx: &Ctx) -> Result<String> {
    let segs = io::load_embeddings::<f64>(&ctx.layout.embeddings(Set::Segments))?;
    let pairs = augment(&group_cells(&segs), &ctx.cfg.augment, derive_seed(ctx.cfg.seed, STAGE_AUGMENT))?;
    let training = train_einv(&pairs, &ctx.einv_config())?;
    io::save_einv(&ctx.layout.einv(), &training.net)?;
    write_text(&ctx.layout.loss_trace(), &io::loss_trace_csv(&training.trace))?;
    let first = training.trace.first().map_or(f64::NAN, |t| t.val_mse);
    let last = training.trace.last().map_or(f64::NAN, |t| t.val_mse);
    Ok(format!(
        "train-einv: {} pairs from {} segments, {} epochs, validation MSE {first:.4} -> {last:.4}",
        pairs.len(),
        segs.len(),
        training.trace.len() - 1
    ))
}

fn net_for(ctx: &Ctx, f: Framework) -> Result<Option<EinvNet<f64>>> {
    if f.extracts_test() || f.extracts_models() {
        Ok(Some(ctx.net()?))
    } else {
        Ok(None)
    }
}

pub fn enroll(ctx: &Ctx, frameworks: &[Framework]) -> Result<String> {
    let train = io::load_embeddings::<f64>(&ctx.layout.embeddings(Set::Train))?;
    let mut done = Vec::new();
    for &f in frameworks {
        let net = net_for(ctx, f)?;
        let models = build_models(&train, f, net.as_ref())?;
        let rows = einv::compensate::stack(models.iter().map(|m| m.embedding.view()))?;
        let emotion = if f == Framework::Baseline { Emotion::Neutral } else { Emotion::Unknown };
        let labels: Vec<RowLabel> = models
            .iter()
            .map(|m| RowLabel {
                id: m.speaker.clone(),
                speaker: m.speaker.clone(),
                emotion,
            })
            .collect();
        io::save_labeled(&ctx.layout.models(f.cli_name()), &rows, &labels)?;
        done.push(format!("{f} ({} models)", models.len()));
    }
    Ok(format!("enroll: {}", done.join(", ")))
}

fn load_models(ctx: &Ctx, f: Framework) -> Result<Vec<SpeakerModel<f64>>> {
    let (rows, labels) = io::load_labeled::<f64>(&ctx.layout.models(f.cli_name()))?;
    Ok(rows
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(r, l)| SpeakerModel {
            speaker: l.speaker,
            embedding: r.to_owned(),
            framework: f,
        })
        .collect())
}

pub fn evaluate_stage(ctx: &Ctx, frameworks: &[Framework]) -> Result<String> {
    let test = io::load_embeddings::<f64>(&ctx.layout.embeddings(Set::Test))?;
    let trials: Vec<Trial<f64>> = test.iter().map(Trial::from).collect();
    let mut reports = Vec::new();
    for &f in frameworks {
        let models = load_models(ctx, f)?;
        let net = net_for(ctx, f)?;
        reports.push(evaluate(&trials, &models, f, net.as_ref())?);
    }
    let seed = Some(ctx.cfg.seed);
    write_text(&ctx.layout.report_txt(), &format_framework_table(&reports, seed))?;
    write_text(&ctx.layout.report_csv(), &framework_csv(&reports, seed))?;
    let summary: Vec<String> = reports
        .iter()
        .map(|r| format!("{} {}", r.framework, einv::ident::fmt1(r.macro_average)))
        .collect();
    Ok(format!(
        "evaluate: {} trials; macro accuracy {} -> {}",
        trials.len(),
        summary.join(", "),
        ctx.layout.report_txt().display()
    ))
}

pub fn grid_eval(ctx: &Ctx) -> Result<String> {
    let train = io::load_embeddings::<f64>(&ctx.layout.embeddings(Set::Train))?;
    let test = io::load_embeddings::<f64>(&ctx.layout.embeddings(Set::Test))?;
    let trials: Vec<Trial<f64>> = test.iter().map(Trial::from).collect();
    let grid = grid_evaluate(&train, &trials)?;
    write_text(&ctx.layout.grid_txt(), &format_grid_table(&grid, Some(ctx.cfg.seed)))?;
    write_text(&ctx.layout.grid_csv(), &grid_csv(&grid))?;
    let best = grid
        .by_train
        .iter()
        .max_by(|a, b| a.1.macro_average.total_cmp(&b.1.macro_average))
        .map(|(e, r)| format!("{e} {}", einv::ident::fmt1(r.macro_average)))
        .unwrap_or_default();
    Ok(format!(
        "grid-eval: {} train emotions x {} trials; best train emotion {best} -> {}",
        grid.by_train.len(),
        trials.len(),
        ctx.layout.grid_txt().display()
    ))
}

/// Every stage in order on a synthetic corpus.
pub fn run_all(ctx: &Ctx) -> Result<Vec<String>> {
    let all = Framework::ALL.to_vec();
    Ok(vec![
        synth_gen(ctx, false)?,
        train_ubm(ctx)?,
        accumulate_stats(ctx)?,
        train_tv(ctx)?,
        extract_ivectors(ctx)?,
        train_backend(ctx)?,
        train_einv_stage(ctx)?,
        enroll(ctx, &all)?,
        evaluate_stage(ctx, &all)?,
        grid_eval(ctx)?,
    ])
}
