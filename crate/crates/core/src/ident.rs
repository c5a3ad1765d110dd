//! Closed-set speaker identification: speaker models for each framework,
//! cosine scoring, accuracy reports and their text/CSV renderings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::compensate::CompEmbedding;
use crate::einv::{extract_einv, EinvNet};
use crate::error::{Error, Result};
use crate::labels::Emotion;
use crate::scalar::Real;

/// Speaker-model / test-embedding treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Framework {
    /// Single-emotion speaker models, no extractor.
    Baseline,
    /// Models average a speaker's embeddings over all emotions.
    AvgIvec,
    /// Averaged raw models; test embeddings pass through the extractor.
    EinvTest,
    /// Both enrollment and test embeddings pass through the extractor.
    EinvPair,
}

impl Framework {
    pub const ALL: [Framework; 4] = [
        Framework::Baseline,
        Framework::AvgIvec,
        Framework::EinvTest,
        Framework::EinvPair,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            Framework::Baseline => "baseline",
            Framework::AvgIvec => "avg-ivec",
            Framework::EinvTest => "einv-test",
            Framework::EinvPair => "einv-pair",
        }
    }

    /// Column title in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Framework::Baseline => "Baseline",
            Framework::AvgIvec => "Avg. i-vector",
            Framework::EinvTest => "EINV-Test",
            Framework::EinvPair => "EINV-Pair",
        }
    }

    pub fn extracts_test(self) -> bool {
        matches!(self, Framework::EinvTest | Framework::EinvPair)
    }

    pub fn extracts_models(self) -> bool {
        self == Framework::EinvPair
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Framework {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Framework::ALL
            .into_iter()
            .find(|f| f.cli_name() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown framework {s:?} (expected baseline, avg-ivec, einv-test or einv-pair)"
                ))
            })
    }
}

/// Enrollment model of one speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerModel<T> {
    pub speaker: String,
    pub embedding: Array1<T>,
    pub framework: Framework,
}

/// One test embedding with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial<T> {
    pub id: String,
    pub test_embedding: Array1<T>,
    pub true_speaker: String,
    pub emotion: Emotion,
}

impl<T: Real> From<&CompEmbedding<T>> for Trial<T> {
    fn from(e: &CompEmbedding<T>) -> Self {
        Self {
            id: e.utterance_id.clone(),
            test_embedding: e.e.clone(),
            true_speaker: e.speaker.clone(),
            emotion: e.emotion,
        }
    }
}

/// Cosine similarity; zero-norm inputs are an error.
pub fn cosine<T: Real>(a: ArrayView1<T>, b: ArrayView1<T>) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "cosine",
            expected: a.len(),
            got: b.len(),
        });
    }
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == T::zero() || nb == T::zero() {
        return Err(Error::ZeroNorm);
    }
    Ok(a.dot(&b) / (na * nb))
}

fn require_net<T>(net: Option<&EinvNet<T>>, framework: Framework) -> Result<&EinvNet<T>> {
    net.ok_or_else(|| Error::Config(format!("framework {framework} needs a trained extractor")))
}

fn mean_rows<T: Real>(rows: &[Array1<T>]) -> Array1<T> {
    let mut acc = Array1::<T>::zeros(rows[0].len());
    for r in rows {
        acc += r;
    }
    acc / T::from_count(rows.len())
}

/// Baseline models: every train embedding of `emotion` is its own model.
pub fn build_baseline_models<T: Real>(train: &[CompEmbedding<T>], emotion: Emotion) -> Result<Vec<SpeakerModel<T>>> {
    let models: Vec<_> = train
        .iter()
        .filter(|e| e.emotion == emotion)
        .map(|e| SpeakerModel {
            speaker: e.speaker.clone(),
            embedding: e.e.clone(),
            framework: Framework::Baseline,
        })
        .collect();
    if models.is_empty() {
        return Err(Error::InsufficientData(format!("no train embeddings of emotion {emotion}")));
    }
    Ok(models)
}

/// Speaker models for `framework`. Baseline uses neutral train data; see
/// [`build_baseline_models`] for other train emotions.
pub fn build_models<T: Real>(
    train: &[CompEmbedding<T>],
    framework: Framework,
    net: Option<&EinvNet<T>>,
) -> Result<Vec<SpeakerModel<T>>> {
    if train.is_empty() {
        return Err(Error::InsufficientData("no train embeddings".into()));
    }
    if framework == Framework::Baseline {
        return build_baseline_models(train, Emotion::Neutral);
    }
    let net = if framework.extracts_models() {
        Some(require_net(net, framework)?)
    } else {
        None
    };
    let mut per_speaker: BTreeMap<&str, Vec<Array1<T>>> = BTreeMap::new();
    for e in train {
        let v = match net {
            Some(n) => extract_einv(n, e)?.e,
            None => e.e.clone(),
        };
        per_speaker.entry(e.speaker.as_str()).or_default().push(v);
    }
    Ok(per_speaker
        .into_iter()
        .map(|(speaker, rows)| SpeakerModel {
            speaker: speaker.to_string(),
            embedding: mean_rows(&rows),
            framework,
        })
        .collect())
}

/// Highest-cosine speaker; ties go to the lexicographically smallest label.
pub fn identify<T: Real>(
    trial: &Trial<T>,
    models: &[SpeakerModel<T>],
    framework: Framework,
    net: Option<&EinvNet<T>>,
) -> Result<String> {
    if models.is_empty() {
        return Err(Error::InsufficientData("no speaker models".into()));
    }
    let test = if framework.extracts_test() {
        require_net(net, framework)?.forward(trial.test_embedding.view())
    } else {
        trial.test_embedding.clone()
    };
    let mut best: Option<(T, &str)> = None;
    for m in models {
        let s = cosine(test.view(), m.embedding.view())?;
        best = match best {
            Some((bs, bl)) if bs > s || (bs == s && bl <= m.speaker.as_str()) => Some((bs, bl)),
            _ => Some((s, m.speaker.as_str())),
        };
    }
    Ok(best.map(|(_, l)| l.to_string()).expect("non-empty models"))
}

/// Hits and trials of one emotion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    pub fn percent(self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.total as f64
        }
    }
}

/// Per-emotion accuracies of one framework.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub framework: Framework,
    pub per_emotion: BTreeMap<Emotion, Tally>,
    /// Unweighted mean of the per-emotion percentages.
    pub macro_average: f64,
    /// Enrolled speakers in confusion-matrix order.
    pub speakers: Vec<String>,
    /// `confusion[e][[true, predicted]]` trial counts.
    pub confusion: BTreeMap<Emotion, Array2<usize>>,
}

impl EvalReport {
    pub fn accuracy(&self, emotion: Emotion) -> Option<f64> {
        self.per_emotion.get(&emotion).map(|t| t.percent())
    }
}

/// Unweighted mean of per-emotion accuracies.
pub fn macro_average(accuracies: &[f64]) -> f64 {
    if accuracies.is_empty() {
        return 0.0;
    }
    accuracies.iter().sum::<f64>() / accuracies.len() as f64
}

/// Rounds to one decimal, halves away from zero. The value is first snapped
/// to a 1e-6 grid so binary noise in e.g. 87.85 does not decide the half.
pub fn round1(x: f64) -> f64 {
    let micro = (x * 1e6).round() as i64;
    let tenths = (micro.abs() + 50_000) / 100_000;
    micro.signum() as f64 * tenths as f64 / 10.0
}

/// One-decimal rendering used in every report.
pub fn fmt1(x: f64) -> String {
    format!("{:.1}", round1(x))
}

/// Scores every trial and tallies per-emotion accuracy.
pub fn evaluate<T: Real>(
    trials: &[Trial<T>],
    models: &[SpeakerModel<T>],
    framework: Framework,
    net: Option<&EinvNet<T>>,
) -> Result<EvalReport> {
    if trials.is_empty() {
        return Err(Error::InsufficientData("no trials to evaluate".into()));
    }
    let speakers: Vec<String> = models
        .iter()
        .map(|m| m.speaker.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = speakers.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let predictions: Vec<String> = trials
        .par_iter()
        .map(|t| identify(t, models, framework, net))
        .collect::<Result<_>>()?;

    let mut per_emotion: BTreeMap<Emotion, Tally> = BTreeMap::new();
    let mut confusion: BTreeMap<Emotion, Array2<usize>> = BTreeMap::new();
    for (t, pred) in trials.iter().zip(&predictions) {
        let truth = *index.get(t.true_speaker.as_str()).ok_or_else(|| {
            Error::InvalidInput(format!(
                "trial {} belongs to speaker {} who is not enrolled",
                t.id, t.true_speaker
            ))
        })?;
        let tally = per_emotion.entry(t.emotion).or_default();
        tally.total += 1;
        if *pred == t.true_speaker {
            tally.correct += 1;
        }
        confusion
            .entry(t.emotion)
            .or_insert_with(|| Array2::zeros((speakers.len(), speakers.len())))[[truth, index[pred.as_str()]]] += 1;
    }
    let accs: Vec<f64> = per_emotion.values().map(|t| t.percent()).collect();
    Ok(EvalReport {
        framework,
        macro_average: macro_average(&accs),
        per_emotion,
        speakers,
        confusion,
    })
}

/// Baseline accuracies for every (train emotion, test emotion) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    /// Keyed by train emotion.
    pub by_train: BTreeMap<Emotion, EvalReport>,
}

/// Single-emotion enrollment for each train emotion, scored on all trials.
pub fn grid_evaluate<T: Real>(train: &[CompEmbedding<T>], trials: &[Trial<T>]) -> Result<GridReport> {
    let emotions: BTreeSet<Emotion> = train.iter().map(|e| e.emotion).collect();
    let mut by_train = BTreeMap::new();
    for emo in emotions {
        let models = build_baseline_models(train, emo)?;
        by_train.insert(emo, evaluate(trials, &models, Framework::Baseline, None)?);
    }
    Ok(GridReport { by_train })
}

fn test_emotions<'a>(reports: impl Iterator<Item = &'a EvalReport>) -> Vec<Emotion> {
    reports
        .flat_map(|r| r.per_emotion.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn cell(r: &EvalReport, e: Emotion) -> String {
    r.accuracy(e).map_or_else(|| "-".to_string(), fmt1)
}

/// Fixed-width table: test emotions down, one column per framework.
pub fn format_framework_table(reports: &[EvalReport], seed: Option<u64>) -> String {
    let emotions = test_emotions(reports.iter());
    let width = reports.iter().map(|r| r.framework.title().len()).max().unwrap_or(0).max(7);
    let mut out = String::new();
    let _ = write!(out, "{:<8}", "Test");
    for r in reports {
        let _ = write!(out, " | {:>width$}", r.framework.title());
    }
    out.push('\n');
    let rule = "-".repeat(8 + reports.len() * (width + 3));
    out.push_str(&rule);
    out.push('\n');
    for e in &emotions {
        let _ = write!(out, "{:<8}", e.code());
        for r in reports {
            let _ = write!(out, " | {:>width$}", cell(r, *e));
        }
        out.push('\n');
    }
    out.push_str(&rule);
    out.push('\n');
    let _ = write!(out, "{:<8}", "Average");
    for r in reports {
        let _ = write!(out, " | {:>width$}", fmt1(r.macro_average));
    }
    out.push('\n');
    if let Some(s) = seed {
        let _ = writeln!(out, "root seed: {s}");
    }
    out
}

/// `framework,<emotion codes...>,average[,seed]` with one row per report.
pub fn framework_csv(reports: &[EvalReport], seed: Option<u64>) -> String {
    let emotions = test_emotions(reports.iter());
    let mut out = String::from("framework");
    for e in &emotions {
        out.push(',');
        out.push_str(e.code());
    }
    out.push_str(",average");
    if seed.is_some() {
        out.push_str(",seed");
    }
    out.push('\n');
    for r in reports {
        out.push_str(r.framework.cli_name());
        for e in &emotions {
            out.push(',');
            out.push_str(&cell(r, *e));
        }
        out.push(',');
        out.push_str(&fmt1(r.macro_average));
        if let Some(s) = seed {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
    }
    out
}

/// Test emotions down, train emotions across, macro average at the bottom.
pub fn format_grid_table(grid: &GridReport, seed: Option<u64>) -> String {
    let emotions = test_emotions(grid.by_train.values());
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} | Train emotion", "Test");
    let _ = write!(out, "{:<8}", "");
    for e in grid.by_train.keys() {
        let _ = write!(out, " | {:>5}", e.code());
    }
    out.push('\n');
    let rule = "-".repeat(8 + grid.by_train.len() * 8);
    out.push_str(&rule);
    out.push('\n');
    for te in &emotions {
        let _ = write!(out, "{:<8}", te.code());
        for r in grid.by_train.values() {
            let _ = write!(out, " | {:>5}", cell(r, *te));
        }
        out.push('\n');
    }
    out.push_str(&rule);
    out.push('\n');
    let _ = write!(out, "{:<8}", "Average");
    for r in grid.by_train.values() {
        let _ = write!(out, " | {:>5}", fmt1(r.macro_average));
    }
    out.push('\n');
    if let Some(s) = seed {
        let _ = writeln!(out, "root seed: {s}");
    }
    out
}

/// `train,test,accuracy` rows plus one `average` row per train emotion.
pub fn grid_csv(grid: &GridReport) -> String {
    let mut out = String::from("train,test,accuracy\n");
    for (train, r) in &grid.by_train {
        for (test, t) in &r.per_emotion {
            let _ = writeln!(out, "{},{},{}", train.code(), test.code(), fmt1(t.percent()));
        }
        let _ = writeln!(out, "{},average,{}", train.code(), fmt1(r.macro_average));
    }
    out
}

/// `id,speaker,emotion,e0,…` for external plotting.
pub fn embeddings_csv<T: Real>(embeddings: &[CompEmbedding<T>]) -> String {
    let dim = embeddings.first().map_or(0, |e| e.dim());
    let mut out = String::from("id,speaker,emotion");
    for j in 0..dim {
        let _ = write!(out, ",e{j}");
    }
    out.push('\n');
    for e in embeddings {
        let _ = write!(out, "{},{},{}", e.utterance_id, e.speaker, e.emotion.code());
        for v in e.e.iter() {
            let _ = write!(out, ",{}", v.as_f64());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn emb(v: Array1<f64>, spk: &str, emo: Emotion) -> CompEmbedding<f64> {
        CompEmbedding::new(v, format!("{spk}-{emo}"), spk, emo)
    }

    #[test]
    fn cosine_basics() {
        let x: Array1<f64> = array![1.0, 2.0, -3.0];
        assert!((cosine(x.view(), x.view()).unwrap() - 1.0).abs() < 1e-12);
        let a: Array1<f64> = array![1.0, 0.0];
        let b = array![0.0, 1.0];
        assert!(cosine(a.view(), b.view()).unwrap().abs() < 1e-12);
        let y: Array1<f64> = array![0.5, -1.0, 4.0];
        let c1 = cosine(x.view(), y.view()).unwrap();
        let c2 = cosine((&x * 3.0).view(), (&y * 0.25).view()).unwrap();
        assert!((c1 - c2).abs() < 1e-12);
        assert!(matches!(cosine(x.view(), Array1::zeros(3).view()), Err(Error::ZeroNorm)));
    }

    #[test]
    fn rounding_convention() {
        assert_eq!(fmt1(macro_average(&[93.8, 85.8, 85.2, 86.6])), "87.9");
        assert_eq!(fmt1(macro_average(&[92.9, 82.6, 69.2, 82.2])), "81.7");
        assert_eq!(fmt1(100.0), "100.0");
        assert_eq!(fmt1(0.04), "0.0");
        assert_eq!(fmt1(0.05), "0.1");
    }

    #[test]
    fn averaged_models() {
        let v = array![1.0, 2.0];
        let w = array![3.0, -2.0];
        let train = vec![emb(v.clone(), "a", Emotion::Neutral), emb(w.clone(), "a", Emotion::Happy)];
        let avg = build_models(&train, Framework::AvgIvec, None).unwrap();
        assert_eq!(avg.len(), 1);
        assert_eq!(avg[0].embedding, (&v + &w) / 2.0);
        let test = build_models(&train, Framework::EinvTest, None).unwrap();
        assert_eq!(avg[0].embedding, test[0].embedding);
        assert_eq!(test[0].framework, Framework::EinvTest);
        assert!(build_models(&train, Framework::EinvPair, None).is_err());
        let base = build_models(&train, Framework::Baseline, None).unwrap();
        assert_eq!(base.len(), 1);
        assert_eq!(base[0].embedding, v);
    }

    #[test]
    fn zero_net_pair_models_fail_scoring() {
        let train = vec![emb(array![1.0, 2.0], "a", Emotion::Neutral)];
        let net = EinvNet::<f64>::zeros(&[2, 3, 2]);
        let models = build_models(&train, Framework::EinvPair, Some(&net)).unwrap();
        assert!(models[0].embedding.iter().all(|&v| v == 0.0));
        let trial = Trial::from(&train[0]);
        assert!(matches!(
            identify(&trial, &models, Framework::EinvPair, Some(&net)),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn ties_go_to_smallest_label() {
        let models = vec![
            SpeakerModel { speaker: "b".into(), embedding: array![1.0, 0.0], framework: Framework::AvgIvec },
            SpeakerModel { speaker: "a".into(), embedding: array![2.0, 0.0], framework: Framework::AvgIvec },
        ];
        let trial = Trial { id: "t".into(), test_embedding: array![1.0, 1.0], true_speaker: "b".into(), emotion: Emotion::Happy };
        assert_eq!(identify(&trial, &models, Framework::AvgIvec, None).unwrap(), "a");
    }

    #[test]
    fn perfect_and_confusion() {
        let train = vec![
            emb(array![1.0, 0.0, 0.0], "s1", Emotion::Neutral),
            emb(array![0.0, 1.0, 0.0], "s2", Emotion::Neutral),
        ];
        let models = build_models(&train, Framework::AvgIvec, None).unwrap();
        let trials: Vec<Trial<f64>> = vec![
            Trial { id: "1".into(), test_embedding: array![0.9, 0.1, 0.0], true_speaker: "s1".into(), emotion: Emotion::Neutral },
            Trial { id: "2".into(), test_embedding: array![0.1, 0.9, 0.0], true_speaker: "s2".into(), emotion: Emotion::Angry },
            Trial { id: "3".into(), test_embedding: array![0.9, 0.2, 0.0], true_speaker: "s2".into(), emotion: Emotion::Angry },
        ];
        let r = evaluate(&trials, &models, Framework::AvgIvec, None).unwrap();
        assert_eq!(r.accuracy(Emotion::Neutral), Some(100.0));
        assert_eq!(r.accuracy(Emotion::Angry), Some(50.0));
        assert_eq!(r.macro_average, 75.0);
        assert_eq!(r.confusion[&Emotion::Angry], array![[0, 0], [1, 1]]);
        let mut rev = trials.clone();
        rev.reverse();
        assert_eq!(evaluate(&rev, &models, Framework::AvgIvec, None).unwrap(), r);
        assert!(evaluate::<f64>(&[], &models, Framework::AvgIvec, None).is_err());
        let csv = framework_csv(std::slice::from_ref(&r), Some(3));
        assert_eq!(csv, "framework,N,A,average,seed\navg-ivec,100.0,50.0,75.0,3\n");
        let table = format_framework_table(&[r], None);
        assert!(table.contains("Average") && table.contains("75.0"));
    }

    #[test]
    fn framework_names_round_trip() {
        for f in Framework::ALL {
            assert_eq!(f.cli_name().parse::<Framework>().unwrap(), f);
        }
        assert!("pair".parse::<Framework>().is_err());
    }
}
