//! Emotion-invariant extractor.
//!
//! Training data comes from overlapping fixed-length segments of each
//! speaker's enrollment audio. Segment embeddings are averaged in random
//! groups of two to five to synthesize many (any-emotion input, neutral
//! target) pairs of the same speaker. A small rectifier network with a
//! bottleneck is then fit with mean squared error and Adam, and maps any
//! compensated embedding toward the speaker's neutral embedding.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compensate::CompEmbedding;
use crate::error::{Error, Result};
use crate::labels::Emotion;
use crate::scalar::Real;

const SEGMENT_EPS: f64 = 1e-9;
// keeps the split/shuffle stream apart from weight initialization
const SPLIT_STREAM: u64 = 0x5EED_0001;

/// Extractor hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EinvConfig {
    pub layer_dims: Vec<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for EinvConfig {
    fn default() -> Self {
        Self {
            layer_dims: vec![150, 64, 32, 64, 150],
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 20,
            batch_size: 256,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl EinvConfig {
    /// Default hidden layers around an embedding of dimension `dim`.
    pub fn for_embedding_dim(dim: usize) -> Self {
        Self {
            layer_dims: vec![dim, 64, 32, 64, dim],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = &self.layer_dims;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer dimensions {dims:?}")));
        }
        if dims.first() != dims.last() {
            return Err(Error::Config(format!(
                "extractor input and output dimensions differ: {dims:?}"
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction {} must lie in (0, 1)",
                self.train_fraction
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("invalid Adam hyperparameters".into()));
        }
        Ok(())
    }

    pub fn embedding_dim(&self) -> usize {
        self.layer_dims[0]
    }
}

/// A fixed-length window of a longer utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpec {
    pub utterance_id: String,
    pub start_s: f64,
    pub duration_s: f64,
    pub emotion: Emotion,
    pub speaker: String,
}

impl SegmentSpec {
    /// Identifier of the segment's derived data (`<utt>#<start ms>`).
    pub fn segment_id(&self) -> String {
        format!("{}#{}", self.utterance_id, (self.start_s * 1000.0).round() as i64)
    }
}

/// Window starts at `0, hop, 2·hop, …` while `start + window ≤ duration`.
pub fn split_segments(train_duration_s: f64, window_s: f64, hop_s: f64) -> Result<Vec<SegmentSpec>> {
    split_utterance("", "", Emotion::Unknown, train_duration_s, window_s, hop_s)
}

/// [`split_segments`] with labels attached.
pub fn split_utterance(
    utterance_id: &str,
    speaker: &str,
    emotion: Emotion,
    duration_s: f64,
    window_s: f64,
    hop_s: f64,
) -> Result<Vec<SegmentSpec>> {
    if !(window_s > 0.0 && hop_s > 0.0) {
        return Err(Error::Config("segment window and hop must be positive".into()));
    }
    if duration_s + SEGMENT_EPS < window_s {
        return Err(Error::InsufficientData(format!(
            "utterance {utterance_id:?} lasts {duration_s} s, shorter than the {window_s} s window"
        )));
    }
    let count = ((duration_s - window_s + SEGMENT_EPS) / hop_s).floor() as usize + 1;
    Ok((0..count)
        .map(|k| SegmentSpec {
            utterance_id: utterance_id.to_string(),
            start_s: k as f64 * hop_s,
            duration_s: window_s,
            emotion,
            speaker: speaker.to_string(),
        })
        .collect())
}

/// Input/target pair for extractor training.
#[derive(Debug, Clone, PartialEq)]
pub struct AugPair<T> {
    pub input: CompEmbedding<T>,
    pub target: CompEmbedding<T>,
}

/// Augmentation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub total_pairs: usize,
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            total_pairs: 20_000,
            k_min: 2,
            k_max: 5,
        }
    }
}

/// Segment embeddings grouped by (speaker, emotion).
pub type SegmentCells<T> = BTreeMap<(String, Emotion), Vec<CompEmbedding<T>>>;

/// Groups embeddings into (speaker, emotion) cells.
pub fn group_cells<T: Real>(embeddings: &[CompEmbedding<T>]) -> SegmentCells<T> {
    let mut cells: SegmentCells<T> = BTreeMap::new();
    for e in embeddings {
        cells.entry((e.speaker.clone(), e.emotion)).or_default().push(e.clone());
    }
    cells
}

/// Arithmetic mean of the selected members (indices taken in ascending
/// order).
fn average<T: Real>(members: &[CompEmbedding<T>], mut idx: Vec<usize>) -> Array1<T> {
    idx.sort_unstable();
    let mut acc = Array1::<T>::zeros(members[idx[0]].dim());
    for &i in &idx {
        acc += &members[i].e;
    }
    acc / T::from_count(idx.len())
}

/// Synthesizes exactly `cfg.total_pairs` averaged pairs. Each input averages
/// `k` distinct segments of one (speaker, emotion) cell; its target averages
/// `k'` distinct neutral segments of the same speaker.
pub fn augment<T: Real>(cells: &SegmentCells<T>, cfg: &AugmentConfig, seed: u64) -> Result<Vec<AugPair<T>>> {
    if cfg.k_min == 0 || cfg.k_min > cfg.k_max {
        return Err(Error::Config(format!(
            "augmentation range [{}, {}] is invalid",
            cfg.k_min, cfg.k_max
        )));
    }
    let mut by_speaker: BTreeMap<&str, Vec<Emotion>> = BTreeMap::new();
    for ((spk, emo), members) in cells {
        if *emo == Emotion::Unknown {
            continue;
        }
        if members.len() < cfg.k_max {
            return Err(Error::InsufficientData(format!(
                "speaker {spk}, emotion {emo}: {} segments, need at least {}",
                members.len(),
                cfg.k_max
            )));
        }
        if let Some(bad) = members.iter().find(|m| m.speaker != *spk || m.emotion != *emo) {
            return Err(Error::InvalidInput(format!(
                "segment {} is filed under ({spk}, {emo}) but labeled ({}, {})",
                bad.utterance_id, bad.speaker, bad.emotion
            )));
        }
        by_speaker.entry(spk.as_str()).or_default().push(*emo);
    }
    if by_speaker.is_empty() {
        return Err(Error::InsufficientData("no segment embeddings to augment".into()));
    }
    for (spk, emos) in &by_speaker {
        if !emos.contains(&Emotion::Neutral) {
            return Err(Error::InsufficientData(format!(
                "speaker {spk}, emotion N: no neutral segments for targets"
            )));
        }
    }
    let speakers: Vec<(&str, &Vec<Emotion>)> = by_speaker.iter().map(|(s, e)| (*s, e)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(cfg.total_pairs);
    for p in 0..cfg.total_pairs {
        let (spk, emos) = speakers[rng.random_range(0..speakers.len())];
        let emo = emos[rng.random_range(0..emos.len())];
        let input_cell = &cells[&(spk.to_string(), emo)];
        let neutral_cell = &cells[&(spk.to_string(), Emotion::Neutral)];
        let k = rng.random_range(cfg.k_min..=cfg.k_max);
        let k_target = rng.random_range(cfg.k_min..=cfg.k_max);
        let idx_in = sample(&mut rng, input_cell.len(), k).into_vec();
        let idx_tg = sample(&mut rng, neutral_cell.len(), k_target).into_vec();
        pairs.push(AugPair {
            input: CompEmbedding::new(average(input_cell, idx_in), format!("aug{p}:in"), spk, emo),
            target: CompEmbedding::new(
                average(neutral_cell, idx_tg),
                format!("aug{p}:tg"),
                spk,
                Emotion::Neutral,
            ),
        });
    }
    Ok(pairs)
}

/// Adam first/second moments for every parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m_w: Vec<Array2<T>>,
    pub v_w: Vec<Array2<T>>,
    pub m_b: Vec<Array1<T>>,
    pub v_b: Vec<Array1<T>>,
    pub step: u64,
}

/// Feed-forward extractor: rectifier hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct EinvNet<T> {
    /// Layer `l` maps `dims[l] → dims[l+1]`; stored `in × out`.
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
    pub adam: AdamState<T>,
}

/// Parameter gradients in the layout of [`EinvNet`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

/// Mean squared error per epoch (epoch 0 is the untrained network).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

/// Trained extractor with its loss trace.
#[derive(Debug, Clone)]
pub struct EinvTraining<T> {
    pub net: EinvNet<T>,
    pub trace: Vec<EpochLoss>,
    pub n_train: usize,
    pub n_val: usize,
}

fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

impl<T: Real> EinvNet<T> {
    fn with_params(weights: Vec<Array2<T>>, biases: Vec<Array1<T>>) -> Self {
        let adam = AdamState {
            m_w: weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v_w: weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            m_b: biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            v_b: biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
            step: 0,
        };
        Self {
            weights,
            biases,
            adam,
        }
    }

    /// Fan-in scaled uniform weights (`±√(6/fan_in)`), zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = dims
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Array2::from_shape_simple_fn((w[0], w[1]), || T::lit(rng.random_range(-bound..bound)))
            })
            .collect();
        let biases = dims[1..].iter().map(|&d| Array1::zeros(d)).collect();
        Self::with_params(weights, biases)
    }

    /// All parameters zero.
    pub fn zeros(dims: &[usize]) -> Self {
        let weights = dims.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect();
        let biases = dims[1..].iter().map(|&d| Array1::zeros(d)).collect();
        Self::with_params(weights, biases)
    }

    /// Rebuilds a network from parameters, validating shapes.
    pub fn from_parts(weights: Vec<Array2<T>>, biases: Vec<Array1<T>>, adam: Option<AdamState<T>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::InvalidInput("extractor needs matching weight and bias layers".into()));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != b.len() {
                return Err(Error::DimensionMismatch {
                    context: "extractor bias",
                    expected: w.ncols(),
                    got: b.len(),
                });
            }
            if l + 1 < weights.len() && w.ncols() != weights[l + 1].nrows() {
                return Err(Error::DimensionMismatch {
                    context: "extractor layer chaining",
                    expected: w.ncols(),
                    got: weights[l + 1].nrows(),
                });
            }
        }
        let mut net = Self::with_params(weights, biases);
        if let Some(a) = adam {
            let shapes_ok = a.m_w.len() == net.weights.len()
                && a.m_w.iter().chain(&a.v_w).zip(net.weights.iter().chain(&net.weights)).all(|(m, w)| m.dim() == w.dim())
                && a.m_b.iter().chain(&a.v_b).zip(net.biases.iter().chain(&net.biases)).all(|(m, b)| m.dim() == b.dim());
            if !shapes_ok {
                return Err(Error::InvalidInput("Adam state does not match network shapes".into()));
            }
            net.adam = a;
        }
        Ok(net)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.weights[0].nrows()];
        d.extend(self.weights.iter().map(|w| w.ncols()));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().map_or(0, |w| w.ncols())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn layers(&self) -> usize {
        self.weights.len()
    }

    // Pre-activations and activations of every layer.
    fn forward_trace(&self, x: ArrayView2<T>) -> (Vec<Array2<T>>, Vec<Array2<T>>) {
        let mut pre = Vec::with_capacity(self.layers());
        let mut act: Vec<Array2<T>> = Vec::with_capacity(self.layers() + 1);
        act.push(x.to_owned());
        for l in 0..self.layers() {
            let z = act[l].dot(&self.weights[l]) + &self.biases[l];
            let a = if l + 1 < self.layers() { z.mapv(relu) } else { z.clone() };
            pre.push(z);
            act.push(a);
        }
        (pre, act)
    }

    /// Row-wise forward pass.
    pub fn forward_batch(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut a = x.to_owned();
        for l in 0..self.layers() {
            let z = a.dot(&self.weights[l]) + &self.biases[l];
            a = if l + 1 < self.layers() { z.mapv(relu) } else { z };
        }
        a
    }

    pub fn forward(&self, x: ArrayView1<T>) -> Array1<T> {
        self.forward_batch(x.insert_axis(Axis(0)))
            .index_axis_move(Axis(0), 0)
    }

    /// Mean squared error over rows and output dimensions.
    pub fn mse(&self, x: ArrayView2<T>, y: ArrayView2<T>) -> T {
        let out = self.forward_batch(x);
        mse(out.view(), y)
    }

    /// Batch loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, x: ArrayView2<T>, y: ArrayView2<T>) -> (T, Gradients<T>) {
        let (pre, act) = self.forward_trace(x);
        let out = act.last().expect("output layer");
        let count = T::from_count(out.len());
        let diff = out - &y;
        let loss = diff.iter().map(|&d| d * d).sum::<T>() / count;
        let mut delta = diff.mapv(|d| T::lit(2.0) * d / count);
        let mut gw = vec![Array2::zeros((0, 0)); self.layers()];
        let mut gb = vec![Array1::zeros(0); self.layers()];
        for l in (0..self.layers()).rev() {
            if l + 1 < self.layers() {
                // rectifier derivative, taken as 0 at the kink
                delta.zip_mut_with(&pre[l], |d, &z| {
                    if z <= T::zero() {
                        *d = T::zero();
                    }
                });
            }
            gw[l] = act[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&self.weights[l].t());
            }
        }
        (
            loss,
            Gradients {
                weights: gw,
                biases: gb,
            },
        )
    }

    /// One Adam update.
    pub fn adam_step(&mut self, g: &Gradients<T>, cfg: &EinvConfig) {
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
        let one = T::one();
        let lr = T::lit(cfg.learning_rate);
        let eps = T::lit(cfg.epsilon);
        let c1 = one - b1.powi(t);
        let c2 = one - b2.powi(t);
        let update = |p: &mut T, m: &mut T, v: &mut T, grad: T| {
            *m = b1 * *m + (one - b1) * grad;
            *v = b2 * *v + (one - b2) * grad * grad;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for l in 0..self.layers() {
            ndarray::Zip::from(&mut self.weights[l])
                .and(&mut self.adam.m_w[l])
                .and(&mut self.adam.v_w[l])
                .and(&g.weights[l])
                .for_each(|p, m, v, &gr| update(p, m, v, gr));
            ndarray::Zip::from(&mut self.biases[l])
                .and(&mut self.adam.m_b[l])
                .and(&mut self.adam.v_b[l])
                .and(&g.biases[l])
                .for_each(|p, m, v, &gr| update(p, m, v, gr));
        }
    }
}

fn mse<T: Real>(out: ArrayView2<T>, y: ArrayView2<T>) -> T {
    let n = out.len();
    if n == 0 {
        return T::zero();
    }
    out.iter().zip(y.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / T::from_count(n)
}

/// Fits the extractor on augmented pairs: seeded 80/20 split, mini-batch
/// MSE with Adam, fixed number of epochs.
pub fn train_einv<T: Real>(pairs: &[AugPair<T>], cfg: &EinvConfig) -> Result<EinvTraining<T>> {
    cfg.validate()?;
    if pairs.len() < cfg.batch_size {
        return Err(Error::InsufficientData(format!(
            "{} training pairs is fewer than one batch of {}",
            pairs.len(),
            cfg.batch_size
        )));
    }
    let dim = cfg.embedding_dim();
    let mut x = Array2::<T>::zeros((pairs.len(), dim));
    let mut y = Array2::<T>::zeros((pairs.len(), dim));
    for (i, p) in pairs.iter().enumerate() {
        if p.input.dim() != dim || p.target.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "extractor training pair",
                expected: dim,
                got: p.input.dim().max(p.target.dim()),
            });
        }
        x.row_mut(i).assign(&p.input.e);
        y.row_mut(i).assign(&p.target.e);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SPLIT_STREAM);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let n_train = ((pairs.len() as f64) * cfg.train_fraction).floor() as usize;
    let n_train = n_train.clamp(1, pairs.len() - 1);
    let (train_idx, val_idx) = order.split_at(n_train);
    let x_val = x.select(Axis(0), val_idx);
    let y_val = y.select(Axis(0), val_idx);
    let mut train_idx = train_idx.to_vec();

    let mut net = EinvNet::<T>::new(&cfg.layer_dims, cfg.seed);
    let full_train_mse = |net: &EinvNet<T>, idx: &[usize]| {
        net.mse(x.select(Axis(0), idx).view(), y.select(Axis(0), idx).view())
    };
    let mut trace = vec![EpochLoss {
        epoch: 0,
        train_mse: full_train_mse(&net, &train_idx).as_f64(),
        val_mse: net.mse(x_val.view(), y_val.view()).as_f64(),
    }];

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut weighted = 0.0;
        for (b, batch) in train_idx.chunks(cfg.batch_size).enumerate() {
            let xb = x.select(Axis(0), batch);
            let yb = y.select(Axis(0), batch);
            let (loss, grads) = net.loss_and_gradients(xb.view(), yb.view());
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}, batch {b}"
                )));
            }
            weighted += loss.as_f64() * batch.len() as f64;
            net.adam_step(&grads, cfg);
        }
        if !net.is_finite() {
            return Err(Error::Numerical(format!("non-finite extractor weights after epoch {epoch}")));
        }
        let val = net.mse(x_val.view(), y_val.view()).as_f64();
        log::debug!("einv epoch {epoch}: train {:.6} val {val:.6}", weighted / n_train as f64);
        trace.push(EpochLoss {
            epoch,
            train_mse: weighted / n_train as f64,
            val_mse: val,
        });
    }
    Ok(EinvTraining {
        net,
        trace,
        n_train,
        n_val: pairs.len() - n_train,
    })
}


/// Maps a compensated embedding into the emotion-invariant space; labels
/// are carried through.
pub fn extract_einv<T: Real>(net: &EinvNet<T>, e: &CompEmbedding<T>) -> Result<CompEmbedding<T>> {
    if e.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "extractor input",
            expected: net.input_dim(),
            got: e.dim(),
        });
    }
    Ok(CompEmbedding {
        e: net.forward(e.e.view()),
        utterance_id: e.utterance_id.clone(),
        speaker: e.speaker.clone(),
        emotion: e.emotion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
    }

    #[test]
    fn segment_counts() {
        assert_eq!(split_segments(120.0, 30.0, 10.0).unwrap().len(), 10);
        assert_eq!(split_segments(35.0, 30.0, 10.0).unwrap().len(), 1);
        assert_eq!(split_segments(30.0, 30.0, 10.0).unwrap().len(), 1);
        assert!(split_segments(29.0, 30.0, 10.0).is_err());
        let s = split_segments(60.0, 30.0, 10.0).unwrap();
        let starts: Vec<f64> = s.iter().map(|x| x.start_s).collect();
        assert_eq!(starts, vec![0.0, 10.0, 20.0, 30.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut net = EinvNet::<f64>::new(&[6, 4, 3, 4, 6], 11);
        // keep pre-activations away from the rectifier kink
        for b in net.biases.iter_mut() {
            b.fill(0.05);
        }
        let x = random_matrix(5, 6, 1);
        let y = random_matrix(5, 6, 2);
        let (_, g) = net.loss_and_gradients(x.view(), y.view());
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        for l in 0..net.weights.len() {
            for idx in ndarray::indices(net.weights[l].dim()) {
                let mut plus = net.clone();
                plus.weights[l][idx] += h;
                let mut minus = net.clone();
                minus.weights[l][idx] -= h;
                let num = (plus.mse(x.view(), y.view()) - minus.mse(x.view(), y.view())) / (2.0 * h);
                let a = g.weights[l][idx];
                if a.abs().max(num.abs()) > 1e-7 {
                    assert!(rel(a, num) < 1e-4, "W{l}{idx:?}: {a} vs {num}");
                }
            }
            for i in 0..net.biases[l].len() {
                let mut plus = net.clone();
                plus.biases[l][i] += h;
                let mut minus = net.clone();
                minus.biases[l][i] -= h;
                let num = (plus.mse(x.view(), y.view()) - minus.mse(x.view(), y.view())) / (2.0 * h);
                let a = g.biases[l][i];
                if a.abs().max(num.abs()) > 1e-7 {
                    assert!(rel(a, num) < 1e-4, "b{l}[{i}]: {a} vs {num}");
                }
            }
        }
    }

    #[test]
    fn rectifier_gradient_is_zero_at_kink() {
        let net = EinvNet::<f64>::zeros(&[2, 3, 2]);
        let x = Array2::from_elem((1, 2), 1.0);
        let y = Array2::from_elem((1, 2), 1.0);
        let (_, g) = net.loss_and_gradients(x.view(), y.view());
        assert!(g.weights[0].iter().all(|&v| v == 0.0));
        assert!(g.biases[0].iter().all(|&v| v == 0.0));
        assert!(g.biases[1].iter().all(|&v| v != 0.0));
    }

    #[test]
    fn init_bounds() {
        let net = EinvNet::<f64>::new(&[150, 64, 32, 64, 150], 0);
        assert_eq!(net.dims(), vec![150, 64, 32, 64, 150]);
        for w in &net.weights {
            let bound = (6.0 / w.nrows() as f64).sqrt();
            assert!(w.iter().all(|v| v.abs() <= bound));
        }
        assert!(net.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    fn cells(speakers: usize, per_cell: usize, dim: usize) -> SegmentCells<f64> {
        let mut embs = Vec::new();
        for s in 0..speakers {
            for (k, emo) in Emotion::EVALUATED.iter().enumerate() {
                for i in 0..per_cell {
                    let e = Array1::from_shape_fn(dim, |j| (s * 100 + k * 10 + i) as f64 + j as f64 * 0.01);
                    embs.push(CompEmbedding::new(e, format!("s{s}e{k}i{i}"), format!("spk{s}"), *emo));
                }
            }
        }
        group_cells(&embs)
    }

    #[test]
    fn augmentation_contract() {
        let c = cells(3, 6, 4);
        let cfg = AugmentConfig {
            total_pairs: 500,
            ..AugmentConfig::default()
        };
        let pairs = augment(&c, &cfg, 9).unwrap();
        assert_eq!(pairs.len(), 500);
        let mut emotions = std::collections::BTreeSet::new();
        for p in &pairs {
            assert_eq!(p.input.speaker, p.target.speaker);
            assert_eq!(p.target.emotion, Emotion::Neutral);
            emotions.insert(p.input.emotion);
            // input is a mean of 2..=5 distinct members of its own cell
            let s: usize = p.input.speaker[3..].parse().unwrap();
            let k = Emotion::EVALUATED.iter().position(|e| *e == p.input.emotion).unwrap();
            let base = (s * 100 + k * 10) as f64;
            let offset = p.input.e[0] - base;
            assert!((0.5..=4.5).contains(&offset), "mean index {offset}");
            let tgt_offset = p.target.e[0] - (s * 100) as f64;
            assert!((0.5..=4.5).contains(&tgt_offset));
        }
        assert_eq!(emotions.len(), 4);
        assert_eq!(pairs, augment(&c, &cfg, 9).unwrap());
    }

    #[test]
    fn augmentation_names_deficient_cell() {
        let mut c = cells(2, 6, 3);
        c.get_mut(&("spk1".to_string(), Emotion::Angry)).unwrap().truncate(3);
        let err = augment(&c, &AugmentConfig::default(), 0).unwrap_err().to_string();
        assert!(err.contains("spk1") && err.contains("A"), "{err}");
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let c = cells(4, 6, 8);
        // scale down so the identity-like map is learnable quickly
        let c: SegmentCells<f64> = c
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().map(|mut e| {
                e.e.mapv_inplace(|x| x / 400.0);
                e
            }).collect()))
            .collect();
        let pairs = augment(&c, &AugmentConfig { total_pairs: 1000, ..Default::default() }, 1).unwrap();
        let cfg = EinvConfig {
            layer_dims: vec![8, 16, 8, 16, 8],
            epochs: 15,
            batch_size: 64,
            learning_rate: 0.01,
            seed: 4,
            ..EinvConfig::default()
        };
        let a = train_einv(&pairs, &cfg).unwrap();
        let b = train_einv(&pairs, &cfg).unwrap();
        assert_eq!(a.net, b.net);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.len(), 16);
        assert_eq!((a.n_train, a.n_val), (800, 200));
        assert_eq!(a.net.adam.step, 15 * 800u64.div_ceil(64));
        let first = a.trace[0].val_mse;
        let last = a.trace.last().unwrap().val_mse;
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn too_few_pairs_is_an_error() {
        let c = cells(2, 6, 4);
        let pairs = augment(&c, &AugmentConfig { total_pairs: 10, ..Default::default() }, 0).unwrap();
        let cfg = EinvConfig::for_embedding_dim(4);
        assert!(matches!(train_einv(&pairs, &cfg), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn f32_forward_runs() {
        let net = EinvNet::<f32>::new(&[4, 3, 4], 2);
        let out = net.forward(Array1::from_elem(4, 1.0f32).view());
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|v| v.is_finite()));
    }
}
