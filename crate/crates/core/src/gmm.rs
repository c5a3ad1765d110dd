//! Diagonal-covariance Gaussian mixture used as the universal background
//! model, its EM trainer and Baum–Welch statistics.

use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::{log_sum_exp, Real};

/// Component variances are floored at this fraction of the global
/// per-dimension data variance.
pub const VARIANCE_FLOOR_RATIO: f64 = 1e-4;
/// Components whose occupancy drops below this are reinitialized.
pub const STARVATION_OCCUPANCY: f64 = 1e-3;
/// At least this many frames per component are required to train.
pub const MIN_FRAMES_PER_COMPONENT: usize = 10;

const CHUNK_ROWS: usize = 2048;

/// Diagonal-covariance GMM.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGmm<T> {
    pub weights: Array1<T>,
    pub means: Array2<T>,
    pub variances: Array2<T>,
}

/// Zeroth-order occupancies and centered first-order statistics of one
/// utterance against a UBM.
#[derive(Debug, Clone, PartialEq)]
pub struct BwStats<T> {
    pub n: Array1<T>,
    pub f: Array2<T>,
    pub utterance_id: String,
}

/// Result of [`em_fit`]: the model and the per-frame average
/// log-likelihood before each iteration plus once after the last.
#[derive(Debug, Clone)]
pub struct GmmFit<T> {
    pub model: DiagGmm<T>,
    pub avg_log_likelihood: Vec<T>,
}

// Sufficient statistics of one E-step pass.
struct Accum<T> {
    n: Array1<T>,
    f: Array2<T>,
    s: Array2<T>,
    loglik: T,
}

impl<T: Real> Accum<T> {
    fn zeros(c: usize, d: usize) -> Self {
        Self {
            n: Array1::zeros(c),
            f: Array2::zeros((c, d)),
            s: Array2::zeros((c, d)),
            loglik: T::zero(),
        }
    }

    fn add(mut self, other: Self) -> Self {
        self.n += &other.n;
        self.f += &other.f;
        self.s += &other.s;
        self.loglik += other.loglik;
        self
    }
}

impl<T: Real> DiagGmm<T> {
    pub fn new(weights: Array1<T>, means: Array2<T>, variances: Array2<T>) -> Result<Self> {
        let g = Self {
            weights,
            means,
            variances,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.weights.len();
        if c == 0 {
            return Err(Error::InvalidInput("GMM has no components".into()));
        }
        for (what, m) in [("means", &self.means), ("variances", &self.variances)] {
            if m.nrows() != c {
                return Err(Error::DimensionMismatch {
                    context: if what == "means" { "gmm means" } else { "gmm variances" },
                    expected: c,
                    got: m.nrows(),
                });
            }
        }
        if self.variances.ncols() != self.means.ncols() {
            return Err(Error::DimensionMismatch {
                context: "gmm variance dimension",
                expected: self.means.ncols(),
                got: self.variances.ncols(),
            });
        }
        let all_finite = self.weights.iter().chain(self.means.iter()).chain(self.variances.iter()).all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("GMM has non-finite parameters".into()));
        }
        if self.weights.iter().any(|&w| w < T::zero()) {
            return Err(Error::InvalidInput("GMM has negative weights".into()));
        }
        let total: T = self.weights.sum();
        if (total - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::InvalidInput(format!("GMM weights sum to {total}, not 1")));
        }
        if self.variances.iter().any(|&v| v <= T::zero()) {
            return Err(Error::InvalidInput("GMM has non-positive variances".into()));
        }
        Ok(())
    }

    // Per-component constants and the two coefficient matrices so that
    // log(w_c N(x; c)) = k_c + x²·a_c + x·b_c.
    fn score_terms(&self) -> (Array1<T>, Array2<T>, Array2<T>) {
        let d = T::from_count(self.dim());
        let ln2pi = T::lit((2.0 * std::f64::consts::PI).ln());
        let half = T::lit(0.5);
        let prec = self.variances.mapv(|v| T::one() / v);
        let a = prec.mapv(|p| -half * p).reversed_axes();
        let b = (&self.means * &prec).reversed_axes();
        let k = Array1::from_shape_fn(self.n_components(), |c| {
            let logdet: T = self.variances.row(c).iter().map(|v| v.ln()).sum();
            let quad: T = self
                .means
                .row(c)
                .iter()
                .zip(prec.row(c))
                .map(|(&m, &p)| m * m * p)
                .sum();
            self.weights[c].max(T::min_positive_value()).ln() - half * (d * ln2pi + logdet + quad)
        });
        (k, a, b)
    }

    /// Weighted component log-densities, one row per frame.
    pub fn component_log_likelihoods(&self, frames: ArrayView2<T>) -> Array2<T> {
        let (k, a, b) = self.score_terms();
        let sq = frames.mapv(|x| x * x);
        let mut ll = sq.dot(&a) + frames.dot(&b);
        ll += &k;
        ll
    }

    /// Responsibilities of every component for one frame.
    pub fn posteriors(&self, frame: ArrayView1<T>) -> Array1<T> {
        let ll = self.component_log_likelihoods(frame.insert_axis(Axis(0)));
        let row = ll.row(0).to_vec();
        let lse = log_sum_exp(&row);
        Array1::from_iter(row.into_iter().map(|l| (l - lse).exp()))
    }

    /// Responsibility matrix (frames × components) and per-frame
    /// log-likelihoods.
    pub fn frame_posteriors(&self, frames: ArrayView2<T>) -> (Array2<T>, Array1<T>) {
        let mut ll = self.component_log_likelihoods(frames);
        let mut total = Array1::zeros(frames.nrows());
        for (t, mut row) in ll.axis_iter_mut(Axis(0)).enumerate() {
            let lse = row_log_sum_exp(row.view());
            total[t] = lse;
            row.mapv_inplace(|l| (l - lse).exp());
        }
        (ll, total)
    }

    /// Mean per-frame log-likelihood of `frames`.
    pub fn avg_log_likelihood(&self, frames: ArrayView2<T>) -> T {
        let n = frames.nrows();
        if n == 0 {
            return T::nan();
        }
        self.e_step(frames).loglik / T::from_count(n)
    }

    fn e_step(&self, frames: ArrayView2<T>) -> Accum<T> {
        let (c, d) = (self.n_components(), self.dim());
        let chunks: Vec<_> = frames.axis_chunks_iter(Axis(0), CHUNK_ROWS).collect();
        chunks
            .into_par_iter()
            .map(|chunk| {
                let (gamma, ll) = self.frame_posteriors(chunk);
                let gt = gamma.t();
                Accum {
                    n: gamma.sum_axis(Axis(0)),
                    f: gt.dot(&chunk),
                    s: gt.dot(&chunk.mapv(|x| x * x)),
                    loglik: ll.sum(),
                }
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Accum::zeros(c, d), Accum::add)
    }
}

fn row_log_sum_exp<T: Real>(row: ArrayView1<T>) -> T {
    match row.as_slice() {
        Some(xs) => log_sum_exp(xs),
        None => log_sum_exp(&row.to_vec()),
    }
}

fn pooled_voiced_frames<T: Real>(features: &[FeatureMatrix<T>]) -> Result<Array2<T>> {
    let dims: Vec<usize> = features.iter().map(|f| f.dim()).collect();
    if let Some(&d0) = dims.first() {
        if let Some(&bad) = dims.iter().find(|&&d| d != d0) {
            return Err(Error::DimensionMismatch {
                context: "pooled features",
                expected: d0,
                got: bad,
            });
        }
    }
    let parts: Vec<Array2<T>> = features.iter().map(|f| f.voiced_frames()).collect();
    let views: Vec<ArrayView2<T>> = parts.iter().map(|p| p.view()).collect();
    if views.is_empty() {
        return Ok(Array2::zeros((0, 0)));
    }
    concatenate(Axis(0), &views).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Trains a `c`-component diagonal GMM on the voiced frames of `features`
/// with `iters` EM iterations.
pub fn em_fit<T: Real>(
    features: &[FeatureMatrix<T>],
    c: usize,
    iters: usize,
    seed: u64,
) -> Result<GmmFit<T>> {
    let data = pooled_voiced_frames(features)?;
    em_fit_frames(data.view(), c, iters, seed)
}

/// [`em_fit`] on an already pooled frame matrix.
pub fn em_fit_frames<T: Real>(
    data: ArrayView2<T>,
    c: usize,
    iters: usize,
    seed: u64,
) -> Result<GmmFit<T>> {
    let (n, d) = data.dim();
    if c == 0 {
        return Err(Error::Config("number of GMM components must be positive".into()));
    }
    if n < MIN_FRAMES_PER_COMPONENT * c {
        return Err(Error::InsufficientData(format!(
            "{n} voiced frames for {c} components (need at least {})",
            MIN_FRAMES_PER_COMPONENT * c
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite training frame".into()));
    }
    let nt = T::from_count(n);
    let global_mean = data.sum_axis(Axis(0)) / nt;
    let global_var = Array1::from_shape_fn(d, |j| {
        let mu = global_mean[j];
        data.column(j).iter().map(|&x| (x - mu) * (x - mu)).sum::<T>() / nt
    });
    let floor = global_var.mapv(|v| (v * T::lit(VARIANCE_FLOOR_RATIO)).max(T::min_positive_value()));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, n, c).into_vec();
    let means = data.select(Axis(0), &picks);
    let mut variances = Array2::zeros((c, d));
    for mut row in variances.axis_iter_mut(Axis(0)) {
        row.assign(&global_var.mapv(|v| v.max(T::min_positive_value())));
    }
    let mut model = DiagGmm {
        weights: Array1::from_elem(c, T::one() / T::from_count(c)),
        means,
        variances,
    };

    let mut trace = Vec::with_capacity(iters + 1);
    for it in 0..iters {
        let acc = model.e_step(data);
        trace.push(acc.loglik / nt);
        log::debug!("gmm iter {it}: avg loglik {}", acc.loglik / nt);
        model = m_step(acc, &floor, &mut rng, nt, it)?;
    }
    trace.push(model.e_step(data).loglik / nt);
    Ok(GmmFit {
        model,
        avg_log_likelihood: trace,
    })
}

fn m_step<T: Real>(
    mut acc: Accum<T>,
    floor: &Array1<T>,
    rng: &mut ChaCha8Rng,
    total: T,
    iter: usize,
) -> Result<DiagGmm<T>> {
    let (c, d) = acc.f.dim();
    let starve = T::lit(STARVATION_OCCUPANCY);
    let mut weights = Array1::zeros(c);
    let mut means = Array2::zeros((c, d));
    let mut variances = Array2::zeros((c, d));
    let mut starved = Vec::new();
    for k in 0..c {
        let nk = acc.n[k];
        if nk < starve {
            starved.push(k);
            continue;
        }
        weights[k] = nk / total;
        for j in 0..d {
            let mu = acc.f[[k, j]] / nk;
            means[[k, j]] = mu;
            variances[[k, j]] = (acc.s[[k, j]] / nk - mu * mu).max(floor[j]);
        }
    }
    for k in starved {
        // split the currently heaviest component
        let donor = (0..c)
            .max_by(|&a, &b| weights[a].partial_cmp(&weights[b]).unwrap_or(std::cmp::Ordering::Equal))
            .expect("at least one component");
        if weights[donor] <= T::zero() {
            return Err(Error::Numerical("every GMM component starved".into()));
        }
        log::warn!("gmm iter {iter}: component {k} starved, reinitialized from component {donor}");
        let half = weights[donor] * T::lit(0.5);
        weights[donor] = half;
        weights[k] = half;
        for j in 0..d {
            let sd = variances[[donor, j]].sqrt();
            let z: f64 = StandardNormal.sample(rng);
            means[[k, j]] = means[[donor, j]] + T::lit(0.1 * z) * sd;
            variances[[k, j]] = variances[[donor, j]];
        }
        acc.n[k] = half * total;
    }
    let wsum = weights.sum();
    weights.mapv_inplace(|w| w / wsum);
    let model = DiagGmm {
        weights,
        means,
        variances,
    };
    if model.means.iter().chain(model.variances.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite GMM parameters after iteration {iter}")));
    }
    Ok(model)
}

/// Baum–Welch statistics of the voiced frames of `f`.
pub fn accumulate_stats<T: Real>(g: &DiagGmm<T>, f: &FeatureMatrix<T>) -> Result<BwStats<T>> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            context: "accumulate_stats",
            expected: g.dim(),
            got: f.dim(),
        });
    }
    let frames = f.voiced_frames();
    if frames.nrows() == 0 {
        return Err(Error::InsufficientData(format!(
            "utterance {} has no voiced frames",
            f.utterance_id
        )));
    }
    let acc_n_f = frames
        .axis_chunks_iter(Axis(0), CHUNK_ROWS)
        .map(|chunk| {
            let (gamma, _) = g.frame_posteriors(chunk);
            (gamma.sum_axis(Axis(0)), gamma.t().dot(&chunk))
        })
        .reduce(|(n1, f1), (n2, f2)| (n1 + n2, f1 + f2))
        .expect("nonempty");
    let (n, mut first) = acc_n_f;
    for k in 0..g.n_components() {
        let nk = n[k];
        let mut row = first.row_mut(k);
        row.zip_mut_with(&g.means.row(k), |fv, &m| *fv -= nk * m);
    }
    Ok(BwStats {
        n,
        f: first,
        utterance_id: f.utterance_id.clone(),
    })
}

/// Statistics for many utterances, computed in parallel; output order
/// follows input order.
pub fn accumulate_all<T: Real>(g: &DiagGmm<T>, feats: &[FeatureMatrix<T>]) -> Result<Vec<BwStats<T>>> {
    feats.par_iter().map(|f| accumulate_stats(g, f)).collect()
}

impl<T: Real> BwStats<T> {
    pub fn n_components(&self) -> usize {
        self.n.len()
    }

    pub fn dim(&self) -> usize {
        self.f.ncols()
    }

    pub fn total_occupancy(&self) -> T {
        self.n.sum()
    }

    /// Elementwise sum of two statistics of the same UBM.
    pub fn merged(&self, other: &Self, id: impl Into<String>) -> Result<Self> {
        if self.n.len() != other.n.len() || self.f.dim() != other.f.dim() {
            return Err(Error::DimensionMismatch {
                context: "merge stats",
                expected: self.n.len(),
                got: other.n.len(),
            });
        }
        Ok(Self {
            n: &self.n + &other.n,
            f: &self.f + &other.f,
            utterance_id: id.into(),
        })
    }

    /// Scales both orders of statistics (used in tests and for weighting).
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            n: self.n.mapv(|v| v * factor),
            f: self.f.mapv(|v| v * factor),
            utterance_id: self.utterance_id.clone(),
        }
    }

    /// First-order statistics stacked into one supervector of length `C·D`.
    pub fn stacked_first_order(&self) -> Array1<T> {
        self.f.iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn gaussian_frames(n: usize, d: usize, seed: u64, shift: f64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z + shift
        })
    }

    #[test]
    fn single_component_is_closed_form() {
        let x = gaussian_frames(500, 3, 11, 2.0);
        let fit = em_fit_frames(x.view(), 1, 3, 0).unwrap();
        let n = x.nrows() as f64;
        for j in 0..3 {
            let col = x.column(j);
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!((fit.model.means[[0, j]] - mean).abs() < 1e-8);
            assert!((fit.model.variances[[0, j]] - var).abs() < 1e-8);
        }
        assert!((fit.model.weights[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_two_separated_clusters() {
        let a = gaussian_frames(300, 2, 1, 10.0);
        let b = gaussian_frames(300, 2, 2, -10.0);
        let x = concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
        let ca = a.mean_axis(Axis(0)).unwrap();
        let cb = b.mean_axis(Axis(0)).unwrap();
        let fit = em_fit_frames(x.view(), 2, 10, 5).unwrap();
        let m = &fit.model.means;
        let (first, second) = if m[[0, 0]] > 0.0 { (0, 1) } else { (1, 0) };
        for j in 0..2 {
            assert!((m[[first, j]] - ca[j]).abs() < 0.1);
            assert!((m[[second, j]] - cb[j]).abs() < 0.1);
        }
    }

    #[test]
    fn too_few_frames_is_an_error() {
        let x = gaussian_frames(30, 2, 3, 0.0);
        assert!(matches!(
            em_fit_frames(x.view(), 4, 2, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn starved_component_is_reinitialized() {
        // degenerate data: most initial means coincide
        let mut x = Array2::<f64>::zeros((40, 1));
        x[[39, 0]] = 1.0;
        let fit = em_fit_frames(x.view(), 4, 3, 9).unwrap();
        assert!(fit.model.validate().is_ok());
        assert!(fit.model.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn posterior_single_component_and_symmetry() {
        let g = DiagGmm::<f64>::new(array![1.0], array![[0.0, 0.0]], array![[1.0, 1.0]]).unwrap();
        assert_eq!(g.posteriors(array![3.0, -2.0].view()).to_vec(), vec![1.0]);

        let g = DiagGmm::<f64>::new(array![0.5, 0.5], array![[-1.0, 0.0], [1.0, 0.0]], array![[2.0, 2.0], [2.0, 2.0]]).unwrap();
        let p = g.posteriors(array![0.0, 5.0].view());
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn posterior_concentrates_on_nearby_component() {
        let g = DiagGmm::<f64>::new(
            array![0.3, 0.3, 0.4],
            array![[0.0, 0.0], [100.0, 0.0], [0.0, -100.0]],
            array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]],
        )
        .unwrap();
        let p = g.posteriors(array![0.0, 0.0].view());
        assert!(p[0] > 1.0 - 1e-6);
        assert!((p.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stats_of_single_component_are_exact() {
        let x = gaussian_frames(50, 3, 4, 1.0);
        let g = DiagGmm::<f64>::new(array![1.0], array![[0.5, -0.5, 2.0]], array![[1.0, 2.0, 3.0]]).unwrap();
        let s = accumulate_stats(&g, &FeatureMatrix::from_frames("u", x.clone())).unwrap();
        assert_eq!(s.n[0], 50.0);
        for j in 0..3 {
            let want = x.column(j).sum() - 50.0 * g.means[[0, j]];
            assert!((s.f[[0, j]] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn stats_skip_unvoiced_and_reject_empty() {
        let x = gaussian_frames(10, 2, 6, 0.0);
        let g = DiagGmm::<f64>::new(array![0.5, 0.5], array![[0.0, 0.0], [1.0, 1.0]], array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let mut f = FeatureMatrix::from_frames("u", x);
        f.vad_mask[3] = false;
        let s = accumulate_stats(&g, &f).unwrap();
        assert!((s.total_occupancy() - 9.0).abs() < 1e-9);
        f.vad_mask.iter_mut().for_each(|v| *v = false);
        assert!(accumulate_stats(&g, &f).is_err());
    }

    #[test]
    fn stats_from_ubm_samples_are_centered() {
        // draw 10 000 frames from the model itself
        let g = DiagGmm::<f64>::new(
            array![0.2, 0.5, 0.3],
            array![[-4.0, 0.0], [0.0, 3.0], [5.0, -2.0]],
            array![[1.0, 0.5], [0.7, 1.2], [0.4, 0.9]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut x = Array2::zeros((10_000, 2));
        for mut row in x.axis_iter_mut(Axis(0)) {
            let u: f64 = rng.random();
            let k = if u < 0.2 { 0 } else if u < 0.7 { 1 } else { 2 };
            for j in 0..2 {
                let z: f64 = StandardNormal.sample(&mut rng);
                row[j] = g.means[[k, j]] + z * g.variances[[k, j]].sqrt();
            }
        }
        let s = accumulate_stats(&g, &FeatureMatrix::from_frames("ubm", x)).unwrap();
        for k in 0..3 {
            let norm = s.f.row(k).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm / s.n[k] < 0.2);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let x = gaussian_frames(400, 2, 8, 0.0).mapv(|v| v as f32);
        let fit = em_fit_frames(x.view(), 2, 5, 1).unwrap();
        assert!(fit.model.validate().is_ok());
        for w in fit.avg_log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-4);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::{prop_assert, proptest, ProptestConfig};

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn stats_are_additive_and_count_frames(seed in 0u64..1000, n1 in 3usize..40, n2 in 3usize..40) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = DiagGmm::<f64>::new(
                    array![0.25, 0.75],
                    Array2::from_shape_fn((2, 3), |_| rng.random_range(-2.0..2.0)),
                    Array2::from_shape_fn((2, 3), |_| rng.random_range(0.5..2.0)),
                ).unwrap();
                let a = gaussian_frames(n1, 3, seed + 1, 0.0);
                let b = gaussian_frames(n2, 3, seed + 2, 0.5);
                let ab = concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
                let sa = accumulate_stats(&g, &FeatureMatrix::from_frames("a", a)).unwrap();
                let sb = accumulate_stats(&g, &FeatureMatrix::from_frames("b", b)).unwrap();
                let sab = accumulate_stats(&g, &FeatureMatrix::from_frames("ab", ab)).unwrap();
                let merged = sa.merged(&sb, "m").unwrap();
                prop_assert!((sab.total_occupancy() - (n1 + n2) as f64).abs() < 1e-6);
                for (x, y) in sab.n.iter().zip(merged.n.iter()) { prop_assert!((x - y).abs() < 1e-9); }
                for (x, y) in sab.f.iter().zip(merged.f.iter()) { prop_assert!((x - y).abs() < 1e-9); }
            }

            #[test]
            fn posteriors_are_a_distribution(x0 in -20.0f64..20.0, x1 in -20.0f64..20.0) {
                let g = DiagGmm::<f64>::new(
                    array![0.1, 0.6, 0.3],
                    array![[0.0, 0.0], [5.0, 5.0], [-3.0, 8.0]],
                    array![[1.0, 1.0], [0.2, 3.0], [4.0, 0.5]],
                ).unwrap();
                let p = g.posteriors(array![x0, x1].view());
                prop_assert!(p.iter().all(|&v| v >= 0.0));
                prop_assert!((p.sum() - 1.0).abs() < 1e-12);
            }
        }
    }
}
