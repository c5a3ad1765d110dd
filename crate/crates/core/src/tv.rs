//! Total-variability factor analysis: supervector `m + T·w` with a standard
//! normal latent `w`. Training is EM over Baum–Welch statistics; the i-vector
//! of an utterance is the posterior mean of `w`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmm::{BwStats, DiagGmm};
use crate::linalg::{cholesky, cholesky_inverse, cholesky_solve, cholesky_with_ridge};
use crate::scalar::Real;

/// Standard deviation of the random T initialization.
pub const INIT_STD: f64 = 1e-3;
/// Ridge added to singular M-step systems.
pub const MSTEP_RIDGE: f64 = 1e-8;

const CHUNK_UTTS: usize = 64;

/// Total-variability model.
#[derive(Debug, Clone, PartialEq)]
pub struct TvModel<T> {
    /// `(C·D) × R`, component blocks stacked row-wise.
    pub t: Array2<T>,
    /// UBM variances, `C × D`.
    pub sigma: Array2<T>,
    /// UBM means, `C × D`.
    pub ubm_means: Array2<T>,
}

/// Utterance-level latent factor.
#[derive(Debug, Clone, PartialEq)]
pub struct IVector<T> {
    pub w: Array1<T>,
    pub utterance_id: String,
}

/// Posterior of the latent factor for one utterance.
#[derive(Debug, Clone)]
pub struct Posterior<T> {
    pub mean: Array1<T>,
    /// `I + Tᵀ Σ⁻¹ N T`
    pub precision: Array2<T>,
    /// Cholesky factor of the precision.
    chol: Array2<T>,
}

impl<T: Real> Posterior<T> {
    pub fn covariance(&self) -> Array2<T> {
        cholesky_inverse(self.chol.view())
    }
}

impl<T: Real> TvModel<T> {
    pub fn new(t: Array2<T>, ubm: &DiagGmm<T>) -> Result<Self> {
        let m = Self {
            t,
            sigma: ubm.variances.clone(),
            ubm_means: ubm.means.clone(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_components(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn dim(&self) -> usize {
        self.sigma.ncols()
    }

    pub fn rank(&self) -> usize {
        self.t.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (c, d) = self.sigma.dim();
        if self.ubm_means.dim() != (c, d) {
            return Err(Error::DimensionMismatch {
                context: "tv ubm means",
                expected: c * d,
                got: self.ubm_means.len(),
            });
        }
        if self.t.nrows() != c * d {
            return Err(Error::DimensionMismatch {
                context: "tv matrix rows",
                expected: c * d,
                got: self.t.nrows(),
            });
        }
        if self.rank() == 0 || self.rank() > c * d {
            return Err(Error::Config(format!(
                "tv rank {} must be in 1..={}",
                self.rank(),
                c * d
            )));
        }
        if self.t.iter().chain(self.sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("tv model has non-finite entries".into()));
        }
        if self.sigma.iter().any(|&v| v <= T::zero()) {
            return Err(Error::InvalidInput("tv model has non-positive variances".into()));
        }
        Ok(())
    }

    fn block(&self, c: usize) -> ArrayView2<'_, T> {
        let d = self.dim();
        self.t.slice(s![c * d..(c + 1) * d, ..])
    }

    fn check_stats(&self, s: &BwStats<T>) -> Result<()> {
        if s.n.len() != self.n_components() {
            return Err(Error::DimensionMismatch {
                context: "stats components",
                expected: self.n_components(),
                got: s.n.len(),
            });
        }
        if s.f.dim() != (self.n_components(), self.dim()) {
            return Err(Error::DimensionMismatch {
                context: "stats feature dimension",
                expected: self.dim(),
                got: s.f.ncols(),
            });
        }
        Ok(())
    }
}

/// Cached per-component products for fast posterior computation.
pub struct IvectorExtractor<'a, T: Real> {
    model: &'a TvModel<T>,
    /// `Σ⁻¹ T`, `(C·D) × R`
    sigma_inv_t: Array2<T>,
    /// Row `c` holds `T_cᵀ Σ_c⁻¹ T_c` flattened (`C × R²`).
    gram: Array2<T>,
}

impl<'a, T: Real> IvectorExtractor<'a, T> {
    pub fn new(model: &'a TvModel<T>) -> Self {
        let (c, d) = model.sigma.dim();
        let r = model.rank();
        let mut sigma_inv_t = model.t.clone();
        for k in 0..c {
            for j in 0..d {
                let p = T::one() / model.sigma[[k, j]];
                sigma_inv_t.row_mut(k * d + j).mapv_inplace(|v| v * p);
            }
        }
        let blocks: Vec<Array1<T>> = (0..c)
            .into_par_iter()
            .map(|k| {
                let tc = model.block(k);
                let stc = sigma_inv_t.slice(s![k * d..(k + 1) * d, ..]);
                let g = tc.t().dot(&stc);
                g.into_shape_with_order(r * r).expect("contiguous gram block")
            })
            .collect();
        let mut gram = Array2::zeros((c, r * r));
        for (k, b) in blocks.into_iter().enumerate() {
            gram.row_mut(k).assign(&b);
        }
        Self {
            model,
            sigma_inv_t,
            gram,
        }
    }

    /// Posterior precision `I + Σ_c n_c T_cᵀ Σ_c⁻¹ T_c`.
    pub fn precision(&self, n: ArrayView1<T>) -> Array2<T> {
        let r = self.model.rank();
        let flat = n.dot(&self.gram);
        let mut p = flat.into_shape_with_order((r, r)).expect("square precision");
        for i in 0..r {
            p[[i, i]] += T::one();
        }
        p
    }

    /// `Tᵀ Σ⁻¹ f̃` for stacked centered first-order statistics.
    pub fn projection(&self, f: ArrayView2<T>) -> Array1<T> {
        let flat = f.as_standard_layout();
        let v = ArrayView1::from(flat.as_slice().expect("standard layout"));
        self.sigma_inv_t.t().dot(&v)
    }

    pub fn posterior(&self, s: &BwStats<T>) -> Result<Posterior<T>> {
        self.model.check_stats(s)?;
        let precision = self.precision(s.n.view());
        let chol = cholesky(precision.view()).map_err(|e| {
            Error::Numerical(format!("posterior precision of {}: {e}", s.utterance_id))
        })?;
        let b = self.projection(s.f.view());
        let mean = cholesky_solve(chol.view(), b.view());
        Ok(Posterior {
            mean,
            precision,
            chol,
        })
    }

    pub fn extract(&self, s: &BwStats<T>) -> Result<IVector<T>> {
        let post = self.posterior(s)?;
        if post.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite i-vector for {}",
                s.utterance_id
            )));
        }
        Ok(IVector {
            w: post.mean,
            utterance_id: s.utterance_id.clone(),
        })
    }

    /// Extracts i-vectors in parallel, preserving input order.
    pub fn extract_all(&self, stats: &[BwStats<T>]) -> Result<Vec<IVector<T>>> {
        stats.par_iter().map(|s| self.extract(s)).collect()
    }
}

/// `w = (I + Tᵀ Σ⁻¹ N T)⁻¹ Tᵀ Σ⁻¹ f̃`.
pub fn extract_ivector<T: Real>(tv: &TvModel<T>, s: &BwStats<T>) -> Result<IVector<T>> {
    IvectorExtractor::new(tv).extract(s)
}

// M-step accumulators.
struct TvAccum<T> {
    /// `Σ_u n_c(u) E[w wᵀ]`, flattened per component (`C × R²`).
    a: Array2<T>,
    /// `Σ_u f̃(u) E[w]ᵀ`, `(C·D) × R`.
    c: Array2<T>,
}

impl<T: Real> TvAccum<T> {
    fn add(mut self, other: Self) -> Self {
        self.a += &other.a;
        self.c += &other.c;
        self
    }
}

fn e_step<T: Real>(tv: &TvModel<T>, stats: &[BwStats<T>]) -> Result<TvAccum<T>> {
    let ex = IvectorExtractor::new(tv);
    let (cc, d, r) = (tv.n_components(), tv.dim(), tv.rank());
    let parts: Vec<TvAccum<T>> = stats
        .par_chunks(CHUNK_UTTS)
        .map(|chunk| -> Result<TvAccum<T>> {
            let u = chunk.len();
            let mut occ = Array2::<T>::zeros((u, cc));
            let mut second = Array2::<T>::zeros((u, r * r));
            let mut firsts = Array2::<T>::zeros((u, cc * d));
            let mut means = Array2::<T>::zeros((u, r));
            for (i, s) in chunk.iter().enumerate() {
                let post = ex.posterior(s)?;
                let mut m2 = post.covariance();
                for a in 0..r {
                    for b in 0..r {
                        m2[[a, b]] += post.mean[a] * post.mean[b];
                    }
                }
                occ.row_mut(i).assign(&s.n);
                second
                    .row_mut(i)
                    .assign(&m2.into_shape_with_order(r * r).expect("contiguous"));
                firsts
                    .row_mut(i)
                    .assign(&ArrayView1::from(s.f.as_standard_layout().as_slice().expect("standard")));
                means.row_mut(i).assign(&post.mean);
            }
            Ok(TvAccum {
                a: occ.t().dot(&second),
                c: firsts.t().dot(&means),
            })
        })
        .collect::<Result<_>>()?;
    Ok(parts
        .into_iter()
        .fold(
            TvAccum {
                a: Array2::zeros((cc, r * r)),
                c: Array2::zeros((cc * d, r)),
            },
            TvAccum::add,
        ))
}

fn m_step<T: Real>(tv: &TvModel<T>, acc: &TvAccum<T>) -> Result<TvModel<T>> {
    let (cc, d, r) = (tv.n_components(), tv.dim(), tv.rank());
    let blocks: Vec<Array2<T>> = (0..cc)
        .into_par_iter()
        .map(|k| -> Result<Array2<T>> {
            let a = acc
                .a
                .row(k)
                .to_owned()
                .into_shape_with_order((r, r))
                .expect("square block");
            let (chol, ridged) = cholesky_with_ridge(a.view(), T::lit(MSTEP_RIDGE))
                .map_err(|e| Error::Numerical(format!("tv M-step component {k}: {e}")))?;
            if ridged {
                log::warn!("tv M-step component {k}: singular system, ridge {MSTEP_RIDGE} added");
            }
            let ck = acc.c.slice(s![k * d..(k + 1) * d, ..]);
            let mut out = Array2::zeros((d, r));
            for j in 0..d {
                out.row_mut(j).assign(&cholesky_solve(chol.view(), ck.row(j)));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut t = Array2::zeros((cc * d, r));
    for (k, b) in blocks.into_iter().enumerate() {
        t.slice_mut(s![k * d..(k + 1) * d, ..]).assign(&b);
    }
    if t.iter().any(|v: &T| !v.is_finite()) {
        return Err(Error::Numerical("non-finite T after M-step".into()));
    }
    Ok(TvModel {
        t,
        sigma: tv.sigma.clone(),
        ubm_means: tv.ubm_means.clone(),
    })
}

/// One EM iteration.
pub fn em_iteration<T: Real>(tv: &TvModel<T>, stats: &[BwStats<T>]) -> Result<TvModel<T>> {
    if stats.is_empty() {
        return Err(Error::InsufficientData("no statistics for tv training".into()));
    }
    let acc = e_step(tv, stats)?;
    m_step(tv, &acc)
}

/// Seeded random initialization of T.
pub fn init_tv<T: Real>(ubm: &DiagGmm<T>, rank: usize, seed: u64) -> Result<TvModel<T>> {
    let (c, d) = ubm.means.dim();
    if rank == 0 || rank > c * d {
        return Err(Error::Config(format!("tv rank {rank} must be in 1..={}", c * d)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
    let t = Array2::from_shape_simple_fn((c * d, rank), || T::lit(normal.sample(&mut rng)));
    TvModel::new(t, ubm)
}

/// Continues EM from an existing model.
pub fn train_tv_from<T: Real>(mut tv: TvModel<T>, stats: &[BwStats<T>], iters: usize) -> Result<TvModel<T>> {
    for it in 0..iters {
        tv = em_iteration(&tv, stats)?;
        log::debug!("tv iter {it} done");
    }
    Ok(tv)
}

/// Trains a rank-`rank` total-variability matrix on background statistics.
pub fn train_tv<T: Real>(
    stats: &[BwStats<T>],
    ubm: &DiagGmm<T>,
    rank: usize,
    iters: usize,
    seed: u64,
) -> Result<TvModel<T>> {
    if stats.len() < rank {
        log::warn!(
            "training a rank-{rank} T-matrix from only {} utterances",
            stats.len()
        );
    }
    let tv = init_tv(ubm, rank, seed)?;
    let tv = train_tv_from(tv, stats, iters)?;
    for (j, col) in tv.t.axis_iter(Axis(1)).enumerate() {
        if col.iter().all(|v| *v == T::zero()) {
            return Err(Error::Numerical(format!("column {j} of T collapsed to zero")));
        }
    }
    Ok(tv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::StandardNormal;

    fn tiny_model() -> TvModel<f64> {
        let ubm = DiagGmm::<f64>::new(
            array![0.5, 0.5],
            array![[0.0, 1.0], [2.0, -1.0]],
            array![[1.0, 2.0], [0.5, 1.5]],
        )
        .unwrap();
        TvModel::new(array![[1.0, 0.2], [0.3, -0.7], [0.5, 0.5], [-1.0, 0.4]], &ubm).unwrap()
    }

    fn tiny_stats() -> BwStats<f64> {
        BwStats {
            n: array![12.0, 7.5],
            f: array![[3.0, -1.0], [2.0, 4.5]],
            utterance_id: "u".into(),
        }
    }

    #[test]
    fn zero_first_order_gives_zero_ivector() {
        let tv = tiny_model();
        let s = BwStats {
            n: array![5.0, 9.0],
            f: Array2::zeros((2, 2)),
            utterance_id: "z".into(),
        };
        let iv = extract_ivector(&tv, &s).unwrap();
        assert!(iv.w.iter().all(|&v| v == 0.0));
    }

    // Oracle: plain gradient descent on ½‖w‖² + ½ wᵀ(Σ n_c T_cᵀΣ_c⁻¹T_c)w − wᵀ Tᵀ Σ⁻¹ f̃,
    // assembled entry by entry without the extractor's cached products.
    #[test]
    fn matches_gradient_descent_minimizer() {
        let tv = tiny_model();
        let s = tiny_stats();
        let grad = |w: &[f64; 2]| {
            let mut g = [w[0], w[1]];
            for c in 0..2 {
                for j in 0..2 {
                    let row = c * 2 + j;
                    let tw = tv.t[[row, 0]] * w[0] + tv.t[[row, 1]] * w[1];
                    let resid = s.n[c] * tw - s.f[[c, j]];
                    for r in 0..2 {
                        g[r] += tv.t[[row, r]] * resid / tv.sigma[[c, j]];
                    }
                }
            }
            g
        };
        let mut w = [0.0, 0.0];
        for _ in 0..200_000 {
            let g = grad(&w);
            w[0] -= 0.01 * g[0];
            w[1] -= 0.01 * g[1];
        }
        let iv = extract_ivector(&tv, &s).unwrap();
        assert!((iv.w[0] - w[0]).abs() < 1e-6, "{} vs {}", iv.w[0], w[0]);
        assert!((iv.w[1] - w[1]).abs() < 1e-6);
    }

    #[test]
    fn doubling_stats_raises_every_precision_eigenvalue() {
        let tv = tiny_model();
        let s = tiny_stats();
        let ex = IvectorExtractor::new(&tv);
        let p1 = ex.precision(s.n.view());
        let p2 = ex.precision(s.scaled(2.0).n.view());
        let eig = |p: &Array2<f64>| {
            let tr = p[[0, 0]] + p[[1, 1]];
            let det = p[[0, 0]] * p[[1, 1]] - p[[0, 1]] * p[[1, 0]];
            let disc = (tr * tr / 4.0 - det).sqrt();
            [tr / 2.0 - disc, tr / 2.0 + disc]
        };
        let (e1, e2) = (eig(&p1), eig(&p2));
        assert!(e2[0] > e1[0] && e2[1] > e1[1]);
        let w1 = extract_ivector(&tv, &s).unwrap().w;
        let w2 = extract_ivector(&tv, &s.scaled(2.0)).unwrap().w;
        assert!((&w1 - &w2).iter().any(|v| v.abs() > 1e-9));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let tv = tiny_model();
        let s = BwStats {
            n: array![1.0, 2.0, 3.0],
            f: Array2::zeros((3, 2)),
            utterance_id: "bad".into(),
        };
        assert!(matches!(
            extract_ivector(&tv, &s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rank_must_fit_supervector() {
        let ubm = DiagGmm::<f64>::new(array![1.0], array![[0.0, 0.0]], array![[1.0, 1.0]]).unwrap();
        assert!(init_tv(&ubm, 3, 0).is_err());
        assert!(init_tv(&ubm, 0, 0).is_err());
        assert_eq!(init_tv(&ubm, 2, 0).unwrap().rank(), 2);
    }

    #[test]
    fn precision_is_symmetric_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ubm = DiagGmm::<f64>::new(
            Array1::from_elem(4, 0.25),
            Array2::zeros((4, 3)),
            Array2::from_shape_fn((4, 3), |(c, j)| 0.5 + 0.1 * (c + j) as f64),
        )
        .unwrap();
        let t = Array2::from_shape_simple_fn((12, 5), || {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let tv = TvModel::new(t, &ubm).unwrap();
        let ex = IvectorExtractor::new(&tv);
        let p = ex.precision(array![3.0, 0.0, 10.0, 1.5].view());
        for i in 0..5 {
            for j in 0..5 {
                assert!((p[[i, j]] - p[[j, i]]).abs() < 1e-10);
            }
        }
        assert!(cholesky(p.view()).is_ok());
    }

    #[test]
    fn extraction_is_linear_in_first_order_stats() {
        let tv = tiny_model();
        let s1 = tiny_stats();
        let mut s2 = tiny_stats();
        s2.f = array![[-1.0, 0.25], [7.0, -2.0]];
        let mut s12 = tiny_stats();
        s12.f = &s1.f + &s2.f;
        let w = |s: &BwStats<f64>| extract_ivector(&tv, s).unwrap().w;
        let lhs = w(&s12);
        let rhs = w(&s1) + w(&s2);
        for (a, b) in lhs.iter().zip(rhs.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn single_precision_extraction() {
        let tv = tiny_model();
        let tv32 = TvModel {
            t: tv.t.mapv(|v| v as f32),
            sigma: tv.sigma.mapv(|v| v as f32),
            ubm_means: tv.ubm_means.mapv(|v| v as f32),
        };
        let s = tiny_stats();
        let s32 = BwStats {
            n: s.n.mapv(|v| v as f32),
            f: s.f.mapv(|v| v as f32),
            utterance_id: s.utterance_id.clone(),
        };
        let w64 = extract_ivector(&tv, &s).unwrap().w;
        let w32 = extract_ivector(&tv32, &s32).unwrap().w;
        for (a, b) in w64.iter().zip(w32.iter()) {
            assert!((a - f64::from(*b)).abs() < 1e-4);
        }
    }
}
