//! Session compensation on top of i-vectors: LDA projection followed by
//! within-class covariance normalization.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::labels::Emotion;
use crate::linalg::{cholesky, cholesky_inverse, lower_inverse, symmetric_eigen, symmetrize};
use crate::scalar::Real;
use crate::tv::IVector;

/// Relative ridge added to the within-class scatter (fraction of its mean
/// eigenvalue).
pub const DEFAULT_RIDGE: f64 = 1e-6;
/// Generalized eigenvalues at or below this count as zero.
pub const LDA_EIGEN_EPS: f64 = 1e-12;

/// LDA projection: `y = basisᵀ (w − mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaTransform<T> {
    /// `R × out_dim`, columns sorted by decreasing generalized eigenvalue.
    pub basis: Array2<T>,
    pub mean: Array1<T>,
    /// Generalized eigenvalues of the kept directions.
    pub eigenvalues: Array1<T>,
}

/// WCCN: `y = Bᵀ x` with `B Bᵀ = W⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct WccnTransform<T> {
    pub chol: Array2<T>,
}

/// Compensated embedding with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CompEmbedding<T> {
    pub e: Array1<T>,
    pub utterance_id: String,
    pub speaker: String,
    pub emotion: Emotion,
}

impl<T: Real> CompEmbedding<T> {
    pub fn new(e: Array1<T>, utterance_id: impl Into<String>, speaker: impl Into<String>, emotion: Emotion) -> Self {
        Self {
            e,
            utterance_id: utterance_id.into(),
            speaker: speaker.into(),
            emotion,
        }
    }

    pub fn dim(&self) -> usize {
        self.e.len()
    }
}

// Row indices of each class, in label order.
fn group_rows<S: AsRef<str>>(labels: &[S]) -> BTreeMap<&str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l.as_ref()).or_default().push(i);
    }
    groups
}

fn check_classes<S: AsRef<str>>(data: ArrayView2<impl Real>, labels: &[S], what: &str) -> Result<BTreeMap<String, Vec<usize>>> {
    if data.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "labels vs samples",
            expected: data.nrows(),
            got: labels.len(),
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{what}: non-finite training vector")));
    }
    let groups = group_rows(labels);
    if let Some((name, rows)) = groups.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(Error::InsufficientData(format!(
            "{what}: class {name} has {} sample(s), need at least 2",
            rows.len()
        )));
    }
    Ok(groups.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn class_mean<T: Real>(data: ArrayView2<T>, rows: &[usize]) -> Array1<T> {
    data.select(Axis(0), rows).sum_axis(Axis(0)) / T::from_count(rows.len())
}

fn add_ridge<T: Real>(m: &mut Array2<T>, rel: T) {
    let n = m.nrows();
    let tr = m.diag().sum();
    let ridge = rel * tr / T::from_count(n);
    for i in 0..n {
        m[[i, i]] += ridge;
    }
}

/// Fits an `out_dim`-dimensional LDA on labeled rows of `data` (`N × R`).
pub fn fit_lda<T: Real, S: AsRef<str>>(data: ArrayView2<T>, labels: &[S], out_dim: usize, ridge: f64) -> Result<LdaTransform<T>> {
    let (n, r) = data.dim();
    if out_dim == 0 || out_dim > r {
        return Err(Error::Config(format!(
            "LDA output dimension {out_dim} must be in 1..={r}"
        )));
    }
    let groups = check_classes(data, labels, "LDA")?;
    if groups.len() < 2 {
        return Err(Error::InsufficientData("LDA needs at least 2 classes".into()));
    }
    let nt = T::from_count(n);
    let mean = data.sum_axis(Axis(0)) / nt;
    let mut sw = Array2::<T>::zeros((r, r));
    let mut sb = Array2::<T>::zeros((r, r));
    for rows in groups.values() {
        let mu = class_mean(data, rows);
        let centered = &data.select(Axis(0), rows) - &mu;
        sw += &centered.t().dot(&centered);
        let diff = (&mu - &mean).insert_axis(Axis(1));
        sb += &(diff.dot(&diff.t()) * T::from_count(rows.len()));
    }
    sw.mapv_inplace(|v| v / nt);
    sb.mapv_inplace(|v| v / nt);
    add_ridge(&mut sw, T::lit(ridge));

    let l = cholesky(sw.view()).map_err(|e| Error::Numerical(format!("LDA within-class scatter: {e}")))?;
    let linv = lower_inverse(l.view());
    let mut whitened = linv.dot(&sb).dot(&linv.t());
    symmetrize(&mut whitened);
    let (vals, vecs) = symmetric_eigen(whitened.view())?;
    let order: Vec<usize> = (0..r).rev().collect();
    let significant = vals.iter().filter(|&&v| v > T::lit(LDA_EIGEN_EPS)).count();
    if significant < out_dim {
        log::warn!(
            "LDA: only {significant} discriminant directions above {LDA_EIGEN_EPS}; \
             filling {} from the whitened complement",
            out_dim - significant
        );
    }
    let kept = &order[..out_dim];
    let u = vecs.select(Axis(1), kept);
    let basis = linv.t().dot(&u);
    let eigenvalues = Array1::from_iter(kept.iter().map(|&i| vals[i]));
    Ok(LdaTransform {
        basis,
        mean,
        eigenvalues,
    })
}

/// [`fit_lda`] on i-vectors.
pub fn fit_lda_ivectors<T: Real, S: AsRef<str>>(ivectors: &[IVector<T>], labels: &[S], out_dim: usize) -> Result<LdaTransform<T>> {
    let data = stack(ivectors.iter().map(|iv| iv.w.view()))?;
    fit_lda(data.view(), labels, out_dim, DEFAULT_RIDGE)
}

impl<T: Real> LdaTransform<T> {
    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn project(&self, w: ArrayView1<T>) -> Result<Array1<T>> {
        if w.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "LDA input",
                expected: self.input_dim(),
                got: w.len(),
            });
        }
        Ok(self.basis.t().dot(&(&w - &self.mean)))
    }

    pub fn project_rows(&self, data: ArrayView2<T>) -> Result<Array2<T>> {
        if data.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "LDA input",
                expected: self.input_dim(),
                got: data.ncols(),
            });
        }
        Ok((&data - &self.mean).dot(&self.basis))
    }
}

/// Averaged per-class (biased) covariance.
pub fn within_class_covariance<T: Real, S: AsRef<str>>(data: ArrayView2<T>, labels: &[S]) -> Result<Array2<T>> {
    let groups = check_classes(data, labels, "WCCN")?;
    let k = data.ncols();
    let mut w = Array2::<T>::zeros((k, k));
    for rows in groups.values() {
        let mu = class_mean(data, rows);
        let centered = &data.select(Axis(0), rows) - &mu;
        w += &(centered.t().dot(&centered) / T::from_count(rows.len()));
    }
    w.mapv_inplace(|v| v / T::from_count(groups.len()));
    Ok(w)
}

/// Fits WCCN on labeled rows of `data` (`N × k`).
pub fn fit_wccn<T: Real, S: AsRef<str>>(data: ArrayView2<T>, labels: &[S], ridge: f64) -> Result<WccnTransform<T>> {
    let mut w = within_class_covariance(data, labels)?;
    symmetrize(&mut w);
    let l = match cholesky(w.view()) {
        Ok(l) => l,
        Err(_) => {
            log::warn!("WCCN: within-class covariance singular, adding relative ridge {ridge}");
            add_ridge(&mut w, T::lit(ridge));
            cholesky(w.view()).map_err(|e| Error::Numerical(format!("WCCN covariance singular after ridge: {e}")))?
        }
    };
    let mut winv = cholesky_inverse(l.view());
    symmetrize(&mut winv);
    let chol = cholesky(winv.view()).map_err(|e| Error::Numerical(format!("WCCN inverse: {e}")))?;
    Ok(WccnTransform { chol })
}

impl<T: Real> WccnTransform<T> {
    pub fn dim(&self) -> usize {
        self.chol.nrows()
    }

    pub fn apply(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "WCCN input",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.chol.t().dot(&x))
    }

    pub fn apply_rows(&self, data: ArrayView2<T>) -> Array2<T> {
        data.dot(&self.chol)
    }
}

/// `e = Bᵀ · basisᵀ · (w − mean)`, labels attached.
pub fn apply_compensation<T: Real>(
    iv: &IVector<T>,
    lda: &LdaTransform<T>,
    wccn: &WccnTransform<T>,
    speaker: &str,
    emotion: Emotion,
) -> Result<CompEmbedding<T>> {
    if lda.output_dim() != wccn.dim() {
        return Err(Error::DimensionMismatch {
            context: "LDA output vs WCCN",
            expected: lda.output_dim(),
            got: wccn.dim(),
        });
    }
    let e = wccn.apply(lda.project(iv.w.view())?.view())?;
    Ok(CompEmbedding::new(e, iv.utterance_id.clone(), speaker, emotion))
}

/// Stacks equal-length vectors as matrix rows.
pub fn stack<'a, T: Real>(rows: impl Iterator<Item = ArrayView1<'a, T>>) -> Result<Array2<T>> {
    let rows: Vec<ArrayView1<T>> = rows.collect();
    let Some(first) = rows.first() else {
        return Err(Error::InsufficientData("no vectors to stack".into()));
    };
    let d = first.len();
    let mut out = Array2::zeros((rows.len(), d));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                context: "stacked vectors",
                expected: d,
                got: r.len(),
            });
        }
        out.row_mut(i).assign(r);
    }
    Ok(out)
}
