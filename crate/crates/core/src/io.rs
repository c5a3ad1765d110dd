//! Versioned binary artifacts.
//!
//! Layout: magic `EIVB`, `u32` format version, 4-byte kind tag, `u32` block
//! count, then per block a `u32` rank, `u64` extents and the row-major
//! little-endian `f64` payload. Labeled matrices carry a `<file>.ids` CSV
//! sidecar (`id,speaker,emotion`) with one line per row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use crate::compensate::{CompEmbedding, LdaTransform, WccnTransform};
use crate::einv::{AdamState, EinvNet, EpochLoss};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gmm::{BwStats, DiagGmm};
use crate::labels::Emotion;
use crate::scalar::Real;
use crate::tv::{IVector, TvModel};

pub const MAGIC: &[u8; 4] = b"EIVB";
pub const FORMAT_VERSION: u32 = 1;
const MAX_RANK: u32 = 2;

/// Artifact kind tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Ubm,
    Tv,
    Lda,
    Wccn,
    Einv,
    /// Frames of one utterance plus its voice-activity mask.
    Features,
    /// Baum–Welch statistics of a set of utterances.
    Stats,
    /// Labeled rows (i-vectors, embeddings, speaker models).
    Matrix,
}

impl Kind {
    pub fn tag(self) -> [u8; 4] {
        *match self {
            Kind::Ubm => b"UBM ",
            Kind::Tv => b"TV  ",
            Kind::Lda => b"LDA ",
            Kind::Wccn => b"WCCN",
            Kind::Einv => b"EINV",
            Kind::Features => b"FEAT",
            Kind::Stats => b"STAT",
            Kind::Matrix => b"MATX",
        }
    }

    fn name(self) -> String {
        String::from_utf8_lossy(&self.tag()).trim().to_string()
    }
}

/// One array of a file.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Block {
    pub fn from_vec<T: Real>(v: &Array1<T>) -> Self {
        Self {
            shape: vec![v.len()],
            data: v.iter().map(|x| x.as_f64()).collect(),
        }
    }

    pub fn from_matrix<T: Real>(m: &Array2<T>) -> Self {
        Self {
            shape: vec![m.nrows(), m.ncols()],
            data: m.iter().map(|x| x.as_f64()).collect(),
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
        }
    }

    fn into_vec<T: Real>(self, path: &Path, what: &str) -> Result<Array1<T>> {
        if self.shape.len() != 1 {
            return Err(Error::format(path, format!("{what}: expected a vector, found shape {:?}", self.shape)));
        }
        Ok(Array1::from_iter(self.data.into_iter().map(T::lit)))
    }

    fn into_matrix<T: Real>(self, path: &Path, what: &str) -> Result<Array2<T>> {
        if self.shape.len() != 2 {
            return Err(Error::format(path, format!("{what}: expected a matrix, found shape {:?}", self.shape)));
        }
        let data = self.data.into_iter().map(T::lit).collect();
        Array2::from_shape_vec((self.shape[0], self.shape[1]), data)
            .map_err(|e| Error::format(path, format!("{what}: {e}")))
    }
}

pub fn write_blocks(path: &Path, kind: Kind, blocks: &[Block]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(MAGIC)?;
    put(&FORMAT_VERSION.to_le_bytes())?;
    put(&kind.tag())?;
    put(&(blocks.len() as u32).to_le_bytes())?;
    for b in blocks {
        debug_assert_eq!(b.shape.iter().product::<usize>(), b.data.len());
        put(&(b.shape.len() as u32).to_le_bytes())?;
        for &d in &b.shape {
            put(&(d as u64).to_le_bytes())?;
        }
        let mut payload = Vec::with_capacity(8 * b.data.len());
        for v in &b.data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        put(&payload)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_exact<const N: usize>(r: &mut impl Read, path: &Path, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| Error::format(path, format!("truncated file while reading {what}")))?;
    Ok(buf)
}

/// Reads and validates a file of the expected kind.
pub fn read_blocks(path: &Path, kind: Kind) -> Result<Vec<Block>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut r = BufReader::new(file);
    if &read_exact::<4>(&mut r, path, "magic")? != MAGIC {
        return Err(Error::format(path, "not a model file (bad magic)"));
    }
    let version = u32::from_le_bytes(read_exact(&mut r, path, "version")?);
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let tag = read_exact::<4>(&mut r, path, "kind")?;
    if tag != kind.tag() {
        return Err(Error::format(
            path,
            format!(
                "expected a {} file, found kind {:?}",
                kind.name(),
                String::from_utf8_lossy(&tag).trim()
            ),
        ));
    }
    let n_blocks = u32::from_le_bytes(read_exact(&mut r, path, "block count")?);
    let mut consumed: u64 = 16;
    let mut blocks = Vec::with_capacity(n_blocks as usize);
    for i in 0..n_blocks {
        let rank = u32::from_le_bytes(read_exact(&mut r, path, "block rank")?);
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::format(path, format!("block {i}: unsupported rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            shape.push(u64::from_le_bytes(read_exact(&mut r, path, "block shape")?) as usize);
        }
        consumed += 4 + 8 * u64::from(rank);
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::format(path, format!("block {i}: shape overflow")))?;
        let bytes = (count as u64).saturating_mul(8);
        if consumed.saturating_add(bytes) > len {
            return Err(Error::format(
                path,
                format!("block {i}: payload of shape {shape:?} exceeds the file length"),
            ));
        }
        let mut raw = vec![0u8; count * 8];
        r.read_exact(&mut raw)
            .map_err(|_| Error::format(path, format!("block {i}: truncated payload")))?;
        consumed += bytes;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        blocks.push(Block { shape, data });
    }
    if consumed != len {
        return Err(Error::format(path, format!("{} trailing bytes", len - consumed)));
    }
    Ok(blocks)
}

fn expect_blocks(path: &Path, blocks: &[Block], n: usize, what: &str) -> Result<()> {
    if blocks.len() != n {
        return Err(Error::format(path, format!("{what} needs {n} blocks, found {}", blocks.len())));
    }
    Ok(())
}

fn validated<M>(path: &Path, r: Result<M>) -> Result<M> {
    r.map_err(|e| match e {
        Error::Format { .. } | Error::Io { .. } | Error::Version { .. } => e,
        other => Error::format(path, other.to_string()),
    })
}

pub fn save_ubm<T: Real>(path: &Path, g: &DiagGmm<T>) -> Result<()> {
    write_blocks(
        path,
        Kind::Ubm,
        &[Block::from_vec(&g.weights), Block::from_matrix(&g.means), Block::from_matrix(&g.variances)],
    )
}

pub fn load_ubm<T: Real>(path: &Path) -> Result<DiagGmm<T>> {
    let b = read_blocks(path, Kind::Ubm)?;
    expect_blocks(path, &b, 3, "UBM")?;
    let mut it = b.into_iter();
    let weights = it.next().expect("3 blocks").into_vec(path, "weights")?;
    let means = it.next().expect("3 blocks").into_matrix(path, "means")?;
    let variances = it.next().expect("3 blocks").into_matrix(path, "variances")?;
    validated(path, DiagGmm::new(weights, means, variances))
}

pub fn save_tv<T: Real>(path: &Path, tv: &TvModel<T>) -> Result<()> {
    write_blocks(
        path,
        Kind::Tv,
        &[Block::from_matrix(&tv.t), Block::from_matrix(&tv.sigma), Block::from_matrix(&tv.ubm_means)],
    )
}

pub fn load_tv<T: Real>(path: &Path) -> Result<TvModel<T>> {
    let b = read_blocks(path, Kind::Tv)?;
    expect_blocks(path, &b, 3, "T-matrix")?;
    let mut it = b.into_iter();
    let tv = TvModel {
        t: it.next().expect("3 blocks").into_matrix(path, "T")?,
        sigma: it.next().expect("3 blocks").into_matrix(path, "sigma")?,
        ubm_means: it.next().expect("3 blocks").into_matrix(path, "means")?,
    };
    validated(path, tv.validate())?;
    Ok(tv)
}

pub fn save_lda<T: Real>(path: &Path, lda: &LdaTransform<T>) -> Result<()> {
    write_blocks(
        path,
        Kind::Lda,
        &[Block::from_matrix(&lda.basis), Block::from_vec(&lda.mean), Block::from_vec(&lda.eigenvalues)],
    )
}

pub fn load_lda<T: Real>(path: &Path) -> Result<LdaTransform<T>> {
    let b = read_blocks(path, Kind::Lda)?;
    expect_blocks(path, &b, 3, "LDA")?;
    let mut it = b.into_iter();
    let lda = LdaTransform {
        basis: it.next().expect("3 blocks").into_matrix(path, "basis")?,
        mean: it.next().expect("3 blocks").into_vec(path, "mean")?,
        eigenvalues: it.next().expect("3 blocks").into_vec(path, "eigenvalues")?,
    };
    if lda.mean.len() != lda.basis.nrows() || lda.eigenvalues.len() != lda.basis.ncols() {
        return Err(Error::format(path, "LDA block shapes disagree"));
    }
    Ok(lda)
}

pub fn save_wccn<T: Real>(path: &Path, w: &WccnTransform<T>) -> Result<()> {
    write_blocks(path, Kind::Wccn, &[Block::from_matrix(&w.chol)])
}

pub fn load_wccn<T: Real>(path: &Path) -> Result<WccnTransform<T>> {
    let b = read_blocks(path, Kind::Wccn)?;
    expect_blocks(path, &b, 1, "WCCN")?;
    let chol = b.into_iter().next().expect("1 block").into_matrix(path, "B")?;
    if chol.nrows() != chol.ncols() {
        return Err(Error::format(path, "WCCN factor is not square"));
    }
    Ok(WccnTransform { chol })
}

/// Weights and biases layer by layer, then the Adam moments and step.
pub fn save_einv<T: Real>(path: &Path, net: &EinvNet<T>) -> Result<()> {
    let mut blocks = Vec::new();
    for (w, b) in net.weights.iter().zip(&net.biases) {
        blocks.push(Block::from_matrix(w));
        blocks.push(Block::from_vec(b));
    }
    let a = &net.adam;
    blocks.extend(a.m_w.iter().map(Block::from_matrix));
    blocks.extend(a.v_w.iter().map(Block::from_matrix));
    blocks.extend(a.m_b.iter().map(Block::from_vec));
    blocks.extend(a.v_b.iter().map(Block::from_vec));
    blocks.push(Block::scalar(a.step as f64));
    write_blocks(path, Kind::Einv, &blocks)
}

pub fn load_einv<T: Real>(path: &Path) -> Result<EinvNet<T>> {
    let b = read_blocks(path, Kind::Einv)?;
    if b.len() < 7 || (b.len() - 1) % 6 != 0 {
        return Err(Error::format(path, format!("extractor file has {} blocks", b.len())));
    }
    let layers = (b.len() - 1) / 6;
    let mut it = b.into_iter();
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for l in 0..layers {
        weights.push(it.next().expect("counted").into_matrix(path, &format!("W{l}"))?);
        biases.push(it.next().expect("counted").into_vec(path, &format!("b{l}"))?);
    }
    let mats = |n: usize, what: &str, it: &mut std::vec::IntoIter<Block>| -> Result<Vec<Array2<T>>> {
        (0..n).map(|_| it.next().expect("counted").into_matrix(path, what)).collect()
    };
    let m_w = mats(layers, "Adam m_w", &mut it)?;
    let v_w = mats(layers, "Adam v_w", &mut it)?;
    let m_b = (0..layers)
        .map(|_| it.next().expect("counted").into_vec(path, "Adam m_b"))
        .collect::<Result<Vec<_>>>()?;
    let v_b = (0..layers)
        .map(|_| it.next().expect("counted").into_vec(path, "Adam v_b"))
        .collect::<Result<Vec<_>>>()?;
    let step = it.next().expect("counted").data.first().copied().unwrap_or(0.0);
    if !(step >= 0.0 && step.fract() == 0.0) {
        return Err(Error::format(path, format!("invalid Adam step {step}")));
    }
    let adam = AdamState {
        m_w,
        v_w,
        m_b,
        v_b,
        step: step as u64,
    };
    let net = validated(path, EinvNet::from_parts(weights, biases, Some(adam)))?;
    if !net.is_finite() {
        return Err(Error::format(path, "extractor parameters are not finite"));
    }
    Ok(net)
}

pub fn save_features<T: Real>(path: &Path, f: &FeatureMatrix<T>) -> Result<()> {
    let mask = Array1::from_iter(f.vad_mask.iter().map(|&v| if v { 1.0 } else { 0.0 }));
    write_blocks(path, Kind::Features, &[Block::from_matrix(&f.frames), Block::from_vec(&mask)])
}

pub fn load_features<T: Real>(path: &Path, utterance_id: impl Into<String>) -> Result<FeatureMatrix<T>> {
    let b = read_blocks(path, Kind::Features)?;
    expect_blocks(path, &b, 2, "features")?;
    let mut it = b.into_iter();
    let frames = it.next().expect("2 blocks").into_matrix::<T>(path, "frames")?;
    let mask: Array1<f64> = it.next().expect("2 blocks").into_vec(path, "VAD mask")?;
    if mask.len() != frames.nrows() {
        return Err(Error::format(path, "VAD mask length differs from frame count"));
    }
    Ok(FeatureMatrix {
        frames,
        vad_mask: mask.iter().map(|&v| v != 0.0).collect(),
        utterance_id: utterance_id.into(),
    })
}

/// Labels of one matrix row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowLabel {
    pub id: String,
    pub speaker: String,
    pub emotion: Emotion,
}

/// Sidecar path of a labeled matrix file.
pub fn ids_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

fn write_labels(path: &Path, labels: &[RowLabel]) -> Result<()> {
    let side = ids_path(path);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "speaker", "emotion"]).expect("in-memory write");
    for l in labels {
        w.write_record([l.id.as_str(), l.speaker.as_str(), l.emotion.code()])
            .expect("in-memory write");
    }
    std::fs::write(&side, w.into_inner().expect("in-memory flush")).map_err(|e| Error::io(&side, e))
}

fn read_labels(path: &Path, rows: usize) -> Result<Vec<RowLabel>> {
    let side = ids_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::with_capacity(rows);
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(&side, format!("row {}: {e}", i + 1)))?;
        if rec.len() != 3 {
            return Err(Error::format(&side, format!("row {}: expected 3 fields", i + 1)));
        }
        let emotion = rec[2]
            .parse()
            .map_err(|_| Error::format(&side, format!("row {}: unknown emotion label {:?}", i + 1, &rec[2])))?;
        out.push(RowLabel {
            id: rec[0].to_string(),
            speaker: rec[1].to_string(),
            emotion,
        });
    }
    if out.len() != rows {
        return Err(Error::format(
            &side,
            format!("{} labels for {rows} matrix rows", out.len()),
        ));
    }
    Ok(out)
}

/// Rows plus labels; file kind `MATX`.
pub fn save_labeled<T: Real>(path: &Path, rows: &Array2<T>, labels: &[RowLabel]) -> Result<()> {
    if labels.len() != rows.nrows() {
        return Err(Error::DimensionMismatch {
            context: "labeled matrix rows",
            expected: rows.nrows(),
            got: labels.len(),
        });
    }
    write_blocks(path, Kind::Matrix, &[Block::from_matrix(rows)])?;
    write_labels(path, labels)
}

pub fn load_labeled<T: Real>(path: &Path) -> Result<(Array2<T>, Vec<RowLabel>)> {
    let b = read_blocks(path, Kind::Matrix)?;
    expect_blocks(path, &b, 1, "matrix")?;
    let m = b.into_iter().next().expect("1 block").into_matrix(path, "rows")?;
    let labels = read_labels(path, m.nrows())?;
    Ok((m, labels))
}

pub fn save_embeddings<T: Real>(path: &Path, embs: &[CompEmbedding<T>]) -> Result<()> {
    let rows = crate::compensate::stack(embs.iter().map(|e| e.e.view()))?;
    let labels: Vec<RowLabel> = embs
        .iter()
        .map(|e| RowLabel {
            id: e.utterance_id.clone(),
            speaker: e.speaker.clone(),
            emotion: e.emotion,
        })
        .collect();
    save_labeled(path, &rows, &labels)
}

pub fn load_embeddings<T: Real>(path: &Path) -> Result<Vec<CompEmbedding<T>>> {
    let (m, labels) = load_labeled::<T>(path)?;
    Ok(m.rows()
        .into_iter()
        .zip(labels)
        .map(|(r, l)| CompEmbedding::new(r.to_owned(), l.id, l.speaker, l.emotion))
        .collect())
}

/// I-vectors with their labels.
pub fn save_ivectors<T: Real>(path: &Path, ivs: &[IVector<T>], labels: &[RowLabel]) -> Result<()> {
    let rows = crate::compensate::stack(ivs.iter().map(|iv| iv.w.view()))?;
    save_labeled(path, &rows, labels)
}

pub fn load_ivectors<T: Real>(path: &Path) -> Result<(Vec<IVector<T>>, Vec<RowLabel>)> {
    let (m, labels) = load_labeled::<T>(path)?;
    let ivs = m
        .rows()
        .into_iter()
        .zip(&labels)
        .map(|(r, l)| IVector {
            w: r.to_owned(),
            utterance_id: l.id.clone(),
        })
        .collect();
    Ok((ivs, labels))
}

/// Zeroth-order (`U × C`) and first-order (`U × C·D`) statistics plus labels.
pub fn save_stats<T: Real>(path: &Path, stats: &[BwStats<T>], labels: &[RowLabel]) -> Result<()> {
    let Some(first) = stats.first() else {
        return Err(Error::InsufficientData("no statistics to save".into()));
    };
    let (c, d) = (first.n_components(), first.dim());
    let mut n = Array2::<T>::zeros((stats.len(), c));
    let mut f = Array2::<T>::zeros((stats.len(), c * d));
    for (i, s) in stats.iter().enumerate() {
        if s.n_components() != c || s.dim() != d {
            return Err(Error::DimensionMismatch {
                context: "statistics shape",
                expected: c * d,
                got: s.n_components() * s.dim(),
            });
        }
        n.row_mut(i).assign(&s.n);
        f.row_mut(i).assign(&s.stacked_first_order());
    }
    write_blocks(path, Kind::Stats, &[Block::from_matrix(&n), Block::from_matrix(&f)])?;
    write_labels(path, labels)
}

pub fn load_stats<T: Real>(path: &Path) -> Result<(Vec<BwStats<T>>, Vec<RowLabel>)> {
    let b = read_blocks(path, Kind::Stats)?;
    expect_blocks(path, &b, 2, "statistics")?;
    let mut it = b.into_iter();
    let n = it.next().expect("2 blocks").into_matrix::<T>(path, "zeroth order")?;
    let f = it.next().expect("2 blocks").into_matrix::<T>(path, "first order")?;
    let c = n.ncols();
    if n.nrows() != f.nrows() || c == 0 || f.ncols() % c != 0 {
        return Err(Error::format(path, "statistics block shapes disagree"));
    }
    let d = f.ncols() / c;
    let labels = read_labels(path, n.nrows())?;
    let stats = n
        .rows()
        .into_iter()
        .zip(f.rows())
        .zip(&labels)
        .map(|((nr, fr), l)| BwStats {
            n: nr.to_owned(),
            f: fr.to_owned().into_shape_with_order((c, d)).expect("c·d entries"),
            utterance_id: l.id.clone(),
        })
        .collect();
    Ok((stats, labels))
}

/// `epoch,train_mse,val_mse` lines.
pub fn loss_trace_csv(trace: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_mse,val_mse\n");
    for t in trace {
        out.push_str(&format!("{},{},{}\n", t.epoch, t.train_mse, t.val_mse));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use tempfile::tempdir;

    #[test]
    fn ubm_round_trip_and_version_check() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("ubm.bin");
        let g = DiagGmm::<f64>::new(array![0.25, 0.75], array![[0.0, 1.0], [2.0, -3.5]], array![[1.0, 2.0], [0.5, 0.25]]).unwrap();
        save_ubm(&p, &g).unwrap();
        assert_eq!(load_ubm::<f64>(&p).unwrap(), g);
        assert!(matches!(load_tv::<f64>(&p), Err(Error::Format { .. })));

        let mut bytes = std::fs::read(&p).unwrap();
        bytes[4] = 9;
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_ubm::<f64>(&p), Err(Error::Version { found: 9, .. })));
        bytes[4] = 1;
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_ubm::<f64>(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn einv_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("einv.bin");
        let mut net = EinvNet::<f64>::new(&[5, 4, 3, 4, 5], 2);
        net.adam.step = 17;
        net.adam.m_w[1].fill(0.5);
        save_einv(&p, &net).unwrap();
        assert_eq!(load_einv::<f64>(&p).unwrap(), net);
    }

    #[test]
    fn labeled_and_stats_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("emb.bin");
        let embs = vec![
            CompEmbedding::new(array![1.0, 2.0], "u1", "s1", Emotion::Happy),
            CompEmbedding::new(array![-1.0, 0.5], "u2", "s2", Emotion::Neutral),
        ];
        save_embeddings(&p, &embs).unwrap();
        assert_eq!(load_embeddings::<f64>(&p).unwrap(), embs);

        let sp = dir.path().join("stats.bin");
        let stats = vec![BwStats {
            n: array![1.0, 2.0, 3.0],
            f: Array2::from_shape_fn((3, 2), |(i, j)| (i * 2 + j) as f64),
            utterance_id: "u1".into(),
        }];
        let labels = vec![RowLabel {
            id: "u1".into(),
            speaker: "s1".into(),
            emotion: Emotion::Sad,
        }];
        save_stats(&sp, &stats, &labels).unwrap();
        let (back, back_labels) = load_stats::<f64>(&sp).unwrap();
        assert_eq!(back, stats);
        assert_eq!(back_labels, labels);
        std::fs::write(ids_path(&sp), "id,speaker,emotion\n").unwrap();
        assert!(load_stats::<f64>(&sp).is_err());
    }

    #[test]
    fn features_keep_vad_mask() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("f.bin");
        let mut f = FeatureMatrix::<f32>::from_frames("x", Array2::from_elem((3, 2), 1.5f32));
        f.vad_mask[1] = false;
        save_features(&p, &f).unwrap();
        assert_eq!(load_features::<f32>(&p, "x").unwrap(), f);
    }
}
