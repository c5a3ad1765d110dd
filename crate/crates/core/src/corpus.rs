//! Labeled utterances and the corpus manifest.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::labels::{Emotion, Split};

/// Features of one utterance with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance<T> {
    pub features: FeatureMatrix<T>,
    pub speaker: String,
    pub emotion: Emotion,
    pub split: Split,
    pub duration_s: f64,
}

impl<T> Utterance<T> {
    pub fn id(&self) -> &str {
        &self.features.utterance_id
    }

    pub fn row(&self) -> ManifestRow {
        ManifestRow {
            id: self.features.utterance_id.clone(),
            speaker: self.speaker.clone(),
            emotion: self.emotion,
            split: self.split,
            duration_s: self.duration_s,
        }
    }
}

/// One manifest line. `id` is an utterance id or an audio path.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub id: String,
    pub speaker: String,
    pub emotion: Emotion,
    pub split: Split,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

pub const MANIFEST_HEADER: [&str; 5] = ["id", "speaker", "emotion", "split", "duration_s"];

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, r) in self.rows.iter().enumerate() {
            if r.id.is_empty() || r.speaker.is_empty() {
                return Err(Error::InvalidInput(format!("manifest row {}: empty id or speaker", i + 1)));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::InvalidInput(format!("manifest row {}: duplicate id {}", i + 1, r.id)));
            }
            if r.emotion == Emotion::Unknown {
                return Err(Error::InvalidInput(format!(
                    "manifest row {}: emotion must be one of N, H, A, S",
                    i + 1
                )));
            }
            if !(r.duration_s.is_finite() && r.duration_s > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "manifest row {}: duration {} must be positive",
                    i + 1,
                    r.duration_s
                )));
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    /// Parses CSV text with a header row.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("manifest is empty".into()));
        }
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::InvalidInput(format!("manifest header: {e}")))?
            .clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols != MANIFEST_HEADER {
            return Err(Error::InvalidInput(format!(
                "manifest header must be {}, found {}",
                MANIFEST_HEADER.join(","),
                cols.join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 1;
            let rec = rec.map_err(|e| Error::InvalidInput(format!("manifest row {line}: {e}")))?;
            let field = |k: usize| rec.get(k).unwrap_or("");
            let emotion = field(2)
                .parse::<Emotion>()
                .map_err(|_| Error::InvalidInput(format!("manifest row {line}: unknown emotion label {:?}", field(2))))?;
            let split = field(3)
                .parse::<Split>()
                .map_err(|_| Error::InvalidInput(format!("manifest row {line}: unknown split {:?}", field(3))))?;
            let duration_s = field(4)
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("manifest row {line}: bad duration {:?}", field(4))))?;
            rows.push(ManifestRow {
                id: field(0).to_string(),
                speaker: field(1).to_string(),
                emotion,
                split,
                duration_s,
            });
        }
        if rows.is_empty() {
            return Err(Error::InvalidInput("manifest has no rows".into()));
        }
        let m = Manifest { rows };
        m.validate()?;
        Ok(m)
    }

    /// Canonical CSV text.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(MANIFEST_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.id.as_str(),
                r.speaker.as_str(),
                r.emotion.code(),
                r.split.name(),
                &r.duration_s.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Manifest::parse(&text).map_err(|e| match e {
        Error::InvalidInput(reason) => Error::format(path, reason),
        other => other,
    })
}

pub fn write_manifest(path: &Path, m: &Manifest) -> Result<()> {
    m.validate()?;
    std::fs::write(path, m.to_csv()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert_eq, proptest, ProptestConfig};
    use proptest::strategy::Strategy;

    fn sample_manifest() -> Manifest {
        let mut rows = Vec::new();
        for s in 0..10 {
            for e in Emotion::EVALUATED {
                rows.push(ManifestRow {
                    id: format!("s{s}_{e}"),
                    speaker: format!("s{s}"),
                    emotion: e,
                    split: Split::Train,
                    duration_s: 120.0,
                });
            }
        }
        Manifest { rows }
    }

    #[test]
    fn forty_train_rows() {
        let m = Manifest::parse(&sample_manifest().to_csv()).unwrap();
        assert_eq!(m.split(Split::Train).count(), 40);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Manifest::parse("").is_err());
        assert!(Manifest::parse("id,speaker,emotion,split,duration_s\n").is_err());
        let err = Manifest::parse("id,speaker,emotion,split,duration_s\na,s,N,train,1\nb,s,X,test,2\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("row 2") && err.contains("\"X\""), "{err}");
        assert!(Manifest::parse("id,speaker,emotion,split,duration_s\na,s,N,train,1\na,s,N,test,2\n").is_err());
        assert!(Manifest::parse("id,speaker,emotion,split,duration_s\na,s,N,train,0\n").is_err());
    }

    fn row_strategy() -> impl Strategy<Value = (String, usize, usize, usize, f64)> {
        ("[a-z0-9_/.]{1,12}", 0..5usize, 0..4usize, 0..3usize, 0.01f64..1e4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_is_canonical(rows in proptest::collection::vec(row_strategy(), 1..20)) {
            let splits = [Split::Train, Split::Test, Split::Background];
            let m = Manifest {
                rows: rows
                    .iter()
                    .enumerate()
                    .map(|(i, (id, s, e, sp, d))| ManifestRow {
                        id: format!("{i}{id}"),
                        speaker: format!("spk{s}"),
                        emotion: Emotion::EVALUATED[*e],
                        split: splits[*sp],
                        duration_s: *d,
                    })
                    .collect(),
            };
            let text = m.to_csv();
            let back = Manifest::parse(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(back.to_csv(), text);
        }
    }
}
