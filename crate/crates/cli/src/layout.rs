//! File names inside an experiment directory.

use std::path::{Path, PathBuf};

use einv::labels::Split;

pub struct Layout {
    root: PathBuf,
}

/// Filesystem-safe form of an utterance id.
pub fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.csv")
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("experiment.cfg")
    }

    pub fn features_dir(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn features(&self, id: &str) -> PathBuf {
        self.features_dir().join(format!("{}.feat", sanitize(id)))
    }

    pub fn audio_dir(&self) -> PathBuf {
        self.root.join("audio")
    }

    pub fn ubm(&self) -> PathBuf {
        self.root.join("ubm.bin")
    }

    pub fn tv(&self) -> PathBuf {
        self.root.join("tv.bin")
    }

    pub fn lda(&self) -> PathBuf {
        self.root.join("lda.bin")
    }

    pub fn wccn(&self) -> PathBuf {
        self.root.join("wccn.bin")
    }

    pub fn einv(&self) -> PathBuf {
        self.root.join("einv.bin")
    }

    pub fn loss_trace(&self) -> PathBuf {
        self.root.join("einv_loss.csv")
    }

    pub fn stats(&self, set: Set) -> PathBuf {
        self.root.join(format!("stats_{}.bin", set.name()))
    }

    pub fn ivectors(&self, set: Set) -> PathBuf {
        self.root.join(format!("ivectors_{}.bin", set.name()))
    }

    pub fn embeddings(&self, set: Set) -> PathBuf {
        self.root.join(format!("embeddings_{}.bin", set.name()))
    }

    pub fn embeddings_csv(&self, set: Set) -> PathBuf {
        self.root.join(format!("embeddings_{}.csv", set.name()))
    }

    pub fn models(&self, framework: &str) -> PathBuf {
        self.root.join(format!("models_{framework}.bin"))
    }

    pub fn report_txt(&self) -> PathBuf {
        self.root.join("report.txt")
    }

    pub fn report_csv(&self) -> PathBuf {
        self.root.join("report.csv")
    }

    pub fn grid_txt(&self) -> PathBuf {
        self.root.join("grid.txt")
    }

    pub fn grid_csv(&self) -> PathBuf {
        self.root.join("grid.csv")
    }
}

/// Utterance sets that get their own statistics and embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Set {
    Background,
    Train,
    Test,
    /// Fixed-length windows of the train utterances.
    Segments,
}

impl Set {
    pub const ALL: [Set; 4] = [Set::Background, Set::Train, Set::Test, Set::Segments];

    pub fn name(self) -> &'static str {
        match self {
            Set::Background => "background",
            Set::Train => "train",
            Set::Test => "test",
            Set::Segments => "segments",
        }
    }

    pub fn split(self) -> Split {
        match self {
            Set::Background => Split::Background,
            Set::Train | Set::Segments => Split::Train,
            Set::Test => Split::Test,
        }
    }
}
