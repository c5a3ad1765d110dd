use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Emotion class of an utterance. `Unknown` marks background data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Emotion {
    Neutral,
    Happy,
    Angry,
    Sad,
    Unknown,
}

impl Emotion {
    /// The four evaluated classes in report order.
    pub const EVALUATED: [Emotion; 4] = [Emotion::Neutral, Emotion::Happy, Emotion::Angry, Emotion::Sad];

    pub fn code(self) -> &'static str {
        match self {
            Emotion::Neutral => "N",
            Emotion::Happy => "H",
            Emotion::Angry => "A",
            Emotion::Sad => "S",
            Emotion::Unknown => "unknown",
        }
    }

    pub fn is_neutral(self) -> bool {
        self == Emotion::Neutral
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "N" | "n" | "neutral" => Ok(Emotion::Neutral),
            "H" | "h" | "happy" | "happiness" => Ok(Emotion::Happy),
            "A" | "a" | "angry" | "anger" => Ok(Emotion::Angry),
            "S" | "s" | "sad" | "sadness" => Ok(Emotion::Sad),
            "unknown" => Ok(Emotion::Unknown),
            other => Err(Error::InvalidInput(format!("unknown emotion label {other:?}"))),
        }
    }
}

/// Corpus partition of an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
    Background,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Background => "background",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "background" => Ok(Split::Background),
            other => Err(Error::InvalidInput(format!("unknown split {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for e in Emotion::EVALUATED.iter().chain([Emotion::Unknown].iter()) {
            assert_eq!(e.code().parse::<Emotion>().unwrap(), *e);
        }
        assert!("X".parse::<Emotion>().is_err());
        for s in [Split::Train, Split::Test, Split::Background] {
            assert_eq!(s.name().parse::<Split>().unwrap(), s);
        }
        assert!("dev".parse::<Split>().is_err());
    }
}
