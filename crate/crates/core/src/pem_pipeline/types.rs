use std::fmt;

use serde::{Deserialize, Serialize};

use crate::answer::AnswerNormalizer;
use crate::tag_grammar::PemLabel;

use super::PipelineError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Media {
    pub audio_ref: String,
    pub video_ref: String,
}

/// One question over an audio-video clip.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub question: String,
    pub media: Media,
    pub gold_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
}

/// Which modalities the model is shown while probing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProbeSetting {
    A,
    V,
    AV,
}

impl ProbeSetting {
    pub const ALL: [ProbeSetting; 3] = [ProbeSetting::A, ProbeSetting::V, ProbeSetting::AV];

    pub fn includes_audio(self) -> bool {
        matches!(self, ProbeSetting::A | ProbeSetting::AV)
    }

    pub fn includes_video(self) -> bool {
        matches!(self, ProbeSetting::V | ProbeSetting::AV)
    }
}

impl fmt::Display for ProbeSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeSetting::A => "A",
            ProbeSetting::V => "V",
            ProbeSetting::AV => "AV",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub answer: String,
    pub cot: String,
}

impl Sample {
    pub fn new(answer: impl Into<String>, cot: impl Into<String>) -> Self {
        Sample { answer: answer.into(), cot: cot.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub setting: ProbeSetting,
    pub samples: Vec<Sample>,
}

impl SampleSet {
    pub fn cots(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.cot.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityRecord {
    pub accuracy_rate: f64,
    pub consistency: f64,
    pub solvable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiscardReason {
    /// Every setting solves it.
    TriviallyEasy,
    /// More than one single-modality setting solves it. Never produced by
    /// [`decide_pem`](super::decide_pem): the only such pattern that is not
    /// trivially easy is A+V without AV, which is reported as contradictory.
    Ambiguous,
    /// A single modality solves it but the full input does not.
    Contradictory,
    /// No setting solves it.
    Unsolvable,
}

impl DiscardReason {
    pub const ALL: [DiscardReason; 4] = [
        DiscardReason::TriviallyEasy,
        DiscardReason::Ambiguous,
        DiscardReason::Contradictory,
        DiscardReason::Unsolvable,
    ];
}

impl fmt::Display for DiscardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Label(PemLabel),
    Discard(DiscardReason),
}

impl Decision {
    pub fn label(self) -> Option<PemLabel> {
        match self {
            Decision::Label(l) => Some(l),
            Decision::Discard(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingRecords {
    #[serde(rename = "A")]
    pub audio: SolvabilityRecord,
    #[serde(rename = "V")]
    pub video: SolvabilityRecord,
    #[serde(rename = "AV")]
    pub audio_visual: SolvabilityRecord,
}

impl SettingRecords {
    pub fn get(&self, setting: ProbeSetting) -> &SolvabilityRecord {
        match setting {
            ProbeSetting::A => &self.audio,
            ProbeSetting::V => &self.video,
            ProbeSetting::AV => &self.audio_visual,
        }
    }
}

/// Per-instance probing evidence and the resulting decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PemRecord {
    pub id: String,
    pub settings: SettingRecords,
    pub decision: Decision,
    /// First AV-setting chain of thought, kept for labeled instances only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub n: usize,
    pub tau_acc: f64,
    pub tau_cons: f64,
    pub parallelism: usize,
    pub normalizer: AnswerNormalizer,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            n: 8,
            tau_acc: 0.75,
            tau_cons: 0.8,
            parallelism: 4,
            normalizer: AnswerNormalizer::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        for (name, t) in [("tau_acc", self.tau_acc), ("tau_cons", self.tau_cons)] {
            if !(t > 0.0 && t <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {t}"));
            }
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decision_json_shape() {
        let l = serde_json::to_string(&Decision::Label(PemLabel::AudioVisual)).unwrap();
        assert_eq!(l, r#"{"label":"Audio-Visual"}"#);
        let d = serde_json::to_string(&Decision::Discard(DiscardReason::TriviallyEasy)).unwrap();
        assert_eq!(d, r#"{"discard":"TriviallyEasy"}"#);
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = PipelineConfig::default();
        assert_eq!((c.n, c.tau_acc, c.tau_cons), (8, 0.75, 0.8));
        assert!(c.validate().is_ok());
        assert!(PipelineConfig { tau_acc: 1.5, ..c }.validate().is_err());
        assert!(PipelineConfig { tau_cons: 0.0, ..c }.validate().is_err());
        assert!(PipelineConfig { n: 1, ..c }.validate().is_err());
        assert!(PipelineConfig { parallelism: 0, ..c }.validate().is_err());
    }

    #[test]
    fn instance_choices_optional() {
        let i: Instance = serde_json::from_str(
            r#"{"id":"x","question":"q","media":{"audio_ref":"a.wav","video_ref":"v.mp4"},"gold_answer":"g"}"#,
        )
        .unwrap();
        assert!(i.choices.is_none());
    }
}
