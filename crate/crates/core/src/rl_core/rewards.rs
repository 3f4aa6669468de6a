use serde::{Deserialize, Serialize};

use crate::answer::AnswerNormalizer;
use crate::tag_grammar::{parse_trace, ParseDiagnostic, PemLabel};

use super::RlError;

/// Stage-2 reward weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub lambda_acc: f64,
    pub lambda_mps: f64,
    pub normalizer: AnswerNormalizer,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { lambda_acc: 1.0, lambda_mps: 0.2, normalizer: AnswerNormalizer::default() }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        for (name, v) in [("lambda_acc", self.lambda_acc), ("lambda_mps", self.lambda_mps)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(RlError::InvalidConfig(format!(
                    "{name} must be a nonnegative finite number, got {v}"
                )));
            }
        }
        Ok(())
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Modality-preference and structure reward: 1 iff the output is a
/// well-formed trace whose PEM equals `gold_pem`.
pub fn reward_mps(output_text: &str, gold_pem: PemLabel) -> f64 {
    indicator(parse_trace(output_text).is_ok_and(|t| t.pem() == gold_pem))
}

/// Answer accuracy with the default normalizer.
pub fn reward_acc(output_text: &str, ground_truth: &str) -> f64 {
    reward_acc_with(output_text, ground_truth, &AnswerNormalizer::default())
}

/// 1 iff the output parses and its answer matches `ground_truth` after
/// normalization. Malformed outputs score 0.
pub fn reward_acc_with(output_text: &str, ground_truth: &str, normalizer: &AnswerNormalizer) -> f64 {
    indicator(parse_trace(output_text).is_ok_and(|t| normalizer.matches(t.answer_text(), ground_truth)))
}

pub fn reward_stage1(output_text: &str, gold_pem: PemLabel) -> f64 {
    reward_mps(output_text, gold_pem)
}

pub fn reward_stage2(output_text: &str, gold_pem: PemLabel, ground_truth: &str, cfg: &RewardConfig) -> f64 {
    cfg.lambda_acc * reward_acc_with(output_text, ground_truth, &cfg.normalizer)
        + cfg.lambda_mps * reward_mps(output_text, gold_pem)
}

/// All rewards for one output, plus the parser diagnostics when it is malformed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_mps: f64,
    pub r_acc: f64,
    pub r_stage2: f64,
    pub diagnostics: Vec<ParseDiagnostic>,
}

pub fn score_output(
    output_text: &str,
    gold_pem: PemLabel,
    ground_truth: &str,
    cfg: &RewardConfig,
) -> RewardBreakdown {
    match parse_trace(output_text) {
        Ok(t) => {
            let r_mps = indicator(t.pem() == gold_pem);
            let r_acc = indicator(cfg.normalizer.matches(t.answer_text(), ground_truth));
            RewardBreakdown {
                r_mps,
                r_acc,
                r_stage2: cfg.lambda_acc * r_acc + cfg.lambda_mps * r_mps,
                diagnostics: Vec::new(),
            }
        }
        Err(diagnostics) => RewardBreakdown { r_mps: 0.0, r_acc: 0.0, r_stage2: 0.0, diagnostics },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AUDIO_COLLIE: &str =
        "<mod>Audio</mod><v>sheep visible</v><a>barking only</a><sum>dog barks</sum><ans>collie</ans>";

    #[test]
    fn mps() {
        assert_eq!(reward_mps(AUDIO_COLLIE, PemLabel::Audio), 1.0);
        assert_eq!(reward_mps(AUDIO_COLLIE, PemLabel::Visual), 0.0);
        let visual = AUDIO_COLLIE.replace("<mod>Audio", "<mod>Visual");
        assert_eq!(reward_mps(&visual, PemLabel::Audio), 0.0);
        for gold in PemLabel::ALL {
            assert_eq!(reward_mps("<mod>Audio</mod><v>x</v>", gold), 0.0);
        }
    }

    #[test]
    fn stage1_is_mps() {
        for gold in PemLabel::ALL {
            assert_eq!(reward_stage1(AUDIO_COLLIE, gold), reward_mps(AUDIO_COLLIE, gold));
        }
    }

    #[test]
    fn acc() {
        assert_eq!(reward_acc(AUDIO_COLLIE, "Collie"), 1.0);
        assert_eq!(reward_acc(AUDIO_COLLIE, "sheep"), 0.0);
        assert_eq!(reward_acc("<mod>Audio</mod><v>a</v><a>b</a><sum>c</sum>", "collie"), 0.0);
    }

    #[test]
    fn stage2_weights() {
        let cfg = RewardConfig::default();
        assert_eq!(reward_stage2(AUDIO_COLLIE, PemLabel::Audio, "collie", &cfg), 1.2);
        assert_eq!(reward_stage2(AUDIO_COLLIE, PemLabel::Visual, "collie", &cfg), 1.0);
        assert_eq!(reward_stage2(AUDIO_COLLIE, PemLabel::Audio, "sheep", &cfg), 0.2);
        assert_eq!(reward_stage2("garbage", PemLabel::Audio, "collie", &cfg), 0.0);
    }

    #[test]
    fn breakdown_matches_individual_rewards() {
        let cfg = RewardConfig::default();
        let b = score_output(AUDIO_COLLIE, PemLabel::Audio, "sheep", &cfg);
        assert_eq!((b.r_mps, b.r_acc, b.r_stage2), (1.0, 0.0, 0.2));
        let b = score_output("", PemLabel::Audio, "sheep", &cfg);
        assert_eq!(b.r_stage2, 0.0);
        assert_eq!(b.diagnostics.len(), 5);
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::default().validate().is_ok());
        let bad = RewardConfig { lambda_mps: -0.1, ..RewardConfig::default() };
        assert!(bad.validate().is_err());
    }
}
