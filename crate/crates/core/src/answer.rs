//! Answer normalization used by the accuracy reward and by the annotation
//! pipeline's correctness rate.

use serde::{Deserialize, Serialize};

/// Punctuation stripped from the end of an answer.
const TERMINAL_PUNCTUATION: &[char] =
    &['.', ',', ';', ':', '!', '?', '。', '，', '；', '：', '！', '？', '…'];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnswerNormalizer {
    pub case_fold: bool,
    pub collapse_whitespace: bool,
    pub strip_terminal_punctuation: bool,
}

impl Default for AnswerNormalizer {
    fn default() -> Self {
        AnswerNormalizer { case_fold: true, collapse_whitespace: true, strip_terminal_punctuation: true }
    }
}

impl AnswerNormalizer {
    pub fn normalize(&self, answer: &str) -> String {
        let mut s = if self.case_fold { answer.to_lowercase() } else { answer.to_string() };
        if self.collapse_whitespace {
            s = s.split_whitespace().collect::<Vec<_>>().join(" ");
        } else {
            s = s.trim().to_string();
        }
        if self.strip_terminal_punctuation {
            loop {
                let trimmed = s.trim_end_matches(TERMINAL_PUNCTUATION).trim_end();
                if trimmed.len() == s.len() {
                    break;
                }
                s.truncate(trimmed.len());
            }
        }
        s
    }

    pub fn matches(&self, answer: &str, gold: &str) -> bool {
        self.normalize(answer) == self.normalize(gold)
    }
}

/// Normalizes with the default pipeline.
pub fn normalize_answer(answer: &str) -> String {
    AnswerNormalizer::default().normalize(answer)
}
