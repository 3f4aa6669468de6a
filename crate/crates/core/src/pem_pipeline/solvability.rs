use crate::answer::AnswerNormalizer;
use crate::tag_grammar::PemLabel;

use super::embedder::{EmbedError, TextEmbedder};
use super::types::{Decision, DiscardReason, PipelineConfig, SampleSet};
use super::PipelineError;

/// Fraction of samples whose normalized answer equals the normalized gold answer.
pub fn accuracy_rate(
    samples: &SampleSet,
    gold: &str,
    normalizer: &AnswerNormalizer,
) -> Result<f64, PipelineError> {
    if samples.samples.is_empty() {
        return Err(PipelineError::EmptySamples);
    }
    let gold = normalizer.normalize(gold);
    let correct = samples.samples.iter().filter(|s| normalizer.normalize(&s.answer) == gold).count();
    Ok(correct as f64 / samples.samples.len() as f64)
}

/// Mean pairwise cosine similarity of the embedded texts, over all unordered
/// pairs. Embeddings are normalized to unit length first.
pub fn consistency(texts: &[String], embedder: &dyn TextEmbedder) -> Result<f64, EmbedError> {
    if texts.len() < 2 {
        return Err(EmbedError::TooFewTexts(texts.len()));
    }
    let vectors = embedder.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(EmbedError::CountMismatch { expected: texts.len(), found: vectors.len() });
    }
    let unit: Vec<Vec<f64>> = vectors
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EmbedError::NonFinite(k));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(EmbedError::ZeroVector(k));
            }
            Ok(v.into_iter().map(|x| x / norm).collect())
        })
        .collect::<Result<_, _>>()?;
    if unit.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(EmbedError::DimensionMismatch);
    }

    let n = unit.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            total += unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

/// Both thresholds are inclusive.
pub fn solvable(accuracy_rate: f64, consistency: f64, cfg: &PipelineConfig) -> bool {
    accuracy_rate >= cfg.tau_acc && consistency >= cfg.tau_cons
}

/// Decision table over the (A, V, AV) solvability pattern.
///
/// | A | V | AV | decision |
/// |---|---|----|----------|
/// | 1 | 0 | 1  | Audio |
/// | 0 | 1 | 1  | Visual |
/// | 0 | 0 | 1  | Audio-Visual |
/// | 1 | 1 | 1  | discard: trivially easy |
/// | 1 | 1 | 0  | discard: contradictory (also ambiguous) |
/// | 1 | 0 | 0  | discard: contradictory |
/// | 0 | 1 | 0  | discard: contradictory |
/// | 0 | 0 | 0  | discard: unsolvable |
pub fn decide_pem(audio: bool, video: bool, audio_visual: bool) -> Decision {
    match (audio, video, audio_visual) {
        (true, false, true) => Decision::Label(PemLabel::Audio),
        (false, true, true) => Decision::Label(PemLabel::Visual),
        (false, false, true) => Decision::Label(PemLabel::AudioVisual),
        (true, true, true) => Decision::Discard(DiscardReason::TriviallyEasy),
        (true, _, false) | (_, true, false) => Decision::Discard(DiscardReason::Contradictory),
        (false, false, false) => Decision::Discard(DiscardReason::Unsolvable),
    }
}
