use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::http::TransportError;
use super::types::{Instance, ProbeSetting, Sample, SampleSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("sample count must be at least 1")]
    InvalidCount,
    #[error("no scripted samples for {id} / {setting}")]
    NotScripted { id: String, setting: ProbeSetting },
    #[error("{id} / {setting}: requested {requested} samples, only {available} available")]
    Exhausted { id: String, setting: ProbeSetting, requested: usize, available: usize },
    #[error("sampler returned {found} samples, expected {expected}")]
    WrongCount { expected: usize, found: usize },
    #[error("endpoint: {0}")]
    Transport(#[from] TransportError),
    #[error("malformed completion: {0}")]
    MalformedCompletion(String),
    #[error("sampler script: {0}")]
    Script(String),
}

/// Draws `n` chain-of-thought answers for an instance under one probe setting.
///
/// Calls for one (instance, setting) are made sequentially; calls for
/// different instances may overlap.
pub trait CotSampler: Send + Sync {
    fn sample(
        &self,
        instance: &Instance,
        setting: ProbeSetting,
        n: usize,
    ) -> Result<SampleSet, SamplingError>;
}

/// One line of a sampler script.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub id: String,
    pub setting: ProbeSetting,
    pub samples: Vec<Sample>,
}

/// Replays predetermined samples keyed by (instance id, setting).
#[derive(Clone, Debug, Default)]
pub struct ScriptedSampler {
    script: HashMap<(String, ProbeSetting), Vec<Sample>>,
}

impl ScriptedSampler {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        ScriptedSampler { script: entries.into_iter().map(|e| ((e.id, e.setting), e.samples)).collect() }
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, SamplingError> {
        let entries: Vec<ScriptEntry> =
            crate::jsonl::read_jsonl(reader).map_err(|e| SamplingError::Script(e.to_string()))?;
        Ok(Self::new(entries))
    }
}

impl CotSampler for ScriptedSampler {
    fn sample(
        &self,
        instance: &Instance,
        setting: ProbeSetting,
        n: usize,
    ) -> Result<SampleSet, SamplingError> {
        if n == 0 {
            return Err(SamplingError::InvalidCount);
        }
        let samples = self
            .script
            .get(&(instance.id.clone(), setting))
            .ok_or_else(|| SamplingError::NotScripted { id: instance.id.clone(), setting })?;
        if samples.len() < n {
            return Err(SamplingError::Exhausted {
                id: instance.id.clone(),
                setting,
                requested: n,
                available: samples.len(),
            });
        }
        Ok(SampleSet { setting, samples: samples[..n].to_vec() })
    }
}

/// Always answers with the gold answer and the same chain of thought.
#[derive(Clone, Debug)]
pub struct GoldEchoSampler {
    pub cot: String,
}

impl CotSampler for GoldEchoSampler {
    fn sample(
        &self,
        instance: &Instance,
        setting: ProbeSetting,
        n: usize,
    ) -> Result<SampleSet, SamplingError> {
        if n == 0 {
            return Err(SamplingError::InvalidCount);
        }
        Ok(SampleSet {
            setting,
            samples: vec![Sample::new(instance.gold_answer.clone(), self.cot.clone()); n],
        })
    }
}
