use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::tag_grammar::PemLabel;

use super::embedder::TextEmbedder;
use super::sampler::{CotSampler, SamplingError};
use super::solvability::{accuracy_rate, consistency, decide_pem, solvable};
use super::types::{
    Decision, DiscardReason, Instance, PemRecord, PipelineConfig, ProbeSetting, SettingRecords,
    SolvabilityRecord,
};
use super::PipelineError;

/// An instance that could not be decided.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFailure {
    pub id: String,
    pub setting: ProbeSetting,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub instances: usize,
    pub decided: usize,
    pub labeled: usize,
    pub label_counts: BTreeMap<String, usize>,
    pub discard_counts: BTreeMap<String, usize>,
    pub failures: Vec<InstanceFailure>,
}

impl StatsReport {
    fn from_outcome(instances: usize, records: &[PemRecord], failures: Vec<InstanceFailure>) -> Self {
        let mut label_counts: BTreeMap<String, usize> =
            PemLabel::ALL.iter().map(|l| (l.as_str().to_string(), 0)).collect();
        let mut discard_counts: BTreeMap<String, usize> =
            DiscardReason::ALL.iter().map(|d| (d.to_string(), 0)).collect();
        for r in records {
            match r.decision {
                Decision::Label(l) => *label_counts.entry(l.as_str().to_string()).or_default() += 1,
                Decision::Discard(d) => *discard_counts.entry(d.to_string()).or_default() += 1,
            }
        }
        StatsReport {
            instances,
            decided: records.len(),
            labeled: label_counts.values().sum(),
            label_counts,
            discard_counts,
            failures,
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let pct = |k: usize| {
            if self.decided == 0 {
                0.0
            } else {
                100.0 * k as f64 / self.decided as f64
            }
        };
        let _ = writeln!(out, "instances: {}", self.instances);
        let _ = writeln!(out, "decided:   {}", self.decided);
        let _ = writeln!(out, "labeled:   {}", self.labeled);
        let _ = writeln!(out, "\nlabels");
        for (k, v) in &self.label_counts {
            let _ = writeln!(out, "  {k:<16} {v:>6}  {:5.1}%", pct(*v));
        }
        let _ = writeln!(out, "\ndiscards");
        for (k, v) in &self.discard_counts {
            let _ = writeln!(out, "  {k:<16} {v:>6}  {:5.1}%", pct(*v));
        }
        let _ = writeln!(out, "\nfailures: {}", self.failures.len());
        for f in &self.failures {
            let _ = writeln!(out, "  {} [{}]: {}", f.id, f.setting, f.error);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationOutcome {
    /// One record per successfully probed instance, ordered by id.
    pub records: Vec<PemRecord>,
    pub report: StatsReport,
}

impl AnnotationOutcome {
    pub fn labeled(&self) -> impl Iterator<Item = &PemRecord> {
        self.records.iter().filter(|r| r.decision.label().is_some())
    }
}

fn probe_one(
    instance: &Instance,
    sampler: &dyn CotSampler,
    embedder: &dyn TextEmbedder,
    cfg: &PipelineConfig,
) -> Result<PemRecord, InstanceFailure> {
    let fail =
        |setting: ProbeSetting, error: String| InstanceFailure { id: instance.id.clone(), setting, error };
    let mut records = Vec::with_capacity(3);
    let mut rationale = None;
    for setting in ProbeSetting::ALL {
        let set = sampler.sample(instance, setting, cfg.n).map_err(|e| fail(setting, e.to_string()))?;
        if set.samples.len() != cfg.n {
            let e = SamplingError::WrongCount { expected: cfg.n, found: set.samples.len() };
            return Err(fail(setting, e.to_string()));
        }
        let acc = accuracy_rate(&set, &instance.gold_answer, &cfg.normalizer)
            .map_err(|e| fail(setting, e.to_string()))?;
        let cons = consistency(&set.cots(), embedder).map_err(|e| fail(setting, e.to_string()))?;
        if setting == ProbeSetting::AV {
            rationale = set.samples.first().map(|s| s.cot.clone());
        }
        records.push(SolvabilityRecord {
            accuracy_rate: acc,
            consistency: cons,
            solvable: solvable(acc, cons, cfg),
        });
    }
    let settings = SettingRecords { audio: records[0], video: records[1], audio_visual: records[2] };
    let decision =
        decide_pem(settings.audio.solvable, settings.video.solvable, settings.audio_visual.solvable);
    Ok(PemRecord { id: instance.id.clone(), settings, decision, rationale: decision.label().and(rationale) })
}

/// Probes every instance under A, V and AV and assigns a preferred evidence
/// modality or a discard reason.
///
/// Instances run concurrently on `cfg.parallelism` threads. Failures are
/// collected in the report and do not stop the batch. Output is ordered by
/// instance id, so it does not depend on scheduling.
pub fn annotate(
    dataset: &[Instance],
    sampler: &dyn CotSampler,
    embedder: &dyn TextEmbedder,
    cfg: &PipelineConfig,
) -> Result<AnnotationOutcome, PipelineError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let mut seen = HashSet::new();
    for inst in dataset {
        if !seen.insert(inst.id.as_str()) {
            return Err(PipelineError::DuplicateId(inst.id.clone()));
        }
        if inst.gold_answer.trim().is_empty() {
            return Err(PipelineError::EmptyGold(inst.id.clone()));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| PipelineError::InvalidConfig(format!("thread pool: {e}")))?;
    let results: Vec<Result<PemRecord, InstanceFailure>> =
        pool.install(|| dataset.par_iter().map(|inst| probe_one(inst, sampler, embedder, cfg)).collect());

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(f) => failures.push(f),
        }
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    failures.sort_by(|a, b| a.id.cmp(&b.id));
    let report = StatsReport::from_outcome(dataset.len(), &records, failures);
    Ok(AnnotationOutcome { records, report })
}

#[cfg(test)]
mod tests {
    use super::super::embedder::HashingEmbedder;
    use super::super::sampler::{GoldEchoSampler, ScriptEntry, ScriptedSampler};
    use super::super::types::{Media, Sample};
    use super::*;

    fn inst(id: &str) -> Instance {
        Instance {
            id: id.into(),
            question: "What is heard?".into(),
            media: Media { audio_ref: format!("{id}.wav"), video_ref: format!("{id}.mp4") },
            gold_answer: "dog".into(),
            choices: None,
        }
    }

    #[test]
    fn empty_dataset() {
        let s = GoldEchoSampler { cot: "x".into() };
        let r = annotate(&[], &s, &HashingEmbedder::default(), &PipelineConfig::default());
        assert!(matches!(r, Err(PipelineError::EmptyDataset)));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let s = GoldEchoSampler { cot: "x".into() };
        let r =
            annotate(&[inst("a"), inst("a")], &s, &HashingEmbedder::default(), &PipelineConfig::default());
        assert!(matches!(r, Err(PipelineError::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn unanimous_sampler_discards_everything_as_easy() {
        let s = GoldEchoSampler { cot: "the barking is clear".into() };
        let data: Vec<Instance> = ["c", "a", "b"].iter().map(|i| inst(i)).collect();
        let out = annotate(&data, &s, &HashingEmbedder::default(), &PipelineConfig::default()).unwrap();
        assert_eq!(out.records.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
        assert!(out
            .records
            .iter()
            .all(|r| r.decision == Decision::Discard(DiscardReason::TriviallyEasy) && r.rationale.is_none()));
        assert_eq!(out.report.discard_counts["TriviallyEasy"], 3);
        assert_eq!(out.report.label_counts["Audio"], 0);
        assert_eq!(out.report.labeled, 0);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let good = |id: &str, setting, answer: &str| ScriptEntry {
            id: id.into(),
            setting,
            samples: vec![Sample::new(answer, "it barks loudly"); 8],
        };
        let s = ScriptedSampler::new([
            good("ok", ProbeSetting::A, "dog"),
            good("ok", ProbeSetting::V, "cat"),
            good("ok", ProbeSetting::AV, "dog"),
            good("broken", ProbeSetting::A, "dog"),
        ]);
        let out = annotate(
            &[inst("ok"), inst("broken")],
            &s,
            &HashingEmbedder::default(),
            &PipelineConfig::default(),
        )
        .unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].decision, Decision::Label(PemLabel::Audio));
        assert_eq!(out.records[0].rationale.as_deref(), Some("it barks loudly"));
        assert_eq!(out.report.failures.len(), 1);
        assert_eq!(out.report.failures[0].id, "broken");
        assert_eq!(out.report.failures[0].setting, ProbeSetting::V);
        assert!(out.report.render_text().contains("broken [V]"));
    }
}
