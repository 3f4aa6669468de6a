use std::collections::{HashMap, HashSet};

use avr_core::jsonl::to_jsonl_string;
use avr_core::rl_core::score_output;
use avr_core::tag_grammar::{ParseDiagnostic, PemLabel, TraceRecord};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{read_records, write_file};
use crate::args::ValidateArgs;
use crate::config::AppConfig;
use crate::{CliError, Outcome};

/// Gold labels for one trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub pem: PemLabel,
    pub answer: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredTrace {
    pub id: String,
    pub valid: bool,
    pub r_mps: f64,
    pub r_acc: f64,
    pub r_stage2: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<ParseDiagnostic>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub traces: usize,
    pub valid: usize,
    pub mean_r_mps: f64,
    pub mean_r_acc: f64,
    pub mean_r_stage2: f64,
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>, file: &str) -> Result<HashSet<&'a str>, CliError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CliError::IdMismatch(format!("id {id:?} appears twice in the {file} file")));
        }
    }
    Ok(seen)
}

/// Scores every trace; the two files must cover exactly the same ids.
pub fn score(
    traces: &[TraceRecord],
    labels: &[LabelRecord],
    cfg: &AppConfig,
) -> Result<(Vec<ScoredTrace>, ScoreSummary), CliError> {
    let trace_ids = unique_ids(traces.iter().map(|t| t.id.as_str()), "traces")?;
    let label_ids = unique_ids(labels.iter().map(|l| l.id.as_str()), "labels")?;
    if let Some(id) = traces.iter().map(|t| t.id.as_str()).find(|id| !label_ids.contains(id)) {
        return Err(CliError::IdMismatch(format!("trace {id:?} has no label")));
    }
    if let Some(id) = labels.iter().map(|l| l.id.as_str()).find(|id| !trace_ids.contains(id)) {
        return Err(CliError::IdMismatch(format!("label {id:?} has no trace")));
    }
    let by_id: HashMap<&str, &LabelRecord> = labels.iter().map(|l| (l.id.as_str(), l)).collect();

    let scored: Vec<ScoredTrace> = traces
        .iter()
        .map(|t| {
            let gold = by_id[t.id.as_str()];
            let b = score_output(&t.text, gold.pem, &gold.answer, &cfg.rewards);
            ScoredTrace {
                id: t.id.clone(),
                valid: b.diagnostics.is_empty(),
                r_mps: b.r_mps,
                r_acc: b.r_acc,
                r_stage2: b.r_stage2,
                diagnostics: b.diagnostics,
            }
        })
        .collect();
    let n = scored.len().max(1) as f64;
    let mean = |f: fn(&ScoredTrace) -> f64| scored.iter().map(f).sum::<f64>() / n;
    let summary = ScoreSummary {
        traces: scored.len(),
        valid: scored.iter().filter(|s| s.valid).count(),
        mean_r_mps: mean(|s| s.r_mps),
        mean_r_acc: mean(|s| s.r_acc),
        mean_r_stage2: mean(|s| s.r_stage2),
    };
    Ok((scored, summary))
}

pub fn run(args: &ValidateArgs, cfg: &AppConfig) -> Result<Outcome, CliError> {
    let traces: Vec<TraceRecord> = read_records(&args.traces)?;
    let labels: Vec<LabelRecord> = read_records(&args.labels)?;
    let (scored, summary) = score(&traces, &labels, cfg)?;
    if let Some(out) = &args.out {
        write_file(
            out,
            to_jsonl_string(&scored).map_err(|e| CliError::Jsonl { path: out.clone(), source: e })?,
        )?;
    }

    let mut text = format!(
        "traces: {}\nvalid:  {}\nmean r_mps:    {:.6}\nmean r_acc:    {:.6}\nmean r_stage2: {:.6}\n",
        summary.traces, summary.valid, summary.mean_r_mps, summary.mean_r_acc, summary.mean_r_stage2
    );
    for s in scored.iter().filter(|s| !s.valid) {
        let first = &s.diagnostics[0];
        text.push_str(&format!(
            "  {}: {:?} at {} ({} diagnostics)\n",
            s.id,
            first.kind,
            first.offset,
            s.diagnostics.len()
        ));
    }
    Ok(Outcome { text, json: json!({ "summary": summary, "out": args.out }), success: true })
}
