use std::path::{Path, PathBuf};

use avr_core::jsonl::to_jsonl_string;
use avr_core::pem_pipeline::http::UreqTransport;
use avr_core::pem_pipeline::{
    annotate, ChatSampler, CotSampler, EmbedderKind, HashingEmbedder, HttpEmbedder, Instance, PemRecord,
    PromptTemplate, ScriptedSampler, TextEmbedder,
};
use serde_json::json;

use super::{open, read_records, write_file};
use crate::args::AnnotateArgs;
use crate::config::AppConfig;
use crate::{CliError, Outcome};

fn pick(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    flag.clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| CliError::Usage(format!("no {what} given (flag or config paths)")))
}

fn default_report_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".report.txt");
    out.with_file_name(name)
}

pub fn run(args: &AnnotateArgs, cfg: &AppConfig) -> Result<Outcome, CliError> {
    let input = pick(&args.input, &cfg.paths.input, "input dataset (--in)")?;
    let out = pick(&args.out, &cfg.paths.output, "output file (--out)")?;
    let labeled = args.labeled.clone().or_else(|| cfg.paths.labeled.clone());
    let report_path =
        args.report.clone().or_else(|| cfg.paths.report.clone()).unwrap_or_else(|| default_report_path(&out));

    let mut pipeline = cfg.pipeline;
    if let Some(p) = args.parallelism {
        pipeline.parallelism = p;
    }
    pipeline.validate()?;

    let dataset: Vec<Instance> = read_records(&input)?;

    let (sampler, embedder): (Box<dyn CotSampler>, Box<dyn TextEmbedder>) = if args.mock {
        let script = cfg
            .paths
            .mock_script
            .as_ref()
            .ok_or_else(|| CliError::Usage("--mock needs paths.mock_script in the config".into()))?;
        let sampler = ScriptedSampler::from_jsonl(open(script)?)
            .map_err(|e| CliError::Config { path: script.clone(), message: e.to_string() })?;
        (Box::new(sampler), Box::new(HashingEmbedder::default()))
    } else {
        let template = match &cfg.endpoint.prompt_template {
            Some(p) => PromptTemplate::load(p).map_err(|source| CliError::Io { path: p.clone(), source })?,
            None => PromptTemplate::default(),
        };
        let sampler = ChatSampler::new(cfg.endpoint.clone(), template, Box::new(UreqTransport));
        let embedder: Box<dyn TextEmbedder> = match cfg.endpoint.embedder {
            EmbedderKind::Hashing => Box::new(HashingEmbedder::default()),
            EmbedderKind::Http => Box::new(HttpEmbedder::new(cfg.endpoint.clone(), Box::new(UreqTransport))),
        };
        (Box::new(sampler), embedder)
    };

    let outcome = annotate(&dataset, sampler.as_ref(), embedder.as_ref(), &pipeline)?;
    let report = &outcome.report;

    write_file(
        &out,
        to_jsonl_string(&outcome.records).map_err(|e| CliError::Jsonl { path: out.clone(), source: e })?,
    )?;
    if let Some(path) = &labeled {
        let subset: Vec<&PemRecord> = outcome.labeled().collect();
        write_file(
            path,
            to_jsonl_string(&subset).map_err(|e| CliError::Jsonl { path: path.clone(), source: e })?,
        )?;
    }
    write_file(&report_path, report.render_text())?;

    let success = report.failures.is_empty() && report.labeled > 0;
    let mut text = report.render_text();
    text.push_str(&format!("\nrecords: {}\nreport:  {}\n", out.display(), report_path.display()));
    if let Some(path) = &labeled {
        text.push_str(&format!("labeled: {}\n", path.display()));
    }
    if report.labeled == 0 {
        text.push_str("no instance received a label\n");
    }
    Ok(Outcome {
        text,
        json: json!({
            "records": out,
            "labeled_path": labeled,
            "report_path": report_path,
            "stats": report,
        }),
        success,
    })
}
