use avr_core::attention_core::{
    attention_allocation, default_query_span, leakage_probe_with, AttentionWeights, WeightDump,
};
use avr_core::jsonl::to_jsonl_string;
use avr_core::mask_engine::export::{row_to_string, to_grid, to_rle};
use avr_core::mask_engine::{build_causal, build_composite, incremental_row, LayoutSpec, MaskError};
use avr_core::rl_core::{grpo_objective, grpo_objective_grad, GrpoConfig, GrpoOutput, RolloutGroup};
use serde::Serialize;
use serde_json::json;

use super::{read_records, write_file};
use crate::args::{AttnReportArgs, GrpoArgs, LeakageArgs, MaskArgs, MaskFormat};
use crate::config::AppConfig;
use crate::{CliError, Outcome};

pub fn mask(args: &MaskArgs) -> Result<Outcome, CliError> {
    let layout = LayoutSpec::load(&args.spec)?.resolve()?;
    let mask = if args.no_maam { build_causal(layout.len())? } else { build_composite(&layout) };
    if let Some(out) = &args.out {
        match args.format {
            MaskFormat::Grid => write_file(out, to_grid(&mask))?,
            MaskFormat::Rle => write_file(out, to_rle(&mask))?,
        }
    }

    let mut json = json!({
        "length": mask.len(),
        "visible": mask.visible_count(),
        "blocked": mask.len() * mask.len() - mask.visible_count(),
        "maam": !args.no_maam,
    });
    let text = match args.row {
        Some(i) => {
            let row = if args.no_maam {
                if i >= mask.len() {
                    return Err(MaskError::RowOutOfRange { row: i, length: mask.len() }.into());
                }
                mask.row(i)[..=i].to_vec()
            } else {
                incremental_row(&layout, i)?
            };
            let s = row_to_string(&row);
            json["row"] = json!(s);
            format!("{s}\n")
        }
        None if args.out.is_none() => to_grid(&mask),
        None => format!(
            "length {}: {} visible, {} blocked cells\n",
            mask.len(),
            mask.visible_count(),
            mask.len() * mask.len() - mask.visible_count()
        ),
    };
    Ok(Outcome { text, json, success: true })
}

#[derive(Serialize)]
struct GroupResult<'a> {
    group_id: &'a str,
    #[serde(flatten)]
    output: GrpoOutput,
    gradient: Vec<f64>,
}

pub fn grpo_step(args: &GrpoArgs, cfg: &AppConfig) -> Result<Outcome, CliError> {
    let grpo = GrpoConfig {
        clip_alpha: args.alpha.unwrap_or(cfg.grpo.clip_alpha),
        kl_beta: args.beta.unwrap_or(cfg.grpo.kl_beta),
        eps_stab: args.eps.unwrap_or(cfg.grpo.eps_stab),
        kl_estimator: args.kl.map_or(cfg.grpo.kl_estimator, Into::into),
    };
    grpo.validate()?;
    let groups: Vec<RolloutGroup> = read_records(&args.rollouts)?;
    if groups.is_empty() {
        return Err(CliError::Usage(format!("{} holds no rollout groups", args.rollouts.display())));
    }
    let results = groups
        .iter()
        .map(|g| {
            Ok(GroupResult {
                group_id: &g.group_id,
                output: grpo_objective(g, &grpo)?,
                gradient: grpo_objective_grad(g, &grpo)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if let Some(out) = &args.out {
        write_file(
            out,
            to_jsonl_string(&results).map_err(|e| CliError::Jsonl { path: out.clone(), source: e })?,
        )?;
    }

    let mean = results.iter().map(|r| r.output.objective).sum::<f64>() / results.len() as f64;
    let mut text = format!(
        "alpha {} beta {} eps {} kl {:?}\n",
        grpo.clip_alpha, grpo.kl_beta, grpo.eps_stab, grpo.kl_estimator
    );
    for r in &results {
        text.push_str(&format!(
            "{}: objective {} unclipped {} kl {}\n",
            r.group_id, r.output.objective, r.output.unclipped_objective, r.output.kl
        ));
    }
    text.push_str(&format!("mean objective {mean}\n"));
    Ok(Outcome {
        text,
        json: json!({ "config": grpo, "groups": results, "mean_objective": mean }),
        success: true,
    })
}

/// Parses `3,5,8-10` into positions.
pub fn parse_positions(list: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("cannot read query positions {list:?}"));
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) =
                    (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if b < a {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

pub fn attn_report(args: &AttnReportArgs, cfg: &AppConfig) -> Result<Outcome, CliError> {
    let layout = LayoutSpec::load(&args.spec)?.resolve()?;
    let mut dumps: Vec<WeightDump> = read_records(&args.weights)?;
    if dumps.iter().all(|d| d.layer.is_some()) {
        dumps.sort_by_key(|d| d.layer);
    }
    let weights = dumps.iter().map(WeightDump::to_weights).collect::<Result<Vec<AttentionWeights>, _>>()?;
    if let Some(w) = weights.iter().find(|w| w.len() != layout.len()) {
        return Err(CliError::Usage(format!(
            "weights are {0}x{0} but the layout has length {1}",
            w.len(),
            layout.len()
        )));
    }
    let query = match &args.query {
        Some(list) => parse_positions(list)?,
        None => default_query_span(&layout),
    };
    let last_k = args.last_k.unwrap_or(cfg.attention.last_k);
    let report = attention_allocation(&weights, &layout, &query, last_k)?;

    let mut text =
        format!("last {} of {} layers, {} query rows\n", report.last_k, weights.len(), query.len());
    for l in &report.layers {
        let frac = l.audio_fraction.map_or("n/a".to_string(), |a| format!("{a:.4}"));
        text.push_str(&format!("layer {:>3}: audio {frac}\n", l.layer));
    }
    text.push_str(&format!(
        "aggregate: audio {:.6} visual {:.6}\n",
        report.audio_fraction, report.visual_fraction
    ));
    Ok(Outcome { text, json: json!(report), success: true })
}

pub fn leakage(args: &LeakageArgs, cfg: &AppConfig) -> Result<Outcome, CliError> {
    let seed = args.seed.unwrap_or(cfg.seed);
    let report = leakage_probe_with(seed, &cfg.leakage, !args.no_maam)?;
    let text = format!(
        "seed {} maam {}\ndirect_leakage {}\nblocked_pair_mass {}\nblocked pairs {} over {} queries, {} layers\n",
        report.seed,
        report.use_maam,
        report.direct_leakage,
        report.blocked_pair_mass,
        report.blocked_pairs,
        report.affected_queries,
        report.layers
    );
    Ok(Outcome { text, json: json!(report), success: true })
}
