//! Independent reference implementations used as test oracles.
//!
//! Everything here is written from the definitions directly, with no shared
//! code paths: set membership by linear scan, softmax by the textbook
//! formula, GRPO terms one by one.

#![allow(dead_code, clippy::needless_range_loop)]

use avr_core::attention_core::{AttentionInputs, Matrix};
use avr_core::mask_engine::{build_composite, LayoutRoles, TokenLayout};
use avr_core::rl_core::RolloutGroup;
use rand::Rng;

/// Visibility of `(i, j)` under causal ∧ modality rules, by brute force.
pub fn oracle_visible(roles: &LayoutRoles, i: usize, j: usize) -> bool {
    if j > i {
        return false;
    }
    let q_v = roles.visual_reasoning.contains(&i);
    let q_a = roles.audio_reasoning.contains(&i);
    let k_video = roles.video_input.contains(&j);
    let k_audio = roles.audio_input.contains(&j);
    let k_vspan = roles.visual_span.contains(&j);
    !((q_v && k_audio) || (q_a && k_video) || (q_a && k_vspan))
}

pub fn oracle_mask(roles: &LayoutRoles, len: usize) -> Vec<Vec<bool>> {
    (0..len).map(|i| (0..len).map(|j| oracle_visible(roles, i, j)).collect()).collect()
}

/// A random layout satisfying every layout invariant: a prompt region of
/// inputs and question tokens, then a reasoning region where each position
/// is independently assigned to one segment. Segments need not be
/// contiguous, which exercises the set semantics harder than real traces.
pub fn random_roles(rng: &mut impl Rng, max_len: usize) -> (usize, LayoutRoles) {
    let len = rng.random_range(1..=max_len);
    let prompt = rng.random_range(0..=len);
    let mut roles = LayoutRoles::default();
    for i in 0..prompt {
        match rng.random_range(0..3) {
            0 => roles.video_input.push(i),
            1 => roles.audio_input.push(i),
            _ => {}
        }
    }
    for i in prompt..len {
        match rng.random_range(0..6) {
            0 => {
                roles.visual_span.push(i);
                roles.visual_reasoning.push(i);
            }
            1 => roles.visual_span.push(i),
            2 => {
                roles.audio_span.push(i);
                roles.audio_reasoning.push(i);
            }
            3 => roles.audio_span.push(i),
            4 => roles.summary.push(i),
            _ => {}
        }
    }
    (len, roles)
}

pub fn random_layout(rng: &mut impl Rng, max_len: usize) -> TokenLayout {
    let (len, roles) = random_roles(rng, max_len);
    TokenLayout::new(len, roles).expect("generator produces valid layouts")
}

/// Row-wise softmax over visible logits, written out longhand.
pub fn oracle_weights(inputs: &AttentionInputs) -> Vec<Vec<f64>> {
    let l = inputs.len();
    let d = inputs.queries.cols();
    let mut out = vec![vec![0.0; l]; l];
    for i in 0..l {
        let mut logits = vec![None; l];
        for j in 0..l {
            if inputs.mask.is_visible(i, j) {
                let mut s = 0.0;
                for c in 0..d {
                    s += inputs.queries[(i, c)] * inputs.keys[(j, c)];
                }
                logits[j] = Some(s * inputs.scale);
            }
        }
        let max = logits.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().flatten().map(|x| (x - max).exp()).sum();
        for j in 0..l {
            if let Some(x) = logits[j] {
                out[i][j] = (x - max).exp() / total;
            }
        }
    }
    out
}

/// Random single-head attention instance over a random composite mask.
pub fn random_attention(rng: &mut impl Rng, max_len: usize) -> AttentionInputs {
    let layout = random_layout(rng, max_len);
    let l = layout.len();
    let d = rng.random_range(2..=6);
    let dv = rng.random_range(1..=4);
    AttentionInputs::new(
        Matrix::random(l, d, rng),
        Matrix::random(l, d, rng),
        Matrix::random(l, dv, rng),
        build_composite(&layout),
    )
    .expect("valid attention inputs")
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Clipped GRPO objective computed term by term.
pub fn oracle_grpo(group: &RolloutGroup, alpha: f64, beta: f64, eps: f64) -> f64 {
    let g = group.rewards.len() as f64;
    let m = mean(&group.rewards);
    let var = group.rewards.iter().map(|r| (r - m).powi(2)).sum::<f64>() / g;
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    for k in 0..group.rewards.len() {
        let adv = if var + eps == 0.0 { 0.0 } else { (group.rewards[k] - m) / (var + eps).sqrt() };
        let rho = (group.logp_new[k] - group.logp_old[k]).exp();
        let clipped = rho.max(1.0 - alpha).min(1.0 + alpha);
        surrogate += (rho * adv).min(clipped * adv);
        let log_ratio = group.logp_ref[k] - group.logp_new[k];
        kl += log_ratio.exp() - log_ratio - 1.0;
    }
    surrogate / g - beta * kl.max(0.0) / g
}

pub fn random_group(rng: &mut impl Rng, size: usize) -> RolloutGroup {
    let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..size).map(|_| rng.random_range(lo..hi)).collect() };
    let rewards = draw(0.0, 1.2);
    let logp_old = draw(-20.0, -1.0);
    // the reference policy stays within a nat of the sampling policy
    let logp_ref = logp_old.iter().map(|o| o + rng.random_range(-1.0..1.0)).collect();
    let logp_new = logp_old.iter().map(|o| o + rng.random_range(-0.4..0.4)).collect();
    RolloutGroup { group_id: "g".into(), rewards, logp_new, logp_old, logp_ref }
}
