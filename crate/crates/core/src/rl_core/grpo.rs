//! Group-relative advantages and the clipped GRPO objective.
//!
//! For a group of `G` responses with rewards `r_i`:
//!
//! ```text
//! A_i = (r_i - mean(r)) / sqrt(var(r) + eps_stab)          (population variance)
//! rho_i = exp(logp_new_i - logp_old_i)
//! J = mean_i min(rho_i A_i, clip(rho_i, 1 - alpha, 1 + alpha) A_i) - beta * KL(new || ref)
//! ```
//!
//! Log-probabilities are sequence level (summed over response tokens).

use serde::{Deserialize, Serialize};

use super::RlError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KlEstimator {
    /// `exp(ref - new) - (ref - new) - 1`
    #[default]
    K3,
    /// `(new - ref)^2 / 2`
    K2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    pub clip_alpha: f64,
    pub kl_beta: f64,
    pub eps_stab: f64,
    pub kl_estimator: KlEstimator,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig { clip_alpha: 0.2, kl_beta: 0.04, eps_stab: 1e-8, kl_estimator: KlEstimator::K3 }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        if !(self.clip_alpha > 0.0 && self.clip_alpha < 1.0) {
            return Err(RlError::InvalidConfig(format!(
                "clip_alpha must lie in (0, 1), got {}",
                self.clip_alpha
            )));
        }
        if !(self.kl_beta.is_finite() && self.kl_beta >= 0.0) {
            return Err(RlError::InvalidConfig(format!("kl_beta must be nonnegative, got {}", self.kl_beta)));
        }
        if !(self.eps_stab.is_finite() && self.eps_stab > 0.0) {
            return Err(RlError::InvalidConfig(format!("eps_stab must be positive, got {}", self.eps_stab)));
        }
        Ok(())
    }
}

/// One rollout group, as stored in rollout JSONL files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub group_id: String,
    pub rewards: Vec<f64>,
    pub logp_new: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub logp_ref: Vec<f64>,
}

impl RolloutGroup {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<(), RlError> {
        let g = self.rewards.len();
        if g < 2 {
            return Err(RlError::GroupTooSmall(g));
        }
        for (name, v) in
            [("logp_new", &self.logp_new), ("logp_old", &self.logp_old), ("logp_ref", &self.logp_ref)]
        {
            if v.len() != g {
                return Err(RlError::LengthMismatch { what: name, expected: g, found: v.len() });
            }
        }
        let all = [&self.rewards, &self.logp_new, &self.logp_old, &self.logp_ref];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(RlError::NonFinite("rollout group values"));
        }
        Ok(())
    }
}

/// Standardized rewards using the population variance. `eps_stab` may be 0;
/// a zero-variance group then yields all-zero advantages.
pub fn group_advantages(rewards: &[f64], eps_stab: f64) -> Result<Vec<f64>, RlError> {
    let g = rewards.len();
    if g < 2 {
        return Err(RlError::GroupTooSmall(g));
    }
    if !(eps_stab.is_finite() && eps_stab >= 0.0) {
        return Err(RlError::InvalidConfig(format!("eps_stab must be nonnegative, got {eps_stab}")));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(RlError::NonFinite("rewards"));
    }
    let n = g as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let denom = (var + eps_stab).sqrt();
    if denom == 0.0 {
        return Ok(vec![0.0; g]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<(), RlError> {
    if a.len() != b.len() {
        return Err(RlError::LengthMismatch { what: "logp_ref", expected: a.len(), found: b.len() });
    }
    if a.is_empty() {
        return Err(RlError::GroupTooSmall(0));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(RlError::NonFinite("log-probabilities"));
    }
    Ok(())
}

/// Mean of the k3 estimator `exp(ref - new) - (ref - new) - 1`; never negative.
pub fn kl_estimate(logp_new: &[f64], logp_ref: &[f64]) -> Result<f64, RlError> {
    kl_estimate_with(KlEstimator::K3, logp_new, logp_ref)
}

pub fn kl_estimate_with(est: KlEstimator, logp_new: &[f64], logp_ref: &[f64]) -> Result<f64, RlError> {
    check_pair(logp_new, logp_ref)?;
    let terms = logp_new.iter().zip(logp_ref).map(|(&new, &r)| {
        let d = r - new;
        match est {
            // exp_m1 keeps the near-zero case from cancelling to a negative value
            KlEstimator::K3 => (d.exp_m1() - d).max(0.0),
            KlEstimator::K2 => 0.5 * d * d,
        }
    });
    let kl = terms.sum::<f64>() / logp_new.len() as f64;
    if !kl.is_finite() {
        return Err(RlError::NonFinite("KL estimate"));
    }
    Ok(kl)
}

fn kl_term_grad(est: KlEstimator, new: f64, r: f64) -> f64 {
    let d = r - new;
    match est {
        KlEstimator::K3 => 1.0 - d.exp(),
        KlEstimator::K2 => -d,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrpoOutput {
    pub advantages: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `min(rho A, clip(rho) A)` per sample.
    pub surrogate_terms: Vec<f64>,
    /// `rho A` per sample.
    pub unclipped_terms: Vec<f64>,
    pub kl: f64,
    pub objective: f64,
    /// `mean(rho A) - beta * KL`
    pub unclipped_objective: f64,
}

fn ratios(group: &RolloutGroup) -> Result<Vec<f64>, RlError> {
    let r: Vec<f64> = group.logp_new.iter().zip(&group.logp_old).map(|(n, o)| (n - o).exp()).collect();
    if r.iter().any(|x| !x.is_finite()) {
        return Err(RlError::NonFinite("importance ratios"));
    }
    Ok(r)
}

pub fn grpo_objective(group: &RolloutGroup, cfg: &GrpoConfig) -> Result<GrpoOutput, RlError> {
    cfg.validate()?;
    group.validate()?;
    let advantages = group_advantages(&group.rewards, cfg.eps_stab)?;
    let ratios = ratios(group)?;
    let (lo, hi) = (1.0 - cfg.clip_alpha, 1.0 + cfg.clip_alpha);
    let unclipped_terms: Vec<f64> = ratios.iter().zip(&advantages).map(|(r, a)| r * a).collect();
    let surrogate_terms: Vec<f64> = ratios
        .iter()
        .zip(&advantages)
        .zip(&unclipped_terms)
        .map(|((r, a), &u)| u.min(r.clamp(lo, hi) * a))
        .collect();
    let kl = kl_estimate_with(cfg.kl_estimator, &group.logp_new, &group.logp_ref)?;
    let n = group.len() as f64;
    let objective = surrogate_terms.iter().sum::<f64>() / n - cfg.kl_beta * kl;
    let unclipped_objective = unclipped_terms.iter().sum::<f64>() / n - cfg.kl_beta * kl;
    if !(objective.is_finite() && unclipped_objective.is_finite()) {
        return Err(RlError::NonFinite("objective"));
    }
    Ok(GrpoOutput {
        advantages,
        ratios,
        surrogate_terms,
        unclipped_terms,
        kl,
        objective,
        unclipped_objective,
    })
}

/// Gradient of the objective w.r.t. each `logp_new_i`.
///
/// A clipped term (ratio outside the clip range and the clipped branch
/// selected by the min) has zero gradient; at the exact clip boundary the
/// unclipped branch is used.
pub fn grpo_objective_grad(group: &RolloutGroup, cfg: &GrpoConfig) -> Result<Vec<f64>, RlError> {
    let out = grpo_objective(group, cfg)?;
    let n = group.len() as f64;
    let (lo, hi) = (1.0 - cfg.clip_alpha, 1.0 + cfg.clip_alpha);
    Ok((0..group.len())
        .map(|i| {
            let (r, a) = (out.ratios[i], out.advantages[i]);
            let unclipped_active = r * a <= r.clamp(lo, hi) * a;
            let surrogate = if unclipped_active { a * r } else { 0.0 };
            let kl = kl_term_grad(cfg.kl_estimator, group.logp_new[i], group.logp_ref[i]);
            (surrogate - cfg.kl_beta * kl) / n
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(rewards: &[f64], logp_new: &[f64], logp_old: &[f64], logp_ref: &[f64]) -> RolloutGroup {
        RolloutGroup {
            group_id: "g".into(),
            rewards: rewards.to_vec(),
            logp_new: logp_new.to_vec(),
            logp_old: logp_old.to_vec(),
            logp_ref: logp_ref.to_vec(),
        }
    }

    #[test]
    fn equal_rewards_zero_advantage() {
        assert_eq!(group_advantages(&[0.7; 4], 1e-8).unwrap(), vec![0.0; 4]);
        assert_eq!(group_advantages(&[0.7; 4], 0.0).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn binary_group_advantages() {
        // mean 0.5, population std 0.5
        let a = group_advantages(&[1.0, 0.0, 0.0, 1.0], 0.0).unwrap();
        assert_eq!(a, vec![1.0, -1.0, -1.0, 1.0]);
        let a = group_advantages(&[1.0, 0.0, 0.0, 1.0], 1e-8).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn stage2_pair_is_antisymmetric() {
        let a = group_advantages(&[1.2, 0.2], 1e-8).unwrap();
        assert!((a[0] + a[1]).abs() < 1e-15);
        assert!((a[0] - 0.5 / (0.25f64 + 1e-8).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn group_too_small() {
        assert_eq!(group_advantages(&[1.0], 1e-8), Err(RlError::GroupTooSmall(1)));
    }

    #[test]
    fn objective_zero_for_equal_rewards() {
        let cfg = GrpoConfig { kl_beta: 0.0, ..GrpoConfig::default() };
        let g = group(&[1.0, 1.0, 1.0], &[-1.0, -2.0, -3.0], &[-1.1, -2.0, -2.5], &[-1.0; 3]);
        assert_eq!(grpo_objective(&g, &cfg).unwrap().objective, 0.0);
    }

    #[test]
    fn unit_ratio_pair_objective_zero() {
        let cfg = GrpoConfig { clip_alpha: 0.2, kl_beta: 0.0, eps_stab: 1e-8, ..Default::default() };
        let g = group(&[1.0, 0.0], &[-3.0, -4.0], &[-3.0, -4.0], &[-3.0, -4.0]);
        let out = grpo_objective(&g, &cfg).unwrap();
        assert_eq!(out.ratios, vec![1.0, 1.0]);
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn clip_arithmetic() {
        // advantages +-1 (eps 0 not allowed in config, so use a large group spread instead)
        let cfg = GrpoConfig { clip_alpha: 0.2, kl_beta: 0.0, eps_stab: 1e-300, ..Default::default() };
        let ln15 = 1.5f64.ln();
        let g = group(&[1.0, 0.0], &[ln15, 0.0], &[0.0, 0.0], &[0.0, 0.0]);
        let out = grpo_objective(&g, &cfg).unwrap();
        assert!((out.advantages[0] - 1.0).abs() < 1e-12);
        assert!((out.surrogate_terms[0] - 1.2).abs() < 1e-12);
        assert!((out.unclipped_terms[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn kl_values() {
        assert_eq!(kl_estimate(&[-1.0, -2.0], &[-1.0, -2.0]).unwrap(), 0.0);
        let ln2 = 2f64.ln();
        let kl = kl_estimate(&[0.0, -1.0], &[ln2, ln2 - 1.0]).unwrap();
        assert!((kl - (2.0 - ln2 - 1.0)).abs() < 1e-12);
        assert!((kl - 0.306_852_819_440_054_7).abs() < 1e-12);
        let ab = kl_estimate(&[0.0], &[1.0]).unwrap();
        let ba = kl_estimate(&[1.0], &[0.0]).unwrap();
        assert_ne!(ab, ba);
        assert!(kl_estimate(&[0.0], &[0.0, 1.0]).is_err());
        assert!(kl_estimate(&[f64::NAN], &[0.0]).is_err());
    }

    #[test]
    fn k2_estimator() {
        let kl = kl_estimate_with(KlEstimator::K2, &[0.0, 0.0], &[1.0, -1.0]).unwrap();
        assert_eq!(kl, 0.5);
    }

    #[test]
    fn non_finite_ratio_rejected() {
        let g = group(&[1.0, 0.0], &[800.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]);
        assert!(matches!(grpo_objective(&g, &GrpoConfig::default()), Err(RlError::NonFinite(_))));
    }

    #[test]
    fn config_validation() {
        assert!(GrpoConfig::default().validate().is_ok());
        assert!(GrpoConfig { clip_alpha: 1.0, ..Default::default() }.validate().is_err());
        assert!(GrpoConfig { eps_stab: 0.0, ..Default::default() }.validate().is_err());
        assert!(GrpoConfig { kl_beta: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = GrpoConfig { kl_beta: 0.1, ..GrpoConfig::default() };
        let g = group(
            &[1.0, 0.2, 0.0, 1.2],
            &[-1.0, -2.1, -0.4, -3.0],
            &[-1.05, -2.0, -0.5, -2.9],
            &[-1.2, -2.0, -0.3, -3.3],
        );
        let grad = grpo_objective_grad(&g, &cfg).unwrap();
        let h = 1e-6;
        for (i, &analytic) in grad.iter().enumerate() {
            let mut p = g.clone();
            let mut m = g.clone();
            p.logp_new[i] += h;
            m.logp_new[i] -= h;
            let fd = (grpo_objective(&p, &cfg).unwrap().objective
                - grpo_objective(&m, &cfg).unwrap().objective)
                / (2.0 * h);
            assert!((fd - analytic).abs() < 1e-7, "i={i} fd={fd} analytic={analytic}");
        }
    }
}
