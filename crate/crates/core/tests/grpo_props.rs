mod common;

use avr_core::rl_core::{
    group_advantages, grpo_objective, grpo_objective_grad, kl_estimate, GrpoConfig, RolloutGroup,
};
use common::oracle::{mean, oracle_grpo, random_group};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rewards() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 2..16)
}

fn variance(r: &[f64]) -> f64 {
    let m = mean(r);
    r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / r.len() as f64
}

/// Central difference of the objective w.r.t. `logp_new[k]`.
fn numeric_grad(group: &RolloutGroup, cfg: &GrpoConfig, k: usize, h: f64) -> f64 {
    let mut plus = group.clone();
    let mut minus = group.clone();
    plus.logp_new[k] += h;
    minus.logp_new[k] -= h;
    (grpo_objective(&plus, cfg).unwrap().objective - grpo_objective(&minus, cfg).unwrap().objective)
        / (2.0 * h)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

proptest! {
    #[test]
    fn advantages_are_centered(r in rewards()) {
        prop_assume!(variance(&r) > 1e-6);
        let a = group_advantages(&r, 1e-8).unwrap();
        prop_assert!(mean(&a).abs() <= 1e-9);
    }

    #[test]
    fn advantages_affine_invariant(r in rewards(), scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        prop_assume!(variance(&r) > 1e-6);
        let a = group_advantages(&r, 0.0).unwrap();
        let moved: Vec<f64> = r.iter().map(|x| scale * x + shift).collect();
        let b = group_advantages(&moved, 0.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn clipping_is_pessimistic(seed in any::<u64>(), size in 2usize..12, alpha in 0.05f64..0.5) {
        let group = random_group(&mut ChaCha8Rng::seed_from_u64(seed), size);
        let cfg = GrpoConfig { clip_alpha: alpha, kl_beta: 0.0, ..GrpoConfig::default() };
        let out = grpo_objective(&group, &cfg).unwrap();
        prop_assert!(out.objective <= out.unclipped_objective);
        prop_assert!(out.objective <= mean(&out.unclipped_terms));
    }

    #[test]
    fn clip_inactive_means_equal(seed in any::<u64>(), size in 2usize..12) {
        let mut group = random_group(&mut ChaCha8Rng::seed_from_u64(seed), size);
        for (n, o) in group.logp_new.iter_mut().zip(&group.logp_old) {
            *n = o + (*n - o).clamp(-0.15, 0.15);
        }
        let out = grpo_objective(&group, &GrpoConfig::default()).unwrap();
        prop_assert_eq!(out.objective, out.unclipped_objective);
    }

    #[test]
    fn kl_is_nonnegative(new in prop::collection::vec(-30.0f64..0.0, 1..10), shift in -3.0f64..3.0) {
        let r: Vec<f64> = new.iter().map(|x| x + shift).collect();
        prop_assert!(kl_estimate(&new, &r).unwrap() >= 0.0);
        prop_assert_eq!(kl_estimate(&new, &new).unwrap(), 0.0);
    }

    #[test]
    fn objective_matches_oracle(seed in any::<u64>(), size in 2usize..12) {
        let group = random_group(&mut ChaCha8Rng::seed_from_u64(seed), size);
        let cfg = GrpoConfig::default();
        let out = grpo_objective(&group, &cfg).unwrap();
        let expected = oracle_grpo(&group, cfg.clip_alpha, cfg.kl_beta, cfg.eps_stab);
        prop_assert!((out.objective - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }
}

#[test]
fn kl_zero_only_at_reference() {
    assert!(kl_estimate(&[-1.0], &[-1.0 + 1e-4]).unwrap() > 0.0);
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..5 {
        let group = random_group(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let cfg = GrpoConfig::default();
        let grad = grpo_objective_grad(&group, &cfg).unwrap();
        for (k, &g) in grad.iter().enumerate() {
            let n = numeric_grad(&group, &cfg, k, 1e-6);
            assert!(rel_err(g, n) <= 1e-4, "seed {seed} k {k}: {g} vs {n}");
        }
    }
}

#[test]
fn gradient_near_clip_boundaries_from_both_sides() {
    let cfg = GrpoConfig::default();
    let mut probes = 0;
    for seed in 0..5 {
        let base = random_group(&mut ChaCha8Rng::seed_from_u64(50 + seed), 6);
        for bound in [1.0 - cfg.clip_alpha, 1.0 + cfg.clip_alpha] {
            for offset in [-1e-3, 1e-3] {
                let mut group = base.clone();
                // put sample 0 just inside or just outside one clip bound
                group.logp_new[0] = group.logp_old[0] + (bound + offset).ln();
                let grad = grpo_objective_grad(&group, &cfg).unwrap();
                let n = numeric_grad(&group, &cfg, 0, 1e-6);
                assert!(
                    rel_err(grad[0], n) <= 1e-4,
                    "seed {seed} bound {bound} offset {offset}: {} vs {n}",
                    grad[0]
                );
                probes += 1;
            }
        }
    }
    assert_eq!(probes, 20);
}

#[test]
fn clipped_terms_have_only_kl_gradient() {
    let group = RolloutGroup {
        group_id: "g".into(),
        rewards: vec![1.0, 0.0],
        logp_new: vec![0.5f64.ln(), 2.0f64.ln()],
        logp_old: vec![0.0, 0.0],
        logp_ref: vec![0.5f64.ln(), 2.0f64.ln()],
    };
    // sample 0: rho 0.5, A = +1 → min picks 0.5 (unclipped, gradient flows)
    // sample 1: rho 2.0, A = -1 → min picks -2.0 (unclipped, gradient flows)
    let cfg = GrpoConfig::default();
    let g = grpo_objective_grad(&group, &cfg).unwrap();
    assert!(g.iter().all(|&x| x != 0.0));
    // flip the rewards: both terms now take the clipped branch
    let flipped = RolloutGroup { rewards: vec![0.0, 1.0], ..group };
    let g = grpo_objective_grad(&flipped, &cfg).unwrap();
    assert_eq!(g, vec![0.0, 0.0]);
}

#[test]
fn binary_group_with_unit_ratios_has_zero_objective() {
    let group = RolloutGroup {
        group_id: "pair".into(),
        rewards: vec![1.0, 0.0],
        logp_new: vec![-3.0, -4.0],
        logp_old: vec![-3.0, -4.0],
        logp_ref: vec![-3.0, -4.0],
    };
    let out = grpo_objective(&group, &GrpoConfig::default()).unwrap();
    assert!(out.objective.abs() <= 1e-12);
    let a = &out.advantages;
    assert!((a[0] - 1.0).abs() < 1e-7 && (a[1] + 1.0).abs() < 1e-7);
}

#[test]
fn equal_rewards_give_zero_advantages() {
    assert_eq!(group_advantages(&[0.7; 5], 1e-8).unwrap(), vec![0.0; 5]);
    assert_eq!(group_advantages(&[0.7; 5], 0.0).unwrap(), vec![0.0; 5]);
}
