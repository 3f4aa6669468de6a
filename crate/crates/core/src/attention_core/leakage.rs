//! Synthetic probe for direct cross-modal attention flow.
//!
//! A seeded random attention stack runs over a synthetic
//! `[video][audio][question][<v> .. </v>][<a> .. </a>][<sum> .. </sum>]`
//! sequence. Direct leakage is the attention mass landing on the query/key
//! pairs the modality mask would block. Only direct flow is measured: mass
//! that reaches a reasoning token indirectly through question tokens over
//! several layers is not counted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mask_engine::{build_causal, build_composite, build_maam, LayoutRoles, TokenLayout};

use super::attention::{masked_attention, AttentionInputs};
use super::dense::Matrix;
use super::AttentionError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeakageSizes {
    pub video: usize,
    pub audio: usize,
    pub question: usize,
    pub visual_reasoning: usize,
    pub audio_reasoning: usize,
    pub summary: usize,
}

impl Default for LeakageSizes {
    fn default() -> Self {
        LeakageSizes { video: 8, audio: 8, question: 4, visual_reasoning: 6, audio_reasoning: 6, summary: 4 }
    }
}

impl LeakageSizes {
    pub fn layout(&self) -> TokenLayout {
        let mut pos = 0;
        let mut take = |n: usize| {
            let r: Vec<usize> = (pos..pos + n).collect();
            pos += n;
            r
        };
        let video_input = take(self.video);
        let audio_input = take(self.audio);
        let _question = take(self.question);
        let visual_span = take(self.visual_reasoning + 2);
        let audio_span = take(self.audio_reasoning + 2);
        let summary_span = take(self.summary + 2);
        let interior = |s: &[usize]| s[1..s.len() - 1].to_vec();
        let roles = LayoutRoles {
            visual_reasoning: interior(&visual_span),
            audio_reasoning: interior(&audio_span),
            summary: interior(&summary_span),
            video_input,
            audio_input,
            visual_span,
            audio_span,
        };
        TokenLayout::new(pos, roles).expect("synthetic layout is valid by construction")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeakageConfig {
    pub sizes: LeakageSizes,
    pub layers: usize,
    pub dim: usize,
}

impl Default for LeakageConfig {
    fn default() -> Self {
        LeakageConfig { sizes: LeakageSizes::default(), layers: 4, dim: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub seed: u64,
    pub use_maam: bool,
    /// Mean fraction of an affected query's attention that lands on blocked
    /// keys, averaged over layers.
    pub direct_leakage: f64,
    /// Raw attention mass on blocked pairs, summed over layers.
    pub blocked_pair_mass: f64,
    pub blocked_pairs: usize,
    pub affected_queries: usize,
    pub layers: usize,
}

pub fn leakage_probe(
    seed: u64,
    sizes: LeakageSizes,
    use_maam: bool,
) -> Result<LeakageReport, AttentionError> {
    leakage_probe_with(seed, &LeakageConfig { sizes, ..LeakageConfig::default() }, use_maam)
}

pub fn leakage_probe_with(
    seed: u64,
    cfg: &LeakageConfig,
    use_maam: bool,
) -> Result<LeakageReport, AttentionError> {
    if cfg.layers == 0 || cfg.dim == 0 {
        return Err(AttentionError::Shape("leakage probe needs at least one layer and dimension".into()));
    }
    let layout = cfg.sizes.layout();
    let l = layout.len();
    let blocked: Vec<(usize, usize)> = build_maam(&layout).blocked_cells().collect();
    let mut affected: Vec<usize> = blocked.iter().map(|&(i, _)| i).collect();
    affected.dedup();
    let mask = if use_maam { build_composite(&layout) } else { build_causal(l).expect("nonzero length") };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj_scale = 1.0 / (cfg.dim as f64).sqrt();
    let mut hidden = Matrix::random(l, cfg.dim, &mut rng);
    let mut blocked_pair_mass = 0.0;
    for _ in 0..cfg.layers {
        let wq = Matrix::random(cfg.dim, cfg.dim, &mut rng).scale(proj_scale);
        let wk = Matrix::random(cfg.dim, cfg.dim, &mut rng).scale(proj_scale);
        let wv = Matrix::random(cfg.dim, cfg.dim, &mut rng).scale(proj_scale);
        let inputs = AttentionInputs::new(
            hidden.matmul(&wq)?,
            hidden.matmul(&wk)?,
            hidden.matmul(&wv)?,
            mask.clone(),
        )?;
        let out = masked_attention(&inputs)?;
        blocked_pair_mass += blocked.iter().map(|&(i, j)| out.weights.get(i, j)).sum::<f64>();
        hidden = hidden.add(&out.output)?;
    }

    let direct_leakage =
        if affected.is_empty() { 0.0 } else { blocked_pair_mass / (cfg.layers * affected.len()) as f64 };
    Ok(LeakageReport {
        seed,
        use_maam,
        direct_leakage,
        blocked_pair_mass,
        blocked_pairs: blocked.len(),
        affected_queries: affected.len(),
        layers: cfg.layers,
    })
}
