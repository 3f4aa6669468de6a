use serde::{Deserialize, Serialize};

use crate::mask_engine::{Role, TokenLayout};

use super::attention::AttentionWeights;
use super::dense::Matrix;
use super::AttentionError;

/// Number of final layers aggregated by default.
pub const DEFAULT_LAST_K: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerAllocation {
    pub layer: usize,
    pub audio_mass: f64,
    pub visual_mass: f64,
    /// `None` when the layer puts no mass on either span.
    pub audio_fraction: Option<f64>,
    pub visual_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub last_k: usize,
    pub layers: Vec<LayerAllocation>,
    pub audio_mass: f64,
    pub visual_mass: f64,
    pub audio_fraction: f64,
    pub visual_fraction: f64,
}

fn normalize(audio: f64, visual: f64) -> Option<(f64, f64)> {
    let total = audio + visual;
    (total > 0.0).then(|| {
        let a = audio / total;
        (a, 1.0 - a)
    })
}

/// Query rows used when none are given: the summary tokens.
pub fn default_query_span(layout: &TokenLayout) -> Vec<usize> {
    layout.positions(Role::Summary).to_vec()
}

/// Attention mass from `query_span` rows into the audio span versus the
/// visual span (both including boundary tags), over the final `last_k`
/// layers. Fractions are normalized per layer and over the summed window.
pub fn attention_allocation(
    weights_per_layer: &[AttentionWeights],
    layout: &TokenLayout,
    query_span: &[usize],
    last_k: usize,
) -> Result<AllocationReport, AttentionError> {
    let n_layers = weights_per_layer.len();
    if last_k == 0 || last_k > n_layers {
        return Err(AttentionError::InvalidWindow { last_k, layers: n_layers });
    }
    if query_span.is_empty() {
        return Err(AttentionError::EmptyQuerySpan);
    }
    let l = layout.len();
    if let Some(&q) = query_span.iter().find(|&&q| q >= l) {
        return Err(AttentionError::Shape(format!("query position {q} is outside the layout of length {l}")));
    }
    let audio_cols = layout.positions(Role::AudioSpan);
    let visual_cols = layout.positions(Role::VisualSpan);

    let mut layers = Vec::with_capacity(last_k);
    let (mut audio_total, mut visual_total) = (0.0, 0.0);
    for (layer, w) in weights_per_layer.iter().enumerate().skip(n_layers - last_k) {
        if w.len() != l {
            return Err(AttentionError::Shape(format!(
                "layer {layer} has {}x{} weights but the layout has length {l}",
                w.len(),
                w.len()
            )));
        }
        let mass = |cols: &[usize]| -> f64 {
            query_span.iter().map(|&i| cols.iter().map(|&j| w.get(i, j)).sum::<f64>()).sum()
        };
        let audio_mass = mass(audio_cols);
        let visual_mass = mass(visual_cols);
        audio_total += audio_mass;
        visual_total += visual_mass;
        let fractions = normalize(audio_mass, visual_mass);
        layers.push(LayerAllocation {
            layer,
            audio_mass,
            visual_mass,
            audio_fraction: fractions.map(|f| f.0),
            visual_fraction: fractions.map(|f| f.1),
        });
    }
    let (audio_fraction, visual_fraction) =
        normalize(audio_total, visual_total).ok_or(AttentionError::ZeroSpanMass)?;
    Ok(AllocationReport {
        last_k,
        layers,
        audio_mass: audio_total,
        visual_mass: visual_total,
        audio_fraction,
        visual_fraction,
    })
}

/// One line of a weights dump: a row-major array plus its shape, either
/// `[L, L]` or `[heads, L, L]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDump {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl WeightDump {
    pub fn from_weights(layer: usize, w: &AttentionWeights) -> Self {
        WeightDump { layer: Some(layer), shape: vec![w.len(), w.len()], data: w.as_matrix().data().to_vec() }
    }

    /// Collapses heads by averaging their weights cell-wise.
    pub fn to_weights(&self) -> Result<AttentionWeights, AttentionError> {
        let (heads, l) = match self.shape[..] {
            [a, b] if a == b => (1, a),
            [h, a, b] if a == b && h > 0 => (h, a),
            _ => {
                return Err(AttentionError::Shape(format!(
                    "weight shape {:?} is not [L, L] or [H, L, L]",
                    self.shape
                )))
            }
        };
        if self.data.len() != heads * l * l {
            return Err(AttentionError::Shape(format!(
                "shape {:?} needs {} values, got {}",
                self.shape,
                heads * l * l,
                self.data.len()
            )));
        }
        let mut avg = vec![0.0; l * l];
        for h in 0..heads {
            for (k, a) in avg.iter_mut().enumerate() {
                *a += self.data[h * l * l + k];
            }
        }
        if heads > 1 {
            avg.iter_mut().for_each(|a| *a /= heads as f64);
        }
        AttentionWeights::from_matrix(Matrix::from_vec(l, l, avg)?)
    }
}
