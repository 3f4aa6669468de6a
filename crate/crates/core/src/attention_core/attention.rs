use crate::mask_engine::MaskMatrix;

use super::dense::Matrix;
use super::AttentionError;

/// Inputs to single-head masked attention.
#[derive(Clone, Debug)]
pub struct AttentionInputs {
    pub queries: Matrix,
    pub keys: Matrix,
    pub values: Matrix,
    pub scale: f64,
    pub mask: MaskMatrix,
}

impl AttentionInputs {
    /// Uses the default scale `1/sqrt(d)`.
    pub fn new(
        queries: Matrix,
        keys: Matrix,
        values: Matrix,
        mask: MaskMatrix,
    ) -> Result<Self, AttentionError> {
        let d = queries.cols().max(1) as f64;
        let inputs = AttentionInputs { queries, keys, values, scale: 1.0 / d.sqrt(), mask };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self, AttentionError> {
        self.scale = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn validate(&self) -> Result<(), AttentionError> {
        let l = self.mask.len();
        let (q, k, v) = (&self.queries, &self.keys, &self.values);
        if q.rows() != l || k.rows() != l || v.rows() != l {
            return Err(AttentionError::Shape(format!(
                "Q/K/V have {}/{}/{} rows but the mask has length {l}",
                q.rows(),
                k.rows(),
                v.rows()
            )));
        }
        if q.cols() != k.cols() {
            return Err(AttentionError::Shape(format!(
                "query width {} differs from key width {}",
                q.cols(),
                k.cols()
            )));
        }
        if !(q.is_finite() && k.is_finite() && v.is_finite()) {
            return Err(AttentionError::NonFinite("input entries"));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(AttentionError::InvalidScale(self.scale));
        }
        Ok(())
    }
}

/// Row-stochastic attention weights with exact zeros at blocked cells.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights(Matrix);

impl AttentionWeights {
    pub fn from_matrix(m: Matrix) -> Result<Self, AttentionError> {
        if m.rows() != m.cols() {
            return Err(AttentionError::Shape(format!(
                "attention weights must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if m.data().iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(AttentionError::NonFinite("attention weights"));
        }
        Ok(AttentionWeights(m))
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.row(i).iter().sum()).collect()
    }
}

pub struct AttentionOutput {
    pub output: Matrix,
    pub weights: AttentionWeights,
}

/// Softmax of `scale * Q K^T` restricted to visible cells, then `W V`.
///
/// Blocked cells never enter the softmax reduction, so their weights are
/// exactly zero.
pub fn masked_attention(inputs: &AttentionInputs) -> Result<AttentionOutput, AttentionError> {
    inputs.validate()?;
    let l = inputs.len();
    let (q, k, v) = (&inputs.queries, &inputs.keys, &inputs.values);
    let mut weights = Matrix::zeros(l, l);
    let mut logits = vec![0.0; l];
    for i in 0..l {
        let row_mask = inputs.mask.row(i);
        let mut max = f64::NEG_INFINITY;
        for j in 0..l {
            if row_mask[j] {
                let s = inputs.scale * dot(q.row(i), k.row(j));
                logits[j] = s;
                max = max.max(s);
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(AttentionError::FullyBlockedRow(i));
        }
        let mut total = 0.0;
        for j in 0..l {
            if row_mask[j] {
                let e = (logits[j] - max).exp();
                weights[(i, j)] = e;
                total += e;
            }
        }
        if !total.is_finite() {
            return Err(AttentionError::NonFinite("softmax normalizer"));
        }
        for j in 0..l {
            if row_mask[j] {
                weights[(i, j)] /= total;
            }
        }
    }
    let output = weights.matmul(v)?;
    if !output.is_finite() {
        return Err(AttentionError::NonFinite("attention output"));
    }
    Ok(AttentionOutput { output, weights: AttentionWeights(weights) })
}

/// Heads share one mask; each head is an independent single-head attention.
pub fn multi_head_attention(
    heads: &[(Matrix, Matrix, Matrix)],
    mask: &MaskMatrix,
) -> Result<Vec<AttentionOutput>, AttentionError> {
    heads
        .iter()
        .map(|(q, k, v)| {
            let inputs = AttentionInputs::new(q.clone(), k.clone(), v.clone(), mask.clone())?;
            masked_attention(&inputs)
        })
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Analytic gradients for a given upstream gradient of the output.
#[derive(Clone, Debug)]
pub struct AttentionGrads {
    pub d_queries: Matrix,
    pub d_keys: Matrix,
    pub d_values: Matrix,
    /// Gradient w.r.t. the pre-softmax logits; zero at blocked cells.
    pub d_logits: Matrix,
}

pub fn attention_backward(
    inputs: &AttentionInputs,
    weights: &AttentionWeights,
    d_output: &Matrix,
) -> Result<AttentionGrads, AttentionError> {
    let l = inputs.len();
    let (q, k, v) = (&inputs.queries, &inputs.keys, &inputs.values);
    if d_output.rows() != l || d_output.cols() != v.cols() {
        return Err(AttentionError::Shape("upstream gradient shape".into()));
    }
    let w = weights.as_matrix();

    let mut d_values = Matrix::zeros(l, v.cols());
    for i in 0..l {
        for j in 0..l {
            let wij = w[(i, j)];
            if wij == 0.0 {
                continue;
            }
            for c in 0..v.cols() {
                d_values[(j, c)] += wij * d_output[(i, c)];
            }
        }
    }

    let mut d_logits = Matrix::zeros(l, l);
    for i in 0..l {
        let d_w: Vec<f64> = (0..l).map(|j| dot(d_output.row(i), v.row(j))).collect();
        let centre: f64 = (0..l).map(|j| w[(i, j)] * d_w[j]).sum();
        for j in 0..l {
            if inputs.mask.is_visible(i, j) {
                d_logits[(i, j)] = w[(i, j)] * (d_w[j] - centre);
            }
        }
    }

    let mut d_queries = Matrix::zeros(l, q.cols());
    let mut d_keys = Matrix::zeros(l, k.cols());
    for i in 0..l {
        for j in 0..l {
            let g = inputs.scale * d_logits[(i, j)];
            if g == 0.0 {
                continue;
            }
            for c in 0..q.cols() {
                d_queries[(i, c)] += g * k[(j, c)];
                d_keys[(j, c)] += g * q[(i, c)];
            }
        }
    }

    for m in [&d_queries, &d_keys, &d_values, &d_logits] {
        if !m.is_finite() {
            return Err(AttentionError::NonFinite("gradients"));
        }
    }
    Ok(AttentionGrads { d_queries, d_keys, d_values, d_logits })
}

/// Gradients of `sum(output)`.
pub fn sum_loss_gradients(inputs: &AttentionInputs) -> Result<AttentionGrads, AttentionError> {
    let out = masked_attention(inputs)?;
    let ones =
        Matrix::from_vec(inputs.len(), inputs.values.cols(), vec![1.0; inputs.len() * inputs.values.cols()])?;
    attention_backward(inputs, &out.weights, &ones)
}

/// Denominator floor for relative errors, so entries whose true gradient is
/// zero compare on absolute error.
pub const GRADIENT_REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(GRADIENT_REL_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Max relative error between analytic gradients of `sum(output)` w.r.t.
/// Q, K and V and central finite differences with the given step.
pub fn gradient_check(inputs: &AttentionInputs, step: f64) -> Result<f64, AttentionError> {
    if !(1e-6..=1e-3).contains(&step) {
        return Err(AttentionError::InvalidStep(step));
    }
    let grads = sum_loss_gradients(inputs)?;
    let loss = |x: &AttentionInputs| -> Result<f64, AttentionError> { Ok(masked_attention(x)?.output.sum()) };

    let mut worst: f64 = 0.0;
    for (which, analytic) in [(0, &grads.d_queries), (1, &grads.d_keys), (2, &grads.d_values)] {
        for idx in 0..analytic.data().len() {
            let mut plus = inputs.clone();
            let mut minus = inputs.clone();
            perturb(&mut plus, which, idx, step);
            perturb(&mut minus, which, idx, -step);
            let numeric = (loss(&plus)? - loss(&minus)?) / (2.0 * step);
            if !numeric.is_finite() {
                return Err(AttentionError::NonFinite("finite difference"));
            }
            worst = worst.max(relative_error(analytic.data()[idx], numeric));
        }
    }
    Ok(worst)
}

fn perturb(inputs: &mut AttentionInputs, which: usize, idx: usize, delta: f64) {
    let m = match which {
        0 => &mut inputs.queries,
        1 => &mut inputs.keys,
        _ => &mut inputs.values,
    };
    m.data_mut()[idx] += delta;
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mask_engine::{build_causal, build_composite, LayoutRoles, TokenLayout};

    fn fixture_mask() -> MaskMatrix {
        build_composite(
            &TokenLayout::new(
                6,
                LayoutRoles {
                    video_input: vec![0],
                    audio_input: vec![1],
                    visual_reasoning: vec![2],
                    visual_span: vec![2],
                    audio_reasoning: vec![3],
                    ..Default::default()
                },
            )
            .unwrap(),
        )
    }

    fn random_inputs(l: usize, d: usize, mask: MaskMatrix, seed: u64) -> AttentionInputs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AttentionInputs::new(
            Matrix::random(l, d, &mut rng),
            Matrix::random(l, d, &mut rng),
            Matrix::random(l, d, &mut rng),
            mask,
        )
        .unwrap()
    }

    #[test]
    fn zero_logits_give_uniform_rows() {
        let mask = fixture_mask();
        let z = Matrix::zeros(6, 4);
        let inputs = AttentionInputs::new(z.clone(), z.clone(), Matrix::zeros(6, 4), mask.clone()).unwrap();
        let out = masked_attention(&inputs).unwrap();
        for i in 0..6 {
            let visible = mask.row(i).iter().filter(|&&v| v).count() as f64;
            for j in 0..6 {
                let expect = if mask.is_visible(i, j) { 1.0 / visible } else { 0.0 };
                assert_eq!(out.weights.get(i, j), expect);
            }
        }
    }

    #[test]
    fn first_row_of_causal_is_one_hot() {
        let inputs = random_inputs(2, 3, build_causal(2).unwrap(), 7);
        let out = masked_attention(&inputs).unwrap();
        assert_eq!(out.weights.row(0), &[1.0, 0.0]);
    }

    #[test]
    fn fixture_mask_zeros() {
        let inputs = random_inputs(6, 4, fixture_mask(), 3);
        let out = masked_attention(&inputs).unwrap();
        assert_eq!(out.weights.get(3, 0), 0.0);
        assert_eq!(out.weights.get(3, 2), 0.0);
        assert_eq!(out.weights.get(2, 1), 0.0);
        for s in out.weights.row_sums() {
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn fully_blocked_row_is_an_error() {
        let mut mask = build_causal(2).unwrap();
        mask.block(0, 0);
        let inputs = random_inputs(2, 2, mask, 1);
        assert!(matches!(masked_attention(&inputs), Err(AttentionError::FullyBlockedRow(0))));
    }

    #[test]
    fn shape_and_scale_validation() {
        let mask = build_causal(3).unwrap();
        let bad =
            AttentionInputs::new(Matrix::zeros(2, 2), Matrix::zeros(3, 2), Matrix::zeros(3, 2), mask.clone());
        assert!(matches!(bad, Err(AttentionError::Shape(_))));
        let ok = AttentionInputs::new(Matrix::zeros(3, 2), Matrix::zeros(3, 2), Matrix::zeros(3, 2), mask)
            .unwrap();
        assert!(matches!(ok.with_scale(0.0), Err(AttentionError::InvalidScale(_))));
    }

    #[test]
    fn gradient_check_zero_inputs() {
        let z = Matrix::zeros(4, 3);
        let inputs = AttentionInputs::new(z.clone(), z.clone(), z, build_causal(4).unwrap()).unwrap();
        assert!(gradient_check(&inputs, 1e-4).unwrap() < 1e-8);
    }

    #[test]
    fn gradient_check_random_causal() {
        let inputs = random_inputs(4, 3, build_causal(4).unwrap(), 11);
        let err = gradient_check(&inputs, 1e-4).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn gradient_check_rejects_bad_step() {
        let inputs = random_inputs(3, 2, build_causal(3).unwrap(), 1);
        assert!(gradient_check(&inputs, 1e-2).is_err());
        assert!(gradient_check(&inputs, 1e-7).is_err());
    }

    #[test]
    fn blocked_pair_carries_no_gradient() {
        let inputs = random_inputs(6, 4, fixture_mask(), 5);
        let grads = sum_loss_gradients(&inputs).unwrap();
        assert_eq!(grads.d_logits[(2, 1)], 0.0);
        assert_eq!(grads.d_logits[(3, 0)], 0.0);
        assert_eq!(grads.d_logits[(3, 2)], 0.0);

        // finite-difference probe: moving key row 1 leaves output row 2 untouched
        let row2 = |x: &AttentionInputs| masked_attention(x).unwrap().output.row(2).to_vec();
        let base = row2(&inputs);
        for c in 0..4 {
            let mut moved = inputs.clone();
            moved.keys[(1, c)] += 1e-4;
            assert_eq!(row2(&moved), base);
        }
    }

    #[test]
    fn multi_head_shares_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let heads: Vec<_> = (0..3)
            .map(|_| {
                (
                    Matrix::random(6, 2, &mut rng),
                    Matrix::random(6, 2, &mut rng),
                    Matrix::random(6, 2, &mut rng),
                )
            })
            .collect();
        let outs = multi_head_attention(&heads, &fixture_mask()).unwrap();
        assert_eq!(outs.len(), 3);
        for o in outs {
            assert_eq!(o.weights.get(3, 2), 0.0);
        }
    }
}
