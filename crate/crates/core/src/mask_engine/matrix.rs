use std::fmt;

use super::layout::{Role, TokenLayout};
use super::MaskError;

/// Square visibility matrix. `true` is visible (additive 0), `false` is
/// blocked (additive −∞).
#[derive(Clone, PartialEq, Eq)]
pub struct MaskMatrix {
    len: usize,
    cells: Vec<bool>,
}

impl MaskMatrix {
    pub fn all_visible(len: usize) -> Result<Self, MaskError> {
        if len == 0 {
            return Err(MaskError::ZeroLength);
        }
        Ok(MaskMatrix { len, cells: vec![true; len * len] })
    }

    pub fn from_fn(len: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self, MaskError> {
        if len == 0 {
            return Err(MaskError::ZeroLength);
        }
        let cells = (0..len).flat_map(|i| (0..len).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect();
        Ok(MaskMatrix { len, cells })
    }

    /// Row-major cells; `cells.len()` must be a nonzero perfect square.
    pub fn from_cells(cells: Vec<bool>) -> Result<Self, MaskError> {
        let len = (cells.len() as f64).sqrt().round() as usize;
        if len == 0 || len * len != cells.len() {
            return Err(MaskError::NotSquare(cells.len()));
        }
        Ok(MaskMatrix { len, cells })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_visible(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.len + j]
    }

    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        !self.is_visible(i, j)
    }

    /// Blocks one cell.
    pub fn block(&mut self, i: usize, j: usize) {
        self.cells[i * self.len + j] = false;
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.cells[i * self.len..(i + 1) * self.len]
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    /// Additive form: 0 for visible, −∞ for blocked.
    pub fn additive(&self, i: usize, j: usize) -> f64 {
        if self.is_visible(i, j) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn visible_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn blocked_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells.iter().enumerate().filter(|(_, &c)| !c).map(|(k, _)| (k / self.len, k % self.len))
    }
}

impl fmt::Debug for MaskMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "MaskMatrix({}x{})", self.len, self.len)?;
        f.write_str(&super::export::to_grid(self))
    }
}

/// Lower-triangular visibility: `(i, j)` visible iff `j <= i`.
pub fn build_causal(len: usize) -> Result<MaskMatrix, MaskError> {
    MaskMatrix::from_fn(len, |i, j| j <= i)
}

/// The modality asymmetric mask on its own (no causal component):
/// visual-reasoning queries cannot see audio inputs, audio-reasoning queries
/// cannot see video inputs or anything in the visual span.
pub fn build_maam(layout: &TokenLayout) -> MaskMatrix {
    let mut mask = MaskMatrix::all_visible(layout.len()).expect("layout length is nonzero");
    for &i in layout.positions(Role::VisualReasoning) {
        for &j in layout.positions(Role::AudioInput) {
            mask.block(i, j);
        }
    }
    for &i in layout.positions(Role::AudioReasoning) {
        for &j in layout.positions(Role::VideoInput).iter().chain(layout.positions(Role::VisualSpan)) {
            mask.block(i, j);
        }
    }
    mask
}

/// Sum of additive masks: a cell is blocked iff either operand blocks it.
pub fn compose(a: &MaskMatrix, b: &MaskMatrix) -> Result<MaskMatrix, MaskError> {
    if a.len != b.len {
        return Err(MaskError::LengthMismatch { left: a.len, right: b.len });
    }
    let cells = a.cells.iter().zip(&b.cells).map(|(&x, &y)| x && y).collect();
    Ok(MaskMatrix { len: a.len, cells })
}

/// Causal mask composed with the modality mask for `layout`.
pub fn build_composite(layout: &TokenLayout) -> MaskMatrix {
    let causal = build_causal(layout.len()).expect("layout length is nonzero");
    compose(&causal, &build_maam(layout)).expect("equal lengths")
}

/// Row `i` of the composite mask, columns `0..=i`, without building the
/// matrix. Linear in `i`.
pub fn incremental_row(layout: &TokenLayout, i: usize) -> Result<Vec<bool>, MaskError> {
    if i >= layout.len() {
        return Err(MaskError::RowOutOfRange { row: i, length: layout.len() });
    }
    Ok(row_from_flags(layout.flags(), i))
}

/// `flags[j]` holds the role bits of position `j`; `flags.len() > i`.
pub(crate) fn row_from_flags(flags: &[u8], i: usize) -> Vec<bool> {
    let blocked_bits = blocked_key_bits(flags[i]);
    flags[..=i].iter().map(|f| f & blocked_bits == 0).collect()
}

/// Role bits a query with role bits `query` may not attend to.
pub(crate) fn blocked_key_bits(query: u8) -> u8 {
    let mut bits = 0;
    if query & Role::VisualReasoning.bit() != 0 {
        bits |= Role::AudioInput.bit();
    }
    if query & Role::AudioReasoning.bit() != 0 {
        bits |= Role::VideoInput.bit() | Role::VisualSpan.bit();
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::super::layout::LayoutRoles;
    use super::*;

    fn fixture() -> TokenLayout {
        TokenLayout::new(
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
        .unwrap()
    }

    #[test]
    fn causal_small() {
        let m = build_causal(1).unwrap();
        assert!(m.is_visible(0, 0));
        let m = build_causal(3).unwrap();
        assert_eq!(m.visible_count(), 6);
        assert!(m.is_blocked(0, 1));
        assert!(m.is_visible(2, 0));
        assert_eq!(m.additive(0, 2), f64::NEG_INFINITY);
        assert_eq!(m.additive(2, 0), 0.0);
    }

    #[test]
    fn causal_zero_rejected() {
        assert!(matches!(build_causal(0), Err(MaskError::ZeroLength)));
    }

    #[test]
    fn causal_count_64() {
        // brute-force count against the closed form
        let m = build_causal(64).unwrap();
        let mut brute = 0;
        for i in 0..64 {
            for j in 0..64 {
                if j <= i {
                    brute += 1;
                }
            }
        }
        assert_eq!(brute, 64 * 65 / 2);
        assert_eq!(m.visible_count(), brute);
    }

    #[test]
    fn maam_fixture_blocks() {
        let m = build_maam(&fixture());
        let blocked: Vec<_> = m.blocked_cells().collect();
        assert_eq!(blocked, vec![(2, 1), (3, 0), (3, 2)]);
    }

    #[test]
    fn maam_without_audio_is_all_visible() {
        let l = TokenLayout::new(
            5,
            LayoutRoles {
                video_input: vec![0, 1],
                visual_reasoning: vec![3],
                visual_span: vec![2, 3, 4],
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(build_maam(&l).visible_count(), 25);
    }

    #[test]
    fn compose_identity_and_idempotence() {
        let c = build_causal(6).unwrap();
        let all = MaskMatrix::all_visible(6).unwrap();
        assert_eq!(compose(&c, &all).unwrap(), c);
        let m = build_maam(&fixture());
        assert_eq!(compose(&m, &m).unwrap(), m);
    }

    #[test]
    fn compose_length_mismatch() {
        let a = build_causal(3).unwrap();
        let b = build_causal(4).unwrap();
        assert!(matches!(compose(&a, &b), Err(MaskError::LengthMismatch { left: 3, right: 4 })));
    }

    #[test]
    fn composite_fixture() {
        let m = build_composite(&fixture());
        for i in 0..6 {
            for j in 0..6 {
                let expect_blocked = j > i || [(2, 1), (3, 0), (3, 2)].contains(&(i, j));
                assert_eq!(m.is_blocked(i, j), expect_blocked, "cell ({i},{j})");
            }
        }
    }

    #[test]
    fn incremental_rows() {
        let l = fixture();
        assert_eq!(incremental_row(&l, 0).unwrap(), vec![true]);
        assert_eq!(incremental_row(&l, 3).unwrap(), vec![false, true, false, true]);
        assert!(matches!(incremental_row(&l, 6), Err(MaskError::RowOutOfRange { row: 6, length: 6 })));
    }

    #[test]
    fn summary_rows_are_fully_visible() {
        let l = TokenLayout::new(
            8,
            LayoutRoles {
                video_input: vec![0],
                audio_input: vec![1],
                visual_reasoning: vec![2],
                visual_span: vec![2],
                audio_reasoning: vec![3],
                summary: vec![5, 6],
                ..Default::default()
            },
        )
        .unwrap();
        for i in [5, 6] {
            assert!(incremental_row(&l, i).unwrap().iter().all(|&v| v));
        }
    }

    #[test]
    fn from_cells_requires_square() {
        assert!(MaskMatrix::from_cells(vec![true; 3]).is_err());
        assert!(MaskMatrix::from_cells(vec![]).is_err());
        assert_eq!(MaskMatrix::from_cells(vec![true; 4]).unwrap().len(), 2);
    }
}
