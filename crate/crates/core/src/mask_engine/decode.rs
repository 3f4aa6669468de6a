//! Row-by-row mask construction during autoregressive decoding, where the
//! layout is only known up to the current token.

use super::layout::Role;
use super::locate::MarkerTable;
use super::matrix::row_from_flags;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Region {
    Outside,
    Video,
    Audio,
    VisualSpan,
    AudioSpan,
}

/// Tracks token roles as tokens are appended and yields each new query row.
///
/// Roles are assigned exactly as [`locate_layout`](super::locate::locate_layout)
/// would assign them on the finished sequence, provided the sequence is well
/// formed.
#[derive(Clone, Debug)]
pub struct RowMaskDecoder {
    markers: MarkerTable,
    flags: Vec<u8>,
    region: Region,
}

impl RowMaskDecoder {
    pub fn new(markers: MarkerTable) -> Self {
        RowMaskDecoder { markers, flags: Vec::new(), region: Region::Outside }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// Appends `token` and returns its visibility row over positions `0..=new`.
    pub fn push(&mut self, token: u32) -> Vec<bool> {
        let m = &self.markers;
        let indicator = if m.include_indicators { 0 } else { u8::MAX };
        let (bits, next) = match self.region {
            Region::Outside if token == m.video_start => (Role::VideoInput.bit() & !indicator, Region::Video),
            Region::Outside if token == m.audio_start => (Role::AudioInput.bit() & !indicator, Region::Audio),
            Region::Outside if token == m.v_open => (Role::VisualSpan.bit(), Region::VisualSpan),
            Region::Outside if token == m.a_open => (Role::AudioSpan.bit(), Region::AudioSpan),
            Region::Video if token == m.video_end => (Role::VideoInput.bit() & !indicator, Region::Outside),
            Region::Video => (Role::VideoInput.bit(), Region::Video),
            Region::Audio if token == m.audio_end => (Role::AudioInput.bit() & !indicator, Region::Outside),
            Region::Audio => (Role::AudioInput.bit(), Region::Audio),
            Region::VisualSpan if token == m.v_close => (Role::VisualSpan.bit(), Region::Outside),
            Region::VisualSpan => (Role::VisualSpan.bit() | Role::VisualReasoning.bit(), Region::VisualSpan),
            Region::AudioSpan if token == m.a_close => (Role::AudioSpan.bit(), Region::Outside),
            Region::AudioSpan => (Role::AudioSpan.bit() | Role::AudioReasoning.bit(), Region::AudioSpan),
            Region::Outside => (0, Region::Outside),
        };
        self.region = next;
        self.flags.push(bits);
        row_from_flags(&self.flags, self.flags.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::super::locate::locate_layout;
    use super::super::locate::tests::{markers, twelve_tokens};
    use super::super::matrix::incremental_row;
    use super::*;

    #[test]
    fn streaming_rows_match_located_layout() {
        for include in [false, true] {
            let mut m = markers();
            m.include_indicators = include;
            let tokens = twelve_tokens();
            let layout = locate_layout(&tokens, &m).unwrap();
            let mut dec = RowMaskDecoder::new(m);
            for (i, &t) in tokens.iter().enumerate() {
                assert_eq!(dec.push(t), incremental_row(&layout, i).unwrap(), "row {i}");
            }
            assert_eq!(dec.len(), tokens.len());
        }
    }

    #[test]
    fn audio_reasoning_row_blocks_video_and_visual_span() {
        let mut dec = RowMaskDecoder::new(markers());
        let rows: Vec<_> = twelve_tokens().into_iter().map(|t| dec.push(t)).collect();
        // row 10 is the audio reasoning token
        let blocked: Vec<usize> = rows[10].iter().enumerate().filter(|(_, &v)| !v).map(|(j, _)| j).collect();
        assert_eq!(blocked, vec![1, 6, 7, 8]);
        // row 7 is the visual reasoning token: blocks the audio payload
        assert_eq!(rows[7], vec![true, true, true, true, false, true, true, true]);
    }
}
