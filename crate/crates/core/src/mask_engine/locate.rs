//! Recovering a [`TokenLayout`] from token ids.

use serde::{Deserialize, Serialize};

use super::layout::{LayoutError, LayoutRoles, TokenLayout};

/// Token ids of modality indicators and control tags.
///
/// Video and audio inputs are delimited by `*_start`/`*_end` indicator pairs
/// and may occur in several segments. Control tags occur at most once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerTable {
    pub video_start: u32,
    pub video_end: u32,
    pub audio_start: u32,
    pub audio_end: u32,
    pub v_open: u32,
    pub v_close: u32,
    pub a_open: u32,
    pub a_close: u32,
    #[serde(default)]
    pub mod_open: Option<u32>,
    #[serde(default)]
    pub mod_close: Option<u32>,
    #[serde(default)]
    pub sum_open: Option<u32>,
    #[serde(default)]
    pub sum_close: Option<u32>,
    #[serde(default)]
    pub ans_open: Option<u32>,
    #[serde(default)]
    pub ans_close: Option<u32>,
    /// Count the indicator tokens themselves as input positions.
    #[serde(default)]
    pub include_indicators: bool,
}

#[derive(Clone, Copy)]
struct TagPair {
    name: &'static str,
    open: Option<usize>,
    close: Option<usize>,
}

impl TagPair {
    fn bounds(&self) -> Option<(usize, usize)> {
        self.open.zip(self.close)
    }
}

fn find_unique(tokens: &[u32], id: Option<u32>, marker: &'static str) -> Result<Option<usize>, LayoutError> {
    let Some(id) = id else {
        return Ok(None);
    };
    let mut hits = tokens.iter().enumerate().filter(|(_, &t)| t == id).map(|(k, _)| k);
    let first = hits.next();
    if let Some(position) = hits.next() {
        return Err(LayoutError::DuplicateTag { marker, position });
    }
    Ok(first)
}

fn tag_pair(
    tokens: &[u32],
    name: &'static str,
    open: Option<u32>,
    close: Option<u32>,
    open_marker: &'static str,
    close_marker: &'static str,
) -> Result<TagPair, LayoutError> {
    let o = find_unique(tokens, open, open_marker)?;
    let c = find_unique(tokens, close, close_marker)?;
    match (o, c) {
        (Some(_), None) => Err(LayoutError::MissingTag { marker: close_marker }),
        (None, Some(_)) => Err(LayoutError::MissingTag { marker: open_marker }),
        (Some(a), Some(b)) if b < a => {
            Err(LayoutError::CrossingTags { first: open_marker, second: close_marker })
        }
        _ => Ok(TagPair { name, open: o, close: c }),
    }
}

/// Positions inside indicator-delimited segments.
fn input_positions(
    tokens: &[u32],
    start: u32,
    end: u32,
    other_start: u32,
    start_marker: &'static str,
    end_marker: &'static str,
    include_indicators: bool,
) -> Result<(Vec<usize>, Option<usize>), LayoutError> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    let mut last_marker = None;
    for (k, &t) in tokens.iter().enumerate() {
        if t == start {
            if open.is_some() {
                return Err(LayoutError::DuplicateTag { marker: start_marker, position: k });
            }
            open = Some(k);
            last_marker = Some(k);
            if include_indicators {
                out.push(k);
            }
        } else if t == end {
            if open.take().is_none() {
                return Err(LayoutError::MissingTag { marker: start_marker });
            }
            last_marker = Some(k);
            if include_indicators {
                out.push(k);
            }
        } else if open.is_some() {
            if t == other_start {
                return Err(LayoutError::CrossingTags {
                    first: start_marker,
                    second: "other modality indicator",
                });
            }
            out.push(k);
        }
    }
    if open.is_some() {
        return Err(LayoutError::MissingTag { marker: end_marker });
    }
    Ok((out, last_marker))
}

/// Scans a token sequence for modality indicators and control tags and
/// builds the corresponding layout.
///
/// Video/audio inputs are the payload tokens between indicator pairs (plus
/// the indicators when `include_indicators` is set). Visual and audio
/// reasoning are the strict interiors of the v/a tag pairs; the visual and
/// audio spans include the boundary tags.
pub fn locate_layout(tokens: &[u32], markers: &MarkerTable) -> Result<TokenLayout, LayoutError> {
    let (video_input, last_video_marker) = input_positions(
        tokens,
        markers.video_start,
        markers.video_end,
        markers.audio_start,
        "video_start",
        "video_end",
        markers.include_indicators,
    )?;
    let (audio_input, last_audio_marker) = input_positions(
        tokens,
        markers.audio_start,
        markers.audio_end,
        markers.video_start,
        "audio_start",
        "audio_end",
        markers.include_indicators,
    )?;

    let m = markers;
    let pairs = [
        tag_pair(tokens, "mod", m.mod_open, m.mod_close, "mod_open", "mod_close")?,
        tag_pair(tokens, "v", Some(m.v_open), Some(m.v_close), "v_open", "v_close")?,
        tag_pair(tokens, "a", Some(m.a_open), Some(m.a_close), "a_open", "a_close")?,
        tag_pair(tokens, "sum", m.sum_open, m.sum_close, "sum_open", "sum_close")?,
        tag_pair(tokens, "ans", m.ans_open, m.ans_close, "ans_open", "ans_close")?,
    ];

    for (x, p) in pairs.iter().enumerate() {
        for q in &pairs[x + 1..] {
            let (Some((po, pc)), Some((qo, qc))) = (p.bounds(), q.bounds()) else {
                continue;
            };
            if po < qo && qc < pc {
                return Err(LayoutError::NestedTag { inner: q.name, outer: p.name });
            }
            if qo < po && pc < qc {
                return Err(LayoutError::NestedTag { inner: p.name, outer: q.name });
            }
            if (po < qo && qo < pc) || (qo < po && po < qc) {
                return Err(LayoutError::CrossingTags { first: p.name, second: q.name });
            }
        }
    }

    let last_input_marker = last_video_marker.max(last_audio_marker);
    if let Some(marker_pos) = last_input_marker {
        for p in &pairs {
            if let Some((open, _)) = p.bounds() {
                if open < marker_pos {
                    return Err(LayoutError::ReasoningBeforeInput { tag: p.name, position: open });
                }
            }
        }
    }

    let interior =
        |p: &TagPair| -> Vec<usize> { p.bounds().map(|(o, c)| (o + 1..c).collect()).unwrap_or_default() };
    let whole =
        |p: &TagPair| -> Vec<usize> { p.bounds().map(|(o, c)| (o..=c).collect()).unwrap_or_default() };
    let [_, v, a, sum, _] = &pairs;
    let roles = LayoutRoles {
        video_input,
        audio_input,
        visual_reasoning: interior(v),
        audio_reasoning: interior(a),
        visual_span: whole(v),
        audio_span: whole(a),
        summary: interior(sum),
    };
    TokenLayout::new(tokens.len(), roles)
}
