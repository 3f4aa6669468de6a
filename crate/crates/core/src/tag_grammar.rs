//! Separate-then-fuse reasoning traces.
//!
//! A trace is five tagged segments in a fixed order:
//!
//! ```text
//! <mod>PEM</mod><v>visual reasoning</v><a>audio reasoning</a><sum>fused summary</sum><ans>answer</ans>
//! ```
//!
//! Whitespace between tags is tolerated. Any other text outside a tag pair is
//! rejected, so that [`validate_structure`] is a crisp 0/1 predicate. All
//! offsets reported by this module are character (not byte) indices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Preferred evidence modality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PemLabel {
    #[serde(rename = "Audio")]
    Audio,
    #[serde(rename = "Visual")]
    Visual,
    #[serde(rename = "Audio-Visual")]
    AudioVisual,
}

impl PemLabel {
    pub const ALL: [PemLabel; 3] = [PemLabel::Audio, PemLabel::Visual, PemLabel::AudioVisual];

    pub fn as_str(self) -> &'static str {
        match self {
            PemLabel::Audio => "Audio",
            PemLabel::Visual => "Visual",
            PemLabel::AudioVisual => "Audio-Visual",
        }
    }
}

impl fmt::Display for PemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown PEM value {0:?}; expected one of Audio, Visual, Audio-Visual")]
pub struct UnknownPem(pub String);

impl FromStr for PemLabel {
    type Err = UnknownPem;

    /// Exact match only. Callers trim beforehand if they need to.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PemLabel::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| UnknownPem(s.to_string()))
    }
}

/// One of the five control tags, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagName {
    Mod,
    #[serde(rename = "v")]
    Visual,
    #[serde(rename = "a")]
    Audio,
    #[serde(rename = "sum")]
    Summary,
    #[serde(rename = "ans")]
    Answer,
}

impl TagName {
    pub const ORDER: [TagName; 5] =
        [TagName::Mod, TagName::Visual, TagName::Audio, TagName::Summary, TagName::Answer];

    pub fn as_str(self) -> &'static str {
        match self {
            TagName::Mod => "mod",
            TagName::Visual => "v",
            TagName::Audio => "a",
            TagName::Summary => "sum",
            TagName::Answer => "ans",
        }
    }

    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn open_tag(self) -> String {
        format!("<{}>", self.as_str())
    }

    pub fn close_tag(self) -> String {
        format!("</{}>", self.as_str())
    }
}

impl fmt::Display for TagName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Location of one tagged segment. `start` is the offset of the opening
/// tag's `<`, `end` is one past the closing tag's `>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub tag: TagName,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticKind {
    MissingTag,
    UnclosedTag,
    DuplicateTag,
    OutOfOrder,
    NestedTag,
    UnknownPemValue,
    StrayContent,
}

impl DiagnosticKind {
    /// Every diagnostic invalidates the trace.
    pub fn is_fatal(self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub kind: DiagnosticKind,
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {}: {}", self.kind, self.offset, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("segment <{tag}> contains the control tag {found:?}")]
    EmbeddedTag { tag: TagName, found: String },
}

/// A parsed separate-then-fuse trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SfrTrace {
    pem: PemLabel,
    visual_text: String,
    audio_text: String,
    summary_text: String,
    answer_text: String,
    spans: Vec<Span>,
}

impl SfrTrace {
    /// Builds a trace whose spans are the offsets of its canonical rendering.
    pub fn new(
        pem: PemLabel,
        visual_text: impl Into<String>,
        audio_text: impl Into<String>,
        summary_text: impl Into<String>,
        answer_text: impl Into<String>,
    ) -> Result<Self, TraceError> {
        let segments = [
            (TagName::Visual, visual_text.into()),
            (TagName::Audio, audio_text.into()),
            (TagName::Summary, summary_text.into()),
            (TagName::Answer, answer_text.into()),
        ];
        for (tag, body) in &segments {
            if let Some(found) = find_control_tag(body) {
                return Err(TraceError::EmbeddedTag { tag: *tag, found });
            }
        }
        let bodies = [
            pem.as_str(),
            segments[0].1.as_str(),
            segments[1].1.as_str(),
            segments[2].1.as_str(),
            segments[3].1.as_str(),
        ];
        let mut spans = Vec::with_capacity(5);
        let mut pos = 0;
        for (tag, body) in TagName::ORDER.into_iter().zip(bodies) {
            let len = tag.open_tag().len() + body.chars().count() + tag.close_tag().len();
            spans.push(Span { tag, start: pos, end: pos + len });
            pos += len;
        }
        let [(_, v), (_, a), (_, s), (_, ans)] = segments;
        Ok(SfrTrace { pem, visual_text: v, audio_text: a, summary_text: s, answer_text: ans, spans })
    }

    pub fn pem(&self) -> PemLabel {
        self.pem
    }

    pub fn visual_text(&self) -> &str {
        &self.visual_text
    }

    pub fn audio_text(&self) -> &str {
        &self.audio_text
    }

    pub fn summary_text(&self) -> &str {
        &self.summary_text
    }

    pub fn answer_text(&self) -> &str {
        &self.answer_text
    }

    /// Spans in source order: mod, v, a, sum, ans.
    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn span(&self, tag: TagName) -> Span {
        self.spans[tag.rank()]
    }

    /// Equality on the five content fields, ignoring offsets.
    pub fn same_content(&self, other: &SfrTrace) -> bool {
        self.pem == other.pem
            && self.visual_text == other.visual_text
            && self.audio_text == other.audio_text
            && self.summary_text == other.summary_text
            && self.answer_text == other.answer_text
    }
}

fn find_control_tag(body: &str) -> Option<String> {
    TagName::ORDER
        .into_iter()
        .flat_map(|t| [t.open_tag(), t.close_tag()])
        .find(|tag| body.contains(tag.as_str()))
}

/// One JSONL trace record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: String,
    pub text: String,
}

#[derive(Clone, Copy, Debug)]
struct TagEvent {
    tag: TagName,
    closing: bool,
    start: usize,
    end: usize,
}

fn scan_tags(chars: &[char]) -> Vec<TagEvent> {
    let mut events = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '<' {
            if let Some(ev) = match_tag_at(chars, i) {
                i = ev.end;
                events.push(ev);
                continue;
            }
        }
        i += 1;
    }
    events
}

fn match_tag_at(chars: &[char], at: usize) -> Option<TagEvent> {
    let closing = chars.get(at + 1) == Some(&'/');
    let name_start = at + 1 + usize::from(closing);
    TagName::ORDER.into_iter().find_map(|tag| {
        let name = tag.as_str();
        let end = name_start + name.len();
        let matches =
            chars.len() > end && chars[name_start..end].iter().copied().eq(name.chars()) && chars[end] == '>';
        matches.then_some(TagEvent { tag, closing, start: at, end: end + 1 })
    })
}

struct OpenSpan {
    tag: TagName,
    start: usize,
    content_start: usize,
}

#[derive(Default)]
struct ParseState {
    diagnostics: Vec<ParseDiagnostic>,
    first_open: [Option<usize>; 5],
    closed: [bool; 5],
    missing_reported: [bool; 5],
    contents: [Option<(usize, usize)>; 5],
    spans: [Option<Span>; 5],
}

impl ParseState {
    fn diag(&mut self, kind: DiagnosticKind, offset: usize, message: String) {
        self.diagnostics.push(ParseDiagnostic { kind, offset, message });
    }

    fn close(&mut self, open: OpenSpan, content_end: usize, span_end: usize) {
        let r = open.tag.rank();
        self.closed[r] = true;
        self.contents[r] = Some((open.content_start, content_end));
        self.spans[r] = Some(Span { tag: open.tag, start: open.start, end: span_end });
    }

    fn check_stray(&mut self, chars: &[char], from: usize, to: usize) {
        if let Some(off) = (from..to).find(|&k| !chars[k].is_whitespace()) {
            self.diag(
                DiagnosticKind::StrayContent,
                off,
                "non-whitespace text outside of any tag pair".to_string(),
            );
        }
    }
}

/// Parses a trace, or reports every structural problem found.
pub fn parse_trace(text: &str) -> Result<SfrTrace, Vec<ParseDiagnostic>> {
    let chars: Vec<char> = text.chars().collect();
    let events = scan_tags(&chars);
    let mut st = ParseState::default();
    let mut open: Option<OpenSpan> = None;
    // Opening tags that were rejected (nested or duplicated); their closers are swallowed.
    let mut suppressed: Vec<TagName> = Vec::new();
    let mut cursor = 0;

    for (k, ev) in events.iter().enumerate() {
        if open.is_none() && suppressed.is_empty() {
            st.check_stray(&chars, cursor, ev.start);
        }
        let r = ev.tag.rank();
        if !ev.closing {
            if let Some(cur) = open.take() {
                let closes_later = events[k + 1..].iter().any(|e| e.closing && e.tag == cur.tag);
                if closes_later {
                    st.diag(
                        DiagnosticKind::NestedTag,
                        ev.start,
                        format!("<{}> opened inside <{}>", ev.tag, cur.tag),
                    );
                    suppressed.push(ev.tag);
                    open = Some(cur);
                    continue;
                }
                st.diag(DiagnosticKind::UnclosedTag, cur.start, format!("<{}> is never closed", cur.tag));
                st.close(cur, ev.start, ev.start);
            }
            if st.first_open[r].is_some() {
                st.diag(
                    DiagnosticKind::DuplicateTag,
                    ev.start,
                    format!("<{}> appears more than once", ev.tag),
                );
                suppressed.push(ev.tag);
                cursor = ev.end;
                continue;
            }
            st.first_open[r] = Some(ev.start);
            open = Some(OpenSpan { tag: ev.tag, start: ev.start, content_start: ev.end });
            continue;
        }

        match open.take() {
            Some(cur) if cur.tag == ev.tag => {
                st.close(cur, ev.start, ev.end);
                cursor = ev.end;
            }
            cur => {
                open = cur;
                if let Some(pos) = suppressed.iter().rposition(|t| *t == ev.tag) {
                    suppressed.remove(pos);
                } else if st.closed[r] {
                    st.diag(
                        DiagnosticKind::DuplicateTag,
                        ev.start,
                        format!("</{}> appears more than once", ev.tag),
                    );
                } else {
                    st.missing_reported[r] = true;
                    st.diag(
                        DiagnosticKind::MissingTag,
                        ev.start,
                        format!("</{}> without a matching <{}>", ev.tag, ev.tag),
                    );
                }
                if open.is_none() {
                    cursor = ev.end;
                }
            }
        }
    }

    let len = chars.len();
    if let Some(cur) = open.take() {
        st.diag(DiagnosticKind::UnclosedTag, cur.start, format!("<{}> is never closed", cur.tag));
        st.close(cur, len, len);
    } else if suppressed.is_empty() {
        st.check_stray(&chars, cursor, len);
    }

    for tag in TagName::ORDER {
        let r = tag.rank();
        if st.first_open[r].is_none() && !st.missing_reported[r] {
            st.diag(DiagnosticKind::MissingTag, len, format!("<{tag}> segment is missing"));
        }
    }

    // A tag is out of order when some lower-ranked tag opens after it.
    for tag in TagName::ORDER {
        let Some(at) = st.first_open[tag.rank()] else {
            continue;
        };
        if let Some(later) =
            TagName::ORDER[..tag.rank()].iter().find(|t| st.first_open[t.rank()].is_some_and(|o| o > at))
        {
            st.diag(DiagnosticKind::OutOfOrder, at, format!("<{tag}> must come after <{later}>"));
        }
    }

    let mut pem = None;
    if let Some((from, to)) = st.contents[TagName::Mod.rank()] {
        let raw: String = chars[from..to].iter().collect();
        match raw.trim().parse::<PemLabel>() {
            Ok(label) => pem = Some(label),
            Err(e) => {
                let off = (from..to).find(|&k| !chars[k].is_whitespace()).unwrap_or(from);
                st.diag(DiagnosticKind::UnknownPemValue, off, e.to_string());
            }
        }
    }

    if !st.diagnostics.is_empty() {
        let mut diags = st.diagnostics;
        diags.sort_by_key(|d| d.offset);
        return Err(diags);
    }

    let body = |tag: TagName| -> String {
        let (from, to) = st.contents[tag.rank()].expect("all segments present");
        chars[from..to].iter().collect()
    };
    Ok(SfrTrace {
        pem: pem.expect("mod segment present"),
        visual_text: body(TagName::Visual),
        audio_text: body(TagName::Audio),
        summary_text: body(TagName::Summary),
        answer_text: body(TagName::Answer),
        spans: st.spans.iter().map(|s| s.expect("all spans present")).collect(),
    })
}

/// Structural half of the modality-preference reward: `true` iff the text
/// parses as a trace. Diagnostics are forwarded from [`parse_trace`].
pub fn validate_structure(text: &str) -> (bool, Vec<ParseDiagnostic>) {
    match parse_trace(text) {
        Ok(_) => (true, Vec::new()),
        Err(diags) => (false, diags),
    }
}

/// Canonical serialization, no whitespace between tags.
pub fn render_trace(trace: &SfrTrace) -> String {
    format!(
        "<mod>{}</mod><v>{}</v><a>{}</a><sum>{}</sum><ans>{}</ans>",
        trace.pem, trace.visual_text, trace.audio_text, trace.summary_text, trace.answer_text
    )
}
