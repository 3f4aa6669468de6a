use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Position roles tracked by a [`TokenLayout`].
///
/// The first five drive the mask rules. `AudioSpan` (the a-span including its
/// boundary tags) and `Summary` (inner sum-span tokens) are carried for
/// attention-allocation reports and never block anything.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    VideoInput,
    AudioInput,
    VisualReasoning,
    AudioReasoning,
    VisualSpan,
    AudioSpan,
    Summary,
}

impl Role {
    pub const ALL: [Role; 7] = [
        Role::VideoInput,
        Role::AudioInput,
        Role::VisualReasoning,
        Role::AudioReasoning,
        Role::VisualSpan,
        Role::AudioSpan,
        Role::Summary,
    ];

    pub(crate) fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::VideoInput => "video_input",
            Role::AudioInput => "audio_input",
            Role::VisualReasoning => "visual_reasoning",
            Role::AudioReasoning => "audio_reasoning",
            Role::VisualSpan => "visual_span",
            Role::AudioSpan => "audio_span",
            Role::Summary => "summary",
        }
    }

    fn is_input(self) -> bool {
        matches!(self, Role::VideoInput | Role::AudioInput)
    }

    fn is_reasoning(self) -> bool {
        matches!(self, Role::VisualReasoning | Role::AudioReasoning | Role::VisualSpan | Role::AudioSpan)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("layout length must be at least 1")]
    ZeroLength,
    #[error("{role} index {index} is outside [0, {length})")]
    IndexOutOfRange { role: Role, index: usize, length: usize },
    #[error("{first} and {second} must be disjoint (both contain {index})")]
    Overlap { first: Role, second: Role, index: usize },
    #[error("{inner} must be a subset of {outer} ({index} is not in {outer})")]
    NotSubset { inner: Role, outer: Role, index: usize },
    #[error("input position {input_index} ({input}) does not precede reasoning position {reasoning_index} ({reasoning})")]
    InputAfterReasoning { input: Role, input_index: usize, reasoning: Role, reasoning_index: usize },
    #[error("marker {marker} is missing its counterpart")]
    MissingTag { marker: &'static str },
    #[error("marker {marker} occurs more than once (again at {position})")]
    DuplicateTag { marker: &'static str, position: usize },
    #[error("{inner} span is nested inside the {outer} span")]
    NestedTag { inner: &'static str, outer: &'static str },
    #[error("{first} and {second} spans cross")]
    CrossingTags { first: &'static str, second: &'static str },
    #[error("{tag} at {position} precedes the modality input markers")]
    ReasoningBeforeInput { tag: &'static str, position: usize },
}

/// Plain per-role position lists, before validation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutRoles {
    pub video_input: Vec<usize>,
    pub audio_input: Vec<usize>,
    pub visual_reasoning: Vec<usize>,
    pub audio_reasoning: Vec<usize>,
    pub visual_span: Vec<usize>,
    pub audio_span: Vec<usize>,
    pub summary: Vec<usize>,
}

impl LayoutRoles {
    pub fn get(&self, role: Role) -> &[usize] {
        match role {
            Role::VideoInput => &self.video_input,
            Role::AudioInput => &self.audio_input,
            Role::VisualReasoning => &self.visual_reasoning,
            Role::AudioReasoning => &self.audio_reasoning,
            Role::VisualSpan => &self.visual_span,
            Role::AudioSpan => &self.audio_span,
            Role::Summary => &self.summary,
        }
    }

    fn get_mut(&mut self, role: Role) -> &mut Vec<usize> {
        match role {
            Role::VideoInput => &mut self.video_input,
            Role::AudioInput => &mut self.audio_input,
            Role::VisualReasoning => &mut self.visual_reasoning,
            Role::AudioReasoning => &mut self.audio_reasoning,
            Role::VisualSpan => &mut self.visual_span,
            Role::AudioSpan => &mut self.audio_span,
            Role::Summary => &mut self.summary,
        }
    }
}

/// Validated position sets over a token sequence of length `L`.
///
/// Invariants:
/// - every index is in `[0, L)`
/// - video and audio inputs are disjoint
/// - visual reasoning ⊆ visual span, audio reasoning ⊆ audio span
/// - the visual span is disjoint from the audio reasoning and audio span
/// - every input position precedes every reasoning position
///
/// The audio span is widened to include the audio reasoning positions, so a
/// layout built without explicit a-span boundaries is still valid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenLayout {
    length: usize,
    roles: LayoutRoles,
    flags: Vec<u8>,
}

impl TokenLayout {
    pub fn new(length: usize, mut roles: LayoutRoles) -> Result<Self, LayoutError> {
        if length == 0 {
            return Err(LayoutError::ZeroLength);
        }
        let audio_reasoning = roles.audio_reasoning.clone();
        roles.audio_span.extend(audio_reasoning);
        for role in Role::ALL {
            let set = roles.get_mut(role);
            set.sort_unstable();
            set.dedup();
            if let Some(&index) = set.iter().find(|&&i| i >= length) {
                return Err(LayoutError::IndexOutOfRange { role, index, length });
            }
        }

        let mut flags = vec![0u8; length];
        for role in Role::ALL {
            for &i in roles.get(role) {
                flags[i] |= role.bit();
            }
        }
        let has = |i: usize, r: Role| flags[i] & r.bit() != 0;

        for (first, second) in [
            (Role::VideoInput, Role::AudioInput),
            (Role::VisualSpan, Role::AudioReasoning),
            (Role::VisualSpan, Role::AudioSpan),
        ] {
            if let Some(&index) = roles.get(first).iter().find(|&&i| has(i, second)) {
                return Err(LayoutError::Overlap { first, second, index });
            }
        }
        for (inner, outer) in
            [(Role::VisualReasoning, Role::VisualSpan), (Role::AudioReasoning, Role::AudioSpan)]
        {
            if let Some(&index) = roles.get(inner).iter().find(|&&i| !has(i, outer)) {
                return Err(LayoutError::NotSubset { inner, outer, index });
            }
        }

        let last_input = Role::ALL
            .into_iter()
            .filter(|r| r.is_input())
            .filter_map(|r| roles.get(r).last().map(|&i| (r, i)))
            .max_by_key(|&(_, i)| i);
        let first_reasoning = Role::ALL
            .into_iter()
            .filter(|r| r.is_reasoning())
            .filter_map(|r| roles.get(r).first().map(|&i| (r, i)))
            .min_by_key(|&(_, i)| i);
        if let (Some((input, input_index)), Some((reasoning, reasoning_index))) =
            (last_input, first_reasoning)
        {
            if input_index >= reasoning_index {
                return Err(LayoutError::InputAfterReasoning {
                    input,
                    input_index,
                    reasoning,
                    reasoning_index,
                });
            }
        }

        Ok(TokenLayout { length, roles, flags })
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    /// Sorted, deduplicated positions of one role.
    pub fn positions(&self, role: Role) -> &[usize] {
        self.roles.get(role)
    }

    pub fn roles(&self) -> &LayoutRoles {
        &self.roles
    }

    pub fn has_role(&self, index: usize, role: Role) -> bool {
        self.flags.get(index).is_some_and(|f| f & role.bit() != 0)
    }

    pub(crate) fn flags(&self) -> &[u8] {
        &self.flags
    }

    /// Returns a copy with `positions` removed from `role`.
    pub fn without(&self, role: Role, positions: &[usize]) -> Result<TokenLayout, LayoutError> {
        let mut roles = self.roles.clone();
        roles.get_mut(role).retain(|i| !positions.contains(i));
        if role == Role::AudioSpan {
            // keep the audio reasoning ⊆ audio span invariant satisfiable
            roles.audio_reasoning.retain(|i| !positions.contains(i));
        }
        TokenLayout::new(self.length, roles)
    }
}
