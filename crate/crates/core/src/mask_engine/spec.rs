//! Declarative layout descriptions loaded from TOML.
//!
//! Two forms are accepted. Explicit ranges:
//!
//! ```toml
//! length = 6
//! video_input = [[0, 0]]
//! audio_input = [[1, 1]]
//! visual_reasoning = [[2, 2]]
//! visual_span = [[2, 2]]
//! audio_reasoning = [[3, 3]]
//! ```
//!
//! or a token sequence plus a marker table, resolved by
//! [`locate_layout`](super::locate::locate_layout):
//!
//! ```toml
//! tokens = [900, 1, 901, 902, 2, 903, 910, 3, 911, 912, 4, 913]
//! [markers]
//! video_start = 900
//! # ...
//! ```
//!
//! Ranges are inclusive `[first, last]` pairs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layout::{LayoutRoles, TokenLayout};
use super::locate::{locate_layout, MarkerTable};
use super::MaskError;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub video_input: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audio_input: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub visual_reasoning: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audio_reasoning: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub visual_span: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audio_span: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub summary: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markers: Option<MarkerTable>,
}

fn expand(ranges: &[[usize; 2]], role: &str) -> Result<Vec<usize>, MaskError> {
    let mut out = Vec::new();
    for &[first, last] in ranges {
        if last < first {
            return Err(MaskError::Spec(format!("{role}: range [{first}, {last}] is reversed")));
        }
        out.extend(first..=last);
    }
    Ok(out)
}

impl LayoutSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, MaskError> {
        toml::from_str(text).map_err(|e| MaskError::Spec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, MaskError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| MaskError::Spec(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    fn has_ranges(&self) -> bool {
        [
            &self.video_input,
            &self.audio_input,
            &self.visual_reasoning,
            &self.audio_reasoning,
            &self.visual_span,
            &self.audio_span,
            &self.summary,
        ]
        .iter()
        .any(|r| !r.is_empty())
    }

    pub fn resolve(&self) -> Result<TokenLayout, MaskError> {
        if let Some(tokens) = &self.tokens {
            if self.has_ranges() {
                return Err(MaskError::Spec("give either role ranges or tokens + markers, not both".into()));
            }
            let markers = self
                .markers
                .as_ref()
                .ok_or_else(|| MaskError::Spec("tokens given without [markers]".into()))?;
            if self.length.is_some_and(|l| l != tokens.len()) {
                return Err(MaskError::Spec(format!(
                    "length {} does not match {} tokens",
                    self.length.unwrap_or_default(),
                    tokens.len()
                )));
            }
            return Ok(locate_layout(tokens, markers)?);
        }
        let length = self.length.ok_or_else(|| MaskError::Spec("missing `length`".into()))?;
        let roles = LayoutRoles {
            video_input: expand(&self.video_input, "video_input")?,
            audio_input: expand(&self.audio_input, "audio_input")?,
            visual_reasoning: expand(&self.visual_reasoning, "visual_reasoning")?,
            audio_reasoning: expand(&self.audio_reasoning, "audio_reasoning")?,
            visual_span: expand(&self.visual_span, "visual_span")?,
            audio_span: expand(&self.audio_span, "audio_span")?,
            summary: expand(&self.summary, "summary")?,
        };
        Ok(TokenLayout::new(length, roles)?)
    }
}

#[cfg(test)]
mod tests {
    use super::super::layout::{LayoutError, Role};
    use super::*;

    #[test]
    fn explicit_ranges() {
        let spec = LayoutSpec::from_toml_str(
            r#"
            length = 10
            video_input = [[0, 1]]
            audio_input = [[2, 3]]
            visual_span = [[4, 6]]
            visual_reasoning = [[5, 5]]
            audio_reasoning = [[8, 8]]
            audio_span = [[7, 9]]
            "#,
        )
        .unwrap();
        let l = spec.resolve().unwrap();
        assert_eq!(l.positions(Role::VideoInput), &[0, 1]);
        assert_eq!(l.positions(Role::AudioSpan), &[7, 8, 9]);
    }

    #[test]
    fn token_form() {
        let spec = LayoutSpec::from_toml_str(
            r#"
            tokens = [900, 1, 901, 902, 2, 903, 910, 3, 911, 912, 4, 913]
            [markers]
            video_start = 900
            video_end = 901
            audio_start = 902
            audio_end = 903
            v_open = 910
            v_close = 911
            a_open = 912
            a_close = 913
            "#,
        )
        .unwrap();
        let l = spec.resolve().unwrap();
        assert_eq!(l.len(), 12);
        assert_eq!(l.positions(Role::AudioReasoning), &[10]);
    }

    #[test]
    fn invalid_layout_names_invariant() {
        let spec = LayoutSpec::from_toml_str(
            "length = 4\nvideo_input = [[2, 2]]\nvisual_reasoning = [[1, 1]]\nvisual_span = [[1, 1]]\n",
        )
        .unwrap();
        let err = spec.resolve().unwrap_err();
        assert!(matches!(err, MaskError::Layout(LayoutError::InputAfterReasoning { .. })));
    }

    #[test]
    fn rejects_unknown_keys_and_reversed_ranges() {
        assert!(LayoutSpec::from_toml_str("length = 3\nbogus = 1\n").is_err());
        let spec = LayoutSpec::from_toml_str("length = 3\nvideo_input = [[2, 1]]\n").unwrap();
        assert!(spec.resolve().is_err());
        assert!(LayoutSpec::default().resolve().is_err());
    }
}
