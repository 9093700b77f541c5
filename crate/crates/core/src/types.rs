//! Shared domain vocabulary.
//!
//! Everything here is an immutable value object: construct, validate, share
//! freely across threads.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a video's frames come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VideoSource {
    /// A container file decoded by an external decoder process.
    VideoFile { path: PathBuf },
    /// A directory of pre-extracted still images, enumerated in strict
    /// lexicographic filename order.
    FrameDir { path: PathBuf },
}

impl VideoSource {
    pub fn path(&self) -> &PathBuf {
        match self {
            VideoSource::VideoFile { path } | VideoSource::FrameDir { path } => path,
        }
    }
}

/// A reference to one input video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRef {
    pub video_id: String,
    pub source: VideoSource,
    /// Clip span in seconds, for benchmarks that ask about a window of a
    /// longer video. Honored at sampling time when a frame rate is configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_s: Option<f64>,
    /// Known after probing; `>= 1` once set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_frames: Option<usize>,
}

impl VideoRef {
    pub fn new(video_id: impl Into<String>, source: VideoSource) -> Self {
        Self {
            video_id: video_id.into(),
            source,
            start_s: None,
            end_s: None,
            total_frames: None,
        }
    }
}

/// One sampled frame, re-encoded for transport.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    /// Position within the sampled set (0-based, dense).
    pub index: usize,
    /// Position within the original frame sequence.
    pub source_index: usize,
    /// Encoded still image bytes, never empty.
    pub image_bytes: Vec<u8>,
}

/// One multiple-choice question bound to a video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QARecord {
    pub record_id: String,
    pub video: VideoRef,
    pub question: String,
    /// Ordered option texts; `2 <= len <= 26`.
    pub options: Vec<String>,
    /// Gold answer index when labeled; absent for pure inference runs.
    pub gold_index: Option<usize>,
    pub question_type: Option<String>,
    /// Source-benchmark tag.
    pub dataset: String,
}

impl QARecord {
    /// Validates the record invariants, returning the offending condition.
    pub fn validate(&self) -> Result<()> {
        if self.record_id.is_empty() {
            return Err(Error::Validation("record_id is empty".into()));
        }
        if self.question.trim().is_empty() {
            return Err(Error::Validation(format!(
                "record {}: question is empty",
                self.record_id
            )));
        }
        let m = self.options.len();
        if !(2..=MAX_OPTIONS).contains(&m) {
            return Err(Error::Validation(format!(
                "record {}: option count {} outside 2..=26",
                self.record_id, m
            )));
        }
        if let Some(g) = self.gold_index {
            if g >= m {
                return Err(Error::Validation(format!(
                    "record {}: gold_index {} >= option count {}",
                    self.record_id, g, m
                )));
            }
        }
        if self.video.video_id.is_empty() {
            return Err(Error::Validation(format!(
                "record {}: video_id is empty",
                self.record_id
            )));
        }
        Ok(())
    }
}

/// One question-dependent caption for one sampled frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    /// Index into the sampled frame list (matches [`Frame::index`]).
    pub frame_index: usize,
    /// Caption text with leading/trailing whitespace stripped.
    pub text: String,
    /// Set when the decode hit the token cap.
    pub truncated: bool,
}

impl Caption {
    pub fn new(frame_index: usize, text: &str, truncated: bool) -> Self {
        Self {
            frame_index,
            text: text.trim().to_string(),
            truncated,
        }
    }
}

/// Ordered captions for one (video, question) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionSet {
    /// Sorted strictly ascending by `frame_index`, dense from 0.
    pub captions: Vec<Caption>,
    pub video_id: String,
    /// Digest of the question the captions were conditioned on.
    pub question_hash: String,
}

impl CaptionSet {
    /// Builds a set, checking the ordering invariant.
    pub fn new(
        captions: Vec<Caption>,
        video_id: impl Into<String>,
        question: &str,
    ) -> Result<Self> {
        for (i, c) in captions.iter().enumerate() {
            if c.frame_index != i {
                return Err(Error::Validation(format!(
                    "caption at position {} has frame_index {}",
                    i, c.frame_index
                )));
            }
        }
        Ok(Self {
            captions,
            video_id: video_id.into(),
            question_hash: crate::cache::hex_digest(question.as_bytes()),
        })
    }

    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }
}

/// Decoding parameters forwarded to an inference service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub max_new_tokens: u32,
    /// Nucleus sampling mass in `(0, 1]`; absent means greedy decode.
    pub top_p: Option<f64>,
    pub seed: Option<u64>,
}

impl DecodeParams {
    /// Caption decode defaults: 30 tokens, nucleus sampling at 0.7.
    pub fn caption_default() -> Self {
        Self {
            max_new_tokens: 30,
            top_p: Some(0.7),
            seed: None,
        }
    }

    /// Reasoner decode defaults: greedy, sized for a single option letter.
    pub fn reason_default() -> Self {
        Self {
            max_new_tokens: 10,
            top_p: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_new_tokens < 1 {
            return Err(Error::Validation("max_new_tokens must be >= 1".into()));
        }
        if let Some(p) = self.top_p {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Validation(format!("top_p {} outside (0, 1]", p)));
            }
        }
        Ok(())
    }
}

/// Parsed answer plus raw model output and full provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub record_id: String,
    /// Parsed 0-based option index; `None` means the output matched no
    /// answer-extraction rule (scored as incorrect, never dropped).
    pub answer_index: Option<usize>,
    pub raw_text: String,
    pub letter: Option<String>,
    pub caption_template_id: String,
    pub qa_template_id: String,
    pub captioner_model_id: String,
    pub reasoner_model_id: String,
    pub n_frames: usize,
    pub failed: bool,
}

/// Most options a record may carry: one uppercase Latin letter each.
pub const MAX_OPTIONS: usize = 26;

/// Maps a 0-based option index to its uppercase letter.
pub fn letter_for_index(i: usize) -> Result<char> {
    if i >= MAX_OPTIONS {
        return Err(Error::OutOfRange(i));
    }
    Ok((b'A' + i as u8) as char)
}

/// Case-insensitive inverse of [`letter_for_index`], restricted to the first
/// `m` letters.
pub fn index_for_letter(ch: char, m: usize) -> Result<usize> {
    let upper = ch.to_ascii_uppercase();
    if upper.is_ascii_uppercase() {
        let idx = (upper as u8 - b'A') as usize;
        if idx < m.min(MAX_OPTIONS) {
            return Ok(idx);
        }
    }
    Err(Error::NotAnOption { ch, m })
}

/// Renders the letters segment of a QA prompt: `(A,B,...,letter_m)`.
pub fn letters_segment(m: usize) -> Result<String> {
    if m == 0 {
        return Err(Error::Validation("letters segment for zero options".into()));
    }
    let mut out = String::from("(");
    for i in 0..m {
        if i > 0 {
            out.push(',');
        }
        out.push(letter_for_index(i)?);
    }
    out.push(')');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn letter_for_index_examples() {
        assert_eq!(letter_for_index(0).unwrap(), 'A');
        assert_eq!(letter_for_index(2).unwrap(), 'C');
        assert_eq!(letter_for_index(25).unwrap(), 'Z');
        assert!(matches!(letter_for_index(26), Err(Error::OutOfRange(26))));
    }

    #[test]
    fn index_for_letter_examples() {
        assert_eq!(index_for_letter('b', 3).unwrap(), 1);
        assert!(matches!(
            index_for_letter('D', 3),
            Err(Error::NotAnOption { ch: 'D', m: 3 })
        ));
        assert_eq!(index_for_letter('A', 5).unwrap(), 0);
    }

    #[test]
    fn index_for_letter_rejects_non_letters() {
        assert!(index_for_letter('3', 5).is_err());
        assert!(index_for_letter('?', 5).is_err());
    }

    #[test]
    fn letters_segment_examples() {
        assert_eq!(letters_segment(3).unwrap(), "(A,B,C)");
        assert_eq!(letters_segment(5).unwrap(), "(A,B,C,D,E)");
        assert!(letters_segment(27).is_err());
    }

    #[test]
    fn caption_set_rejects_gaps() {
        let caps = vec![Caption::new(0, "a", false), Caption::new(2, "b", false)];
        assert!(CaptionSet::new(caps, "v", "q").is_err());
    }

    #[test]
    fn caption_trims_whitespace() {
        let c = Caption::new(0, "  a man in white \n", false);
        assert_eq!(c.text, "a man in white");
    }

    #[test]
    fn record_validation_catches_bad_gold() {
        let mut rec = sample_record();
        rec.gold_index = Some(3);
        assert!(rec.validate().is_err());
        rec.gold_index = Some(2);
        assert!(rec.validate().is_ok());
    }

    fn sample_record() -> QARecord {
        QARecord {
            record_id: "r1".into(),
            video: VideoRef::new(
                "v1",
                VideoSource::FrameDir {
                    path: "frames/v1".into(),
                },
            ),
            question: "What happens?".into(),
            options: vec!["a".into(), "b".into(), "c".into()],
            gold_index: Some(0),
            question_type: None,
            dataset: "fixture".into(),
        }
    }

    proptest! {
        #[test]
        fn letter_round_trip(i in 0usize..26, extra in 0usize..5) {
            let m = (i + 1 + extra).min(26);
            let ch = letter_for_index(i).unwrap();
            prop_assert_eq!(index_for_letter(ch, m).unwrap(), i);
            // lowercase round-trips too
            prop_assert_eq!(index_for_letter(ch.to_ascii_lowercase(), m).unwrap(), i);
        }

        #[test]
        fn letters_beyond_m_rejected(m in 2usize..26, beyond in 0usize..5) {
            let idx = m + beyond;
            if idx < 26 {
                let ch = letter_for_index(idx).unwrap();
                prop_assert!(index_for_letter(ch, m).is_err());
            }
        }
    }
}
