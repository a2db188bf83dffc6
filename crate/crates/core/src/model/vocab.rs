//! Word-level vocabulary for prompt text.

use crate::error::{Error, Result};
use crate::types::{InputType, OutputType, PromptSpec};

/// Markers, the words of every input/output type, then a small query lexicon.
pub const PROMPT_WORDS: &[&str] = &[
    "INPUT_TYPE:",
    "OUTPUT_TYPE:",
    "QUERY:",
    "natural",
    "image",
    "webpage",
    "graphic",
    "design",
    "mobile",
    "user",
    "interface",
    "saliency",
    "heatmap",
    "importance",
    "aesthetics",
    "score",
    "scanpath",
    "searching",
    "search",
    "for",
    "a",
    "the",
    "bright",
    "brightest",
    "dim",
    "blob",
    "spot",
    "left",
    "right",
    "top",
    "bottom",
    "center",
];

pub fn prompt_vocab_size() -> usize {
    PROMPT_WORDS.len()
}

pub fn word_id(word: &str) -> Result<usize> {
    PROMPT_WORDS
        .iter()
        .position(|w| *w == word)
        .ok_or_else(|| Error::UnknownToken(word.to_string()))
}

/// Token ids of a prompt: each marker is one token, type names and the query
/// are split on whitespace; query words are matched case-insensitively.
pub fn tokenize_prompt(spec: &PromptSpec) -> Result<Vec<usize>> {
    let mut ids = vec![word_id("INPUT_TYPE:")?];
    for w in InputType::as_str(&spec.input_type()).split_whitespace() {
        ids.push(word_id(w)?);
    }
    ids.push(word_id("OUTPUT_TYPE:")?);
    for w in OutputType::as_str(&spec.output_type()).split_whitespace() {
        ids.push(word_id(w)?);
    }
    if let Some(q) = spec.query() {
        ids.push(word_id("QUERY:")?);
        for w in q.split_whitespace() {
            ids.push(word_id(&w.to_lowercase())?);
        }
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saliency_prompt_is_six_tokens() {
        let spec = PromptSpec::new(InputType::NaturalImage, OutputType::SaliencyHeatmap);
        assert_eq!(tokenize_prompt(&spec).unwrap().len(), 6);
    }

    #[test]
    fn every_type_is_covered() {
        for i in InputType::ALL {
            for o in OutputType::ALL {
                tokenize_prompt(&PromptSpec::new(i, o)).unwrap();
            }
        }
    }

    #[test]
    fn unknown_query_word_is_rejected() {
        let ok = PromptSpec::with_query(InputType::NaturalImage, OutputType::Scanpath, "Searching a bright blob").unwrap();
        assert_eq!(tokenize_prompt(&ok).unwrap().len(), 1 + 2 + 1 + 1 + 1 + 4);
        let bad = PromptSpec::with_query(InputType::NaturalImage, OutputType::Scanpath, "find the zebra").unwrap();
        assert!(matches!(tokenize_prompt(&bad), Err(Error::UnknownToken(w)) if w == "find"));
    }
}
