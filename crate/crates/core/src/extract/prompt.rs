//! Prompt templates sent to the completion backends.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Summarize,
    Extract,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Summarize => "summarize",
            PromptKind::Extract => "extract",
        }
    }
}

const SUMMARIZE_TEMPLATE: &str = "\
Summarize the epidemiological text below, focusing on any aspects that are relevant to the disease outbreak, place and time of the infectious disease outbreak occurred, and the number of cases and deaths derived.
Do not invent. Write no explanations or notes .
Text: ";

// Item 4 is printed without an item for cases; kept as published.
const EXTRACT_TEMPLATE: &str = "\
From the text below extract the following items:
1 - The name of the disease that caused the outbreak.
2 - The name of the country where this disease outbreak occurred, if present.
3 - The date when this disease outbreak occurred, if present. Show the date in the format YYYY-mm-dd.
4 - The number of deaths caused exclusively by the disease outbreak mentioned in the text, if present.
Format your response as a JSON object with the following keys: disease name, country, date, cases.
If the information is not present, do not invent and use \"None\" as the value.
Text: ";

pub fn build_summarize_prompt(chunk: &str) -> String {
    format!("{SUMMARIZE_TEMPLATE}{chunk}")
}

pub fn build_extraction_prompt(text: &str) -> String {
    format!("{EXTRACT_TEMPLATE}{text}")
}

pub fn build_prompt(kind: PromptKind, text: &str) -> String {
    match kind {
        PromptKind::Summarize => build_summarize_prompt(text),
        PromptKind::Extract => build_extraction_prompt(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summarize_ends_with_text() {
        let p = build_summarize_prompt("X");
        assert!(p.contains("Summarize the epidemiological text below"));
        assert!(p.ends_with("Text: X"));
    }

    #[test]
    fn prompts_differ_only_in_text() {
        let a = build_extraction_prompt("alpha");
        let b = build_extraction_prompt("beta");
        let prefix = |s: &str| s[..s.find("Text:").unwrap()].to_string();
        assert_eq!(prefix(&a), prefix(&b));
        assert!(a.contains("Format your response as a JSON object"));
        assert_eq!(
            build_summarize_prompt("one").strip_suffix("one"),
            build_summarize_prompt("two").strip_suffix("two")
        );
    }
}
