//! Request payloads, the instruction text sent to remote models, and parsers
//! for their free-text answers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::client::RequestBody;

/// Input for proposing target-label phrases that still fit the rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePayload {
    pub sentence: String,
    pub phrase_to_modify: String,
    pub pattern: String,
    pub current_label: String,
    /// Soft-match word -> the other words it accepts.
    pub softmatch: BTreeMap<String, Vec<String>>,
    pub target_label: String,
}

/// Input for rewriting one sentence around one candidate phrase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariationPayload {
    pub original_sentence: String,
    pub original_label: String,
    pub target_label: String,
    pub candidate_phrases: Vec<String>,
    pub phrase_to_include: String,
    pub phrase_to_modify: String,
}

/// Input for naming the label a sentence belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgePayload {
    pub sentence: String,
    pub labels: Vec<String>,
}

const PATTERN_PRIMER: &str = "\
Patterns are written in a small rule language.
- Upper-case tags match one token with that part of speech: VERB, PROPN, NOUN, ADJ, ADV, AUX, PRON, NUM.
- [word] matches any inflection of word, e.g. [have] accepts has, had, having.
- (word) matches word or one of the alternatives listed for it under softmatch; nothing else.
- $TYPE matches a whole named entity of that type: $PERSON, $LOCATION, $DATE, $ORG.
- * matches any run of words, including none.
- a+b means b directly follows a; a|b means either a or b.";

const CANDIDATE_TASK: &str = "\
You write short phrases for a text-labeling tool.
Every phrase you return must satisfy the given pattern and must read as being about the target label.
Use only the listed alternatives for soft-match words.
Return the phrases as one comma-separated list in square brackets and nothing else.";

const VARIATION_TASK: &str = "\
You rewrite one sentence so that it belongs to the target label instead of its original label.
Replace the phrase_to_modify span with phrase_to_include, copied word for word.
Change as little else as possible; small edits to neighbouring words are fine if they keep the sentence grammatical.
The result must not hint at the original label.
Answer in exactly three lines:
modified sentence: '<the new sentence>'
reason: '<one short sentence>'
label: <target label>";

const JUDGE_TASK: &str = "\
You label sentences from restaurant reviews.
Pick the single label from the list that best describes what the sentence is about, or none if no label applies.
Answer with one line: label: <label>";

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "\\'"))
}

fn list(items: &[String]) -> String {
    format!("[{}]", items.join(", "))
}

/// System and user messages for a request body.
pub fn render_messages(body: &RequestBody) -> (String, String) {
    match body {
        RequestBody::CandidatePhrases(p) => {
            let soft: Vec<String> = p
                .softmatch
                .iter()
                .map(|(k, v)| format!("{k}:{}", list(v)))
                .collect();
            (
                format!("{CANDIDATE_TASK}\n\n{PATTERN_PRIMER}"),
                format!(
                    "sentence: {}\nphrase to modify: {}\npattern: {}\ncurrent label: {}\nsoftmatch: {}\ntarget label: {}",
                    quote(&p.sentence),
                    quote(&p.phrase_to_modify),
                    quote(&p.pattern),
                    p.current_label,
                    list(&soft),
                    p.target_label
                ),
            )
        }
        RequestBody::GenerateVariation(p) => (
            VARIATION_TASK.to_string(),
            format!(
                "original sentence: {}\noriginal label: {}\ntarget label: {}\ncandidate phrases: {}\nphrase to modify: {}\nphrase to include: {}",
                quote(&p.original_sentence),
                p.original_label,
                p.target_label,
                list(&p.candidate_phrases.iter().map(|c| quote(c)).collect::<Vec<_>>()),
                quote(&p.phrase_to_modify),
                quote(&p.phrase_to_include)
            ),
        ),
        RequestBody::JudgeLabel(p) => (
            JUDGE_TASK.to_string(),
            format!("labels: {}\nsentence: {}", list(&p.labels), quote(&p.sentence)),
        ),
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['\'', '"', '`'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

/// Phrases from a comma-separated answer, optionally wrapped in brackets.
pub fn parse_phrase_list(text: &str) -> Vec<String> {
    let body = text.trim();
    let body = body.strip_prefix('[').unwrap_or(body);
    let body = body.strip_suffix(']').unwrap_or(body);
    body.split([',', '\n'])
        .map(|p| unquote(p).trim().to_string())
        .filter(|p| !p.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedVariation {
    pub sentence: String,
    pub reason: String,
    pub label: Option<String>,
}

fn field<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|line| {
        let line = line.trim().trim_start_matches(['#', '-', '*']).trim();
        let (k, v) = line.split_once(':')?;
        k.trim().eq_ignore_ascii_case(key).then_some(v)
    })
}

pub fn parse_variation(text: &str) -> Option<ParsedVariation> {
    let sentence = unquote(field(text, "modified sentence")?).replace("\\'", "'");
    if sentence.trim().is_empty() {
        return None;
    }
    Some(ParsedVariation {
        sentence,
        reason: field(text, "reason")
            .map(|r| unquote(r).replace("\\'", "'"))
            .unwrap_or_default(),
        label: field(text, "label").map(|l| unquote(l).trim().to_lowercase()),
    })
}

/// The label named in a judge answer; `None` for "none" or empty answers.
pub fn parse_label(text: &str) -> Option<String> {
    let raw = field(text, "label").unwrap_or(text);
    let label = unquote(raw).trim().trim_end_matches('.').to_lowercase();
    (!label.is_empty() && label != "none").then_some(label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phrase_list_forms() {
        assert_eq!(
            parse_phrase_list("[purchase options, pricey service, cheap help]"),
            ["purchase options", "pricey service", "cheap help"]
        );
        assert_eq!(parse_phrase_list("'a', \"b\" ,c"), ["a", "b", "c"]);
        assert!(parse_phrase_list("[]").is_empty());
    }

    #[test]
    fn variation_answer() {
        let v = parse_variation(
            "modified sentence: 'The wings were cheap for the taste.'\nreason: 'It is about cost.'\nlabel: price",
        )
        .unwrap();
        assert_eq!(v.sentence, "The wings were cheap for the taste.");
        assert_eq!(v.reason, "It is about cost.");
        assert_eq!(v.label.as_deref(), Some("price"));
        assert!(parse_variation("no structure here").is_none());
        let hashed = parse_variation("# modified sentence: 'x y'\n# label: service").unwrap();
        assert_eq!(hashed.sentence, "x y");
    }

    #[test]
    fn judge_answer() {
        assert_eq!(parse_label("label: Service").as_deref(), Some("service"));
        assert_eq!(parse_label("price").as_deref(), Some("price"));
        assert_eq!(parse_label("label: none"), None);
        assert_eq!(parse_label(""), None);
    }

    #[test]
    fn candidate_prompt_lists_fields() {
        let body = RequestBody::CandidatePhrases(CandidatePayload {
            sentence: "Too many other places to shop with better prices .".into(),
            phrase_to_modify: "prices .".into(),
            pattern: "(price)+*".into(),
            current_label: "price".into(),
            softmatch: [(
                "price".to_string(),
                vec!["purchase".into(), "pricey".into(), "cheap".into(), "cost".into(), "pricing".into()],
            )]
            .into(),
            target_label: "service".into(),
        });
        let (_, user) = render_messages(&body);
        assert!(user.contains("phrase to modify: 'prices .'"));
        assert!(user.contains("softmatch: [price:[purchase, pricey, cheap, cost, pricing]]"));
        assert!(user.ends_with("target label: service"));
    }
}
