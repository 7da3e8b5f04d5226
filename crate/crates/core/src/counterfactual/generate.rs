use std::collections::BTreeSet;

use crate::annotation::{
    annotate_text, detokenize, tokenize, AnnotatedSentence, LabelKey, SynonymLexicon,
    TaggerResources,
};
use crate::diff::word_diff;
use crate::par;
use crate::pattern::{match_sentence, matches, MatchConfig, MatchSpan, Pattern};
use crate::synthesis::LabelModel;

use super::client::{CompletionClient, CompletionRequest, RequestBody, TranscriptEntry};
use super::prompt::{parse_label, parse_phrase_list, parse_variation, CandidatePayload, JudgePayload, VariationPayload};
use super::{CandidatePhrase, CfConfig, CfError, CfStatus, CounterfactualRecord};

/// Everything the generator needs besides the sentences themselves.
#[derive(Clone, Copy)]
pub struct CfContext<'a> {
    pub client: &'a dyn CompletionClient,
    pub lexicon: &'a SynonymLexicon,
    pub tagger: &'a TaggerResources,
    /// Full label set, in display order.
    pub labels: &'a [LabelKey],
    pub config: &'a CfConfig,
}

/// One sentence to vary away from `original_label`. Labels in `exclude`
/// (typically the sentence's other labels) are not used as targets.
#[derive(Debug, Clone)]
pub struct CfJob<'a> {
    pub sentence: &'a AnnotatedSentence,
    pub original_label: LabelKey,
    pub exclude: BTreeSet<LabelKey>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variation {
    pub text: String,
    pub phrase: CandidatePhrase,
    pub reason: String,
}

/// Output of a batch: records in (sentence, target) order plus the full
/// client transcript and any per-item problems.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CfBatch {
    pub records: Vec<CounterfactualRecord>,
    pub transcript: Vec<TranscriptEntry>,
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct Log {
    entries: Vec<TranscriptEntry>,
    warnings: Vec<String>,
}

/// Sends `body`, retrying failed calls up to the retry budget. Attempt
/// numbers start at `first_attempt`; returns the text and the next unused
/// attempt number.
fn call(ctx: &CfContext<'_>, body: RequestBody, first_attempt: u32, log: &mut Log) -> (Option<String>, u32) {
    let mut attempt = first_attempt;
    for _ in 0..=ctx.config.retry_budget {
        let request = CompletionRequest {
            seed: ctx.config.seed,
            attempt,
            body: body.clone(),
        };
        attempt += 1;
        match ctx.client.complete(&request) {
            Ok(resp) => {
                let text = resp.text.clone();
                log.entries.push(TranscriptEntry {
                    request,
                    response: Some(resp),
                    error: None,
                });
                return (Some(text), attempt);
            }
            Err(err) => log.entries.push(TranscriptEntry {
                request,
                response: None,
                error: Some(err),
            }),
        }
    }
    log.warnings.push(format!(
        "client gave up on a {:?} request after {} attempts",
        body.task(),
        ctx.config.retry_budget + 1
    ));
    (None, attempt)
}

fn normalized_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.to_lowercase()).collect()
}

/// True when the phrase's tokens occur contiguously in the text, comparing
/// case-insensitively.
pub fn contains_phrase(text: &str, phrase: &str) -> bool {
    let hay = normalized_tokens(text);
    let needle = normalized_tokens(phrase);
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// The best rule of `label`'s model that matches `d` (highest f1, then
/// shortest canonical text, then alphabetical) and its first match span.
pub fn get_symbolic_pattern(
    d: &AnnotatedSentence,
    label: &LabelKey,
    models: &[LabelModel],
    lexicon: &SynonymLexicon,
) -> Result<(Pattern, MatchSpan, usize), CfError> {
    let no_rule = || CfError::NoRule {
        sentence: d.id.clone(),
        label: label.clone(),
    };
    let model = models.iter().find(|m| &m.label == label).ok_or_else(no_rule)?;
    let mut rules: Vec<(&Pattern, f64, String)> = model
        .patterns
        .iter()
        .map(|p| (&p.scored.pattern, p.scored.f1, p.scored.pattern.canonical()))
        .collect();
    rules.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(a.2.len().cmp(&b.2.len()))
            .then_with(|| a.2.cmp(&b.2))
    });
    let cfg = MatchConfig::capped(model.wildcard_cap);
    rules
        .into_iter()
        .find_map(|(p, _, _)| {
            match_sentence(p, d, lexicon, &cfg)
                .into_iter()
                .next()
                .map(|span| (p.clone(), span, model.wildcard_cap))
        })
        .ok_or_else(no_rule)
}

fn span_text(d: &AnnotatedSentence, span: &MatchSpan) -> String {
    detokenize(&d.tokens[span.range()].iter().map(|t| t.text.as_str()).collect::<Vec<_>>())
}

/// Asks for phrases about `target` that fit `pattern`, then keeps only the
/// ones the local matcher accepts. Duplicates (by normalized tokens) are
/// dropped.
#[allow(clippy::too_many_arguments)]
fn candidate_phrases(
    ctx: &CfContext<'_>,
    d: &AnnotatedSentence,
    pattern: &Pattern,
    span: &MatchSpan,
    cap: usize,
    original: &LabelKey,
    target: &LabelKey,
    log: &mut Log,
) -> Result<Vec<CandidatePhrase>, CfError> {
    if original == target {
        return Err(CfError::SameLabel(original.clone()));
    }
    let softmatch = pattern
        .soft_words()
        .into_iter()
        .map(|w| (w.to_string(), ctx.lexicon.expansions(w)))
        .collect();
    let body = RequestBody::CandidatePhrases(CandidatePayload {
        sentence: d.raw_text.clone(),
        phrase_to_modify: span_text(d, span),
        pattern: pattern.canonical(),
        current_label: original.to_string(),
        softmatch,
        target_label: target.to_string(),
    });
    let (text, _) = call(ctx, body, 0, log);
    let mut seen = BTreeSet::new();
    let cfg = MatchConfig::capped(cap);
    Ok(parse_phrase_list(&text.unwrap_or_default())
        .into_iter()
        .filter(|p| seen.insert(normalized_tokens(p)))
        .filter_map(|p| {
            let s = annotate_text("phrase", &p, ctx.tagger).ok()?;
            matches(pattern, &s, ctx.lexicon, &cfg).then_some(CandidatePhrase {
                text: p,
                target_label: target.clone(),
                satisfies_pattern: true,
            })
        })
        .collect())
}

/// Public form of the candidate step; appends its client traffic to
/// `transcript`.
#[allow(clippy::too_many_arguments)]
pub fn generate_candidate_phrases(
    ctx: &CfContext<'_>,
    d: &AnnotatedSentence,
    pattern: &Pattern,
    span: &MatchSpan,
    cap: usize,
    original: &LabelKey,
    target: &LabelKey,
    transcript: &mut Vec<TranscriptEntry>,
) -> Result<Vec<CandidatePhrase>, CfError> {
    let mut log = Log::default();
    let out = candidate_phrases(ctx, d, pattern, span, cap, original, target, &mut log);
    transcript.extend(log.entries);
    out
}

#[allow(clippy::too_many_arguments)]
fn variations(
    ctx: &CfContext<'_>,
    d: &AnnotatedSentence,
    span: &MatchSpan,
    phrases: &[CandidatePhrase],
    original: &LabelKey,
    target: &LabelKey,
    log: &mut Log,
) -> Result<Vec<Variation>, CfError> {
    if phrases.is_empty() {
        return Err(CfError::NoPhrases);
    }
    let pool: Vec<String> = phrases.iter().map(|p| p.text.clone()).collect();
    let mut out = Vec::new();
    for phrase in phrases.iter().take(ctx.config.variations_per_label) {
        let body = RequestBody::GenerateVariation(VariationPayload {
            original_sentence: d.raw_text.clone(),
            original_label: original.to_string(),
            target_label: target.to_string(),
            candidate_phrases: pool.clone(),
            phrase_to_include: phrase.text.clone(),
            phrase_to_modify: span_text(d, span),
        });
        let mut attempt = 0;
        // One retry when the answer leaves the phrase out.
        for _ in 0..2 {
            let (text, next) = call(ctx, body.clone(), attempt, log);
            attempt = next;
            let Some(text) = text else { break };
            match parse_variation(&text) {
                Some(v) if contains_phrase(&v.sentence, &phrase.text) => {
                    out.push(Variation {
                        text: v.sentence,
                        phrase: phrase.clone(),
                        reason: v.reason,
                    });
                    break;
                }
                _ => log.warnings.push(format!(
                    "variation of `{}` toward {target} left out `{}`",
                    d.id, phrase.text
                )),
            }
        }
    }
    Ok(out)
}

/// Rewrites `d` around each of the first few phrases; answers that do not
/// contain their phrase are retried once and then dropped.
pub fn generate_variations(
    ctx: &CfContext<'_>,
    d: &AnnotatedSentence,
    span: &MatchSpan,
    phrases: &[CandidatePhrase],
    original: &LabelKey,
    target: &LabelKey,
    transcript: &mut Vec<TranscriptEntry>,
) -> Result<Vec<Variation>, CfError> {
    let mut log = Log::default();
    let out = variations(ctx, d, span, phrases, original, target, &mut log);
    transcript.extend(log.entries);
    out
}

fn judge(ctx: &CfContext<'_>, text: &str, log: &mut Log) -> Option<LabelKey> {
    let body = RequestBody::JudgeLabel(JudgePayload {
        sentence: text.to_string(),
        labels: ctx.labels.iter().map(ToString::to_string).collect(),
    });
    let (answer, _) = call(ctx, body, 0, log);
    parse_label(&answer?).map(LabelKey::new)
}

struct Pair<'a> {
    job: &'a CfJob<'a>,
    pattern: Pattern,
    span: MatchSpan,
    cap: usize,
    target: LabelKey,
}

fn run_pair(ctx: &CfContext<'_>, pair: &Pair<'_>) -> (Vec<CounterfactualRecord>, Log) {
    let mut log = Log::default();
    let d = pair.job.sentence;
    let original = &pair.job.original_label;
    let target = &pair.target;
    let phrases = match candidate_phrases(ctx, d, &pair.pattern, &pair.span, pair.cap, original, target, &mut log) {
        Ok(p) if !p.is_empty() => p,
        Ok(_) => {
            log.warnings.push(format!("no usable phrases for `{}` toward {target}", d.id));
            return (Vec::new(), log);
        }
        Err(e) => {
            log.warnings.push(e.to_string());
            return (Vec::new(), log);
        }
    };
    let vars = variations(ctx, d, &pair.span, &phrases, original, target, &mut log).unwrap_or_default();
    let cfg = MatchConfig::capped(pair.cap);
    let mut records = Vec::new();
    for v in vars {
        if records.len() >= ctx.config.max_per_target {
            break;
        }
        let id = format!("{}~{}~{}~{}", d.id, original, target, records.len());
        let Ok(cf) = annotate_text(&id, &v.text, ctx.tagger) else {
            log.warnings.push(format!("variation of `{}` could not be annotated", d.id));
            continue;
        };
        let Some(matched_span) = match_sentence(&pair.pattern, &cf, ctx.lexicon, &cfg).into_iter().next() else {
            log.warnings.push(format!("`{}` no longer matches {}", v.text, pair.pattern));
            continue;
        };
        let judged = judge(ctx, &v.text, &mut log);
        if judged.as_ref() != Some(target) || target == original {
            log.warnings.push(format!(
                "`{}` judged {} rather than {target}",
                v.text,
                judged.as_ref().map_or("none", LabelKey::as_str)
            ));
            continue;
        }
        let edit_script = word_diff(&d.token_texts(), &cf.token_texts());
        records.push(CounterfactualRecord {
            id,
            original_id: d.id.clone(),
            original_text: d.raw_text.clone(),
            original_label: original.clone(),
            target_label: target.clone(),
            text: v.text,
            sentence: cf,
            included_phrase: v.phrase,
            pattern: pair.pattern.clone(),
            wildcard_cap: pair.cap,
            matched_span,
            edit_script,
            judged_label: target.clone(),
            reason: v.reason,
            status: CfStatus::Proposed,
            resolved_labels: None,
        });
    }
    (records, log)
}

/// Generates counterfactuals for each job toward every other label.
///
/// Per (sentence, target) pair: candidate phrases, variations, then the
/// local rule check and the judge. A record is kept only if it still
/// matches the original label's rule and is judged as the target. Pairs
/// run in parallel but results and transcript are assembled in job order,
/// then target order, so output does not depend on scheduling.
pub fn generate_counterfactuals(ctx: &CfContext<'_>, jobs: &[CfJob<'_>], models: &[LabelModel]) -> CfBatch {
    let mut batch = CfBatch::default();
    let mut pairs = Vec::new();
    for job in jobs {
        match get_symbolic_pattern(job.sentence, &job.original_label, models, ctx.lexicon) {
            Ok((pattern, span, cap)) => {
                for target in ctx.labels {
                    if target != &job.original_label && !job.exclude.contains(target) {
                        pairs.push(Pair {
                            job,
                            pattern: pattern.clone(),
                            span: span.clone(),
                            cap,
                            target: target.clone(),
                        });
                    }
                }
            }
            Err(e) => batch.warnings.push(e.to_string()),
        }
    }
    for (records, log) in par::map(&pairs, ctx.config.parallelism, |p| run_pair(ctx, p)) {
        batch.records.extend(records);
        batch.transcript.extend(log.entries);
        batch.warnings.extend(log.warnings);
    }
    batch
}

/// Rechecks a record from its stored fields alone. Returns the first
/// violated property.
pub fn validate_record(
    record: &CounterfactualRecord,
    lexicon: &SynonymLexicon,
    tagger: &TaggerResources,
) -> Result<(), String> {
    if record.target_label == record.original_label {
        return Err("target label equals original label".into());
    }
    if record.judged_label != record.target_label {
        return Err(format!(
            "judged {} but target is {}",
            record.judged_label, record.target_label
        ));
    }
    if record.sentence.raw_text != record.text {
        return Err("sentence text differs from record text".into());
    }
    let fresh = annotate_text(&record.id, &record.text, tagger).map_err(|e| e.to_string())?;
    if fresh != record.sentence {
        return Err("stored annotation differs from a fresh one".into());
    }
    let cfg = MatchConfig::capped(record.wildcard_cap);
    if !matches(&record.pattern, &record.sentence, lexicon, &cfg) {
        return Err(format!("does not match {}", record.pattern));
    }
    let first = match_sentence(&record.pattern, &record.sentence, lexicon, &cfg);
    if first.first() != Some(&record.matched_span) {
        return Err("matched span is not the first match".into());
    }
    let phrase = annotate_text("phrase", &record.included_phrase.text, tagger).map_err(|e| e.to_string())?;
    if !record.included_phrase.satisfies_pattern || !matches(&record.pattern, &phrase, lexicon, &cfg) {
        return Err(format!("phrase `{}` does not satisfy the rule", record.included_phrase.text));
    }
    if !contains_phrase(&record.text, &record.included_phrase.text) {
        return Err(format!("phrase `{}` missing from text", record.included_phrase.text));
    }
    let script = &record.edit_script;
    if script.counterfactual() != record.sentence.token_texts() {
        return Err("edit script does not rebuild the counterfactual".into());
    }
    let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
    if squash(&script.original().concat()) != squash(&record.original_text) {
        return Err("edit script does not rebuild the original".into());
    }
    let (n, m) = (script.original().len(), script.counterfactual().len());
    if script.cost != n + m - 2 * script.kept() {
        return Err("edit script cost is inconsistent".into());
    }
    Ok(())
}
