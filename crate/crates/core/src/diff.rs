//! Word-level insert/delete alignment between an original sentence and its
//! counterfactual, and the gray/black/theme render spans built from it.
//!
//! Substitution is not an edit primitive: a replaced word shows up as a
//! delete followed by an insert. Among all minimum-cost scripts the one with
//! the longest single unchanged run is chosen, then the one with the fewest
//! runs, then the one whose kept tokens come earliest, then deletions ahead of
//! insertions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counterfactual::CounterfactualRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditOp {
    Keep,
    Insert,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRun {
    pub op: EditOp,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    pub runs: Vec<EditRun>,
    /// Inserted plus deleted tokens.
    pub cost: usize,
}

impl EditScript {
    fn push(&mut self, op: EditOp, token: &str) {
        if op != EditOp::Keep {
            self.cost += 1;
        }
        match self.runs.last_mut() {
            Some(run) if run.op == op => run.tokens.push(token.to_string()),
            _ => self.runs.push(EditRun {
                op,
                tokens: vec![token.to_string()],
            }),
        }
    }

    fn project(&self, skip: EditOp) -> Vec<String> {
        self.runs
            .iter()
            .filter(|r| r.op != skip)
            .flat_map(|r| r.tokens.iter().cloned())
            .collect()
    }

    /// Keep + delete runs: the original token sequence.
    pub fn original(&self) -> Vec<String> {
        self.project(EditOp::Insert)
    }

    /// Keep + insert runs: the counterfactual token sequence.
    pub fn counterfactual(&self) -> Vec<String> {
        self.project(EditOp::Delete)
    }

    pub fn kept(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.op == EditOp::Keep)
            .map(|r| r.tokens.len())
            .sum()
    }

    pub fn longest_keep_run(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.op == EditOp::Keep)
            .map(|r| r.tokens.len())
            .max()
            .unwrap_or(0)
    }

    /// Two aligned rows (original above, counterfactual below). Deleted words
    /// leave a gap in the lower row and inserted words a gap in the upper one.
    pub fn aligned_rows(&self) -> (String, String) {
        let mut top = Vec::new();
        let mut bottom = Vec::new();
        for run in &self.runs {
            for tok in &run.tokens {
                let width = tok.chars().count();
                let blank = "-".repeat(width);
                match run.op {
                    EditOp::Keep => {
                        top.push(tok.clone());
                        bottom.push(tok.clone());
                    }
                    EditOp::Delete => {
                        top.push(tok.clone());
                        bottom.push(blank);
                    }
                    EditOp::Insert => {
                        top.push(blank);
                        bottom.push(tok.clone());
                    }
                }
            }
        }
        (top.join(" "), bottom.join(" "))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Last {
    Start,
    Op(EditOp),
}

type Score = (usize, usize);

const NO_KEEP: (usize, usize) = (usize::MAX, usize::MAX);

/// Minimum (cost, runs) scripts for a sub-problem, tabulated backwards.
/// Best (cost, runs) and the earliest first keep.
type Cell = (Score, (usize, usize));

struct RunDp<'a> {
    a: &'a [&'a str],
    b: &'a [&'a str],
    /// `table[i][j][k]`: best (cost, runs) for `a[i..]`, `b[j..]` when the
    /// previous op is `LASTS[k]`, and the earliest first keep among those.
    table: Vec<Vec<[Cell; 4]>>,
}

const LASTS: [Last; 4] = [
    Last::Start,
    Last::Op(EditOp::Keep),
    Last::Op(EditOp::Delete),
    Last::Op(EditOp::Insert),
];

fn last_index(l: Last) -> usize {
    LASTS.iter().position(|x| *x == l).expect("known state")
}

fn op_rank(op: EditOp) -> u8 {
    match op {
        EditOp::Keep => 0,
        EditOp::Delete => 1,
        EditOp::Insert => 2,
    }
}

impl<'a> RunDp<'a> {
    fn new(a: &'a [&'a str], b: &'a [&'a str]) -> Self {
        let (n, m) = (a.len(), b.len());
        let mut table = vec![vec![[((0usize, 0usize), NO_KEEP); 4]; m + 1]; n + 1];
        for i in (0..=n).rev() {
            for j in (0..=m).rev() {
                if i == n && j == m {
                    continue;
                }
                for (k, &last) in LASTS.iter().enumerate() {
                    let mut best = ((usize::MAX, usize::MAX), NO_KEEP);
                    for (op, ni, nj) in Self::moves(a, b, i, j) {
                        let cand = Self::candidate(&table, last, i, j, op, ni, nj);
                        best = best.min(cand);
                    }
                    table[i][j][k] = best;
                }
            }
        }
        RunDp { a, b, table }
    }

    /// Score and first keep of taking `op` from `(i, j)`.
    fn candidate(
        table: &[Vec<[Cell; 4]>],
        last: Last,
        i: usize,
        j: usize,
        op: EditOp,
        ni: usize,
        nj: usize,
    ) -> (Score, (usize, usize)) {
        let (rest, first) = table[ni][nj][last_index(Last::Op(op))];
        let score = (
            rest.0 + usize::from(op != EditOp::Keep),
            rest.1 + usize::from(last != Last::Op(op)),
        );
        (score, if op == EditOp::Keep { (i, j) } else { first })
    }

    fn moves(a: &[&str], b: &[&str], i: usize, j: usize) -> Vec<(EditOp, usize, usize)> {
        let mut out = Vec::with_capacity(3);
        if i < a.len() && j < b.len() && a[i] == b[j] {
            out.push((EditOp::Keep, i + 1, j + 1));
        }
        if i < a.len() {
            out.push((EditOp::Delete, i + 1, j));
        }
        if j < b.len() {
            out.push((EditOp::Insert, i, j + 1));
        }
        out
    }

    /// Walks forward from the origin. Each step takes an optimal move whose
    /// completion reaches the earliest next keep, deletes before inserts.
    fn reconstruct(&self, start: Last, offset: (usize, usize), steps: &mut Vec<Step>) {
        let (mut i, mut j, mut last) = (0, 0, start);
        while i < self.a.len() || j < self.b.len() {
            let target = self.table[i][j][last_index(last)].0;
            let (op, ni, nj) = Self::moves(self.a, self.b, i, j)
                .into_iter()
                .filter_map(|(op, ni, nj)| {
                    let (score, first) = Self::candidate(&self.table, last, i, j, op, ni, nj);
                    (score == target).then_some(((first, op_rank(op)), (op, ni, nj)))
                })
                .min_by_key(|x| x.0)
                .expect("an optimal move exists")
                .1;
            steps.push(Step {
                op,
                i: offset.0 + i,
                j: offset.1 + j,
            });
            i = ni;
            j = nj;
            last = Last::Op(op);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Step {
    op: EditOp,
    i: usize,
    j: usize,
}

fn lcs_tables(a: &[&str], b: &[&str]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let (n, m) = (a.len(), b.len());
    let mut pre = vec![vec![0usize; m + 1]; n + 1];
    for i in 1..=n {
        for j in 1..=m {
            pre[i][j] = if a[i - 1] == b[j - 1] {
                pre[i - 1][j - 1] + 1
            } else {
                pre[i - 1][j].max(pre[i][j - 1])
            };
        }
    }
    let mut suf = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            suf[i][j] = if a[i] == b[j] {
                suf[i + 1][j + 1] + 1
            } else {
                suf[i + 1][j].max(suf[i][j + 1])
            };
        }
    }
    (pre, suf)
}

fn runs_of(steps: &[Step]) -> usize {
    steps.windows(2).filter(|w| w[0].op != w[1].op).count() + usize::from(!steps.is_empty())
}

fn keep_positions(steps: &[Step]) -> Vec<(usize, usize)> {
    steps
        .iter()
        .filter(|s| s.op == EditOp::Keep)
        .map(|s| (s.i, s.j))
        .collect()
}

/// Minimum insert/delete script from `original` to `counterfactual`, with
/// ties broken as described in the module docs. Comparison is on surface
/// text and case-sensitive.
pub fn word_diff<S: AsRef<str>>(original: &[S], counterfactual: &[S]) -> EditScript {
    let a: Vec<&str> = original.iter().map(AsRef::as_ref).collect();
    let b: Vec<&str> = counterfactual.iter().map(AsRef::as_ref).collect();
    let (n, m) = (a.len(), b.len());
    let (pre, suf) = lcs_tables(&a, &b);
    let total = pre[n][m];

    let mut ext = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            if a[i] == b[j] {
                ext[i][j] = ext[i + 1][j + 1] + 1;
            }
        }
    }

    // Longest keep run any optimal script can contain, and where it can sit.
    let mut longest = 0;
    let mut anchors = Vec::new();
    for i in 0..n {
        for j in 0..m {
            for k in (1..=ext[i][j]).rev() {
                if pre[i][j] + k + suf[i + k][j + k] == total {
                    if k > longest {
                        longest = k;
                        anchors.clear();
                    }
                    if k == longest {
                        anchors.push((i, j));
                    }
                    break;
                }
            }
        }
    }

    let best_steps = if anchors.is_empty() {
        let dp = RunDp::new(&a, &b);
        let mut steps = Vec::new();
        dp.reconstruct(Last::Start, (0, 0), &mut steps);
        steps
    } else {
        anchors
            .into_iter()
            .map(|(i, j)| {
                let mut steps = Vec::new();
                RunDp::new(&a[..i], &b[..j]).reconstruct(Last::Start, (0, 0), &mut steps);
                for k in 0..longest {
                    steps.push(Step {
                        op: EditOp::Keep,
                        i: i + k,
                        j: j + k,
                    });
                }
                RunDp::new(&a[i + longest..], &b[j + longest..]).reconstruct(
                    Last::Op(EditOp::Keep),
                    (i + longest, j + longest),
                    &mut steps,
                );
                steps
            })
            .min_by_key(|x| {
                let ops: Vec<u8> = x.iter().map(|s| op_rank(s.op)).collect();
                (runs_of(x), keep_positions(x), ops)
            })
            .expect("at least one anchor")
    };

    let mut script = EditScript::default();
    for s in &best_steps {
        let tok = match s.op {
            EditOp::Insert => b[s.j],
            _ => a[s.i],
        };
        script.push(s.op, tok);
    }
    debug_assert_eq!(script.cost, n + m - 2 * total);
    script
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderStyle {
    KeptGray,
    ChangedBlack,
    RuleTheme,
}

/// A styled token range `[start, end)` of the counterfactual. Base spans
/// (gray/black) tile the sentence; `rule_theme` spans overlay them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderSpan {
    pub start: usize,
    pub end: usize,
    pub style: RenderStyle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffError {
    #[error("integrity error: {0}")]
    Integrity(String),
}

/// Builds render spans from an edit script and the rule match on the
/// counterfactual. Deleted runs do not appear; they belong to the original.
pub fn render_spans(
    script: &EditScript,
    cf_len: usize,
    matched: (usize, usize),
    theme_color: &str,
) -> Result<Vec<RenderSpan>, DiffError> {
    let projected = script.counterfactual().len();
    if projected != cf_len {
        return Err(DiffError::Integrity(format!(
            "edit script covers {projected} counterfactual tokens, sentence has {cf_len}"
        )));
    }
    let (ms, me) = matched;
    if ms >= me || me > cf_len {
        return Err(DiffError::Integrity(format!(
            "matched span [{ms}, {me}) outside counterfactual of {cf_len} tokens"
        )));
    }
    let mut spans = Vec::new();
    let mut pos = 0;
    for run in &script.runs {
        let style = match run.op {
            EditOp::Keep => RenderStyle::KeptGray,
            EditOp::Insert => RenderStyle::ChangedBlack,
            EditOp::Delete => continue,
        };
        let end = pos + run.tokens.len();
        spans.push(RenderSpan {
            start: pos,
            end,
            style,
            color: None,
        });
        pos = end;
    }
    spans.push(RenderSpan {
        start: ms,
        end: me,
        style: RenderStyle::RuleTheme,
        color: Some(theme_color.to_string()),
    });
    Ok(spans)
}

/// Render spans for a counterfactual record, theming the carried-over rule
/// match with the original label's color.
pub fn render_counterfactual(
    record: &CounterfactualRecord,
    theme_color: &str,
) -> Result<Vec<RenderSpan>, DiffError> {
    let cf_tokens = record.sentence.token_texts();
    if record.edit_script.counterfactual() != cf_tokens {
        return Err(DiffError::Integrity(format!(
            "edit script of `{}` does not reproduce its text",
            record.id
        )));
    }
    render_spans(
        &record.edit_script,
        cf_tokens.len(),
        (record.matched_span.start, record.matched_span.end),
        theme_color,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn runs(script: &EditScript) -> Vec<(EditOp, Vec<&str>)> {
        script
            .runs
            .iter()
            .map(|r| (r.op, r.tokens.iter().map(String::as_str).collect()))
            .collect()
    }

    #[test]
    fn breakfast_worked_example() {
        let s = word_diff(
            &["Breakfast", "was", "delicious"],
            &["Breakfast", "was", "pretty", "cheap"],
        );
        assert_eq!(
            runs(&s),
            vec![
                (EditOp::Keep, vec!["Breakfast", "was"]),
                (EditOp::Delete, vec!["delicious"]),
                (EditOp::Insert, vec!["pretty", "cheap"]),
            ]
        );
        assert_eq!(s.cost, 3);
    }

    #[test]
    fn identical_is_single_keep() {
        let s = word_diff(&["a", "b", "c"], &["a", "b", "c"]);
        assert_eq!(runs(&s), vec![(EditOp::Keep, vec!["a", "b", "c"])]);
        assert_eq!(s.cost, 0);
    }

    #[test]
    fn disjoint_costs_everything() {
        let s = word_diff(&["a", "b"], &["c", "d", "e"]);
        assert_eq!(s.cost, 5);
        assert_eq!(
            runs(&s),
            vec![(EditOp::Delete, vec!["a", "b"]), (EditOp::Insert, vec!["c", "d", "e"])]
        );
    }

    #[test]
    fn empty_inputs() {
        let none: [&str; 0] = [];
        assert_eq!(word_diff(&none, &none), EditScript::default());
        assert_eq!(word_diff(&["x"], &none).cost, 1);
        assert_eq!(word_diff(&none, &["x", "y"]).cost, 2);
    }

    #[test]
    fn longest_run_beats_earlier_fragmented_keeps() {
        // Both `x` and `y z` are optimal-length alignments against the tail,
        // but only one can be kept; the longer run wins.
        let s = word_diff(&["x", "y", "z"], &["y", "z", "x"]);
        assert_eq!(s.longest_keep_run(), 2);
        assert_eq!(s.cost, 2);
    }

    #[test]
    fn case_sensitive_comparison() {
        assert_eq!(word_diff(&["Good"], &["good"]).cost, 2);
    }

    #[test]
    fn aligned_rows_leave_gaps() {
        let s = word_diff(&["Breakfast", "was", "delicious"], &["Breakfast", "was", "cheap"]);
        let (top, bottom) = s.aligned_rows();
        assert_eq!(top, "Breakfast was delicious -----");
        assert_eq!(bottom, "Breakfast was --------- cheap");
    }

    #[test]
    fn render_gray_black_and_theme_overlay() {
        let s = word_diff(
            &["Breakfast", "was", "delicious"],
            &["Breakfast", "was", "pretty", "cheap"],
        );
        let spans = render_spans(&s, 4, (2, 3), "#c0392b").unwrap();
        assert_eq!(
            spans,
            vec![
                RenderSpan { start: 0, end: 2, style: RenderStyle::KeptGray, color: None },
                RenderSpan { start: 2, end: 4, style: RenderStyle::ChangedBlack, color: None },
                RenderSpan {
                    start: 2,
                    end: 3,
                    style: RenderStyle::RuleTheme,
                    color: Some("#c0392b".into())
                },
            ]
        );
    }

    #[test]
    fn unchanged_record_renders_all_gray() {
        let s = word_diff(&["a", "b"], &["a", "b"]);
        let spans = render_spans(&s, 2, (0, 1), "#000000").unwrap();
        assert!(spans
            .iter()
            .filter(|s| s.style != RenderStyle::RuleTheme)
            .all(|s| s.style == RenderStyle::KeptGray));
    }

    #[test]
    fn out_of_range_match_is_integrity_error() {
        let s = word_diff(&["a"], &["a", "b"]);
        assert!(render_spans(&s, 2, (1, 3), "#000000").is_err());
        assert!(render_spans(&s, 3, (0, 1), "#000000").is_err());
    }

    #[test]
    fn render_span_wire_shape() {
        let span = RenderSpan { start: 0, end: 2, style: RenderStyle::KeptGray, color: None };
        assert_eq!(
            serde_json::to_string(&span).unwrap(),
            r#"{"start":0,"end":2,"style":"kept_gray"}"#
        );
    }
}
