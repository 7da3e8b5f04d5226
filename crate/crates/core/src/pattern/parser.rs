use crate::annotation::{EntityType, Pos};

use super::ast::{Pattern, PatternAtom, Sequence};
use super::PatternError;

const RESERVED: &[char] = &['[', ']', '(', ')', '+', '|', '$', '*'];

pub(crate) fn valid_word(w: &str) -> bool {
    !w.is_empty() && !w.chars().any(|c| c.is_whitespace() || RESERVED.contains(&c))
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn err(&self, column: usize, msg: impl Into<String>) -> PatternError {
        PatternError::Syntax {
            pattern: self.src.to_string(),
            column,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn alternation(&mut self) -> Result<Vec<Sequence>, PatternError> {
        let mut branches = vec![self.sequence()?];
        while self.peek() == Some('|') {
            self.pos += 1;
            branches.push(self.sequence()?);
        }
        Ok(branches)
    }

    fn sequence(&mut self) -> Result<Sequence, PatternError> {
        let start = self.pos;
        let mut atoms = vec![self.atom()?];
        loop {
            self.skip_ws();
            match self.peek() {
                Some('+') => {
                    self.pos += 1;
                    atoms.push(self.atom()?);
                }
                Some('|') | None => break,
                Some(c) => return Err(self.err(self.pos, format!("expected `+` or `|`, found `{c}`"))),
            }
        }
        if atoms.iter().all(PatternAtom::is_wildcard) {
            return Err(self.err(start, "a sequence cannot consist of wildcards only"));
        }
        Ok(Sequence(atoms))
    }

    fn bracketed(&mut self, close: char) -> Result<String, PatternError> {
        let open_at = self.pos;
        self.pos += 1;
        let begin = self.pos;
        while let Some(c) = self.peek() {
            if c == close {
                let word: String = self.chars[begin..self.pos].iter().collect();
                self.pos += 1;
                if word.is_empty() {
                    return Err(self.err(open_at, "empty atom"));
                }
                if !valid_word(&word) {
                    return Err(self.err(begin, format!("`{word}` is not a single word")));
                }
                return Ok(word);
            }
            if RESERVED.contains(&c) {
                return Err(self.err(self.pos, format!("unbalanced bracket: unexpected `{c}`")));
            }
            self.pos += 1;
        }
        Err(self.err(open_at, format!("unbalanced bracket: missing `{close}`")))
    }

    fn upper_run(&mut self) -> String {
        let begin = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_uppercase() || c == '_' || c == '-')
        {
            self.pos += 1;
        }
        self.chars[begin..self.pos].iter().collect()
    }

    fn atom(&mut self) -> Result<PatternAtom, PatternError> {
        self.skip_ws();
        let at = self.pos;
        match self.peek() {
            None if at == 0 => Err(self.err(at, "empty pattern")),
            None => Err(self.err(at, "trailing operator")),
            Some('+') | Some('|') => Err(self.err(at, "empty atom between operators")),
            Some('*') => {
                self.pos += 1;
                Ok(PatternAtom::Wildcard)
            }
            Some('[') => self.bracketed(']').map(PatternAtom::Stem),
            Some('(') => self.bracketed(')').map(PatternAtom::Soft),
            Some('$') => {
                self.pos += 1;
                let name = self.upper_run();
                if name.is_empty() {
                    return Err(self.err(at, "empty entity type"));
                }
                name.parse::<EntityType>()
                    .map(PatternAtom::Entity)
                    .map_err(|_| self.err(at + 1, format!("unknown entity type `{name}`")))
            }
            Some(']') | Some(')') => Err(self.err(at, "unbalanced bracket")),
            Some(c) if c.is_ascii_uppercase() => {
                let name = self.upper_run();
                Pos::from_pattern_tag(&name)
                    .map(PatternAtom::PosTag)
                    .ok_or_else(|| self.err(at, format!("unknown POS tag `{name}`")))
            }
            Some(c) => Err(self.err(at, format!("unexpected character `{c}`"))),
        }
    }
}

/// Parses the pattern grammar:
///
/// ```text
/// alt  := seq ('|' seq)*
/// seq  := atom ('+' atom)*
/// atom := POSTAG | '[' word ']' | '(' word ')' | '$' ENTTYPE | '*'
/// ```
///
/// Whitespace around operators is ignored. Errors carry a 0-based column.
pub fn parse_pattern(text: &str) -> Result<Pattern, PatternError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        src: text,
    };
    if text.trim().is_empty() {
        return Err(p.err(0, "empty pattern"));
    }
    let branches = p.alternation()?;
    debug_assert!(p.peek().is_none());
    Ok(Pattern::new(branches).expect("parser only builds valid branches"))
}
