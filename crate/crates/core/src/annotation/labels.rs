use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnnotationError;

/// Short key identifying a label (`price`, `service`, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelKey(pub String);

impl LabelKey {
    pub fn new(key: impl Into<String>) -> Self {
        LabelKey(key.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LabelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LabelKey {
    fn from(s: &str) -> Self {
        LabelKey(s.to_string())
    }
}

/// A label with its display name and theme color (`#rrggbb`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelId {
    pub key: LabelKey,
    pub display: String,
    pub color: String,
}

/// Ordered label set with unique keys and unique theme colors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSet(Vec<LabelId>);

fn valid_color(c: &str) -> bool {
    c.len() == 7 && c.starts_with('#') && c[1..].chars().all(|ch| ch.is_ascii_hexdigit())
}

impl LabelSet {
    pub fn new(labels: Vec<LabelId>) -> Result<Self, AnnotationError> {
        let mut keys = BTreeSet::new();
        let mut colors = BTreeSet::new();
        for l in &labels {
            if l.key.0.is_empty() {
                return Err(AnnotationError::InvalidLabels("empty label key".into()));
            }
            if !valid_color(&l.color) {
                return Err(AnnotationError::InvalidLabels(format!(
                    "label `{}` has malformed color `{}`",
                    l.key, l.color
                )));
            }
            if !keys.insert(l.key.clone()) {
                return Err(AnnotationError::InvalidLabels(format!("duplicate label key `{}`", l.key)));
            }
            if !colors.insert(l.color.to_ascii_lowercase()) {
                return Err(AnnotationError::InvalidLabels(format!(
                    "theme color `{}` used twice",
                    l.color
                )));
            }
        }
        Ok(LabelSet(labels))
    }

    pub fn from_jsonl(text: &str) -> Result<Self, AnnotationError> {
        let mut labels = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let l: LabelId = serde_json::from_str(line).map_err(|e| AnnotationError::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            labels.push(l);
        }
        LabelSet::new(labels)
    }

    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnnotationError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_jsonl(&text)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabelId> {
        self.0.iter()
    }

    pub fn keys(&self) -> Vec<LabelKey> {
        self.0.iter().map(|l| l.key.clone()).collect()
    }

    pub fn get(&self, key: &LabelKey) -> Option<&LabelId> {
        self.0.iter().find(|l| &l.key == key)
    }

    pub fn contains(&self, key: &LabelKey) -> bool {
        self.get(key).is_some()
    }

    pub fn color_of(&self, key: &LabelKey) -> Option<&str> {
        self.get(key).map(|l| l.color.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_colors_rejected() {
        let text = "{\"key\":\"a\",\"display\":\"A\",\"color\":\"#112233\"}\n{\"key\":\"b\",\"display\":\"B\",\"color\":\"#112233\"}";
        assert!(LabelSet::from_jsonl(text).is_err());
    }

    #[test]
    fn duplicate_keys_rejected() {
        let text = "{\"key\":\"a\",\"display\":\"A\",\"color\":\"#112233\"}\n{\"key\":\"a\",\"display\":\"B\",\"color\":\"#445566\"}";
        assert!(LabelSet::from_jsonl(text).is_err());
    }

    #[test]
    fn bad_color_rejected() {
        assert!(LabelSet::from_jsonl("{\"key\":\"a\",\"display\":\"A\",\"color\":\"red\"}").is_err());
    }
}
