//! Labeled examples indexed by target group, and the line-delimited JSON
//! interchange format.
//!
//! Each line of a corpus file is one object:
//!
//! ```text
//! {"text":"...","label":"hate","groups":["women"],"split":"train"}
//! ```
//!
//! `groups` may be empty. Blank lines are skipped.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classes::ClassSet;
use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub text: String,
    pub label: String,
    pub groups: Vec<String>,
    pub split: Split,
}

impl Example {
    pub fn new<S: Into<String>>(
        text: impl Into<String>,
        label: impl Into<String>,
        groups: impl IntoIterator<Item = S>,
        split: Split,
    ) -> Self {
        Self {
            text: text.into(),
            label: label.into(),
            groups: groups.into_iter().map(Into::into).collect(),
            split,
        }
    }
}

/// Examples plus an inverted index from group name to example positions.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedCorpus {
    examples: Vec<Example>,
    labels: Vec<usize>,
    group_index: BTreeMap<String, Vec<usize>>,
    classes: ClassSet,
}

impl GroupedCorpus {
    /// Validates labels, group names and split disjointness. Line numbers in
    /// errors are 1-based positions in `examples`.
    pub fn new(examples: Vec<Example>, classes: ClassSet) -> Result<Self> {
        let mut labels = Vec::with_capacity(examples.len());
        let mut seen: HashMap<&str, Split> = HashMap::new();
        for (i, ex) in examples.iter().enumerate() {
            let line = i + 1;
            let label = classes.index_of(&ex.label).ok_or_else(|| Error::UnknownLabel {
                line,
                label: ex.label.clone(),
                expected: classes.names().to_vec(),
            })?;
            labels.push(label);
            if ex.groups.iter().any(|g| g.trim().is_empty()) {
                return Err(Error::MalformedLine {
                    line,
                    message: "empty group name".into(),
                });
            }
            match seen.get(ex.text.as_str()) {
                Some(&first) if first != ex.split => {
                    return Err(Error::SplitOverlap {
                        line,
                        first,
                        second: ex.split,
                    })
                }
                Some(_) => {}
                None => {
                    seen.insert(&ex.text, ex.split);
                }
            }
        }
        let group_index = build_group_index(&examples);
        Ok(Self {
            examples,
            labels,
            group_index,
            classes,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn classes(&self) -> &ClassSet {
        &self.classes
    }

    /// Class index of example `i`.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn group_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.group_index
    }

    pub fn group_names(&self) -> Vec<&str> {
        self.group_index.keys().map(String::as_str).collect()
    }

    /// Positions of examples in `split`, in corpus order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.examples.len())
            .filter(|&i| self.examples[i].split == split)
            .collect()
    }

    /// Positions of `group`'s examples in `split`.
    pub fn group_split_indices(&self, group: &str, split: Split) -> Vec<usize> {
        self.group_index
            .get(group)
            .map(|ix| {
                ix.iter()
                    .copied()
                    .filter(|&i| self.examples[i].split == split)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Number of examples in `split` annotated with each group. Multi-group
    /// examples count toward every group they carry.
    pub fn group_counts(&self, split: Split) -> BTreeMap<String, usize> {
        self.group_index
            .keys()
            .map(|g| (g.clone(), self.group_split_indices(g, split).len()))
            .collect()
    }

    /// Number of examples in `split` whose only annotation is the group.
    pub fn exclusive_group_counts(&self, split: Split) -> BTreeMap<String, usize> {
        self.group_index
            .iter()
            .map(|(g, ix)| {
                let n = ix
                    .iter()
                    .filter(|&&i| {
                        let ex = &self.examples[i];
                        ex.split == split && distinct_groups(ex).len() == 1
                    })
                    .count();
                (g.clone(), n)
            })
            .collect()
    }

    /// A new corpus holding the examples at `keep` (in the given order).
    pub fn subset(&self, keep: &[usize]) -> Self {
        let examples: Vec<Example> = keep.iter().map(|&i| self.examples[i].clone()).collect();
        let labels = keep.iter().map(|&i| self.labels[i]).collect();
        let group_index = build_group_index(&examples);
        Self {
            examples,
            labels,
            group_index,
            classes: self.classes.clone(),
        }
    }

    /// Serializes to the line-delimited interchange format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            let line = serde_json::to_string(ex).expect("examples serialize");
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(io_err(path))
    }
}

fn distinct_groups(ex: &Example) -> Vec<&str> {
    let mut gs: Vec<&str> = ex.groups.iter().map(String::as_str).collect();
    gs.sort_unstable();
    gs.dedup();
    gs
}

fn build_group_index(examples: &[Example]) -> BTreeMap<String, Vec<usize>> {
    let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        for g in distinct_groups(ex) {
            index.entry(g.to_string()).or_default().push(i);
        }
    }
    index
}

/// Parses the interchange format. Errors carry 1-based line numbers.
pub fn parse_corpus(contents: &str, classes: &ClassSet) -> Result<GroupedCorpus> {
    let mut examples = Vec::new();
    let mut lines = Vec::new();
    for (i, raw) in contents.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let ex: Example = serde_json::from_str(raw).map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        examples.push(ex);
        lines.push(i + 1);
    }
    // Re-map positional line numbers to file line numbers.
    GroupedCorpus::new(examples, classes.clone()).map_err(|e| match e {
        Error::UnknownLabel {
            line,
            label,
            expected,
        } => Error::UnknownLabel {
            line: lines[line - 1],
            label,
            expected,
        },
        Error::MalformedLine { line, message } => Error::MalformedLine {
            line: lines[line - 1],
            message,
        },
        Error::SplitOverlap {
            line,
            first,
            second,
        } => Error::SplitOverlap {
            line: lines[line - 1],
            first,
            second,
        },
        other => other,
    })
}

pub fn load_corpus(path: impl AsRef<Path>, classes: &ClassSet) -> Result<GroupedCorpus> {
    let path = path.as_ref();
    let contents = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_corpus(&contents, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"{"text":"they are vile","label":"hate","groups":["women"],"split":"train"}
{"text":"we welcome them","label":"nothate","groups":["women","black"],"split":"test"}

{"text":"hello","label":"nothate","groups":[],"split":"dev"}
"#;

    #[test]
    fn parses_fixture_with_group_index() {
        let c = parse_corpus(FIXTURE, &ClassSet::binary()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.group_index()["women"], vec![0, 1]);
        assert_eq!(c.group_index()["black"], vec![1]);
        assert_eq!(c.label(0), 0);
        assert_eq!(c.label(2), 1);
        assert_eq!(c.split_indices(Split::Test), vec![1]);
        assert_eq!(c.exclusive_group_counts(Split::Train)["women"], 1);
        assert_eq!(c.exclusive_group_counts(Split::Test)["women"], 0);
        assert_eq!(c.group_counts(Split::Test)["women"], 1);
    }

    #[test]
    fn unknown_label_names_the_line() {
        let text = "\n{\"text\":\"x\",\"label\":\"spam\",\"groups\":[],\"split\":\"train\"}\n";
        let err = parse_corpus(text, &ClassSet::binary()).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn malformed_line_is_reported() {
        let text = "{\"text\":\"x\",\"label\":\"hate\",\"groups\":[],\"split\":\"train\"}\nnot json\n";
        let err = parse_corpus(text, &ClassSet::binary()).unwrap_err();
        assert!(matches!(err, Error::MalformedLine { line: 2, .. }));
        let text = "{\"text\":\"x\",\"label\":\"hate\",\"groups\":[],\"split\":\"holdout\"}\n";
        assert!(parse_corpus(text, &ClassSet::binary()).is_err());
    }

    #[test]
    fn same_text_in_two_splits_is_rejected() {
        let text = concat!(
            "{\"text\":\"x\",\"label\":\"hate\",\"groups\":[],\"split\":\"train\"}\n",
            "{\"text\":\"x\",\"label\":\"hate\",\"groups\":[],\"split\":\"test\"}\n"
        );
        let err = parse_corpus(text, &ClassSet::binary()).unwrap_err();
        assert!(matches!(err, Error::SplitOverlap { line: 2, .. }));
    }

    #[test]
    fn empty_group_name_rejected() {
        let text = "{\"text\":\"x\",\"label\":\"hate\",\"groups\":[\" \"],\"split\":\"train\"}\n";
        assert!(parse_corpus(text, &ClassSet::binary()).is_err());
    }

    #[test]
    fn duplicate_annotation_indexed_once() {
        let ex = Example::new("x", "hate", ["a", "a"], Split::Train);
        let c = GroupedCorpus::new(vec![ex], ClassSet::binary()).unwrap();
        assert_eq!(c.group_index()["a"], vec![0]);
    }

    #[test]
    fn jsonl_round_trip() {
        let c = parse_corpus(FIXTURE, &ClassSet::binary()).unwrap();
        let back = parse_corpus(&c.to_jsonl(), &ClassSet::binary()).unwrap();
        assert_eq!(back, c);
    }
}
