//! Named classification classes and their "hateful" flags.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    names: Vec<String>,
    hateful: Vec<bool>,
}

impl ClassSet {
    /// Requires at least two distinct names, one hateful and one not.
    pub fn new<S: Into<String>>(classes: impl IntoIterator<Item = (S, bool)>) -> Result<Self> {
        let (names, hateful): (Vec<String>, Vec<bool>) =
            classes.into_iter().map(|(n, h)| (n.into(), h)).unzip();
        if names.len() < 2 {
            return Err(Error::ClassSet("need at least two classes".into()));
        }
        if names.iter().any(|n| n.trim().is_empty()) {
            return Err(Error::ClassSet("class names must be nonempty".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::ClassSet(format!("duplicate class {n:?}")));
            }
        }
        if !hateful.iter().any(|&h| h) || hateful.iter().all(|&h| h) {
            return Err(Error::ClassSet(
                "need at least one hateful and one non-hateful class".into(),
            ));
        }
        Ok(Self { names, hateful })
    }

    /// The binary label set used by the synthetic corpora.
    pub fn binary() -> Self {
        Self::new([("hate", true), ("nothate", false)]).expect("valid")
    }

    /// Parses `name:1,name:0,...` where the flag marks hateful classes.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut classes = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, flag) = item
                .rsplit_once(':')
                .ok_or_else(|| Error::ClassSet(format!("expected name:flag, got {item:?}")))?;
            let hateful = match flag {
                "1" | "true" | "hateful" => true,
                "0" | "false" | "benign" => false,
                _ => return Err(Error::ClassSet(format!("bad hateful flag {flag:?}"))),
            };
            classes.push((name.to_string(), hateful));
        }
        Self::new(classes)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn is_hateful(&self, i: usize) -> bool {
        self.hateful[i]
    }

    pub fn hateful_mask(&self) -> &[bool] {
        &self.hateful
    }

    /// Compact `name:flag` form accepted by [`ClassSet::parse`].
    pub fn to_spec(&self) -> String {
        self.names
            .iter()
            .zip(&self.hateful)
            .map(|(n, h)| format!("{n}:{}", u8::from(*h)))
            .collect::<Vec<_>>()
            .join(",")
    }
}
