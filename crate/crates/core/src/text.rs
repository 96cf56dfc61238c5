//! Tokenization, vocabulary construction and padded token sequences.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{GroupedCorpus, Split};
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Default truncation length for encoded inputs.
pub const DEFAULT_MAX_LEN: usize = 64;

/// Lowercases, splits on whitespace and peels leading/trailing ASCII
/// punctuation into one token per character. Interior punctuation stays
/// attached ("don't" is one token).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let start = chars.iter().position(|c| !c.is_ascii_punctuation());
        let Some(start) = start else {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        };
        let end = chars.iter().rposition(|c| !c.is_ascii_punctuation()).unwrap() + 1;
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        out.push(chars[start..end].iter().collect());
        out.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    out
}

/// Token counts ranked by frequency (descending), ties broken by the token
/// string (ascending).
pub fn rank_by_frequency(counts: HashMap<String, usize>) -> Vec<(String, usize)> {
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    max_size: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    max_size: usize,
    tokens: Vec<String>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        let index = r.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            tokens: r.tokens,
            index,
            max_size: r.max_size,
        }
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            max_size: v.max_size,
            tokens: v.tokens,
        }
    }
}

impl Vocabulary {
    /// A vocabulary holding only the reserved tokens plus `tokens` in order
    /// (duplicates and reserved names skipped).
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S], max_size: usize) -> Result<Self> {
        if max_size < 2 {
            return Err(Error::Config("vocabulary max_size must be at least 2".into()));
        }
        let mut v = Self {
            tokens: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
            index: HashMap::new(),
            max_size,
        };
        v.index.insert(PAD_TOKEN.to_string(), PAD);
        v.index.insert(UNK_TOKEN.to_string(), UNK);
        for t in tokens {
            if v.tokens.len() >= max_size {
                break;
            }
            v.insert(t.as_ref());
        }
        Ok(v)
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    /// Id of `token`, or [`UNK`].
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokenizes and maps `text`, truncating to `max_len`.
    pub fn encode(&self, text: &str, max_len: usize) -> TokenSequence {
        let ids: Vec<usize> = tokenize(text).iter().map(|t| self.lookup(t)).collect();
        TokenSequence::new(ids, max_len)
    }
}

/// Builds a vocabulary from the train split: tokens ranked by frequency
/// (descending) then lexicographically, truncated so that the vocabulary,
/// reserved ids included, holds at most `max_size` entries.
pub fn build_vocabulary(corpus: &GroupedCorpus, max_size: usize) -> Result<Vocabulary> {
    build_vocabulary_with(corpus, max_size, &[])
}

/// Like [`build_vocabulary`], but `required` tokens (class-name tokens, for
/// instance) are placed right after the reserved ids and are never dropped.
pub fn build_vocabulary_with(
    corpus: &GroupedCorpus,
    max_size: usize,
    required: &[String],
) -> Result<Vocabulary> {
    let train = corpus.split_indices(Split::Train);
    if train.is_empty() {
        return Err(Error::EmptySplit(Split::Train));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for &i in &train {
        for tok in tokenize(&corpus.examples()[i].text) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut vocab = Vocabulary::from_tokens(required, max_size.max(2 + required.len()))?;
    vocab.max_size = max_size.max(vocab.len());
    for (tok, _) in rank_by_frequency(counts) {
        if vocab.len() >= vocab.max_size {
            break;
        }
        vocab.insert(&tok);
    }
    Ok(vocab)
}

/// Token ids padded with [`PAD`] to a fixed `max_len`; the first `len`
/// positions are real tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    ids: Vec<usize>,
    len: usize,
}

impl TokenSequence {
    /// Truncates `ids` to `max_len` and pads the remainder.
    pub fn new(mut ids: Vec<usize>, max_len: usize) -> Self {
        ids.truncate(max_len);
        let len = ids.len();
        ids.resize(max_len, PAD);
        Self { ids, len }
    }

    /// Padded ids, length `max_len`.
    pub fn padded(&self) -> &[usize] {
        &self.ids
    }

    /// The non-pad prefix.
    pub fn ids(&self) -> &[usize] {
        &self.ids[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn max_len(&self) -> usize {
        self.ids.len()
    }
}
