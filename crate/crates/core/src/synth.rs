//! Templated synthetic corpora with controllable per-group volume and
//! lexical style.
//!
//! Every example mentions its target group by name and mixes function words
//! with content words. Groups in the [`LexiconStyle::Shared`] style draw
//! their hateful and benign content words from corpus-wide lexicons (plus a
//! few group-specific slur-analogs); [`LexiconStyle::Disjoint`] groups use
//! only their own invented vocabulary, which is what makes them
//! stylistically distant from the rest of the data.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classes::ClassSet;
use crate::corpus::{Example, GroupedCorpus, Split};
use crate::error::{Error, Result};

const FILLER: &[&str] = &[
    "the", "a", "they", "we", "are", "is", "just", "really", "all", "people", "those", "these",
    "here", "about", "always", "so", "of", "to", "and", "our",
];

const SHARED_HATE: &[&str] = &[
    "vile", "filthy", "worthless", "parasites", "disgusting", "scum", "vermin", "pathetic",
    "inferior", "plague", "savages", "trash",
];

const SHARED_BENIGN: &[&str] = &[
    "welcome", "respect", "support", "friends", "neighbors", "celebrate", "proud", "kind",
    "community", "together", "talented", "brilliant",
];

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const CODAS: &[&str] = &["", "n", "r", "k", "sh", "x"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconStyle {
    Shared,
    Disjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    /// Nominal hateful examples across all splits.
    pub hate: usize,
    /// Nominal benign examples across all splits.
    pub benign: usize,
    /// Overrides the number of hateful train examples; dev/test counts are
    /// still derived from the nominal totals.
    pub train_hate: Option<usize>,
    pub train_benign: Option<usize>,
    pub style: LexiconStyle,
}

impl GroupSpec {
    pub fn new(name: impl Into<String>, hate: usize, benign: usize) -> Self {
        Self {
            name: name.into(),
            hate,
            benign,
            train_hate: None,
            train_benign: None,
            style: LexiconStyle::Shared,
        }
    }

    pub fn disjoint(mut self) -> Self {
        self.style = LexiconStyle::Disjoint;
        self
    }

    pub fn starved(mut self, train_hate: usize, train_benign: usize) -> Self {
        self.train_hate = Some(train_hate);
        self.train_benign = Some(train_benign);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub groups: Vec<GroupSpec>,
    pub classes: ClassSet,
    pub dev_fraction: f64,
    pub test_fraction: f64,
    /// Distinct group-specific content words per group and class.
    pub lexicon_size: usize,
    /// Probability of adding one content word of the opposite class.
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(groups: Vec<GroupSpec>, seed: u64) -> Self {
        Self {
            groups,
            classes: ClassSet::binary(),
            dev_fraction: 0.2,
            test_fraction: 0.2,
            lexicon_size: 8,
            noise: 0.1,
            seed,
        }
    }

    /// `n` shared-style groups named `g1..gn` with equal class counts.
    pub fn uniform(n: usize, hate: usize, benign: usize, seed: u64) -> Self {
        let groups = (1..=n).map(|i| GroupSpec::new(format!("g{i}"), hate, benign)).collect();
        Self::new(groups, seed)
    }

    /// The skewed benchmark corpus: four shared-style groups with 70 + 70
    /// examples and one disjoint-lexicon group `g5` with the same dev/test
    /// volume but only 8 + 8 training examples.
    pub fn skewed_benchmark(seed: u64) -> Self {
        let mut groups: Vec<GroupSpec> =
            (1..=4).map(|i| GroupSpec::new(format!("g{i}"), 70, 70)).collect();
        groups.push(GroupSpec::new("g5", 70, 70).disjoint().starved(8, 8));
        Self::new(groups, seed)
    }

    /// Corpus used by the desk-scale experiment: four groups of 100 + 100,
    /// a fifth with only 8 + 8 training examples, small lexicons and a
    /// larger test split so the starved group has 60 test examples.
    pub fn desk_benchmark(seed: u64) -> Self {
        let mut groups: Vec<GroupSpec> =
            (1..=4).map(|i| GroupSpec::new(format!("g{i}"), 100, 100)).collect();
        groups.push(GroupSpec::new("g5", 100, 100).disjoint().starved(8, 8));
        let mut spec = Self::new(groups, seed);
        spec.lexicon_size = 3;
        spec.test_fraction = 0.3;
        spec
    }

    /// Per-split (hate, benign) counts of one group.
    pub fn split_counts(&self, group: &GroupSpec) -> [(Split, usize, usize); 3] {
        let part = |total: usize, train_override: Option<usize>| {
            let dev = (total as f64 * self.dev_fraction).round() as usize;
            let test = (total as f64 * self.test_fraction).round() as usize;
            let train = train_override.unwrap_or_else(|| total.saturating_sub(dev + test));
            (train, dev, test)
        };
        let (th, dh, eh) = part(group.hate, group.train_hate);
        let (tb, db, eb) = part(group.benign, group.train_benign);
        [
            (Split::Train, th, tb),
            (Split::Dev, dh, db),
            (Split::Test, eh, eb),
        ]
    }
}

/// Deterministic pseudo-word for (group, kind, i).
fn pseudo_word(group: &str, kind: u64, i: usize) -> String {
    // FNV-1a over the group name keeps words stable across platforms.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in group.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h ^ (kind << 32) ^ i as u64);
    let syllables = 2 + (i % 2);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(&mut rng).unwrap());
        w.push_str(VOWELS.choose(&mut rng).unwrap());
    }
    w.push_str(CODAS.choose(&mut rng).unwrap());
    w
}

struct Lexicons {
    slurs: Vec<String>,
    own_benign: Vec<String>,
}

fn group_lexicons(group: &str, size: usize, taken: &mut HashSet<String>) -> Lexicons {
    let mut make = |kind: u64| {
        let mut words = Vec::with_capacity(size);
        let mut i = 0;
        while words.len() < size {
            let w = pseudo_word(group, kind, i);
            i += 1;
            if taken.insert(w.clone()) {
                words.push(w);
            }
        }
        words
    };
    Lexicons {
        slurs: make(1),
        own_benign: make(2),
    }
}

/// Generates a corpus from `spec`. Output is a pure function of `spec`.
pub fn synth_corpus(spec: &SynthSpec) -> Result<GroupedCorpus> {
    if spec.groups.len() < 2 {
        return Err(Error::Config("synthetic corpus needs at least two groups".into()));
    }
    if spec.lexicon_size == 0 {
        return Err(Error::Config("lexicon_size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::Config("noise must lie in [0, 1]".into()));
    }
    let mut names = HashSet::new();
    for g in &spec.groups {
        if g.name.trim().is_empty() || g.name.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("invalid group name {:?}", g.name)));
        }
        if !names.insert(g.name.as_str()) {
            return Err(Error::Config(format!("duplicate group {:?}", g.name)));
        }
    }
    let classes = &spec.classes;
    let hate_label = (0..classes.len()).find(|&i| classes.is_hateful(i)).unwrap();
    let benign_label = (0..classes.len()).find(|&i| !classes.is_hateful(i)).unwrap();

    let mut totals = [0usize; 3];
    for g in &spec.groups {
        for (k, (_, h, b)) in spec.split_counts(g).iter().enumerate() {
            totals[k] += h + b;
        }
    }
    for (k, split) in Split::ALL.iter().enumerate() {
        if totals[k] == 0 {
            return Err(Error::EmptySplit(*split));
        }
    }

    let mut taken: HashSet<String> = FILLER
        .iter()
        .chain(SHARED_HATE)
        .chain(SHARED_BENIGN)
        .map(|s| s.to_string())
        .collect();
    taken.extend(spec.groups.iter().map(|g| g.name.to_lowercase()));
    let lexicons: Vec<Lexicons> = spec
        .groups
        .iter()
        .map(|g| group_lexicons(&g.name, spec.lexicon_size, &mut taken))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    for (g, lex) in spec.groups.iter().zip(&lexicons) {
        for (split, n_hate, n_benign) in spec.split_counts(g) {
            for (hateful, n) in [(true, n_hate), (false, n_benign)] {
                for _ in 0..n {
                    let identity = g.name.to_lowercase();
                    let text = unique_sentence(&mut rng, &mut seen, |rng| {
                        sentence(rng, &identity, g.style, hateful, lex, spec.noise)
                    })?;
                    let label = if hateful { hate_label } else { benign_label };
                    examples.push(Example::new(text, classes.name(label), [g.name.clone()], split));
                }
            }
        }
    }
    GroupedCorpus::new(examples, classes.clone())
}

fn unique_sentence(
    rng: &mut ChaCha8Rng,
    seen: &mut HashSet<String>,
    make: impl Fn(&mut ChaCha8Rng) -> String,
) -> Result<String> {
    for _ in 0..10_000 {
        let text = make(rng);
        if seen.insert(text.clone()) {
            return Ok(text);
        }
    }
    Err(Error::Config(
        "could not generate enough distinct sentences; raise lexicon_size".into(),
    ))
}

fn content_word<'a>(
    rng: &mut ChaCha8Rng,
    style: LexiconStyle,
    hateful: bool,
    lex: &'a Lexicons,
) -> &'a str {
    match (style, hateful) {
        (LexiconStyle::Shared, true) => {
            if rng.random_bool(0.3) {
                lex.slurs.choose(rng).unwrap()
            } else {
                SHARED_HATE.choose(rng).unwrap()
            }
        }
        (LexiconStyle::Shared, false) => SHARED_BENIGN.choose(rng).unwrap(),
        (LexiconStyle::Disjoint, true) => lex.slurs.choose(rng).unwrap(),
        (LexiconStyle::Disjoint, false) => lex.own_benign.choose(rng).unwrap(),
    }
}

fn sentence(
    rng: &mut ChaCha8Rng,
    identity: &str,
    style: LexiconStyle,
    hateful: bool,
    lex: &Lexicons,
    noise: f64,
) -> String {
    let mut words: Vec<&str> = vec![identity];
    for _ in 0..rng.random_range(2..=4) {
        words.push(FILLER.choose(rng).unwrap());
    }
    for _ in 0..rng.random_range(1..=2) {
        words.push(content_word(rng, style, hateful, lex));
    }
    if rng.random_bool(noise) {
        words.push(content_word(rng, style, !hateful, lex));
    }
    words.shuffle(rng);
    let mut text = words.join(" ");
    if hateful && rng.random_bool(0.3) {
        text.push('!');
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_spec() {
        let spec = SynthSpec::uniform(2, 20, 20, 7);
        let c = synth_corpus(&spec).unwrap();
        assert_eq!(c.len(), 80);
        assert_eq!(c.group_index()["g1"].len(), 40);
        assert_eq!(c.group_index()["g2"].len(), 40);
        let hate = (0..c.len()).filter(|&i| c.label(i) == 0).count();
        assert_eq!(hate, 40);
    }

    #[test]
    fn skew_override_only_touches_train() {
        let spec = SynthSpec::skewed_benchmark(1);
        let c = synth_corpus(&spec).unwrap();
        assert_eq!(c.group_counts(Split::Train)["g5"], 16);
        assert_eq!(c.group_counts(Split::Test)["g5"], 28);
        assert_eq!(c.group_counts(Split::Train)["g1"], 84);
        assert_eq!(c.group_counts(Split::Dev)["g1"], 28);
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SynthSpec::skewed_benchmark(3);
        let a = synth_corpus(&spec).unwrap().to_jsonl();
        let b = synth_corpus(&spec).unwrap().to_jsonl();
        assert_eq!(a, b);
        let other = synth_corpus(&SynthSpec::skewed_benchmark(4)).unwrap().to_jsonl();
        assert_ne!(a, other);
    }

    #[test]
    fn too_small_counts_fail() {
        let spec = SynthSpec::uniform(2, 1, 1, 0);
        assert!(matches!(synth_corpus(&spec), Err(Error::EmptySplit(_))));
        assert!(synth_corpus(&SynthSpec::uniform(1, 20, 20, 0)).is_err());
    }

    #[test]
    fn disjoint_group_avoids_shared_content_words() {
        let spec = SynthSpec::skewed_benchmark(5);
        let c = synth_corpus(&spec).unwrap();
        for &i in &c.group_index()["g5"] {
            let text = &c.examples()[i].text;
            for w in text.split_whitespace() {
                let w = w.trim_end_matches('!');
                assert!(!SHARED_HATE.contains(&w) && !SHARED_BENIGN.contains(&w), "{text}");
            }
        }
    }

    #[test]
    fn pseudo_words_are_stable() {
        assert_eq!(pseudo_word("g1", 1, 0), pseudo_word("g1", 1, 0));
        assert_ne!(pseudo_word("g1", 1, 0), pseudo_word("g2", 1, 0));
    }
}
