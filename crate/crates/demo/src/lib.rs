//! Browser bindings: group statistics, a sense explorer and a corpus
//! overlap audit. Every export returns a JSON string.

use hatesense::audit::{aggregate, word_overlap, OverlapConfig};
use hatesense::corpus::Split;
use hatesense::sense::assign_senses;
use hatesense::synth::{synth_corpus, GroupSpec, SynthSpec};
use hatesense::{Tape, Tensor};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Parses `name, accuracy` lines (blank lines and `#` comments skipped).
pub fn group_stats_json(input: &str) -> Result<Value, String> {
    let mut groups = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, acc) = line
            .rsplit_once(',')
            .ok_or_else(|| format!("line {}: expected `name, accuracy`", n + 1))?;
        let acc: f64 = acc
            .trim()
            .parse()
            .map_err(|_| format!("line {}: {:?} is not a number", n + 1, acc.trim()))?;
        if !(0.0..=1.0).contains(&acc) {
            return Err(format!("line {}: accuracy must lie in [0, 1]", n + 1));
        }
        groups.push((name.trim().to_string(), acc));
    }
    let a = aggregate(&groups).map_err(|e| e.to_string())?;
    Ok(json!({
        "groups": groups.len(),
        "average": a.average,
        "dispersion": a.dispersion,
        "min_group": a.min_group,
        "min_accuracy": a.min_accuracy,
    }))
}

fn parse_rows(input: &str, what: &str) -> Result<Tensor, String> {
    let rows: Vec<Vec<f64>> = input
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| format!("{what} row {}: {s:?} is not a number", i + 1)))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let d = rows.first().map(Vec::len).ok_or_else(|| format!("no {what} vectors"))?;
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(format!("{what} vectors must share one non-zero dimension"));
    }
    Ok(Tensor::matrix(&rows))
}

/// Sense distribution of each token vector against the class vectors.
pub fn senses_json(tokens: &str, classes: &str, temperature: f64) -> Result<Value, String> {
    let t = parse_rows(tokens, "token")?;
    let c = parse_rows(classes, "class")?;
    if t.cols() != c.cols() {
        return Err(format!("token dimension {} differs from class dimension {}", t.cols(), c.cols()));
    }
    if !(temperature > 0.0) {
        return Err("temperature must be positive".into());
    }
    let mut tape = Tape::new();
    let tv = tape.constant(t.clone());
    let cv = tape.constant(c.clone());
    let cos = tape.cosine_matrix(tv, cv).map_err(|e| e.to_string())?;
    let cos = tape.value(cos).clone();
    let (_, a) = assign_senses(&mut tape, tv, cv, temperature).map_err(|e| e.to_string())?;
    let rows: Vec<Value> = (0..t.rows())
        .map(|i| {
            json!({
                "cosine": cos.row(i),
                "distribution": a.distributions.row(i),
                "sense": a.senses[i],
            })
        })
        .collect();
    Ok(json!({ "tokens": rows }))
}

/// Synthesizes the benchmark with the starved group cut to `starve` hateful
/// and `starve` benign training examples, and audits group volume and
/// word overlap.
pub fn overlap_json(seed: u64, starve: usize, lexicon_size: usize, k: usize, stopwords: usize) -> Result<Value, String> {
    let mut spec = SynthSpec::desk_benchmark(seed);
    spec.lexicon_size = lexicon_size;
    if let Some(g) = spec.groups.iter_mut().find(|g| g.name == "g5") {
        *g = GroupSpec::new("g5", 100, 100).disjoint().starved(starve, starve);
    }
    let corpus = synth_corpus(&spec).map_err(|e| e.to_string())?;
    let train = corpus.group_counts(Split::Train);
    let test = corpus.group_counts(Split::Test);
    let config = OverlapConfig { k, stopwords };
    let groups = corpus
        .group_names()
        .into_iter()
        .map(|g| {
            let o = word_overlap(&corpus, g, &config).map_err(|e| e.to_string())?;
            Ok(json!({
                "group": g,
                "train": train.get(g).copied().unwrap_or(0),
                "test": test.get(g).copied().unwrap_or(0),
                "k": o.k,
                "shared": o.shared,
                "overlap": o.fraction,
            }))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json!({ "examples": corpus.len(), "groups": groups }))
}

#[wasm_bindgen]
pub fn group_stats(input: &str) -> Result<String, JsValue> {
    to_js(group_stats_json(input))
}

#[wasm_bindgen]
pub fn senses(tokens: &str, classes: &str, temperature: f64) -> Result<String, JsValue> {
    to_js(senses_json(tokens, classes, temperature))
}

#[wasm_bindgen]
pub fn overlap(seed: u32, starve: u32, lexicon_size: u32, k: u32, stopwords: u32) -> Result<String, JsValue> {
    to_js(overlap_json(
        u64::from(seed),
        starve as usize,
        lexicon_size as usize,
        k as usize,
        stopwords as usize,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_a_small_table() {
        let v = group_stats_json("# header\nA, 0.5\nB, 0.7\n\nC d, 0.9").unwrap();
        assert!((v["average"].as_f64().unwrap() - 0.7).abs() < 1e-12);
        assert!((v["dispersion"].as_f64().unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(v["min_group"], "A");
        assert!(group_stats_json("A 0.5").unwrap_err().contains("line 1"));
        assert!(group_stats_json("A, 1.5").is_err());
        assert!(group_stats_json("").is_err());
    }

    #[test]
    fn senses_follow_cosine() {
        let v = senses_json("1 0\n0 2\n-3, 0.1", "1 0\n0 1", 0.5).unwrap();
        let senses: Vec<u64> = v["tokens"].as_array().unwrap().iter().map(|t| t["sense"].as_u64().unwrap()).collect();
        assert_eq!(senses, [0, 1, 1]);
        assert!(senses_json("1 0 0", "1 0", 1.0).is_err());
        assert!(senses_json("1 0", "1 0", 0.0).is_err());
        assert!(senses_json("1 x", "1 0", 1.0).is_err());
    }

    #[test]
    fn overlap_reports_every_group() {
        let v = overlap_json(0, 4, 3, 20, 5).unwrap();
        let groups = v["groups"].as_array().unwrap();
        assert_eq!(groups.len(), 5);
        let g5 = groups.iter().find(|g| g["group"] == "g5").unwrap();
        assert_eq!(g5["train"], 8);
    }
}
