//! Turning decomposer responses into unit lists.

use std::collections::BTreeMap;

use crate::lenient::{self, Loose, ParseError};

const GOOD_MARKER: &str = "good atomic facts";
const BAD_MARKER: &str = "bad atomic facts";

/// Facts grouped by 0-based answer part, plus the number of facts that
/// cited a sentence outside the answer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedDecomposition {
    pub units: BTreeMap<usize, Vec<String>>,
    pub dropped: usize,
}

fn find_ci(haystack: &str, needle: &str, from: usize) -> Option<usize> {
    // ASCII lowercasing keeps byte offsets
    haystack[from..].to_ascii_lowercase().find(needle).map(|i| i + from)
}

/// Reads the object following the GOOD marker (or the first object when
/// there is no marker), stopping before a BAD block. Accepts
/// `{"fact": n}`, `{"fact": [n, m]}` and the inverted `{n: ["fact", ...]}`.
/// Sentence numbers are 1-based.
pub fn parse_decomposition(raw: &str, n_parts: usize) -> Result<ParsedDecomposition, ParseError> {
    let raw = lenient::strip_code_fences(raw);
    let start = find_ci(raw, GOOD_MARKER, 0).map(|i| i + GOOD_MARKER.len()).unwrap_or(0);
    let end = find_ci(raw, BAD_MARKER, start).unwrap_or(raw.len());
    let region = &raw[start..end];
    let Loose::Object(entries) = lenient::find_value(region, '{')? else {
        unreachable!("find_value('{{') returns objects")
    };
    let mut out = ParsedDecomposition::default();
    let add = |fact: &str, number: Option<usize>, out: &mut ParsedDecomposition| {
        let fact = fact.trim();
        if fact.is_empty() {
            return;
        }
        match number {
            Some(n) if n >= 1 && n <= n_parts => {
                let list = out.units.entry(n - 1).or_default();
                if !list.iter().any(|f| f == fact) {
                    list.push(fact.to_string());
                }
            }
            _ => out.dropped += 1,
        }
    };
    for (key, value) in &entries {
        let inverted = Loose::Str(key.clone()).as_index().filter(|_| !matches!(value, Loose::Num(_)));
        match (inverted, value) {
            (Some(n), Loose::Str(fact)) => add(fact, Some(n), &mut out),
            (Some(n), Loose::Array(facts)) => {
                for f in facts.iter().filter_map(Loose::as_str) {
                    add(f, Some(n), &mut out);
                }
            }
            (_, Loose::Array(numbers)) => {
                for n in numbers {
                    add(key, n.as_index(), &mut out);
                }
            }
            (_, v) => add(key, v.as_index(), &mut out),
        }
    }
    Ok(out)
}

/// Reads a per-sentence fact list: bulleted or numbered lines, or a list
/// literal.
pub fn parse_fact_list(raw: &str) -> Result<Vec<String>, ParseError> {
    let raw = lenient::strip_code_fences(raw);
    if raw.starts_with('[') {
        if let Ok(list) = lenient::parse_string_list(raw) {
            return Ok(dedup(list));
        }
    }
    let mut bullets = Vec::new();
    let mut plain = Vec::new();
    for line in raw.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match strip_bullet(line) {
            Some(fact) if !fact.is_empty() => bullets.push(fact.to_string()),
            Some(_) => {}
            None if !line.ends_with(':') => plain.push(line.to_string()),
            None => {}
        }
    }
    let facts = if bullets.is_empty() { plain } else { bullets };
    if facts.is_empty() {
        return Err(ParseError { offset: 0, message: "no facts found".into() });
    }
    Ok(dedup(facts))
}

fn strip_bullet(line: &str) -> Option<&str> {
    for marker in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(marker) {
            return Some(rest.trim());
        }
    }
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return Some(r.trim());
        }
    }
    None
}

fn dedup(facts: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(facts.len());
    for f in facts.into_iter().map(|f| f.trim().to_string()).filter(|f| !f.is_empty()) {
        if !out.contains(&f) {
            out.push(f);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(pairs: &[(usize, &[&str])]) -> BTreeMap<usize, Vec<String>> {
        pairs.iter().map(|(k, v)| (*k, v.iter().map(|s| s.to_string()).collect())).collect()
    }

    #[test]
    fn direct_mapping() {
        let p = parse_decomposition(r#"{"fact A": 1, "fact B": 1}"#, 1).unwrap();
        assert_eq!(p.units, units(&[(0, &["fact A", "fact B"])]));
        assert_eq!(p.dropped, 0);
    }

    #[test]
    fn bad_block_is_ignored() {
        let raw = "GOOD ATOMIC FACTS:\n{\"good one\": 1,\n\"good two\": 2}\n\nBAD ATOMIC FACTS:\n{\"bad one\": 1}";
        let p = parse_decomposition(raw, 2).unwrap();
        assert_eq!(p.units, units(&[(0, &["good one"]), (1, &["good two"])]));
    }

    #[test]
    fn bad_block_first_with_no_good_marker() {
        let raw = "{\"kept\": 1}\nBad atomic facts: {\"dropped\": 1}";
        assert_eq!(parse_decomposition(raw, 1).unwrap().units, units(&[(0, &["kept"])]));
    }

    #[test]
    fn out_of_range_is_counted() {
        let p = parse_decomposition(r#"{"a": 1, "b": 7, "c": 3, "d": 0}"#, 3).unwrap();
        assert_eq!(p.units, units(&[(0, &["a"]), (2, &["c"])]));
        assert_eq!(p.dropped, 2);
    }

    #[test]
    fn inverted_and_list_forms() {
        let p = parse_decomposition(r#"{"1": ["x", "y"], "2": "z"}"#, 2).unwrap();
        assert_eq!(p.units, units(&[(0, &["x", "y"]), (1, &["z"])]));
        let p = parse_decomposition(r#"{"shared": [1, 2]}"#, 2).unwrap();
        assert_eq!(p.units, units(&[(0, &["shared"]), (1, &["shared"])]));
    }

    #[test]
    fn numeric_fact_key_with_number_value_is_a_fact() {
        let p = parse_decomposition(r#"{"1999": 1}"#, 1).unwrap();
        assert_eq!(p.units, units(&[(0, &["1999"])]));
    }

    #[test]
    fn repaired_and_deduplicated() {
        let raw = "```\nGOOD ATOMIC FACTS:\n{'It's here.': 1, 'It's here.': 1,}\n```";
        assert_eq!(parse_decomposition(raw, 1).unwrap().units, units(&[(0, &["It's here."])]));
    }

    #[test]
    fn empty_object_means_nothing_attributable() {
        assert!(parse_decomposition("GOOD ATOMIC FACTS:\n{}", 2).unwrap().units.is_empty());
    }

    #[test]
    fn garbage_is_an_error() {
        assert!(parse_decomposition("I cannot help with that.", 1).is_err());
    }

    #[test]
    fn fact_lists() {
        let raw = "Facts:\n- Alex is an engineer.\n- Alex lives in Paris.\n- Alex is an engineer.";
        assert_eq!(parse_fact_list(raw).unwrap(), vec!["Alex is an engineer.", "Alex lives in Paris."]);
        assert_eq!(parse_fact_list("1. A.\n2) B.").unwrap(), vec!["A.", "B."]);
        assert_eq!(parse_fact_list("Just one fact.").unwrap(), vec!["Just one fact."]);
        assert_eq!(parse_fact_list("[\"x\", \"y\"]").unwrap(), vec!["x", "y"]);
        assert!(parse_fact_list("  \n ").is_err());
    }
}
