//! Regenerates the committed replay cache and golden hashes.
//!
//! Runs the fixture pipeline in record mode for every strategy and
//! attributor, answering model requests with a deterministic scripted
//! responder instead of a real model. Then replays each run and writes the
//! stage hashes to `fixtures/golden/hashes.json`.
//!
//! ```text
//! cargo run -p attrib-cli --example record_fixtures
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use attrib_cli::config::PipelineConfig;
use attrib_cli::pipeline::run_pipeline;
use attrib_core::http::{HttpReply, Transport, TransportError};
use attrib_core::retrieve::{Bm25Index, Bm25Params};
use attrib_core::EvidenceSentence;
use serde_json::{json, Value};

struct Scripted;

fn after<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    text.rfind(marker).map(|i| &text[i + marker.len()..])
}

fn first_line(text: &str) -> &str {
    text.split("\n\n").next().unwrap_or("")
}

/// `[1:{"a"}, 2:{"b"}]` to its sentences.
fn numbered_answer(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find(":{") {
        rest = &rest[i + 2..];
        let mut stream = serde_json::Deserializer::from_str(rest).into_iter::<String>();
        match stream.next() {
            Some(Ok(s)) => {
                rest = &rest[stream.byte_offset()..];
                out.push(s);
            }
            _ => break,
        }
    }
    out
}

fn sentence_case(s: &str) -> String {
    let s = s.trim().trim_end_matches(['.', ',', ';']);
    let mut c = s.chars();
    match c.next() {
        Some(f) => format!("{}{}.", f.to_uppercase(), c.as_str()),
        None => String::new(),
    }
}

/// Splits at clause boundaries and keeps pieces of three words or more.
fn clauses(sentence: &str) -> Vec<String> {
    let mut pieces = vec![sentence.to_string()];
    for sep in ["; ", ", and ", " and ", ", while ", ", where ", ", which ", ": ", ", "] {
        pieces = pieces.iter().flat_map(|p| p.split(sep).map(str::to_string).collect::<Vec<_>>()).collect();
    }
    let kept: Vec<String> = pieces.iter().filter(|p| p.split_whitespace().count() >= 3).map(|p| sentence_case(p)).collect();
    if kept.is_empty() {
        vec![sentence_case(sentence)]
    } else {
        kept
    }
}

fn cog_reply(prompt: &str) -> String {
    let with_negatives = prompt.contains("BAD ATOMIC FACTS:");
    let answer = after(prompt, "ANSWER:\n").map(first_line).unwrap_or("");
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for (i, s) in numbered_answer(answer).iter().enumerate() {
        let n = i + 1;
        if s.trim_end().ends_with('?') {
            if !with_negatives {
                good.push((sentence_case(s), n));
            }
            continue;
        }
        let parts = clauses(s);
        if parts.len() > 1 && !with_negatives {
            good.push((s.clone(), n));
        }
        for p in parts {
            good.push((p, n));
        }
        bad.push((format!("Sentence {n} is relevant."), n));
    }
    let render = |facts: &[(String, usize)]| {
        let items: Vec<String> = facts.iter().map(|(f, n)| format!("{} : {n}", json!(f))).collect();
        format!("{{{}}}", items.join(",\n"))
    };
    format!("GOOD ATOMIC FACTS:\n{}\n\nBAD ATOMIC FACTS:\n{}", render(&good), render(&bad))
}

fn factscore_reply(prompt: &str) -> String {
    let sentence = after(prompt, "Sentence: ").and_then(|s| s.split("\nFacts:").next()).unwrap_or("");
    let mut facts = clauses(sentence);
    if facts.len() == 1 && sentence.split_whitespace().count() > 6 {
        if let Some((head, _)) = sentence.split_once(" to ").or_else(|| sentence.split_once(" with ")) {
            facts.push(sentence_case(head));
        }
    }
    facts.iter().map(|f| format!("- {f}")).collect::<Vec<_>>().join("\n")
}

fn attribution_reply(prompt: &str) -> String {
    let list = |marker: &str| -> Vec<String> {
        after(prompt, marker).map(first_line).and_then(|l| serde_json::from_str(l).ok()).unwrap_or_default()
    };
    let units = list("INFORMATION UNITS: ");
    let candidates = list("EVIDENCES: ");
    let evidence: Vec<EvidenceSentence> = EvidenceSentence::document(&candidates);
    let index = Bm25Index::build(&evidence, Bm25Params::default());
    let mut scored: Vec<(f64, usize)> = index.scores(&units.join(" ")).into_iter().enumerate().map(|(i, s)| (s, i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let best = scored.first().map_or(0.0, |s| s.0);
    let picked: Vec<String> = scored
        .iter()
        .filter(|(s, _)| *s > 2.0 && *s >= 0.6 * best)
        .take(2)
        .enumerate()
        .map(|(rank, (_, i))| {
            let text = &candidates[*i];
            // the second pick comes back lightly reformatted
            if rank == 1 {
                text.to_lowercase().trim_end_matches('.').to_string()
            } else {
                text.clone()
            }
        })
        .collect();
    serde_json::to_string(&picked).unwrap()
}

impl Transport for Scripted {
    fn post_json(&self, _url: &str, _headers: &[(String, String)], body: &Value) -> Result<HttpReply, TransportError> {
        let prompt = body["messages"][0]["content"].as_str().unwrap_or("");
        let content = if prompt.ends_with("GOOD ATOMIC FACTS:\n") {
            cog_reply(prompt)
        } else if prompt.ends_with("Facts:\n") {
            factscore_reply(prompt)
        } else if prompt.contains("INFORMATION UNITS: ") {
            attribution_reply(prompt)
        } else {
            "[]".to_string()
        };
        let reply = json!({"choices": [{"message": {"role": "assistant", "content": content}}]});
        Ok(HttpReply { status: 200, body: reply.to_string() })
    }
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let config = root.join("pipeline.toml");
    let scratch = tempfile::tempdir().expect("temp dir");
    let mut golden: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for strategy in ["nil", "factscore", "cog", "cog_no_neg"] {
        for attributor in ["bm25", "llm"] {
            let name = format!("{strategy}+{attributor}");
            let out = scratch.path().join(&name);
            let set = |mode: &str| {
                vec![
                    format!("decomposer.strategy=\"{strategy}\""),
                    format!("attributor.kind=\"{attributor}\""),
                    format!("output_dir=\"{}\"", out.display()),
                    format!("cache.mode=\"{mode}\""),
                ]
            };
            let cfg = PipelineConfig::load(Some(&config), &set("record")).expect("config");
            run_pipeline(&cfg, Some(Arc::new(Scripted))).expect("record run");
            let cfg = PipelineConfig::load(Some(&config), &set("replay")).expect("config");
            let manifest = run_pipeline(&cfg, None).expect("replay run");
            assert_eq!(manifest.network_calls, 0);
            golden.insert(name.clone(), manifest.stages.into_iter().map(|(k, v)| (k, v.sha256)).collect());
            println!("{name}: recorded");
        }
    }
    let path = root.join("golden/hashes.json");
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, serde_json::to_string_pretty(&golden).unwrap() + "\n").unwrap();
    println!("wrote {}", path.display());
}
