//! Prompt templates for the LLM decomposers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{AnswerPart, Question};

pub const COG_TASK: &str = "You are a helpful assistant. You will be given a question and corresponding answer that is grounded to document. You need to break down the answer for a given question into information units. The answer is already split into sentences. Map each sentence from the answer to the corresponding information unit/ units. Give only those information units that are attributable to the grounded document.";

pub const GOOD_INSTRUCTIONS: [&str; 5] = [
    "Give information units that are relevant to the sentence.",
    "Information units should be meaningful.",
    "Break down information units at conjunctions.",
    "Information units should be co-referenced with respect to question.",
    "When the information units are put back together, it should convey the same information as the answer.",
];

pub const BAD_INSTRUCTIONS: [&str; 4] = [
    "Information units that convey duplicate information.",
    "Information units that are non statements.",
    "Information units that are not meaningful to the question.",
    "Information units that repeat facts present in the answer for introduction, conclusion or summary of an answer.",
];

/// One of the nine decomposition instructions, numbered as listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instruction {
    Good(u8),
    Bad(u8),
}

impl Instruction {
    pub fn all() -> Vec<Instruction> {
        (1..=5).map(Instruction::Good).chain((1..=4).map(Instruction::Bad)).collect()
    }
}

/// A worked decomposition. Sentence numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub question: String,
    pub answer: Vec<String>,
    pub good: Vec<(String, usize)>,
    #[serde(default)]
    pub bad: Vec<(String, usize)>,
    /// Instructions this example demonstrates.
    #[serde(default)]
    pub covers: Vec<Instruction>,
}

impl FewShotExample {
    pub fn has_bad_units(&self) -> bool {
        !self.bad.is_empty()
    }
}

fn ex(
    question: &str,
    answer: &[&str],
    good: &[(&str, usize)],
    bad: &[(&str, usize)],
    covers: &[Instruction],
) -> FewShotExample {
    FewShotExample {
        question: question.into(),
        answer: answer.iter().map(|s| s.to_string()).collect(),
        good: good.iter().map(|(f, n)| (f.to_string(), *n)).collect(),
        bad: bad.iter().map(|(f, n)| (f.to_string(), *n)).collect(),
        covers: covers.to_vec(),
    }
}

/// Built-in examples in prompt order. The first is the canonical one; the
/// others add coverage for the instructions it does not show.
pub fn builtin_examples() -> Vec<FewShotExample> {
    use Instruction::{Bad, Good};
    vec![
        ex(
            "Where was 'For You' by Rita Ora filmed?",
            &["The music video for 'For You' by Liam Payne and Rita Ora was filmed at Oheka Castle on Long Island, off the coast of the eastern United States."],
            &[
                ("The song 'For You' is performed by Liam Payne.", 1),
                ("The song 'For You' is performed by Rita Ora.", 1),
                ("The music video for 'For You' was filmed at Oheka Castle.", 1),
                ("Oheka Castle is located on Long Island.", 1),
                ("Long Island is off the coast of the eastern United States.", 1),
            ],
            &[("The song is 'For You'.", 1), ("Liam Payne and Rita Ora were filmed.", 1)],
            &[Good(1), Good(2), Good(3), Good(5), Bad(3)],
        ),
        ex(
            "How do I remove rust from a bike chain?",
            &[
                "Are you asking how to clean a rusty bike chain?",
                "Soak the chain in white vinegar for an hour and then scrub it with a wire brush.",
                "Rinse it, dry it completely and apply chain lube so it does not rust again.",
                "In short, vinegar and scrubbing will get the rust off.",
            ],
            &[
                ("Soaking a bike chain in white vinegar for an hour loosens rust.", 2),
                ("Scrubbing a rusty bike chain with a wire brush removes rust.", 2),
                ("A bike chain should be rinsed and dried completely after rust removal.", 3),
                ("Applying chain lube keeps a bike chain from rusting again.", 3),
            ],
            &[
                ("Are you asking how to clean a rusty bike chain?", 1),
                ("Vinegar and scrubbing will get the rust off.", 4),
                ("Soak it for an hour.", 2),
                ("The chain is soaked in vinegar and the chain is soaked in white vinegar.", 2),
            ],
            &[Good(3), Good(4), Bad(1), Bad(2), Bad(3), Bad(4)],
        ),
        ex(
            "Which datasets are used to evaluate the reader model?",
            &[
                "The reader model is evaluated on SQuAD and TriviaQA.",
                "Both are reading comprehension benchmarks.",
                "Overall, the evaluation uses two well-known datasets.",
            ],
            &[
                ("The reader model is evaluated on SQuAD.", 1),
                ("The reader model is evaluated on TriviaQA.", 1),
                ("SQuAD is a reading comprehension benchmark.", 2),
                ("TriviaQA is a reading comprehension benchmark.", 2),
            ],
            &[
                ("Both are benchmarks.", 2),
                ("The evaluation uses two well-known datasets.", 3),
                ("SQuAD is used.", 1),
            ],
            &[Good(1), Good(3), Good(4), Good(5), Bad(3), Bad(4)],
        ),
    ]
}

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn render_answer<S: AsRef<str>>(sentences: &[S]) -> String {
    let items: Vec<String> = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}:{{{}}}", i + 1, quoted(s.as_ref())))
        .collect();
    format!("[{}]", items.join(", "))
}

fn render_facts(facts: &[(String, usize)]) -> String {
    let items: Vec<String> = facts.iter().map(|(f, n)| format!("{} : {n}", quoted(f))).collect();
    format!("{{{}}}", items.join(",\n"))
}

/// The decomposition instructions, examples, then the question and the
/// whole numbered answer.
pub fn cog_prompt(question: &Question, parts: &[AnswerPart], examples: &[FewShotExample], with_bad: bool) -> String {
    let mut p = String::new();
    p.push_str(COG_TASK);
    p.push_str("\n\nInstruction on what good information units are:\n");
    for (i, line) in GOOD_INSTRUCTIONS.iter().enumerate() {
        let _ = writeln!(p, "{}. {line}", i + 1);
    }
    p.push_str("Instruction on what bad information units are:\n");
    for (i, line) in BAD_INSTRUCTIONS.iter().enumerate() {
        let _ = writeln!(p, "{}. {line}", i + 1);
    }
    p.push_str("\nExamples:\n");
    for e in examples {
        let _ = write!(
            p,
            "\nQUESTION:\n{}\n\nANSWER:\n{}\n\nGOOD ATOMIC FACTS:\n{}\n",
            quoted(&e.question),
            render_answer(&e.answer),
            render_facts(&e.good)
        );
        if with_bad && e.has_bad_units() {
            let _ = write!(p, "\nBAD ATOMIC FACTS:\n{}\n", render_facts(&e.bad));
        }
    }
    let texts: Vec<&str> = parts.iter().map(|a| a.text.as_str()).collect();
    let _ = write!(
        p,
        "\nQUESTION:\n{}\n\nANSWER:\n{}\n\nGOOD ATOMIC FACTS:\n",
        quoted(&question.text),
        render_answer(&texts)
    );
    p
}

pub const FACTSCORE_TASK: &str = "Please breakdown the following sentence into independent facts. Each fact is a short sentence that conveys a single piece of information. Split the sentence exhaustively and list every fact on its own line starting with \"- \".";

pub fn factscore_examples() -> Vec<(String, Vec<String>)> {
    let pairs: [(&str, &[&str]); 2] = [
        (
            "Marie Curie was a physicist and chemist who did pioneering research on radioactivity.",
            &[
                "Marie Curie was a physicist.",
                "Marie Curie was a chemist.",
                "Marie Curie did research on radioactivity.",
                "Marie Curie's research on radioactivity was pioneering.",
            ],
        ),
        (
            "The bridge opened in 1937 and spans the strait between the bay and the ocean.",
            &[
                "The bridge opened in 1937.",
                "The bridge spans a strait.",
                "The strait lies between the bay and the ocean.",
            ],
        ),
    ];
    pairs
        .iter()
        .map(|(s, f)| (s.to_string(), f.iter().map(|x| x.to_string()).collect()))
        .collect()
}

/// One sentence per prompt; the question is not shown.
pub fn factscore_prompt(part: &AnswerPart) -> String {
    let mut p = String::new();
    p.push_str(FACTSCORE_TASK);
    p.push_str("\n\n");
    for (sentence, facts) in factscore_examples() {
        let _ = writeln!(p, "Sentence: {sentence}\nFacts:");
        for f in facts {
            let _ = writeln!(p, "- {f}");
        }
        p.push('\n');
    }
    let _ = write!(p, "Sentence: {}\nFacts:\n", part.text);
    p
}
