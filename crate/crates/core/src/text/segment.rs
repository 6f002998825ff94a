//! Rule-based sentence segmentation.
//!
//! A boundary is placed after a terminator (`.`, `!`, `?`), together with any
//! directly following terminators and closing quotes or brackets, when the
//! next character is whitespace or the text ends. A full stop that closes a
//! known abbreviation ("Dr.", "e.g.") is not a boundary.

/// Lowercased abbreviations without their final full stop.
const ABBREVIATIONS: &[&str] = &[
    "a.m", "al", "approx", "apr", "aug", "capt", "cf", "ch", "co", "col", "corp", "dec", "dept",
    "dr", "e.g", "ed", "eds", "eq", "eqs", "esp", "etc", "feb", "fig", "figs", "gen", "gov",
    "hon", "i.e", "inc", "jan", "jr", "jul", "jun", "lt", "ltd", "mar", "mr", "mrs", "ms", "mt",
    "nov", "oct", "p.m", "ph.d", "pp", "prof", "ref", "refs", "resp", "rev", "sec", "sep",
    "sept", "sgt", "sr", "st", "u.k", "u.s", "u.s.a", "viz", "vol", "vs",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(
        c,
        '"' | '\'' | ')' | ']' | '}' | '\u{201D}' | '\u{2019}' | '\u{00BB}'
    )
}

fn is_abbreviation(token: &str) -> bool {
    let token = token.trim_start_matches(|c: char| !c.is_alphanumeric());
    let lower = token.to_lowercase();
    ABBREVIATIONS.binary_search(&lower.as_str()).is_ok()
}

/// Splits text into trimmed, non-empty sentences.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    let push = |from: usize, to: usize, out: &mut Vec<String>| {
        let s = text[from..to].trim();
        if !s.is_empty() {
            out.push(s.to_string());
        }
    };

    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminator(chars[j].1) || is_closer(chars[j].1)) {
            j += 1;
        }
        let at_end = j == chars.len();
        if !at_end && !chars[j].1.is_whitespace() {
            i = j;
            continue;
        }
        if c == '.' && j == i + 1 {
            let word_start = text[start..pos]
                .rfind(char::is_whitespace)
                .map(|w| start + w + 1)
                .unwrap_or(start);
            if is_abbreviation(&text[word_start..pos]) {
                i = j;
                continue;
            }
        }
        let end = if at_end { text.len() } else { chars[j].0 };
        push(start, end, &mut out);
        start = end;
        i = j;
    }
    if start < text.len() {
        push(start, text.len(), &mut out);
    }
    out
}
