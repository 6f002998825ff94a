//! Forgiving parser for the JSON-like structures language models emit.
//!
//! Accepts everything JSON accepts plus single-quoted strings, trailing
//! commas, missing commas between elements, bare or numeric object keys,
//! Python literals (`True`, `None`) and surrounding code fences. A quote
//! only closes a string when the next non-blank character is a delimiter,
//! so apostrophes inside single-quoted strings survive. Object entries keep
//! their source order.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Loose {
    Null,
    Bool(bool),
    /// Number as written.
    Num(String),
    Str(String),
    Array(Vec<Loose>),
    Object(Vec<(String, Loose)>),
}

impl Loose {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Loose::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Non-negative integer value of a number or numeric string.
    pub fn as_index(&self) -> Option<usize> {
        match self {
            Loose::Num(n) => parse_index(n),
            Loose::Str(s) => parse_index(s.trim()),
            _ => None,
        }
    }
}

fn parse_index(s: &str) -> Option<usize> {
    if let Ok(n) = s.parse::<usize>() {
        return Some(n);
    }
    let f: f64 = s.parse().ok()?;
    (f >= 0.0 && f.fract() == 0.0 && f < 1e15).then_some(f as usize)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

/// Removes a surrounding Markdown code fence, if any.
pub fn strip_code_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let body = match rest.find('\n') {
        Some(nl) => &rest[nl + 1..],
        None => rest,
    };
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

/// Parses one value starting at the first non-blank character.
pub fn parse(text: &str) -> Result<Loose, ParseError> {
    let mut p = Parser::new(strip_code_fences(text));
    p.skip_ws();
    let v = p.value(0)?;
    Ok(v)
}

/// Finds the first position of `open` (`[` or `{`) from which a value of
/// that kind parses, trying later occurrences when earlier ones fail.
pub fn find_value(text: &str, open: char) -> Result<Loose, ParseError> {
    let text = strip_code_fences(text);
    let mut first_err = None;
    for (pos, _) in text.match_indices(open) {
        let mut p = Parser::new(&text[pos..]);
        match p.value(0) {
            Ok(v) => return Ok(v),
            Err(e) => {
                first_err.get_or_insert(ParseError { offset: e.offset + pos, message: e.message });
            }
        }
    }
    Err(first_err.unwrap_or(ParseError {
        offset: 0,
        message: format!("no {open:?} found"),
    }))
}

/// Parses the first list of strings in `text`. Numbers in the list are kept
/// as their written form.
pub fn parse_string_list(text: &str) -> Result<Vec<String>, ParseError> {
    match find_value(text, '[')? {
        Loose::Array(items) => Ok(items
            .into_iter()
            .filter_map(|v| match v {
                Loose::Str(s) => Some(s),
                Loose::Num(n) => Some(n),
                _ => None,
            })
            .collect()),
        _ => unreachable!("find_value('[') returns arrays"),
    }
}

const MAX_DEPTH: usize = 64;

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn err<T>(&self, message: impl fmt::Display) -> Result<T, ParseError> {
        Err(ParseError { offset: self.pos, message: message.to_string() })
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn value(&mut self, depth: usize) -> Result<Loose, ParseError> {
        if depth > MAX_DEPTH {
            return self.err("nesting too deep");
        }
        self.skip_ws();
        match self.peek() {
            None => self.err("unexpected end of input"),
            Some('{') => self.object(depth),
            Some('[') => self.array(depth),
            Some(q) if is_quote(q) => self.string().map(Loose::Str),
            Some(c) if c == '-' || c == '+' || c.is_ascii_digit() => Ok(self.number()),
            Some(c) if c.is_alphabetic() || c == '_' => Ok(self.word()),
            Some(c) => self.err(format!("unexpected {c:?}")),
        }
    }

    fn object(&mut self, depth: usize) -> Result<Loose, ParseError> {
        self.bump();
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('}') => {
                    self.bump();
                    return Ok(Loose::Object(entries));
                }
                Some(',') => {
                    self.bump();
                    continue;
                }
                None => return self.err("unterminated object"),
                _ => {}
            }
            let key = match self.value(depth + 1)? {
                Loose::Str(s) | Loose::Num(s) => s,
                Loose::Bool(b) => b.to_string(),
                Loose::Null => "null".to_string(),
                _ => return self.err("object key must be a scalar"),
            };
            self.skip_ws();
            if self.peek() != Some(':') {
                return self.err("expected ':'");
            }
            self.bump();
            let v = self.value(depth + 1)?;
            entries.push((key, v));
            self.skip_ws();
            match self.peek() {
                Some(',') | Some('}') => {}
                Some(c) if is_quote(c) || c.is_alphanumeric() => {}
                Some(c) => return self.err(format!("unexpected {c:?} in object")),
                None => return self.err("unterminated object"),
            }
        }
    }

    fn array(&mut self, depth: usize) -> Result<Loose, ParseError> {
        self.bump();
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(']') => {
                    self.bump();
                    return Ok(Loose::Array(items));
                }
                Some(',') => {
                    self.bump();
                    continue;
                }
                None => return self.err("unterminated list"),
                _ => {}
            }
            items.push(self.value(depth + 1)?);
            self.skip_ws();
            match self.peek() {
                Some(',') | Some(']') => {}
                Some(c) if is_quote(c) || matches!(c, '{' | '[') => {}
                Some(c) => return self.err(format!("unexpected {c:?} in list")),
                None => return self.err("unterminated list"),
            }
        }
    }

    /// A quote closes the string when followed by a delimiter, the end of
    /// input, or a line break and another quote.
    fn closes_here(&self, after: usize) -> bool {
        let rest = &self.src[after..];
        let trimmed = rest.trim_start();
        match trimmed.chars().next() {
            None => true,
            Some(':' | ',' | '}' | ']') => true,
            Some(c) if is_quote(c) => rest[..rest.len() - trimmed.len()].contains('\n'),
            _ => false,
        }
    }

    fn string(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        let open = self.bump().expect("caller saw a quote");
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                self.pos = start;
                return self.err("unterminated string");
            };
            match c {
                '\\' => {
                    let Some(e) = self.bump() else {
                        return self.err("dangling escape");
                    };
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        'b' => out.push('\u{8}'),
                        'f' => out.push('\u{c}'),
                        'u' => out.push(self.unicode_escape()?),
                        other => out.push(other),
                    }
                }
                c if c == open || (is_close_quote_for(open, c)) => {
                    if self.closes_here(self.pos) {
                        return Ok(out);
                    }
                    out.push(c);
                }
                c => out.push(c),
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, ParseError> {
        let end = self.pos + 4;
        let digits = self.src.get(self.pos..end).filter(|d| d.chars().all(|c| c.is_ascii_hexdigit()));
        let Some(d) = digits else {
            return self.err("bad \\u escape");
        };
        self.pos = end;
        Ok(u32::from_str_radix(d, 16).expect("checked hex"))
    }

    fn unicode_escape(&mut self) -> Result<char, ParseError> {
        let hi = self.hex4()?;
        if (0xD800..0xDC00).contains(&hi) && self.src[self.pos..].starts_with("\\u") {
            let save = self.pos;
            self.pos += 2;
            let lo = self.hex4()?;
            if (0xDC00..0xE000).contains(&lo) {
                let c = 0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00);
                return Ok(char::from_u32(c).unwrap_or('\u{FFFD}'));
            }
            self.pos = save;
        }
        Ok(char::from_u32(hi).unwrap_or('\u{FFFD}'))
    }

    fn number(&mut self) -> Loose {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || matches!(c, '-' | '+' | '.' | 'e' | 'E')) {
            self.bump();
        }
        Loose::Num(self.src[start..self.pos].to_string())
    }

    fn word(&mut self) -> Loose {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_' || c == '-') {
            self.bump();
        }
        match &self.src[start..self.pos] {
            "true" | "True" => Loose::Bool(true),
            "false" | "False" => Loose::Bool(false),
            "null" | "None" => Loose::Null,
            w => Loose::Str(w.to_string()),
        }
    }
}

fn is_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | '\u{201C}' | '\u{2018}')
}

fn is_close_quote_for(open: char, c: char) -> bool {
    matches!((open, c), ('\u{201C}', '\u{201D}') | ('\u{2018}', '\u{2019}'))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn s(x: &str) -> Loose {
        Loose::Str(x.into())
    }

    #[test]
    fn strict_json() {
        let v = parse(r#"{"b": [1, 2.5, "x\"y"], "a": null, "c": true}"#).unwrap();
        assert_eq!(
            v,
            Loose::Object(vec![
                ("b".into(), Loose::Array(vec![Loose::Num("1".into()), Loose::Num("2.5".into()), s("x\"y")])),
                ("a".into(), Loose::Null),
                ("c".into(), Loose::Bool(true)),
            ])
        );
    }

    #[test]
    fn repairs() {
        let fenced = "```json\n{'fact A': 1, 'fact B': 1,}\n```";
        assert_eq!(
            parse(fenced).unwrap(),
            Loose::Object(vec![("fact A".into(), Loose::Num("1".into())), ("fact B".into(), Loose::Num("1".into()))])
        );
        assert_eq!(parse("['a', 'b',]").unwrap(), Loose::Array(vec![s("a"), s("b")]));
    }

    #[test]
    fn apostrophes_inside_single_quotes() {
        let v = parse("['It's Rita Ora's song', 'b']").unwrap();
        assert_eq!(v, Loose::Array(vec![s("It's Rita Ora's song"), s("b")]));
    }

    #[test]
    fn inner_double_quotes() {
        let v = parse(r#"{"He said "stop" loudly.": 1}"#).unwrap();
        assert_eq!(v, Loose::Object(vec![("He said \"stop\" loudly.".into(), Loose::Num("1".into()))]));
    }

    #[test]
    fn bare_and_numeric_keys() {
        let v = parse("{1: ['x'], two: 'y'}").unwrap();
        assert_eq!(
            v,
            Loose::Object(vec![("1".into(), Loose::Array(vec![s("x")])), ("two".into(), s("y"))])
        );
    }

    #[test]
    fn missing_commas_between_lines() {
        let v = parse("{\"a\": 1\n\"b\": 2}").unwrap();
        assert_eq!(v, Loose::Object(vec![("a".into(), Loose::Num("1".into())), ("b".into(), Loose::Num("2".into()))]));
        let v = parse("[\"a\"\n\"b\"]").unwrap();
        assert_eq!(v, Loose::Array(vec![s("a"), s("b")]));
    }

    #[test]
    fn string_list_extraction() {
        let raw = "Sure! Here is the list:\n[\"sentence 23\", \"sentence 34\"]";
        assert_eq!(parse_string_list(raw).unwrap(), vec!["sentence 23", "sentence 34"]);
        assert_eq!(parse_string_list("[]").unwrap(), Vec::<String>::new());
        assert!(parse_string_list("no supporting evidence").is_err());
        assert!(parse_string_list("[unterminated").is_err());
    }

    #[test]
    fn later_bracket_is_tried() {
        let raw = "See [1 for details. [\"a\"]";
        assert_eq!(parse_string_list(raw).unwrap(), vec!["a"]);
    }

    #[test]
    fn unicode_escapes() {
        assert_eq!(parse(r#""é😀""#).unwrap(), s("é😀"));
    }

    #[test]
    fn indices() {
        assert_eq!(Loose::Num("3".into()).as_index(), Some(3));
        assert_eq!(Loose::Num("3.0".into()).as_index(), Some(3));
        assert_eq!(s(" 2 ").as_index(), Some(2));
        assert_eq!(Loose::Num("-1".into()).as_index(), None);
        assert_eq!(Loose::Num("1.5".into()).as_index(), None);
    }

    #[test]
    fn deep_nesting_is_rejected() {
        let deep = "[".repeat(500);
        assert!(parse(&deep).is_err());
    }

    proptest! {
        #[test]
        fn strict_json_string_lists_round_trip(items in prop::collection::vec("[a-zA-Z0-9 ,.:'\"\\\\{}\\[\\]é]{0,20}", 0..6)) {
            let json = serde_json::to_string(&items).unwrap();
            prop_assert_eq!(parse_string_list(&json).unwrap(), items);
        }

        #[test]
        fn never_panics(text in "\\PC{0,60}") {
            let _ = parse(&text);
            let _ = parse_string_list(&text);
        }
    }
}
