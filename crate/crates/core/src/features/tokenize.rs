// SPDX-License-Identifier: Apache-2.0

//! Lexical tokens for the n-gram models.
//!
//! Identifiers and keywords are kept verbatim, other non-space characters
//! become single-character tokens, and literals collapse to `<num>` and
//! `<str>`. Line comments are dropped.

pub const NUM: &str = "<num>";
pub const STR: &str = "<str>";

pub fn tokenize_line(line: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            break;
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                i += 1;
            }
            out.push(NUM.to_string());
        } else if c == '"' || c == '\'' || c == '`' {
            i += 1;
            while i < chars.len() && chars[i] != c {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i += 1;
            out.push(STR.to_string());
        } else {
            out.push(c.to_string());
            i += 1;
        }
    }
}

pub fn tokenize_lines<S: AsRef<str>>(lines: &[S]) -> Vec<String> {
    let mut out = Vec::new();
    for l in lines {
        tokenize_line(l.as_ref(), &mut out);
    }
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for l in text.lines() {
        tokenize_line(l, &mut out);
    }
    out
}
