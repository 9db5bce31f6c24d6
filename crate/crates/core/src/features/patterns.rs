// SPDX-License-Identifier: Apache-2.0

//! Textual checks on the changed lines of a hunk.

use std::collections::BTreeSet;

fn squeeze(lines: &[String]) -> String {
    lines
        .iter()
        .flat_map(|l| l.chars())
        .filter(|c| !c.is_whitespace())
        .collect()
}

/// Both sides are equal once all whitespace is removed.
pub fn whitespace_only(old: &[String], new: &[String]) -> bool {
    squeeze(old) == squeeze(new)
}

pub fn is_import_line(line: &str) -> bool {
    let t = line.trim();
    t.is_empty()
        || t.starts_with("package ")
        || t.starts_with("import ")
        || t.starts_with("using ")
        || t.starts_with("#include")
}

/// Every changed line is a package, import, using or include statement or
/// blank, and at least one is not blank.
pub fn import_only(old: &[String], new: &[String]) -> bool {
    let all = old.iter().chain(new);
    let mut any = false;
    for l in all {
        if !is_import_line(l) {
            return false;
        }
        any |= !l.trim().is_empty();
    }
    any
}

/// Split into identifier-ish words and single punctuation characters.
fn words(lines: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for line in lines {
        let mut cur = String::new();
        for c in line.chars() {
            if c.is_alphanumeric() || c == '_' || c == '$' {
                cur.push(c);
            } else {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                if !c.is_whitespace() {
                    out.push(c.to_string());
                }
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// The sides differ, and are equal after dropping the given keywords.
fn only_keywords_changed(old: &[String], new: &[String], keywords: &[&str]) -> bool {
    let strip = |lines: &[String]| -> Vec<String> {
        words(lines)
            .into_iter()
            .filter(|w| !keywords.contains(&w.as_str()))
            .collect()
    };
    let (o, n) = (words(old), words(new));
    o != n && strip(old) == strip(new)
}

pub fn final_change_only(old: &[String], new: &[String]) -> bool {
    only_keywords_changed(old, new, &["final"])
}

pub fn visibility_change_only(old: &[String], new: &[String]) -> bool {
    only_keywords_changed(old, new, &["public", "private", "protected"])
}

fn strip_nls(line: &str) -> String {
    let mut s = line.to_string();
    while let Some(i) = s.find("//$NON-NLS-") {
        let rest = &s[i + 2..];
        let end = rest[1..].find('$').map(|j| i + 2 + j + 2).unwrap_or(s.len());
        s.replace_range(i..end, "");
    }
    for ann in ["@SuppressWarnings(\"nls\")", "@SuppressWarnings( \"nls\" )"] {
        s = s.replace(ann, "");
    }
    s
}

/// Only non-externalized-string markers (`//$NON-NLS-n$`) or `nls`
/// suppressions differ.
pub fn nonnls_change_only(old: &[String], new: &[String]) -> bool {
    let o: Vec<String> = old.iter().map(|l| strip_nls(l)).collect();
    let n: Vec<String> = new.iter().map(|l| strip_nls(l)).collect();
    squeeze(old) != squeeze(new) && squeeze(&o) == squeeze(&n)
}

pub fn is_comment_line(line: &str) -> bool {
    let t = line.trim_start();
    ["//", "/*", "*", "<!--", "-->"].iter().any(|p| t.starts_with(p))
}

pub fn comment_line_count(lines: &[String]) -> usize {
    lines.iter().filter(|l| is_comment_line(l)).count()
}

/// Opening braces outside string literals and line comments.
pub fn block_count(lines: &[String]) -> usize {
    let mut count = 0;
    for line in lines {
        let mut quote: Option<char> = None;
        let mut chars = line.chars().peekable();
        while let Some(c) = chars.next() {
            match (quote, c) {
                (Some(_), '\\') => {
                    chars.next();
                }
                (Some(q), c) if c == q => quote = None,
                (Some(_), _) => {}
                (None, '"' | '\'') => quote = Some(c),
                (None, '/') if chars.peek() == Some(&'/') => break,
                (None, '{') => count += 1,
                _ => {}
            }
        }
    }
    count
}

const NOT_CALLS: &[&str] = &[
    "if", "for", "while", "switch", "catch", "return", "synchronized", "try", "do", "else",
    "sizeof", "typeof", "function", "throw", "new",
];

/// Distinct names directly followed by `(`, excluding control keywords.
pub fn call_targets(lines: &[String]) -> usize {
    let mut names = BTreeSet::new();
    for line in lines {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_alphabetic() || chars[i] == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                let mut j = i;
                while j < chars.len() && chars[j] == ' ' {
                    j += 1;
                }
                if chars.get(j) == Some(&'(') && !NOT_CALLS.contains(&name.as_str()) {
                    names.insert(name);
                }
            } else {
                i += 1;
            }
        }
    }
    names.len()
}
