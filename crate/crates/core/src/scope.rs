// SPDX-License-Identifier: Apache-2.0

//! Nested scope structure of a file version.
//!
//! Brace-structured sources are parsed with a tolerant single-pass brace
//! matcher and markup with a tag matcher. Anything the parsers cannot make
//! sense of degrades to a plain tree that has only the file root.

use serde::{Deserialize, Serialize};

/// Inclusive, 1-based line range. `end < start` denotes the empty range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineRange {
    pub start: u32,
    pub end: u32,
}

impl LineRange {
    pub fn new(start: u32, end: u32) -> Self {
        LineRange { start, end }
    }

    pub fn single(line: u32) -> Self {
        LineRange {
            start: line,
            end: line,
        }
    }

    /// `len` lines starting at `start`, or `None` when `len` is zero.
    pub fn with_len(start: u32, len: u32) -> Option<Self> {
        (len > 0).then(|| LineRange {
            start,
            end: start + len - 1,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn len(&self) -> u32 {
        if self.is_empty() {
            0
        } else {
            self.end - self.start + 1
        }
    }

    pub fn contains(&self, line: u32) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn contains_range(&self, other: &LineRange) -> bool {
        !other.is_empty() && self.start <= other.start && other.end <= self.end
    }

    pub fn intersects(&self, other: &LineRange) -> bool {
        !self.is_empty() && !other.is_empty() && self.start <= other.end && other.start <= self.end
    }

    pub fn lines(&self) -> impl Iterator<Item = u32> {
        self.start..=self.end
    }
}

impl std::fmt::Display for LineRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FileKind {
    BraceStructured,
    Markup,
    Plain,
}

impl FileKind {
    pub fn from_path(path: &str) -> FileKind {
        match extension(path).to_ascii_lowercase().as_str() {
            "java" | "ts" | "js" | "c" | "h" | "cpp" | "cs" | "go" => FileKind::BraceStructured,
            "xml" | "xsd" | "html" | "xhtml" => FileKind::Markup,
            _ => FileKind::Plain,
        }
    }
}

/// Extension of the last path segment without the dot, or `""`.
pub fn extension(path: &str) -> &str {
    let name = path.rsplit('/').next().unwrap_or(path);
    match name.rfind('.') {
        Some(i) if i > 0 => &name[i + 1..],
        _ => "",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeKind {
    File,
    Class,
    Method,
    Block,
    Element,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeNode {
    pub kind: NodeKind,
    pub range: LineRange,
    pub children: Vec<ScopeNode>,
}

impl ScopeNode {
    fn depth(&self) -> usize {
        1 + self.children.iter().map(ScopeNode::depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeTree {
    pub file_kind: FileKind,
    pub root: ScopeNode,
    /// Set when the parser gave up and fell back to a plain tree.
    pub degraded: bool,
}

impl ScopeTree {
    pub fn plain(line_count: u32) -> Self {
        ScopeTree {
            file_kind: FileKind::Plain,
            root: file_root(line_count, Vec::new()),
            degraded: false,
        }
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Smallest node whose range strictly contains `range`.
    fn enclosing(&self, range: &LineRange) -> Option<&ScopeNode> {
        if !self.root.range.contains_range(range) {
            return None;
        }
        let mut best = &self.root;
        let mut node = &self.root;
        'descend: loop {
            for child in &node.children {
                if child.range.contains_range(range) {
                    if child.range != *range {
                        best = child;
                    }
                    node = child;
                    continue 'descend;
                }
            }
            return Some(best);
        }
    }
}

fn file_root(line_count: u32, children: Vec<ScopeNode>) -> ScopeNode {
    ScopeNode {
        kind: NodeKind::File,
        range: LineRange::new(1, line_count),
        children,
    }
}

/// Search region used while tracing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scope {
    LineRange { range: LineRange },
    Structural { range: LineRange, node: NodeKind },
    File,
    WholeTicket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScopeVariant {
    LineRange,
    Structural,
    File,
    WholeTicket,
}

impl ScopeVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ScopeVariant::LineRange => "LINE_RANGE",
            ScopeVariant::Structural => "STRUCTURAL",
            ScopeVariant::File => "FILE",
            ScopeVariant::WholeTicket => "WHOLE_TICKET",
        }
    }
}

impl Scope {
    pub fn variant(&self) -> ScopeVariant {
        match self {
            Scope::LineRange { .. } => ScopeVariant::LineRange,
            Scope::Structural { .. } => ScopeVariant::Structural,
            Scope::File => ScopeVariant::File,
            Scope::WholeTicket => ScopeVariant::WholeTicket,
        }
    }

    pub fn range(&self) -> Option<LineRange> {
        match self {
            Scope::LineRange { range } | Scope::Structural { range, .. } => Some(*range),
            _ => None,
        }
    }
}

/// The next larger scope, or `None` above file level.
pub fn expand(scope: &Scope, tree: &ScopeTree) -> Option<Scope> {
    let range = scope.range()?;
    if tree.file_kind == FileKind::Plain {
        return Some(Scope::File);
    }
    match tree.enclosing(&range) {
        Some(node) if node.kind != NodeKind::File => Some(Scope::Structural {
            range: node.range,
            node: node.kind,
        }),
        _ => Some(Scope::File),
    }
}

pub fn build_scope_tree(content: &str, file_kind: FileKind) -> ScopeTree {
    let line_count = line_count(content);
    let parsed = match file_kind {
        FileKind::Plain => return ScopeTree::plain(line_count),
        FileKind::BraceStructured => parse_braces(content),
        FileKind::Markup => parse_markup(content, false),
    };
    match parsed {
        Some(children) => ScopeTree {
            file_kind,
            root: file_root(line_count, normalize(children)),
            degraded: false,
        },
        None => ScopeTree {
            degraded: true,
            ..ScopeTree::plain(line_count)
        },
    }
}

/// Like [`build_scope_tree`] with the kind taken from the path. HTML void
/// elements are treated as self-closing for `.html` and `.xhtml`.
pub fn build_scope_tree_for_path(content: &str, path: &str) -> ScopeTree {
    let kind = FileKind::from_path(path);
    let ext = extension(path).to_ascii_lowercase();
    if kind == FileKind::Markup && (ext == "html" || ext == "xhtml") {
        let line_count = line_count(content);
        return match parse_markup(content, true) {
            Some(children) => ScopeTree {
                file_kind: kind,
                root: file_root(line_count, normalize(children)),
                degraded: false,
            },
            None => ScopeTree {
                degraded: true,
                ..ScopeTree::plain(line_count)
            },
        };
    }
    build_scope_tree(content, kind)
}

pub fn line_count(content: &str) -> u32 {
    let newlines = content.bytes().filter(|&b| b == b'\n').count();
    (newlines + usize::from(!content.is_empty() && !content.ends_with('\n'))) as u32
}

/// Merge siblings that share lines (`} else {`), recursively.
fn normalize(mut nodes: Vec<ScopeNode>) -> Vec<ScopeNode> {
    nodes.sort_by_key(|n| (n.range.start, n.range.end));
    let mut out: Vec<ScopeNode> = Vec::with_capacity(nodes.len());
    for node in nodes {
        match out.last_mut() {
            Some(prev) if prev.range.end >= node.range.start => {
                prev.range.end = prev.range.end.max(node.range.end);
                prev.children.extend(node.children);
            }
            _ => out.push(node),
        }
    }
    for node in &mut out {
        node.children = normalize(std::mem::take(&mut node.children));
    }
    out
}

fn brace_kind(depth: usize) -> NodeKind {
    match depth {
        0 => NodeKind::Class,
        1 => NodeKind::Method,
        _ => NodeKind::Block,
    }
}

struct Open {
    line: u32,
    children: Vec<ScopeNode>,
}

fn parse_braces(content: &str) -> Option<Vec<ScopeNode>> {
    let chars: Vec<char> = content.chars().collect();
    let mut top: Vec<ScopeNode> = Vec::new();
    let mut stack: Vec<Open> = Vec::new();
    let mut line = 1u32;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => line += 1,
            '/' if next == Some('/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '/' if next == Some('*') => {
                i += 2;
                while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    i += 1;
                }
                i += 2;
                continue;
            }
            '"' if next == Some('"') && chars.get(i + 2) == Some(&'"') => {
                // text block
                i += 3;
                while i < chars.len() && !(chars[i] == '"' && chars.get(i + 1) == Some(&'"') && chars.get(i + 2) == Some(&'"')) {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i += 3;
                continue;
            }
            '"' | '\'' => {
                // ordinary literals end at the closing quote or the line end
                i += 1;
                while i < chars.len() && chars[i] != c && chars[i] != '\n' {
                    if chars[i] == '\\' && chars.get(i + 1).is_some_and(|&n| n != '\n') {
                        i += 1;
                    }
                    i += 1;
                }
                if i < chars.len() && chars[i] == c {
                    i += 1;
                }
                continue;
            }
            '`' => {
                i += 1;
                while i < chars.len() && chars[i] != '`' {
                    if chars[i] == '\n' {
                        line += 1;
                    }
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
                i += 1;
                continue;
            }
            '{' => stack.push(Open {
                line,
                children: Vec::new(),
            }),
            '}' => {
                let open = stack.pop()?;
                let node = ScopeNode {
                    kind: brace_kind(stack.len()),
                    range: LineRange::new(open.line, line),
                    children: open.children,
                };
                match stack.last_mut() {
                    Some(parent) => parent.children.push(node),
                    None => top.push(node),
                }
            }
            _ => {}
        }
        i += 1;
    }
    stack.is_empty().then_some(top)
}

const HTML_VOID: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

struct OpenTag {
    name: String,
    line: u32,
    children: Vec<ScopeNode>,
}

fn parse_markup(content: &str, html: bool) -> Option<Vec<ScopeNode>> {
    let bytes = content.as_bytes();
    let mut line = 1u32;
    let mut i = 0;
    let mut top: Vec<ScopeNode> = Vec::new();
    let mut stack: Vec<OpenTag> = Vec::new();

    // Advance to just past `needle`, counting lines; false if not found.
    fn skip_past(bytes: &[u8], i: &mut usize, line: &mut u32, needle: &[u8]) -> bool {
        while *i < bytes.len() {
            if bytes[*i..].starts_with(needle) {
                *i += needle.len();
                return true;
            }
            if bytes[*i] == b'\n' {
                *line += 1;
            }
            *i += 1;
        }
        false
    }

    fn push_node(stack: &mut [OpenTag], top: &mut Vec<ScopeNode>, node: ScopeNode) {
        match stack.last_mut() {
            Some(parent) => parent.children.push(node),
            None => top.push(node),
        }
    }

    while i < bytes.len() {
        match bytes[i] {
            b'\n' => {
                line += 1;
                i += 1;
            }
            b'<' => {
                let rest = &bytes[i..];
                if rest.starts_with(b"<!--") {
                    i += 4;
                    if !skip_past(bytes, &mut i, &mut line, b"-->") {
                        return None;
                    }
                } else if rest.starts_with(b"<![CDATA[") {
                    i += 9;
                    if !skip_past(bytes, &mut i, &mut line, b"]]>") {
                        return None;
                    }
                } else if rest.starts_with(b"<?") {
                    i += 2;
                    if !skip_past(bytes, &mut i, &mut line, b"?>") {
                        return None;
                    }
                } else if rest.starts_with(b"<!") {
                    i += 2;
                    if !skip_past(bytes, &mut i, &mut line, b">") {
                        return None;
                    }
                } else {
                    let start_line = line;
                    let closing = rest.get(1) == Some(&b'/');
                    i += if closing { 2 } else { 1 };
                    let name_start = i;
                    while i < bytes.len()
                        && !bytes[i].is_ascii_whitespace()
                        && !matches!(bytes[i], b'>' | b'/')
                    {
                        i += 1;
                    }
                    let name = String::from_utf8_lossy(&bytes[name_start..i]).to_string();
                    if name.is_empty() {
                        // a stray `<` in text
                        continue;
                    }
                    // scan to the end of the tag, honoring quoted attribute values
                    let mut quote: Option<u8> = None;
                    let self_closing = loop {
                        let Some(&b) = bytes.get(i) else {
                            return None;
                        };
                        i += 1;
                        match (quote, b) {
                            (_, b'\n') => line += 1,
                            (Some(q), b) if b == q => quote = None,
                            (Some(_), _) => {}
                            (None, b'"' | b'\'') => quote = Some(b),
                            (None, b'>') => break bytes.get(i.wrapping_sub(2)) == Some(&b'/'),
                            _ => {}
                        }
                    };
                    let lname = name.to_ascii_lowercase();
                    if closing {
                        let open = stack.pop()?;
                        let matches = if html {
                            open.name.eq_ignore_ascii_case(&name)
                        } else {
                            open.name == name
                        };
                        if !matches {
                            return None;
                        }
                        let node = ScopeNode {
                            kind: NodeKind::Element,
                            range: LineRange::new(open.line, line),
                            children: open.children,
                        };
                        push_node(&mut stack, &mut top, node);
                    } else if self_closing || (html && HTML_VOID.contains(&lname.as_str())) {
                        let node = ScopeNode {
                            kind: NodeKind::Element,
                            range: LineRange::new(start_line, line),
                            children: Vec::new(),
                        };
                        push_node(&mut stack, &mut top, node);
                    } else if html && (lname == "script" || lname == "style") {
                        let close = format!("</{lname}");
                        let lower = content[i..].to_ascii_lowercase();
                        let Some(offset) = lower.find(&close) else {
                            return None;
                        };
                        line += content[i..i + offset].matches('\n').count() as u32;
                        i += offset;
                        stack.push(OpenTag {
                            name,
                            line: start_line,
                            children: Vec::new(),
                        });
                    } else {
                        stack.push(OpenTag {
                            name,
                            line: start_line,
                            children: Vec::new(),
                        });
                    }
                }
            }
            _ => i += 1,
        }
    }
    stack.is_empty().then_some(top)
}
