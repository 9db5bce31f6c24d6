// SPDX-License-Identifier: Apache-2.0

//! `skip when … unless …` rulesets.
//!
//! A record is skipped when some inclusion rule holds and no exclusion rule
//! holds; a rule holds when all of its conditions hold. Absent feature values
//! never satisfy a condition, whatever the operator.
//!
//! ```text
//! skip when one of
//!   (whitespaceOnly == 'true')
//!   or (changeInHunkSize >= -0.5 and hunkCountInFile >= 147.5)
//! unless one of
//!   (srcdir == 'src')
//! ```

mod eval;
mod export;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{feature_kind, FeatureKind, FeatureValue, FeatureVector};

pub use eval::{
    baseline_random, break_even, cost, evaluate, evaluate_naive, trimmed_mean, BreakEven,
    Column, EvalIndex, ABSENT_CODE, ObjectiveVector, RemarkTargets, OBJECTIVES, TRIM_FRACTION,
};
pub use export::{export_labels, write_labels, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Op {
    Eq,
    Neq,
    Leq,
    Geq,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Eq => "==",
            Op::Neq => "!=",
            Op::Leq => "<=",
            Op::Geq => ">=",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Op::Leq | Op::Geq)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Num(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    pub op: Op,
    pub value: Literal,
}

impl Condition {
    pub fn num(feature: &str, op: Op, value: f64) -> Self {
        Condition {
            feature: feature.to_string(),
            op,
            value: Literal::Num(value),
        }
    }

    pub fn text(feature: &str, op: Op, value: &str) -> Self {
        Condition {
            feature: feature.to_string(),
            op,
            value: Literal::Str(value.to_string()),
        }
    }

    /// Check the feature name, the operator and the literal type.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let kind = feature_kind(&self.feature)
            .ok_or_else(|| format!("unknown feature `{}`", self.feature))?;
        match (kind, self.op.is_numeric(), &self.value) {
            (FeatureKind::Numeric, true, Literal::Num(v)) if v.is_finite() => Ok(()),
            (FeatureKind::Numeric, true, _) => Err(format!(
                "`{}` needs a finite numeric literal",
                self.feature
            )),
            (FeatureKind::Numeric, false, _) => Err(format!(
                "operator {} is not allowed on numeric feature `{}`",
                self.op.symbol(),
                self.feature
            )),
            (_, true, _) => Err(format!(
                "operator {} is not allowed on non-numeric feature `{}`",
                self.op.symbol(),
                self.feature
            )),
            (FeatureKind::Boolean, false, Literal::Str(s)) if s == "true" || s == "false" => Ok(()),
            (FeatureKind::Boolean, false, _) => Err(format!(
                "boolean feature `{}` compares against 'true' or 'false'",
                self.feature
            )),
            (FeatureKind::Categorical, false, Literal::Str(_)) => Ok(()),
            (FeatureKind::Categorical, false, Literal::Num(_)) => Err(format!(
                "categorical feature `{}` needs a quoted literal",
                self.feature
            )),
        }
    }

    pub fn matches(&self, value: &FeatureValue) -> bool {
        match (&self.value, self.op) {
            (Literal::Num(t), Op::Leq) => value.as_num().is_some_and(|v| v <= *t),
            (Literal::Num(t), Op::Geq) => value.as_num().is_some_and(|v| v >= *t),
            (Literal::Str(s), Op::Eq) => value.as_text().is_some_and(|v| v == s.as_str()),
            (Literal::Str(s), Op::Neq) => value.as_text().is_some_and(|v| v != s.as_str()),
            _ => false,
        }
    }

    pub fn holds(&self, fv: &FeatureVector) -> bool {
        self.matches(fv.get(&self.feature))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.feature, self.op.symbol())?;
        match &self.value {
            Literal::Num(v) => write!(f, "{v:?}"),
            Literal::Str(s) => {
                f.write_str("'")?;
                for c in s.chars() {
                    if c == '\'' || c == '\\' {
                        f.write_str("\\")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("'")
            }
        }
    }
}

/// Conjunction of conditions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
}

impl Rule {
    pub fn new(conditions: Vec<Condition>) -> Self {
        Rule { conditions }
    }

    pub fn holds(&self, fv: &FeatureVector) -> bool {
        self.conditions.iter().all(|c| c.holds(fv))
    }

    pub fn uses(&self, feature: &str) -> bool {
        self.conditions.iter().any(|c| c.feature == feature)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.conditions.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RuleSet {
    pub incl: Vec<Rule>,
    pub excl: Vec<Rule>,
}

impl RuleSet {
    pub fn new(incl: Vec<Rule>, excl: Vec<Rule>) -> Self {
        RuleSet { incl, excl }
    }

    pub fn skip(&self, fv: &FeatureVector) -> bool {
        self.incl.iter().any(|r| r.holds(fv)) && !self.excl.iter().any(|r| r.holds(fv))
    }

    /// Total number of conditions.
    pub fn complexity(&self) -> usize {
        self.rules().map(|r| r.conditions.len()).sum()
    }

    pub fn features(&self) -> BTreeSet<&str> {
        self.rules()
            .flat_map(|r| r.conditions.iter().map(|c| c.feature.as_str()))
            .collect()
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.incl.iter().chain(&self.excl)
    }

    pub fn uses(&self, feature: &str) -> bool {
        self.rules().any(|r| r.uses(feature))
    }

    pub fn contains(&self, rule: &Rule) -> bool {
        self.rules().any(|r| r == rule)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<RuleSet> {
        parse_ruleset(text)
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let section = |f: &mut fmt::Formatter<'_>, header: &str, rules: &[Rule]| -> fmt::Result {
            writeln!(f, "{header}")?;
            for (i, r) in rules.iter().enumerate() {
                let prefix = if i == 0 { "" } else { "or " };
                writeln!(f, "  {prefix}{r}")?;
            }
            Ok(())
        };
        section(f, "skip when one of", &self.incl)?;
        if !self.excl.is_empty() {
            section(f, "unless one of", &self.excl)?;
        }
        Ok(())
    }
}

pub fn print_ruleset(rs: &RuleSet) -> String {
    rs.to_string()
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Str(String),
    Num(f64),
    Op(Op),
    Open,
    Close,
}

fn lex(line: &str) -> std::result::Result<Vec<Token>, String> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            _ if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Token::Open);
                i += 1;
            }
            ')' => {
                out.push(Token::Close);
                i += 1;
            }
            '=' | '!' | '<' | '>' => {
                let op = match (c, chars.get(i + 1)) {
                    ('=', Some('=')) => Op::Eq,
                    ('!', Some('=')) => Op::Neq,
                    ('<', Some('=')) => Op::Leq,
                    ('>', Some('=')) => Op::Geq,
                    _ => return Err(format!("unknown operator at column {}", i + 1)),
                };
                out.push(Token::Op(op));
                i += 2;
            }
            '\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err("unterminated string literal".into()),
                        Some('\'') => break,
                        Some('\\') => {
                            let Some(&e) = chars.get(i + 1) else {
                                return Err("unterminated string literal".into());
                            };
                            s.push(e);
                            i += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                i += 1;
                out.push(Token::Str(s));
            }
            _ if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = i;
                i += 1;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric()
                        || chars[i] == '.'
                        || (matches!(chars[i], '-' | '+') && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| format!("bad number `{text}`"))?;
                out.push(Token::Num(v));
            }
            _ if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token::Word(chars[start..i].iter().collect()));
            }
            _ => return Err(format!("unexpected `{c}` at column {}", i + 1)),
        }
    }
    Ok(out)
}

fn parse_rule_line(line: &str) -> std::result::Result<Rule, String> {
    let mut tokens = lex(line)?.into_iter().peekable();
    if tokens.peek() == Some(&Token::Word("or".into())) {
        tokens.next();
    }
    if tokens.next() != Some(Token::Open) {
        return Err("expected `(` to start a rule".into());
    }
    let mut conditions = Vec::new();
    loop {
        let feature = match tokens.next() {
            Some(Token::Word(w)) => w,
            other => return Err(format!("expected a feature name, found {other:?}")),
        };
        let op = match tokens.next() {
            Some(Token::Op(op)) => op,
            other => return Err(format!("expected an operator after `{feature}`, found {other:?}")),
        };
        let value = match tokens.next() {
            Some(Token::Num(v)) => Literal::Num(v),
            Some(Token::Str(s)) => Literal::Str(s),
            other => return Err(format!("expected a literal after `{feature}`, found {other:?}")),
        };
        let cond = Condition { feature, op, value };
        cond.validate()?;
        conditions.push(cond);
        match tokens.next() {
            Some(Token::Close) => break,
            Some(Token::Word(w)) if w == "and" => {}
            other => return Err(format!("expected `and` or `)`, found {other:?}")),
        }
    }
    if let Some(extra) = tokens.next() {
        return Err(format!("unexpected {extra:?} after rule"));
    }
    Ok(Rule { conditions })
}

/// Parse one rule in printed form, e.g. `(binary == 'true')`.
pub fn parse_rule(text: &str) -> Result<Rule> {
    parse_rule_line(text.trim()).map_err(|message| Error::RuleParse { line: 1, message })
}

fn normalize_header(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parse the ruleset text format. Spacing is free and `or` prefixes are
/// optional; the printer emits the canonical form.
pub fn parse_ruleset(text: &str) -> Result<RuleSet> {
    let mut rs = RuleSet::default();
    let mut section: Option<bool> = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::RuleParse {
            line: line_no,
            message,
        };
        match normalize_header(line).as_str() {
            "skip when one of" => {
                if section.is_some() {
                    return Err(err("`skip when one of` must come first and only once".into()));
                }
                section = Some(true);
            }
            "unless one of" => {
                if section != Some(true) {
                    return Err(err("`unless one of` must follow the skip section".into()));
                }
                section = Some(false);
            }
            _ => {
                let incl = section.ok_or_else(|| err("expected `skip when one of`".into()))?;
                let rule = parse_rule_line(line).map_err(err)?;
                if incl {
                    rs.incl.push(rule);
                } else {
                    rs.excl.push(rule);
                }
            }
        }
    }
    if section.is_none() {
        return Err(Error::RuleParse {
            line: 1,
            message: "expected `skip when one of`".into(),
        });
    }
    Ok(rs)
}
