// SPDX-License-Identifier: Apache-2.0

//! Per-record feature catalog.
//!
//! Every record carries one value per catalog feature. Values that do not
//! apply to a record (hunk sizes of a binary file, block counts outside
//! brace-structured sources) are [`FeatureValue::Absent`], never zero.

mod base;
pub mod ngram;
pub mod patterns;
pub mod tokenize;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use base::{compute_features, FeatureContext, FeatureStats};
pub use crate::ingest::FeatureSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Boolean,
}

use FeatureKind::{Boolean as B, Categorical as C, Numeric as N};

/// Feature names and kinds, in catalog order.
pub const CATALOG: &[(&str, FeatureKind)] = &[
    // ticket and commit
    ("issueType", C),
    ("author", C),
    ("authorDay", C),
    ("shiftedAuthorHour", N),
    ("fileCountInCommit", N),
    ("hunkCountInCommit", N),
    ("commitContainsTest", B),
    // file
    ("binary", B),
    ("filetype", C),
    ("srcdir", C),
    ("project", C),
    ("frequentFilename", C),
    ("fileAgeDays", N),
    ("fileCommitCount", N),
    ("distinctFileAuthorCount", N),
    ("newLineCountInFile", N),
    ("recentProjectOwnership", N),
    ("commitsSinceLastRemarkForAuthorInProject", N),
    ("commitsSinceLastRemarkInFile", N),
    ("hunkCountInFile", N),
    ("changetype", C),
    ("gitSimilarity", N),
    ("newShareOfLinesInFile", N),
    ("isNodeModules", B),
    // change part
    ("oldHunkSize", N),
    ("newHunkSize", N),
    ("changeInHunkSize", N),
    ("commentLineCountOld", N),
    ("commentLineCountNew", N),
    ("changeInCommentLineCount", N),
    ("oldBlockCount", N),
    ("newBlockCount", N),
    ("changeInBlockCount", N),
    ("responseForHunkOld", N),
    ("responseForHunkNew", N),
    ("changeInResponseForHunk", N),
    ("whitespaceOnly", B),
    ("packageAndImportOnly", B),
    ("finalChangeOnly", B),
    ("nonnlsChangeOnly", B),
    ("visibilityChangeOnly", B),
    ("overrideAnnotation", C),
    // entropy
    ("entropyCbMax", N),
    ("entropyCbUppQuar", N),
    ("entropyCbMed", N),
    ("entropyCbSum", N),
    ("entropyCbAvg", N),
    ("entropyReMax", N),
    ("entropyReUppQuar", N),
    ("entropyReMed", N),
    ("entropyReSum", N),
    ("entropyReAvg", N),
];

pub fn catalog_len() -> usize {
    CATALOG.len()
}

fn name_index() -> &'static BTreeMap<&'static str, usize> {
    static INDEX: OnceLock<BTreeMap<&'static str, usize>> = OnceLock::new();
    INDEX.get_or_init(|| CATALOG.iter().enumerate().map(|(i, (n, _))| (*n, i)).collect())
}

/// Catalog position of a feature.
pub fn feature_index(name: &str) -> Option<usize> {
    name_index().get(name).copied()
}

pub fn feature_kind(name: &str) -> Option<FeatureKind> {
    feature_index(name).map(|i| CATALOG[i].1)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Num(f64),
    Cat(String),
    Bool(bool),
    Absent,
}

impl FeatureValue {
    pub fn is_absent(&self) -> bool {
        matches!(self, FeatureValue::Absent)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            FeatureValue::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Text form used by equality conditions: booleans are `true`/`false`.
    pub fn as_text(&self) -> Option<std::borrow::Cow<'_, str>> {
        match self {
            FeatureValue::Cat(s) => Some(s.as_str().into()),
            FeatureValue::Bool(b) => Some(if *b { "true" } else { "false" }.into()),
            _ => None,
        }
    }

    fn from_json(v: serde_json::Value) -> Result<Self, String> {
        Ok(match v {
            serde_json::Value::Null => FeatureValue::Absent,
            serde_json::Value::Bool(b) => FeatureValue::Bool(b),
            serde_json::Value::Number(n) => {
                FeatureValue::Num(n.as_f64().ok_or_else(|| format!("bad number {n}"))?)
            }
            serde_json::Value::String(s) => FeatureValue::Cat(s),
            other => return Err(format!("unsupported feature value {other}")),
        })
    }
}

impl Serialize for FeatureValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            FeatureValue::Num(v) => s.serialize_f64(*v),
            FeatureValue::Cat(v) => s.serialize_str(v),
            FeatureValue::Bool(v) => s.serialize_bool(*v),
            FeatureValue::Absent => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for FeatureValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        FeatureValue::from_json(v).map_err(de::Error::custom)
    }
}

/// One value per catalog feature, in catalog order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<FeatureValue>,
}

impl Default for FeatureVector {
    fn default() -> Self {
        FeatureVector {
            values: vec![FeatureValue::Absent; CATALOG.len()],
        }
    }
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> &FeatureValue {
        match feature_index(name) {
            Some(i) => &self.values[i],
            None => &FeatureValue::Absent,
        }
    }

    pub fn at(&self, index: usize) -> &FeatureValue {
        &self.values[index]
    }

    /// Panics on names outside the catalog.
    pub fn set(&mut self, name: &str, value: FeatureValue) {
        let i = feature_index(name).unwrap_or_else(|| panic!("unknown feature {name}"));
        self.values[i] = value;
    }

    pub fn set_num(&mut self, name: &str, value: f64) {
        self.set(name, FeatureValue::Num(value));
    }

    pub fn set_bool(&mut self, name: &str, value: bool) {
        self.set(name, FeatureValue::Bool(value));
    }

    pub fn set_cat(&mut self, name: &str, value: impl Into<String>) {
        self.set(name, FeatureValue::Cat(value.into()));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &FeatureValue)> {
        CATALOG.iter().map(|(n, _)| *n).zip(self.values.iter())
    }
}

impl Serialize for FeatureVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.values.len()))?;
        for (name, value) in self.iter() {
            map.serialize_entry(name, value)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for FeatureVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = FeatureVector;
            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("a map of feature values")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<FeatureVector, A::Error> {
                let mut fv = FeatureVector::default();
                while let Some((name, value)) = map.next_entry::<String, FeatureValue>()? {
                    let i = feature_index(&name)
                        .ok_or_else(|| de::Error::custom(format!("unknown feature `{name}`")))?;
                    fv.values[i] = value;
                }
                Ok(fv)
            }
        }
        d.deserialize_map(V)
    }
}
