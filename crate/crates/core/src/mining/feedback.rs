// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ArchiveEntry;
use crate::rules::parse_rule;

/// User steering applied between iterations. Rules are given in their
/// printed form, e.g. `(author == 'bob')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeedbackCommand {
    RejectRule {
        rule: String,
    },
    PinRule {
        rule: String,
    },
    BlacklistFeature {
        feature: String,
    },
    ExcludeTicket {
        ticket_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    /// Empty weights restore the default cost focus.
    SetFocus {
        #[serde(default)]
        weights: BTreeMap<String, f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cost_factor: Option<f64>,
    },
    PurgeArchive {
        predicate: PurgePredicate,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PurgePredicate {
    All,
    UsesFeature { feature: String },
    ContainsRule { rule: String },
    ObjectiveAtLeast { objective: String, value: f64 },
    ObjectiveAtMost { objective: String, value: f64 },
}

impl PurgePredicate {
    pub fn matches(&self, e: &ArchiveEntry) -> bool {
        match self {
            PurgePredicate::All => true,
            PurgePredicate::UsesFeature { feature } => e.ruleset.uses(feature),
            PurgePredicate::ContainsRule { rule } => {
                parse_rule(rule).is_ok_and(|r| e.ruleset.contains(&r))
            }
            PurgePredicate::ObjectiveAtLeast { objective, value } => {
                e.objectives.get(objective).is_some_and(|v| v >= *value)
            }
            PurgePredicate::ObjectiveAtMost { objective, value } => {
                e.objectives.get(objective).is_some_and(|v| v <= *value)
            }
        }
    }
}
