// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use serde::Deserialize;

use super::{TicketEvent, TicketState};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct LogLine {
    ticket: String,
    ts: i64,
    state: String,
    #[serde(default)]
    issue_type: Option<String>,
}

fn parse_state(name: &str) -> Option<TicketState> {
    Some(match name {
        "IN_IMPLEMENTATION" => TicketState::InImplementation,
        "READY_FOR_REVIEW" => TicketState::ReadyForReview,
        "IN_REVIEW" => TicketState::InReview,
        "REVIEW_REJECTED" => TicketState::ReviewRejected,
        "DONE" => TicketState::Done,
        _ => return None,
    })
}

/// Parse a line-delimited ticket event log. Events come back grouped by
/// ticket and sorted by timestamp (stable for equal timestamps).
pub fn parse_ticket_log(text: &str) -> Result<Vec<TicketEvent>> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(line).map_err(|e| Error::TicketLog {
            line: line_no,
            message: e.to_string(),
        })?;
        let new_state = parse_state(&parsed.state).ok_or_else(|| Error::TicketLog {
            line: line_no,
            message: format!("unknown state `{}`", parsed.state),
        })?;
        if parsed.ticket.is_empty() {
            return Err(Error::TicketLog {
                line: line_no,
                message: "empty ticket id".into(),
            });
        }
        events.push(TicketEvent {
            ticket_id: parsed.ticket,
            timestamp: parsed.ts,
            new_state,
            issue_type: parsed.issue_type,
        });
    }
    if events.is_empty() {
        log::warn!("ticket log contains no events");
    }
    events.sort_by(|a, b| {
        a.ticket_id
            .cmp(&b.ticket_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    Ok(events)
}

pub fn ingest_ticket_log(path: &Path) -> Result<Vec<TicketEvent>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ticket_log(&text)
}
