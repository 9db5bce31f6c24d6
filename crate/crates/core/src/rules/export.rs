// SPDX-License-Identifier: Apache-2.0

//! Conservative per-record labels for external rule learners.

use std::collections::HashSet;
use std::io::Write;

use crate::error::{Error, Result};
use crate::features::{FeatureValue, CATALOG};
use crate::ingest::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    MustReview,
    NoTrigger,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::MustReview => "must_review",
            Label::NoTrigger => "no_trigger",
        }
    }
}

/// A record is `must_review` when it is a potential trigger of any remark.
pub fn export_labels(dataset: &Dataset) -> Result<Vec<(String, Label)>> {
    if !dataset.traced {
        return Err(Error::NotTraced("labels come from trigger links".into()));
    }
    let mut out = Vec::with_capacity(dataset.record_count());
    for ticket in dataset.tickets.values() {
        let whole = ticket.trigger_links.iter().any(|l| l.whole_ticket);
        let linked: HashSet<&str> = ticket
            .trigger_links
            .iter()
            .flat_map(|l| l.triggers.iter().map(String::as_str))
            .collect();
        for r in &ticket.records {
            let label = if whole || linked.contains(r.id.as_str()) {
                Label::MustReview
            } else {
                Label::NoTrigger
            };
            out.push((r.id.clone(), label));
        }
    }
    Ok(out)
}

fn cell(v: &FeatureValue) -> String {
    match v {
        FeatureValue::Absent => "?".to_string(),
        FeatureValue::Num(x) => x.to_string(),
        other => other.as_text().unwrap_or_default().into_owned(),
    }
}

/// CSV with one row per record: id, ticket, every catalog feature (`?` when
/// absent) and the label. Returns the number of rows written.
pub fn write_labels<W: Write>(dataset: &Dataset, out: W) -> Result<usize> {
    let labels = export_labels(dataset)?;
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::Invalid(format!("writing labels: {e}"));
    let mut header = vec!["record_id", "ticket_id"];
    header.extend(CATALOG.iter().map(|(n, _)| *n));
    header.push("label");
    w.write_record(&header).map_err(csv_err)?;
    let mut rows = 0;
    for ((id, label), r) in labels.iter().zip(dataset.records()) {
        debug_assert_eq!(id, &r.id);
        let fv = r
            .features
            .as_ref()
            .ok_or_else(|| Error::Invalid(format!("record {} has no features", r.id)))?;
        let mut row = vec![r.id.clone(), r.ticket_id.clone()];
        row.extend(fv.iter().map(|(_, v)| cell(v)));
        row.push(label.as_str().to_string());
        w.write_record(&row).map_err(csv_err)?;
        rows += 1;
    }
    w.flush().map_err(|e| Error::io("labels", e))?;
    Ok(rows)
}
