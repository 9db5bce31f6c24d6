// SPDX-License-Identifier: Apache-2.0

//! Line-delimited JSON dataset files.
//!
//! The first line is a header object; every following line is one object
//! tagged by `kind`. Output order is fully determined by the dataset, so
//! persisting the same dataset twice yields identical bytes.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{ChangePartRecord, CommitRecord, Dataset, Exclusion, FeatureSettings, TicketData, TicketTimeline};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::remarks::{Remark, TriggerLink};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    created_at: i64,
    repo_path: Option<String>,
    traced: bool,
    feature_settings: Option<FeatureSettings>,
}

#[derive(Serialize, Deserialize)]
struct LinkLine<T> {
    ticket_id: String,
    #[serde(flatten)]
    link: T,
}

#[derive(Serialize, Deserialize)]
struct FeatureLine<T> {
    record_id: String,
    values: T,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LineOut<'a> {
    Header(Header),
    Commit(&'a CommitRecord),
    Ticket(&'a TicketTimeline),
    Record(&'a ChangePartRecord),
    Remark(&'a Remark),
    Link(LinkLine<&'a TriggerLink>),
    Exclusion(&'a Exclusion),
    Features(FeatureLine<&'a FeatureVector>),
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Invalid(format!("cannot serialize dataset: {e}"))
}

pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let mut emit = |line: LineOut<'_>| -> Result<()> {
        serde_json::to_writer(&mut out, &line).map_err(json_err)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<dataset output>", e))
    };
    emit(LineOut::Header(Header {
        schema_version: dataset.schema_version,
        created_at: dataset.created_at,
        repo_path: dataset.repo_path.clone(),
        traced: dataset.traced,
        feature_settings: dataset.feature_settings.clone(),
    }))?;
    for c in &dataset.commits {
        emit(LineOut::Commit(c))?;
    }
    for (ticket_id, t) in &dataset.tickets {
        emit(LineOut::Ticket(&t.timeline))?;
        for r in &t.records {
            emit(LineOut::Record(r))?;
        }
        for r in &t.remarks {
            emit(LineOut::Remark(r))?;
        }
        for l in &t.trigger_links {
            emit(LineOut::Link(LinkLine {
                ticket_id: ticket_id.clone(),
                link: l,
            }))?;
        }
    }
    for e in &dataset.excluded_tickets {
        emit(LineOut::Exclusion(e))?;
    }
    for r in dataset.records() {
        if let Some(values) = &r.features {
            emit(LineOut::Features(FeatureLine {
                record_id: r.id.clone(),
                values,
            }))?;
        }
    }
    drop(emit);
    out.flush().map_err(|e| Error::io("<dataset output>", e))
}

pub fn persist_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(dataset, file)
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let mut dataset = Dataset::default();
    let mut saw_header = false;
    let mut features: Vec<(usize, FeatureLine<FeatureVector>)> = Vec::new();

    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<dataset input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::DatasetFormat {
            line: line_no,
            message,
        };
        let mut value: Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let kind = value
            .as_object_mut()
            .and_then(|o| o.remove("kind"))
            .and_then(|k| k.as_str().map(str::to_owned))
            .ok_or_else(|| bad("missing `kind`".into()))?;

        if !saw_header {
            if kind != "header" {
                return Err(bad("first line must be the header".into()));
            }
            let found = value
                .get("schema_version")
                .and_then(Value::as_u64)
                .ok_or_else(|| bad("header without schema_version".into()))?
                as u32;
            if found != SCHEMA_VERSION {
                return Err(Error::SchemaVersion {
                    found,
                    expected: SCHEMA_VERSION,
                });
            }
            let header: Header = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
            dataset.schema_version = header.schema_version;
            dataset.created_at = header.created_at;
            dataset.repo_path = header.repo_path;
            dataset.traced = header.traced;
            dataset.feature_settings = header.feature_settings;
            saw_header = true;
            continue;
        }

        fn parse<T: for<'de> Deserialize<'de>>(v: Value) -> std::result::Result<T, String> {
            serde_json::from_value(v).map_err(|e| e.to_string())
        }
        match kind.as_str() {
            "commit" => dataset.commits.push(parse(value).map_err(bad)?),
            "ticket" => {
                let timeline: TicketTimeline = parse(value).map_err(bad)?;
                dataset.tickets.insert(
                    timeline.ticket_id.clone(),
                    TicketData {
                        timeline,
                        records: Vec::new(),
                        remarks: Vec::new(),
                        trigger_links: Vec::new(),
                    },
                );
            }
            "record" => {
                let r: ChangePartRecord = parse(value).map_err(bad)?;
                ticket_mut(&mut dataset, &r.ticket_id, line_no)?.records.push(r);
            }
            "remark" => {
                let r: Remark = parse(value).map_err(bad)?;
                ticket_mut(&mut dataset, &r.ticket_id, line_no)?.remarks.push(r);
            }
            "link" => {
                let l: LinkLine<TriggerLink> = parse(value).map_err(bad)?;
                ticket_mut(&mut dataset, &l.ticket_id, line_no)?.trigger_links.push(l.link);
            }
            "exclusion" => dataset.excluded_tickets.push(parse(value).map_err(bad)?),
            "features" => features.push((line_no, parse(value).map_err(bad)?)),
            other => return Err(bad(format!("unknown kind `{other}`"))),
        }
    }
    if !saw_header {
        return Err(Error::DatasetFormat {
            line: 0,
            message: "empty dataset file".into(),
        });
    }

    if !features.is_empty() {
        let mut slots: std::collections::HashMap<String, (String, usize)> =
            std::collections::HashMap::new();
        for (ticket_id, t) in &dataset.tickets {
            for (i, r) in t.records.iter().enumerate() {
                slots.insert(r.id.clone(), (ticket_id.clone(), i));
            }
        }
        for (line_no, f) in features {
            let (ticket_id, i) = slots.get(&f.record_id).ok_or_else(|| Error::DatasetFormat {
                line: line_no,
                message: format!("features for unknown record {}", f.record_id),
            })?;
            dataset.tickets.get_mut(ticket_id).expect("slot ticket exists").records[*i]
                .features = Some(f.values);
        }
    }
    Ok(dataset)
}

fn ticket_mut<'a>(dataset: &'a mut Dataset, id: &str, line: usize) -> Result<&'a mut TicketData> {
    dataset
        .tickets
        .get_mut(id)
        .ok_or_else(|| Error::DatasetFormat {
            line,
            message: format!("unknown ticket {id}"),
        })
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file))
}
