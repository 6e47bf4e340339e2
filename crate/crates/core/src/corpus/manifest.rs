//! JSONL persistence for manifests.
//!
//! Line 1 is a header object `{"format", "version", "seed"}`; every further
//! line is one [`Document`] with the label stored as its integer code.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{ClassLabel, Document, Manifest};
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "lsgenre-manifest/1";

const DOCUMENT_FIELDS: [&str; 9] = [
    "id",
    "label",
    "topic",
    "source",
    "raw_text",
    "clean_text",
    "char_len",
    "retrieved_at",
    "url",
];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: String,
    seed: u64,
}

pub fn write_manifest(m: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_to(m, &mut out).map_err(|e| match e {
        Error::Json(j) if j.is_io() => Error::io(path, j.into()),
        other => other,
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_to(m: &Manifest, out: &mut impl Write) -> Result<()> {
    let header = Header {
        format: MANIFEST_FORMAT.into(),
        version: m.version.clone(),
        seed: m.seed,
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n").map_err(serde_json::Error::io)?;
    for d in &m.documents {
        serde_json::to_writer(&mut *out, d)?;
        out.write_all(b"\n").map_err(serde_json::Error::io)?;
    }
    Ok(())
}

/// Serialize to an in-memory JSONL string.
pub fn manifest_to_string(m: &Manifest) -> Result<String> {
    let mut buf = Vec::new();
    write_to(m, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_manifest(reader: impl Read) -> Result<Manifest> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let header_line = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::io("<manifest>", e))?,
        None => return Err(schema(1, None, "format", "missing header line")),
    };
    let header: Header =
        serde_json::from_str(&header_line).map_err(|e| schema(1, None, "header", &e.to_string()))?;
    if header.format != MANIFEST_FORMAT {
        return Err(schema(
            1,
            None,
            "format",
            &format!("unsupported format {:?}, expected {MANIFEST_FORMAT:?}", header.format),
        ));
    }

    let mut documents = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<manifest>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        documents.push(parse_document(&line, line_no)?);
    }
    let m = Manifest {
        version: header.version,
        seed: header.seed,
        documents,
    };
    m.validate()?;
    Ok(m)
}

fn schema(line: usize, record: Option<&str>, field: &str, message: &str) -> Error {
    Error::Manifest {
        line,
        record: record.map(str::to_owned),
        field: field.into(),
        message: message.into(),
    }
}

fn parse_document(line: &str, line_no: usize) -> Result<Document> {
    let value: Value = serde_json::from_str(line).map_err(|e| schema(line_no, None, "<record>", &e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(schema(line_no, None, "<record>", "record is not a JSON object"));
    };
    if let Some(unknown) = obj.keys().find(|k| !DOCUMENT_FIELDS.contains(&k.as_str())) {
        return Err(schema(line_no, None, unknown, "unknown field"));
    }
    let id: String = required(&obj, "id", line_no, None)?;
    let rec = Some(id.as_str());
    let label_code: i64 = required(&obj, "label", line_no, rec)?;
    let label = ClassLabel::from_code(label_code).map_err(|e| schema(line_no, rec, "label", &e.to_string()))?;
    let doc = Document {
        label,
        topic: required(&obj, "topic", line_no, rec)?,
        source: required(&obj, "source", line_no, rec)?,
        raw_text: required(&obj, "raw_text", line_no, rec)?,
        clean_text: optional(&obj, "clean_text", line_no, rec)?,
        char_len: required(&obj, "char_len", line_no, rec)?,
        retrieved_at: required(&obj, "retrieved_at", line_no, rec)?,
        url: optional(&obj, "url", line_no, rec)?,
        id,
    };
    Ok(doc)
}

fn required<T: DeserializeOwned>(obj: &Map<String, Value>, field: &str, line: usize, rec: Option<&str>) -> Result<T> {
    let v = obj
        .get(field)
        .ok_or_else(|| schema(line, rec, field, "missing required field"))?;
    T::deserialize(v).map_err(|e| schema(line, rec, field, &e.to_string()))
}

fn optional<T: DeserializeOwned>(
    obj: &Map<String, Value>,
    field: &str,
    line: usize,
    rec: Option<&str>,
) -> Result<Option<T>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => T::deserialize(v)
            .map(Some)
            .map_err(|e| schema(line, rec, field, &e.to_string())),
    }
}
