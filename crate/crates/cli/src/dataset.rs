//! Tab-separated caption datasets with a `cid  smiles  description` header.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use molcap_core::chem::smiles_to_graph;
use molcap_core::harness::{CaptionRecord, Task};

use crate::error::{CliError, Result};

pub const HEADER: [&str; 3] = ["cid", "smiles", "description"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<CaptionRecord>,
    /// Data rows dropped because their SMILES did not parse.
    pub skipped: usize,
    /// Data rows in the file, header excluded.
    pub rows: usize,
}

pub fn load_dataset(path: &Path, task: Task) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .quoting(false)
        .flexible(true)
        .from_reader(file);
    let mut rows = reader.records();
    let line_of = |r: &csv::StringRecord| r.position().map_or(0, |p| p.line() as usize);
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::format(path, line, format!("{other:?}")),
        }
    };

    let header = match rows.next() {
        None => return Err(CliError::format(path, 1, "missing header `cid\\tsmiles\\tdescription`")),
        Some(h) => h.map_err(csv_err)?,
    };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != HEADER {
        return Err(CliError::format(
            path,
            line_of(&header),
            format!("expected header `cid\\tsmiles\\tdescription`, found {names:?}"),
        ));
    }

    let mut data = Dataset { records: Vec::new(), skipped: 0, rows: 0 };
    for row in rows {
        let row = row.map_err(csv_err)?;
        let line = line_of(&row);
        if row.len() == 1 && row[0].trim().is_empty() {
            continue;
        }
        data.rows += 1;
        if row.len() != HEADER.len() {
            return Err(CliError::format(path, line, format!("expected 3 tab-separated columns, found {}", row.len())));
        }
        let (cid, smiles, description) = (row[0].trim(), row[1].trim(), row[2].trim());
        if description.is_empty() {
            return Err(CliError::format(path, line, "empty description"));
        }
        if let Err(e) = smiles_to_graph(smiles) {
            log::warn!("{}:{}: skipping {}: {}", path.display(), line, cid, e);
            data.skipped += 1;
            continue;
        }
        data.records.push(CaptionRecord {
            id: cid.to_string(),
            smiles: smiles.to_string(),
            description: description.to_string(),
            task,
        });
    }
    if data.skipped > 0 {
        log::warn!("{}: skipped {} of {} rows with unparseable SMILES", path.display(), data.skipped, data.rows);
    }
    Ok(data)
}

pub fn write_dataset(path: &Path, records: &[CaptionRecord]) -> Result<()> {
    let mut out = String::from("cid\tsmiles\tdescription\n");
    for r in records {
        for field in [&r.id, &r.smiles, &r.description] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(CliError::Usage(format!("record {} has a tab or newline in {field:?}", r.id)));
            }
        }
        out.push_str(&format!("{}\t{}\t{}\n", r.id, r.smiles, r.description));
    }
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| CliError::io(path, e))
}
