//! Dataset files.
//!
//! ```text
//! litm-dataset 1 n_ids=<n> samples_per_id=<s> d_in=<d> descriptors=<r>\n
//! n·s records, each: identity (u32 LE), then r·d descriptor values (f64 LE),
//! descriptor-major
//! ```
//!
//! Records appear in dataset order. Every identity must own exactly
//! `samples_per_id` records.

use std::collections::BTreeMap;
use std::path::Path;

use litm_core::data::Dataset;
use litm_core::eval::Item;
use litm_core::model::Sample;

use crate::atomic::write_atomic;
use crate::error::{FormatError, LitmError};

pub const MAGIC: &str = "litm-dataset";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub n_ids: usize,
    pub samples_per_id: usize,
    pub d_in: usize,
    pub descriptors: usize,
}

impl DatasetHeader {
    fn record_bytes(&self) -> usize {
        4 + 8 * self.descriptors * self.d_in
    }

    fn line(&self) -> String {
        format!(
            "{MAGIC} {VERSION} n_ids={} samples_per_id={} d_in={} descriptors={}\n",
            self.n_ids, self.samples_per_id, self.d_in, self.descriptors
        )
    }
}

/// Header describing `dataset`, or an error if identities are unbalanced.
pub fn header_for(dataset: &Dataset) -> Result<DatasetHeader, FormatError> {
    let n_ids = dataset.identity_count();
    let samples_per_id = dataset.members(0).len();
    if let Some(slot) = (0..n_ids).find(|&k| dataset.members(k).len() != samples_per_id) {
        return Err(FormatError::Inconsistent(format!(
            "identity {} has {} samples, identity {} has {samples_per_id}",
            dataset.identities()[slot],
            dataset.members(slot).len(),
            dataset.identities()[0]
        )));
    }
    Ok(DatasetHeader { n_ids, samples_per_id, d_in: dataset.d_in(), descriptors: dataset.descriptors() })
}

pub fn encode(dataset: &Dataset) -> Result<Vec<u8>, FormatError> {
    let header = header_for(dataset)?;
    let mut out = header.line().into_bytes();
    out.reserve(dataset.len() * header.record_bytes());
    for s in dataset.samples() {
        out.extend_from_slice(&s.identity.to_le_bytes());
        for d in &s.descriptors {
            for v in d {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Split off the first `\n`-terminated line as UTF-8.
pub(crate) fn header_line(bytes: &[u8]) -> Result<(&str, &[u8]), FormatError> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| FormatError::Malformed("missing header line".into()))?;
    let line = std::str::from_utf8(&bytes[..end]).map_err(|_| FormatError::Malformed("header is not UTF-8".into()))?;
    Ok((line, &bytes[end + 1..]))
}

pub(crate) fn check_magic<'a>(
    fields: &mut impl Iterator<Item = &'a str>,
    magic: &str,
    version: u32,
) -> Result<(), FormatError> {
    if fields.next() != Some(magic) {
        return Err(FormatError::Malformed(format!("expected '{magic}'")));
    }
    let found = fields.next().ok_or_else(|| FormatError::Malformed("missing version".into()))?;
    if found != version.to_string() {
        return Err(FormatError::Version { found: found.to_string(), expected: version });
    }
    Ok(())
}

fn parse_header(line: &str) -> Result<DatasetHeader, FormatError> {
    let mut fields = line.split_whitespace();
    check_magic(&mut fields, MAGIC, VERSION)?;
    let mut values = BTreeMap::new();
    for f in fields {
        let (k, v) = f.split_once('=').ok_or_else(|| FormatError::Malformed(format!("bad field '{f}'")))?;
        let v: usize = v.parse().map_err(|_| FormatError::Malformed(format!("bad value in '{f}'")))?;
        values.insert(k, v);
    }
    let mut get = |k: &str| values.remove(k).ok_or_else(|| FormatError::Malformed(format!("missing '{k}'")));
    let header = DatasetHeader {
        n_ids: get("n_ids")?,
        samples_per_id: get("samples_per_id")?,
        d_in: get("d_in")?,
        descriptors: get("descriptors")?,
    };
    if let Some(k) = values.keys().next() {
        return Err(FormatError::Malformed(format!("unknown field '{k}'")));
    }
    if header.n_ids == 0 || header.samples_per_id == 0 || header.d_in == 0 || header.descriptors == 0 {
        return Err(FormatError::Inconsistent("header counts must be positive".into()));
    }
    Ok(header)
}

pub fn decode(bytes: &[u8]) -> Result<Dataset, FormatError> {
    let (line, body) = header_line(bytes)?;
    let header = parse_header(line)?;
    let records = header.n_ids * header.samples_per_id;
    let expected = records * header.record_bytes();
    if body.len() < expected {
        return Err(FormatError::Truncated { expected, found: body.len() });
    }
    if body.len() > expected {
        return Err(FormatError::Inconsistent(format!(
            "{} trailing bytes after {records} records",
            body.len() - expected
        )));
    }
    let mut samples = Vec::with_capacity(records);
    for rec in body.chunks_exact(header.record_bytes()) {
        let identity = u32::from_le_bytes(rec[..4].try_into().unwrap());
        let values: Vec<f64> = rec[4..].chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        let descriptors = values.chunks_exact(header.d_in).map(<[f64]>::to_vec).collect();
        samples.push(Sample { identity, descriptors });
    }
    let dataset = Dataset::new(samples).map_err(|e| FormatError::Inconsistent(e.to_string()))?;
    if dataset.identity_count() != header.n_ids {
        return Err(FormatError::Inconsistent(format!(
            "header declares {} identities, records hold {}",
            header.n_ids,
            dataset.identity_count()
        )));
    }
    if let Some(slot) = (0..header.n_ids).find(|&k| dataset.members(k).len() != header.samples_per_id) {
        return Err(FormatError::Inconsistent(format!(
            "identity {} has {} records, header declares {}",
            dataset.identities()[slot],
            dataset.members(slot).len(),
            header.samples_per_id
        )));
    }
    Ok(dataset)
}

pub fn save(path: &Path, dataset: &Dataset) -> Result<(), LitmError> {
    let bytes = encode(dataset).map_err(|e| LitmError::format(path, e))?;
    write_atomic(path, &bytes)
}

pub fn load(path: &Path) -> Result<Dataset, LitmError> {
    let bytes = std::fs::read(path).map_err(|e| LitmError::io(path, e))?;
    decode(&bytes).map_err(|e| LitmError::format(path, e))
}

/// Externally produced embeddings: one `identity,v1,v2,...` row per line.
/// A first line that does not start with an integer is taken as a header.
pub fn parse_embeddings_csv(text: &str) -> Result<Vec<Item>, FormatError> {
    let mut items = Vec::new();
    let mut dim = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let first = cells.next().unwrap_or_default();
        let Ok(identity) = first.parse::<u32>() else {
            if n == 0 {
                continue;
            }
            return Err(FormatError::Malformed(format!("line {}: bad identity '{first}'", n + 1)));
        };
        let embedding = cells
            .map(|c| c.parse::<f64>().map_err(|_| FormatError::Malformed(format!("line {}: bad value '{c}'", n + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        match dim {
            None => dim = Some(embedding.len()),
            Some(d) if d != embedding.len() => {
                return Err(FormatError::Inconsistent(format!(
                    "line {}: {} values, expected {d}",
                    n + 1,
                    embedding.len()
                )))
            }
            _ => {}
        }
        items.push(Item { embedding, identity });
    }
    if dim.is_none_or(|d| d == 0) {
        return Err(FormatError::Inconsistent("no embeddings".into()));
    }
    Ok(items)
}

pub fn load_embeddings_csv(path: &Path) -> Result<Vec<Item>, LitmError> {
    let text = std::fs::read_to_string(path).map_err(|e| LitmError::io(path, e))?;
    parse_embeddings_csv(&text).map_err(|e| LitmError::format(path, e))
}
