use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Dataset, Gain, GradeSet};

const FIXED_COLUMNS: [&str; 4] = ["query_id", "doc_id", "timestamp", "clicks"];

/// Click-count labeling thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClickThresholds {
    pub hi: u64,
    pub lo: u64,
}

impl Default for ClickThresholds {
    fn default() -> Self {
        ClickThresholds { hi: 1000, lo: 100 }
    }
}

/// Grade 2 above `hi`, 1 on `[lo, hi]`, 0 below `lo`.
pub fn grade_for_clicks(clicks: u64, t: ClickThresholds) -> f64 {
    if clicks > t.hi {
        2.0
    } else if clicks >= t.lo {
        1.0
    } else {
        0.0
    }
}

/// One query's documents in timestamp order, with one dataset per score column.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryDataset {
    pub query_id: String,
    pub doc_ids: Vec<String>,
    pub timestamps: Vec<f64>,
    pub clicks: Vec<u64>,
    /// Keyed by score column name, in header order.
    pub datasets: Vec<(String, Dataset)>,
}

struct Row {
    doc_id: String,
    timestamp: f64,
    clicks: u64,
    scores: Vec<f64>,
}

/// Reads a click-log CSV into per-query datasets labelled with `thresholds`.
///
/// `score_columns` restricts the scorers to the named columns; `None` keeps
/// every column after `clicks`. Queries come out sorted by id.
pub fn ingest_click_log(
    path: &Path,
    thresholds: ClickThresholds,
    score_columns: Option<&[String]>,
) -> Result<Vec<QueryDataset>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_click_log(file, path, thresholds, score_columns)
}

/// As [`ingest_click_log`], from any reader; `path` only labels errors.
pub fn read_click_log<R: std::io::Read>(
    reader: R,
    path: &Path,
    thresholds: ClickThresholds,
    score_columns: Option<&[String]>,
) -> Result<Vec<QueryDataset>> {
    if thresholds.lo > thresholds.hi {
        return Err(Error::invalid("click thresholds need lo <= hi"));
    }
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names.len() < 5 || names[..4] != FIXED_COLUMNS {
        return Err(parse_err(
            1,
            "header must be query_id,doc_id,timestamp,clicks followed by score columns".into(),
        ));
    }
    let available: Vec<String> = names[4..].iter().map(|s| s.to_string()).collect();
    let selected: Vec<usize> = match score_columns {
        None => (0..available.len()).collect(),
        Some(wanted) => wanted
            .iter()
            .map(|w| {
                available
                    .iter()
                    .position(|a| a == w)
                    .ok_or_else(|| Error::invalid(format!("unknown score column '{w}'")))
            })
            .collect::<Result<_>>()?,
    };

    let mut queries: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| {
            let line = e.position().map_or(line, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        if record.len() != names.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", names.len(), record.len()),
            ));
        }
        let field = |j: usize| record[j].trim();
        let timestamp: f64 = field(2)
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| parse_err(line, format!("bad timestamp '{}'", field(2))))?;
        let clicks: u64 = field(3)
            .parse()
            .map_err(|_| parse_err(line, format!("bad click count '{}'", field(3))))?;
        let scores = selected
            .iter()
            .map(|&j| {
                field(4 + j)
                    .parse::<f64>()
                    .ok()
                    .filter(|s| s.is_finite())
                    .ok_or_else(|| parse_err(line, format!("bad score '{}'", field(4 + j))))
            })
            .collect::<Result<Vec<_>>>()?;
        queries.entry(field(0).to_string()).or_default().push(Row {
            doc_id: field(1).to_string(),
            timestamp,
            clicks,
            scores,
        });
    }

    let gs = GradeSet::new(vec![2.0, 1.0, 0.0], Gain::Identity)?;
    queries
        .into_iter()
        .map(|(query_id, mut rows)| {
            rows.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
            let grades: Vec<f64> = rows
                .iter()
                .map(|r| grade_for_clicks(r.clicks, thresholds))
                .collect();
            let datasets = selected
                .iter()
                .enumerate()
                .map(|(k, &j)| {
                    let scores = rows.iter().map(|r| r.scores[k]).collect();
                    Ok((
                        available[j].clone(),
                        Dataset::new(scores, grades.clone(), &gs)?,
                    ))
                })
                .collect::<Result<_>>()?;
            Ok(QueryDataset {
                query_id,
                doc_ids: rows.iter().map(|r| r.doc_id.clone()).collect(),
                timestamps: rows.iter().map(|r| r.timestamp).collect(),
                clicks: rows.iter().map(|r| r.clicks).collect(),
                datasets,
            })
        })
        .collect()
}
