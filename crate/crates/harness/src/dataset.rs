//! Labelled datasets and unlabelled corpora read from delimiter-separated text.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use weakchem_chem::molgraph::write_canonical_smiles;
use weakchem_chem::{prepare, MolGraph};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Regression,
}

/// Which columns hold what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub smiles_column: String,
    pub label_columns: Vec<String>,
    #[serde(default)]
    pub id_column: Option<String>,
    pub task: TaskKind,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone)]
pub struct Record {
    pub id: String,
    pub smiles: String,
    pub canonical: String,
    pub labels: Vec<Option<f64>>,
    pub mol: MolGraph,
}

/// A row that could not be used, with the error kind as reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based data row (header excluded).
    pub row: usize,
    pub id: String,
    pub smiles: String,
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<Record>,
    pub task: TaskKind,
    pub label_names: Vec<String>,
}

impl Dataset {
    pub fn n_tasks(&self) -> usize {
        self.label_names.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Labels of single-task classification data (missing entries as None).
    pub fn first_task_labels(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.labels[0]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub rejects: Vec<Reject>,
    /// Groups of record indices sharing a canonical SMILES.
    pub duplicates: Vec<Vec<usize>>,
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_dataset(file, schema, &name)
}

pub fn read_dataset<R: Read>(input: R, schema: &Schema, name: &str) -> Result<LoadReport> {
    if !schema.delimiter.is_ascii() {
        return Err(HarnessError::Schema("delimiter must be ASCII".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .flexible(false)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| HarnessError::Schema(format!("column {name:?} not found in header {headers:?}")))
    };
    let smiles_col = col(&schema.smiles_column)?;
    let label_cols = schema
        .label_columns
        .iter()
        .map(|c| col(c))
        .collect::<Result<Vec<_>>>()?;
    if label_cols.is_empty() {
        return Err(HarnessError::Schema("at least one label column is required".into()));
    }
    let id_col = schema.id_column.as_deref().map(col).transpose()?;

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let smiles = row.get(smiles_col).unwrap_or("").trim().to_string();
        let id = id_col
            .and_then(|c| row.get(c))
            .map(|s| s.trim().to_string())
            .unwrap_or_else(|| format!("row{}", i + 1));
        let mut reject = |reason: &str, detail: String| {
            rejects.push(Reject {
                row: i + 1,
                id: id.clone(),
                smiles: smiles.clone(),
                reason: reason.to_string(),
                detail,
            })
        };
        let mut labels = Vec::with_capacity(label_cols.len());
        let mut bad_label = None;
        for &c in &label_cols {
            let cell = row.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                labels.push(None);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    if schema.task == TaskKind::Classification && v != 0.0 && v != 1.0 {
                        bad_label = Some(format!("classification label {cell:?} is not 0 or 1"));
                    }
                    labels.push(Some(v));
                }
                _ => bad_label = Some(format!("label {cell:?} is not a finite number")),
            }
        }
        if let Some(detail) = bad_label {
            reject("LabelError", detail);
            continue;
        }
        if schema.task == TaskKind::Regression && labels.iter().any(Option::is_none) {
            reject("MissingLabel", "regression records need every label".into());
            continue;
        }
        if labels.iter().all(Option::is_none) {
            reject("MissingLabel", "no label present".into());
            continue;
        }
        match prepare(&smiles) {
            Ok(mol) => records.push(Record {
                id: id.clone(),
                canonical: write_canonical_smiles(&mol),
                smiles: smiles.clone(),
                labels,
                mol,
            }),
            Err(e) => reject(e.kind(), e.to_string()),
        }
    }
    if records.is_empty() {
        return Err(HarnessError::EmptyDataset(name.to_string()));
    }
    let duplicates = duplicate_groups(records.iter().map(|r| r.canonical.as_str()));
    Ok(LoadReport {
        dataset: Dataset {
            name: name.to_string(),
            records,
            task: schema.task,
            label_names: schema.label_columns.clone(),
        },
        rejects,
        duplicates,
    })
}

fn duplicate_groups<'a>(keys: impl Iterator<Item = &'a str>) -> Vec<Vec<usize>> {
    let mut by_key: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, k) in keys.enumerate() {
        by_key.entry(k).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = by_key.into_values().filter(|g| g.len() > 1).collect();
    groups.sort();
    groups
}

/// One molecule of an unlabelled corpus.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub smiles: String,
    pub canonical: String,
    pub mol: MolGraph,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
    pub rejects: Vec<Reject>,
    pub duplicates: Vec<Vec<usize>>,
}

/// Reads one SMILES per line (first whitespace-separated token). A first line
/// reading `smiles` is treated as a header.
pub fn read_corpus(text: &str) -> Result<Corpus> {
    let mut entries = Vec::new();
    let mut rejects = Vec::new();
    let mut row = 0;
    for line in text.lines() {
        let Some(smiles) = line.split_whitespace().next() else {
            continue;
        };
        if row == 0 && entries.is_empty() && rejects.is_empty() && smiles.eq_ignore_ascii_case("smiles") {
            continue;
        }
        row += 1;
        match prepare(smiles) {
            Ok(mol) => entries.push(CorpusEntry {
                smiles: smiles.to_string(),
                canonical: write_canonical_smiles(&mol),
                mol,
            }),
            Err(e) => rejects.push(Reject {
                row,
                id: format!("row{row}"),
                smiles: smiles.to_string(),
                reason: e.kind().to_string(),
                detail: e.to_string(),
            }),
        }
    }
    if entries.is_empty() {
        return Err(HarnessError::EmptyDataset("corpus".into()));
    }
    let duplicates = duplicate_groups(entries.iter().map(|e| e.canonical.as_str()));
    Ok(Corpus {
        entries,
        rejects,
        duplicates,
    })
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    read_corpus(&text)
}

/// Writes the reject log as CSV.
pub fn write_rejects<W: std::io::Write>(out: W, rejects: &[Reject]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rejects {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io("reject log", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema {
            smiles_column: "smiles".into(),
            label_columns: vec!["y".into()],
            id_column: Some("id".into()),
            task: TaskKind::Classification,
            delimiter: ',',
        }
    }

    #[test]
    fn bad_smiles_goes_to_reject_log() {
        let text = "id,smiles,y\na,CCO,1\nb,C(C,0\nc,c1ccccc1,0\nd,OCC,1\n";
        let rep = read_dataset(text.as_bytes(), &schema(), "t").unwrap();
        assert_eq!(rep.dataset.len(), 3);
        assert_eq!(rep.rejects.len(), 1);
        assert_eq!(rep.rejects[0].reason, "SyntaxError");
        assert_eq!(rep.rejects[0].id, "b");
        // CCO and OCC share a canonical form
        assert_eq!(rep.duplicates, vec![vec![0, 2]]);
    }

    #[test]
    fn missing_cells_are_masked() {
        let s = Schema {
            label_columns: vec!["y1".into(), "y2".into()],
            id_column: None,
            ..schema()
        };
        let text = "smiles,y1,y2\nCCO,1,\nCCN,,0\n";
        let rep = read_dataset(text.as_bytes(), &s, "t").unwrap();
        assert_eq!(rep.dataset.records[0].labels, vec![Some(1.0), None]);
        assert_eq!(rep.dataset.records[1].labels, vec![None, Some(0.0)]);
        assert_eq!(rep.dataset.records[1].id, "row2");
    }

    #[test]
    fn schema_and_label_errors() {
        let text = "id,smiles,y\na,CCO,2\nb,CCN,1\n";
        let rep = read_dataset(text.as_bytes(), &schema(), "t").unwrap();
        assert_eq!(rep.rejects[0].reason, "LabelError");
        let bad = Schema {
            smiles_column: "smi".into(),
            ..schema()
        };
        assert!(matches!(
            read_dataset(text.as_bytes(), &bad, "t"),
            Err(HarnessError::Schema(_))
        ));
        let empty = "id,smiles,y\na,C(,1\n";
        assert!(matches!(
            read_dataset(empty.as_bytes(), &schema(), "t"),
            Err(HarnessError::EmptyDataset(_))
        ));
    }

    #[test]
    fn corpus_lines() {
        let c = read_corpus("smiles\nCCO\n\nC1CC\nc1ccccc1 benzene\n").unwrap();
        assert_eq!(c.entries.len(), 2);
        assert_eq!(c.rejects.len(), 1);
        assert_eq!(c.rejects[0].row, 2);
    }
}
