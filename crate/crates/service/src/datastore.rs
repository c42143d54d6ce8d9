//! Datasets, images, distance matrices and evaluations in one embedded
//! transactional store.
//!
//! Every mutation is a single write transaction, so an evaluation lands with
//! its note and comment together or not at all, and readers only ever see
//! committed state. The store serializes writers, which covers the
//! one-writer-per-dataset rule.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use dielink_core::analytics::RankedPairs;
use dielink_core::notations::{self, CsvError, NotationRow, Note};
use dielink_core::scoring::{canonical_pair, potential_links, DistanceMatrix, PairScore};
use redb::{Database, ReadableTable, TableDefinition};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::upload::UploadEntry;

const DATASETS: TableDefinition<&str, &[u8]> = TableDefinition::new("datasets");
const NAMES: TableDefinition<&str, &str> = TableDefinition::new("names");
const IMAGES: TableDefinition<(&str, &str), &[u8]> = TableDefinition::new("images");
const MATRICES: TableDefinition<&str, &[u8]> = TableDefinition::new("matrices");
const EVALUATIONS: TableDefinition<(&str, &str, &str), &[u8]> = TableDefinition::new("evaluations");

pub const MAX_NAME_LEN: usize = 128;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    #[default]
    SingleType,
    Treasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetState {
    Computing,
    Computed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub name: String,
    pub kind: DatasetKind,
    pub state: DatasetState,
    /// Sorted.
    pub coin_names: Vec<String>,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub name1: String,
    pub name2: String,
    pub note: Note,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub coins: usize,
    pub potential_links: usize,
    /// Every category is present; counts sum to `potential_links`.
    pub category_counts: BTreeMap<Note, usize>,
}

/// A ranked pair with its evaluation; `rank` starts at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub rank: usize,
    pub name1: String,
    pub name2: String,
    pub distance: f64,
    pub alignable: bool,
    pub note: Note,
    pub comment: String,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("dataset {0} not found")]
    NotFound(String),
    #[error("a dataset named {0:?} already exists")]
    DuplicateName(String),
    #[error("file name {0:?} appears more than once")]
    DuplicateFileNames(String),
    #[error("invalid dataset name: {0}")]
    InvalidName(String),
    #[error("dataset is {actual:?}, expected {expected:?}")]
    InvalidState {
        expected: DatasetState,
        actual: DatasetState,
    },
    #[error("dataset is {0:?}, results are not available")]
    DatasetNotComputed(DatasetState),
    #[error("pair ({0}, {1}) is not part of the dataset")]
    UnknownPair(String, String),
    #[error("image {0:?} not found")]
    UnknownImage(String),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("stored distance matrix rejected: {0}")]
    Matrix(#[from] dielink_core::scoring::ScoringError),
    #[error("storage: {0}")]
    Storage(Box<redb::Error>),
    #[error("stored record is unreadable: {0}")]
    Encoding(#[from] serde_json::Error),
}

fn storage<E: Into<redb::Error>>(e: E) -> StoreError {
    StoreError::Storage(Box::new(e.into()))
}

/// Dataset names end up in file names and headers, so path separators,
/// quotes and control characters are refused.
pub fn validate_name(name: &str) -> Result<(), StoreError> {
    let bad = |why: &str| Err(StoreError::InvalidName(why.to_owned()));
    if name.trim().is_empty() {
        return bad("name is empty");
    }
    if name.trim() != name {
        return bad("name has leading or trailing whitespace");
    }
    if name.chars().count() > MAX_NAME_LEN {
        return bad("name is too long");
    }
    if name.chars().any(|c| c.is_control() || matches!(c, '/' | '\\' | '"')) {
        return bad("name contains a path separator, quote or control character");
    }
    Ok(())
}

type RankedCache = HashMap<String, Arc<(DistanceMatrix, RankedPairs)>>;

#[derive(Clone)]
pub struct Store {
    db: Arc<Database>,
    ranked: Arc<RwLock<RankedCache>>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").finish_non_exhaustive()
    }
}

impl Store {
    /// Opens (or creates) the store inside `dir`.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let db = Database::create(dir.join("dielink.redb")).map_err(storage)?;
        let txn = db.begin_write().map_err(storage)?;
        {
            txn.open_table(DATASETS).map_err(storage)?;
            txn.open_table(NAMES).map_err(storage)?;
            txn.open_table(IMAGES).map_err(storage)?;
            txn.open_table(MATRICES).map_err(storage)?;
            txn.open_table(EVALUATIONS).map_err(storage)?;
        }
        txn.commit().map_err(storage)?;
        Ok(Self {
            db: Arc::new(db),
            ranked: Arc::default(),
        })
    }

    pub fn create_dataset(
        &self,
        name: &str,
        kind: DatasetKind,
        entries: &[UploadEntry],
    ) -> Result<DatasetRecord, StoreError> {
        validate_name(name)?;
        let mut coin_names: Vec<String> = entries.iter().map(|e| e.name.clone()).collect();
        coin_names.sort();
        if let Some(w) = coin_names.windows(2).find(|w| w[0] == w[1]) {
            return Err(StoreError::DuplicateFileNames(w[0].clone()));
        }
        let record = DatasetRecord {
            id: uuid::Uuid::new_v4().simple().to_string(),
            name: name.to_owned(),
            kind,
            state: DatasetState::Computing,
            coin_names,
            created_at: Utc::now(),
            error: None,
        };
        let txn = self.db.begin_write().map_err(storage)?;
        {
            let mut names = txn.open_table(NAMES).map_err(storage)?;
            if names.get(name).map_err(storage)?.is_some() {
                return Err(StoreError::DuplicateName(name.to_owned()));
            }
            names.insert(name, record.id.as_str()).map_err(storage)?;
            let mut images = txn.open_table(IMAGES).map_err(storage)?;
            for e in entries {
                images
                    .insert((record.id.as_str(), e.name.as_str()), e.bytes.as_slice())
                    .map_err(storage)?;
            }
            let mut datasets = txn.open_table(DATASETS).map_err(storage)?;
            datasets
                .insert(record.id.as_str(), serde_json::to_vec(&record)?.as_slice())
                .map_err(storage)?;
        }
        txn.commit().map_err(storage)?;
        Ok(record)
    }

    pub fn get(&self, id: &str) -> Result<DatasetRecord, StoreError> {
        let txn = self.db.begin_read().map_err(storage)?;
        let table = txn.open_table(DATASETS).map_err(storage)?;
        let raw = table
            .get(id)
            .map_err(storage)?
            .ok_or_else(|| StoreError::NotFound(id.to_owned()))?;
        Ok(serde_json::from_slice(raw.value())?)
    }

    /// All datasets, sorted by name.
    pub fn list(&self) -> Result<Vec<DatasetRecord>, StoreError> {
        let txn = self.db.begin_read().map_err(storage)?;
        let table = txn.open_table(DATASETS).map_err(storage)?;
        let mut out = Vec::new();
        for item in table.iter().map_err(storage)? {
            let (_, v) = item.map_err(storage)?;
            out.push(serde_json::from_slice::<DatasetRecord>(v.value())?);
        }
        out.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(out)
    }

    pub fn image(&self, id: &str, name: &str) -> Result<Vec<u8>, StoreError> {
        self.get(id)?;
        let txn = self.db.begin_read().map_err(storage)?;
        let table = txn.open_table(IMAGES).map_err(storage)?;
        let raw = table
            .get((id, name))
            .map_err(storage)?
            .ok_or_else(|| StoreError::UnknownImage(name.to_owned()))?;
        Ok(raw.value().to_vec())
    }

    /// Every image of a dataset, sorted by name.
    pub fn images(&self, id: &str) -> Result<Vec<UploadEntry>, StoreError> {
        let record = self.get(id)?;
        let txn = self.db.begin_read().map_err(storage)?;
        let table = txn.open_table(IMAGES).map_err(storage)?;
        let mut out = Vec::with_capacity(record.coin_names.len());
        for name in &record.coin_names {
            let raw = table
                .get((id, name.as_str()))
                .map_err(storage)?
                .ok_or_else(|| StoreError::UnknownImage(name.clone()))?;
            out.push(UploadEntry {
                name: name.clone(),
                bytes: raw.value().to_vec(),
            });
        }
        Ok(out)
    }

    /// Stores the matrix and moves the dataset to computed. Every pair
    /// starts as not evaluated.
    pub fn complete_dataset(&self, id: &str, matrix: &DistanceMatrix) -> Result<DatasetRecord, StoreError> {
        let txn = self.db.begin_write().map_err(storage)?;
        let record = {
            let mut datasets = txn.open_table(DATASETS).map_err(storage)?;
            let mut record: DatasetRecord = match datasets.get(id).map_err(storage)? {
                Some(raw) => serde_json::from_slice(raw.value())?,
                None => return Err(StoreError::NotFound(id.to_owned())),
            };
            if record.state != DatasetState::Computing {
                return Err(StoreError::InvalidState {
                    expected: DatasetState::Computing,
                    actual: record.state,
                });
            }
            if matrix.coin_names() != record.coin_names.as_slice() {
                return Err(StoreError::Matrix(
                    dielink_core::scoring::ScoringError::WrongPairCount {
                        expected: potential_links(record.coin_names.len()),
                        actual: matrix.n_pairs(),
                    },
                ));
            }
            record.state = DatasetState::Computed;
            datasets
                .insert(id, serde_json::to_vec(&record)?.as_slice())
                .map_err(storage)?;
            let mut matrices = txn.open_table(MATRICES).map_err(storage)?;
            matrices
                .insert(id, serde_json::to_vec(matrix)?.as_slice())
                .map_err(storage)?;
            record
        };
        txn.commit().map_err(storage)?;
        Ok(record)
    }

    pub fn fail_dataset(&self, id: &str, message: &str) -> Result<DatasetRecord, StoreError> {
        let txn = self.db.begin_write().map_err(storage)?;
        let record = {
            let mut datasets = txn.open_table(DATASETS).map_err(storage)?;
            let mut record: DatasetRecord = match datasets.get(id).map_err(storage)? {
                Some(raw) => serde_json::from_slice(raw.value())?,
                None => return Err(StoreError::NotFound(id.to_owned())),
            };
            if record.state != DatasetState::Computing {
                return Err(StoreError::InvalidState {
                    expected: DatasetState::Computing,
                    actual: record.state,
                });
            }
            record.state = DatasetState::Failed;
            record.error = Some(message.to_owned());
            datasets
                .insert(id, serde_json::to_vec(&record)?.as_slice())
                .map_err(storage)?;
            record
        };
        txn.commit().map_err(storage)?;
        Ok(record)
    }

    fn computed(&self, id: &str) -> Result<DatasetRecord, StoreError> {
        let record = self.get(id)?;
        match record.state {
            DatasetState::Computed => Ok(record),
            s => Err(StoreError::DatasetNotComputed(s)),
        }
    }

    fn ranking(&self, id: &str) -> Result<Arc<(DistanceMatrix, RankedPairs)>, StoreError> {
        self.computed(id)?;
        if let Some(hit) = self.ranked.read().expect("cache lock").get(id) {
            return Ok(hit.clone());
        }
        let txn = self.db.begin_read().map_err(storage)?;
        let table = txn.open_table(MATRICES).map_err(storage)?;
        let raw = table
            .get(id)
            .map_err(storage)?
            .ok_or_else(|| StoreError::NotFound(id.to_owned()))?;
        let matrix: DistanceMatrix = serde_json::from_slice(raw.value())?;
        let ranked = dielink_core::analytics::rank_pairs(&matrix);
        let entry = Arc::new((matrix, ranked));
        self.ranked
            .write()
            .expect("cache lock")
            .insert(id.to_owned(), entry.clone());
        Ok(entry)
    }

    pub fn matrix(&self, id: &str) -> Result<DistanceMatrix, StoreError> {
        Ok(self.ranking(id)?.0.clone())
    }

    pub fn pair_score(&self, id: &str, a: &str, b: &str) -> Result<PairScore, StoreError> {
        let ranking = self.ranking(id)?;
        ranking
            .0
            .get(a, b)
            .filter(|_| a != b)
            .cloned()
            .ok_or_else(|| StoreError::UnknownPair(a.to_owned(), b.to_owned()))
    }

    fn evaluations(&self, id: &str) -> Result<HashMap<(String, String), Evaluation>, StoreError> {
        let txn = self.db.begin_read().map_err(storage)?;
        let table = txn.open_table(EVALUATIONS).map_err(storage)?;
        let mut out = HashMap::new();
        for item in table.range((id, "", "")..).map_err(storage)? {
            let (k, v) = item.map_err(storage)?;
            let (kid, n1, n2) = k.value();
            if kid != id {
                break;
            }
            out.insert((n1.to_owned(), n2.to_owned()), serde_json::from_slice(v.value())?);
        }
        Ok(out)
    }

    /// Upserts the note of a pair, given in either order. `None` keeps the
    /// stored comment.
    pub fn set_evaluation(
        &self,
        id: &str,
        a: &str,
        b: &str,
        note: Note,
        comment: Option<&str>,
    ) -> Result<Evaluation, StoreError> {
        let record = self.computed(id)?;
        let known = |n: &str| record.coin_names.binary_search_by(|c| c.as_str().cmp(n)).is_ok();
        if a == b || !known(a) || !known(b) {
            return Err(StoreError::UnknownPair(a.to_owned(), b.to_owned()));
        }
        let (n1, n2) = canonical_pair(a, b);
        let txn = self.db.begin_write().map_err(storage)?;
        let evaluation = {
            let mut table = txn.open_table(EVALUATIONS).map_err(storage)?;
            let previous: Option<Evaluation> = match table.get((id, n1, n2)).map_err(storage)? {
                Some(raw) => Some(serde_json::from_slice(raw.value())?),
                None => None,
            };
            let evaluation = Evaluation {
                name1: n1.to_owned(),
                name2: n2.to_owned(),
                note,
                comment: match comment {
                    Some(c) => c.to_owned(),
                    None => previous.map(|p| p.comment).unwrap_or_default(),
                },
            };
            table
                .insert((id, n1, n2), serde_json::to_vec(&evaluation)?.as_slice())
                .map_err(storage)?;
            evaluation
        };
        txn.commit().map_err(storage)?;
        Ok(evaluation)
    }

    pub fn summarize(&self, id: &str) -> Result<DatasetSummary, StoreError> {
        let record = self.computed(id)?;
        let n_pairs = potential_links(record.coin_names.len());
        let mut counts: BTreeMap<Note, usize> = Note::ALL.iter().map(|n| (*n, 0)).collect();
        let evaluations = self.evaluations(id)?;
        for e in evaluations.values() {
            *counts.entry(e.note).or_default() += 1;
        }
        *counts.entry(Note::NotEvaluated).or_default() += n_pairs - evaluations.len();
        Ok(DatasetSummary {
            coins: record.coin_names.len(),
            potential_links: n_pairs,
            category_counts: counts,
        })
    }

    /// Every pair in ranked order with its evaluation.
    pub fn ranked_pairs(&self, id: &str) -> Result<Vec<RankedPair>, StoreError> {
        let ranking = self.ranking(id)?;
        let mut evaluations = self.evaluations(id)?;
        Ok(ranking
            .1
            .entries
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let e = evaluations.remove(&(s.name1.clone(), s.name2.clone()));
                RankedPair {
                    rank: k + 1,
                    name1: s.name1.clone(),
                    name2: s.name2.clone(),
                    distance: s.distance,
                    alignable: s.alignable,
                    note: e.as_ref().map(|e| e.note).unwrap_or_default(),
                    comment: e.map(|e| e.comment).unwrap_or_default(),
                }
            })
            .collect())
    }

    /// Ranked pairs where either file name contains `query`, ignoring case.
    pub fn search_pairs(&self, id: &str, query: &str) -> Result<Vec<RankedPair>, StoreError> {
        let pairs = self.ranked_pairs(id)?;
        if query.is_empty() {
            return Ok(pairs);
        }
        let q = query.to_lowercase();
        Ok(pairs
            .into_iter()
            .filter(|p| p.name1.to_lowercase().contains(&q) || p.name2.to_lowercase().contains(&q))
            .collect())
    }

    /// The results file: `(notations_<name>.csv, bytes)`, pairs in ranked order.
    pub fn export_csv(&self, id: &str) -> Result<(String, Vec<u8>), StoreError> {
        let record = self.computed(id)?;
        let rows: Vec<NotationRow> = self
            .ranked_pairs(id)?
            .into_iter()
            .map(|p| NotationRow {
                name1: p.name1,
                name2: p.name2,
                distance: p.distance,
                note: p.note,
                comment: p.comment,
            })
            .collect();
        Ok((notations::file_name(&record.name), notations::to_bytes(&rows)))
    }

    /// Applies the notes and comments of a results file in one transaction.
    /// Distances in the file are ignored. Returns the number of rows applied.
    pub fn import_csv(&self, id: &str, csv: &[u8]) -> Result<usize, StoreError> {
        let record = self.computed(id)?;
        let rows = notations::read_notations(csv)?;
        let known = |n: &str| record.coin_names.binary_search_by(|c| c.as_str().cmp(n)).is_ok();
        if let Some(r) = rows.iter().find(|r| !known(&r.name1) || !known(&r.name2)) {
            return Err(StoreError::UnknownPair(r.name1.clone(), r.name2.clone()));
        }
        let txn = self.db.begin_write().map_err(storage)?;
        {
            let mut table = txn.open_table(EVALUATIONS).map_err(storage)?;
            for r in &rows {
                let e = Evaluation {
                    name1: r.name1.clone(),
                    name2: r.name2.clone(),
                    note: r.note,
                    comment: r.comment.clone(),
                };
                table
                    .insert((id, r.name1.as_str(), r.name2.as_str()), serde_json::to_vec(&e)?.as_slice())
                    .map_err(storage)?;
            }
        }
        txn.commit().map_err(storage)?;
        Ok(rows.len())
    }

    pub fn delete(&self, id: &str) -> Result<(), StoreError> {
        let record = self.get(id)?;
        let txn = self.db.begin_write().map_err(storage)?;
        {
            txn.open_table(DATASETS).map_err(storage)?.remove(id).map_err(storage)?;
            txn.open_table(NAMES)
                .map_err(storage)?
                .remove(record.name.as_str())
                .map_err(storage)?;
            txn.open_table(MATRICES).map_err(storage)?.remove(id).map_err(storage)?;
            let mut images = txn.open_table(IMAGES).map_err(storage)?;
            for name in &record.coin_names {
                images.remove((id, name.as_str())).map_err(storage)?;
            }
            let mut evaluations = txn.open_table(EVALUATIONS).map_err(storage)?;
            let keys: Vec<(String, String)> = evaluations
                .range((id, "", "")..)
                .map_err(storage)?
                .map_while(|item| {
                    let (k, _) = item.ok()?;
                    let (kid, n1, n2) = k.value();
                    (kid == id).then(|| (n1.to_owned(), n2.to_owned()))
                })
                .collect();
            for (n1, n2) in &keys {
                evaluations.remove((id, n1.as_str(), n2.as_str())).map_err(storage)?;
            }
        }
        txn.commit().map_err(storage)?;
        self.ranked.write().expect("cache lock").remove(id);
        Ok(())
    }
}
