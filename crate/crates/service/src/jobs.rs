//! Background scoring. One job per dataset; pairs of all jobs share a bounded
//! worker pool. Progress is published through an atomic counter.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use dielink_core::imaging::prepare;
use dielink_core::scoring::{potential_links, score_dataset_with_progress, ScoreOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::datastore::{DatasetRecord, DatasetState, Store, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobProgress {
    pub scored: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobTicket {
    pub dataset_id: String,
    pub state: DatasetState,
    pub progress: JobProgress,
}

pub struct Jobs {
    store: Store,
    pool: rayon::ThreadPool,
    seed: u64,
    running: Mutex<HashMap<String, Arc<AtomicUsize>>>,
}

impl std::fmt::Debug for Jobs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jobs")
            .field("workers", &self.pool.current_num_threads())
            .finish_non_exhaustive()
    }
}

impl Jobs {
    /// `workers == 0` uses every core.
    pub fn new(store: Store, workers: usize, seed: u64) -> Result<Arc<Self>, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("dielink-score-{i}"))
            .build()?;
        Ok(Arc::new(Self {
            store,
            pool,
            seed,
            running: Mutex::default(),
        }))
    }

    /// Queues scoring of a dataset that is in the computing state.
    pub fn submit(self: &Arc<Self>, id: &str) {
        let counter = Arc::new(AtomicUsize::new(0));
        self.running
            .lock()
            .expect("jobs lock")
            .insert(id.to_owned(), counter.clone());
        let jobs = Arc::clone(self);
        let id = id.to_owned();
        self.pool.spawn(move || {
            if let Err(e) = jobs.run(&id, &counter) {
                warn!(dataset = %id, error = %e, "scoring job could not record its outcome");
            }
            jobs.running.lock().expect("jobs lock").remove(&id);
        });
    }

    /// Requeues datasets left computing by a previous process.
    pub fn resume(self: &Arc<Self>) -> Result<usize, StoreError> {
        let pending: Vec<DatasetRecord> = self
            .store
            .list()?
            .into_iter()
            .filter(|r| r.state == DatasetState::Computing)
            .collect();
        for r in &pending {
            info!(dataset = %r.id, name = %r.name, "resuming scoring");
            self.submit(&r.id);
        }
        Ok(pending.len())
    }

    fn run(&self, id: &str, counter: &AtomicUsize) -> Result<(), StoreError> {
        let entries = self.store.images(id)?;
        let decoded: Vec<_> = entries
            .par_iter()
            .map(|e| prepare(&e.name, &e.bytes).map_err(|err| format!("{}: {err}", e.name)))
            .collect();
        let failures: Vec<String> = decoded.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
        if !failures.is_empty() {
            self.store
                .fail_dataset(id, &format!("undecodable images: {}", failures.join("; ")))?;
            return Ok(());
        }
        let images: Vec<_> = decoded.into_iter().filter_map(Result::ok).collect();
        let opts = ScoreOptions::with_seed(self.seed);
        let result = score_dataset_with_progress(&images, &opts, |done| {
            counter.fetch_max(done, Ordering::Relaxed);
        });
        match result {
            Ok(matrix) => {
                self.store.complete_dataset(id, &matrix)?;
                info!(dataset = %id, pairs = matrix.n_pairs(), "scoring finished");
            }
            Err(e) => {
                self.store.fail_dataset(id, &e.to_string())?;
            }
        }
        Ok(())
    }

    pub fn ticket(&self, record: &DatasetRecord) -> JobTicket {
        let total = potential_links(record.coin_names.len());
        let scored = match record.state {
            DatasetState::Computed => total,
            _ => self
                .running
                .lock()
                .expect("jobs lock")
                .get(&record.id)
                .map_or(0, |c| c.load(Ordering::Relaxed)),
        };
        JobTicket {
            dataset_id: record.id.clone(),
            state: record.state,
            progress: JobProgress { scored, total },
        }
    }
}
