use std::sync::{Arc, RwLock};

use serde::Serialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    #[default]
    Idle,
    Pretraining,
    Training,
    Finished,
}

/// Read-only view of a run published for the feedback API.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunStatus {
    pub phase: Phase,
    pub step: usize,
    pub total_steps: usize,
    pub sessions: usize,
    pub labels_used: usize,
    pub budget: usize,
    pub latest_eval_return: Option<f64>,
}

/// Shared handle; the training loop publishes, readers take snapshots.
#[derive(Clone, Default)]
pub struct StatusHandle {
    inner: Arc<RwLock<RunStatus>>,
}

impl StatusHandle {
    pub fn new(initial: RunStatus) -> Self {
        StatusHandle {
            inner: Arc::new(RwLock::new(initial)),
        }
    }

    pub fn snapshot(&self) -> RunStatus {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn update(&self, f: impl FnOnce(&mut RunStatus)) {
        f(&mut self.inner.write().unwrap_or_else(|e| e.into_inner()));
    }
}
