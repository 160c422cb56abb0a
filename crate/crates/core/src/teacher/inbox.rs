use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::data::{LabelSource, Preference, PreferenceTriple, SegmentPair};
use crate::error::{Error, Result};

/// Answer to a human query. `left` is the first segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Left,
    Right,
    Equal,
    Skip,
}

impl Choice {
    pub fn preference(self) -> Option<Preference> {
        match self {
            Choice::Left => Some(Preference::First),
            Choice::Right => Some(Preference::Second),
            Choice::Equal => Some(Preference::Equal),
            Choice::Skip => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PendingQuery {
    pub id: u64,
    pub pair: SegmentPair,
    /// Milliseconds since the Unix epoch.
    pub issued_at: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Status {
    Pending,
    Answered(Preference),
    Skipped,
    Consumed,
    Expired,
}

struct Entry {
    pair: Option<SegmentPair>,
    issued_at: u64,
    status: Status,
}

#[derive(Default)]
struct State {
    next_id: u64,
    entries: BTreeMap<u64, Entry>,
}

/// Queries waiting for a human answer. Cloning shares the same inbox.
#[derive(Clone, Default)]
pub struct HumanLabelInbox {
    state: Arc<Mutex<State>>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl HumanLabelInbox {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn issue(&self, pairs: Vec<SegmentPair>) -> Vec<u64> {
        let mut st = self.lock();
        let at = now_ms();
        pairs
            .into_iter()
            .map(|pair| {
                let id = st.next_id;
                st.next_id += 1;
                st.entries.insert(
                    id,
                    Entry {
                        pair: Some(pair),
                        issued_at: at,
                        status: Status::Pending,
                    },
                );
                id
            })
            .collect()
    }

    /// Oldest query still waiting for an answer.
    pub fn next_pending(&self) -> Option<PendingQuery> {
        let st = self.lock();
        st.entries.iter().find(|(_, e)| e.status == Status::Pending).map(|(id, e)| PendingQuery {
            id: *id,
            pair: e.pair.clone().expect("pending entries keep their pair"),
            issued_at: e.issued_at,
        })
    }

    /// Records an answer. Unknown ids are `NotFound`; ids that were already
    /// answered, skipped or expired are `Conflict`.
    pub fn answer(&self, id: u64, choice: Choice) -> Result<()> {
        let mut st = self.lock();
        let entry = st
            .entries
            .get_mut(&id)
            .ok_or_else(|| Error::NotFound(format!("query {id} was never issued")))?;
        if entry.status != Status::Pending {
            return Err(Error::Conflict(format!("query {id} is no longer open")));
        }
        match choice.preference() {
            Some(p) => entry.status = Status::Answered(p),
            None => {
                entry.status = Status::Skipped;
                entry.pair = None;
            }
        }
        Ok(())
    }

    /// Answered queries not yet collected, in issue order. Each answer is
    /// returned exactly once.
    pub fn collect(&self) -> Result<Vec<PreferenceTriple>> {
        let mut st = self.lock();
        let mut out = Vec::new();
        for e in st.entries.values_mut() {
            if let Status::Answered(p) = e.status {
                let pair = e.pair.take().expect("answered entries keep their pair");
                e.status = Status::Consumed;
                out.push(PreferenceTriple::new(pair.seg0, pair.seg1, p, LabelSource::Human)?);
            }
        }
        Ok(out)
    }

    /// Drops every unanswered query; returns how many were dropped.
    pub fn expire_pending(&self) -> usize {
        let mut st = self.lock();
        let mut n = 0;
        for e in st.entries.values_mut() {
            if e.status == Status::Pending {
                e.status = Status::Expired;
                e.pair = None;
                n += 1;
            }
        }
        n
    }

    pub fn pending_count(&self) -> usize {
        self.count(|s| s == Status::Pending)
    }

    /// Answers waiting for the next `collect`.
    pub fn ready_count(&self) -> usize {
        self.count(|s| matches!(s, Status::Answered(_)))
    }

    pub fn skipped_count(&self) -> usize {
        self.count(|s| s == Status::Skipped)
    }

    fn count(&self, f: impl Fn(Status) -> bool) -> usize {
        self.lock().entries.values().filter(|e| f(e.status)).count()
    }
}
