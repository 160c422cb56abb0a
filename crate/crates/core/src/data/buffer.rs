use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use super::{Segment, SegmentPair, Transition, UnlabeledDataset};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::ndmath::Tensor;
use crate::reward::RewardEnsemble;

pub const DEFAULT_REPLAY_CAPACITY: usize = 100_000;

const SNAPSHOT_MAGIC: &[u8; 8] = b"SURFRBUF";
const SNAPSHOT_VERSION: u32 = 1;

/// Transition as the agent sees it: the learned reward only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgentTransition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Minibatch drawn through the agent-facing view.
#[derive(Clone, Debug, Serialize)]
pub struct AgentBatch {
    pub states: Tensor,
    pub actions: Tensor,
    pub rewards: Vec<f64>,
    pub next_states: Tensor,
    pub dones: Vec<bool>,
}

impl AgentBatch {
    pub fn from_transitions(items: &[AgentTransition]) -> Result<Self> {
        let rows = |f: fn(&AgentTransition) -> &Vec<f64>| -> Result<Tensor> {
            Tensor::from_rows(&items.iter().map(|t| f(t).clone()).collect::<Vec<_>>())
        };
        Ok(AgentBatch {
            states: rows(|t| &t.state)?,
            actions: rows(|t| &t.action)?,
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states: rows(|t| &t.next_state)?,
            dones: items.iter().map(|t| t.done).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity FIFO of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            head: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    fn physical(&self, i: usize) -> usize {
        if self.storage.len() < self.capacity {
            i
        } else {
            (self.head + i) % self.capacity
        }
    }

    /// Transition `i` in insertion order (0 is the oldest).
    pub fn get(&self, i: usize) -> &Transition {
        &self.storage[self.physical(i)]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn agent_view(&self, i: usize) -> AgentTransition {
        self.get(i).agent_view()
    }

    /// Uniform minibatch with replacement through the agent-facing view.
    pub fn sample_agent_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<AgentBatch> {
        if self.is_empty() {
            return Err(Error::NotReady("replay buffer is empty".into()));
        }
        let items: Vec<_> = (0..n)
            .map(|_| self.agent_view(rng.random_range(0..self.len())))
            .collect();
        AgentBatch::from_transitions(&items)
    }

    /// The `n` most recent transitions, agent view.
    pub fn recent_states(&self, n: usize) -> Vec<Vec<f64>> {
        let start = self.len().saturating_sub(n);
        (start..self.len()).map(|i| self.get(i).state.clone()).collect()
    }

    /// Overwrites the learned reward of every stored transition.
    pub(crate) fn set_learned_rewards(&mut self, f: impl Fn(&Transition) -> f64) {
        for t in &mut self.storage {
            t.learned_reward = f(t);
        }
    }

    /// The most recently pushed transition.
    pub(crate) fn last_mut(&mut self) -> Option<&mut Transition> {
        if self.storage.is_empty() {
            return None;
        }
        let i = self.physical(self.storage.len() - 1);
        self.storage.get_mut(i)
    }

    /// Recomputes every learned reward as the ensemble-mean prediction.
    pub fn relabel_all(&mut self, ensemble: &RewardEnsemble) -> Result<usize> {
        const CHUNK: usize = 4096;
        let n = self.storage.len();
        let mut done = 0;
        while done < n {
            let end = (done + CHUNK).min(n);
            let rows: Vec<Vec<f64>> = self.storage[done..end]
                .iter()
                .map(|t| [t.state.as_slice(), t.action.as_slice()].concat())
                .collect();
            let rewards = ensemble.rewards(&Tensor::from_rows(&rows)?)?;
            for (t, r) in self.storage[done..end].iter_mut().zip(rewards) {
                t.learned_reward = r;
            }
            done = end;
        }
        Ok(n)
    }

    /// Maximal runs of consecutive steps from one episode, in insertion order,
    /// as `(first logical index, length)`.
    pub fn episode_runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = 0;
        for i in 1..=self.len() {
            let boundary = i == self.len() || {
                let (prev, cur) = (self.get(i - 1), self.get(i));
                prev.done || cur.episode_id != prev.episode_id || cur.step_index != prev.step_index + 1
            };
            if boundary {
                runs.push((start, i - start));
                start = i;
            }
        }
        runs
    }

    pub fn segment_at(&self, start: usize, length: usize) -> Result<Segment> {
        let steps: Vec<Transition> = (start..start + length).map(|i| self.get(i).clone()).collect();
        Segment::from_transitions(&steps)
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let file = BufWriter::new(File::create(path)?);
        self.write_snapshot(file)?;
        Ok(())
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        Self::read_snapshot(BufReader::new(File::open(path)?))
    }

    /// Versioned little-endian record file; see the README for the layout.
    pub fn write_snapshot<W: Write>(&self, out: W) -> Result<W> {
        let mut w = Writer::new(out);
        w.bytes(SNAPSHOT_MAGIC)?;
        w.u32(SNAPSHOT_VERSION)?;
        let (sd, ad) = self
            .storage
            .first()
            .map_or((0, 0), |t| (t.state.len(), t.action.len()));
        w.u64(sd as u64)?;
        w.u64(ad as u64)?;
        w.u64(self.capacity as u64)?;
        w.u64(self.len() as u64)?;
        for t in self.iter() {
            for v in t.state.iter().chain(&t.action).chain(&t.next_state) {
                w.f64(*v)?;
            }
            w.f64(t.true_reward())?;
            w.f64(t.learned_reward)?;
            w.u32(t.done as u32)?;
            w.u64(t.episode_id)?;
            w.u64(t.step_index as u64)?;
        }
        w.finish()
    }

    pub fn read_snapshot<R: Read>(input: R) -> Result<Self> {
        let mut r = Reader::new(input);
        r.expect_magic(SNAPSHOT_MAGIC)?;
        let version = r.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!("unsupported snapshot version {version}")));
        }
        let sd = r.len()?;
        let ad = r.len()?;
        let capacity = r.len()?;
        let count = r.len()?;
        if capacity == 0 || count > capacity {
            return Err(Error::Format(format!("{count} transitions in capacity {capacity}")));
        }
        let mut buf = ReplayBuffer::new(capacity);
        for _ in 0..count {
            let mut vec_of = |n: usize| -> Result<Vec<f64>> { (0..n).map(|_| r.f64()).collect() };
            let state = vec_of(sd)?;
            let action = vec_of(ad)?;
            let next_state = vec_of(sd)?;
            let true_reward = r.f64()?;
            let learned = r.f64()?;
            let done = r.u32()? != 0;
            let episode_id = r.u64()?;
            let step_index = r.u64()? as usize;
            let mut t = Transition::new(state, action, next_state, true_reward, done, episode_id, step_index);
            t.learned_reward = learned;
            buf.push(t);
        }
        Ok(buf)
    }
}

/// Uniform sampler over every valid `(episode run, start)` slot of a fixed
/// segment length.
pub struct SegmentSampler<'a> {
    buffer: &'a ReplayBuffer,
    length: usize,
    /// `(run start, cumulative slot count through this run)`
    cumulative: Vec<(usize, usize)>,
    total: usize,
}

impl<'a> SegmentSampler<'a> {
    pub fn new(buffer: &'a ReplayBuffer, length: usize) -> Result<Self> {
        if length == 0 {
            return Err(Error::contract("segment length must be positive"));
        }
        let mut cumulative = Vec::new();
        let mut total = 0;
        for (start, len) in buffer.episode_runs() {
            if len >= length {
                total += len - length + 1;
                cumulative.push((start, total));
            }
        }
        if cumulative.len() < 2 {
            return Err(Error::NotReady(format!(
                "need two episodes with at least {length} steps, have {}",
                cumulative.len()
            )));
        }
        Ok(SegmentSampler {
            buffer,
            length,
            cumulative,
            total,
        })
    }

    /// Number of distinct `(episode, start)` slots.
    pub fn slot_count(&self) -> usize {
        self.total
    }

    /// Logical buffer index at which slot `k` starts.
    pub fn slot_start(&self, k: usize) -> usize {
        let run = self.cumulative.partition_point(|&(_, cum)| cum <= k);
        let before = if run == 0 { 0 } else { self.cumulative[run - 1].1 };
        self.cumulative[run].0 + (k - before)
    }

    /// Two segments from distinct slots, uniformly over ordered slot pairs.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SegmentPair> {
        let a = rng.random_range(0..self.total);
        let mut b = rng.random_range(0..self.total - 1);
        if b >= a {
            b += 1;
        }
        SegmentPair::new(
            self.buffer.segment_at(self.slot_start(a), self.length)?,
            self.buffer.segment_at(self.slot_start(b), self.length)?,
        )
    }
}

pub fn sample_segment_pair<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    length: usize,
    rng: &mut R,
) -> Result<(Segment, Segment)> {
    let pair = SegmentSampler::new(buffer, length)?.sample_pair(rng)?;
    Ok((pair.seg0, pair.seg1))
}

pub fn extract_unlabeled<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    count: usize,
    length: usize,
    rng: &mut R,
) -> Result<UnlabeledDataset> {
    let sampler = SegmentSampler::new(buffer, length)?;
    let pairs = (0..count)
        .map(|_| sampler.sample_pair(rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(UnlabeledDataset::new(pairs))
}

/// Unlabeled pairs to draw per labeled query: 10x for budgets of at least
/// 1000 queries, 100x below that.
pub fn unlabeled_ratio(max_budget: usize) -> usize {
    if max_budget >= 1000 {
        10
    } else {
        100
    }
}
