//! Transitions, segments, preference datasets and the replay buffer.

mod buffer;

pub use buffer::{
    extract_unlabeled, sample_segment_pair, unlabeled_ratio, AgentBatch, AgentTransition,
    ReplayBuffer, SegmentSampler, DEFAULT_REPLAY_CAPACITY,
};

use crate::error::{Error, Result};
use crate::ndmath::Tensor;

/// One environment step.
///
/// `true_reward` is private: only the scripted teacher and the evaluator may
/// see it. Agent-facing code reads [`AgentTransition`] instead.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    true_reward: f64,
    pub learned_reward: f64,
    pub done: bool,
    pub episode_id: u64,
    pub step_index: usize,
}

impl Transition {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state: Vec<f64>,
        action: Vec<f64>,
        next_state: Vec<f64>,
        true_reward: f64,
        done: bool,
        episode_id: u64,
        step_index: usize,
    ) -> Self {
        Transition {
            state,
            action,
            next_state,
            true_reward,
            learned_reward: 0.0,
            done,
            episode_id,
            step_index,
        }
    }

    pub(crate) fn true_reward(&self) -> f64 {
        self.true_reward
    }

    pub fn agent_view(&self) -> AgentTransition {
        AgentTransition {
            state: self.state.clone(),
            action: self.action.clone(),
            next_state: self.next_state.clone(),
            reward: self.learned_reward,
            done: self.done,
        }
    }
}

/// Contiguous run of `(state, action)` steps from one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    true_rewards: Vec<f64>,
    episode_id: u64,
    start_step: usize,
}

impl Segment {
    /// `states` and `actions` are row-major `len x dim`; `true_rewards` has one
    /// entry per step.
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        states: Vec<f64>,
        actions: Vec<f64>,
        true_rewards: Vec<f64>,
        episode_id: u64,
        start_step: usize,
    ) -> Result<Self> {
        let len = true_rewards.len();
        if len == 0 {
            return Err(Error::contract("a segment needs at least one step"));
        }
        if states.len() != len * state_dim || actions.len() != len * action_dim {
            return Err(Error::dim(format!(
                "segment of {len} steps with {} state and {} action values (dims {state_dim}/{action_dim})",
                states.len(),
                actions.len()
            )));
        }
        Ok(Segment {
            state_dim,
            action_dim,
            states,
            actions,
            true_rewards,
            episode_id,
            start_step,
        })
    }

    pub(crate) fn from_transitions(steps: &[Transition]) -> Result<Self> {
        let first = steps
            .first()
            .ok_or_else(|| Error::contract("a segment needs at least one step"))?;
        let (sd, ad) = (first.state.len(), first.action.len());
        let mut states = Vec::with_capacity(steps.len() * sd);
        let mut actions = Vec::with_capacity(steps.len() * ad);
        for t in steps {
            states.extend_from_slice(&t.state);
            actions.extend_from_slice(&t.action);
        }
        let rewards = steps.iter().map(Transition::true_reward).collect();
        Segment::new(sd, ad, states, actions, rewards, first.episode_id, first.step_index)
    }

    pub fn len(&self) -> usize {
        self.true_rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.true_rewards.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.state_dim..(t + 1) * self.state_dim]
    }

    pub fn action(&self, t: usize) -> &[f64] {
        &self.actions[t * self.action_dim..(t + 1) * self.action_dim]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn episode_id(&self) -> u64 {
        self.episode_id
    }

    pub fn start_step(&self) -> usize {
        self.start_step
    }

    pub(crate) fn true_return(&self) -> f64 {
        self.true_rewards.iter().sum()
    }

    /// Contiguous sub-segment `[offset, offset + len)`.
    pub fn crop(&self, offset: usize, len: usize) -> Result<Segment> {
        if len == 0 || offset + len > self.len() {
            return Err(Error::contract(format!(
                "crop {offset}+{len} out of segment of length {}",
                self.len()
            )));
        }
        let (sd, ad) = (self.state_dim, self.action_dim);
        Ok(Segment {
            state_dim: sd,
            action_dim: ad,
            states: self.states[offset * sd..(offset + len) * sd].to_vec(),
            actions: self.actions[offset * ad..(offset + len) * ad].to_vec(),
            true_rewards: self.true_rewards[offset..offset + len].to_vec(),
            episode_id: self.episode_id,
            start_step: self.start_step + offset,
        })
    }

    /// Same segment with every state replaced; actions are untouched.
    pub(crate) fn with_states(&self, states: Vec<f64>) -> Segment {
        debug_assert_eq!(states.len(), self.states.len());
        Segment {
            states,
            ..self.clone()
        }
    }

    /// Rows of `state || action`, one per step.
    pub fn input_rows(&self) -> Tensor {
        stack_inputs(std::slice::from_ref(self))
    }
}

/// Concatenates the `state || action` rows of every segment in order.
pub fn stack_inputs<S: std::borrow::Borrow<Segment>>(segments: &[S]) -> Tensor {
    let Some(first) = segments.first() else {
        return Tensor::zeros(0, 0);
    };
    let (sd, ad) = (first.borrow().state_dim, first.borrow().action_dim);
    let rows: usize = segments.iter().map(|s| s.borrow().len()).sum();
    let mut values = Vec::with_capacity(rows * (sd + ad));
    for seg in segments {
        let seg = seg.borrow();
        for t in 0..seg.len() {
            values.extend_from_slice(seg.state(t));
            values.extend_from_slice(seg.action(t));
        }
    }
    Tensor::matrix(rows, sd + ad, values).expect("consistent segment dims")
}

/// Teacher label `y`: which segment of a pair is preferred.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preference {
    /// `y = 0`, the first segment is preferred.
    First,
    /// `y = 1`, the second segment is preferred.
    Second,
    /// `y = 0.5`.
    Equal,
}

impl Preference {
    pub fn y(self) -> f64 {
        match self {
            Preference::First => 0.0,
            Preference::Second => 1.0,
            Preference::Equal => 0.5,
        }
    }

    pub fn from_y(y: f64) -> Result<Self> {
        match y {
            y if y == 0.0 => Ok(Preference::First),
            y if y == 1.0 => Ok(Preference::Second),
            y if y == 0.5 => Ok(Preference::Equal),
            _ => Err(Error::contract(format!("label {y} is not one of 0, 0.5, 1"))),
        }
    }

    pub fn swapped(self) -> Self {
        match self {
            Preference::First => Preference::Second,
            Preference::Second => Preference::First,
            Preference::Equal => Preference::Equal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabelSource {
    Scripted,
    Human,
    Pseudo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentPair {
    pub seg0: Segment,
    pub seg1: Segment,
}

impl SegmentPair {
    pub fn new(seg0: Segment, seg1: Segment) -> Result<Self> {
        if seg0.len() != seg1.len() {
            return Err(Error::contract(format!(
                "paired segments differ in length ({} vs {})",
                seg0.len(),
                seg1.len()
            )));
        }
        Ok(SegmentPair { seg0, seg1 })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceTriple {
    pub seg0: Segment,
    pub seg1: Segment,
    pub label: Preference,
    pub source: LabelSource,
}

impl PreferenceTriple {
    pub fn new(seg0: Segment, seg1: Segment, label: Preference, source: LabelSource) -> Result<Self> {
        let pair = SegmentPair::new(seg0, seg1)?;
        Ok(PreferenceTriple {
            seg0: pair.seg0,
            seg1: pair.seg1,
            label,
            source,
        })
    }

    pub fn y(&self) -> f64 {
        self.label.y()
    }
}

/// Teacher-labelled comparisons (`D_l`).
#[derive(Clone, Debug, Default)]
pub struct LabeledDataset {
    triples: Vec<PreferenceTriple>,
}

impl LabeledDataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a teacher answer. Pseudo-labels never enter `D_l`.
    pub fn push(&mut self, triple: PreferenceTriple) -> Result<()> {
        if triple.source == LabelSource::Pseudo {
            return Err(Error::contract("pseudo-labelled pairs cannot join the labeled dataset"));
        }
        self.triples.push(triple);
        Ok(())
    }

    pub fn extend(&mut self, triples: impl IntoIterator<Item = PreferenceTriple>) -> Result<()> {
        for t in triples {
            self.push(t)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn get(&self, i: usize) -> &PreferenceTriple {
        &self.triples[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PreferenceTriple> {
        self.triples.iter()
    }
}

/// Unlabelled segment pairs (`D_u`).
#[derive(Clone, Debug, Default)]
pub struct UnlabeledDataset {
    pairs: Vec<SegmentPair>,
}

impl UnlabeledDataset {
    pub fn new(pairs: Vec<SegmentPair>) -> Self {
        UnlabeledDataset { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, i: usize) -> &SegmentPair {
        &self.pairs[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &SegmentPair> {
        self.pairs.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(len: usize) -> Segment {
        Segment::new(
            2,
            1,
            (0..2 * len).map(|v| v as f64).collect(),
            (0..len).map(|v| -(v as f64)).collect(),
            vec![0.5; len],
            3,
            10,
        )
        .unwrap()
    }

    #[test]
    fn crop_keeps_contiguous_steps() {
        let s = seg(6);
        let c = s.crop(2, 3).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.start_step(), 12);
        assert_eq!(c.state(0), s.state(2));
        assert_eq!(c.action(2), s.action(4));
        assert!(s.crop(4, 3).is_err());
        assert!(s.crop(0, 0).is_err());
    }

    #[test]
    fn triple_rejects_unequal_lengths() {
        assert!(PreferenceTriple::new(seg(3), seg(4), Preference::First, LabelSource::Scripted).is_err());
    }

    #[test]
    fn labels_restricted_to_three_values() {
        for y in [0.0, 0.5, 1.0] {
            assert_eq!(Preference::from_y(y).unwrap().y(), y);
        }
        assert!(Preference::from_y(0.3).is_err());
        assert_eq!(Preference::First.swapped(), Preference::Second);
        assert_eq!(Preference::Equal.swapped(), Preference::Equal);
    }

    #[test]
    fn labeled_dataset_refuses_pseudo_labels() {
        let mut d = LabeledDataset::new();
        let t = PreferenceTriple::new(seg(3), seg(3), Preference::First, LabelSource::Pseudo).unwrap();
        assert!(d.push(t).is_err());
        assert!(d.is_empty());
    }

    #[test]
    fn stacked_rows_interleave_state_and_action() {
        let rows = stack_inputs(&[seg(2), seg(1)]);
        assert_eq!(rows.shape(), &[3, 3]);
        assert_eq!(rows.row_slice(1), &[2.0, 3.0, -1.0]);
    }
}
