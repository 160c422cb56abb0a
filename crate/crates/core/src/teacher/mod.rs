//! Preference sources and query selection.

mod inbox;

pub use inbox::{Choice, HumanLabelInbox, PendingQuery};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{LabelSource, Preference, PreferenceTriple, Segment, SegmentPair};
use crate::error::{Error, Result};
use crate::reward::RewardEnsemble;

/// Oracle teacher that compares ground-truth segment returns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedTeacher {
    /// Return gap at or below which the pair is labelled equal.
    pub equal_epsilon: f64,
}

impl ScriptedTeacher {
    pub fn new(equal_epsilon: f64) -> Result<Self> {
        if !(equal_epsilon >= 0.0) {
            return Err(Error::Config(format!("equal_epsilon {equal_epsilon} must be >= 0")));
        }
        Ok(ScriptedTeacher { equal_epsilon })
    }

    pub fn label(&self, seg0: &Segment, seg1: &Segment) -> Result<Preference> {
        if seg0.len() != seg1.len() {
            return Err(Error::contract(format!(
                "teacher needs equal lengths, got {} and {}",
                seg0.len(),
                seg1.len()
            )));
        }
        let diff = seg1.true_return() - seg0.true_return();
        Ok(if diff > self.equal_epsilon {
            Preference::Second
        } else if -diff > self.equal_epsilon {
            Preference::First
        } else {
            Preference::Equal
        })
    }

    pub fn annotate(&self, pair: SegmentPair) -> Result<PreferenceTriple> {
        let label = self.label(&pair.seg0, &pair.seg1)?;
        PreferenceTriple::new(pair.seg0, pair.seg1, label, LabelSource::Scripted)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryStrategy {
    Uniform,
    Disagreement,
}

impl std::str::FromStr for QueryStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(QueryStrategy::Uniform),
            "disagreement" => Ok(QueryStrategy::Disagreement),
            other => Err(Error::Config(format!("unknown query strategy {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub initial_batch_size: usize,
    pub queries_per_session: usize,
    pub strategy: QueryStrategy,
}

impl QueryPlan {
    /// Candidate batch of ten times the number of queries.
    pub fn new(queries_per_session: usize, strategy: QueryStrategy) -> Self {
        QueryPlan {
            initial_batch_size: 10 * queries_per_session,
            queries_per_session,
            strategy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.queries_per_session > self.initial_batch_size {
            return Err(Error::Config(format!(
                "{} queries requested from a batch of {}",
                self.queries_per_session, self.initial_batch_size
            )));
        }
        Ok(())
    }
}

/// Indices of the selected candidates. Uniform sampling is without
/// replacement; disagreement takes the largest ensemble standard deviations,
/// earlier candidates winning ties.
pub fn select_query_indices<R: Rng + ?Sized>(
    candidates: &[SegmentPair],
    plan: &QueryPlan,
    ensemble: &RewardEnsemble,
    rng: &mut R,
) -> Result<Vec<usize>> {
    plan.validate()?;
    if candidates.len() < plan.initial_batch_size {
        return Err(Error::contract(format!(
            "{} candidates for a batch of {}",
            candidates.len(),
            plan.initial_batch_size
        )));
    }
    let n = plan.queries_per_session;
    match plan.strategy {
        QueryStrategy::Uniform => Ok(rand::seq::index::sample(rng, candidates.len(), n).into_vec()),
        QueryStrategy::Disagreement => {
            let pairs: Vec<(&Segment, &Segment)> = candidates.iter().map(|p| (&p.seg0, &p.seg1)).collect();
            let stds = ensemble.disagreements(&pairs)?;
            Ok(top_k_stable(&stds, n))
        }
    }
}

pub fn select_queries<R: Rng + ?Sized>(
    candidates: Vec<SegmentPair>,
    plan: &QueryPlan,
    ensemble: &RewardEnsemble,
    rng: &mut R,
) -> Result<Vec<SegmentPair>> {
    let idx = select_query_indices(&candidates, plan, ensemble, rng)?;
    let mut slots: Vec<Option<SegmentPair>> = candidates.into_iter().map(Some).collect();
    Ok(idx.into_iter().map(|i| slots[i].take().expect("distinct indices")).collect())
}

fn top_k_stable(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(k);
    order
}
