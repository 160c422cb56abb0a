use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{stack_inputs, Segment};
use crate::error::{Error, Result};
use crate::ndmath::{Mlp, OutputActivation, Tensor};

use super::loss::{logistic, PseudoLabel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardNetConfig {
    pub hidden: usize,
    pub hidden_layers: usize,
}

impl Default for RewardNetConfig {
    fn default() -> Self {
        RewardNetConfig {
            hidden: 256,
            hidden_layers: 3,
        }
    }
}

/// `r(s, a)` bounded to `(-1, 1)` by a tanh output.
#[derive(Clone, Debug)]
pub struct RewardNet {
    mlp: Mlp,
    state_dim: usize,
    action_dim: usize,
}

impl RewardNet {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        cfg: &RewardNetConfig,
        rng: &mut R,
    ) -> Self {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend(std::iter::repeat_n(cfg.hidden, cfg.hidden_layers));
        sizes.push(1);
        RewardNet {
            mlp: Mlp::new(&sizes, OutputActivation::Tanh, rng),
            state_dim,
            action_dim,
        }
    }

    pub(crate) fn from_mlp(mlp: Mlp, state_dim: usize, action_dim: usize) -> Result<Self> {
        if mlp.input_dim() != state_dim + action_dim || mlp.output_dim() != 1 {
            return Err(Error::Format(format!(
                "reward network widths {:?} do not fit dims {state_dim}/{action_dim}",
                mlp.sizes()
            )));
        }
        Ok(RewardNet {
            mlp,
            state_dim,
            action_dim,
        })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Per-row rewards for `state || action` rows.
    pub fn step_rewards(&self, inputs: &Tensor) -> Result<Vec<f64>> {
        Ok(self.mlp.infer(inputs)?.into_values())
    }

    pub fn reward(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        self.check_dims(state.len(), action.len())?;
        let row = Tensor::row([state, action].concat());
        Ok(self.step_rewards(&row)?[0])
    }

    fn check_dims(&self, sd: usize, ad: usize) -> Result<()> {
        if sd != self.state_dim || ad != self.action_dim {
            return Err(Error::dim(format!(
                "reward model takes {}/{} dims, got {sd}/{ad}",
                self.state_dim, self.action_dim
            )));
        }
        Ok(())
    }

    /// Sum of predicted rewards over the segment.
    pub fn segment_return(&self, seg: &Segment) -> Result<f64> {
        Ok(self.segment_returns(&[seg])?[0])
    }

    /// Returns of many segments from one batched forward pass.
    pub fn segment_returns(&self, segs: &[&Segment]) -> Result<Vec<f64>> {
        for s in segs {
            self.check_dims(s.state_dim(), s.action_dim())?;
        }
        if segs.is_empty() {
            return Ok(Vec::new());
        }
        let rewards = self.step_rewards(&stack_inputs(segs))?;
        let mut out = Vec::with_capacity(segs.len());
        let mut r = 0;
        for s in segs {
            out.push(rewards[r..r + s.len()].iter().sum());
            r += s.len();
        }
        Ok(out)
    }

    /// `P[seg1 > seg0]`.
    pub fn preference_prob(&self, seg0: &Segment, seg1: &Segment) -> Result<f64> {
        check_pair(seg0, seg1)?;
        let r = self.segment_returns(&[seg0, seg1])?;
        Ok(logistic(r[1] - r[0]))
    }

    /// `P[seg1 > seg0]` for every pair in one forward pass.
    pub fn preference_probs(&self, pairs: &[(&Segment, &Segment)]) -> Result<Vec<f64>> {
        for (a, b) in pairs {
            check_pair(a, b)?;
        }
        let segs: Vec<&Segment> = pairs.iter().map(|p| p.0).chain(pairs.iter().map(|p| p.1)).collect();
        let r = self.segment_returns(&segs)?;
        let n = pairs.len();
        Ok((0..n).map(|i| logistic(r[n + i] - r[i])).collect())
    }

    pub fn pseudo_label(&self, seg0: &Segment, seg1: &Segment) -> Result<PseudoLabel> {
        Ok(PseudoLabel::from_prob_second(self.preference_prob(seg0, seg1)?))
    }
}

pub(crate) fn check_pair(seg0: &Segment, seg1: &Segment) -> Result<()> {
    if seg0.len() != seg1.len() {
        return Err(Error::contract(format!(
            "compared segments differ in length ({} vs {})",
            seg0.len(),
            seg1.len()
        )));
    }
    Ok(())
}

/// Independently initialised reward networks.
#[derive(Clone, Debug)]
pub struct RewardEnsemble {
    members: Vec<RewardNet>,
    config: RewardNetConfig,
}

impl RewardEnsemble {
    /// Each member gets its own initialisation seed drawn from `rng`.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        size: usize,
        cfg: &RewardNetConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::contract("an ensemble needs at least one member"));
        }
        let members = (0..size)
            .map(|_| {
                let mut member_rng = ChaCha8Rng::seed_from_u64(rng.random());
                RewardNet::new(state_dim, action_dim, cfg, &mut member_rng)
            })
            .collect();
        Ok(RewardEnsemble {
            members,
            config: *cfg,
        })
    }

    pub fn from_members(members: Vec<RewardNet>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::contract("an ensemble needs at least one member"))?;
        let sizes = first.mlp.sizes();
        let config = RewardNetConfig {
            hidden: sizes.get(1).copied().unwrap_or(0),
            hidden_layers: sizes.len() - 2,
        };
        for m in &members {
            if m.state_dim != first.state_dim || m.action_dim != first.action_dim {
                return Err(Error::dim("ensemble members disagree on dimensions"));
            }
        }
        Ok(RewardEnsemble { members, config })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn config(&self) -> &RewardNetConfig {
        &self.config
    }

    pub fn members(&self) -> &[RewardNet] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut [RewardNet] {
        &mut self.members
    }

    pub fn state_dim(&self) -> usize {
        self.members[0].state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.members[0].action_dim
    }

    /// Member-mean reward for each `state || action` row.
    pub fn rewards(&self, inputs: &Tensor) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; inputs.rows()];
        for m in &self.members {
            for (a, r) in acc.iter_mut().zip(m.step_rewards(inputs)?) {
                *a += r;
            }
        }
        let n = self.members.len() as f64;
        Ok(acc.into_iter().map(|a| a / n).collect())
    }

    /// Agent-visible reward: the mean member output.
    pub fn ensemble_reward(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        self.members[0].check_dims(state.len(), action.len())?;
        Ok(self.rewards(&Tensor::row([state, action].concat()))?[0])
    }

    /// Member-mean of `P[seg1 > seg0]` for every pair.
    pub fn preference_probs(&self, pairs: &[(&Segment, &Segment)]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; pairs.len()];
        for m in &self.members {
            for (a, p) in acc.iter_mut().zip(m.preference_probs(pairs)?) {
                *a += p;
            }
        }
        let n = self.members.len() as f64;
        Ok(acc.into_iter().map(|a| a / n).collect())
    }

    /// Population standard deviation of the members' `P[seg1 > seg0]`.
    pub fn disagreement(&self, seg0: &Segment, seg1: &Segment) -> Result<f64> {
        Ok(self.disagreements(&[(seg0, seg1)])?[0])
    }

    pub fn disagreements(&self, pairs: &[(&Segment, &Segment)]) -> Result<Vec<f64>> {
        if self.members.len() < 2 {
            return Err(Error::contract("disagreement needs at least two ensemble members"));
        }
        let per_member = self
            .members
            .iter()
            .map(|m| m.preference_probs(pairs))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..pairs.len())
            .map(|i| population_std(per_member.iter().map(|p| p[i])))
            .collect())
    }
}

pub(crate) fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RewardNetConfig {
        RewardNetConfig {
            hidden: 8,
            hidden_layers: 3,
        }
    }

    fn seg(len: usize, rng: &mut ChaCha8Rng) -> Segment {
        Segment::new(
            3,
            1,
            (0..3 * len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            vec![0.0; len],
            0,
            0,
        )
        .unwrap()
    }

    #[test]
    fn segment_return_matches_step_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = RewardNet::new(3, 1, &small(), &mut rng);
        let s = seg(12, &mut rng);
        let looped: f64 = (0..s.len()).map(|t| net.reward(s.state(t), s.action(t)).unwrap()).sum();
        assert!((net.segment_return(&s).unwrap() - looped).abs() < 1e-12);
        let one = s.crop(3, 1).unwrap();
        assert_eq!(net.segment_return(&one).unwrap(), net.reward(one.state(0), one.action(0)).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = RewardNet::new(2, 1, &small(), &mut rng);
        assert!(matches!(net.reward(&[0.0; 3], &[0.0]), Err(Error::Dimension(_))));
        let s = seg(4, &mut rng);
        assert!(net.segment_return(&s).is_err());
    }

    #[test]
    fn ensemble_reward_is_member_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ens = RewardEnsemble::new(3, 1, 3, &small(), &mut rng).unwrap();
        let (s, a) = ([0.2, -0.4, 0.9], [0.5]);
        let explicit: f64 =
            ens.members().iter().map(|m| m.reward(&s, &a).unwrap()).sum::<f64>() / 3.0;
        let got = ens.ensemble_reward(&s, &a).unwrap();
        assert!((got - explicit).abs() < 1e-12);
        assert!(got.abs() < 1.0);

        let single = RewardEnsemble::from_members(vec![ens.members()[1].clone()]).unwrap();
        assert_eq!(
            single.ensemble_reward(&s, &a).unwrap(),
            ens.members()[1].reward(&s, &a).unwrap()
        );
    }

    #[test]
    fn disagreement_of_identical_members_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = RewardNet::new(3, 1, &small(), &mut rng);
        let ens = RewardEnsemble::from_members(vec![net.clone(), net.clone(), net]).unwrap();
        let (a, b) = (seg(5, &mut rng), seg(5, &mut rng));
        assert_eq!(ens.disagreement(&a, &b).unwrap(), 0.0);
        let solo = RewardEnsemble::from_members(vec![ens.members()[0].clone()]).unwrap();
        assert!(matches!(solo.disagreement(&a, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn population_std_of_three_probabilities() {
        // hand computation: mean 0.5, deviations ±0.3, var = 0.18/3 = 0.06
        let got = population_std([0.2, 0.5, 0.8].into_iter());
        assert!((got - 0.06f64.sqrt()).abs() < 1e-12);
        assert!((got - 0.2449).abs() < 1e-4);
    }
}
