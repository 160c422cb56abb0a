//! Soft actor-critic agent and state-entropy pre-training.

mod entropy;
mod sac;

pub use entropy::{intrinsic_entropy_reward, ENTROPY_EPS};
pub use sac::{AgentConfig, SacAgent, UpdateLosses, LOG_STD_MAX, LOG_STD_MIN};

use rand::Rng;
use serde::Serialize;

use crate::data::{ReplayBuffer, Transition};
use crate::envs::Env;
use crate::error::Result;

pub fn new_agent<R: Rng + ?Sized>(env: &Env, cfg: AgentConfig, rng: &mut R) -> Result<SacAgent> {
    let spec = env.spec();
    SacAgent::new(spec.state_dim, spec.action_dim, spec.action_low, spec.action_high, cfg, rng)
}

/// An environment being stepped continuously, with episode bookkeeping.
#[derive(Clone, Debug)]
pub struct Rollout {
    env: Env,
    state: Vec<f64>,
    episode: u64,
    t: usize,
    episode_return: f64,
}

impl Rollout {
    pub fn new<R: Rng + ?Sized>(mut env: Env, rng: &mut R) -> Self {
        let state = env.reset(rng);
        Rollout {
            env,
            state,
            episode: 0,
            t: 0,
            episode_return: 0.0,
        }
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// Applies `action`, stores the transition and resets at episode end.
    /// Returns the true return of an episode that just finished.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        action: &[f64],
        buffer: &mut ReplayBuffer,
        rng: &mut R,
    ) -> Result<Option<f64>> {
        let spec = self.env.spec();
        let clipped: Vec<f64> = action.iter().map(|a| a.clamp(spec.action_low, spec.action_high)).collect();
        let out = self.env.step(&clipped)?;
        buffer.push(Transition::new(
            std::mem::take(&mut self.state),
            clipped,
            out.next_state.clone(),
            out.reward,
            out.done,
            self.episode,
            self.t,
        ));
        self.episode_return += out.reward;
        self.t += 1;
        if out.done {
            let ret = self.episode_return;
            self.state = self.env.reset(rng);
            self.episode += 1;
            self.t = 0;
            self.episode_return = 0.0;
            Ok(Some(ret))
        } else {
            self.state = out.next_state;
            Ok(None)
        }
    }
}

pub fn random_action<R: Rng + ?Sized>(env: &Env, rng: &mut R) -> Vec<f64> {
    let spec = env.spec();
    (0..spec.action_dim).map(|_| rng.random_range(spec.action_low..=spec.action_high)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PretrainStats {
    pub steps: usize,
    pub updates: usize,
    pub mean_intrinsic_reward: f64,
    pub last_losses: UpdateLosses,
}

/// Collects `steps` transitions, the first `seed_steps` with random actions
/// and the rest from the policy, updating the agent with the k-NN entropy of
/// each minibatch's states in place of a reward. Stored transitions keep a
/// zero learned reward.
pub fn pretrain<R: Rng + ?Sized>(
    agent: &mut SacAgent,
    rollout: &mut Rollout,
    buffer: &mut ReplayBuffer,
    steps: usize,
    rng: &mut R,
) -> Result<PretrainStats> {
    let cfg = agent.config().clone();
    let mut stats = PretrainStats::default();
    let mut intrinsic_sum = 0.0;
    for step in 0..steps {
        let action = if step < cfg.seed_steps {
            random_action(rollout.env(), rng)
        } else {
            agent.act(rollout.state(), false, rng)?
        };
        rollout.step(&action, buffer, rng)?;
        stats.steps += 1;
        if step + 1 < cfg.seed_steps || buffer.len() <= cfg.knn_k {
            continue;
        }
        for _ in 0..cfg.updates_per_step {
            let mut batch = buffer.sample_agent_batch(cfg.batch_size.max(cfg.knn_k + 1), rng)?;
            let states: Vec<Vec<f64>> = (0..batch.len()).map(|i| batch.states.row_slice(i).to_vec()).collect();
            batch.rewards = intrinsic_entropy_reward(&states, cfg.knn_k)?;
            intrinsic_sum += batch.rewards.iter().sum::<f64>() / batch.len() as f64;
            stats.last_losses = agent.update(&batch, rng)?;
            stats.updates += 1;
        }
    }
    if stats.updates > 0 {
        stats.mean_intrinsic_reward = intrinsic_sum / stats.updates as f64;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_steps_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let env = EnvKind::PointMassReach.make();
        let mut agent = new_agent(&env, AgentConfig::default(), &mut rng).unwrap();
        let mut rollout = Rollout::new(env, &mut rng);
        let mut buf = ReplayBuffer::new(1000);
        let stats = pretrain(&mut agent, &mut rollout, &mut buf, 0, &mut rng).unwrap();
        assert_eq!((stats.updates, buf.len(), agent.update_count()), (0, 0, 0));
    }

    #[test]
    fn pretraining_stores_zero_learned_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let env = EnvKind::PendulumSwingUp.make();
        let cfg = AgentConfig { batch_size: 16, hidden: 16, seed_steps: 20, ..AgentConfig::default() };
        let mut agent = new_agent(&env, cfg, &mut rng).unwrap();
        let mut rollout = Rollout::new(env, &mut rng);
        let mut buf = ReplayBuffer::new(1000);
        let stats = pretrain(&mut agent, &mut rollout, &mut buf, 250, &mut rng).unwrap();
        assert_eq!(buf.len(), 250);
        assert_eq!(stats.updates, 231);
        assert!(buf.iter().all(|t| t.learned_reward == 0.0));
        assert_eq!(rollout.episode(), 1);
        assert!(buf.iter().take(200).all(|t| t.episode_id == 0));
        assert!(buf.get(199).done);
    }
}
