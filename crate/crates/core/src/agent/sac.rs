use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::AgentBatch;
use crate::error::{Error, Result};
use crate::ndmath::{Mlp, OutputActivation, ParamSet, Tape, Tensor, Var};

pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    /// Entropy temperature; the initial value when `auto_temperature` is set.
    pub temperature: f64,
    pub auto_temperature: bool,
    pub batch_size: usize,
    pub hidden: usize,
    pub hidden_layers: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub temperature_lr: f64,
    pub tau_ema: f64,
    /// Gradient updates between target soft-updates.
    pub target_update_interval: usize,
    /// Gradient updates per environment step.
    pub updates_per_step: usize,
    pub pretrain_steps: usize,
    /// Leading pre-training steps with uniformly random actions.
    pub seed_steps: usize,
    pub knn_k: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            temperature: 0.1,
            auto_temperature: false,
            batch_size: 128,
            hidden: 64,
            hidden_layers: 2,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            temperature_lr: 3e-4,
            tau_ema: 0.005,
            target_update_interval: 2,
            updates_per_step: 1,
            pretrain_steps: 2000,
            seed_steps: 128,
            knn_k: 5,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("discount {} must lie in [0, 1)", self.gamma));
        }
        if !(self.temperature >= 0.0) || (self.auto_temperature && self.temperature == 0.0) {
            return bad(format!("temperature {} is invalid", self.temperature));
        }
        if self.batch_size == 0 || self.hidden == 0 || self.target_update_interval == 0 {
            return bad("batch size, hidden width and target interval must be positive".into());
        }
        if !(self.tau_ema > 0.0 && self.tau_ema <= 1.0) {
            return bad(format!("EMA rate {} must lie in (0, 1]", self.tau_ema));
        }
        if self.knn_k == 0 {
            return bad("k-NN k must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct UpdateLosses {
    pub critic: f64,
    pub actor: f64,
    pub temperature: f64,
}

/// Soft actor-critic with a tanh-squashed Gaussian policy and twin critics.
#[derive(Clone, Debug)]
pub struct SacAgent {
    cfg: AgentConfig,
    state_dim: usize,
    action_dim: usize,
    action_scale: f64,
    action_shift: f64,
    actor: Mlp,
    q1: Mlp,
    q2: Mlp,
    q1_target: Mlp,
    q2_target: Mlp,
    log_alpha: ParamSet,
    updates: u64,
}

struct Squashed {
    action: Var,
    log_prob: Var,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        action_low: f64,
        action_high: f64,
        cfg: AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        if !(action_low < action_high) {
            return Err(Error::Config(format!("empty action range [{action_low}, {action_high}]")));
        }
        let hidden = vec![cfg.hidden; cfg.hidden_layers];
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend(&hidden);
            s.push(output);
            s
        };
        let actor = Mlp::new(&sizes(state_dim, 2 * action_dim), OutputActivation::Identity, rng);
        let q1 = Mlp::new(&sizes(state_dim + action_dim, 1), OutputActivation::Identity, rng);
        let q2 = Mlp::new(&sizes(state_dim + action_dim, 1), OutputActivation::Identity, rng);
        let mut log_alpha = ParamSet::new();
        log_alpha.push("log_alpha", Tensor::scalar(cfg.temperature.max(f64::MIN_POSITIVE).ln()));
        Ok(SacAgent {
            state_dim,
            action_dim,
            action_scale: (action_high - action_low) / 2.0,
            action_shift: (action_high + action_low) / 2.0,
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            actor,
            q1,
            q2,
            log_alpha,
            updates: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    /// Replaces the policy network, e.g. from a checkpoint.
    pub fn set_actor(&mut self, actor: Mlp) -> Result<()> {
        if actor.input_dim() != self.state_dim || actor.output_dim() != 2 * self.action_dim {
            return Err(Error::dim(format!("actor widths {:?} do not fit this agent", actor.sizes())));
        }
        self.actor = actor;
        Ok(())
    }

    pub fn critics(&self) -> [&Mlp; 2] {
        [&self.q1, &self.q2]
    }

    pub fn target_critics(&self) -> [&Mlp; 2] {
        [&self.q1_target, &self.q2_target]
    }

    pub fn update_count(&self) -> u64 {
        self.updates
    }

    pub fn temperature(&self) -> f64 {
        if self.cfg.auto_temperature {
            self.log_alpha.value(0).item().exp()
        } else {
            self.cfg.temperature
        }
    }

    fn check_states(&self, states: &Tensor) -> Result<()> {
        if states.cols() != self.state_dim {
            return Err(Error::dim(format!(
                "agent expects {} state values, got {}",
                self.state_dim,
                states.cols()
            )));
        }
        Ok(())
    }

    /// Records `a = shift + scale * tanh(mean + std * eps)` and its log
    /// density, one row per state.
    fn squash(&self, tape: &mut Tape, out: Var, eps: &Tensor) -> Result<Squashed> {
        let ad = self.action_dim;
        let mean = tape.slice_cols(out, 0, ad)?;
        let raw = tape.slice_cols(out, ad, 2 * ad)?;
        let log_std = tape.clamp(raw, LOG_STD_MIN, LOG_STD_MAX);
        let std = tape.exp(log_std);
        let e = tape.constant(eps.clone());
        let noise = tape.mul(std, e)?;
        let u = tape.add(mean, noise)?;
        let t = tape.tanh(u);
        let scaled = tape.scale(t, self.action_scale);
        let action = tape.add_scalar(scaled, self.action_shift);

        // ln(1 - tanh(u)^2) = 2 (ln 2 - u + ln sigmoid(2u))
        let two_u = tape.scale(u, 2.0);
        let ls = tape.log_sigmoid(two_u, f64::MIN_POSITIVE);
        let two_ls = tape.scale(ls, 2.0);
        let jac = tape.sub(two_u, two_ls)?;
        let per = tape.sub(jac, log_std)?;
        let offset = -0.5 * (2.0 * std::f64::consts::PI).ln() - self.action_scale.ln() - 2.0 * std::f64::consts::LN_2;
        let c = tape.constant(eps.map(|v| -0.5 * v * v + offset));
        let per = tape.add(per, c)?;
        let log_prob = tape.row_sum(per);
        Ok(Squashed { action, log_prob })
    }

    fn sample_eps<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Tensor {
        let v = (0..rows * self.action_dim).map(|_| StandardNormal.sample(rng)).collect();
        Tensor::matrix(rows, self.action_dim, v).expect("sized")
    }

    /// Policy samples and their log densities without recording gradients.
    pub fn sample_actions<R: Rng + ?Sized>(&self, states: &Tensor, rng: &mut R) -> Result<(Tensor, Vec<f64>)> {
        self.check_states(states)?;
        let eps = self.sample_eps(states.rows(), rng);
        self.actions_for_noise(states, &eps)
    }

    fn actions_for_noise(&self, states: &Tensor, eps: &Tensor) -> Result<(Tensor, Vec<f64>)> {
        let mut tape = Tape::new();
        let vars = self.actor.params().bind_frozen(&mut tape);
        let s = tape.constant(states.clone());
        let out = self.actor.forward(&mut tape, &vars, s)?;
        let sq = self.squash(&mut tape, out, eps)?;
        Ok((tape.value(sq.action).clone(), tape.value(sq.log_prob).values().to_vec()))
    }

    /// Action for one state: `tanh(mean)` when deterministic, a squashed
    /// Gaussian sample otherwise. Always within bounds.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], deterministic: bool, rng: &mut R) -> Result<Vec<f64>> {
        if deterministic {
            return self.mean_action(state);
        }
        let s = Tensor::row(state.to_vec());
        self.check_states(&s)?;
        let (a, _) = self.sample_actions(&s, rng)?;
        Ok(a.into_values())
    }

    /// The squashed mean of the policy.
    pub fn mean_action(&self, state: &[f64]) -> Result<Vec<f64>> {
        let s = Tensor::row(state.to_vec());
        self.check_states(&s)?;
        let out = self.actor.infer(&s)?;
        let lo = self.action_shift - self.action_scale;
        let hi = self.action_shift + self.action_scale;
        Ok(out.values()[..self.action_dim]
            .iter()
            .map(|m| (self.action_shift + self.action_scale * m.tanh()).clamp(lo, hi))
            .collect())
    }

    fn check_batch(&self, batch: &AgentBatch) -> Result<()> {
        let n = batch.len();
        let ok = batch.states.shape() == [n, self.state_dim]
            && batch.next_states.shape() == [n, self.state_dim]
            && batch.actions.shape() == [n, self.action_dim]
            && batch.dones.len() == n;
        if !ok || n == 0 {
            return Err(Error::dim(format!(
                "batch of {n} with state {:?} / action {:?} shapes does not fit dims {}/{}",
                batch.states.shape(),
                batch.actions.shape(),
                self.state_dim,
                self.action_dim
            )));
        }
        Ok(())
    }

    /// Soft Bellman targets `r + gamma (1 - done) (min Q_targ(s', a') - alpha log pi(a'|s'))`.
    pub fn critic_target<R: Rng + ?Sized>(&self, batch: &AgentBatch, rng: &mut R) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        let (next_a, logp) = self.sample_actions(&batch.next_states, rng)?;
        let x = batch.next_states.concat_cols(&next_a)?;
        let t1 = self.q1_target.infer(&x)?;
        let t2 = self.q2_target.infer(&x)?;
        let alpha = self.temperature();
        Ok((0..batch.len())
            .map(|i| {
                let soft = t1.values()[i].min(t2.values()[i]) - alpha * logp[i];
                let mask = if batch.dones[i] { 0.0 } else { 1.0 };
                batch.rewards[i] + self.cfg.gamma * mask * soft
            })
            .collect())
    }

    /// `mean((Q1 - y)^2) + mean((Q2 - y)^2)` recorded on `tape` against fixed
    /// targets; `vars` bind `q1` then `q2`.
    pub fn critic_loss_on_tape(
        &self,
        tape: &mut Tape,
        vars: (&[Var], &[Var]),
        batch: &AgentBatch,
        targets: &[f64],
    ) -> Result<Var> {
        let x = tape.constant(batch.states.concat_cols(&batch.actions)?);
        let y = tape.constant(Tensor::column(targets.to_vec()));
        let mut total = None;
        for (net, v) in [(&self.q1, vars.0), (&self.q2, vars.1)] {
            let q = net.forward(tape, v, x)?;
            let d = tape.sub(q, y)?;
            let sq = tape.square(d);
            let m = tape.mean(sq);
            total = Some(match total {
                None => m,
                Some(t) => tape.add(t, m)?,
            });
        }
        Ok(total.expect("two critics"))
    }

    pub fn update_critic<R: Rng + ?Sized>(&mut self, batch: &AgentBatch, rng: &mut R) -> Result<f64> {
        let targets = self.critic_target(batch, rng)?;
        let mut tape = Tape::new();
        let v1 = self.q1.params().bind(&mut tape);
        let v2 = self.q2.params().bind(&mut tape);
        let loss = self.critic_loss_on_tape(&mut tape, (&v1, &v2), batch, &targets)?;
        let grads = tape.backward(loss)?;
        self.q1.params_mut().adam_step(&grads.collect(&v1), self.cfg.critic_lr)?;
        self.q2.params_mut().adam_step(&grads.collect(&v2), self.cfg.critic_lr)?;
        Ok(tape.value(loss).item())
    }

    /// One step on `mean(alpha log pi - min Q)`; returns the actor loss and
    /// the temperature loss (0 when the temperature is fixed).
    pub fn update_actor<R: Rng + ?Sized>(&mut self, states: &Tensor, rng: &mut R) -> Result<(f64, f64)> {
        self.check_states(states)?;
        let eps = self.sample_eps(states.rows(), rng);
        let alpha = self.temperature();
        let mut tape = Tape::new();
        let va = self.actor.params().bind(&mut tape);
        let s = tape.constant(states.clone());
        let out = self.actor.forward(&mut tape, &va, s)?;
        let sq = self.squash(&mut tape, out, &eps)?;
        let x = tape.concat_cols(s, sq.action)?;
        let v1 = self.q1.params().bind_frozen(&mut tape);
        let v2 = self.q2.params().bind_frozen(&mut tape);
        let q1 = self.q1.forward(&mut tape, &v1, x)?;
        let q2 = self.q2.forward(&mut tape, &v2, x)?;
        let q = tape.min(q1, q2)?;
        let ent = tape.scale(sq.log_prob, alpha);
        let obj = tape.sub(ent, q)?;
        let loss = tape.mean(obj);
        let grads = tape.backward(loss)?.collect(&va);
        self.actor.params_mut().adam_step(&grads, self.cfg.actor_lr)?;

        let mut temp_loss = 0.0;
        if self.cfg.auto_temperature {
            let target_entropy = -(self.action_dim as f64);
            let logp = tape.value(sq.log_prob).values();
            let gap = logp.iter().map(|l| l + target_entropy).sum::<f64>() / logp.len() as f64;
            let log_alpha = self.log_alpha.value(0).item();
            temp_loss = -log_alpha * gap;
            self.log_alpha.adam_step(&[Tensor::scalar(-gap)], self.cfg.temperature_lr)?;
        }
        Ok((tape.value(loss).item(), temp_loss))
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        let rate = self.cfg.tau_ema;
        self.q1_target.params_mut().soft_update_from(self.q1.params(), rate)?;
        self.q2_target.params_mut().soft_update_from(self.q2.params(), rate)
    }

    /// Critic step, actor step, then a target soft-update every
    /// `target_update_interval` calls.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &AgentBatch, rng: &mut R) -> Result<UpdateLosses> {
        let critic = self.update_critic(batch, rng)?;
        let (actor, temperature) = self.update_actor(&batch.states, rng)?;
        self.updates += 1;
        if self.updates % self.cfg.target_update_interval as u64 == 0 {
            self.soft_update_targets()?;
        }
        Ok(UpdateLosses {
            critic,
            actor,
            temperature,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent(cfg: AgentConfig, seed: u64) -> SacAgent {
        SacAgent::new(3, 2, -1.0, 1.0, cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn batch(rng: &mut ChaCha8Rng, n: usize) -> AgentBatch {
        let m = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        AgentBatch {
            states: m(n, 3, rng),
            actions: m(n, 2, rng),
            rewards: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            next_states: m(n, 3, rng),
            dones: (0..n).map(|i| i % 3 == 0).collect(),
        }
    }

    #[test]
    fn zero_discount_target_is_the_reward() {
        let a = agent(AgentConfig { gamma: 0.0, ..AgentConfig::default() }, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = batch(&mut rng, 16);
        assert_eq!(a.critic_target(&b, &mut rng).unwrap(), b.rewards);
    }

    #[test]
    fn actions_respect_bounds_and_determinism() {
        let a = SacAgent::new(3, 2, -2.0, 0.5, AgentConfig::default(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-50.0..50.0)).collect();
            let x = a.act(&s, false, &mut rng).unwrap();
            assert!(x.iter().all(|v| (-2.0..=0.5).contains(v)));
        }
        let s = [0.3, -0.2, 0.9];
        assert_eq!(a.act(&s, true, &mut rng).unwrap(), a.act(&s, true, &mut rng).unwrap());
        assert!(a.act(&[0.0, 1.0], true, &mut rng).is_err());
    }

    /// Drives the log-std head to its lower clamp.
    fn collapse_log_std(a: &mut SacAgent) {
        let last = a.actor.params().len() - 1;
        let ad = a.action_dim;
        let bias = a.actor.params_mut().value_mut(last);
        bias.values_mut()[ad..].iter_mut().for_each(|v| *v = -1e3);
        let w = a.actor.params_mut().value_mut(last - 1);
        let cols = w.cols();
        for (i, v) in w.values_mut().iter_mut().enumerate() {
            if i % cols >= ad {
                *v = 0.0;
            }
        }
    }

    #[test]
    fn collapsed_policy_is_deterministic() {
        let mut a = agent(AgentConfig::default(), 6);
        collapse_log_std(&mut a);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d = a.act(&s, true, &mut rng).unwrap();
            let x = a.act(&s, false, &mut rng).unwrap();
            for (p, q) in d.iter().zip(&x) {
                assert!((p - q).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn log_prob_matches_closed_form() {
        let a = agent(AgentConfig::default(), 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = Tensor::matrix(4, 3, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let eps = a.sample_eps(4, &mut rng);
        let (act, logp) = a.actions_for_noise(&s, &eps).unwrap();
        let out = a.actor.infer(&s).unwrap();
        for i in 0..4 {
            let mut lp = 0.0;
            for j in 0..2 {
                let mean = out.get(i, j);
                let ls = out.get(i, 2 + j).clamp(LOG_STD_MIN, LOG_STD_MAX);
                let u = mean + ls.exp() * eps.get(i, j);
                let e = eps.get(i, j);
                lp += -0.5 * e * e - ls - 0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0 - u.tanh().powi(2)).ln();
                assert!((act.get(i, j) - u.tanh()).abs() < 1e-12);
            }
            assert!((lp - logp[i]).abs() < 1e-8, "{lp} vs {}", logp[i]);
        }
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let a = agent(AgentConfig { hidden: 16, ..AgentConfig::default() }, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = batch(&mut rng, 8);
        let targets = a.critic_target(&b, &mut rng).unwrap();
        let loss_of = |a: &SacAgent| {
            let mut tape = Tape::new();
            let v1 = a.q1.params().bind_frozen(&mut tape);
            let v2 = a.q2.params().bind_frozen(&mut tape);
            let l = a.critic_loss_on_tape(&mut tape, (&v1, &v2), &b, &targets).unwrap();
            tape.value(l).item()
        };
        let mut tape = Tape::new();
        let v1 = a.q1.params().bind(&mut tape);
        let v2 = a.q2.params().bind(&mut tape);
        let l = a.critic_loss_on_tape(&mut tape, (&v1, &v2), &b, &targets).unwrap();
        let g = tape.backward(l).unwrap().collect(&v1);
        for _ in 0..60 {
            let pi = rng.random_range(0..a.q1.params().len());
            let ei = rng.random_range(0..a.q1.params().value(pi).len());
            let mut hi = a.clone();
            let mut lo = a.clone();
            hi.q1.params_mut().value_mut(pi).values_mut()[ei] += 1e-5;
            lo.q1.params_mut().value_mut(pi).values_mut()[ei] -= 1e-5;
            let num = (loss_of(&hi) - loss_of(&lo)) / 2e-5;
            let ana = g[pi].values()[ei];
            let err = (num - ana).abs();
            assert!(err < 1e-7 || err / num.abs().max(ana.abs()) < 1e-3, "{ana} vs {num}");
        }
    }

    #[test]
    fn single_state_q_converges_to_geometric_sum() {
        let cfg = AgentConfig {
            gamma: 0.5,
            temperature: 0.0,
            hidden: 16,
            critic_lr: 1e-2,
            tau_ema: 0.1,
            target_update_interval: 1,
            ..AgentConfig::default()
        };
        let mut a = agent(cfg, 12);
        collapse_log_std(&mut a);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = vec![0.2, -0.4, 0.6];
        let act = a.act(&s, true, &mut rng).unwrap();
        let n = 16;
        let b = AgentBatch {
            states: Tensor::from_rows(&vec![s.clone(); n]).unwrap(),
            actions: Tensor::from_rows(&vec![act.clone(); n]).unwrap(),
            rewards: vec![1.0; n],
            next_states: Tensor::from_rows(&vec![s.clone(); n]).unwrap(),
            dones: vec![false; n],
        };
        for _ in 0..3000 {
            a.update_critic(&b, &mut rng).unwrap();
            a.soft_update_targets().unwrap();
        }
        let x = Tensor::row([s, act].concat());
        for q in a.critics() {
            let v = q.infer(&x).unwrap().item();
            assert!((v - 2.0).abs() < 1e-2, "Q = {v}");
        }
    }

    #[test]
    fn targets_track_online_critics() {
        let mut a = agent(AgentConfig { tau_ema: 0.05, ..AgentConfig::default() }, 14);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let b = batch(&mut rng, 8);
        for _ in 0..5 {
            a.update_critic(&b, &mut rng).unwrap();
        }
        let gap = |a: &SacAgent| -> f64 {
            a.q1.params()
                .values()
                .zip(a.q1_target.params().values())
                .flat_map(|(x, y)| x.values().iter().zip(y.values()).map(|(p, q)| (p - q).powi(2)).collect::<Vec<_>>())
                .sum::<f64>()
                .sqrt()
        };
        let g0 = gap(&a);
        for _ in 0..20 {
            a.soft_update_targets().unwrap();
        }
        assert!((gap(&a) - g0 * 0.95f64.powi(20)).abs() < 1e-9);
    }

    #[test]
    fn full_update_runs_and_counts() {
        let mut a = agent(AgentConfig { auto_temperature: true, ..AgentConfig::default() }, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b = batch(&mut rng, 32);
        let t0 = a.temperature();
        for _ in 0..4 {
            let l = a.update(&b, &mut rng).unwrap();
            assert!(l.critic.is_finite() && l.actor.is_finite());
        }
        assert_eq!(a.update_count(), 4);
        assert_ne!(a.temperature(), t0);
        let mut wrong = b.clone();
        wrong.actions = Tensor::zeros(32, 3);
        assert!(matches!(a.update(&wrong, &mut rng), Err(Error::Dimension(_))));
    }
}
