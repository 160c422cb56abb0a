use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::agent::AgentConfig;
use crate::augment::{AugmentConfig, CropConfig, GnConfig, RasConfig};
use crate::data::DEFAULT_REPLAY_CAPACITY;
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::reward::{RewardNetConfig, SslConfig};
use crate::teacher::QueryStrategy;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TeacherKind {
    Scripted,
    Human,
}

impl FromStr for TeacherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scripted" => Ok(TeacherKind::Scripted),
            "human" => Ok(TeacherKind::Human),
            other => Err(Error::Config(format!("unknown teacher {other:?}"))),
        }
    }
}

/// Where the agent's reward comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSource {
    /// Learned from preferences.
    Preferences,
    /// The environment's true reward, as an upper-bound reference run.
    GroundTruth,
}

impl FromStr for RewardSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "preferences" => Ok(RewardSource::Preferences),
            "ground_truth" => Ok(RewardSource::GroundTruth),
            other => Err(Error::Config(format!("unknown reward source {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub seed: u64,
    /// Environment steps including pre-training.
    pub total_steps: usize,
    /// Steps between feedback sessions; the first session follows
    /// pre-training.
    pub feedback_frequency: usize,
    pub max_budget: usize,
    pub queries_per_session: usize,
    pub teacher: TeacherKind,
    pub equal_epsilon: f64,
    pub query_strategy: QueryStrategy,
    pub reward_source: RewardSource,
    pub ensemble_size: usize,
    pub reward_net: RewardNetConfig,
    pub ssl: SslConfig,
    pub crop: CropConfig,
    pub ras: RasConfig,
    pub gn: GnConfig,
    pub ssl_on: bool,
    pub tda_on: bool,
    pub ras_on: bool,
    pub gn_on: bool,
    /// Unlabeled pairs per new label; `None` applies the budget rule.
    pub unlabeled_ratio: Option<usize>,
    /// Share of each scripted session's labels kept out of training.
    pub heldout_fraction: f64,
    /// Seconds a human session waits for outstanding answers.
    pub human_wait_secs: f64,
    pub agent: AgentConfig,
    pub eval_frequency: usize,
    pub eval_episodes: usize,
    pub replay_capacity: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvKind::PointMassReach,
            seed: 0,
            total_steps: 100_000,
            feedback_frequency: 2_000,
            max_budget: 100,
            queries_per_session: 10,
            teacher: TeacherKind::Scripted,
            equal_epsilon: 0.0,
            query_strategy: QueryStrategy::Disagreement,
            reward_source: RewardSource::Preferences,
            ensemble_size: 3,
            reward_net: RewardNetConfig::default(),
            ssl: SslConfig::default(),
            crop: CropConfig::default(),
            ras: RasConfig::default(),
            gn: GnConfig::default(),
            ssl_on: true,
            tda_on: true,
            ras_on: false,
            gn_on: false,
            unlabeled_ratio: None,
            heldout_fraction: 0.2,
            human_wait_secs: 0.0,
            agent: AgentConfig::default(),
            eval_frequency: 10_000,
            eval_episodes: 5,
            replay_capacity: DEFAULT_REPLAY_CAPACITY,
            out_dir: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected on/off, got {value:?}"))),
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

impl ExperimentConfig {
    /// Sets one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "env" => self.env = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "total_steps" => self.total_steps = parse(key, v)?,
            "feedback_frequency" => self.feedback_frequency = parse(key, v)?,
            "max_budget" => self.max_budget = parse(key, v)?,
            "queries_per_session" => self.queries_per_session = parse(key, v)?,
            "teacher" => self.teacher = v.parse()?,
            "equal_epsilon" => self.equal_epsilon = parse(key, v)?,
            "query_strategy" => self.query_strategy = v.parse()?,
            "reward_source" => self.reward_source = v.parse()?,
            "ensemble_size" => self.ensemble_size = parse(key, v)?,
            "reward.hidden" => self.reward_net.hidden = parse(key, v)?,
            "reward.layers" => self.reward_net.hidden_layers = parse(key, v)?,
            "ssl" => self.ssl_on = parse_bool(key, v)?,
            "ssl.mu" => self.ssl.mu = parse(key, v)?,
            "ssl.tau" => self.ssl.tau = parse(key, v)?,
            "ssl.lambda" => self.ssl.lambda = parse(key, v)?,
            "ssl.batch_size" => self.ssl.batch_size = parse(key, v)?,
            "ssl.epochs" => self.ssl.epochs = parse(key, v)?,
            "ssl.lr" => self.ssl.lr = parse(key, v)?,
            "tda" => self.tda_on = parse_bool(key, v)?,
            "crop.h_min" => self.crop.h_min = parse(key, v)?,
            "crop.h_max" => self.crop.h_max = parse(key, v)?,
            "crop.segment_len" => self.crop.segment_len = parse(key, v)?,
            "ras" => self.ras_on = parse_bool(key, v)?,
            "ras.alpha" => self.ras.alpha = parse(key, v)?,
            "ras.beta" => self.ras.beta = parse(key, v)?,
            "gn" => self.gn_on = parse_bool(key, v)?,
            "gn.sigma" => self.gn.sigma = parse(key, v)?,
            "gn.per_step" => self.gn.per_step = parse_bool(key, v)?,
            "unlabeled_ratio" => {
                self.unlabeled_ratio = if v == "auto" { None } else { Some(parse(key, v)?) }
            }
            "heldout_fraction" => self.heldout_fraction = parse(key, v)?,
            "human_wait_secs" => self.human_wait_secs = parse(key, v)?,
            "agent.gamma" => self.agent.gamma = parse(key, v)?,
            "agent.temperature" => self.agent.temperature = parse(key, v)?,
            "agent.auto_temperature" => self.agent.auto_temperature = parse_bool(key, v)?,
            "agent.batch_size" => self.agent.batch_size = parse(key, v)?,
            "agent.hidden" => self.agent.hidden = parse(key, v)?,
            "agent.layers" => self.agent.hidden_layers = parse(key, v)?,
            "agent.actor_lr" => self.agent.actor_lr = parse(key, v)?,
            "agent.critic_lr" => self.agent.critic_lr = parse(key, v)?,
            "agent.temperature_lr" => self.agent.temperature_lr = parse(key, v)?,
            "agent.tau_ema" => self.agent.tau_ema = parse(key, v)?,
            "agent.target_update_interval" => self.agent.target_update_interval = parse(key, v)?,
            "agent.updates_per_step" => self.agent.updates_per_step = parse(key, v)?,
            "agent.pretrain_steps" => self.agent.pretrain_steps = parse(key, v)?,
            "agent.seed_steps" => self.agent.seed_steps = parse(key, v)?,
            "agent.knn_k" => self.agent.knn_k = parse(key, v)?,
            "eval_frequency" => self.eval_frequency = parse(key, v)?,
            "eval_episodes" => self.eval_episodes = parse(key, v)?,
            "replay_capacity" => self.replay_capacity = parse(key, v)?,
            "out_dir" => self.out_dir = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. Blank lines and
    /// `#` comments are ignored.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    /// Every key in the file format, round-trippable through `parse_str`.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("env", self.env.name().into());
        put("seed", self.seed.to_string());
        put("total_steps", self.total_steps.to_string());
        put("feedback_frequency", self.feedback_frequency.to_string());
        put("max_budget", self.max_budget.to_string());
        put("queries_per_session", self.queries_per_session.to_string());
        put("teacher", format!("{:?}", self.teacher).to_lowercase());
        put("equal_epsilon", self.equal_epsilon.to_string());
        put("query_strategy", format!("{:?}", self.query_strategy).to_lowercase());
        put(
            "reward_source",
            match self.reward_source {
                RewardSource::Preferences => "preferences",
                RewardSource::GroundTruth => "ground_truth",
            }
            .into(),
        );
        put("ensemble_size", self.ensemble_size.to_string());
        put("reward.hidden", self.reward_net.hidden.to_string());
        put("reward.layers", self.reward_net.hidden_layers.to_string());
        put("ssl", on_off(self.ssl_on).into());
        put("ssl.mu", self.ssl.mu.to_string());
        put("ssl.tau", self.ssl.tau.to_string());
        put("ssl.lambda", self.ssl.lambda.to_string());
        put("ssl.batch_size", self.ssl.batch_size.to_string());
        put("ssl.epochs", self.ssl.epochs.to_string());
        put("ssl.lr", self.ssl.lr.to_string());
        put("tda", on_off(self.tda_on).into());
        put("crop.h_min", self.crop.h_min.to_string());
        put("crop.h_max", self.crop.h_max.to_string());
        put("crop.segment_len", self.crop.segment_len.to_string());
        put("ras", on_off(self.ras_on).into());
        put("ras.alpha", self.ras.alpha.to_string());
        put("ras.beta", self.ras.beta.to_string());
        put("gn", on_off(self.gn_on).into());
        put("gn.sigma", self.gn.sigma.to_string());
        put("gn.per_step", on_off(self.gn.per_step).into());
        put("unlabeled_ratio", self.unlabeled_ratio.map_or("auto".into(), |r| r.to_string()));
        put("heldout_fraction", self.heldout_fraction.to_string());
        put("human_wait_secs", self.human_wait_secs.to_string());
        let a = &self.agent;
        put("agent.gamma", a.gamma.to_string());
        put("agent.temperature", a.temperature.to_string());
        put("agent.auto_temperature", on_off(a.auto_temperature).into());
        put("agent.batch_size", a.batch_size.to_string());
        put("agent.hidden", a.hidden.to_string());
        put("agent.layers", a.hidden_layers.to_string());
        put("agent.actor_lr", a.actor_lr.to_string());
        put("agent.critic_lr", a.critic_lr.to_string());
        put("agent.temperature_lr", a.temperature_lr.to_string());
        put("agent.tau_ema", a.tau_ema.to_string());
        put("agent.target_update_interval", a.target_update_interval.to_string());
        put("agent.updates_per_step", a.updates_per_step.to_string());
        put("agent.pretrain_steps", a.pretrain_steps.to_string());
        put("agent.seed_steps", a.seed_steps.to_string());
        put("agent.knn_k", a.knn_k.to_string());
        put("eval_frequency", self.eval_frequency.to_string());
        put("eval_episodes", self.eval_episodes.to_string());
        put("replay_capacity", self.replay_capacity.to_string());
        put("out_dir", self.out_dir.as_ref().map_or(String::new(), |p| p.display().to_string()));
        s
    }

    /// Sessions needed to spend the whole budget.
    pub fn sessions_needed(&self) -> usize {
        if self.max_budget == 0 {
            0
        } else {
            self.max_budget.div_ceil(self.queries_per_session)
        }
    }

    pub fn augmentation(&self) -> AugmentConfig {
        AugmentConfig {
            crop: self.tda_on.then_some(self.crop),
            ras: self.ras_on.then_some(self.ras),
            gn: self.gn_on.then_some(self.gn),
        }
    }

    /// SSL settings with `mu = 0` when pseudo-labelling is off.
    pub fn effective_ssl(&self) -> SslConfig {
        if self.ssl_on {
            self.ssl
        } else {
            self.ssl.supervised()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.agent.validate()?;
        self.ssl.validate()?;
        self.crop.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.agent.pretrain_steps > self.total_steps {
            return bad(format!(
                "pre-training ({}) exceeds total steps ({})",
                self.agent.pretrain_steps, self.total_steps
            ));
        }
        if self.feedback_frequency == 0 || self.eval_frequency == 0 {
            return bad("feedback and evaluation frequencies must be positive".into());
        }
        if self.max_budget > 0 && self.queries_per_session == 0 {
            return bad("a positive budget needs queries_per_session > 0".into());
        }
        if self.reward_source == RewardSource::Preferences && self.max_budget > 0 {
            let last_session = self.agent.pretrain_steps + (self.sessions_needed() - 1) * self.feedback_frequency;
            if last_session >= self.total_steps {
                return bad(format!(
                    "budget {} at {} per session needs a session at step {last_session}, beyond total steps {}",
                    self.max_budget, self.queries_per_session, self.total_steps
                ));
            }
        }
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be positive".into());
        }
        if self.query_strategy == QueryStrategy::Disagreement && self.ensemble_size < 2 {
            return bad("disagreement sampling needs at least two ensemble members".into());
        }
        if !(0.0..1.0).contains(&self.heldout_fraction) {
            return bad(format!("heldout_fraction {} must lie in [0, 1)", self.heldout_fraction));
        }
        if self.teacher == TeacherKind::Scripted && !(self.equal_epsilon >= 0.0) {
            return bad(format!("equal_epsilon {} must be >= 0", self.equal_epsilon));
        }
        if !(self.human_wait_secs >= 0.0) {
            return bad("human_wait_secs must be >= 0".into());
        }
        if self.ras_on && !(self.ras.alpha > 0.0 && self.ras.alpha <= self.ras.beta) {
            return bad("ras needs 0 < alpha <= beta".into());
        }
        if self.gn_on && !(self.gn.sigma >= 0.0) {
            return bad("gn.sigma must be >= 0".into());
        }
        if self.replay_capacity == 0 || self.eval_episodes == 0 {
            return bad("replay_capacity and eval_episodes must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.env = EnvKind::PendulumSwingUp;
        cfg.ssl.tau = 0.999;
        cfg.tda_on = false;
        cfg.unlabeled_ratio = Some(7);
        cfg.agent.hidden = 32;
        cfg.out_dir = Some(PathBuf::from("/tmp/x"));
        let back = ExperimentConfig::parse_str(&cfg.to_kv_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_errors() {
        let cfg = ExperimentConfig::parse_str("# run\n\nseed = 4  # trailing\nssl=off\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert!(!cfg.ssl_on);
        assert!(ExperimentConfig::parse_str("sed = 4").is_err());
        assert!(ExperimentConfig::parse_str("seed 4").is_err());
        assert!(ExperimentConfig::parse_str("seed = four").is_err());
    }

    #[test]
    fn schedule_must_fit() {
        let mut cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        cfg.total_steps = 10_000;
        assert!(cfg.validate().is_err());
        cfg.max_budget = 0;
        cfg.validate().unwrap();
    }
}
