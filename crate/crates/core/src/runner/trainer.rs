use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agent::{new_agent, pretrain, PretrainStats, Rollout, SacAgent, UpdateLosses};
use crate::data::{
    extract_unlabeled, unlabeled_ratio, LabeledDataset, PreferenceTriple, ReplayBuffer, SegmentPair,
    SegmentSampler, UnlabeledDataset,
};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::reward::{preference_accuracy, train_session, RewardEnsemble, SessionStats};
use crate::teacher::{select_queries, HumanLabelInbox, QueryPlan, ScriptedTeacher};

use super::checkpoint::Checkpoint;
use super::config::{ExperimentConfig, RewardSource, TeacherKind};
use super::metrics::{write_csv, MetricsRecord, MetricsSink, RecordKind};
use super::status::{Phase, RunStatus, StatusHandle};

/// Offset between a run's seed and the seed of its evaluation episodes.
const EVAL_SEED_OFFSET: u64 = 0x5eed;

/// Milestones of a run, in the order they happened.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Pretrained { steps: usize },
    LabelsAdded { session: usize, train: usize, heldout: usize },
    QueriesIssued { session: usize, count: usize },
    RewardTrained { session: usize },
    Relabeled { session: usize, count: usize },
    /// First agent update after a session.
    AgentUpdated { session: usize, step: usize },
    SessionSkipped { session: usize, reason: String },
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SessionReport {
    pub session: usize,
    pub new_labels: usize,
    pub heldout_labels: usize,
    pub labeled_size: usize,
    pub unlabeled_size: usize,
    pub stats: Option<SessionStats>,
    pub relabeled: usize,
    pub heldout_accuracy: Option<f64>,
    pub issued: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub final_return: f64,
    pub heldout_accuracy: Option<f64>,
    pub labels_used: usize,
    pub sessions: usize,
    /// Mean retained-unlabeled fraction over sessions that trained.
    pub retained_fraction: Option<f64>,
    pub records: Vec<MetricsRecord>,
}

/// Mean deterministic-policy true return over `episodes` episodes whose
/// start states come from `seed`.
pub fn evaluate_policy(
    kind: EnvKind,
    episodes: usize,
    seed: u64,
    mut policy: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = kind.make();
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = env.reset(&mut rng);
        loop {
            let out = env.step(&policy(&state)?)?;
            total += out.reward;
            if out.done {
                break;
            }
            state = out.next_state;
        }
    }
    Ok(total / episodes.max(1) as f64)
}

pub fn evaluate(agent: &SacAgent, kind: EnvKind, episodes: usize, seed: u64) -> Result<f64> {
    evaluate_policy(kind, episodes, seed, |s| agent.mean_action(s))
}

/// The full preference-based RL loop, steppable for inspection.
pub struct Trainer {
    cfg: ExperimentConfig,
    rng: ChaCha8Rng,
    agent: SacAgent,
    ensemble: RewardEnsemble,
    buffer: ReplayBuffer,
    rollout: Rollout,
    teacher: ScriptedTeacher,
    inbox: HumanLabelInbox,
    status: StatusHandle,
    labeled: LabeledDataset,
    heldout: LabeledDataset,
    env_steps: usize,
    next_session: usize,
    next_eval: usize,
    labels_used: usize,
    sessions: usize,
    reward_trained: bool,
    pretrained: bool,
    update_event_due: bool,
    events: Vec<Event>,
    records: Vec<MetricsRecord>,
    retained: Vec<f64>,
    sink: Option<MetricsSink>,
    last_losses: Option<UpdateLosses>,
    last_eval: Option<(usize, f64)>,
}

impl Trainer {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        Self::with_channels(cfg, HumanLabelInbox::new(), StatusHandle::default())
    }

    /// Uses a caller-provided inbox and status handle, shared with a
    /// feedback server.
    pub fn with_channels(cfg: ExperimentConfig, inbox: HumanLabelInbox, status: StatusHandle) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let env = cfg.env.make();
        let spec = env.spec();
        let agent = new_agent(&env, cfg.agent.clone(), &mut rng)?;
        let ensemble = RewardEnsemble::new(spec.state_dim, spec.action_dim, cfg.ensemble_size, &cfg.reward_net, &mut rng)?;
        let rollout = Rollout::new(env, &mut rng);
        let sink = match &cfg.out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("config.txt"), cfg.to_kv_string())?;
                Some(MetricsSink::create(&dir.join("metrics.jsonl"))?)
            }
            None => None,
        };
        status.update(|s| {
            *s = RunStatus {
                total_steps: cfg.total_steps,
                budget: cfg.max_budget,
                ..RunStatus::default()
            }
        });
        Ok(Trainer {
            teacher: ScriptedTeacher::new(cfg.equal_epsilon)?,
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            next_session: cfg.agent.pretrain_steps,
            next_eval: cfg.agent.pretrain_steps + cfg.eval_frequency,
            cfg,
            rng,
            agent,
            ensemble,
            rollout,
            inbox,
            status,
            labeled: LabeledDataset::new(),
            heldout: LabeledDataset::new(),
            env_steps: 0,
            labels_used: 0,
            sessions: 0,
            reward_trained: false,
            pretrained: false,
            update_event_due: false,
            events: Vec::new(),
            records: Vec::new(),
            retained: Vec::new(),
            sink,
            last_losses: None,
            last_eval: None,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn agent(&self) -> &SacAgent {
        &self.agent
    }

    pub fn ensemble(&self) -> &RewardEnsemble {
        &self.ensemble
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn labeled(&self) -> &LabeledDataset {
        &self.labeled
    }

    pub fn heldout(&self) -> &LabeledDataset {
        &self.heldout
    }

    pub fn inbox(&self) -> &HumanLabelInbox {
        &self.inbox
    }

    pub fn status(&self) -> &StatusHandle {
        &self.status
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    pub fn labels_used(&self) -> usize {
        self.labels_used
    }

    pub fn sessions(&self) -> usize {
        self.sessions
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn records(&self) -> &[MetricsRecord] {
        &self.records
    }

    pub fn finished(&self) -> bool {
        self.env_steps >= self.cfg.total_steps
    }

    fn publish(&self, phase: Phase) {
        let (step, sessions, used) = (self.env_steps, self.sessions, self.labels_used);
        let eval = self.last_eval.map(|(_, r)| r);
        self.status.update(|s| {
            s.phase = phase;
            s.step = step;
            s.sessions = sessions;
            s.labels_used = used;
            s.latest_eval_return = eval;
        });
    }

    fn emit(&mut self, rec: MetricsRecord) -> Result<()> {
        if let Some(sink) = &mut self.sink {
            sink.write(&rec)?;
        }
        self.records.push(rec);
        Ok(())
    }

    /// State-entropy pre-training; idempotent.
    pub fn pretrain(&mut self) -> Result<PretrainStats> {
        if self.pretrained {
            return Ok(PretrainStats::default());
        }
        self.publish(Phase::Pretraining);
        let steps = self.cfg.agent.pretrain_steps;
        let stats = pretrain(&mut self.agent, &mut self.rollout, &mut self.buffer, steps, &mut self.rng)?;
        self.env_steps += steps;
        self.pretrained = true;
        if self.cfg.reward_source == RewardSource::GroundTruth {
            self.buffer.set_learned_rewards(|t| t.true_reward());
        }
        self.events.push(Event::Pretrained { steps });
        self.publish(Phase::Training);
        Ok(stats)
    }

    pub fn session_due(&self) -> bool {
        self.pretrained
            && self.cfg.reward_source == RewardSource::Preferences
            && !self.finished()
            && self.env_steps >= self.next_session
    }

    fn candidates(&mut self, n: usize) -> Result<Vec<SegmentPair>> {
        let sampler = SegmentSampler::new(&self.buffer, self.cfg.crop.segment_len)?;
        (0..10 * n).map(|_| sampler.sample_pair(&mut self.rng)).collect()
    }

    fn select(&mut self, n: usize) -> Result<Vec<SegmentPair>> {
        let cands = self.candidates(n)?;
        let plan = QueryPlan::new(n, self.cfg.query_strategy);
        select_queries(cands, &plan, &self.ensemble, &mut self.rng)
    }

    /// One feedback session: gather labels, train the reward ensemble,
    /// relabel the buffer and, for a human teacher, issue the next queries.
    pub fn session(&mut self) -> Result<SessionReport> {
        self.sessions += 1;
        self.next_session = self.env_steps + self.cfg.feedback_frequency;
        let sid = self.sessions;
        let mut report = SessionReport {
            session: sid,
            ..SessionReport::default()
        };

        let fresh = match self.cfg.teacher {
            TeacherKind::Scripted => self.scripted_labels(sid, &mut report)?,
            TeacherKind::Human => self.human_labels(sid, &mut report)?,
        };
        report.labeled_size = self.labeled.len();

        if fresh > 0 {
            let unlabeled = self.unlabeled(fresh)?;
            report.unlabeled_size = unlabeled.len();
            let ssl = self.cfg.effective_ssl();
            let aug = self.cfg.augmentation();
            let stats = train_session(&mut self.ensemble, &self.labeled, &unlabeled, &ssl, &aug, &mut self.rng)?;
            self.reward_trained = true;
            self.events.push(Event::RewardTrained { session: sid });
            report.relabeled = self.buffer.relabel_all(&self.ensemble)?;
            self.events.push(Event::Relabeled {
                session: sid,
                count: report.relabeled,
            });
            if self.cfg.ssl_on {
                self.retained.push(stats.retained_fraction);
            }
            report.stats = Some(stats);
            self.update_event_due = true;
        }
        report.heldout_accuracy = preference_accuracy(&self.ensemble, self.heldout.iter())?;

        if self.cfg.teacher == TeacherKind::Human {
            report.issued = self.issue_human_queries(sid)?;
        }

        let mut rec = MetricsRecord::new(RecordKind::Session, self.env_steps, sid, self.labels_used);
        rec.heldout_accuracy = report.heldout_accuracy;
        if let Some(st) = &report.stats {
            rec.labeled_accuracy = st.labeled_accuracy;
            rec.retained_fraction = self.cfg.ssl_on.then_some(st.retained_fraction);
            rec.reward_loss = Some(st.mean_loss);
        }
        self.emit(rec)?;
        self.publish(Phase::Training);
        Ok(report)
    }

    fn skip(&mut self, session: usize, reason: String) {
        self.events.push(Event::SessionSkipped { session, reason });
    }

    fn scripted_labels(&mut self, sid: usize, report: &mut SessionReport) -> Result<usize> {
        let n = self.cfg.queries_per_session.min(self.cfg.max_budget - self.labels_used);
        if n == 0 {
            self.skip(sid, "budget exhausted".into());
            return Ok(0);
        }
        let pairs = match self.select(n) {
            Ok(p) => p,
            Err(Error::NotReady(m)) => {
                self.skip(sid, m);
                return Ok(0);
            }
            Err(e) => return Err(e),
        };
        let mut triples = pairs
            .into_iter()
            .map(|p| self.teacher.annotate(p))
            .collect::<Result<Vec<PreferenceTriple>>>()?;
        self.labels_used += triples.len();
        let hold = (triples.len() as f64 * self.cfg.heldout_fraction).floor() as usize;
        triples.shuffle(&mut self.rng);
        let train = triples.split_off(hold);
        report.heldout_labels = triples.len();
        report.new_labels = train.len();
        self.heldout.extend(triples)?;
        let fresh = train.len();
        self.labeled.extend(train)?;
        self.events.push(Event::LabelsAdded {
            session: sid,
            train: fresh,
            heldout: report.heldout_labels,
        });
        Ok(fresh)
    }

    fn human_labels(&mut self, sid: usize, report: &mut SessionReport) -> Result<usize> {
        let wait = Duration::from_secs_f64(self.cfg.human_wait_secs);
        let start = Instant::now();
        while self.inbox.pending_count() > 0 && start.elapsed() < wait {
            std::thread::sleep(Duration::from_millis(20));
        }
        let answers = self.inbox.collect()?;
        self.inbox.expire_pending();
        let fresh = answers.len();
        self.labels_used += fresh;
        report.new_labels = fresh;
        self.labeled.extend(answers)?;
        if fresh > 0 {
            self.events.push(Event::LabelsAdded {
                session: sid,
                train: fresh,
                heldout: 0,
            });
        }
        Ok(fresh)
    }

    fn issue_human_queries(&mut self, sid: usize) -> Result<usize> {
        let open = self.labels_used + self.inbox.pending_count();
        let n = self.cfg.queries_per_session.min(self.cfg.max_budget.saturating_sub(open));
        if n == 0 {
            return Ok(0);
        }
        match self.select(n) {
            Ok(pairs) => {
                let ids = self.inbox.issue(pairs);
                self.events.push(Event::QueriesIssued {
                    session: sid,
                    count: ids.len(),
                });
                Ok(ids.len())
            }
            Err(Error::NotReady(m)) => {
                self.skip(sid, m);
                Ok(0)
            }
            Err(e) => Err(e),
        }
    }

    fn unlabeled(&mut self, fresh: usize) -> Result<UnlabeledDataset> {
        if !self.cfg.ssl_on {
            return Ok(UnlabeledDataset::default());
        }
        let ratio = self.cfg.unlabeled_ratio.unwrap_or_else(|| unlabeled_ratio(self.cfg.max_budget));
        extract_unlabeled(&self.buffer, ratio * fresh, self.cfg.crop.segment_len, &mut self.rng)
    }

    /// One policy step plus the configured number of agent updates.
    pub fn collect_step(&mut self) -> Result<()> {
        if !self.pretrained {
            return Err(Error::contract("pre-training must run before collection"));
        }
        let action = self.agent.act(self.rollout.state(), false, &mut self.rng)?;
        self.rollout.step(&action, &mut self.buffer, &mut self.rng)?;
        let learned = match self.cfg.reward_source {
            RewardSource::GroundTruth => None,
            RewardSource::Preferences if self.reward_trained => {
                let t = self.buffer.last_mut().expect("just pushed");
                Some(self.ensemble.ensemble_reward(&t.state, &t.action)?)
            }
            RewardSource::Preferences => Some(0.0),
        };
        let t = self.buffer.last_mut().expect("just pushed");
        t.learned_reward = learned.unwrap_or_else(|| t.true_reward());
        self.env_steps += 1;

        if self.buffer.len() >= self.cfg.agent.batch_size {
            for _ in 0..self.cfg.agent.updates_per_step {
                let batch = self.buffer.sample_agent_batch(self.cfg.agent.batch_size, &mut self.rng)?;
                self.last_losses = Some(self.agent.update(&batch, &mut self.rng)?);
            }
            if self.update_event_due {
                self.update_event_due = false;
                self.events.push(Event::AgentUpdated {
                    session: self.sessions,
                    step: self.env_steps,
                });
            }
        }
        if self.env_steps % 100 == 0 {
            self.publish(Phase::Training);
        }
        Ok(())
    }

    /// Deterministic-policy evaluation on fixed start states; emits a record.
    pub fn evaluate_now(&mut self) -> Result<f64> {
        let ret = evaluate(
            &self.agent,
            self.cfg.env,
            self.cfg.eval_episodes,
            self.cfg.seed.wrapping_add(EVAL_SEED_OFFSET),
        )?;
        self.last_eval = Some((self.env_steps, ret));
        let mut rec = MetricsRecord::new(RecordKind::Eval, self.env_steps, self.sessions, self.labels_used);
        rec.eval_return = Some(ret);
        if let Some(l) = self.last_losses {
            rec.critic_loss = Some(l.critic);
            rec.actor_loss = Some(l.actor);
        }
        self.emit(rec)?;
        self.publish(Phase::Training);
        Ok(ret)
    }

    /// Runs to `total_steps` and writes the output directory if configured.
    pub fn run(&mut self) -> Result<RunSummary> {
        self.pretrain()?;
        self.advance(usize::MAX)?;
        self.finish()
    }

    /// Up to `max_steps` environment steps of the main loop, with feedback
    /// sessions and evaluations as scheduled. Returns the steps taken.
    pub fn advance(&mut self, max_steps: usize) -> Result<usize> {
        let start = self.env_steps;
        while !self.finished() && self.env_steps - start < max_steps {
            if self.session_due() {
                self.session()?;
            }
            self.collect_step()?;
            if self.env_steps >= self.next_eval {
                self.next_eval += self.cfg.eval_frequency;
                self.evaluate_now()?;
            }
        }
        Ok(self.env_steps - start)
    }

    /// Final evaluation and outputs of a finished run.
    pub fn finish(&mut self) -> Result<RunSummary> {
        if !self.finished() {
            return Err(Error::contract("run has not reached total_steps"));
        }
        let final_return = match self.last_eval {
            Some((step, r)) if step == self.env_steps => r,
            _ => self.evaluate_now()?,
        };
        self.publish(Phase::Finished);
        let summary = RunSummary {
            final_return,
            heldout_accuracy: preference_accuracy(&self.ensemble, self.heldout.iter())?,
            labels_used: self.labels_used,
            sessions: self.sessions,
            retained_fraction: (!self.retained.is_empty())
                .then(|| self.retained.iter().sum::<f64>() / self.retained.len() as f64),
            records: self.records.clone(),
        };
        if let Some(dir) = self.cfg.out_dir.clone() {
            self.write_outputs(&dir, &summary)?;
        }
        Ok(summary)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            env: self.cfg.env,
            ensemble: Some(self.ensemble.clone()),
            actor: Some(self.agent.actor().clone()),
        }
    }

    fn write_outputs(&self, dir: &Path, summary: &RunSummary) -> Result<()> {
        self.checkpoint().save(&dir.join("checkpoint.bin"))?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        write_csv(
            &dir.join("summary.csv"),
            &["env", "seed", "ssl", "tda", "ras", "gn", "reward_source", "labels_used", "sessions", "final_return", "heldout_accuracy", "retained_fraction"],
            &[vec![
                self.cfg.env.name().into(),
                self.cfg.seed.to_string(),
                self.cfg.ssl_on.to_string(),
                self.cfg.tda_on.to_string(),
                self.cfg.ras_on.to_string(),
                self.cfg.gn_on.to_string(),
                format!("{:?}", self.cfg.reward_source),
                summary.labels_used.to_string(),
                summary.sessions.to_string(),
                format!("{:.6}", summary.final_return),
                opt(summary.heldout_accuracy),
                opt(summary.retained_fraction),
            ]],
        )
    }
}

/// Convenience wrapper: build a trainer and run it to completion.
pub fn run(cfg: ExperimentConfig) -> Result<RunSummary> {
    Trainer::new(cfg)?.run()
}
