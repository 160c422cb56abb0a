use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::data::{LabeledDataset, Preference, PreferenceTriple, Segment, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::ndmath::Tape;

use super::loss::{ssl_terms, weighted_ce_on_tape, PseudoLabel, PseudoLabeledPair};
use super::net::{RewardEnsemble, RewardNet};

/// Hyperparameters of one reward-learning session.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SslConfig {
    /// Unlabeled pairs per labeled pair in each minibatch; 0 disables
    /// pseudo-labelling.
    pub mu: usize,
    pub tau: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for SslConfig {
    fn default() -> Self {
        SslConfig {
            mu: 4,
            tau: 0.99,
            lambda: 1.0,
            batch_size: 128,
            epochs: 50,
            lr: 3e-4,
        }
    }
}

impl SslConfig {
    pub fn supervised(self) -> Self {
        SslConfig { mu: 0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.5 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau {} must lie in (0.5, 1)", self.tau)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda {} must be >= 0", self.lambda)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SessionStats {
    /// Gradient steps summed over members.
    pub steps: usize,
    pub mean_loss: f64,
    /// Mean over steps of the retained share of each unlabeled minibatch.
    pub retained_fraction: f64,
    /// Retained share at each step (member-major order).
    pub retained_per_step: Vec<f64>,
    /// Ensemble accuracy on the decisive labels of `D_l` after training.
    pub labeled_accuracy: Option<f64>,
}

/// Minibatches of labeled indices for one epoch: a shuffled partition, or a
/// single with-replacement draw of `batch` when the dataset is smaller.
pub fn epoch_batches<R: Rng + ?Sized>(n: usize, batch: usize, rng: &mut R) -> Vec<Vec<usize>> {
    if n < batch {
        return vec![(0..batch).map(|_| rng.random_range(0..n)).collect()];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch).map(<[usize]>::to_vec).collect()
}

/// Trains every ensemble member on `D_l` and pseudo-labelled `D_u`.
///
/// Each member draws its own minibatches, computes its own pseudo-labels on
/// the un-augmented pairs, and augments labeled and retained unlabeled
/// pairs afresh at every step.
pub fn train_session<R: Rng + ?Sized>(
    ensemble: &mut RewardEnsemble,
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    cfg: &SslConfig,
    aug: &AugmentConfig,
    rng: &mut R,
) -> Result<SessionStats> {
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(Error::contract("training needs at least one labeled pair"));
    }
    let seeds: Vec<u64> = (0..ensemble.len()).map(|_| rng.random()).collect();
    let mut stats = SessionStats::default();
    let mut loss_sum = 0.0;
    for (member, seed) in ensemble.members_mut().iter_mut().zip(seeds) {
        let mut member_rng = ChaCha8Rng::seed_from_u64(seed);
        train_member(member, labeled, unlabeled, cfg, aug, &mut member_rng, &mut stats, &mut loss_sum)?;
    }
    if stats.steps > 0 {
        stats.mean_loss = loss_sum / stats.steps as f64;
        stats.retained_fraction =
            stats.retained_per_step.iter().sum::<f64>() / stats.retained_per_step.len() as f64;
    }
    stats.labeled_accuracy = preference_accuracy(ensemble, labeled.iter())?;
    Ok(stats)
}

#[allow(clippy::too_many_arguments)]
fn train_member(
    net: &mut RewardNet,
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    cfg: &SslConfig,
    aug: &AugmentConfig,
    rng: &mut ChaCha8Rng,
    stats: &mut SessionStats,
    loss_sum: &mut f64,
) -> Result<()> {
    for _ in 0..cfg.epochs {
        for batch in epoch_batches(labeled.len(), cfg.batch_size, rng) {
            let lab = batch
                .iter()
                .map(|&i| {
                    let t = labeled.get(i);
                    let (a, b) = if aug.is_identity() {
                        (t.seg0.clone(), t.seg1.clone())
                    } else {
                        aug.apply(&t.seg0, &t.seg1, rng)?
                    };
                    Ok((a, b, t.y()))
                })
                .collect::<Result<Vec<_>>>()?;

            let (unl, fraction) = pseudo_batch(net, unlabeled, cfg, cfg.mu * batch.len(), aug, rng)?;
            let (terms, _) = ssl_terms(&lab, &unl, cfg)?;
            let mut tape = Tape::new();
            let vars = net.mlp().params().bind(&mut tape);
            let loss = weighted_ce_on_tape(net, &mut tape, &vars, &terms)?;
            let grads = tape.backward(loss)?.collect(&vars);
            net.mlp_mut().params_mut().adam_step(&grads, cfg.lr)?;

            *loss_sum += tape.value(loss).item();
            stats.steps += 1;
            stats.retained_per_step.push(fraction);
        }
    }
    Ok(())
}

/// Samples `count` unlabeled pairs, pseudo-labels them on their original
/// form and keeps (augmented) the ones above threshold.
fn pseudo_batch(
    net: &RewardNet,
    unlabeled: &UnlabeledDataset,
    cfg: &SslConfig,
    count: usize,
    aug: &AugmentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<PseudoLabeledPair>, f64)> {
    if count == 0 || unlabeled.is_empty() {
        return Ok((Vec::new(), 0.0));
    }
    let picks: Vec<usize> = (0..count).map(|_| rng.random_range(0..unlabeled.len())).collect();
    let pairs: Vec<(&Segment, &Segment)> = picks
        .iter()
        .map(|&i| {
            let p = unlabeled.get(i);
            (&p.seg0, &p.seg1)
        })
        .collect();
    let probs = net.preference_probs(&pairs)?;
    let mut kept = Vec::new();
    for ((a, b), p) in pairs.into_iter().zip(probs) {
        let pseudo = PseudoLabel::from_prob_second(p);
        if !pseudo.retained(cfg.tau) {
            continue;
        }
        let (seg0, seg1) = if aug.is_identity() {
            (a.clone(), b.clone())
        } else {
            aug.apply(a, b, rng)?
        };
        kept.push(PseudoLabeledPair { seg0, seg1, pseudo });
    }
    let fraction = kept.len() as f64 / count as f64;
    Ok((kept, fraction))
}

/// Share of decisive (`y != 0.5`) labels on which the ensemble-mean
/// predictor picks the preferred segment. `None` when no label is decisive.
pub fn preference_accuracy<'a>(
    ensemble: &RewardEnsemble,
    triples: impl Iterator<Item = &'a PreferenceTriple>,
) -> Result<Option<f64>> {
    let decisive: Vec<&PreferenceTriple> = triples.filter(|t| t.label != Preference::Equal).collect();
    if decisive.is_empty() {
        return Ok(None);
    }
    let mut correct = 0usize;
    for chunk in decisive.chunks(256) {
        let pairs: Vec<(&Segment, &Segment)> = chunk.iter().map(|t| (&t.seg0, &t.seg1)).collect();
        let probs = ensemble.preference_probs(&pairs)?;
        correct += chunk
            .iter()
            .zip(probs)
            .filter(|(t, p)| (*p > 0.5) == (t.label == Preference::Second))
            .count();
    }
    Ok(Some(correct as f64 / decisive.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::CropConfig;
    use crate::data::{LabelSource, SegmentPair};
    use crate::ndmath::Tensor;
    use crate::reward::RewardNetConfig;

    fn seg(len: usize, rng: &mut ChaCha8Rng) -> Segment {
        let states: Vec<f64> = (0..2 * len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rewards = states.chunks(2).map(|s| s[0] - 0.5 * s[1]).collect();
        Segment::new(2, 1, states, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), rewards, 0, 0)
            .unwrap()
    }

    fn dataset(n: usize, len: usize, rng: &mut ChaCha8Rng) -> LabeledDataset {
        let mut d = LabeledDataset::new();
        for _ in 0..n {
            let (a, b) = (seg(len, rng), seg(len, rng));
            let y = if b.true_return() > a.true_return() { Preference::Second } else { Preference::First };
            d.push(PreferenceTriple::new(a, b, y, LabelSource::Scripted).unwrap()).unwrap();
        }
        d
    }

    /// Plain supervised trainer: per-pair forward passes, mean CE, Adam.
    fn supervised_oracle(net: &mut RewardNet, data: &LabeledDataset, cfg: &SslConfig, rng: &mut ChaCha8Rng) {
        for _ in 0..cfg.epochs {
            let batches: Vec<Vec<usize>> = if data.len() < cfg.batch_size {
                vec![(0..cfg.batch_size).map(|_| rng.random_range(0..data.len())).collect()]
            } else {
                let mut idx: Vec<usize> = (0..data.len()).collect();
                idx.shuffle(rng);
                idx.chunks(cfg.batch_size).map(|c| c.to_vec()).collect()
            };
            for batch in batches {
                let mut tape = Tape::new();
                let vars = net.mlp().params().bind(&mut tape);
                let mut total = None;
                for &i in &batch {
                    let t = data.get(i);
                    let x0 = tape.constant(t.seg0.input_rows());
                    let x1 = tape.constant(t.seg1.input_rows());
                    let o0 = net.mlp().forward(&mut tape, &vars, x0).unwrap();
                    let o1 = net.mlp().forward(&mut tape, &vars, x1).unwrap();
                    let r0 = tape.sum(o0);
                    let r1 = tape.sum(o1);
                    let d = tape.sub(r1, r0).unwrap();
                    let lp1 = tape.log_sigmoid(d, 1e-12);
                    let nd = tape.neg(d);
                    let lp0 = tape.log_sigmoid(nd, 1e-12);
                    let a = tape.scale(lp0, -(1.0 - t.y()) / batch.len() as f64);
                    let b = tape.scale(lp1, -t.y() / batch.len() as f64);
                    let term = tape.add(a, b).unwrap();
                    total = Some(match total {
                        None => term,
                        Some(acc) => tape.add(acc, term).unwrap(),
                    });
                }
                let grads = tape.backward(total.unwrap()).unwrap().collect(&vars);
                net.mlp_mut().params_mut().adam_step(&grads, cfg.lr).unwrap();
            }
        }
    }

    fn max_param_gap(a: &RewardNet, b: &RewardNet) -> f64 {
        a.mlp()
            .params()
            .values()
            .zip(b.mlp().params().values())
            .flat_map(|(x, y): (&Tensor, &Tensor)| x.values().iter().zip(y.values()).map(|(p, q)| (p - q).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    #[test]
    fn supervised_path_matches_oracle_trainer() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = SslConfig { mu: 0, batch_size: 8, epochs: 3, lr: 1e-3, ..SslConfig::default() };
        for n in [20, 5] {
            let data = dataset(n, 6, &mut rng);
            let mut init_rng = ChaCha8Rng::seed_from_u64(5);
            let mut ens = RewardEnsemble::new(2, 1, 2, &RewardNetConfig { hidden: 8, hidden_layers: 3 }, &mut init_rng).unwrap();
            let mut oracle = ens.members().to_vec();

            let mut session_rng = ChaCha8Rng::seed_from_u64(77);
            let stats = train_session(&mut ens, &data, &UnlabeledDataset::default(), &cfg, &AugmentConfig::none(), &mut session_rng).unwrap();
            assert!(stats.retained_per_step.iter().all(|&f| f == 0.0));

            let mut oracle_rng = ChaCha8Rng::seed_from_u64(77);
            let seeds: Vec<u64> = (0..2).map(|_| oracle_rng.random()).collect();
            for (m, s) in oracle.iter_mut().zip(seeds) {
                supervised_oracle(m, &data, &cfg, &mut ChaCha8Rng::seed_from_u64(s));
            }
            for (a, b) in ens.members().iter().zip(&oracle) {
                let gap = max_param_gap(a, b);
                assert!(gap < 1e-9, "n={n}: parameter gap {gap}");
            }
        }
    }

    #[test]
    fn retained_fraction_is_a_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = dataset(12, 12, &mut rng);
        let unl = UnlabeledDataset::new((0..40).map(|_| SegmentPair::new(seg(12, &mut rng), seg(12, &mut rng)).unwrap()).collect());
        let mut ens = RewardEnsemble::new(2, 1, 3, &RewardNetConfig { hidden: 8, hidden_layers: 3 }, &mut rng).unwrap();
        let cfg = SslConfig { batch_size: 4, epochs: 5, tau: 0.6, lr: 1e-2, ..SslConfig::default() };
        let aug = AugmentConfig::crop_only(CropConfig { h_min: 8, h_max: 10, segment_len: 12 });
        let stats = train_session(&mut ens, &data, &unl, &cfg, &aug, &mut rng).unwrap();
        assert_eq!(stats.steps, 3 * 5 * 3);
        assert!(stats.retained_per_step.iter().all(|f| (0.0..=1.0).contains(f)));
        assert!(stats.retained_per_step.iter().any(|&f| f > 0.0));
        assert!(stats.mean_loss.is_finite());
        assert!(stats.labeled_accuracy.is_some());
    }

    #[test]
    fn empty_labeled_set_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ens = RewardEnsemble::new(2, 1, 1, &RewardNetConfig { hidden: 4, hidden_layers: 1 }, &mut rng).unwrap();
        let r = train_session(&mut ens, &LabeledDataset::new(), &UnlabeledDataset::default(), &SslConfig::default(), &AugmentConfig::none(), &mut rng);
        assert!(matches!(r, Err(Error::Contract(_))));
        let bad = SslConfig { tau: 1.0, ..SslConfig::default() };
        assert!(bad.validate().is_err());
    }
}
