//! Bradley-Terry preference predictor, cross-entropy and the semi-supervised
//! objective.

use crate::data::{stack_inputs, Preference, PreferenceTriple, Segment};
use crate::error::{Error, Result};
use crate::ndmath::{log_sigmoid, Tape, Var};

use super::net::{check_pair, RewardNet};
use super::train::SslConfig;

/// Floor applied to probabilities inside the log.
pub const LOG_FLOOR: f64 = 1e-12;

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `P[seg1 > seg0]` from the two predicted returns.
pub fn preference_from_returns(return0: f64, return1: f64) -> f64 {
    logistic(return1 - return0)
}

/// Cross-entropy of a predictor with return difference `r1 - r0` against
/// target `y`.
pub fn ce_from_diff(diff: f64, y: f64) -> f64 {
    let floor = LOG_FLOOR.ln();
    let lp1 = log_sigmoid(diff).max(floor);
    let lp0 = log_sigmoid(-diff).max(floor);
    -((1.0 - y) * lp0 + y * lp1)
}

/// Self-assigned label for an unlabeled pair and its confidence
/// `max(p, 1 - p)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudoLabel {
    pub label: Preference,
    pub confidence: f64,
}

impl PseudoLabel {
    /// `p_second = P[seg1 > seg0]`. The first segment wins only when it is
    /// strictly more likely; the tie goes to the second.
    pub fn from_prob_second(p_second: f64) -> Self {
        let p_first = 1.0 - p_second;
        if p_first > 0.5 {
            PseudoLabel {
                label: Preference::First,
                confidence: p_first,
            }
        } else {
            PseudoLabel {
                label: Preference::Second,
                confidence: p_second,
            }
        }
    }

    /// Whether the pair passes the confidence threshold `tau` (strict).
    pub fn retained(&self, tau: f64) -> bool {
        self.confidence > tau
    }
}

/// An unlabeled pair, possibly augmented, carrying the pseudo-label computed
/// on its original form.
#[derive(Clone, Debug)]
pub struct PseudoLabeledPair {
    pub seg0: Segment,
    pub seg1: Segment,
    pub pseudo: PseudoLabel,
}

/// One weighted term `w * CE(seg0, seg1, y)`.
#[derive(Clone, Copy, Debug)]
pub struct CeTerm<'a> {
    pub seg0: &'a Segment,
    pub seg1: &'a Segment,
    pub y: f64,
    pub weight: f64,
}

/// Records `sum_i w_i * CE_i` on `tape` using one forward pass over every
/// segment of every term.
pub fn weighted_ce_on_tape(
    net: &RewardNet,
    tape: &mut Tape,
    vars: &[Var],
    terms: &[CeTerm<'_>],
) -> Result<Var> {
    if terms.is_empty() {
        return Err(Error::contract("no loss terms"));
    }
    for t in terms {
        check_pair(t.seg0, t.seg1)?;
    }
    let n = terms.len();
    let segs: Vec<&Segment> = terms.iter().map(|t| t.seg0).chain(terms.iter().map(|t| t.seg1)).collect();
    let sizes: Vec<usize> = segs.iter().map(|s| s.len()).collect();
    let x = tape.constant(stack_inputs(&segs));
    let r = net.mlp().forward(tape, vars, x)?;
    let returns = tape.group_sum(r, &sizes)?;
    let r0 = tape.slice_rows(returns, 0, n)?;
    let r1 = tape.slice_rows(returns, n, 2 * n)?;
    let diff = tape.sub(r1, r0)?;
    let lp1 = tape.log_sigmoid(diff, LOG_FLOOR);
    let neg = tape.neg(diff);
    let lp0 = tape.log_sigmoid(neg, LOG_FLOOR);
    let w0: Vec<f64> = terms.iter().map(|t| -t.weight * (1.0 - t.y)).collect();
    let w1: Vec<f64> = terms.iter().map(|t| -t.weight * t.y).collect();
    let a = tape.dot(lp0, w0)?;
    let b = tape.dot(lp1, w1)?;
    tape.add(a, b)
}

/// Binary cross-entropy of one labelled comparison.
pub fn ce_loss(net: &RewardNet, triple: &PreferenceTriple) -> Result<f64> {
    let p = net.preference_prob(&triple.seg0, &triple.seg1)?;
    let floor = LOG_FLOOR;
    let y = triple.y();
    Ok(-((1.0 - y) * (1.0 - p).max(floor).ln() + y * p.max(floor).ln()))
}

/// Weighted terms of the semi-supervised objective: mean labelled CE plus
/// `lambda` times the mean CE over unlabeled entries whose confidence
/// exceeds `tau`. Returns the terms and the number of retained entries.
pub fn ssl_terms<'a>(
    labeled: &'a [(Segment, Segment, f64)],
    unlabeled: &'a [PseudoLabeledPair],
    cfg: &SslConfig,
) -> Result<(Vec<CeTerm<'a>>, usize)> {
    if labeled.is_empty() {
        return Err(Error::contract("the labeled batch is empty"));
    }
    let wl = 1.0 / labeled.len() as f64;
    let mut terms: Vec<CeTerm<'a>> = labeled
        .iter()
        .map(|(a, b, y)| CeTerm {
            seg0: a,
            seg1: b,
            y: *y,
            weight: wl,
        })
        .collect();
    let retained: Vec<&PseudoLabeledPair> = unlabeled.iter().filter(|u| u.pseudo.retained(cfg.tau)).collect();
    if !retained.is_empty() && cfg.lambda != 0.0 {
        let wu = cfg.lambda / retained.len() as f64;
        terms.extend(retained.iter().map(|u| CeTerm {
            seg0: &u.seg0,
            seg1: &u.seg1,
            y: u.pseudo.label.y(),
            weight: wu,
        }));
    }
    Ok((terms, retained.len()))
}

/// Value of the semi-supervised objective.
pub fn ssl_loss(
    net: &RewardNet,
    labeled: &[(Segment, Segment, f64)],
    unlabeled: &[PseudoLabeledPair],
    cfg: &SslConfig,
) -> Result<f64> {
    let (terms, _) = ssl_terms(labeled, unlabeled, cfg)?;
    let mut tape = Tape::new();
    let vars = net.mlp().params().bind_frozen(&mut tape);
    let loss = weighted_ce_on_tape(net, &mut tape, &vars, &terms)?;
    Ok(tape.value(loss).item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelSource;
    use crate::reward::RewardNetConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn seg(len: usize, rng: &mut ChaCha8Rng) -> Segment {
        Segment::new(
            2,
            1,
            (0..2 * len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
            vec![0.0; len],
            0,
            0,
        )
        .unwrap()
    }

    fn net(rng: &mut ChaCha8Rng) -> RewardNet {
        RewardNet::new(2, 1, &RewardNetConfig { hidden: 8, hidden_layers: 3 }, rng)
    }

    #[test]
    fn predictor_special_values() {
        assert_eq!(preference_from_returns(1.3, 1.3), 0.5);
        assert!((preference_from_returns(0.0, 3f64.ln()) - 0.75).abs() < 1e-15);
        let p = preference_from_returns(0.4, -1.1);
        assert!((p - (1.0 - preference_from_returns(-1.1, 0.4))).abs() < 1e-15);
    }

    #[test]
    fn ce_special_values() {
        assert!(ce_from_diff(40.0, 1.0) < 1e-15);
        assert!((ce_from_diff(0.0, 0.5) - LN_2).abs() < 1e-15);
        assert!((ce_from_diff(0.0, 1.0) - LN_2).abs() < 1e-15);
        assert!((ce_from_diff(-1e6, 1.0) + LOG_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn ce_loss_agrees_with_tape_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = net(&mut rng);
        for y in [Preference::First, Preference::Second, Preference::Equal] {
            let t = PreferenceTriple::new(seg(7, &mut rng), seg(7, &mut rng), y, LabelSource::Scripted).unwrap();
            let mut tape = Tape::new();
            let vars = n.mlp().params().bind(&mut tape);
            let term = CeTerm { seg0: &t.seg0, seg1: &t.seg1, y: t.y(), weight: 1.0 };
            let l = weighted_ce_on_tape(&n, &mut tape, &vars, &[term]).unwrap();
            assert!((tape.value(l).item() - ce_loss(&n, &t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn pseudo_label_branches() {
        let pl = PseudoLabel::from_prob_second(0.3);
        assert_eq!(pl.label, Preference::First);
        assert!((pl.confidence - 0.7).abs() < 1e-15);
        let tie = PseudoLabel::from_prob_second(0.5);
        assert_eq!(tie.label, Preference::Second);
        assert_eq!(tie.confidence, 0.5);
        assert!(!tie.retained(0.5));
    }

    fn pseudo(a: Segment, b: Segment, label: Preference, confidence: f64) -> PseudoLabeledPair {
        PseudoLabeledPair { seg0: a, seg1: b, pseudo: PseudoLabel { label, confidence } }
    }

    #[test]
    fn ssl_reduces_to_supervised_when_lambda_zero_or_nothing_retained() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = net(&mut rng);
        let labeled = vec![
            (seg(5, &mut rng), seg(5, &mut rng), 1.0),
            (seg(5, &mut rng), seg(5, &mut rng), 0.0),
        ];
        let unlabeled = vec![pseudo(seg(5, &mut rng), seg(5, &mut rng), Preference::First, 0.95)];
        let supervised: f64 = labeled
            .iter()
            .map(|(a, b, y)| {
                ce_loss(&n, &PreferenceTriple::new(a.clone(), b.clone(), Preference::from_y(*y).unwrap(), LabelSource::Scripted).unwrap()).unwrap()
            })
            .sum::<f64>()
            / 2.0;
        let zero_lambda = SslConfig { lambda: 0.0, tau: 0.5, ..SslConfig::default() };
        assert!((ssl_loss(&n, &labeled, &unlabeled, &zero_lambda).unwrap() - supervised).abs() < 1e-12);
        let strict = SslConfig { tau: 0.99, ..SslConfig::default() };
        let (_, kept) = ssl_terms(&labeled, &unlabeled, &strict).unwrap();
        assert_eq!(kept, 0);
        assert!((ssl_loss(&n, &labeled, &unlabeled, &strict).unwrap() - supervised).abs() < 1e-12);
    }

    #[test]
    fn ssl_adds_retained_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = net(&mut rng);
        let labeled = vec![(seg(4, &mut rng), seg(4, &mut rng), 1.0)];
        let u = pseudo(seg(4, &mut rng), seg(4, &mut rng), Preference::First, 0.999);
        let a = ssl_loss(&n, &labeled, &[], &SslConfig::default()).unwrap();
        let b = ce_loss(
            &n,
            &PreferenceTriple::new(u.seg0.clone(), u.seg1.clone(), Preference::First, LabelSource::Scripted).unwrap(),
        )
        .unwrap();
        let cfg = SslConfig { lambda: 1.0, tau: 0.99, ..SslConfig::default() };
        let total = ssl_loss(&n, &labeled, &[u], &cfg).unwrap();
        assert!((total - (a + b)).abs() < 1e-12);
    }

    #[test]
    fn empty_labeled_batch_is_contract_error() {
        let cfg = SslConfig::default();
        assert!(matches!(ssl_terms(&[], &[], &cfg), Err(Error::Contract(_))));
    }
}
