//! Reward ensemble, Bradley-Terry predictor and semi-supervised training.

mod checkpoint;
mod loss;
mod net;
mod train;

pub(crate) use checkpoint::{read_ensemble, read_mlp, write_ensemble, write_mlp};
pub use loss::{
    ce_from_diff, ce_loss, logistic, preference_from_returns, ssl_loss, ssl_terms,
    weighted_ce_on_tape, CeTerm, PseudoLabel, PseudoLabeledPair, LOG_FLOOR,
};
pub use net::{RewardEnsemble, RewardNet, RewardNetConfig};
pub use train::{epoch_batches, preference_accuracy, train_session, SessionStats, SslConfig};
