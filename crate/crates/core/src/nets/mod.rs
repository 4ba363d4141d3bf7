//! Small fully connected networks with a sinusoidal time embedding and
//! hand-written reverse-mode gradients. One architecture serves both heads:
//! the score network (vector output) and the discriminator (scalar logit
//! squashed through a sigmoid).

mod mlp;
mod serial;
mod train;

pub use mlp::{Arch, HeadKind, NetParams, DEFAULT_TRUNCATION};
pub use serial::{load_params, params_from_bytes, params_to_bytes, save_params};
pub use train::{
    disc_loss, disc_loss_with, score_loss, score_loss_with, train_disc, train_score, DataSource,
    LrSchedule, TrainConfig, TrainRun, Weighting,
};

/// Largest attainable |log(d/(1-d))| after truncating `d` to
/// `[trunc, 1 - trunc]`.
pub fn log_odds_bound(trunc: f64) -> f64 {
    ((1.0 - trunc) / trunc).ln()
}
