//! Seeded synthetic click data from planted latent factors, and bot users
//! that click target items far more often than organic users do.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{Dataset, Event, Vocab};
use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::model::{dot, InitSpec, ItemId, LatentModel};
use crate::rng;

/// Parameters of [`generate_planted`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub k_true: usize,
    pub interactions_per_user: usize,
    /// Probability of flipping each drawn label.
    pub noise: f64,
    pub seed: u64,
    /// Half-width of the uniform distribution of true factors.
    pub factor_scale: f64,
    /// Offset added to every true score before the sigmoid.
    pub bias: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_users: 500,
            n_items: 200,
            k_true: 4,
            interactions_per_user: 40,
            noise: 0.1,
            seed: 0,
            factor_scale: 1.5,
            bias: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 || self.k_true == 0 || self.interactions_per_user == 0 {
            return Err(Error::invalid("synthetic counts must all be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::invalid("noise must lie in [0, 1]"));
        }
        if !(self.factor_scale >= 0.0 && self.factor_scale.is_finite() && self.bias.is_finite()) {
            return Err(Error::invalid("factor scale and bias must be finite"));
        }
        Ok(())
    }
}

const EVENT_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Draws true user/item factors uniformly on `[-factor_scale, factor_scale)`
/// and, for each user, presents `interactions_per_user` random items
/// (without replacement when the catalogue is large enough). Each item is
/// clicked with probability `sigmoid(U_u . I_i + bias)`, and the label is
/// then flipped with probability `noise`. Timestamps are positions in the
/// user's sequence. Users are `u0..`, items `i0..`; dense ids match.
pub fn generate_planted(spec: &SynthSpec) -> Result<(Dataset, LatentModel)> {
    spec.validate()?;
    let truth = LatentModel::init(
        spec.n_users,
        spec.n_items,
        spec.k_true,
        InitSpec {
            seed: spec.seed,
            scale: spec.factor_scale,
        },
    )?;
    let mut rng = rng::seeded(spec.seed ^ EVENT_STREAM);
    let mut pool: Vec<ItemId> = (0..spec.n_items as ItemId).collect();
    let mut streams = Vec::with_capacity(spec.n_users);
    let mut row = 0u64;
    for u in 0..spec.n_users {
        let mut stream = Vec::with_capacity(spec.interactions_per_user);
        for t in 0..spec.interactions_per_user {
            let item = if spec.interactions_per_user <= spec.n_items {
                // partial Fisher-Yates over the item pool
                let j = t + rng::index(&mut rng, spec.n_items - t);
                pool.swap(t, j);
                pool[t]
            } else {
                rng::index(&mut rng, spec.n_items) as ItemId
            };
            let p = sigmoid(dot(truth.user_row(u as u32), truth.item_row(item)) + spec.bias);
            let mut clicked = rng::unit_f64(&mut rng) < p;
            if rng::unit_f64(&mut rng) < spec.noise {
                clicked = !clicked;
            }
            stream.push(Event {
                item,
                clicked,
                timestamp: t as i64,
                row,
            });
            row += 1;
        }
        streams.push(stream);
    }
    let dataset = Dataset::from_streams(
        Vocab::sequential("u", spec.n_users),
        Vocab::sequential("i", spec.n_items),
        streams,
    )?;
    Ok((dataset, truth))
}

/// Parameters of [`inject_bots`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BotSpec {
    pub n_bots: usize,
    pub targets: Vec<ItemId>,
    pub clicks_per_bot: usize,
    pub seed: u64,
}

/// Appends `n_bots` users, each alternating one non-clicked random
/// non-target item with one clicked target item `clicks_per_bot` times, so
/// every bot yields exactly `clicks_per_bot` blocks. Existing users are
/// untouched.
pub fn inject_bots(dataset: &Dataset, spec: &BotSpec) -> Result<Dataset> {
    if spec.n_bots == 0 {
        return Ok(dataset.clone());
    }
    if spec.targets.is_empty() || spec.clicks_per_bot == 0 {
        return Err(Error::invalid("bots need at least one target and one click"));
    }
    if spec.targets.iter().any(|&t| t as usize >= dataset.n_items()) {
        return Err(Error::invalid("bot target is not a known item"));
    }
    let mut is_target = vec![false; dataset.n_items()];
    for &t in &spec.targets {
        is_target[t as usize] = true;
    }
    let decoys: Vec<ItemId> = (0..dataset.n_items() as ItemId)
        .filter(|&i| !is_target[i as usize])
        .collect();
    let decoys = if decoys.is_empty() { spec.targets.clone() } else { decoys };

    let mut out = dataset.clone();
    let mut rng = rng::seeded(spec.seed);
    let mut row = dataset.next_row();
    for b in 0..spec.n_bots {
        let mut stream = Vec::with_capacity(2 * spec.clicks_per_bot);
        for t in 0..spec.clicks_per_bot {
            let shown = decoys[rng::index(&mut rng, decoys.len())];
            let target = spec.targets[rng::index(&mut rng, spec.targets.len())];
            for (offset, item, clicked) in [(0, shown, false), (1, target, true)] {
                stream.push(Event {
                    item,
                    clicked,
                    timestamp: 2 * t as i64 + offset,
                    row,
                });
                row += 1;
            }
        }
        let mut name = alloc::format!("bot{b}");
        while out.users().get(&name).is_some() {
            name.push('_');
        }
        out.push_user(&name, stream)?;
    }
    Ok(out)
}
