#![allow(dead_code)]

use saros_core::blocking::Block;
use saros_core::data::{Dataset, Event, Vocab};
use saros_core::{InitSpec, LatentModel};

/// Naive double-loop block loss written straight from the formula.
pub fn naive_block_loss(model: &LatentModel, block: &Block, reg: f64) -> f64 {
    let k = model.dim();
    let u = model.user_row(block.user);
    let mut total = 0.0;
    for &i in &block.positives {
        for &j in &block.negatives {
            let pi = model.item_row(i);
            let pj = model.item_row(j);
            let mut d = 0.0;
            let mut reg_sum = 0.0;
            for c in 0..k {
                d += u[c] * (pi[c] - pj[c]);
                reg_sum += u[c] * u[c] + pi[c] * pi[c] + pj[c] * pj[c];
            }
            total += (1.0 + (-d).exp()).ln() + reg * reg_sum;
        }
    }
    total / (block.positives.len() * block.negatives.len()) as f64
}

pub fn bits(m: &LatentModel) -> Vec<u64> {
    m.user_factors().iter().chain(m.item_factors()).map(|x| x.to_bits()).collect()
}

/// Dataset with users `u0..` and items `i0..` from explicit label strings;
/// stream `s` of user `u` is `(item, clicked)` with timestamps = positions.
pub fn dataset_from(n_items: usize, streams: &[Vec<(u32, bool)>]) -> Dataset {
    let mut row = 0u64;
    let streams: Vec<Vec<Event>> = streams
        .iter()
        .map(|s| {
            s.iter()
                .enumerate()
                .map(|(t, &(item, clicked))| {
                    row += 1;
                    Event { item, clicked, timestamp: t as i64, row }
                })
                .collect()
        })
        .collect();
    Dataset::from_streams(Vocab::sequential("u", streams.len()), Vocab::sequential("i", n_items), streams).unwrap()
}

pub fn random_model(n_users: usize, n_items: usize, k: usize, seed: u64, scale: f64) -> LatentModel {
    LatentModel::init(n_users, n_items, k, InitSpec { seed, scale }).unwrap()
}
