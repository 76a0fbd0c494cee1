//! Single-user mode evaluation: the fixed analog beam reduces every link to
//! one scalar effective channel, so the per-PRB SINR is a ratio of scalar
//! powers over the active BSs.

use super::links::LinkField;
use crate::channel::rician_power;
use crate::config::SimConfig;
use crate::mac::Schedule;
use crate::mu_mimo::single_user_effective_gain;
use crate::phy::McsTable;
use crate::rng::{stream, StreamKind};
use rayon::prelude::*;

/// Per-user accumulated spectral efficiency over the evaluated slot.
pub struct SeAccumulator {
    pub se_sum: Vec<f64>,
    pub prbs_served: Vec<u32>,
}

/// Evaluate one slot of the single-user schedule; returns per-user SE sums.
pub fn evaluate_slot(
    cfg: &SimConfig,
    field: &LinkField,
    schedule: &Schedule,
    mcs: &McsTable,
    noise_dl_mw: f64,
    drop_index: u64,
) -> SeAccumulator {
    let n_users = field.n_users;
    let n_bs = field.n_bs;
    let p_b = cfg.bs_power_per_prb_mw();
    let k_db = cfg.channel.k_factor_los_db;
    let group_size = cfg.channel.prb_group_size as u64;
    let seed = cfg.run.master_seed;

    // Active BSs transmit on every PRB they have traffic for.
    let active: Vec<bool> = (0..n_bs)
        .map(|bs| !schedule.per_bs[bs].iter().all(|set| set.is_empty()))
        .collect();

    // (prb, serving bs, user) work items.
    let mut items = Vec::new();
    for bs in 0..n_bs {
        for (prb, set) in schedule.per_bs[bs].iter().enumerate() {
            for &u in set {
                items.push((prb, bs, u));
            }
        }
    }

    let contributions: Vec<(usize, f64)> = items
        .par_iter()
        .map(|&(prb, serving, u)| {
            // One fading stream per (drop, PRB group, user), BSs in id order;
            // re-created per PRB so draws are schedule-independent.
            let group = prb as u64 / group_size;
            let mut rng = stream(seed, StreamKind::FadingSu, &[drop_index, group, u as u64]);
            let mut signal = 0.0;
            let mut interference = 0.0;
            for bs in 0..n_bs {
                let idx = field.bs_idx(bs, u);
                let fading = rician_power(
                    field.los[field.site_idx(field.site_of_bs(bs), u)],
                    k_db,
                    &mut rng,
                );
                if !active[bs] {
                    continue;
                }
                let gain = single_user_effective_gain(
                    field.slow_gain[idx],
                    field.af_power[idx],
                    fading,
                );
                if bs == serving {
                    signal = p_b * gain;
                } else {
                    interference += p_b * gain;
                }
            }
            let sinr_db = 10.0 * (signal / (interference + noise_dl_mw)).log10();
            (u, mcs.se_for_sinr(sinr_db))
        })
        .collect();

    let mut acc = SeAccumulator {
        se_sum: vec![0.0; n_users],
        prbs_served: vec![0; n_users],
    };
    for (u, se) in contributions {
        acc.se_sum[u] += se;
        acc.prbs_served[u] += 1;
    }
    acc
}
