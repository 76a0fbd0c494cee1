//! Multi-user mode evaluation.
//!
//! Per PRB: draw the antenna-domain channels from every BS to every scheduled
//! user, sound the uplink pilots (Reuse 3) or bypass them (genie CSI), solve
//! the per-BS zero-forcing precoders, and evaluate every scheduled user's
//! downlink SINR against all precoder sets.
//!
//! Several CSI regimes can be evaluated in one pass over shared channel
//! draws. Because every random quantity comes from a (master_seed, drop,
//! group, bs, user)-derived stream, the fused evaluation is bit-identical to
//! running each regime separately — it just avoids re-drawing ~100 MB of
//! fading per PRB per regime.
//!
//! Fading is stored in split re/im f32 buffers and the inner products run in
//! f32 with lane-parallel accumulators; the ZF solve itself stays in f64
//! (`mu_mimo::zf_precoder`). The f32 path is equivalence-tested against the
//! f64 operations in tests/pipeline.rs. Links whose slow gain leaves them
//! orders of magnitude below the thermal floor carry no usable signal or
//! contamination; `phy.interference_floor_eps` skips them.

use super::links::LinkField;
use crate::config::{CsiMode, SimConfig};
use crate::geom::db_to_lin;
use crate::mac::Schedule;
use crate::mu_mimo::{zf_precoder, ChannelEstimateMatrix, PrecoderSet};
use crate::phy::McsTable;
use crate::rng::{stream, StreamKind};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// One scheduled (user, BS, slot) triple on a PRB.
#[derive(Debug, Clone, Copy)]
struct SchedEntry {
    user: usize,
    bs: usize,
    slot: usize,
}

/// Reusable per-run buffers (the channel tensor is ~100 MB at full size).
pub struct MuWorkspace {
    /// [bs][sidx][re 0..na | im 0..na], f32.
    channels: Vec<f32>,
    s_cap: usize,
    n_a: usize,
}

impl MuWorkspace {
    pub fn new(n_bs: usize, k_max: usize, n_a: usize) -> Self {
        let s_cap = n_bs * k_max;
        MuWorkspace {
            channels: vec![0.0; n_bs * s_cap * 2 * n_a],
            s_cap,
            n_a,
        }
    }

    #[inline]
    fn link(&self, bs: usize, sidx: usize) -> (&[f32], &[f32]) {
        let base = (bs * self.s_cap + sidx) * 2 * self.n_a;
        let re = &self.channels[base..base + self.n_a];
        let im = &self.channels[base + self.n_a..base + 2 * self.n_a];
        (re, im)
    }
}

/// f32 precoder of one BS, split re/im, column-major.
struct BsPrecoder {
    /// Kept estimate-column indices (slot positions).
    user_cols: Vec<usize>,
    w_re: Vec<f32>,
    w_im: Vec<f32>,
}

/// Hermitian dot `conj(h)·w` with lane-parallel f32 accumulators.
#[inline]
fn cdot_f32(h_re: &[f32], h_im: &[f32], w_re: &[f32], w_im: &[f32]) -> (f32, f32) {
    const L: usize = 8;
    let mut rr = [0f32; L];
    let mut ii = [0f32; L];
    let mut ri = [0f32; L];
    let mut ir = [0f32; L];
    let chunks = h_re.len() / L;
    for c in 0..chunks {
        let o = c * L;
        for l in 0..L {
            rr[l] += h_re[o + l] * w_re[o + l];
            ii[l] += h_im[o + l] * w_im[o + l];
            ri[l] += h_re[o + l] * w_im[o + l];
            ir[l] += h_im[o + l] * w_re[o + l];
        }
    }
    let (mut re, mut im) = (0f32, 0f32);
    for l in 0..L {
        re += rr[l] + ii[l];
        im += ri[l] - ir[l];
    }
    for i in (chunks * L)..h_re.len() {
        re += h_re[i] * w_re[i] + h_im[i] * w_im[i];
        im += h_re[i] * w_im[i] - h_im[i] * w_re[i];
    }
    (re, im)
}

/// Draw one link's channel into the f32 buffer. Mirrors
/// `channel::draw_channel` (same stream consumption, f64 math, f32 store).
#[allow(clippy::too_many_arguments)]
fn draw_link_f32(
    re_out: &mut [f32],
    im_out: &mut [f32],
    rows: usize,
    cols: usize,
    spacing_wl: f64,
    az_rel_deg: f64,
    elevation_deg: f64,
    slow_gain: f64,
    los: bool,
    k_factor_db: f64,
    rng: &mut ChaCha8Rng,
) {
    let k = if los { db_to_lin(k_factor_db) } else { 0.0 };
    let los_amp = (k / (k + 1.0)).sqrt();
    // Scattered component scale with the CN(0,1) 1/√2 folded in.
    let half_nlos = (1.0 / (k + 1.0)).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
    let per_port = (slow_gain / 2.0).sqrt();

    let psi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (psi_sin, psi_cos) = psi.sin_cos();
    let (los_re, los_im) = (los_amp * psi_cos, los_amp * psi_sin);

    let az = az_rel_deg.to_radians();
    let el = elevation_deg.to_radians();
    let dir_y = el.cos() * az.sin();
    let dir_z = el.sin();
    let k_spacing = std::f64::consts::TAU * spacing_wl;
    // Incremental phase rotation: two sincos per link instead of one per
    // element position.
    let (col_im, col_re) = (k_spacing * dir_y).sin_cos();
    let (row_im, row_re) = (k_spacing * dir_z).sin_cos();

    let mut idx = 0usize;
    let (mut rp_re, mut rp_im) = (los_re, los_im);
    for _r in 0..rows {
        let (mut st_re, mut st_im) = (rp_re, rp_im);
        for _c in 0..cols {
            for _ in 0..2 {
                let gr: f64 = rng.sample(StandardNormal);
                let gi: f64 = rng.sample(StandardNormal);
                re_out[idx] = ((st_re + gr * half_nlos) * per_port) as f32;
                im_out[idx] = ((st_im + gi * half_nlos) * per_port) as f32;
                idx += 1;
            }
            let n_re = st_re * col_re - st_im * col_im;
            let n_im = st_re * col_im + st_im * col_re;
            st_re = n_re;
            st_im = n_im;
        }
        let n_re = rp_re * row_re - rp_im * row_im;
        let n_im = rp_re * row_im + rp_im * row_re;
        rp_re = n_re;
        rp_im = n_im;
    }
}

/// One CSI regime to evaluate: the mode plus per-user pilot powers (unused
/// for genie CSI).
pub struct RegimeSpec {
    pub csi: CsiMode,
    pub pilot_power_mw: Vec<f64>,
}

/// Per-(PRB, user) diagnostic record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrDiag {
    pub prb: usize,
    pub user: usize,
    pub sinr_db: f64,
    /// Relative estimation error ‖ĥ−h‖²/‖h‖² at the serving BS (0 under
    /// genie CSI by construction: estimation and precoding reuse the same
    /// drawn channel, which is also what TDD reciprocity asserts).
    pub est_err: f64,
}

/// Diagnostics for one drop, one list per evaluated regime.
#[derive(Debug, Clone, Default)]
pub struct MuDiag {
    pub per_regime: Vec<Vec<SinrDiag>>,
}

/// Evaluate one slot of the multi-user schedule for every requested CSI
/// regime over shared channel draws; returns per-regime SE accumulators.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_slot(
    cfg: &SimConfig,
    field: &LinkField,
    schedule: &Schedule,
    serving: &[usize],
    regimes: &[RegimeSpec],
    mcs: &McsTable,
    noise_dl_mw: f64,
    noise_ul_mw: f64,
    drop_index: u64,
    ws: &mut MuWorkspace,
    mut diag: Option<&mut MuDiag>,
) -> Vec<super::su::SeAccumulator> {
    let n_users = field.n_users;
    let n_bs = field.n_bs;
    let n_a = ws.n_a;
    let k_max = schedule.k_max;
    let p_b = cfg.bs_power_per_prb_mw();
    let k_db = cfg.channel.k_factor_los_db;
    let group_size = cfg.channel.prb_group_size as u64;
    let seed = cfg.run.master_seed;
    let spacing = cfg.antenna.element_spacing_wl;
    let (rows, cols) = (cfg.antenna.mu_rows, cfg.antenna.mu_cols);
    let sectors = field.sectors_per_site();
    let cond_limit = cfg.mu_mimo.zf_condition_limit;
    let n_regimes = regimes.len();

    // Links whose full-power receive level sits below eps × noise carry
    // nothing measurable; serving links are always kept.
    let keep: Vec<bool> = {
        let eps = cfg.phy.interference_floor_eps;
        let thr = if eps > 0.0 {
            eps * noise_dl_mw / p_b
        } else {
            0.0
        };
        (0..n_bs * n_users)
            .map(|i| {
                let (bs, u) = (i / n_users, i % n_users);
                field.slow_gain[i] > thr || serving[u] == bs
            })
            .collect()
    };

    let mut accs: Vec<super::su::SeAccumulator> = (0..n_regimes)
        .map(|_| super::su::SeAccumulator {
            se_sum: vec![0.0; n_users],
            prbs_served: vec![0; n_users],
        })
        .collect();

    let want_diag = diag.is_some();
    if let Some(d) = diag.as_deref_mut() {
        d.per_regime = (0..n_regimes).map(|_| Vec::new()).collect();
    }

    let timing = std::env::var_os("UAVCELL_TIMING").is_some();
    let mut t_draw = 0f64;
    let mut t_pre = 0f64;
    let mut t_sinr = 0f64;

    for prb in 0..schedule.prbs {
        // Scheduled entries in (bs, slot) order.
        let mut entries: Vec<SchedEntry> = Vec::with_capacity(n_bs * k_max);
        for bs in 0..n_bs {
            for (slot, &user) in schedule.per_bs[bs][prb].iter().enumerate() {
                entries.push(SchedEntry { user, bs, slot });
            }
        }
        if entries.is_empty() {
            continue;
        }
        let group = prb as u64 / group_size;

        // --- channel draw: kept links from every BS to every scheduled user ---
        let t0 = std::time::Instant::now();
        {
            let block = ws.s_cap * 2 * n_a;
            let channels = &mut ws.channels[..n_bs * block];
            channels
                .par_chunks_mut(block)
                .enumerate()
                .for_each(|(bs, chunk)| {
                    for (sidx, e) in entries.iter().enumerate() {
                        if !keep[bs * n_users + e.user] {
                            continue;
                        }
                        let (re, im) =
                            chunk[sidx * 2 * n_a..(sidx + 1) * 2 * n_a].split_at_mut(n_a);
                        let li = field.bs_idx(bs, e.user);
                        let site = bs / sectors;
                        let mut rng = stream(
                            seed,
                            StreamKind::FadingMu,
                            &[drop_index, group, bs as u64, e.user as u64],
                        );
                        draw_link_f32(
                            re,
                            im,
                            rows,
                            cols,
                            spacing,
                            field.az_rel_deg[li],
                            field.elevation_deg[field.site_idx(site, e.user)],
                            field.slow_gain[li],
                            field.los[field.site_idx(site, e.user)],
                            k_db,
                            &mut rng,
                        );
                    }
                });
        }
        t_draw += t0.elapsed().as_secs_f64();

        // --- estimation and precoding per (regime, BS) ---
        let t0 = std::time::Instant::now();
        let ws_ref = &*ws;
        let entries_ref = &entries;
        let keep_ref = &keep;
        let per_regime_bs: Vec<Vec<(Option<BsPrecoder>, Vec<(usize, f64)>)>> = regimes
            .iter()
            .map(|reg| {
                (0..n_bs)
                    .into_par_iter()
                    .map(|bs| {
                        let own: Vec<(usize, &SchedEntry)> = entries_ref
                            .iter()
                            .enumerate()
                            .filter(|(_, e)| e.bs == bs)
                            .collect();
                        if own.is_empty() {
                            return (None, Vec::new());
                        }
                        let est_cols: Vec<Vec<Complex64>> = match reg.csi {
                            CsiMode::Perfect => own
                                .iter()
                                .map(|&(sidx, _)| {
                                    let (re, im) = ws_ref.link(bs, sidx);
                                    (0..n_a)
                                        .map(|i| Complex64::new(re[i] as f64, im[i] as f64))
                                        .collect()
                                })
                                .collect(),
                            CsiMode::Reuse3PowerControl | CsiMode::Reuse3EqualPower => {
                                // Identity-codebook correlation: the estimate
                                // column is the sum of co-pilot contributions
                                // (same sector index, same slot across sites)
                                // plus noise.
                                let sector = bs % sectors;
                                let mut col_re = vec![vec![0f32; n_a]; k_max];
                                let mut col_im = vec![vec![0f32; n_a]; k_max];
                                for (sidx, e) in entries_ref.iter().enumerate() {
                                    if e.bs % sectors != sector
                                        || !keep_ref[bs * n_users + e.user]
                                    {
                                        continue;
                                    }
                                    let amp = reg.pilot_power_mw[e.user].sqrt() as f32;
                                    let (re, im) = ws_ref.link(bs, sidx);
                                    let (cr, ci) = (&mut col_re[e.slot], &mut col_im[e.slot]);
                                    for i in 0..n_a {
                                        cr[i] += amp * re[i];
                                        ci[i] += amp * im[i];
                                    }
                                }
                                let mut rng = stream(
                                    seed,
                                    StreamKind::PilotNoise,
                                    &[drop_index, prb as u64, bs as u64],
                                );
                                let ns = (noise_ul_mw / 2.0).sqrt();
                                for slot in 0..k_max {
                                    for i in 0..n_a {
                                        let nr: f64 = rng.sample(StandardNormal);
                                        let ni: f64 = rng.sample(StandardNormal);
                                        col_re[slot][i] += (nr * ns) as f32;
                                        col_im[slot][i] += (ni * ns) as f32;
                                    }
                                }
                                own.iter()
                                    .map(|&(_, e)| {
                                        let inv = 1.0 / reg.pilot_power_mw[e.user].sqrt();
                                        (0..n_a)
                                            .map(|i| {
                                                Complex64::new(
                                                    col_re[e.slot][i] as f64 * inv,
                                                    col_im[e.slot][i] as f64 * inv,
                                                )
                                            })
                                            .collect()
                                    })
                                    .collect()
                            }
                        };
                        let est_err: Vec<(usize, f64)> = if want_diag {
                            own.iter()
                                .zip(&est_cols)
                                .map(|(&(sidx, e), col)| {
                                    let (re, im) = ws_ref.link(bs, sidx);
                                    let mut num = 0.0;
                                    let mut den = 0.0;
                                    for i in 0..n_a {
                                        let hr = re[i] as f64;
                                        let hi = im[i] as f64;
                                        num += (col[i].re - hr).powi(2) + (col[i].im - hi).powi(2);
                                        den += hr * hr + hi * hi;
                                    }
                                    (e.user, num / den)
                                })
                                .collect()
                        } else {
                            Vec::new()
                        };
                        let est = ChannelEstimateMatrix {
                            n_antennas: n_a,
                            cols: est_cols,
                        };
                        let set: PrecoderSet = match zf_precoder(&est, p_b, cond_limit) {
                            Ok(s) => s,
                            Err(_) => return (None, est_err),
                        };
                        let k = set.k();
                        let mut w_re = vec![0f32; k * n_a];
                        let mut w_im = vec![0f32; k * n_a];
                        for (col, w) in set.w.iter().enumerate() {
                            for (i, z) in w.iter().enumerate() {
                                w_re[col * n_a + i] = z.re as f32;
                                w_im[col * n_a + i] = z.im as f32;
                            }
                        }
                        (
                            Some(BsPrecoder {
                                user_cols: set.user_cols,
                                w_re,
                                w_im,
                            }),
                            est_err,
                        )
                    })
                    .collect()
            })
            .collect();
        let mut precoders: Vec<Vec<Option<BsPrecoder>>> = Vec::with_capacity(n_regimes);
        let mut est_errs: Vec<Vec<Vec<(usize, f64)>>> = Vec::with_capacity(n_regimes);
        for regime_vec in per_regime_bs {
            let (ps, es): (Vec<_>, Vec<_>) = regime_vec.into_iter().unzip();
            precoders.push(ps);
            est_errs.push(es);
        }
        let precoders = &precoders;
        t_pre += t0.elapsed().as_secs_f64();

        // --- downlink SINR per scheduled user, all regimes in one pass ---
        // Blocked over entries so each BS's precoders stay cache-resident
        // across the block instead of being re-streamed per user.
        let t0 = std::time::Instant::now();
        const BLOCK: usize = 16;
        // Per chunk, per regime, per entry: (user, se, sinr_db).
        let results: Vec<Vec<Vec<(usize, f64, f64)>>> = entries
            .par_chunks(BLOCK)
            .enumerate()
            .map(|(chunk_idx, chunk)| {
                let base = chunk_idx * BLOCK;
                let mut signal = vec![[0f64; BLOCK]; n_regimes];
                let mut interference = vec![[0f64; BLOCK]; n_regimes];
                for bs in 0..n_bs {
                    for (i, e) in chunk.iter().enumerate() {
                        if !keep_ref[bs * n_users + e.user] {
                            continue;
                        }
                        let (h_re, h_im) = ws_ref.link(bs, base + i);
                        for (r, pre_r) in precoders.iter().enumerate() {
                            let Some(pre) = &pre_r[bs] else { continue };
                            for col in 0..pre.user_cols.len() {
                                let (dr, di) = cdot_f32(
                                    h_re,
                                    h_im,
                                    &pre.w_re[col * n_a..(col + 1) * n_a],
                                    &pre.w_im[col * n_a..(col + 1) * n_a],
                                );
                                let p = (dr as f64) * (dr as f64) + (di as f64) * (di as f64);
                                if bs == e.bs && pre.user_cols[col] == e.slot {
                                    signal[r][i] = p;
                                } else {
                                    interference[r][i] += p;
                                }
                            }
                        }
                    }
                }
                (0..n_regimes)
                    .map(|r| {
                        chunk
                            .iter()
                            .enumerate()
                            .map(|(i, e)| {
                                let sinr_db = 10.0
                                    * (signal[r][i] / (interference[r][i] + noise_dl_mw)).log10();
                                (e.user, mcs.se_for_sinr(sinr_db), sinr_db)
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect()
            })
            .collect();
        t_sinr += t0.elapsed().as_secs_f64();

        if let Some(d) = diag.as_deref_mut() {
            for r in 0..n_regimes {
                let mut err_of_user = vec![0.0; n_users];
                for per_bs in &est_errs[r] {
                    for &(u, e) in per_bs {
                        err_of_user[u] = e;
                    }
                }
                for per_chunk in &results {
                    for &(u, _, sinr_db) in &per_chunk[r] {
                        d.per_regime[r].push(SinrDiag {
                            prb,
                            user: u,
                            sinr_db,
                            est_err: err_of_user[u],
                        });
                    }
                }
            }
        }

        for per_chunk in results {
            for (r, regime_results) in per_chunk.into_iter().enumerate() {
                for (u, se, _) in regime_results {
                    accs[r].se_sum[u] += se;
                    accs[r].prbs_served[u] += 1;
                }
            }
        }
    }
    if timing {
        eprintln!(
            "mu drop {drop_index}: draw {t_draw:.2}s precode {t_pre:.2}s sinr {t_sinr:.2}s ({n_regimes} regimes)"
        );
    }
    accs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdot_matches_scalar_reference() {
        let n = 37; // exercises the remainder path
        let h_re: Vec<f32> = (0..n).map(|i| (i as f32 * 0.37).sin()).collect();
        let h_im: Vec<f32> = (0..n).map(|i| (i as f32 * 0.11).cos()).collect();
        let w_re: Vec<f32> = (0..n).map(|i| (i as f32 * 0.73).cos()).collect();
        let w_im: Vec<f32> = (0..n).map(|i| (i as f32 * 0.29).sin()).collect();
        let (re, im) = cdot_f32(&h_re, &h_im, &w_re, &w_im);
        let mut er = 0f64;
        let mut ei = 0f64;
        for i in 0..n {
            let h = Complex64::new(h_re[i] as f64, h_im[i] as f64);
            let w = Complex64::new(w_re[i] as f64, w_im[i] as f64);
            let p = h.conj() * w;
            er += p.re;
            ei += p.im;
        }
        assert!((re as f64 - er).abs() < 1e-4, "{re} vs {er}");
        assert!((im as f64 - ei).abs() < 1e-4, "{im} vs {ei}");
    }
}
