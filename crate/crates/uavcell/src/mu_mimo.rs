//! TDD multi-user pipeline: pilot codebooks with Reuse 3, fractional uplink
//! power control, least-squares channel estimation under contamination, and
//! zero-forcing precoding with equal per-user power.
//!
//! Pilots form an orthonormal basis of length M_p = 3·K_max: the three
//! sectors of a site use disjoint index ranges (orthogonal within the site)
//! while every index is reused across sites, which is exactly what produces
//! inter-site contamination in the least-squares estimate.

use crate::geom::dbm_to_mw;
use crate::linalg::{cholesky, cholesky_cond_estimate, cholesky_solve, gram, norm_sq};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MuMimoError {
    #[error("scheduled user has no pilot assignment (pilot index {index} out of {m_p})")]
    PilotOutOfRange { index: usize, m_p: usize },
    #[error("channel estimate matrix is empty")]
    EmptyEstimate,
    #[error("estimate matrix irrecoverably singular: all users dropped")]
    AllUsersDropped,
}

/// Uplink power control parameters (dBm domain).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UplinkPowerConfig {
    pub p_max_dbm: f64,
    pub p0_dbm: f64,
    pub alpha: f64,
}

impl Default for UplinkPowerConfig {
    fn default() -> Self {
        UplinkPowerConfig {
            p_max_dbm: 23.0,
            p0_dbm: -58.0,
            alpha: 0.5,
        }
    }
}

/// Uplink power allocation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerControlMode {
    /// Compensate a fraction α of the slow-gain loss, clamped at P_max.
    Fractional,
    /// Everyone at P_max.
    Equal,
}

/// Uplink transmit power in mW.
///
/// Fractional mode: P = min{P_max, P0 + α·L} dBm with L = −10·log10(slow_gain)
/// the slow-gain loss toward the serving BS.
pub fn ul_tx_power_mw(cfg: &UplinkPowerConfig, slow_gain: f64, mode: PowerControlMode) -> f64 {
    assert!(slow_gain > 0.0, "slow gain must be positive");
    let dbm = match mode {
        PowerControlMode::Equal => cfg.p_max_dbm,
        PowerControlMode::Fractional => {
            let loss_db = -10.0 * slow_gain.log10();
            (cfg.p0_dbm + cfg.alpha * loss_db).min(cfg.p_max_dbm)
        }
    };
    dbm_to_mw(dbm)
}

/// Pilot reuse scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotReuse {
    /// Orthogonal within a site's three sectors, reused across sites.
    Reuse3,
    /// Estimation bypassed (genie CSI); kept in the plan for reporting.
    Perfect,
}

/// Pilot codebook and assignment. The codebook is any orthonormal basis of
/// C^{M_p}; the identity basis is the default and enables the fast path
/// (correlating with e_i selects column i).
#[derive(Debug, Clone)]
pub struct PilotPlan {
    pub m_p: usize,
    pub k_max: usize,
    pub reuse: PilotReuse,
    /// Column-major M_p × M_p orthonormal codebook; `None` = identity basis.
    pub codebook: Option<Vec<Vec<Complex64>>>,
}

impl PilotPlan {
    pub fn reuse3(k_max: usize) -> Self {
        PilotPlan {
            m_p: 3 * k_max,
            k_max,
            reuse: PilotReuse::Reuse3,
            codebook: None,
        }
    }

    /// Pilot index for the user at `slot` of a sector: sectors of one site
    /// occupy disjoint ranges, identical across sites (Reuse 3).
    pub fn pilot_index(&self, sector: usize, slot: usize) -> usize {
        debug_assert!(sector < 3 && slot < self.k_max);
        sector * self.k_max + slot
    }

    /// Codebook column i.
    pub fn pilot(&self, index: usize) -> Vec<Complex64> {
        match &self.codebook {
            None => {
                let mut v = vec![Complex64::new(0.0, 0.0); self.m_p];
                v[index] = Complex64::new(1.0, 0.0);
                v
            }
            Some(cb) => cb[index].clone(),
        }
    }
}

/// Collective pilot-slot observation at one BS: N_a × M_p, column-major.
#[derive(Debug, Clone)]
pub struct PilotObservation {
    pub n_antennas: usize,
    pub m_p: usize,
    pub y: Vec<Complex64>,
}

impl PilotObservation {
    #[inline]
    pub fn column(&self, m: usize) -> &[Complex64] {
        &self.y[m * self.n_antennas..(m + 1) * self.n_antennas]
    }

    pub fn frob_norm_sq(&self) -> f64 {
        norm_sq(&self.y)
    }
}

/// One uplink pilot contribution: the (true) channel toward the observing BS,
/// the user's transmit power and its pilot index.
#[derive(Debug, Clone, Copy)]
pub struct PilotTx<'a> {
    pub channel: &'a [Complex64],
    pub power_mw: f64,
    pub pilot_index: usize,
}

/// Received pilot block: `Y = Σ √P_jk h v^T + N`, noise i.i.d. CN(0, σ²).
pub fn receive_pilots(
    plan: &PilotPlan,
    transmissions: &[PilotTx<'_>],
    n_antennas: usize,
    noise_var_mw: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PilotObservation, MuMimoError> {
    let m_p = plan.m_p;
    let mut y = vec![Complex64::new(0.0, 0.0); n_antennas * m_p];

    for tx in transmissions {
        if tx.pilot_index >= m_p {
            return Err(MuMimoError::PilotOutOfRange {
                index: tx.pilot_index,
                m_p,
            });
        }
        let amp = tx.power_mw.sqrt();
        match &plan.codebook {
            None => {
                let col = &mut y[tx.pilot_index * n_antennas..(tx.pilot_index + 1) * n_antennas];
                for (dst, h) in col.iter_mut().zip(tx.channel) {
                    *dst += h * amp;
                }
            }
            Some(cb) => {
                let v = &cb[tx.pilot_index];
                for m in 0..m_p {
                    let w = v[m] * amp;
                    let col = &mut y[m * n_antennas..(m + 1) * n_antennas];
                    for (dst, h) in col.iter_mut().zip(tx.channel) {
                        *dst += h * w;
                    }
                }
            }
        }
    }

    if noise_var_mw > 0.0 {
        let s = (noise_var_mw / 2.0).sqrt();
        for z in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += Complex64::new(re * s, im * s);
        }
    }

    Ok(PilotObservation {
        n_antennas,
        m_p,
        y,
    })
}

/// Least-squares channel estimate: `ĥ = (1/√P) Y v*`. With the identity
/// codebook this selects column i scaled by 1/√P; co-pilot users of other
/// sites leak in at √(P'/P), intra-site contamination is absent because the
/// site's sectors use orthogonal pilots.
pub fn estimate_channel(
    plan: &PilotPlan,
    obs: &PilotObservation,
    pilot_index: usize,
    own_power_mw: f64,
) -> Vec<Complex64> {
    assert!(own_power_mw > 0.0, "own power must be positive");
    let inv_amp = 1.0 / own_power_mw.sqrt();
    match &plan.codebook {
        None => obs
            .column(pilot_index)
            .iter()
            .map(|z| z * inv_amp)
            .collect(),
        Some(cb) => {
            let v = &cb[pilot_index];
            let mut h = vec![Complex64::new(0.0, 0.0); obs.n_antennas];
            for m in 0..obs.m_p {
                let w = v[m].conj() * inv_amp;
                for (dst, z) in h.iter_mut().zip(obs.column(m)) {
                    *dst += z * w;
                }
            }
            h
        }
    }
}

/// Estimated channel matrix Ĥ_b: one column per scheduled user.
#[derive(Debug, Clone)]
pub struct ChannelEstimateMatrix {
    pub n_antennas: usize,
    pub cols: Vec<Vec<Complex64>>,
}

impl ChannelEstimateMatrix {
    pub fn k(&self) -> usize {
        self.cols.len()
    }
}

/// Zero-forcing precoder set for one BS and PRB. Columns correspond to the
/// *kept* users (indices into the estimate matrix); `dropped` lists users
/// excluded by the degenerate-matrix policy.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub n_antennas: usize,
    /// Kept estimate-column indices, ascending.
    pub user_cols: Vec<usize>,
    /// Precoding vectors, one per kept user.
    pub w: Vec<Vec<Complex64>>,
    /// Per-user transmit power ‖w_k‖², mW.
    pub power_per_user_mw: f64,
    /// Users excluded because Ĥ^H Ĥ was numerically singular.
    pub dropped: Vec<usize>,
}

impl PrecoderSet {
    pub fn k(&self) -> usize {
        self.w.len()
    }

    /// Position of estimate column `col` among the kept columns.
    pub fn col_of(&self, col: usize) -> Option<usize> {
        self.user_cols.iter().position(|&c| c == col)
    }
}

/// ZF precoder `W = Ĥ (Ĥ^H Ĥ)^{-1} D^{-1/2}` with D fixing the equal power
/// split ‖w_k‖² = P_b/K. If the Gram matrix is numerically singular
/// (condition estimate above `cond_limit`), the user with the smallest
/// estimated channel norm is dropped and the solve retried.
pub fn zf_precoder(
    est: &ChannelEstimateMatrix,
    p_b_mw: f64,
    cond_limit: f64,
) -> Result<PrecoderSet, MuMimoError> {
    if est.cols.is_empty() {
        return Err(MuMimoError::EmptyEstimate);
    }
    let n = est.n_antennas;
    let mut kept: Vec<usize> = (0..est.cols.len()).collect();
    let mut dropped = Vec::new();

    loop {
        if kept.is_empty() {
            return Err(MuMimoError::AllUsersDropped);
        }
        let cols: Vec<&[Complex64]> = kept.iter().map(|&i| est.cols[i].as_slice()).collect();
        let k = cols.len();
        let g = gram(&cols);
        let mut l = g.clone();
        let solve_ok = cholesky(&mut l, k).is_ok()
            && cholesky_cond_estimate(&l, k) <= cond_limit;
        if !solve_ok {
            // Drop the weakest-gain user and retry.
            let weakest = kept
                .iter()
                .enumerate()
                .min_by(|(_, &a), (_, &b)| {
                    norm_sq(&est.cols[a])
                        .partial_cmp(&norm_sq(&est.cols[b]))
                        .unwrap()
                })
                .map(|(pos, _)| pos)
                .unwrap();
            dropped.push(kept.remove(weakest));
            continue;
        }

        // Ĥ G^{-1}: solve G x = e_k per kept user, then form Ĥ x.
        let per_user = p_b_mw / k as f64;
        let mut w = Vec::with_capacity(k);
        for col in 0..k {
            let mut x = vec![Complex64::new(0.0, 0.0); k];
            x[col] = Complex64::new(1.0, 0.0);
            cholesky_solve(&l, k, &mut x);
            let mut f = vec![Complex64::new(0.0, 0.0); n];
            for (j, &xc) in x.iter().enumerate() {
                for (dst, h) in f.iter_mut().zip(cols[j]) {
                    *dst += h * xc;
                }
            }
            let scale = (per_user / norm_sq(&f)).sqrt();
            for z in f.iter_mut() {
                *z *= scale;
            }
            w.push(f);
        }
        dropped.sort_unstable();
        return Ok(PrecoderSet {
            n_antennas: n,
            user_cols: kept,
            w,
            power_per_user_mw: per_user,
            dropped,
        });
    }
}

/// Effective scalar link gain in single-user mode: the fixed analog beam
/// turns every link into one scalar channel of power
/// slow_gain · AF-power-gain · fading.
#[inline]
pub fn single_user_effective_gain(slow_gain: f64, af_power_gain: f64, fading_power: f64) -> f64 {
    slow_gain * af_power_gain * fading_power
}

/// Norm of the single-user "precoder": full power to the one served user.
#[inline]
pub fn single_user_precoder_norm(p_b_mw: f64) -> f64 {
    p_b_mw.sqrt()
}
