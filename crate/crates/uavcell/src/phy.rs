//! PHY abstraction: per-PRB SINR from precoded channels, the MCS spectral
//! efficiency staircase, and long-run user rates with control overhead.

use crate::deployment::UserKind;
use crate::linalg::dot_conj;
use crate::mu_mimo::PrecoderSet;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhyError {
    #[error("MCS table needs at least one row")]
    EmptyTable,
    #[error("MCS table row {row}: {msg}")]
    BadRow { row: usize, msg: String },
    #[error("MCS table must be strictly increasing in both columns (row {row})")]
    NotIncreasing { row: usize },
    #[error("overhead symbols must be below {symbols} per slot (got {overhead})")]
    BadOverhead { overhead: usize, symbols: usize },
}

/// Thermal noise power over a bandwidth, mW.
pub fn noise_power_mw(psd_dbm_hz: f64, noise_figure_db: f64, bandwidth_hz: f64) -> f64 {
    crate::geom::dbm_to_mw(psd_dbm_hz + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

/// SINR decomposition for one user on one PRB (all powers in mW).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrRecord {
    pub user: usize,
    pub prb: usize,
    pub signal_mw: f64,
    pub intra_interference_mw: f64,
    pub inter_interference_mw: f64,
    pub noise_mw: f64,
    pub sinr_db: f64,
}

impl SinrRecord {
    pub fn sinr_linear(&self) -> f64 {
        self.signal_mw / (self.intra_interference_mw + self.inter_interference_mw + self.noise_mw)
    }
}

/// Per-user rate sample for one drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRecord {
    pub user: usize,
    pub kind: UserKind,
    pub height_m: f64,
    pub se_bps_hz: f64,
    pub rate_bps: f64,
}

/// Downlink SINR for user `k` served by BS `serving` on one PRB.
///
/// Transmit powers are folded into the precoder norms: signal is
/// |h_bbk^H w_bk|², intra-cell interference sums the serving BS's other
/// columns against the user's serving-BS channel, inter-cell interference
/// sums every other BS's columns against the user's channel toward that BS.
///
/// `channel_to` maps a BS id to the user's channel vector toward it;
/// `precoders[j]` is `None` for silent BSs. `own_col` is the user's column
/// in the serving precoder's estimate matrix.
pub fn compute_sinr<'a, F>(
    user: usize,
    prb: usize,
    serving: usize,
    own_col: usize,
    channel_to: F,
    precoders: &[Option<PrecoderSet>],
    noise_mw: f64,
) -> SinrRecord
where
    F: Fn(usize) -> &'a [Complex64],
{
    let mut signal = 0.0;
    let mut intra = 0.0;
    let mut inter = 0.0;

    for (j, set) in precoders.iter().enumerate() {
        let Some(set) = set else { continue };
        let h = channel_to(j);
        if j == serving {
            for (pos, w) in set.w.iter().enumerate() {
                let p = dot_conj(h, w).norm_sqr();
                if set.user_cols[pos] == own_col {
                    signal = p;
                } else {
                    intra += p;
                }
            }
        } else {
            for w in &set.w {
                inter += dot_conj(h, w).norm_sqr();
            }
        }
    }

    let sinr = signal / (intra + inter + noise_mw);
    SinrRecord {
        user,
        prb,
        signal_mw: signal,
        intra_interference_mw: intra,
        inter_interference_mw: inter,
        noise_mw,
        sinr_db: 10.0 * sinr.log10(),
    }
}

/// MCS staircase: rows of (minimum SINR dB, spectral efficiency b/s/Hz),
/// strictly increasing in both columns. SINRs below the first threshold are
/// in outage (SE = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    rows: Vec<(f64, f64)>,
}

/// Default staircase shipped with the crate (see data/mcs_table.txt).
const DEFAULT_TABLE: &str = include_str!("../data/mcs_table.txt");

impl McsTable {
    pub fn embedded_default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("embedded MCS table is valid")
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, PhyError> {
        let text = std::fs::read_to_string(path).map_err(|e| PhyError::BadRow {
            row: 0,
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Parse the text format: one `min_sinr_db se` pair per line, `#`
    /// comments allowed.
    pub fn parse(text: &str) -> Result<Self, PhyError> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64, PhyError> {
                s.and_then(|v| v.parse().ok()).ok_or(PhyError::BadRow {
                    row: n + 1,
                    msg: format!("expected 'min_sinr_db se', got {line:?}"),
                })
            };
            let sinr = parse(it.next())?;
            let se = parse(it.next())?;
            if it.next().is_some() {
                return Err(PhyError::BadRow {
                    row: n + 1,
                    msg: "trailing fields".into(),
                });
            }
            rows.push((sinr, se));
        }
        if rows.is_empty() {
            return Err(PhyError::EmptyTable);
        }
        for i in 1..rows.len() {
            if rows[i].0 <= rows[i - 1].0 || rows[i].1 <= rows[i - 1].1 {
                return Err(PhyError::NotIncreasing { row: i + 1 });
            }
        }
        Ok(McsTable { rows })
    }

    /// Spectral efficiency for an SINR: highest level whose threshold is met,
    /// 0 below the lowest threshold.
    pub fn se_for_sinr(&self, sinr_db: f64) -> f64 {
        let mut se = 0.0;
        for &(thr, eff) in &self.rows {
            if sinr_db >= thr {
                se = eff;
            } else {
                break;
            }
        }
        se
    }

    pub fn max_se(&self) -> f64 {
        self.rows.last().map(|r| r.1).unwrap_or(0.0)
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }
}

/// Long-run rate: SE × PRB bandwidth × average scheduled PRBs per slot,
/// discounted by the control overhead (3 of 14 OFDM symbols by default).
pub fn se_to_rate_bps(
    se_bps_hz: f64,
    scheduled_share_prbs: f64,
    prb_bandwidth_hz: f64,
    overhead_symbols: usize,
    symbols_per_slot: usize,
) -> Result<f64, PhyError> {
    if overhead_symbols >= symbols_per_slot {
        return Err(PhyError::BadOverhead {
            overhead: overhead_symbols,
            symbols: symbols_per_slot,
        });
    }
    let payload = (symbols_per_slot - overhead_symbols) as f64 / symbols_per_slot as f64;
    Ok(se_bps_hz * prb_bandwidth_hz * scheduled_share_prbs * payload)
}
