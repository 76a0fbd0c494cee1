//! Experiment orchestration: seeded Monte Carlo drops, the deployment-mode ×
//! CSI-regime matrix, and CDF/reliability aggregation.
//!
//! A drop is: place users → draw large-scale link states → associate by RSRP
//! → schedule one round-robin slot → evaluate every scheduled PRB (drawing
//! fresh fast fading per PRB group) → convert each user's mean spectral
//! efficiency and analytic airtime share into a long-run rate. Drops run
//! sequentially and are internally parallel; every random draw comes from a
//! stream derived from (master_seed, drop, ...), so results are bit-identical
//! at any thread count.
//!
//! `run_experiment_matrix` evaluates several CSI regimes over shared channel
//! draws. The shared seed derivation makes that exactly equivalent to — and
//! much cheaper than — separate runs per regime.

mod links;
mod mu;
mod stats;
mod su;

pub use links::LinkField;
pub use mu::{MuDiag, SinrDiag};
pub use stats::{uav_height_bins, CdfSummary, GroupCdf, HeightBin, RateSample};

use crate::antenna::{analog_beam_gain_db, AntennaError, SteeringContext};
use crate::channel::ChannelError;
use crate::config::{ConfigError, CsiMode, SimConfig};
use crate::deployment::{
    build_layout, drop_stream, drop_users, DeploymentError, NetworkLayout, UserDrop,
};
use crate::mac::{associate, Mode, RoundRobinScheduler};
use crate::mu_mimo::{ul_tx_power_mw, PowerControlMode};
use crate::phy::{noise_power_mw, se_to_rate_bps, McsTable, PhyError, RateRecord};
use mu::{MuWorkspace, RegimeSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Deployment(#[from] DeploymentError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Antenna(#[from] AntennaError),
    #[error(transparent)]
    Mac(#[from] crate::mac::MacError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error("experiment matrix requires multi-user mode")]
    MatrixNeedsMultiUser,
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

fn mcs_table(cfg: &SimConfig) -> Result<McsTable, HarnessError> {
    if cfg.phy.mcs_table_path.is_empty() {
        Ok(McsTable::embedded_default())
    } else {
        Ok(McsTable::from_file(std::path::Path::new(
            &cfg.phy.mcs_table_path,
        ))?)
    }
}

fn make_drop(cfg: &SimConfig, layout: &NetworkLayout, drop_index: u64) -> UserDrop {
    let mut rng = drop_stream(cfg.run.master_seed, drop_index);
    drop_users(
        layout,
        cfg.users.per_sector,
        cfg.users.uav_ratio,
        cfg.users.indoor_fraction,
        cfg.run.uav_height.policy(),
        &mut rng,
    )
}

/// Execute the configured number of drops and aggregate rate CDFs.
pub fn run_experiment(cfg: &SimConfig) -> Result<CdfSummary, HarnessError> {
    let csis = [cfg.run.csi];
    let regimes: &[CsiMode] = match cfg.mode() {
        Mode::MultiUser => &csis,
        Mode::SingleUser => &[],
    };
    Ok(run_all(cfg, regimes)?.pop().expect("one summary"))
}

/// Evaluate several multi-user CSI regimes over shared drops and channels;
/// bit-identical to separate `run_experiment` calls with each regime.
pub fn run_experiment_matrix(
    cfg: &SimConfig,
    csis: &[CsiMode],
) -> Result<Vec<CdfSummary>, HarnessError> {
    if cfg.mode() != Mode::MultiUser {
        return Err(HarnessError::MatrixNeedsMultiUser);
    }
    run_all(cfg, csis)
}

/// Shared driver: an empty regime list means single-user mode (one summary).
fn run_all(cfg: &SimConfig, csis: &[CsiMode]) -> Result<Vec<CdfSummary>, HarnessError> {
    cfg.validate()?;
    let layout = build_layout(cfg.layout.isd_m, cfg.layout.tiers, cfg.layout.bs_height_m)?;
    let mcs = mcs_table(cfg)?;
    let mode = cfg.mode();
    let array = cfg.antenna.array(mode);
    let n_outputs = csis.len().max(1);

    let mut ws = match mode {
        Mode::MultiUser => Some(MuWorkspace::new(
            layout.n_bs(),
            cfg.k_max(),
            array.n_antennas(),
        )),
        Mode::SingleUser => None,
    };

    let mut samples: Vec<Vec<RateSample>> = vec![Vec::new(); n_outputs];
    for drop_index in 0..cfg.run.drops as u64 {
        let drop = make_drop(cfg, &layout, drop_index);
        let per_regime = run_drop(
            cfg,
            &layout,
            &drop,
            &mcs,
            drop_index,
            csis,
            ws.as_mut(),
            None,
        )?;
        for (r, records) in per_regime.into_iter().enumerate() {
            samples[r].extend(records.into_iter().map(|rec| RateSample {
                drop: drop_index,
                user: rec.user,
                kind: rec.kind,
                height_m: rec.height_m,
                rate_bps: rec.rate_bps,
            }));
        }
    }

    let bins = uav_height_bins(cfg.run.uav_height.policy());
    Ok(samples
        .into_iter()
        .map(|s| CdfSummary::build(s, &bins, cfg.phy.target_rate_bps))
        .collect())
}

/// One Monte Carlo drop end to end; returns one record set per regime
/// (single-user mode returns exactly one).
#[allow(clippy::too_many_arguments)]
fn run_drop(
    cfg: &SimConfig,
    layout: &NetworkLayout,
    drop: &UserDrop,
    mcs: &McsTable,
    drop_index: u64,
    csis: &[CsiMode],
    ws: Option<&mut MuWorkspace>,
    diag: Option<&mut MuDiag>,
) -> Result<Vec<Vec<RateRecord>>, HarnessError> {
    let mode = cfg.mode();
    let array = cfg.antenna.array(mode);
    let field = LinkField::build(cfg, layout, drop, &array, drop_index)?;
    let rsrp = field.rsrp_matrix(crate::geom::mw_to_dbm(cfg.bs_power_per_prb_mw()), mode);
    let assoc = associate(rsrp);
    let mut scheduler = RoundRobinScheduler::new(&assoc, layout.n_bs());
    let schedule = scheduler.next_slot(cfg.phy.prbs, cfg.k_max())?;

    let noise_dl = noise_power_mw(
        cfg.power.noise_psd_dbm_hz,
        cfg.power.ue_noise_figure_db,
        cfg.phy.prb_bandwidth_hz,
    );

    let accs = match mode {
        Mode::SingleUser => {
            vec![su::evaluate_slot(cfg, &field, &schedule, mcs, noise_dl, drop_index)]
        }
        Mode::MultiUser => {
            let noise_ul = noise_power_mw(
                cfg.power.noise_psd_dbm_hz,
                cfg.power.bs_noise_figure_db,
                cfg.phy.prb_bandwidth_hz,
            );
            let regimes: Vec<RegimeSpec> = csis
                .iter()
                .map(|&csi| {
                    let pilot_power_mw = match csi {
                        CsiMode::Perfect => Vec::new(),
                        CsiMode::Reuse3PowerControl | CsiMode::Reuse3EqualPower => {
                            let pc_mode = if csi == CsiMode::Reuse3PowerControl {
                                PowerControlMode::Fractional
                            } else {
                                PowerControlMode::Equal
                            };
                            (0..drop.n_users())
                                .map(|u| {
                                    let bs = assoc.serving_bs[u];
                                    ul_tx_power_mw(
                                        &cfg.power.uplink,
                                        field.slow_gain[field.bs_idx(bs, u)],
                                        pc_mode,
                                    )
                                })
                                .collect()
                        }
                    };
                    RegimeSpec {
                        csi,
                        pilot_power_mw,
                    }
                })
                .collect();
            let ws = ws.expect("multi-user workspace");
            mu::evaluate_slot(
                cfg,
                &field,
                &schedule,
                &assoc.serving_bs,
                &regimes,
                mcs,
                noise_dl,
                noise_ul,
                drop_index,
                ws,
                diag,
            )
        }
    };

    let prbs = cfg.phy.prbs;
    let k_max = cfg.k_max();
    let mut out = Vec::with_capacity(accs.len());
    for acc in accs {
        let mut records = Vec::with_capacity(drop.n_users());
        for (u, user) in drop.users.iter().enumerate() {
            let serving = assoc.serving_bs[u];
            let n_attached = scheduler.users_of_bs(serving).len();
            let share = RoundRobinScheduler::long_run_share(n_attached, prbs, k_max);
            let (se, rate) = if acc.prbs_served[u] > 0 {
                let mean_se = acc.se_sum[u] / acc.prbs_served[u] as f64;
                let rate = se_to_rate_bps(
                    mean_se,
                    share,
                    cfg.phy.prb_bandwidth_hz,
                    cfg.phy.overhead_symbols,
                    cfg.phy.symbols_per_slot,
                )?;
                (mean_se, rate)
            } else {
                (0.0, 0.0)
            };
            records.push(RateRecord {
                user: u,
                kind: user.kind,
                height_m: user.height_m,
                se_bps_hz: se,
                rate_bps: rate,
            });
        }
        out.push(records);
    }
    Ok(out)
}

/// Per-PRB SINR and estimation-error diagnostics for one multi-user drop
/// (used by the estimation-error dump and the engine equivalence tests).
pub fn mu_drop_diagnostics(
    cfg: &SimConfig,
    drop_index: u64,
    csis: &[CsiMode],
) -> Result<(UserDrop, MuDiag), HarnessError> {
    cfg.validate()?;
    if cfg.mode() != Mode::MultiUser {
        return Err(HarnessError::MatrixNeedsMultiUser);
    }
    let layout = build_layout(cfg.layout.isd_m, cfg.layout.tiers, cfg.layout.bs_height_m)?;
    let mcs = mcs_table(cfg)?;
    let array = cfg.antenna.array(Mode::MultiUser);
    let mut ws = MuWorkspace::new(layout.n_bs(), cfg.k_max(), array.n_antennas());
    let drop = make_drop(cfg, &layout, drop_index);
    let mut diag = MuDiag::default();
    run_drop(
        cfg,
        &layout,
        &drop,
        &mcs,
        drop_index,
        csis,
        Some(&mut ws),
        Some(&mut diag),
    )?;
    Ok((drop, diag))
}

/// Estimation-error dump quantifying pilot contamination by user kind
/// (CSV: user, kind, height, prb, sinr_db, est_err).
pub fn estimation_error_dump(cfg: &SimConfig, drop_index: u64) -> Result<String, HarnessError> {
    let (drop, diag) = mu_drop_diagnostics(cfg, drop_index, &[cfg.run.csi])?;
    let mut out = String::from("user,kind,height_m,prb,sinr_db,est_err\n");
    for rec in &diag.per_regime[0] {
        let user = &drop.users[rec.user];
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rec.user,
            user.kind.label(),
            user.height_m,
            rec.prb,
            rec.sinr_db,
            rec.est_err
        ));
    }
    Ok(out)
}

/// Association dump for one drop: user id, kind, height, serving BS and the
/// 2D wrap distance to the serving site (CSV).
pub fn association_dump(cfg: &SimConfig, drop_index: u64) -> Result<String, HarnessError> {
    cfg.validate()?;
    let layout = build_layout(cfg.layout.isd_m, cfg.layout.tiers, cfg.layout.bs_height_m)?;
    let mode = cfg.mode();
    let array = cfg.antenna.array(mode);
    let drop = make_drop(cfg, &layout, drop_index);
    let field = LinkField::build(cfg, &layout, &drop, &array, drop_index)?;
    let assoc = associate(field.rsrp_matrix(
        crate::geom::mw_to_dbm(cfg.bs_power_per_prb_mw()),
        mode,
    ));

    let mut out = String::from("user,kind,height_m,serving_bs,d2d_m\n");
    for (u, user) in drop.users.iter().enumerate() {
        let bs = assoc.serving_bs[u];
        let site = field.site_of_bs(bs);
        let d2d = field.d2d_m[field.site_idx(site, u)];
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            u,
            user.kind.label(),
            user.height_m,
            bs,
            d2d
        ));
    }
    Ok(out)
}

/// Composite analog-beam gain versus 2D distance for a user at `height_m`
/// (CSV: distance, height, gain_dB).
pub fn antenna_sweep_csv(
    cfg: &SimConfig,
    height_m: f64,
    max_distance_m: f64,
    step_m: f64,
) -> Result<String, HarnessError> {
    let array = cfg.antenna.array(Mode::SingleUser);
    let wavelength = cfg.channel.wavelength_m();
    let mut out = String::from("distance_m,height_m,gain_db\n");
    let mut d = step_m.max(1e-3);
    while d <= max_distance_m {
        let el = (height_m - cfg.layout.bs_height_m).atan2(d).to_degrees();
        let gain = analog_beam_gain_db(&array, &SteeringContext::new(0.0, el, wavelength))?;
        out.push_str(&format!("{d},{height_m},{gain}\n"));
        d += step_m;
    }
    Ok(out)
}
