//! Per-drop large-scale link state for every (BS, user) pair.
//!
//! Geometry and LoS/shadowing live per (site, user): the three co-located
//! sectors replay one derived stream, so they share the LoS state and the
//! shadowing draw and differ only in element gain (and, in single-user mode,
//! in the analog beam gain).

use crate::antenna::{analog_af_power_gain, element_gain_db, ArrayConfig, SteeringContext};
use crate::channel::{draw_large_scale, ChannelError, ChannelParams, LinkGeometry};
use crate::config::SimConfig;
use crate::deployment::{wrap_displacement, NetworkLayout, UserDrop};
use crate::geom::wrap_angle_deg;
use crate::mac::Mode;
use crate::rng::{stream, StreamKind};
use rayon::prelude::*;

/// Large-scale state of every (BS, user) link in one drop.
pub struct LinkField {
    pub n_bs: usize,
    pub n_users: usize,
    /// Per (site, user): 2D wrap distance, m.
    pub d2d_m: Vec<f64>,
    /// Per (site, user): elevation from horizontal, degrees.
    pub elevation_deg: Vec<f64>,
    /// Per (site, user): LoS state (site-common).
    pub los: Vec<bool>,
    /// Per (bs, user): linear slow gain (path loss + shadowing + O2I +
    /// element gain).
    pub slow_gain: Vec<f64>,
    /// Per (bs, user): slow gain in dB.
    pub slow_gain_db: Vec<f64>,
    /// Per (bs, user): azimuth relative to the sector boresight, degrees.
    pub az_rel_deg: Vec<f64>,
    /// Per (bs, user): analog-beam array-factor power gain (single-user
    /// mode only, else empty).
    pub af_power: Vec<f64>,
}

impl LinkField {
    #[inline]
    pub fn site_idx(&self, site: usize, user: usize) -> usize {
        site * self.n_users + user
    }

    #[inline]
    pub fn bs_idx(&self, bs: usize, user: usize) -> usize {
        bs * self.n_users + user
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        if self.n_users == 0 {
            0
        } else {
            self.los.len() / self.n_users
        }
    }

    #[inline]
    pub fn sectors_per_site(&self) -> usize {
        self.n_bs / self.n_sites().max(1)
    }

    #[inline]
    pub fn site_of_bs(&self, bs: usize) -> usize {
        bs / self.sectors_per_site()
    }

    /// Build the field for one drop (parallel over sites).
    pub fn build(
        cfg: &SimConfig,
        layout: &NetworkLayout,
        drop: &UserDrop,
        array: &ArrayConfig,
        drop_index: u64,
    ) -> Result<LinkField, ChannelError> {
        let n_users = drop.n_users();
        let n_sites = layout.n_sites();
        let n_bs = layout.n_bs();
        let sectors = layout.sectors_per_site;
        let params: &ChannelParams = &cfg.channel;
        let wavelength = params.wavelength_m();
        let su_mode = cfg.mode() == Mode::SingleUser;

        struct SiteBlock {
            d2d: Vec<f64>,
            elevation: Vec<f64>,
            los: Vec<bool>,
            // Per sector within the site, then per user.
            slow: Vec<Vec<f64>>,
            az_rel: Vec<Vec<f64>>,
            af: Vec<Vec<f64>>,
        }

        let blocks: Result<Vec<SiteBlock>, ChannelError> = (0..n_sites)
            .into_par_iter()
            .map(|site| {
                let site_pos = layout.sites[site];
                let mut block = SiteBlock {
                    d2d: vec![0.0; n_users],
                    elevation: vec![0.0; n_users],
                    los: vec![false; n_users],
                    slow: vec![vec![0.0; n_users]; sectors],
                    az_rel: vec![vec![0.0; n_users]; sectors],
                    af: if su_mode {
                        vec![vec![0.0; n_users]; sectors]
                    } else {
                        Vec::new()
                    },
                };
                for (u, user) in drop.users.iter().enumerate() {
                    let disp = wrap_displacement(site_pos, user.position, layout);
                    let d2d = disp.norm();
                    let elevation = (user.height_m - layout.bs_height_m).atan2(d2d).to_degrees();
                    let az_global = disp.y.atan2(disp.x).to_degrees();
                    let geom = LinkGeometry {
                        d2d_m: d2d,
                        bs_height_m: layout.bs_height_m,
                        user_height_m: user.height_m,
                    };
                    block.d2d[u] = d2d;
                    block.elevation[u] = elevation;

                    for sector in 0..sectors {
                        let az_rel =
                            wrap_angle_deg(az_global - layout.sector_azimuths_deg[sector]);
                        let ctx = SteeringContext::new(az_rel, elevation, wavelength);
                        let elem = element_gain_db(array, &ctx);
                        // Replay the (site, user) stream per sector: LoS and
                        // shadowing come out site-common.
                        let mut rng = stream(
                            cfg.run.master_seed,
                            StreamKind::LargeScale,
                            &[drop_index, site as u64, u as u64],
                        );
                        let ls =
                            draw_large_scale(params, &geom, user.o2i_depth_m, elem, &mut rng)?;
                        block.los[u] = ls.los;
                        block.slow[sector][u] = ls.slow_gain;
                        block.az_rel[sector][u] = az_rel;
                        if su_mode {
                            block.af[sector][u] = analog_af_power_gain(array, elevation);
                        }
                    }
                }
                Ok(block)
            })
            .collect();
        let blocks = blocks?;

        let mut field = LinkField {
            n_bs,
            n_users,
            d2d_m: vec![0.0; n_sites * n_users],
            elevation_deg: vec![0.0; n_sites * n_users],
            los: vec![false; n_sites * n_users],
            slow_gain: vec![0.0; n_bs * n_users],
            slow_gain_db: vec![0.0; n_bs * n_users],
            az_rel_deg: vec![0.0; n_bs * n_users],
            af_power: if su_mode {
                vec![0.0; n_bs * n_users]
            } else {
                Vec::new()
            },
        };
        for (site, block) in blocks.into_iter().enumerate() {
            let base = site * n_users;
            field.d2d_m[base..base + n_users].copy_from_slice(&block.d2d);
            field.elevation_deg[base..base + n_users].copy_from_slice(&block.elevation);
            field.los[base..base + n_users].copy_from_slice(&block.los);
            for sector in 0..sectors {
                let bs = site * sectors + sector;
                let bs_base = bs * n_users;
                field.slow_gain[bs_base..bs_base + n_users].copy_from_slice(&block.slow[sector]);
                for u in 0..n_users {
                    field.slow_gain_db[bs_base + u] = 10.0 * block.slow[sector][u].log10();
                }
                field.az_rel_deg[bs_base..bs_base + n_users]
                    .copy_from_slice(&block.az_rel[sector]);
                if su_mode {
                    field.af_power[bs_base..bs_base + n_users]
                        .copy_from_slice(&block.af[sector]);
                }
            }
        }
        Ok(field)
    }

    /// RSRP matrix (user × BS) in dBm: per-PRB transmit power plus slow gain,
    /// plus the analog beam gain in single-user mode.
    pub fn rsrp_matrix(&self, tx_power_dbm: f64, mode: Mode) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; self.n_bs]; self.n_users];
        for bs in 0..self.n_bs {
            for u in 0..self.n_users {
                let beam_db = match mode {
                    Mode::SingleUser => 10.0 * self.af_power[self.bs_idx(bs, u)].max(1e-30).log10(),
                    Mode::MultiUser => 0.0,
                };
                rows[u][bs] = crate::mac::compute_rsrp_dbm(
                    tx_power_dbm,
                    self.slow_gain_db[self.bs_idx(bs, u)],
                    beam_db,
                );
            }
        }
        rows
    }
}
