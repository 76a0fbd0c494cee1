//! Height-dependent stochastic propagation.
//!
//! Three regimes, switching on user height:
//!
//! - ground users (h ≤ 22.5 m): TR 38.901 Urban-Macro LoS probability and
//!   LoS/NLoS path loss with the high-UE correction;
//! - aerial users (22.5 < h ≤ 100 m): TR 36.777 UMa-AV LoS probability and
//!   path-loss expressions with height-dependent exponents;
//! - high aerial users (h > 100 m): LoS probability 1 and free-space loss.
//!
//! Shadowing is log-normal with a per-regime σ, fully correlated across the
//! three co-located sectors of a site (the caller replays one stream per
//! (site, user)). Fast fading is a Rician directional model: a steering
//! vector LoS component plus i.i.d. complex-Gaussian scattering, with the
//! ±45° slant ports projecting onto the user's vertical polarization as a
//! per-port amplitude factor 1/√2 (the pair jointly recovers full power).

use crate::antenna::{steering_vector, ArrayConfig, SteeringContext};
use crate::geom::db_to_lin;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("user height {0} m outside the modeled range [1.5, 300]")]
    HeightOutOfRange(f64),
}

/// How the LoS state is decided. The forced modes exist for geometric
/// oracles and debugging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LosMode {
    Probabilistic,
    AlwaysLos,
    AlwaysNlos,
}

/// Propagation constants. Everything the aerial standard parameterizes is
/// configurable so the implementation can track revisions of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub carrier_ghz: f64,
    /// Rician K for LoS links, dB (NLoS uses K = 0).
    pub k_factor_los_db: f64,
    pub los_mode: LosMode,
    pub shadow_sigma_los_ground_db: f64,
    pub shadow_sigma_nlos_db: f64,
    /// Aerial LoS shadowing: σ = coeff · exp(−decay · h_UT).
    pub shadow_sigma_aerial_los_coeff_db: f64,
    pub shadow_sigma_aerial_los_decay_per_m: f64,
    /// O2I penetration: base + per_m · depth, depth uniform on [0, 25] m.
    pub o2i_base_loss_db: f64,
    pub o2i_loss_per_m_db: f64,
    /// Ground/aerial regime switch height.
    pub aerial_boundary_m: f64,
    /// Above this height: LoS probability 1 and free-space loss.
    pub free_space_boundary_m: f64,
    /// Aerial LoS probability constants: d1 = max(c·log10(h)+o, 18),
    /// p1 = c·log10(h)+o.
    pub aerial_los_d1_coeff: f64,
    pub aerial_los_d1_offset: f64,
    pub aerial_los_p1_coeff: f64,
    pub aerial_los_p1_offset: f64,
    /// Fading draw granularity: one independent draw per this many PRBs.
    pub prb_group_size: usize,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            carrier_ghz: 2.0,
            k_factor_los_db: 9.0,
            los_mode: LosMode::Probabilistic,
            shadow_sigma_los_ground_db: 4.0,
            shadow_sigma_nlos_db: 6.0,
            shadow_sigma_aerial_los_coeff_db: 4.64,
            shadow_sigma_aerial_los_decay_per_m: 0.0066,
            o2i_base_loss_db: 20.0,
            o2i_loss_per_m_db: 0.5,
            aerial_boundary_m: 22.5,
            free_space_boundary_m: 100.0,
            aerial_los_d1_coeff: 460.0,
            aerial_los_d1_offset: -700.0,
            aerial_los_p1_coeff: 4300.0,
            aerial_los_p1_offset: -3800.0,
            prb_group_size: 1,
        }
    }
}

impl ChannelParams {
    pub fn wavelength_m(&self) -> f64 {
        299_792_458.0 / (self.carrier_ghz * 1e9)
    }
}

/// Link geometry between one BS and one user (wrap-metric distances).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub d2d_m: f64,
    pub bs_height_m: f64,
    pub user_height_m: f64,
}

impl LinkGeometry {
    pub fn d3d_m(&self) -> f64 {
        let dh = self.bs_height_m - self.user_height_m;
        self.d2d_m.hypot(dh)
    }
}

/// Large-scale link state; `slow_gain` is the linear power gain combining
/// path loss, shadowing, O2I loss and the element gain at the link angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScaleState {
    pub los: bool,
    pub path_loss_db: f64,
    pub shadowing_db: f64,
    pub o2i_loss_db: f64,
    pub element_gain_db: f64,
    pub slow_gain: f64,
}

impl LargeScaleState {
    pub fn assemble(
        los: bool,
        path_loss_db: f64,
        shadowing_db: f64,
        o2i_loss_db: f64,
        element_gain_db: f64,
    ) -> Self {
        let gain_db = -(path_loss_db + shadowing_db + o2i_loss_db) + element_gain_db;
        LargeScaleState {
            los,
            path_loss_db,
            shadowing_db,
            o2i_loss_db,
            element_gain_db,
            slow_gain: db_to_lin(gain_db),
        }
    }
}

/// Antenna-domain channel vector (linear amplitude; includes large-scale
/// gain, polarization projection and fast fading).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub h: Vec<Complex64>,
}

impl ChannelVector {
    pub fn norm_sq(&self) -> f64 {
        self.h.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// LoS probability for the link. Non-increasing in distance at fixed height;
/// 1 above the free-space boundary.
pub fn los_probability(params: &ChannelParams, d2d_m: f64, user_height_m: f64) -> Result<f64, ChannelError> {
    if !(1.5..=300.0).contains(&user_height_m) {
        return Err(ChannelError::HeightOutOfRange(user_height_m));
    }
    let h = user_height_m;
    let d = d2d_m;
    let p = if h > params.free_space_boundary_m {
        1.0
    } else if h > params.aerial_boundary_m {
        // TR 36.777 UMa-AV.
        let d1 = (params.aerial_los_d1_coeff * h.log10() + params.aerial_los_d1_offset).max(18.0);
        let p1 = params.aerial_los_p1_coeff * h.log10() + params.aerial_los_p1_offset;
        if d <= d1 {
            1.0
        } else {
            d1 / d + (-d / p1).exp() * (1.0 - d1 / d)
        }
    } else {
        // TR 38.901 UMa with the elevated-UE correction.
        if d <= 18.0 {
            1.0
        } else {
            let base = 18.0 / d + (-d / 63.0).exp() * (1.0 - 18.0 / d);
            let c = if h <= 13.0 {
                0.0
            } else {
                ((h - 13.0) / 10.0).powf(1.5)
            };
            base * (1.0 + c * 1.25 * (d / 100.0).powi(3) * (-d / 150.0).exp())
        }
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Path loss in dB for the link and LoS state.
pub fn path_loss_db(params: &ChannelParams, geom: &LinkGeometry, los: bool) -> f64 {
    let fc = params.carrier_ghz;
    let d3d = geom.d3d_m().max(1.0);
    let h = geom.user_height_m;

    if h > params.free_space_boundary_m {
        return 28.0 + 20.0 * d3d.log10() + 20.0 * fc.log10();
    }
    if h > params.aerial_boundary_m {
        // TR 36.777 UMa-AV.
        return if los {
            28.0 + 22.0 * d3d.log10() + 20.0 * fc.log10()
        } else {
            -17.5 + (46.0 - 7.0 * h.log10()) * d3d.log10()
                + 20.0 * (40.0 * std::f64::consts::PI * fc / 3.0).log10()
        };
    }

    // TR 38.901 UMa ground model.
    let pl_los = {
        // Breakpoint with 1 m effective environment height.
        let hb = (geom.bs_height_m - 1.0).max(0.0);
        let hu = (h - 1.0).max(0.0);
        let d_bp = 4.0 * hb * hu * (fc * 1e9) / 299_792_458.0;
        if geom.d2d_m <= d_bp || d_bp <= 0.0 {
            28.0 + 22.0 * d3d.log10() + 20.0 * fc.log10()
        } else {
            let dh = geom.bs_height_m - h;
            28.0 + 40.0 * d3d.log10() + 20.0 * fc.log10()
                - 9.0 * (d_bp * d_bp + dh * dh).log10()
        }
    };
    if los {
        pl_los
    } else {
        let pl_nlos = 13.54 + 39.08 * d3d.log10() + 20.0 * fc.log10() - 0.6 * (h - 1.5);
        pl_nlos.max(pl_los)
    }
}

/// Shadowing standard deviation for the regime.
pub fn shadow_sigma_db(params: &ChannelParams, user_height_m: f64, los: bool) -> f64 {
    if user_height_m > params.aerial_boundary_m {
        if los {
            params.shadow_sigma_aerial_los_coeff_db
                * (-params.shadow_sigma_aerial_los_decay_per_m * user_height_m).exp()
        } else {
            params.shadow_sigma_nlos_db
        }
    } else if los {
        params.shadow_sigma_los_ground_db
    } else {
        params.shadow_sigma_nlos_db
    }
}

/// Draw LoS state, shadowing and O2I loss, and assemble the slow gain.
///
/// Replaying the same stream for the three co-located sectors of a site
/// yields the site-common LoS/shadowing draw; only the element gain differs.
pub fn draw_large_scale(
    params: &ChannelParams,
    geom: &LinkGeometry,
    o2i_depth_m: Option<f64>,
    element_gain_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<LargeScaleState, ChannelError> {
    let p_los = los_probability(params, geom.d2d_m, geom.user_height_m)?;
    let u: f64 = rng.gen();
    let los = match params.los_mode {
        LosMode::Probabilistic => u < p_los,
        LosMode::AlwaysLos => true,
        LosMode::AlwaysNlos => false,
    };
    let sigma = shadow_sigma_db(params, geom.user_height_m, los);
    let z: f64 = rng.sample(StandardNormal);
    let shadowing_db = sigma * z;
    let o2i_loss_db = o2i_depth_m
        .map(|d| params.o2i_base_loss_db + params.o2i_loss_per_m_db * d)
        .unwrap_or(0.0);
    let pl = path_loss_db(params, geom, los);
    Ok(LargeScaleState::assemble(
        los,
        pl,
        shadowing_db,
        o2i_loss_db,
        element_gain_db,
    ))
}

/// Expected squared norm of a drawn channel: the 1/√2 per-port polarization
/// projection makes E‖h‖² = slow_gain · N_a / 2 for any K.
pub fn expected_channel_norm_sq(ls: &LargeScaleState, n_antennas: usize) -> f64 {
    ls.slow_gain * n_antennas as f64 / 2.0
}

/// Draw the antenna-domain Rician channel vector.
///
/// `h = √(slow_gain/2) · (√(K/(K+1)) e^{jψ} a + √(1/(K+1)) g)` with `a` the
/// unit-modulus steering vector, ψ a uniform LoS phase, `g` i.i.d. CN(0,1),
/// and K = 0 for NLoS links.
pub fn draw_channel(
    cfg: &ArrayConfig,
    ls: &LargeScaleState,
    ctx: &SteeringContext,
    k_factor_db: f64,
    rng: &mut ChaCha8Rng,
) -> ChannelVector {
    let k = if ls.los { db_to_lin(k_factor_db) } else { 0.0 };
    let los_amp = (k / (k + 1.0)).sqrt();
    let nlos_amp = (1.0 / (k + 1.0)).sqrt();
    let per_port = (ls.slow_gain / 2.0).sqrt();

    let psi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let los_phase = Complex64::from_polar(los_amp, psi);

    let a = steering_vector(cfg, ctx);
    let mut h = Vec::with_capacity(a.len());
    for ai in a {
        let gr: f64 = rng.sample(StandardNormal);
        let gi: f64 = rng.sample(StandardNormal);
        let g = Complex64::new(gr, gi) * std::f64::consts::FRAC_1_SQRT_2;
        h.push((los_phase * ai + g * nlos_amp) * per_port);
    }
    ChannelVector { h }
}

/// Unit-mean Rician power fading for the scalar single-user link
/// (exponential with unit mean when NLoS).
pub fn rician_power(los: bool, k_factor_db: f64, rng: &mut ChaCha8Rng) -> f64 {
    let k = if los { db_to_lin(k_factor_db) } else { 0.0 };
    let los_amp = (k / (k + 1.0)).sqrt();
    let nlos_amp = (1.0 / (k + 1.0)).sqrt();
    let gr: f64 = rng.sample(StandardNormal);
    let gi: f64 = rng.sample(StandardNormal);
    let g = Complex64::new(gr, gi) * std::f64::consts::FRAC_1_SQRT_2;
    (Complex64::new(los_amp, 0.0) + g * nlos_amp).norm_sqr()
}
