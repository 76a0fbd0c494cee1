//! Element pattern, array geometry and beam gains.
//!
//! Elements follow the 3GPP parabolic-in-dB pattern (65° HPBW in both planes,
//! 8 dBi peak, 30 dB combined side/back-lobe clamp). Arrays are uniform
//! planar grids of cross-polarized element pairs at 0.5λ spacing: columns run
//! horizontally along the sector face, rows vertically. The single-user panel
//! (8×1 X-POL, 16 ports) uses fixed analog beamforming phased toward the
//! mechanical downtilt; the multi-user panel (8×8 X-POL, 128 ports) is tilted
//! mechanically but beams are formed digitally.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AntennaError {
    #[error("analog beamforming is defined for the single-column vertical array (got {0} columns)")]
    NotAVerticalArray(usize),
}

/// Physical array description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    /// Vertical element rows.
    pub rows: usize,
    /// Horizontal element columns.
    pub cols: usize,
    /// Two ±45° slant ports per element position.
    pub cross_polarized: bool,
    /// Element spacing in wavelengths.
    pub element_spacing_wl: f64,
    /// Mechanical downtilt in degrees (element boresight below horizontal).
    pub mechanical_downtilt_deg: f64,
    /// Element peak gain, dBi.
    pub element_max_gain_dbi: f64,
    /// Horizontal half-power beamwidth, degrees.
    pub hpbw_az_deg: f64,
    /// Vertical half-power beamwidth, degrees.
    pub hpbw_el_deg: f64,
}

impl ArrayConfig {
    /// Sectorized single-user panel: 8×1 X-POL, one RF chain.
    pub fn single_user_default() -> Self {
        ArrayConfig {
            rows: 8,
            cols: 1,
            cross_polarized: true,
            element_spacing_wl: 0.5,
            mechanical_downtilt_deg: 12.0,
            element_max_gain_dbi: 8.0,
            hpbw_az_deg: 65.0,
            hpbw_el_deg: 65.0,
        }
    }

    /// Massive MIMO panel: 8×8 X-POL, 128 RF chains.
    pub fn multi_user_default() -> Self {
        ArrayConfig {
            cols: 8,
            ..Self::single_user_default()
        }
    }

    /// Number of antenna ports (two per position for X-POL).
    pub fn n_antennas(&self) -> usize {
        let pol = if self.cross_polarized { 2 } else { 1 };
        pol * self.rows * self.cols
    }

    /// Element positions share a port pair; positions per panel.
    pub fn n_positions(&self) -> usize {
        self.rows * self.cols
    }
}

/// Direction of a link as seen from a sector: azimuth relative to the sector
/// boresight, elevation from horizontal (positive up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteeringContext {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub wavelength_m: f64,
}

impl SteeringContext {
    pub fn new(azimuth_deg: f64, elevation_deg: f64, wavelength_m: f64) -> Self {
        debug_assert!(azimuth_deg > -180.0 - 1e-9 && azimuth_deg <= 180.0 + 1e-9);
        debug_assert!((-90.0..=90.0).contains(&elevation_deg));
        SteeringContext {
            azimuth_deg,
            elevation_deg,
            wavelength_m,
        }
    }
}

/// 3GPP parabolic element pattern with a single 30 dB clamp on the combined
/// azimuth/elevation attenuation. The elevation offset is measured from the
/// element boresight, i.e. the mechanical downtilt is subtracted first.
pub fn element_gain_db(cfg: &ArrayConfig, ctx: &SteeringContext) -> f64 {
    let el_off = ctx.elevation_deg + cfg.mechanical_downtilt_deg;
    let a_az = 12.0 * (ctx.azimuth_deg / cfg.hpbw_az_deg).powi(2);
    let a_el = 12.0 * (el_off / cfg.hpbw_el_deg).powi(2);
    cfg.element_max_gain_dbi - (a_az + a_el).min(30.0)
}

/// Unit-modulus array steering vector (pure phase; no element pattern, no
/// polarization projection). Port ordering is position-major with the two
/// slant ports of one position adjacent; co-located ports share the phase.
pub fn steering_vector(cfg: &ArrayConfig, ctx: &SteeringContext) -> Vec<Complex64> {
    let az = ctx.azimuth_deg.to_radians();
    let el = ctx.elevation_deg.to_radians();
    // Unit direction components along the column (horizontal, y) and row
    // (vertical, z) axes of the patch.
    let dir_y = el.cos() * az.sin();
    let dir_z = el.sin();
    let k_spacing = 2.0 * std::f64::consts::PI * cfg.element_spacing_wl;

    let pol = if cfg.cross_polarized { 2 } else { 1 };
    let mut v = Vec::with_capacity(cfg.n_antennas());
    for r in 0..cfg.rows {
        for c in 0..cfg.cols {
            let phase = k_spacing * (c as f64 * dir_y + r as f64 * dir_z);
            let e = Complex64::from_polar(1.0, phase);
            for _ in 0..pol {
                v.push(e);
            }
        }
    }
    v
}

/// Linear array factor of the vertical stack, phased toward the mechanical
/// downtilt. Coherent maximum equals `rows` at the steer direction.
pub fn vertical_array_factor(cfg: &ArrayConfig, elevation_deg: f64) -> f64 {
    let steer = (-cfg.mechanical_downtilt_deg).to_radians().sin();
    let psi = 2.0 * std::f64::consts::PI
        * cfg.element_spacing_wl
        * (elevation_deg.to_radians().sin() - steer);
    let n = cfg.rows as f64;
    let half = psi / 2.0;
    if half.sin().abs() < 1e-12 {
        n
    } else {
        ((n * half).sin() / half.sin()).abs()
    }
}

/// Composite gain of the fixed analog beam: element pattern plus the vertical
/// array factor normalized so its peak adds 10·log10(rows) dB (unit-norm
/// equal-phase weights across the co-polarized column).
pub fn analog_beam_gain_db(cfg: &ArrayConfig, ctx: &SteeringContext) -> Result<f64, AntennaError> {
    if cfg.cols != 1 {
        return Err(AntennaError::NotAVerticalArray(cfg.cols));
    }
    Ok(element_gain_db(cfg, ctx) + analog_af_gain_db(cfg, ctx.elevation_deg))
}

/// Array-factor part of the analog beam gain, dB.
pub fn analog_af_gain_db(cfg: &ArrayConfig, elevation_deg: f64) -> f64 {
    let af = vertical_array_factor(cfg, elevation_deg);
    20.0 * (af / (cfg.rows as f64).sqrt()).max(1e-30).log10()
}

/// Linear power gain of the analog beam's array factor (peak = rows).
pub fn analog_af_power_gain(cfg: &ArrayConfig, elevation_deg: f64) -> f64 {
    let af = vertical_array_factor(cfg, elevation_deg);
    af * af / cfg.rows as f64
}
