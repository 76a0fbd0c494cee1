//! Hexagonal site grid with toroidal wrap-around and Monte Carlo user drops.
//!
//! Sites sit on a hexagonal lattice with basis vectors `u = isd*(1,0)` and
//! `v = isd*(1/2, √3/2)`; a layout with `t` tiers holds `1 + Σ 6k = 3t²+3t+1`
//! sites, each with three co-located BSs at azimuths 0°/120°/240°. Wrap-around
//! uses cluster tessellation: for the 37-site cluster the translation
//! `T = 4u + 3v` and its five 60° rotations tile the plane exactly
//! (37 = 4² + 4·3 + 3²), so every BS–user distance is evaluated at the
//! minimum over the identity image plus six translated images.

use crate::geom::Vec2;
use crate::rng::{stream, StreamKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECTORS_PER_SITE: usize = 3;

/// Outdoor GUE height; also the UAV take-off/landing height.
pub const GROUND_USER_HEIGHT_M: f64 = 1.5;
/// Indoor floor pitch: height = 1.5 + 3(f-1).
pub const FLOOR_HEIGHT_M: f64 = 3.0;
/// Maximum indoor penetration depth for the O2I draw.
pub const MAX_O2I_DEPTH_M: f64 = 25.0;

#[derive(Debug, Error)]
pub enum DeploymentError {
    #[error("tier count must be 1, 2 or 3 (got {0})")]
    InvalidTiers(usize),
    #[error("inter-site distance must be positive (got {0})")]
    InvalidIsd(f64),
    #[error("malformed record on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Wrapped hexagonal deployment: site positions, sector orientations and the
/// translation vectors realizing the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub sites: Vec<Vec2>,
    pub sectors_per_site: usize,
    pub sector_azimuths_deg: Vec<f64>,
    pub bs_height_m: f64,
    pub isd_m: f64,
    pub wrap_vectors: Vec<Vec2>,
    /// Lattice generators of the wrap sublattice (used for uniform sampling).
    wrap_basis: [Vec2; 2],
}

impl NetworkLayout {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_bs(&self) -> usize {
        self.sites.len() * self.sectors_per_site
    }

    #[inline]
    pub fn site_of_bs(&self, bs: usize) -> usize {
        bs / self.sectors_per_site
    }

    #[inline]
    pub fn sector_of_bs(&self, bs: usize) -> usize {
        bs % self.sectors_per_site
    }

    #[inline]
    pub fn bs_position(&self, bs: usize) -> Vec2 {
        self.sites[self.site_of_bs(bs)]
    }

    #[inline]
    pub fn bs_azimuth_deg(&self, bs: usize) -> f64 {
        self.sector_azimuths_deg[self.sector_of_bs(bs)]
    }

    /// Fundamental-domain basis of the wrap torus.
    pub fn wrap_basis(&self) -> [Vec2; 2] {
        self.wrap_basis
    }

    /// Line-oriented dump (one record per entity) for replay and debugging.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# layout v1\n");
        s.push_str(&format!(
            "layout {} {} {}\n",
            self.isd_m,
            self.bs_height_m,
            self.sites.len()
        ));
        for (i, p) in self.sites.iter().enumerate() {
            s.push_str(&format!("site {} {} {}\n", i, p.x, p.y));
        }
        s
    }
}

/// Build the wrapped hexagonal layout.
///
/// `tiers` rings around the central site; three co-located BSs per site with
/// azimuths 120° apart.
pub fn build_layout(
    isd_m: f64,
    tiers: usize,
    bs_height_m: f64,
) -> Result<NetworkLayout, DeploymentError> {
    if !(1..=3).contains(&tiers) {
        return Err(DeploymentError::InvalidTiers(tiers));
    }
    if !(isd_m > 0.0) {
        return Err(DeploymentError::InvalidIsd(isd_m));
    }

    let u = Vec2::new(isd_m, 0.0);
    let v = Vec2::new(isd_m * 0.5, isd_m * 0.5 * 3f64.sqrt());
    let lattice = |i: i64, j: i64| u * i as f64 + v * j as f64;

    // Axial coordinates with hex distance <= tiers, ordered centre-out.
    let mut coords: Vec<(i64, i64)> = Vec::new();
    let t = tiers as i64;
    for i in -t..=t {
        for j in -t..=t {
            let k = -i - j;
            let dist = i.abs().max(j.abs()).max(k.abs());
            if dist <= t {
                coords.push((i, j));
            }
        }
    }
    coords.sort_by_key(|&(i, j)| {
        let k = -i - j;
        (i.abs().max(j.abs()).max(k.abs()), i, j)
    });
    let sites: Vec<Vec2> = coords.iter().map(|&(i, j)| lattice(i, j)).collect();

    // Cluster tessellation: for N = 3t²+3t+1 sites, T = (t+1)u + t v satisfies
    // N = (t+1)² + (t+1)t + t², so T and its 60° rotations generate a
    // sublattice of index N and the cluster tiles the plane.
    let (a, b) = (t + 1, t);
    let mut wrap_vectors = Vec::with_capacity(6);
    let (mut wa, mut wb) = (a, b);
    for _ in 0..6 {
        wrap_vectors.push(lattice(wa, wb));
        // 60° rotation in axial coordinates: (a, b) -> (-b, a+b).
        let (na, nb) = (-wb, wa + wb);
        wa = na;
        wb = nb;
    }
    let wrap_basis = [wrap_vectors[0], wrap_vectors[1]];

    Ok(NetworkLayout {
        sites,
        sectors_per_site: SECTORS_PER_SITE,
        sector_azimuths_deg: vec![0.0, 120.0, 240.0],
        bs_height_m,
        isd_m,
        wrap_vectors,
        wrap_basis,
    })
}

/// Displacement `b' - a` where `b'` is the wrap image of `b` minimizing the
/// distance to `a`. Norm-symmetric: |wrap(a,b)| = |wrap(b,a)|.
pub fn wrap_displacement(a: Vec2, b: Vec2, layout: &NetworkLayout) -> Vec2 {
    let direct = b - a;
    let mut best = direct;
    let mut best_sq = direct.norm_sq();
    for &w in &layout.wrap_vectors {
        let cand = direct + w;
        let d = cand.norm_sq();
        if d < best_sq {
            best_sq = d;
            best = cand;
        }
    }
    best
}

/// Kind of dropped user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserKind {
    GueOutdoor,
    GueIndoor,
    Uav,
}

impl UserKind {
    pub fn label(self) -> &'static str {
        match self {
            UserKind::GueOutdoor => "gue-outdoor",
            UserKind::GueIndoor => "gue-indoor",
            UserKind::Uav => "uav",
        }
    }
}

/// UAV altitude policy for a drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UavHeightPolicy {
    /// All UAVs at one altitude (take-off studies, per-height CDFs).
    Fixed(f64),
    /// Uniform on [1.5, 300] m.
    Uniform,
}

/// One dropped user.
#[derive(Debug, Clone, PartialEq)]
pub struct User {
    pub position: Vec2,
    pub height_m: f64,
    pub kind: UserKind,
    /// Floor number for indoor users (1-based).
    pub floor: Option<u8>,
    /// Indoor penetration depth draw, metres (indoor users only).
    pub o2i_depth_m: Option<f64>,
    /// Serving BS, filled by association.
    pub serving_bs: Option<usize>,
}

/// A realization of user positions/kinds/heights for one Monte Carlo drop.
#[derive(Debug, Clone, PartialEq)]
pub struct UserDrop {
    pub users: Vec<User>,
}

impl UserDrop {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Line-oriented dump (one record per user).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# drop v1: user <id> <kind> <x> <y> <height> <floor> <o2i_depth>\n");
        for (i, u) in self.users.iter().enumerate() {
            s.push_str(&format!(
                "user {} {} {} {} {} {} {}\n",
                i,
                u.kind.label(),
                u.position.x,
                u.position.y,
                u.height_m,
                u.floor.map(|f| f as i64).unwrap_or(-1),
                u.o2i_depth_m.unwrap_or(-1.0),
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<UserDrop, DeploymentError> {
        let mut users = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 8 || f[0] != "user" {
                return Err(DeploymentError::Parse {
                    line: n + 1,
                    msg: format!("expected 'user' record with 8 fields, got {:?}", line),
                });
            }
            let parse = |s: &str, what: &str| -> Result<f64, DeploymentError> {
                s.parse().map_err(|_| DeploymentError::Parse {
                    line: n + 1,
                    msg: format!("bad {what}: {s}"),
                })
            };
            let kind = match f[2] {
                "gue-outdoor" => UserKind::GueOutdoor,
                "gue-indoor" => UserKind::GueIndoor,
                "uav" => UserKind::Uav,
                other => {
                    return Err(DeploymentError::Parse {
                        line: n + 1,
                        msg: format!("unknown kind {other}"),
                    })
                }
            };
            let floor = parse(f[6], "floor")?;
            let depth = parse(f[7], "o2i depth")?;
            users.push(User {
                position: Vec2::new(parse(f[3], "x")?, parse(f[4], "y")?),
                height_m: parse(f[5], "height")?,
                kind,
                floor: if floor < 0.0 { None } else { Some(floor as u8) },
                o2i_depth_m: if depth < 0.0 { None } else { Some(depth) },
                serving_bs: None,
            });
        }
        Ok(UserDrop { users })
    }
}

/// Sample a point uniformly on the wrap torus, canonicalized to the image
/// closest to the origin.
fn sample_position(layout: &NetworkLayout, rng: &mut ChaCha8Rng) -> Vec2 {
    let [t1, t2] = layout.wrap_basis;
    let p = t1 * rng.gen::<f64>() + t2 * rng.gen::<f64>();
    let mut best = p;
    let mut best_sq = p.norm_sq();
    for i in -1..=1i64 {
        for j in -1..=1i64 {
            let cand = p + t1 * i as f64 + t2 * j as f64;
            let d = cand.norm_sq();
            if d < best_sq {
                best_sq = d;
                best = cand;
            }
        }
    }
    best
}

/// Drop users uniformly over the wrapped coverage area.
///
/// The total count is Poisson with mean `density_per_sector * n_bs` (the
/// per-sector load is a rate, not a quota). Kinds and heights follow the
/// configured mix: `uav_ratio` of all users are UAVs, the remaining GUEs are
/// 80% indoor with a per-user building of 4..=8 floors and a uniform floor.
pub fn drop_users(
    layout: &NetworkLayout,
    density_per_sector: f64,
    uav_ratio: f64,
    indoor_fraction: f64,
    uav_height: UavHeightPolicy,
    rng: &mut ChaCha8Rng,
) -> UserDrop {
    assert!(density_per_sector > 0.0, "density must be positive");
    assert!((0.0..=1.0).contains(&uav_ratio), "uav_ratio must be in [0,1]");

    let mean = density_per_sector * layout.n_bs() as f64;
    let n = Poisson::new(mean).expect("valid mean").sample(rng) as usize;

    let mut users = Vec::with_capacity(n);
    for _ in 0..n {
        let position = sample_position(layout, rng);
        let is_uav = rng.gen::<f64>() < uav_ratio;
        let (kind, height_m, floor, o2i_depth_m) = if is_uav {
            let h = match uav_height {
                UavHeightPolicy::Fixed(h) => h,
                UavHeightPolicy::Uniform => rng.gen_range(GROUND_USER_HEIGHT_M..=300.0),
            };
            (UserKind::Uav, h, None, None)
        } else if rng.gen::<f64>() < indoor_fraction {
            let floors = rng.gen_range(4..=8u8);
            let floor = rng.gen_range(1..=floors);
            let h = GROUND_USER_HEIGHT_M + FLOOR_HEIGHT_M * (floor - 1) as f64;
            let depth = rng.gen_range(0.0..MAX_O2I_DEPTH_M);
            (UserKind::GueIndoor, h, Some(floor), Some(depth))
        } else {
            (UserKind::GueOutdoor, GROUND_USER_HEIGHT_M, None, None)
        };
        users.push(User {
            position,
            height_m,
            kind,
            floor,
            o2i_depth_m,
            serving_bs: None,
        });
    }
    UserDrop { users }
}

/// Convenience: the drop stream for `(master_seed, drop_index)`.
pub fn drop_stream(master_seed: u64, drop_index: u64) -> ChaCha8Rng {
    stream(master_seed, StreamKind::Drop, &[drop_index])
}
