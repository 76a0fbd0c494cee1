//! Rate aggregation: per-kind / per-height-bin CDFs, reliability at the
//! C&C target rate, and the output files.

use crate::deployment::{UavHeightPolicy, UserKind};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// One rate sample (one user in one drop).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSample {
    pub drop: u64,
    pub user: usize,
    pub kind: UserKind,
    pub height_m: f64,
    pub rate_bps: f64,
}

/// Height bin [lo, hi), or [lo, hi] when `closed` (the topmost bin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightBin {
    pub lo_m: f64,
    pub hi_m: f64,
    pub closed: bool,
}

impl HeightBin {
    pub fn label(&self) -> String {
        if self.lo_m == self.hi_m {
            format!("{}", self.lo_m)
        } else {
            format!("{}-{}", self.lo_m, self.hi_m)
        }
    }

    fn contains(&self, h: f64) -> bool {
        if self.lo_m == self.hi_m {
            (h - self.lo_m).abs() < 1e-9
        } else if self.closed {
            h >= self.lo_m && h <= self.hi_m
        } else {
            h >= self.lo_m && h < self.hi_m
        }
    }
}

/// Default UAV height bins for the uniform policy; a fixed policy collapses
/// to a single degenerate bin.
pub fn uav_height_bins(policy: UavHeightPolicy) -> Vec<HeightBin> {
    match policy {
        UavHeightPolicy::Fixed(h) => vec![HeightBin {
            lo_m: h,
            hi_m: h,
            closed: true,
        }],
        UavHeightPolicy::Uniform => {
            let edges = [1.5, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0];
            edges
                .windows(2)
                .enumerate()
                .map(|(i, w)| HeightBin {
                    lo_m: w[0],
                    hi_m: w[1],
                    closed: i == edges.len() - 2,
                })
                .collect()
        }
    }
}

/// Sorted rate samples of one (kind, height-bin) group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCdf {
    pub kind: UserKind,
    pub bin: HeightBin,
    pub rates_sorted: Vec<f64>,
}

impl GroupCdf {
    pub fn n(&self) -> usize {
        self.rates_sorted.len()
    }

    /// Fraction of samples at or above the target rate.
    pub fn reliability(&self, target_bps: f64) -> f64 {
        if self.rates_sorted.is_empty() {
            return 0.0;
        }
        let below = self.rates_sorted.partition_point(|&r| r < target_bps);
        (self.rates_sorted.len() - below) as f64 / self.rates_sorted.len() as f64
    }

    /// Order-statistic quantile, q in [0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        assert!((0.0..=1.0).contains(&q));
        if self.rates_sorted.is_empty() {
            return 0.0;
        }
        let idx = ((q * (self.rates_sorted.len() - 1) as f64).round() as usize)
            .min(self.rates_sorted.len() - 1);
        self.rates_sorted[idx]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn label(&self) -> String {
        match self.kind {
            UserKind::Uav => format!("{}[{}m]", self.kind.label(), self.bin.label()),
            _ => self.kind.label().to_string(),
        }
    }
}

/// Aggregated experiment result: raw samples plus per-group CDFs.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfSummary {
    pub target_rate_bps: f64,
    pub samples: Vec<RateSample>,
    pub groups: Vec<GroupCdf>,
}

impl CdfSummary {
    /// Group samples by kind and (for UAVs) height bin. Empty groups are
    /// dropped, so e.g. a run without UAVs emits no UAV sections.
    pub fn build(
        samples: Vec<RateSample>,
        uav_bins: &[HeightBin],
        target_rate_bps: f64,
    ) -> CdfSummary {
        let mut groups: Vec<GroupCdf> = Vec::new();
        for kind in [UserKind::GueIndoor, UserKind::GueOutdoor] {
            let mut rates: Vec<f64> = samples
                .iter()
                .filter(|s| s.kind == kind)
                .map(|s| s.rate_bps)
                .collect();
            if !rates.is_empty() {
                rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
                groups.push(GroupCdf {
                    kind,
                    bin: HeightBin {
                        lo_m: 0.0,
                        hi_m: 0.0,
                        closed: true,
                    },
                    rates_sorted: rates,
                });
            }
        }
        for bin in uav_bins {
            let mut rates: Vec<f64> = samples
                .iter()
                .filter(|s| s.kind == UserKind::Uav && bin.contains(s.height_m))
                .map(|s| s.rate_bps)
                .collect();
            if !rates.is_empty() {
                rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
                groups.push(GroupCdf {
                    kind: UserKind::Uav,
                    bin: *bin,
                    rates_sorted: rates,
                });
            }
        }
        CdfSummary {
            target_rate_bps,
            samples,
            groups,
        }
    }

    pub fn group(&self, kind: UserKind, bin_lo: f64) -> Option<&GroupCdf> {
        self.groups
            .iter()
            .find(|g| g.kind == kind && (g.kind != UserKind::Uav || g.bin.lo_m == bin_lo))
    }

    /// Pooled reliability over every UAV sample.
    pub fn uav_reliability_pooled(&self) -> f64 {
        let uav: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| s.kind == UserKind::Uav)
            .map(|s| s.rate_bps)
            .collect();
        if uav.is_empty() {
            return 0.0;
        }
        uav.iter().filter(|&&r| r >= self.target_rate_bps).count() as f64 / uav.len() as f64
    }

    /// Pooled GUE (indoor + outdoor) median rate.
    pub fn gue_median(&self) -> f64 {
        let mut rates: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| s.kind != UserKind::Uav)
            .map(|s| s.rate_bps)
            .collect();
        if rates.is_empty() {
            return 0.0;
        }
        rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rates[(rates.len() - 1) / 2]
    }

    pub fn rates_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 32 + 64);
        out.push_str("drop,user,kind,height_m,rate_bps\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.drop,
                s.user,
                s.kind.label(),
                s.height_m,
                s.rate_bps
            );
        }
        out
    }

    pub fn cdf_csv(&self) -> String {
        let mut out = String::from("kind,height_bin,rate_bps,cum_prob\n");
        for g in &self.groups {
            let n = g.n();
            let points = n.min(2000);
            for t in 0..points {
                // Evenly spaced order statistics, always ending at the max
                // sample with cumulative probability exactly 1.
                let idx = (t + 1) * n / points - 1;
                let cum = (idx + 1) as f64 / n as f64;
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    g.kind.label(),
                    g.bin.label(),
                    g.rates_sorted[idx],
                    cum
                );
            }
        }
        out
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "reliability of rate >= {} bps by group",
            self.target_rate_bps
        );
        let _ = writeln!(out, "group samples reliability median_bps");
        for g in &self.groups {
            let _ = writeln!(
                out,
                "{} {} {:.4} {:.0}",
                g.label(),
                g.n(),
                g.reliability(self.target_rate_bps),
                g.median()
            );
        }
        out
    }

    /// Write rates.csv, cdf.csv and summary.txt into `dir`.
    pub fn emit_outputs(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("rates.csv"), self.rates_csv())?;
        std::fs::write(dir.join("cdf.csv"), self.cdf_csv())?;
        std::fs::write(dir.join("summary.txt"), self.summary_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(kind: UserKind, h: f64, rate: f64) -> RateSample {
        RateSample {
            drop: 0,
            user: 0,
            kind,
            height_m: h,
            rate_bps: rate,
        }
    }

    #[test]
    fn reliability_counts_at_or_above_target() {
        let s = vec![
            sample(UserKind::Uav, 10.0, 50_000.0),
            sample(UserKind::Uav, 20.0, 100_000.0),
            sample(UserKind::Uav, 30.0, 200_000.0),
            sample(UserKind::Uav, 40.0, 99_999.0),
        ];
        let bins = uav_height_bins(UavHeightPolicy::Uniform);
        let cdf = CdfSummary::build(s, &bins, 100_000.0);
        let g = cdf.group(UserKind::Uav, 1.5).unwrap();
        assert_eq!(g.n(), 4);
        assert!((g.reliability(100_000.0) - 0.5).abs() < 1e-12);
        assert!((cdf.uav_reliability_pooled() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_uav_population_has_no_uav_groups() {
        let s = vec![
            sample(UserKind::GueIndoor, 4.5, 1e6),
            sample(UserKind::GueOutdoor, 1.5, 2e6),
        ];
        let bins = uav_height_bins(UavHeightPolicy::Uniform);
        let cdf = CdfSummary::build(s, &bins, 100_000.0);
        assert!(cdf.groups.iter().all(|g| g.kind != UserKind::Uav));
        assert_eq!(cdf.groups.len(), 2);
        let text = cdf.summary_text();
        assert!(!text.contains("uav"));
        assert!(text.contains("gue-indoor"));
    }

    #[test]
    fn cdf_reaches_one_at_max_sample() {
        let s: Vec<RateSample> = (0..137)
            .map(|i| sample(UserKind::GueOutdoor, 1.5, 1000.0 * i as f64))
            .collect();
        let cdf = CdfSummary::build(s, &[], 100_000.0);
        let text = cdf.cdf_csv();
        let last = text.trim_end().lines().last().unwrap();
        assert!(last.ends_with(",136000,1"), "last row: {last}");
    }

    #[test]
    fn quantiles_monotone() {
        let s: Vec<RateSample> = (0..500)
            .map(|i| sample(UserKind::GueIndoor, 4.5, (i * 37 % 499) as f64))
            .collect();
        let cdf = CdfSummary::build(s, &[], 100.0);
        let g = &cdf.groups[0];
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=20 {
            let q = g.quantile(i as f64 / 20.0);
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn fixed_policy_single_bin() {
        let bins = uav_height_bins(UavHeightPolicy::Fixed(150.0));
        assert_eq!(bins.len(), 1);
        assert!(bins[0].contains(150.0));
        assert!(!bins[0].contains(149.0));
        let uniform = uav_height_bins(UavHeightPolicy::Uniform);
        assert_eq!(uniform.len(), 6);
        assert!(uniform[5].contains(300.0));
        assert!(uniform[0].contains(1.5));
    }

    #[test]
    fn reliability_recomputable_from_rates_csv() {
        let s = vec![
            sample(UserKind::Uav, 25.0, 150_000.0),
            sample(UserKind::Uav, 75.0, 50_000.0),
            sample(UserKind::GueOutdoor, 1.5, 99_000.0),
        ];
        let bins = uav_height_bins(UavHeightPolicy::Uniform);
        let cdf = CdfSummary::build(s, &bins, 100_000.0);
        let csv = cdf.rates_csv();
        let mut uav_total = 0usize;
        let mut uav_ok = 0usize;
        for line in csv.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f[2] == "uav" {
                uav_total += 1;
                if f[4].parse::<f64>().unwrap() >= 100_000.0 {
                    uav_ok += 1;
                }
            }
        }
        let recomputed = uav_ok as f64 / uav_total as f64;
        assert!((recomputed - cdf.uav_reliability_pooled()).abs() < 1e-12);
    }
}
