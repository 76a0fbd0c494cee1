//! Report the fraction of (BS, user) links above interference-floor
//! thresholds for the default deployment.

use uavcell::config::SimConfig;
use uavcell::deployment::{build_layout, drop_stream, drop_users, UserKind};
use uavcell::harness::LinkField;
use uavcell::mac::Mode;
use uavcell::phy::noise_power_mw;

fn main() {
    let cfg = SimConfig::default();
    let layout = build_layout(500.0, 3, 25.0).unwrap();
    let array = cfg.antenna.array(Mode::MultiUser);
    let mut rng = drop_stream(1, 0);
    let drop = drop_users(
        &layout,
        15.0,
        0.071,
        0.8,
        uavcell::deployment::UavHeightPolicy::Uniform,
        &mut rng,
    );
    let field = LinkField::build(&cfg, &layout, &drop, &array, 0).unwrap();

    let noise = noise_power_mw(-174.0, 9.0, 180_000.0);
    let p_b = cfg.bs_power_per_prb_mw();
    println!("noise {noise:.3e} mW, p_b {p_b:.1} mW");

    for eps in [1e-2, 1e-3, 1e-4] {
        let thr = eps * noise / p_b;
        let mut kept = 0usize;
        let mut total = 0usize;
        let mut kept_by_kind = [0usize; 3];
        let mut tot_by_kind = [0usize; 3];
        for bs in 0..field.n_bs {
            for (u, user) in drop.users.iter().enumerate() {
                let k = match user.kind {
                    UserKind::GueIndoor => 0,
                    UserKind::GueOutdoor => 1,
                    UserKind::Uav => 2,
                };
                total += 1;
                tot_by_kind[k] += 1;
                if field.slow_gain[field.bs_idx(bs, u)] > thr {
                    kept += 1;
                    kept_by_kind[k] += 1;
                }
            }
        }
        println!(
            "eps {eps:.0e} (thr {:.1} dB): kept {:.1}% (indoor {:.1}%, outdoor {:.1}%, uav {:.1}%)",
            10.0 * thr.log10(),
            100.0 * kept as f64 / total as f64,
            100.0 * kept_by_kind[0] as f64 / tot_by_kind[0] as f64,
            100.0 * kept_by_kind[1] as f64 / tot_by_kind[1] as f64,
            100.0 * kept_by_kind[2] as f64 / tot_by_kind[2] as f64,
        );
    }
}
