//! Micro-benchmarks for the Monte Carlo hot paths.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::time::Instant;

fn main() {
    // Normal draw throughput.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 20_000_000usize;
    let t = Instant::now();
    let mut acc = 0f64;
    for _ in 0..n {
        let x: f64 = rng.sample(StandardNormal);
        acc += x;
    }
    let dt = t.elapsed().as_secs_f64();
    println!("normals: {:.1} ns/draw ({acc:.3})", dt / n as f64 * 1e9);

    // Stream init throughput.
    let t = Instant::now();
    let m = 1_000_000usize;
    let mut acc2 = 0u64;
    for i in 0..m {
        let mut r = ChaCha8Rng::seed_from_u64(i as u64);
        acc2 ^= r.gen::<u64>();
    }
    let dt = t.elapsed().as_secs_f64();
    println!("stream init+1: {:.1} ns ({acc2})", dt / m as f64 * 1e9);

    // f32 Hermitian dot, 128 long, 8 columns.
    let na = 128;
    let h_re: Vec<f32> = (0..na).map(|i| (i as f32).sin()).collect();
    let h_im: Vec<f32> = (0..na).map(|i| (i as f32).cos()).collect();
    let w_re: Vec<f32> = (0..na * 8).map(|i| (i as f32 * 0.1).sin()).collect();
    let w_im: Vec<f32> = (0..na * 8).map(|i| (i as f32 * 0.1).cos()).collect();
    let reps = 2_000_000usize;
    let t = Instant::now();
    let mut acc3 = 0f32;
    for _ in 0..reps {
        for c in 0..8 {
            let (re, im) = cdot(
                &h_re,
                &h_im,
                &w_re[c * na..(c + 1) * na],
                &w_im[c * na..(c + 1) * na],
            );
            acc3 += re + im;
        }
    }
    let dt = t.elapsed().as_secs_f64();
    let flops = reps as f64 * 8.0 * na as f64 * 8.0;
    println!(
        "cdot8: {:.1} ns per (user,bs) pair, {:.2} GFLOP/s ({acc3})",
        dt / reps as f64 * 1e9,
        flops / dt / 1e9
    );


    // f32 normal draw throughput.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = Instant::now();
    let mut acc4 = 0f32;
    for _ in 0..n {
        let x: f32 = rng.sample(StandardNormal);
        acc4 += x;
    }
    let dt = t.elapsed().as_secs_f64();
    println!("normals f32: {:.1} ns/draw ({acc4:.3})", dt / n as f64 * 1e9);

    // Full link draw cost estimate: 128 ports of (2 normals + complex arith).
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let links = 40_000usize;
    let mut out = vec![0f32; 256];
    let t = Instant::now();
    for _ in 0..links {
        let mut steer = (0.3f64, 0.7f64);
        for p in 0..128 {
            let gr: f64 = rng.sample(StandardNormal);
            let gi: f64 = rng.sample(StandardNormal);
            let h_re = (steer.0 + gr * 0.5) * 0.25;
            let h_im = (steer.1 + gi * 0.5) * 0.25;
            out[2 * (p % 128)] = h_re as f32;
            out[2 * (p % 128) + 1] = h_im as f32;
            if p % 2 == 1 {
                steer = (steer.0 * 0.99 - steer.1 * 0.01, steer.0 * 0.01 + steer.1 * 0.99);
            }
        }
    }
    let dt = t.elapsed().as_secs_f64();
    println!("link draw: {:.2} us/link ({})", dt / links as f64 * 1e6, out[3]);
    // sincos vs complex-multiply phase accumulation.
    let t = Instant::now();
    let mut s = 0f64;
    for i in 0..20_000_000usize {
        let (a, b) = (i as f64 * 1e-7).sin_cos();
        s += a + b;
    }
    let dt = t.elapsed().as_secs_f64();
    println!("sincos: {:.1} ns ({s:.3})", dt / 20_000_000f64 * 1e9);
}

#[inline]
fn cdot(h_re: &[f32], h_im: &[f32], w_re: &[f32], w_im: &[f32]) -> (f32, f32) {
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
    (re, im)
}

#[allow(dead_code)]
fn extra() {}
