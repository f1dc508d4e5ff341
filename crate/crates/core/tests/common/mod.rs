//! Shared helpers for the integration tests: seeded draws and an independent
//! quadrature evaluation of the conditional distribution function.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rebias_core::{DiscretePrior, TaskSummary};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random discrete prior with 1..=max_atoms distinct atoms in `[lo, hi]`.
pub fn random_discrete(rng: &mut impl Rng, max_atoms: usize, lo: f64, hi: f64) -> DiscretePrior {
    let k = rng.gen_range(1..=max_atoms);
    let atoms: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..hi)).collect();
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    DiscretePrior::from_unnormalized(atoms, weights).unwrap()
}

pub fn random_task(rng: &mut impl Rng, id: usize, max_abs_rho: f64) -> TaskSummary {
    let sigma = rng.gen_range(0.5..2.0);
    let tau = rng.gen_range(0.5..2.0);
    let rho = rng.gen_range(-max_abs_rho..max_abs_rho);
    TaskSummary::new(
        format!("t{id}"),
        rng.gen_range(-3.0..3.0),
        rng.gen_range(-3.0..3.0),
        sigma,
        tau,
        rho,
    )
    .unwrap()
}

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]` to absolute `tol`.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth - 1) + rec(f, m, b, 0.5 * tol, depth - 1)
    }
    rec(f, a, b, tol, 40)
}

/// Conditional CDF of `theta_db_hat − theta` given `b_hat = l` at each `z`
/// (sorted ascending), computed from the integral representation
///
/// `F(z | l) ∝ ∫_{−∞}^{z} exp(−u²/(2Σ11)) f_G(l + (Ω12/Ω22)u; 1/Ω22) du`,
///
/// where `Σ` is the covariance of `(theta_db_hat − theta, b_hat)` given the
/// bias and `Ω = Σ⁻¹`. Numerator and normalizer are both integrated
/// numerically on a fixed panel mesh refined adaptively.
pub fn quadrature_cdf(prior: &DiscretePrior, task: &TaskSummary, zs: &[f64]) -> Vec<f64> {
    let (s, t, r) = (task.sigma, task.tau, task.rho);
    let s11 = s * s + t * t - 2.0 * r * s * t;
    let s12 = r * s * t - t * t;
    let s22 = t * t;
    let det = s11 * s22 - s12 * s12;
    let o12 = -s12 / det;
    let o22 = s11 / det;
    let shift = o12 / o22;
    let l = task.b_hat;

    let term = |u: f64, b: f64, w: f64| {
        let d = l + shift * u - b;
        w.ln() - 0.5 * o22 * d * d
    };
    let log_g = |u: f64| -> f64 {
        let m = prior
            .iter()
            .map(|(b, w)| term(u, b, w))
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = prior.iter().map(|(b, w)| (term(u, b, w) - m).exp()).sum();
        -0.5 * u * u / s11 + m + sum.ln()
    };

    let half = 40.0 * s11.sqrt() + 20.0;
    let (lo, hi) = (-half.max(-zs[0] + 1.0), half.max(zs[zs.len() - 1] + 1.0));
    // peak of the integrand for scaling
    let n_scan = 20_000;
    let peak = (0..=n_scan)
        .map(|i| log_g(lo + (hi - lo) * i as f64 / n_scan as f64))
        .fold(f64::NEG_INFINITY, f64::max);
    let g = |u: f64| (log_g(u) - peak).exp();

    let width = 0.05 * (s * (1.0 - r * r).sqrt()).min(1.0);
    let mut breaks: Vec<f64> = Vec::new();
    let mut x = lo;
    while x < hi {
        breaks.push(x);
        x += width;
    }
    breaks.push(hi);
    breaks.extend_from_slice(zs);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let tol = 1e-16;
    let mut cumulative = Vec::with_capacity(breaks.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in breaks.windows(2) {
        acc += integrate(&g, w[0], w[1], tol);
        cumulative.push(acc);
    }
    zs.iter()
        .map(|z| {
            let i = breaks.iter().position(|b| b == z).unwrap();
            cumulative[i] / acc
        })
        .collect()
}
