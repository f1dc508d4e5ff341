//! Monte Carlo coverage harness.
//!
//! Each replicate draws `n` tasks from the model with a configured true bias
//! distribution, fits the priors the requested methods need, builds every
//! interval and scores coverage, width and width-ratio. Randomness comes from
//! a counter-based stream keyed by `(seed, replicate, task, slot)`, so a
//! replicate's data does not depend on which thread produced it or in what
//! order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::fit::{fit_normal, fit_npmle, NpmleConfig};
use crate::law::ConditionalLaw;
use crate::math::{cos, ln, sqrt, z_two_sided, CompensatedSum, TWO_PI};
use crate::model::{conditional_law, Method};
use crate::prior::{DiscretePrior, Prior};
use crate::task::TaskSummary;
use crate::{Error, Result};

/// Preset moments `(σ, τ, ρ)` for the synthetic study, chosen so the
/// predicted-mean and debiased 95% intervals are 0.274 and 0.331 wide.
pub const PRESET_SIGMA: f64 = 0.0699;
pub const PRESET_TAU: f64 = 0.04737;
pub const PRESET_RHO: f64 = 0.0;
/// Preset SD of the classical estimator (95% width 0.525).
pub const PRESET_CLASSICAL_SD: f64 = 0.1339;

/// `u64` words reserved per task in the random stream.
const SLOTS_PER_TASK: u128 = 8;
const SLOT_THETA0: u128 = 0;
const SLOT_BIAS: u128 = 1;
const SLOT_NOISE_B: u128 = 2;
const SLOT_NOISE_BHAT: u128 = 3;
const SLOT_CLASSICAL: u128 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentTriple {
    pub sigma: f64,
    pub tau: f64,
    pub rho: f64,
}

impl MomentTriple {
    pub const PRESET: MomentTriple = MomentTriple {
        sigma: PRESET_SIGMA,
        tau: PRESET_TAU,
        rho: PRESET_RHO,
    };
}

/// Per-task moments: one triple shared by all tasks, or one per task.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum Moments {
    Fixed(MomentTriple),
    PerTask(Vec<MomentTriple>),
}

impl Moments {
    fn get(&self, i: usize) -> MomentTriple {
        match self {
            Moments::Fixed(m) => *m,
            Moments::PerTask(v) => v[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    /// Tasks per replicate.
    pub n: usize,
    /// Number of Monte Carlo replicates.
    #[cfg_attr(feature = "serde", serde(alias = "K", alias = "k"))]
    pub replicates: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
    pub true_prior: Prior,
    #[cfg_attr(feature = "serde", serde(default = "default_theta0_mean"))]
    pub theta0_mean: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_theta0_sd"))]
    pub theta0_sd: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_moments"))]
    pub moments: Moments,
    /// SD of the independent classical estimate; needed by `Classical`.
    #[cfg_attr(feature = "serde", serde(default = "default_classical_sd"))]
    pub classical_sd: Option<f64>,
    pub alphas: Vec<f64>,
    pub methods: Vec<Method>,
    /// Reference method for width-ratios.
    #[cfg_attr(feature = "serde", serde(default = "default_baseline"))]
    pub baseline: Method,
    #[cfg_attr(feature = "serde", serde(default))]
    pub npmle: NpmleConfig,
}

#[cfg(feature = "serde")]
fn default_theta0_mean() -> f64 {
    4.0
}
#[cfg(feature = "serde")]
fn default_theta0_sd() -> f64 {
    0.01
}
#[cfg(feature = "serde")]
fn default_moments() -> Moments {
    Moments::Fixed(MomentTriple::PRESET)
}
#[cfg(feature = "serde")]
fn default_classical_sd() -> Option<f64> {
    Some(PRESET_CLASSICAL_SD)
}
#[cfg(feature = "serde")]
fn default_baseline() -> Method {
    Method::Classical
}

impl SimConfig {
    /// The synthetic-study layout: preset moments, `θ0 ~ N(4, 0.01²)`, all
    /// six methods at `α = 0.05`.
    pub fn preset(n: usize, replicates: usize, seed: u64, true_prior: Prior) -> Self {
        Self {
            n,
            replicates,
            seed,
            true_prior,
            theta0_mean: 4.0,
            theta0_sd: 0.01,
            moments: Moments::Fixed(MomentTriple::PRESET),
            classical_sd: Some(PRESET_CLASSICAL_SD),
            alphas: alloc::vec![0.05],
            methods: Method::ALL.to_vec(),
            baseline: Method::Classical,
            npmle: NpmleConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.replicates == 0 {
            return Err(Error::InvalidArgument(
                "n and replicates must be at least 1",
            ));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidArgument(
                "alphas must be a nonempty list in (0, 1)",
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("at least one method is required"));
        }
        if !(self.theta0_mean.is_finite() && self.theta0_sd.is_finite() && self.theta0_sd >= 0.0) {
            return Err(Error::InvalidArgument(
                "theta0 mean/sd must be finite with sd >= 0",
            ));
        }
        if !matches!(
            self.baseline,
            Method::Classical | Method::PredMean | Method::Debiased
        ) {
            return Err(Error::InvalidArgument(
                "baseline must be classical, pred_mean or debiased",
            ));
        }
        let needs_classical =
            self.baseline == Method::Classical || self.methods.contains(&Method::Classical);
        match self.classical_sd {
            Some(sd) if !(sd.is_finite() && sd > 0.0) => {
                return Err(Error::InvalidArgument("classical_sd must be positive"));
            }
            None if needs_classical => {
                return Err(Error::InvalidArgument(
                    "classical_sd is required for the classical method",
                ));
            }
            _ => {}
        }
        if let Moments::PerTask(v) = &self.moments {
            if v.len() != self.n {
                return Err(Error::LengthMismatch {
                    left: v.len(),
                    right: self.n,
                });
            }
        }
        for i in 0..self.n {
            let m = self.moments.get(i);
            TaskSummary::new(format!("task{i}"), 0.0, 0.0, m.sigma, m.tau, m.rho)?;
            if matches!(self.moments, Moments::Fixed(_)) {
                break;
            }
        }
        self.npmle.validate()
    }

    fn n_cells(&self) -> usize {
        self.methods.len() * self.alphas.len()
    }
}

/// A simulated task with its true target and an independent classical
/// estimate `θ + classical_sd · ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub summary: TaskSummary,
    pub theta: f64,
    pub classical_hat: f64,
}

/// Counter-addressed standard normal and uniform draws.
struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    fn new(seed: u64, replicate: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate as u64);
        Self { rng }
    }

    fn seek(&mut self, task: usize, slot: u128) {
        // word positions count 32-bit words; a slot holds two u64 draws
        self.rng
            .set_word_pos((task as u128 * SLOTS_PER_TASK + slot) * 4);
    }

    fn unit(&mut self) -> f64 {
        // (0, 1]
        ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    fn uniform(&mut self, task: usize, slot: u128) -> f64 {
        self.seek(task, slot);
        self.unit()
    }

    fn normal(&mut self, task: usize, slot: u128) -> f64 {
        self.seek(task, slot);
        let (u1, u2) = (self.unit(), self.unit());
        sqrt(-2.0 * ln(u1)) * cos(TWO_PI * u2)
    }
}

fn draw_bias(prior: &Prior, stream: &mut Stream, task: usize) -> f64 {
    match prior {
        Prior::Normal(p) => p.mu() + sqrt(p.a()) * stream.normal(task, SLOT_BIAS),
        Prior::Discrete(p) => sample_discrete(p, stream.uniform(task, SLOT_BIAS)),
    }
}

fn sample_discrete(p: &DiscretePrior, u: f64) -> f64 {
    let mut acc = 0.0;
    for (b, w) in p.iter() {
        acc += w;
        if u <= acc {
            return b;
        }
    }
    *p.atoms().last().unwrap()
}

/// Draws replicate `replicate` of the configured design.
pub fn generate_replicate(cfg: &SimConfig, replicate: usize) -> Result<Vec<SyntheticTask>> {
    cfg.validate()?;
    Ok(generate_unchecked(cfg, replicate))
}

fn generate_unchecked(cfg: &SimConfig, replicate: usize) -> Vec<SyntheticTask> {
    let mut stream = Stream::new(cfg.seed, replicate);
    let classical_sd = cfg.classical_sd.unwrap_or(0.0);
    (0..cfg.n)
        .map(|i| {
            let m = cfg.moments.get(i);
            let theta0 = cfg.theta0_mean + cfg.theta0_sd * stream.normal(i, SLOT_THETA0);
            let b = draw_bias(&cfg.true_prior, &mut stream, i);
            let theta = theta0 - b;
            let e1 = stream.normal(i, SLOT_NOISE_B);
            let e2 = stream.normal(i, SLOT_NOISE_BHAT);
            let theta_b_hat = theta + b + m.sigma * e1;
            let b_hat = b + m.tau * (m.rho * e1 + sqrt(1.0 - m.rho * m.rho) * e2);
            let classical_hat = theta + classical_sd * stream.normal(i, SLOT_CLASSICAL);
            SyntheticTask {
                summary: TaskSummary {
                    id: format!("task{i}"),
                    theta_b_hat,
                    b_hat,
                    sigma: m.sigma,
                    tau: m.tau,
                    rho: m.rho,
                },
                theta,
                classical_hat,
            }
        })
        .collect()
}

/// Replicate-level means for one `(method, alpha)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub coverage: f64,
    pub width: f64,
    pub width_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    /// One entry per `(method, alpha)` in config order (methods outer);
    /// `None` when the method's prior fit failed in this replicate.
    pub cells: Vec<Option<CellStats>>,
    /// Methods whose fit failed, with the reason.
    pub failures: Vec<(Method, String)>,
}

enum Source {
    Wald(fn(&SyntheticTask, &SimConfig) -> (f64, f64)),
    Prior(Prior),
    Failed,
}

fn classical_wald(t: &SyntheticTask, cfg: &SimConfig) -> (f64, f64) {
    (t.classical_hat, cfg.classical_sd.unwrap_or(f64::NAN))
}

fn biased_wald(t: &SyntheticTask, _: &SimConfig) -> (f64, f64) {
    (t.summary.theta_b_hat, t.summary.sigma)
}

fn debiased_wald(t: &SyntheticTask, _: &SimConfig) -> (f64, f64) {
    (t.summary.theta_db_hat(), t.summary.sigma_tilde())
}

fn baseline_sd(t: &SyntheticTask, cfg: &SimConfig) -> f64 {
    match cfg.baseline {
        Method::Classical => classical_wald(t, cfg).1,
        Method::PredMean => biased_wald(t, cfg).1,
        _ => debiased_wald(t, cfg).1,
    }
}

fn equal_tailed(law: &ConditionalLaw, db: f64, alpha: f64) -> Result<(f64, f64)> {
    let q_hi = law.quantile(1.0 - 0.5 * alpha)?;
    let q_lo = law.quantile(0.5 * alpha)?;
    Ok((db - q_hi, db - q_lo))
}

/// Runs one replicate: generate, fit, build intervals and score them.
pub fn run_replicate(cfg: &SimConfig, replicate: usize) -> Result<ReplicateOutcome> {
    cfg.validate()?;
    let tasks = generate_unchecked(cfg, replicate);
    let b_hats: Vec<f64> = tasks.iter().map(|t| t.summary.b_hat).collect();
    let taus: Vec<f64> = tasks.iter().map(|t| t.summary.tau).collect();

    let mut failures = Vec::new();
    let sources: Vec<Source> = cfg
        .methods
        .iter()
        .map(|&m| match m {
            Method::Classical => Source::Wald(classical_wald),
            Method::PredMean => Source::Wald(biased_wald),
            Method::Debiased => Source::Wald(debiased_wald),
            Method::Oracle => Source::Prior(cfg.true_prior.clone()),
            Method::RbNormal => match fit_normal(&b_hats, &taus) {
                Ok(fit) => Source::Prior(Prior::Normal(fit.prior)),
                Err(e) => {
                    failures.push((m, format!("{e}")));
                    Source::Failed
                }
            },
            Method::RbNpmle => {
                match fit_npmle(&b_hats, &taus, &cfg.npmle).and_then(|f| f.require_converged()) {
                    Ok(fit) => Source::Prior(Prior::Discrete(fit.prior)),
                    Err(e) => {
                        failures.push((m, format!("{e}")));
                        Source::Failed
                    }
                }
            }
        })
        .collect();

    let na = cfg.alphas.len();
    let z: Vec<f64> = cfg.alphas.iter().map(|&a| z_two_sided(a)).collect();
    let mut covered = alloc::vec![0usize; cfg.n_cells()];
    let mut width = alloc::vec![CompensatedSum::new(); cfg.n_cells()];
    let mut ratio = alloc::vec![CompensatedSum::new(); cfg.n_cells()];

    for t in &tasks {
        let base = baseline_sd(t, cfg);
        for (mi, source) in sources.iter().enumerate() {
            let law = match source {
                Source::Prior(p) => Some(conditional_law(p, &t.summary)?),
                _ => None,
            };
            for (ai, &alpha) in cfg.alphas.iter().enumerate() {
                let (lo, hi) = match (source, &law) {
                    (Source::Wald(f), _) => {
                        let (center, sd) = f(t, cfg);
                        (center - z[ai] * sd, center + z[ai] * sd)
                    }
                    (Source::Prior(_), Some(law)) => {
                        equal_tailed(law, t.summary.theta_db_hat(), alpha)?
                    }
                    _ => continue,
                };
                let cell = mi * na + ai;
                if lo <= t.theta && t.theta <= hi {
                    covered[cell] += 1;
                }
                width[cell].add(hi - lo);
                ratio[cell].add((hi - lo) / (2.0 * z[ai] * base));
            }
        }
    }

    let n = cfg.n as f64;
    let cells = (0..cfg.n_cells())
        .map(|cell| match sources[cell / na] {
            Source::Failed => None,
            _ => Some(CellStats {
                coverage: covered[cell] as f64 / n,
                width: width[cell].value() / n,
                width_ratio: ratio[cell].value() / n,
            }),
        })
        .collect();
    Ok(ReplicateOutcome {
        replicate,
        cells,
        failures,
    })
}

/// Monte Carlo summary for one `(method, alpha)` cell. Standard errors are
/// the SD of replicate means over `√K`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimCell {
    pub method: Method,
    pub alpha: f64,
    pub coverage: f64,
    pub coverage_se: f64,
    pub width: f64,
    pub width_se: f64,
    pub width_ratio: f64,
    pub width_ratio_se: f64,
    /// Replicates that contributed.
    pub replicates: usize,
    /// Replicates where the method's prior fit failed.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimResult {
    pub cells: Vec<SimCell>,
    pub replicates: usize,
    /// Replicates with at least one failed fit.
    pub failed_replicates: usize,
}

impl SimResult {
    pub fn cell(&self, method: Method, alpha: f64) -> Option<&SimCell> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.alpha == alpha)
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut acc = CompensatedSum::new();
    acc.extend(xs.iter().copied());
    let mean = acc.value() / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let mut ss = CompensatedSum::new();
    ss.extend(xs.iter().map(|x| (x - mean) * (x - mean)));
    let sd = sqrt(ss.value() / (k - 1) as f64);
    (mean, sd / sqrt(k as f64))
}

/// Combines replicate outcomes. The result depends only on the multiset of
/// outcomes keyed by replicate index, not on their order.
pub fn aggregate(cfg: &SimConfig, outcomes: &[ReplicateOutcome]) -> SimResult {
    let mut sorted: Vec<&ReplicateOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.replicate);
    let na = cfg.alphas.len();
    let mut cells = Vec::with_capacity(cfg.n_cells());
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for (ai, &alpha) in cfg.alphas.iter().enumerate() {
            let idx = mi * na + ai;
            let stats: Vec<CellStats> = sorted.iter().filter_map(|o| o.cells[idx]).collect();
            let pick =
                |f: fn(&CellStats) -> f64| mean_and_se(&stats.iter().map(f).collect::<Vec<_>>());
            let (coverage, coverage_se) = pick(|s| s.coverage);
            let (width, width_se) = pick(|s| s.width);
            let (width_ratio, width_ratio_se) = pick(|s| s.width_ratio);
            cells.push(SimCell {
                method,
                alpha,
                coverage,
                coverage_se,
                width,
                width_se,
                width_ratio,
                width_ratio_se,
                replicates: stats.len(),
                failed: sorted.len() - stats.len(),
            });
        }
    }
    SimResult {
        cells,
        replicates: sorted.len(),
        failed_replicates: sorted.iter().filter(|o| !o.failures.is_empty()).count(),
    }
}

/// Runs every replicate sequentially and aggregates.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    let outcomes = (0..cfg.replicates)
        .map(|r| run_replicate(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(cfg, &outcomes))
}
