//! Finite Gaussian mixtures with a common spread, the conditional law of
//! `theta_db_hat − θ` given `b_hat`.

use alloc::vec::Vec;

use crate::math::{std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf};
use crate::prior::SIMPLEX_TOL;
use crate::{Error, Result};

/// Half-width of the initial quantile bracket, in spreads.
pub const BRACKET_SPREADS: f64 = 40.0;
/// Maximum number of bracket doublings before giving up.
pub const MAX_DOUBLINGS: u32 = 60;
/// Target accuracy of the quantile on the probability scale.
pub const QUANTILE_PROB_TOL: f64 = 1e-12;

/// `Σ_k π_k N(center_k, spread²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalLaw {
    centers: Vec<f64>,
    weights: Vec<f64>,
    spread: f64,
}

impl ConditionalLaw {
    pub fn new(centers: Vec<f64>, weights: Vec<f64>, spread: f64) -> Result<Self> {
        if centers.is_empty() || centers.len() != weights.len() {
            return Err(Error::InvalidArgument(
                "mixture needs matching, nonempty centers and weights",
            ));
        }
        if !(spread.is_finite() && spread > 0.0) {
            return Err(Error::InvalidArgument("mixture spread must be positive"));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("mixture centers must be finite"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument(
                "mixture weights must be nonnegative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument("mixture weights must sum to one"));
        }
        Ok(Self {
            centers,
            weights,
            spread,
        })
    }

    /// A single Gaussian.
    pub fn gaussian(center: f64, spread: f64) -> Result<Self> {
        Self::new(alloc::vec![center], alloc::vec![1.0], spread)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    pub fn mean(&self) -> f64 {
        self.components().map(|(c, w)| c * w).sum()
    }

    fn components(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.centers
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
            .filter(|&(_, w)| w > 0.0)
    }

    fn single(&self) -> Option<f64> {
        let mut it = self.components();
        match (it.next(), it.next()) {
            (Some((c, _)), None) => Some(c),
            _ => None,
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        let s = self.spread;
        let v: f64 = self
            .components()
            .map(|(c, w)| w * std_normal_cdf((z - c) / s))
            .sum();
        v.clamp(0.0, 1.0)
    }

    /// `1 − cdf(z)`, computed directly so upper-tail values keep full
    /// relative precision.
    pub fn sf(&self, z: f64) -> f64 {
        let s = self.spread;
        let v: f64 = self
            .components()
            .map(|(c, w)| w * std_normal_sf((z - c) / s))
            .sum();
        v.clamp(0.0, 1.0)
    }

    pub fn density(&self, z: f64) -> f64 {
        let s = self.spread;
        self.components()
            .map(|(c, w)| w * std_normal_pdf((z - c) / s))
            .sum::<f64>()
            / s
    }

    /// The `p`-quantile. Single Gaussians are inverted analytically; mixtures
    /// by bracketing and safeguarded Newton–bisection on the monotone CDF.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument("quantile level must lie in (0, 1)"));
        }
        if let Some(c) = self.single() {
            return Ok(c + self.spread * std_normal_quantile(p));
        }
        let (mut lo, mut hi) = self.bracket(p)?;
        // Work on whichever tail keeps precision.
        let upper = p > 0.5;
        let target = if upper { 1.0 - p } else { p };
        let resid = |z: f64| {
            if upper {
                target - self.sf(z)
            } else {
                self.cdf(z) - target
            }
        };

        let tol = QUANTILE_PROB_TOL * target;
        let mut z = 0.5 * (lo + hi);
        for _ in 0..300 {
            let r = resid(z);
            if r.abs() <= tol {
                break;
            }
            if r > 0.0 {
                hi = z;
            } else {
                lo = z;
            }
            let d = self.density(z);
            let newton = z - r / d;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next <= lo || next >= hi {
                // bracket has collapsed to adjacent floats
                break;
            }
            z = next;
        }
        Ok(z)
    }

    fn bracket(&self, p: f64) -> Result<(f64, f64)> {
        let cmin = self
            .components()
            .map(|(c, _)| c)
            .fold(f64::INFINITY, f64::min);
        let cmax = self
            .components()
            .map(|(c, _)| c)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut half = BRACKET_SPREADS * self.spread;
        for _ in 0..=MAX_DOUBLINGS {
            let (lo, hi) = (cmin - half, cmax + half);
            if self.cdf(lo) <= p && self.cdf(hi) >= p {
                return Ok((lo, hi));
            }
            half *= 2.0;
        }
        Err(Error::BracketFailure {
            doublings: MAX_DOUBLINGS,
        })
    }
}
