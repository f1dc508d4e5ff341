use alloc::string::String;

use crate::math::sqrt;
use crate::{Error, Result};

/// One task's observed pair `(theta_b_hat, b_hat)` together with the known
/// standard deviations `sigma`, `tau` and their correlation `rho`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskSummary {
    pub id: String,
    /// Biased estimate of the target.
    pub theta_b_hat: f64,
    /// Unbiased estimate of the bias.
    pub b_hat: f64,
    /// Standard deviation of `theta_b_hat`.
    pub sigma: f64,
    /// Standard deviation of `b_hat`.
    pub tau: f64,
    /// Correlation of `theta_b_hat` and `b_hat`.
    pub rho: f64,
}

impl TaskSummary {
    pub fn new(
        id: impl Into<String>,
        theta_b_hat: f64,
        b_hat: f64,
        sigma: f64,
        tau: f64,
        rho: f64,
    ) -> Result<Self> {
        let task = Self {
            id: id.into(),
            theta_b_hat,
            b_hat,
            sigma,
            tau,
            rho,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason| {
            Err(Error::InvalidTask {
                id: self.id.clone(),
                reason,
            })
        };
        if !self.theta_b_hat.is_finite() || !self.b_hat.is_finite() {
            return fail("estimates must be finite");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return fail("sigma must be positive and finite");
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return fail("tau must be positive and finite");
        }
        if !(self.rho.abs() < 1.0) {
            return fail("rho must lie in (-1, 1)");
        }
        if !(self.sigma_tilde_sq() > 0.0) {
            return fail("debiased estimator variance must be positive");
        }
        Ok(())
    }

    /// The debiased estimate `theta_b_hat - b_hat`.
    #[inline]
    pub fn theta_db_hat(&self) -> f64 {
        self.theta_b_hat - self.b_hat
    }

    /// Variance of the debiased estimate, `σ² + τ² − 2ρστ`.
    #[inline]
    pub fn sigma_tilde_sq(&self) -> f64 {
        let (s, t) = (self.sigma, self.tau);
        // (σ − ρτ)² + τ²(1 − ρ²) keeps the sum positive under rounding
        let d = s - self.rho * t;
        d * d + t * t * (1.0 - self.rho * self.rho)
    }

    #[inline]
    pub fn sigma_tilde(&self) -> f64 {
        sqrt(self.sigma_tilde_sq())
    }

    /// Correlation of the debiased estimate and `b_hat`.
    #[inline]
    pub fn gamma(&self) -> f64 {
        (self.rho * self.sigma - self.tau) / self.sigma_tilde()
    }

    /// Regression slope `ρσ/τ − 1` of `theta_db_hat − θ` on `b_hat − b`.
    #[inline]
    pub fn slope(&self) -> f64 {
        self.rho * self.sigma / self.tau - 1.0
    }

    /// Conditional SD of `theta_b_hat` given `(b, b_hat)`, `σ√(1 − ρ²)`.
    #[inline]
    pub fn residual_sd(&self) -> f64 {
        self.sigma * sqrt(1.0 - self.rho * self.rho)
    }
}
