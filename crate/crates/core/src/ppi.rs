//! Prediction-powered inference: turning labeled/unlabeled prediction data
//! into `TaskSummary` pairs through the power-tuned estimator, plus the
//! classical and prediction-mean baselines.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math::{sqrt, z_two_sided};
use crate::model::{IntervalReport, Method};
use crate::task::TaskSummary;
use crate::{Error, Result};

/// Labeled pairs `(y, h(x))` and unlabeled predictions `h(x̃)` for one task.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PpiTask {
    pub id: String,
    pub labeled_y: Vec<f64>,
    pub labeled_pred: Vec<f64>,
    pub unlabeled_pred: Vec<f64>,
}

impl PpiTask {
    pub fn m(&self) -> usize {
        self.labeled_y.len()
    }

    pub fn big_m(&self) -> usize {
        self.unlabeled_pred.len()
    }

    fn check(&self) -> Result<()> {
        if self.labeled_y.len() != self.labeled_pred.len() {
            return Err(Error::LengthMismatch {
                left: self.labeled_y.len(),
                right: self.labeled_pred.len(),
            });
        }
        if self.m() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: self.m(),
            });
        }
        if self.big_m() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: self.big_m(),
            });
        }
        Ok(())
    }
}

/// Which sample supplies the predictor variance `v²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum V2Source {
    #[default]
    Labeled,
    Unlabeled,
}

/// Second moments of `(h(X), Y)` and the two sample sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PpiMoments {
    /// `Var h(X)`
    pub v2: f64,
    /// `Var Y`
    pub w2: f64,
    /// `Cov(h(X), Y)`
    pub c: f64,
    pub m: usize,
    pub big_m: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (x.len() - 1) as f64
}

/// Plug-in moments with `1/(m − 1)` normalization.
pub fn estimate_moments(task: &PpiTask, v2_source: V2Source) -> Result<PpiMoments> {
    task.check()?;
    let v2 = match v2_source {
        V2Source::Labeled => sample_cov(&task.labeled_pred, &task.labeled_pred),
        V2Source::Unlabeled => sample_cov(&task.unlabeled_pred, &task.unlabeled_pred),
    };
    Ok(PpiMoments {
        v2,
        w2: sample_cov(&task.labeled_y, &task.labeled_y),
        c: sample_cov(&task.labeled_pred, &task.labeled_y),
        m: task.m(),
        big_m: task.big_m(),
    })
}

/// Variance-optimal power-tuning weight `λ* = M/(m + M) · c/v²`.
pub fn power_tuning_lambda(mom: &PpiMoments) -> Result<f64> {
    if !(mom.v2 > 0.0) {
        return Err(Error::ZeroPredictorVariance);
    }
    let (m, big_m) = (mom.m as f64, mom.big_m as f64);
    Ok(big_m / (m + big_m) * mom.c / mom.v2)
}

/// Variance of the power-tuned estimator at weight `lambda`:
/// `w²/m + λ² v² (1/M + 1/m) − 2λc/m`.
pub fn pt_variance(mom: &PpiMoments, lambda: f64) -> f64 {
    let (m, big_m) = (mom.m as f64, mom.big_m as f64);
    mom.w2 / m + lambda * lambda * mom.v2 * (1.0 / big_m + 1.0 / m) - 2.0 * lambda * mom.c / m
}

/// Maps a PPI task onto the rebiasing model: the biased estimate is the mean
/// unlabeled prediction and `b_hat` is its difference from the power-tuned
/// estimate at weight `lambda`.
pub fn to_task_summary(task: &PpiTask, mom: &PpiMoments, lambda: f64) -> Result<TaskSummary> {
    task.check()?;
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda must be finite"));
    }
    let (m, big_m) = (mom.m as f64, mom.big_m as f64);
    let z_tilde = mean(&task.unlabeled_pred);
    let z_bar = mean(&task.labeled_pred);
    let y_bar = mean(&task.labeled_y);

    let sigma2 = mom.v2 / big_m;
    let residual = lambda * lambda * mom.v2 - 2.0 * lambda * mom.c + mom.w2;
    if !(mom.v2 > 0.0) {
        return Err(Error::ZeroPredictorVariance);
    }
    if !(residual > 0.0) {
        return Err(Error::InvalidTask {
            id: task.id.clone(),
            reason: "labeled residual variance is not positive",
        });
    }
    let one_minus = 1.0 - lambda;
    let tau2 = one_minus * one_minus * sigma2 + residual / m;
    let tau = sqrt(tau2);
    let rho = one_minus * sqrt(sigma2) / tau;
    TaskSummary::new(
        task.id.clone(),
        z_tilde,
        one_minus * z_tilde + lambda * z_bar - y_bar,
        sqrt(sigma2),
        tau,
        rho,
    )
}

/// Classical (labeled mean) and prediction-mean Wald intervals.
pub fn baseline_intervals(task: &PpiTask, alpha: f64) -> Result<(IntervalReport, IntervalReport)> {
    task.check()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)"));
    }
    let z = z_two_sided(alpha);
    let wald = |center: f64, var: f64, method| IntervalReport {
        id: task.id.clone(),
        point: center,
        lo: center - z * sqrt(var),
        hi: center + z * sqrt(var),
        alpha,
        p_value: None,
        method,
    };
    let classical = wald(
        mean(&task.labeled_y),
        sample_cov(&task.labeled_y, &task.labeled_y) / task.m() as f64,
        Method::Classical,
    );
    let pred_mean = wald(
        mean(&task.unlabeled_pred),
        sample_cov(&task.unlabeled_pred, &task.unlabeled_pred) / task.big_m() as f64,
        Method::PredMean,
    );
    Ok((classical, pred_mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn toy(y: Vec<f64>, pred: Vec<f64>, unlabeled: Vec<f64>) -> PpiTask {
        PpiTask {
            id: "t".into(),
            labeled_y: y,
            labeled_pred: pred,
            unlabeled_pred: unlabeled,
        }
    }

    fn moments(v2: f64, w2: f64, c: f64, m: usize, big_m: usize) -> PpiMoments {
        PpiMoments {
            v2,
            w2,
            c,
            m,
            big_m,
        }
    }

    #[test]
    fn moment_examples() {
        let t = toy(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0, 2.0]);
        let m = estimate_moments(&t, V2Source::Labeled).unwrap();
        assert_eq!((m.v2, m.w2, m.c), (0.5, 0.5, 0.5));

        let t = toy(vec![0.0, 1.0, 3.0], vec![2.0; 3], vec![2.0; 4]);
        let m = estimate_moments(&t, V2Source::Labeled).unwrap();
        assert_eq!((m.v2, m.c), (0.0, 0.0));

        let t = toy(vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]);
        assert_eq!(estimate_moments(&t, V2Source::Labeled).unwrap().c, -0.5);

        let t = toy(vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 2.0, 4.0]);
        assert_eq!(estimate_moments(&t, V2Source::Unlabeled).unwrap().v2, 4.0);
    }

    #[test]
    fn insufficient_data() {
        let t = toy(vec![0.0], vec![0.0], vec![0.0, 1.0]);
        assert!(matches!(
            estimate_moments(&t, V2Source::Labeled),
            Err(Error::InsufficientData { .. })
        ));
        let t = toy(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0]);
        assert!(baseline_intervals(&t, 0.05).is_err());
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(
            power_tuning_lambda(&moments(1.0, 1.0, 0.0, 5, 50)).unwrap(),
            0.0
        );
        assert_eq!(
            power_tuning_lambda(&moments(0.7, 1.0, 0.7, 20, 20)).unwrap(),
            0.5
        );
        assert!(
            (power_tuning_lambda(&moments(1.0, 1.0, 0.5, 10, 90)).unwrap() - 0.45).abs() < 1e-15
        );
        assert_eq!(
            power_tuning_lambda(&moments(0.0, 1.0, 0.0, 10, 90)),
            Err(Error::ZeroPredictorVariance)
        );
    }

    fn sample_task() -> PpiTask {
        toy(
            vec![1.0, 0.0, 2.0, 1.5, 0.5, 3.0],
            vec![1.2, 0.4, 1.7, 1.1, 0.9, 2.4],
            vec![0.8, 1.9, 1.3, 0.2, 2.2, 1.0, 1.6, 0.7],
        )
    }

    #[test]
    fn lambda_one_is_vanilla_ppi() {
        let t = sample_task();
        let mom = estimate_moments(&t, V2Source::Labeled).unwrap();
        let s = to_task_summary(&t, &mom, 1.0).unwrap();
        assert_eq!(s.rho, 0.0);
        assert!((s.b_hat - (mean(&t.labeled_pred) - mean(&t.labeled_y))).abs() < 1e-15);
        let expect_tau2 = (mom.v2 - 2.0 * mom.c + mom.w2) / mom.m as f64;
        assert!((s.tau * s.tau - expect_tau2).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_is_classical() {
        let t = sample_task();
        let mom = estimate_moments(&t, V2Source::Labeled).unwrap();
        let s = to_task_summary(&t, &mom, 0.0).unwrap();
        assert!((s.theta_db_hat() - mean(&t.labeled_y)).abs() < 1e-14);
        let expect = mom.v2 / mom.big_m as f64 + mom.w2 / mom.m as f64;
        assert!((s.tau * s.tau - expect).abs() < 1e-12);
    }

    #[test]
    fn debiased_variance_is_pt_variance() {
        let t = sample_task();
        let mom = estimate_moments(&t, V2Source::Labeled).unwrap();
        for &lambda in &[0.0, 0.3, 0.8, 1.0, 1.4] {
            let s = to_task_summary(&t, &mom, lambda).unwrap();
            assert!((s.sigma_tilde_sq() - pt_variance(&mom, lambda)).abs() < 1e-12);
            let pt =
                mean(&t.labeled_y) + lambda * (mean(&t.unlabeled_pred) - mean(&t.labeled_pred));
            assert!((s.theta_db_hat() - pt).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let t = toy(vec![1.0, 2.0], vec![3.0, 3.0], vec![3.0, 3.0]);
        let mom = estimate_moments(&t, V2Source::Labeled).unwrap();
        assert_eq!(
            to_task_summary(&t, &mom, 0.0),
            Err(Error::ZeroPredictorVariance)
        );
        // perfect predictor at λ = 1: labeled residual vanishes
        let t = toy(vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, 3.0]);
        let mom = estimate_moments(&t, V2Source::Labeled).unwrap();
        assert!(to_task_summary(&t, &mom, 1.0).is_err());
    }

    #[test]
    fn baseline_examples() {
        let t = toy(vec![0.0, 1.0, 0.0, 1.0], vec![0.0; 4], vec![2.0; 5]);
        let (classical, pred) = baseline_intervals(&t, 0.05).unwrap();
        assert_eq!(classical.point, 0.5);
        let half = 1.959_963_984_540_054 * (1.0f64 / 3.0 / 4.0).sqrt();
        assert!((classical.hi - 0.5 - half).abs() < 1e-12);
        assert!((half - 0.5658).abs() < 1e-4);
        assert_eq!(pred.width(), 0.0);

        let doubled = toy(
            [t.labeled_y.clone(), t.labeled_y.clone()].concat(),
            vec![0.0; 8],
            vec![2.0; 5],
        );
        let (c2, _) = baseline_intervals(&doubled, 0.05).unwrap();
        // sample variance 1/3 → 2/7 on doubled data
        let ratio = c2.width() / classical.width();
        assert!((ratio - ((2.0_f64 / 7.0) / 8.0 / ((1.0 / 3.0) / 4.0)).sqrt()).abs() < 1e-12);
    }
}
