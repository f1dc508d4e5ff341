mod common;

use proptest::prelude::*;
use rebias_core::fdr::bh_reject;
use rebias_core::gwas::{convert, to_record, GwasRecord};
use rebias_core::math::z_two_sided;
use rebias_core::ppi::{power_tuning_lambda, pt_variance, PpiMoments};
use rebias_core::*;

fn task_strategy() -> impl Strategy<Value = TaskSummary> {
    (
        -5.0..5.0f64,
        -5.0..5.0f64,
        0.1..3.0f64,
        0.1..3.0f64,
        -0.95..0.95f64,
    )
        .prop_map(|(tb, b, s, t, r)| TaskSummary::new("p", tb, b, s, t, r).unwrap())
}

fn discrete_strategy() -> impl Strategy<Value = DiscretePrior> {
    prop::collection::vec((-4.0..4.0f64, 0.01..1.0f64), 1..6).prop_map(|pairs| {
        let (a, w) = pairs.into_iter().unzip();
        DiscretePrior::from_unnormalized(a, w).unwrap()
    })
}

fn prior_strategy() -> impl Strategy<Value = Prior> {
    prop_oneof![
        discrete_strategy().prop_map(Prior::Discrete),
        (-2.0..2.0f64, 0.0..4.0f64).prop_map(|(mu, a)| Prior::normal(mu, a).unwrap()),
    ]
}

/// Equally spaced discretization of `N(mu, a)` on `±10` SDs.
fn discretize(mu: f64, a: f64, atoms: usize) -> Prior {
    let sd = a.sqrt();
    let step = 20.0 * sd / (atoms - 1) as f64;
    let xs: Vec<f64> = (0..atoms)
        .map(|k| mu - 10.0 * sd + step * k as f64)
        .collect();
    let ws: Vec<f64> = xs
        .iter()
        .map(|x| (-0.5 * ((x - mu) / sd).powi(2)).exp())
        .collect();
    Prior::Discrete(DiscretePrior::from_unnormalized(xs, ws).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn quantile_inverts_cdf(prior in prior_strategy(), task in task_strategy(), p in 0.001..0.999f64) {
        let law = conditional_law(&prior, &task).unwrap();
        let z = law.quantile(p).unwrap();
        prop_assert!((law.cdf(z) - p).abs() <= 1e-8);
    }

    #[test]
    fn cdf_is_monotone_with_limits(prior in prior_strategy(), task in task_strategy(), a in -20.0..20.0f64, d in 0.0..5.0f64) {
        let law = conditional_law(&prior, &task).unwrap();
        prop_assert!(law.cdf(a) <= law.cdf(a + d));
        let hi = law.centers().iter().cloned().fold(f64::MIN, f64::max) + 40.0 * law.spread();
        let lo = law.centers().iter().cloned().fold(f64::MAX, f64::min) - 40.0 * law.spread();
        prop_assert!((law.cdf(hi) - 1.0).abs() < 1e-12);
        prop_assert!(law.cdf(lo) < 1e-12);
    }

    #[test]
    fn posterior_weights_on_simplex(prior in discrete_strategy(), task in task_strategy()) {
        let w = posterior_weights(&prior, &task).unwrap();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interval_pvalue_duality(prior in prior_strategy(), task in task_strategy(), alpha in 0.01..0.5f64, t in -1.0..2.0f64) {
        let iv = rebias_interval(&prior, &task, alpha).unwrap();
        let theta0 = iv.lo + t * iv.width();
        prop_assume!((theta0 - iv.lo).abs() > 1e-6 && (theta0 - iv.hi).abs() > 1e-6);
        let p = rebias_pvalue(&prior, &task, theta0).unwrap();
        prop_assert_eq!(iv.contains(theta0), p >= alpha);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(iv.lo <= iv.hi);
    }

    #[test]
    fn normal_prior_matches_discretization(
        mu in -1.0..1.0f64, a in 0.05..3.0f64, task in task_strategy(), alpha in 0.02..0.3f64,
    ) {
        let exact = Prior::normal(mu, a).unwrap();
        let grid = discretize(mu, a, 2001);
        let (ie, ig) = (rebias_interval(&exact, &task, alpha).unwrap(), rebias_interval(&grid, &task, alpha).unwrap());
        prop_assert!((ie.lo - ig.lo).abs() < 1e-4 && (ie.hi - ig.hi).abs() < 1e-4);
        prop_assert!((ie.point - ig.point).abs() < 1e-4);
        let theta0 = task.theta_db_hat() + 0.7;
        let (pe, pg) = (rebias_pvalue(&exact, &task, theta0).unwrap(), rebias_pvalue(&grid, &task, theta0).unwrap());
        prop_assert!((pe - pg).abs() < 1e-4);
        let (me, mg) = (posterior_mean(&exact, &task).unwrap(), posterior_mean(&grid, &task).unwrap());
        prop_assert!((me - mg).abs() < 1e-4);
    }

    #[test]
    fn normal_width_is_monotone_and_bounded(
        s in 0.1..3.0f64, t in 0.1..3.0f64, a1 in 0.0..5.0f64, da in 0.0..5.0f64, alpha in 0.01..0.5f64,
    ) {
        let task = TaskSummary::new("w", 0.3, -0.2, s, t, 0.0).unwrap();
        let w = |a: f64| rebias_interval(&Prior::normal(0.1, a).unwrap(), &task, alpha).unwrap().width();
        let z = z_two_sided(alpha);
        let (w1, w2) = (w(a1), w(a1 + da));
        prop_assert!(w1 <= w2 + 1e-12);
        prop_assert!(w1 >= 2.0 * z * s - 1e-12);
        prop_assert!(w2 <= 2.0 * z * (s * s + t * t).sqrt() + 1e-12);
    }

    #[test]
    fn rebiased_width_never_exceeds_debiased_at_zero_rho(
        mu in -2.0..2.0f64, a in 0.0..4.0f64, task in task_strategy(), alpha in 0.01..0.5f64,
    ) {
        let task = TaskSummary { rho: 0.0, ..task };
        let prior = Prior::normal(mu, a).unwrap();
        let rb = rebias_interval(&prior, &task, alpha).unwrap();
        let db = debiased_interval(&task, alpha).unwrap();
        prop_assert!(rb.width() <= db.width() + 1e-12);
    }

    #[test]
    fn fitters_are_permutation_invariant(
        data in prop::collection::vec((-3.0..3.0f64, 0.2..2.0f64), 3..60), rot in 0usize..60,
    ) {
        let (b, t): (Vec<f64>, Vec<f64>) = data.iter().cloned().unzip();
        let k = rot % b.len();
        let (mut b2, mut t2) = (b.clone(), t.clone());
        b2.rotate_left(k);
        t2.rotate_left(k);
        b2.reverse();
        t2.reverse();
        let (n1, n2) = (fit_normal(&b, &t).unwrap(), fit_normal(&b2, &t2).unwrap());
        prop_assert!((n1.prior.mu() - n2.prior.mu()).abs() < 1e-8);
        prop_assert!((n1.prior.a() - n2.prior.a()).abs() < 1e-8);
        let cfg = NpmleConfig::default();
        let (p1, p2) = (fit_npmle(&b, &t, &cfg).unwrap(), fit_npmle(&b2, &t2, &cfg).unwrap());
        prop_assert!((p1.diagnostics.final_loglik - p2.diagnostics.final_loglik).abs() < 1e-8);
        let grid: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let c1 = implied_marginal_curve(&Prior::Discrete(p1.prior), &t, &grid).unwrap();
        let c2 = implied_marginal_curve(&Prior::Discrete(p2.prior), &t, &grid).unwrap();
        for (x, y) in c1.iter().zip(&c2) {
            prop_assert!((x.1 - y.1).abs() < 1e-4);
        }
    }

    #[test]
    fn normal_fit_is_scale_equivariant(
        data in prop::collection::vec((-3.0..3.0f64, 0.2..2.0f64), 3..60), c in prop_oneof![1e-6..1e-3f64, 0.1..10.0f64],
    ) {
        let (b, t): (Vec<f64>, Vec<f64>) = data.iter().cloned().unzip();
        let bs: Vec<f64> = b.iter().map(|x| c * x).collect();
        let ts: Vec<f64> = t.iter().map(|x| c * x).collect();
        let (f1, f2) = (fit_normal(&b, &t).unwrap(), fit_normal(&bs, &ts).unwrap());
        prop_assert!((c * f1.prior.mu() - f2.prior.mu()).abs() <= 1e-7 * c);
        prop_assert!((c * c * f1.prior.a() - f2.prior.a()).abs() <= 1e-6 * c * c * f1.prior.a().max(1.0));
    }

    #[test]
    fn gwas_conversion_round_trips(
        st in 0.01..5.0f64, t in 0.01..5.0f64, g in -0.95..0.95f64, theta in -3.0..3.0f64, b in -3.0..3.0f64,
    ) {
        let rec = GwasRecord { snp_id: "s".into(), theta_ub_hat: theta, b_hat: b, sigma_tilde: st, tau: t, gamma: g };
        let task = convert(&rec).unwrap();
        prop_assert!(task.rho.abs() < 1.0);
        let back = to_record(&task).unwrap();
        prop_assert!((back.sigma_tilde - st).abs() <= 1e-10 * st.max(1.0));
        prop_assert!((back.gamma - g).abs() <= 1e-10);
        prop_assert!((back.theta_ub_hat - theta).abs() <= 1e-10);
    }

    #[test]
    fn power_tuning_minimizes_variance(
        v2 in 0.001..10.0f64, w2 in 0.001..10.0f64, r in -1.0..1.0f64, m in 2usize..1000, big_m in 2usize..100_000, other in -3.0..3.0f64,
    ) {
        let mom = PpiMoments { v2, w2, c: r * (v2 * w2).sqrt(), m, big_m };
        let lam = power_tuning_lambda(&mom).unwrap();
        let best = pt_variance(&mom, lam);
        for l in [0.0, 1.0, other] {
            prop_assert!(best <= pt_variance(&mom, l) + 1e-12);
        }
    }

    #[test]
    fn bh_rejections_grow_with_level(ps in prop::collection::vec(0.0..1.0f64, 0..80), q1 in 0.001..0.5f64, dq in 0.0..0.4f64) {
        let small = bh_reject(&ps, q1).unwrap();
        let large = bh_reject(&ps, q1 + dq).unwrap();
        prop_assert!(small.iter().all(|i| large.contains(i)));
        let cutoff = small.iter().map(|&i| ps[i]).fold(0.0, f64::max);
        prop_assert!(ps.iter().enumerate().all(|(i, &p)| p >= cutoff || small.contains(&i)));
    }
}
