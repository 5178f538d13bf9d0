use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use minimax_design::basis::{BasisContext, BasisKind, Interval, MeanFunction, Weight, DEFAULT_QUADRATURE_NODES};
use minimax_design::config::{BasisSpec, DesignSpec, MeanSpec};
use minimax_design::design::{
    build_design, f_value, level_partition, sigma2_min, solve_threshold, DesignDensity, DesignFamily, Sigma2,
};
use minimax_design::quadrature::GaussLegendre;
use minimax_design::risk::worst_case_risk;
use minimax_design::sampling::{sample_predictors, RngStream};
use minimax_design::sim::{run_experiment, run_experiment_on, SimConfig};
use minimax_design::wls::{fit_wls_with, integrated_squared_error, Dataset, Estimator, WlsFit};
use minimax_design::{best_linear_coefficients, CoefficientVector};

fn ctx(k: usize) -> BasisContext {
    BasisContext::monomial(k).unwrap()
}

fn tilted(k: usize, mean: f64, variance: f64) -> BasisContext {
    BasisContext::new(
        BasisKind::Monomial { degree: k },
        Interval::default(),
        Weight::TruncatedNormal { mean, variance },
        DEFAULT_QUADRATURE_NODES,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn residual_is_orthogonal_to_basis(
        k in 1usize..4,
        coef in prop::collection::vec(-3.0f64..3.0, 1..7),
        mean in -0.5f64..0.5,
        variance in 0.1f64..2.0,
    ) {
        for c in [ctx(k), tilted(k, mean, variance)] {
            let m = MeanFunction::polynomial(coef.clone());
            let ell = best_linear_coefficients(&m, &c);
            let gl = GaussLegendre::new(40);
            for j in 0..=k {
                let v = gl.integrate(-1.0, 1.0, |x| (m.eval(x) - ell.eval(&c, x)) * x.powi(j as i32) * c.weight_at(x));
                prop_assert!(v.abs() < 1e-10, "j={j} {v}");
            }
        }
    }

    #[test]
    fn leverage_trace_identity(k in 1usize..5, mean in -0.5f64..0.5, variance in 0.1f64..2.0) {
        for c in [ctx(k), tilted(k, mean, variance)] {
            let v = c.integrate(-1.0, 1.0, |x| c.h(x) / (4.0 * c.weight_at(x)));
            prop_assert!((v - (k + 1) as f64).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn symmetric_problems_give_even_designs(k in 1usize..4, s in 0.1f64..20.0, x in 0.0f64..1.0) {
        let c = ctx(k);
        prop_assert!((c.h(x) - c.h(-x)).abs() <= 1e-12 * c.h(x));
        let d = build_design(&c, DesignFamily::Minimax(Sigma2::Finite(s))).unwrap();
        prop_assert!((d.pdf(x) - d.pdf(-x)).abs() < 1e-9);
    }

    #[test]
    fn f_is_nondecreasing(k in 1usize..4, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let c = ctx(k);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let h = |t: f64| c.h_min() + t * (c.h_max() - c.h_min());
        prop_assert!(f_value(&c, h(lo)).unwrap() <= f_value(&c, h(hi)).unwrap() + 1e-12);
    }

    #[test]
    fn threshold_is_stationary(k in 1usize..4, s in 0.5f64..50.0) {
        let c = ctx(k);
        prop_assume!(s > sigma2_min(&c) + 1e-6);
        let h0 = solve_threshold(&c, Sigma2::Finite(s)).unwrap();
        prop_assert!((f_value(&c, h0).unwrap() + 2.0 / s).abs() < 1e-8);
    }

    #[test]
    fn phase_transition_at_critical_level(k in 1usize..4, t in 0.05f64..3.0) {
        let c = ctx(k);
        let crit = sigma2_min(&c);
        let below = build_design(&c, DesignFamily::Minimax(Sigma2::Finite(crit * t.min(0.999)))).unwrap();
        prop_assert_eq!(below.shape(), "prop-h");
        prop_assert!(below.sqrt_region().is_empty());
        let above = build_design(&c, DesignFamily::Minimax(Sigma2::Finite(crit * (1.01 + t)))).unwrap();
        prop_assert_eq!(above.shape(), "minimax");
        prop_assert!(!above.sqrt_region().is_empty());
    }

    #[test]
    fn level_sets_partition_the_support(k in 1usize..4, t in 0.0f64..1.0) {
        let c = ctx(k);
        let h0 = c.h_min() + t * (c.h_max() - c.h_min());
        let p = level_partition(&c, h0).unwrap();
        prop_assert!((p.measure_a() + p.measure_b() - 2.0).abs() < 1e-12);
        for iv in &p.b {
            prop_assert!(c.h(iv.midpoint()) > h0);
        }
    }

    #[test]
    fn minimax_beats_random_perturbations(
        k in 1usize..4,
        s in 0.5f64..10.0,
        a in prop::collection::vec(-0.15f64..0.15, 3),
    ) {
        let c = ctx(k);
        let mm = build_design(&c, DesignFamily::Minimax(Sigma2::Finite(s))).unwrap();
        let p = DesignDensity::from_fn(&c, "perturbed", 4097, |x| {
            mm.pdf(x) * (1.0 + a[0] * x + a[1] * (3.0 * x).sin() + a[2] * (5.0 * x).cos())
        }).unwrap();
        let best = worst_case_risk(&c, &mm, s).unwrap();
        prop_assert!(worst_case_risk(&c, &p, s).unwrap() >= best - 1e-8);
    }

    #[test]
    fn quantile_inverts_cdf(k in 1usize..4, s in 0.5f64..10.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let c = ctx(k);
        let d = build_design(&c, DesignFamily::Minimax(Sigma2::Finite(s))).unwrap();
        let (qu, qv) = (d.quantile(u).unwrap(), d.quantile(v).unwrap());
        prop_assert!((u <= v) == (qu <= qv) || (qu - qv).abs() < 1e-12);
        prop_assert!((d.cdf_at(qu).unwrap() - u).abs() < 1e-9);
    }

    #[test]
    fn ise_matches_quadrature(
        k in 1usize..4,
        truth in prop::collection::vec(-5.0f64..5.0, 4),
        est in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let c = ctx(k);
        let (t, e) = (&truth[..=k], &est[..=k]);
        let fit = WlsFit { beta_tilde: e.to_vec(), event_triggered: false, lambda_min_observed: 0.0, n: 1 };
        let qf = integrated_squared_error(&fit, &c, &CoefficientVector { beta: t.to_vec() });
        let gl = GaussLegendre::new(16);
        let quad = gl.integrate(-1.0, 1.0, |x| {
            let d: f64 = t.iter().zip(e).enumerate().map(|(j, (a, b))| (b - a) * x.powi(j as i32)).sum();
            0.5 * d * d
        });
        prop_assert!((qf - quad).abs() < 1e-10 * (1.0 + quad));
    }

    #[test]
    fn wls_is_equivariant(
        k in 1usize..3,
        seed in 0u64..1000,
        scale in -3.0f64..3.0,
        shift in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let c = ctx(k);
        let d = build_design(&c, DesignFamily::SqrtH).unwrap();
        let mut s = RngStream::new(seed, 0);
        let xs = sample_predictors(&d, 40, &mut s).unwrap().xs;
        let ys: Vec<f64> = xs.iter().map(|&x| x * x * x + s.next_normal()).collect();
        let lin = |x: f64| shift.iter().take(k + 1).enumerate().map(|(j, b)| b * x.powi(j as i32)).sum::<f64>();
        let ys2: Vec<f64> = xs.iter().zip(&ys).map(|(&x, &y)| scale * y + lin(x)).collect();
        let a = fit_wls_with(&Dataset { xs: xs.clone(), ys: ys.clone() }, &d, &c, Estimator::Truncated).unwrap();
        let b = fit_wls_with(&Dataset { xs: xs.clone(), ys: ys2 }, &d, &c, Estimator::Truncated).unwrap();
        prop_assume!(!a.event_triggered);
        for j in 0..=k {
            prop_assert!((b.beta_tilde[j] - (scale * a.beta_tilde[j] + shift[j])).abs() < 1e-9);
        }
        // with nQ in place of the Gram matrix only scaling carries through
        let ys3: Vec<f64> = ys.iter().map(|y| scale * y).collect();
        let a = fit_wls_with(&Dataset { xs: xs.clone(), ys }, &d, &c, Estimator::KnownQ).unwrap();
        let b = fit_wls_with(&Dataset { xs, ys: ys3 }, &d, &c, Estimator::KnownQ).unwrap();
        for j in 0..=k {
            prop_assert!((b.beta_tilde[j] - scale * a.beta_tilde[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn sim_config_round_trips(n in 2usize..500, reps in 1usize..10_000, seed: u64, coupling: bool, s in 0.1f64..9.0) {
        let c = SimConfig {
            basis: BasisSpec::monomial(1),
            mean: MeanSpec::polynomial(vec![0.0, 1.0, 3.354]),
            designs: vec![DesignSpec::new("minimax", Some(Sigma2::Finite(s))), DesignSpec::new("sqrt-h", Some(Sigma2::Infinite))],
            noise_variance: s,
            n,
            replications: reps,
            seed,
            coupling,
        };
        let back: SimConfig = toml::from_str(&c.to_toml()).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn infinite_level_is_sqrt_design() {
    for k in 1..5 {
        let c = ctx(k);
        let a = build_design(&c, DesignFamily::Minimax(Sigma2::Infinite)).unwrap();
        let b = build_design(&c, DesignFamily::SqrtH).unwrap();
        for x in c.support().grid(2001) {
            assert_abs_diff_eq!(a.pdf(x), b.pdf(x), epsilon = 1e-12);
        }
    }
}

#[test]
fn samples_follow_the_design() {
    // Kolmogorov-Smirnov at the 0.1% level
    let n = 5000;
    for (k, fam) in [(1, DesignFamily::SqrtH), (2, DesignFamily::Minimax(Sigma2::Finite(2.0))), (3, DesignFamily::PropH)] {
        let c = ctx(k);
        let d = build_design(&c, fam).unwrap();
        let mut xs = sample_predictors(&d, n, &mut RngStream::new(2024, k as u64)).unwrap().xs;
        xs.sort_by(f64::total_cmp);
        let stat = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = d.cdf_at(x).unwrap();
                (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
            })
            .fold(0.0, f64::max);
        assert!(stat < 1.95 / (n as f64).sqrt(), "K={k} {fam}: D = {stat}");
    }
}

fn table_config(reps: usize) -> SimConfig {
    SimConfig {
        basis: BasisSpec::monomial(1),
        mean: MeanSpec::polynomial(vec![0.0, 1.0, 3.354]),
        designs: vec![
            DesignSpec::new("uniform", None),
            DesignSpec::new("sqrt-h", None),
            DesignSpec::new("minimax", Some(Sigma2::Finite(1.0))),
        ],
        noise_variance: 1.0,
        n: 50,
        replications: reps,
        seed: 3,
        coupling: true,
    }
}

#[test]
fn coupling_shrinks_difference_errors() {
    let r = run_experiment(&table_config(2000)).unwrap();
    let diff = r.difference(1, 2).unwrap();
    assert!(diff.se < r.designs[1].se && diff.se < r.designs[2].se, "{}", r.to_table());
    let mut c = table_config(2000);
    c.coupling = false;
    let u = run_experiment(&c).unwrap();
    assert!(diff.se < u.difference(1, 2).unwrap().se);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let c = table_config(500);
    let one = run_experiment_on(&c, 1).unwrap();
    let many = run_experiment_on(&c, 8).unwrap();
    assert_eq!(one, many);
    let mut a = Vec::new();
    let mut b = Vec::new();
    one.write_csv(&mut a).unwrap();
    many.write_csv(&mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn event_frequency_shrinks_with_n() {
    let mut c = table_config(4000);
    c.designs = vec![DesignSpec::new("uniform", None)];
    let small = run_experiment(&c).unwrap().designs[0].event_frequency;
    assert!(small < 1e-3, "{small}");
    c.n = 10;
    let tiny = run_experiment(&c).unwrap().designs[0].event_frequency;
    c.n = 500;
    let large = run_experiment(&c).unwrap().designs[0].event_frequency;
    assert!(large <= tiny, "{large} > {tiny}");
}
