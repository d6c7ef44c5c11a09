mod common;

use proptest::prelude::*;

use dapa_core::metrics::{self, approx_report, correlations, kendall_tau_b, pearson, spearman};
use dapa_core::synth;
use dapa_core::{build_dapa, ActivationKind, FitConfig};

/// Composite Simpson rule, used as an independent quadrature oracle.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn mse_agrees_with_simpson_on_smooth_pairs() {
    let gelu = |x: f64| ActivationKind::GeluTanh.value(x);
    let cases: [(&dyn Fn(f64) -> f64, (f64, f64)); 3] = [
        (&|x: f64| 0.5 * x, (-4.0, 4.0)),
        (&|x: f64| x.max(0.0) * 0.9, (-1.0, 3.0)),
        (&|x: f64| x.tanh(), (-2.0, 2.0)),
    ];
    for (g, (a, b)) in cases {
        let got = metrics::mse(gelu, g, (a, b), 100_000).unwrap();
        let want = simpson(|x| (gelu(x) - g(x)).powi(2), a, b, 2_000_000) / (b - a);
        assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
    }
}

#[test]
fn dwmse_of_uniform_law_is_mse_over_width() {
    let s = dapa_core::SampleSet::new((0..40_000).map(|i| -2.0 + 4.0 * (i as f64 + 0.5) / 40_000.0).collect(), "grid")
        .unwrap();
    let d = dapa_core::EmpiricalDistribution::from_samples(&s, 400, Some((-2.0, 2.0))).unwrap();
    let f = |x: f64| x.sin();
    let g = |x: f64| x - x.powi(3) / 6.0;
    let dw = metrics::dwmse(f, g, &d, (-2.0, 2.0)).unwrap();
    let m = metrics::mse(f, g, (-2.0, 2.0), 400).unwrap();
    assert!((dw - m / 4.0).abs() <= 1e-12 * m, "{dw} vs {}", m / 4.0);
}

#[test]
fn perturbed_segment_never_scores_lower() {
    let d = synth::standard_normal_distribution(100_000, 2048, Some((-4.0, 4.0)), 2);
    let d = d.without_samples();
    let t = build_dapa(&d, ActivationKind::GeluTanh, 16, &FitConfig::default()).unwrap();
    let base = approx_report(&t, &d, (-4.0, 4.0), 1000).unwrap();
    let mut r = synth::rng(9);
    for n in 0..16 {
        for _ in 0..8 {
            let (a, b) = t.fwd()[n];
            let da: f64 = rand::Rng::random_range(&mut r, -1e-2..1e-2);
            let db: f64 = rand::Rng::random_range(&mut r, -1e-2..1e-2);
            let p = approx_report(&t.with_fwd_line(n, (a + da, b + db)), &d, (-4.0, 4.0), 1000).unwrap();
            assert!(p.per_segment_dwmse[n] >= base.per_segment_dwmse[n], "segment {n}");
            for m in (0..16).filter(|&m| m != n) {
                assert_eq!(p.per_segment_dwmse[m], base.per_segment_dwmse[m]);
            }
        }
    }
}

#[test]
fn dwmse_fit_beats_uniform_fit_under_its_own_metric() {
    let d = synth::standard_normal_distribution(100_000, 2048, Some((-4.0, 4.0)), 12);
    let aware = build_dapa(&d, ActivationKind::GeluTanh, 16, &FitConfig::default()).unwrap();
    let plain = build_dapa(&d, ActivationKind::GeluTanh, 16, &FitConfig::uniform()).unwrap();
    let a = metrics::table_dwmse(&aware, &d, (-4.0, 4.0)).unwrap();
    let p = metrics::table_dwmse(&plain, &d, (-4.0, 4.0)).unwrap();
    assert!(a < p, "{a} vs {p}");
}

fn pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 4..80).prop_filter("non-constant", |v| {
        v.iter().any(|p| p.0 != v[0].0) && v.iter().any(|p| p.1 != v[0].1)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn coefficients_match_textbook_oracles(v in pairs()) {
        let (x, y): (Vec<f64>, Vec<f64>) = v.iter().copied().unzip();
        prop_assert!((pearson(&x, &y).unwrap() - common::pearson_textbook(&x, &y)).abs() < 1e-9);
        prop_assert!((spearman(&x, &y).unwrap() - common::spearman_textbook(&x, &y)).abs() < 1e-9);
        prop_assert!((kendall_tau_b(&x, &y).unwrap() - common::kendall_brute(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn report_interval_brackets_r(v in pairs()) {
        let rep = correlations(&v).unwrap();
        for c in [rep.pearson_r, rep.spearman_rho, rep.kendall_tau] {
            prop_assert!((-1.0..=1.0).contains(&c));
        }
        if let Some((lo, hi)) = rep.fisher_ci {
            prop_assert!(lo <= rep.pearson_r && rep.pearson_r <= hi);
            let (olo, ohi) = common::fisher95_textbook(rep.pearson_r, rep.n_pairs);
            prop_assert!((lo - olo).abs() < 1e-9 && (hi - ohi).abs() < 1e-9);
        }
    }

    #[test]
    fn positive_affine_maps_preserve_all_three(v in pairs(), scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        let (x, y): (Vec<f64>, Vec<f64>) = v.iter().copied().unzip();
        let x2: Vec<f64> = x.iter().map(|&a| scale * a + shift).collect();
        prop_assert!((pearson(&x, &y).unwrap() - pearson(&x2, &y).unwrap()).abs() < 1e-12);
        prop_assert!((spearman(&x, &y).unwrap() - spearman(&x2, &y).unwrap()).abs() < 1e-12);
        prop_assert!((kendall_tau_b(&x, &y).unwrap() - kendall_tau_b(&x2, &y).unwrap()).abs() < 1e-12);
    }
}
