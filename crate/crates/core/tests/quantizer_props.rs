use proptest::prelude::*;

use dapa_core::quantizer::{self, eval_fixed, quantize_table, quantized_dwmse, select_format, FixedPointFormat};
use dapa_core::synth::{self, SyntheticLaw};
use dapa_core::{build_dapa, ActivationKind, FitConfig};

const REFINE_SLACK: f64 = 1e-12;

/// `(n, dwmse(n - 1), dwmse(n))` for every step of the full `n` sweep that
/// increases the quantized DWMSE by more than the slack.
fn refinement_violations(kind: ActivationKind, law: SyntheticLaw, segments: usize, seed: u64) -> Vec<(u32, f64, f64)> {
    let d = synth::law_distribution(law, 50_000, 2048, None, seed);
    let t = build_dapa(&d, kind, segments, &FitConfig::default()).unwrap();
    let range = d.range();
    let m = quantizer::integer_bits_for_range(range) as u32;
    let errs: Vec<f64> = (0..=16 - m)
        .map(|n| quantized_dwmse(&t, &d, range, FixedPointFormat::new(m, n).unwrap()).unwrap())
        .collect();
    errs.windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] + REFINE_SLACK)
        .map(|(n, w)| (n as u32 + 1, w[0], w[1]))
        .collect()
}

/// Known to fail. Rounding of inputs, knots and outputs can partly cancel
/// the approximation error at coarse `n`: for GeluTanh N = 2 under a normal
/// law (seed 1) the sweep goes 2.737e-4 at n = 5, 3.101e-4 at n = 6, and
/// settles near the float value 2.936e-4. Scoring against the float table
/// instead of the exact function does not restore monotonicity either,
/// since moving a knot code can shift a boundary the wrong way. Left
/// asserting the property as stated.
#[test]
fn refinement_is_monotone_on_reference_tables() {
    for (kind, law) in [
        (ActivationKind::GeluTanh, SyntheticLaw::StandardNormal),
        (ActivationKind::GeluTanh, SyntheticLaw::Skewed),
        (ActivationKind::Exp, SyntheticLaw::SoftmaxShift),
    ] {
        for segments in [2, 4, 16] {
            let v = refinement_violations(kind, law, segments, 1);
            assert!(v.is_empty(), "{kind:?} {law:?} N={segments}: {v:?}");
        }
    }
}

#[test]
fn threshold_flag_is_honest() {
    for (seed, theta) in [(1, 1.0), (2, 1.05), (3, 1.5), (4, 4.0)] {
        let d = synth::standard_normal_distribution(50_000, 2048, Some((-4.0, 4.0)), seed);
        let t = build_dapa(&d, ActivationKind::GeluTanh, 16, &FitConfig::default()).unwrap();
        let sel = select_format(&t, &d, (-4.0, 4.0), theta, 16).unwrap();
        let again = quantized_dwmse(&t, &d, (-4.0, 4.0), sel.format).unwrap();
        assert_eq!(again, sel.quantized_dwmse);
        if sel.threshold_met {
            assert!(again <= theta * sel.fp_dwmse);
        }
        // minimality: every earlier candidate missed the threshold
        for &(_, e) in &sel.sweep[..sel.sweep.len() - 1] {
            assert!(e > sel.threshold);
        }
    }
}

#[test]
fn eval_fixed_is_pure_across_rebuilds() {
    let build = || {
        let d = synth::standard_normal_distribution(20_000, 1024, Some((-4.0, 4.0)), 77);
        let t = build_dapa(&d, ActivationKind::GeluTanh, 16, &FitConfig::default()).unwrap();
        quantize_table(&t, FixedPointFormat::new(3, 13).unwrap()).unwrap()
    };
    let (a, b) = (build(), build());
    assert_eq!(a, b);
    let io = a.io_format();
    assert!((io.min_code()..=io.max_code()).all(|c| eval_fixed(&a, c) == eval_fixed(&b, c)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn knot_codes_round_trip(seed in 0u64..10_000, n in 6u32..=13) {
        let d = synth::standard_normal_distribution(5_000, 512, Some((-4.0, 4.0)), seed);
        let t = build_dapa(&d, ActivationKind::GeluTanh, 8, &FitConfig::default()).unwrap();
        let io = FixedPointFormat::new(3, n).unwrap();
        let q = quantize_table(&t, io).unwrap();
        prop_assert!(q.knots().windows(2).all(|w| w[0] < w[1]));
        for &k in q.knots() {
            prop_assert_eq!(io.encode_code(io.decode(k)), k);
        }
    }
}
