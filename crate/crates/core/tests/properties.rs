use cohomolib_core::ab::{build_ab, GluedFunction};
use cohomolib_core::da::{build_center_chart, minimality_gap, CenterCocycle};
use cohomolib_core::pcf::{
    homoclinic_cycles_at, pcf_sequence, two_leg_connect, AccessibleSequence, LegOrder, PcfSettings, TorusDynamics,
};
use cohomolib_core::smalldiv::{
    parse_alpha, small_denominator, solve_rotation, telescoping_defect, Alpha, DEFAULT_RESONANCE_THRESHOLD,
};
use cohomolib_core::torus::{periodic_points, spectral_splitting, Line};
use cohomolib_core::{BandLimitedFunction, GridFunction, IntMatrix, Workers};
use num_complex::Complex64;
use proptest::prelude::*;

fn cat() -> IntMatrix {
    IntMatrix::from_rows(&[[2, 1], [1, 1]]).unwrap()
}

fn companion() -> IntMatrix {
    IntMatrix::from_rows(&[[0, 1, 0], [0, 0, 1], [1, 3, 0]]).unwrap()
}

prop_compose! {
    fn band2(cutoff: i64)(terms in prop::collection::vec(
        ((0..=cutoff), (-cutoff..=cutoff), -1.0..1.0f64, -1.0..1.0f64), 1..6,
    ), constant in -1.0..1.0f64) -> BandLimitedFunction {
        let half = terms.into_iter().filter_map(|(a, b, re, im)| {
            let k = vec![a, b];
            match (a, b) {
                (0, 0) => None,
                (0, b) if b < 0 => Some((vec![0, -b], Complex64::new(re, im))),
                _ => Some((k, Complex64::new(re, im))),
            }
        });
        BandLimitedFunction::from_half(2, half).unwrap().add_constant(constant)
    }
}

prop_compose! {
    fn band1(cutoff: i64)(terms in prop::collection::vec(((1..=cutoff), -1.0..1.0f64, -1.0..1.0f64), 1..6))
        -> BandLimitedFunction {
        BandLimitedFunction::from_half(1, terms.into_iter().map(|(l, re, im)| (vec![l], Complex64::new(re, im))))
            .unwrap()
    }
}

fn unit_point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_on_a_resolving_grid(f in band2(3)) {
        let g = GridFunction::sample(&f, 16, Workers::SEQUENTIAL);
        let mean_sq = g.samples.iter().map(|x| x * x).sum::<f64>() / g.len() as f64;
        prop_assert!((mean_sq - f.l2_norm_squared()).abs() < 1e-12 * (1.0 + mean_sq));
    }

    #[test]
    fn dft_inverts_sampling(f in band2(3)) {
        let back = GridFunction::sample(&f, 8, Workers::SEQUENTIAL).dft(3).unwrap();
        for r in f.records() {
            let c = back.coefficient(&r.k[..2]);
            prop_assert!((c - Complex64::new(r.re, r.im)).norm() < 1e-13);
        }
    }

    #[test]
    fn composition_with_inverse_is_identity(f in band2(3), x in unit_point()) {
        let inv = cat().inverse().unwrap();
        let g = f.compose_with_automorphism(&cat()).unwrap().compose_with_automorphism(&inv).unwrap();
        prop_assert!((g.evaluate(&x) - f.evaluate(&x)).abs() < 1e-12);
        let ax = cat().apply_f64(&x);
        let h = f.compose_with_automorphism(&cat()).unwrap();
        prop_assert!((h.evaluate(&x) - f.evaluate(&ax)).abs() < 1e-11);
    }

    #[test]
    fn json_round_trip(f in band2(4)) {
        let back = BandLimitedFunction::from_json(2, &f.to_json()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn lipschitz_bounds_increments(f in band2(3), x in unit_point(), y in unit_point()) {
        let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        prop_assert!((f.evaluate(&x) - f.evaluate(&y)).abs() <= f.lipschitz() * d + 1e-12);
    }

    #[test]
    fn reversal_negates_exactly(f in band2(2), x in unit_point(), y in unit_point()) {
        let s = spectral_splitting(&cat()).unwrap();
        let d = TorusDynamics::new(&s).unwrap();
        let path = two_leg_connect(&s, &x, &y, LegOrder::Su).unwrap();
        let fwd = pcf_sequence(&f, &d, &path, PcfSettings::default()).unwrap();
        let back = pcf_sequence(&f, &d, &path.reversed(), PcfSettings::default()).unwrap();
        prop_assert_eq!(fwd.value, -back.value);
    }

    #[test]
    fn concatenation_is_additive(f in band2(2), x in unit_point(), y in unit_point(), z in unit_point()) {
        let s = spectral_splitting(&cat()).unwrap();
        let d = TorusDynamics::new(&s).unwrap();
        let a = two_leg_connect(&s, &x, &y, LegOrder::Su).unwrap();
        let b = two_leg_connect(&s, &y, &z, LegOrder::Us).unwrap();
        let st = PcfSettings::default();
        let joined = pcf_sequence(&f, &d, &a.concat(&b), st).unwrap().value;
        let parts = pcf_sequence(&f, &d, &a, st).unwrap().value + pcf_sequence(&f, &d, &b, st).unwrap().value;
        prop_assert!((joined - parts).abs() <= 4.0 * f64::EPSILON * (1.0 + parts.abs()));
    }

    #[test]
    fn shift_identity(f in band2(2), x in unit_point(), y in unit_point()) {
        let s = spectral_splitting(&cat()).unwrap();
        let d = TorusDynamics::new(&s).unwrap();
        let path = two_leg_connect(&s, &x, &y, LegOrder::Su).unwrap();
        let st = PcfSettings::default();
        let before = pcf_sequence(&f, &d, &path, st).unwrap();
        let after = pcf_sequence(&f, &d, &path.image(&d), st).unwrap();
        let expected = f.evaluate(&y) - f.evaluate(&x);
        prop_assert!((after.value - before.value - expected).abs() <= before.tail_bound + after.tail_bound + 1e-12);
    }

    #[test]
    fn coboundary_cycles_vanish(u in band2(2), base in unit_point(), pick in 0usize..48) {
        let s = spectral_splitting(&cat()).unwrap();
        let d = TorusDynamics::new(&s).unwrap();
        let phi = BandLimitedFunction::coboundary(&u, &cat(), 0.5).unwrap();
        let cycles = homoclinic_cycles_at(&s, 3, &base).unwrap();
        let cycle: &AccessibleSequence = &cycles[pick % cycles.len()].cycle;
        let v = pcf_sequence(&phi, &d, cycle, PcfSettings::default()).unwrap();
        prop_assert!(v.value.abs() <= v.tail_bound + 1e-12);
    }

    #[test]
    fn rotation_solution_satisfies_equation(psi in band1(6), t in 0.0..1.0f64) {
        let alpha = Alpha::golden();
        let r = solve_rotation(&psi, &alpha, DEFAULT_RESONANCE_THRESHOLD).unwrap();
        let a = alpha.to_f64();
        let lhs = r.w.evaluate(&[t + a]) - r.w.evaluate(&[t]);
        prop_assert!((lhs - psi.evaluate(&[t]) - r.c).abs() < 1e-12);
        prop_assert_eq!(r.w.mean(), 0.0);
        prop_assert!(telescoping_defect(&r, &psi, &alpha, 89, t).unwrap() < 1e-10);
    }

    #[test]
    fn small_denominators_match_float_phase(l in -500i64..500) {
        let alpha = parse_alpha("sqrt(2) - 1").unwrap();
        let den = small_denominator(&alpha, l).unwrap();
        let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * l as f64 * alpha.to_f64());
        prop_assert!((den - (phase - 1.0)).norm() < 1e-11);
    }

    #[test]
    fn convergents_are_best_approximations(a in 1i128..40, b in 1i128..40, d in 2i128..60) {
        let alpha = Alpha::surd(a, b, d, a + b + 7).unwrap();
        prop_assume!(!alpha.is_rational());
        let cf = alpha.continued_fraction(1_000_000, 60).unwrap();
        for (i, w) in cf.convergents.windows(2).enumerate() {
            let err = alpha.dist(w[0].1).unwrap();
            prop_assert!(err < 1.0 / w[1].1 as f64);
            if i > 0 {
                prop_assert!(err > 1.0 / (w[0].1 + w[1].1) as f64);
            }
        }
    }

    #[test]
    fn glued_observables_are_glued(re in -1.0..1.0f64, im in -1.0..1.0f64, x in unit_point(), t in 0.0..1.0f64) {
        let sys = build_ab(&cat(), &cat(), Alpha::golden()).unwrap();
        let h = BandLimitedFunction::from_half(3, [(vec![1, -1, 1], Complex64::new(re, im)), (vec![0, 1, 2], Complex64::new(im, re))]).unwrap();
        let g = GluedFunction::new(&sys, h).unwrap();
        let bx = cat().apply_f64(&x);
        prop_assert!((g.eval_point(&[x[0], x[1], t + 1.0]) - g.eval_point(&[bx[0], bx[1], t])).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn center_cocycle_condition(
        m in prop::array::uniform3(-3i64..=3),
        n in prop::array::uniform3(-3i64..=3),
        s in -1.0..1.0f64,
        re in -0.1..0.1f64,
    ) {
        let chart = build_center_chart(&companion()).unwrap();
        let u = BandLimitedFunction::from_half(3, [
            (vec![1, 0, -1], Complex64::new(re, 0.05)),
            (vec![0, 1, 1], Complex64::new(0.08, -re)),
        ]).unwrap();
        let phi = BandLimitedFunction::coboundary(&u, &companion(), 0.2).unwrap();
        let cc = CenterCocycle::new(&chart, &phi, PcfSettings::default()).unwrap();
        let sum = [m[0] + n[0], m[1] + n[1], m[2] + n[2]];
        let a = cc.psi(&sum, s).unwrap();
        let b = cc.psi(&m, s).unwrap();
        let c = cc.psi(&n, chart.translate(&m, s)).unwrap();
        let tails = a.tail_bound.max(b.tail_bound).max(c.tail_bound);
        prop_assert!((a.value - b.value - c.value).abs() <= 6.0 * tails);
    }
}

#[test]
fn cat_map_periodic_counts_match_determinants() {
    let a = cat();
    for n in 1..=6u32 {
        let det = a.checked_pow(n).unwrap().minus_identity().det().unsigned_abs();
        assert_eq!(periodic_points(&a, n).unwrap().len() as u128, det);
    }
}

#[test]
fn center_translations_are_dense() {
    let chart = build_center_chart(&companion()).unwrap();
    assert!(minimality_gap(chart.alpha[1], chart.alpha[2], 50) <= 1.0 / 50.0);
    let s = spectral_splitting(&companion()).unwrap();
    assert!(s.eigenvalue(Line::Center).unwrap() < 0.0);
}
