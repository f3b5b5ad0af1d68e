use knot_tower::integrals::{direction, integrand_at};
use knot_tower::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn degree_two() -> DiagramSpace {
    DiagramSpace::new(2, Parity::Odd).unwrap()
}

fn crossed() -> TrivalentDiagram {
    TrivalentDiagram::chord_diagram(Parity::Odd, &[(0, 2), (1, 3)]).unwrap()
}

fn tripod() -> TrivalentDiagram {
    degree_two()
        .keys
        .iter()
        .find(|d| d.free_vertices() == 1)
        .unwrap()
        .clone()
}

fn random_configuration(d: &TrivalentDiagram, rng: &mut ChaCha8Rng) -> Configuration {
    let mut t: Vec<f64> = (0..d.interval_vertices()).map(|_| rng.random::<f64>()).collect();
    t.sort_by(f64::total_cmp);
    let x = (0..d.free_vertices())
        .map(|_| [rng.random_range(-1.0..2.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    Configuration { t, x }
}

/// Gauss linking form `(p - q) . (p' x q') / (4 pi |p - q|^3)`, written out by hand.
fn gauss_form(k: &LongKnot, s: f64, t: f64) -> f64 {
    let (p, dp) = k.eval(s);
    let (q, dq) = k.eval(t);
    let w = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    let c = [
        dp[1] * dq[2] - dp[2] * dq[1],
        dp[2] * dq[0] - dp[0] * dq[2],
        dp[0] * dq[1] - dp[1] * dq[0],
    ];
    let r = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    (w[0] * c[0] + w[1] * c[1] + w[2] * c[2]) / (4.0 * PI * r * r * r)
}

#[test]
fn direction_examples() {
    assert_eq!(direction([0.0; 3], [0.0, 0.0, 2.0]).unwrap(), [0.0, 0.0, 1.0]);
    let d = direction([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap();
    let h = 0.5f64.sqrt();
    assert!((d[0] + h).abs() < 1e-15 && (d[1] - h).abs() < 1e-15 && d[2] == 0.0);
    let back = direction([0.0, 1.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
    assert_eq!(back, [-d[0], -d[1], -d[2]]);
    assert!(direction([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]).is_err());
}

#[test]
fn chord_integrand_is_the_gauss_form() {
    let d1 = TrivalentDiagram::single_chord(Parity::Odd);
    let k = standard_knot("trefoil").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut t = [rng.random::<f64>(), rng.random::<f64>()];
        t.sort_by(f64::total_cmp);
        let got = integrand(&d1, &k, &Configuration { t: t.to_vec(), x: vec![] }).unwrap();
        let want = gauss_form(&k, t[0], t[1]);
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-3), "{got} vs {want}");
    }
}

#[test]
fn chord_integrand_vanishes_on_a_planar_arc() {
    let k = LongKnot::from_json(r#"{"points": [[0.3, 0.3, 0.0], [0.5, -0.2, 0.0], [0.7, 0.25, 0.0]]}"#).unwrap();
    let d1 = TrivalentDiagram::single_chord(Parity::Odd);
    for (s, t) in [(0.2, 0.6), (0.35, 0.4), (0.1, 0.9)] {
        let v = integrand(&d1, &k, &Configuration { t: vec![s, t], x: vec![] }).unwrap();
        assert!(v.abs() < 1e-12);
        assert!(gauss_form(&k, s, t).abs() < 1e-12);
    }
}

#[test]
fn straight_line_gives_zero_for_chord_diagrams() {
    let k = standard_knot("unknot").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in degree_two().keys.iter().filter(|d| d.free_vertices() == 0) {
        for _ in 0..20 {
            let c = random_configuration(d, &mut rng);
            assert_eq!(integrand(d, &k, &c).unwrap(), 0.0);
        }
    }
}

#[test]
fn reflecting_space_multiplies_by_the_orientation_sign() {
    // a reflection reverses each sphere form and each free-point volume
    let k = standard_knot("trefoil").unwrap();
    let m = k.mirror();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for d in [crossed(), tripod(), TrivalentDiagram::single_chord(Parity::Odd)] {
        let sign = if (d.chords().len() + d.free_vertices()) % 2 == 0 { 1.0 } else { -1.0 };
        for _ in 0..50 {
            let c = random_configuration(&d, &mut rng);
            let flipped = Configuration {
                t: c.t.clone(),
                x: c.x.iter().map(|p| [p[0], p[1], -p[2]]).collect(),
            };
            let a = integrand(&d, &k, &c).unwrap();
            let b = integrand(&d, &m, &flipped).unwrap();
            assert!((a - sign * b).abs() <= 1e-9 * a.abs().max(1e-6), "{a} vs {b}");
        }
    }
}

#[test]
fn free_chord_reversal_negates_the_integrand() {
    let d = tripod();
    let k = standard_knot("trefoil").unwrap();
    let free = d.interval_vertices();
    let mut chords = d.chords().to_vec();
    let j = chords.iter().position(|c| c.touches(free)).unwrap();
    chords[j] = chords[j].reversed();
    let r = TrivalentDiagram::new(d.interval_vertices(), d.free_vertices(), Parity::Odd, chords, None).unwrap();
    assert_eq!(canonical_form(&r).sign, -canonical_form(&d).sign);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let c = random_configuration(&d, &mut rng);
        let a = integrand(&d, &k, &c).unwrap();
        let b = integrand(&r, &k, &c).unwrap();
        assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn coincident_points_are_reported() {
    let d = tripod();
    let k = standard_knot("trefoil").unwrap();
    let p = k.evaluate(0.3);
    let c = Configuration { t: vec![0.3, 0.5, 0.7], x: vec![p] };
    assert!(matches!(integrand(&d, &k, &c), Err(Error::CoincidentPoints)));
    let bad = Configuration { t: vec![0.3], x: vec![] };
    assert!(integrand(&d, &k, &bad).is_err());
}

#[test]
fn double_chords_integrate_to_zero_pointwise() {
    let space = degree_two();
    let k = standard_knot("trefoil").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in space.keys.iter().filter(|d| d.has_double_chord()) {
        let c = random_configuration(d, &mut rng);
        let interval: Vec<_> = c.t.iter().map(|&t| k.eval(t)).collect();
        assert_eq!(integrand_at(d, &interval, &c.x).unwrap(), 0.0);
    }
}

#[test]
fn straight_line_estimates_are_exactly_zero() {
    let k = standard_knot("unknot").unwrap();
    for d in [crossed(), tripod()] {
        let e = integrate(&d, &k, SamplingOptions::new(1000, 4)).unwrap();
        assert_eq!((e.value, e.std_error), (0.0, 0.0));
        assert!(e.samples > 0);
    }
}

#[test]
fn empty_budget_is_an_error() {
    let k = standard_knot("trefoil").unwrap();
    assert!(integrate(&crossed(), &k, SamplingOptions::new(0, 1)).is_err());
    assert!(integrate(&crossed(), &k, SamplingOptions::new(10, 1).with_workers(0)).is_err());
}

#[test]
fn estimates_are_bit_identical_for_identical_options() {
    let k = standard_knot("trefoil").unwrap();
    let opts = SamplingOptions::new(20_000, 42);
    for d in [crossed(), tripod()] {
        let a = integrate(&d, &k, opts).unwrap();
        let b = integrate(&d, &k, opts).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        assert_eq!(a, b);
    }
}

#[test]
fn doubling_the_budget_shrinks_the_error_by_root_two() {
    let k = standard_knot("trefoil").unwrap();
    let d = crossed();
    let a = integrate(&d, &k, SamplingOptions::new(200_000, 7)).unwrap();
    let b = integrate(&d, &k, SamplingOptions::new(400_000, 7)).unwrap();
    let ratio = b.std_error / a.std_error;
    assert!((ratio - 0.5f64.sqrt()).abs() < 0.2 * 0.5f64.sqrt(), "ratio {ratio}");
    assert!(a.agrees_with(&b, 3.0));
}

#[test]
fn disjoint_seeds_agree() {
    let k = standard_knot("trefoil").unwrap();
    for d in [crossed(), tripod()] {
        let a = integrate(&d, &k, SamplingOptions::new(200_000, 1)).unwrap();
        let b = integrate(&d, &k, SamplingOptions::new(200_000, 2)).unwrap();
        assert!(a.agrees_with(&b, 3.0), "{a:?} vs {b:?}");
        assert!(a.value != 0.0);
    }
}

#[test]
fn uniform_and_adaptive_proposals_agree() {
    let k = standard_knot("trefoil").unwrap();
    let d = crossed();
    let a = integrate(&d, &k, SamplingOptions::new(400_000, 3)).unwrap();
    let b = integrate(&d, &k, SamplingOptions::new(400_000, 3).with_proposal(Proposal::Uniform)).unwrap();
    assert!(a.agrees_with(&b, 3.0), "{a:?} vs {b:?}");
    assert!(a.std_error < b.std_error);
}

#[test]
fn default_anomaly_correction_is_exactly_zero() {
    let k = standard_knot("trefoil").unwrap();
    let e = correction(&crossed(), &k, SamplingOptions::new(1000, 1), &AnomalyConfig::default()).unwrap();
    assert_eq!((e.value, e.std_error), (0.0, 0.0));
}

#[test]
fn chord_self_integral_is_not_an_invariant() {
    let d = crossed();
    let mut anomaly = AnomalyConfig::default();
    anomaly.set(&d, 1.0).unwrap();
    assert!(anomaly.set(&d, f64::NAN).is_err());
    let opts = SamplingOptions::new(200_000, 5);
    let line = correction(&d, &standard_knot("unknot").unwrap(), opts, &anomaly).unwrap();
    assert_eq!(line.value, 0.0);
    // small perturbations move it by less than the sampling error, so use
    // isotopies that change the shape visibly
    let bent = correction(&d, &standard_knot("bent_unknot").unwrap(), opts, &anomaly).unwrap();
    assert!(!line.agrees_with(&bent, 3.0), "{bent:?}");
    let k = standard_knot("trefoil").unwrap();
    let longer = k.concat(&standard_knot("bent_unknot").unwrap());
    let a = correction(&d, &k, opts, &anomaly).unwrap();
    let b = correction(&d, &longer, opts, &anomaly).unwrap();
    assert!(!a.agrees_with(&b, 3.0), "{a:?} vs {b:?}");
}

#[test]
fn invariant_rejects_non_primitive_or_unsupported_input() {
    let k = standard_knot("trefoil").unwrap();
    let opts = InvariantOptions::new(SamplingOptions::new(100, 1));
    let space = DiagramSpace::new(4, Parity::Odd).unwrap();
    let basis = weight_basis(&space).unwrap();
    let product = basis.iter().find(|w| !primitivity_filter(&space, w).unwrap()).unwrap();
    assert!(matches!(invariant(&space, product, &k, &opts), Err(Error::NotPrimitive)));
    let primitive = basis.iter().find(|w| primitivity_filter(&space, w).unwrap()).unwrap();
    assert!(matches!(invariant(&space, primitive, &k, &opts), Err(Error::UnsupportedDegree { .. })));
}

#[test]
fn straight_line_invariant_is_zero() {
    let space = degree_two();
    let w = &weight_basis(&space).unwrap()[0];
    let k = standard_knot("unknot").unwrap();
    let r = invariant(&space, w, &k, &InvariantOptions::new(SamplingOptions::new(10_000, 1))).unwrap();
    assert_eq!(r.estimate.value, 0.0);
}

#[test]
fn tripod_vanishes_far_out() {
    let k = standard_knot("trefoil").unwrap();
    let r = tail_and_diagonal_report(&tripod(), &k, 40_000, 8).unwrap();
    let outer = r.free_shells.last().unwrap();
    assert!(r.interior_median > 0.0);
    assert!(outer.max_abs < 1e-6 * r.interior_median, "{outer:?} vs {}", r.interior_median);
}

#[test]
fn chord_form_decays_as_the_knot_points_leave() {
    let k = standard_knot("trefoil").unwrap();
    let r = tail_and_diagonal_report(&TrivalentDiagram::single_chord(Parity::Odd), &k, 40_000, 8).unwrap();
    // past the knotted region the straight ends contribute nothing at all
    for w in r.interval_shells.windows(2).skip(2) {
        assert!(w[1].mean_abs <= w[0].mean_abs * 1.05 + 1e-300, "{:?}", r.interval_shells);
    }
    assert!(r.interval_shells.last().unwrap().mean_abs < 1e-6 * r.interior_median);
}

#[test]
fn straight_line_report_is_all_zero() {
    let k = standard_knot("unknot").unwrap();
    let r = tail_and_diagonal_report(&crossed(), &k, 5_000, 2).unwrap();
    for s in r.free_shells.iter().chain(&r.interval_shells).chain(&r.joint_shells).chain(&r.diagonal_tubes) {
        assert_eq!(s.max_abs, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn worker_count_only_changes_the_stream(seed in any::<u64>(), workers in 1usize..6) {
        let k = standard_knot("figure_eight").unwrap();
        let opts = SamplingOptions::new(4_000, seed).with_workers(workers);
        let a = integrate(&crossed(), &k, opts).unwrap();
        let b = integrate(&crossed(), &k, opts).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.std_error >= 0.0 && a.samples == 4_000);
    }

    #[test]
    fn direction_is_unit_and_antipodal(
        p in prop::array::uniform3(-5.0f64..5.0), q in prop::array::uniform3(-5.0f64..5.0),
    ) {
        prop_assume!(p != q);
        let a = direction(p, q).unwrap();
        let b = direction(q, p).unwrap();
        prop_assert!(((a[0] * a[0] + a[1] * a[1] + a[2] * a[2]) - 1.0).abs() < 1e-12);
        for i in 0..3 {
            prop_assert_eq!(a[i], -b[i]);
        }
    }
}
