use knot_tower::integrals::interval_map;
use knot_tower::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn degree_two() -> (DiagramSpace, WeightSystem) {
    let space = DiagramSpace::new(2, Parity::Odd).unwrap();
    let w = weight_basis(&space).unwrap().remove(0);
    (space, w)
}

fn bary(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Points of the knot sampled away from every hole of `spec`.
fn free_samples(spec: &PunctureSpec) -> Vec<(f64, f64)> {
    (0..400)
        .map(|i| (i as f64 + 0.5) / 400.0)
        .filter(|&s| spec.hole_at(s).is_none())
        .map(|s| (s, interval_map(s).0))
        .collect()
}

fn same_knot(a: &PuncturedKnot, b: &PuncturedKnot) -> bool {
    a.removed() == b.removed() && a.distance(b, 997) == 0.0
}

#[test]
fn restriction_composes() {
    let k = standard_knot("trefoil").unwrap();
    let spec = PunctureSpec::for_stage(4).unwrap();
    let once = restrict(&k, &spec, &[0, 2, 3]).unwrap();
    let twice = restrict(&k, &spec, &[2]).unwrap().restrict(&[0, 3]).unwrap();
    assert!(same_knot(&once, &twice));
    assert!(restrict(&k, &spec, &[]).is_err());
    assert!(restrict(&k, &spec, &[9]).is_err());
}

#[test]
fn evaluation_in_a_removed_hole_is_a_domain_error() {
    let k = standard_knot("trefoil").unwrap();
    let spec = PunctureSpec::for_stage(3).unwrap();
    let p = restrict(&k, &spec, &[1]).unwrap();
    let (a, b) = spec.holes[1];
    let mid = 0.5 * (a + b);
    assert!(matches!(p.eval_at(mid, interval_map(mid).0), Err(Error::OutsideDomain { hole: 1, .. })));
    let (c, d) = spec.holes[2];
    let other = 0.5 * (c + d);
    assert!(p.eval_at(other, interval_map(other).0).is_ok());
}

#[test]
fn restricted_line_stays_linear() {
    let k = standard_knot("unknot").unwrap();
    let spec = PunctureSpec::for_stage(2).unwrap();
    let p = restrict(&k, &spec, &[0, 1, 2]).unwrap();
    for t in [-100.0, -1.0, 0.0, 1.0, 2.5, 1e4] {
        let s = knot_tower::integrals::interval_unmap(t);
        if spec.hole_at(s).is_none() {
            assert_eq!(p.eval(t).unwrap(), ([t, 0.0, 0.0], [1.0, 0.0, 0.0]));
        }
    }
}

#[test]
fn puncture_specs_are_validated() {
    assert!(PunctureSpec::new(vec![(0.1, 0.2)]).is_err());
    assert!(PunctureSpec::new(vec![(0.3, 0.4), (0.1, 0.2)]).is_err());
    assert!(PunctureSpec::new(vec![(0.1, 0.3), (0.2, 0.4)]).is_err());
    assert!(PunctureSpec::new(vec![(0.0, 0.1), (0.2, 0.4)]).is_err());
    assert!(PunctureSpec::for_stage(0).is_err());
    for k in 1..=8 {
        let spec = PunctureSpec::for_stage(k).unwrap();
        assert_eq!(spec.len(), k + 1);
    }
}

#[test]
fn constant_families_do_not_move() {
    let k = standard_knot("figure_eight").unwrap();
    let h = knot_to_holim(&k, 3).unwrap();
    assert!(h.is_constant());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for subset in [vec![0], vec![1, 3], vec![0, 1, 2, 3]] {
        let direct = restrict(&k, h.spec(), &subset).unwrap();
        for _ in 0..3 {
            let a = h.alpha(&subset, &bary(subset.len(), &mut rng)).unwrap();
            assert!(same_knot(&a, &direct));
        }
    }
    assert_eq!(h.face_residual(100, 2).unwrap(), 0.0);
}

#[test]
fn evaluate_uses_the_support_of_the_simplex_point() {
    let k = standard_knot("trefoil").unwrap();
    let h = knot_to_holim(&k, 3).unwrap();
    let p = h.evaluate(&[0.25, 0.0, 0.75, 0.0]).unwrap();
    assert_eq!(p.removed(), &[0, 2]);
    // on the face opposite hole 1 the knot is defined across that hole
    let (a, b) = h.spec().holes[1];
    let s = 0.5 * (a + b);
    assert_eq!(p.eval_at(s, interval_map(s).0).unwrap(), k.eval(interval_map(s).0));
    assert!(h.evaluate(&[1.0, 0.0]).is_err());
    assert!(h.evaluate(&[0.5, 0.6, 0.0, 0.0]).is_err());
}

#[test]
fn projection_of_a_constant_family_is_constant() {
    let k = standard_knot("trefoil").unwrap();
    let h = knot_to_holim(&k, 4).unwrap();
    let p = tower_projection(&h).unwrap();
    assert!(p.is_constant());
    assert_eq!(p.stage(), 3);
    assert_eq!(p.spec().holes, h.spec().holes[..4].to_vec());
    let again = tower_projection(&p).unwrap();
    assert_eq!(again.spec().holes, h.spec().holes[..3].to_vec());
    let direct = restrict(&k, again.spec(), &[0, 2]).unwrap();
    assert!(same_knot(&again.alpha(&[0, 2], &[0.5, 0.5]).unwrap(), &direct));
    assert_eq!(again.face_residual(50, 1).unwrap(), 0.0);
    let low = knot_to_holim(&k, 1).unwrap();
    assert!(tower_projection(&low).is_err());
}

#[test]
fn synthetic_family_reduces_to_the_constant_one() {
    let k = standard_knot("trefoil").unwrap();
    let spec = PunctureSpec::for_stage(3).unwrap();
    let h = synthetic_family(&k, &k, spec.clone()).unwrap();
    let c = knot_to_holim_with(&k, spec);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for subset in [vec![0, 1], vec![2], vec![0, 1, 2, 3]] {
        let b = bary(subset.len(), &mut rng);
        let a = h.alpha(&subset, &b).unwrap();
        let d = c.alpha(&subset, &b).unwrap();
        assert!(a.distance(&d, 501) < 1e-14);
    }
}

fn knot_to_holim_with(k: &LongKnot, spec: PunctureSpec) -> HolimPoint {
    knot_tower::tower::knot_to_holim_with(k, spec).unwrap()
}

#[test]
fn synthetic_family_edges_run_between_the_vertex_knots() {
    let k0 = standard_knot("trefoil").unwrap();
    let k1 = k0.perturb(3, k0.embedding_margin() / 5.0).unwrap();
    let spec = PunctureSpec::for_stage(2).unwrap();
    let h = synthetic_family(&k0, &k1, spec.clone()).unwrap();
    // vertices carry the knots at 0, 1/2 and 1 along the segment
    let start = h.alpha(&[0, 2], &[1.0, 0.0]).unwrap();
    let end = h.alpha(&[0, 2], &[0.0, 1.0]).unwrap();
    assert!(same_knot(&start, &restrict(&k0, &spec, &[0, 2]).unwrap()));
    assert!(same_knot(&end, &restrict(&k1, &spec, &[0, 2]).unwrap()));
    let mid = h.alpha(&[1], &[1.0]).unwrap();
    let half = restrict(&LongKnot::interpolate(&k0, &k1, 0.5), &spec, &[1]).unwrap();
    assert!(mid.distance(&half, 501) < 1e-15);
    assert!(h.face_residual(100, 9).unwrap() < 1e-12);
    let p = tower_projection(&h).unwrap();
    assert!(p.face_residual(100, 9).unwrap() < 1e-12);
    assert!(same_knot(&p.alpha(&[0, 1], &[0.3, 0.7]).unwrap(), &h.alpha(&[0, 1], &[0.3, 0.7]).unwrap()));
}

#[test]
fn synthetic_family_checks_the_whole_isotopy() {
    let t = standard_knot("trefoil").unwrap();
    let m = t.mirror();
    assert!(synthetic_family(&t, &m, PunctureSpec::for_stage(2).unwrap()).is_err());
}

#[test]
fn barycenter_matches_direct_evaluation() {
    let k0 = standard_knot("figure_eight").unwrap();
    let k1 = k0.perturb(1, k0.embedding_margin() / 5.0).unwrap();
    let spec = PunctureSpec::for_stage(3).unwrap();
    let h = synthetic_family(&k0, &k1, spec.clone()).unwrap();
    let p = h.evaluate(&[0.25; 4]).unwrap();
    // mean of the vertex parameters 0, 1/3, 2/3, 1
    let direct = LongKnot::interpolate(&k0, &k1, 0.5);
    for (s, t) in free_samples(&spec) {
        let (a, _) = p.eval_at(s, t).unwrap();
        let b = direct.evaluate(t);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-14);
        }
    }
}

#[test]
fn gamma_examples() {
    let g = GammaMap::for_stage(3).unwrap();
    let empty = g.gamma(&[]).unwrap();
    assert_eq!(empty, vec![0.25; 4]);
    assert_eq!(g.gamma(&[0.0]).unwrap(), empty);
    assert_eq!(g.gamma(&[1.0]).unwrap(), empty);
    let (a, b) = g.spec.holes[2];
    let inside = g.gamma(&[0.1, 0.5 * (a + b)]).unwrap();
    assert_eq!(inside[2], 0.0);
    assert!((inside.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    let x = [0.13, 0.41];
    assert_eq!(g.gamma(&[0.13, 0.13, 0.41]).unwrap(), g.gamma(&x).unwrap());
    assert_eq!(g.gamma(&[0.0, 0.13, 0.41]).unwrap(), g.gamma(&x).unwrap());
    assert!(g.gamma(&[0.1, 0.2, 0.3, 0.4]).is_err());
    assert!(g.gamma(&[0.4, 0.2]).is_err());
}

#[test]
fn gamma_contract_holds_through_stage_six() {
    for k in 1..=6 {
        let r = check_gamma(&GammaMap::for_stage(k).unwrap(), 10_000, k as u64);
        assert!(r.passed(), "stage {k}: {:?}", r.examples);
        assert_eq!(r.max_face_residual, 0.0);
        assert_eq!(r.max_blocked_weight, 0.0);
    }
}

#[test]
fn narrowed_hole_is_caught() {
    let g = GammaMap::for_stage(3).unwrap();
    let mut spec = g.spec.clone();
    let (a, b) = spec.holes[1];
    let c = 0.5 * (a + b);
    spec.holes[1] = (c - 0.75 * g.delta, c + 0.75 * g.delta);
    let mutant = GammaMap::new_unchecked(spec, g.delta);
    let r = check_gamma(&mutant, 10_000, 3);
    assert!(!r.passed());
    assert!(r.examples.iter().any(|v| v.condition == "ii"));
}

#[test]
fn crowded_specs_are_rejected() {
    let spec = PunctureSpec::new(vec![(0.2, 0.3), (0.31, 0.4), (0.6, 0.7)]).unwrap();
    assert!(GammaMap::new(spec, 0.01).is_err());
    assert!(GammaMap::new(PunctureSpec::for_stage(2).unwrap(), 0.0).is_err());
}

#[test]
fn constant_family_integrals_are_bit_identical_to_the_knot() {
    let g = GammaMap::for_stage(6).unwrap();
    for name in ["trefoil", "figure_eight", "unknot"] {
        let k = standard_knot(name).unwrap();
        let h = knot_to_holim(&k, 6).unwrap();
        for n in 2..=3 {
            let space = DiagramSpace::new(n, Parity::Odd).unwrap();
            for (i, d) in space.keys.iter().enumerate() {
                let opts = SamplingOptions::new(2_000, 100 + i as u64);
                let a = integrate(d, &k, opts).unwrap();
                let b = integrate_tower(d, &h, &g, opts).unwrap();
                assert_eq!(a, b, "{name} {d}");
            }
        }
    }
}

#[test]
fn tower_input_is_checked() {
    let k = standard_knot("trefoil").unwrap();
    let d = TrivalentDiagram::chord_diagram(Parity::Odd, &[(0, 2), (1, 3)]).unwrap();
    let opts = SamplingOptions::new(100, 1);
    let low = knot_to_holim(&k, 3).unwrap();
    assert!(integrate_tower(&d, &low, &GammaMap::for_stage(3).unwrap(), opts).is_err());
    let h = knot_to_holim(&k, 4).unwrap();
    assert!(integrate_tower(&d, &h, &GammaMap::for_stage(5).unwrap(), opts).is_err());
}

#[test]
fn tower_invariant_on_constant_families() {
    let (space, w) = degree_two();
    let g = GammaMap::for_stage(4).unwrap();
    let opts = InvariantOptions::new(SamplingOptions::new(300_000, 21));
    let t = invariant_tower(&space, &w, &knot_to_holim(&standard_knot("trefoil").unwrap(), 4).unwrap(), &g, &opts).unwrap();
    assert!((t.estimate.value - 1.0).abs() <= 3.0 * t.estimate.std_error, "{:?}", t.estimate);
    let u = invariant_tower(&space, &w, &knot_to_holim(&standard_knot("unknot").unwrap(), 4).unwrap(), &g, &opts).unwrap();
    assert_eq!(u.estimate.value, 0.0);
}

#[test]
fn synthetic_families_near_a_knot_agree() {
    let (space, w) = degree_two();
    let k = standard_knot("trefoil").unwrap();
    let amp = k.embedding_margin() / 5.0;
    let spec = PunctureSpec::for_stage(4).unwrap();
    let g = GammaMap::for_stage(4).unwrap();
    let opts = InvariantOptions::new(SamplingOptions::new(300_000, 5));
    let h1 = synthetic_family(&k, &k.perturb(1, amp).unwrap(), spec.clone()).unwrap();
    let h2 = synthetic_family(&k.perturb(2, amp).unwrap(), &k, spec).unwrap();
    let a = invariant_tower(&space, &w, &h1, &g, &opts).unwrap().estimate;
    let b = invariant_tower(&space, &w, &h2, &g, &opts).unwrap().estimate;
    assert!(a.agrees_with(&b, 3.0), "{a:?} vs {b:?}");
    let d = &space.keys[1];
    let direct = integrate(d, &k, opts.sampling).unwrap();
    let near = integrate_tower(d, &h1, &g, SamplingOptions::new(300_000, 6)).unwrap();
    assert!(direct.agrees_with(&near, 3.0), "{direct:?} vs {near:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_is_a_point_of_the_simplex(k in 1usize..=6, seed in any::<u64>()) {
        let g = GammaMap::for_stage(k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(0..=k);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        x.sort_by(f64::total_cmp);
        let v = g.gamma(&x).unwrap();
        prop_assert_eq!(v.len(), k + 1);
        prop_assert!(v.iter().all(|&c| c >= 0.0));
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in g.spec.occupied(&x) {
            prop_assert_eq!(v[i], 0.0);
        }
    }
}
