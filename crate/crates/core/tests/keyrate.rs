use std::f64::consts::PI;

use effchan::channels::{self, Channel};
use effchan::keyrate::{self, Analysis, CoefficientSource};
use effchan::linops::{self, C64};
use effchan::registry::Bound;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn tetrahedron_error_rate_formula_at_any_rephasing() {
    let a = Analysis::new("4-2-2-1").unwrap();
    for p in [0.02, 0.1, 0.3] {
        let ks = a.orbit_key_state(0, &channels::depolarizing_op(2, p)).unwrap();
        for psi in [0.0, 0.4, 2.0, 5.5] {
            let s = keyrate::bell_spectrum(&ks.rho, &[0.0, psi]);
            assert!((keyrate::error_rate(&s) - 3.0 * p / (4.0 + 2.0 * p)).abs() < 1e-12);
        }
    }
}

#[test]
fn rephasing_moves_only_phase_components() {
    let a = Analysis::new("7-3-2-2").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let op = Channel::from_kraus(linops::random_kraus(&mut rng, 3, 2)).unwrap().op.op_form;
    let o = a.key_orbits().next().unwrap().index;
    let ks = a.orbit_key_state(o, &op).unwrap();
    let base = keyrate::bell_spectrum(&ks.rho, &[0.0, 0.0]);
    let mut moved = false;
    for i in 0..12 {
        let s = keyrate::bell_spectrum(&ks.rho, &[0.0, i as f64 * PI / 6.0]);
        assert!((keyrate::error_rate(&s) - keyrate::error_rate(&base)).abs() < 1e-10);
        assert!((s.get(0, 0) - base.get(0, 0)).abs() < 1e-12);
        moved |= (s.get(1, 0) - base.get(1, 0)).abs() > 1e-6;
    }
    assert!(moved);
}

#[test]
fn decoder_phases_leave_letter_statistics_alone() {
    let a = Analysis::new("4-3-2-2").unwrap();
    let op = channels::depolarizing_op(3, 0.2);
    let rep = a.orbits[0].representative;
    let z = a.decoder_for(rep, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
    let w = a.decoder_for(rep, &[0.0, 1.3], &[0.0, PI]).unwrap();
    let r1 = keyrate::key_state(&op, &z).unwrap();
    let r2 = keyrate::key_state(&op, &w).unwrap();
    for i in 0..4 {
        assert!((r1.rho[(i, i)] - r2.rho[(i, i)]).norm() < 1e-12);
    }
    assert!((r1.success_probability - r2.success_probability).abs() < 1e-12);
}

#[test]
fn key_states_are_density_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for name in ["bb84", "6-3-2-2", "9-3-2-2"] {
        let a = Analysis::new(name).unwrap();
        let op = Channel::from_kraus(linops::random_kraus(&mut rng, a.d(), 3)).unwrap().op.op_form;
        for o in a.orbits.iter().take(3) {
            let ks = a.orbit_key_state(o.index, &op).unwrap();
            assert!((linops::trace(&ks.rho) - C64::new(1.0, 0.0)).norm() < 1e-12);
            assert!(linops::max_abs_diff(&ks.rho, &ks.rho.adjoint()) < 1e-12);
            assert!(linops::min_eigenvalue(&ks.rho) > -1e-10);
            let s = keyrate::bell_spectrum(&ks.rho, &[0.0, 0.3]);
            assert!(s.b.iter().all(|&x| x > -1e-10));
            assert!((s.total() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn zero_success_is_an_error() {
    let a = Analysis::new("4-2-2-1").unwrap();
    let zero = linops::CMat::zeros(4, 4);
    assert!(keyrate::key_state(&zero, &a.orbits[0].decoder).is_err());
}

#[test]
fn hashing_rate_decreases_with_noise() {
    for name in ["4-2-2-1", "9-3-2-2"] {
        let a = Analysis::new(name).unwrap();
        let t = a.threshold(Bound::Hashing, CoefficientSource::Registered).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..=30 {
            let p = 0.01 * i as f64;
            let ks = a.orbit_key_state(t.binding_orbit, &channels::depolarizing_op(a.d(), p)).unwrap();
            let r = keyrate::hashing_rate(&keyrate::bell_spectrum(&ks.rho, &t.psi));
            assert!(r < last, "{name} at p = {p}");
            last = r;
        }
    }
}

#[test]
fn tetrahedron_rate_vanishes_near_one_sixth() {
    let a = Analysis::new("4-2-2-1").unwrap();
    let t = a.threshold(Bound::Hashing, CoefficientSource::Registered).unwrap();
    let ks = a.orbit_key_state(0, &channels::depolarizing_op(2, 0.1669)).unwrap();
    let r = keyrate::hashing_rate(&keyrate::bell_spectrum(&ks.rho, &t.psi));
    assert!(r.abs() < 1e-3, "{r}");
    assert!((t.p_star - 0.1669).abs() < 1e-4);
    assert!((t.fidelity_star - 0.917).abs() < 1e-3);
}

#[test]
fn css_roots() {
    assert!((keyrate::css_threshold_for(1.0).unwrap() - 0.1100).abs() < 5e-5);
    assert!((keyrate::css_threshold_for(1.5).unwrap() - 0.0890).abs() < 5e-5);
    assert!((keyrate::css_rate(0.0, 0.0) - 1.0).abs() < 1e-15);
    assert!(keyrate::css_threshold_for(f64::INFINITY).is_err());
}

#[test]
fn bb84_hashing_matches_symmetric_css() {
    let a = Analysis::new("bb84").unwrap();
    let h = a.threshold(Bound::Hashing, CoefficientSource::Registered).unwrap();
    let c = a.threshold(Bound::Css, CoefficientSource::Registered).unwrap();
    assert!((h.epsilon_star - 0.110028).abs() < 1e-5, "{}", h.epsilon_star);
    assert!((c.epsilon_star - 0.110028).abs() < 1e-5);
}

#[test]
fn thresholds_zero_the_bound() {
    let a = Analysis::new("9-3-2-2").unwrap();
    let t = a.threshold(Bound::Hashing, CoefficientSource::Registered).unwrap();
    let (rate, _) = a.orbit_hashing_rate(t.binding_orbit, t.epsilon_star).unwrap();
    assert!(rate.abs() < 1e-8);
    let a = Analysis::new("7-3-2-2").unwrap();
    let t = a.threshold(Bound::Css, CoefficientSource::Registered).unwrap();
    let c = t.css_coefficient.unwrap();
    assert!((c - 9.0 / 8.0).abs() < 1e-15);
    assert!(keyrate::css_rate(t.epsilon_star, c * t.epsilon_star).abs() < 1e-9);
    let eps = a.observed_error_rate(&channels::depolarizing_op(3, t.p_star));
    assert!((eps - t.epsilon_star).abs() < 1e-9);
}

#[test]
fn css_needs_a_coefficient() {
    let a = Analysis::new("4-2-2-1").unwrap();
    assert!(matches!(a.threshold(Bound::Css, CoefficientSource::Registered), Err(effchan::Error::Invalid(_))));
}

#[test]
fn computed_coefficient_drives_the_css_threshold() {
    let a = Analysis::new("4-3-2-2").unwrap();
    let rel = a.phase_relation().unwrap();
    let t = a.threshold(Bound::Css, CoefficientSource::Computed).unwrap();
    assert_eq!(t.css_coefficient, Some(rel.coefficient));
    assert!((t.epsilon_star - keyrate::css_threshold_for(rel.coefficient).unwrap()).abs() < 1e-15);
    assert!(rel.per_orbit.iter().all(|o| o.ratio <= rel.coefficient));
}

#[test]
fn tetrahedron_phase_relation_is_symmetric() {
    let rel = Analysis::new("4-2-2-1").unwrap().phase_relation().unwrap();
    assert!((rel.coefficient - 1.0).abs() < 1e-6);
}

#[test]
fn aligned_bob_phases_beat_the_opposite_choice() {
    // Alice (0, 1) with zero phases; Bob keeps the outcomes ruling out {1, 2} and {0, 3}
    let a = Analysis::new("4-3-2-2").unwrap();
    let labels = a.spec.measurement.labels.as_ref().unwrap();
    let outcome = |l: [usize; 2]| labels.iter().position(|x| *x == l).unwrap();
    let s = a.scheme.alice.iter().position(|x| *x == vec![0, 1]).unwrap();
    let t = a.scheme.bob.iter().position(|x| *x == vec![outcome([1, 2]), outcome([0, 3])]).unwrap();
    let idx = a.scheme.allowed.iter().position(|&p| p == (s, t)).unwrap();
    let ratio = |bob: [f64; 2]| {
        let dec = a.decoder_for(idx, &[0.0, 0.0], &bob).unwrap();
        keyrate::optimize_angles(1, |x| a.phase_ratio_with_decoder(&dec, &[0.0, x[0]]).unwrap()).1
    };
    let (zero, pi) = (ratio([0.0, 0.0]), ratio([0.0, PI]));
    // with real positive leading components for every outcome vector, a zero difference
    // is the aligned choice; the opposite one already has phase errors without noise
    assert!(zero < pi, "{zero} vs {pi}");
    assert!(pi.is_infinite());
    let orbit = &a.orbits[a.aut.orbit_of[idx]];
    if orbit.representative == idx {
        assert!(orbit.bob_phases.iter().all(|x| x.abs() < 1e-12));
    }
}

#[test]
fn oracle_with_unitary_and_antiunitary_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let a = Analysis::new("7-3-2-2").unwrap();
    let k = linops::random_kraus(&mut rng, 3, 2);
    let op = Channel::from_kraus(k.clone()).unwrap().op.op_form;
    for o in &a.orbits {
        let f = a.orbit_key_state(o.index, &op).unwrap();
        let d = a.orbit_key_state_direct(o.index, &k).unwrap();
        assert!(linops::max_abs_diff(&f.rho, &d.rho) < 1e-10);
        assert!((f.success_probability - d.success_probability).abs() < 1e-12);
    }
}
