use effchan::channels::{self, Channel};
use effchan::keyrate::Analysis;
use effchan::linops::{self, C64};
use effchan::symmetry::FiniteMatrixGroup;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn symmetrizer_is_symmetric_and_idempotent_up_to_n() {
    for name in ["bb84", "4-2-2-1", "7-3-2-2"] {
        let a = Analysis::new(name).unwrap();
        assert!(a.symmetrizer.hermiticity_error() < 1e-12, "{name}");
        assert!(a.symmetrizer.idempotence_error() < 1e-12, "{name}");
    }
}

#[test]
fn family_dimensions() {
    for (name, dim, vertices) in [("4-2-2-1", 2, 2), ("9-3-2-2", 2, 2), ("bb84", 3, 3), ("7-3-2-2", 4, 4)] {
        let a = Analysis::new(name).unwrap();
        assert_eq!(a.family.dim(), dim, "{name}");
        let s = a.family.simplex().unwrap();
        assert_eq!(s.vertices.len(), vertices, "{name}");
        assert!(s.identity_vertex.is_some(), "{name}");
    }
}

#[test]
fn vertices_are_cptp_fixed_points() {
    for name in ["4-3-2-2", "6-3-2-2", "9-3-2-2"] {
        let a = Analysis::new(name).unwrap();
        for v in &a.family.simplex().unwrap().vertices {
            let e = Channel::from_op(linops::SuperOp::from_op_form(v.clone()).unwrap());
            assert!(channels::cptp_check(&e).is_cptp(1e-10), "{name}");
            assert!(linops::max_abs_diff(&a.symmetrizer.symmetrize_op(v), v) < 1e-10, "{name}");
        }
    }
}

#[test]
fn depolarizing_channels_are_symmetric() {
    for name in ["4-2-2-1", "9-3-2-2"] {
        let a = Analysis::new(name).unwrap();
        let op = channels::depolarizing_op(a.d(), 0.3);
        assert!(linops::max_abs_diff(&a.symmetrizer.symmetrize_op(&op), &op) < 1e-12);
        assert!(a.family.contains(&op, 1e-12));
    }
}

#[test]
fn symmetrized_random_channels_land_in_the_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = Analysis::new("4-3-2-2").unwrap();
    for _ in 0..10 {
        let e = Channel::from_kraus(linops::random_kraus(&mut rng, 3, 2)).unwrap();
        let s = channels::symmetrize_channel(&a.symmetrizer, &e).unwrap();
        assert!(channels::cptp_check(&s).is_cptp(1e-10));
        assert!(a.family.contains(&s.op.op_form, 1e-10));
    }
}

#[test]
fn non_cptp_input_is_rejected() {
    let a = Analysis::new("4-2-2-1").unwrap();
    let op = channels::phi_projector(2) * C64::new(2.0, 0.0);
    let e = Channel::from_op(linops::SuperOp::from_op_form(op).unwrap());
    assert!(channels::symmetrize_channel(&a.symmetrizer, &e).is_err());
}

#[test]
fn depolarizing_kraus_and_op_agree() {
    for d in [2, 3] {
        for p in [0.0, 0.2, channels::depolarizing_max(d)] {
            let e = channels::depolarizing_channel(d, p).unwrap();
            let from_kraus = linops::SuperOp::from_kraus(&e.kraus_ops().unwrap()).unwrap();
            assert!(linops::max_abs_diff(&from_kraus.op_form, &channels::depolarizing_op(d, p)) < 1e-12);
        }
        assert!(channels::depolarizing_channel(d, channels::depolarizing_max(d) + 0.01).is_err());
    }
}

#[test]
fn trivial_group_fixes_everything() {
    let g = FiniteMatrixGroup::trivial(2);
    let pairs = vec![(g.elements[0].clone(), g.elements[0].clone())];
    let r = channels::symmetrizer_from_pairs(pairs, 2);
    let fam = channels::fixed_space(&r).unwrap();
    assert_eq!(fam.dim(), 16);
}
