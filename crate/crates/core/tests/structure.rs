//! Ensembles, decoding schemes and symmetry groups of the bundled protocols.

use effchan::decoding;
use effchan::ensembles;
use effchan::keyrate::Analysis;
use effchan::linops::{self, CMat};
use effchan::registry;
use effchan::symmetry::{self, ProjectiveUnitary};

#[test]
fn bundled_ensembles_are_oblivious_and_measurements_complete() {
    for name in registry::bundled_names() {
        let spec = ensembles::build_protocol(name).unwrap();
        let (ok, dev) = ensembles::check_oblivious(&spec.ensemble, 1e-12);
        assert!(ok, "{name}: {dev}");
        assert!(spec.measurement.completeness_deviation() < 1e-12, "{name}");
        let p = ensembles::joint_probabilities(&spec.ensemble, &spec.measurement).unwrap();
        for row in p {
            // states carry weight 1/n
            assert!((row.iter().sum::<f64>() - 1.0 / spec.n as f64).abs() < 1e-12, "{name}");
        }
    }
}

#[test]
fn qutrit_sic_is_equiangular_with_36_outcomes() {
    let spec = ensembles::build_protocol("9-3-2-2").unwrap();
    let v: Vec<_> = spec.ensemble.states.iter().map(|x| x.normalize()).collect();
    for i in 0..9 {
        for j in 0..9 {
            let o = v[i].dotc(&v[j]).norm_sqr();
            let want = if i == j { 1.0 } else { 0.25 };
            assert!((o - want).abs() < 1e-12);
        }
    }
    assert_eq!(spec.measurement.len(), 36);
}

#[test]
fn repudiating_outcomes_rule_out_their_labels() {
    for name in ["4-3-2-2", "6-3-2-2", "7-3-2-2", "9-3-2-2"] {
        let spec = ensembles::build_protocol(name).unwrap();
        let p = ensembles::joint_probabilities(&spec.ensemble, &spec.measurement).unwrap();
        for (k, label) in spec.measurement.labels.as_ref().unwrap().iter().enumerate() {
            assert_eq!(label.len(), spec.m);
            for &j in label {
                assert!(p[j][k] < 1e-12, "{name}: outcome {k} does not rule out {j}");
            }
        }
    }
}

#[test]
fn decoding_schemes_cover_uniformly() {
    for name in registry::bundled_names() {
        let spec = ensembles::build_protocol(name).unwrap();
        let scheme = decoding::build_scheme(&spec).unwrap();
        let rep = decoding::validate_scheme(&scheme, &spec.ensemble, &spec.measurement);
        assert!(decoding::uniform(&rep.alice_coverage), "{name}: {:?}", rep.alice_coverage);
        assert!(rep.alice_sifting_deviation < 1e-12, "{name}");
    }
}

#[test]
fn t_sizes() {
    for (name, t) in [("bb84", 4), ("4-2-2-1", 12), ("4-3-2-2", 48), ("7-3-2-2", 1050)] {
        let spec = ensembles::build_protocol(name).unwrap();
        assert_eq!(decoding::build_scheme(&spec).unwrap().allowed.len(), t, "{name}");
    }
}

#[test]
fn success_probabilities() {
    for (name, want) in [("bb84", 0.5), ("4-2-2-1", 1.0 / 3.0)] {
        let spec = ensembles::build_protocol(name).unwrap();
        let scheme = decoding::build_scheme(&spec).unwrap();
        let p = decoding::success_probability(&scheme, &spec).unwrap();
        assert!((p - want).abs() < 1e-12, "{name}: {p}");
    }
}

#[test]
fn group_orders_and_aut_structure() {
    for (name, order, orbits) in
        [("bb84", 8, 1), ("4-2-2-1", 12, 1), ("4-3-2-2", 24, 2), ("6-3-2-2", 60, 8), ("7-3-2-2", 42, 25), ("9-3-2-2", 216, 27)]
    {
        let a = Analysis::new(name).unwrap();
        assert_eq!(a.group.order(), order, "{name}");
        assert_eq!(a.aut.orbits.len(), orbits, "{name}");
        assert!(a.aut.is_diagonal(), "{name}");
        // orbit-stabilizer
        for (o, members) in a.aut.orbits.iter().enumerate() {
            assert_eq!(members.len() * a.aut.stabilizers[o], a.aut.order(), "{name}");
        }
        let covered: usize = a.aut.orbits.iter().map(Vec::len).sum();
        assert_eq!(covered, a.scheme.allowed.len());
    }
    assert!(Analysis::new("4-2-2-1").unwrap().aut.is_transitive());
}

#[test]
fn group_actions_are_permutations() {
    for name in ["4-2-2-1", "7-3-2-2", "9-3-2-2"] {
        let a = Analysis::new(name).unwrap();
        for action in [&a.signal_action, &a.measurement_action] {
            for perm in &action.perm {
                let mut sorted = perm.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..perm.len()).collect::<Vec<_>>(), "{name}");
            }
        }
    }
}

#[test]
fn antiunitary_generator_is_kept() {
    let a = Analysis::new("7-3-2-2").unwrap();
    let anti = a.group.elements.iter().filter(|g| g.antiunitary).count();
    assert_eq!(2 * anti, a.group.order());
}

#[test]
fn closure_under_composition() {
    let a = Analysis::new("4-3-2-2").unwrap();
    let g = &a.group;
    for x in &g.elements {
        for y in &g.elements {
            assert!(g.index_of(&x.compose(y)).is_some());
        }
        assert!(g.index_of(&x.inverse()).is_some());
    }
}

#[test]
fn projective_phases_are_ignored() {
    let x = CMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| linops::C64::new(v, 0.0)));
    let g = ProjectiveUnitary::new(x.clone(), false).unwrap();
    let h = ProjectiveUnitary::new(x * linops::cis(0.7), false).unwrap();
    assert!(g.same_as(&h));
    let grp = symmetry::generate_group(&[g], 10).unwrap();
    assert_eq!(grp.order(), 2);
}

#[test]
fn bad_registry_entries_are_rejected() {
    let good = r#"
name = "x"
n = 2
d = 2
k = 2
m = 1
measurement = "bases"
alice_functions = "ordered_pairs"
default_bound = "css"
[signals]
rule = "listed"
states = [["1", "0"], ["0", "1"]]
[[generators]]
matrix = [["1", "0"], ["0", "1"]]
"#;
    assert!(registry::parse(good).is_ok());
    let bad_expr = good.replace(r#"["0", "1"]]"#, r#"["0", "1 +"]]"#);
    let cfg = registry::parse(&bad_expr).unwrap();
    assert!(ensembles::build_from_config(&cfg).is_err());
    assert!(registry::parse("name = 3").is_err());
    assert!(matches!(ensembles::build_protocol("1-2-3-4"), Err(effchan::Error::UnknownProtocol(_))));
}
