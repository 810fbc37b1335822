use core::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use proptest::prelude::*;
use telecert_core::certify::{chsh, chsh_with, correlator_with, ChshSettings, CoarseGraining, GRAINING_PAIRS};
use telecert_core::geometry::{matmul, sector_of, tetrahedron_vertex, BitPair, BlochVector, PauliRotation, Vec3};
use telecert_core::protocols::Protocol;
use telecert_core::stats::{extended_b_settings, fit_conditional_vectors};

fn unit() -> impl Strategy<Value = BlochVector> {
    (-1.0f64..=1.0, 0.0f64..2.0 * PI).prop_map(|(z, phi)| BlochVector::from_angles(z.acos(), phi))
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn bits() -> impl Strategy<Value = BitPair> {
    (0usize..4).prop_map(BitPair::from_index)
}

fn settings() -> impl Strategy<Value = ChshSettings> {
    (unit(), unit(), unit(), unit()).prop_map(|(a0, a1, b0, b1)| ChshSettings { a0, a1, b0, b1 })
}

fn exact_protocol() -> impl Strategy<Value = Protocol> {
    prop_oneof![
        (0.0f64..=1.0).prop_map(|l| Protocol::ideal(l).unwrap()),
        Just(Protocol::Gisin),
        Just(Protocol::GisinHashed),
        Just(Protocol::lowfid()),
        (0.58f64..=1.0).prop_map(|w| Protocol::pcrit(w).unwrap()),
        (0.58f64..=1.0).prop_map(|w| Protocol::pcrit_complementary(w).unwrap()),
    ]
}

fn transpose(m: [[i8; 3]; 3]) -> [[i8; 3]; 3] {
    let mut t = [[0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

#[test]
fn rotation_group_closure() {
    let identity = PauliRotation::for_bits(BitPair::new(false, false)).matrix();
    assert_eq!(identity, [[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
    for p in BitPair::ALL {
        let r = PauliRotation::for_bits(p).matrix();
        // orthogonal, proper, and its own inverse
        assert_eq!(matmul(r, transpose(r)), identity);
        assert_eq!(matmul(r, r), identity);
        let det = r[0][0] * r[1][1] * r[2][2];
        assert_eq!(det, 1);
        for q in BitPair::ALL {
            let product = matmul(r, PauliRotation::for_bits(q).matrix());
            let found: Vec<BitPair> = BitPair::ALL
                .into_iter()
                .filter(|&s| PauliRotation::for_bits(s).matrix() == product)
                .collect();
            assert_eq!(found, vec![p.xor(q)], "{p} * {q}");
            assert_eq!(
                PauliRotation::for_bits(p).compose(PauliRotation::for_bits(q)).matrix(),
                product
            );
        }
    }
}

#[test]
fn tetrahedron_is_regular() {
    for p in BitPair::ALL {
        for q in BitPair::ALL {
            let d = tetrahedron_vertex(p).dot(tetrahedron_vertex(q));
            let want = if p == q { 1.0 } else { -1.0 / 3.0 };
            assert!((d - want).abs() < 1e-15, "{p} {q} {d}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn compensation_identity(v in vec3(), b in unit(), c in bits()) {
        let r = PauliRotation::for_bits(c);
        let lhs = r.apply(v).dot(b.vec());
        let rhs = v.dot(r.apply(b.vec()));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + v.norm()));
    }

    #[test]
    fn rotation_preserves_norm(v in unit(), c in bits()) {
        let w = PauliRotation::for_bits(c).apply(v.vec());
        prop_assert!((w.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sector_is_nearest_vertex(a in unit()) {
        let s = sector_of(a);
        let d = a.dot(s.center);
        for p in BitPair::ALL {
            prop_assert!(d >= a.dot(tetrahedron_vertex(p)));
        }
    }

    #[test]
    fn distributions_normalized(p in exact_protocol(), a in unit(), b in unit()) {
        let d = p.distribution(a, b).unwrap();
        prop_assert!((d.total() - 1.0).abs() <= 1e-12);
        prop_assert!(d.probabilities().iter().all(|&x| x >= -1e-15));
    }

    #[test]
    fn fit_recovers_ideal_vectors(lambda in 0.0f64..=1.0, a in unit()) {
        let p = Protocol::ideal(lambda).unwrap();
        let fit = fit_conditional_vectors(&p, a, &extended_b_settings()).unwrap();
        prop_assert!(fit.max_residual() < 1e-10);
        for cell in fit.cells.iter().flatten() {
            let want = PauliRotation::for_bits(cell.bits).apply(a.vec()) * lambda;
            prop_assert!(cell.v.max_abs_diff(want) < 1e-10);
            prop_assert!(cell.compensated.max_abs_diff(a.vec() * lambda) < 1e-10);
        }
    }

    #[test]
    fn ideal_chsh_within_tsirelson(s in settings(), lambda in 0.0f64..=1.0) {
        let p = Protocol::ideal(lambda).unwrap();
        let v = chsh(&p, &s).unwrap().value;
        prop_assert!(v.abs() <= 2.0 * SQRT_2 * lambda + 1e-12);
    }

    #[test]
    fn chsh_linear_in_lambda(s in settings(), lambda in 0.0f64..=1.0) {
        let full = chsh(&Protocol::ideal(1.0).unwrap(), &s).unwrap().value;
        let part = chsh(&Protocol::ideal(lambda).unwrap(), &s).unwrap().value;
        prop_assert!((part - lambda * full).abs() < 1e-12);
    }

    #[test]
    fn local_models_respect_bound(s in settings(), pair in 0usize..3) {
        for p in [Protocol::Gisin, Protocol::GisinHashed] {
            let v = chsh_with(&p, &s, GRAINING_PAIRS[pair]).unwrap().value;
            prop_assert!(v.abs() <= 2.0 + 1e-12, "{} {}", p, v);
        }
    }

    #[test]
    fn pcrit_respects_bound(s in settings()) {
        let p = Protocol::pcrit(FRAC_1_SQRT_2).unwrap();
        prop_assert!(chsh(&p, &s).unwrap().value.abs() <= 2.0 + 1e-6);
    }

    #[test]
    fn beta_flip_negates_correlators(p in exact_protocol(), a in unit(), b in unit()) {
        let d = p.distribution(a, b).unwrap();
        let f = d.flip_beta();
        for g in CoarseGraining::ALL {
            prop_assert!((correlator_with(&f, g) + correlator_with(&d, g)).abs() < 1e-15);
        }
    }
}
