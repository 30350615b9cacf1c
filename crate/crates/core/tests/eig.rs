mod common;

use levelflow::linalg::{self, CMat, C64};
use levelflow::{eig_general, eig_hermitian, LevelflowError, Settings};
use proptest::prelude::*;
use rand::SeedableRng;

#[test]
fn hermitian_matches_inertia_bisection() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let st = Settings::default();
    for n in 1..=12 {
        let h = common::random_hermitian(&mut rng, n);
        let s = eig_hermitian(&h, &st).unwrap();
        let oracle = common::bisection_eigenvalues(&h);
        for (e, o) in s.eigenvalues.iter().zip(&oracle) {
            assert!((e.re - o).abs() < 1e-12, "n = {n}: {} vs {o}", e.re);
        }
    }
}

#[test]
fn general_solver_on_pt_model_matches_closed_form() {
    let st = Settings::default();
    for g in [0.0, 0.3, 0.5, 0.9, 1.5] {
        let h = CMat::from_row_slice(2, 2, &[C64::new(0.0, g), C64::new(-1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, -g)]);
        let s = eig_general(&h, &st).unwrap();
        let r = C64::new(1.0 - g * g, 0.0).sqrt();
        let mut expected = [-r, r];
        expected.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (e, x) in s.eigenvalues.iter().zip(&expected) {
            assert!((e - x).norm() < 1e-13, "g = {g}: {e} vs {x}");
        }
        assert!(s.max_residual(&h) < 1e-13);
    }
}

#[test]
fn exceptional_matrix_is_defective() {
    let st = Settings::default();
    let h = CMat::from_row_slice(2, 2, &[C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)]);
    let s = eig_general(&h, &st).unwrap();
    assert!(s.defective);
    assert!(s.eigenvalues.iter().all(|e| e.norm() < 1e-7));
}

#[test]
fn oversize_general_matrix_rejected() {
    let h = CMat::identity(13, 13);
    assert!(matches!(eig_general(&h, &Settings::default()), Err(LevelflowError::UnsupportedSize { dim: 13, limit: 12 })));
}

fn hermitian_strategy() -> impl Strategy<Value = CMat> {
    (1usize..=8).prop_flat_map(|n| {
        proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n * n).prop_map(move |raw| {
            let mut h = CMat::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let (re, im) = raw[i * n + j];
                    if i == j {
                        h[(i, i)] = C64::new(re, 0.0);
                    } else {
                        h[(i, j)] = C64::new(re, im);
                        h[(j, i)] = C64::new(re, -im);
                    }
                }
            }
            h
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermitian_eigenpairs_are_orthonormal_and_accurate(h in hermitian_strategy()) {
        let st = Settings::default();
        let s = eig_hermitian(&h, &st).unwrap();
        let n = h.nrows();
        let scale = 1.0 + linalg::frobenius(&h);
        prop_assert!(s.max_residual(&h) <= 1e-12 * scale);
        for a in 0..n {
            for b in 0..n {
                let ov = linalg::inner(&s.vector(a), &s.vector(b));
                let expected = if a == b { 1.0 } else { 0.0 };
                prop_assert!((ov - C64::new(expected, 0.0)).norm() <= 1e-12);
            }
            let v = s.vector(a);
            let anchor = v[linalg::phase_anchor(&v)];
            prop_assert!(anchor.im == 0.0 && anchor.re > 0.0);
        }
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0].re <= w[1].re));
    }

    #[test]
    fn phase_scramble_does_not_change_fixed_vectors(h in hermitian_strategy(), seed in 0u64..1000) {
        let a = eig_hermitian(&h, &Settings::default()).unwrap();
        let b = eig_hermitian(&h, &Settings::default().with_phase_scramble(seed)).unwrap();
        let gap = a.eigenvalues.windows(2).map(|w| w[1].re - w[0].re).fold(f64::INFINITY, f64::min);
        prop_assume!(gap > 1e-6);
        for j in 0..h.nrows() {
            let d: f64 = a.vector(j).iter().zip(b.vector(j)).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            prop_assert!(d <= 1e-12);
        }
    }
}
