mod common;

use common::*;
use expfact::algebra::{Backend, MatrixOverAlgebra, ZERO_TOL};
use expfact::dense::Mat;
use expfact::general::{column_reduce, factorize_two_exp, regroup_unitriangular, single_exp_finite};
use expfact::literal::MatrixSpec;
use expfact::matfunc::{log_unipotent, mat_exp};
use expfact::triangular::two_exp_triangular;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn det_exp_is_exp_trace(seed in any::<u64>(), n in 1usize..5) {
        let sp = space(Backend::CirclePath { samples: 32 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_matrix(&sp, &mut rng, n, 2, 0.5);
        let lhs = mat_exp(&b).unwrap().det();
        let rhs = b.trace().exp();
        let scale = rhs.max_abs().max(1.0);
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-11 * scale);
    }

    #[test]
    fn literal_json_round_trip(seed in any::<u64>(), n in 1usize..4, disk in any::<bool>()) {
        let sp = if disk {
            space(Backend::DiskGrid { boundary_count: 16, radial_rings: 2, degree_cap: 4 })
        } else {
            space(Backend::IntervalPath { samples: 9 })
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&sp, &mut rng, n, 3, 2.0);
        let text = serde_json::to_string(&MatrixSpec::from_matrix(&m)).unwrap();
        let (_, back) = MatrixSpec::from_json(&text).unwrap().build().unwrap();
        prop_assert_eq!(back.max_diff(&m).unwrap(), 0.0);
    }

    #[test]
    fn column_reduce_is_unipotent_upper(seed in any::<u64>(), n in 2usize..5) {
        let sp = space(Backend::FinitePoints { count: 6 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let col: Vec<_> = (0..n).map(|_| random_element(&sp, &mut rng, 0, 1.0)).collect();
        let cm = column_reduce(&col, seed).unwrap();
        for s in 0..sp.len() {
            let m = cm.at(s);
            for i in 0..n {
                prop_assert!((m[(i, i)] - c(1.0, 0.0)).norm() == 0.0);
                for j in 0..i {
                    prop_assert!(m[(i, j)].norm() == 0.0);
                }
            }
            let first: num_complex::Complex64 = (0..n).map(|j| m[(0, j)] * col[j].value(s)).sum();
            prop_assert!(first.norm() > ZERO_TOL);
        }
    }

    #[test]
    fn regroup_keeps_product(seed in any::<u64>(), t in 2usize..9, n in 2usize..4) {
        let sp = space(Backend::FinitePoints { count: 2 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factors: Vec<MatrixOverAlgebra> = (0..t)
            .map(|i| {
                let samples = (0..2)
                    .map(|_| Mat::from_fn(n, |r, q| match (r == q, (q > r) == (i % 2 == 0)) {
                        (true, _) => c(1.0, 0.0),
                        (false, true) => in_disk(&mut rng, 1.0),
                        _ => c(0.0, 0.0),
                    }))
                    .collect();
                MatrixOverAlgebra::from_samples(&sp, n, samples).unwrap()
            })
            .collect();
        let out = regroup_unitriangular(&factors).unwrap();
        prop_assert_eq!(out.len(), t / 2 + 1);
        prop_assert!(out.iter().all(|f| log_unipotent(f).is_ok()));
        prop_assert!(product(&out).max_diff(&product(&factors)).unwrap() <= 1e-10);
    }

    #[test]
    fn single_exp_recovers_exp(seed in any::<u64>(), n in 1usize..5) {
        let sp = space(Backend::FinitePoints { count: 5 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = mat_exp(&random_matrix(&sp, &mut rng, n, 0, 1.0)).unwrap();
        let b = single_exp_finite(&a).unwrap();
        prop_assert!(mat_exp(&b).unwrap().max_diff(&a).unwrap() <= 1e-9 * a.max_abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn small_general_factorizations(seed in any::<u64>(), n in 2usize..4) {
        let sp = space(Backend::FinitePoints { count: 4 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rng.gen_range(0.1..0.5);
        let p = random_matrix(&sp, &mut rng, n, 0, r);
        let q = random_matrix(&sp, &mut rng, n, 0, r);
        let a = mat_exp(&p).unwrap().mul(&mat_exp(&q).unwrap()).unwrap();
        let f = factorize_two_exp(&a, 0.25).unwrap();
        prop_assert!(exp_product(&[f.b1, f.b2]).max_diff(&a).unwrap() <= 1e-6);
        prop_assert!(f.certificate.verified);
    }

    #[test]
    fn triangular_route_on_the_circle(seed in any::<u64>(), n in 2usize..4) {
        let sp = space(Backend::CirclePath { samples: 64 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_upper_prod_one(&sp, &mut rng, n, 2);
        let f = two_exp_triangular(&a, 0.25).unwrap();
        prop_assert!(f.certificate.verified);
        prop_assert!(exp_product(&[f.b1, f.b2]).max_diff(&a).unwrap() <= 1e-7);
    }
}
