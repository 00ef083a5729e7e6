use barytree::h3::Isometry;
use barytree::rational::RationalMap;
use barytree::sphere::PlanePoint;
use barytree::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn degrees_multiply_and_critical_count(seed in any::<u64>(), d in 1usize..5, e in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = RationalMap::random(d, 1e-3, &mut rng);
        let g = RationalMap::random(e, 1e-3, &mut rng);
        let fg = f.compose(&g).unwrap();
        prop_assert_eq!(fg.degree(), d * e);
        prop_assert_eq!(f.critical_points().unwrap().len(), 2 * d - 2);
    }

    #[test]
    fn eval_survives_huge_arguments(seed in any::<u64>(), d in 1usize..6, exp in 0.0..150.0f64, arg in 0.0..std::f64::consts::TAU) {
        let f = RationalMap::random(d, 1e-3, &mut ChaCha8Rng::seed_from_u64(seed));
        let z = Complex64::from_polar(10f64.powf(exp), arg);
        let w = f.eval_sphere(&barytree::sphere::stereo_project(PlanePoint::finite(z.re, z.im))).unwrap();
        prop_assert!(w.vector().iter().all(|c| c.is_finite()));
        prop_assert!((w.vector().norm() - 1.0).abs() < 1e-12);
    }

    // Fixed-point lengths are multiplier moduli, so conjugation keeps the
    // multiset of lengths.
    #[test]
    fn cycle_length_is_chart_independent(seed in any::<u64>(), d in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = RationalMap::random(d, 1e-2, &mut rng);
        let m = Isometry::random(&mut rng);
        let g = f.conjugate(&m);
        let lengths = |h: &RationalMap| -> Vec<f64> {
            sorted(h.find_cycles(1).unwrap().iter().map(|c| h.cycle_length(c).unwrap()).collect())
        };
        let (a, b) = (lengths(&f), lengths(&g));
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            // Near-parabolic points lose digits in the root finder.
            prop_assume!(x.abs() > 1e-3);
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "{a:?} vs {b:?}");
        }
    }
}
