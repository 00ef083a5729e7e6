use barytree::h3::{
    from_cylindrical, hyp_dist, mx_closed_form, mx_translation, pair_annulus, to_cylindrical, BallPoint, CylindricalPoint, Isometry,
};
use barytree::sphere::SpherePoint;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ball(dir: [f64; 3], depth: f64) -> Option<BallPoint> {
    let v = Vector3::from(dir);
    (v.norm() > 1e-3).then(|| BallPoint::at_distance(&SpherePoint::new(v / v.norm()).unwrap(), depth).unwrap())
}

fn point(max_depth: f64) -> impl Strategy<Value = Option<BallPoint>> {
    (prop::array::uniform3(-1.0..1.0f64), 0.0..max_depth).prop_map(|(d, r)| ball(d, r))
}

proptest! {
    #[test]
    fn translation_matches_closed_form(x in point(5.0), z in point(5.0)) {
        let (x, z) = match (x, z) { (Some(x), Some(z)) => (x, z), _ => return Ok(()) };
        let got = mx_translation(&x).apply_ball(&z).unwrap().vector();
        let want = mx_closed_form(&x.vector(), &z.vector());
        prop_assert!((got - want).norm() < 1e-10);
    }

    #[test]
    fn action_respects_composition(seed in any::<u64>(), x in point(4.0)) {
        let Some(x) = x else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (Isometry::random(&mut rng), Isometry::random(&mut rng));
        let lhs = a.compose(&b).apply_ball(&x).unwrap();
        let rhs = a.apply_ball(&b.apply_ball(&x).unwrap()).unwrap();
        prop_assert!(hyp_dist(&lhs, &rhs) < 1e-10);
        prop_assert!((a.compose(&b).det().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isometries_preserve_distance(seed in any::<u64>(), x in point(4.0), y in point(4.0)) {
        let (x, y) = match (x, y) { (Some(x), Some(y)) => (x, y), _ => return Ok(()) };
        let m = Isometry::random(&mut ChaCha8Rng::seed_from_u64(seed));
        let d = hyp_dist(&m.apply_ball(&x).unwrap(), &m.apply_ball(&y).unwrap());
        prop_assert!((d - hyp_dist(&x, &y)).abs() < 1e-9 * (1.0 + d));
    }

    #[test]
    fn modulus_is_distance_over_two_pi(x in point(6.0), dir in prop::array::uniform3(-1.0..1.0f64), dist in 0.1..20.0f64) {
        let Some(x) = x else { return Ok(()) };
        let Some(step) = ball(dir, dist) else { return Ok(()) };
        let y = mx_translation(&x).apply_ball(&step).unwrap();
        let a = pair_annulus(&x, &y).unwrap();
        let d = hyp_dist(&x, &y);
        prop_assert!((a.modulus() - d / std::f64::consts::TAU).abs() < 1e-8);
    }

    #[test]
    fn cylindrical_round_trip(r in 0.0..6.0f64, theta in 0.0..std::f64::consts::TAU, h in -8.0..8.0f64) {
        let c = CylindricalPoint::new(r, theta, h).unwrap();
        let back = to_cylindrical(&from_cylindrical(&c).unwrap());
        prop_assert!((back.r - r).abs() < 1e-9 && (back.h - h).abs() < 1e-9);
        if r > 1e-6 {
            let dt = (back.theta - theta).abs();
            prop_assert!(dt.min(std::f64::consts::TAU - dt) < 1e-9);
        }
    }
}
