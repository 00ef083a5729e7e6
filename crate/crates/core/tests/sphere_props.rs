use barytree::sphere::{make_quadrature, stereo_project, stereo_unproject, PlanePoint, SpherePoint};
use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;

fn unit(v: [f64; 3]) -> Option<Vector3<f64>> {
    let v = Vector3::from(v);
    (v.norm() > 1e-3).then(|| v / v.norm())
}

/// Legendre polynomial P_l by the three-term recurrence.
fn legendre(l: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let p2 = ((2 * k + 1) as f64 * t * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn vec3() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0..1.0f64)
}

proptest! {
    #[test]
    fn sphere_round_trip(v in vec3()) {
        prop_assume!(unit(v).is_some());
        let p = SpherePoint::new(unit(v).unwrap()).unwrap();
        let q = stereo_project(stereo_unproject(&p));
        prop_assert!((p.vector() - q.vector()).norm() < 1e-12);
    }

    #[test]
    fn plane_round_trip(re in -1e6..1e6f64, im in -1e6..1e6f64) {
        let z = PlanePoint::finite(re, im);
        let back = stereo_unproject(&stereo_project(z)).value().unwrap();
        let scale = 1.0 + re.hypot(im).powi(2);
        prop_assert!((back.re - re).abs() <= 1e-12 * scale && (back.im - im).abs() <= 1e-12 * scale);
    }

    // Zonal harmonics about a random axis span every degree-l harmonic
    // class, so these integrals exercise the exactness claim.
    #[test]
    fn zonal_harmonics_integrate_exactly(order in 3usize..24, v in vec3(), l in 0usize..24) {
        prop_assume!(unit(v).is_some() && l <= order);
        let a = unit(v).unwrap();
        let rule = make_quadrature(order).unwrap();
        let sum: f64 = rule.weights().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(rule.max_weight() < 0.25);
        let got = rule.integrate(|p| legendre(l, p.vector().dot(&a)));
        let want = if l == 0 { 1.0 } else { 0.0 };
        prop_assert!((got - want).abs() < 1e-10, "l = {l}: {got}");
    }

    #[test]
    fn rotation_leaves_integrals_unchanged(order in 3usize..16, axis in vec3(), angle in 0.0..std::f64::consts::TAU, forms in prop::collection::vec(vec3(), 1..6)) {
        prop_assume!(unit(axis).is_some() && forms.len() <= order);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::from(axis)), angle);
        let rule = make_quadrature(order).unwrap();
        let turned = rule.rotated(&rot);
        // A product of linear forms is a polynomial of degree ≤ order.
        let g = |p: &SpherePoint| forms.iter().map(|f| Vector3::from(*f).dot(&p.vector()) + 0.5).product::<f64>();
        let rotated_g = |p: &SpherePoint| g(&SpherePoint::new(rot.inverse() * p.vector()).unwrap());
        prop_assert!((rule.integrate(g) - turned.integrate(rotated_g)).abs() < 1e-10);
        prop_assert!((rule.integrate(g) - turned.integrate(g)).abs() < 1e-10);
    }
}
