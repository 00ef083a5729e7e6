use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn tree(vertices: &[&str], edges: &[(&str, &str, f64)], ends: &[&str]) -> FiniteTree {
    serde_json::from_value(serde_json::json!({
        "vertices": vertices,
        "edges": edges.iter().map(|(a, b, l)| serde_json::json!({"from": a, "to": b, "length": l})).collect::<Vec<_>>(),
        "ends": ends,
    }))
    .unwrap()
}

fn tripod() -> FiniteTree {
    tree(
        &["o", "a", "b", "c"],
        &[("o", "a", 1.0), ("o", "b", 2.0), ("o", "c", 3.0)],
        &[],
    )
}

fn v(t: &FiniteTree, l: &str) -> TreePoint {
    TreePoint::Vertex(t.vertex(l).unwrap())
}

#[test]
fn rejects_bad_trees() {
    let bad = serde_json::json!({"vertices": ["a", "b", "c"], "edges": [{"from": "a", "to": "b", "length": 1.0}, {"from": "b", "to": "a", "length": 1.0}]});
    assert!(serde_json::from_value::<FiniteTree>(bad).is_err());
    let zero = serde_json::json!({"vertices": ["a", "b"], "edges": [{"from": "a", "to": "b", "length": 0.0}]});
    assert!(serde_json::from_value::<FiniteTree>(zero).is_err());
    let inner_end = serde_json::json!({"vertices": ["a", "b", "c"], "edges": [{"from": "a", "to": "b", "length": 1.0}, {"from": "b", "to": "c", "length": 1.0}], "ends": ["b"]});
    assert!(serde_json::from_value::<FiniteTree>(inner_end).is_err());
    let extra = serde_json::json!({"vertices": ["a"], "edges": [], "colour": 1});
    assert!(serde_json::from_value::<FiniteTree>(extra).is_err());
}

#[test]
fn distances_and_json_round_trip() {
    let t = tripod();
    let p = TreePoint::OnEdge { edge: 1, offset: 0.5 };
    assert!((t.distance(&p, &v(&t, "c")) - 3.5).abs() < 1e-15);
    assert!((t.distance(&p, &v(&t, "b")) - 1.5).abs() < 1e-15);
    let back: FiniteTree = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
    assert_eq!(back, t);
}

#[test]
fn hull_examples() {
    let t = tripod();
    assert_eq!(t.hull(&["o", "a", "b", "c"]).unwrap(), t);
    let path = t.hull(&["a", "c"]).unwrap();
    assert_eq!(path.vertex_count(), 3);
    assert_eq!(path.labels(), &["o", "a", "c"]);
    let star = t.hull(&["a", "b", "c"]).unwrap();
    assert_eq!(star.vertex_count(), 4);
    let again = star.hull(&["a", "b", "c"]).unwrap();
    assert_eq!(again, star);
    assert!(t.hull(&[]).is_err());
    assert!(t.hull(&["zz"]).is_err());
}

#[test]
fn project_examples() {
    let t = tripod();
    let ob: BTreeSet<usize> = [t.vertex("o").unwrap(), t.vertex("b").unwrap()].into();
    assert_eq!(t.project(&v(&t, "a"), &ob).unwrap(), v(&t, "o"));
    let inside = TreePoint::OnEdge { edge: 1, offset: 0.7 };
    assert_eq!(t.project(&inside, &ob).unwrap(), inside);
    let mid_oc = TreePoint::OnEdge { edge: 2, offset: 1.5 };
    assert_eq!(t.project(&mid_oc, &ob).unwrap(), v(&t, "o"));
}

#[test]
fn point_along_walks_through_vertices() {
    let t = tripod();
    let p = t.point_along(&v(&t, "a"), &v(&t, "c"), 2.5);
    let c_edge = t.vertex("c").unwrap();
    let e = t.incident(c_edge)[0];
    assert!(t.same_point(&p, &TreePoint::OnEdge { edge: e, offset: 1.5 }));
    assert_eq!(t.first_direction(&v(&t, "o"), &v(&t, "b")), Direction { edge: 1, forward: true });
}

/// x ↦ min(x, 1 − x) on [0, 1], subdivided at 1/2.
fn fold(degree: usize) -> TreeMap {
    let src = tree(&["a", "m", "b"], &[("a", "m", 0.5), ("m", "b", 0.5)], &[]);
    let tgt = tree(&["p", "q"], &[("p", "q", 0.5)], &[]);
    serde_json::from_value(serde_json::json!({
        "source": src, "target": tgt,
        "vertex_images": {"a": {"vertex": "p"}, "m": {"vertex": "q"}, "b": {"vertex": "p"}},
        "degree": degree, "witness": ["m"]
    }))
    .unwrap()
}

#[test]
fn fold_degrees_and_validation() {
    let f = fold(2);
    let m = v(f.source(), "m");
    assert_eq!(f.local_degree(&m).unwrap(), 2);
    assert_eq!(f.local_degree(&TreePoint::OnEdge { edge: 0, offset: 0.2 }).unwrap(), 1);
    assert_eq!(f.critical_locus().unwrap(), vec![m]);
    let r = f.validate();
    assert!(r.valid, "{:?}", r.failures);
    assert_eq!(r.samples, 2 + 7);

    let bad = fold(3).validate();
    assert!(!bad.valid);
    assert!(bad.failures.iter().any(|x| x.check == "fiber" && x.detail.contains("sums to 2")));
}

#[test]
fn fibers_next_to_a_vertex() {
    let f = fold(2);
    for gap in [1e-5, 1e-7, 2e-9] {
        for offset in [gap, 0.5 - gap] {
            let y = TreePoint::OnEdge { edge: 0, offset };
            assert_eq!(f.fiber_degree(&y).unwrap(), 2, "offset {offset}");
        }
    }
}

#[test]
fn isometric_maps() {
    let t = tripod();
    let images: Vec<TreePoint> = (0..4).map(TreePoint::Vertex).collect();
    let id = TreeMap::new(t.clone(), t.clone(), images, vec![1; 3], 1, vec![]).unwrap();
    assert!(id.validate().valid);
    assert!(id.critical_locus().unwrap().is_empty());
    for k in 0..3 {
        assert_eq!(id.local_degree(&TreePoint::OnEdge { edge: k, offset: 0.3 }).unwrap(), 1);
    }
    // Slope three on an edge: directional degree three in its interior.
    let src = tree(&["a", "b"], &[("a", "b", 1.0)], &[]);
    let tgt = tree(&["p", "q"], &[("p", "q", 3.0)], &[]);
    let s3 = TreeMap::new(src, tgt, vec![TreePoint::Vertex(0), TreePoint::Vertex(1)], vec![3], 3, vec![0, 1]).unwrap();
    assert_eq!(s3.local_degree(&TreePoint::OnEdge { edge: 0, offset: 0.5 }).unwrap(), 3);
    assert!(s3.critical_locus().unwrap().is_empty());
    assert!(s3.validate().valid);
}

/// The line with both ends marked, translated by c toward the end l.
fn shift(c: f64) -> TreeMap {
    let t = tree(&["l", "r"], &[("l", "r", 4.0)], &["l", "r"]);
    let images = vec![
        TreePoint::OnEdge { edge: 0, offset: -c },
        TreePoint::OnEdge { edge: 0, offset: 4.0 - c },
    ];
    TreeMap::new(t.clone(), t, images, vec![1], 1, vec![]).unwrap()
}

#[test]
fn shift_translation_lengths() {
    let c = 1.25;
    let f = shift(c);
    assert!(f.validate().valid, "{:?}", f.validate().failures);
    let (l, r) = (f.source().vertex("l").unwrap(), f.source().vertex("r").unwrap());
    for x0 in [0.0, 1.0, 3.5, 7.0, -2.0] {
        let b = TreePoint::OnEdge { edge: 0, offset: x0 };
        assert_eq!(f.translation_length_end(r, &b).unwrap(), c);
        assert_eq!(f.translation_length_end(l, &b).unwrap(), -c);
    }
    let y = f.eval(&TreePoint::OnEdge { edge: 0, offset: 10.0 }).unwrap();
    assert!(f.source().same_point(&y, &TreePoint::OnEdge { edge: 0, offset: 10.0 - c }));
    assert_eq!(cycle_translation_length(&f, &[r], &TreePoint::Vertex(l)).unwrap(), c);
}

#[test]
fn identity_and_expanding_ends() {
    let t = tree(&["o", "e"], &[("o", "e", 1.0)], &["e"]);
    let id = TreeMap::new(t.clone(), t.clone(), vec![TreePoint::Vertex(0), TreePoint::Vertex(1)], vec![1], 1, vec![]).unwrap();
    assert_eq!(id.translation_length_end(1, &TreePoint::Vertex(0)).unwrap(), 0.0);
    let ex = TreeMap::new(
        t.clone(),
        t,
        vec![TreePoint::Vertex(0), TreePoint::OnEdge { edge: 0, offset: 2.0 }],
        vec![2],
        2,
        vec![0, 1],
    )
    .unwrap();
    assert_eq!(ex.translation_length_end(1, &TreePoint::Vertex(0)).unwrap(), f64::NEG_INFINITY);
    assert_eq!(cycle_translation_length(&ex, &[1], &TreePoint::Vertex(0)).unwrap(), f64::NEG_INFINITY);
}

/// The reflection s ↦ a − s of a line whose vertices l, r sit at s = 0, 4.
fn reflection(a: f64) -> TreeMap {
    let t = tree(&["l", "r"], &[("l", "r", 4.0)], &["l", "r"]);
    let images = vec![TreePoint::OnEdge { edge: 0, offset: a }, TreePoint::OnEdge { edge: 0, offset: a - 4.0 }];
    TreeMap::new(t.clone(), t, images, vec![1], 1, vec![]).unwrap()
}

#[test]
fn two_cycle_of_ends() {
    let f = reflection(5.0);
    assert!(f.validate().valid, "{:?}", f.validate().failures);
    let (l, r) = (f.source().vertex("l").unwrap(), f.source().vertex("r").unwrap());
    assert_eq!(f.end_map(l).unwrap(), r);
    assert_eq!(f.end_map(r).unwrap(), l);
    // Oracle: with x⁰ at s = t, dist(s, t) − dist(5 − s, t) tends to
    // 5 − 2t out the r ray and to 2t − 5 out the l ray.
    for t in [0.0, 0.75, 2.5, 6.0, -1.5] {
        let b = TreePoint::OnEdge { edge: 0, offset: t };
        assert_eq!(f.translation_length_end(r, &b).unwrap(), 5.0 - 2.0 * t);
        assert_eq!(f.translation_length_end(l, &b).unwrap(), 2.0 * t - 5.0);
        assert_eq!(cycle_translation_length(&f, &[l, r], &b).unwrap(), 0.0);
    }
    assert!(cycle_translation_length(&f, &[l], &TreePoint::Vertex(l)).is_err());
}

#[test]
fn ray_not_eventually_mapped() {
    let t = tree(&["o", "e", "c"], &[("o", "e", 1.0), ("o", "c", 1.0)], &["e"]);
    // The end is sent into the finite leg c.
    let f = TreeMap::new(t.clone(), t, vec![TreePoint::Vertex(0), TreePoint::Vertex(2), TreePoint::Vertex(1)], vec![1, 1], 1, vec![]).unwrap();
    assert!(matches!(f.translation_length_end(1, &TreePoint::Vertex(0)), Err(crate::Error::Structure(_))));
    assert!(!f.validate().valid);
}

#[test]
fn fit_three_and_four_points() {
    let labels: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let d = vec![vec![0.0, 3.0, 4.0], vec![3.0, 0.0, 5.0], vec![4.0, 5.0, 0.0]];
    let r = fit_tree(&labels, &d, 1e-12).unwrap();
    assert!(r.distortion < 1e-12);
    assert_eq!(r.tree.vertex_count(), 4);
    // Legs are the Gromov products: x 1, y 2, z 3.
    let center = (0..4).find(|&k| r.tree.incident(k).len() == 3).unwrap();
    let legs: Vec<f64> = r.positions.iter().map(|&p| r.tree.vertex_distance(center, p)).collect();
    for (l, want) in legs.iter().zip([1.0, 2.0, 3.0]) {
        assert!((l - want).abs() < 1e-12);
    }

    let four: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    // Quartet ab|cd with pendant lengths 1, 2, 3, 4 and internal edge 5.
    let pend = [1.0, 2.0, 3.0, 4.0];
    let side = |i: usize| i / 2;
    let dm: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| if i == j { 0.0 } else { pend[i] + pend[j] + if side(i) == side(j) { 0.0 } else { 5.0 } }).collect())
        .collect();
    let r = fit_tree(&four, &dm, 1e-12).unwrap();
    assert!(r.distortion < 1e-12 && r.within_tolerance);
    assert!(r.worst_quadruple.unwrap().1 < 1e-12);
}

/// Lower bound on the L∞ error of any tree metric fitting a quartet,
/// minimized over the three topologies. For topology p|q a tree metric has
/// equal cross sums, both at least the inner sum; an error ε moves each
/// sum by at most 2ε.
fn quartet_oracle(d: &[Vec<f64>]) -> f64 {
    let pairs = [([0, 1], [2, 3]), ([0, 2], [1, 3]), ([0, 3], [1, 2])];
    pairs
        .iter()
        .map(|(p, q)| {
            let inner = d[p[0]][p[1]] + d[q[0]][q[1]];
            let c1 = d[p[0]][q[0]] + d[p[1]][q[1]];
            let c2 = d[p[0]][q[1]] + d[p[1]][q[0]];
            ((c1 - c2).abs() / 4.0)
                .max((inner - c1) / 4.0)
                .max((inner - c2) / 4.0)
                .max(0.0)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn square_has_positive_distortion() {
    let s2 = 2f64.sqrt();
    let labels: Vec<String> = ["p", "q", "r", "s"].iter().map(|s| s.to_string()).collect();
    let d = vec![
        vec![0.0, 1.0, s2, 1.0],
        vec![1.0, 0.0, 1.0, s2],
        vec![s2, 1.0, 0.0, 1.0],
        vec![1.0, s2, 1.0, 0.0],
    ];
    let oracle = quartet_oracle(&d);
    assert!((oracle - (2.0 * s2 - 2.0) / 4.0).abs() < 1e-15);
    let r = fit_tree(&labels, &d, 1e-6).unwrap();
    assert!(r.distortion >= oracle - 1e-9);
    assert!(!r.within_tolerance);
    let (_, v) = r.worst_quadruple.unwrap();
    assert!((v - (s2 - 1.0)).abs() < 1e-12);
}

#[test]
fn random_covers_validate_and_mutants_fail() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..40 {
        let f = random_cover(&mut rng, &CoverOptions::default()).unwrap();
        let r = f.validate();
        assert!(r.valid, "{:?}", r.failures);
        let json = serde_json::to_string(&f).unwrap();
        let back: TreeMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        let m = mutate_cover(&f, &mut rng);
        let r = m.validate();
        assert!(!r.valid && !r.failures.is_empty());
    }
}
