use std::collections::BTreeSet;

use barytree::tree::{cycle_translation_length, fit_tree, random_cover, CoverOptions, FiniteTree, TreeMap, TreePoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cover(seed: u64) -> TreeMap {
    random_cover(&mut ChaCha8Rng::seed_from_u64(seed), &CoverOptions::default()).unwrap()
}

fn random_point(t: &FiniteTree, rng: &mut ChaCha8Rng) -> TreePoint {
    let edge = rng.gen_range(0..t.edges().len());
    TreePoint::OnEdge { edge, offset: rng.gen_range(0.0..t.edges()[edge].length) }
}

fn subset(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
    if s.is_empty() {
        s.push(rng.gen_range(0..n));
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hull_is_idempotent_and_monotone(seed in any::<u64>()) {
        let map = cover(seed);
        let t = map.source();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let a = subset(t.vertex_count(), &mut rng);
        let mut b = a.clone();
        b.extend(subset(t.vertex_count(), &mut rng));
        let ha = t.hull_vertices(&a).unwrap();
        let again: Vec<usize> = ha.iter().copied().collect();
        prop_assert_eq!(&t.hull_vertices(&again).unwrap(), &ha);
        prop_assert!(ha.is_subset(&t.hull_vertices(&b).unwrap()));
        let targets: BTreeSet<usize> = a.iter().copied().collect();
        prop_assert!(targets.is_subset(&ha));
    }

    #[test]
    fn generic_fibers_have_full_degree(seed in any::<u64>()) {
        let map = cover(seed);
        prop_assert!(map.validate().valid);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for _ in 0..1000 {
            let y = random_point(map.target(), &mut rng);
            prop_assert_eq!(map.fiber_degree(&y).unwrap(), map.degree());
        }
    }

    #[test]
    fn end_lengths_ignore_basepoint(seed in any::<u64>()) {
        let map = cover(seed);
        let t = map.source();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let (p, q) = (random_point(t, &mut rng), random_point(t, &mut rng));
        for end in t.ends() {
            match (map.translation_length_end(end, &p), map.translation_length_end(end, &q)) {
                (Ok(a), Ok(b)) => prop_assert!(a == b || (a - b).abs() < 1e-9, "{a} vs {b}"),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }

    // An isometric shift s ↦ s + c of a line translates each end by ±c, and
    // a reflection swaps them with cycle length zero, from any basepoint.
    #[test]
    fn isometry_lengths_ignore_basepoint(c in -3.0..3.0f64, s in -6.0..6.0f64, t in -6.0..6.0f64) {
        let line = FiniteTree::new(vec!["l".into(), "r".into()], vec![(0, 1, 4.0)], &[0, 1]).unwrap();
        let on = |x: f64| TreePoint::OnEdge { edge: 0, offset: x };
        let shift = TreeMap::new(line.clone(), line.clone(), vec![on(c), on(4.0 + c)], vec![1], 1, vec![]).unwrap();
        for b in [on(s), on(t)] {
            prop_assert!((shift.translation_length_end(1, &b).unwrap() + c).abs() < 1e-12);
            prop_assert!((shift.translation_length_end(0, &b).unwrap() - c).abs() < 1e-12);
        }
        let refl = TreeMap::new(line.clone(), line, vec![on(c + 4.0), on(c)], vec![1], 1, vec![]).unwrap();
        prop_assert!(cycle_translation_length(&refl, &[0, 1], &on(s)).unwrap().abs() < 1e-12);
        prop_assert!(cycle_translation_length(&refl, &[0, 1], &on(t)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn fit_reproduces_tree_metrics(seed in any::<u64>()) {
        let map = cover(seed);
        let t = map.source();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let picked = subset(t.vertex_count(), &mut rng);
        prop_assume!(picked.len() >= 2);
        let labels: Vec<String> = picked.iter().map(|&v| t.label(v).to_string()).collect();
        let d: Vec<Vec<f64>> = picked.iter().map(|&u| picked.iter().map(|&v| t.vertex_distance(u, v)).collect()).collect();
        let fit = fit_tree(&labels, &d, 1e-9).unwrap();
        prop_assert!(fit.within_tolerance, "distortion {}", fit.distortion);
        for (i, &pi) in fit.positions.iter().enumerate() {
            for (j, &pj) in fit.positions.iter().enumerate() {
                prop_assert!((fit.tree.vertex_distance(pi, pj) - d[i][j]).abs() < 1e-9);
            }
        }
    }
}
