use heatgraph::generators::{gen_lattice, gen_star, gen_tree, random_weights, subdivide_with_map, LatticeLengths};
use heatgraph::geometry::{ball_geometry, distance, split_at_point, weighted_distance};
use heatgraph::{MetricGraph, Point};
use proptest::prelude::*;

fn graphs() -> Vec<MetricGraph> {
    vec![
        gen_star(3, 2.0, None).unwrap(),
        gen_star(5, 1.5, None).unwrap(),
        gen_tree(2, 3, 1.0).unwrap(),
        gen_lattice(2, 4, LatticeLengths::Uniform { lo: 0.5, hi: 2.0, seed: 3 }).unwrap(),
    ]
}

fn pick(g: &MetricGraph, e: usize, s: f64) -> Point {
    let edge = &g.edges()[e % g.edge_count()];
    g.point(edge.id, s * edge.len).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_axioms(gi in 0usize..4, e in prop::array::uniform3(0usize..64), s in prop::array::uniform3(0.0f64..1.0)) {
        let gs = graphs();
        let g = &gs[gi];
        let [x, y, z] = [pick(g, e[0], s[0]), pick(g, e[1], s[1]), pick(g, e[2], s[2])];
        let dxy = distance(g, x, y).unwrap();
        let dyx = distance(g, y, x).unwrap();
        let dxz = distance(g, x, z).unwrap();
        let dzy = distance(g, z, y).unwrap();
        prop_assert!(distance(g, x, x).unwrap().abs() < 1e-12);
        prop_assert!((dxy - dyx).abs() <= 1e-12 * (1.0 + dxy));
        prop_assert!(dxy <= dxz + dzy + 1e-12);
    }

    #[test]
    fn ball_volume_monotone_and_lipschitz(gi in 0usize..4, e in 0usize..64, s in 0.0f64..1.0, r in 0.05f64..3.0, dr in 0.0f64..0.5) {
        let gs = graphs();
        let g = &gs[gi];
        let x = pick(g, e, s);
        let small = ball_geometry(g, x, r).unwrap().volume;
        let big = ball_geometry(g, x, r + dr).unwrap().volume;
        prop_assert!(small <= big + 1e-12);
        // at most two endpoints per edge, each moving at unit speed
        prop_assert!(big - small <= 2.0 * g.edge_count() as f64 * dr + 1e-12);
        prop_assert!(small >= r.min(g.total_measure()) - 1e-12);
    }

    #[test]
    fn splitting_preserves_balls(gi in 0usize..4, e in 0usize..64, s in 0.05f64..0.95) {
        let gs = graphs();
        let g = &gs[gi];
        let x = pick(g, e, s);
        let (split, v) = split_at_point(g, x).unwrap();
        let back = ball_geometry(&split, Point::Vertex(v), 0.5).unwrap().volume;
        prop_assert!((back - ball_geometry(g, x, 0.5).unwrap().volume).abs() < 1e-12);
        prop_assert!((split.total_measure() - g.total_measure()).abs() < 1e-10);
    }

    #[test]
    fn subdivision_preserves_distances(gi in 0usize..4, e in prop::array::uniform2(0usize..64), s in prop::array::uniform2(0.0f64..1.0), cap in 0.2f64..1.0) {
        let gs = graphs();
        let g = &gs[gi];
        let sub = subdivide_with_map(g, cap).unwrap();
        let (x, y) = (pick(g, e[0], s[0]), pick(g, e[1], s[1]));
        let d = distance(g, x, y).unwrap();
        let d2 = distance(&sub.graph, sub.map_point(x).unwrap(), sub.map_point(y).unwrap()).unwrap();
        prop_assert!((d - d2).abs() <= 1e-10 * (1.0 + d));
    }

    #[test]
    fn weighted_distance_is_lambda_comparable(lambda in 1.0f64..8.0, seed in 0u64..1000, e in prop::array::uniform2(0usize..64), s in prop::array::uniform2(0.0f64..1.0)) {
        let base = gen_star(3, 2.0, None).unwrap();
        let g = random_weights(&base, lambda, 3, seed).unwrap();
        let (x, y) = (pick(&g, e[0], s[0]), pick(&g, e[1], s[1]));
        let d = distance(&g, x, y).unwrap();
        let dw = weighted_distance(&g, x, y).unwrap();
        prop_assert!(dw <= lambda * d * (1.0 + 1e-10) + 1e-12);
        prop_assert!(d <= lambda * dw * (1.0 + 1e-10) + 1e-12);
    }
}

#[test]
fn json_round_trip_keeps_edges() {
    for g in graphs() {
        let back = MetricGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back.edges(), g.edges());
        assert_eq!(back.vertices(), g.vertices());
    }
}
