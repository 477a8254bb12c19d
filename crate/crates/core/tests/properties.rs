//! Property tests for the metric layer and the duality layer: metric
//! axioms on random connected graphs, agreement of the geodesic distance
//! with exhaustive simple-path enumeration, and conjugacy properties of
//! the transform under random composite coefficients.

use std::sync::Arc;

use proptest::prelude::*;

use hjgraph_core::graph::{EdgeId, GraphPoint, MetricGraph, SpaceLattice};
use hjgraph_core::hamiltonian::{
    dual_roundtrip, legendre_transform, legendre_transform_grid, HKind, HamiltonianSpec,
    Lagrangian, NodeFn,
};

/// Random connected multigraph: a random tree plus up to two extra edges.
#[derive(Debug, Clone)]
struct RandomGraph {
    vertices: Vec<usize>,
    edges: Vec<(usize, usize, f64)>,
}

fn graph_strategy() -> impl Strategy<Value = RandomGraph> {
    (2usize..6)
        .prop_flat_map(|n| {
            let tree = proptest::collection::vec(any::<prop::sample::Index>(), n - 1);
            let lens = proptest::collection::vec(0.2f64..2.0, n + 1);
            let extra = proptest::collection::vec(
                (any::<prop::sample::Index>(), any::<prop::sample::Index>()),
                0..3,
            );
            (Just(n), tree, lens, extra)
        })
        .prop_map(|(n, tree, lens, extra)| {
            let mut edges = Vec::new();
            for i in 1..n {
                let parent = tree[i - 1].index(i);
                edges.push((parent, i, lens[i - 1]));
            }
            for (k, (a, b)) in extra.into_iter().enumerate() {
                if edges.len() >= 6 {
                    break;
                }
                edges.push((a.index(n), b.index(n), lens[(n - 1 + k) % lens.len()]));
            }
            RandomGraph {
                vertices: (0..n).collect(),
                edges,
            }
        })
}

fn point_strategy(g: &MetricGraph, seed: (usize, f64)) -> GraphPoint {
    let e = seed.0 % g.num_edges();
    let len = g.edge(EdgeId(e)).length;
    GraphPoint::new(EdgeId(e), seed.1.clamp(0.0, 1.0) * len)
}

/// Exhaustive oracle: minimum of the direct same-edge route and every
/// vertex-simple edge path between the host edges' endpoints.
fn enumeration_distance(g: &MetricGraph, a: GraphPoint, b: GraphPoint) -> f64 {
    fn simple_paths(
        g: &MetricGraph,
        at: usize,
        target: usize,
        visited: &mut Vec<bool>,
        acc: f64,
        best: &mut f64,
    ) {
        if at == target {
            *best = best.min(acc);
            return;
        }
        for e in g.edges() {
            for (u, v) in [(e.u.0, e.v.0), (e.v.0, e.u.0)] {
                if u == at && !visited[v] {
                    visited[v] = true;
                    simple_paths(g, v, target, visited, acc + e.length, best);
                    visited[v] = false;
                }
            }
        }
    }
    let ea = g.edge(a.edge);
    let eb = g.edge(b.edge);
    let mut best = if a.edge == b.edge {
        (a.offset - b.offset).abs()
    } else {
        f64::INFINITY
    };
    for (va, da) in [(ea.u.0, a.offset), (ea.v.0, ea.length - a.offset)] {
        for (vb, db) in [(eb.u.0, b.offset), (eb.v.0, eb.length - b.offset)] {
            let mut between = f64::INFINITY;
            let mut visited = vec![false; g.num_vertices()];
            visited[va] = true;
            simple_paths(g, va, vb, &mut visited, 0.0, &mut between);
            if va == vb {
                between = 0.0;
            }
            best = best.min(da + between + db);
        }
    }
    best
}

proptest! {
    #[test]
    fn metric_axioms(
        raw in graph_strategy(),
        pa in (any::<usize>(), 0.0f64..1.0),
        pb in (any::<usize>(), 0.0f64..1.0),
        pc in (any::<usize>(), 0.0f64..1.0),
    ) {
        let g = MetricGraph::new(raw.vertices.clone(), raw.edges.clone()).unwrap();
        let (a, b, c) = (
            point_strategy(&g, pa),
            point_strategy(&g, pb),
            point_strategy(&g, pc),
        );
        let d = |x, y| g.distance(x, y).unwrap();
        // Identity of indiscernibles under the canonical representation.
        prop_assert!(d(a, a) == 0.0);
        if g.same_location(a, b) {
            prop_assert!(d(a, b) <= 1e-9);
        } else {
            prop_assert!(d(a, b) > 0.0);
        }
        // Symmetry and the triangle inequality.
        prop_assert!((d(a, b) - d(b, a)).abs() <= 1e-12);
        prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-12);
    }

    #[test]
    fn distance_matches_exhaustive_enumeration(
        raw in graph_strategy(),
        pa in (any::<usize>(), 0.0f64..1.0),
        pb in (any::<usize>(), 0.0f64..1.0),
    ) {
        let g = MetricGraph::new(raw.vertices.clone(), raw.edges.clone()).unwrap();
        prop_assume!(g.num_edges() <= 6);
        let (a, b) = (point_strategy(&g, pa), point_strategy(&g, pb));
        let fast = g.distance(a, b).unwrap();
        let slow = enumeration_distance(&g, a, b);
        prop_assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn lattice_nodes_respect_spacing(raw in graph_strategy(), dx in 0.05f64..0.7) {
        let g = Arc::new(MetricGraph::new(raw.vertices.clone(), raw.edges.clone()).unwrap());
        let lat = SpaceLattice::build(g.clone(), dx).unwrap();
        // Vertices appear exactly once.
        let vertex_nodes = (0..lat.num_nodes())
            .filter(|&i| g.vertex_at(lat.node_point(i)).is_some())
            .count();
        prop_assert_eq!(vertex_nodes, g.num_vertices());
        // Adjacent nodes sit within dx of each other.
        for i in 0..lat.num_nodes() {
            for &(j, dist) in lat.adjacency(i) {
                let _ = j;
                prop_assert!(dist <= dx + 1e-12);
            }
        }
    }

    #[test]
    fn conjugacy_and_roundtrip_for_random_composites(
        sigma in 0.4f64..2.5,
        f in -1.0f64..1.0,
        quadratic in any::<bool>(),
        p in 0.0f64..4.0,
        v in 0.0f64..4.0,
    ) {
        let g = Arc::new(MetricGraph::new(vec![0, 1], vec![(0, 1, 1.0)]).unwrap());
        let lat = Arc::new(SpaceLattice::build(g, 0.25).unwrap());
        let h = if quadratic { HKind::Quadratic } else { HKind::Linear };
        let ham = Arc::new(
            HamiltonianSpec::composite(
                lat.clone(),
                NodeFn::Constant(sigma),
                h,
                NodeFn::Constant(f),
            )
            .unwrap(),
        );
        let x = GraphPoint::new(EdgeId(0), 0.5);
        let (p_max, n_p) = (20.0, 2048);
        let l_grid = legendre_transform_grid(&ham, x, v, p_max, n_p).unwrap();
        // Conjugacy order in its rearranged exact form: pv - H <= L for
        // every grid p (L is the max of exactly these terms).
        if l_grid.is_finite() {
            for i in 0..=64 {
                // 64 divides n_p, so these p values sit on the grid.
                let pg = p_max * i as f64 / 64.0;
                prop_assert!(pg * v - ham.eval(x, pg) <= l_grid + 1e-12);
            }
        }
        // Closed form agrees with the grid route where finite.
        let l_closed = legendre_transform(&ham, x, v, p_max, n_p).unwrap();
        if l_closed.is_finite() && l_grid.is_finite() {
            prop_assert!((l_closed - l_grid).abs() <= 1e-3 * (1.0 + l_closed.abs()));
        } else if v < sigma * 0.999 || quadratic {
            prop_assert!(l_closed.is_finite());
        }
        // Round-trip recovers H within the v-grid resolution. The
        // maximizing speed is σ·p < 10 for the sampled ranges, so a cap
        // of 12 keeps it interior.
        let lag = Lagrangian::new(ham.clone(), p_max, n_p).unwrap();
        let rt = dual_roundtrip(&lag, x, p, 12.0, 2048).unwrap();
        prop_assert!(rt <= ham.eval(x, p) + 1e-9);
        prop_assert!((rt - ham.eval(x, p)).abs() <= 2e-2 * (1.0 + ham.eval(x, p).abs()));
    }
}
